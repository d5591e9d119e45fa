//! Little-endian binary files for cached closest points and field snapshots.
//!
//! Layout: 4-byte magic, `u32` version, the grid spec (box, dims, spacing),
//! `f64` band tolerance, then a payload of `u64` count followed by one record
//! per band node (`u32` × 3 grid index, then the values).

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::band_grid::{BandedGrid, GridBox, GridSpec};
use crate::cpfn::{CpKind, CpTable};
use crate::error::{CpError, Result};
use crate::geometry::Point;

const CP_MAGIC: &[u8; 4] = b"CPTB";
const FIELD_MAGIC: &[u8; 4] = b"CPFD";
const VERSION: u32 = 1;

fn write_header(w: &mut impl Write, magic: &[u8; 4], grid: &BandedGrid) -> Result<()> {
    w.write_all(magic)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    for v in grid.spec.bbox.min.iter().chain(&grid.spec.bbox.max) {
        w.write_f64::<LittleEndian>(*v)?;
    }
    for d in grid.spec.dims {
        w.write_u32::<LittleEndian>(d as u32)?;
    }
    for h in grid.spec.h {
        w.write_f64::<LittleEndian>(h)?;
    }
    w.write_f64::<LittleEndian>(grid.band_tol)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct FileHeader {
    pub spec: GridSpec,
    pub band_tol: f64,
}

fn read_header(r: &mut impl Read, magic: &[u8; 4]) -> Result<FileHeader> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(CpError::Format(format!("bad magic {m:?}")));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(CpError::Format(format!("unsupported version {version}")));
    }
    let mut b = [0.0; 6];
    for v in &mut b {
        *v = r.read_f64::<LittleEndian>()?;
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = r.read_u32::<LittleEndian>()? as usize;
    }
    let mut h = [0.0; 3];
    for v in &mut h {
        *v = r.read_f64::<LittleEndian>()?;
    }
    let band_tol = r.read_f64::<LittleEndian>()?;
    Ok(FileHeader {
        spec: GridSpec {
            bbox: GridBox {
                min: [b[0], b[1], b[2]],
                max: [b[3], b[4], b[5]],
            },
            dims,
            h,
        },
        band_tol,
    })
}

fn write_index(w: &mut impl Write, idx: [usize; 3]) -> Result<()> {
    for i in idx {
        w.write_u32::<LittleEndian>(i as u32)?;
    }
    Ok(())
}

fn read_index(r: &mut impl Read) -> Result<[usize; 3]> {
    Ok([
        r.read_u32::<LittleEndian>()? as usize,
        r.read_u32::<LittleEndian>()? as usize,
        r.read_u32::<LittleEndian>()? as usize,
    ])
}

pub fn write_cp_table(w: &mut impl Write, grid: &BandedGrid, table: &CpTable) -> Result<()> {
    write_header(w, CP_MAGIC, grid)?;
    w.write_u8(table.kind.code())?;
    w.write_f64::<LittleEndian>(table.max_residual)?;
    w.write_u64::<LittleEndian>(table.len() as u64)?;
    for (b, y) in table.points.iter().enumerate() {
        write_index(w, grid.index(b))?;
        for v in y.iter() {
            w.write_f64::<LittleEndian>(*v)?;
        }
    }
    Ok(())
}

/// Reads a table and the grid indices it was computed on.
pub fn read_cp_table(r: &mut impl Read) -> Result<(FileHeader, Vec<[usize; 3]>, CpTable)> {
    let header = read_header(r, CP_MAGIC)?;
    let code = r.read_u8()?;
    let kind = CpKind::from_code(code).ok_or_else(|| CpError::Format(format!("cp kind {code}")))?;
    let max_residual = r.read_f64::<LittleEndian>()?;
    let n = r.read_u64::<LittleEndian>()? as usize;
    let mut indices = Vec::with_capacity(n);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        indices.push(read_index(r)?);
        points.push(Point::new(
            r.read_f64::<LittleEndian>()?,
            r.read_f64::<LittleEndian>()?,
            r.read_f64::<LittleEndian>()?,
        ));
    }
    Ok((
        header,
        indices,
        CpTable {
            kind,
            points,
            max_residual,
        },
    ))
}

/// Writes the listed band offsets of a scalar field.
pub fn write_field(w: &mut impl Write, grid: &BandedGrid, values: &[f64], offsets: &[u32]) -> Result<()> {
    write_header(w, FIELD_MAGIC, grid)?;
    w.write_u64::<LittleEndian>(offsets.len() as u64)?;
    for &b in offsets {
        write_index(w, grid.index(b as usize))?;
        w.write_f64::<LittleEndian>(values[b as usize])?;
    }
    Ok(())
}

pub fn read_field(r: &mut impl Read) -> Result<(FileHeader, Vec<([usize; 3], f64)>)> {
    let header = read_header(r, FIELD_MAGIC)?;
    let n = r.read_u64::<LittleEndian>()? as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push((read_index(r)?, r.read_f64::<LittleEndian>()?));
    }
    Ok((header, out))
}
