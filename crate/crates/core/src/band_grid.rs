//! Uniform Cartesian grids restricted to a band around a surface.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cpfn::CpTable;
use crate::error::{CpError, Result};
use crate::geometry::{LevelSetSurface, Point};
use crate::interp::{stencil_base, InterpKind};

/// Axis-aligned bounds of the embedding box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridBox {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Default for GridBox {
    fn default() -> Self {
        Self {
            min: [-1.25, -1.25, -0.25],
            max: [1.25, 1.25, 1.25],
        }
    }
}

impl GridBox {
    pub fn extent(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    /// Uniform spacing; node counts are `round(extent/h) + 1`.
    Spacing(f64),
    /// Node counts per axis, endpoints included.
    Nodes([usize; 3]),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bbox: GridBox,
    pub dims: [usize; 3],
    pub h: [f64; 3],
}

impl GridSpec {
    pub fn new(bbox: GridBox, resolution: Resolution) -> Result<Self> {
        let (dims, h) = match resolution {
            Resolution::Spacing(h) => {
                if !(h > 0.0) {
                    return Err(CpError::InvalidConfig(format!("grid spacing {h}")));
                }
                let dims = [0, 1, 2].map(|a| (bbox.extent(a) / h).round() as usize + 1);
                (dims, [h; 3])
            }
            Resolution::Nodes(n) => {
                if n.iter().any(|&d| d < 2) {
                    return Err(CpError::InvalidConfig(format!("node counts {n:?}")));
                }
                (n, [0, 1, 2].map(|a| bbox.extent(a) / (n[a] - 1) as f64))
            }
        };
        Ok(Self { bbox, dims, h })
    }

    pub fn node_position(&self, idx: [usize; 3]) -> Point {
        Point::new(
            self.bbox.min[0] + idx[0] as f64 * self.h[0],
            self.bbox.min[1] + idx[1] as f64 * self.h[1],
            self.bbox.min[2] + idx[2] as f64 * self.h[2],
        )
    }

    pub fn contains_index(&self, idx: [i64; 3]) -> bool {
        (0..3).all(|a| idx[a] >= 0 && (idx[a] as usize) < self.dims[a])
    }

    fn key(&self, idx: [usize; 3]) -> u64 {
        ((idx[0] as u64 * self.dims[1] as u64) + idx[1] as u64) * self.dims[2] as u64 + idx[2] as u64
    }

    pub fn total_nodes(&self) -> usize {
        self.dims.iter().product()
    }
}

const NONE: u32 = u32::MAX;

/// Grid nodes with `(Σ φ_j²)^{1/2} ≤ band_tol`, stored in lexicographic order.
#[derive(Clone, Debug)]
pub struct BandedGrid {
    pub spec: GridSpec,
    pub band_tol: f64,
    nodes: Vec<[u32; 3]>,
    lookup: HashMap<u64, u32>,
    // -x, +x, -y, +y, -z, +z
    ring: Vec<[u32; 6]>,
}

impl BandedGrid {
    pub fn build(surface: &LevelSetSurface, spec: GridSpec, band_tol: f64) -> Result<Self> {
        if !(band_tol > 0.0) {
            return Err(CpError::InvalidConfig(format!("band_tol {band_tol}")));
        }
        let [n0, n1, n2] = spec.dims;
        let nodes: Vec<[u32; 3]> = (0..n0)
            .into_par_iter()
            .flat_map_iter(|i| {
                let mut out = Vec::new();
                for j in 0..n1 {
                    for k in 0..n2 {
                        if surface.band_distance(&spec.node_position([i, j, k])) <= band_tol {
                            out.push([i as u32, j as u32, k as u32]);
                        }
                    }
                }
                out
            })
            .collect();
        if nodes.is_empty() {
            return Err(CpError::EmptyBand { band_tol });
        }
        Ok(Self::from_nodes(spec, band_tol, nodes))
    }

    fn from_nodes(spec: GridSpec, band_tol: f64, nodes: Vec<[u32; 3]>) -> Self {
        let lookup: HashMap<u64, u32> = nodes
            .iter()
            .enumerate()
            .map(|(b, n)| (spec.key(n.map(|v| v as usize)), b as u32))
            .collect();
        let mut grid = Self {
            spec,
            band_tol,
            nodes,
            lookup,
            ring: Vec::new(),
        };
        grid.ring = (0..grid.nodes.len())
            .map(|b| {
                let mut r = [NONE; 6];
                for axis in 0..3 {
                    for (s, step) in [-1i64, 1].into_iter().enumerate() {
                        r[2 * axis + s] = grid
                            .offset_of(grid.shifted(b, axis, step))
                            .map_or(NONE, |o| o as u32);
                    }
                }
                r
            })
            .collect();
        grid
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index(&self, b: usize) -> [usize; 3] {
        self.nodes[b].map(|v| v as usize)
    }

    pub fn position(&self, b: usize) -> Point {
        self.spec.node_position(self.index(b))
    }

    pub fn offset_of(&self, idx: [i64; 3]) -> Option<usize> {
        if !self.spec.contains_index(idx) {
            return None;
        }
        self.lookup
            .get(&self.spec.key(idx.map(|v| v as usize)))
            .map(|&o| o as usize)
    }

    fn shifted(&self, b: usize, axis: usize, step: i64) -> [i64; 3] {
        let mut idx = self.nodes[b].map(|v| v as i64);
        idx[axis] += step;
        idx
    }

    /// Band offset of the node `step` cells away along `axis`, if it is in the band.
    pub fn neighbor(&self, b: usize, axis: usize, step: i64) -> Option<usize> {
        match step {
            -1 | 1 => {
                let r = self.ring[b][2 * axis + usize::from(step > 0)];
                (r != NONE).then_some(r as usize)
            }
            _ => self.offset_of(self.shifted(b, axis, step)),
        }
    }

    /// First-ring neighbors in the order -x, +x, -y, +y, -z, +z (`u32::MAX` when missing).
    pub fn ring(&self, b: usize) -> &[u32; 6] {
        &self.ring[b]
    }

    pub fn positions(&self) -> Vec<Point> {
        (0..self.len()).map(|b| self.position(b)).collect()
    }
}

/// Which neighbors an operator reads from the evolved field at each evaluation point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StencilReach {
    /// The six face neighbors.
    FirstRing,
    /// Face neighbors of face neighbors (two-stage central differencing).
    SecondRing,
}

/// Node sets the closest point method actually touches.
#[derive(Clone, Debug, Default)]
pub struct Masks {
    /// Nodes where the spatial operator is evaluated: every node of every
    /// interpolation stencil around a cached closest point.
    pub evolvable: Vec<u32>,
    /// Nodes that are re-extended by interpolation every step; the evolvable
    /// nodes together with everything the operator reads around them.
    pub interp_safe: Vec<u32>,
    pub evolvable_flag: Vec<bool>,
    pub interp_safe_flag: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandReport {
    pub band: usize,
    pub evolvable: usize,
    pub interp_safe: usize,
}

impl Masks {
    pub fn report(&self, grid: &BandedGrid) -> BandReport {
        BandReport {
            band: grid.len(),
            evolvable: self.evolvable.len(),
            interp_safe: self.interp_safe.len(),
        }
    }
}

impl BandedGrid {
    /// Classifies band nodes for a given interpolation scheme and operator reach.
    ///
    /// Fails with `StencilStarvation` when an interpolation stencil or an
    /// operator stencil leaves the band.
    pub fn classify(&self, cps: &CpTable, interp: InterpKind, reach: StencilReach) -> Result<Masks> {
        assert_eq!(cps.len(), self.len());
        let width = interp.width() as i64;
        let mut evolvable_flag = vec![false; self.len()];
        let mut starving: Vec<[usize; 3]> = Vec::new();

        for (b, y) in cps.points.iter().enumerate() {
            let base = stencil_base(&self.spec, y, interp.width());
            let mut ok = true;
            for c in 0..width {
                for bb in 0..width {
                    for a in 0..width {
                        match self.offset_of([base[0] + a, base[1] + bb, base[2] + c]) {
                            Some(o) => evolvable_flag[o] = true,
                            None => ok = false,
                        }
                    }
                }
            }
            if !ok {
                starving.push(self.index(b));
            }
        }

        let mut interp_safe_flag = evolvable_flag.clone();
        for b in 0..self.len() {
            if !evolvable_flag[b] {
                continue;
            }
            let mut ok = true;
            for &r in &self.ring[b] {
                if r == NONE {
                    ok = false;
                    continue;
                }
                interp_safe_flag[r as usize] = true;
                if reach == StencilReach::SecondRing {
                    for &rr in &self.ring[r as usize] {
                        if rr == NONE {
                            ok = false;
                        } else {
                            interp_safe_flag[rr as usize] = true;
                        }
                    }
                }
            }
            if !ok {
                starving.push(self.index(b));
            }
        }

        if let Some(&first) = starving.first() {
            return Err(CpError::StencilStarvation {
                count: starving.len(),
                first,
                band_tol: self.band_tol,
            });
        }
        let collect = |flags: &[bool]| {
            flags
                .iter()
                .enumerate()
                .filter(|(_, &f)| f)
                .map(|(b, _)| b as u32)
                .collect::<Vec<_>>()
        };
        Ok(Masks {
            evolvable: collect(&evolvable_flag),
            interp_safe: collect(&interp_safe_flag),
            evolvable_flag,
            interp_safe_flag,
        })
    }
}

/// Scalar values per band node.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn constant(grid: &BandedGrid, c: f64) -> Self {
        Self {
            values: vec![c; grid.len()],
        }
    }

    /// Checks the listed offsets for NaN/inf.
    pub fn check_finite(&self, offsets: &[u32], step: usize) -> Result<()> {
        match offsets.iter().find(|&&b| !self.values[b as usize].is_finite()) {
            Some(&b) => Err(CpError::NaNDetected {
                step,
                offset: b as usize,
            }),
            None => Ok(()),
        }
    }
}
