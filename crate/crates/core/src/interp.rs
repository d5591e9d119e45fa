//! Tensor-product interpolation of band fields at arbitrary points.

use serde::{Deserialize, Serialize};

use crate::band_grid::{BandedGrid, GridSpec};
use crate::error::{CpError, Result};
use crate::geometry::Point;

pub const WENO_EPSILON: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpKind {
    Trilinear,
    Tricubic,
    Weno,
}

impl InterpKind {
    /// Stencil nodes per axis.
    pub fn width(self) -> usize {
        match self {
            InterpKind::Trilinear => 2,
            InterpKind::Tricubic | InterpKind::Weno => 4,
        }
    }
}

/// Lower-corner grid index of the `width`³ stencil around `p`.
///
/// `p` lies in the cell `[i, i+1]` per axis; 4-wide stencils start one node lower.
pub fn stencil_base(spec: &GridSpec, p: &Point, width: usize) -> [i64; 3] {
    let shift = (width as i64 - 2) / 2;
    [0, 1, 2].map(|a| ((p[a] - spec.bbox.min[a]) / spec.h[a]).floor() as i64 - shift)
}

/// Fractional position of `p` inside its cell, per axis.
fn cell_offset(spec: &GridSpec, p: &Point) -> [f64; 3] {
    [0, 1, 2].map(|a| {
        let t = (p[a] - spec.bbox.min[a]) / spec.h[a];
        t - t.floor()
    })
}

/// Lagrange weights on nodes -1, 0, 1, 2 at `0 ≤ ξ ≤ 1`.
pub fn cubic_weights(xi: f64) -> [f64; 4] {
    let (a, b, c, d) = (xi + 1.0, xi, xi - 1.0, xi - 2.0);
    [
        -b * c * d / 6.0,
        a * c * d / 2.0,
        -a * b * d / 2.0,
        a * b * c / 6.0,
    ]
}

pub fn linear_weights(xi: f64) -> [f64; 2] {
    [1.0 - xi, xi]
}

/// WENO blend of the two quadratics on nodes -1..1 and 0..2,
/// evaluated at `0 ≤ ξ ≤ 1` between nodes 0 and 1.
pub fn weno1d(f: [f64; 4], xi: f64, eps: f64) -> f64 {
    let [f0, f1, f2, f3] = f;
    let b0 = 0.5 * (f2 - f0);
    let a0 = 0.5 * (f0 - 2.0 * f1 + f2);
    let q0 = f1 + b0 * xi + a0 * xi * xi;
    let b1 = 0.5 * (f3 - f1);
    let a1 = 0.5 * (f1 - 2.0 * f2 + f3);
    let q1 = f2 + b1 * (xi - 1.0) + a1 * (xi - 1.0) * (xi - 1.0);

    let is0 = b0 * b0 + a0 * b0 + 4.0 / 3.0 * a0 * a0;
    let is1 = b1 * b1 - a1 * b1 + 4.0 / 3.0 * a1 * a1;
    let c0 = (2.0 - xi) / 3.0;
    let c1 = (1.0 + xi) / 3.0;
    let alpha0 = c0 / ((eps + is0) * (eps + is0));
    let alpha1 = c1 / ((eps + is1) * (eps + is1));
    (alpha0 * q0 + alpha1 * q1) / (alpha0 + alpha1)
}

/// Stencil values ordered with the first axis fastest.
fn combine(kind: InterpKind, vals: &[f64], xi: [f64; 3], eps: f64) -> f64 {
    match kind {
        InterpKind::Trilinear => {
            let w = xi.map(linear_weights);
            let mut s = 0.0;
            for c in 0..2 {
                for b in 0..2 {
                    for a in 0..2 {
                        s += w[0][a] * w[1][b] * w[2][c] * vals[a + 2 * (b + 2 * c)];
                    }
                }
            }
            s
        }
        InterpKind::Tricubic => {
            let w = xi.map(cubic_weights);
            let mut s = 0.0;
            for c in 0..4 {
                let mut sc = 0.0;
                for b in 0..4 {
                    let row = &vals[4 * (b + 4 * c)..4 * (b + 4 * c) + 4];
                    let sx = w[0][0] * row[0] + w[0][1] * row[1] + w[0][2] * row[2] + w[0][3] * row[3];
                    sc += w[1][b] * sx;
                }
                s += w[2][c] * sc;
            }
            s
        }
        InterpKind::Weno => {
            let mut plane = [0.0; 16];
            for (r, out) in plane.iter_mut().enumerate() {
                let row = &vals[4 * r..4 * r + 4];
                *out = weno1d([row[0], row[1], row[2], row[3]], xi[0], eps);
            }
            let mut line = [0.0; 4];
            for (c, out) in line.iter_mut().enumerate() {
                let p = &plane[4 * c..4 * c + 4];
                *out = weno1d([p[0], p[1], p[2], p[3]], xi[1], eps);
            }
            weno1d(line, xi[2], eps)
        }
    }
}

/// Interpolates a band field at `p`; every stencil node must be in the band.
pub fn interpolate(grid: &BandedGrid, values: &[f64], p: &Point, kind: InterpKind) -> Result<f64> {
    let w = kind.width() as i64;
    let base = stencil_base(&grid.spec, p, kind.width());
    let mut vals = Vec::with_capacity((w * w * w) as usize);
    for c in 0..w {
        for b in 0..w {
            for a in 0..w {
                let node = [base[0] + a, base[1] + b, base[2] + c];
                let o = grid.offset_of(node).ok_or(CpError::StencilOutOfBand {
                    stage: "interpolate",
                    node,
                })?;
                vals.push(values[o]);
            }
        }
    }
    Ok(combine(kind, &vals, cell_offset(&grid.spec, p), WENO_EPSILON))
}

/// Stencil offsets and weights for a fixed list of target points, resolved
/// once so repeated interpolation is a gather plus a weighted sum.
#[derive(Clone, Debug)]
pub struct InterpPlan {
    pub kind: InterpKind,
    nodes: Vec<u32>,
    xi: Vec<[f64; 3]>,
    // per point: 3 axes × width weights (unused for WENO)
    weights: Vec<f64>,
}

impl InterpPlan {
    pub fn new(grid: &BandedGrid, points: &[Point], kind: InterpKind) -> Result<Self> {
        let w = kind.width() as i64;
        let mut nodes = Vec::with_capacity(points.len() * (w * w * w) as usize);
        let mut xi = Vec::with_capacity(points.len());
        let mut weights = Vec::with_capacity(points.len() * 3 * w as usize);
        for p in points {
            let base = stencil_base(&grid.spec, p, kind.width());
            for c in 0..w {
                for b in 0..w {
                    for a in 0..w {
                        let node = [base[0] + a, base[1] + b, base[2] + c];
                        let o = grid.offset_of(node).ok_or(CpError::StencilOutOfBand {
                            stage: "interpolation plan",
                            node,
                        })?;
                        nodes.push(o as u32);
                    }
                }
            }
            let x = cell_offset(&grid.spec, p);
            for t in x {
                match kind {
                    InterpKind::Trilinear => weights.extend(linear_weights(t)),
                    InterpKind::Tricubic => weights.extend(cubic_weights(t)),
                    InterpKind::Weno => {}
                }
            }
            xi.push(x);
        }
        Ok(Self {
            kind,
            nodes,
            xi,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    fn stencil_len(&self) -> usize {
        let w = self.kind.width();
        w * w * w
    }

    /// Interpolated value at the `i`-th planned point.
    pub fn eval(&self, i: usize, values: &[f64]) -> f64 {
        self.eval_fields(i, [values])[0]
    }

    /// Interpolates several fields sharing the same stencil.
    pub fn eval_fields<const N: usize>(&self, i: usize, fields: [&[f64]; N]) -> [f64; N] {
        let n = self.stencil_len();
        let nodes = &self.nodes[i * n..(i + 1) * n];
        match self.kind {
            InterpKind::Weno => fields.map(|f| {
                let mut vals = [0.0; 64];
                for (v, &o) in vals.iter_mut().zip(nodes) {
                    *v = f[o as usize];
                }
                combine(InterpKind::Weno, &vals, self.xi[i], WENO_EPSILON)
            }),
            _ => {
                let w = self.kind.width();
                let wt = &self.weights[i * 3 * w..(i + 1) * 3 * w];
                let (wx, wy, wz) = (&wt[..w], &wt[w..2 * w], &wt[2 * w..]);
                let mut out = [0.0; N];
                let mut k = 0;
                for &cz in wz {
                    for &by in wy {
                        let wyz = cz * by;
                        for &ax in wx {
                            let o = nodes[k] as usize;
                            let wk = ax * wyz;
                            for (acc, f) in out.iter_mut().zip(&fields) {
                                *acc += wk * f[o];
                            }
                            k += 1;
                        }
                    }
                }
                out
            }
        }
    }

    /// Band offsets of the stencil around the `i`-th planned point.
    pub fn stencil(&self, i: usize) -> &[u32] {
        let n = self.stencil_len();
        &self.nodes[i * n..(i + 1) * n]
    }
}
