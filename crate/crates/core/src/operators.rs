//! Finite-difference surface operators on band fields.
//!
//! Every operator reads a band-sized field and writes one value per target
//! offset, in target order. Missing neighbors are an error rather than a
//! silent zero.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::band_grid::{BandedGrid, StencilReach};
use crate::error::{CpError, Result};
use crate::interp::InterpPlan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// Lax–Friedrichs transport along the unit tangent.
    LaxFriedrichs,
    /// Standard 7-point Laplacian.
    Lap1,
    /// Divergence of the tangentially projected gradient.
    Lap2,
    /// Gradient, closest point re-extension, divergence.
    Lap3,
}

impl OperatorKind {
    pub fn reach(self) -> StencilReach {
        match self {
            OperatorKind::Lap2 => StencilReach::SecondRing,
            _ => StencilReach::FirstRing,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::LaxFriedrichs => "lf",
            OperatorKind::Lap1 => "lap1",
            OperatorKind::Lap2 => "lap2",
            OperatorKind::Lap3 => "lap3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "lf" | "lax_friedrichs" => OperatorKind::LaxFriedrichs,
            "lap1" => OperatorKind::Lap1,
            "lap2" => OperatorKind::Lap2,
            "lap3" => OperatorKind::Lap3,
            _ => return None,
        })
    }
}

#[inline]
fn ring_or_err(grid: &BandedGrid, b: usize, stage: &'static str) -> Result<[usize; 6]> {
    let r = grid.ring(b);
    let mut out = [0usize; 6];
    for (k, &o) in r.iter().enumerate() {
        if o == u32::MAX {
            let mut node = grid.index(b).map(|v| v as i64);
            node[k / 2] += if k % 2 == 0 { -1 } else { 1 };
            return Err(CpError::StencilOutOfBand { stage, node });
        }
        out[k] = o as usize;
    }
    Ok(out)
}

/// Lax–Friedrichs update for `u_t + div(u T) = 0`, with `tcp[b] = T(cp(x_b))`.
pub fn lax_friedrichs(
    grid: &BandedGrid,
    v: &[f64],
    tcp: &[Vector3<f64>],
    targets: &[u32],
    tau: f64,
) -> Result<Vec<f64>> {
    let h = grid.spec.h;
    targets
        .par_iter()
        .map(|&b| {
            let r = ring_or_err(grid, b as usize, "lax-friedrichs")?;
            let mut mean = 0.0;
            let mut div = 0.0;
            for axis in 0..3 {
                let (m, p) = (r[2 * axis], r[2 * axis + 1]);
                mean += v[m] + v[p];
                div += (v[p] * tcp[p][axis] - v[m] * tcp[m][axis]) / (2.0 * h[axis]);
            }
            Ok(mean / 6.0 - tau * div)
        })
        .collect()
}

/// One-dimensional Lax–Friedrichs sweep along `axis`.
pub fn lax_friedrichs_axis(
    grid: &BandedGrid,
    v: &[f64],
    tcp: &[Vector3<f64>],
    targets: &[u32],
    tau: f64,
    axis: usize,
) -> Result<Vec<f64>> {
    let h = grid.spec.h[axis];
    targets
        .par_iter()
        .map(|&b| {
            let r = ring_or_err(grid, b as usize, "lax-friedrichs sweep")?;
            let (m, p) = (r[2 * axis], r[2 * axis + 1]);
            Ok(0.5 * (v[m] + v[p]) - tau / (2.0 * h) * (v[p] * tcp[p][axis] - v[m] * tcp[m][axis]))
        })
        .collect()
}

/// 7-point Laplacian.
pub fn lap1(grid: &BandedGrid, v: &[f64], targets: &[u32]) -> Result<Vec<f64>> {
    let h = grid.spec.h;
    targets
        .par_iter()
        .map(|&b| {
            let r = ring_or_err(grid, b as usize, "lap1")?;
            let c = v[b as usize];
            Ok((0..3)
                .map(|a| (v[r[2 * a]] - 2.0 * c + v[r[2 * a + 1]]) / (h[a] * h[a]))
                .sum())
        })
        .collect()
}

fn central_gradient(grid: &BandedGrid, v: &[f64], b: usize, stage: &'static str) -> Result<Vector3<f64>> {
    let h = grid.spec.h;
    let r = ring_or_err(grid, b, stage)?;
    Ok(Vector3::from_fn(|a, _| {
        (v[r[2 * a + 1]] - v[r[2 * a]]) / (2.0 * h[a])
    }))
}

fn central_divergence(
    grid: &BandedGrid,
    flux: &[Vector3<f64>],
    b: usize,
    stage: &'static str,
) -> Result<f64> {
    let h = grid.spec.h;
    let r = ring_or_err(grid, b, stage)?;
    Ok((0..3)
        .map(|a| (flux[r[2 * a + 1]][a] - flux[r[2 * a]][a]) / (2.0 * h[a]))
        .sum())
}

/// Offsets of the targets together with their face neighbors, sorted.
pub fn first_ring_closure(grid: &BandedGrid, targets: &[u32]) -> Vec<u32> {
    let mut flag = vec![false; grid.len()];
    for &b in targets {
        flag[b as usize] = true;
        for &r in grid.ring(b as usize) {
            if r != u32::MAX {
                flag[r as usize] = true;
            }
        }
    }
    (0..grid.len() as u32).filter(|&b| flag[b as usize]).collect()
}

/// `div(P(cp) grad v)` with two nested central differences.
///
/// `flux_nodes` must contain the face neighbors of every target.
pub fn lap2(
    grid: &BandedGrid,
    v: &[f64],
    pcp: &[Matrix3<f64>],
    targets: &[u32],
    flux_nodes: &[u32],
) -> Result<Vec<f64>> {
    let fluxes = flux_nodes
        .par_iter()
        .map(|&b| Ok(pcp[b as usize] * central_gradient(grid, v, b as usize, "lap2 flux")?))
        .collect::<Result<Vec<_>>>()?;
    let mut flux = vec![Vector3::repeat(f64::NAN); grid.len()];
    for (&b, f) in flux_nodes.iter().zip(fluxes) {
        flux[b as usize] = f;
    }
    targets
        .par_iter()
        .map(|&b| central_divergence(grid, &flux, b as usize, "lap2"))
        .collect()
}

/// Central gradient on `grad_nodes`, re-extended through `plan` onto
/// `plan_targets`, then central divergence on `targets`.
///
/// `plan` must cover the face neighbors of every target and its stencils
/// must lie inside `grad_nodes`.
pub fn lap3(
    grid: &BandedGrid,
    v: &[f64],
    grad_nodes: &[u32],
    plan: &InterpPlan,
    plan_targets: &[u32],
    targets: &[u32],
) -> Result<Vec<f64>> {
    let grads = grad_nodes
        .par_iter()
        .map(|&b| central_gradient(grid, v, b as usize, "lap3 gradient"))
        .collect::<Result<Vec<_>>>()?;
    let mut comps = vec![vec![f64::NAN; grid.len()]; 3];
    for (&b, g) in grad_nodes.iter().zip(grads) {
        for a in 0..3 {
            comps[a][b as usize] = g[a];
        }
    }
    let extended: Vec<Vector3<f64>> = (0..plan.len())
        .into_par_iter()
        .map(|i| Vector3::from(plan.eval_fields(i, [&comps[0], &comps[1], &comps[2]])))
        .collect();
    let mut flux = vec![Vector3::repeat(f64::NAN); grid.len()];
    for (&b, g) in plan_targets.iter().zip(extended) {
        flux[b as usize] = g;
    }
    targets
        .par_iter()
        .map(|&b| central_divergence(grid, &flux, b as usize, "lap3"))
        .collect()
}
