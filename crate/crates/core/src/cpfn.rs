//! Closest point functions: the level-set gradient-flow construction in
//! codimension one and two, the closed forms of the sphere/plane circle, and a
//! Newton-based Euclidean projection onto a parametrized curve.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::band_grid::BandedGrid;
use crate::error::{arr, CpError, Result};
use crate::geometry::{LevelSet, LevelSetSurface, ParametrizedCurve, Point};
use crate::ode::{integrate, OdeSolveConfig};

const DEGENERATE_FLOW: f64 = 1e-12;
const HOST_SURFACE_TOL: f64 = 1e-8;
const HOST_DRIFT_TOL: f64 = 1e-9;
const POLISH_ITERS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CpKind {
    ClosedForm,
    LevelsetOde,
    EuclideanNewton,
    Composed,
}

impl CpKind {
    pub fn code(self) -> u8 {
        match self {
            CpKind::ClosedForm => 0,
            CpKind::LevelsetOde => 1,
            CpKind::EuclideanNewton => 2,
            CpKind::Composed => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => CpKind::ClosedForm,
            1 => CpKind::LevelsetOde,
            2 => CpKind::EuclideanNewton,
            3 => CpKind::Composed,
            _ => return None,
        })
    }
}

/// A retraction of a band onto a surface whose Jacobian on the surface is the
/// tangent projector.
pub trait ClosestPointFunction: Send + Sync {
    fn map(&self, x: &Point) -> Result<Point>;

    fn kind(&self) -> CpKind;

    fn label(&self) -> String;

    fn is_valid(&self, _x: &Point) -> bool {
        true
    }

    /// A tangent of the preimage `cp⁻¹(cp(x))` at `cp(x)`, as produced by the construction.
    ///
    /// The default assumes straight preimages through `x` (true for Euclidean projections).
    fn preimage_direction(&self, x: &Point) -> Result<Vector3<f64>> {
        Ok(x - self.map(x)?)
    }
}

impl fmt::Debug for dyn ClosestPointFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({:?})", self.label(), self.kind())
    }
}

fn codim1_velocity(phi: &dyn LevelSet, y: &Point) -> Result<Vector3<f64>> {
    let g = phi.gradient(y);
    let n2 = g.norm_squared();
    if n2.sqrt() < DEGENERATE_FLOW {
        return Err(CpError::DegenerateGradient {
            at: arr(y),
            norm: n2.sqrt(),
        });
    }
    Ok(-g / n2)
}

fn intrinsic_velocity(host: &dyn LevelSet, target: &dyn LevelSet, y: &Point) -> Result<Vector3<f64>> {
    let g1 = host.gradient(y);
    let n1 = g1.norm();
    if n1 < DEGENERATE_FLOW {
        return Err(CpError::DegenerateGradient { at: arr(y), norm: n1 });
    }
    let n1 = g1 / n1;
    let g2 = target.gradient(y);
    let t = g2 - n1 * n1.dot(&g2);
    let t2 = t.norm_squared();
    if t2.sqrt() < DEGENERATE_FLOW {
        return Err(CpError::DegenerateTangentialGradient {
            at: arr(y),
            norm: t2.sqrt(),
        });
    }
    Ok(-t / t2)
}

/// Follows `η' = -∇φ/|∇φ|²` over the level labels `λ ∈ [0, φ(x)]` and returns `η(φ(x))`.
pub fn levelset_cp_codim1(phi: &dyn LevelSet, x: &Point, cfg: &OdeSolveConfig) -> Result<Point> {
    let lambda = phi.value(x);
    if lambda == 0.0 {
        return Ok(*x);
    }
    let mut y = integrate(|y| codim1_velocity(phi, y), *x, lambda, cfg)?;
    // the remaining level label is tiny; finish along the same flow
    for _ in 0..POLISH_ITERS {
        let r = phi.value(&y);
        if r == 0.0 {
            break;
        }
        y += r * codim1_velocity(phi, &y)?;
    }
    Ok(y)
}

/// Retracts a point of `host = 0` onto `host = target = 0` along
/// `η' = -P₁∇φ₂/|P₁∇φ₂|²`, which keeps the trajectory inside the host surface.
pub fn intrinsic_cp_step(
    target: &dyn LevelSet,
    host: &dyn LevelSet,
    z: &Point,
    cfg: &OdeSolveConfig,
) -> Result<Point> {
    let start = host.value(z).abs();
    if start > HOST_SURFACE_TOL {
        return Err(CpError::OffSurfaceStart {
            at: arr(z),
            residual: start,
        });
    }
    let lambda = target.value(z);
    if lambda == 0.0 {
        return Ok(*z);
    }
    let mut y = integrate(|y| intrinsic_velocity(host, target, y), *z, lambda, cfg)?;
    if host.value(&y).abs() > HOST_DRIFT_TOL {
        y = levelset_cp_codim1(host, &y, cfg)?;
    }
    for _ in 0..POLISH_ITERS {
        let r1 = host.value(&y);
        if r1 != 0.0 {
            y += r1 * codim1_velocity(host, &y)?;
        }
        let r2 = target.value(&y);
        if r2 != 0.0 {
            y += r2 * intrinsic_velocity(host, target, &y)?;
        }
        if host.value(&y) == 0.0 && target.value(&y) == 0.0 {
            break;
        }
    }
    Ok(y)
}

/// Codimension-one level-set closest point function.
pub struct LevelSetCp {
    pub phi: Arc<dyn LevelSet>,
    pub cfg: OdeSolveConfig,
}

impl ClosestPointFunction for LevelSetCp {
    fn map(&self, x: &Point) -> Result<Point> {
        levelset_cp_codim1(self.phi.as_ref(), x, &self.cfg)
    }
    fn kind(&self) -> CpKind {
        CpKind::LevelsetOde
    }
    fn label(&self) -> String {
        format!("levelset[{}]", self.phi.name())
    }
    fn is_valid(&self, x: &Point) -> bool {
        self.phi.gradient(x).norm() >= DEGENERATE_FLOW
    }
    fn preimage_direction(&self, x: &Point) -> Result<Vector3<f64>> {
        codim1_velocity(self.phi.as_ref(), &self.map(x)?)
    }
}

/// Host-intrinsic retraction onto `host ∩ target`; defined on the host surface.
pub struct IntrinsicCp {
    pub host: Arc<dyn LevelSet>,
    pub target: Arc<dyn LevelSet>,
    pub cfg: OdeSolveConfig,
}

impl ClosestPointFunction for IntrinsicCp {
    fn map(&self, z: &Point) -> Result<Point> {
        intrinsic_cp_step(self.target.as_ref(), self.host.as_ref(), z, &self.cfg)
    }
    fn kind(&self) -> CpKind {
        CpKind::LevelsetOde
    }
    fn label(&self) -> String {
        format!("intrinsic[{}→{}]", self.host.name(), self.target.name())
    }
    fn is_valid(&self, z: &Point) -> bool {
        self.host.value(z).abs() <= HOST_SURFACE_TOL
    }
    fn preimage_direction(&self, z: &Point) -> Result<Vector3<f64>> {
        intrinsic_velocity(self.host.as_ref(), self.target.as_ref(), &self.map(z)?)
    }
}

/// `second ∘ first`.
pub struct ComposedCp {
    pub first: Arc<dyn ClosestPointFunction>,
    pub second: Arc<dyn ClosestPointFunction>,
}

impl ClosestPointFunction for ComposedCp {
    fn map(&self, x: &Point) -> Result<Point> {
        self.second.map(&self.first.map(x)?)
    }
    fn kind(&self) -> CpKind {
        CpKind::Composed
    }
    fn label(&self) -> String {
        format!("{}∘{}", self.second.label(), self.first.label())
    }
    fn is_valid(&self, x: &Point) -> bool {
        self.first.is_valid(x)
            && self
                .first
                .map(x)
                .map(|z| self.second.is_valid(&z))
                .unwrap_or(false)
    }
    fn preimage_direction(&self, x: &Point) -> Result<Vector3<f64>> {
        self.second.preimage_direction(&self.first.map(x)?)
    }
}

pub fn compose_cp(
    first: Arc<dyn ClosestPointFunction>,
    second_intrinsic: Arc<dyn ClosestPointFunction>,
) -> Arc<dyn ClosestPointFunction> {
    Arc::new(ComposedCp {
        first,
        second: second_intrinsic,
    })
}

/// Level-set closest point function of `surface`, retracting onto the level sets
/// in the given order (`order[0]` first). Codimension one ignores `order`.
pub fn levelset_cp(
    surface: &LevelSetSurface,
    order: [usize; 2],
    cfg: OdeSolveConfig,
) -> Arc<dyn ClosestPointFunction> {
    match surface.codim() {
        1 => Arc::new(LevelSetCp {
            phi: surface.phis[0].clone(),
            cfg,
        }),
        _ => {
            let first = surface.phis[order[0]].clone();
            let second = surface.phis[order[1]].clone();
            compose_cp(
                Arc::new(LevelSetCp {
                    phi: first.clone(),
                    cfg,
                }),
                Arc::new(IntrinsicCp {
                    host: first,
                    target: second,
                    cfg,
                }),
            )
        }
    }
}

fn check_off_axis(x: &Point) -> Result<f64> {
    let r2 = x.x * x.x + x.y * x.y;
    if r2 < 1e-20 {
        return Err(CpError::OnAxis { at: arr(x) });
    }
    Ok(r2)
}

/// Sphere first, then along the sphere onto the circle `x3 = 1/2`.
pub fn example1_cp(x: &Point) -> Result<Point> {
    check_off_axis(x)?;
    let on_sphere = x / x.norm();
    let scale = 3f64.sqrt() / (1.0 - on_sphere.z * on_sphere.z).sqrt();
    Ok(0.5 * Point::new(scale * on_sphere.x, scale * on_sphere.y, 1.0))
}

/// Plane first, then radially within the plane onto the circle.
pub fn example1_cp_hat(x: &Point) -> Result<Point> {
    let r2 = check_off_axis(x)?;
    let in_plane = Point::new(x.x, x.y, 0.5);
    let radius = 3f64.sqrt() / 2.0;
    let s = radius / r2.sqrt();
    Ok(Point::new(s * in_plane.x, s * in_plane.y, in_plane.z))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Example1Route {
    SphereFirst,
    PlaneFirst,
}

pub struct Example1Cp(pub Example1Route);

impl ClosestPointFunction for Example1Cp {
    fn map(&self, x: &Point) -> Result<Point> {
        match self.0 {
            Example1Route::SphereFirst => example1_cp(x),
            Example1Route::PlaneFirst => example1_cp_hat(x),
        }
    }
    fn kind(&self) -> CpKind {
        CpKind::ClosedForm
    }
    fn label(&self) -> String {
        match self.0 {
            Example1Route::SphereFirst => "example1-cp".into(),
            Example1Route::PlaneFirst => "example1-cp-hat".into(),
        }
    }
    fn is_valid(&self, x: &Point) -> bool {
        check_off_axis(x).is_ok()
    }
    fn preimage_direction(&self, x: &Point) -> Result<Vector3<f64>> {
        let y = self.map(x)?;
        let rho = (y.x * y.x + y.y * y.y).sqrt();
        Ok(match self.0 {
            // meridian of the unit sphere through y
            Example1Route::SphereFirst => Vector3::new(y.z * y.x / rho, y.z * y.y / rho, -rho),
            Example1Route::PlaneFirst => Vector3::new(y.x, y.y, 0.0),
        })
    }
}

const NEWTON_SEEDS: usize = 64;
const NEWTON_STARTS: usize = 3;
const NEWTON_MAX_ITERS: usize = 50;

/// Parameter of the Euclidean closest point of `x` on `curve`.
pub fn euclidean_theta(x: &Point, curve: &dyn ParametrizedCurve) -> Result<f64> {
    let g = |t: f64| (x - curve.point(t)).norm_squared();
    let dg = |t: f64| -2.0 * (x - curve.point(t)).dot(&curve.deriv(t));
    let ddg = |t: f64| {
        let d = curve.deriv(t);
        2.0 * d.norm_squared() - 2.0 * (x - curve.point(t)).dot(&curve.second_deriv(t))
    };

    let dt = TAU / NEWTON_SEEDS as f64;
    let samples: Vec<f64> = (0..NEWTON_SEEDS).map(|i| g(i as f64 * dt)).collect();
    let mut minima: Vec<usize> = (0..NEWTON_SEEDS)
        .filter(|&i| {
            let prev = samples[(i + NEWTON_SEEDS - 1) % NEWTON_SEEDS];
            let next = samples[(i + 1) % NEWTON_SEEDS];
            samples[i] <= prev && samples[i] <= next
        })
        .collect();
    minima.sort_by(|&a, &b| samples[a].total_cmp(&samples[b]));
    minima.truncate(NEWTON_STARTS);

    let mut best: Option<(f64, f64)> = None;
    for &i in &minima {
        let mut lo = (i as f64 - 1.0) * dt;
        let mut hi = (i as f64 + 1.0) * dt;
        let bracketed = dg(lo) < 0.0 && dg(hi) > 0.0;
        let mut t = i as f64 * dt;
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITERS {
            let d1 = dg(t);
            if d1.abs() < 1e-13 {
                converged = true;
                break;
            }
            if bracketed {
                if d1 < 0.0 {
                    lo = t;
                } else {
                    hi = t;
                }
            }
            let d2 = ddg(t);
            let mut next = t - d1 / d2;
            if bracketed && (d2 <= 0.0 || next <= lo || next >= hi) {
                next = 0.5 * (lo + hi);
            } else if !bracketed && d2 <= 0.0 {
                break;
            }
            let step = (next - t).abs();
            t = next;
            if step < 4.0 * f64::EPSILON * t.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if converged {
            let val = g(t);
            if best.map_or(true, |(_, b)| val < b) {
                best = Some((t, val));
            }
        }
    }
    best.map(|(t, _)| t.rem_euclid(TAU)).ok_or_else(|| {
        CpError::NoConvergence(format!("Euclidean projection of {:?}", arr(x)))
    })
}

/// `argmin_{y∈S} |x - y|` for a parametrized curve.
pub fn euclidean_cp_curve(x: &Point, curve: &dyn ParametrizedCurve) -> Result<Point> {
    Ok(curve.point(euclidean_theta(x, curve)?))
}

pub struct EuclideanCurveCp<C> {
    pub curve: C,
}

impl<C: ParametrizedCurve> ClosestPointFunction for EuclideanCurveCp<C> {
    fn map(&self, x: &Point) -> Result<Point> {
        euclidean_cp_curve(x, &self.curve)
    }
    fn kind(&self) -> CpKind {
        CpKind::EuclideanNewton
    }
    fn label(&self) -> String {
        "euclidean".into()
    }
}

/// Closest points of every band node, computed once and reused every time step.
#[derive(Clone, Debug)]
pub struct CpTable {
    pub kind: CpKind,
    pub points: Vec<Point>,
    /// `max_x (Σ_j φ_j(cp(x))²)^{1/2}`.
    pub max_residual: f64,
}

impl CpTable {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn cache_cp(
    grid: &BandedGrid,
    cp: &dyn ClosestPointFunction,
    surface: &LevelSetSurface,
) -> Result<CpTable> {
    let points = (0..grid.len())
        .into_par_iter()
        .with_min_len(256)
        .map(|b| {
            cp.map(&grid.position(b)).map_err(|e| CpError::AtBandPoint {
                offset: b,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_residual = points
        .iter()
        .map(|y| surface.band_distance(y))
        .fold(0.0, f64::max);
    Ok(CpTable {
        kind: cp.kind(),
        points,
        max_residual,
    })
}
