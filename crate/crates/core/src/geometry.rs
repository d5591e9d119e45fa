//! Level-set surface descriptions, normals, tangent-space projectors and the
//! parametrized test curves.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3, Matrix3x2, Vector3};

use crate::error::{arr, CpError, Result};

pub type Point = Vector3<f64>;

/// Step of the central-difference gradient fallback.
pub const FD_GRADIENT_STEP: f64 = 1e-5;

const DEGENERATE_GRADIENT: f64 = 1e-14;
const MAX_GRAM_CONDITION: f64 = 1e12;

/// A scalar level-set function whose zero set is a codimension-one surface.
pub trait LevelSet: Send + Sync {
    fn value(&self, x: &Point) -> f64;

    /// Analytic gradient when available; central differences otherwise.
    fn gradient(&self, x: &Point) -> Vector3<f64> {
        fd_gradient(|p| self.value(p), x, FD_GRADIENT_STEP)
    }

    fn name(&self) -> String {
        "levelset".into()
    }
}

pub fn fd_gradient(f: impl Fn(&Point) -> f64, x: &Point, step: f64) -> Vector3<f64> {
    let mut g = Vector3::zeros();
    for k in 0..3 {
        let mut xp = *x;
        let mut xm = *x;
        xp[k] += step;
        xm[k] -= step;
        g[k] = (f(&xp) - f(&xm)) / (2.0 * step);
    }
    g
}

/// `|x - c|^2 - r^2`.
#[derive(Clone, Debug)]
pub struct Sphere {
    pub center: Point,
    pub radius: f64,
}

impl Sphere {
    pub fn unit() -> Self {
        Self {
            center: Point::zeros(),
            radius: 1.0,
        }
    }
}

impl LevelSet for Sphere {
    fn value(&self, x: &Point) -> f64 {
        (x - self.center).norm_squared() - self.radius * self.radius
    }
    fn gradient(&self, x: &Point) -> Vector3<f64> {
        2.0 * (x - self.center)
    }
    fn name(&self) -> String {
        "sphere".into()
    }
}

/// Signed Euclidean distance to a sphere, `|x - c| - r`.
#[derive(Clone, Debug)]
pub struct SphereDistance {
    pub center: Point,
    pub radius: f64,
}

impl LevelSet for SphereDistance {
    fn value(&self, x: &Point) -> f64 {
        (x - self.center).norm() - self.radius
    }
    fn gradient(&self, x: &Point) -> Vector3<f64> {
        let d = x - self.center;
        d / d.norm()
    }
    fn name(&self) -> String {
        "sphere-distance".into()
    }
}

/// `<n, x> - offset`; a signed distance when `n` is a unit vector.
#[derive(Clone, Debug)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl LevelSet for Plane {
    fn value(&self, x: &Point) -> f64 {
        self.normal.dot(x) - self.offset
    }
    fn gradient(&self, _x: &Point) -> Vector3<f64> {
        self.normal
    }
    fn name(&self) -> String {
        "plane".into()
    }
}

/// Cylinder around the x1-axis, `r^2 - x2^2 - x3^2`.
#[derive(Clone, Debug)]
pub struct Cylinder {
    pub radius: f64,
}

impl LevelSet for Cylinder {
    fn value(&self, x: &Point) -> f64 {
        self.radius * self.radius - x.y * x.y - x.z * x.z
    }
    fn gradient(&self, x: &Point) -> Vector3<f64> {
        Vector3::new(0.0, -2.0 * x.y, -2.0 * x.z)
    }
    fn name(&self) -> String {
        "cylinder".into()
    }
}

/// Parabolic cylinder `x3 - x1^2`.
#[derive(Clone, Debug, Default)]
pub struct Parabola;

impl LevelSet for Parabola {
    fn value(&self, x: &Point) -> f64 {
        x.z - x.x * x.x
    }
    fn gradient(&self, x: &Point) -> Vector3<f64> {
        Vector3::new(-2.0 * x.x, 0.0, 1.0)
    }
    fn name(&self) -> String {
        "parabola".into()
    }
}

/// `f ∘ φ` for a strictly monotone smooth `f`; the zero set is unchanged when `f(0) = 0`.
pub struct Rescaled<L> {
    pub inner: L,
    pub f: fn(f64) -> f64,
    pub df: fn(f64) -> f64,
}

impl<L: LevelSet> LevelSet for Rescaled<L> {
    fn value(&self, x: &Point) -> f64 {
        (self.f)(self.inner.value(x))
    }
    fn gradient(&self, x: &Point) -> Vector3<f64> {
        (self.df)(self.inner.value(x)) * self.inner.gradient(x)
    }
    fn name(&self) -> String {
        format!("rescaled-{}", self.inner.name())
    }
}

/// A user-supplied level set without an analytic gradient.
pub struct FnLevelSet<F> {
    pub f: F,
}

impl<F: Fn(&Point) -> f64 + Send + Sync> LevelSet for FnLevelSet<F> {
    fn value(&self, x: &Point) -> f64 {
        (self.f)(x)
    }
}

/// A surface given as the proper intersection of the zero sets of one or two level sets.
#[derive(Clone)]
pub struct LevelSetSurface {
    pub phis: Vec<Arc<dyn LevelSet>>,
    /// Band half-width in φ-units.
    pub band_tol: f64,
}

impl fmt::Debug for LevelSetSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.phis.iter().map(|p| p.name()).collect();
        f.debug_struct("LevelSetSurface")
            .field("phis", &names)
            .field("band_tol", &self.band_tol)
            .finish()
    }
}

impl LevelSetSurface {
    pub fn new(phis: Vec<Arc<dyn LevelSet>>, band_tol: f64) -> Self {
        assert!(
            (1..=2).contains(&phis.len()),
            "only codimension 1 and 2 are supported"
        );
        Self { phis, band_tol }
    }

    pub fn codim(&self) -> usize {
        self.phis.len()
    }

    pub fn dim(&self) -> usize {
        3 - self.codim()
    }

    /// `(Σ φ_j²)^{1/2}`, used in lieu of Euclidean distance for banding.
    pub fn band_distance(&self, x: &Point) -> f64 {
        self.phis
            .iter()
            .map(|p| p.value(x).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_residual(&self, x: &Point) -> f64 {
        self.phis
            .iter()
            .map(|p| p.value(x).abs())
            .fold(0.0, f64::max)
    }
}

/// Unit sphere ∩ plane `x3 = 1/2`: a circle of radius √3/2.
pub fn example1_surface() -> LevelSetSurface {
    LevelSetSurface::new(
        vec![
            Arc::new(Sphere::unit()),
            Arc::new(Plane {
                normal: Vector3::z(),
                offset: 0.5,
            }),
        ],
        0.125,
    )
}

/// Cylinder `1 - x2² - x3²` ∩ parabola `x3 - x1²`.
pub fn example2_surface() -> LevelSetSurface {
    LevelSetSurface::new(
        vec![Arc::new(Cylinder { radius: 1.0 }), Arc::new(Parabola)],
        0.125,
    )
}

/// Unit normals `∇φ_j/|∇φ_j|`, one column per level set.
pub fn normal_matrix(surface: &LevelSetSurface, x: &Point) -> Result<Vec<Vector3<f64>>> {
    surface
        .phis
        .iter()
        .map(|phi| {
            let g = phi.gradient(x);
            let n = g.norm();
            if n < DEGENERATE_GRADIENT {
                Err(CpError::DegenerateGradient { at: arr(x), norm: n })
            } else {
                Ok(g / n)
            }
        })
        .collect()
}

/// `P = I - N N†` built from the columns returned by [`normal_matrix`].
pub fn projector_from_normals(normals: &[Vector3<f64>]) -> Result<Matrix3<f64>> {
    match normals {
        [n] => Ok(Matrix3::identity() - n * n.transpose()),
        [n1, n2] => {
            let nm = Matrix3x2::from_columns(&[*n1, *n2]);
            let gram: Matrix2<f64> = nm.transpose() * nm;
            let eig = gram.symmetric_eigenvalues();
            let (lo, hi) = (eig.min(), eig.max());
            let condition = if lo <= 0.0 { f64::INFINITY } else { hi / lo };
            if condition > MAX_GRAM_CONDITION {
                return Err(CpError::RankDeficient { condition });
            }
            let inv = gram
                .try_inverse()
                .ok_or(CpError::RankDeficient { condition })?;
            Ok(Matrix3::identity() - nm * inv * nm.transpose())
        }
        _ => Err(CpError::InvalidConfig(format!(
            "unsupported codimension {}",
            normals.len()
        ))),
    }
}

pub fn tangent_projector(surface: &LevelSetSurface, x: &Point) -> Result<Matrix3<f64>> {
    projector_from_normals(&normal_matrix(surface, x)?)
}

/// `T = -∇φ₁×∇φ₂ / |∇φ₁×∇φ₂|` for a codimension-two surface.
pub fn tangent_field(surface: &LevelSetSurface, x: &Point) -> Result<Vector3<f64>> {
    if surface.codim() != 2 {
        return Err(CpError::InvalidConfig(
            "tangent field requires codimension 2".into(),
        ));
    }
    let c = surface.phis[0].gradient(x).cross(&surface.phis[1].gradient(x));
    let n = c.norm();
    if n < DEGENERATE_GRADIENT {
        return Err(CpError::DegenerateGradient { at: arr(x), norm: n });
    }
    Ok(-c / n)
}

/// A closed, regular, 2π-periodic space curve.
pub trait ParametrizedCurve: Send + Sync {
    fn point(&self, theta: f64) -> Point;
    fn deriv(&self, theta: f64) -> Vector3<f64>;
    fn second_deriv(&self, theta: f64) -> Vector3<f64>;
    /// Parameter of a point already on the curve, in `[0, 2π)`.
    fn theta_of_point(&self, y: &Point) -> Result<f64>;

    fn speed(&self, theta: f64) -> f64 {
        self.deriv(theta).norm()
    }
}

/// `γ(θ) = (cos θ, sin θ √(1+cos²θ), cos²θ)`, the cylinder/parabola intersection.
#[derive(Clone, Copy, Debug, Default)]
pub struct PringleCurve;

const ON_CURVE_TOL: f64 = 1e-6;

impl ParametrizedCurve for PringleCurve {
    fn point(&self, theta: f64) -> Point {
        let (s, c) = theta.sin_cos();
        Point::new(c, s * (1.0 + c * c).sqrt(), c * c)
    }

    fn deriv(&self, theta: f64) -> Vector3<f64> {
        let (s, c) = theta.sin_cos();
        let w = (1.0 + c * c).sqrt();
        let dw = -c * s / w;
        Vector3::new(-s, c * w + s * dw, -2.0 * c * s)
    }

    fn second_deriv(&self, theta: f64) -> Vector3<f64> {
        let (s, c) = theta.sin_cos();
        let w = (1.0 + c * c).sqrt();
        let dw = -c * s / w;
        // w w' = -sin(2θ)/2  =>  w'² + w w'' = -cos(2θ)
        let c2 = c * c - s * s;
        let ddw = (-c2 - dw * dw) / w;
        Vector3::new(-c, -s * w + 2.0 * c * dw + s * ddw, -2.0 * c2)
    }

    fn theta_of_point(&self, y: &Point) -> Result<f64> {
        let residual = (1.0 - y.y * y.y - y.z * y.z)
            .abs()
            .max((y.z - y.x * y.x).abs());
        if residual > ON_CURVE_TOL {
            return Err(CpError::OffSurface {
                at: arr(y),
                residual,
            });
        }
        Ok(normalize_angle(
            (y.y / (1.0 + y.x * y.x).sqrt()).atan2(y.x),
        ))
    }
}

/// Circle of radius `r` in the plane `x3 = z0`, centred on the x3-axis.
#[derive(Clone, Copy, Debug)]
pub struct HorizontalCircle {
    pub radius: f64,
    pub height: f64,
}

impl HorizontalCircle {
    /// The sphere/plane circle: radius √3/2 at height 1/2.
    pub fn example1() -> Self {
        Self {
            radius: 3f64.sqrt() / 2.0,
            height: 0.5,
        }
    }
}

impl ParametrizedCurve for HorizontalCircle {
    fn point(&self, theta: f64) -> Point {
        let (s, c) = theta.sin_cos();
        Point::new(self.radius * c, self.radius * s, self.height)
    }
    fn deriv(&self, theta: f64) -> Vector3<f64> {
        let (s, c) = theta.sin_cos();
        Vector3::new(-self.radius * s, self.radius * c, 0.0)
    }
    fn second_deriv(&self, theta: f64) -> Vector3<f64> {
        let (s, c) = theta.sin_cos();
        Vector3::new(-self.radius * c, -self.radius * s, 0.0)
    }
    fn theta_of_point(&self, y: &Point) -> Result<f64> {
        let residual = ((y.x * y.x + y.y * y.y).sqrt() - self.radius)
            .abs()
            .max((y.z - self.height).abs());
        if residual > ON_CURVE_TOL {
            return Err(CpError::OffSurface {
                at: arr(y),
                residual,
            });
        }
        Ok(normalize_angle(y.y.atan2(y.x)))
    }
}

pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Pringle curve parametrization.
pub fn curve_param(theta: f64) -> Point {
    PringleCurve.point(theta)
}

pub fn curve_param_deriv(theta: f64) -> Vector3<f64> {
    PringleCurve.deriv(theta)
}

pub fn theta_of_point(y: &Point) -> Result<f64> {
    PringleCurve.theta_of_point(y)
}
