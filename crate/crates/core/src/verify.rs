//! Finite-difference checks of the defining properties of closest point functions.

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cpfn::{levelset_cp, ClosestPointFunction, EuclideanCurveCp, Example1Cp, Example1Route};
use crate::cpm_solver::CpChoice;
use crate::error::Result;
use crate::geometry::{
    example1_surface, example2_surface, tangent_field, tangent_projector, Cylinder,
    HorizontalCircle, LevelSet, LevelSetSurface, ParametrizedCurve, Parabola, Plane, Point,
    PringleCurve, Rescaled, Sphere,
};
use crate::ode::OdeSolveConfig;

pub const FD_STEP: f64 = 1e-5;
pub const RICHARDSON_STEP: f64 = 2e-5;
// θ-step of the fourth-order difference used by the parametrized oracles
const ORACLE_STEP: f64 = 1e-3;

pub const JACOBIAN_BUDGET: f64 = 1e-6;
pub const GRADIENT_BUDGET: f64 = 1e-6;
pub const DIVERGENCE_BUDGET: f64 = 1e-5;
pub const ORTHOGONALITY_BUDGET: f64 = 1e-6;
pub const IDEMPOTENCE_BUDGET: f64 = 1e-8;
pub const RESCALING_BUDGET: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: String,
    pub cp: String,
    pub samples: usize,
    pub max_defect: f64,
    /// Defect at twice the difference step, when the check differentiates.
    pub richardson_defect: Option<f64>,
    pub budget: f64,
    pub pass: bool,
}

impl CheckResult {
    fn new(check: &str, cp: &str, samples: usize, max_defect: f64, budget: f64) -> Self {
        Self {
            check: check.into(),
            cp: cp.into(),
            samples,
            max_defect,
            richardson_defect: None,
            budget,
            pass: max_defect <= budget,
        }
    }

    /// Requires the defect at the doubled step to grow by at most 4× (above a
    /// noise floor of 1% of the budget).
    fn with_richardson(mut self, coarse: f64) -> Self {
        self.richardson_defect = Some(coarse);
        let floor = 0.01 * self.budget;
        self.pass = self.pass && coarse <= 4.0 * self.max_defect.max(floor) * 1.05;
        self
    }
}

fn par_max(samples: &[Point], f: impl Fn(&Point) -> Result<f64> + Sync) -> Result<f64> {
    samples
        .par_iter()
        .map(&f)
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
}

/// Central-difference Jacobian of `cp` at `y`; column `j` is `∂cp/∂x_j`.
pub fn fd_jacobian(cp: &dyn ClosestPointFunction, y: &Point, step: f64) -> Result<Matrix3<f64>> {
    let mut jac = Matrix3::zeros();
    for j in 0..3 {
        let mut e = Vector3::zeros();
        e[j] = step;
        let col = (cp.map(&(y + e))? - cp.map(&(y - e))?) / (2.0 * step);
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// `max_y ‖Dcp(y) − P(y)‖_F` over on-surface samples.
pub fn check_jacobian_is_projector(
    cp: &dyn ClosestPointFunction,
    surface: &LevelSetSurface,
    samples: &[Point],
    step: f64,
) -> Result<f64> {
    par_max(samples, |y| {
        Ok((fd_jacobian(cp, y, step)? - tangent_projector(surface, y)?).norm())
    })
}

/// `max_y |∇[u∘cp](y) − ∇_S u(y)|` with the surface gradient supplied by `grad_s`.
pub fn check_gradient_principle(
    cp: &dyn ClosestPointFunction,
    u: &(dyn Fn(&Point) -> f64 + Sync),
    grad_s: &(dyn Fn(&Point) -> Result<Vector3<f64>> + Sync),
    samples: &[Point],
    step: f64,
) -> Result<f64> {
    par_max(samples, |y| {
        let mut g = Vector3::zeros();
        for j in 0..3 {
            let mut e = Vector3::zeros();
            e[j] = step;
            g[j] = (u(&cp.map(&(y + e))?) - u(&cp.map(&(y - e))?)) / (2.0 * step);
        }
        Ok((g - grad_s(y)?).norm())
    })
}

/// `max_y |div[g∘cp](y) − div_S g(y)|` with the surface divergence supplied by `div_s`.
pub fn check_divergence_principle(
    cp: &dyn ClosestPointFunction,
    g: &(dyn Fn(&Point) -> Result<Vector3<f64>> + Sync),
    div_s: &(dyn Fn(&Point) -> Result<f64> + Sync),
    samples: &[Point],
    step: f64,
) -> Result<f64> {
    par_max(samples, |y| {
        let mut div = 0.0;
        for j in 0..3 {
            let mut e = Vector3::zeros();
            e[j] = step;
            div += (g(&cp.map(&(y + e))?)?[j] - g(&cp.map(&(y - e))?)?[j]) / (2.0 * step);
        }
        Ok((div - div_s(y)?).abs())
    })
}

/// `max_x |P(cp(x)) t̂|` where `t̂` is the unit preimage direction at `cp(x)`.
pub fn check_orthogonality(
    cp: &dyn ClosestPointFunction,
    surface: &LevelSetSurface,
    samples: &[Point],
) -> Result<f64> {
    par_max(samples, |x| {
        let t = cp.preimage_direction(x)?.normalize();
        Ok((tangent_projector(surface, &cp.map(x)?)? * t).norm())
    })
}

/// `max_x |cp(cp(x)) − cp(x)|`.
pub fn check_idempotence(cp: &dyn ClosestPointFunction, samples: &[Point]) -> Result<f64> {
    par_max(samples, |x| {
        let y = cp.map(x)?;
        Ok((cp.map(&y)? - y).norm())
    })
}

/// `max_x |a(x) − b(x)|`.
pub fn check_agreement(
    a: &dyn ClosestPointFunction,
    b: &dyn ClosestPointFunction,
    samples: &[Point],
) -> Result<f64> {
    par_max(samples, |x| Ok((a.map(x)? - b.map(x)?).norm()))
}

/// `n` curve points at `θ_k = 2π(k + 1/2)/n`.
pub fn curve_samples(curve: &dyn ParametrizedCurve, n: usize) -> Vec<Point> {
    (0..n)
        .map(|k| curve.point(TAU * (k as f64 + 0.5) / n as f64))
        .collect()
}

/// `n` points displaced from the curve in its normal plane by `[radius/5, radius]`.
pub fn band_samples(curve: &dyn ParametrizedCurve, n: usize, radius: f64, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let theta = rng.random_range(0.0..TAU);
            let t = curve.deriv(theta).normalize();
            let r = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let n = (r - t * t.dot(&r)).normalize();
            curve.point(theta) + rng.random_range(0.2 * radius..radius) * n
        })
        .collect()
}

fn theta_derivative<V>(f: impl Fn(f64) -> V, theta: f64) -> V
where
    V: std::ops::Sub<Output = V> + std::ops::Mul<f64, Output = V> + std::ops::Add<Output = V>,
{
    let d = ORACLE_STEP;
    (f(theta - 2.0 * d) - f(theta + 2.0 * d)) * (1.0 / (12.0 * d))
        + (f(theta + d) - f(theta - d)) * (8.0 / (12.0 * d))
}

/// `∇_S u(y) = (dū/ds) γ'/|γ'|` on a parametrized curve.
pub fn curve_gradient_oracle(
    curve: &dyn ParametrizedCurve,
    u: &dyn Fn(&Point) -> f64,
    y: &Point,
) -> Result<Vector3<f64>> {
    let theta = curve.theta_of_point(y)?;
    let d = curve.deriv(theta);
    let du = theta_derivative(|t| u(&curve.point(t)), theta);
    Ok(d * (du / d.norm_squared()))
}

/// `div_S g(y) = t̂ · (dḡ/ds)` on a parametrized curve.
pub fn curve_divergence_oracle(
    curve: &dyn ParametrizedCurve,
    g: &dyn Fn(&Point) -> Result<Vector3<f64>>,
    y: &Point,
) -> Result<f64> {
    let theta = curve.theta_of_point(y)?;
    let d = curve.deriv(theta);
    let vals = [-2.0, -1.0, 1.0, 2.0]
        .map(|k| g(&curve.point(theta + k * ORACLE_STEP)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let dg = ((vals[0] - vals[3]) + (vals[2] - vals[1]) * 8.0) / (12.0 * ORACLE_STEP);
    Ok(d.dot(&dg) / d.norm_squared())
}

struct Case {
    name: String,
    cp: Arc<dyn ClosestPointFunction>,
    rescaled: Arc<dyn ClosestPointFunction>,
}

fn rescaled_example2() -> LevelSetSurface {
    LevelSetSurface::new(
        vec![
            Arc::new(Rescaled {
                inner: Cylinder { radius: 1.0 },
                f: |t| 2.0 * t,
                df: |_| 2.0,
            }),
            Arc::new(Rescaled {
                inner: Parabola,
                f: |t| t * t * t + t,
                df: |t| 3.0 * t * t + 1.0,
            }),
        ],
        0.125,
    )
}

fn rescaled_example1() -> LevelSetSurface {
    LevelSetSurface::new(
        vec![
            Arc::new(Rescaled {
                inner: Sphere::unit(),
                f: |t| t.exp() - 1.0,
                df: f64::exp,
            }),
            Arc::new(Rescaled {
                inner: Plane {
                    normal: Vector3::z(),
                    offset: 0.5,
                },
                f: |t| 3.0 * t + t * t * t,
                df: |t| 3.0 + 3.0 * t * t,
            }),
        ],
        0.125,
    )
}

/// Runs every check for one closest point function of a parametrized curve.
#[allow(clippy::too_many_arguments)]
fn run_case(
    case: &Case,
    surface: &LevelSetSurface,
    curve: &dyn ParametrizedCurve,
    u: &(dyn Fn(&Point) -> f64 + Sync),
    normal: &(dyn Fn(&Point) -> Vector3<f64> + Sync),
    n: usize,
    band_radius: f64,
) -> Result<Vec<CheckResult>> {
    let on = curve_samples(curve, n);
    let off = band_samples(curve, n, band_radius, 7);
    let cp = case.cp.as_ref();
    let name = case.name.as_str();
    let mut out = Vec::new();

    let jac = |step| check_jacobian_is_projector(cp, surface, &on, step);
    out.push(
        CheckResult::new("jacobian_is_projector", name, n, jac(FD_STEP)?, JACOBIAN_BUDGET)
            .with_richardson(jac(RICHARDSON_STEP)?),
    );

    let grad_s = |y: &Point| curve_gradient_oracle(curve, &|p: &Point| u(p), y);
    let grad = |step| check_gradient_principle(cp, u, &grad_s, &on, step);
    out.push(
        CheckResult::new("gradient_principle", name, n, grad(FD_STEP)?, GRADIENT_BUDGET)
            .with_richardson(grad(RICHARDSON_STEP)?),
    );

    let tangential = |y: &Point| tangent_field(surface, y);
    let normal_field = |y: &Point| Ok(normal(y) * u(y));
    for (label, field) in [
        (
            "divergence_principle_tangential",
            &tangential as &(dyn Fn(&Point) -> Result<Vector3<f64>> + Sync),
        ),
        ("divergence_principle_normal", &normal_field),
    ] {
        let div_s = |y: &Point| curve_divergence_oracle(curve, &|p: &Point| field(p), y);
        let div = |step| check_divergence_principle(cp, field, &div_s, &on, step);
        out.push(
            CheckResult::new(label, name, n, div(FD_STEP)?, DIVERGENCE_BUDGET)
                .with_richardson(div(RICHARDSON_STEP)?),
        );
    }

    out.push(CheckResult::new(
        "orthogonality",
        name,
        n,
        check_orthogonality(cp, surface, &off)?,
        ORTHOGONALITY_BUDGET,
    ));
    out.push(CheckResult::new(
        "idempotence",
        name,
        n,
        check_idempotence(cp, &off)?,
        IDEMPOTENCE_BUDGET,
    ));
    out.push(CheckResult::new(
        "rescaling_invariance",
        name,
        n,
        check_agreement(cp, case.rescaled.as_ref(), &off)?,
        RESCALING_BUDGET,
    ));
    Ok(out)
}

/// The full property suite: the three curve closest point functions of the
/// cylinder/parabola intersection and the two closed forms of the sphere/plane circle.
///
/// `ode` should be tight (see [`OdeSolveConfig::tight`]) so that differencing
/// with step `1e-5` is not dominated by integration error.
pub fn property_suite(samples: usize, ode: OdeSolveConfig, only: Option<CpChoice>) -> Result<Vec<CheckResult>> {
    let s2 = example2_surface();
    let r2 = rescaled_example2();
    let y3 = |y: &Point| y.z;
    let cyl_normal = |y: &Point| {
        let g = Cylinder { radius: 1.0 }.gradient(y);
        g / g.norm()
    };
    let mut out = Vec::new();
    for choice in CpChoice::ALL {
        if only.is_some_and(|c| c != choice) {
            continue;
        }
        let case = Case {
            name: choice.name().into(),
            cp: choice.build(&s2, ode),
            rescaled: match choice {
                CpChoice::Euclidean => Arc::new(EuclideanCurveCp { curve: PringleCurve }),
                _ => choice.build(&r2, ode),
            },
        };
        out.extend(run_case(&case, &s2, &PringleCurve, &y3, &cyl_normal, samples, 0.1)?);
    }
    if only.is_some() {
        return Ok(out);
    }

    let s1 = example1_surface();
    let r1 = rescaled_example1();
    let circle = HorizontalCircle::example1();
    let y1 = |y: &Point| y.x;
    let sphere_normal = |y: &Point| y.normalize();
    for (route, order, name) in [
        (Example1Route::SphereFirst, [0, 1], "example1_cp"),
        (Example1Route::PlaneFirst, [1, 0], "example1_cp_hat"),
    ] {
        let case = Case {
            name: name.into(),
            cp: Arc::new(Example1Cp(route)),
            rescaled: levelset_cp(&r1, order, ode),
        };
        out.extend(run_case(&case, &s1, &circle, &y1, &sphere_normal, samples, 0.1)?);
    }
    Ok(out)
}
