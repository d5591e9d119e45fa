//! Oracles written from closed forms only, sharing no numerics with the library.
#![allow(dead_code)]

use std::f64::consts::TAU;

pub type V3 = [f64; 3];

fn add(a: V3, b: V3, s: f64) -> V3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cyl(x: V3) -> f64 {
    1.0 - x[1] * x[1] - x[2] * x[2]
}

pub fn cyl_grad(x: V3) -> V3 {
    [0.0, -2.0 * x[1], -2.0 * x[2]]
}

pub fn par(x: V3) -> f64 {
    x[2] - x[0] * x[0]
}

pub fn par_grad(x: V3) -> V3 {
    [-2.0 * x[0], 0.0, 1.0]
}

fn rk4(f: impl Fn(V3) -> V3, mut y: V3, end: f64, steps: usize) -> V3 {
    let dt = end / steps as f64;
    for _ in 0..steps {
        let k1 = f(y);
        let k2 = f(add(y, k1, dt / 2.0));
        let k3 = f(add(y, k2, dt / 2.0));
        let k4 = f(add(y, k3, dt));
        for i in 0..3 {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

/// `η' = -∇φ/|∇φ|²` over level labels `[0, φ(x)]`.
pub fn flow_codim1(phi: fn(V3) -> f64, grad: fn(V3) -> V3, x: V3, steps: usize) -> V3 {
    rk4(
        |y| {
            let g = grad(y);
            let n2 = dot(g, g);
            g.map(|v| -v / n2)
        },
        x,
        phi(x),
        steps,
    )
}

/// `η' = -P∇φ₂/|P∇φ₂|²` with `P` the tangent projector of the host.
pub fn flow_intrinsic(
    host_grad: fn(V3) -> V3,
    target: fn(V3) -> f64,
    target_grad: fn(V3) -> V3,
    z: V3,
    steps: usize,
) -> V3 {
    rk4(
        |y| {
            let n = host_grad(y);
            let g = target_grad(y);
            let t = add(g, n, -dot(g, n) / dot(n, n));
            let t2 = dot(t, t);
            t.map(|v| -v / t2)
        },
        z,
        target(z),
        steps,
    )
}

/// Cylinder first, then along the cylinder onto the parabola.
pub fn rk4_cp(x: V3, steps: usize) -> V3 {
    let z = flow_codim1(cyl, cyl_grad, x, steps);
    flow_intrinsic(cyl_grad, par, par_grad, z, steps)
}

/// Parabola first, then along the parabola onto the cylinder.
pub fn rk4_cp_hat(x: V3, steps: usize) -> V3 {
    let z = flow_codim1(par, par_grad, x, steps);
    flow_intrinsic(par_grad, cyl, cyl_grad, z, steps)
}

pub fn gamma(th: f64) -> V3 {
    let (s, c) = th.sin_cos();
    [c, s * (1.0 + c * c).sqrt(), c * c]
}

/// `|γ'(θ)|` from the expanded derivative.
pub fn speed(th: f64) -> f64 {
    let (s, c) = th.sin_cos();
    let w = (1.0 + c * c).sqrt();
    let dy = c * w - s * s * c / w;
    (s * s + dy * dy + 4.0 * c * c * s * s).sqrt()
}

/// Composite Simpson arc length on `[0, θ]`.
pub fn simpson_arc_length(theta: f64, panels: usize) -> f64 {
    let n = 2 * panels;
    let dt = theta / n as f64;
    let mut sum = speed(0.0) + speed(theta);
    for k in 1..n {
        sum += speed(k as f64 * dt) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * dt / 3.0
}

/// Transport along `T = -γ'/|γ'|` carries the value at the foot back to θ:
/// the foot solves `dθ/dt = 1/|γ'|` for time `t`.
pub fn characteristic_foot(theta: f64, t: f64, steps: usize) -> f64 {
    let f = |th: f64| 1.0 / speed(th);
    let dt = t / steps as f64;
    let mut th = theta;
    for _ in 0..steps {
        let k1 = f(th);
        let k2 = f(th + dt / 2.0 * k1);
        let k3 = f(th + dt / 2.0 * k2);
        let k4 = f(th + dt * k3);
        th += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    th
}

/// Heat equation `u_t = (1/|γ'|) ∂θ((1/|γ'|) ∂θ u)` on a uniform periodic θ grid,
/// conservative second-order differences and classical RK4 in time.
pub fn heat_fd(n: usize, t_end: f64, u0: impl Fn(V3) -> f64) -> Vec<f64> {
    let dth = TAU / n as f64;
    let node: Vec<f64> = (0..n).map(|k| 1.0 / speed(k as f64 * dth)).collect();
    let half: Vec<f64> = (0..n).map(|k| 1.0 / speed((k as f64 + 0.5) * dth)).collect();
    let rhs = |u: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|k| {
                let kp = (k + 1) % n;
                let km = (k + n - 1) % n;
                node[k] * (half[k] * (u[kp] - u[k]) - half[km] * (u[k] - u[km])) / (dth * dth)
            })
            .collect()
    };
    // Gershgorin bound on the spectral radius; RK4 is stable up to 2.78/λ on the negative axis
    let lam = (0..n)
        .map(|k| 2.0 * node[k] * (half[k] + half[(k + n - 1) % n]))
        .fold(0.0, f64::max)
        / (dth * dth);
    let steps = (t_end * lam / 2.5).ceil() as usize;
    let dt = t_end / steps as f64;
    let mut u: Vec<f64> = (0..n).map(|k| u0(gamma(k as f64 * dth))).collect();
    for _ in 0..steps {
        let k1 = rhs(&u);
        let s: Vec<f64> = u.iter().zip(&k1).map(|(a, b)| a + dt / 2.0 * b).collect();
        let k2 = rhs(&s);
        let s: Vec<f64> = u.iter().zip(&k2).map(|(a, b)| a + dt / 2.0 * b).collect();
        let k3 = rhs(&s);
        let s: Vec<f64> = u.iter().zip(&k3).map(|(a, b)| a + dt * b).collect();
        let k4 = rhs(&s);
        for k in 0..n {
            u[k] += dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
        }
    }
    u
}

/// Richardson combination of `heat_fd` at `n` and `2n`, on the coarse nodes.
pub fn heat_fd_extrapolated(n: usize, t_end: f64, u0: impl Fn(V3) -> f64 + Copy) -> Vec<f64> {
    let coarse = heat_fd(n, t_end, u0);
    let fine = heat_fd(2 * n, t_end, u0);
    (0..n).map(|k| (4.0 * fine[2 * k] - coarse[k]) / 3.0).collect()
}

/// SplitMix64 points in a tube of radius `r` around the curve.
pub fn tube_points(count: usize, r: f64, mut seed: u64) -> Vec<V3> {
    let mut next = || {
        seed = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = seed;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..count)
        .map(|_| {
            let p = gamma(TAU * next());
            add(p, [2.0 * next() - 1.0, 2.0 * next() - 1.0, 2.0 * next() - 1.0], r)
        })
        .collect()
}

pub mod suites {
    //! Library-versus-oracle comparisons shared by the oracle tests and the acceptance gate.

    use std::f64::consts::TAU;

    use cpcalc_core::band_grid::{BandedGrid, GridBox, GridSpec, Resolution};
    use cpcalc_core::cpm_solver::CpChoice;
    use cpcalc_core::geometry::{example2_surface, Point};
    use cpcalc_core::interp::{interpolate, InterpKind};
    use cpcalc_core::ode::OdeSolveConfig;
    use cpcalc_core::reference::{heat_initial, ArcLengthTable, HeatSeries};

    /// Max componentwise distance between the library cp and the RK4 oracle.
    pub fn cp_deviation(choice: CpChoice, samples: usize) -> f64 {
        let oracle = match choice {
            CpChoice::LevelsetCylFirst => super::rk4_cp,
            CpChoice::LevelsetParFirst => super::rk4_cp_hat,
            CpChoice::Euclidean => panic!("no flow oracle for the Euclidean projection"),
        };
        let cp = choice.build(&example2_surface(), OdeSolveConfig::default());
        super::tube_points(samples, 0.12, 7)
            .into_iter()
            .map(|x| {
                let y = cp.map(&Point::new(x[0], x[1], x[2])).unwrap();
                let o = oracle(x, 2000);
                (0..3).map(|i| (y[i] - o[i]).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub fn heat_deviation() -> f64 {
        let series = HeatSeries::new(ArcLengthTable::pringle().unwrap(), 0.1).unwrap();
        let n = 1000;
        let fd = super::heat_fd_extrapolated(n, 0.1, |x| heat_initial(&Point::new(x[0], x[1], x[2])));
        (0..n)
            .map(|k| (series.heat_exact(0.1, TAU * k as f64 / n as f64) - fd[k]).abs())
            .fold(0.0, f64::max)
    }

    pub fn advection_deviation() -> f64 {
        let table = ArcLengthTable::pringle().unwrap();
        (0..40)
            .map(|k| {
                let th = TAU * k as f64 / 40.0;
                let exact = super::gamma(super::characteristic_foot(th, 1.0, 4000))[2];
                (table.advection_exact(1.0, th).unwrap() - exact).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn arc_length_deviation() -> f64 {
        let table = ArcLengthTable::pringle().unwrap();
        [0.0, 0.4, 1.0, 2.5, 3.9, 5.5, TAU]
            .iter()
            .map(|&th| (table.arc_length(th) - super::simpson_arc_length(th, 20_000)).abs())
            .fold(0.0, f64::max)
    }

    fn exactness(kind: InterpKind, f: impl Fn(&Point) -> f64) -> f64 {
        let spec = GridSpec::new(GridBox::default(), Resolution::Nodes([16; 3])).unwrap();
        let g = BandedGrid::build(&example2_surface(), spec, f64::INFINITY).unwrap();
        let v: Vec<f64> = g.positions().iter().map(&f).collect();
        super::tube_points(200, 0.0, 11)
            .into_iter()
            .map(|p| Point::new(0.6 * p[0], 0.6 * p[1], 0.2 + 0.5 * p[2]))
            .map(|p| (interpolate(&g, &v, &p, kind).unwrap() - f(&p)).abs())
            .fold(0.0, f64::max)
    }

    /// Tricubic on a tricubic, trilinear on a multilinear, WENO on a triquadratic polynomial.
    pub fn interpolation_exactness() -> [(InterpKind, f64); 3] {
        [
            (
                InterpKind::Tricubic,
                exactness(InterpKind::Tricubic, |p| {
                    let (x, y, z) = (p.x, p.y, p.z);
                    0.3 + x - 2.0 * y * z + x * x * x * y * y * y * z * z * z - 0.7 * x * x * z * z * z
                        + y * y * y
                }),
            ),
            (
                InterpKind::Trilinear,
                exactness(InterpKind::Trilinear, |p| 1.0 - p.x + 2.0 * p.y * p.z + 0.5 * p.x * p.y * p.z),
            ),
            (
                InterpKind::Weno,
                exactness(InterpKind::Weno, |p| {
                    0.5 + p.x * p.x * p.y - p.z * p.z * p.y * p.y + p.x * p.y * p.z
                }),
            ),
        ]
    }
}
