//! Adaptive Gauss–Kronrod (7/15) quadrature.

use crate::error::{CpError, Result};

const XK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
// weights of the embedded Gauss rule on XK[1], XK[3], XK[5], XK[7]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

const MAX_DEPTH: usize = 40;

/// Kronrod estimate and |Kronrod − Gauss| on `[a, b]`.
pub fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let s = f(c - r * XK[i]) + f(c + r * XK[i]);
        k += WK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * r, ((k - g) * r).abs())
}

/// `∫_a^b f` to absolute tolerance `tol` by recursive bisection.
pub fn integrate_adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> Result<f64> {
        let (k, err) = gk15(f, a, b);
        if err <= tol || (err <= 1e-15 * k.abs()) {
            return Ok(k);
        }
        if depth >= MAX_DEPTH {
            return Err(CpError::QuadratureNoConvergence { a, b });
        }
        let m = 0.5 * (a + b);
        Ok(rec(f, a, m, 0.5 * tol, depth + 1)? + rec(f, m, b, 0.5 * tol, depth + 1)?)
    }
    if a == b {
        return Ok(0.0);
    }
    rec(&f, a, b, tol, 0)
}
