//! Reference solutions on a closed parametrized curve: arc length and its
//! inverse, exact transport along the unit tangent, and the Fourier series
//! of the heat equation.

use std::f64::consts::TAU;
use std::sync::Arc;

use crate::error::{CpError, Result};
use crate::geometry::{normalize_angle, ParametrizedCurve, Point, PringleCurve};
use crate::quadrature::{gk15, integrate_adaptive};

const PANELS: usize = 512;
const PANEL_TOL: f64 = 1e-15;
const NEWTON_MAX: usize = 60;
const SERIES_NODES: usize = 1 << 14;

/// Cumulative arc length at uniformly spaced panel ends; partial panels use
/// one 15-point Kronrod rule.
#[derive(Clone)]
pub struct ArcLengthTable {
    curve: Arc<dyn ParametrizedCurve>,
    cumulative: Vec<f64>,
    pub s_total: f64,
}

impl std::fmt::Debug for ArcLengthTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ArcLengthTable")
            .field("panels", &PANELS)
            .field("s_total", &self.s_total)
            .finish()
    }
}

impl ArcLengthTable {
    pub fn new(curve: Arc<dyn ParametrizedCurve>) -> Result<Self> {
        let dt = TAU / PANELS as f64;
        let mut cumulative = Vec::with_capacity(PANELS + 1);
        cumulative.push(0.0);
        let mut s = 0.0;
        for j in 0..PANELS {
            let a = j as f64 * dt;
            s += integrate_adaptive(|t| curve.speed(t), a, a + dt, PANEL_TOL)?;
            cumulative.push(s);
        }
        Ok(Self {
            curve,
            cumulative,
            s_total: s,
        })
    }

    pub fn pringle() -> Result<Self> {
        Self::new(Arc::new(PringleCurve))
    }

    pub fn curve(&self) -> &dyn ParametrizedCurve {
        self.curve.as_ref()
    }

    fn panel_width() -> f64 {
        TAU / PANELS as f64
    }

    /// `s(θ) = ∫_0^θ |γ'|` for θ ∈ [0, 2π].
    pub fn arc_length(&self, theta: f64) -> f64 {
        let theta = theta.clamp(0.0, TAU);
        let j = ((theta / Self::panel_width()) as usize).min(PANELS - 1);
        let a = j as f64 * Self::panel_width();
        self.cumulative[j] + gk15(&|t| self.curve.speed(t), a, theta).0
    }

    /// Arc length from `a` to `b` (`a ≤ b` within [0, 2π]).
    pub fn arc_length_between(&self, a: f64, b: f64) -> Result<f64> {
        integrate_adaptive(|t| self.curve.speed(t), a, b, 1e-14)
    }

    /// θ ∈ [0, 2π) with `s(θ) = l mod s_total`.
    pub fn s_inverse(&self, l: f64) -> Result<f64> {
        let l = l.rem_euclid(self.s_total);
        let j = self.cumulative.partition_point(|&s| s <= l).clamp(1, PANELS) - 1;
        let mut lo = j as f64 * Self::panel_width();
        let mut hi = lo + Self::panel_width();
        let mut theta = lo + (l - self.cumulative[j]) / self.curve.speed(lo);
        for _ in 0..NEWTON_MAX {
            if !(lo..=hi).contains(&theta) {
                theta = 0.5 * (lo + hi);
            }
            let f = self.arc_length(theta) - l;
            if f > 0.0 {
                hi = theta;
            } else {
                lo = theta;
            }
            let step = f / self.curve.speed(theta);
            theta -= step;
            if step.abs() < 1e-15 || hi - lo < 1e-15 {
                return Ok(normalize_angle(theta.clamp(lo, hi)));
            }
        }
        Err(CpError::NoConvergence(format!("arc-length inverse at l = {l}")))
    }

    /// Exact solution of `u_t + div(u T) = 0` with `u(0, y) = y₃` and
    /// `T = −γ'/|γ'|`: `ū(t, θ) = γ₃(s⁻¹(t + s(θ)))`.
    pub fn advection_exact(&self, t: f64, theta: f64) -> Result<f64> {
        let theta = normalize_angle(theta);
        Ok(self.curve.point(self.s_inverse(t + self.arc_length(theta))?).z)
    }
}

pub fn heat_initial(y: &Point) -> f64 {
    (4.0 * y.z).exp() / 50.0
}

pub fn advection_initial(y: &Point) -> f64 {
    y.z
}

/// `u(t, s) = Σ_m c_m e^{−ω²m²t} e^{iωms}` with `ω = 2π/s_total`.
#[derive(Clone, Debug)]
pub struct HeatSeries {
    pub table: ArcLengthTable,
    pub omega: f64,
    /// `(Re c_m, Im c_m)` for `m = 0..=M`; negative modes are conjugates.
    pub coeffs: Vec<(f64, f64)>,
    pub truncation: usize,
}

impl HeatSeries {
    /// Coefficients of `u₀ = exp(4y₃)/50` on the curve, truncated for evaluation
    /// at times `t ≥ t_min`.
    pub fn new(table: ArcLengthTable, t_min: f64) -> Result<Self> {
        Self::with_initial(table, t_min, heat_initial)
    }

    pub fn with_initial(table: ArcLengthTable, t_min: f64, u0: impl Fn(&Point) -> f64) -> Result<Self> {
        if !(t_min > 0.0) {
            return Err(CpError::InvalidConfig(format!("heat series needs t > 0, got {t_min}")));
        }
        let omega = TAU / table.s_total;
        let n = SERIES_NODES;
        let dtheta = TAU / n as f64;
        let samples: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let th = k as f64 * dtheta;
                let curve = table.curve();
                (u0(&curve.point(th)) * curve.speed(th), table.arc_length(th))
            })
            .collect();
        let coeff = |m: usize| {
            let (mut re, mut im) = (0.0, 0.0);
            for &(w, s) in &samples {
                let (sn, cs) = (omega * m as f64 * s).sin_cos();
                re += w * cs;
                im -= w * sn;
            }
            let scale = dtheta / table.s_total;
            (re * scale, im * scale)
        };
        let c0 = coeff(0);
        let bound = f64::EPSILON / 2.0 / c0.0.abs();
        let mut truncation = 0;
        while (-(omega * omega) * (truncation * truncation) as f64 * t_min).exp() >= bound {
            truncation += 1;
        }
        let coeffs = (0..=truncation).map(|m| if m == 0 { c0 } else { coeff(m) }).collect();
        Ok(Self {
            table,
            omega,
            coeffs,
            truncation,
        })
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].0
    }

    pub fn eval_at_arc_length(&self, t: f64, s: f64) -> f64 {
        let mut u = self.coeffs[0].0;
        for (m, &(re, im)) in self.coeffs.iter().enumerate().skip(1) {
            let k = self.omega * m as f64;
            let (sn, cs) = (k * s).sin_cos();
            u += 2.0 * (re * cs - im * sn) * (-k * k * t).exp();
        }
        u
    }

    pub fn heat_exact(&self, t: f64, theta: f64) -> f64 {
        self.eval_at_arc_length(t, self.table.arc_length(normalize_angle(theta)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ArcLengthTable {
        ArcLengthTable::pringle().unwrap()
    }

    #[test]
    fn arc_length_endpoints_and_additivity() {
        let t = table();
        assert_eq!(t.arc_length(0.0), 0.0);
        assert!((t.arc_length(TAU) - t.s_total).abs() < 1e-13);
        for th in [0.1, 1.3, 2.9, 5.0] {
            let rest = t.arc_length_between(th, TAU).unwrap();
            assert!((t.arc_length(th) + rest - t.s_total).abs() < 1e-12);
        }
    }

    #[test]
    fn total_length_matches_trapezoid() {
        // the periodic trapezoid rule converges spectrally
        let n = 4096;
        let trap: f64 = (0..n).map(|k| PringleCurve.speed(TAU * k as f64 / n as f64)).sum::<f64>() * TAU
            / n as f64;
        assert!((table().s_total - trap).abs() < 1e-12, "{}", table().s_total - trap);
    }

    #[test]
    fn inverse_round_trip() {
        let t = table();
        assert_eq!(t.s_inverse(0.0).unwrap(), 0.0);
        for th in [1e-9, 0.5, 1.3, 3.14, 6.2] {
            let back = t.s_inverse(t.arc_length(th)).unwrap();
            assert!((back - th).abs() < 1e-12, "{th} {back}");
        }
        let th = t.s_inverse(t.s_total * 2.5).unwrap();
        assert!((t.arc_length(th) - 0.5 * t.s_total).abs() < 1e-12);
    }

    #[test]
    fn advection_initial_and_period() {
        let t = table();
        assert!((t.advection_exact(0.0, 0.0).unwrap() - 1.0).abs() < 1e-14);
        for th in [0.3f64, 2.0, 4.4] {
            let u0 = th.cos().powi(2);
            assert!((t.advection_exact(0.0, th).unwrap() - u0).abs() < 1e-12);
            assert!((t.advection_exact(t.s_total, th).unwrap() - u0).abs() < 1e-12);
        }
    }

    #[test]
    fn heat_series_mean_and_decay() {
        let series = HeatSeries::new(table(), 0.1).unwrap();
        let t = &series.table;
        let mean = integrate_adaptive(
            |th| heat_initial(&PringleCurve.point(th)) * PringleCurve.speed(th),
            0.0,
            TAU,
            1e-14,
        )
        .unwrap()
            / t.s_total;
        assert!((series.mean() - mean).abs() < 1e-13);
        assert!((series.heat_exact(1e3, 1.0) - mean).abs() < 1e-13);
        let mag = |m: usize| series.coeffs[m].0.hypot(series.coeffs[m].1);
        // γ(θ+π) mirrors γ(θ) and u₀ only sees y₃, so odd modes vanish
        for m in (1..series.coeffs.len()).step_by(2) {
            assert!(mag(m) < 1e-14, "{m} {}", mag(m));
        }
        for m in 4..series.coeffs.len() {
            assert!(mag(m) <= mag(2));
        }
        assert!((-(series.omega.powi(2)) * (series.truncation.pow(2)) as f64 * 0.1).exp() * series.mean()
            < f64::EPSILON / 2.0);
    }

    #[test]
    fn heat_series_reproduces_initial_data_in_the_limit() {
        let series = HeatSeries::new(table(), 1e-5).unwrap();
        for th in [0.0, 0.7, 2.2] {
            let u0 = heat_initial(&PringleCurve.point(th));
            assert!((series.heat_exact(1e-5, th) - u0).abs() < 1e-3);
        }
    }

    #[test]
    fn heat_series_is_real_and_periodic() {
        let series = HeatSeries::new(table(), 0.1).unwrap();
        assert!(series.coeffs[0].1.abs() < 1e-15);
        assert!((series.heat_exact(0.1, 0.0) - series.heat_exact(0.1, TAU)).abs() < 1e-13);
    }
}
