//! Explicit closest point method: evolve on the band, then re-extend by
//! interpolating at the cached closest points.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::band_grid::{BandReport, BandedGrid, GridBox, GridSpec, Masks, Resolution};
use crate::cpfn::{cache_cp, levelset_cp, ClosestPointFunction, CpTable, EuclideanCurveCp};
use crate::error::{CpError, Result};
use crate::geometry::{
    example2_surface, tangent_field, tangent_projector, LevelSetSurface, ParametrizedCurve, Point,
    PringleCurve,
};
use crate::interp::{InterpKind, InterpPlan};
use crate::ode::OdeSolveConfig;
use crate::operators::{
    first_ring_closure, lap1, lap2, lap3, lax_friedrichs, lax_friedrichs_axis, OperatorKind,
};
use crate::reference::{advection_initial, heat_initial, ArcLengthTable, HeatSeries};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pde {
    Advection,
    Diffusion,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LfVariant {
    /// Three one-dimensional sweeps per step, each followed by re-extension.
    #[default]
    Split,
    /// Mean over all six face neighbors; needs `τ ≤ h/√3` when `T` is diagonal.
    Unsplit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CpChoice {
    /// Cylinder first, then along the cylinder onto the parabola.
    LevelsetCylFirst,
    /// Parabola first, then along the parabola onto the cylinder.
    LevelsetParFirst,
    Euclidean,
}

impl CpChoice {
    pub const ALL: [CpChoice; 3] = [
        CpChoice::LevelsetCylFirst,
        CpChoice::LevelsetParFirst,
        CpChoice::Euclidean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CpChoice::LevelsetCylFirst => "cp",
            CpChoice::LevelsetParFirst => "cp_hat",
            CpChoice::Euclidean => "ecp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "cyl_first" | "levelset_cyl_first" | "cp" => CpChoice::LevelsetCylFirst,
            "par_first" | "levelset_par_first" | "cp_hat" => CpChoice::LevelsetParFirst,
            "euclid" | "euclidean" | "ecp" => CpChoice::Euclidean,
            _ => return None,
        })
    }

    pub fn build(self, surface: &LevelSetSurface, ode: OdeSolveConfig) -> Arc<dyn ClosestPointFunction> {
        match self {
            CpChoice::LevelsetCylFirst => levelset_cp(surface, [0, 1], ode),
            CpChoice::LevelsetParFirst => levelset_cp(surface, [1, 0], ode),
            CpChoice::Euclidean => Arc::new(EuclideanCurveCp { curve: PringleCurve }),
        }
    }
}

/// Band widths tried by the automatic rule, in multiples of `h`.
pub const AUTO_BAND_FACTOR: f64 = 10.0;
const AUTO_BAND_GROWTH: f64 = 1.25;
const AUTO_BAND_ATTEMPTS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub pde: Pde,
    pub cp: CpChoice,
    /// Ignored for advection, which always uses Lax–Friedrichs.
    pub operator: OperatorKind,
    #[serde(default)]
    pub lf_variant: LfVariant,
    pub h: f64,
    pub t_end: f64,
    /// Overrides `0.95h` (advection) or `0.2h²` (diffusion).
    pub tau: Option<f64>,
    /// Overrides WENO (advection) or tricubic (diffusion).
    pub interp: Option<InterpKind>,
    pub bbox: GridBox,
    /// `None` picks the narrowest band that supports all stencils.
    pub band_tol: Option<f64>,
    pub ode: OdeSolveConfig,
}

impl ExperimentConfig {
    pub fn advection(cp: CpChoice, h: f64) -> Self {
        Self {
            pde: Pde::Advection,
            cp,
            operator: OperatorKind::LaxFriedrichs,
            lf_variant: LfVariant::Split,
            h,
            t_end: 1.0,
            tau: None,
            interp: None,
            bbox: GridBox::default(),
            band_tol: None,
            ode: OdeSolveConfig::default(),
        }
    }

    pub fn diffusion(cp: CpChoice, operator: OperatorKind, h: f64) -> Self {
        Self {
            pde: Pde::Diffusion,
            operator,
            t_end: 0.1,
            ..Self::advection(cp, h)
        }
    }

    pub fn operator_kind(&self) -> OperatorKind {
        match self.pde {
            Pde::Advection => OperatorKind::LaxFriedrichs,
            Pde::Diffusion => self.operator,
        }
    }

    pub fn time_step(&self) -> f64 {
        self.tau.unwrap_or(match self.pde {
            Pde::Advection => 0.95 * self.h,
            Pde::Diffusion => 0.2 * self.h * self.h,
        })
    }

    pub fn interp_kind(&self) -> InterpKind {
        self.interp.unwrap_or(match self.pde {
            Pde::Advection => InterpKind::Weno,
            Pde::Diffusion => InterpKind::Tricubic,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.pde == Pde::Diffusion && self.operator == OperatorKind::LaxFriedrichs {
            return Err(CpError::InvalidConfig("diffusion needs a Laplacian operator".into()));
        }
        if !(self.h > 0.0 && self.t_end > 0.0 && self.time_step() > 0.0) {
            return Err(CpError::InvalidConfig(format!(
                "h = {}, t_end = {}, tau = {}",
                self.h,
                self.t_end,
                self.time_step()
            )));
        }
        if let Some(tol) = self.band_tol {
            if !(tol > 0.0) {
                return Err(CpError::InvalidConfig(format!("band_tol {tol}")));
            }
        }
        self.ode.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub pde: Pde,
    pub cp: CpChoice,
    pub operator: OperatorKind,
    pub h: f64,
    pub linf_error: f64,
    pub band_tol: f64,
    pub band: BandReport,
    pub steps: usize,
    pub seconds: f64,
    pub cp_residual_max: f64,
}

/// Everything that stays fixed during the time loop.
pub struct CpmSolver {
    pub config: ExperimentConfig,
    pub surface: LevelSetSurface,
    pub grid: BandedGrid,
    pub cps: CpTable,
    pub masks: Masks,
    extension: InterpPlan,
    flux_nodes: Vec<u32>,
    tcp: Vec<Vector3<f64>>,
    pcp: Vec<Matrix3<f64>>,
}

impl std::fmt::Debug for CpmSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CpmSolver")
            .field("config", &self.config)
            .field("band", &self.grid.len())
            .finish()
    }
}

impl CpmSolver {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let surface = example2_surface();
        let spec = GridSpec::new(config.bbox, Resolution::Spacing(config.h))?;
        let cp = config.cp.build(&surface, config.ode);
        let interp = config.interp_kind();
        let reach = config.operator_kind().reach();

        let (fixed, mut tol) = match config.band_tol {
            Some(t) => (true, t),
            None => (false, AUTO_BAND_FACTOR * config.h),
        };
        let mut attempt = 0;
        let (grid, cps, masks) = loop {
            let grid = BandedGrid::build(&surface, spec, tol)?;
            let cps = cache_cp(&grid, cp.as_ref(), &surface)?;
            match grid.classify(&cps, interp, reach) {
                Ok(masks) => break (grid, cps, masks),
                Err(e @ CpError::StencilStarvation { .. }) => {
                    attempt += 1;
                    if fixed || attempt >= AUTO_BAND_ATTEMPTS {
                        return Err(e);
                    }
                    tol *= AUTO_BAND_GROWTH;
                }
                Err(e) => return Err(e),
            }
        };
        Self::assemble(config, surface, grid, cps, masks)
    }

    /// Builds a solver on a prepared band and closest point table.
    pub fn assemble(
        config: ExperimentConfig,
        surface: LevelSetSurface,
        grid: BandedGrid,
        cps: CpTable,
        masks: Masks,
    ) -> Result<Self> {
        let targets: Vec<Point> = masks
            .interp_safe
            .iter()
            .map(|&b| cps.points[b as usize])
            .collect();
        let extension = InterpPlan::new(&grid, &targets, config.interp_kind())?;
        let op = config.operator_kind();
        let flux_nodes = if op == OperatorKind::Lap2 {
            first_ring_closure(&grid, &masks.evolvable)
        } else {
            Vec::new()
        };
        let mut tcp = Vec::new();
        let mut pcp = Vec::new();
        match op {
            OperatorKind::LaxFriedrichs => {
                tcp = vec![Vector3::repeat(f64::NAN); grid.len()];
                let vals = masks
                    .interp_safe
                    .par_iter()
                    .map(|&b| tangent_field(&surface, &cps.points[b as usize]))
                    .collect::<Result<Vec<_>>>()?;
                for (&b, t) in masks.interp_safe.iter().zip(vals) {
                    tcp[b as usize] = t;
                }
            }
            OperatorKind::Lap2 => {
                pcp = vec![Matrix3::repeat(f64::NAN); grid.len()];
                let vals = masks
                    .interp_safe
                    .par_iter()
                    .map(|&b| tangent_projector(&surface, &cps.points[b as usize]))
                    .collect::<Result<Vec<_>>>()?;
                for (&b, p) in masks.interp_safe.iter().zip(vals) {
                    pcp[b as usize] = p;
                }
            }
            _ => {}
        }
        Ok(Self {
            config,
            surface,
            grid,
            cps,
            masks,
            extension,
            flux_nodes,
            tcp,
            pcp,
        })
    }

    /// `v₀ = u₀ ∘ cp` on the interp-safe nodes, NaN elsewhere.
    pub fn initialize(&self, u0: impl Fn(&Point) -> f64 + Sync) -> Vec<f64> {
        let mut v = vec![f64::NAN; self.grid.len()];
        for &b in &self.masks.interp_safe {
            v[b as usize] = u0(&self.cps.points[b as usize]);
        }
        v
    }

    /// The spatial update on evolvable nodes, in mask order.
    fn evolve(&self, v: &[f64], tau: f64) -> Result<Vec<f64>> {
        let w = &self.masks.evolvable;
        let rate = match self.config.operator_kind() {
            OperatorKind::LaxFriedrichs => {
                return lax_friedrichs(&self.grid, v, &self.tcp, w, tau);
            }
            OperatorKind::Lap1 => lap1(&self.grid, v, w)?,
            OperatorKind::Lap2 => lap2(&self.grid, v, &self.pcp, w, &self.flux_nodes)?,
            OperatorKind::Lap3 => lap3(
                &self.grid,
                v,
                w,
                &self.extension,
                &self.masks.interp_safe,
                w,
            )?,
        };
        Ok(w
            .iter()
            .zip(rate)
            .map(|(&b, r)| v[b as usize] + tau * r)
            .collect())
    }

    /// One forward Euler step followed by re-extension.
    pub fn step(&self, v: &[f64], tau: f64, step_index: usize) -> Result<Vec<f64>> {
        if self.config.operator_kind() == OperatorKind::LaxFriedrichs
            && self.config.lf_variant == LfVariant::Split
        {
            let mut v = v.to_vec();
            for axis in 0..3 {
                let evolved =
                    lax_friedrichs_axis(&self.grid, &v, &self.tcp, &self.masks.evolvable, tau, axis)?;
                v = self.extend(evolved, step_index)?;
            }
            return Ok(v);
        }
        let evolved = self.evolve(v, tau)?;
        self.extend(evolved, step_index)
    }

    /// Interpolates values given on the evolvable nodes at the cached closest
    /// points of the interp-safe nodes.
    fn extend(&self, evolved: Vec<f64>, step_index: usize) -> Result<Vec<f64>> {
        let mut w = vec![f64::NAN; self.grid.len()];
        for (&b, val) in self.masks.evolvable.iter().zip(evolved) {
            w[b as usize] = val;
        }
        let ext: Vec<f64> = (0..self.extension.len())
            .into_par_iter()
            .with_min_len(512)
            .map(|i| self.extension.eval(i, &w))
            .collect();
        let mut out = vec![f64::NAN; self.grid.len()];
        for (&b, val) in self.masks.interp_safe.iter().zip(ext) {
            if !val.is_finite() {
                return Err(CpError::NaNDetected {
                    step: step_index,
                    offset: b as usize,
                });
            }
            out[b as usize] = val;
        }
        Ok(out)
    }

    /// Steps from `t = 0` to `t_end`; the last step is shortened to land exactly.
    pub fn evolve_to(&self, mut v: Vec<f64>, t_end: f64) -> Result<(Vec<f64>, usize)> {
        let tau = self.config.time_step();
        let mut t = 0.0;
        let mut steps = 0;
        while t < t_end {
            let dt = if t + tau >= t_end * (1.0 - 1e-14) { t_end - t } else { tau };
            v = self.step(&v, dt, steps)?;
            steps += 1;
            t = if dt == tau { t + tau } else { t_end };
        }
        Ok((v, steps))
    }

    /// Max over interp-safe nodes of `|v(x) − ū(t, θ(cp(x)))|`.
    pub fn linf_error(&self, v: &[f64], exact: impl Fn(f64) -> Result<f64> + Sync) -> Result<f64> {
        let curve = PringleCurve;
        self.masks
            .interp_safe
            .par_iter()
            .map(|&b| {
                let theta = curve.theta_of_point(&self.cps.points[b as usize])?;
                Ok((v[b as usize] - exact(theta)?).abs())
            })
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))
    }

    pub fn run(&self) -> Result<ErrorReport> {
        let start = Instant::now();
        let cfg = &self.config;
        let table = ArcLengthTable::pringle()?;
        let (linf_error, steps) = match cfg.pde {
            Pde::Advection => {
                let (v, steps) = self.evolve_to(self.initialize(advection_initial), cfg.t_end)?;
                (self.linf_error(&v, |th| table.advection_exact(cfg.t_end, th))?, steps)
            }
            Pde::Diffusion => {
                let series = HeatSeries::new(table, cfg.t_end)?;
                let (v, steps) = self.evolve_to(self.initialize(heat_initial), cfg.t_end)?;
                (self.linf_error(&v, |th| Ok(series.heat_exact(cfg.t_end, th)))?, steps)
            }
        };
        Ok(ErrorReport {
            pde: cfg.pde,
            cp: cfg.cp,
            operator: cfg.operator_kind(),
            h: cfg.h,
            linf_error,
            band_tol: self.grid.band_tol,
            band: self.masks.report(&self.grid),
            steps,
            seconds: start.elapsed().as_secs_f64(),
            cp_residual_max: self.cps.max_residual,
        })
    }
}

/// Builds the solver and runs the experiment; the report's wall time includes setup.
pub fn run(config: ExperimentConfig) -> Result<ErrorReport> {
    let start = Instant::now();
    let solver = CpmSolver::new(config)?;
    let mut report = solver.run()?;
    report.seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Least-squares slope of `log(error)` against `log(h)`.
pub fn observed_order(h: &[f64], err: &[f64]) -> f64 {
    let n = h.len() as f64;
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
