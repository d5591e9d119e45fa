use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use cpcalc_core::band_grid::{BandedGrid, GridBox, GridSpec, Resolution};
use cpcalc_core::cpfn::cache_cp;
use cpcalc_core::cpm_solver::{self, CpChoice, ErrorReport, ExperimentConfig};
use cpcalc_core::geometry::example2_surface;
use cpcalc_core::io::write_cp_table;
use cpcalc_core::ode::OdeSolveConfig;
use cpcalc_core::operators::OperatorKind;
use cpcalc_core::verify::property_suite;

const CSV_SCHEMA: &str = "# cpcalc-errors v1";
const BAND_SCHEMA: &str = "# cpcalc-band v1";

#[derive(Parser)]
#[command(name = "cpcalc", version, about = "Closest point method experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve on the pringle curve over a sweep of grid spacings and closest point functions.
    Run(RunArgs),
    /// Numerically check the defining properties of the closest point functions.
    Verify(VerifyArgs),
    /// Dump the computational band of the pringle curve.
    Band(BandArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PdeArg {
    Advection,
    Heat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum OperatorArg {
    Lap1,
    Lap2,
    Lap3,
}

impl From<OperatorArg> for OperatorKind {
    fn from(op: OperatorArg) -> Self {
        match op {
            OperatorArg::Lap1 => OperatorKind::Lap1,
            OperatorArg::Lap2 => OperatorKind::Lap2,
            OperatorArg::Lap3 => OperatorKind::Lap3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum CpArg {
    #[value(name = "cyl_first", alias = "levelset_cyl_first")]
    CylFirst,
    #[value(name = "par_first", alias = "levelset_par_first")]
    ParFirst,
    #[value(alias = "euclidean")]
    Euclid,
    All,
}

impl CpArg {
    fn choices(self) -> Vec<CpChoice> {
        match self {
            CpArg::CylFirst => vec![CpChoice::LevelsetCylFirst],
            CpArg::ParFirst => vec![CpChoice::LevelsetParFirst],
            CpArg::Euclid => vec![CpChoice::Euclidean],
            CpArg::All => CpChoice::ALL.to_vec(),
        }
    }
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// JSON file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pde: Option<PdeArg>,
    /// Laplacian discretization (heat only).
    #[arg(long, value_enum)]
    operator: Option<OperatorArg>,
    #[arg(long, value_enum)]
    cp: Option<CpArg>,
    /// Comma-separated grid spacings.
    #[arg(long, value_delimiter = ',')]
    h: Option<Vec<f64>>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Fixed band half-width; by default the narrowest band that fits every stencil.
    #[arg(long)]
    band_tol: Option<f64>,
    #[arg(long)]
    ode_rtol: Option<f64>,
    #[arg(long)]
    ode_atol: Option<f64>,
    /// CSV destination; a JSON manifest is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional error-vs-h table for plotting.
    #[arg(long)]
    dat: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    pde: Option<PdeArg>,
    operator: Option<OperatorArg>,
    cp: Option<CpArg>,
    h: Option<Vec<f64>>,
    t_end: Option<f64>,
    band_tol: Option<f64>,
    ode_rtol: Option<f64>,
    ode_atol: Option<f64>,
    out: Option<PathBuf>,
    dat: Option<PathBuf>,
}

impl RunConfig {
    fn merge(file: RunConfig, args: &RunArgs) -> RunConfig {
        RunConfig {
            pde: args.pde.or(file.pde),
            operator: args.operator.or(file.operator),
            cp: args.cp.or(file.cp),
            h: args.h.clone().or(file.h),
            t_end: args.t_end.or(file.t_end),
            band_tol: args.band_tol.or(file.band_tol),
            ode_rtol: args.ode_rtol.or(file.ode_rtol),
            ode_atol: args.ode_atol.or(file.ode_atol),
            out: args.out.clone().or(file.out),
            dat: args.dat.clone().or(file.dat),
        }
    }

    fn experiments(&self) -> Result<Vec<ExperimentConfig>> {
        let pde = self.pde.unwrap_or(PdeArg::Advection);
        if pde == PdeArg::Advection && self.operator.is_some() {
            bail!("--operator only applies to --pde heat");
        }
        let hs = self.h.clone().unwrap_or_else(|| vec![0.0125, 0.00625]);
        if hs.is_empty() {
            bail!("no grid spacings given");
        }
        let mut ode = OdeSolveConfig::default();
        if let Some(r) = self.ode_rtol {
            ode.rel_tol = r;
        }
        if let Some(a) = self.ode_atol {
            ode.abs_tol = a;
        }
        let mut out = Vec::new();
        for cp in self.cp.unwrap_or(CpArg::All).choices() {
            for &h in &hs {
                let mut cfg = match pde {
                    PdeArg::Advection => ExperimentConfig::advection(cp, h),
                    PdeArg::Heat => {
                        ExperimentConfig::diffusion(cp, self.operator.unwrap_or(OperatorArg::Lap2).into(), h)
                    }
                };
                if let Some(t) = self.t_end {
                    cfg.t_end = t;
                }
                cfg.band_tol = self.band_tol;
                cfg.ode = ode;
                cfg.validate()?;
                out.push(cfg);
            }
        }
        Ok(out)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema: &'a str,
    version: &'a str,
    config: &'a RunConfig,
    reports: &'a [ErrorReport],
}

fn experiment_name(r: &ErrorReport) -> &'static str {
    match r.operator {
        OperatorKind::LaxFriedrichs => "advection",
        _ => "heat",
    }
}

/// Order against the next coarser spacing of the same closest point function.
fn orders(reports: &[ErrorReport]) -> Vec<Option<f64>> {
    reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            reports[..i]
                .iter()
                .filter(|p| p.cp == r.cp && p.h > r.h)
                .min_by(|a, b| a.h.total_cmp(&b.h))
                .map(|p| (p.linf_error / r.linf_error).ln() / (p.h / r.h).ln())
        })
        .collect()
}

fn write_csv(path: &Path, reports: &[ErrorReport]) -> Result<()> {
    let mut file = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(file, "{CSV_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "experiment",
        "cp",
        "operator",
        "h",
        "linf_error",
        "order",
        "steps",
        "band_tol",
        "band",
        "evolvable",
        "interp_safe",
    ])?;
    for (r, order) in reports.iter().zip(orders(reports)) {
        w.write_record([
            experiment_name(r).to_string(),
            r.cp.name().to_string(),
            r.operator.name().to_string(),
            r.h.to_string(),
            format!("{:.6e}", r.linf_error),
            order.map(|o| format!("{o:.4}")).unwrap_or_default(),
            r.steps.to_string(),
            r.band_tol.to_string(),
            r.band.band.to_string(),
            r.band.evolvable.to_string(),
            r.band.interp_safe.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_dat(path: &Path, reports: &[ErrorReport]) -> Result<()> {
    let mut cps: Vec<CpChoice> = Vec::new();
    let mut hs: Vec<f64> = Vec::new();
    for r in reports {
        if !cps.contains(&r.cp) {
            cps.push(r.cp);
        }
        if !hs.contains(&r.h) {
            hs.push(r.h);
        }
    }
    hs.sort_by(|a, b| b.total_cmp(a));
    let mut f = BufWriter::new(File::create(path)?);
    write!(f, "# h")?;
    for cp in &cps {
        write!(f, " {}", cp.name())?;
    }
    writeln!(f)?;
    for h in hs {
        write!(f, "{h:e}")?;
        for cp in &cps {
            match reports.iter().find(|r| r.cp == *cp && r.h == h) {
                Some(r) => write!(f, " {:.6e}", r.linf_error)?,
                None => write!(f, " NaN")?,
            }
        }
        writeln!(f)?;
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let file = match &args.config {
        Some(p) => serde_json::from_reader(File::open(p).with_context(|| format!("opening {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => RunConfig::default(),
    };
    let config = RunConfig::merge(file, &args);
    let experiments = config.experiments()?;
    let mut reports = Vec::with_capacity(experiments.len());
    for cfg in experiments {
        let (cp, h) = (cfg.cp.name(), cfg.h);
        let r = cpm_solver::run(cfg).with_context(|| format!("{cp} at h = {h}"))?;
        eprintln!(
            "{:<10} {:<7} {:<5} h={:<9} error={:.4e} steps={} band={} ({:.1}s)",
            experiment_name(&r),
            cp,
            r.operator.name(),
            h,
            r.linf_error,
            r.steps,
            r.band.band,
            r.seconds
        );
        reports.push(r);
    }
    match &config.out {
        Some(path) => {
            write_csv(path, &reports)?;
            let manifest = path.with_extension("json");
            let m = Manifest {
                schema: CSV_SCHEMA.trim_start_matches("# "),
                version: env!("CARGO_PKG_VERSION"),
                config: &config,
                reports: &reports,
            };
            serde_json::to_writer_pretty(BufWriter::new(File::create(&manifest)?), &m)?;
        }
        None => {
            for (r, order) in reports.iter().zip(orders(&reports)) {
                println!(
                    "{} {} {} {} {:.6e} {}",
                    experiment_name(r),
                    r.cp.name(),
                    r.operator.name(),
                    r.h,
                    r.linf_error,
                    order.map(|o| format!("{o:.4}")).unwrap_or_else(|| "-".into())
                );
            }
        }
    }
    if let Some(path) = &config.dat {
        write_dat(path, &reports)?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// `all` also checks the closed-form sphere/plane examples.
    #[arg(long, value_enum, default_value = "all")]
    cp: CpArg,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long)]
    ode_rtol: Option<f64>,
    #[arg(long)]
    ode_atol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let mut ode = OdeSolveConfig::tight();
    if let Some(r) = args.ode_rtol {
        ode.rel_tol = r;
    }
    if let Some(a) = args.ode_atol {
        ode.abs_tol = a;
    }
    let only = match args.cp {
        CpArg::All => None,
        c => Some(c.choices()[0]),
    };
    let results = property_suite(args.samples, ode, only)?;
    let json = serde_json::to_string_pretty(&results)?;
    match &args.out {
        Some(p) => std::fs::write(p, json + "\n")?,
        None => println!("{json}"),
    }
    let failed: Vec<_> = results.iter().filter(|r| !r.pass).collect();
    for r in &failed {
        eprintln!(
            "FAIL {} {}: {:.3e} > {:.1e}",
            r.cp, r.check, r.max_defect, r.budget
        );
    }
    Ok(if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

#[derive(Args, Debug)]
struct BandArgs {
    /// Nodes per axis: one value for all axes or three comma-separated values.
    #[arg(long, value_delimiter = ',', conflicts_with = "h_grid", required_unless_present = "h_grid")]
    dims: Option<Vec<usize>>,
    #[arg(long)]
    h_grid: Option<f64>,
    #[arg(long, default_value_t = 0.125)]
    tol: f64,
    /// Also compute and dump closest points.
    #[arg(long, value_enum)]
    cp: Option<CpArg>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Binary closest point table of the first selected function.
    #[arg(long, requires = "cp")]
    table: Option<PathBuf>,
}

fn band(args: BandArgs) -> Result<ExitCode> {
    let resolution = match (&args.dims, args.h_grid) {
        (Some(d), _) if d.len() == 1 => Resolution::Nodes([d[0]; 3]),
        (Some(d), _) if d.len() == 3 => Resolution::Nodes([d[0], d[1], d[2]]),
        (Some(d), _) => bail!("--dims takes 1 or 3 values, got {}", d.len()),
        (None, Some(h)) => Resolution::Spacing(h),
        (None, None) => bail!("need --dims or --h-grid"),
    };
    let surface = example2_surface();
    let spec = GridSpec::new(GridBox::default(), resolution)?;
    let grid = BandedGrid::build(&surface, spec, args.tol)?;
    let choices = args.cp.map(CpArg::choices).unwrap_or_default();
    let tables = choices
        .iter()
        .map(|c| cache_cp(&grid, c.build(&surface, OdeSolveConfig::default()).as_ref(), &surface))
        .collect::<cpcalc_core::Result<Vec<_>>>()?;

    let mut summary = format!(
        "band {} nodes of {} (dims {:?}, tol {})",
        grid.len(),
        spec.total_nodes(),
        spec.dims,
        args.tol
    );
    for (c, t) in choices.iter().zip(&tables) {
        summary += &format!("; {} residual {:.3e}", c.name(), t.max_residual);
    }
    if tables.len() > 1 {
        let spread = (0..grid.len())
            .map(|b| (tables[0].points[b] - tables[1].points[b]).norm())
            .fold(0.0, f64::max);
        summary += &format!("; max |{} - {}| {:.6e}", choices[0].name(), choices[1].name(), spread);
    }
    eprintln!("{summary}");

    if let Some(path) = &args.out {
        let mut file = BufWriter::new(File::create(path)?);
        writeln!(file, "{BAND_SCHEMA}")?;
        let mut w = csv::Writer::from_writer(file);
        let mut header: Vec<String> = ["i", "j", "k", "x", "y", "z", "dist"].map(String::from).to_vec();
        for c in &choices {
            for axis in ["x", "y", "z"] {
                header.push(format!("{}_{axis}", c.name()));
            }
        }
        w.write_record(&header)?;
        for b in 0..grid.len() {
            let [i, j, k] = grid.index(b);
            let x = grid.position(b);
            let mut row = vec![
                i.to_string(),
                j.to_string(),
                k.to_string(),
                x.x.to_string(),
                x.y.to_string(),
                x.z.to_string(),
                surface.band_distance(&x).to_string(),
            ];
            for t in &tables {
                row.extend(t.points[b].iter().map(|v| v.to_string()));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    if let Some(path) = &args.table {
        write_cp_table(&mut BufWriter::new(File::create(path)?), &grid, &tables[0])?;
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Verify(a) => verify(a),
        Command::Band(a) => band(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_file() {
        let file: RunConfig = serde_json::from_str(r#"{"pde": "heat", "operator": "lap1", "h": [0.1], "t_end": 0.5}"#).unwrap();
        let args = RunArgs {
            operator: Some(OperatorArg::Lap3),
            h: Some(vec![0.2, 0.1]),
            ..Default::default()
        };
        let m = RunConfig::merge(file, &args);
        assert_eq!(m.pde, Some(PdeArg::Heat));
        assert_eq!(m.operator, Some(OperatorArg::Lap3));
        assert_eq!(m.h, Some(vec![0.2, 0.1]));
        assert_eq!(m.t_end, Some(0.5));
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"pdee": "heat"}"#).is_err());
    }

    #[test]
    fn sweep_order_is_cp_then_h() {
        let cfg = RunConfig {
            h: Some(vec![0.1, 0.05]),
            ..Default::default()
        };
        let e = cfg.experiments().unwrap();
        let got: Vec<_> = e.iter().map(|c| (c.cp, c.h)).collect();
        assert_eq!(got.len(), 6);
        assert_eq!(got[0], (CpChoice::LevelsetCylFirst, 0.1));
        assert_eq!(got[1], (CpChoice::LevelsetCylFirst, 0.05));
        assert_eq!(got[5], (CpChoice::Euclidean, 0.05));
    }

    #[test]
    fn operator_needs_heat() {
        let cfg = RunConfig {
            operator: Some(OperatorArg::Lap1),
            ..Default::default()
        };
        assert!(cfg.experiments().is_err());
    }
}
