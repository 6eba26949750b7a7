//! Command-line front end: one subcommand per experiment, each reading a resolved
//! [`ExperimentConfig`] and writing CSV/JSON files plus a manifest to the output directory.
//!
//! Outputs carry no timestamps or thread counts, so reruns with the same
//! configuration are byte-identical. CSV files start with a `# gyration <version>
//! config=<sha256>` comment line; JSON files carry the same two values as fields.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{self, compare_to_theory, fit_run, Comparison, FitResult, Fitter, Thresholds};
use crate::config::{ExperimentConfig, FitKind};
use crate::error::{invalid, Error, Result};
use crate::lace::{self, LaceReport, LaceSeries};
use crate::lattice::{AxisMode, LatticeField};
use crate::stepdist::{fit_small_k_asymptotics, StepDistribution};
use crate::theory::{k_q, predict_moment_ratio, TheoryPrediction};
use crate::walkers::{
    enumerate_saw, exact_op, sample_saw_mc, simulate_op, EvolutionRun, Model, OpConfig, RwOptions, SawMcConfig,
    StepSummary,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "gyration", version, about = "Moment asymptotics of long-range walks and percolation")]
pub struct Cli {
    /// JSON experiment configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; all cores when absent. Does not affect results.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Step distribution and its small-k profile.
    Dist,
    /// Exact random-walk evolution and moment fits.
    Evolve,
    /// Self-avoiding walk: exact enumeration, or Monte Carlo for model saw-mc.
    Saw,
    /// Oriented percolation: Monte Carlo, or exact for model op-exact.
    Op,
    /// Predicted moment ratios.
    Theory,
    /// Lace coefficients of an exact run.
    Lace,
    /// Run the configured model, fit, and compare with the prediction.
    Verify,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Dist => "dist",
            Command::Evolve => "evolve",
            Command::Saw => "saw",
            Command::Op => "op",
            Command::Theory => "theory",
            Command::Lace => "lace",
            Command::Verify => "verify",
        }
    }
}

/// Files written under one output directory, all stamped with the config hash.
pub struct Outputs {
    dir: PathBuf,
    hash: String,
    written: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path, hash: String) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            hash,
            written: Vec::new(),
        })
    }

    pub fn stamp(&self) -> String {
        format!("gyration {VERSION} config={}", self.hash)
    }

    /// Writes `body`, which must already start with the stamp comment.
    fn raw(&mut self, name: &str, body: &str) -> Result<()> {
        if let Some(parent) = Path::new(name).parent() {
            fs::create_dir_all(self.dir.join(parent))?;
        }
        fs::write(self.dir.join(name), body)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
        let mut s = format!("# {}\n{header}\n", self.stamp());
        for row in rows {
            s.push_str(&row);
            s.push('\n');
        }
        self.raw(name, &s)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut v = serde_json::to_value(value)?;
        if let Value::Object(map) = &mut v {
            map.insert("gyration_version".into(), json!(VERSION));
            map.insert("config_hash".into(), json!(self.hash));
        }
        let body = serde_json::to_string_pretty(&v)? + "\n";
        self.raw(name, &body)
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }
}

/// Resolves the configuration from the command line.
pub fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.resolve()
}

/// Runs one subcommand; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<String>> {
    let cfg = load_config(cli)?;
    run_command(cli.command, &cfg, &cli.out)
}

pub fn run_command(command: Command, cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<String>> {
    precheck(command, cfg)?;
    let mut out = Outputs::new(out_dir, cfg.hash())?;
    let diagnostics = match command {
        Command::Dist => cmd_dist(cfg, &mut out)?,
        Command::Evolve => cmd_evolve(cfg, &mut out)?,
        Command::Saw => cmd_saw(cfg, &mut out)?,
        Command::Op => cmd_op(cfg, &mut out)?,
        Command::Theory => cmd_theory(cfg, &mut out)?,
        Command::Lace => cmd_lace(cfg, &mut out)?,
        Command::Verify => cmd_verify(cfg, &mut out)?,
    };
    let manifest = json!({
        "command": command.name(),
        "config": cfg,
        "outputs": out.files().to_vec(),
        "diagnostics": diagnostics,
    });
    out.json("manifest.json", &manifest)?;
    Ok(out.files().to_vec())
}

/// Command-specific validation that needs no computation.
fn precheck(command: Command, cfg: &ExperimentConfig) -> Result<()> {
    let op_model = matches!(cfg.model, Model::OpMc | Model::OpExact);
    match command {
        Command::Op => {
            cfg.require_p()?;
        }
        Command::Lace | Command::Verify if op_model => {
            cfg.require_p()?;
        }
        _ => {}
    }
    match command {
        Command::Lace if !cfg.model.is_exact() => Err(Error::NonExactSource(format!(
            "lace inversion needs an exact model, got {:?}",
            cfg.model
        ))),
        Command::Saw | Command::Verify if cfg.model == Model::SawMc && cfg.n_trials < 1000 => {
            invalid(format!("n_trials must be at least 1000, got {}", cfg.n_trials))
        }
        Command::Verify | Command::Evolve => {
            let alpha = cfg.alpha.unwrap_or(f64::INFINITY);
            if command == Command::Verify && cfg.r.iter().any(|&r| r >= alpha) {
                return invalid(format!("verify needs every r below alpha = {alpha}"));
            }
            if cfg.fit == FitKind::LogCorrected && cfg.alpha != Some(2.0) {
                return invalid("log-corrected fits need alpha = 2");
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn fmt_r(r: f64) -> String {
    format!("{r}")
}

fn fitter(cfg: &ExperimentConfig) -> Fitter {
    match (cfg.fit, cfg.alpha) {
        (FitKind::LogCorrected, _) | (FitKind::Auto, Some(2.0)) => Fitter::LogCorrected,
        _ => Fitter::PowerLaw,
    }
}

/// `v` from the configuration, else `σ²/(2d)` for finite-variance laws, else the small-k fit.
fn resolve_v(cfg: &ExperimentConfig, dist: &StepDistribution) -> Result<(f64, &'static str)> {
    if let Some(v) = cfg.theory.v {
        return Ok((v, "config"));
    }
    if dist.alpha() > 2.0 {
        return Ok((dist.variance()? / (2 * dist.dim()) as f64, "variance"));
    }
    Ok((fit_small_k_asymptotics(dist, &cfg.k_grid())?.fitted_v, "small-k fit"))
}

fn cmd_dist(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Value> {
    let dist = cfg.step_distribution()?;
    let profile = fit_small_k_asymptotics(&dist, &cfg.k_grid())?;
    out.csv(
        "dist_profile.csv",
        "k,one_minus_fourier",
        profile.samples.iter().map(|(k, v)| format!("{k:.16e},{v:.16e}")),
    )?;
    let (v, v_source) = resolve_v(cfg, &dist)?;
    out.json(
        "dist.json",
        &json!({
            "step": StepSummary::of(&dist),
            "profile": profile,
            "v": v,
            "v_source": v_source,
        }),
    )?;
    if cfg.write_weights {
        let body = format!("# {}\n{}\n", out.stamp(), dist.to_json()?);
        out.raw("step_distribution.json", &body)?;
    }
    Ok(json!({ "deficit": dist.total_mass_deficit() }))
}

fn run_rw(cfg: &ExperimentConfig, dist: &StepDistribution) -> Result<EvolutionRun> {
    let mut opts = RwOptions::new(cfg.box_radius.expect("resolved"));
    opts.escape_tolerance = cfg.tolerances.escape;
    opts.keep_fields = cfg.write_fields;
    opts.orders = cfg.r.clone();
    crate::walkers::evolve_rw_with(dist, cfg.horizon, &opts)
}

fn run_saw(cfg: &ExperimentConfig, dist: &StepDistribution) -> Result<EvolutionRun> {
    if cfg.model == Model::SawMc {
        return sample_saw_mc(
            dist,
            &SawMcConfig {
                horizon: cfg.horizon,
                n_trials: cfg.n_trials,
                seed: cfg.seed,
                n_batches: cfg.n_batches,
                orders: cfg.r.clone(),
                field_box: cfg.field_box,
            },
        );
    }
    let mut run = enumerate_saw(dist, cfg.horizon)?;
    run.ensure_series(&cfg.r)?;
    Ok(run)
}

fn run_op(cfg: &ExperimentConfig, dist: &StepDistribution) -> Result<EvolutionRun> {
    let p = cfg.require_p()?;
    if cfg.model == Model::OpExact {
        let mut run = exact_op(dist, p, cfg.horizon, cfg.cost_cap)?;
        run.ensure_series(&cfg.r)?;
        return Ok(run);
    }
    simulate_op(
        dist,
        &OpConfig {
            p,
            horizon: cfg.horizon,
            n_trials: cfg.n_trials,
            seed: cfg.seed,
            n_batches: cfg.n_batches,
            active_budget: cfg.active_budget,
            orders: cfg.r.clone(),
            field_box: cfg.field_box,
        },
    )
}

fn write_run(cfg: &ExperimentConfig, run: &EvolutionRun, out: &mut Outputs) -> Result<()> {
    let stamp = out.stamp();
    for &r in &cfg.r {
        for (mode, suffix) in [(AxisMode::FirstCoordinate, ""), (AxisMode::Euclidean, "_euclidean")] {
            if let Some(s) = run.series_for(r, mode) {
                out.raw(&format!("moments_r{}{suffix}.csv", fmt_r(r)), &s.to_csv(Some(&stamp)))?;
            }
        }
    }
    out.csv(
        "escaped.csv",
        "t,escaped",
        run.escaped.iter().enumerate().map(|(t, e)| format!("{t},{e:.16e}")),
    )?;
    if !run.fields.is_empty() {
        out.csv(
            "totals.csv",
            "t,total",
            run.totals().into_iter().map(|(t, v)| format!("{t},{v:.16e}")),
        )?;
    }
    if cfg.write_fields {
        write_fields(out, "phi", &run.fields)?;
    }
    Ok(())
}

fn write_fields(out: &mut Outputs, prefix: &str, fields: &[LatticeField]) -> Result<()> {
    let stamp = out.stamp();
    for (t, f) in fields.iter().enumerate() {
        out.raw(&format!("fields/{prefix}_t{t}.csv"), &f.to_csv(Some(&stamp)))?;
    }
    Ok(())
}

fn run_diagnostics(run: &EvolutionRun) -> Value {
    json!({
        "model": run.model,
        "step": run.step,
        "T": run.horizon,
        "p": run.p,
        "max_escaped": run.escaped.iter().cloned().fold(0.0, f64::max),
        "mc": run.mc,
    })
}

fn cmd_evolve(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Value> {
    let dist = cfg.step_distribution()?;
    let run = run_rw(cfg, &dist)?;
    write_run(cfg, &run, out)?;
    let reports = fit_reports(cfg, &run, &dist, Some((1.0, "random walk")))?;
    out.json("fits.json", &json!({ "fits": reports }))?;
    Ok(run_diagnostics(&run))
}

fn lace_series(cfg: &ExperimentConfig, run: Option<&EvolutionRun>, dist: &StepDistribution) -> Result<LaceSeries> {
    match run {
        None => LaceSeries::random_walk(dist, cfg.horizon),
        Some(run) if run.model == Model::SawExact => lace::invert_lace_saw(run, dist),
        Some(run) => lace::invert_lace_op(run, cfg.require_p()?, dist),
    }
}

fn lace_for(cfg: &ExperimentConfig, run: Option<&EvolutionRun>, dist: &StepDistribution) -> Result<LaceReport> {
    let mut series = lace_series(cfg, run, dist)?;
    lace::lace_report(&mut series, cfg.tolerances.lace_epsilon, cfg.tolerances.lace_delta)
}

fn cmd_saw(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Value> {
    let dist = cfg.step_distribution()?;
    let run = run_saw(cfg, &dist)?;
    write_run(cfg, &run, out)?;
    if run.model == Model::SawExact {
        out.json("lace_report.json", &lace_for(cfg, Some(&run), &dist)?)?;
    }
    Ok(run_diagnostics(&run))
}

fn cmd_op(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Value> {
    let dist = cfg.step_distribution()?;
    let run = run_op(cfg, &dist)?;
    write_run(cfg, &run, out)?;
    if run.model == Model::OpExact {
        out.json("lace_report.json", &lace_for(cfg, Some(&run), &dist)?)?;
    }
    Ok(run_diagnostics(&run))
}

fn cmd_theory(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Value> {
    let alpha = cfg.alpha.unwrap_or(f64::INFINITY);
    let (v, v_source) = match cfg.theory.v {
        Some(v) => (v, "config"),
        None => resolve_v(cfg, &cfg.step_distribution()?)?,
    };
    let c = cfg.theory.c.unwrap_or(1.0);
    let mut rows = Vec::new();
    for &r in &cfg.r {
        let pred = TheoryPrediction::new(r, alpha, c, v)?;
        let t0 = if alpha == 2.0 { 2 } else { 1 };
        let table = (t0..=cfg.horizon as u64)
            .map(|t| Ok(format!("{t},{:.16e}", predict_moment_ratio(&pred, t)?)))
            .collect::<Result<Vec<_>>>()?;
        out.csv(&format!("prediction_r{}.csv", fmt_r(r)), "t,predicted_ratio", table)?;
        rows.push(json!({
            "r": r,
            "A": pred.amplitude,
            "K_q": k_q(r).ok(),
            "exponent": pred.exponent(),
            "coefficient": pred.coefficient(),
            "log_corrected": alpha == 2.0,
        }));
    }
    out.json(
        "theory.json",
        &json!({
            "alpha": cfg.alpha,
            "d_c": crate::theory::upper_critical_dimension(alpha),
            "C": c,
            "v": v,
            "v_source": v_source,
            "orders": rows,
        }),
    )?;
    Ok(json!({}))
}

fn cmd_lace(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Value> {
    let dist = cfg.step_distribution()?;
    let run = match cfg.model {
        Model::Rw => None,
        Model::SawExact => Some(enumerate_saw(&dist, cfg.horizon)?),
        Model::OpExact => Some(exact_op(&dist, cfg.require_p()?, cfg.horizon, cfg.cost_cap)?),
        m => return Err(Error::NonExactSource(format!("{m:?} is a Monte Carlo model"))),
    };
    let mut series = lace_series(cfg, run.as_ref(), &dist)?;
    let report = lace::lace_report(&mut series, cfg.tolerances.lace_epsilon, cfg.tolerances.lace_delta)?;
    out.json("lace_report.json", &report)?;
    if cfg.write_fields {
        write_fields(out, "pi", &series.pi)?;
    }
    Ok(json!({ "symmetry_defect": lace::symmetry_defect(&series) }))
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub fit: FitResult,
    pub comparison: Option<Comparison>,
    /// Origin of the model constant used for `c_theory`.
    pub c_source: String,
    pub v_source: String,
    pub note: Option<String>,
}

/// Fits every configured order and compares it with the prediction.
///
/// `c` is the model constant when known; otherwise `C = 1` is used and the
/// comparison's `implied_c` is the estimate.
fn fit_reports(
    cfg: &ExperimentConfig,
    run: &EvolutionRun,
    dist: &StepDistribution,
    c: Option<(f64, &str)>,
) -> Result<Vec<FitReport>> {
    let alpha = dist.alpha();
    let (v, v_source) = resolve_v(cfg, dist)?;
    let (c, c_source) = match (cfg.theory.c, c) {
        (Some(cc), _) if run.model != Model::Rw => (cc, "config".to_string()),
        (_, Some((cc, src))) => (cc, src.to_string()),
        (_, None) => (1.0, "implied".to_string()),
    };
    let thresholds = Thresholds {
        exponent: cfg.tolerances.exponent,
        amplitude: cfg.tolerances.amplitude,
    };
    let mut reports = Vec::new();
    for &r in &cfg.r {
        let series = run
            .series_for(r, AxisMode::FirstCoordinate)
            .ok_or_else(|| Error::Invariant(format!("order {r} missing from run")))?;
        let window = match cfg.fit_window {
            Some(w) => w,
            None => analysis::default_window(series)
                .ok_or_else(|| Error::InvalidParameter("series too short for the default fit window".into()))?,
        };
        let fit = fit_run(run, r, AxisMode::FirstCoordinate, window, fitter(cfg))?;
        let (comparison, note) = if r < alpha {
            let pred = TheoryPrediction::new(r, alpha, c, v)?;
            (Some(compare_to_theory(&fit, &pred, thresholds)?), None)
        } else {
            (None, Some(format!("r = {r} is not below alpha; no prediction")))
        };
        reports.push(FitReport {
            fit,
            comparison,
            c_source: c_source.clone(),
            v_source: v_source.to_string(),
            note,
        });
    }
    Ok(reports)
}

fn cmd_verify(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Value> {
    let dist = cfg.step_distribution()?;
    let (run, c) = match cfg.model {
        Model::Rw => (run_rw(cfg, &dist)?, Some((1.0, "random walk".to_string()))),
        Model::SawExact | Model::OpExact => {
            let run = if cfg.model == Model::SawExact { run_saw(cfg, &dist)? } else { run_op(cfg, &dist)? };
            let c = lace_for(cfg, Some(&run), &dist)
                .ok()
                .and_then(|rep| rep.c_alpha)
                .filter(|c| *c > 0.0)
                .map(|c| (c, "lace".to_string()));
            (run, c)
        }
        Model::SawMc => (run_saw(cfg, &dist)?, None),
        Model::OpMc => (run_op(cfg, &dist)?, None),
    };
    write_run(cfg, &run, out)?;
    let reports = fit_reports(cfg, &run, &dist, c.as_ref().map(|(v, s)| (*v, s.as_str())))?;
    let verdict = reports.iter().all(|r| {
        r.comparison
            .as_ref()
            .is_some_and(|c| c.exponent_ok && (c.amplitude_ok || r.c_source == "implied"))
    });
    out.json("verify.json", &json!({ "verdict": verdict, "reports": reports }))?;
    Ok(run_diagnostics(&run))
}
