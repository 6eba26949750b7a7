//! Amplitude and exponent fits of moment-ratio series and their comparison with
//! the predicted asymptotics.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{AxisMode, MomentEntry, MomentSeries};
use crate::numerics::fit_line;
use crate::theory::TheoryPrediction;
use crate::walkers::{series_from_fields, EvolutionRun};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub r: f64,
    pub alpha: f64,
    pub window: (usize, usize),
    /// Fitted growth exponent θ̂ (the imposed exponent for fixed-exponent fits).
    pub exponent: f64,
    pub amplitude: f64,
    /// RMS residual in `log(ratio)`.
    pub residual_rms: f64,
    pub log_corrected: bool,
    /// Least-squares standard error of θ̂; zero when the exponent is imposed.
    pub exponent_se: f64,
    /// Batch-jackknife standard errors, for Monte Carlo input.
    pub jackknife_exponent_se: Option<f64>,
    pub jackknife_amplitude_se: Option<f64>,
    /// Mean of `log t` over the window, the pivot of the log-log fit.
    pub mean_log_t: f64,
    pub n_points: usize,
}

fn window_points(series: &MomentSeries, window: (usize, usize), min_t: usize) -> Result<Vec<&MomentEntry>> {
    let (lo, hi) = window;
    if lo >= hi {
        return invalid(format!("fit window [{lo}, {hi}] is empty"));
    }
    let pts: Vec<&MomentEntry> = series.window(lo.max(min_t), hi);
    if pts.len() < 5 {
        return invalid(format!("fit window [{lo}, {hi}] holds {} usable points, need 5", pts.len()));
    }
    if pts.iter().any(|e| !(e.ratio > 0.0)) {
        return Err(Error::Degenerate("nonpositive ratio in fit window".into()));
    }
    Ok(pts)
}

fn base(series: &MomentSeries, alpha: f64, window: (usize, usize)) -> FitResult {
    FitResult {
        model: String::new(),
        r: series.order,
        alpha,
        window,
        exponent: f64::NAN,
        amplitude: f64::NAN,
        residual_rms: 0.0,
        log_corrected: false,
        exponent_se: 0.0,
        jackknife_exponent_se: None,
        jackknife_amplitude_se: None,
        mean_log_t: f64::NAN,
        n_points: 0,
    }
}

/// Least squares of `log ratio = log ĉ + θ̂ log t` over the window.
pub fn fit_power_law(series: &MomentSeries, alpha: f64, window: (usize, usize)) -> Result<FitResult> {
    let pts = window_points(series, window, 1)?;
    let xs: Vec<f64> = pts.iter().map(|e| (e.t as f64).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|e| e.ratio.ln()).collect();
    let fit = fit_line(&xs, &ys).ok_or_else(|| Error::Degenerate("single-t window".into()))?;
    Ok(FitResult {
        exponent: fit.slope,
        amplitude: fit.intercept.exp(),
        residual_rms: fit.residual_rms,
        exponent_se: fit.slope_se,
        mean_log_t: fit.mean_x,
        n_points: pts.len(),
        ..base(series, alpha, window)
    })
}

/// `ratio = ĉ t^θ` with θ imposed; `log ĉ` is the mean of `log ratio − θ log t`.
pub fn fit_power_law_fixed(series: &MomentSeries, alpha: f64, window: (usize, usize), exponent: f64) -> Result<FitResult> {
    let pts = window_points(series, window, 1)?;
    fixed_fit(series, alpha, window, exponent, &pts, |t| t.ln(), false)
}

/// `ratio = ĉ (t ln √t)^{r/2}`, the α = 2 form; needs `t ≥ 2`.
pub fn fit_log_corrected(series: &MomentSeries, r: f64, window: (usize, usize)) -> Result<FitResult> {
    let pts = window_points(series, window, 2)?;
    fixed_fit(series, 2.0, window, r / 2.0, &pts, |t| (t * t.sqrt().ln()).ln(), true)
}

fn fixed_fit(
    series: &MomentSeries,
    alpha: f64,
    window: (usize, usize),
    exponent: f64,
    pts: &[&MomentEntry],
    coord: impl Fn(f64) -> f64,
    log_corrected: bool,
) -> Result<FitResult> {
    let resid: Vec<f64> = pts
        .iter()
        .map(|e| e.ratio.ln() - exponent * coord(e.t as f64))
        .collect();
    let n = resid.len() as f64;
    let log_c = resid.iter().sum::<f64>() / n;
    let rms = (resid.iter().map(|v| (v - log_c).powi(2)).sum::<f64>() / n).sqrt();
    Ok(FitResult {
        exponent,
        amplitude: log_c.exp(),
        residual_rms: rms,
        log_corrected,
        mean_log_t: pts.iter().map(|e| (e.t as f64).ln()).sum::<f64>() / n,
        n_points: pts.len(),
        ..base(series, alpha, window)
    })
}

/// Which fitter a jackknife repeats.
#[derive(Debug, Clone, Copy)]
pub enum Fitter {
    PowerLaw,
    Fixed(f64),
    LogCorrected,
}

fn apply(fitter: Fitter, series: &MomentSeries, alpha: f64, window: (usize, usize)) -> Result<FitResult> {
    match fitter {
        Fitter::PowerLaw => fit_power_law(series, alpha, window),
        Fitter::Fixed(e) => fit_power_law_fixed(series, alpha, window, e),
        Fitter::LogCorrected => fit_log_corrected(series, series.order, window),
    }
}

/// Fit a run's series of order `r`, attaching delete-one-batch jackknife errors for Monte Carlo runs.
pub fn fit_run(run: &EvolutionRun, r: f64, mode: AxisMode, window: (usize, usize), fitter: Fitter) -> Result<FitResult> {
    let alpha = run.step.alpha.unwrap_or(f64::INFINITY);
    let computed;
    let series = match run.series_for(r, mode) {
        Some(s) => s,
        None if run.mc.is_none() => {
            computed = series_from_fields(&run.fields, &[r])?;
            computed
                .iter()
                .find(|s| s.axis_mode == mode)
                .expect("both modes are computed")
        }
        None => return invalid(format!("order {r} was not recorded")),
    };
    let mut fit = apply(fitter, series, alpha, window)?;
    fit.model = format!("{:?}", run.model);
    if let Some(loo) = &run.loo_series {
        let mut thetas = Vec::new();
        let mut logc = Vec::new();
        for batch in loo {
            let s = batch
                .iter()
                .find(|s| s.order == r && s.axis_mode == mode)
                .expect("jackknife series mirror the main ones");
            let f = apply(fitter, s, alpha, window)?;
            thetas.push(f.exponent);
            logc.push(f.amplitude.ln());
        }
        let se = |v: &[f64]| {
            let b = v.len() as f64;
            let m = v.iter().sum::<f64>() / b;
            ((b - 1.0) / b * v.iter().map(|x| (x - m).powi(2)).sum::<f64>()).sqrt()
        };
        fit.jackknife_exponent_se = Some(se(&thetas));
        fit.jackknife_amplitude_se = Some(se(&logc) * fit.amplitude);
    }
    Ok(fit)
}

/// Default window: `t ≥ 10` up to the last usable t, dropping the last 10% when some t is unusable.
pub fn default_window(series: &MomentSeries) -> Option<(usize, usize)> {
    let last = series.entries.iter().filter(|e| e.usable).map(|e| e.t).max()?;
    let flagged = series.entries.iter().any(|e| !e.usable);
    let hi = if flagged { last - last / 10 } else { last };
    (hi > 10).then_some((10, hi))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Thresholds {
    pub exponent: f64,
    pub amplitude: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            exponent: 0.05,
            amplitude: 0.05,
        }
    }
}

/// Report document: the fields below plus verdicts and error bars.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    pub model: String,
    pub r: f64,
    pub alpha: f64,
    pub theta_hat: f64,
    pub theta_target: f64,
    pub theta_se: Option<f64>,
    /// Growth exponent of `ξ_t^{(r)}`, i.e. `θ̂/r`, and its target `1/(α∧2)`.
    pub xi_exponent_hat: f64,
    pub xi_exponent_target: f64,
    pub c_hat: f64,
    /// `ĉ` carried to the target exponent through the fit pivot.
    pub c_at_target: f64,
    pub c_theory: f64,
    pub rel_dev_exponent: f64,
    pub rel_dev_amplitude: f64,
    pub amplitude_se: Option<f64>,
    /// `C` that would make the fitted amplitude exact.
    pub implied_c: f64,
    pub window: (usize, usize),
    pub residual_rms: f64,
    pub log_corrected: bool,
    pub exponent_ok: bool,
    pub amplitude_ok: bool,
}

/// Relative deviations of the fit from `r/(α∧2)` and `A(r,α)(Cv)^{r/(α∧2)}`.
///
/// A free-exponent amplitude is moved to the target exponent along the fitted line at
/// its pivot `mean_log_t`, so both amplitudes multiply the same power of t.
pub fn compare_to_theory(fit: &FitResult, pred: &TheoryPrediction, thresholds: Thresholds) -> Result<Comparison> {
    let same = |a: f64, b: f64| a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    if !same(fit.r, pred.r) || !same(fit.alpha, pred.alpha) {
        return invalid(format!(
            "fit (r={}, alpha={}) does not match prediction (r={}, alpha={})",
            fit.r, fit.alpha, pred.r, pred.alpha
        ));
    }
    if fit.log_corrected != (pred.alpha == 2.0) {
        return invalid("log-corrected fits pair with alpha = 2 predictions only");
    }
    let target = pred.exponent();
    let c_at_target = (fit.amplitude.ln() + (fit.exponent - target) * fit.mean_log_t).exp();
    let c_theory = pred.coefficient();
    let rel_exp = fit.exponent / target - 1.0;
    let rel_amp = c_at_target / c_theory - 1.0;
    let implied_c = (c_at_target / pred.amplitude).powf(1.0 / target) / pred.v;
    Ok(Comparison {
        model: fit.model.clone(),
        r: fit.r,
        alpha: fit.alpha,
        theta_hat: fit.exponent,
        theta_target: target,
        theta_se: fit.jackknife_exponent_se.or((fit.exponent_se > 0.0).then_some(fit.exponent_se)),
        xi_exponent_hat: fit.exponent / fit.r,
        xi_exponent_target: target / fit.r,
        c_hat: fit.amplitude,
        c_at_target,
        c_theory,
        rel_dev_exponent: rel_exp,
        rel_dev_amplitude: rel_amp,
        amplitude_se: fit.jackknife_amplitude_se,
        implied_c,
        window: fit.window,
        residual_rms: fit.residual_rms,
        log_corrected: fit.log_corrected,
        exponent_ok: rel_exp.abs() <= thresholds.exponent,
        amplitude_ok: rel_amp.abs() <= thresholds.amplitude,
    })
}
