//! Lace-expansion coefficients by convolution inversion of exact two-point
//! functions, `φ_t = I_t + Σ_{s=1}^t J_s * φ_{t−s}`, with
//!
//! * SAW: `I_t = δ_{t,0} δ_o`, `J_t = D δ_{t,1} + π_t`, `π_t ≡ 0` for `t ≤ 1`;
//! * OP: `I_t = π_t`, `J_t = p (D * π_{t−1})`.
//!
//! Also: diagrammatic bound checks, the ratio-method radius of convergence
//! `m_c`, the convergence sums of `π`, and the amplitude constant `C_α`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{convolve_direct, convolve_fields, LatticeField};
use crate::numerics::{fit_line, KahanSum};
use crate::site::{self, Site, ORIGIN};
use crate::stepdist::StepDistribution;
use crate::walkers::{EvolutionRun, Model};

/// Residuals above this are reported as convention violations.
const FLAG_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaceModel {
    Rw,
    Saw,
    Op,
}

#[derive(Debug, Clone)]
pub struct LaceSeries {
    pub model: LaceModel,
    pub step: StepDistribution,
    pub p: Option<f64>,
    pub box_radius: i64,
    /// Source two-point functions `φ_t`, `t = 0..=T`.
    pub phi: Vec<LatticeField>,
    pub pi: Vec<LatticeField>,
    pub i: Vec<LatticeField>,
    /// `J_t`; `J_0` is zero.
    pub j: Vec<LatticeField>,
    /// Violations of the inversion conventions, e.g. a nonzero residual at `t = 1`.
    pub flags: Vec<String>,
    pub m_c_estimate: Option<f64>,
    pub c_alpha_estimate: Option<f64>,
}

impl LaceSeries {
    pub fn horizon(&self) -> usize {
        self.phi.len() - 1
    }

    /// Random walk: `φ_t = D^{*t}`, `π ≡ 0`, `J_t = D δ_{t,1}`.
    pub fn random_walk(dist: &StepDistribution, horizon: usize) -> Result<Self> {
        let d = dist.dim();
        let b = (horizon as i64 * dist.truncation_radius()).max(1);
        let zero = LatticeField::zeros(d, b)?;
        let mut phi = vec![LatticeField::delta(d, b)?];
        for t in 1..=horizon {
            phi.push(convolve_direct(&phi[t - 1], dist)?);
        }
        let kernel = convolve_direct(&LatticeField::delta(d, b)?, dist)?;
        let mut j = vec![zero.clone(); horizon + 1];
        if horizon >= 1 {
            j[1] = kernel;
        }
        let mut i = vec![zero.clone(); horizon + 1];
        i[0] = LatticeField::delta(d, b)?;
        Ok(LaceSeries {
            model: LaceModel::Rw,
            step: dist.clone(),
            p: None,
            box_radius: b,
            phi,
            pi: vec![zero; horizon + 1],
            i,
            j,
            flags: Vec::new(),
            m_c_estimate: Some(1.0),
            c_alpha_estimate: None,
        })
    }
}

fn check_source(run: &EvolutionRun, expected: Model, dist: &StepDistribution) -> Result<()> {
    if run.model != expected {
        return Err(Error::NonExactSource(format!(
            "expected a {expected:?} run, got {:?}",
            run.model
        )));
    }
    if run.fields.len() != run.horizon + 1 {
        return Err(Error::NonExactSource("run did not keep every field".into()));
    }
    if run.step.d != dist.dim() {
        return Err(Error::DimensionMismatch {
            expected: run.step.d,
            found: dist.dim(),
        });
    }
    Ok(())
}

/// `π_t = φ_t − D*φ_{t−1} − Σ_{s=2}^{t−1} π_s * φ_{t−s}` for `t ≥ 2`.
pub fn invert_lace_saw(run: &EvolutionRun, dist: &StepDistribution) -> Result<LaceSeries> {
    check_source(run, Model::SawExact, dist)?;
    if run.horizon < 2 {
        return invalid("lace inversion needs T >= 2");
    }
    let phi = &run.fields;
    let b = phi[0].box_radius();
    let d = dist.dim();
    let zero = LatticeField::zeros(d, b)?;
    let mut flags = Vec::new();
    let mut pi = vec![zero.clone(); run.horizon + 1];

    let delta = LatticeField::delta(d, b)?;
    let r0 = phi[0].max_abs_diff(&delta);
    if r0 > FLAG_TOLERANCE {
        flags.push(format!("phi_0 differs from delta by {r0:.3e}"));
    }
    let kernel = convolve_direct(&delta, dist)?;
    let r1 = phi[1].max_abs_diff(&kernel);
    if r1 > FLAG_TOLERANCE {
        flags.push(format!("residual at t=1 of {r1:.3e} (pi_1 taken as 0)"));
    }
    for t in 2..=run.horizon {
        let mut acc = phi[t].sub(&convolve_direct(&phi[t - 1], dist)?)?;
        for s in 2..t {
            acc = acc.sub(&convolve_fields(&pi[s], &phi[t - s], b)?)?;
        }
        acc.set_time_index(t);
        acc.set_escaped_mass(0.0);
        pi[t] = acc;
    }
    let mut j = pi.clone();
    j[0] = zero.clone();
    j[1] = j[1].axpy(1.0, &kernel)?;
    let mut i = vec![zero; run.horizon + 1];
    i[0] = delta;
    Ok(LaceSeries {
        model: LaceModel::Saw,
        step: dist.clone(),
        p: None,
        box_radius: b,
        phi: phi.clone(),
        pi,
        i,
        j,
        flags,
        m_c_estimate: None,
        c_alpha_estimate: None,
    })
}

/// `π_t = φ_t − Σ_{s=1}^t p(D*π_{s−1}) * φ_{t−s}`.
pub fn invert_lace_op(run: &EvolutionRun, p: f64, dist: &StepDistribution) -> Result<LaceSeries> {
    check_source(run, Model::OpExact, dist)?;
    if run.p != Some(p) {
        return invalid(format!("run was generated at p={:?}, not {p}", run.p));
    }
    let phi = &run.fields;
    let b = phi[0].box_radius();
    let d = dist.dim();
    let zero = LatticeField::zeros(d, b)?;
    let mut pi: Vec<LatticeField> = Vec::with_capacity(run.horizon + 1);
    let mut j = vec![zero];
    let mut flags = Vec::new();
    for t in 0..=run.horizon {
        if t >= 1 {
            let mut jt = convolve_direct(&pi[t - 1], dist)?.scale(p);
            jt.set_time_index(t);
            jt.set_escaped_mass(0.0);
            j.push(jt);
        }
        let mut acc = phi[t].clone();
        for s in 1..=t {
            acc = acc.sub(&convolve_fields(&j[s], &phi[t - s], b)?)?;
        }
        acc.set_time_index(t);
        acc.set_escaped_mass(0.0);
        pi.push(acc);
    }
    let p1 = pi.get(1).map(|f| f.max_abs_diff(&LatticeField::zeros(d, b).expect("box"))).unwrap_or(0.0);
    if p1 > FLAG_TOLERANCE {
        flags.push(format!("pi_1 is not zero (max {p1:.3e})"));
    }
    Ok(LaceSeries {
        model: LaceModel::Op,
        step: dist.clone(),
        p: Some(p),
        box_radius: b,
        phi: phi.clone(),
        i: pi.clone(),
        pi,
        j,
        flags,
        m_c_estimate: None,
        c_alpha_estimate: None,
    })
}

/// `max_{t,x} |I_t + Σ_{s=1}^t J_s * φ_{t−s} − φ_t|`.
pub fn round_trip_error(series: &LaceSeries) -> Result<f64> {
    let b = series.box_radius;
    let mut worst: f64 = 0.0;
    for t in 0..=series.horizon() {
        let mut rebuilt = series.i[t].clone();
        for s in 1..=t {
            rebuilt = rebuilt.axpy(1.0, &convolve_fields(&series.j[s], &series.phi[t - s], b)?)?;
        }
        worst = worst.max(rebuilt.max_abs_diff(&series.phi[t]));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCheck {
    pub t: usize,
    pub holds: bool,
    /// `max_x (|π_t(x)| − bound(x))`, clipped at 0.
    pub max_violation: f64,
    pub worst_point: Option<Vec<i64>>,
    pub pi_origin: f64,
    pub bound_origin: f64,
    pub points_checked: usize,
    pub note: String,
}

/// Pointwise check of the first diagrams bounding `π_t`.
///
/// SAW (`t ∈ {2,3,4}`): `|π_t(x)| ≤ (D*φ_{t−1})(o)·[x=o] + Σ_{s₁+s₂+s₃=t, sᵢ≥1} φ_{s₁}(x)φ_{s₂}(x)φ_{s₃}(x)`.
/// OP (`1 ≤ t ≤ T`): `|π_t(x)| ≤ φ_t(x)²` only.
pub fn diagram_bound_check(series: &LaceSeries, t: usize) -> Result<BoundCheck> {
    let d = series.step.dim();
    let (bound, note): (LatticeField, String) = match series.model {
        LaceModel::Saw | LaceModel::Rw => {
            if !(2..=4).contains(&t) || t > series.horizon() {
                return invalid(format!("SAW bound check supports t in {{2,3,4}} within the series, got {t}"));
            }
            let phi = &series.phi;
            let mut bound = LatticeField::zeros(d, series.box_radius)?;
            let loop_weight = convolve_direct(&phi[t - 1], &series.step)?.get(&ORIGIN);
            bound.add(&ORIGIN, loop_weight)?;
            for s1 in 1..t {
                for s2 in 1..(t - s1) {
                    let s3 = t - s1 - s2;
                    phi[s1].for_each_nonzero(|x, v| {
                        let w = v * phi[s2].get(&x) * phi[s3].get(&x);
                        if w != 0.0 {
                            bound.add(&x, w).expect("in box");
                        }
                    });
                }
            }
            (bound, "first two diagrams only; higher diagrams are not included".into())
        }
        LaceModel::Op => {
            if t == 0 || t > series.horizon() {
                return invalid(format!("OP bound check needs 1 <= t <= T, got {t}"));
            }
            let mut bound = LatticeField::zeros(d, series.box_radius)?;
            series.phi[t].for_each_nonzero(|x, v| bound.set(&x, v * v).expect("in box"));
            (bound, "first diagram phi_t(x)^2 only; the second diagram is not implemented".into())
        }
    };
    let pi = &series.pi[t];
    let mut worst = 0.0f64;
    let mut worst_point = None;
    let mut checked = 0;
    let mut check = |x: Site| {
        checked += 1;
        let excess = pi.get(&x).abs() - bound.get(&x);
        let tol = 1e-12 * bound.get(&x).abs().max(1e-300);
        if excess > tol && excess > worst {
            worst = excess;
            worst_point = Some(x[..d].to_vec());
        }
    };
    pi.for_each_nonzero(|x, _| check(x));
    Ok(BoundCheck {
        t,
        holds: worst_point.is_none(),
        max_violation: worst,
        worst_point,
        pi_origin: pi.get(&ORIGIN),
        bound_origin: bound.get(&ORIGIN),
        points_checked: checked,
        note,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McEstimate {
    pub m_c: f64,
    /// Raw ratios `a_t / a_{t+1}`.
    pub ratios: Vec<(usize, f64)>,
    /// Number of trailing centred ratios in the chosen fit.
    pub window: usize,
    pub residual_variance: f64,
}

/// Ratio-method radius of convergence of `Σ_t a_t m^t`.
///
/// The centred ratios `ρ_t = (a_{t−1}/a_{t+1})^{1/2}` (insensitive to even/odd
/// oscillation) are fitted linearly in `1/t` over the last `w ∈ {3,…,6}` points; the
/// window with the smallest residual variance per degree of freedom wins, larger
/// windows winning ties. The intercept is the estimate.
pub fn estimate_mc(totals: &[(usize, f64)]) -> Result<McEstimate> {
    if totals.len() < 6 {
        return invalid("need at least 6 totals");
    }
    if totals.windows(2).any(|w| w[1].0 != w[0].0 + 1) {
        return invalid("totals must be consecutive in t");
    }
    if totals.iter().any(|(_, a)| !(*a > 0.0)) {
        return invalid("totals must be positive");
    }
    let ratios: Vec<(usize, f64)> = totals.windows(2).map(|w| (w[0].0, w[0].1 / w[1].1)).collect();
    let centred: Vec<(f64, f64)> = totals
        .windows(3)
        .filter(|w| w[1].0 > 0)
        .map(|w| (1.0 / w[1].0 as f64, (w[0].1 / w[2].1).sqrt()))
        .collect();
    let mut best: Option<(f64, usize, f64)> = None;
    for w in (3..=6).rev() {
        if centred.len() < w {
            continue;
        }
        let tail = &centred[centred.len() - w..];
        let xs: Vec<f64> = tail.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = tail.iter().map(|p| p.1).collect();
        let fit = fit_line(&xs, &ys).ok_or_else(|| Error::Degenerate("ratio fit".into()))?;
        let var = fit.residual_rms.powi(2) * w as f64 / (w - 2) as f64;
        if best.map_or(true, |(v, _, _)| var < v) {
            best = Some((var, w, fit.intercept));
        }
    }
    let (residual_variance, window, m_c) = best.ok_or_else(|| Error::Degenerate("too few ratios".into()))?;
    Ok(McEstimate {
        m_c,
        ratios,
        window,
        residual_variance,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceSums {
    pub s1: f64,
    pub s2: f64,
    /// `t^{1+ε} m^t Σ_x |π_t(x)|`.
    pub increments1: Vec<f64>,
    /// `m^t Σ_x |x₁|^{α∧2+δ} |π_t(x)|`.
    pub increments2: Vec<f64>,
}

/// Partial sums through `T` of the two series whose convergence at `m_c` the analysis needs.
pub fn convergence_sums(series: &LaceSeries, m: f64, epsilon: f64, delta: f64) -> Result<ConvergenceSums> {
    if let Some(mc) = series.m_c_estimate {
        if m > mc * (1.0 + 1e-12) {
            return invalid(format!("m = {m} exceeds the m_c estimate {mc}"));
        }
    }
    let power = series.step.alpha().min(2.0) + delta;
    let mut inc1 = Vec::new();
    let mut inc2 = Vec::new();
    for (t, pi) in series.pi.iter().enumerate() {
        let (mut a, mut b) = (KahanSum::new(), KahanSum::new());
        pi.for_each_nonzero(|x, v| {
            a.add(v.abs());
            b.add((x[0].abs() as f64).powf(power) * v.abs());
        });
        let mt = m.powi(t as i32);
        inc1.push((t as f64).powf(1.0 + epsilon) * mt * a.value());
        inc2.push(mt * b.value());
    }
    Ok(ConvergenceSums {
        s1: inc1.iter().sum(),
        s2: inc2.iter().sum(),
        increments1: inc1,
        increments2: inc2,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CAlphaEstimate {
    pub c_alpha: f64,
    /// `∂_m Ĵ_m(0)` at `m_c`.
    pub dm_j: f64,
    /// `∇₁²Ĵ(0)/∇₁²D̂(0)` (α > 2) or the extrapolated small-k limit (α ≤ 2).
    pub curvature_ratio: f64,
    /// `|C(T) − C(T−1)|`.
    pub truncation_error: f64,
    /// Increments of the t-sums do not decrease over the last terms.
    pub divergent: bool,
    /// `(k, ratio)` samples used for the α ≤ 2 limit.
    pub k_grid: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

fn c_alpha_truncated(series: &LaceSeries, m: f64, upto: usize, k_grid: &[f64]) -> Result<(f64, f64, f64, Vec<(f64, f64)>)> {
    let dist = &series.step;
    let j = &series.j[..=upto];
    let mut dm = KahanSum::new();
    for (t, jt) in j.iter().enumerate().skip(1) {
        dm.add(t as f64 * m.powi(t as i32 - 1) * jt.total());
    }
    let dm = dm.value();
    let moment_sum = |weight: &dyn Fn(&Site) -> f64| {
        let mut acc = KahanSum::new();
        for (t, jt) in j.iter().enumerate().skip(1) {
            let mt = m.powi(t as i32);
            jt.for_each_nonzero(|x, v| acc.add(mt * weight(&x) * v));
        }
        acc.value()
    };
    if dist.alpha() > 2.0 {
        let num = moment_sum(&|x| (x[0] as f64).powi(2));
        let den = dist.axis_second_moment()?;
        let ratio = num / den;
        Ok((ratio / (m * dm), dm, ratio, Vec::new()))
    } else {
        let mut samples = Vec::new();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &k in k_grid {
            let num = moment_sum(&|x| 2.0 * (0.5 * k * x[0] as f64).sin().powi(2));
            let mut kv = vec![0.0; dist.dim()];
            kv[0] = k;
            let den = crate::stepdist::one_minus_fourier(dist, &kv)?;
            samples.push((k, num / den));
            xs.push(den);
            ys.push(num / den);
        }
        let n = xs.len();
        let limit = fit_line(&xs[n - 2..], &ys[n - 2..])
            .ok_or_else(|| Error::Degenerate("k-grid extrapolation".into()))?
            .intercept;
        Ok((limit / (m * dm), dm, limit, samples))
    }
}

/// `C_α = (m_c ∂_mĴ_{m_c}(0))^{-1} · lim_{k→0} (Ĵ_{m_c}(0) − Ĵ_{m_c}(k)) / (D̂(0) − D̂(k))`,
/// with the limit replaced by `∇₁²Ĵ(0)/∇₁²D̂(0)` when α > 2. For α ≤ 2 the ratio is
/// sampled on `k₀, k₀/2, …` and extrapolated linearly in `1 − D̂(k)` from the two smallest k.
pub fn estimate_c_alpha(series: &LaceSeries, m_c: f64, k0: f64, n_k: usize) -> Result<CAlphaEstimate> {
    if !(m_c > 0.0) {
        return invalid("m_c must be positive");
    }
    if n_k < 2 {
        return invalid("need at least two k values");
    }
    let horizon = series.horizon();
    if horizon < 2 {
        return invalid("series too short");
    }
    let k_grid: Vec<f64> = (0..n_k).map(|i| k0 / 2f64.powi(i as i32)).collect();
    let (c, dm, ratio, samples) = c_alpha_truncated(series, m_c, horizon, &k_grid)?;
    let (c_prev, ..) = c_alpha_truncated(series, m_c, horizon - 1, &k_grid)?;
    // t-increments of ∂_mĴ must shrink for the truncated sum to mean anything
    let incs: Vec<f64> = series
        .j
        .iter()
        .enumerate()
        .skip(1)
        .map(|(t, jt)| (t as f64 * m_c.powi(t as i32 - 1) * jt.total()).abs())
        .collect();
    let tail = &incs[incs.len().saturating_sub(3)..];
    let divergent = tail.windows(2).any(|w| w[1] >= w[0]) && tail.iter().any(|&v| v > 1e-15);
    let mut warnings = Vec::new();
    if divergent {
        warnings.push("increments of the truncated J-series do not decrease; C estimate unreliable".into());
    }
    if !(c > 0.0) {
        warnings.push(format!("nonpositive C estimate {c}"));
    }
    Ok(CAlphaEstimate {
        c_alpha: c,
        dm_j: dm,
        curvature_ratio: ratio,
        truncation_error: (c - c_prev).abs(),
        divergent,
        k_grid: samples,
        warnings,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaceReport {
    pub model: LaceModel,
    pub horizon: usize,
    pub m_c: Option<f64>,
    #[serde(rename = "C_alpha")]
    pub c_alpha: Option<f64>,
    pub c_alpha_detail: Option<CAlphaEstimate>,
    pub roundtrip_max_error: f64,
    pub bound_checks: Vec<BoundCheck>,
    pub convergence_increments: Option<ConvergenceSums>,
    pub flags: Vec<String>,
}

/// Full report for an inverted series: round trip, every supported bound check,
/// `m_c` from the totals, convergence increments at `m_c` and `C_α`.
pub fn lace_report(series: &mut LaceSeries, epsilon: f64, delta: f64) -> Result<LaceReport> {
    let roundtrip = round_trip_error(series)?;
    let ts: Vec<usize> = match series.model {
        LaceModel::Saw | LaceModel::Rw => (2..=series.horizon().min(4)).collect(),
        LaceModel::Op => (1..=series.horizon()).collect(),
    };
    let bound_checks = ts
        .into_iter()
        .map(|t| diagram_bound_check(series, t))
        .collect::<Result<Vec<_>>>()?;
    let totals: Vec<(usize, f64)> = series.phi.iter().enumerate().map(|(t, f)| (t, f.total())).collect();
    let mc = if totals.len() >= 6 && totals.iter().all(|(_, a)| *a > 0.0) {
        Some(estimate_mc(&totals)?.m_c)
    } else {
        series.m_c_estimate
    };
    series.m_c_estimate = mc;
    let (conv, c_detail) = match mc {
        Some(m) => {
            let conv = convergence_sums(series, m, epsilon, delta)?;
            let c = estimate_c_alpha(series, m, 0.1 / series.step.scale(), 8)?;
            (Some(conv), Some(c))
        }
        None => (None, None),
    };
    series.c_alpha_estimate = c_detail.as_ref().map(|c| c.c_alpha);
    Ok(LaceReport {
        model: series.model,
        horizon: series.horizon(),
        m_c: mc,
        c_alpha: series.c_alpha_estimate,
        c_alpha_detail: c_detail,
        roundtrip_max_error: roundtrip,
        bound_checks,
        convergence_increments: conv,
        flags: series.flags.clone(),
    })
}

/// Signed-permutation asymmetry `max |π_t(x) − π_t(σx)|` over all t.
pub fn symmetry_defect(series: &LaceSeries) -> f64 {
    let d = series.step.dim();
    let mut worst: f64 = 0.0;
    for pi in &series.pi {
        pi.for_each_nonzero(|x, v| {
            for y in site::signed_permutations(&x, d) {
                worst = worst.max((pi.get(&y) - v).abs());
            }
        });
    }
    worst
}
