//! The one-step law `D` on Z^d: nearest-neighbour and long-range Kac kernels,
//! their Fourier transform and the small-k fit of `1 − D̂(k) ≈ v·|k|^{α∧2}`.
//!
//! A Kac kernel is `D(x) = h(x/L) / Σ_{|y|∞≤R} h(y/L)` with the pure power
//! profile `h(x) = (|x| ∨ 1)^{-d-α}`. Kernels whose box `[-R, R]^d` fits in
//! [`TABLE_LIMIT`] points are tabulated densely; larger ones (needed for very
//! heavy tails in d = 2) are evaluated analytically, with the normalization
//! obtained by exact summation up to sup-norm [`EXACT_RADIUS`] and an
//! Euler–Maclaurin expansion of the shell sums beyond it.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{self, compensated_sum, fit_line, KahanSum};
use crate::site::{self, BoxIter, Site, MAX_DIM};

/// Largest box (in lattice points) that is stored as a dense table.
pub const TABLE_LIMIT: u128 = 1 << 23;

/// Shells up to this sup-norm are summed exactly for analytic kernels.
pub const EXACT_RADIUS: i64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KacStorage {
    Auto,
    Table,
    Analytic,
}

#[derive(Debug, Clone)]
pub(crate) struct Table {
    /// Dense weights over `[-R, R]^d` in lexicographic order.
    pub(crate) dense: Vec<f64>,
    /// Nonzero entries, lexicographic.
    pub(crate) support: Vec<(Site, f64)>,
}

#[derive(Debug, Clone)]
pub(crate) enum Kernel {
    Table(Table),
    Kac { norm: f64 },
}

/// A symmetric one-step distribution truncated to the box `[-R, R]^d`.
#[derive(Debug, Clone)]
pub struct StepDistribution {
    dim: usize,
    alpha: f64,
    scale: f64,
    radius: i64,
    mass_deficit: f64,
    kac: bool,
    pub(crate) kernel: Kernel,
}

/// Pure power profile `h(x) = (|x| ∨ 1)^{-d-α}` evaluated at `|x| = norm`.
#[inline]
pub fn kac_profile(norm: f64, exponent: f64) -> f64 {
    norm.max(1.0).powf(-exponent)
}

fn dense_index(x: &Site, d: usize, radius: i64) -> Option<usize> {
    let side = 2 * radius + 1;
    let mut idx = 0i64;
    for &c in &x[..d] {
        if c.abs() > radius {
            return None;
        }
        idx = idx * side + (c + radius);
    }
    if x[d..].iter().any(|&c| c != 0) {
        return None;
    }
    Some(idx as usize)
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 || d > MAX_DIM {
        return invalid(format!("dimension must be in 1..={MAX_DIM}, got {d}"));
    }
    Ok(())
}

/// Build the Kac distribution, tabulating it when the box is small enough.
pub fn build_kac_distribution(d: usize, alpha: f64, l: f64, r: i64) -> Result<StepDistribution> {
    StepDistribution::kac(d, alpha, l, r, KacStorage::Auto)
}

impl StepDistribution {
    /// Uniform law on the `2d` nearest neighbours.
    pub fn nearest_neighbor(d: usize) -> Result<Self> {
        check_dim(d)?;
        let mut entries = Vec::with_capacity(2 * d);
        for k in 0..d {
            for s in [-1, 1] {
                let mut x = site::ORIGIN;
                x[k] = s;
                entries.push((x, 1.0 / (2 * d) as f64));
            }
        }
        let mut dist = Self::from_weights(d, entries)?;
        dist.alpha = f64::INFINITY;
        Ok(dist)
    }

    /// A finite-range law from explicit weights; they are renormalized to total mass 1.
    /// `alpha` is reported as infinite.
    pub fn from_weights(d: usize, entries: Vec<(Site, f64)>) -> Result<Self> {
        check_dim(d)?;
        if entries.is_empty() {
            return invalid("empty weight table");
        }
        if entries.iter().any(|(_, w)| !(*w >= 0.0) || !w.is_finite()) {
            return invalid("weights must be finite and nonnegative");
        }
        let radius = entries.iter().map(|(x, _)| site::sup_norm(x)).max().unwrap_or(0).max(1);
        let total = compensated_sum(entries.iter().map(|(_, w)| *w));
        if total <= 0.0 {
            return invalid("weights sum to zero");
        }
        let side = (2 * radius + 1) as usize;
        let mut dense = vec![0.0; side.pow(d as u32)];
        for (x, w) in &entries {
            let idx = dense_index(x, d, radius)
                .ok_or_else(|| Error::InvalidParameter("weight outside dimension".into()))?;
            dense[idx] += w / total;
        }
        let support = BoxIter::new(d, radius)
            .zip(dense.iter())
            .filter(|(_, &w)| w > 0.0)
            .map(|(x, &w)| (x, w))
            .collect();
        Ok(StepDistribution {
            dim: d,
            alpha: f64::INFINITY,
            scale: 1.0,
            radius,
            mass_deficit: 0.0,
            kac: false,
            kernel: Kernel::Table(Table { dense, support }),
        })
    }

    /// The Kac law with an explicit storage choice.
    pub fn kac(d: usize, alpha: f64, l: f64, r: i64, storage: KacStorage) -> Result<Self> {
        check_dim(d)?;
        if !(alpha > 0.0) || !alpha.is_finite() {
            return invalid(format!("alpha must be positive and finite, got {alpha}"));
        }
        if !(l >= 1.0) || !l.is_finite() {
            return invalid(format!("scale L must be >= 1, got {l}"));
        }
        if r < 1 || (r as f64) < 2.0 * l {
            return invalid(format!("truncation radius R={r} must be >= 2L = {}", 2.0 * l));
        }
        let points = site::cube_count(r, d);
        let tabulate = match storage {
            KacStorage::Table => true,
            KacStorage::Analytic => false,
            KacStorage::Auto => points <= TABLE_LIMIT,
        };
        if tabulate && points > 4 * TABLE_LIMIT {
            return invalid(format!("box of {points} points is too large to tabulate"));
        }
        let exponent = d as f64 + alpha;
        let h = |x: &Site| kac_profile(site::euclidean(x) / l, exponent);

        let (kernel, norm) = if tabulate {
            let raw: Vec<f64> = BoxIter::new(d, r).map(|x| h(&x)).collect();
            let norm = compensated_sum(raw.iter().copied());
            let dense: Vec<f64> = raw.iter().map(|w| w / norm).collect();
            let support = BoxIter::new(d, r)
                .zip(dense.iter())
                .map(|(x, &w)| (x, w))
                .collect();
            (Kernel::Table(Table { dense, support }), norm)
        } else {
            if d > 2 {
                return Err(Error::Unsupported(
                    "analytic Kac kernels are implemented for d <= 2".into(),
                ));
            }
            let norm = analytic_mass(d, exponent, l, r);
            (Kernel::Kac { norm }, norm)
        };

        let beyond = if tabulate {
            exact_shell_mass(d, exponent, l, r + 1, 2 * r)
        } else {
            analytic_shell_mass(d, exponent, l, r + 1, 2 * r)
        };
        Ok(StepDistribution {
            dim: d,
            alpha,
            scale: l,
            radius: r,
            mass_deficit: beyond / (norm + beyond),
            kac: true,
            kernel,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Tail index α; infinite for finite-range laws.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn truncation_radius(&self) -> i64 {
        self.radius
    }

    /// Relative mass of the untruncated law lying in `R < |x|∞ ≤ 2R`.
    pub fn total_mass_deficit(&self) -> f64 {
        self.mass_deficit
    }

    pub fn is_kac(&self) -> bool {
        self.kac
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self.kernel, Kernel::Table(_))
    }

    /// Normalization constant of an analytic kernel.
    pub fn analytic_norm(&self) -> Option<f64> {
        match self.kernel {
            Kernel::Kac { norm } => Some(norm),
            Kernel::Table(_) => None,
        }
    }

    /// `D(x)`.
    pub fn weight(&self, x: &Site) -> f64 {
        match &self.kernel {
            Kernel::Table(t) => dense_index(x, self.dim, self.radius)
                .map(|i| t.dense[i])
                .unwrap_or(0.0),
            Kernel::Kac { norm } => {
                if site::sup_norm(x) > self.radius {
                    0.0
                } else {
                    kac_profile(site::euclidean(x) / self.scale, self.dim as f64 + self.alpha)
                        / norm
                }
            }
        }
    }

    /// Nonzero weights in lexicographic order, if tabulated.
    pub fn support(&self) -> Option<&[(Site, f64)]> {
        match &self.kernel {
            Kernel::Table(t) => Some(&t.support),
            Kernel::Kac { .. } => None,
        }
    }

    pub(crate) fn require_support(&self) -> Result<&[(Site, f64)]> {
        self.support().ok_or_else(|| {
            Error::Unsupported("operation needs a tabulated step distribution".into())
        })
    }

    /// Number of support points (including zero-weight points of the box for analytic kernels).
    pub fn support_size(&self) -> u128 {
        match &self.kernel {
            Kernel::Table(t) => t.support.len() as u128,
            Kernel::Kac { .. } => site::cube_count(self.radius, self.dim),
        }
    }

    /// `σ² = Σ |x|² D(x)` of the truncated law.
    pub fn variance(&self) -> Result<f64> {
        let sup = self.require_support()?;
        Ok(compensated_sum(sup.iter().map(|(x, w)| site::norm_sq(x) * w)))
    }

    /// `Σ x₁² D(x)`, i.e. `-∇₁² D̂(0)`.
    pub fn axis_second_moment(&self) -> Result<f64> {
        let sup = self.require_support()?;
        Ok(compensated_sum(sup.iter().map(|(x, w)| (x[0] as f64).powi(2) * w)))
    }

    /// JSON document `{d, alpha, L, R, deficit, weights: [[[x…], p], …]}` with
    /// weights in lexicographic point order and 17 significant digits.
    pub fn to_json(&self) -> Result<String> {
        let sup = self.require_support()?;
        let alpha = if self.alpha.is_finite() {
            fmt_sig(self.alpha)
        } else {
            "null".to_string()
        };
        let mut s = format!(
            "{{\"d\":{},\"alpha\":{},\"L\":{},\"R\":{},\"deficit\":{},\"weights\":[",
            self.dim,
            alpha,
            fmt_sig(self.scale),
            self.radius,
            fmt_sig(self.mass_deficit)
        );
        for (i, (x, w)) in sup.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let coords: Vec<String> = x[..self.dim].iter().map(|c| c.to_string()).collect();
            s.push_str(&format!("[[{}],{}]", coords.join(","), fmt_sig(*w)));
        }
        s.push_str("]}");
        Ok(s)
    }
}

/// Decimal with 17 significant digits.
pub fn fmt_sig(v: f64) -> String {
    format!("{v:.16e}")
}

fn exact_shell_mass(d: usize, exponent: f64, l: f64, from: i64, to: i64) -> f64 {
    let mut acc = KahanSum::new();
    for a in from..=to {
        let n = site::shell_count(a, d);
        for i in 0..n {
            let x = site::shell_point(a, d, i);
            acc.add(kac_profile(site::euclidean(&x) / l, exponent));
        }
    }
    acc.value()
}

fn side_integral(exponent: f64) -> f64 {
    numerics::integrate(
        |u| (1.0 + u * u).powf(-exponent / 2.0),
        -1.0,
        1.0,
        8,
        0.0,
        1e-15,
        200,
    )
    .value
}

/// Σ over sup-norm shells `from..=to` of `h(x/L)`, for shells beyond the plateau and large radius.
fn shell_asymptotic_mass(d: usize, exponent: f64, l: f64, from: i64, to: i64) -> f64 {
    if to < from {
        return 0.0;
    }
    let (m, n) = (from as f64, to as f64);
    let ls = l.powf(exponent);
    match d {
        1 => 2.0 * ls * numerics::power_sum_tail(m, n, exponent),
        2 => {
            // shell sum S(a) = 4 L^s [I(s) a^{1-s} - (s/6) 2^{-s/2-1} a^{-s-1}] + O(a^{-s-3})
            let i = side_integral(exponent);
            let c2 = exponent / 6.0 * 2f64.powf(-exponent / 2.0 - 1.0);
            4.0 * ls
                * (i * numerics::power_sum_tail(m, n, exponent - 1.0)
                    - c2 * numerics::power_sum_tail(m, n, exponent + 1.0))
        }
        _ => unreachable!("analytic kernels are limited to d <= 2"),
    }
}

fn analytic_shell_mass(d: usize, exponent: f64, l: f64, from: i64, to: i64) -> f64 {
    let cut = EXACT_RADIUS.max((2.0 * l).ceil() as i64);
    let exact_to = to.min(cut);
    let mut total = 0.0;
    if from <= exact_to {
        total += exact_shell_mass(d, exponent, l, from, exact_to);
    }
    total + shell_asymptotic_mass(d, exponent, l, from.max(exact_to + 1), to)
}

fn analytic_mass(d: usize, exponent: f64, l: f64, r: i64) -> f64 {
    analytic_shell_mass(d, exponent, l, 0, r)
}

/// `D̂(k) = Σ_x cos(k·x) D(x)` for `k ∈ [-π, π]^d`.
pub fn fourier_transform(dist: &StepDistribution, k: &[f64]) -> Result<f64> {
    Ok(1.0 - one_minus_fourier(dist, k)?)
}

/// `1 − D̂(k) = Σ_x 2 sin²(k·x/2) D(x)`, free of cancellation at small k.
pub fn one_minus_fourier(dist: &StepDistribution, k: &[f64]) -> Result<f64> {
    if k.len() != dist.dim() {
        return Err(Error::DimensionMismatch {
            expected: dist.dim(),
            found: k.len(),
        });
    }
    if k.iter().any(|c| !(c.abs() <= std::f64::consts::PI)) {
        return invalid("wave vector must lie in [-pi, pi]^d");
    }
    let sup = dist.require_support()?;
    let mut acc = KahanSum::new();
    for (x, w) in sup {
        let phase: f64 = k.iter().zip(x.iter()).map(|(kc, &xc)| kc * xc as f64).sum();
        let s = (0.5 * phase).sin();
        acc.add(2.0 * s * s * w);
    }
    Ok(acc.value())
}

/// Small-k samples of `1 − D̂` along axis 1 and the fitted singularity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FourierProfile {
    /// `(k, 1 − D̂(k e₁))`.
    pub samples: Vec<(f64, f64)>,
    pub fitted_v: f64,
    pub fitted_exponent: f64,
    pub log_correction_flag: bool,
    /// RMS residual of the fit in log coordinates.
    pub residual_rms: f64,
    pub window: (f64, f64),
    /// `σ²` of the truncated law, reported when α > 2.
    pub sigma2: Option<f64>,
}

/// Fit `log(1 − D̂(k)) = log v + β log k` on `k_grid` (or the log-corrected form when α = 2).
pub fn fit_small_k_asymptotics(dist: &StepDistribution, k_grid: &[f64]) -> Result<FourierProfile> {
    if k_grid.len() < 8 {
        return invalid("k grid needs at least 8 points");
    }
    if k_grid.iter().any(|&k| !(k > 0.0)) || k_grid.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("k grid must be positive and strictly increasing");
    }
    let k_max = *k_grid.last().unwrap();
    if k_max > 0.5 / dist.scale() + 1e-15 {
        return invalid(format!("max k = {k_max} exceeds 0.5/L"));
    }
    let mut samples = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        let mut kv = vec![0.0; dist.dim()];
        kv[0] = k;
        samples.push((k, one_minus_fourier(dist, &kv)?));
    }
    if samples.iter().all(|(_, v)| *v < 1e-14) {
        return Err(Error::Degenerate(
            "1 - D(k) below 1e-14 on the whole grid; grid too close to 0".into(),
        ));
    }
    if samples.iter().any(|(_, v)| !(*v > 0.0)) {
        return Err(Error::Degenerate("nonpositive 1 - D(k) on the grid".into()));
    }
    let sigma2 = if dist.alpha() > 2.0 {
        Some(dist.variance()?)
    } else {
        None
    };
    let l = dist.scale();
    let log_corrected = dist.alpha() == 2.0;
    let (fitted_v, fitted_exponent, residual_rms) = if log_corrected {
        if k_max * l >= 1.0 {
            return invalid("log-corrected fit needs L k < 1");
        }
        let logs: Vec<f64> = samples
            .iter()
            .map(|(k, v)| v.ln() - (k * k * (1.0 / (l * k)).ln()).ln())
            .collect();
        let mean = logs.iter().sum::<f64>() / logs.len() as f64;
        let rms = (logs.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / logs.len() as f64).sqrt();
        (mean.exp(), 2.0, rms)
    } else {
        let xs: Vec<f64> = samples.iter().map(|(k, _)| k.ln()).collect();
        let ys: Vec<f64> = samples.iter().map(|(_, v)| v.ln()).collect();
        let fit = fit_line(&xs, &ys).ok_or_else(|| Error::Degenerate("k grid".into()))?;
        (fit.intercept.exp(), fit.slope, fit.residual_rms)
    };
    Ok(FourierProfile {
        samples,
        fitted_v,
        fitted_exponent,
        log_correction_flag: log_corrected,
        residual_rms,
        window: (k_grid[0], k_max),
        sigma2,
    })
}

/// `n` log-spaced wave numbers on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
