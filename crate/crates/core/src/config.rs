//! Experiment configuration: a single JSON document, resolved to explicit values
//! before any computation starts.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::stepdist::{KacStorage, StepDistribution, TABLE_LIMIT};
use crate::walkers::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitKind {
    /// Log-corrected at α = 2, pure power law otherwise.
    Auto,
    Power,
    LogCorrected,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Largest admissible escaped mass in exact evolution.
    pub escape: f64,
    /// Relative exponent deviation accepted by `verify`.
    pub exponent: f64,
    /// Relative amplitude deviation accepted by `verify`.
    pub amplitude: f64,
    pub lace_epsilon: f64,
    pub lace_delta: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            escape: 1e-6,
            exponent: 0.05,
            amplitude: 0.05,
            lace_epsilon: 0.1,
            lace_delta: 0.1,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FourierGrid {
    pub k_min: Option<f64>,
    pub k_max: Option<f64>,
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheoryParams {
    #[serde(rename = "C")]
    pub c: Option<f64>,
    /// Small-k amplitude; fitted from the step law when absent.
    pub v: Option<f64>,
}

/// Every field of an experiment. Absent optional fields are filled by [`ExperimentConfig::resolve`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: Model,
    pub d: usize,
    /// Tail index of the Kac law; `null` selects nearest-neighbour steps.
    pub alpha: Option<f64>,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "R")]
    pub radius: Option<i64>,
    #[serde(rename = "B")]
    pub box_radius: Option<i64>,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub r: Vec<f64>,
    pub p: Option<f64>,
    pub n_trials: u64,
    pub seed: u64,
    pub n_batches: usize,
    pub active_budget: usize,
    pub cost_cap: f64,
    pub storage: KacStorage,
    pub fit: FitKind,
    pub fit_window: Option<(usize, usize)>,
    pub fourier: FourierGrid,
    pub theory: TheoryParams,
    pub tolerances: Tolerances,
    /// Monte Carlo runs record empirical fields on `[-B, B]^d` when set.
    pub field_box: Option<i64>,
    pub write_fields: bool,
    pub write_weights: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: Model::Rw,
            d: 1,
            alpha: None,
            l: 1.0,
            radius: None,
            box_radius: None,
            horizon: 100,
            r: vec![2.0],
            p: None,
            n_trials: 100_000,
            seed: 0,
            n_batches: 20,
            active_budget: 1_000_000,
            cost_cap: 1e9,
            storage: KacStorage::Auto,
            fit: FitKind::Auto,
            fit_window: None,
            fourier: FourierGrid::default(),
            theory: TheoryParams::default(),
            tolerances: Tolerances::default(),
            field_box: None,
            write_fields: false,
            write_weights: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Fills every defaulted field and validates the result.
    pub fn resolve(mut self) -> Result<Self> {
        self.validate_basic()?;
        let r = match (self.alpha, self.radius) {
            (None, _) => 1,
            (Some(_), Some(r)) => r,
            (Some(_), None) => default_radius(self.d, self.l),
        };
        self.radius = Some(r);
        if self.box_radius.is_none() {
            let t = self.horizon as i64;
            self.box_radius = Some(match (self.model, self.alpha) {
                (Model::Rw, None) => t.max(1),
                (Model::Rw, Some(_)) => (t * r).min(2 * r).max(r),
                _ => (t * r).max(1),
            });
        }
        if self.fourier.k_max.is_none() {
            self.fourier.k_max = Some(0.1 / self.l);
        }
        if self.fourier.k_min.is_none() {
            // stay above the truncation scale 1/R, but keep at least a decade of k
            let floor = if self.alpha.is_some() { 10.0 / r as f64 } else { 0.0 };
            let k_max = self.fourier.k_max.expect("set above");
            self.fourier.k_min = Some((1e-3 / self.l).max(floor).min(k_max / 10.0));
        }
        if self.fourier.n.is_none() {
            self.fourier.n = Some(20);
        }
        if self.theory.c.is_none() && self.model == Model::Rw {
            self.theory.c = Some(1.0);
        }
        self.validate_resolved()?;
        Ok(self)
    }

    fn validate_basic(&self) -> Result<()> {
        if !(1..=4).contains(&self.d) {
            return invalid(format!("d must be in 1..=4, got {}", self.d));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return invalid(format!("alpha must be positive, got {a}"));
            }
        }
        if !(self.l >= 1.0 && self.l.is_finite()) {
            return invalid(format!("L must be at least 1, got {}", self.l));
        }
        if self.horizon == 0 {
            return invalid("T must be positive");
        }
        if self.r.is_empty() || self.r.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return invalid("r must be a nonempty list of positive orders");
        }
        if let Some(p) = self.p {
            if !(p >= 0.0 && p.is_finite()) {
                return invalid(format!("p must be nonnegative, got {p}"));
            }
        }
        if self.n_batches < 2 || self.n_batches as u64 > self.n_trials {
            return invalid(format!("need 2 <= n_batches <= n_trials, got {}", self.n_batches));
        }
        if let Some((lo, hi)) = self.fit_window {
            if lo >= hi {
                return invalid(format!("fit window [{lo}, {hi}] is empty"));
            }
        }
        let t = &self.tolerances;
        if [t.escape, t.exponent, t.amplitude, t.lace_epsilon, t.lace_delta]
            .iter()
            .any(|v| !(*v > 0.0))
        {
            return invalid("tolerances must be positive");
        }
        if !(self.cost_cap > 0.0) {
            return invalid("cost_cap must be positive");
        }
        Ok(())
    }

    fn validate_resolved(&self) -> Result<()> {
        let r = self.radius.expect("resolved");
        let b = self.box_radius.expect("resolved");
        if self.alpha.is_some() && (r as f64) < 2.0 * self.l {
            return invalid(format!("R = {r} is below 2L = {}", 2.0 * self.l));
        }
        if b < r {
            return invalid(format!("B = {b} is below R = {r}"));
        }
        if matches!(self.field_box, Some(fb) if fb < 0) {
            return invalid("field_box must be nonnegative");
        }
        let (k_min, k_max, n) = (self.fourier.k_min.unwrap(), self.fourier.k_max.unwrap(), self.fourier.n.unwrap());
        if !(k_min > 0.0 && k_min < k_max) || n < 8 {
            return invalid(format!("Fourier grid [{k_min}, {k_max}] with {n} points is unusable"));
        }
        if let Some(c) = self.theory.c {
            if !(c > 0.0) {
                return invalid("C must be positive");
            }
        }
        if let Some(v) = self.theory.v {
            if !(v > 0.0) {
                return invalid("v must be positive");
            }
        }
        Ok(())
    }

    /// The step law named by `d`, `alpha`, `L`, `R` and `storage`.
    pub fn step_distribution(&self) -> Result<StepDistribution> {
        match self.alpha {
            None => StepDistribution::nearest_neighbor(self.d),
            Some(a) => StepDistribution::kac(self.d, a, self.l, self.radius.expect("resolved"), self.storage),
        }
    }

    pub fn k_grid(&self) -> Vec<f64> {
        crate::stepdist::log_grid(
            self.fourier.k_min.expect("resolved"),
            self.fourier.k_max.expect("resolved"),
            self.fourier.n.expect("resolved"),
        )
    }

    pub fn require_p(&self) -> Result<f64> {
        self.p.ok_or_else(|| Error::InvalidParameter("p is required for oriented percolation".into()))
    }

    /// Hex SHA-256 of the canonical JSON of this configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// `max(1000, 50L)`, capped in `d ≥ 2` so the table fits the memory budget.
pub fn default_radius(d: usize, l: f64) -> i64 {
    let base = (50.0 * l).ceil().max(1000.0) as i64;
    if d == 1 {
        return base;
    }
    let side = (TABLE_LIMIT as f64).powf(1.0 / d as f64).floor() as i64;
    base.min((side - 1) / 2).max((2.0 * l).ceil() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let c = ExperimentConfig::default().resolve().unwrap();
        assert_eq!(c.radius, Some(1));
        assert_eq!(c.box_radius, Some(100));
        assert_eq!(c.theory.c, Some(1.0));
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"dd": 2}"#).is_err());
    }

    #[test]
    fn small_radius_rejected() {
        let c = ExperimentConfig::from_json(r#"{"alpha": 0.8, "L": 10, "R": 15}"#).unwrap();
        assert!(matches!(c.resolve(), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default().resolve().unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 7;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn default_radius_respects_table() {
        assert_eq!(default_radius(1, 1.0), 1000);
        assert_eq!(default_radius(1, 100.0), 5000);
        let r = default_radius(2, 100.0);
        assert!(((2 * r + 1) as u128).pow(2) <= TABLE_LIMIT);
    }
}
