//! Two-point functions of the three models: exact random-walk evolution,
//! exact and Monte Carlo self-avoiding walks, Monte Carlo and exact
//! small-horizon oriented percolation.

mod mc;
mod op;
mod rw;
mod saw;

pub use mc::{trial_rng, McMeta};
pub use op::{exact_op, simulate_op, OpConfig};
pub use rw::{evolve_rw, evolve_rw_with, RwOptions};
pub use saw::{connective_constant, count_saws, enumerate_saw, enumeration_cost, sample_saw_mc, SawMcConfig, ENUMERATION_CAP};

use serde::{Deserialize, Serialize};

use crate::lattice::{AxisMode, LatticeField, MomentSeries};
use crate::stepdist::StepDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Rw,
    SawExact,
    SawMc,
    OpMc,
    OpExact,
}

impl Model {
    pub fn is_exact(self) -> bool {
        matches!(self, Model::Rw | Model::SawExact | Model::OpExact)
    }
}

/// Parameters of the step law a run was generated from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepSummary {
    pub d: usize,
    /// `None` for finite-range laws.
    pub alpha: Option<f64>,
    pub scale: f64,
    pub radius: i64,
    pub deficit: f64,
}

impl StepSummary {
    pub fn of(dist: &StepDistribution) -> Self {
        StepSummary {
            d: dist.dim(),
            alpha: dist.alpha().is_finite().then_some(dist.alpha()),
            scale: dist.scale(),
            radius: dist.truncation_radius(),
            deficit: dist.total_mass_deficit(),
        }
    }
}

/// Output of one model run: fields `φ_t` for `t = 0..=T` when kept, and moment
/// series for every requested order in both axis modes.
#[derive(Debug, Clone)]
pub struct EvolutionRun {
    pub model: Model,
    pub step: StepSummary,
    pub horizon: usize,
    pub p: Option<f64>,
    pub fields: Vec<LatticeField>,
    pub series: Vec<MomentSeries>,
    /// Escaped mass per t (exact runs) or mass outside the recorded field box (Monte Carlo).
    pub escaped: Vec<f64>,
    pub mc: Option<McMeta>,
    /// Delete-one-batch series, one set per batch (Monte Carlo only).
    pub loo_series: Option<Vec<Vec<MomentSeries>>>,
}

impl EvolutionRun {
    /// Moment series of order `r` in the given mode, if it was recorded.
    pub fn series_for(&self, r: f64, mode: AxisMode) -> Option<&MomentSeries> {
        self.series.iter().find(|s| s.order == r && s.axis_mode == mode)
    }

    /// `Σ_x φ_t(x)` for every t with a kept field.
    pub fn totals(&self) -> Vec<(usize, f64)> {
        self.fields.iter().map(|f| (f.time_index(), f.total())).collect()
    }

    pub fn is_exact(&self) -> bool {
        self.model.is_exact()
    }

    /// Fills `series` from the kept fields for every order not yet recorded.
    pub fn ensure_series(&mut self, orders: &[f64]) -> crate::Result<()> {
        let missing: Vec<f64> = orders
            .iter()
            .copied()
            .filter(|&r| self.series_for(r, AxisMode::FirstCoordinate).is_none())
            .collect();
        if missing.is_empty() {
            return Ok(());
        }
        if self.mc.is_some() {
            return crate::error::invalid("Monte Carlo moment orders are fixed when sampling");
        }
        let extra = series_from_fields(&self.fields, &missing)?;
        self.series.extend(extra);
        Ok(())
    }
}

pub fn series_from_fields(fields: &[LatticeField], orders: &[f64]) -> crate::Result<Vec<MomentSeries>> {
    let mut out = Vec::new();
    for &r in orders {
        for mode in [AxisMode::FirstCoordinate, AxisMode::Euclidean] {
            let nonzero: Vec<&LatticeField> = fields.iter().filter(|f| !f.is_zero()).collect();
            out.push(MomentSeries::from_fields(nonzero, r, mode)?);
        }
    }
    Ok(out)
}
