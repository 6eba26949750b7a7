use crate::error::{invalid, Error, Result};
use crate::lattice::{self, AxisMode, Convolver, LatticeField, MomentSeries};
use crate::numerics::KahanSum;
use crate::site::{self, BoxIter};
use crate::stepdist::StepDistribution;

use super::{EvolutionRun, Model, StepSummary};

/// Above this many multiply-adds per step the evolution runs on the FFT path.
const DIRECT_STEP_LIMIT: f64 = 2e7;

#[derive(Debug, Clone)]
pub struct RwOptions {
    pub box_radius: i64,
    /// Largest admissible escaped mass at any t.
    pub escape_tolerance: f64,
    /// Keep every `φ_t`; otherwise only moments are recorded.
    pub keep_fields: bool,
    pub orders: Vec<f64>,
}

impl RwOptions {
    pub fn new(box_radius: i64) -> Self {
        RwOptions {
            box_radius,
            escape_tolerance: 1e-6,
            keep_fields: true,
            orders: Vec::new(),
        }
    }
}

/// `φ_t = D^{*t}` on `[-B, B]^d` for `t = 0..=T`, keeping all fields.
pub fn evolve_rw(dist: &StepDistribution, horizon: usize, box_radius: i64) -> Result<EvolutionRun> {
    evolve_rw_with(dist, horizon, &RwOptions::new(box_radius))
}

enum Stepper {
    Fft(Box<Convolver>),
    Direct,
}

/// Per-point weights `|x₁|^r` and `|x|^r` for dense fields.
struct MomentWeights {
    r: f64,
    first: Vec<f64>,
    euclid: Vec<f64>,
}

pub fn evolve_rw_with(dist: &StepDistribution, horizon: usize, opts: &RwOptions) -> Result<EvolutionRun> {
    let b = opts.box_radius;
    if b < dist.truncation_radius() {
        return invalid(format!(
            "box radius {b} below kernel radius {}",
            dist.truncation_radius()
        ));
    }
    if opts.orders.iter().any(|&r| !(r > 0.0)) {
        return invalid("moment orders must be positive");
    }
    let d = dist.dim();
    let mut f = LatticeField::delta(d, b)?;
    let dense_points = site::cube_count(b, d) as f64;
    let mut stepper = if f.is_dense() && (dist.support().is_none() || dense_points * dist.support_size() as f64 > DIRECT_STEP_LIMIT) {
        Stepper::Fft(Box::new(Convolver::new(dist, b)?))
    } else {
        Stepper::Direct
    };
    let weights: Vec<MomentWeights> = if f.is_dense() {
        opts.orders
            .iter()
            .map(|&r| {
                let (first, euclid) = BoxIter::new(d, b)
                    .map(|x| ((x[0].abs() as f64).powf(r), site::norm_sq(&x).powf(r / 2.0)))
                    .unzip();
                MomentWeights { r, first, euclid }
            })
            .collect()
    } else {
        Vec::new()
    };
    let mut series: Vec<MomentSeries> = opts
        .orders
        .iter()
        .flat_map(|&r| {
            [
                MomentSeries::new(r, AxisMode::FirstCoordinate),
                MomentSeries::new(r, AxisMode::Euclidean),
            ]
        })
        .collect();
    let mut fields = Vec::new();
    let mut escaped = Vec::with_capacity(horizon + 1);

    for t in 0..=horizon {
        if t > 0 {
            f = match &mut stepper {
                Stepper::Fft(c) => c.apply(&f)?,
                Stepper::Direct => lattice::convolve_direct(&f, dist)?,
            };
        }
        if f.escaped_mass() > opts.escape_tolerance {
            return Err(Error::EscapedMass {
                t,
                escaped: f.escaped_mass(),
                tolerance: opts.escape_tolerance,
            });
        }
        escaped.push(f.escaped_mass());
        record(&f, &weights, &mut series)?;
        if opts.keep_fields {
            fields.push(f.clone());
        }
    }
    Ok(EvolutionRun {
        model: Model::Rw,
        step: StepSummary::of(dist),
        horizon,
        p: None,
        fields,
        series,
        escaped,
        mc: None,
        loo_series: None,
    })
}

fn record(f: &LatticeField, weights: &[MomentWeights], series: &mut [MomentSeries]) -> Result<()> {
    if weights.is_empty() {
        for s in series.iter_mut() {
            s.push_field(f)?;
        }
        return Ok(());
    }
    let values = f.dense_values().expect("dense field");
    let mut den = KahanSum::new();
    values.iter().for_each(|&v| den.add(v));
    for (k, w) in weights.iter().enumerate() {
        let (mut a, mut e) = (KahanSum::new(), KahanSum::new());
        for ((&v, &p1), &pe) in values.iter().zip(&w.first).zip(&w.euclid) {
            if v != 0.0 {
                a.add(v * p1);
                e.add(v * pe);
            }
        }
        debug_assert_eq!(series[2 * k].order, w.r);
        series[2 * k].push(f.time_index(), a.value(), den.value(), None, true)?;
        series[2 * k + 1].push(f.time_index(), e.value(), den.value(), None, true)?;
    }
    Ok(())
}
