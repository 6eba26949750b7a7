//! Batched Monte Carlo bookkeeping shared by the SAW and OP samplers.
//!
//! Trial `i` draws from its own ChaCha8 stream `(seed, i)`. Trials are split
//! into contiguous batches, batches run in parallel, and results are reduced
//! in batch order, so outputs do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{AxisMode, LatticeField, MomentSeries};
use crate::site::{self, Site};

/// Fewer surviving trials than this at some t marks the t unusable.
pub const MIN_USABLE: u64 = 100;

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McMeta {
    pub n_trials: u64,
    pub seed: u64,
    pub n_batches: usize,
    /// Trials still alive (self-avoiding, or with a nonempty active set) at each t.
    pub alive: Vec<u64>,
    /// Total observations `Σ_trials Σ_x 1{x reached at t}` at each t.
    pub hits: Vec<u64>,
    pub usable: Vec<bool>,
    /// Largest active set seen (OP only).
    pub max_active: usize,
}

pub(crate) struct Accum {
    orders: Vec<f64>,
    pub(crate) alive: Vec<u64>,
    hits: Vec<u64>,
    first: Vec<Vec<f64>>,
    euclid: Vec<Vec<f64>>,
    fields: Option<Vec<LatticeField>>,
    outside: Vec<u64>,
    pub(crate) max_active: usize,
}

impl Accum {
    fn new(horizon: usize, orders: &[f64], field_box: Option<(usize, i64)>) -> Result<Self> {
        let fields = match field_box {
            Some((d, b)) => Some(
                (0..=horizon)
                    .map(|t| {
                        let mut f = LatticeField::zeros(d, b)?;
                        f.set_time_index(t);
                        Ok(f)
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        Ok(Accum {
            orders: orders.to_vec(),
            alive: vec![0; horizon + 1],
            hits: vec![0; horizon + 1],
            first: vec![vec![0.0; horizon + 1]; orders.len()],
            euclid: vec![vec![0.0; horizon + 1]; orders.len()],
            fields,
            outside: vec![0; horizon + 1],
            max_active: 0,
        })
    }

    #[inline]
    pub(crate) fn observe(&mut self, t: usize, x: &Site) {
        self.hits[t] += 1;
        let a = x[0].abs() as f64;
        let n2 = site::norm_sq(x);
        for (k, &r) in self.orders.iter().enumerate() {
            self.first[k][t] += a.powf(r);
            self.euclid[k][t] += n2.powf(0.5 * r);
        }
        if let Some(fields) = &mut self.fields {
            if fields[t].add(x, 1.0).is_err() {
                self.outside[t] += 1;
            }
        }
    }
}

pub(crate) struct McOutput {
    pub series: Vec<MomentSeries>,
    pub fields: Vec<LatticeField>,
    pub escaped: Vec<f64>,
    pub meta: McMeta,
    pub loo_series: Vec<Vec<MomentSeries>>,
}

/// Runs `n_trials` trials of `trial` split into `n_batches` batches and reduces them.
pub(crate) fn run_batches<F>(
    n_trials: u64,
    n_batches: usize,
    seed: u64,
    horizon: usize,
    orders: &[f64],
    field_box: Option<(usize, i64)>,
    trial: F,
) -> Result<McOutput>
where
    F: Fn(&mut ChaCha8Rng, &mut Accum) -> Result<()> + Sync,
{
    if n_batches < 2 || n_batches as u64 > n_trials {
        return invalid(format!("need 2 <= n_batches <= n_trials, got {n_batches}"));
    }
    let bounds: Vec<(u64, u64)> = (0..n_batches as u64)
        .map(|b| (n_trials * b / n_batches as u64, n_trials * (b + 1) / n_batches as u64))
        .collect();
    let batches: Vec<Accum> = bounds
        .par_iter()
        .map(|&(lo, hi)| {
            let mut acc = Accum::new(horizon, orders, field_box)?;
            for i in lo..hi {
                let mut rng = trial_rng(seed, i);
                trial(&mut rng, &mut acc)?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(reduce(batches, n_trials, seed, horizon, orders))
}

fn reduce(batches: Vec<Accum>, n_trials: u64, seed: u64, horizon: usize, orders: &[f64]) -> McOutput {
    let n = n_trials as f64;
    let nb = batches.len();
    let sum_u = |get: &dyn Fn(&Accum) -> u64| batches.iter().map(get).sum::<u64>();
    let alive: Vec<u64> = (0..=horizon).map(|t| sum_u(&|a| a.alive[t])).collect();
    let hits: Vec<u64> = (0..=horizon).map(|t| sum_u(&|a| a.hits[t])).collect();
    let usable: Vec<bool> = alive.iter().map(|&a| a >= MIN_USABLE).collect();

    let mut series = Vec::new();
    let mut loo_series: Vec<Vec<MomentSeries>> = vec![Vec::new(); nb];
    for (k, &r) in orders.iter().enumerate() {
        for mode in [AxisMode::FirstCoordinate, AxisMode::Euclidean] {
            let num_of = |a: &Accum, t: usize| match mode {
                AxisMode::FirstCoordinate => a.first[k][t],
                AxisMode::Euclidean => a.euclid[k][t],
            };
            let mut s = MomentSeries::new(r, mode);
            let mut held: Vec<MomentSeries> = (0..nb).map(|_| MomentSeries::new(r, mode)).collect();
            for t in 0..=horizon {
                let den: f64 = batches.iter().map(|a| a.hits[t] as f64).sum();
                if den == 0.0 {
                    continue;
                }
                let num: f64 = batches.iter().map(|a| num_of(a, t)).sum();
                // delete-one-batch jackknife
                let loo: Vec<f64> = batches
                    .iter()
                    .filter_map(|a| {
                        let c = den - a.hits[t] as f64;
                        (c > 0.0).then(|| (num - num_of(a, t)) / c)
                    })
                    .collect();
                let se = if loo.len() == nb {
                    let m = loo.iter().sum::<f64>() / nb as f64;
                    ((nb - 1) as f64 / nb as f64 * loo.iter().map(|v| (v - m).powi(2)).sum::<f64>()).sqrt()
                } else {
                    f64::INFINITY
                };
                s.push(t, num / n, den / n, Some(se), usable[t])
                    .expect("positive denominator");
                for (h, a) in held.iter_mut().zip(&batches) {
                    let c = den - a.hits[t] as f64;
                    if c > 0.0 {
                        h.push(t, (num - num_of(a, t)) / n, c / n, None, usable[t])
                            .expect("positive denominator");
                    }
                }
            }
            series.push(s);
            for (dst, h) in loo_series.iter_mut().zip(held) {
                dst.push(h);
            }
        }
    }

    let mut fields = Vec::new();
    let mut escaped = vec![0.0; horizon + 1];
    let mut max_active = 0;
    let mut iter = batches.into_iter();
    if let Some(first) = iter.next() {
        max_active = first.max_active;
        let mut outside = first.outside.clone();
        let mut acc = first.fields;
        for b in iter {
            max_active = max_active.max(b.max_active);
            for (o, v) in outside.iter_mut().zip(&b.outside) {
                *o += v;
            }
            if let (Some(acc), Some(add)) = (&mut acc, b.fields) {
                for (f, g) in acc.iter_mut().zip(add) {
                    *f = f.axpy(1.0, &g).expect("same shape");
                }
            }
        }
        if let Some(acc) = acc {
            fields = acc.iter().map(|f| f.scale(1.0 / n)).collect();
        }
        escaped = outside.iter().map(|&o| o as f64 / n).collect();
    }
    for (f, e) in fields.iter_mut().zip(&escaped) {
        f.set_escaped_mass(*e);
    }
    McOutput {
        series,
        fields,
        escaped,
        loo_series,
        meta: McMeta {
            n_trials,
            seed,
            n_batches: nb,
            alive,
            hits,
            usable,
            max_active,
        },
    }
}
