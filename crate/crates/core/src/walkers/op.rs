use std::collections::{BTreeMap, BTreeSet};

use crate::error::{invalid, Error, Result};
use crate::lattice::LatticeField;
use crate::sampling::BondSampler;
use crate::site::{self, Site, ORIGIN};
use crate::stepdist::StepDistribution;

use super::mc::run_batches;
use super::{EvolutionRun, Model, StepSummary};

#[derive(Debug, Clone)]
pub struct OpConfig {
    pub p: f64,
    pub horizon: usize,
    pub n_trials: u64,
    pub seed: u64,
    pub n_batches: usize,
    /// Largest admissible active set in one time slice.
    pub active_budget: usize,
    pub orders: Vec<f64>,
    /// Record empirical fields on `[-B, B]^d` when set.
    pub field_box: Option<i64>,
}

/// Cluster growth from `(o, 0)`: each trial keeps the set of sites connected to the
/// origin at the current time and opens each bond `(u,t) → (u+x,t+1)` with probability
/// `p·D(x)`. A site counts once per trial however many paths reach it.
pub fn simulate_op(dist: &StepDistribution, cfg: &OpConfig) -> Result<EvolutionRun> {
    if !(cfg.p >= 0.0) {
        return invalid(format!("p must be nonnegative, got {}", cfg.p));
    }
    if cfg.n_trials == 0 {
        return invalid("n_trials must be positive");
    }
    let bonds = BondSampler::new(dist, cfg.p)?;
    let d = dist.dim();
    let horizon = cfg.horizon;
    let out = run_batches(
        cfg.n_trials,
        cfg.n_batches,
        cfg.seed,
        horizon,
        &cfg.orders,
        cfg.field_box.map(|b| (d, b)),
        |rng, acc| {
            let mut active = vec![ORIGIN];
            let mut next = Vec::new();
            acc.observe(0, &ORIGIN);
            acc.alive[0] += 1;
            for t in 1..=horizon {
                next.clear();
                for u in &active {
                    bonds.sample_into(rng, u, &mut next);
                }
                next.sort_unstable();
                next.dedup();
                if next.len() > cfg.active_budget {
                    return Err(Error::ActiveSetBudget {
                        t,
                        size: next.len(),
                        budget: cfg.active_budget,
                        p: cfg.p,
                    });
                }
                if next.is_empty() {
                    break;
                }
                acc.max_active = acc.max_active.max(next.len());
                acc.alive[t] += 1;
                for x in &next {
                    acc.observe(t, x);
                }
                std::mem::swap(&mut active, &mut next);
            }
            Ok(())
        },
    )?;
    Ok(EvolutionRun {
        model: Model::OpMc,
        step: StepSummary::of(dist),
        horizon,
        p: Some(cfg.p),
        fields: out.fields,
        series: out.series,
        escaped: out.escaped,
        mc: Some(out.meta),
        loo_series: Some(out.loo_series),
    })
}

/// Exact `φ_t^{OP}(x) = P((o,0) → (x,t))` for `t ≤ T`, by propagating the law of the
/// active set: given `A_{t}`, sites of `A_{t+1}` are independent with
/// `P(y ∈ A_{t+1}) = 1 − Π_{u∈A_t} (1 − p D(y−u))`.
pub fn exact_op(dist: &StepDistribution, p: f64, horizon: usize, cost_cap: f64) -> Result<EvolutionRun> {
    if !(p >= 0.0) {
        return invalid(format!("p must be nonnegative, got {p}"));
    }
    let steps: Vec<(Site, f64)> = dist
        .require_support()?
        .iter()
        .map(|(x, w)| (*x, p * w))
        .filter(|(_, q)| *q > 0.0)
        .collect();
    if steps.iter().any(|(_, q)| *q > 1.0) {
        return invalid("p·D(x) exceeds 1");
    }
    let d = dist.dim();
    let b = (horizon as i64 * dist.truncation_radius()).max(1);
    let mut fields = vec![LatticeField::delta(d, b)?];
    let mut states: BTreeMap<Vec<Site>, f64> = BTreeMap::new();
    states.insert(vec![ORIGIN], 1.0);
    let mut cost = 0.0;

    for t in 1..=horizon {
        let mut field = LatticeField::zeros(d, b)?;
        field.set_time_index(t);
        let mut next: BTreeMap<Vec<Site>, f64> = BTreeMap::new();
        for (set, &prob) in &states {
            let cands = candidate_probs(set, &steps);
            for (y, q) in &cands {
                field.add(y, prob * q)?;
            }
            if t == horizon {
                continue;
            }
            cost += (cands.len() as f64).exp2();
            if cost > cost_cap {
                return Err(Error::CostCap {
                    what: format!("exact OP to T={horizon}"),
                    estimate: cost,
                    cap: cost_cap,
                });
            }
            expand_subsets(&cands, prob, &mut next);
        }
        fields.push(field);
        states = next;
    }
    Ok(EvolutionRun {
        model: Model::OpExact,
        step: StepSummary::of(dist),
        horizon,
        p: Some(p),
        fields,
        series: Vec::new(),
        escaped: vec![0.0; horizon + 1],
        mc: None,
        loo_series: None,
    })
}

fn candidate_probs(set: &[Site], steps: &[(Site, f64)]) -> Vec<(Site, f64)> {
    let mut closed: BTreeMap<Site, f64> = BTreeMap::new();
    for u in set {
        for (z, q) in steps {
            *closed.entry(site::add(u, z)).or_insert(1.0) *= 1.0 - q;
        }
    }
    closed.into_iter().map(|(y, c)| (y, 1.0 - c)).collect()
}

fn expand_subsets(cands: &[(Site, f64)], prob: f64, out: &mut BTreeMap<Vec<Site>, f64>) {
    let forced: BTreeSet<usize> = cands
        .iter()
        .enumerate()
        .filter(|(_, (_, q))| *q >= 1.0)
        .map(|(i, _)| i)
        .collect();
    let free: Vec<usize> = (0..cands.len()).filter(|i| !forced.contains(i)).collect();
    for mask in 0u64..(1u64 << free.len()) {
        let mut w = prob;
        let mut set: Vec<Site> = forced.iter().map(|&i| cands[i].0).collect();
        for (bit, &i) in free.iter().enumerate() {
            let q = cands[i].1;
            if mask >> bit & 1 == 1 {
                w *= q;
                set.push(cands[i].0);
            } else {
                w *= 1.0 - q;
            }
        }
        if set.is_empty() || w == 0.0 {
            continue;
        }
        set.sort_unstable();
        *out.entry(set).or_insert(0.0) += w;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_slice_is_pd() {
        let d = StepDistribution::nearest_neighbor(2).unwrap();
        let run = exact_op(&d, 0.7, 1, 1e6).unwrap();
        for (x, w) in d.support().unwrap() {
            assert!((run.fields[1].get(x) - 0.7 * w).abs() < 1e-15);
        }
    }

    #[test]
    fn two_slices_nearest_neighbour_line() {
        // o→±1 each with q = p/2; x = 0 at t = 2 reached unless both routes fail
        let p = 0.8;
        let q = p / 2.0;
        let d = StepDistribution::nearest_neighbor(1).unwrap();
        let run = exact_op(&d, p, 2, 1e6).unwrap();
        let expect0 = 1.0 - (1.0 - q * q) * (1.0 - q * q);
        assert!((run.fields[2].get(&[0, 0, 0, 0]) - expect0).abs() < 1e-15);
        assert!((run.fields[2].get(&[2, 0, 0, 0]) - q * q).abs() < 1e-15);
    }

    #[test]
    fn zero_p_is_delta() {
        let d = crate::stepdist::build_kac_distribution(1, 0.5, 1.0, 20_000).unwrap();
        let cfg = OpConfig {
            p: 0.0,
            horizon: 3,
            n_trials: 100,
            seed: 1,
            n_batches: 4,
            active_budget: 10,
            orders: vec![0.2],
            field_box: Some(3),
        };
        let run = simulate_op(&d, &cfg).unwrap();
        assert_eq!(run.fields[0].get(&ORIGIN), 1.0);
        assert!(run.fields[1..].iter().all(|f| f.is_zero()));
    }
}
