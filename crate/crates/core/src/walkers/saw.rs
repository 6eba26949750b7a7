use crate::error::{invalid, Error, Result};
use crate::lattice::LatticeField;
use crate::sampling::StepSampler;
use crate::site::{self, Site, ORIGIN};
use crate::stepdist::StepDistribution;

use super::mc::run_batches;
use super::{EvolutionRun, Model, StepSummary};

/// Largest admissible estimated number of enumeration nodes.
pub const ENUMERATION_CAP: f64 = 1e9;

/// Upper bound `Σ_{t=1}^T s(s−1)^{t−1}` on enumeration nodes, `s` the number of nonzero steps.
pub fn enumeration_cost(dist: &StepDistribution, horizon: usize) -> Result<f64> {
    let s = dist
        .require_support()?
        .iter()
        .filter(|(x, _)| *x != ORIGIN)
        .count() as f64;
    Ok((1..=horizon).map(|t| s * (s - 1.0).max(1.0).powi(t as i32 - 1)).sum())
}

/// Exact `φ_t^{SAW}(x) = Σ_{ω: o→x self-avoiding, |ω|=t} Π D(ω_i − ω_{i−1})` for `t ≤ T`
/// by depth-first enumeration.
pub fn enumerate_saw(dist: &StepDistribution, horizon: usize) -> Result<EvolutionRun> {
    let cost = enumeration_cost(dist, horizon)?;
    if cost > ENUMERATION_CAP {
        return Err(Error::CostCap {
            what: format!("SAW enumeration to T={horizon}"),
            estimate: cost,
            cap: ENUMERATION_CAP,
        });
    }
    let steps: Vec<(Site, f64)> = dist
        .require_support()?
        .iter()
        .filter(|(x, _)| *x != ORIGIN)
        .copied()
        .collect();
    let d = dist.dim();
    let b = (horizon as i64 * dist.truncation_radius()).max(1);
    let mut fields = (0..=horizon)
        .map(|t| {
            let mut f = LatticeField::zeros(d, b)?;
            f.set_time_index(t);
            Ok(f)
        })
        .collect::<Result<Vec<_>>>()?;
    fields[0].set(&ORIGIN, 1.0)?;
    let mut path = Vec::with_capacity(horizon + 1);
    path.push(ORIGIN);
    if horizon > 0 {
        dfs(&steps, horizon, &mut path, 1.0, &mut fields);
    }
    Ok(EvolutionRun {
        model: Model::SawExact,
        step: StepSummary::of(dist),
        horizon,
        p: None,
        fields,
        series: Vec::new(),
        escaped: vec![0.0; horizon + 1],
        mc: None,
        loo_series: None,
    })
}

fn dfs(steps: &[(Site, f64)], horizon: usize, path: &mut Vec<Site>, weight: f64, fields: &mut [LatticeField]) {
    let t = path.len();
    let here = *path.last().expect("nonempty path");
    for (z, w) in steps {
        let x = site::add(&here, z);
        if path.contains(&x) {
            continue;
        }
        let wx = weight * w;
        fields[t].add(&x, wx).expect("box holds every walk");
        if t < horizon {
            path.push(x);
            dfs(steps, horizon, path, wx, fields);
            path.pop();
        }
    }
}

/// Number `c_t` of nearest-neighbour self-avoiding walks of each length `t = 0..=T` on `Z^d`.
pub fn count_saws(d: usize, horizon: usize) -> Result<Vec<u64>> {
    if !(1..=4).contains(&d) {
        return invalid(format!("d must be in 1..=4, got {d}"));
    }
    let cost = (2 * d) as f64 * ((2 * d - 1) as f64).powi(horizon as i32 - 1);
    if cost > ENUMERATION_CAP {
        return Err(Error::CostCap {
            what: format!("SAW count to T={horizon}"),
            estimate: cost,
            cap: ENUMERATION_CAP,
        });
    }
    let mut steps = Vec::with_capacity(2 * d);
    for i in 0..d {
        for s in [1, -1] {
            let mut z = ORIGIN;
            z[i] = s;
            steps.push(z);
        }
    }
    fn walk(steps: &[Site], horizon: usize, path: &mut Vec<Site>, counts: &mut [u64]) {
        let here = *path.last().expect("nonempty path");
        for z in steps {
            let x = site::add(&here, z);
            if path.contains(&x) {
                continue;
            }
            counts[path.len()] += 1;
            if path.len() < horizon {
                path.push(x);
                walk(steps, horizon, path, counts);
                path.pop();
            }
        }
    }
    let mut counts = vec![0u64; horizon + 1];
    counts[0] = 1;
    if horizon > 0 {
        walk(&steps, horizon, &mut vec![ORIGIN], &mut counts);
    }
    Ok(counts)
}

/// Ratio-method connective constant: `μ_t = (c_t / c_{t−2})^{1/2}` extrapolated
/// linearly in `1/t` over the last six values.
pub fn connective_constant(counts: &[u64]) -> Result<f64> {
    if counts.len() < 9 || counts.iter().any(|&c| c == 0) {
        return invalid("need positive counts up to t >= 8");
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = (counts.len() - 6..counts.len())
        .map(|t| (1.0 / t as f64, (counts[t] as f64 / counts[t - 2] as f64).sqrt()))
        .unzip();
    let fit = crate::numerics::fit_line(&xs, &ys).ok_or_else(|| Error::Degenerate("ratio fit".into()))?;
    Ok(fit.intercept)
}

#[derive(Debug, Clone)]
pub struct SawMcConfig {
    pub horizon: usize,
    pub n_trials: u64,
    pub seed: u64,
    pub n_batches: usize,
    pub orders: Vec<f64>,
    /// Record empirical fields on `[-B, B]^d` when set.
    pub field_box: Option<i64>,
}

/// Simple-sampling SAW Monte Carlo: walks are drawn from `D` and stopped at their first
/// self-intersection, so `φ̂_t(x)` is the fraction of trials self-avoiding to `t` and ending at `x`.
pub fn sample_saw_mc(dist: &StepDistribution, cfg: &SawMcConfig) -> Result<EvolutionRun> {
    if cfg.n_trials < 1000 {
        return invalid(format!("n_trials must be at least 1000, got {}", cfg.n_trials));
    }
    let sampler = StepSampler::new(dist)?;
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
            let mut path: Vec<Site> = Vec::with_capacity(horizon + 1);
            path.push(ORIGIN);
            acc.observe(0, &ORIGIN);
            acc.alive[0] += 1;
            for t in 1..=horizon {
                let x = site::add(path.last().expect("nonempty"), &sampler.sample(rng));
                if path.contains(&x) {
                    break;
                }
                path.push(x);
                acc.observe(t, &x);
                acc.alive[t] += 1;
            }
            Ok(())
        },
    )?;
    Ok(EvolutionRun {
        model: Model::SawMc,
        step: StepSummary::of(dist),
        horizon,
        p: None,
        fields: out.fields,
        series: out.series,
        escaped: out.escaped,
        mc: Some(out.meta),
        loo_series: Some(out.loo_series),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dim_two_steps() {
        let d = StepDistribution::nearest_neighbor(1).unwrap();
        let run = enumerate_saw(&d, 2).unwrap();
        assert_eq!(run.fields[2].total(), 0.5);
        assert_eq!(run.fields[2].get(&[0, 0, 0, 0]), 0.0);
    }

    #[test]
    fn square_lattice_small_t() {
        let d = StepDistribution::nearest_neighbor(2).unwrap();
        let run = enumerate_saw(&d, 3).unwrap();
        assert_eq!(run.fields[1].nonzero(), d.support().unwrap().to_vec());
        let totals: Vec<f64> = run.totals().iter().map(|(_, v)| *v).collect();
        assert_eq!(totals, vec![1.0, 1.0, 0.75, 36.0 / 64.0]);
    }

    #[test]
    fn square_lattice_counts() {
        let c = count_saws(2, 10).unwrap();
        assert_eq!(c, vec![1, 4, 12, 36, 100, 284, 780, 2172, 5916, 16268, 44100]);
        let mu = connective_constant(&c).unwrap();
        assert!((mu - 2.638).abs() < 0.02, "{mu}");
    }

    #[test]
    fn cost_cap_refuses() {
        let d = StepDistribution::nearest_neighbor(3).unwrap();
        assert!(matches!(enumerate_saw(&d, 14), Err(Error::CostCap { .. })));
    }

    #[test]
    fn mc_needs_enough_trials() {
        let d = StepDistribution::nearest_neighbor(1).unwrap();
        let cfg = SawMcConfig {
            horizon: 2,
            n_trials: 10,
            seed: 1,
            n_batches: 2,
            orders: vec![],
            field_box: None,
        };
        assert!(sample_saw_mc(&d, &cfg).is_err());
    }
}
