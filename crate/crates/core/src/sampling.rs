//! Exact random sampling from a step law: single steps (`x ~ D`) for walks and
//! independent bond sets (`x` occupied with probability `p·D(x)`) for
//! oriented percolation.
//!
//! Kac kernels are sampled without touching the normalization: a sup-norm
//! shell is drawn from its unnormalized weight (alias table near the origin,
//! Pareto envelope with rejection beyond), then a uniform point of the shell
//! is accepted with probability `h(x/L)/h(a/L)`.

use rand::seq::index;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Binomial, Distribution, Exp1};

use crate::error::{invalid, Error, Result};
use crate::site::{self, Site};
use crate::stepdist::{kac_profile, StepDistribution};

/// Shells up to this radius are drawn from an alias table.
const HEAD_RADIUS: i64 = 1024;

/// Tables with at most this many support points use per-site Bernoulli trials.
pub const DIRECT_BOND_LIMIT: usize = 10_000;

#[derive(Debug, Clone)]
struct KacSampler {
    d: usize,
    exponent: f64,
    alpha: f64,
    scale: f64,
    radius: i64,
    head: WeightedAliasIndex<f64>,
    head_mass: f64,
    tail_mass: f64,
    /// Envelope `envelope_k · y^{-1-α}` dominating shell weights on `[a, a+1)` for `a > head_max`.
    envelope_k: f64,
    tail_lo: f64,
    tail_hi: f64,
}

impl KacSampler {
    fn new(dist: &StepDistribution) -> Result<Self> {
        let d = dist.dim();
        let alpha = dist.alpha();
        let exponent = d as f64 + alpha;
        let scale = dist.scale();
        let radius = dist.truncation_radius();
        let head_max = radius.min(HEAD_RADIUS.max((4.0 * scale).ceil() as i64));
        let shell_weight = |a: i64| site::shell_count(a, d) as f64 * kac_profile(a as f64 / scale, exponent);
        let weights: Vec<f64> = (0..=head_max).map(shell_weight).collect();
        let head_mass = weights.iter().sum();
        let head = WeightedAliasIndex::new(weights)
            .map_err(|e| Error::Invariant(format!("alias table: {e}")))?;
        let m = (head_max + 1) as f64;
        let envelope_k = 2.0
            * d as f64
            * 2f64.powi(d as i32 - 1)
            * (1.0 + 0.5 / m).powi(d as i32 - 1)
            * (1.0 - 1.0 / m).powf(-exponent)
            * scale.powf(exponent);
        let (tail_lo, tail_hi) = (m.powf(-alpha), (radius as f64 + 1.0).powf(-alpha));
        let tail_mass = if radius > head_max {
            envelope_k / alpha * (tail_lo - tail_hi)
        } else {
            0.0
        };
        Ok(KacSampler {
            d,
            exponent,
            alpha,
            scale,
            radius,
            head,
            head_mass,
            tail_mass,
            envelope_k,
            tail_lo,
            tail_hi,
        })
    }

    fn shell_max(&self, a: i64) -> f64 {
        kac_profile(a as f64 / self.scale, self.exponent)
    }

    fn sample_shell<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let total = self.head_mass + self.tail_mass;
        loop {
            if rng.random::<f64>() * total < self.head_mass {
                return self.head.sample(rng) as i64;
            }
            let u: f64 = rng.random();
            let y = (self.tail_lo - u * (self.tail_lo - self.tail_hi)).powf(-1.0 / self.alpha);
            let a = y.floor() as i64;
            if a > self.radius || a < 1 {
                continue;
            }
            let w = site::shell_count(a, self.d) as f64 * self.shell_max(a);
            let env = self.envelope_k * y.powf(-1.0 - self.alpha);
            if rng.random::<f64>() * env < w {
                return a;
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Site {
        loop {
            let a = self.sample_shell(rng);
            let n = site::shell_count(a, self.d);
            let x = site::shell_point(a, self.d, rng.random_range(0..n));
            if self.d == 1 || a == 0 {
                return x;
            }
            let accept = kac_profile(site::euclidean(&x) / self.scale, self.exponent) / self.shell_max(a);
            if rng.random::<f64>() < accept {
                return x;
            }
        }
    }
}

#[derive(Debug, Clone)]
enum StepInner {
    Alias {
        points: Vec<Site>,
        alias: WeightedAliasIndex<f64>,
    },
    Kac(KacSampler),
}

/// Draws i.i.d. steps from `D`.
#[derive(Debug, Clone)]
pub struct StepSampler {
    inner: StepInner,
}

impl StepSampler {
    pub fn new(dist: &StepDistribution) -> Result<Self> {
        let inner = if dist.is_kac() {
            StepInner::Kac(KacSampler::new(dist)?)
        } else {
            let sup = dist.require_support()?;
            let alias = WeightedAliasIndex::new(sup.iter().map(|(_, w)| *w).collect())
                .map_err(|e| Error::Invariant(format!("alias table: {e}")))?;
            StepInner::Alias {
                points: sup.iter().map(|(x, _)| *x).collect(),
                alias,
            }
        };
        Ok(StepSampler { inner })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Site {
        match &self.inner {
            StepInner::Alias { points, alias } => points[alias.sample(rng)],
            StepInner::Kac(k) => k.sample(rng),
        }
    }
}

#[derive(Debug, Clone)]
struct Block {
    a_lo: i64,
    count: u64,
    /// Upper bound of `p·D` over the block.
    q: f64,
    /// `-N ln(1 - q)`: the block holds no candidate with probability `exp(-hazard)`.
    hazard: f64,
}

#[derive(Debug, Clone)]
enum BondInner {
    Direct(Vec<(Site, f64)>),
    Blocks(Vec<Block>),
}

/// Samples the set of occupied bonds out of one site: each `x` independently
/// with probability `p·D(x)`.
#[derive(Debug, Clone)]
pub struct BondSampler<'a> {
    p: f64,
    d: usize,
    dist: &'a StepDistribution,
    inner: BondInner,
}

fn block_bounds(radius: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    let mut lo = 0;
    while lo <= radius {
        let hi = if lo < 9 { lo + 1 } else { ((lo as f64 * 1.25).ceil() as i64).max(lo + 1) };
        let hi = hi.min(radius + 1);
        out.push((lo, hi));
        lo = hi;
    }
    out
}

impl<'a> BondSampler<'a> {
    pub fn new(dist: &'a StepDistribution, p: f64) -> Result<Self> {
        if !(p >= 0.0) || !p.is_finite() {
            return invalid(format!("bond parameter p must be >= 0, got {p}"));
        }
        let d = dist.dim();
        let max_w = match dist.support() {
            Some(sup) => sup.iter().map(|(_, w)| *w).fold(0.0, f64::max),
            None => dist.weight(&site::ORIGIN),
        };
        if p * max_w > 1.0 {
            return invalid(format!("p·max D = {} exceeds 1", p * max_w));
        }
        if let Some(sup) = dist.support() {
            if sup.len() <= DIRECT_BOND_LIMIT {
                let direct = sup.iter().map(|(x, w)| (*x, p * w)).collect();
                return Ok(BondSampler { p, d, dist, inner: BondInner::Direct(direct) });
            }
        }
        let bounds = block_bounds(dist.truncation_radius());
        let mut maxima = vec![0.0f64; bounds.len()];
        match dist.support() {
            Some(sup) if !dist.is_kac() => {
                for (x, w) in sup {
                    let a = site::sup_norm(x);
                    let k = bounds.partition_point(|&(_, hi)| hi <= a);
                    maxima[k] = maxima[k].max(*w);
                }
            }
            _ => {
                // Kac weights decrease in |x|; the axis point of the inner shell is the block maximum.
                for (k, &(lo, _)) in bounds.iter().enumerate() {
                    maxima[k] = dist.weight(&site::site_from_slice(&[lo]));
                }
            }
        }
        let blocks = bounds
            .iter()
            .zip(&maxima)
            .map(|(&(lo, hi), &m)| {
                let count = site::cube_count(hi - 1, d) - site::cube_count(lo - 1, d);
                let q = (p * m).min(1.0);
                let hazard = if q >= 1.0 { f64::INFINITY } else { -(count as f64) * (-q).ln_1p() };
                Block { a_lo: lo, count: count as u64, q, hazard }
            })
            .collect();
        Ok(BondSampler { p, d, dist, inner: BondInner::Blocks(blocks) })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Appends `u + x` for every occupied bond `x` out of `u`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, u: &Site, out: &mut Vec<Site>) {
        match &self.inner {
            BondInner::Direct(list) => {
                for (x, pw) in list {
                    if rng.random::<f64>() < *pw {
                        out.push(site::add(u, x));
                    }
                }
            }
            BondInner::Blocks(blocks) => {
                let mut e: f64 = Exp1.sample(rng);
                for b in blocks {
                    if b.hazard == 0.0 {
                        continue;
                    }
                    if e >= b.hazard {
                        e -= b.hazard;
                        continue;
                    }
                    let m = truncated_binomial(rng, b.count, b.q);
                    for idx in index::sample(rng, b.count as usize, m as usize) {
                        let x = site::block_point(b.a_lo, self.d, idx as u128);
                        if rng.random::<f64>() * b.q < self.p * self.dist.weight(&x) {
                            out.push(site::add(u, &x));
                        }
                    }
                    e = Exp1.sample(rng);
                }
            }
        }
    }
}

/// `Binomial(n, q)` conditioned on being at least 1.
fn truncated_binomial<R: Rng + ?Sized>(rng: &mut R, n: u64, q: f64) -> u64 {
    if q >= 1.0 {
        return n;
    }
    let nf = n as f64;
    if nf * q > 5.0 {
        let bin = Binomial::new(n, q).expect("valid binomial");
        loop {
            let m = bin.sample(rng);
            if m >= 1 {
                return m;
            }
        }
    }
    let log_keep = (-q).ln_1p();
    let p_any = -(nf * log_keep).exp_m1();
    let mut prob = nf * q * ((nf - 1.0) * log_keep).exp() / p_any;
    let u: f64 = rng.random();
    let mut cum = prob;
    let mut k = 1u64;
    while u > cum && k < n && prob > 0.0 {
        prob *= (nf - k as f64) / (k as f64 + 1.0) * q / (1.0 - q);
        k += 1;
        cum += prob;
    }
    k
}
