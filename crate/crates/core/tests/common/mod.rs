//! Reference values computed independently of the library: quadrature of the
//! defining integrals and brute-force enumeration.

#![allow(dead_code)]

use std::f64::consts::PI;

use quadrature::double_exponential::integrate;
use statrs::function::gamma::ln_gamma;

/// `∫_a^b f` by tanh-sinh quadrature.
pub fn de(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    integrate(f, a, b, 1e-14).integral
}

/// `E|N(0, σ²)|^r` from the Gaussian density.
pub fn gaussian_abs_moment(sigma2: f64, r: f64) -> f64 {
    let s = sigma2.sqrt();
    let dens = |x: f64| (-x * x / (2.0 * sigma2)).exp() / (s * (2.0 * PI).sqrt());
    2.0 * (de(|x| x.powf(r) * dens(x), 0.0, 8.0 * s) + de(|x| x.powf(r) * dens(x), 8.0 * s, 40.0 * s))
}

/// `∫_1^∞ cos(u) u^{-s} du` via three integrations by parts and panel quadrature.
fn cos_tail(s: f64) -> f64 {
    let (s1, c1) = (1f64.sin(), 1f64.cos());
    // I_s = −sin 1 + s cos 1 − s(s+1) I_{s+2}
    let mut coef = vec![];
    let mut e = s;
    for _ in 0..3 {
        coef.push((-s1 + e * c1, -e * (e + 1.0)));
        e += 2.0;
    }
    let mut rest = 0.0;
    let mut a = 1.0;
    while a < 400.0 {
        rest += de(|u| u.cos() * u.powf(-e), a, a + PI);
        a += PI;
    }
    coef.iter().rev().fold(rest, |acc, (c, m)| c + m * acc)
}

/// `K_q = ∫_0^∞ (1 − cos u) u^{-1-q} du` by quadrature.
pub fn k_q_quadrature(q: f64) -> f64 {
    // u = w⁴ removes the u^{1−q} endpoint singularity for q ≤ 7/4
    let head = de(
        |w: f64| {
            let u = w.powi(4);
            let h = (0.5 * u).sin();
            8.0 * h * h * u.powf(-1.0 - q) * w.powi(3)
        },
        0.0,
        1.0,
    );
    head + 1.0 / q - cos_tail(1.0 + q)
}

/// Density at `x ≥ 0` of the symmetric stable law with characteristic function `exp(−|k|^α)`.
pub fn stable_density(alpha: f64, x: f64) -> f64 {
    let k_end = 40f64.powf(1.0 / alpha);
    let f = |k: f64| (k * x).cos() * (-k.powf(alpha)).exp();
    if x * k_end < 2.0 * PI {
        return de(f, 0.0, k_end) / PI;
    }
    let step = PI / x;
    let mut sum = 0.0;
    let mut a = 0.0;
    while a < k_end {
        sum += de(f, a, a + step);
        a += step;
    }
    sum / PI
}

/// Terms `(n, c_n)` of the large-x series `p(x) = Σ c_n x^{−nα−1}`, convergent for α ≤ 1 and x > 1.
fn bergstrom_terms(alpha: f64, n_max: usize) -> Vec<(f64, f64)> {
    (1..=n_max)
        .map(|n| {
            let nf = n as f64;
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            let mag = (ln_gamma(nf * alpha + 1.0) - ln_gamma(nf + 1.0)).exp();
            (nf, sign * mag * (nf * PI * alpha / 2.0).sin() / PI)
        })
        .collect()
}

/// `E|Y|^r` for `Y` with characteristic function `exp(−|k|^α)`, `0 < r < α < 2`,
/// from the density: quadrature on `[0, X]` and the large-x series beyond.
pub fn stable_abs_moment(alpha: f64, r: f64) -> f64 {
    let x_cut = if alpha < 1.0 { 2.0 } else { 20.0 };
    let mid = x_cut / 4.0;
    let body = de(|x| x.powf(r) * stable_density(alpha, x), 0.0, mid)
        + de(|x| x.powf(r) * stable_density(alpha, x), mid, x_cut);
    let mut tail = 0.0;
    let mut last = f64::INFINITY;
    for (n, c) in bergstrom_terms(alpha, if alpha < 1.0 { 400 } else { 12 }) {
        let term = c * x_cut.powf(r - n * alpha) / (n * alpha - r);
        if term.abs() < 1e-14 * last.min(1.0) {
            continue;
        }
        if alpha > 1.0 && term.abs() > last {
            // asymptotic series: stop at the smallest term
            break;
        }
        last = term.abs();
        tail += term;
    }
    2.0 * (body + tail)
}

/// `P((o,0) → (x,2))` for oriented percolation by summing over all bond configurations.
pub fn op_two_slices_brute(steps: &[(i64, f64)], p: f64) -> std::collections::BTreeMap<i64, f64> {
    let layer1: Vec<(i64, f64)> = steps.iter().map(|&(z, w)| (z, p * w)).collect();
    let mut layer2 = Vec::new();
    for &(u, _) in &layer1 {
        for &(z, w) in steps {
            layer2.push((u, u + z, p * w));
        }
    }
    let nb = layer1.len() + layer2.len();
    let mut out = std::collections::BTreeMap::new();
    for mask in 0u64..(1 << nb) {
        let mut prob = 1.0;
        for (i, &(_, q)) in layer1.iter().enumerate() {
            prob *= if mask >> i & 1 == 1 { q } else { 1.0 - q };
        }
        for (j, &(_, _, q)) in layer2.iter().enumerate() {
            prob *= if mask >> (layer1.len() + j) & 1 == 1 { q } else { 1.0 - q };
        }
        let open1: Vec<i64> = layer1
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &(z, _))| z)
            .collect();
        let mut reached: Vec<i64> = layer2
            .iter()
            .enumerate()
            .filter(|(j, &(u, _, _))| mask >> (layer1.len() + j) & 1 == 1 && open1.contains(&u))
            .map(|(_, &(_, y, _))| y)
            .collect();
        reached.sort_unstable();
        reached.dedup();
        for y in reached {
            *out.entry(y).or_insert(0.0) += prob;
        }
    }
    out
}

/// `Σ_k |t−2k| C(t,k) / 2^t`, the mean displacement of simple random walk on `Z`.
pub fn srw_mean_abs(t: u64) -> f64 {
    let mut c = 1f64;
    let mut s = 0.0;
    for k in 0..=t {
        s += (t as f64 - 2.0 * k as f64).abs() * c;
        c = c * (t - k) as f64 / (k + 1) as f64;
    }
    s / 2f64.powi(t as i32)
}

/// Print one acceptance line and return whether it passed.
pub fn report(id: u32, name: &str, pass: bool, detail: &str) -> bool {
    println!("criterion {id:>2} {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}
