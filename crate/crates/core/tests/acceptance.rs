//! Acceptance criteria 1–12. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; exits nonzero if any criterion fails.
//!
//! `cargo test --test acceptance -- 3 7` runs only criteria 3 and 7.

mod common;

use std::f64::consts::PI;
use std::fs;
use std::process::Command;
use std::time::Instant;

use gyration::analysis::{compare_to_theory, fit_run, Fitter, Thresholds};
use gyration::lace::{diagram_bound_check, estimate_c_alpha, estimate_mc, invert_lace_saw, round_trip_error, LaceSeries};
use gyration::lattice::{absolute_moment, fractional_moment_via_integral, AxisMode};
use gyration::site::ORIGIN;
use gyration::stepdist::{build_kac_distribution, fit_small_k_asymptotics, log_grid, KacStorage, StepDistribution};
use gyration::theory::{k_q, predict_moment_ratio, universal_amplitude, TheoryPrediction};
use gyration::walkers::{
    connective_constant, count_saws, enumerate_saw, evolve_rw, evolve_rw_with, sample_saw_mc, simulate_op, OpConfig,
    RwOptions, SawMcConfig,
};

/// Fixed before any Monte Carlo criterion was run.
const SEED: u64 = 20261014;

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn c1() -> (bool, String) {
    let (v, t): (f64, f64) = (0.7, 3.0);
    let mut worst: f64 = 0.0;
    for r in [0.5, 1.0, 1.5, 2.0, 2.9] {
        let a = universal_amplitude(r, 3.0).unwrap() * (v * t).powf(r / 2.0);
        worst = worst.max(rel(a, common::gaussian_abs_moment(2.0 * v * t, r)));
    }
    (worst < 1e-10, format!("max rel dev {worst:.2e} (tol 1e-10)"))
}

fn c2() -> (bool, String) {
    let vt: f64 = 1.7;
    let mut worst: f64 = 0.0;
    for alpha in [0.5, 0.8, 1.5] {
        for r in [alpha / 4.0, alpha / 2.0, 3.0 * alpha / 4.0] {
            let a = universal_amplitude(r, alpha).unwrap() * vt.powf(r / alpha);
            let oracle = vt.powf(r / alpha) * common::stable_abs_moment(alpha, r);
            worst = worst.max(rel(a, oracle));
        }
    }
    (worst < 1e-6, format!("max rel dev {worst:.2e} (tol 1e-6)"))
}

fn c3() -> (bool, String) {
    let mut worst: f64 = 0.0;
    for q in [0.25, 0.5, 1.0, 1.5, 1.75] {
        worst = worst.max(rel(k_q(q).unwrap(), common::k_q_quadrature(q)));
    }
    let k1 = (k_q(1.0).unwrap() - PI / 2.0).abs();
    (
        worst < 1e-8 && k1 < 1e-12,
        format!("max rel dev {worst:.2e} (tol 1e-8); |K_1 - pi/2| = {k1:.1e} (tol 1e-12)"),
    )
}

fn c4() -> (bool, String) {
    let dist = StepDistribution::nearest_neighbor(1).unwrap();
    let mut run = evolve_rw(&dist, 50, 50).unwrap();
    run.ensure_series(&[2.0, 4.0]).unwrap();
    let s2 = run.series_for(2.0, AxisMode::FirstCoordinate).unwrap();
    let s4 = run.series_for(4.0, AxisMode::FirstCoordinate).unwrap();
    let pred = TheoryPrediction::new(2.0, f64::INFINITY, 1.0, 0.5).unwrap();
    let (mut e2, mut e4, mut ep): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (a, b) in s2.entries.iter().zip(&s4.entries).filter(|(a, _)| a.t >= 1) {
        let t = a.t as f64;
        e2 = e2.max((a.ratio - t).abs());
        e4 = e4.max((b.ratio - (3.0 * t * t - 2.0 * t)).abs());
        ep = ep.max((a.ratio - predict_moment_ratio(&pred, a.t as u64).unwrap()).abs());
    }
    let amp = (pred.amplitude - 2.0).abs();
    let ok = e2 < 1e-9 && e4 < 1e-9 && ep < 1e-9 && amp < 1e-9;
    (
        ok,
        format!("max |ratio2 - t| {e2:.1e}, max |ratio4 - (3t^2-2t)| {e4:.1e}, max |ratio2 - prediction| {ep:.1e}, |A(2) - 2| {amp:.1e} (tol 1e-9)"),
    )
}

fn c5() -> (bool, String) {
    let r_trunc = 1_000_000;
    let dist = StepDistribution::kac(1, 0.8, 1.0, r_trunc, KacStorage::Auto).unwrap();
    let profile = fit_small_k_asymptotics(&dist, &log_grid(1e-3, 1e-1, 20)).unwrap();
    let mut opts = RwOptions::new(2 * r_trunc);
    opts.keep_fields = false;
    opts.orders = vec![0.4];
    let run = evolve_rw_with(&dist, 200, &opts).unwrap();
    let fit = fit_run(&run, 0.4, AxisMode::FirstCoordinate, (50, 200), Fitter::PowerLaw).unwrap();
    let pred = TheoryPrediction::new(0.4, 0.8, 1.0, profile.fitted_v).unwrap();
    let cmp = compare_to_theory(&fit, &pred, Thresholds::default()).unwrap();
    let ok = cmp.rel_dev_exponent.abs() < 0.05 && cmp.rel_dev_amplitude.abs() < 0.05;
    (
        ok,
        format!(
            "theta {:.4} vs 0.5 (dev {:+.2}%), amplitude dev {:+.2}% with v = {:.4}; max escaped {:.1e} (tol 5%)",
            cmp.theta_hat,
            100.0 * cmp.rel_dev_exponent,
            100.0 * cmp.rel_dev_amplitude,
            profile.fitted_v,
            run.escaped.iter().cloned().fold(0.0, f64::max)
        ),
    )
}

fn c6() -> (bool, String) {
    let r_trunc = 100_000;
    let dist = build_kac_distribution(1, 2.0, 1.0, r_trunc).unwrap();
    let mut opts = RwOptions::new(2 * r_trunc);
    opts.keep_fields = false;
    opts.orders = vec![1.0];
    let run = evolve_rw_with(&dist, 400, &opts).unwrap();
    let fit = |w, f| fit_run(&run, 1.0, AxisMode::FirstCoordinate, w, f).unwrap();
    let log_fit = fit((100, 400), Fitter::LogCorrected);
    let pow_fit = fit((100, 400), Fitter::Fixed(0.5));
    let (lo, hi) = (fit((100, 200), Fitter::LogCorrected), fit((200, 400), Fitter::LogCorrected));
    let drift = rel(lo.amplitude, hi.amplitude);
    let ok = log_fit.residual_rms < pow_fit.residual_rms && drift < 0.2;
    (
        ok,
        format!(
            "residual log-corrected {:.4} vs power t^(1/2) {:.4} on [100,400]; amplitude {:.4} on [100,200] vs {:.4} on [200,400] (drift {:.1}%, tol 20%)",
            log_fit.residual_rms,
            pow_fit.residual_rms,
            lo.amplitude,
            hi.amplitude,
            100.0 * drift
        ),
    )
}

fn c7() -> (bool, String) {
    let fields = {
        let kac = build_kac_distribution(1, 1.5, 1.0, 10).unwrap();
        let nn = StepDistribution::nearest_neighbor(2).unwrap();
        let a = evolve_rw(&kac, 50, 500).unwrap();
        let b = evolve_rw(&nn, 50, 50).unwrap();
        vec![a.fields[10].clone(), a.fields[50].clone(), b.fields[10].clone(), b.fields[50].clone()]
    };
    let mut worst: f64 = 0.0;
    for f in &fields {
        for q in [0.4, 1.0, 1.5] {
            let (direct, _) = absolute_moment(f, q).unwrap();
            let via = fractional_moment_via_integral(f, q, 64.0, 200).unwrap();
            worst = worst.max(rel(via.value, direct));
        }
    }
    (worst < 1e-6, format!("max rel dev {worst:.2e} over 4 fields x 3 orders (tol 1e-6)"))
}

fn c8() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (d, t) in [(1usize, 10usize), (2, 14)] {
        let dist = StepDistribution::nearest_neighbor(d).unwrap();
        let run = enumerate_saw(&dist, t).unwrap();
        let series = invert_lace_saw(&run, &dist).unwrap();
        let rt = round_trip_error(&series).unwrap();
        let pi2 = series.pi[2].get(&ORIGIN);
        let pi2_ok = pi2 == -1.0 / (2 * d) as f64 && series.pi[2].count_nonzero() == 1;
        let mut bounds = Vec::new();
        for s in 2..=4 {
            let b = diagram_bound_check(&series, s).unwrap();
            ok &= b.holds;
            bounds.push(format!(
                "t={s} {} (pi(o) {:.4}, bound(o) {:.4})",
                if b.holds { "holds" } else { "VIOLATED" },
                b.pi_origin,
                b.bound_origin
            ));
        }
        ok &= rt < 1e-12 && pi2_ok;
        parts.push(format!("d={d} T={t}: round trip {rt:.1e}, pi_2(o) = {pi2}, bounds {}", bounds.join(", ")));
    }
    (ok, parts.join("; "))
}

fn c9() -> (bool, String) {
    let dist = StepDistribution::nearest_neighbor(2).unwrap();
    let run = enumerate_saw(&dist, 14).unwrap();
    let totals = run.totals();
    let m_c = estimate_mc(&totals).unwrap().m_c;
    let mu = connective_constant(&count_saws(2, 14).unwrap()).unwrap();
    let m_dev = m_c / (4.0 / mu) - 1.0;
    let series = invert_lace_saw(&run, &dist).unwrap();
    let c14 = estimate_c_alpha(&series, m_c, 0.1, 8).unwrap();
    let short = enumerate_saw(&dist, 12).unwrap();
    let m12 = estimate_mc(&short.totals()).unwrap().m_c;
    let c12 = estimate_c_alpha(&invert_lace_saw(&short, &dist).unwrap(), m12, 0.1, 8).unwrap();
    let c_dev = c14.c_alpha / c12.c_alpha - 1.0;
    let rw = LaceSeries::random_walk(&dist, 14).unwrap();
    let c_rw = estimate_c_alpha(&rw, 1.0, 0.1, 8).unwrap().c_alpha;
    // stability alone is not enough: a usable C is near 1 for nearest-neighbour steps
    let c_in_range = c14.c_alpha > 0.5 && c14.c_alpha < 1.5;
    let ok = m_dev.abs() < 0.01 && c_dev.abs() < 0.05 && c_in_range && (c_rw - 1.0).abs() <= 4.0 * f64::EPSILON;
    (
        ok,
        format!(
            "m_c {m_c:.5} vs 4/mu {:.5} (mu {mu:.5}, dev {:+.3}%, tol 1%); C(T=14) {:.4} vs C(T=12) {:.4} (dev {:+.1}%, tol 5%; range (0.5, 1.5); divergence flag {}); C(RW) - 1 = {:.1e}",
            4.0 / mu,
            100.0 * m_dev,
            c14.c_alpha,
            c12.c_alpha,
            100.0 * c_dev,
            c14.divergent,
            c_rw - 1.0
        ),
    )
}

fn c10() -> (bool, String) {
    let r = 0.2;
    let dist = StepDistribution::kac(2, 0.5, 1.0, 1_000_000_000, KacStorage::Analytic).unwrap();
    let cfg = OpConfig {
        p: 1.0,
        horizon: 100,
        n_trials: 100_000,
        seed: SEED,
        n_batches: 20,
        active_budget: 1_000_000,
        orders: vec![r],
        field_box: None,
    };
    let run = simulate_op(&dist, &cfg).unwrap();
    let fit = fit_run(&run, r, AxisMode::FirstCoordinate, (10, 100), Fitter::PowerLaw).unwrap();
    let xi = fit.exponent / r;
    let se = fit.jackknife_exponent_se.unwrap() / r;
    let dev = xi / 2.0 - 1.0;
    let meta = run.mc.as_ref().unwrap();
    (
        dev.abs() < 0.15,
        format!(
            "xi exponent {xi:.3} +/- {se:.3} (jackknife) vs 1/alpha = 2 (dev {:+.1}%, tol 15%); survivors at T {} of {}",
            100.0 * dev,
            meta.alive[100],
            meta.n_trials
        ),
    )
}

fn c11() -> (bool, String) {
    let dist = StepDistribution::nearest_neighbor(2).unwrap();
    let mut exact = enumerate_saw(&dist, 8).unwrap();
    exact.ensure_series(&[1.0, 2.0]).unwrap();
    let cfg = SawMcConfig {
        horizon: 8,
        n_trials: 1_000_000,
        seed: SEED,
        n_batches: 20,
        orders: vec![1.0, 2.0],
        field_box: None,
    };
    let mc = sample_saw_mc(&dist, &cfg).unwrap();
    let mut worst: f64 = 0.0;
    for r in [1.0, 2.0] {
        let e = exact.series_for(r, AxisMode::FirstCoordinate).unwrap();
        let m = mc.series_for(r, AxisMode::FirstCoordinate).unwrap();
        for t in 1..=8 {
            let a = e.entries.iter().find(|x| x.t == t).unwrap();
            let b = m.entries.iter().find(|x| x.t == t).unwrap();
            worst = worst.max((b.ratio - a.ratio).abs() / b.ratio_se.unwrap());
        }
    }
    (worst < 3.0, format!("max |MC - exact| / s.e. = {worst:.2} over r in {{1,2}}, t = 1..8 (tol 3)"))
}

fn c12() -> (bool, String) {
    let dir = tempfile::TempDir::new().unwrap();
    let mut ok = true;
    let mut compared = 0;
    let configs = [
        ("op", r#"{"model": "op-mc", "d": 1, "alpha": 0.5, "R": 10000, "p": 0.8, "T": 30, "n_trials": 20000, "r": [0.2], "seed": 7, "field_box": 50}"#),
        ("saw", r#"{"model": "saw-mc", "d": 2, "alpha": 1.0, "R": 20, "T": 15, "n_trials": 20000, "r": [0.5], "seed": 7}"#),
    ];
    for (sub, cfg) in configs {
        let path = dir.path().join(format!("{sub}.json"));
        fs::write(&path, cfg).unwrap();
        let outs: Vec<_> = ["a", "b"]
            .iter()
            .map(|tag| {
                let out = dir.path().join(format!("{sub}-{tag}"));
                let status = Command::new(env!("CARGO_BIN_EXE_gyration"))
                    .args([sub, "--config"])
                    .arg(&path)
                    .arg("--out")
                    .arg(&out)
                    .status()
                    .unwrap();
                ok &= status.success();
                out
            })
            .collect();
        for entry in walk(&outs[0]) {
            let rel_path = entry.strip_prefix(&outs[0]).unwrap();
            ok &= fs::read(&entry).ok() == fs::read(outs[1].join(rel_path)).ok();
            compared += 1;
        }
    }
    (ok && compared > 0, format!("{compared} output files compared across two reruns of op and saw Monte Carlo"))
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

type Criterion = fn() -> (bool, String);

fn main() {
    let criteria: [(u32, &str, Criterion); 12] = [
        (1, "amplitude vs Gaussian moments", c1),
        (2, "amplitude vs stable moments", c2),
        (3, "K_q closed form vs quadrature", c3),
        (4, "nearest-neighbour even moments", c4),
        (5, "long-range RW exponent and amplitude", c5),
        (6, "alpha = 2 log correction", c6),
        (7, "fractional-moment integral vs direct sum", c7),
        (8, "lace round trip, pi_2 and diagram bounds", c8),
        (9, "m_c and C for SAW", c9),
        (10, "OP scaling above the critical dimension", c10),
        (11, "SAW Monte Carlo vs enumeration", c11),
        (12, "Monte Carlo determinism", c12),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, run) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = run();
        let detail = format!("{detail} [{:.1}s]", start.elapsed().as_secs_f64());
        if !common::report(id, name, pass, &detail) {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
