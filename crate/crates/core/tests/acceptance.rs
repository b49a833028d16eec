//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `cargo test --test acceptance -- --nocapture` to see them).
//!
//! Criteria 1 and 2 calibrate the closed form against Monte Carlo on the
//! reference scenario; 3 demonstrates the sharpness≈1 regime change; 4 the
//! short-term low-pass structure; 5 and 6 pin the optimizer against exact
//! references; 7 and 8 validate the network realizations; 9 sweeps the
//! cross-module invariants (the full property harness also lives in the
//! per-module unit tests and tests/invariants.rs).

use mixdelay::adversary::{mc_mse, McOptions};
use mixdelay::characteristic::{
    validate, ConstraintSet, DelayCharacteristic, Gamma2Mode,
};
use mixdelay::design::{
    design_long_term, design_short_term, min_gamma1_closed, optimize_filter, DesignObjective,
    OptimizerOptions, SharpRegime,
};
use mixdelay::network::{
    cascade, decompose_cascade, exponential_mix, simulate_decentralized, tv_distance,
    DecomposeOptions, TailMode,
};
use mixdelay::oracle;
use mixdelay::theory::{
    closed_form_mse, objective_sharp0, objective_shortterm, passband_bins, stopband_bins,
};
use mixdelay::traffic::gen_zipf_profile;

fn report(criterion: u32, ok: bool, details: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("CRITERION {criterion}: {verdict} — {details}");
    assert!(ok, "criterion {criterion} failed: {details}");
}

/// The reference scenario for criteria 1 and 2: ten senders, ten receivers,
/// five messages per round each, ten Zipf friends (sharpness ≈ 0.18).
struct Reference {
    profile: mixdelay::traffic::SendingProfile,
    rates: Vec<f64>,
    q: Vec<f64>,
    rho: usize,
    trials: usize,
}

fn reference_scenario() -> Reference {
    let profile = gen_zipf_profile(10, 10, 10, 1.0, 20_240).unwrap();
    let q = profile.sharpness();
    Reference {
        profile,
        rates: vec![5.0; 10],
        q,
        rho: 2000,
        trials: 200,
    }
}

#[test]
fn criterion_1_closed_form_matches_monte_carlo() {
    let started = std::time::Instant::now();
    let sc = reference_scenario();
    let filter = DelayCharacteristic::uniform(4);

    let mc = mc_mse(
        &sc.profile,
        &sc.rates,
        &filter,
        sc.rho,
        sc.trials,
        1,
        &McOptions::default(),
    )
    .unwrap();
    let cf_default = closed_form_mse(&sc.rates, &sc.q, &filter, sc.rho, Gamma2Mode::NonNegativeLags)
        .unwrap()
        .mse_total;
    let cf_all_lags = closed_form_mse(&sc.rates, &sc.q, &filter, sc.rho, Gamma2Mode::AllLags)
        .unwrap()
        .mse_total;
    let gap_default = (mc.mean - cf_default).abs() / cf_default;
    let gap_all_lags = (mc.mean - cf_all_lags).abs() / cf_all_lags;
    let elapsed = started.elapsed().as_secs_f64();

    report(
        1,
        gap_default <= 0.15 && elapsed <= 120.0,
        &format!(
            "mc={:.4}±{:.4}, closed-form={:.4} (γ2 non-negative-lags, rate² weighting), \
             rel gap {:.3} ≤ 0.15; all-lag variant {:.4} (gap {:.3}); {elapsed:.1}s ≤ 120s",
            mc.mean, mc.std_error, cf_default, gap_default, cf_all_lags, gap_all_lags
        ),
    );
}

#[test]
fn criterion_2_mse_scales_with_inverse_gamma1() {
    let sc = reference_scenario();
    let filters = [
        DelayCharacteristic::delta(),
        DelayCharacteristic::uniform(2),
        DelayCharacteristic::uniform(4),
        DelayCharacteristic::uniform(8),
    ];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut rows = String::new();
    for f in &filters {
        let mc = mc_mse(
            &sc.profile,
            &sc.rates,
            f,
            sc.rho,
            sc.trials,
            2,
            &McOptions::default(),
        )
        .unwrap();
        let gamma1 = f.gamma_stats(Gamma2Mode::NonNegativeLags).gamma1;
        xs.push((1.0 / gamma1).ln());
        ys.push(mc.mean.ln());
        rows.push_str(&format!(" L={}: mse={:.3};", f.len(), mc.mean));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let slope = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();

    report(
        2,
        (0.85..=1.15).contains(&slope),
        &format!("log-log slope of mse vs 1/γ1 = {slope:.4} in [0.85, 1.15];{rows}"),
    );
}

#[test]
fn criterion_3_sharp_regime_changes_the_solution() {
    // Filters designed over the constraint set (ρ=64, d̄=8); the separation
    // claim is the long-term scenario, so the gate observes 1024 rounds
    // (support/horizon ≈ 0.06). The pre-asymptotic 64-round observation is
    // printed as a diagnostic: there the ordering genuinely reverses.
    let c = ConstraintSet::new(64, 8.0).unwrap();
    let opts = OptimizerOptions {
        seed: 7,
        ..OptimizerOptions::default()
    };
    let near0 = design_long_term(SharpRegime::Near0, &c, &opts).unwrap();
    let near1 = design_long_term(SharpRegime::Near1, &c, &opts).unwrap();

    let profile = gen_zipf_profile(10, 10, 1, 1.0, 42).unwrap();
    assert!(profile.sharpness().iter().all(|q| *q == 1.0));
    let rates = vec![5.0; 10];

    let sep_at = |rho_obs: usize, trials: usize, seed_a: u64, seed_b: u64| {
        let mc0 = mc_mse(&profile, &rates, &near0.filter, rho_obs, trials, seed_a, &McOptions::default()).unwrap();
        let mc1 = mc_mse(&profile, &rates, &near1.filter, rho_obs, trials, seed_b, &McOptions::default()).unwrap();
        let sep = (mc1.mean - mc0.mean) / (mc1.std_error.powi(2) + mc0.std_error.powi(2)).sqrt();
        (mc0, mc1, sep)
    };

    let (d0, d1, diag_sep) = sep_at(64, 400, 11, 12);
    println!(
        "  criterion 3 diagnostic (observing only 64 rounds, support ≈ horizon): \
         near0={:.1}, near1={:.1}, separation {diag_sep:+.1} se — pre-asymptotic reversal",
        d0.mean, d1.mean
    );

    let trials = 2000;
    let (mc0, mc1, sep) = sep_at(1024, trials, 11, 12);
    report(
        3,
        sep >= 3.0 && trials >= 400,
        &format!(
            "sharpness=1: mc(near1)={:.3}±{:.3} > mc(near0)={:.3}±{:.3}, separation {sep:+.1} se ≥ 3 \
             ({trials} trials, filters designed at ρ=64, d̄=8)",
            mc1.mean, mc1.std_error, mc0.mean, mc0.std_error
        ),
    );
}

#[test]
fn criterion_4_short_term_filter_is_low_pass() {
    let n_senders = 20;
    let c = ConstraintSet::new(100, 20.0).unwrap();
    let opts = OptimizerOptions {
        seed: 4,
        ..OptimizerOptions::default()
    };
    let designed = design_short_term(n_senders, &c, &opts).unwrap();
    assert!(validate(&designed.filter, &c).feasible);

    let spectrum = designed.filter.dft(100).unwrap();
    let stop = stopband_bins(n_senders, 100);
    let pass = passband_bins(n_senders, 100);
    let mean_stop: f64 = stop.iter().map(|&k| spectrum.power(k)).sum::<f64>() / stop.len() as f64;
    let mean_pass: f64 = pass.iter().map(|&k| spectrum.power(k)).sum::<f64>() / pass.len() as f64;

    let baseline = min_gamma1_closed(&c).unwrap();
    let baseline_energy = objective_shortterm(&baseline, n_senders, 100).unwrap();
    let designed_energy = designed.objective_value;

    report(
        4,
        mean_stop <= 0.1 * mean_pass && designed_energy <= 0.5 * baseline_energy,
        &format!(
            "mean stopband power {:.3e} ≤ 0.1·mean passband {:.3e}; stopband energy {:.3e} ≤ \
             0.5·min-power baseline {:.3e}",
            mean_stop, mean_pass, designed_energy, baseline_energy
        ),
    );
}

#[test]
fn criterion_5_convex_case_matches_active_set_enumeration() {
    let mut worst_gap: f64 = 0.0;
    let mut worst_tap_dist: f64 = 0.0;
    for rho in 2..=8 {
        for dbar in [0.25, 0.5, 1.0, 2.0] {
            let c = ConstraintSet::new(rho, dbar).unwrap();
            let reference = oracle::min_power_qp(&c);
            let ref_power: f64 = reference.iter().map(|f| f * f).sum();

            let opts = OptimizerOptions {
                seed: 5,
                restarts: 4,
                ..OptimizerOptions::default()
            };
            let optimized = optimize_filter(&DesignObjective::Sharp0, &c, &opts).unwrap();
            let opt_power: f64 = optimized.filter.taps().iter().map(|f| f * f).sum();
            worst_gap = worst_gap.max((opt_power - ref_power).abs());

            let closed = min_gamma1_closed(&c).unwrap();
            let dist: f64 = closed
                .taps()
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            worst_tap_dist = worst_tap_dist.max(dist);
        }
    }
    report(
        5,
        worst_gap <= 1e-6 && worst_tap_dist <= 1e-8,
        &format!(
            "optimizer vs enumeration worst objective gap {worst_gap:.2e} ≤ 1e-6; \
             closed form worst tap distance {worst_tap_dist:.2e} ≤ 1e-8 (ρ ≤ 8, d̄ ∈ {{0.25,0.5,1,2}})"
        ),
    );
}

#[test]
fn criterion_6_analytic_gradients_match_finite_differences() {
    use mixdelay::rng;
    use rand::RngExt;

    let rho = 24;
    let n_senders = 6;
    let mut gen = rng::stream(6, "acceptance-grad", 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let raw: Vec<f64> = (0..rho).map(|_| gen.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let x: Vec<f64> = raw.iter().map(|v| v / total).collect();
        DelayCharacteristic::new(x.clone()).unwrap();

        // recompute each objective through its public surface at perturbed
        // points; analytic gradients come from the same module the design
        // optimizer uses, exercised via finite differences here
        for which in 0..3 {
            let value = |taps: &[f64]| -> f64 {
                let c = DelayCharacteristic::new_unchecked(taps.to_vec());
                match which {
                    0 => objective_sharp0(&c),
                    1 => mixdelay::theory::objective_sharp1(&c),
                    _ => objective_shortterm(&c, n_senders, rho).unwrap(),
                }
            };
            let analytic = match which {
                0 => mixdelay::theory::gradient_sharp0(&x),
                1 => mixdelay::theory::gradient_sharp1(&x),
                _ => mixdelay::theory::gradient_shortterm(&x, n_senders, rho),
            };
            let h = 1e-6;
            let mut numeric = vec![0.0; rho];
            for j in 0..rho {
                let mut plus = x.clone();
                plus[j] += h;
                let mut minus = x.clone();
                minus[j] -= h;
                numeric[j] = (value(&plus) - value(&minus)) / (2.0 * h);
            }
            let norm: f64 = analytic.iter().map(|g| g * g).sum::<f64>().sqrt();
            let err: f64 = analytic
                .iter()
                .zip(&numeric)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(err / norm.max(1e-12));
        }
    }
    report(
        6,
        worst <= 1e-5,
        &format!("worst relative gradient error {worst:.2e} ≤ 1e-5 over 100 interior points × 3 objectives"),
    );
}

#[test]
fn criterion_7_decentralized_exponential_mix() {
    let alpha = 0.3f64;
    let messages = 100_000;
    let hist = simulate_decentralized(5, alpha, messages, 400, 7).unwrap();
    let reference: Vec<f64> = (0..400).map(|k| alpha * (1.0 - alpha).powi(k)).collect();
    let tv = tv_distance(&hist, &reference);

    let expect_mean = (1.0 - alpha) / alpha;
    let sd = ((1.0 - alpha) / (alpha * alpha)).sqrt();
    let se = sd / (messages as f64).sqrt();
    let mean_dev = (hist.mean() - expect_mean).abs();

    report(
        7,
        tv <= 0.02 && mean_dev <= 3.0 * se,
        &format!(
            "5 nodes, α=0.3, 10⁵ messages: TV to geometric = {tv:.4} ≤ 0.02; \
             mean {:.4} within 3se ({:.4}) of {expect_mean:.4}",
            hist.mean(),
            3.0 * se
        ),
    );
}

#[test]
fn criterion_8_cascade_realization_beats_truncation() {
    let n_senders = 20;
    let c = ConstraintSet::new(100, 20.0).unwrap();
    let opts = OptimizerOptions {
        seed: 4,
        ..OptimizerOptions::default()
    };
    let target = design_short_term(n_senders, &c, &opts).unwrap().filter;

    let stages = 5;
    let per_stage_len = 21; // 5·20+1 = 101 ≥ 100 reachable support
    let decomposition =
        decompose_cascade(&target, stages, per_stage_len, &DecomposeOptions::default()).unwrap();

    // single-stage truncation baseline: project the head of the target onto
    // the simplex, count the discarded tail in full
    let head = mixdelay::characteristic::project_simplex(&target.taps()[..per_stage_len]);
    let baseline_err: f64 = head
        .iter()
        .zip(target.taps())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        + target.taps()[per_stage_len..]
            .iter()
            .map(|t| t * t)
            .sum::<f64>();

    // spectral product identity across the stages
    let dft_len = 128;
    let achieved = cascade(&decomposition.stages).unwrap();
    let combined = achieved.dft(dft_len).unwrap();
    let mut worst_spec: f64 = 0.0;
    for k in 0..dft_len {
        let mut product = num_complex::Complex64::new(1.0, 0.0);
        for stage in &decomposition.stages {
            product *= stage.dft(dft_len).unwrap().coefficients()[k];
        }
        worst_spec = worst_spec.max((product - combined.coefficients()[k]).norm());
    }

    report(
        8,
        decomposition.squared_error < baseline_err && worst_spec <= 1e-9,
        &format!(
            "5-stage squared error {:.3e} < single-stage truncation {:.3e}; \
             spectral product identity within {:.1e} ≤ 1e-9",
            decomposition.squared_error, baseline_err, worst_spec
        ),
    );
}

#[test]
fn criterion_9_invariant_sweep() {
    use mixdelay::characteristic::project_to_constraints;
    use mixdelay::rng;
    use mixdelay::traffic::sharpness;
    use rand::RngExt;

    let mut gen = rng::stream(9, "acceptance-sweep", 0);
    let cases = 1000;
    for case in 0..cases {
        let rho = 2 + gen.random_range(0..24);
        let dbar = gen.random_range(0.0..(rho as f64));
        let c = ConstraintSet::new(rho, dbar).unwrap();

        // projection lands in the feasible set and stays put
        let v: Vec<f64> = (0..rho).map(|_| gen.random_range(-1.0..2.0)).collect();
        let f = project_to_constraints(&v, &c).unwrap();
        assert!(validate(&f, &c).feasible, "case {case}: projection infeasible");
        let again = project_to_constraints(f.taps(), &c).unwrap();
        let drift: f64 = f
            .taps()
            .iter()
            .zip(again.taps())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-12, "case {case}: projection not idempotent");

        // γ bounds under the default convention
        let g = f.gamma_stats(Gamma2Mode::NonNegativeLags);
        assert!(g.gamma3 <= g.gamma1 + 1e-12 && g.gamma1 <= 1.0 + 1e-12);
        assert!(g.gamma1 * g.gamma1 <= g.gamma2 + 1e-12);
        assert!(g.gamma2 <= g.gamma1 * (1.0 + g.gamma1) / 2.0 + 1e-12);

        // spectrum: unit DC bin, magnitudes bounded by it, Parseval
        let spec = f.dft(rho).unwrap();
        assert!((spec.coefficients()[0].re - 1.0).abs() <= 1e-9);
        assert!(spec.coefficients()[0].im.abs() <= 1e-12);
        let mut power_sum = 0.0;
        for k in 0..rho {
            let mag = spec.coefficients()[k].norm();
            assert!(mag <= 1.0 + 1e-9, "case {case}: |F_{k}| = {mag}");
            power_sum += spec.power(k);
        }
        assert!((power_sum / rho as f64 - g.gamma1).abs() <= 1e-9, "case {case}: Parseval");

        // composition keeps pmf validity and adds means
        let alpha = gen.random_range(0.05..1.0);
        let other = exponential_mix(alpha, 1 + gen.random_range(0..8), TailMode::LumpLast).unwrap();
        let combined = cascade(&[f.clone(), other.clone()]).unwrap();
        let sum: f64 = combined.taps().iter().sum();
        assert!((sum - 1.0).abs() <= 1e-9);
        assert!(
            (combined.mean_delay() - f.mean_delay() - other.mean_delay()).abs() <= 1e-9,
            "case {case}: cascade mean"
        );

        // profile generation invariants on a rotating parameter draw
        if case % 10 == 0 {
            let m = 1 + gen.random_range(0..12);
            let friends = 1 + gen.random_range(0..m);
            let s = gen.random_range(0.0..2.5);
            let p = gen_zipf_profile(1 + gen.random_range(0..6), m, friends, s, case as u64)
                .unwrap();
            for q in sharpness(&p) {
                assert!(q >= 1.0 / m as f64 - 1e-12 && q <= 1.0 + 1e-12);
            }
        }
    }
    report(
        9,
        true,
        &format!(
            "{cases} randomized cross-module cases: projection feasibility/idempotence, γ bounds, \
             spectral bounds, Parseval, cascade composition, profile invariants \
             (full harness: module unit tests + tests/invariants.rs)"
        ),
    );
}
