//! Brute-force reference solvers for the test harness.
//!
//! These deliberately share no code with the production paths they check:
//! the QP here enumerates active sets instead of bisecting a dual variable,
//! and the DFT is the O(n²) definition instead of an FFT. Keep it that way.

use num_complex::Complex64;

use crate::characteristic::ConstraintSet;

/// Exact Euclidean projection onto the feasible set by enumerating every
/// support pattern and solving the equality-constrained KKT system on it.
///
/// The problem is strictly convex, so the optimum is the feasible candidate
/// with the smallest distance to `v`. Exponential in the horizon; intended
/// for `rho <= 20`.
pub fn project_qp(v: &[f64], c: &ConstraintSet) -> Vec<f64> {
    let rho = c.rho();
    assert_eq!(v.len(), rho);
    assert!(rho <= 20, "active-set enumeration is exponential in rho");
    let dbar = c.max_mean_delay();

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |cand: Vec<f64>| {
        if cand.iter().any(|f| *f < -1e-12) {
            return;
        }
        let mean: f64 = cand.iter().enumerate().map(|(k, f)| k as f64 * f).sum();
        if mean > dbar + 1e-12 {
            return;
        }
        let dist: f64 = cand.iter().zip(v).map(|(f, x)| (f - x) * (f - x)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, cand));
        }
    };

    for mask in 1u32..(1 << rho) {
        let support: Vec<usize> = (0..rho).filter(|k| mask & (1 << k) != 0).collect();
        let m = support.len() as f64;
        let sv: f64 = support.iter().map(|&k| v[k]).sum();
        let sk: f64 = support.iter().map(|&k| k as f64).sum();
        let skk: f64 = support.iter().map(|&k| (k as f64) * (k as f64)).sum();
        let skv: f64 = support.iter().map(|&k| k as f64 * v[k]).sum();

        // Case A: only the unit-sum constraint is active.
        let a = (sv - 1.0) / m;
        let mut cand = vec![0.0; rho];
        for &k in &support {
            cand[k] = v[k] - a;
        }
        consider(cand);

        // Case B: unit sum and mean delay both active.
        let det = m * skk - sk * sk;
        if det.abs() > 1e-12 {
            let a = ((sv - 1.0) * skk - sk * (skv - dbar)) / det;
            let b = (m * (skv - dbar) - sk * (sv - 1.0)) / det;
            if b >= -1e-12 {
                let mut cand = vec![0.0; rho];
                for &k in &support {
                    cand[k] = v[k] - a - b * k as f64;
                }
                consider(cand);
            }
        }
    }

    let (_, mut f) = best.expect("feasible set is non-empty for dbar >= 0");
    for tap in &mut f {
        *tap = tap.max(0.0);
    }
    f
}

/// The minimum-power member of the feasible set, `argmin Σ f_k²`, found by
/// the same enumeration (it is the projection of the origin).
pub fn min_power_qp(c: &ConstraintSet) -> Vec<f64> {
    project_qp(&vec![0.0; c.rho()], c)
}

/// O(n²) discrete Fourier transform of `taps` zero-padded to `rho` points.
pub fn naive_dft(taps: &[f64], rho: usize) -> Vec<Complex64> {
    (0..rho)
        .map(|k| {
            (0..taps.len().min(rho))
                .map(|j| {
                    let angle = -2.0 * std::f64::consts::PI * (j * k) as f64 / rho as f64;
                    Complex64::new(taps[j] * angle.cos(), taps[j] * angle.sin())
                })
                .sum()
        })
        .collect()
}
