//! Closed-form asymptotic MSE and the design objectives derived from it.
//!
//! For long observation horizons with i.i.d. Poisson inputs, the adversary's
//! overall MSE depends on the delay characteristic only through γ1, γ2, γ3.
//! This module evaluates that closed form, exposes the three scalar
//! objectives the design module optimizes (with analytic gradients), and
//! carries the expected-moment helpers the closed form is assembled from so
//! the test suite can validate each piece against sample averages.

use crate::characteristic::{autocorrelation, DelayCharacteristic, Gamma2Mode, GammaStats};
use crate::network;
use crate::{Error, Result};

/// Validity flags for the closed form's asymptotic assumptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssumptionFlags {
    /// Total sending rate `Σλ` is at least 10 messages per round.
    pub rate_sum_large: bool,
    /// Horizon is at least 10× the number of senders.
    pub horizon_large: bool,
}

/// The evaluated closed form, split into the part the filter controls and
/// the part it does not.
#[derive(Debug, Clone)]
pub struct ClosedFormReport {
    pub mse_total: f64,
    /// `(1/ρ)·(1/γ1²)·(γ1·Σλ − γ2·Σλq + γ3)·[Σλ − Σλ²/Σλ]`
    pub term_filter_dependent: f64,
    /// `(1/ρ)·[(Σλ²/(Σλ)² + 1)·Σλq − Σλ²q/Σλ]`
    pub term_filter_independent: f64,
    pub gammas: GammaStats,
    pub assumption_flags: AssumptionFlags,
}

impl ClosedFormReport {
    /// Flat `key=value` block, one entry per line.
    pub fn to_key_value(&self) -> String {
        format!(
            "mse_total={}\nterm_filter_dependent={}\nterm_filter_independent={}\n\
             gamma1={}\ngamma2={}\ngamma3={}\nrate_sum_large={}\nhorizon_large={}\n",
            crate::sig12(self.mse_total),
            crate::sig12(self.term_filter_dependent),
            crate::sig12(self.term_filter_independent),
            crate::sig12(self.gammas.gamma1),
            crate::sig12(self.gammas.gamma2),
            crate::sig12(self.gammas.gamma3),
            self.assumption_flags.rate_sum_large,
            self.assumption_flags.horizon_large,
        )
    }
}

/// Evaluate the closed-form asymptotic MSE for Poisson traffic with the
/// given rates and sender sharpness.
///
/// The reported total weights each sender's squared profile error by `λ_i²`
/// (the `MseWeighting::RateSquared` convention); Monte-Carlo agreement under
/// that pairing is what the acceptance suite checks. Assumption violations
/// raise flags, never errors.
pub fn closed_form_mse(
    rates: &[f64],
    q: &[f64],
    f: &DelayCharacteristic,
    rho: usize,
    gamma2_mode: Gamma2Mode,
) -> Result<ClosedFormReport> {
    if rates.is_empty() || rates.len() != q.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rates, {} sharpness entries",
            rates.len(),
            q.len()
        )));
    }
    if rates.iter().any(|l| !l.is_finite() || *l <= 0.0) {
        return Err(Error::InvalidParameter("rates must be positive".into()));
    }
    if q.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidParameter("sharpness outside [0, 1]".into()));
    }
    if rho == 0 {
        return Err(Error::InvalidParameter("rho must be >= 1".into()));
    }
    let gammas = f.gamma_stats(gamma2_mode);
    let n = rates.len();
    let s: f64 = rates.iter().sum();
    let s2: f64 = rates.iter().map(|l| l * l).sum();
    let t: f64 = rates.iter().zip(q).map(|(l, qi)| l * qi).sum();
    let u: f64 = rates.iter().zip(q).map(|(l, qi)| l * l * qi).sum();
    let inv_rho = 1.0 / rho as f64;

    let term_filter_dependent = inv_rho / (gammas.gamma1 * gammas.gamma1)
        * (gammas.gamma1 * s - gammas.gamma2 * t + gammas.gamma3)
        * (s - s2 / s);
    let term_filter_independent = inv_rho * ((s2 / (s * s) + 1.0) * t - u / s);

    Ok(ClosedFormReport {
        mse_total: term_filter_dependent + term_filter_independent,
        term_filter_dependent,
        term_filter_independent,
        gammas,
        assumption_flags: AssumptionFlags {
            rate_sum_large: s >= 10.0,
            horizon_large: rho >= 10 * n,
        },
    })
}

// ---------------------------------------------------------------------------
// Design objectives and their gradients (on raw tap vectors)
// ---------------------------------------------------------------------------

/// Long-term objective for sharpness ≈ 0: `1/γ1`. Maximize.
pub fn objective_sharp0(f: &DelayCharacteristic) -> f64 {
    sharp0_value(f.taps())
}

/// Long-term objective for sharpness ≈ 1: `(γ1 − γ2)/γ1²` with the
/// non-negative-lag γ2. Maximize.
pub fn objective_sharp1(f: &DelayCharacteristic) -> f64 {
    sharp1_value(f.taps())
}

/// Short-term objective: total stopband power `Σ |F_k|²` over
/// [`stopband_bins`]. Minimize — zeroing these DFT coefficients drives the
/// adversary's normal matrix toward singularity.
pub fn objective_shortterm(f: &DelayCharacteristic, n_senders: usize, rho: usize) -> Result<f64> {
    if n_senders >= rho {
        return Err(Error::InvalidParameter(format!(
            "stopband needs n_senders {n_senders} < rho {rho}"
        )));
    }
    let mut padded = f.taps().to_vec();
    padded.resize(rho.max(f.len()), 0.0);
    Ok(shortterm_value(&padded, &stopband_bins(n_senders, rho), rho))
}

/// The symmetric stopband: bins `{h+1, ..., rho−h−1}` where `h = N/2` for
/// even N and `(N+1)/2` for odd N (one extra passband bin per side). Empty
/// when the passband covers the whole spectrum.
pub fn stopband_bins(n_senders: usize, rho: usize) -> Vec<usize> {
    let h = n_senders.div_ceil(2);
    let lo = h + 1;
    if lo > rho.saturating_sub(h + 1) {
        return Vec::new();
    }
    (lo..=rho - h - 1).collect()
}

/// The complement of the stopband, excluding the DC bin.
pub fn passband_bins(n_senders: usize, rho: usize) -> Vec<usize> {
    let stop = stopband_bins(n_senders, rho);
    (1..rho).filter(|k| !stop.contains(k)).collect()
}

pub(crate) fn sharp0_value(x: &[f64]) -> f64 {
    1.0 / power(x)
}

pub(crate) fn sharp0_gradient(x: &[f64]) -> Vec<f64> {
    let g1 = power(x);
    x.iter().map(|v| -2.0 * v / (g1 * g1)).collect()
}

pub(crate) fn sharp1_value(x: &[f64]) -> f64 {
    let g1 = power(x);
    let g2: f64 = autocorrelation(x).iter().map(|r| r * r).sum();
    (g1 - g2) / (g1 * g1)
}

pub(crate) fn sharp1_gradient(x: &[f64]) -> Vec<f64> {
    let len = x.len();
    let g1 = power(x);
    let acf = autocorrelation(x);
    let g2: f64 = acf.iter().map(|r| r * r).sum();
    // ∂γ2/∂x_j = 2·Σ_k r_k (x_{j+k} + x_{j−k})
    let gamma2_grad: Vec<f64> = (0..len)
        .map(|j| {
            2.0 * acf
                .iter()
                .enumerate()
                .map(|(k, r)| {
                    let fwd = x.get(j + k).copied().unwrap_or(0.0);
                    let bwd = if j >= k { x[j - k] } else { 0.0 };
                    r * (fwd + bwd)
                })
                .sum::<f64>()
        })
        .collect();
    // quotient rule on (γ1 − γ2)/γ1²
    (0..len)
        .map(|j| {
            let dg1 = 2.0 * x[j];
            ((dg1 - gamma2_grad[j]) * g1 - 2.0 * (g1 - g2) * dg1) / (g1 * g1 * g1)
        })
        .collect()
}

pub(crate) fn shortterm_value(x: &[f64], stopband: &[usize], rho: usize) -> f64 {
    stopband
        .iter()
        .map(|&k| {
            let (re, im) = dft_bin(x, k, rho);
            re * re + im * im
        })
        .sum()
}

pub(crate) fn shortterm_gradient(x: &[f64], stopband: &[usize], rho: usize) -> Vec<f64> {
    let bins: Vec<(usize, f64, f64)> = stopband
        .iter()
        .map(|&k| {
            let (re, im) = dft_bin(x, k, rho);
            (k, re, im)
        })
        .collect();
    let step = 2.0 * std::f64::consts::PI / rho as f64;
    (0..x.len())
        .map(|j| {
            2.0 * bins
                .iter()
                .map(|&(k, re, im)| {
                    let angle = step * (j * k % rho) as f64;
                    // Re(conj(F_k)·e^{−i·angle})
                    re * angle.cos() - im * angle.sin()
                })
                .sum::<f64>()
        })
        .collect()
}

fn dft_bin(x: &[f64], k: usize, rho: usize) -> (f64, f64) {
    let step = 2.0 * std::f64::consts::PI / rho as f64;
    let mut re = 0.0;
    let mut im = 0.0;
    for (j, v) in x.iter().enumerate() {
        let angle = step * (j * k % rho) as f64;
        re += v * angle.cos();
        im -= v * angle.sin();
    }
    (re, im)
}

fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Gradient of `1/γ1` with respect to the raw tap vector.
pub fn gradient_sharp0(taps: &[f64]) -> Vec<f64> {
    sharp0_gradient(taps)
}

/// Gradient of `(γ1 − γ2)/γ1²` (non-negative-lag γ2) with respect to the
/// raw tap vector.
pub fn gradient_sharp1(taps: &[f64]) -> Vec<f64> {
    sharp1_gradient(taps)
}

/// Gradient of the stopband power with respect to the raw tap vector.
pub fn gradient_shortterm(taps: &[f64], n_senders: usize, rho: usize) -> Vec<f64> {
    let bins = stopband_bins(n_senders, rho);
    let mut padded = taps.to_vec();
    padded.resize(rho.max(taps.len()), 0.0);
    let mut grad = shortterm_gradient(&padded, &bins, rho);
    grad.truncate(taps.len());
    grad
}

/// The characteristic seen by the adversary when the input process is
/// colored by `g` before observation: the cascade `f ∗ g`.
pub fn effective_characteristic(
    f: &DelayCharacteristic,
    g: &DelayCharacteristic,
) -> Result<DelayCharacteristic> {
    network::cascade(&[f.clone(), g.clone()])
}

// ---------------------------------------------------------------------------
// Expected-moment helpers behind the closed form
// ---------------------------------------------------------------------------
#[cfg(test)]
use nalgebra::DMatrix;
// Internal validation surface: each matrix below is the `rho → ∞` limit of a
// sample average the estimator's error formula is built from. The test suite
// compares them against simulated sample averages; the public entry point is
// `closed_form_mse` only.

/// `E[(1/ρ)·XᵀDᵀDX] = λλᵀ + γ1·diag(λ)`.
#[cfg(test)]
pub(crate) fn expected_normal_matrix(rates: &[f64], gamma1: f64) -> DMatrix<f64> {
    let n = rates.len();
    let mut m = DMatrix::from_fn(n, n, |i, j| rates[i] * rates[j]);
    for i in 0..n {
        m[(i, i)] += gamma1 * rates[i];
    }
    m
}

/// Rank-one-update inverse of [`expected_normal_matrix`]:
/// `(1/γ1)·(diag(1/λ) − 11ᵀ/(γ1 + Σλ))`.
#[cfg(test)]
pub(crate) fn expected_normal_inverse(rates: &[f64], gamma1: f64) -> DMatrix<f64> {
    let n = rates.len();
    let s: f64 = rates.iter().sum();
    let denom = gamma1 + s;
    DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { 1.0 / rates[i] } else { 0.0 };
        (diag - 1.0 / denom) / gamma1
    })
}

/// `ρ → ∞` limit of `(1/ρ)·XᵀDᵀ·diag(DX1)·DX`:
/// `λλᵀ·(2γ1 + Σλ) + diag(λ)·(γ3 + γ1·Σλ)`.
#[cfg(test)]
pub(crate) fn expected_noise_quadratic_prime(rates: &[f64], gammas: &GammaStats) -> DMatrix<f64> {
    let n = rates.len();
    let s: f64 = rates.iter().sum();
    let c1 = 2.0 * gammas.gamma1 + s;
    let c2 = gammas.gamma3 + gammas.gamma1 * s;
    let mut m = DMatrix::from_fn(n, n, |i, j| c1 * rates[i] * rates[j]);
    for i in 0..n {
        m[(i, i)] += c2 * rates[i];
    }
    m
}

/// `ρ → ∞` limit of `(1/ρ)·XᵀDᵀD·diag(Xq)·DᵀDX`:
/// `λλᵀ·Σλq + γ1·[(λ∘q)λᵀ + λ(λ∘q)ᵀ] + γ2·diag(λ)·Σλq + γ1²·diag(λ∘q)`.
///
/// The γ2 here is the *all-lag* squared-autocorrelation sum: the variance of
/// `(DᵀDx)_t` sums `r_k²` over every integer lag. Callers must pass
/// `gamma_stats(Gamma2Mode::AllLags)`; the sample-average test pins this.
#[cfg(test)]
pub(crate) fn expected_noise_quadratic_second(
    rates: &[f64],
    q: &[f64],
    gammas: &GammaStats,
) -> DMatrix<f64> {
    let n = rates.len();
    let t: f64 = rates.iter().zip(q).map(|(l, qi)| l * qi).sum();
    let g1 = gammas.gamma1;
    let mut m = DMatrix::from_fn(n, n, |i, j| {
        rates[i] * rates[j] * t
            + g1 * (rates[i] * q[i] * rates[j] + rates[i] * rates[j] * q[j])
    });
    for i in 0..n {
        m[(i, i)] += gammas.gamma2 * rates[i] * t + g1 * g1 * rates[i] * q[i];
    }
    m
}
