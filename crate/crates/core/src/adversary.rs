//! The global passive adversary.
//!
//! Observes every per-round input and output count, knows the delay
//! characteristic, and estimates the sending profile by least squares on the
//! linear model `Y ≈ D·X·P`. `mc_mse` measures its mean squared error over
//! fresh seeded traffic, which is the quantity the design module maximizes.

use nalgebra::DMatrix;

use crate::characteristic::DelayCharacteristic;
use crate::mix::{convolve_columns, counts_to_f64, simulate_mix, ObservationPair};
use crate::traffic::{gen_poisson_traffic, SendingProfile, TrafficTrace};
use crate::{rng, sig12, Error, Result};

/// How per-sender squared errors are weighted into the overall MSE.
///
/// With normalization matrix `M = diag(m_1..m_N)` the overall error is
/// `tr(M·Ce·M) = Σ_i m_i²·E‖p̂_i − p_i‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MseWeighting {
    /// `m_i = λ_i`: squared errors weighted by `λ_i²`. This is the variant
    /// the closed-form asymptotics reproduce; see `theory::closed_form_mse`.
    #[default]
    RateSquared,
    /// `m_i = √λ_i`: squared errors weighted by `λ_i`.
    Rate,
}

impl MseWeighting {
    fn weight(&self, rate: f64) -> f64 {
        match self {
            MseWeighting::RateSquared => rate * rate,
            MseWeighting::Rate => rate,
        }
    }
}

/// Output of [`ls_estimate`]: the estimated profile and the smallest
/// singular value of the convolved input matrix `D·X`.
#[derive(Debug, Clone)]
pub struct LsEstimate {
    /// Estimated profile, receivers × senders — same layout as
    /// [`SendingProfile::probs`].
    pub p_hat: DMatrix<f64>,
    /// Smallest singular value of `D·X`; the short-term design goal is to
    /// drive this toward zero.
    pub conditioning: f64,
}

/// The adversary's scored estimate.
#[derive(Debug, Clone)]
pub struct EstimateReport {
    pub p_hat: DMatrix<f64>,
    /// `P̂ − P` when ground truth was supplied.
    pub error: Option<DMatrix<f64>>,
    /// `Σ_i w_i · Σ_j (p̂_{j,i} − p_{j,i})²` with `w_i` per [`MseWeighting`].
    pub overall_mse: f64,
    pub per_sender_mse: Vec<f64>,
    /// Smallest singular value of `D·X`; 0 when the estimate did not come
    /// from an observation pipeline.
    pub conditioning: f64,
}

/// Best linear (least squares) estimate of the sending profile from one
/// observation pair: solves `D·X·P ≈ Y` column by column.
///
/// Columns are *not* re-projected onto the simplex: the error metric is raw
/// squared error. A singular normal matrix at `ridge = 0` is reported, never
/// silently regularized.
pub fn ls_estimate(
    obs: &ObservationPair,
    f: &DelayCharacteristic,
    ridge: f64,
) -> Result<LsEstimate> {
    let rho = obs.rounds();
    let n = obs.inputs.n_senders();
    if rho < n {
        return Err(Error::HorizonTooShort { rho, n_senders: n });
    }
    if ridge < 0.0 {
        return Err(Error::InvalidParameter("ridge must be >= 0".into()));
    }
    if obs.outputs.nrows() != rho {
        return Err(Error::DimensionMismatch(format!(
            "{} input rounds, {} output rounds",
            rho,
            obs.outputs.nrows()
        )));
    }
    let a = convolve_columns(f.taps(), &counts_to_f64(obs.inputs.counts()));
    let mut gram = a.transpose() * &a;

    // conditioning from the Gram spectrum: σ_min(A) = sqrt(λ_min(AᵀA))
    let eigen = gram.clone().symmetric_eigen();
    let lambda_min = eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda_max = eigen.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    let conditioning = lambda_min.max(0.0).sqrt();

    for d in 0..n {
        gram[(d, d)] += ridge;
    }
    let singular = lambda_min <= 1e-12 * lambda_max.max(1.0);
    if singular && ridge == 0.0 {
        return Err(Error::SingularNormalEquations { conditioning });
    }
    let chol = gram
        .cholesky()
        .ok_or(Error::SingularNormalEquations { conditioning })?;

    let rhs = a.transpose() * counts_to_f64(&obs.outputs); // N × M
    let solution = chol.solve(&rhs); // P̂ᵀ, N × M
    Ok(LsEstimate {
        p_hat: solution.transpose(),
        conditioning,
    })
}

/// Score an estimate against ground truth.
pub fn empirical_mse(
    p_hat: &DMatrix<f64>,
    truth: &SendingProfile,
    rates: &[f64],
    weighting: MseWeighting,
) -> Result<EstimateReport> {
    if p_hat.shape() != truth.probs().shape() {
        return Err(Error::DimensionMismatch(format!(
            "estimate {:?} vs truth {:?}",
            p_hat.shape(),
            truth.probs().shape()
        )));
    }
    if rates.len() != truth.n_senders() {
        return Err(Error::DimensionMismatch(format!(
            "{} rates for {} senders",
            rates.len(),
            truth.n_senders()
        )));
    }
    let error = p_hat - truth.probs();
    let per_sender_mse: Vec<f64> = (0..truth.n_senders())
        .map(|i| weighting.weight(rates[i]) * error.column(i).iter().map(|e| e * e).sum::<f64>())
        .collect();
    let overall_mse = neumaier_sum(&per_sender_mse);
    Ok(EstimateReport {
        p_hat: p_hat.clone(),
        error: Some(error),
        overall_mse,
        per_sender_mse,
        conditioning: 0.0,
    })
}

/// Compensated (Neumaier) summation, so aggregate results do not depend on
/// evaluation order.
fn neumaier_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Options for [`mc_mse`].
#[derive(Debug, Clone)]
pub struct McOptions {
    pub ridge: f64,
    pub weighting: MseWeighting,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            ridge: 0.0,
            weighting: MseWeighting::default(),
        }
    }
}

/// One trial of the Monte-Carlo batch.
#[derive(Debug, Clone)]
pub struct McTrialRow {
    pub trial: usize,
    pub seed: u64,
    pub overall_mse: f64,
    pub conditioning: f64,
}

/// Result of [`mc_mse`]: the batch mean with a standard-error estimate and
/// the per-trial rows.
#[derive(Debug, Clone)]
pub struct McMseReport {
    pub mean: f64,
    pub std_error: f64,
    pub trials: Vec<McTrialRow>,
}

impl McMseReport {
    /// CSV with one row per trial and a trailing summary row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,seed,overall_mse,conditioning\n");
        for row in &self.trials {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.trial,
                row.seed,
                sig12(row.overall_mse),
                sig12(row.conditioning)
            ));
        }
        out.push_str(&format!(
            "summary,mean,{},{}\n",
            sig12(self.mean),
            sig12(self.std_error)
        ));
        out
    }
}

/// Monte-Carlo estimate of the adversary's overall MSE: averages
/// [`empirical_mse`] over independent seeded (traffic, mix) simulations with
/// fresh inputs each trial.
///
/// Every trial derives its own traffic and mix sub-streams from `seed`, so
/// trials are independent and the batch is reproducible and order-invariant.
/// A singular trial at `ridge = 0` aborts the whole batch with its
/// conditioning report.
pub fn mc_mse(
    profile: &SendingProfile,
    rates: &[f64],
    f: &DelayCharacteristic,
    rho: usize,
    trials: usize,
    seed: u64,
    opts: &McOptions,
) -> Result<McMseReport> {
    if trials < 2 {
        return Err(Error::InvalidParameter(
            "need at least 2 trials for a standard error".into(),
        ));
    }
    let mut rows = Vec::with_capacity(trials);
    for trial in 0..trials {
        let trial_seed = rng::derive_seed(seed, "mc-trial", trial as u64);
        let x = gen_poisson_traffic(rates, rho, rng::derive_seed(trial_seed, "traffic", 0))?;
        let obs = simulate_mix(&x, profile, f, rng::derive_seed(trial_seed, "mix", 0))?;
        let est = match ls_estimate(&obs, f, opts.ridge) {
            Ok(est) => est,
            Err(Error::SingularNormalEquations { conditioning }) => {
                return Err(Error::SingularTrial {
                    trial,
                    conditioning,
                });
            }
            Err(e) => return Err(e),
        };
        let report = empirical_mse(&est.p_hat, profile, rates, opts.weighting)?;
        rows.push(McTrialRow {
            trial,
            seed: trial_seed,
            overall_mse: report.overall_mse,
            conditioning: est.conditioning,
        });
    }
    let values: Vec<f64> = rows.iter().map(|r| r.overall_mse).collect();
    let mean = neumaier_sum(&values) / trials as f64;
    let var = neumaier_sum(
        &values
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .collect::<Vec<_>>(),
    ) / (trials - 1) as f64;
    let std_error = (var / trials as f64).sqrt();
    Ok(McMseReport {
        mean,
        std_error,
        trials: rows,
    })
}

/// Like [`mc_mse`] but over one fixed input trace: only the per-message mix
/// randomness is redrawn each trial. This is the evaluation path for
/// externally supplied traffic, where fresh inputs cannot be generated; the
/// trace's own rates weight the error.
pub fn mc_mse_fixed_traffic(
    x: &TrafficTrace,
    profile: &SendingProfile,
    f: &DelayCharacteristic,
    trials: usize,
    seed: u64,
    opts: &McOptions,
) -> Result<McMseReport> {
    if trials < 2 {
        return Err(Error::InvalidParameter(
            "need at least 2 trials for a standard error".into(),
        ));
    }
    let mut rows = Vec::with_capacity(trials);
    for trial in 0..trials {
        let trial_seed = rng::derive_seed(seed, "mc-fixed-trial", trial as u64);
        let obs = simulate_mix(x, profile, f, trial_seed)?;
        let est = match ls_estimate(&obs, f, opts.ridge) {
            Ok(est) => est,
            Err(Error::SingularNormalEquations { conditioning }) => {
                return Err(Error::SingularTrial {
                    trial,
                    conditioning,
                });
            }
            Err(e) => return Err(e),
        };
        let report = empirical_mse(&est.p_hat, profile, x.rates(), opts.weighting)?;
        rows.push(McTrialRow {
            trial,
            seed: trial_seed,
            overall_mse: report.overall_mse,
            conditioning: est.conditioning,
        });
    }
    let values: Vec<f64> = rows.iter().map(|r| r.overall_mse).collect();
    let mean = neumaier_sum(&values) / trials as f64;
    let var = neumaier_sum(
        &values
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .collect::<Vec<_>>(),
    ) / (trials - 1) as f64;
    let std_error = (var / trials as f64).sqrt();
    Ok(McMseReport {
        mean,
        std_error,
        trials: rows,
    })
}
