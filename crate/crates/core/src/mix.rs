//! The timed-mix forward model.
//!
//! Per-message simulation (each message independently gets a recipient from
//! the sender's profile column and a delay from the characteristic) plus the
//! exact first- and second-moment formulas the adversary model is built on:
//! the expected output `D·X·P` and the conditional noise covariance.

use nalgebra::DMatrix;
use rand::RngExt;

use crate::characteristic::DelayCharacteristic;
use crate::traffic::{SendingProfile, TrafficTrace};
use crate::{rng, Error, Result};

/// Paired adversary observations: the inputs `X` and the per-round output
/// counts `Y`. Messages still pooled past the output horizon are unobserved,
/// so total output never exceeds total input.
#[derive(Debug, Clone)]
pub struct ObservationPair {
    pub inputs: TrafficTrace,
    pub outputs: DMatrix<u32>,
}

impl ObservationPair {
    pub fn rounds(&self) -> usize {
        self.inputs.rounds()
    }

    pub fn total_output_messages(&self) -> u64 {
        self.outputs.iter().map(|c| u64::from(*c)).sum()
    }

    /// Output counts as CSV, header `round,receiver,count`.
    pub fn outputs_to_csv(&self) -> String {
        let mut out = String::from("round,receiver,count\n");
        for r in 0..self.outputs.nrows() {
            for j in 0..self.outputs.ncols() {
                out.push_str(&format!("{r},{j},{}\n", self.outputs[(r, j)]));
            }
        }
        out
    }
}

/// The pool of messages waiting inside the mix, keyed by remaining delay in
/// rounds, plus the round clock.
///
/// Each timer expiry releases exactly the messages whose remaining delay has
/// reached zero and decrements every other pending delay by one unit
/// (implemented as a rotating bucket cursor, so it is O(1) per message).
#[derive(Debug)]
pub struct MixState {
    /// `buckets[(cursor + d) % len]` holds recipients due in `d` rounds.
    buckets: Vec<Vec<usize>>,
    cursor: usize,
    round: usize,
    pending: usize,
}

impl MixState {
    /// A pool accepting delays up to `max_delay` rounds.
    pub fn new(max_delay: usize) -> Self {
        Self {
            buckets: vec![Vec::new(); max_delay + 1],
            cursor: 0,
            round: 0,
            pending: 0,
        }
    }

    /// Pool a message for `delay` more rounds.
    pub fn insert(&mut self, recipient: usize, delay: usize) {
        assert!(delay < self.buckets.len(), "delay beyond pool capacity");
        let idx = (self.cursor + delay) % self.buckets.len();
        self.buckets[idx].push(recipient);
        self.pending += 1;
    }

    /// Fire the round timer: drain the zero-delay messages and shift every
    /// remaining delay down by one. Returns the departing recipients.
    pub fn advance(&mut self) -> Vec<usize> {
        let due = std::mem::take(&mut self.buckets[self.cursor]);
        self.pending -= due.len();
        self.cursor = (self.cursor + 1) % self.buckets.len();
        self.round += 1;
        due
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn pending(&self) -> usize {
        self.pending
    }
}

/// The `rho × rho` lower-triangular Toeplitz convolution matrix of `f`:
/// entry `(r, s) = f_{r-s}` for `r >= s`, zero otherwise.
pub fn convolution_matrix(f: &DelayCharacteristic, rho: usize) -> Result<DMatrix<f64>> {
    if f.len() > rho {
        return Err(Error::FilterTooLong { len: f.len(), rho });
    }
    let taps = f.taps();
    Ok(DMatrix::from_fn(rho, rho, |r, s| {
        if r >= s && r - s < taps.len() {
            taps[r - s]
        } else {
            0.0
        }
    }))
}

/// Column-wise causal convolution: `D · x` without materializing `D`.
pub(crate) fn convolve_columns(taps: &[f64], x: &DMatrix<f64>) -> DMatrix<f64> {
    let rho = x.nrows();
    let mut out = DMatrix::zeros(rho, x.ncols());
    for c in 0..x.ncols() {
        for s in 0..rho {
            let v = x[(s, c)];
            if v == 0.0 {
                continue;
            }
            let kmax = taps.len().min(rho - s);
            for k in 0..kmax {
                out[(s + k, c)] += taps[k] * v;
            }
        }
    }
    out
}

pub(crate) fn counts_to_f64(counts: &DMatrix<u32>) -> DMatrix<f64> {
    counts.map(f64::from)
}

/// Simulate one pass of the traffic through the mix, observing output rounds
/// `0..x.rounds()`. Deterministic given the seed.
pub fn simulate_mix(
    x: &TrafficTrace,
    p: &SendingProfile,
    f: &DelayCharacteristic,
    seed: u64,
) -> Result<ObservationPair> {
    simulate_mix_horizon(x, p, f, x.rounds(), seed)
}

/// Like [`simulate_mix`] but with an explicit output horizon; with
/// `out_rounds >= x.rounds() + f.len() - 1` every message is observed.
pub fn simulate_mix_horizon(
    x: &TrafficTrace,
    p: &SendingProfile,
    f: &DelayCharacteristic,
    out_rounds: usize,
    seed: u64,
) -> Result<ObservationPair> {
    if x.n_senders() != p.n_senders() {
        return Err(Error::DimensionMismatch(format!(
            "{} senders in trace, {} in profile",
            x.n_senders(),
            p.n_senders()
        )));
    }
    let rho = x.rounds();
    let n = x.n_senders();
    let m = p.n_receivers();

    // Per-sender recipient cdf and the delay cdf, for inverse-cdf draws.
    let recipient_cdf: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            p.probs()
                .column(i)
                .iter()
                .map(|pr| {
                    acc += pr;
                    acc
                })
                .collect()
        })
        .collect();
    let delay_cdf: Vec<f64> = {
        let mut acc = 0.0;
        f.taps()
            .iter()
            .map(|t| {
                acc += t;
                acc
            })
            .collect()
    };

    let mut gen = rng::stream(seed, "mix-sim", 0);
    let mut state = MixState::new(f.len().saturating_sub(1));
    let mut outputs = DMatrix::zeros(out_rounds, m);
    for r in 0..out_rounds {
        if r < rho {
            for (i, cdf) in recipient_cdf.iter().enumerate() {
                for _ in 0..x.counts()[(r, i)] {
                    let j = draw_cdf(cdf, gen.random::<f64>());
                    let k = draw_cdf(&delay_cdf, gen.random::<f64>());
                    state.insert(j, k);
                }
            }
        }
        for j in state.advance() {
            outputs[(r, j)] += 1;
        }
    }
    Ok(ObservationPair {
        inputs: x.clone(),
        outputs,
    })
}

/// Smallest index whose cumulative mass covers `u`.
fn draw_cdf(cdf: &[f64], u: f64) -> usize {
    match cdf.binary_search_by(|c| c.partial_cmp(&u).expect("NaN in cdf")) {
        Ok(idx) | Err(idx) => idx.min(cdf.len() - 1),
    }
}

/// The conditional mean of the outputs, `E[Y|X] = D·X·P`.
pub fn expected_output(
    x: &TrafficTrace,
    p: &SendingProfile,
    f: &DelayCharacteristic,
) -> Result<DMatrix<f64>> {
    if x.n_senders() != p.n_senders() {
        return Err(Error::DimensionMismatch(format!(
            "{} senders in trace, {} in profile",
            x.n_senders(),
            p.n_senders()
        )));
    }
    if f.len() > x.rounds() {
        return Err(Error::FilterTooLong {
            len: f.len(),
            rho: x.rounds(),
        });
    }
    let dx = convolve_columns(f.taps(), &counts_to_f64(x.counts()));
    // probs is receivers × senders, so E[Y] = (D·X)·probsᵀ
    Ok(&dx * p.probs().transpose())
}

/// The conditional covariance of the per-round output noise:
/// `diag(D·X·1) − D·diag(X·q)·Dᵀ` for sharpness vector `q`.
pub fn noise_covariance(
    x: &TrafficTrace,
    f: &DelayCharacteristic,
    q: &[f64],
) -> Result<DMatrix<f64>> {
    if q.len() != x.n_senders() {
        return Err(Error::DimensionMismatch(format!(
            "{} senders in trace, {} sharpness entries",
            x.n_senders(),
            q.len()
        )));
    }
    if q.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidParameter("sharpness outside [0, 1]".into()));
    }
    let rho = x.rounds();
    let d = convolution_matrix(f, rho)?;
    let counts = counts_to_f64(x.counts());

    // row totals X·1 and sharpness-weighted totals X·q
    let row_totals: Vec<f64> = (0..rho).map(|r| counts.row(r).sum()).collect();
    let weighted: Vec<f64> = (0..rho)
        .map(|r| counts.row(r).iter().zip(q).map(|(c, qi)| c * qi).sum())
        .collect();

    let d_row_totals = &d * DMatrix::from_column_slice(rho, 1, &row_totals);
    let mut sigma = DMatrix::from_diagonal(&d_row_totals.column(0).clone_owned());
    let dw = &d * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(weighted));
    sigma -= dw * d.transpose();
    Ok(sigma)
}
