//! Synthetic sender behavior: Poisson input traffic and Zipf sending
//! profiles, plus the sharpness statistic.
//!
//! Generators are pure functions of `(parameters, seed)`; equal seeds give
//! bit-identical outputs. External traces can be ingested from the same CSV
//! schema the generators emit, so real datasets can replace the synthetic
//! ones without touching the rest of the pipeline.

use nalgebra::DMatrix;
use rand::RngExt;
use rand_distr::{Distribution, Poisson};

use crate::{rng, sig12, Error, Result, PMF_TOL};

/// Column-stochastic recipient probabilities: entry `(j, i)` is the
/// probability that a message from sender `i` goes to receiver `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SendingProfile {
    probs: DMatrix<f64>,
}

impl SendingProfile {
    /// Validate entries in `[0, 1]` and unit column sums.
    pub fn new(probs: DMatrix<f64>) -> Result<Self> {
        if probs.nrows() == 0 || probs.ncols() == 0 {
            return Err(Error::InvalidParameter("empty profile matrix".into()));
        }
        for v in probs.iter() {
            if !v.is_finite() || *v < 0.0 || *v > 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "profile entry {v} outside [0, 1]"
                )));
            }
        }
        for i in 0..probs.ncols() {
            let sum: f64 = probs.column(i).iter().sum();
            if (sum - 1.0).abs() > PMF_TOL {
                return Err(Error::InvalidParameter(format!(
                    "column {i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { probs })
    }

    /// One sender per receiver, deterministic routing. Test helper.
    pub fn identity(n: usize) -> Self {
        Self {
            probs: DMatrix::identity(n, n),
        }
    }

    pub fn probs(&self) -> &DMatrix<f64> {
        &self.probs
    }

    pub fn n_senders(&self) -> usize {
        self.probs.ncols()
    }

    pub fn n_receivers(&self) -> usize {
        self.probs.nrows()
    }

    /// Per-sender sharpness `q_i = Σ_j p_{j,i}²`; 1 means a single friend,
    /// `1/M` means uniform spraying.
    pub fn sharpness(&self) -> Vec<f64> {
        (0..self.n_senders())
            .map(|i| self.probs.column(i).iter().map(|p| p * p).sum())
            .collect()
    }

    /// CSV with header `receiver,sender,prob`, dense row-major.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("receiver,sender,prob\n");
        for j in 0..self.n_receivers() {
            for i in 0..self.n_senders() {
                out.push_str(&format!("{j},{i},{}\n", sig12(self.probs[(j, i)])));
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let cells = parse_csv(text, "receiver,sender,prob")?;
        let (m, n) = dims(&cells)?;
        let mut probs = DMatrix::zeros(m, n);
        for (j, i, v) in cells {
            probs[(j, i)] = v;
        }
        Self::new(probs)
    }
}

/// Per-round message counts: entry `(r, i)` is the number of messages sender
/// `i` emits in round `r`, along with the generating rates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficTrace {
    counts: DMatrix<u32>,
    rates: Vec<f64>,
}

impl TrafficTrace {
    pub fn new(counts: DMatrix<u32>, rates: Vec<f64>) -> Result<Self> {
        if counts.ncols() != rates.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} senders in counts, {} rates",
                counts.ncols(),
                rates.len()
            )));
        }
        if rates.iter().any(|r| !r.is_finite() || *r <= 0.0) {
            return Err(Error::InvalidParameter("rates must be positive".into()));
        }
        Ok(Self { counts, rates })
    }

    pub fn counts(&self) -> &DMatrix<u32> {
        &self.counts
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn rounds(&self) -> usize {
        self.counts.nrows()
    }

    pub fn n_senders(&self) -> usize {
        self.counts.ncols()
    }

    pub fn total_messages(&self) -> u64 {
        self.counts.iter().map(|c| u64::from(*c)).sum()
    }

    /// Observed mean rate per sender, for rate-agnostic ingestion.
    pub fn empirical_rates(&self) -> Vec<f64> {
        (0..self.n_senders())
            .map(|i| {
                self.counts.column(i).iter().map(|c| f64::from(*c)).sum::<f64>()
                    / self.rounds() as f64
            })
            .collect()
    }

    /// CSV with header `round,sender,count`, dense row-major.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("round,sender,count\n");
        for r in 0..self.rounds() {
            for i in 0..self.n_senders() {
                out.push_str(&format!("{r},{i},{}\n", self.counts[(r, i)]));
            }
        }
        out
    }

    /// Parse the `round,sender,count` schema. When `rates` is `None` the
    /// per-sender empirical means are used; a sender with no observed traffic
    /// then has no usable rate and is rejected.
    pub fn from_csv(text: &str, rates: Option<Vec<f64>>) -> Result<Self> {
        let cells = parse_csv(text, "round,sender,count")?;
        let (rho, n) = dims(&cells)?;
        let mut counts = DMatrix::zeros(rho, n);
        for (r, i, v) in cells {
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::Parse(format!("count {v} is not a non-negative integer")));
            }
            counts[(r, i)] = v as u32;
        }
        let rates = match rates {
            Some(r) => r,
            None => {
                let emp = (0..n)
                    .map(|i| {
                        counts.column(i).iter().map(|c| f64::from(*c)).sum::<f64>() / rho as f64
                    })
                    .collect::<Vec<_>>();
                if emp.iter().any(|r| *r <= 0.0) {
                    return Err(Error::Parse(
                        "a sender has zero observed traffic; supply explicit rates".into(),
                    ));
                }
                emp
            }
        };
        Self::new(counts, rates)
    }
}

fn parse_csv(text: &str, header: &str) -> Result<Vec<(usize, usize, f64)>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let first = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
    if first.trim() != header {
        return Err(Error::Parse(format!(
            "expected header `{header}`, got `{first}`"
        )));
    }
    let mut cells = Vec::new();
    for line in lines {
        let mut parts = line.trim().split(',');
        let a: usize = parts
            .next()
            .ok_or_else(|| Error::Parse(format!("short row `{line}`")))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad index in `{line}`: {e}")))?;
        let b: usize = parts
            .next()
            .ok_or_else(|| Error::Parse(format!("short row `{line}`")))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad index in `{line}`: {e}")))?;
        let v: f64 = parts
            .next()
            .ok_or_else(|| Error::Parse(format!("short row `{line}`")))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad value in `{line}`: {e}")))?;
        cells.push((a, b, v));
    }
    Ok(cells)
}

fn dims(cells: &[(usize, usize, f64)]) -> Result<(usize, usize)> {
    if cells.is_empty() {
        return Err(Error::Parse("CSV has no data rows".into()));
    }
    let rows = cells.iter().map(|c| c.0).max().unwrap() + 1;
    let cols = cells.iter().map(|c| c.1).max().unwrap() + 1;
    Ok((rows, cols))
}

/// Draw a `rho × N` trace with entry `(r, i) ~ Poisson(rates[i])`,
/// independent across cells and deterministic given the seed.
pub fn gen_poisson_traffic(rates: &[f64], rho: usize, seed: u64) -> Result<TrafficTrace> {
    if rho == 0 {
        return Err(Error::InvalidParameter("rho must be >= 1".into()));
    }
    if rates.is_empty() || rates.iter().any(|r| !r.is_finite() || *r <= 0.0) {
        return Err(Error::InvalidParameter(
            "rates must be a non-empty positive vector".into(),
        ));
    }
    let samplers: Vec<Poisson<f64>> = rates
        .iter()
        .map(|&l| Poisson::new(l).map_err(|e| Error::InvalidParameter(format!("rate {l}: {e}"))))
        .collect::<Result<_>>()?;
    let mut gen = rng::stream(seed, "poisson-traffic", 0);
    let mut counts = DMatrix::zeros(rho, rates.len());
    for r in 0..rho {
        for (i, sampler) in samplers.iter().enumerate() {
            counts[(r, i)] = sampler.sample(&mut gen) as u32;
        }
    }
    TrafficTrace::new(counts, rates.to_vec())
}

/// Build a profile where each sender has `friends` distinct receivers chosen
/// uniformly without replacement, with the rank-k friend weighted `1/k^s`.
pub fn gen_zipf_profile(
    n_senders: usize,
    n_receivers: usize,
    friends: usize,
    exponent: f64,
    seed: u64,
) -> Result<SendingProfile> {
    if n_senders == 0 || n_receivers == 0 {
        return Err(Error::InvalidParameter("need senders and receivers".into()));
    }
    if friends == 0 || friends > n_receivers {
        return Err(Error::InvalidParameter(format!(
            "friend count {friends} must be in 1..={n_receivers}"
        )));
    }
    if exponent.is_nan() || exponent < 0.0 {
        return Err(Error::InvalidParameter("exponent must be >= 0".into()));
    }
    let weights: Vec<f64> = (1..=friends)
        .map(|k| 1.0 / (k as f64).powf(exponent))
        .collect();
    let total: f64 = weights.iter().sum();

    let mut probs = DMatrix::zeros(n_receivers, n_senders);
    for i in 0..n_senders {
        // one sub-stream per sender: stable under parallel generation
        let mut gen = rng::stream(seed, "zipf-profile", i as u64);
        let chosen = sample_without_replacement(&mut gen, n_receivers, friends);
        for (rank, &j) in chosen.iter().enumerate() {
            probs[(j, i)] = weights[rank] / total;
        }
    }
    SendingProfile::new(probs)
}

/// Partial Fisher-Yates: the first `amount` entries of a uniformly random
/// permutation of `0..length`.
fn sample_without_replacement<R: RngExt>(gen: &mut R, length: usize, amount: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..length).collect();
    for t in 0..amount {
        let pick = gen.random_range(t..length);
        pool.swap(t, pick);
    }
    pool.truncate(amount);
    pool
}

/// Free-function form of [`SendingProfile::sharpness`].
pub fn sharpness(p: &SendingProfile) -> Vec<f64> {
    p.sharpness()
}
