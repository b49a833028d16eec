//! The delay-characteristic value type and its constraint set.
//!
//! A delay characteristic is a finite pmf over integer round delays: the
//! probability that a message entering the mix leaves `k` rounds later.
//! Everything downstream — the mix forward model, the adversary, the design
//! objectives — is a function of this vector, its spectrum, or its γ
//! statistics, all of which live here.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::{Error, Result, PMF_TOL};

/// A finite, non-negative, unit-sum pmf over round delays `k = 0..L-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayCharacteristic {
    taps: Vec<f64>,
}

impl DelayCharacteristic {
    /// Build a characteristic, enforcing the pmf invariants: at least one
    /// tap, every tap finite and non-negative, taps summing to 1 within
    /// [`PMF_TOL`].
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidCharacteristic("no taps".into()));
        }
        if let Some(bad) = taps.iter().find(|t| !t.is_finite() || **t < 0.0) {
            return Err(Error::InvalidCharacteristic(format!(
                "tap {bad} is negative or non-finite"
            )));
        }
        let sum: f64 = taps.iter().sum();
        if (sum - 1.0).abs() > PMF_TOL {
            return Err(Error::InvalidCharacteristic(format!(
                "taps sum to {sum}, expected 1 within {PMF_TOL:e}"
            )));
        }
        Ok(Self { taps })
    }

    /// Bypass invariant checks. For test vectors that are deliberately broken.
    pub fn new_unchecked(taps: Vec<f64>) -> Self {
        Self { taps }
    }

    /// The zero-delay characteristic: a unit tap at delay 0.
    pub fn delta() -> Self {
        Self { taps: vec![1.0] }
    }

    /// Uniform mass over delays `0..len-1`.
    pub fn uniform(len: usize) -> Self {
        assert!(len >= 1, "uniform characteristic needs at least one tap");
        Self {
            taps: vec![1.0 / len as f64; len],
        }
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Number of taps L.
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    /// Always false: the invariants require L >= 1.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Average delay in rounds, `Σ_k k·f_k`.
    pub fn mean_delay(&self) -> f64 {
        self.taps
            .iter()
            .enumerate()
            .map(|(k, f)| k as f64 * f)
            .sum()
    }

    /// The `rho`-point DFT of the zero-padded taps.
    ///
    /// Fails when the support is longer than the horizon: truncating mass
    /// would silently break the unit-sum identity `F_0 = 1`.
    pub fn dft(&self, rho: usize) -> Result<SpectralView> {
        if self.len() > rho {
            return Err(Error::FilterTooLong {
                len: self.len(),
                rho,
            });
        }
        let mut buf: Vec<Complex64> = self
            .taps
            .iter()
            .map(|t| Complex64::new(*t, 0.0))
            .collect();
        buf.resize(rho, Complex64::new(0.0, 0.0));
        FftPlanner::new().plan_fft_forward(rho).process(&mut buf);
        Ok(SpectralView { coefficients: buf })
    }

    /// The γ statistics under the given γ2 convention.
    pub fn gamma_stats(&self, mode: Gamma2Mode) -> GammaStats {
        let gamma1: f64 = self.taps.iter().map(|f| f * f).sum();
        let gamma3: f64 = self.taps.iter().map(|f| f * f * f).sum();
        let acf = autocorrelation(&self.taps);
        let nonneg: f64 = acf.iter().map(|r| r * r).sum();
        let gamma2 = match mode {
            Gamma2Mode::NonNegativeLags => nonneg,
            // r_{-k} = r_k, so summing every integer lag doubles the k >= 1
            // terms: Σ_{k∈Z} r_k² = 2·Σ_{k≥0} r_k² − r_0².
            Gamma2Mode::AllLags => 2.0 * nonneg - gamma1 * gamma1,
        };
        GammaStats {
            gamma1,
            gamma2,
            gamma3,
        }
    }

    /// Serialize as the text record: a `length=L` line, then `k value` lines.
    pub fn to_text(&self) -> String {
        let mut out = format!("length={}\n", self.len());
        for (k, tap) in self.taps.iter().enumerate() {
            // 17 significant digits: f64 round-trips exactly.
            out.push_str(&format!("{k} {tap:.16e}\n"));
        }
        out
    }

    /// Parse the [`to_text`](Self::to_text) record.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty record".into()))?;
        let len: usize = header
            .trim()
            .strip_prefix("length=")
            .ok_or_else(|| Error::Parse(format!("expected `length=L`, got `{header}`")))?
            .parse()
            .map_err(|e| Error::Parse(format!("bad length: {e}")))?;
        let mut taps = vec![0.0; len];
        for line in lines {
            let mut parts = line.split_whitespace();
            let k: usize = parts
                .next()
                .ok_or_else(|| Error::Parse("missing tap index".into()))?
                .parse()
                .map_err(|e| Error::Parse(format!("bad tap index: {e}")))?;
            let v: f64 = parts
                .next()
                .ok_or_else(|| Error::Parse("missing tap value".into()))?
                .parse()
                .map_err(|e| Error::Parse(format!("bad tap value: {e}")))?;
            if k >= len {
                return Err(Error::Parse(format!("tap index {k} out of range {len}")));
            }
            taps[k] = v;
        }
        Self::new(taps)
    }

    pub fn write_file(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(path: &std::path::Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Autocorrelation of `taps` at non-negative lags: `r_k = Σ_r f_r·f_{r+k}`
/// for `k = 0..L-1`.
pub fn autocorrelation(taps: &[f64]) -> Vec<f64> {
    let len = taps.len();
    (0..len)
        .map(|k| (0..len - k).map(|r| taps[r] * taps[r + k]).sum())
        .collect()
}

/// Which lags enter γ2 = Σ r_k².
///
/// The non-negative-lag convention is the default used by the sharp≈1 design
/// objective; the all-lag convention is what the second-moment algebra of the
/// estimator carries (see `theory::expected_noise_quadratic`), and is kept
/// switchable so the validation experiments can report both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gamma2Mode {
    #[default]
    NonNegativeLags,
    AllLags,
}

/// The three scalar filter statistics the asymptotic MSE depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaStats {
    /// Filter power `Σ_k f_k²`.
    pub gamma1: f64,
    /// Summed squared autocorrelation (convention per [`Gamma2Mode`]).
    pub gamma2: f64,
    /// Cubic power `Σ_k f_k³`.
    pub gamma3: f64,
}

/// The `rho`-point spectrum of a zero-padded characteristic.
///
/// Coefficient 0 is the tap sum (1 for a valid pmf) and no magnitude can
/// exceed it, since the taps are non-negative.
#[derive(Debug, Clone)]
pub struct SpectralView {
    coefficients: Vec<Complex64>,
}

impl SpectralView {
    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Squared magnitude `|F_k|²`.
    pub fn power(&self, k: usize) -> f64 {
        self.coefficients[k].norm_sqr()
    }

    /// Magnitude in dB, floored at -300 dB for exact nulls.
    pub fn magnitude_db(&self, k: usize) -> f64 {
        let m = self.coefficients[k].norm();
        if m <= 1e-15 {
            -300.0
        } else {
            20.0 * m.log10()
        }
    }
}

/// The feasible set: horizon bound `L <= rho`, pmf constraints, and the
/// average-delay cap `Σ k·f_k <= max_mean_delay`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSet {
    rho: usize,
    max_mean_delay: f64,
}

impl ConstraintSet {
    pub fn new(rho: usize, max_mean_delay: f64) -> Result<Self> {
        if rho < 1 {
            return Err(Error::InvalidParameter("horizon rho must be >= 1".into()));
        }
        if !max_mean_delay.is_finite() || max_mean_delay < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "max mean delay must be a finite non-negative number of rounds, got {max_mean_delay}"
            )));
        }
        Ok(Self {
            rho,
            max_mean_delay,
        })
    }

    pub fn rho(&self) -> usize {
        self.rho
    }

    pub fn max_mean_delay(&self) -> f64 {
        self.max_mean_delay
    }

    /// True when no pmf on the horizon can violate the delay cap
    /// (`max_mean_delay >= rho - 1`). Legal, but worth surfacing.
    pub fn delay_bound_vacuous(&self) -> bool {
        self.max_mean_delay >= (self.rho - 1) as f64
    }
}

/// One violated feasibility clause with the size of its violation.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub clause: Clause,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clause {
    NonNegativity,
    Normalization,
    Length,
    MeanDelay,
}

impl std::fmt::Display for Clause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Clause::NonNegativity => write!(f, "non-negativity"),
            Clause::Normalization => write!(f, "normalization"),
            Clause::Length => write!(f, "length"),
            Clause::MeanDelay => write!(f, "mean-delay"),
        }
    }
}

/// Outcome of [`validate`]: infeasibility is data, not an error.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

/// Check `f` against the constraint set clause by clause.
///
/// Feasible means: taps non-negative, summing to 1 within [`PMF_TOL`],
/// support within the horizon, and mean delay at most the cap plus
/// [`PMF_TOL`]. Each failed clause is reported with its residual.
pub fn validate(f: &DelayCharacteristic, c: &ConstraintSet) -> FeasibilityReport {
    let mut violations = Vec::new();
    let min_tap = f.taps().iter().copied().fold(f64::INFINITY, f64::min);
    if min_tap < 0.0 {
        violations.push(Violation {
            clause: Clause::NonNegativity,
            residual: -min_tap,
        });
    }
    let sum: f64 = f.taps().iter().sum();
    if (sum - 1.0).abs() > PMF_TOL {
        violations.push(Violation {
            clause: Clause::Normalization,
            residual: (sum - 1.0).abs(),
        });
    }
    if f.len() > c.rho() {
        violations.push(Violation {
            clause: Clause::Length,
            residual: (f.len() - c.rho()) as f64,
        });
    }
    let mean = f.mean_delay();
    if mean > c.max_mean_delay() + PMF_TOL {
        violations.push(Violation {
            clause: Clause::MeanDelay,
            residual: mean - c.max_mean_delay(),
        });
    }
    FeasibilityReport {
        feasible: violations.is_empty(),
        violations,
    }
}

/// Euclidean projection of `v` onto the probability simplex.
///
/// Sort-and-threshold algorithm: O(n log n), exact up to rounding.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    assert!(n >= 1);
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("non-finite entry"));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    let mut found = false;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            found = true;
            break;
        }
    }
    if !found {
        // every entry stays in the support
        theta = (sorted.iter().sum::<f64>() - 1.0) / n as f64;
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Euclidean projection of `v` onto the feasible set of `c`.
///
/// The simplex part is sort-and-threshold; when the resulting mean delay
/// exceeds the cap the delay multiplier is located by bisection and the
/// solution polished by an exact solve on the identified support, so the
/// output is idempotent and matches the brute-force KKT enumeration.
pub fn project_to_constraints(v: &[f64], c: &ConstraintSet) -> Result<DelayCharacteristic> {
    if v.len() != c.rho() {
        return Err(Error::DimensionMismatch(format!(
            "vector length {} != horizon {}",
            v.len(),
            c.rho()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("non-finite entry".into()));
    }
    let dbar = c.max_mean_delay();
    if dbar == 0.0 {
        // the delay cap pins the whole mass at k = 0
        let mut taps = vec![0.0; c.rho()];
        taps[0] = 1.0;
        return DelayCharacteristic::new(taps);
    }

    let simplex = project_simplex(v);
    let mean: f64 = simplex.iter().enumerate().map(|(k, f)| k as f64 * f).sum();
    if mean <= dbar + 1e-15 {
        return DelayCharacteristic::new(simplex);
    }

    // Delay cap active: project v - b*k onto the simplex and bisect on b >= 0.
    // The mean of that projection is non-increasing in b.
    let tilt = |b: f64| -> Vec<f64> {
        let shifted: Vec<f64> = v.iter().enumerate().map(|(k, x)| x - b * k as f64).collect();
        project_simplex(&shifted)
    };
    let mean_of = |taps: &[f64]| -> f64 { taps.iter().enumerate().map(|(k, f)| k as f64 * f).sum() };

    let mut lo = 0.0;
    let mut hi = 1.0;
    while mean_of(&tilt(hi)) > dbar {
        hi *= 2.0;
        assert!(hi < 1e18, "delay-cap bisection failed to bracket");
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_of(&tilt(mid)) > dbar {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 * (1.0 + hi) {
            break;
        }
    }
    let rough = tilt(hi);

    // Exact polish: solve for the two multipliers on the support found by
    // bisection, then verify KKT. Falls back to the bisected point if the
    // support guess is inconsistent.
    let support: Vec<usize> = rough
        .iter()
        .enumerate()
        .filter(|(_, f)| **f > 1e-14)
        .map(|(k, _)| k)
        .collect();
    if let Some(exact) = polish_on_support(v, dbar, &support, c.rho()) {
        return DelayCharacteristic::new(exact);
    }
    DelayCharacteristic::new(rough)
}

/// Solve the equality-constrained projection on a fixed support and check
/// the full KKT conditions. Returns None when the support is inconsistent.
fn polish_on_support(v: &[f64], dbar: f64, support: &[usize], rho: usize) -> Option<Vec<f64>> {
    if support.is_empty() {
        return None;
    }
    let m = support.len() as f64;
    let sv: f64 = support.iter().map(|&k| v[k]).sum();
    let sk: f64 = support.iter().map(|&k| k as f64).sum();
    let skk: f64 = support.iter().map(|&k| (k as f64) * (k as f64)).sum();
    let skv: f64 = support.iter().map(|&k| k as f64 * v[k]).sum();
    // Stationarity on the support: f_k = v_k - a - b*k with
    //   m*a + sk*b = sv - 1        (unit sum)
    //   sk*a + skk*b = skv - dbar  (mean equals the cap)
    let det = m * skk - sk * sk;
    if det.abs() < 1e-30 {
        return None;
    }
    let a = ((sv - 1.0) * skk - sk * (skv - dbar)) / det;
    let b = (m * (skv - dbar) - sk * (sv - 1.0)) / det;
    if b < -1e-12 {
        return None; // cap would be inactive; simplex path should have won
    }
    let mut taps = vec![0.0; rho];
    for &k in support {
        let f = v[k] - a - b * k as f64;
        if f < -1e-12 {
            return None;
        }
        taps[k] = f.max(0.0);
    }
    // complementary slackness off the support
    for (k, tap) in taps.iter().enumerate() {
        if *tap == 0.0 && !support.contains(&k) && v[k] - a - b * k as f64 > 1e-12 {
            return None;
        }
    }
    let sum: f64 = taps.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return None;
    }
    Some(taps)
}
