//! Delay-characteristic design and analysis for timed mixes.
//!
//! A timed mix batches messages into fixed-length rounds and delays each
//! message a random integer number of rounds drawn from its *delay
//! characteristic* — a probability mass function over round delays that is,
//! algebraically, a causal FIR filter acting on round-indexed message counts.
//! A global passive adversary observing all per-round input and output counts
//! can estimate the users' sending profiles by least squares; this crate
//! implements that adversary, the closed-form asymptotics of its error, the
//! constrained optimization of the characteristic that maximizes that error,
//! and the realization of designed characteristics as networks of delay nodes.
//!
//! Module map:
//!
//! - [`characteristic`] — the delay pmf value type, feasibility constraints,
//!   spectral view, and the γ statistics the asymptotic theory depends on.
//! - [`traffic`] — seeded synthetic sender behavior (Poisson traffic, Zipf
//!   sending profiles) and the sharpness statistic.
//! - [`mix`] — the timed-mix forward model: per-message simulation plus exact
//!   first- and second-moment formulas.
//! - [`adversary`] — least-squares profile estimation, its empirical error,
//!   and Monte-Carlo MSE.
//! - [`theory`] — closed-form asymptotic MSE and the design objectives
//!   derived from it.
//! - [`design`] — projected-gradient maximization of the objectives over the
//!   feasible set, with a closed-form special case.
//! - [`network`] — cascade/parallel composition of delay nodes, the
//!   exponential mix, and its decentralized implementation.
//! - [`oracle`] — brute-force reference solvers used by the test suites.

pub mod adversary;
pub mod characteristic;
pub mod design;
mod error;
pub mod mix;
pub mod network;
pub mod oracle;
pub mod rng;
pub mod theory;
pub mod traffic;

pub use characteristic::{ConstraintSet, DelayCharacteristic, Gamma2Mode, GammaStats};
pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Absolute tolerance for pmf identities (non-negativity slack, unit sum).
pub const PMF_TOL: f64 = 1e-9;

/// Format a float with 12 significant digits; the convention for every CSV
/// cell emitted by this workspace.
pub fn sig12(v: f64) -> String {
    format!("{v:.11e}")
}
