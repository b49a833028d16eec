//! Python bindings: the delay-characteristic type plus the design,
//! analysis, and simulation entry points, driven in-process from Python.
//!
//! Build with `cargo build -p mixdelay-py --release` and import the cdylib
//! as `mixdelay_py` (see `python/smoke_test.py`).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use mixdelay::adversary::{McOptions, MseWeighting};
use mixdelay::characteristic::{ConstraintSet, Gamma2Mode};
use mixdelay::design::{OptimizerOptions, SharpRegime};
use mixdelay::network::TailMode;

fn to_py_err(err: mixdelay::Error) -> PyErr {
    PyValueError::new_err(err.to_string())
}

fn parse_gamma2(mode: &str) -> PyResult<Gamma2Mode> {
    match mode {
        "nonneg" => Ok(Gamma2Mode::NonNegativeLags),
        "all" => Ok(Gamma2Mode::AllLags),
        other => Err(PyValueError::new_err(format!(
            "gamma2 mode must be 'nonneg' or 'all', got '{other}'"
        ))),
    }
}

/// A finite non-negative unit-sum pmf over integer round delays.
#[pyclass(name = "DelayCharacteristic", from_py_object)]
#[derive(Clone)]
struct PyDelayCharacteristic {
    inner: mixdelay::DelayCharacteristic,
}

#[pymethods]
impl PyDelayCharacteristic {
    #[new]
    fn new(taps: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: mixdelay::DelayCharacteristic::new(taps).map_err(to_py_err)?,
        })
    }

    /// Unit tap at delay zero.
    #[staticmethod]
    fn delta() -> Self {
        Self {
            inner: mixdelay::DelayCharacteristic::delta(),
        }
    }

    /// Uniform mass over `length` taps.
    #[staticmethod]
    fn uniform(length: usize) -> PyResult<Self> {
        if length == 0 {
            return Err(PyValueError::new_err("length must be >= 1"));
        }
        Ok(Self {
            inner: mixdelay::DelayCharacteristic::uniform(length),
        })
    }

    #[staticmethod]
    fn read_file(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: mixdelay::DelayCharacteristic::read_file(&path).map_err(to_py_err)?,
        })
    }

    fn write_file(&self, path: std::path::PathBuf) -> PyResult<()> {
        self.inner.write_file(&path).map_err(to_py_err)
    }

    fn taps(&self) -> Vec<f64> {
        self.inner.taps().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn mean_delay(&self) -> f64 {
        self.inner.mean_delay()
    }

    /// The (γ1, γ2, γ3) statistics; `mode` is 'nonneg' or 'all'.
    #[pyo3(signature = (mode = "nonneg"))]
    fn gamma_stats(&self, mode: &str) -> PyResult<(f64, f64, f64)> {
        let g = self.inner.gamma_stats(parse_gamma2(mode)?);
        Ok((g.gamma1, g.gamma2, g.gamma3))
    }

    /// `rho`-point spectrum as (re, im) pairs.
    fn dft(&self, rho: usize) -> PyResult<Vec<(f64, f64)>> {
        let spec = self.inner.dft(rho).map_err(to_py_err)?;
        Ok(spec.coefficients().iter().map(|c| (c.re, c.im)).collect())
    }

    /// Feasibility against (rho, max_mean_delay): (ok, [violation, ...]).
    fn validate(&self, rho: usize, max_mean_delay: f64) -> PyResult<(bool, Vec<String>)> {
        let c = ConstraintSet::new(rho, max_mean_delay).map_err(to_py_err)?;
        let report = mixdelay::characteristic::validate(&self.inner, &c);
        Ok((
            report.feasible,
            report
                .violations
                .iter()
                .map(|v| format!("{} (residual {:.3e})", v.clause, v.residual))
                .collect(),
        ))
    }

    fn __repr__(&self) -> String {
        format!(
            "DelayCharacteristic(len={}, mean_delay={:.4})",
            self.inner.len(),
            self.inner.mean_delay()
        )
    }
}

/// Outcome of a design run.
#[pyclass(name = "DesignOutcome")]
struct PyDesignOutcome {
    #[pyo3(get)]
    objective_value: f64,
    #[pyo3(get)]
    minimize: bool,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    kkt_residual: f64,
    #[pyo3(get)]
    converged: bool,
    filter: mixdelay::DelayCharacteristic,
}

#[pymethods]
impl PyDesignOutcome {
    #[getter]
    fn filter(&self) -> PyDelayCharacteristic {
        PyDelayCharacteristic {
            inner: self.filter.clone(),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "DesignOutcome(objective_value={:.6e}, iterations={}, converged={})",
            self.objective_value, self.iterations, self.converged
        )
    }
}

fn outcome(result: mixdelay::design::DesignResult) -> PyDesignOutcome {
    PyDesignOutcome {
        objective_value: result.objective_value,
        minimize: result.minimize,
        iterations: result.iterations,
        kkt_residual: result.kkt_residual,
        converged: result.converged,
        filter: result.filter,
    }
}

fn options(seed: u64, restarts: usize) -> OptimizerOptions {
    OptimizerOptions {
        seed,
        restarts,
        ..OptimizerOptions::default()
    }
}

/// Optimal long-term characteristic; `regime` is 'near0' or 'near1'.
#[pyfunction]
#[pyo3(signature = (regime, rho, max_mean_delay, seed = 0, restarts = 8))]
fn design_long_term(
    regime: &str,
    rho: usize,
    max_mean_delay: f64,
    seed: u64,
    restarts: usize,
) -> PyResult<PyDesignOutcome> {
    let regime = match regime {
        "near0" => SharpRegime::Near0,
        "near1" => SharpRegime::Near1,
        other => {
            return Err(PyValueError::new_err(format!(
                "regime must be 'near0' or 'near1', got '{other}'"
            )))
        }
    };
    let c = ConstraintSet::new(rho, max_mean_delay).map_err(to_py_err)?;
    mixdelay::design::design_long_term(regime, &c, &options(seed, restarts))
        .map(outcome)
        .map_err(to_py_err)
}

/// Optimal short-term characteristic for `n_senders` over `rho` rounds.
#[pyfunction]
#[pyo3(signature = (n_senders, rho, max_mean_delay, seed = 0, restarts = 8))]
fn design_short_term(
    n_senders: usize,
    rho: usize,
    max_mean_delay: f64,
    seed: u64,
    restarts: usize,
) -> PyResult<PyDesignOutcome> {
    let c = ConstraintSet::new(rho, max_mean_delay).map_err(to_py_err)?;
    mixdelay::design::design_short_term(n_senders, &c, &options(seed, restarts))
        .map(outcome)
        .map_err(to_py_err)
}

/// Closed-form minimizer of γ1 over the feasible set.
#[pyfunction]
fn min_gamma1_filter(rho: usize, max_mean_delay: f64) -> PyResult<PyDelayCharacteristic> {
    let c = ConstraintSet::new(rho, max_mean_delay).map_err(to_py_err)?;
    Ok(PyDelayCharacteristic {
        inner: mixdelay::design::min_gamma1_closed(&c).map_err(to_py_err)?,
    })
}

/// Truncated exponential mix `f_k = alpha·(1-alpha)^k`.
#[pyfunction]
#[pyo3(signature = (alpha, length, lump_tail = true))]
fn exponential_mix(alpha: f64, length: usize, lump_tail: bool) -> PyResult<PyDelayCharacteristic> {
    let tail = if lump_tail {
        TailMode::LumpLast
    } else {
        TailMode::Renormalize
    };
    Ok(PyDelayCharacteristic {
        inner: mixdelay::network::exponential_mix(alpha, length, tail).map_err(to_py_err)?,
    })
}

/// Convolution of node characteristics.
#[pyfunction]
fn cascade(filters: Vec<PyDelayCharacteristic>) -> PyResult<PyDelayCharacteristic> {
    let parts: Vec<_> = filters.into_iter().map(|f| f.inner).collect();
    Ok(PyDelayCharacteristic {
        inner: mixdelay::network::cascade(&parts).map_err(to_py_err)?,
    })
}

/// Probability-weighted mixture of node characteristics.
#[pyfunction]
fn parallel(
    filters: Vec<PyDelayCharacteristic>,
    weights: Vec<f64>,
) -> PyResult<PyDelayCharacteristic> {
    let parts: Vec<_> = filters.into_iter().map(|f| f.inner).collect();
    Ok(PyDelayCharacteristic {
        inner: mixdelay::network::parallel(&parts, &weights).map_err(to_py_err)?,
    })
}

/// Delay histogram of the decentralized exponential mix:
/// (counts, censored).
#[pyfunction]
#[pyo3(signature = (n_nodes, alpha, n_messages, max_rounds = 400, seed = 0))]
fn simulate_decentralized(
    n_nodes: usize,
    alpha: f64,
    n_messages: usize,
    max_rounds: usize,
    seed: u64,
) -> PyResult<(Vec<u64>, u64)> {
    let hist =
        mixdelay::network::simulate_decentralized(n_nodes, alpha, n_messages, max_rounds, seed)
            .map_err(to_py_err)?;
    Ok((hist.counts, hist.censored))
}

/// Closed-form asymptotic MSE as a dict.
#[pyfunction]
#[pyo3(signature = (rates, sharpness, filter, rho, gamma2 = "nonneg"))]
fn closed_form_mse(
    py: Python<'_>,
    rates: Vec<f64>,
    sharpness: Vec<f64>,
    filter: PyDelayCharacteristic,
    rho: usize,
    gamma2: &str,
) -> PyResult<Py<pyo3::types::PyDict>> {
    use pyo3::types::PyDict;
    let report =
        mixdelay::theory::closed_form_mse(&rates, &sharpness, &filter.inner, rho, parse_gamma2(gamma2)?)
            .map_err(to_py_err)?;
    let dict = PyDict::new(py);
    dict.set_item("mse_total", report.mse_total)?;
    dict.set_item("term_filter_dependent", report.term_filter_dependent)?;
    dict.set_item("term_filter_independent", report.term_filter_independent)?;
    dict.set_item("gamma1", report.gammas.gamma1)?;
    dict.set_item("gamma2", report.gammas.gamma2)?;
    dict.set_item("gamma3", report.gammas.gamma3)?;
    dict.set_item("rate_sum_large", report.assumption_flags.rate_sum_large)?;
    dict.set_item("horizon_large", report.assumption_flags.horizon_large)?;
    Ok(dict.into())
}

/// Monte-Carlo adversary MSE on a Zipf scenario: (mean, std_error).
#[pyfunction]
#[pyo3(signature = (n_senders, n_receivers, friends, exponent, rate, filter, rho, trials, seed = 0, weighting = "rate2"))]
#[allow(clippy::too_many_arguments)]
fn mc_mse_zipf(
    n_senders: usize,
    n_receivers: usize,
    friends: usize,
    exponent: f64,
    rate: f64,
    filter: PyDelayCharacteristic,
    rho: usize,
    trials: usize,
    seed: u64,
    weighting: &str,
) -> PyResult<(f64, f64)> {
    let weighting = match weighting {
        "rate2" => MseWeighting::RateSquared,
        "rate" => MseWeighting::Rate,
        other => {
            return Err(PyValueError::new_err(format!(
                "weighting must be 'rate2' or 'rate', got '{other}'"
            )))
        }
    };
    let profile =
        mixdelay::traffic::gen_zipf_profile(n_senders, n_receivers, friends, exponent, seed)
            .map_err(to_py_err)?;
    let rates = vec![rate; n_senders];
    let report = mixdelay::adversary::mc_mse(
        &profile,
        &rates,
        &filter.inner,
        rho,
        trials,
        seed,
        &McOptions {
            ridge: 0.0,
            weighting,
        },
    )
    .map_err(to_py_err)?;
    Ok((report.mean, report.std_error))
}

/// Per-sender sharpness of a Zipf profile.
#[pyfunction]
fn zipf_sharpness(
    n_senders: usize,
    n_receivers: usize,
    friends: usize,
    exponent: f64,
    seed: u64,
) -> PyResult<Vec<f64>> {
    let profile =
        mixdelay::traffic::gen_zipf_profile(n_senders, n_receivers, friends, exponent, seed)
            .map_err(to_py_err)?;
    Ok(profile.sharpness())
}

#[pymodule]
fn mixdelay_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyDelayCharacteristic>()?;
    m.add_class::<PyDesignOutcome>()?;
    m.add_function(wrap_pyfunction!(design_long_term, m)?)?;
    m.add_function(wrap_pyfunction!(design_short_term, m)?)?;
    m.add_function(wrap_pyfunction!(min_gamma1_filter, m)?)?;
    m.add_function(wrap_pyfunction!(exponential_mix, m)?)?;
    m.add_function(wrap_pyfunction!(cascade, m)?)?;
    m.add_function(wrap_pyfunction!(parallel, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_decentralized, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form_mse, m)?)?;
    m.add_function(wrap_pyfunction!(mc_mse_zipf, m)?)?;
    m.add_function(wrap_pyfunction!(zipf_sharpness, m)?)?;
    Ok(())
}
