//! Flat key=value experiment configuration.
//!
//! A config file pins every knob of an experiment so reruns are diff-able;
//! command-line flags override file values (flags win). Unknown keys are
//! rejected to keep provenance honest.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mixdelay::adversary::MseWeighting;
use mixdelay::characteristic::Gamma2Mode;

/// How per-sender rates are given.
#[derive(Debug, Clone)]
pub enum RateSpec {
    Constant(f64),
    PerSender(Vec<f64>),
}

impl RateSpec {
    pub fn resolve(&self, n_senders: usize) -> Result<Vec<f64>> {
        match self {
            RateSpec::Constant(r) => Ok(vec![*r; n_senders]),
            RateSpec::PerSender(v) => {
                if v.len() != n_senders {
                    bail!("rates list has {} entries for {} senders", v.len(), n_senders);
                }
                Ok(v.clone())
            }
        }
    }
}

/// All experiment knobs with desk-scale defaults.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub n_senders: usize,
    pub n_receivers: usize,
    pub rho: usize,
    pub rho_long: usize,
    pub rho_short: usize,
    pub dbar: f64,
    pub rates: RateSpec,
    pub friends: usize,
    pub zipf_exponent: f64,
    pub trials: usize,
    pub seed: u64,
    pub restarts: usize,
    pub objective: Option<String>,
    pub filters: Vec<String>,
    pub alpha: f64,
    pub messages: usize,
    pub nodes: usize,
    pub stages: usize,
    pub stage_len: Option<usize>,
    pub ridge: f64,
    pub weighting: MseWeighting,
    pub gamma2: Gamma2Mode,
    pub full_scale: bool,
    /// External traffic trace (`round,sender,count` CSV) used instead of the
    /// Poisson generator; rates are taken as the empirical column means.
    pub trace: Option<PathBuf>,
    /// Write one simulated observation pair (inputs/outputs CSVs) per
    /// `evaluate` run.
    pub dump_observation: bool,
    /// Wall-clock round length in seconds. Metadata only: every quantity in
    /// the pipeline is measured in rounds.
    pub tau_seconds: Option<f64>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: "desk".into(),
            n_senders: 20,
            n_receivers: 20,
            rho: 100,
            rho_long: 300,
            rho_short: 100,
            dbar: 20.0,
            rates: RateSpec::Constant(5.0),
            friends: 10,
            zipf_exponent: 1.0,
            trials: 50,
            seed: 1,
            restarts: 8,
            objective: None,
            filters: Vec::new(),
            alpha: 0.3,
            messages: 100_000,
            nodes: 5,
            stages: 5,
            stage_len: None,
            ridge: 0.0,
            weighting: MseWeighting::RateSquared,
            gamma2: Gamma2Mode::NonNegativeLags,
            full_scale: false,
            trace: None,
            dump_observation: false,
            tau_seconds: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected key=value", path.display(), lineno + 1);
            };
            cfg.set(key.trim(), value.trim())
                .with_context(|| format!("{}:{}", path.display(), lineno + 1))?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "scenario" => self.scenario = value.to_string(),
            "n_senders" => self.n_senders = value.parse()?,
            "n_receivers" => self.n_receivers = value.parse()?,
            "rho" => self.rho = value.parse()?,
            "rho_long" => self.rho_long = value.parse()?,
            "rho_short" => self.rho_short = value.parse()?,
            "dbar" => self.dbar = value.parse()?,
            "rate" => self.rates = RateSpec::Constant(value.parse()?),
            "rates" => {
                let list = value
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<f64>, _>>()?;
                self.rates = RateSpec::PerSender(list);
            }
            "friends" => self.friends = value.parse()?,
            "zipf_exponent" => self.zipf_exponent = value.parse()?,
            "trials" => self.trials = value.parse()?,
            "seed" => self.seed = value.parse()?,
            "restarts" => self.restarts = value.parse()?,
            "objective" => self.objective = Some(value.to_string()),
            "filter" => self.filters = vec![value.to_string()],
            "filters" => {
                self.filters = value.split(',').map(|v| v.trim().to_string()).collect()
            }
            "alpha" => self.alpha = value.parse()?,
            "messages" => self.messages = value.parse()?,
            "nodes" => self.nodes = value.parse()?,
            "stages" => self.stages = value.parse()?,
            "stage_len" => self.stage_len = Some(value.parse()?),
            "ridge" => self.ridge = value.parse()?,
            "weighting" => {
                self.weighting = match value {
                    "rate2" => MseWeighting::RateSquared,
                    "rate" => MseWeighting::Rate,
                    other => bail!("weighting must be rate2 or rate, got {other}"),
                }
            }
            "gamma2" => {
                self.gamma2 = match value {
                    "nonneg" => Gamma2Mode::NonNegativeLags,
                    "all" => Gamma2Mode::AllLags,
                    other => bail!("gamma2 must be nonneg or all, got {other}"),
                }
            }
            "full_scale" => self.full_scale = value.parse()?,
            "trace" => self.trace = Some(PathBuf::from(value)),
            "dump_observation" => self.dump_observation = value.parse()?,
            "tau_seconds" => self.tau_seconds = Some(value.parse()?),
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => bail!("unknown config key `{other}`"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_senders == 0
            || self.n_receivers == 0
            || self.rho == 0
            || self.rho_long == 0
            || self.rho_short == 0
            || self.trials == 0
        {
            bail!("dimensional config fields must be positive");
        }
        if self.dbar < 0.0 {
            bail!("dbar must be non-negative");
        }
        if let Some(trace) = &self.trace {
            if !trace.exists() {
                bail!("trace file `{}` does not exist", trace.display());
            }
        }
        for source in &self.filters {
            if parse_builtin_filter(source).is_none() && !Path::new(source).exists() {
                bail!("filter file `{source}` does not exist");
            }
        }
        Ok(())
    }
}

/// Builtin filter names: `delta`, `uniform-K`, `expmix-ALPHA`.
pub fn parse_builtin_filter(name: &str) -> Option<mixdelay::DelayCharacteristic> {
    if name == "delta" {
        return Some(mixdelay::DelayCharacteristic::delta());
    }
    if let Some(k) = name.strip_prefix("uniform-") {
        let len: usize = k.parse().ok().filter(|l| *l >= 1)?;
        return Some(mixdelay::DelayCharacteristic::uniform(len));
    }
    if let Some(a) = name.strip_prefix("expmix-") {
        let alpha: f64 = a.parse().ok()?;
        return mixdelay::network::exponential_mix(alpha, 64, mixdelay::network::TailMode::LumpLast)
            .ok();
    }
    None
}

/// Resolve a filter source: builtin name or characteristic file.
pub fn load_filter(source: &str) -> Result<mixdelay::DelayCharacteristic> {
    if let Some(f) = parse_builtin_filter(source) {
        return Ok(f);
    }
    mixdelay::DelayCharacteristic::read_file(Path::new(source))
        .with_context(|| format!("loading filter `{source}`"))
}

/// A stable identifier for report rows: builtin name, or the file stem.
pub fn filter_id(source: &str) -> String {
    if parse_builtin_filter(source).is_some() {
        source.to_string()
    } else {
        Path::new(source)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| source.to_string())
    }
}
