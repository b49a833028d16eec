//! Experiment harness around the `mixdelay` library.
//!
//! Single binary, one subcommand per experiment. Every run is deterministic
//! given `(config, seed)`: data goes to files under `--out`, diagnostics to
//! stderr, and reruns produce byte-identical CSVs.

mod config;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use config::{filter_id, load_filter, ExperimentConfig};
use mixdelay::adversary::{mc_mse, McOptions};
use mixdelay::characteristic::{validate, ConstraintSet, DelayCharacteristic};
use mixdelay::design::{
    design_long_term, design_short_term, optimize_filter, DesignObjective, DesignResult,
    OptimizerOptions, SharpRegime,
};
use mixdelay::network::{
    decompose_cascade, exponential_mix, simulate_decentralized, tv_distance, write_stage_dir,
    DecomposeOptions, TailMode,
};
use mixdelay::sig12;
use mixdelay::theory::closed_form_mse;
use mixdelay::traffic::gen_zipf_profile;

#[derive(Parser)]
#[command(name = "mixdelay", about = "Design and validate timed-mix delay characteristics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Flat key=value experiment config; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for every derived random stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte-Carlo trial count.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Design a delay characteristic and write it as a filter file.
    Design {
        #[command(flatten)]
        common: CommonArgs,
        /// Objective: sharp0 | sharp1 | shortterm | mc.
        #[arg(long)]
        objective: Option<String>,
        /// Horizon / filter length bound in rounds.
        #[arg(long)]
        rho: Option<usize>,
        /// Average delay cap in rounds.
        #[arg(long)]
        dbar: Option<f64>,
        /// Senders protected by the design (shortterm and mc objectives).
        #[arg(long)]
        n_senders: Option<usize>,
        /// Random restarts for the optimizer.
        #[arg(long)]
        restarts: Option<usize>,
        /// Filter file to write (run report lands next to it).
        #[arg(long)]
        out_file: Option<PathBuf>,
    },
    /// Monte-Carlo versus closed-form MSE for a list of filters.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Filter source (builtin name or file); repeatable.
        #[arg(long = "filter")]
        filters: Vec<String>,
    },
    /// Design the long-term (both sharpness regimes) and short-term filters
    /// and emit their taps and spectra.
    Fig2 {
        #[command(flatten)]
        common: CommonArgs,
        /// Run at the full scale (100 senders, 1500/500 rounds) instead of
        /// the desk preset (20 senders, 300/100 rounds).
        #[arg(long)]
        full_scale: bool,
    },
    /// Decompose a short-term design into cascade stages.
    CascadeDemo {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        stages: Option<usize>,
    },
    /// Centralized versus decentralized exponential mix histograms.
    ExpmixDemo {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        messages: Option<usize>,
        #[arg(long)]
        nodes: Option<usize>,
    },
    /// Evaluate the closed-form MSE for the configured scenario and filter.
    TheoryCheck {
        #[command(flatten)]
        common: CommonArgs,
        /// Filter source (builtin name or file).
        #[arg(long)]
        filter: Option<String>,
    },
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Design {
            common,
            objective,
            rho,
            dbar,
            n_senders,
            restarts,
            out_file,
        } => cmd_design(common, objective, rho, dbar, n_senders, restarts, out_file),
        Command::Evaluate { common, filters } => cmd_evaluate(common, filters),
        Command::Fig2 { common, full_scale } => cmd_fig2(common, full_scale),
        Command::CascadeDemo { common, stages } => cmd_cascade_demo(common, stages),
        Command::ExpmixDemo {
            common,
            alpha,
            messages,
            nodes,
        } => cmd_expmix_demo(common, alpha, messages, nodes),
        Command::TheoryCheck { common, filter } => cmd_theory_check(common, filter),
    };
    if let Err(err) = outcome {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(trials) = common.trials {
        cfg.trials = trials;
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    Ok(cfg)
}

fn optimizer_options(cfg: &ExperimentConfig) -> OptimizerOptions {
    OptimizerOptions {
        restarts: cfg.restarts,
        seed: cfg.seed,
        ..OptimizerOptions::default()
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// design
// ---------------------------------------------------------------------------

fn cmd_design(
    common: CommonArgs,
    objective: Option<String>,
    rho: Option<usize>,
    dbar: Option<f64>,
    n_senders: Option<usize>,
    restarts: Option<usize>,
    out_file: Option<PathBuf>,
) -> Result<()> {
    let mut cfg = load_config(&common)?;
    if let Some(o) = objective {
        cfg.objective = Some(o);
    }
    if let Some(r) = rho {
        cfg.rho = r;
    }
    if let Some(d) = dbar {
        cfg.dbar = d;
    }
    if let Some(n) = n_senders {
        cfg.n_senders = n;
    }
    if let Some(r) = restarts {
        cfg.restarts = r;
    }
    let objective = cfg
        .objective
        .clone()
        .unwrap_or_else(|| "sharp0".to_string());

    let c = ConstraintSet::new(cfg.rho, cfg.dbar)?;
    if c.delay_bound_vacuous() {
        eprintln!(
            "note: delay cap {} >= rho-1; the average-delay constraint is vacuous",
            cfg.dbar
        );
    }
    let opts = optimizer_options(&cfg);
    let rates = cfg.rates.resolve(cfg.n_senders)?;
    let result: DesignResult = match objective.as_str() {
        "sharp0" => design_long_term(SharpRegime::Near0, &c, &opts)?,
        "sharp1" => design_long_term(SharpRegime::Near1, &c, &opts)?,
        "shortterm" => design_short_term(cfg.n_senders, &c, &opts)?,
        "mc" => {
            let profile = gen_zipf_profile(
                cfg.n_senders,
                cfg.n_receivers,
                cfg.friends,
                cfg.zipf_exponent,
                cfg.seed,
            )?;
            optimize_filter(
                &DesignObjective::McMse {
                    profile: &profile,
                    rates: &rates,
                    trials: cfg.trials,
                },
                &c,
                &OptimizerOptions {
                    max_iterations: 60,
                    ..opts
                },
            )?
        }
        other => bail!("unknown objective `{other}` (want sharp0|sharp1|shortterm|mc)"),
    };

    if !result.converged {
        eprintln!("warning: optimizer hit the iteration cap; best iterate returned");
    }
    let report = validate(&result.filter, &c);
    if !report.feasible {
        bail!("designed filter failed feasibility: {:?}", report.violations);
    }

    let filter_path = out_file.unwrap_or_else(|| cfg.out_dir.join("designed.filter"));
    if let Some(parent) = filter_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    result.filter.write_file(&filter_path)?;
    eprintln!("wrote {}", filter_path.display());

    let mut report_csv = String::from(
        "objective,rho,dbar,n_senders,seed,restarts,iterations,objective_value,kkt_residual,converged,mean_delay,tau_seconds\n",
    );
    report_csv.push_str(&format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}\n",
        objective,
        cfg.rho,
        sig12(cfg.dbar),
        cfg.n_senders,
        cfg.seed,
        result.restarts_used,
        result.iterations,
        sig12(result.objective_value),
        sig12(result.kkt_residual),
        result.converged,
        sig12(result.filter.mean_delay()),
        cfg.tau_seconds.map(sig12).unwrap_or_else(|| "na".into()),
    ));
    let mut report_path = filter_path.clone().into_os_string();
    report_path.push(".report.csv");
    write(Path::new(&report_path), &report_csv)
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

fn cmd_evaluate(common: CommonArgs, flag_filters: Vec<String>) -> Result<()> {
    let mut cfg = load_config(&common)?;
    if !flag_filters.is_empty() {
        cfg.filters = flag_filters;
    }
    if cfg.filters.is_empty() {
        cfg.filters = vec!["delta".into(), "uniform-4".into()];
    }
    cfg.validate()?;

    // external trace (empirical rates) or the Poisson generator
    let external = match &cfg.trace {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading trace {}", path.display()))?;
            let trace = mixdelay::traffic::TrafficTrace::from_csv(&text, None)?;
            eprintln!(
                "ingested trace {}: {} rounds x {} senders",
                path.display(),
                trace.rounds(),
                trace.n_senders()
            );
            Some(trace)
        }
        None => None,
    };
    let n_senders = external
        .as_ref()
        .map(|t| t.n_senders())
        .unwrap_or(cfg.n_senders);
    let rho = external.as_ref().map(|t| t.rounds()).unwrap_or(cfg.rho);
    let rates = match &external {
        Some(t) => t.rates().to_vec(),
        None => cfg.rates.resolve(n_senders)?,
    };
    let profile = gen_zipf_profile(
        n_senders,
        cfg.n_receivers,
        cfg.friends,
        cfg.zipf_exponent,
        cfg.seed,
    )?;
    let q = profile.sharpness();
    let mc_opts = McOptions {
        ridge: cfg.ridge,
        weighting: cfg.weighting,
    };

    let mut rows = String::from(
        "filter,mc_mean,mc_std_error,closed_form,rel_gap,rate_sum_large,horizon_large\n",
    );
    for source in &cfg.filters {
        let filter = load_filter(source)?;
        let id = filter_id(source);
        let mc = match &external {
            Some(trace) => mixdelay::adversary::mc_mse_fixed_traffic(
                trace, &profile, &filter, cfg.trials, cfg.seed, &mc_opts,
            )?,
            None => mc_mse(&profile, &rates, &filter, rho, cfg.trials, cfg.seed, &mc_opts)?,
        };
        let cf = closed_form_mse(&rates, &q, &filter, rho, cfg.gamma2)?;
        let gap = (mc.mean - cf.mse_total).abs() / cf.mse_total;
        rows.push_str(&format!(
            "{id},{},{},{},{},{},{}\n",
            sig12(mc.mean),
            sig12(mc.std_error),
            sig12(cf.mse_total),
            sig12(gap),
            cf.assumption_flags.rate_sum_large,
            cf.assumption_flags.horizon_large,
        ));
        write(&cfg.out_dir.join(format!("mc_{id}.csv")), &mc.to_csv())?;
    }
    write(&cfg.out_dir.join("mse_compare.csv"), &rows)?;

    if cfg.dump_observation {
        let filter = load_filter(&cfg.filters[0])?;
        let inputs = match external {
            Some(trace) => trace,
            None => mixdelay::traffic::gen_poisson_traffic(&rates, rho, cfg.seed)?,
        };
        let obs = mixdelay::mix::simulate_mix(&inputs, &profile, &filter, cfg.seed)?;
        let run_id = cfg.seed;
        write(
            &cfg.out_dir.join(format!("obs_{run_id}_inputs.csv")),
            &obs.inputs.to_csv(),
        )?;
        write(
            &cfg.out_dir.join(format!("obs_{run_id}_outputs.csv")),
            &obs.outputs_to_csv(),
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// fig2
// ---------------------------------------------------------------------------

fn taps_csv(f: &DelayCharacteristic) -> String {
    let mut out = String::from("k,tap\n");
    for (k, tap) in f.taps().iter().enumerate() {
        out.push_str(&format!("{k},{}\n", sig12(*tap)));
    }
    out
}

fn spectrum_csv(f: &DelayCharacteristic, rho: usize, n_senders: usize) -> Result<String> {
    let spec = f.dft(rho)?;
    let stop = mixdelay::theory::stopband_bins(n_senders, rho);
    let mut out = String::from("bin,magnitude_db,band\n");
    for k in 0..rho {
        let band = if stop.contains(&k) { "stop" } else { "pass" };
        out.push_str(&format!("{k},{},{band}\n", sig12(spec.magnitude_db(k))));
    }
    Ok(out)
}

fn cmd_fig2(common: CommonArgs, full_scale_flag: bool) -> Result<()> {
    let mut cfg = load_config(&common)?;
    if full_scale_flag {
        cfg.full_scale = true;
    }
    let (n, rho_long, rho_short) = if cfg.full_scale {
        (100, 1500, 500)
    } else {
        (cfg.n_senders, cfg.rho_long, cfg.rho_short)
    };
    let opts = optimizer_options(&cfg);

    let c_long = ConstraintSet::new(rho_long, cfg.dbar)?;
    let near0 = design_long_term(SharpRegime::Near0, &c_long, &opts)?;
    let near1 = design_long_term(SharpRegime::Near1, &c_long, &opts)?;
    let c_short = ConstraintSet::new(rho_short, cfg.dbar)?;
    let short = design_short_term(n, &c_short, &opts)?;

    for (name, result, rho) in [
        ("long_near0", &near0, rho_long),
        ("long_near1", &near1, rho_long),
        ("short", &short, rho_short),
    ] {
        write(
            &cfg.out_dir.join(format!("fig2_{name}_taps.csv")),
            &taps_csv(&result.filter),
        )?;
        write(
            &cfg.out_dir.join(format!("fig2_{name}_spectrum_db.csv")),
            &spectrum_csv(&result.filter, rho, n)?,
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// cascade-demo
// ---------------------------------------------------------------------------

fn cmd_cascade_demo(common: CommonArgs, stages_flag: Option<usize>) -> Result<()> {
    let mut cfg = load_config(&common)?;
    if let Some(s) = stages_flag {
        cfg.stages = s;
    }
    let (n, rho) = if cfg.full_scale {
        (100, 500)
    } else {
        (cfg.n_senders, cfg.rho_short)
    };
    // keep the target support realizable by the stage cascade
    let per_stage_len = cfg
        .stage_len
        .unwrap_or_else(|| (rho - 1).div_ceil(cfg.stages) + 1);
    let support = cfg.stages * (per_stage_len - 1) + 1;
    let design_bound = support.min(rho);

    let c = ConstraintSet::new(design_bound, cfg.dbar)?;
    let opts = optimizer_options(&cfg);
    let target = optimize_filter(
        &DesignObjective::ShortTerm {
            n_senders: n,
            horizon: rho,
        },
        &c,
        &opts,
    )?
    .filter;

    let decomposition =
        decompose_cascade(&target, cfg.stages, per_stage_len, &DecomposeOptions::default())?;
    write_stage_dir(&cfg.out_dir.join("stages"), &decomposition.stages)?;
    eprintln!("wrote {}", cfg.out_dir.join("stages").display());

    let achieved = &decomposition.achieved;
    let mut compare = String::from("k,objective_tap,achieved_tap\n");
    for k in 0..target.len().max(achieved.len()) {
        let t = target.taps().get(k).copied().unwrap_or(0.0);
        let a = achieved.taps().get(k).copied().unwrap_or(0.0);
        compare.push_str(&format!("{k},{},{}\n", sig12(t), sig12(a)));
    }
    write(&cfg.out_dir.join("cascade_compare.csv"), &compare)?;

    let dft_len = rho.max(achieved.len());
    let target_spec = target.dft(dft_len)?;
    let achieved_spec = achieved.dft(dft_len)?;
    let mut spectra = String::from("bin,objective_db,achieved_db\n");
    for k in 0..dft_len {
        spectra.push_str(&format!(
            "{k},{},{}\n",
            sig12(target_spec.magnitude_db(k)),
            sig12(achieved_spec.magnitude_db(k)),
        ));
    }
    write(&cfg.out_dir.join("cascade_spectrum_db.csv"), &spectra)?;

    // single-stage truncation baseline for the summary
    let head = mixdelay::characteristic::project_simplex(
        &target.taps()[..per_stage_len.min(target.len())],
    );
    let baseline: f64 = head
        .iter()
        .zip(target.taps())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        + target
            .taps()
            .iter()
            .skip(per_stage_len)
            .map(|t| t * t)
            .sum::<f64>();
    let summary = format!(
        "stages={}\nper_stage_len={per_stage_len}\nsquared_error={}\nbaseline_single_stage_error={}\nachieved_mass={}\n",
        cfg.stages,
        sig12(decomposition.squared_error),
        sig12(baseline),
        sig12(achieved.taps().iter().sum::<f64>()),
    );
    write(&cfg.out_dir.join("cascade_summary.txt"), &summary)
}

// ---------------------------------------------------------------------------
// expmix-demo
// ---------------------------------------------------------------------------

fn cmd_expmix_demo(
    common: CommonArgs,
    alpha: Option<f64>,
    messages: Option<usize>,
    nodes: Option<usize>,
) -> Result<()> {
    let mut cfg = load_config(&common)?;
    if let Some(a) = alpha {
        cfg.alpha = a;
    }
    if let Some(m) = messages {
        cfg.messages = m;
    }
    if let Some(n) = nodes {
        cfg.nodes = n;
    }

    let max_rounds = 400;
    let centralized = simulate_decentralized(1, cfg.alpha, cfg.messages, max_rounds, cfg.seed)?;
    let decentralized = simulate_decentralized(
        cfg.nodes,
        cfg.alpha,
        cfg.messages,
        max_rounds,
        cfg.seed.wrapping_add(1),
    )?;
    write(
        &cfg.out_dir.join("expmix_centralized.csv"),
        &centralized.to_csv(),
    )?;
    write(
        &cfg.out_dir.join(format!("expmix_nodes{}.csv", cfg.nodes)),
        &decentralized.to_csv(),
    )?;

    let reference: Vec<f64> = (0..max_rounds)
        .map(|k| cfg.alpha * (1.0 - cfg.alpha).powi(k as i32))
        .collect();
    let analytic = exponential_mix(cfg.alpha, max_rounds, TailMode::LumpLast)?;
    let tv_centralized = tv_distance(&centralized, &reference);
    let tv_decentralized = tv_distance(&decentralized, &reference);
    let cross: f64 = centralized
        .pmf()
        .iter()
        .zip(decentralized.pmf().iter())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        * 0.5;
    let summary = format!(
        "alpha={}\nnodes={}\nmessages={}\nanalytic_mean={}\ncentralized_mean={}\ndecentralized_mean={}\ntv_centralized_vs_analytic={}\ntv_decentralized_vs_analytic={}\ntv_centralized_vs_decentralized={}\n",
        sig12(cfg.alpha),
        cfg.nodes,
        cfg.messages,
        sig12(analytic.mean_delay()),
        sig12(centralized.mean()),
        sig12(decentralized.mean()),
        sig12(tv_centralized),
        sig12(tv_decentralized),
        sig12(cross),
    );
    write(&cfg.out_dir.join("expmix_summary.txt"), &summary)
}

// ---------------------------------------------------------------------------
// theory-check
// ---------------------------------------------------------------------------

fn cmd_theory_check(common: CommonArgs, filter: Option<String>) -> Result<()> {
    let mut cfg = load_config(&common)?;
    if let Some(f) = filter {
        cfg.filters = vec![f];
    }
    let source = cfg
        .filters
        .first()
        .cloned()
        .unwrap_or_else(|| "uniform-4".to_string());
    let filter = load_filter(&source)?;
    let rates = cfg.rates.resolve(cfg.n_senders)?;
    let profile = gen_zipf_profile(
        cfg.n_senders,
        cfg.n_receivers,
        cfg.friends,
        cfg.zipf_exponent,
        cfg.seed,
    )?;
    let q = profile.sharpness();
    let report = closed_form_mse(&rates, &q, &filter, cfg.rho, cfg.gamma2)?;

    let mut block = format!(
        "scenario={}\nfilter={}\nn_senders={}\nn_receivers={}\nrho={}\nmean_sharpness={}\n",
        cfg.scenario,
        filter_id(&source),
        cfg.n_senders,
        cfg.n_receivers,
        cfg.rho,
        sig12(q.iter().sum::<f64>() / q.len() as f64),
    );
    block.push_str(&report.to_key_value());
    write(&cfg.out_dir.join("theory_check.txt"), &block)
}
