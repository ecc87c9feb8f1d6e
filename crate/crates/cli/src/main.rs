//! `pdrm-lab`: command-line front end for machines, experiments and analyses.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use pdrm_core::analysis::{
    check_k_stack_optimality, count_full_bound, count_stack_strings, measure_blowup, value_iteration, Verdict,
    DEFAULT_TOLERANCE,
};
use pdrm_core::cra::{check_reward_equivalence, random_words, translate_cra_to_pdrm, Cra};
use pdrm_core::harness::{
    emit_plot_data, evaluate_agent, run_experiment, ExperimentConfig, RunOptions,
};
use pdrm_core::pdrm::Pdrm;
use pdrm_core::product::{enumerate_bounded_product, DEFAULT_STATE_CAP};

const WORKERS_VAR: &str = "PDRM_LAB_WORKERS";

#[derive(Parser)]
#[command(name = "pdrm-lab", version, about = "Pushdown reward machine experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a `.pdrm` or `.cra` file.
    Validate { file: PathBuf },
    /// Run every (agent, seed) pair of an experiment, resuming finished runs.
    Train {
        config: PathBuf,
        /// Output directory; defaults to the one named in the config.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker threads; overrides PDRM_LAB_WORKERS.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Train one agent for one seed and report a greedy evaluation.
    Eval {
        config: PathBuf,
        #[arg(long)]
        agent: String,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
    },
    /// Check whether the top-k stack view suffices for optimal control.
    CheckTopk {
        /// Experiment config supplying the environment and pdRM.
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 0.99)]
        gamma: f64,
        /// Maximum stack length; defaults to the longest the horizon allows.
        #[arg(long)]
        stack_cap: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
        state_cap: usize,
        /// Counterexamples to print.
        #[arg(long, default_value_t = 5)]
        list: usize,
    },
    /// Translate a one-counter `.cra` into an equivalent `.pdrm`.
    TranslateCra {
        input: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compare reward traces of a CRA and a pdRM on random words.
    CheckEquiv {
        cra: PathBuf,
        pdrm: PathBuf,
        #[arg(long, default_value_t = 1000)]
        words: usize,
        #[arg(long, default_value_t = 30)]
        max_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Closed-form state counts, optionally against an enumerated product.
    Count {
        /// Stack alphabet size.
        #[arg(long)]
        symbols: u64,
        /// Top-k window.
        #[arg(long)]
        k: Option<u64>,
        /// Input reads, for the full-stack bound.
        #[arg(long)]
        reads: Option<u64>,
        /// Longest push of one transition.
        #[arg(long, default_value_t = 1)]
        max_push: u64,
        /// Longest chain of silent transitions.
        #[arg(long, default_value_t = 0)]
        eps_chain: u64,
        /// Experiment config whose product is enumerated for comparison.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, requires = "config")]
        horizon: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
        state_cap: usize,
    },
    /// Collect aggregate curves into plot-ready TSV plus a manifest.
    PlotData { outdir: PathBuf },
}

fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_VAR) {
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("{WORKERS_VAR}={v} is not a count"))?;
            Ok(Some(n.max(1)))
        }
        Err(_) => Ok(None),
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_file(path).map_err(anyhow::Error::from)
}

fn validate(file: &Path) -> Result<()> {
    let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    match file.extension().and_then(|e| e.to_str()) {
        Some("cra") => {
            let cra = Cra::from_text(&text).with_context(|| format!("{}", file.display()))?;
            println!(
                "ok: cra `{}` with {} states, {} counters, {} transitions",
                cra.name(),
                cra.state_names().len(),
                cra.n_counters(),
                cra.transitions().len()
            );
        }
        _ => {
            let pdrm = Pdrm::from_text(&text).with_context(|| format!("{}", file.display()))?;
            println!("ok: {pdrm}");
        }
    }
    Ok(())
}

fn train(config: &Path, output: Option<PathBuf>, workers: Option<usize>) -> Result<ExitCode> {
    let cfg = load_config(config)?;
    let opts = RunOptions {
        workers: workers.or(workers_from_env()?),
        output_dir: output,
    };
    let summary = run_experiment(&cfg, &opts)?;
    for r in &summary.runs {
        let median = r.final_median.map_or("-".to_string(), |m| format!("{m:.3}"));
        let note = if r.resumed { " (resumed)" } else { "" };
        println!("{:<20} seed {:<4} {:?} final median {median}{note}", r.agent, r.seed, r.status);
    }
    let failed = summary.failures().count();
    if failed > 0 {
        for r in summary.failures() {
            eprintln!("failed: {} seed {}: {}", r.agent, r.seed, r.error.as_deref().unwrap_or(""));
        }
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn eval(config: &Path, agent: &str, seed: u64, episodes: usize) -> Result<()> {
    let cfg = load_config(config)?;
    let spec = cfg
        .agent(agent)
        .with_context(|| format!("no agent `{agent}` in {}", config.display()))?;
    let hp = pdrm_core::learn::Hyperparams {
        seed,
        ..spec.hyperparams.clone()
    };
    let (run, stats) = evaluate_agent(&cfg, spec, &hp, episodes).map_err(anyhow::Error::msg)?;
    println!(
        "{agent} seed {seed}: {} training steps, {} table keys",
        run.stats.steps, run.stats.table_keys
    );
    println!(
        "greedy over {episodes} episodes: median {:.4}  p25 {:.4}  p75 {:.4}",
        stats.median, stats.p25, stats.p75
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn check_topk(
    config: &Path,
    k: usize,
    horizon: usize,
    gamma: f64,
    stack_cap: Option<usize>,
    state_cap: usize,
    list: usize,
) -> Result<ExitCode> {
    let cfg = load_config(config)?;
    let pdrm = cfg.pdrm.as_ref().context("config has no pdrm")?;
    let env = cfg.build_env()?;
    let mdp = enumerate_bounded_product(env.as_ref(), pdrm, horizon, gamma, stack_cap, state_cap)?;
    println!("enumerated {} product states (horizon {horizon})", mdp.n_states());
    let sol = value_iteration(&mdp, DEFAULT_TOLERANCE)?;
    println!(
        "value iteration: {} sweeps, residual {:.2e}, initial value {:.6}",
        sol.iterations,
        sol.residual,
        sol.initial_value(&mdp)
    );
    let report = check_k_stack_optimality(&sol, &mdp, k, list);
    println!("{report}");
    for c in &report.counterexamples {
        println!("  {}", c.describe(&mdp, pdrm));
    }
    Ok(match report.verdict {
        Verdict::Sufficient => ExitCode::SUCCESS,
        _ => ExitCode::from(2),
    })
}

fn translate(input: &Path, output: Option<&Path>) -> Result<()> {
    let cra = Cra::from_file(input).with_context(|| format!("{}", input.display()))?;
    let pdrm = translate_cra_to_pdrm(&cra)?;
    match output {
        Some(p) => std::fs::write(p, pdrm.to_text()).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{}", pdrm.to_text()),
    }
    Ok(())
}

fn check_equiv(cra: &Path, pdrm: &Path, n_words: usize, max_len: usize, seed: u64) -> Result<ExitCode> {
    let cra = Cra::from_file(cra).with_context(|| format!("{}", cra.display()))?;
    let pdrm = Pdrm::from_file(pdrm).with_context(|| format!("{}", pdrm.display()))?;
    if cra.props() != pdrm.props() {
        bail!("proposition lists differ: {:?} vs {:?}", cra.props(), pdrm.props());
    }
    let words = random_words(cra.props().len(), n_words, max_len, seed);
    let mut report = check_reward_equivalence(&cra, &pdrm, &words);
    report.seed = Some(seed);
    println!(
        "{} of {} words equal ({} compared on a prefix), {} mismatches",
        report.n_equal,
        report.n_words,
        report.n_truncated,
        report.mismatches.len()
    );
    for m in report.mismatches.iter().take(5) {
        println!("  {m:?}");
    }
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

#[allow(clippy::too_many_arguments)]
fn count(
    symbols: u64,
    k: Option<u64>,
    reads: Option<u64>,
    max_push: u64,
    eps_chain: u64,
    config: Option<&Path>,
    horizon: Option<usize>,
    state_cap: usize,
) -> Result<()> {
    if let Some(k) = k {
        println!("stack strings of length <= {k} over {symbols} symbols: {}", count_stack_strings(symbols, k));
    }
    if let Some(n) = reads {
        println!(
            "full-stack bound after {n} reads (push <= {max_push}, silent chain <= {eps_chain}): {}",
            count_full_bound(symbols, n, max_push, eps_chain)
        );
    }
    if let Some(config) = config {
        let cfg = load_config(config)?;
        let pdrm = cfg.pdrm.as_ref().context("config has no pdrm")?;
        let env = cfg.build_env()?;
        let horizon = horizon.context("--horizon is required with --config")?;
        let ks: Vec<usize> = k.map_or(vec![1], |k| vec![k as usize]);
        let report = measure_blowup(env.as_ref(), pdrm, horizon, &ks, state_cap)?;
        println!("product states: {}", report.n_product_states);
        println!("distinct stacks: {}, longest {}", report.distinct_stacks, report.max_stack_len);
        println!("full keys: {} (bound {})", report.full.empirical, report.full.bound);
        for (k, row) in &report.top_k {
            println!("top-{k} keys: {} (bound {})", row.empirical, row.bound);
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { file } => validate(&file).map(|_| ExitCode::SUCCESS),
        Command::Train { config, output, workers } => train(&config, output, workers),
        Command::Eval {
            config,
            agent,
            seed,
            episodes,
        } => eval(&config, &agent, seed, episodes).map(|_| ExitCode::SUCCESS),
        Command::CheckTopk {
            config,
            k,
            horizon,
            gamma,
            stack_cap,
            state_cap,
            list,
        } => check_topk(&config, k, horizon, gamma, stack_cap, state_cap, list),
        Command::TranslateCra { input, output } => translate(&input, output.as_deref()).map(|_| ExitCode::SUCCESS),
        Command::CheckEquiv {
            cra,
            pdrm,
            words,
            max_len,
            seed,
        } => check_equiv(&cra, &pdrm, words, max_len, seed),
        Command::Count {
            symbols,
            k,
            reads,
            max_push,
            eps_chain,
            config,
            horizon,
            state_cap,
        } => count(symbols, k, reads, max_push, eps_chain, config.as_deref(), horizon, state_cap)
            .map(|_| ExitCode::SUCCESS),
        Command::PlotData { outdir } => {
            let path = emit_plot_data(&outdir)?;
            println!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
