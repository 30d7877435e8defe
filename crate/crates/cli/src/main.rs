use std::f64::consts::FRAC_PI_2;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use screenbo::bench::{self, presets, ExperimentConfig, Method, ProblemSource, SweepConfig, METRICS};
use screenbo::data::{load_dataset, write_dataset, SchemaConfig};
use screenbo::synth::{generate_problem, SynthConfig};

#[derive(Parser)]
#[command(name = "screenbo", version, about = "Simulated two-test screening with Bayesian optimization")]
struct Cli {
    /// Cap on worker threads used for concurrent trials.
    #[arg(long, global = true, env = "SCREENBO_THREADS")]
    threads: Option<usize>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one replicated experiment.
    Run(RunArgs),
    /// Run a parameter grid of experiments.
    Sweep(SweepArgs),
    /// Write a synthetic problem to CSV.
    GenSynth(GenSynthArgs),
    /// Load a database through a schema and report what was read.
    ValidateData(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML). Flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// SGEI, SGT, SGM, STR, GT-Poor, GT-Rich, T-Poor or T-Rich.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    name: Option<String>,
    /// Synthetic problem angle in [0, pi/2].
    #[arg(long, conflicts_with_all = ["dataset", "schema"])]
    theta: Option<f64>,
    /// Synthetic pool size.
    #[arg(long)]
    n: Option<usize>,
    /// Database CSV (needs --schema).
    #[arg(long, requires = "schema")]
    dataset: Option<PathBuf>,
    #[arg(long, requires = "dataset")]
    schema: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long)]
    c_cheap: Option<f64>,
    #[arg(long)]
    c_expensive: Option<f64>,
    #[arg(long)]
    n_top: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    /// Comma-separated trial seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Refit hyperparameters during the screen.
    #[arg(long, overrides_with = "no_refit")]
    refit: bool,
    #[arg(long)]
    no_refit: bool,
    /// Result CSV.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Directory for per-trial trace CSVs.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep config (TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present_any = ["preset", "list_presets", "export_presets"])]
    config: Option<PathBuf>,
    /// Built-in sweep preset.
    #[arg(long)]
    preset: Option<String>,
    /// Replace the sweep's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Override the trial count of every point.
    #[arg(long)]
    trials: Option<usize>,
    /// Print the built-in presets and exit.
    #[arg(long)]
    list_presets: bool,
    /// Write the built-in presets and schemas to a directory and exit.
    #[arg(long, value_name = "DIR")]
    export_presets: Option<PathBuf>,
    /// Print the expanded grid without running it.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct GenSynthArgs {
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long)]
    theta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    schema: PathBuf,
}

fn experiment_from_args(a: &RunArgs) -> Result<ExperimentConfig> {
    let mut c = match &a.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => {
            let method = a.method.as_deref().context("--method is required without --config")?;
            let problem = match (&a.dataset, &a.schema, a.theta) {
                (Some(path), Some(schema), _) => ProblemSource::Dataset { path: path.clone(), schema: schema.clone() },
                (None, None, Some(theta)) => ProblemSource::Synth { n: a.n.unwrap_or(500), theta },
                _ => bail!("give either --theta for a synthetic problem or --dataset with --schema"),
            };
            ExperimentConfig {
                name: String::new(),
                problem,
                method: method.parse()?,
                workers: 1,
                budget: None,
                c_cheap: None,
                c_expensive: None,
                n_top: None,
                trials: None,
                base_seed: 0,
                seeds: None,
                refit: None,
                subsample: None,
                model: Default::default(),
                settings: None,
                output: None,
                trace_dir: None,
            }
        }
    };
    if a.config.is_some() {
        if let Some(m) = &a.method {
            c.method = m.parse::<Method>()?;
        }
        match (&mut c.problem, a.theta, a.n) {
            (ProblemSource::Synth { theta, n }, t, size) => {
                if let Some(t) = t {
                    *theta = t;
                }
                if let Some(size) = size {
                    *n = size;
                }
            }
            (ProblemSource::Dataset { .. }, Some(_), _) | (ProblemSource::Dataset { .. }, _, Some(_)) => {
                bail!("--theta and --n only apply to synthetic problems")
            }
            _ => {}
        }
        if let (Some(path), Some(schema)) = (&a.dataset, &a.schema) {
            c.problem = ProblemSource::Dataset { path: path.clone(), schema: schema.clone() };
        }
    }
    if let Some(v) = &a.name {
        c.name = v.clone();
    }
    if let Some(v) = a.workers {
        c.workers = v;
    }
    c.budget = a.budget.or(c.budget);
    c.c_cheap = a.c_cheap.or(c.c_cheap);
    c.c_expensive = a.c_expensive.or(c.c_expensive);
    c.n_top = a.n_top.or(c.n_top);
    if a.trials.is_some() || a.seeds.is_some() {
        c.trials = a.trials;
        c.seeds = a.seeds.clone();
    }
    if let Some(v) = a.base_seed {
        c.base_seed = v;
    }
    if a.refit {
        c.refit = Some(true);
    }
    if a.no_refit {
        c.refit = Some(false);
    }
    if a.output.is_some() {
        c.output = a.output.clone();
    }
    if a.trace_dir.is_some() {
        c.trace_dir = a.trace_dir.clone();
    }
    c.validate()?;
    Ok(c)
}

fn run(a: RunArgs) -> Result<()> {
    let config = experiment_from_args(&a)?;
    let result = bench::run_experiment(&config)?;
    let sums = result.summaries();
    println!("{} on {} ({} trials)", config.method, config.problem_label(), result.trials.len());
    for (name, s) in METRICS.iter().zip(sums) {
        println!("  {name:<20} {:>12.4} ± {:.4}", s.mean, s.se);
    }
    if let Some(out) = &config.output {
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    if a.list_presets {
        for name in presets::names() {
            println!("{name}");
        }
        return Ok(());
    }
    if let Some(dir) = &a.export_presets {
        presets::export(dir)?;
        println!("wrote presets to {}", dir.display());
        return Ok(());
    }
    let mut s = match (&a.config, &a.preset) {
        (Some(path), _) => SweepConfig::from_file(path)?,
        (None, Some(name)) => presets::sweep(name)?,
        (None, None) => bail!("give --config or --preset"),
    };
    if let Some(dir) = &a.output_dir {
        s.output_dir = dir.clone();
    }
    if let Some(t) = a.trials {
        s.set_trials(t)?;
    }
    if a.dry_run {
        for p in s.expand()? {
            let label: Vec<String> = p.overrides.iter().map(|(k, v)| format!("{k}={}", v.as_str().map_or_else(|| v.to_string(), String::from))).collect();
            println!("{} -> {}", label.join(" "), p.config.output.unwrap_or_default().display());
        }
        return Ok(());
    }
    let r = bench::sweep(&s)?;
    println!("{} grid points; summary in {}", r.points.len(), r.summary_path.display());
    Ok(())
}

fn gen_synth(a: GenSynthArgs) -> Result<()> {
    if !(0.0..=FRAC_PI_2).contains(&a.theta) {
        bail!("--theta must lie in [0, pi/2]");
    }
    let ds = generate_problem(&SynthConfig::new(a.n, a.theta, a.seed)?)?;
    write_dataset(&a.output, &ds)?;
    println!("wrote {} candidates to {}", ds.len(), a.output.display());
    Ok(())
}

fn validate_data(a: ValidateArgs) -> Result<()> {
    let schema = SchemaConfig::from_file(&a.schema).with_context(|| format!("schema {}", a.schema.display()))?;
    let ds = load_dataset(&a.dataset, &schema).with_context(|| format!("dataset {}", a.dataset.display()))?;
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (cl, ch) = range(&ds.cheap_scores);
    let (el, eh) = range(&ds.expensive_scores);
    println!("{} rows, {} features ({})", ds.len(), ds.dim(), ds.feature_names.join(", "));
    println!("cheap scores     in [{cl}, {ch}]");
    println!("expensive scores in [{el}, {eh}]");
    if schema.n_top > ds.len() {
        bail!("n_top = {} exceeds the {} rows read", schema.n_top, ds.len());
    }
    println!("ok");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        screenbo::par::cap_threads(n);
    }
    let outcome = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::GenSynth(a) => gen_synth(a),
        Command::ValidateData(a) => validate_data(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
