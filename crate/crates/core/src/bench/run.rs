use std::io::Write;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{ExperimentConfig, Method, ModelKind, ProblemSource, ResolvedScreen};
use crate::data::{load_dataset, Dataset, SchemaConfig};
use crate::engine::{
    mining_regret, optimization_regret, run_sequential, run_single_test, Policy, ScreenSpec, SingleTestPolicy, Trace,
};
use crate::error::Result;
use crate::gp::KernelSpec;
use crate::models::{CovariateModel, MultiFidelityModel, ScoreModel};
use crate::parallel::{simulate_parallel, simulate_parallel_single_test};
use crate::stats::mean_se;
use crate::synth::{self, SynthConfig};

/// Per-trial outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub optimization_regret: f64,
    pub mining_regret: usize,
    pub cheap_tests: usize,
    pub expensive_tests: usize,
    pub total_cost: f64,
    pub total_reward_opt: f64,
    pub total_reward_mine: u32,
}

/// Mean and standard error of one column over trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub screen: ResolvedScreen,
    pub trials: Vec<TrialResult>,
}

/// Columns aggregated in result files, in order.
pub const METRICS: [&str; 7] = [
    "optimization_regret",
    "mining_regret",
    "cheap_tests",
    "expensive_tests",
    "total_cost",
    "total_reward_opt",
    "total_reward_mine",
];

impl TrialResult {
    pub fn metrics(&self) -> [f64; 7] {
        [
            self.optimization_regret,
            self.mining_regret as f64,
            self.cheap_tests as f64,
            self.expensive_tests as f64,
            self.total_cost,
            self.total_reward_opt,
            self.total_reward_mine as f64,
        ]
    }
}

impl ExperimentResult {
    pub fn summary(&self, metric: usize) -> Summary {
        let v: Vec<f64> = self.trials.iter().map(|t| t.metrics()[metric]).collect();
        let (mean, se) = mean_se(&v);
        Summary { mean, se }
    }

    pub fn summaries(&self) -> Vec<Summary> {
        (0..METRICS.len()).map(|k| self.summary(k)).collect()
    }

    fn echo(&self) -> Vec<String> {
        vec![
            self.config.name.clone(),
            self.config.method.to_string(),
            self.config.problem_label(),
            self.config.workers.to_string(),
            self.screen.budget.to_string(),
            self.screen.c_cheap.to_string(),
            self.screen.c_expensive.to_string(),
            self.screen.n_top.to_string(),
        ]
    }

    /// Per-trial rows followed by `mean` and `se` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> =
            vec!["experiment", "method", "problem", "workers", "budget", "c_cheap", "c_expensive", "n_top", "row", "seed"];
        header.extend(METRICS);
        w.write_record(&header)?;
        for t in &self.trials {
            let mut row = self.echo();
            row.push(t.trial.to_string());
            row.push(t.seed.to_string());
            row.extend(t.metrics().iter().map(f64::to_string));
            w.write_record(&row)?;
        }
        let sums = self.summaries();
        for (label, pick) in [("mean", 0), ("se", 1)] {
            let mut row = self.echo();
            row.push(label.into());
            row.push(String::new());
            row.extend(sums.iter().map(|s| if pick == 0 { s.mean } else { s.se }.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Seeds for the problem, the agent and the duration stream of one trial.
pub fn trial_streams(seed: u64) -> (u64, u64, u64) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (r.next_u64(), r.next_u64(), r.next_u64())
}

fn sample_var(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).max(1e-12)
}

/// Starting model for a real database. Features are expected on a unit
/// scale; signal variances start at the spread of the scores.
fn data_model(kind: ModelKind, ds: &Dataset) -> Result<ScoreModel> {
    let d = ds.dim();
    let vc = sample_var(&ds.cheap_scores);
    let ve = sample_var(&ds.expensive_scores);
    let f_spec = KernelSpec::isotropic(vc, 1.0, d, 0.0)?;
    Ok(match kind {
        ModelKind::Covariate => ScoreModel::Covariate(CovariateModel::new(
            f_spec,
            KernelSpec::new(ve, vec![1.0; d + 1], 0.0)?,
            0.1 * vc.sqrt(),
            0.1 * ve.sqrt(),
        )?),
        ModelKind::MultiFidelity => {
            ScoreModel::MultiFidelity(MultiFidelityModel::new(f_spec, 0.1 * vc.sqrt(), 0.1 * ve.sqrt())?)
        }
    })
}

struct Problem {
    dataset: Dataset,
    model: ScoreModel,
    single_spec: KernelSpec,
    single_sigma: f64,
}

enum Source {
    Synth { n: usize, theta: f64 },
    Fixed { dataset: Dataset, kind: ModelKind },
}

impl Source {
    fn problem(&self, seed: u64, method: Method) -> Result<Problem> {
        match self {
            Source::Synth { n, theta } => {
                let dataset = synth::generate_problem(&SynthConfig::new(*n, *theta, seed)?)?;
                let model = synth::covariate_model(*theta);
                let ScoreModel::Covariate(m) = &model else { unreachable!() };
                let single_spec = match method.feature_mode() {
                    Some(crate::engine::FeatureMode::Rich) => m.g_spec.clone(),
                    _ => KernelSpec::isotropic(synth::EXPENSIVE_SIGNAL_VARIANCE, synth::LENGTHSCALE, 1, 0.0)?,
                };
                Ok(Problem { dataset, single_sigma: m.sigma_expensive, model, single_spec })
            }
            Source::Fixed { dataset, kind } => {
                let model = data_model(*kind, dataset)?;
                let ve = sample_var(&dataset.expensive_scores);
                let d = dataset.dim() + usize::from(method.feature_mode() == Some(crate::engine::FeatureMode::Rich));
                Ok(Problem {
                    dataset: dataset.clone(),
                    model,
                    single_spec: KernelSpec::new(ve, vec![1.0; d], 0.0)?,
                    single_sigma: 0.1 * ve.sqrt(),
                })
            }
        }
    }
}

fn one_trial(config: &ExperimentConfig, source: &Source, screen: &ResolvedScreen, trial: usize, seed: u64) -> Result<(TrialResult, Trace)> {
    let (problem_seed, policy_seed, duration_seed) = trial_streams(seed);
    let p = source.problem(problem_seed, config.method)?;
    let settings = config.settings();
    let trace = match (config.method.controller(), config.method.feature_mode()) {
        (Some(controller), _) => {
            let spec = ScreenSpec { budget: screen.budget, c_cheap: screen.c_cheap, c_expensive: screen.c_expensive, n_top: screen.n_top };
            let policy = Policy { acquisition: config.method.acquisition(), controller, model: p.model, settings, seed: policy_seed };
            if config.workers == 1 {
                run_sequential(&p.dataset, &spec, &policy)?
            } else {
                simulate_parallel(&p.dataset, &spec, &policy, config.workers, duration_seed)?.trace
            }
        }
        (None, Some(mode)) => {
            let spec = ScreenSpec {
                budget: screen.budget,
                c_cheap: screen.c_cheap,
                c_expensive: screen.single_test_c_expensive,
                n_top: screen.n_top,
            };
            let policy = SingleTestPolicy {
                acquisition: config.method.acquisition(),
                mode,
                spec: p.single_spec,
                sigma_expensive: p.single_sigma,
                settings,
                seed: policy_seed,
            };
            if config.workers == 1 {
                run_single_test(&p.dataset, &spec, &policy)?
            } else {
                simulate_parallel_single_test(&p.dataset, &spec, &policy, config.workers, duration_seed)?.trace
            }
        }
        (None, None) => unreachable!("every method is two-test or single-test"),
    };
    let result = TrialResult {
        trial,
        seed,
        optimization_regret: optimization_regret(&trace, &p.dataset),
        mining_regret: mining_regret(&trace, &p.dataset, screen.n_top)?,
        cheap_tests: trace.cheap_tests(),
        expensive_tests: trace.expensive_tests(),
        total_cost: trace.total_cost(),
        total_reward_opt: trace.total_reward_opt(),
        total_reward_mine: trace.total_reward_mine(),
    };
    Ok((result, trace))
}

/// Runs every trial of `config` (concurrently when the `parallel` feature is
/// on) and writes the result file and traces it asks for.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let (source, schema) = match &config.problem {
        ProblemSource::Synth { n, theta } => (Source::Synth { n: *n, theta: *theta }, None),
        ProblemSource::Dataset { path, schema } => {
            let mut schema = SchemaConfig::from_file(schema)?;
            if let Some(sub) = config.subsample {
                schema.subsample = sub;
            }
            let dataset = load_dataset(path, &schema)?;
            (Source::Fixed { dataset, kind: config.model }, Some(schema))
        }
    };
    let screen = config.resolve_screen(schema.as_ref())?;
    let seeds = config.trial_seeds();
    log::info!("{}: {} on {} for {} trials", config.name, config.method, config.problem_label(), seeds.len());
    let outcomes = crate::par::map_indexed(seeds.len(), |k| one_trial(config, &source, &screen, k, seeds[k]));
    let mut trials = Vec::with_capacity(seeds.len());
    for (k, outcome) in outcomes.into_iter().enumerate() {
        let (result, trace) = outcome.inspect_err(|e| log::error!("trial {k} (seed {}) failed: {e}", seeds[k]))?;
        if let Some(dir) = &config.trace_dir {
            std::fs::create_dir_all(dir)?;
            trace.write_csv_file(dir.join(format!("trial_{k}.csv")))?;
        }
        trials.push(result);
    }
    let result = ExperimentResult { config: config.clone(), screen, trials };
    if let Some(path) = &config.output {
        result.write_csv_file(path)?;
    }
    Ok(result)
}
