use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{SchemaConfig, Subsample};
use crate::engine::{AcquisitionKind, ControllerKind, FeatureMode, PolicySettings};
use crate::error::{Error, Result};
use crate::synth::SynthConfig;

/// Named screening strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Greedy controller, expected improvement.
    #[serde(rename = "SGEI")]
    Sgei,
    /// Greedy controller, threshold exceedance.
    #[serde(rename = "SGT")]
    Sgt,
    /// Greedy controller, top-N membership probability.
    #[serde(rename = "SGM")]
    Sgm,
    /// Random controller, Thompson sampling.
    #[serde(rename = "STR")]
    Str,
    #[serde(rename = "GT-Poor")]
    GtPoor,
    #[serde(rename = "GT-Rich")]
    GtRich,
    #[serde(rename = "T-Poor")]
    TPoor,
    #[serde(rename = "T-Rich")]
    TRich,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Sgei,
        Method::Sgt,
        Method::Sgm,
        Method::Str,
        Method::GtPoor,
        Method::GtRich,
        Method::TPoor,
        Method::TRich,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sgei => "SGEI",
            Method::Sgt => "SGT",
            Method::Sgm => "SGM",
            Method::Str => "STR",
            Method::GtPoor => "GT-Poor",
            Method::GtRich => "GT-Rich",
            Method::TPoor => "T-Poor",
            Method::TRich => "T-Rich",
        }
    }

    pub fn acquisition(self) -> AcquisitionKind {
        match self {
            Method::Sgei => AcquisitionKind::ExpectedImprovement,
            Method::Sgt | Method::GtPoor | Method::GtRich => AcquisitionKind::Threshold,
            Method::Sgm => AcquisitionKind::Mining,
            Method::Str | Method::TPoor | Method::TRich => AcquisitionKind::Thompson,
        }
    }

    /// Controller of a two-test method; `None` for single-test baselines.
    pub fn controller(self) -> Option<ControllerKind> {
        match self {
            Method::Sgei | Method::Sgt | Method::Sgm => Some(ControllerKind::Greedy),
            Method::Str => Some(ControllerKind::Random { p1: None }),
            _ => None,
        }
    }

    pub fn feature_mode(self) -> Option<FeatureMode> {
        match self {
            Method::GtPoor | Method::TPoor => Some(FeatureMode::Poor),
            Method::GtRich | Method::TRich => Some(FeatureMode::Rich),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::Config(format!("unknown method {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Covariate,
    MultiFidelity,
}

/// Where the candidate pool comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSource {
    /// A fresh synthetic pool per trial.
    Synth {
        #[serde(default = "default_synth_n")]
        n: usize,
        theta: f64,
    },
    /// One CSV database read through a schema.
    Dataset { path: PathBuf, schema: PathBuf },
}

fn rebase_path(p: &mut PathBuf, dir: &Path) {
    if p.is_relative() {
        *p = dir.join(&*p);
    }
}

fn default_synth_n() -> usize {
    500
}

fn default_workers() -> usize {
    1
}

/// One replicated experiment: a problem, a method and `trials` seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub problem: ProblemSource,
    pub method: Method,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Required for synthetic problems; overrides the schema otherwise.
    #[serde(default)]
    pub budget: Option<f64>,
    #[serde(default)]
    pub c_cheap: Option<f64>,
    #[serde(default)]
    pub c_expensive: Option<f64>,
    #[serde(default)]
    pub n_top: Option<usize>,
    /// Number of trials when `seeds` is absent.
    #[serde(default)]
    pub trials: Option<usize>,
    /// Seeds `base_seed .. base_seed + trials` when `seeds` is absent.
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    /// Refit hyperparameters during the screen. Defaults to off for
    /// synthetic problems, whose generating model is handed to the agent.
    #[serde(default)]
    pub refit: Option<bool>,
    /// Overrides the schema's row subsample for dataset problems.
    #[serde(default)]
    pub subsample: Option<Subsample>,
    #[serde(default)]
    pub model: ModelKind,
    #[serde(default)]
    pub settings: Option<PolicySettings>,
    /// Result CSV; nothing is written when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Directory for one trace CSV per trial.
    #[serde(default)]
    pub trace_dir: Option<PathBuf>,
}

/// Budget, costs and target after combining the config with its problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedScreen {
    pub budget: f64,
    pub c_cheap: f64,
    pub c_expensive: f64,
    /// Expensive cost charged to single-test baselines.
    pub single_test_c_expensive: f64,
    pub n_top: usize,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(format!("experiment: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut c = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            c.rebase(dir);
        }
        Ok(c)
    }

    /// Joins relative input paths onto `dir`.
    pub fn rebase_inputs(&mut self, dir: &Path) {
        if let ProblemSource::Dataset { path, schema } = &mut self.problem {
            rebase_path(path, dir);
            rebase_path(schema, dir);
        }
    }

    /// Joins relative input and output paths onto `dir`.
    pub fn rebase(&mut self, dir: &Path) {
        self.rebase_inputs(dir);
        let fix = |p: &mut PathBuf| rebase_path(p, dir);
        if let Some(p) = &mut self.output {
            fix(p);
        }
        if let Some(p) = &mut self.trace_dir {
            fix(p);
        }
    }

    pub fn trial_seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.trials.unwrap_or(1) as u64).map(|k| self.base_seed + k).collect(),
        }
    }

    pub fn refit_enabled(&self) -> bool {
        self.refit.unwrap_or(matches!(self.problem, ProblemSource::Dataset { .. }))
    }

    pub fn settings(&self) -> PolicySettings {
        let mut s = self.settings.clone().unwrap_or_default();
        if !self.refit_enabled() {
            s.refit_every = None;
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        let seeds = self.trial_seeds();
        if seeds.is_empty() {
            return Err(Error::Config("at least one trial is required".into()));
        }
        if let (Some(s), Some(t)) = (&self.seeds, self.trials) {
            if s.len() != t {
                return Err(Error::Config(format!("{} seeds listed but trials = {t}", s.len())));
            }
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(Error::Config("trial seeds must be distinct".into()));
        }
        if let ProblemSource::Synth { n, theta } = self.problem {
            SynthConfig::new(n, theta, 0)?;
            for (name, v) in [("budget", self.budget), ("c_cheap", self.c_cheap), ("c_expensive", self.c_expensive)] {
                if v.is_none() {
                    return Err(Error::Config(format!("synthetic experiments need {name}")));
                }
            }
            if self.n_top.is_none() {
                return Err(Error::Config("synthetic experiments need n_top".into()));
            }
        }
        self.settings().validate()
    }

    /// Combines the config's overrides with the schema (if any).
    pub fn resolve_screen(&self, schema: Option<&SchemaConfig>) -> Result<ResolvedScreen> {
        let pick = |own: Option<f64>, theirs: Option<f64>, name: &str| {
            own.or(theirs).ok_or_else(|| Error::Config(format!("{name} is not set")))
        };
        let budget = pick(self.budget, schema.map(|s| s.budget), "budget")?;
        let c_cheap = pick(self.c_cheap, schema.map(|s| s.c_cheap), "c_cheap")?;
        let c_expensive = pick(self.c_expensive, schema.map(|s| s.c_expensive), "c_expensive")?;
        let n_top = self
            .n_top
            .or(schema.map(|s| s.n_top))
            .ok_or_else(|| Error::Config("n_top is not set".into()))?;
        let single_test_c_expensive = match (self.c_expensive, schema.and_then(|s| s.single_test_c_expensive)) {
            (Some(c), _) => c,
            (None, Some(c)) => c,
            (None, None) => c_expensive,
        };
        Ok(ResolvedScreen { budget, c_cheap, c_expensive, single_test_c_expensive, n_top })
    }

    /// Short description of the problem for result rows.
    pub fn problem_label(&self) -> String {
        match &self.problem {
            ProblemSource::Synth { n, theta } => format!("synth(n={n},theta={theta})"),
            ProblemSource::Dataset { path, .. } => path
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(extra: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml(&format!(
            r#"
            method = "SGEI"
            budget = 50
            c_cheap = 0.2
            c_expensive = 1
            n_top = 10
            trials = 3
            {extra}
            [problem]
            kind = "synth"
            n = 50
            theta = 0.5
            "#
        ))
    }

    #[test]
    fn method_names_roundtrip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("sgt".parse::<Method>().unwrap(), Method::Sgt);
        assert!("SGX".parse::<Method>().is_err());
    }

    #[test]
    fn default_seeds_and_refit() {
        let c = synth("").unwrap();
        assert_eq!(c.trial_seeds(), vec![0, 1, 2]);
        assert!(!c.refit_enabled());
        assert_eq!(c.settings().refit_every, None);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(synth("seeds = [1, 1, 2]").is_err());
        assert!(synth("seeds = [1, 2]").is_err());
        assert!(synth("workers = 0").is_err());
        assert!(synth("colour = 3").is_err());
        assert!(ExperimentConfig::from_toml("method = \"SGEI\"\n[problem]\nkind = \"synth\"\ntheta = 0").is_err());
    }

    #[test]
    fn unknown_method_is_a_config_error() {
        let e = ExperimentConfig::from_toml("method = \"XYZ\"\n[problem]\nkind = \"synth\"\ntheta = 0").unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }
}
