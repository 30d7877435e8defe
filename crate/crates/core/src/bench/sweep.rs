use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::{Table, Value};

use super::config::ExperimentConfig;
use super::run::{run_experiment, ExperimentResult, METRICS};
use crate::error::{Error, Result};

/// A base experiment and a grid of overrides. Grid keys are dotted paths
/// into the experiment config (`"problem.theta"`, `"workers"`, ...).
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub output_dir: PathBuf,
    pub base: Table,
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<Value>>,
    /// Directory that relative input paths in `base` resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// One expanded grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub overrides: Vec<(String, Value)>,
    pub config: ExperimentConfig,
}

pub struct SweepResult {
    pub points: Vec<(SweepPoint, ExperimentResult)>,
    pub summary_path: PathBuf,
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("sweep: {e}")))
    }

    /// Reads a sweep file; relative paths resolve against its directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut s = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            if s.output_dir.is_relative() {
                s.output_dir = dir.join(&s.output_dir);
            }
            s.base_dir = Some(dir.to_path_buf());
        }
        Ok(s)
    }
}

fn lookup<'a>(table: &'a Table, path: &str) -> Option<&'a Value> {
    let mut parts = path.split('.');
    let mut v = table.get(parts.next()?)?;
    for p in parts {
        v = v.as_table()?.get(p)?;
    }
    Some(v)
}

fn assign(table: &mut Table, path: &str, value: Value) -> Result<()> {
    let keys: Vec<&str> = path.split('.').collect();
    let mut t = table;
    for k in &keys[..keys.len() - 1] {
        t = t
            .entry(k.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("grid key {path:?}: {k:?} is not a table")))?;
    }
    t.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

fn label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn file_stem(overrides: &[(String, Value)]) -> String {
    if overrides.is_empty() {
        return "run".into();
    }
    overrides
        .iter()
        .map(|(k, v)| format!("{k}={}", label(v)))
        .collect::<Vec<_>>()
        .join("_")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_=.".contains(c) { c } else { '_' })
        .collect()
}

impl SweepConfig {
    /// Runs every point with `trials` seeds from the base seed, replacing
    /// any explicit seed list.
    pub fn set_trials(&mut self, trials: usize) -> Result<()> {
        if self.grid.contains_key("trials") || self.grid.contains_key("seeds") {
            return Err(Error::Config("the grid already varies the trial count".into()));
        }
        let t = i64::try_from(trials).map_err(|_| Error::Config(format!("trial count {trials} is too large")))?;
        self.base.remove("seeds");
        self.base.insert("trials".into(), Value::Integer(t));
        Ok(())
    }

    /// Cartesian expansion of the grid, last key varying fastest.
    pub fn expand(&self) -> Result<Vec<SweepPoint>> {
        for (key, values) in &self.grid {
            if values.is_empty() {
                return Err(Error::Config(format!("grid key {key:?} has no values")));
            }
            if lookup(&self.base, key).is_some() {
                return Err(Error::Config(format!("grid key {key:?} is also fixed in the base config")));
            }
            if key == "output" || key == "trace_dir" {
                return Err(Error::Config(format!("grid key {key:?} is set by the sweep")));
            }
        }
        if self.base.contains_key("output") || self.base.contains_key("trace_dir") {
            return Err(Error::Config("output paths are set by the sweep, not the base config".into()));
        }
        let keys: Vec<&String> = self.grid.keys().collect();
        let mut combos: Vec<Vec<(String, Value)>> = vec![Vec::new()];
        for key in &keys {
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    self.grid[*key].iter().map(move |v| {
                        let mut c = c.clone();
                        c.push(((*key).clone(), v.clone()));
                        c
                    })
                })
                .collect();
        }
        let mut stems = std::collections::BTreeSet::new();
        combos
            .into_iter()
            .map(|overrides| {
                let mut table = self.base.clone();
                for (k, v) in &overrides {
                    assign(&mut table, k, v.clone())?;
                }
                let stem = file_stem(&overrides);
                if !stems.insert(stem.clone()) {
                    return Err(Error::Config(format!("two grid points share the file name {stem:?}")));
                }
                table.insert("output".into(), Value::String(self.output_dir.join(format!("{stem}.csv")).to_string_lossy().into_owned()));
                let mut config = ExperimentConfig::from_toml(&toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?)?;
                if let Some(dir) = &self.base_dir {
                    config.rebase_inputs(dir);
                }
                Ok(SweepPoint { overrides, config })
            })
            .collect()
    }
}

/// Runs every grid point, writing one result file each plus `summary.csv`
/// with the mean and standard error of every metric per point.
pub fn sweep(config: &SweepConfig) -> Result<SweepResult> {
    let points = config.expand()?;
    std::fs::create_dir_all(&config.output_dir)?;
    let mut done = Vec::with_capacity(points.len());
    for p in points {
        let r = run_experiment(&p.config)?;
        done.push((p, r));
    }
    let summary_path = config.output_dir.join("summary.csv");
    write_summary(std::fs::File::create(&summary_path)?, config.grid.keys(), &done)?;
    Ok(SweepResult { points: done, summary_path })
}

fn write_summary<'a, W: Write>(out: W, keys: impl Iterator<Item = &'a String>, done: &[(SweepPoint, ExperimentResult)]) -> Result<()> {
    let keys: Vec<&String> = keys.collect();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = keys.iter().map(|k| k.to_string()).collect();
    header.extend(["method", "trials", "output"].map(String::from));
    for m in METRICS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_se"));
    }
    w.write_record(&header)?;
    for (p, r) in done {
        let mut row: Vec<String> = p.overrides.iter().map(|(_, v)| label(v)).collect();
        row.push(r.config.method.to_string());
        row.push(r.trials.len().to_string());
        row.push(
            p.config
                .output
                .as_ref()
                .and_then(|o| o.file_name())
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default(),
        );
        for s in r.summaries() {
            row.push(s.mean.to_string());
            row.push(s.se.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
