//! Sweep presets for the synthetic and real-data studies, in paper-scale and
//! desk-scale variants, plus example schemas for the two databases.

use std::path::Path;

use super::sweep::SweepConfig;
use crate::data::SchemaConfig;
use crate::error::{Error, Result};

macro_rules! preset {
    ($name:literal) => {
        ($name, include_str!(concat!("../../presets/", $name, ".toml")))
    };
}

/// `(name, toml)` for every sweep preset.
pub const SWEEPS: &[(&str, &str)] = &[
    preset!("experiment1"),
    preset!("experiment1-desk"),
    preset!("experiment2"),
    preset!("experiment2-desk"),
    preset!("experiment3"),
    preset!("experiment3-desk"),
    preset!("cof"),
    preset!("cof-desk"),
    preset!("mof"),
    preset!("mof-desk"),
];

/// `(name, toml)` for the example schemas.
pub const SCHEMAS: &[(&str, &str)] = &[preset!("cof-schema"), preset!("mof-schema")];

pub fn names() -> impl Iterator<Item = &'static str> {
    SWEEPS.iter().map(|(n, _)| *n)
}

pub fn text(name: &str) -> Result<&'static str> {
    SWEEPS
        .iter()
        .chain(SCHEMAS)
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::Config(format!("unknown preset {name:?}; known: {}", names().collect::<Vec<_>>().join(", "))))
}

/// Parses a sweep preset. Relative paths stay relative to the working
/// directory.
pub fn sweep(name: &str) -> Result<SweepConfig> {
    SweepConfig::from_toml(text(name)?)
}

pub fn schema(name: &str) -> Result<SchemaConfig> {
    SchemaConfig::from_toml(text(name)?)
}

/// Writes every preset and schema into `dir` as `<name>.toml`.
pub fn export(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, text) in SWEEPS.iter().chain(SCHEMAS) {
        std::fs::write(dir.join(format!("{name}.toml")), text)?;
    }
    Ok(())
}
