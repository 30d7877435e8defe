use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    #[default]
    Identity,
    Log,
}

/// `"all"` or a row count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Subsample {
    #[default]
    #[serde(with = "all_literal")]
    All,
    Count(usize),
}

mod all_literal {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("all")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "all" {
            Ok(())
        } else {
            Err(D::Error::custom(format!("expected \"all\" or a count, got {s:?}")))
        }
    }
}

/// One column, or several columns whose values are multiplied together.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Columns {
    One(String),
    Product(Vec<String>),
}

impl Columns {
    pub fn names(&self) -> Vec<&str> {
        match self {
            Columns::One(c) => vec![c.as_str()],
            Columns::Product(cs) => cs.iter().map(String::as_str).collect(),
        }
    }
}

impl From<&str> for Columns {
    fn from(s: &str) -> Self {
        Columns::One(s.to_string())
    }
}

/// How to read one screening database and the screen it defines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub id_column: Option<String>,
    pub features: Vec<String>,
    #[serde(default)]
    pub feature_transforms: BTreeMap<String, Transform>,
    pub cheap: Columns,
    #[serde(default)]
    pub cheap_transform: Transform,
    pub expensive: Columns,
    #[serde(default)]
    pub expensive_transform: Transform,
    #[serde(default)]
    pub standardize: bool,
    #[serde(default)]
    pub subsample: Subsample,
    #[serde(default)]
    pub subsample_seed: u64,
    pub c_cheap: f64,
    pub c_expensive: f64,
    /// Expensive-test cost used when scoring single-test baselines, if different.
    #[serde(default)]
    pub single_test_c_expensive: Option<f64>,
    pub budget: f64,
    pub n_top: usize,
}

impl SchemaConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let schema: SchemaConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("schema: {e}")))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::Config("schema lists no feature columns".into()));
        }
        if !(self.c_cheap > 0.0 && self.c_expensive > 0.0 && self.budget > 0.0) {
            return Err(Error::Config("costs and budget must be positive".into()));
        }
        if self.n_top == 0 {
            return Err(Error::Config("n_top must be at least 1".into()));
        }
        Ok(())
    }

    /// Plain schema over columns `x0.. , cheap, expensive` as written by
    /// [`write_dataset`](super::write_dataset).
    pub fn identity(feature_names: &[String]) -> Self {
        SchemaConfig {
            name: String::new(),
            id_column: Some("id".into()),
            features: feature_names.to_vec(),
            feature_transforms: BTreeMap::new(),
            cheap: "cheap".into(),
            cheap_transform: Transform::Identity,
            expensive: "expensive".into(),
            expensive_transform: Transform::Identity,
            standardize: false,
            subsample: Subsample::All,
            subsample_seed: 0,
            c_cheap: 1.0,
            c_expensive: 1.0,
            single_test_c_expensive: None,
            budget: 1.0,
            n_top: 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_product_columns_and_all() {
        let s = SchemaConfig::from_toml(
            r#"
            features = ["a", "b"]
            cheap = ["dc", "n01"]
            cheap_transform = "log"
            expensive = "api"
            expensive_transform = "log"
            subsample = "all"
            c_cheap = 0.5
            c_expensive = 0.5
            single_test_c_expensive = 1.0
            budget = 1000
            n_top = 100
            "#,
        )
        .unwrap();
        assert_eq!(s.cheap.names(), vec!["dc", "n01"]);
        assert_eq!(s.subsample, Subsample::All);
        assert_eq!(s.single_test_c_expensive, Some(1.0));
    }

    #[test]
    fn parses_subsample_count() {
        let s = SchemaConfig::from_toml(
            r#"
            features = ["a"]
            cheap = "c"
            expensive = "e"
            subsample = 1000
            c_cheap = 0.1
            c_expensive = 1
            budget = 10
            n_top = 5
            "#,
        )
        .unwrap();
        assert_eq!(s.subsample, Subsample::Count(1000));
    }

    #[test]
    fn unknown_key_is_a_config_error() {
        let err = SchemaConfig::from_toml(
            r#"
            features = ["a"]
            cheap = "c"
            expensive = "e"
            c_cheap = 0.1
            c_expensive = 1
            budget = 10
            n_top = 5
            bogus = 1
            "#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
