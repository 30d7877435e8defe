use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::schema::{SchemaConfig, Subsample, Transform};
use super::Dataset;
use crate::error::{Error, Result};

/// Reads a headered CSV according to `schema`.
///
/// Order of operations: parse, combine product columns, apply transforms,
/// subsample rows, standardize features.
pub fn load_dataset(path: impl AsRef<Path>, schema: &SchemaConfig) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: HashMap<String, usize> = reader
        .headers()?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.to_string(), i))
        .collect();
    let col = |name: &str| {
        header
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let id_col = schema.id_column.as_deref().map(col).transpose()?;
    let feature_cols: Vec<usize> = schema.features.iter().map(|f| col(f)).collect::<Result<_>>()?;
    let cheap_cols: Vec<usize> = schema.cheap.names().into_iter().map(col).collect::<Result<_>>()?;
    let exp_cols: Vec<usize> = schema.expensive.names().into_iter().map(col).collect::<Result<_>>()?;
    let feature_tf: Vec<Transform> = schema
        .features
        .iter()
        .map(|f| schema.feature_transforms.get(f).copied().unwrap_or_default())
        .collect();

    let mut ids = Vec::new();
    let mut feats: Vec<f64> = Vec::new();
    let mut cheap = Vec::new();
    let mut expensive = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let row_id = match id_col {
            Some(c) => record.get(c).unwrap_or_default().to_string(),
            None => (row + 1).to_string(),
        };
        let field = |c: usize| -> Result<f64> {
            let raw = record.get(c).unwrap_or_default();
            raw.parse::<f64>().map_err(|_| Error::Data {
                row: row_id.clone(),
                message: format!("cannot parse {raw:?} as a number"),
            })
        };
        for (&c, &tf) in feature_cols.iter().zip(&feature_tf) {
            feats.push(apply(tf, field(c)?, &row_id)?);
        }
        let product = |cols: &[usize]| -> Result<f64> {
            cols.iter().try_fold(1.0, |acc, &c| Ok(acc * field(c)?))
        };
        cheap.push(apply(schema.cheap_transform, product(&cheap_cols)?, &row_id)?);
        expensive.push(apply(schema.expensive_transform, product(&exp_cols)?, &row_id)?);
        ids.push(row_id);
    }

    let n = ids.len();
    let d = feature_cols.len();
    let features = DMatrix::from_row_slice(n, d, &feats);
    let mut ds = Dataset::new(features, cheap, expensive, Some(ids))?
        .with_feature_names(schema.features.clone())?;

    if let Subsample::Count(k) = schema.subsample {
        if k < n {
            let mut rng = ChaCha8Rng::seed_from_u64(schema.subsample_seed);
            let mut idx = sample(&mut rng, n, k).into_vec();
            idx.sort_unstable();
            ds = ds.select(&idx);
        }
    }
    if schema.standardize {
        ds.features = std::sync::Arc::new(standardize(&ds.features));
    }
    Ok(ds)
}

fn apply(tf: Transform, v: f64, row: &str) -> Result<f64> {
    match tf {
        Transform::Identity => Ok(v),
        Transform::Log if v > 0.0 => Ok(v.ln()),
        Transform::Log => Err(Error::Data {
            row: row.to_string(),
            message: format!("log transform of non-positive value {v}"),
        }),
    }
}

/// Zero mean, unit (population) standard deviation per column. Constant
/// columns are only centred.
pub(crate) fn standardize(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mut out = x.clone();
    for mut c in out.column_iter_mut() {
        let mean = c.iter().sum::<f64>() / n;
        c.iter_mut().for_each(|v| *v -= mean);
        let sd = (c.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
        if sd > 0.0 {
            c.iter_mut().for_each(|v| *v /= sd);
            // second pass trims the rounding left by the first
            let m2 = c.iter().sum::<f64>() / n;
            c.iter_mut().for_each(|v| *v -= m2);
        }
    }
    out
}

/// Writes `id, <feature names>, cheap, expensive` with round-trip exact floats.
pub fn write_dataset(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["id".to_string()];
    header.extend(ds.feature_names.iter().cloned());
    header.push("cheap".into());
    header.push("expensive".into());
    w.write_record(&header)?;
    for i in 0..ds.len() {
        let mut rec = vec![ds.ids[i].clone()];
        rec.extend(ds.features.row(i).iter().map(|v| v.to_string()));
        rec.push(ds.cheap_scores[i].to_string());
        rec.push(ds.expensive_scores[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    fn schema(text: &str) -> SchemaConfig {
        SchemaConfig::from_toml(text).unwrap()
    }

    const BASE: &str = r#"
        id_column = "name"
        features = ["a", "b"]
        cheap = "c"
        expensive = "e"
        c_cheap = 0.1
        c_expensive = 1
        budget = 10
        n_top = 1
    "#;

    #[test]
    fn log_of_one_is_zero() {
        let f = write("name,a,b,c,e\nm1,1,2,1.0,3\nm2,2,3,2.0,4\n");
        let s = schema(&format!("{BASE}\ncheap_transform = \"log\""));
        let ds = load_dataset(f.path(), &s).unwrap();
        assert_eq!(ds.cheap_scores[0], 0.0);
        assert!((ds.cheap_scores[1] - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn product_then_log() {
        let f = write("name,a,b,dc,n,api\nm1,1,2,2.0,3.0,1.5\n");
        let s = schema(
            r#"
            features = ["a", "b"]
            cheap = ["dc", "n"]
            cheap_transform = "log"
            expensive = "api"
            expensive_transform = "log"
            c_cheap = 0.5
            c_expensive = 0.5
            budget = 10
            n_top = 1
            "#,
        );
        let ds = load_dataset(f.path(), &s).unwrap();
        assert!((ds.cheap_scores[0] - 6f64.ln()).abs() < 1e-15);
        assert!((ds.expensive_scores[0] - 1.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn missing_column_is_named() {
        let f = write("name,a,c,e\nm1,1,1,1\n");
        match load_dataset(f.path(), &schema(BASE)) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "b"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_positive_log_names_row() {
        let f = write("name,a,b,c,e\nm1,1,2,1.0,3\nbad,2,3,-2.0,4\n");
        let s = schema(&format!("{BASE}\ncheap_transform = \"log\""));
        match load_dataset(f.path(), &s) {
            Err(Error::Data { row, .. }) => assert_eq!(row, "bad"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn subsample_is_seeded_and_sized() {
        let mut text = String::from("name,a,b,c,e\n");
        for i in 0..3000 {
            text.push_str(&format!("m{i},{i},{},{},{}\n", 2 * i, 0.5 * i as f64, -(i as f64)));
        }
        let f = write(&text);
        let s = schema(&format!("{BASE}\nsubsample = 1000\nsubsample_seed = 7"));
        let a = load_dataset(f.path(), &s).unwrap();
        let b = load_dataset(f.path(), &s).unwrap();
        assert_eq!(a.len(), 1000);
        assert_eq!(a, b);
        for i in 0..a.len() {
            let k: f64 = a.ids[i][1..].parse().unwrap();
            assert_eq!(a.features[(i, 0)], k);
            assert_eq!(a.features[(i, 1)], 2.0 * k);
            assert_eq!(a.cheap_scores[i], 0.5 * k);
            assert_eq!(a.expensive_scores[i], -k);
        }
    }

    #[test]
    fn standardized_columns() {
        let mut text = String::from("name,a,b,c,e\n");
        for i in 0..57 {
            let v = (i as f64 * 1.37).sin() * 40.0 + 1000.0;
            text.push_str(&format!("m{i},{v},{},{i},{i}\n", (i * i) as f64 * 0.01));
        }
        let f = write(&text);
        let ds = load_dataset(f.path(), &schema(&format!("{BASE}\nstandardize = true"))).unwrap();
        let n = ds.len() as f64;
        for c in ds.features.column_iter() {
            let mean = c.iter().sum::<f64>() / n;
            let sd = (c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!(mean.abs() < 1e-10, "mean {mean}");
            assert!((sd - 1.0).abs() < 1e-10, "sd {sd}");
        }
    }

    #[test]
    fn roundtrip_is_exact() {
        let ds = Dataset::new(
            DMatrix::from_row_slice(3, 2, &[0.1, 1e-17, 1.0 / 3.0, -2.5, 7.0, 0.2]),
            vec![0.30000000000000004, -1.0, 2.0 / 7.0],
            vec![1e300, 0.0, -0.1],
            Some(vec!["a".into(), "b".into(), "c".into()]),
        )
        .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_dataset(f.path(), &ds).unwrap();
        let back = load_dataset(f.path(), &SchemaConfig::identity(&ds.feature_names)).unwrap();
        assert_eq!(back, ds);
    }
}
