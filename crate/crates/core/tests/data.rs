mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use screenbo::data::{load_dataset, true_top_n, write_dataset, Dataset, SchemaConfig};

proptest! {
    #[test]
    fn top_n_matches_sorting(values in prop::collection::vec(prop_oneof![Just(0.0), Just(1.0), -3.0f64..3.0], 1..30), frac in 0.0f64..1.0) {
        let n = values.len();
        let n_top = ((n as f64 * frac) as usize).max(1);
        let ds = Dataset::new(DMatrix::zeros(n, 1), vec![0.0; n], values.clone(), None).unwrap();
        let ours = true_top_n(&ds, n_top).unwrap();
        let want: std::collections::BTreeSet<usize> = common::top_n(&values, n_top).into_iter().collect();
        prop_assert_eq!(ours, want);
    }
}

#[test]
fn written_dataset_loads_back_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pool.csv");
    let ds = Dataset::new(
        DMatrix::from_row_slice(3, 2, &[0.1, 1.0 / 3.0, 2.5, -1e-7, 7.0, 0.0]),
        vec![0.25, -1.5, 1e10],
        vec![std::f64::consts::PI, 2.0, -0.0],
        None,
    )
    .unwrap();
    write_dataset(&path, &ds).unwrap();
    let back = load_dataset(&path, &SchemaConfig::identity(&ds.feature_names)).unwrap();
    assert_eq!(*back.features, *ds.features);
    assert_eq!(back.cheap_scores, ds.cheap_scores);
    assert_eq!(back.expensive_scores, ds.expensive_scores);
    assert_eq!(back.ids, ds.ids);
}

#[test]
fn missing_column_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pool.csv");
    std::fs::write(&path, "id,x0,cheap\n0,0.1,0.2\n").unwrap();
    let err = load_dataset(&path, &SchemaConfig::identity(&["x0".to_string()])).unwrap_err();
    assert!(err.to_string().contains("expensive"), "{err}");
}
