mod common;

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_4;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use screenbo::data::Dataset;
use screenbo::engine::{
    available_actions, greedy_comparison, mining_regret, optimization_regret, run_sequential, run_single_test,
    AcquisitionKind, Action, ControllerKind, FeatureMode, Policy, PolicySettings, ScreenSpec, ScreenState,
    SingleTestPolicy, TestKind, TestStatus, Trace, TraceRecord,
};
use screenbo::gp::KernelSpec;
use screenbo::models::ScoreModel;
use screenbo::synth::{self, generate_problem, SynthConfig};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

fn toy() -> Dataset {
    Dataset::new(
        DMatrix::from_fn(10, 1, |r, _| r as f64 / 10.0),
        (0..10).map(|i| i as f64 * 0.1).collect(),
        (0..10).map(|i| (i as f64 - 4.0).abs()).collect(),
        None,
    )
    .unwrap()
}

fn settings() -> PolicySettings {
    PolicySettings {
        refit_every: None,
        acquisition_samples: 64,
        threshold_samples: 128,
        mining_samples: 128,
        controller_samples: 16,
        ..PolicySettings::default()
    }
}

#[test]
fn budget_after_five_cheap_and_two_expensive() {
    let ds = toy();
    let mut s = ScreenState::new(ds.features.clone(), 50.0, 0.2, 1.0).unwrap();
    for i in 0..5 {
        s.apply(Action::cheap(i), &ds).unwrap();
    }
    s.apply(Action::expensive(0), &ds).unwrap();
    s.apply(Action::expensive(3), &ds).unwrap();
    assert!((s.budget_remaining() - 47.0).abs() < 1e-12);
}

#[test]
fn illegal_actions_and_status_updates() {
    let ds = toy();
    let mut s = ScreenState::new(ds.features.clone(), 50.0, 0.2, 1.0).unwrap();
    assert_eq!(available_actions(&s).len(), 10);
    s.apply(Action::cheap(2), &ds).unwrap();
    assert!(s.apply(Action::cheap(2), &ds).is_err());
    assert!(s.apply(Action::expensive(5), &ds).is_err());
    s.apply(Action::cheap(0), &ds).unwrap();
    s.apply(Action::expensive(0), &ds).unwrap();
    s.apply(Action::expensive(2), &ds).unwrap();
    assert_eq!(s.status(2), TestStatus::Tt);
    assert_eq!(s.y_max_expensive(), Some(4.0));

    let poor = ScreenState::new(ds.features.clone(), 0.1, 0.2, 1.0).unwrap();
    assert!(available_actions(&poor).is_empty());
}

#[test]
fn certain_cheap_controller_runs_cheap_tests_first() {
    let ds = generate_problem(&SynthConfig::new(20, FRAC_PI_4, 3).unwrap()).unwrap();
    let policy = Policy {
        acquisition: AcquisitionKind::Thompson,
        controller: ControllerKind::Random { p1: Some(1.0) },
        model: synth::covariate_model(FRAC_PI_4),
        settings: settings(),
        seed: 1,
    };
    let screen = ScreenSpec { budget: 10.0, c_cheap: 0.2, c_expensive: 1.0, n_top: 3 };
    let trace = run_sequential(&ds, &screen, &policy).unwrap();
    let first_expensive = trace.records.iter().position(|r| r.test == TestKind::Expensive).unwrap();
    assert_eq!(first_expensive, 20, "all 20 cheap tests come first");
    assert!(trace.spent() <= 10.0 + 1e-9 && trace.spent() > 10.0 - 1.0);
}

#[test]
fn poor_mode_spends_whole_budget_on_expensive_tests() {
    let ds = generate_problem(&SynthConfig::new(30, 0.5, 4).unwrap()).unwrap();
    let screen = ScreenSpec { budget: 7.0, c_cheap: 0.2, c_expensive: 1.0, n_top: 3 };
    for (mode, acquisition) in [(FeatureMode::Poor, AcquisitionKind::Threshold), (FeatureMode::Rich, AcquisitionKind::Thompson)] {
        let ScoreModel::Covariate(cm) = synth::covariate_model(0.5) else { unreachable!() };
        let spec = match mode {
            FeatureMode::Poor => KernelSpec::isotropic(1.0, 0.25, 1, 0.0).unwrap(),
            FeatureMode::Rich => cm.g_spec,
        };
        let policy = SingleTestPolicy { acquisition, mode, spec, sigma_expensive: 0.05, settings: settings(), seed: 2 };
        let trace = run_single_test(&ds, &screen, &policy).unwrap();
        assert_eq!(trace.expensive_tests(), 7);
        assert_eq!(trace.cheap_tests(), 0);
        let want = if mode == FeatureMode::Rich { 30.0 * 0.2 + 7.0 } else { 7.0 };
        assert!((trace.total_cost() - want).abs() < 1e-9);
    }
}

#[test]
fn rich_accounting_at_database_scale() {
    let records = (0..1000)
        .map(|k| TraceRecord {
            step: k,
            worker_id: 0,
            candidate_id: k,
            test: TestKind::Expensive,
            revealed_score: 0.0,
            budget_after: 0.0,
            reward_opt: 0.0,
            reward_mine: 0,
            dispatch_time: None,
            finish_time: None,
        })
        .collect();
    let trace = Trace {
        records,
        n_top: 100,
        c_cheap: 0.1,
        c_expensive: 1.0,
        upfront_cheap_tests: 69839,
        upfront_cost: 69839.0 * 0.1,
    };
    assert!((trace.total_cost() - (69839.0 * 0.1 + 1000.0)).abs() < 1e-6);
    // The published table's 70839 counts tests rather than cost units.
    assert_eq!(trace.upfront_cheap_tests + trace.expensive_tests(), 70839);
}

#[test]
fn regret_examples() {
    let ds = toy();
    let mut trace = Trace { records: vec![], n_top: 2, c_cheap: 0.2, c_expensive: 1.0, upfront_cheap_tests: 0, upfront_cost: 0.0 };
    assert_eq!(mining_regret(&trace, &ds, 2).unwrap(), 2);
    assert_eq!(optimization_regret(&trace, &ds), 5.0);
    for (k, id) in [9usize, 0].into_iter().enumerate() {
        trace.records.push(TraceRecord {
            step: k,
            worker_id: 0,
            candidate_id: id,
            test: TestKind::Expensive,
            revealed_score: ds.expensive_scores[id],
            budget_after: 0.0,
            reward_opt: 0.0,
            reward_mine: 0,
            dispatch_time: None,
            finish_time: None,
        });
    }
    assert_eq!(mining_regret(&trace, &ds, 2).unwrap(), 0);
    assert_eq!(optimization_regret(&trace, &ds), 0.0);
}

/// EI of `N(mean, sd²)` from the normal distribution's pdf and cdf.
fn ei(mean: f64, sd: f64, y_max: f64) -> f64 {
    let z = (mean - y_max) / sd;
    let n = Normal::standard();
    (mean - y_max) * n.cdf(z) + sd * n.pdf(z)
}

#[test]
fn greedy_comparison_matches_nested_expectation() {
    // Candidate 0 expensive-tested, 1 cheap-tested, 2 untested.
    let theta = 0.6;
    let ds = Dataset::new(
        DMatrix::from_column_slice(3, 1, &[0.2, 0.35, 0.5]),
        vec![0.1, 0.3, 0.0],
        vec![0.4, 0.0, 0.0],
        None,
    )
    .unwrap();
    let model = synth::covariate_model(theta);
    let ScoreModel::Covariate(cm) = &model else { unreachable!() };
    let mut state = ScreenState::new(ds.features.clone(), 10.0, 0.2, 1.0).unwrap();
    state.apply(Action::cheap(0), &ds).unwrap();
    state.apply(Action::cheap(1), &ds).unwrap();
    state.apply(Action::expensive(0), &ds).unwrap();
    let post = model.condition(&state).unwrap();
    let y_max = 0.4;

    // Oracle: f from the two cheap scores, g from the one expensive score.
    let cheap_noise = cm.sigma_cheap.powi(2);
    let exp_noise = cm.sigma_expensive.powi(2);
    let f = common::DenseGp::new(&DMatrix::from_column_slice(2, 1, &[0.2, 0.35]), &[0.1, 0.3], &[cheap_noise; 2], cm.f_spec.signal_variance, &cm.f_spec.lengthscales);
    let g = common::DenseGp::new(&DMatrix::from_row_slice(1, 2, &[0.2, 0.1]), &[0.4], &[exp_noise], cm.g_spec.signal_variance, &cm.g_spec.lengthscales);
    let (gm, gv) = g.point(&[0.35, 0.3]);
    let alpha_tu = ei(gm, (gv + exp_noise).sqrt(), y_max);
    let (fm, fv) = f.point(&[0.5]);
    let sd_c = (fv + cheap_noise).sqrt();
    let m = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let outer: Vec<f64> = (0..m)
        .map(|_| {
            let yc = fm + sd_c * rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal);
            let (um, uv) = g.point(&[0.5, yc]);
            alpha_tu.max(ei(um, (uv + exp_noise).sqrt(), y_max))
        })
        .collect();
    let (oracle, oracle_se) = common::mean_and_se(&outer);

    let alpha = |p: &screenbo::models::ModelPosterior, ids: &[usize], _: &mut ChaCha8Rng| -> screenbo::Result<Vec<f64>> {
        Ok(p.expensive_marginals(ids, &[0.0])?.iter().map(|m| m.expected_improvement(y_max)).collect())
    };
    let ours_now = post.expensive_marginals(&[1], &[0.0]).unwrap()[0].expected_improvement(y_max);
    assert!((ours_now - alpha_tu).abs() < 1e-10);
    let cmp = greedy_comparison(&post, 2, 1, ours_now, 0.2, 1.0, alpha, m, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
    let ours = cmp.cheap_then_best_rate * 1.2;
    assert!((ours - oracle).abs() < 4.0 * std::f64::consts::SQRT_2 * oracle_se, "{ours} vs {oracle} ± {oracle_se}");
    assert!((cmp.expensive_now_rate - alpha_tu).abs() < 1e-10);
    let oracle_choice = oracle / 1.2 > alpha_tu;
    let margin = (oracle / 1.2 - alpha_tu).abs();
    if margin > 8.0 * oracle_se {
        assert_eq!(cmp.choice() == screenbo::engine::ControllerChoice::Cheap, oracle_choice);
    }
}

#[test]
fn every_trace_respects_the_cheap_before_expensive_rule() {
    let ds = generate_problem(&SynthConfig::new(40, 1.0, 8).unwrap()).unwrap();
    for acquisition in [AcquisitionKind::ExpectedImprovement, AcquisitionKind::Threshold, AcquisitionKind::Mining] {
        let policy = Policy { acquisition, controller: ControllerKind::Greedy, model: synth::covariate_model(1.0), settings: settings(), seed: 9 };
        let screen = ScreenSpec { budget: 8.0, c_cheap: 0.2, c_expensive: 1.0, n_top: 4 };
        let trace = run_sequential(&ds, &screen, &policy).unwrap();
        let mut cheap = BTreeSet::new();
        for r in &trace.records {
            match r.test {
                TestKind::Cheap => assert!(cheap.insert(r.candidate_id)),
                TestKind::Expensive => assert!(cheap.contains(&r.candidate_id)),
            }
        }
        assert!(trace.spent() <= 8.0 + 1e-9);
        assert!(8.0 - trace.spent() < 1.0 + 1e-9);
    }
}
