mod common;

use std::collections::BTreeMap;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use vcnis::cli::{simulate_replicate, summarize, BasisArgs, SimMode};
use vcnis::group_scad::ScadModel;
use vcnis::marginal_screen::{correlation_scores, fit_intercept_only, minimum_model_size, rank_descending};
use vcnis::simgen::{generate, metrics, Example, SimSpec};
use vcnis::{fit_group_scad, Dataset, InisConfig, ScadConfig, SplineBasis};

fn spline_model(gamma0: Vec<f64>, gammas: BTreeMap<usize, Vec<f64>>) -> ScadModel {
    ScadModel {
        active_set: gammas.keys().copied().collect(),
        gamma0,
        gammas,
        lambda_star: 0.0,
        bic: 0.0,
        fitted: Vec::new(),
        sigma2_hat: 0.0,
        overparameterized: false,
        path: Vec::new(),
    }
}

#[test]
fn oracle_model_on_noiseless_data_has_zero_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 200;
    let w: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let cols: Vec<Vec<f64>> = (0..3).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let basis = SplineBasis::build(&w, 6, 3).unwrap();
    let g0: Vec<f64> = (0..6).map(|k| 0.3 * k as f64).collect();
    let g1: Vec<f64> = (0..6).map(|k| (k as f64).sin()).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let b = basis.eval(w[i]);
            let dot = |g: &[f64]| b.iter().zip(g).map(|(x, c)| x * c).sum::<f64>();
            dot(&g0) + cols[1][i] * dot(&g1)
        })
        .collect();
    let test = Dataset::new(y, w, cols).unwrap();
    let model = spline_model(g0, BTreeMap::from([(1, g1)]));
    let m = metrics(&[1], &[1], &model, &basis, &test);
    assert_eq!((m.tp, m.fp), (1, 0));
    assert!(m.pe < 1e-10, "{}", m.pe);
}

#[test]
fn selecting_the_true_set_has_no_false_positives() {
    let sim = generate(&SimSpec::new(Example::Ex3 { t1: 0.0, t2: 0.0 }, 400, 50, 8)).unwrap();
    let basis = SplineBasis::build(sim.train.w(), 7, 3).unwrap();
    let model = fit_group_scad(&sim.train, &basis, &sim.true_support, &ScadConfig::default()).unwrap();
    let m = metrics(&sim.true_support, &sim.true_support, &model, &basis, &sim.test);
    assert_eq!((m.tp, m.fp), (4, 0));
}

#[test]
fn empty_selection_predicts_with_the_intercept_function() {
    let sim = generate(&SimSpec::new(Example::Ex3 { t1: 0.0, t2: 0.0 }, 400, 20, 9)).unwrap();
    let basis = SplineBasis::build(sim.train.w(), 7, 3).unwrap();
    let model = fit_group_scad(&sim.train, &basis, &[], &ScadConfig::default()).unwrap();
    let m = metrics(&[], &sim.true_support, &model, &basis, &sim.test);
    assert_eq!(m.tp, 0);
    let eta0 = fit_intercept_only(&sim.train, &basis).unwrap().eta0;
    let resid: Vec<f64> = (0..sim.test.n())
        .map(|i| {
            let b = basis.eval(sim.test.w()[i]);
            sim.test.y()[i] - b.iter().zip(&eta0).map(|(x, c)| x * c).sum::<f64>()
        })
        .collect();
    assert!((m.pe - ms(&resid)).abs() < 1e-10);
}

#[test]
fn example2_minimum_model_size_is_small() {
    let mut nis = Vec::new();
    let mut sis = Vec::new();
    for rep in 0..20 {
        let spec = SimSpec::new(Example::Ex2 { t1: 0.0, t2: 0.0 }, 400, 1000, 2024).replicate(rep);
        let sim = generate(&spec).unwrap();
        let basis = SplineBasis::build(sim.train.w(), 7, 3).unwrap();
        let r = vcnis::screen_all(&sim.train, &basis).unwrap();
        nis.push(minimum_model_size(&r.ranking, &sim.true_support).unwrap() as f64);
        let c = rank_descending(&correlation_scores(&sim.train));
        sis.push(minimum_model_size(&c, &sim.true_support).unwrap() as f64);
    }
    println!("example 2 median MMS: NIS {} SIS {}", median(&nis), median(&sis));
    assert!(median(&nis) <= 10.0);
}

#[test]
fn mms_mode_fills_both_columns() {
    let spec = SimSpec::new(Example::Ex2 { t1: 0.0, t2: 0.0 }, 200, 100, 1);
    let basis = BasisArgs {
        basis_size: 7,
        degree: 3,
    };
    let row = simulate_replicate(&spec, 0, &basis, SimMode::Mms, &InisConfig::default()).unwrap();
    assert!(row.mms_nis.is_some() && row.mms_sis.is_some());
    assert!(row.tp.is_none());
}

#[test]
fn single_replicate_summary_is_the_replicate() {
    let spec = SimSpec::new(Example::Ex3 { t1: 0.0, t2: 0.0 }, 200, 100, 3);
    let basis = BasisArgs {
        basis_size: 7,
        degree: 3,
    };
    let row = simulate_replicate(&spec, 0, &basis, SimMode::Select, &InisConfig::default()).unwrap();
    let s = summarize(std::slice::from_ref(&row));
    assert_eq!(s[0].stat, "median");
    assert_eq!(s[0].tp, row.tp.map(|v| v as f64));
    assert_eq!(s[0].fp, row.fp.map(|v| v as f64));
    assert_eq!(s[0].pe, row.pe);
}

#[test]
fn replicates_are_reproducible() {
    let spec = SimSpec::new(Example::Ex4 { t1: 0.0, t2: 0.0 }, 200, 60, 5);
    let basis = BasisArgs {
        basis_size: 7,
        degree: 3,
    };
    let a = simulate_replicate(&spec, 2, &basis, SimMode::Select, &InisConfig::default()).unwrap();
    let b = simulate_replicate(&spec, 2, &basis, SimMode::Select, &InisConfig::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.pe.unwrap().to_bits(), b.pe.unwrap().to_bits());
}

#[test]
fn housing_pipeline_runs_on_a_synthetic_table() {
    use vcnis::simgen::{augment_housing, load_housing_csv, split_rows, HOUSING_COLUMNS};
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("housing.csv");
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut text = HOUSING_COLUMNS.join(",").to_lowercase().replace("mv", "medv");
    text.push('\n');
    for _ in 0..120 {
        let row: Vec<String> = (0..HOUSING_COLUMNS.len()).map(|_| format!("{}", 0.5 + 10.0 * rng.random::<f64>())).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(&path, text).unwrap();
    let raw = load_housing_csv(&path).unwrap().standardized();
    assert_eq!(raw.p(), 12);
    let full = augment_housing(&raw, 60, 2.0, 1).unwrap();
    assert_eq!(full.p(), 60);
    let (tr, te) = split_rows(full.n(), 90, 2).unwrap();
    let train = full.select_rows(&tr);
    let basis = SplineBasis::build(train.w(), 5, 3).unwrap();
    let res = vcnis::run_inis(&train, &basis, &InisConfig::default()).unwrap();
    let m = metrics(&res.selected, &(0..12).collect::<Vec<_>>(), &res.model, &basis, &full.select_rows(&te));
    assert!(m.pe.is_finite());
}
