use std::collections::BTreeMap;

use rand::Rng as _;

use psbo::dataset::{Dataset, FeatureKind, FeatureMeta};
use psbo::hyperspace::{Combination, Value};
use psbo::learnzoo::features::{run_feature_selection, FsStatus};
use psbo::learnzoo::meter::{Abort, Clock};
use psbo::learnzoo::model::{evaluate_error, fit_algorithm, Model};
use psbo::learnzoo::registry::entry;
use psbo::learnzoo::table::Table;
use psbo::rng;

fn cat_feature(name: &str, levels: usize) -> FeatureMeta {
    FeatureMeta {
        name: name.into(),
        kind: FeatureKind::Categorical,
        levels: (0..levels).map(|l| format!("v{l}")).collect(),
        imputed: 0,
    }
}

fn num_feature(name: &str) -> FeatureMeta {
    FeatureMeta { name: name.into(), kind: FeatureKind::Numeric, levels: Vec::new(), imputed: 0 }
}

fn dataset(features: Vec<FeatureMeta>, rows: Vec<Vec<f64>>, y: Vec<usize>, k: usize) -> Dataset {
    let cells = rows.into_iter().map(|r| r.into_iter().map(Some).collect()).collect();
    let classes = (0..k).map(|c| format!("c{c}")).collect();
    Dataset::from_cells("t", "class", features, cells, y, classes).unwrap()
}

fn table(d: &Dataset) -> Table {
    let rows: Vec<usize> = (0..d.n()).collect();
    let cols: Vec<usize> = (0..d.p()).collect();
    Table::from_dataset(d, &rows, &cols)
}

fn defaults(id: &str) -> BTreeMap<String, Value> {
    entry(id).unwrap().space.default_values()
}

#[test]
fn forest_stops_after_the_tree_that_exhausts_the_budget() {
    let d = psbo::synth::planted_tree(300, 3, 0.1, 5);
    let t = table(&d);
    let clock = Clock::default();
    let mut values = defaults("random_forest");
    // Unlimited runs with 36 and 37 trees measure the cost of the first 37
    // trees; the same seed grows the same prefix of trees.
    let mut cost = |trees: f64| {
        values.insert("trees".into(), Value::Num(trees));
        let mut m = clock.unlimited();
        let f = fit_algorithm("random_forest", &t, &values, "", &mut rng::stream(11, &[]), &mut m).unwrap();
        assert!(!f.partial);
        m.ops()
    };
    let (o36, o37) = (cost(36.0), cost(37.0));
    assert!(o36 < o37);
    let limit = o37 as f64 / clock.ops_per_unit;

    let mut values = defaults("random_forest");
    values.insert("trees".into(), Value::Num(100.0));
    let mut m = clock.meter(limit);
    let fit = fit_algorithm("random_forest", &t, &values, "", &mut rng::stream(11, &[]), &mut m).unwrap();
    assert!(fit.partial);
    match fit.model {
        Model::Forest(f) => assert_eq!(f.trees.len(), 37),
        other => panic!("expected a forest, got {other:?}"),
    }
}

fn fs_combination(mode: &str, fraction: f64, threshold: f64) -> Combination {
    let mut v = defaults("knn");
    let set = |v: &mut BTreeMap<String, Value>, k: &str, x: Value| {
        v.insert(k.into(), x);
    };
    set(&mut v, "fs.use", Value::Cat("true".into()));
    set(&mut v, "fs.search", Value::Cat("ranker".into()));
    set(&mut v, "fs.evaluator", Value::Cat("info_gain".into()));
    set(&mut v, "fs.ranker.mode", Value::Cat(mode.into()));
    if mode == "top_fraction" {
        set(&mut v, "fs.ranker.fraction", Value::Num(fraction));
    } else {
        set(&mut v, "fs.ranker.threshold", Value::Num(threshold));
    }
    set(&mut v, "fs.bins", Value::Num(10.0));
    Combination::new("knn", v)
}

/// Ten binary features; feature j copies the label on a fraction of rows
/// that falls with j, so information gain falls strictly with j.
fn toy_fs_data() -> Dataset {
    fs_data(1.0)
}

fn fs_data(strength: f64) -> Dataset {
    let n = 400;
    let mut r = rng::stream(3, &[]);
    let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..10)
                .map(|j| {
                    let agree = strength * (1.0 - 0.05 * j as f64);
                    let copy = r.gen::<f64>() < agree;
                    if copy { y[i] as f64 } else { r.gen_range(0..2) as f64 }
                })
                .collect()
        })
        .collect();
    // Shuffle the column order so the best features are not simply 0..4.
    let perm = [7usize, 2, 9, 0, 5, 1, 8, 3, 6, 4];
    let rows = rows.into_iter().map(|r| perm.iter().map(|&p| r[p]).collect()).collect();
    let features = (0..10).map(|j| cat_feature(&format!("f{j}"), 2)).collect();
    dataset(features, rows, y, 2)
}

fn info_gain_oracle(d: &Dataset, j: usize) -> f64 {
    let n = d.n() as f64;
    let h = |counts: &[f64]| -> f64 {
        let tot: f64 = counts.iter().sum();
        counts.iter().filter(|&&c| c > 0.0).map(|&c| -(c / tot) * (c / tot).ln()).sum()
    };
    let mut joint = [[0.0f64; 2]; 2];
    for i in 0..d.n() {
        joint[d.value(i, j) as usize][d.label(i)] += 1.0;
    }
    let hy = h(&[joint[0][0] + joint[1][0], joint[0][1] + joint[1][1]]);
    let cond: f64 = joint.iter().map(|row| (row[0] + row[1]) / n * h(row)).sum();
    hy - cond
}

#[test]
fn ranker_keeps_the_top_40_percent_by_information_gain() {
    let d = toy_fs_data();
    let t = table(&d);
    let mut gains: Vec<(f64, usize)> = (0..10).map(|j| (info_gain_oracle(&d, j), j)).collect();
    gains.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut expected: Vec<usize> = gains[..4].iter().map(|g| g.1).collect();
    expected.sort_unstable();

    let block = fs_combination("top_fraction", 0.4, 0.0).fs_block().unwrap();
    let out = run_feature_selection(&block, &t, &mut Clock::default().unlimited());
    assert_eq!(out.status, FsStatus::Selected(expected));
}

#[test]
fn threshold_above_every_score_selects_nothing() {
    let d = fs_data(0.5);
    let block = fs_combination("threshold", 0.0, 0.5).fs_block().unwrap();
    let max_gain_ratio = (0..10).map(|j| info_gain_oracle(&d, j)).fold(0.0, f64::max) / 2f64.ln();
    assert!(max_gain_ratio < 0.5);
    let out = run_feature_selection(&block, &table(&d), &mut Clock::default().unlimited());
    assert_eq!(out.status, FsStatus::None);
}

#[test]
fn zero_budget_feature_selection_times_out() {
    let d = toy_fs_data();
    let block = fs_combination("top_fraction", 0.4, 0.0).fs_block().unwrap();
    let out = run_feature_selection(&block, &table(&d), &mut Clock::default().meter(0.0));
    assert_eq!(out.status, FsStatus::Timeout);
}

#[test]
fn knn_with_zero_budget_aborts_and_zero_r_always_fits() {
    let d = toy_fs_data();
    let t = table(&d);
    let clock = Clock::default();
    let r = fit_algorithm("knn", &t, &defaults("knn"), "", &mut rng::stream(1, &[]), &mut clock.meter(0.0));
    assert_eq!(r.err(), Some(Abort::Budget));
    let z = fit_algorithm("zero_r", &t, &BTreeMap::new(), "", &mut rng::stream(1, &[]), &mut clock.meter(1.0)).unwrap();
    assert!(!z.partial);
}

#[test]
fn zero_r_error_is_the_minority_share() {
    let y: Vec<usize> = (0..50).map(|i| usize::from(i % 5 >= 3)).collect(); // 60% class 0
    let rows = (0..50).map(|i| vec![i as f64]).collect();
    let d = dataset(vec![num_feature("x")], rows, y, 2);
    let t = table(&d);
    let clock = Clock::default();
    let fit = fit_algorithm("zero_r", &t, &BTreeMap::new(), "", &mut rng::stream(1, &[]), &mut clock.unlimited()).unwrap();
    let e = evaluate_error(&fit.model, &t, &mut clock.unlimited());
    assert_eq!(e, 20.0 / 50.0);
}

#[test]
fn unrelated_predictions_over_ten_classes_err_about_90_percent() {
    // A 1-nearest-neighbour model trained on random labels predicts labels
    // independent of the (also random) validation labels.
    let mut r = rng::stream(8, &[]);
    let mut make = |n: usize| {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![r.gen::<f64>(), r.gen::<f64>()]).collect();
        let y: Vec<usize> = (0..n).map(|i| if i < 10 { i } else { r.gen_range(0..10) }).collect();
        dataset(vec![num_feature("a"), num_feature("b")], rows, y, 10)
    };
    let (train, val) = (make(2000), make(5000));
    let mut v = defaults("knn");
    v.insert("k".into(), Value::Num(1.0));
    let clock = Clock::default();
    let fit = fit_algorithm("knn", &table(&train), &v, "", &mut rng::stream(1, &[]), &mut clock.unlimited()).unwrap();
    let e = evaluate_error(&fit.model, &table(&val), &mut clock.unlimited());
    let sigma = (0.9f64 * 0.1 / 5000.0).sqrt();
    assert!((e - 0.9).abs() <= 3.0 * sigma, "error {e}");
}

#[test]
fn a_perfect_model_has_zero_error() {
    let d = psbo::synth::planted_tree(200, 0, 0.0, 2);
    let t = table(&d);
    let clock = Clock::default();
    let mut v = defaults("decision_tree");
    for (k, x) in v.iter_mut() {
        if k == "min_leaf" {
            *x = Value::Num(1.0);
        }
    }
    let fit = fit_algorithm("decision_tree", &t, &v, "", &mut rng::stream(1, &[]), &mut clock.unlimited()).unwrap();
    assert_eq!(evaluate_error(&fit.model, &t, &mut clock.unlimited()), 0.0);
}
