mod common;

use cloze::corpus::Label;
use cloze::features::{extract_all, FeatureConfig};
use cloze::linear::{cv_tune_c, sigmoid, train_logreg, LinearModel, Problem};
use common::{random_instances, rng, synthetic_table};
use proptest::prelude::*;
use rand::Rng;

fn problem(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<Label>) {
    let mut r = rng(seed);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.gen_range(-2.0..2.0)).collect()).collect();
    let mut y: Vec<Label> = (0..n).map(|_| if r.gen_bool(0.5) { Label::Ending2 } else { Label::Ending1 }).collect();
    y[0] = Label::Ending1;
    y[1] = Label::Ending2;
    (x, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gradient_matches_central_differences(seed in any::<u64>(), n in 2usize..30, d in 1usize..8, c in 0.01..10.0f64) {
        let (x, y) = problem(seed, n, d);
        let p = Problem::new(&x, &y, c).unwrap();
        let mut r = rng(seed ^ 1);
        let theta: Vec<f64> = (0..=d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let (_, grad) = p.objective_and_gradient(&theta);
        let h = 1e-6;
        for j in 0..theta.len() {
            let mut plus = theta.clone();
            plus[j] += h;
            let mut minus = theta.clone();
            minus[j] -= h;
            let numeric = (p.objective(&plus) - p.objective(&minus)) / (2.0 * h);
            let rel = (numeric - grad[j]).abs() / numeric.abs().max(grad[j].abs()).max(1.0);
            prop_assert!(rel < 1e-6, "coordinate {j}: analytic {} numeric {numeric}", grad[j]);
        }
    }

    #[test]
    fn objective_never_increases(seed in any::<u64>(), n in 2usize..40, d in 1usize..6, c in 0.01..100.0f64) {
        let (x, y) = problem(seed, n, d);
        let fit = train_logreg(&x, &y, c).unwrap();
        prop_assert!(!fit.objective_trace.is_empty());
        for w in fit.objective_trace.windows(2) {
            prop_assert!(w[1] <= w[0], "{} then {}", w[0], w[1]);
        }
    }

    #[test]
    fn duplicating_rows_and_halving_c_is_a_no_op(seed in any::<u64>(), n in 2usize..20, d in 1usize..5, c in 0.05..5.0f64) {
        let (x, y) = problem(seed, n, d);
        let once = train_logreg(&x, &y, c).unwrap();
        let x2: Vec<Vec<f64>> = x.iter().chain(&x).cloned().collect();
        let y2: Vec<Label> = y.iter().chain(&y).copied().collect();
        let twice = train_logreg(&x2, &y2, c / 2.0).unwrap();
        for (a, b) in once.weights.iter().chain([&once.intercept]).zip(twice.weights.iter().chain([&twice.intercept])) {
            prop_assert!((a - b).abs() < 1e-5 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn label_depends_only_on_probability_order(z in -30.0..30.0f64, k in 0.1..5.0f64) {
        // Any strictly increasing transform of p moves the threshold with it.
        let f = |p: f64| (k * p).exp() + p.powi(3);
        let p = sigmoid(z);
        let (x, y) = problem(0, 4, 1);
        let mut fit = train_logreg(&x, &y, 1.0).unwrap();
        fit.weights = vec![1.0];
        fit.intercept = 0.0;
        let (label, prob) = fit.predict(&[z]);
        prop_assert_eq!(prob, p);
        prop_assert_eq!(label == Label::Ending2, f(p) >= f(0.5));
    }
}

#[test]
fn single_value_grid_picks_that_value() {
    let (x, y) = problem(3, 30, 4);
    let report = cv_tune_c(&x, &y, 5, &[0.7], 1).unwrap();
    assert_eq!(report.best_c, 0.7);
    assert_eq!(report.grid.len(), 1);
    assert_eq!(report.grid[0].fold_accuracies.len(), 5);
}

#[test]
fn cv_is_deterministic_and_ties_go_to_smallest_c() {
    let (x, y) = problem(4, 40, 3);
    let grid = [100.0, 0.01, 1.0];
    let a = cv_tune_c(&x, &y, 4, &grid, 9).unwrap();
    assert_eq!(a, cv_tune_c(&x, &y, 4, &grid, 9).unwrap());
    let top = a.grid.iter().map(|g| g.mean_accuracy).fold(f64::MIN, f64::max);
    let smallest = a.grid.iter().filter(|g| g.mean_accuracy == top).map(|g| g.c).fold(f64::MAX, f64::min);
    assert_eq!(a.best_c, smallest);
}

#[test]
fn saved_model_predicts_identically() {
    let (table, vocab) = synthetic_table(5, 30, 4);
    let (xs, anns) = random_instances(6, &vocab, 40);
    let m = extract_all(&xs, &table, Some(&anns), FeatureConfig::All).unwrap();
    let model = LinearModel::train(&m, FeatureConfig::All, 1.0).unwrap();
    let mut buf = Vec::new();
    model.write(&mut buf).unwrap();
    let back = LinearModel::read(buf.as_slice()).unwrap();
    for row in &m.rows {
        let (la, pa) = model.predict_row(row).unwrap();
        let (lb, pb) = back.predict_row(row).unwrap();
        assert_eq!(la, lb);
        assert_eq!(pa.to_bits(), pb.to_bits());
    }
}

#[test]
fn degenerate_problems_are_rejected() {
    let x = vec![vec![1.0], vec![2.0]];
    assert!(Problem::new(&x, &[Label::Ending1, Label::Ending1], 1.0).is_err());
    assert!(Problem::new(&x, &[Label::Ending1, Label::Ending2], 0.0).is_err());
    assert!(Problem::new(&x, &[Label::Ending1], 1.0).is_err());
    let bad = vec![vec![1.0], vec![f64::NAN]];
    assert!(Problem::new(&bad, &[Label::Ending1, Label::Ending2], 1.0).is_err());
}
