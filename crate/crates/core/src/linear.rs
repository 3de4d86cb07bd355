//! L2-regularized logistic regression and cross-validated choice of `C`.
//!
//! The objective is
//!
//! ```text
//! f(w, b) = ½‖w‖² + C · Σᵢ log(1 + exp(−yᵢ (w·xᵢ + b)))
//! ```
//!
//! with `yᵢ = +1` for label 2 and `−1` for label 1. The intercept is not
//! penalized. Minimization is full-batch L-BFGS with a backtracking Armijo
//! line search, stopping when the gradient ∞-norm drops below `1e-8` or after
//! 1000 iterations.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::Label;
use crate::features::{FeatureConfig, FeatureError, FeatureMatrix, FeatureVector, Scaler};
use crate::rng;

#[derive(Debug, Error)]
pub enum LinearError {
    #[error("training data contains only label {0:?}")]
    SingleClass(Label),
    #[error("training data is empty")]
    Empty,
    #[error("row {row}: non-finite feature value")]
    NonFinite { row: usize },
    #[error("row {row} has {found} features, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("{rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("row {0} is unlabeled")]
    Unlabeled(usize),
    #[error("regularization constant must be positive and finite, got {0}")]
    BadC(f64),
    #[error("feature layout does not match the model")]
    LayoutMismatch,
    #[error("cross-validation grid is empty")]
    EmptyGrid,
    #[error("need 2 <= folds <= {n}, got {folds}")]
    BadFolds { folds: usize, n: usize },
    #[error("model file line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Candidate values of `C` used when none are given.
pub const DEFAULT_C_GRID: [f64; 8] = [0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 100.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub tolerance: f64,
    pub memory: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iter: 1000,
            tolerance: 1e-8,
            memory: 10,
        }
    }
}

/// Raw solution of the training problem on unscaled inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub c: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after initialization and after every accepted step.
    pub objective_trace: Vec<f64>,
}

impl LogisticFit {
    pub fn margin(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.intercept
    }

    /// Label 2 iff `σ(w·x + b) ≥ ½`.
    pub fn predict(&self, x: &[f64]) -> (Label, f64) {
        let p = sigmoid(self.margin(x));
        (if p >= 0.5 { Label::Ending2 } else { Label::Ending1 }, p)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(−m))` without overflow.
fn log1p_exp_neg(m: f64) -> f64 {
    if m > 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

fn sign(label: Label) -> f64 {
    match label {
        Label::Ending1 => -1.0,
        Label::Ending2 => 1.0,
    }
}

/// A validated training problem. `theta` packs `[w…, b]`.
pub struct Problem<'a> {
    x: &'a [Vec<f64>],
    y: Vec<f64>,
    c: f64,
}

impl<'a> Problem<'a> {
    pub fn new(x: &'a [Vec<f64>], labels: &[Label], c: f64) -> Result<Self, LinearError> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(LinearError::BadC(c));
        }
        if x.len() != labels.len() {
            return Err(LinearError::LabelCount {
                rows: x.len(),
                labels: labels.len(),
            });
        }
        let first = labels.first().ok_or(LinearError::Empty)?;
        if labels.iter().all(|l| l == first) {
            return Err(LinearError::SingleClass(*first));
        }
        let width = x[0].len();
        for (row, r) in x.iter().enumerate() {
            if r.len() != width {
                return Err(LinearError::Ragged {
                    row,
                    expected: width,
                    found: r.len(),
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(LinearError::NonFinite { row });
            }
        }
        Ok(Problem {
            x,
            y: labels.iter().map(|&l| sign(l)).collect(),
            c,
        })
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    pub fn objective(&self, theta: &[f64]) -> f64 {
        let (w, b) = theta.split_at(self.dim());
        let loss: f64 = self
            .x
            .iter()
            .zip(&self.y)
            .map(|(xi, yi)| log1p_exp_neg(yi * (dot(w, xi) + b[0])))
            .sum();
        0.5 * dot(w, w) + self.c * loss
    }

    pub fn objective_and_gradient(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let d = self.dim();
        let (w, b) = theta.split_at(d);
        let mut grad = vec![0.0; d + 1];
        grad[..d].copy_from_slice(w);
        let mut loss = 0.0;
        for (xi, yi) in self.x.iter().zip(&self.y) {
            let m = yi * (dot(w, xi) + b[0]);
            loss += log1p_exp_neg(m);
            // d/dz log(1+exp(−y z)) = −y σ(−m)
            let coef = -self.c * yi * sigmoid(-m);
            for (g, v) in grad[..d].iter_mut().zip(xi) {
                *g += coef * v;
            }
            grad[d] += coef;
        }
        (0.5 * dot(w, w) + self.c * loss, grad)
    }
}

/// Fits on rows `x` with labels `labels` at regularization `c`.
pub fn train_logreg(x: &[Vec<f64>], labels: &[Label], c: f64) -> Result<LogisticFit, LinearError> {
    train_logreg_with(x, labels, c, SolverOptions::default())
}

pub fn train_logreg_with(
    x: &[Vec<f64>],
    labels: &[Label],
    c: f64,
    options: SolverOptions,
) -> Result<LogisticFit, LinearError> {
    let problem = Problem::new(x, labels, c)?;
    let d = problem.dim();
    let mut theta = vec![0.0; d + 1];
    // Start the intercept at the class log-odds, its optimum when w = 0.
    let positives = labels.iter().filter(|&&l| l == Label::Ending2).count() as f64;
    theta[d] = (positives / (labels.len() as f64 - positives)).ln();

    let (mut f, mut g) = problem.objective_and_gradient(&theta);
    let mut trace = vec![f];
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(options.memory);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < options.max_iter {
        if inf_norm(&g) < options.tolerance {
            converged = true;
            break;
        }
        let mut direction = two_loop(&g, &memory);
        let mut slope = dot(&g, &direction);
        if slope >= 0.0 {
            memory.clear();
            direction = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let step = backtrack(&problem, &theta, f, slope, &direction);
        let Some((t, theta_new, f_new, g_new)) = step else {
            if memory.is_empty() {
                // No decrease representable in floating point.
                break;
            }
            memory.clear();
            continue;
        };
        let s: Vec<f64> = direction.iter().map(|v| t * v).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * dot(&yv, &yv).sqrt() * dot(&s, &s).sqrt() {
            if memory.len() == options.memory {
                memory.pop_front();
            }
            memory.push_back((s, yv, 1.0 / sy));
        }
        theta = theta_new;
        f = f_new;
        g = g_new;
        trace.push(f);
        iterations += 1;
    }
    if !converged && inf_norm(&g) < options.tolerance {
        converged = true;
    }
    let intercept = theta.pop().unwrap_or_default();
    Ok(LogisticFit {
        weights: theta,
        intercept,
        c,
        iterations,
        converged,
        objective_trace: trace,
    })
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// L-BFGS two-loop recursion: returns −H·g.
fn two_loop(g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|qi| *qi *= gamma);
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let beta = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - beta) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

type Step = (f64, Vec<f64>, f64, Vec<f64>);

fn backtrack(problem: &Problem<'_>, theta: &[f64], f: f64, slope: f64, direction: &[f64]) -> Option<Step> {
    const ARMIJO: f64 = 1e-4;
    let mut t = 1.0;
    for _ in 0..60 {
        let candidate: Vec<f64> = theta.iter().zip(direction).map(|(x, d)| x + t * d).collect();
        let (f_new, g_new) = problem.objective_and_gradient(&candidate);
        if f_new.is_finite() && f_new <= f + ARMIJO * t * slope {
            return Some((t, candidate, f_new, g_new));
        }
        t *= 0.5;
    }
    None
}

/// A trained classifier together with the feature layout and scaling it
/// expects.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub config: FeatureConfig,
    pub names: Arc<[String]>,
    pub scaler: Scaler,
    pub fit: LogisticFit,
}

fn labels_of(matrix: &FeatureMatrix) -> Result<Vec<Label>, LinearError> {
    matrix
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| l.ok_or(LinearError::Unlabeled(i)))
        .collect()
}

fn fit_scaled(rows: &[Vec<f64>], labels: &[Label], c: f64) -> Result<(Scaler, LogisticFit), LinearError> {
    let scaler = Scaler::fit(rows)?;
    let scaled: Vec<Vec<f64>> = rows.iter().map(|r| scaler.transform(r)).collect();
    let fit = train_logreg(&scaled, labels, c)?;
    Ok((scaler, fit))
}

impl LinearModel {
    /// Fits the scaler on `features`, then the classifier on scaled rows.
    pub fn train(features: &FeatureMatrix, config: FeatureConfig, c: f64) -> Result<Self, LinearError> {
        let labels = labels_of(features)?;
        let (scaler, fit) = fit_scaled(&features.rows, &labels, c)?;
        Ok(LinearModel {
            config,
            names: features.names.clone(),
            scaler,
            fit,
        })
    }

    pub fn c(&self) -> f64 {
        self.fit.c
    }

    /// Scores an unscaled row laid out like the training features.
    pub fn predict_row(&self, row: &[f64]) -> Result<(Label, f64), LinearError> {
        if row.len() != self.names.len() {
            return Err(LinearError::LayoutMismatch);
        }
        Ok(self.fit.predict(&self.scaler.transform(row)))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LinearError> {
        self.write(File::create(path)?)
    }

    /// Text format:
    ///
    /// ```text
    /// cloze-linear v1
    /// config <name>
    /// c <C>
    /// intercept <b>
    /// features <n>
    /// <name>\t<min>\t<max>\t<weight>      (n lines)
    /// ```
    pub fn write<W: Write>(&self, writer: W) -> Result<(), LinearError> {
        let mut w = io::BufWriter::new(writer);
        writeln!(w, "{LINEAR_MAGIC}")?;
        writeln!(w, "config {}", self.config.name())?;
        writeln!(w, "c {}", self.fit.c)?;
        writeln!(w, "intercept {}", self.fit.intercept)?;
        writeln!(w, "features {}", self.names.len())?;
        for (j, name) in self.names.iter().enumerate() {
            writeln!(
                w,
                "{name}\t{}\t{}\t{}",
                self.scaler.min[j], self.scaler.max[j], self.fit.weights[j]
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LinearError> {
        Self::read(BufReader::new(File::open(path)?))
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, LinearError> {
        let mut lines = reader.lines().enumerate();
        let mut next = |expect: &str| -> Result<(usize, String), LinearError> {
            match lines.next() {
                Some((i, line)) => Ok((i + 1, line?)),
                None => Err(LinearError::Format {
                    line: 0,
                    reason: format!("unexpected end of file, expected {expect}"),
                }),
            }
        };
        let bad = |line: usize, reason: String| LinearError::Format { line, reason };

        let (n, magic) = next("header")?;
        if magic.trim_end() != LINEAR_MAGIC {
            return Err(bad(n, format!("expected {LINEAR_MAGIC:?}")));
        }
        let mut field = |key: &str| -> Result<(usize, String), LinearError> {
            let (n, line) = next(key)?;
            match line.split_once(' ') {
                Some((k, v)) if k == key => Ok((n, v.trim().to_string())),
                _ => Err(bad(n, format!("expected \"{key} <value>\""))),
            }
        };
        let (n, config) = field("config")?;
        let config: FeatureConfig = config.parse().map_err(|_| bad(n, format!("unknown config {config:?}")))?;
        let (n, c) = field("c")?;
        let c: f64 = c.parse().map_err(|_| bad(n, "bad C".to_string()))?;
        let (n, intercept) = field("intercept")?;
        let intercept: f64 = intercept.parse().map_err(|_| bad(n, "bad intercept".to_string()))?;
        let (n, count) = field("features")?;
        let count: usize = count.parse().map_err(|_| bad(n, "bad feature count".to_string()))?;

        let mut names = Vec::with_capacity(count);
        let mut min = Vec::with_capacity(count);
        let mut max = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, line) = next("feature line")?;
            let parts: Vec<&str> = line.split('\t').collect();
            let [name, lo, hi, wt] = parts[..] else {
                return Err(bad(n, "expected name<TAB>min<TAB>max<TAB>weight".to_string()));
            };
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n, format!("bad number {s:?}")));
            names.push(name.to_string());
            min.push(num(lo)?);
            max.push(num(hi)?);
            weights.push(num(wt)?);
        }
        Ok(LinearModel {
            config,
            names: names.into(),
            scaler: Scaler { min, max },
            fit: LogisticFit {
                weights,
                intercept,
                c,
                iterations: 0,
                converged: true,
                objective_trace: Vec::new(),
            },
        })
    }
}

const LINEAR_MAGIC: &str = "cloze-linear v1";

/// Label and probability of label 2 for a feature vector with the model's
/// layout.
pub fn predict(model: &LinearModel, v: &FeatureVector) -> Result<(Label, f64), LinearError> {
    if !Arc::ptr_eq(&model.names, &v.names) && model.names != v.names {
        return Err(LinearError::LayoutMismatch);
    }
    model.predict_row(&v.values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvCell {
    pub c: f64,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub grid: Vec<CvCell>,
    pub best_c: f64,
}

/// K-fold cross-validation over `grid`.
///
/// Rows are shuffled under `seed` and cut into `folds` contiguous blocks.
/// The scaler is refit on each training part. The best `C` has the highest
/// mean held-out accuracy; ties go to the smallest `C`.
pub fn cv_tune_c(
    x: &[Vec<f64>],
    labels: &[Label],
    folds: usize,
    grid: &[f64],
    seed: u64,
) -> Result<CvReport, LinearError> {
    if grid.is_empty() {
        return Err(LinearError::EmptyGrid);
    }
    let n = x.len();
    if folds < 2 || n < folds {
        return Err(LinearError::BadFolds { folds, n });
    }
    if labels.len() != n {
        return Err(LinearError::LabelCount { rows: n, labels: labels.len() });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    let bounds: Vec<(usize, usize)> = (0..folds).map(|f| (f * n / folds, (f + 1) * n / folds)).collect();

    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..folds).map(move |f| (g, f))).collect();
    let accuracies: Vec<f64> = jobs
        .par_iter()
        .map(|&(g, f)| {
            let (lo, hi) = bounds[f];
            let held = &order[lo..hi];
            let train: Vec<usize> = order[..lo].iter().chain(&order[hi..]).copied().collect();
            let rows: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
            let ys: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
            let (scaler, fit) = fit_scaled(&rows, &ys, grid[g])?;
            let correct = held
                .iter()
                .filter(|&&i| fit.predict(&scaler.transform(&x[i])).0 == labels[i])
                .count();
            Ok(correct as f64 / held.len() as f64)
        })
        .collect::<Result<_, LinearError>>()?;

    let cells: Vec<CvCell> = grid
        .iter()
        .enumerate()
        .map(|(g, &c)| {
            let fold_accuracies = accuracies[g * folds..(g + 1) * folds].to_vec();
            let mean_accuracy = fold_accuracies.iter().sum::<f64>() / folds as f64;
            CvCell {
                c,
                mean_accuracy,
                fold_accuracies,
            }
        })
        .collect();
    let best = cells
        .iter()
        .max_by(|a, b| {
            a.mean_accuracy
                .total_cmp(&b.mean_accuracy)
                .then_with(|| b.c.total_cmp(&a.c))
        })
        .expect("grid is nonempty");
    Ok(CvReport {
        best_c: best.c,
        grid: cells,
    })
}

/// Cross-validates `C` on `features`, then retrains on all of it.
pub fn train_with_cv(
    features: &FeatureMatrix,
    config: FeatureConfig,
    folds: usize,
    grid: &[f64],
    seed: u64,
) -> Result<(LinearModel, CvReport), LinearError> {
    let labels = labels_of(features)?;
    let report = cv_tune_c(&features.rows, &labels, folds, grid, seed)?;
    let model = LinearModel::train(features, config, report.best_c)?;
    Ok((model, report))
}
