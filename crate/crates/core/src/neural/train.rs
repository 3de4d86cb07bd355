use std::io::{self, Write};

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::model::{backward_into, embed_instance, forward, init_params, EmbeddedInstance, NeuralModel};
use super::{NeuralError, Variant};
use crate::corpus::{ClozeInstance, Label};
use crate::embeddings::EmbeddingTable;
use crate::rng;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Instances per parallel work item. Gradients are summed inside a chunk,
/// then chunks are summed in index order, so results do not depend on the
/// number of threads.
const GRADIENT_CHUNK: usize = 32;

/// First and second moment estimates, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: NeuralModel,
    v: NeuralModel,
    t: u64,
}

impl AdamState {
    pub fn new(model: &NeuralModel) -> Self {
        AdamState {
            m: model.zeros_like(),
            v: model.zeros_like(),
            t: 0,
        }
    }

    /// Number of updates applied so far.
    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam step on `params`.
pub fn adam_update(params: &mut NeuralModel, state: &mut AdamState, grads: &NeuralModel, lr: f64) {
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    let tensors = params
        .tensors_mut()
        .into_iter()
        .zip(state.m.tensors_mut())
        .zip(state.v.tensors_mut())
        .zip(grads.tensors());
    for (((p, m), v), (_, _, g)) in tensors {
        for k in 0..p.len() {
            m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * g[k];
            v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * g[k] * g[k];
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            p[k] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
        }
    }
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: Variant,
    pub hidden: usize,
    pub batch: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Used by [`grid_search`]; a single [`train`] call is one restart.
    pub restarts: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: Variant::Raw,
            hidden: 384,
            batch: 500,
            epochs: 10,
            lr: 0.001,
            seed: 0,
            restarts: 5,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), NeuralError> {
        let bad = |what: &str| Err(NeuralError::Config(format!("{what} must be positive")));
        if self.hidden == 0 {
            return bad("hidden size");
        }
        if self.batch == 0 {
            return bad("batch size");
        }
        if self.epochs == 0 {
            return bad("epoch count");
        }
        if self.restarts == 0 {
            return bad("restart count");
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("learning rate");
        }
        Ok(())
    }
}

/// Result of one training run. `model` is the snapshot from `best_epoch`.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: NeuralModel,
    /// 1-based.
    pub best_epoch: usize,
    pub dev_accuracy: f64,
    /// Mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub dev_accuracies: Vec<f64>,
}

fn embed_labeled<'a>(
    table: &'a EmbeddingTable,
    instances: &[ClozeInstance],
) -> Result<Vec<(EmbeddedInstance<'a>, Label)>, NeuralError> {
    instances
        .iter()
        .map(|inst| {
            let gold = inst.gold.ok_or_else(|| NeuralError::Unlabeled(inst.id.clone()))?;
            Ok((embed_instance(table, inst), gold))
        })
        .collect()
}

fn embedded_accuracy(model: &NeuralModel, data: &[(EmbeddedInstance<'_>, Label)]) -> Result<f64, NeuralError> {
    let correct = data
        .par_iter()
        .map(|(input, gold)| Ok(usize::from(predict_embedded(model, input)?.0 == *gold)))
        .collect::<Result<Vec<usize>, NeuralError>>()?
        .into_iter()
        .sum::<usize>();
    Ok(correct as f64 / data.len() as f64)
}

fn predict_embedded(model: &NeuralModel, input: &EmbeddedInstance<'_>) -> Result<(Label, [f64; 2]), NeuralError> {
    let (p, _) = forward(model, input)?;
    let label = if p[1] > p[0] { Label::Ending2 } else { Label::Ending1 };
    Ok((label, p))
}

/// Mean gradient and mean loss over `batch`.
fn batch_gradient(
    model: &NeuralModel,
    batch: &[&(EmbeddedInstance<'_>, Label)],
) -> Result<(NeuralModel, f64), NeuralError> {
    let partials = batch
        .par_chunks(GRADIENT_CHUNK)
        .map(|chunk| {
            let mut grads = model.zeros_like();
            let mut loss = 0.0;
            for (input, gold) in chunk.iter().copied() {
                let (_, cache) = forward(model, input)?;
                loss += backward_into(model, &cache, *gold, &mut grads);
            }
            Ok((grads, loss))
        })
        .collect::<Result<Vec<_>, NeuralError>>()?;
    let mut iter = partials.into_iter();
    let (mut total, mut loss) = iter.next().expect("nonempty batch");
    for (g, l) in iter {
        total.add_assign(&g);
        loss += l;
    }
    let n = batch.len() as f64;
    total.scale(1.0 / n);
    Ok((total, loss / n))
}

/// Trains one model with Adam on mean cross-entropy. Dev accuracy is measured
/// after every epoch and the best snapshot is returned; ties keep the earlier
/// epoch.
pub fn train(
    train: &[ClozeInstance],
    dev: &[ClozeInstance],
    table: &EmbeddingTable,
    config: &TrainConfig,
) -> Result<TrainOutcome, NeuralError> {
    config.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(NeuralError::EmptyData);
    }
    let train_data = embed_labeled(table, train)?;
    let dev_data = embed_labeled(table, dev)?;
    let mut model = init_params(config.seed, table.dim(), config.hidden, config.variant);
    let mut adam = AdamState::new(&model);
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut shuffle_rng = rng::stream(config.seed, 1);

    let mut best: Option<(NeuralModel, usize, f64)> = None;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut dev_accuracies = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for batch_idx in order.chunks(config.batch) {
            let batch: Vec<_> = batch_idx.iter().map(|&i| &train_data[i]).collect();
            let (grads, loss) = batch_gradient(&model, &batch)?;
            adam_update(&mut model, &mut adam, &grads, config.lr);
            loss_sum += loss * batch.len() as f64;
        }
        let mean_loss = loss_sum / train_data.len() as f64;
        let acc = embedded_accuracy(&model, &dev_data)?;
        log::info!(
            "{} h={} batch={} seed={} epoch {epoch}: loss {mean_loss:.5}, dev accuracy {acc:.4}",
            config.variant,
            config.hidden,
            config.batch,
            config.seed
        );
        epoch_losses.push(mean_loss);
        dev_accuracies.push(acc);
        if best.as_ref().is_none_or(|b| acc > b.2) {
            best = Some((model.clone(), epoch, acc));
        }
    }
    let (model, best_epoch, dev_accuracy) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        model,
        best_epoch,
        dev_accuracy,
        epoch_losses,
        dev_accuracies,
    })
}

/// Predicted label and probabilities; ties go to ending 1.
pub fn predict(
    model: &NeuralModel,
    table: &EmbeddingTable,
    instance: &ClozeInstance,
) -> Result<(Label, [f64; 2]), NeuralError> {
    predict_embedded(model, &embed_instance(table, instance))
}

/// Fraction of `instances` labeled correctly.
pub fn accuracy(model: &NeuralModel, table: &EmbeddingTable, instances: &[ClozeInstance]) -> Result<f64, NeuralError> {
    if instances.is_empty() {
        return Err(NeuralError::EmptyData);
    }
    embedded_accuracy(model, &embed_labeled(table, instances)?)
}

/// Hidden sizes and batch sizes to search; the remaining settings (variant,
/// epochs, lr, seed, restarts) come from `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub hidden: Vec<usize>,
    pub batch: Vec<usize>,
    pub base: TrainConfig,
}

impl GridSpec {
    pub const DEFAULT_HIDDEN: [usize; 4] = [128, 256, 384, 512];
    pub const DEFAULT_BATCH: [usize; 6] = [50, 100, 200, 300, 400, 500];

    pub fn full(base: TrainConfig) -> Self {
        GridSpec {
            hidden: Self::DEFAULT_HIDDEN.to_vec(),
            batch: Self::DEFAULT_BATCH.to_vec(),
            base,
        }
    }

    /// A 1×1 grid at the base hidden and batch sizes.
    pub fn single(base: TrainConfig) -> Self {
        GridSpec {
            hidden: vec![base.hidden],
            batch: vec![base.batch],
            base,
        }
    }
}

/// Seed of restart `r`; restart 0 uses the base seed itself.
fn restart_seed(seed: u64, r: usize) -> u64 {
    if r == 0 {
        seed
    } else {
        rng::derive(seed, r as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub hidden: usize,
    pub batch: usize,
    pub restart: usize,
    pub best_epoch: usize,
    pub dev_accuracy: f64,
}

/// One row per trained model, in (hidden, batch, restart) order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub rows: Vec<GridRow>,
    /// Index into `rows` of the selected model.
    pub best: usize,
}

impl GridReport {
    /// Best row per (hidden, batch) cell, in grid order; the earliest restart
    /// wins ties.
    pub fn cells(&self) -> Vec<&GridRow> {
        let mut out: Vec<&GridRow> = Vec::new();
        for row in &self.rows {
            match out.last_mut() {
                Some(last) if last.hidden == row.hidden && last.batch == row.batch => {
                    if row.dev_accuracy > last.dev_accuracy {
                        *last = row;
                    }
                }
                _ => out.push(row),
            }
        }
        out
    }

    pub fn best_row(&self) -> &GridRow {
        &self.rows[self.best]
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "hidden,batch,restart,best_epoch,dev_accuracy")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{}", r.hidden, r.batch, r.restart, r.best_epoch, r.dev_accuracy)?;
        }
        Ok(())
    }
}

/// Trains `restarts` models for every (hidden, batch) pair and keeps the one
/// with the highest dev accuracy; ties keep the earliest in grid order.
pub fn grid_search(
    train_set: &[ClozeInstance],
    dev: &[ClozeInstance],
    table: &EmbeddingTable,
    grid: &GridSpec,
) -> Result<(TrainOutcome, GridReport), NeuralError> {
    grid.base.validate()?;
    if grid.hidden.is_empty() || grid.batch.is_empty() {
        return Err(NeuralError::Config("grid must list at least one hidden and one batch size".into()));
    }
    let mut rows = Vec::new();
    let mut best: Option<(TrainOutcome, usize)> = None;
    for &hidden in &grid.hidden {
        for &batch in &grid.batch {
            for restart in 0..grid.base.restarts {
                let config = TrainConfig {
                    hidden,
                    batch,
                    seed: restart_seed(grid.base.seed, restart),
                    ..grid.base.clone()
                };
                let outcome = train(train_set, dev, table, &config)?;
                rows.push(GridRow {
                    hidden,
                    batch,
                    restart,
                    best_epoch: outcome.best_epoch,
                    dev_accuracy: outcome.dev_accuracy,
                });
                if best.as_ref().is_none_or(|b| outcome.dev_accuracy > b.0.dev_accuracy) {
                    best = Some((outcome, rows.len() - 1));
                }
            }
        }
    }
    let (outcome, best) = best.expect("nonempty grid");
    Ok((outcome, GridReport { rows, best }))
}
