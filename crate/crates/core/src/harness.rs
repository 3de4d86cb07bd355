//! Evaluation and the experiment runners built on the other modules.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::annotate::{annotate_instances, AnnotationSource, InstanceAnnotations};
use crate::corpus::{ClozeInstance, Label};
use crate::datagen::Predictor;
use crate::embeddings::EmbeddingTable;
use crate::features::{extract, extract_all, FeatureConfig};
use crate::linear::{self, cv_tune_c, CvReport, LinearModel, DEFAULT_C_GRID};
use crate::neural::{self, grid_search, GridSpec, NeuralModel, TrainConfig, Variant};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{predictions} predictions for {gold} gold labels")]
    LengthMismatch { predictions: usize, gold: usize },
    #[error("cannot evaluate an empty set")]
    Empty,
    #[error("instance {0:?} is unlabeled")]
    Unlabeled(String),
    #[error("{instances} instances but {annotations} annotations")]
    AnnotationCount { instances: usize, annotations: usize },
    #[error("no embedding tables to evaluate")]
    NoTables,
    #[error("embedding name {0:?} appears twice")]
    DuplicateName(String),
    #[error("report line {line}: {reason}")]
    Report { line: usize, reason: String },
    #[error("{path}: not a linear or LSTM model file")]
    UnknownModel { path: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Accuracy of a prediction list against gold labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub accuracy: f64,
    pub correct: usize,
    pub n: usize,
    pub predictions: Vec<Label>,
}

pub fn accuracy(predictions: &[Label], gold: &[Label]) -> Result<EvalResult, HarnessError> {
    if predictions.len() != gold.len() {
        return Err(HarnessError::LengthMismatch {
            predictions: predictions.len(),
            gold: gold.len(),
        });
    }
    if gold.is_empty() {
        return Err(HarnessError::Empty);
    }
    let correct = predictions.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(EvalResult {
        accuracy: correct as f64 / gold.len() as f64,
        correct,
        n: gold.len(),
        predictions: predictions.to_vec(),
    })
}

pub fn gold_labels(instances: &[ClozeInstance]) -> Result<Vec<Label>, HarnessError> {
    instances
        .iter()
        .map(|x| x.gold.ok_or_else(|| HarnessError::Unlabeled(x.id.clone())))
        .collect()
}

/// The more frequent gold label; ties go to ending 1.
pub fn majority_label(instances: &[ClozeInstance]) -> Result<Label, HarnessError> {
    let gold = gold_labels(instances)?;
    if gold.is_empty() {
        return Err(HarnessError::Empty);
    }
    let twos = gold.iter().filter(|&&g| g == Label::Ending2).count();
    Ok(if 2 * twos > gold.len() {
        Label::Ending2
    } else {
        Label::Ending1
    })
}

/// Predicts `label` for every instance of `test`.
pub fn constant_baseline(label: Label, test: &[ClozeInstance]) -> Result<EvalResult, HarnessError> {
    let gold = gold_labels(test)?;
    accuracy(&vec![label; gold.len()], &gold)
}

/// Instances with their token annotations, index-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedSet {
    pub instances: Vec<ClozeInstance>,
    pub annotations: Vec<InstanceAnnotations>,
}

impl AnnotatedSet {
    pub fn new(instances: Vec<ClozeInstance>, source: AnnotationSource<'_>) -> crate::Result<Self> {
        let annotations = annotate_instances(&instances, source)?;
        Ok(AnnotatedSet { instances, annotations })
    }

    pub fn from_parts(
        instances: Vec<ClozeInstance>,
        annotations: Vec<InstanceAnnotations>,
    ) -> Result<Self, HarnessError> {
        if instances.len() != annotations.len() {
            return Err(HarnessError::AnnotationCount {
                instances: instances.len(),
                annotations: annotations.len(),
            });
        }
        Ok(AnnotatedSet { instances, annotations })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Each instance followed by its ending-swapped copy.
    pub fn augment_swap(&self) -> crate::Result<AnnotatedSet> {
        let instances = crate::corpus::augment_swap(&self.instances)?;
        let annotations = self
            .annotations
            .iter()
            .flat_map(|a| [a.clone(), a.swapped()])
            .collect();
        Ok(AnnotatedSet { instances, annotations })
    }
}

/// Cross-validation settings for the linear classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOptions {
    pub folds: usize,
    pub c_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for LinearOptions {
    fn default() -> Self {
        LinearOptions {
            folds: 5,
            c_grid: DEFAULT_C_GRID.to_vec(),
            seed: 0,
        }
    }
}

/// Outcome of one (embedding, config) cell.
#[derive(Debug, Clone)]
pub struct LinearRun {
    pub model: LinearModel,
    pub cv: CvReport,
    pub test: EvalResult,
}

/// Swap-augments `dev`, tunes C by cross-validation, retrains on all of it
/// and evaluates on `test`.
pub fn run_linear(
    dev: &AnnotatedSet,
    test: &AnnotatedSet,
    table: &EmbeddingTable,
    config: FeatureConfig,
    options: &LinearOptions,
) -> crate::Result<LinearRun> {
    let train = dev.augment_swap()?;
    let features = extract_all(&train.instances, table, Some(&train.annotations), config)?;
    let labels = gold_labels(&train.instances)?;
    let cv = cv_tune_c(&features.rows, &labels, options.folds, &options.c_grid, options.seed)?;
    let model = LinearModel::train(&features, config, cv.best_c)?;
    let test = evaluate_linear(&model, test, table)?;
    Ok(LinearRun { model, cv, test })
}

pub fn evaluate_linear(model: &LinearModel, data: &AnnotatedSet, table: &EmbeddingTable) -> crate::Result<EvalResult> {
    let gold = gold_labels(&data.instances)?;
    let features = extract_all(&data.instances, table, Some(&data.annotations), model.config)?;
    let predictions = features
        .rows
        .iter()
        .map(|row| Ok(model.predict_row(row)?.0))
        .collect::<crate::Result<Vec<Label>>>()?;
    Ok(accuracy(&predictions, &gold)?)
}

/// Test accuracy per embedding table (rows) and feature configuration
/// (columns, always the seven configurations in canonical order). Cells that
/// were not run are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub embedding: String,
    pub accuracies: [Option<f64>; 7],
}

impl AblationRow {
    pub fn get(&self, config: FeatureConfig) -> Option<f64> {
        self.accuracies[config_index(config)]
    }
}

fn config_index(config: FeatureConfig) -> usize {
    FeatureConfig::ALL
        .iter()
        .position(|&c| c == config)
        .expect("ALL lists every config")
}

impl AblationReport {
    pub fn get(&self, embedding: &str, config: FeatureConfig) -> Option<f64> {
        self.rows.iter().find(|r| r.embedding == embedding)?.get(config)
    }

    /// Header `embedding` followed by the seven column titles; accuracies
    /// are fractions, unset cells are empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["embedding".to_string()];
        header.extend(FeatureConfig::ALL.iter().map(|c| c.title().to_string()));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut record = vec![row.embedding.clone()];
            record.extend(row.accuracies.iter().map(|a| a.map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, HarnessError> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
        let mut records = r.records();
        let header = records.next().ok_or(HarnessError::Report {
            line: 1,
            reason: "missing header".into(),
        })??;
        let columns: Vec<usize> = header
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, title)| {
                FeatureConfig::from_title(title)
                    .map(config_index)
                    .ok_or_else(|| HarnessError::Report {
                        line: 1,
                        reason: format!("column {i}: unknown configuration {title:?}"),
                    })
            })
            .collect::<Result<_, _>>()?;
        if header.get(0) != Some("embedding") {
            return Err(HarnessError::Report {
                line: 1,
                reason: "first column must be `embedding`".into(),
            });
        }
        let mut rows = Vec::new();
        for (i, record) in records.enumerate() {
            let record = record?;
            let line = i + 2;
            if record.len() != columns.len() + 1 {
                return Err(HarnessError::Report {
                    line,
                    reason: format!("{} fields, expected {}", record.len(), columns.len() + 1),
                });
            }
            let mut accuracies = [None; 7];
            for (field, &col) in record.iter().skip(1).zip(&columns) {
                if field.is_empty() {
                    continue;
                }
                let v: f64 = field.parse().map_err(|_| HarnessError::Report {
                    line,
                    reason: format!("bad accuracy {field:?}"),
                })?;
                accuracies[col] = Some(v);
            }
            rows.push(AblationRow {
                embedding: record[0].to_string(),
                accuracies,
            });
        }
        Ok(AblationReport { rows })
    }
}

/// Runs [`run_linear`] for every (table, config) pair. Cells run in parallel;
/// the report keeps `tables` order.
pub fn run_ablation(
    dev: &AnnotatedSet,
    test: &AnnotatedSet,
    tables: &[(&str, &EmbeddingTable)],
    configs: &[FeatureConfig],
    options: &LinearOptions,
) -> crate::Result<AblationReport> {
    if tables.is_empty() {
        return Err(HarnessError::NoTables.into());
    }
    for (i, (name, _)) in tables.iter().enumerate() {
        if tables[..i].iter().any(|(n, _)| n == name) {
            return Err(HarnessError::DuplicateName(name.to_string()).into());
        }
    }
    let cells: Vec<(usize, FeatureConfig)> = (0..tables.len())
        .flat_map(|t| configs.iter().map(move |&c| (t, c)))
        .collect();
    let results = cells
        .par_iter()
        .map(|&(t, config)| {
            let run = run_linear(dev, test, tables[t].1, config, options)?;
            log::info!(
                "{} / {}: C={} test accuracy {:.4}",
                tables[t].0,
                config.name(),
                run.cv.best_c,
                run.test.accuracy
            );
            Ok(run.test.accuracy)
        })
        .collect::<crate::Result<Vec<f64>>>()?;
    let mut rows: Vec<AblationRow> = tables
        .iter()
        .map(|(name, _)| AblationRow {
            embedding: name.to_string(),
            accuracies: [None; 7],
        })
        .collect();
    for (&(t, config), acc) in cells.iter().zip(results) {
        rows[t].accuracies[config_index(config)] = Some(acc);
    }
    Ok(AblationReport { rows })
}

/// One variant's best epoch and accuracies.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralRow {
    pub variant: Variant,
    pub epoch: usize,
    pub dev_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralReport {
    pub rows: Vec<NeuralRow>,
}

impl NeuralReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "variant,epoch,dev_accuracy,test_accuracy")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.variant, r.epoch, r.dev_accuracy, r.test_accuracy)?;
        }
        Ok(())
    }
}

/// Trains each variant on `dev_train` with `base` settings (restarts
/// included), picks the best epoch on `dev_dev` and scores it on `test`.
pub fn run_neural_comparison(
    dev_train: &[ClozeInstance],
    dev_dev: &[ClozeInstance],
    test: &[ClozeInstance],
    table: &EmbeddingTable,
    variants: &[Variant],
    base: &TrainConfig,
) -> crate::Result<NeuralReport> {
    let mut rows = Vec::with_capacity(variants.len());
    for &variant in variants {
        let grid = GridSpec::single(TrainConfig {
            variant,
            ..base.clone()
        });
        let (outcome, _) = grid_search(dev_train, dev_dev, table, &grid)?;
        let test_accuracy = neural::accuracy(&outcome.model, table, test)?;
        rows.push(NeuralRow {
            variant,
            epoch: outcome.best_epoch,
            dev_accuracy: outcome.dev_accuracy,
            test_accuracy,
        });
    }
    Ok(NeuralReport { rows })
}

/// Linear model as a [`Predictor`]. Annotations are looked up by instance id
/// when supplied, otherwise produced by the heuristic tagger.
pub struct LinearPredictor<'a> {
    pub model: LinearModel,
    pub table: &'a EmbeddingTable,
    pub annotations: Option<HashMap<String, InstanceAnnotations>>,
}

impl Predictor for LinearPredictor<'_> {
    fn predict(&self, instance: &ClozeInstance) -> crate::Result<Label> {
        let owned;
        let ann = match &self.annotations {
            Some(map) => map.get(&instance.id),
            None if self.model.config.flags().pos_sim => {
                owned = annotate_instances(std::slice::from_ref(instance), AnnotationSource::Heuristic)?;
                owned.first()
            }
            None => None,
        };
        let v = extract(instance, self.table, ann, self.model.config)?;
        Ok(linear::predict(&self.model, &v)?.0)
    }
}

/// LSTM model as a [`Predictor`].
pub struct NeuralPredictor<'a> {
    pub model: NeuralModel,
    pub table: &'a EmbeddingTable,
}

impl Predictor for NeuralPredictor<'_> {
    fn predict(&self, instance: &ClozeInstance) -> crate::Result<Label> {
        Ok(neural::predict(&self.model, self.table, instance)?.0)
    }
}

/// A model file of either family, told apart by its first line.
#[derive(Debug, Clone)]
pub enum SavedModel {
    Linear(LinearModel),
    Neural(NeuralModel),
}

impl SavedModel {
    pub fn load(path: impl AsRef<Path>) -> crate::Result<SavedModel> {
        let path = path.as_ref();
        let mut first = String::new();
        BufReader::new(File::open(path).map_err(HarnessError::Io)?)
            .read_line(&mut first)
            .map_err(HarnessError::Io)?;
        match first.trim_end() {
            l if l.starts_with("cloze-linear") => Ok(SavedModel::Linear(LinearModel::load(path)?)),
            l if l.starts_with("cloze-lstm") => Ok(SavedModel::Neural(NeuralModel::load(path)?)),
            _ => Err(HarnessError::UnknownModel {
                path: path.display().to_string(),
            }
            .into()),
        }
    }

    pub fn into_predictor(self, table: &EmbeddingTable) -> Box<dyn Predictor + '_> {
        match self {
            SavedModel::Linear(model) => Box::new(LinearPredictor {
                model,
                table,
                annotations: None,
            }),
            SavedModel::Neural(model) => Box::new(NeuralPredictor { model, table }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_counts() {
        use Label::*;
        let r = accuracy(&[Ending1, Ending2, Ending2, Ending1], &[Ending1, Ending2, Ending1, Ending1]).unwrap();
        assert_eq!(r.accuracy, 0.75);
        assert_eq!(r.correct, 3);
        assert!(matches!(accuracy(&[], &[]), Err(HarnessError::Empty)));
        assert!(matches!(
            accuracy(&[Ending1], &[Ending1, Ending2]),
            Err(HarnessError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn report_round_trip() {
        let report = AblationReport {
            rows: vec![
                AblationRow {
                    embedding: "w2v, news".into(),
                    accuracies: [Some(0.7242), None, Some(0.5), None, None, Some(0.1), Some(1.0)],
                },
                AblationRow {
                    embedding: "glove".into(),
                    accuracies: [Some(0.6489); 7],
                },
            ],
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert_eq!(AblationReport::read_csv(buf.as_slice()).unwrap(), report);
        assert_eq!(report.get("glove", FeatureConfig::SimsOnly), Some(0.6489));
    }
}
