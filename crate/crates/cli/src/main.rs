use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cloze::annotate::{annotate_stories, AnnotationSource, Sidecar};
use cloze::corpus::{parse_cloze_csv, parse_roc_csv, save_cloze_csv, split_dev, ClozeInstance};
use cloze::datagen::{build_ending_index, consensus_filter, gen_random, gen_random_coherent, gen_shared_args, Predictor};
use cloze::embeddings::{EmbeddingFormat, EmbeddingTable};
use cloze::features::{extract_all, FeatureConfig, FeatureMatrix};
use cloze::harness::{
    accuracy, gold_labels, run_ablation, AnnotatedSet, LinearOptions, LinearPredictor, NeuralPredictor, SavedModel,
};
use cloze::linear::{train_with_cv, DEFAULT_C_GRID};
use cloze::neural::{grid_search, GridSpec, TrainConfig, Variant};

#[derive(Parser)]
#[command(name = "cloze", version, about = "Story ending selection baselines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize labeled instances from five-sentence stories.
    GenData(GenData),
    /// Write a feature CSV for a cloze CSV.
    Extract(Extract),
    /// Cross-validate C and fit the linear model on a feature CSV.
    TrainLinear(TrainLinear),
    /// Print the accuracy of a saved model on a labeled cloze CSV.
    Eval(Eval),
    /// Grid-search and train the LSTM classifier.
    TrainLstm(TrainLstm),
    /// Feature ablation over embedding tables; writes a report CSV.
    Ablate(Ablate),
    /// Keep the instances every given model labels correctly.
    Filter(Filter),
}

#[derive(Args)]
struct EmbeddingArgs {
    /// Embedding file.
    #[arg(long)]
    embeddings: PathBuf,
    /// w2v-bin or glove-txt; inferred from the extension when omitted.
    #[arg(long)]
    format: Option<EmbeddingFormat>,
}

impl EmbeddingArgs {
    fn load(&self) -> Result<EmbeddingTable> {
        load_table(&self.embeddings, self.format)
    }
}

fn load_table(path: &Path, format: Option<EmbeddingFormat>) -> Result<EmbeddingTable> {
    let format = format.unwrap_or_else(|| EmbeddingFormat::from_path(path));
    let table = EmbeddingTable::load(path, format).with_context(|| format!("loading {}", path.display()))?;
    log::info!("{}: {} vectors of dimension {}", path.display(), table.len(), table.dim());
    Ok(table)
}

/// `heuristic` or a sidecar path.
fn load_sidecar(spec: &str) -> Result<Option<Sidecar>> {
    if spec == "heuristic" {
        return Ok(None);
    }
    Ok(Some(Sidecar::load(spec).with_context(|| format!("loading annotations {spec}"))?))
}

fn source(sidecar: &Option<Sidecar>) -> AnnotationSource<'_> {
    sidecar.as_ref().map_or(AnnotationSource::Heuristic, AnnotationSource::FileBacked)
}

fn load_cloze(path: &Path) -> Result<Vec<ClozeInstance>> {
    parse_cloze_csv(path).with_context(|| format!("reading {}", path.display()))
}

fn load_annotated(path: &Path, annotations: &str) -> Result<AnnotatedSet> {
    let instances = load_cloze(path)?;
    let sidecar = load_sidecar(annotations)?;
    AnnotatedSet::new(instances, source(&sidecar)).with_context(|| format!("annotating {}", path.display()))
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Random,
    Shared,
    Coherent,
}

#[derive(Args)]
struct GenData {
    #[arg(long)]
    roc: PathBuf,
    #[arg(long, value_enum)]
    strategy: Strategy,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Candidate pool size for `coherent`.
    #[arg(long, default_value_t = 500)]
    pool: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Story sidecar (five sentences per story) or `heuristic`.
    #[arg(long, default_value = "heuristic")]
    annotations: String,
    #[arg(long)]
    out: PathBuf,
}

fn gen_data(a: GenData) -> Result<()> {
    let stories = parse_roc_csv(&a.roc).with_context(|| format!("reading {}", a.roc.display()))?;
    let instances = match a.strategy {
        Strategy::Random => gen_random(&stories, a.k, a.seed)?,
        Strategy::Shared | Strategy::Coherent => {
            let sidecar = load_sidecar(&a.annotations)?;
            let ann = annotate_stories(&stories, source(&sidecar))?;
            let index = build_ending_index(&stories, &ann)?;
            match a.strategy {
                Strategy::Shared => gen_shared_args(&stories, &index, a.k, a.seed)?,
                _ => gen_random_coherent(&stories, &index, a.pool, a.k, a.seed)?,
            }
        }
    };
    save_cloze_csv(&instances, &a.out)?;
    log::info!("wrote {} instances to {}", instances.len(), a.out.display());
    Ok(())
}

#[derive(Args)]
struct Extract {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    embeddings: EmbeddingArgs,
    #[arg(long, default_value = "all")]
    config: FeatureConfig,
    /// Instance sidecar (six sentences per instance) or `heuristic`.
    #[arg(long, default_value = "heuristic")]
    annotations: String,
    #[arg(long)]
    out: PathBuf,
}

fn extract(a: Extract) -> Result<()> {
    let table = a.embeddings.load()?;
    let data = load_annotated(&a.data, &a.annotations)?;
    let features = extract_all(&data.instances, &table, Some(&data.annotations), a.config)?;
    features.save(&a.out)?;
    log::info!("wrote {}x{} features to {}", features.len(), features.width(), a.out.display());
    Ok(())
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad C value {v:?}")))
        .collect()
}

#[derive(Args)]
struct TrainLinear {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value_t = 5)]
    cv_folds: usize,
    /// Comma-separated C values.
    #[arg(long)]
    c_grid: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Add the ending-swapped copy of every row before training.
    #[arg(long)]
    augment_swap: bool,
    #[arg(long)]
    model_out: PathBuf,
}

fn train_linear(a: TrainLinear) -> Result<()> {
    let mut features =
        FeatureMatrix::load(&a.features).with_context(|| format!("reading {}", a.features.display()))?;
    let (config, _) = FeatureConfig::infer(&features.names).context("feature columns match no known config")?;
    if a.augment_swap {
        features = features.augment_swap()?;
    }
    let grid = match &a.c_grid {
        Some(s) => parse_grid(s)?,
        None => DEFAULT_C_GRID.to_vec(),
    };
    let (model, report) = train_with_cv(&features, config, a.cv_folds, &grid, a.seed)?;
    for cell in &report.grid {
        log::info!("C={}: mean CV accuracy {:.4}", cell.c, cell.mean_accuracy);
    }
    model.save(&a.model_out)?;
    println!("config {config} best C {} ({} rows)", report.best_c, features.len());
    Ok(())
}

#[derive(Args)]
struct Eval {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    embeddings: EmbeddingArgs,
    /// Instance sidecar or `heuristic`; used by linear models.
    #[arg(long, default_value = "heuristic")]
    annotations: String,
}

fn eval(a: Eval) -> Result<()> {
    let table = a.embeddings.load()?;
    let model = SavedModel::load(&a.model)?;
    let data = load_annotated(&a.data, &a.annotations)?;
    let gold = gold_labels(&data.instances)?;
    let predictor = predictor_for(model, &table, &data);
    let predictions = data
        .instances
        .iter()
        .map(|x| predictor.predict(x))
        .collect::<cloze::Result<Vec<_>>>()?;
    let r = accuracy(&predictions, &gold)?;
    println!("accuracy {:.4} ({}/{})", r.accuracy, r.correct, r.n);
    Ok(())
}

fn predictor_for<'a>(model: SavedModel, table: &'a EmbeddingTable, data: &AnnotatedSet) -> Box<dyn Predictor + 'a> {
    match model {
        SavedModel::Linear(model) => {
            let annotations: HashMap<String, _> = data
                .instances
                .iter()
                .map(|x| x.id.clone())
                .zip(data.annotations.iter().cloned())
                .collect();
            Box::new(LinearPredictor {
                model,
                table,
                annotations: Some(annotations),
            })
        }
        SavedModel::Neural(model) => Box::new(NeuralPredictor { model, table }),
    }
}

fn parse_sizes(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|v| v.trim().parse::<usize>().with_context(|| format!("bad size {v:?}")))
        .collect()
}

#[derive(Args)]
struct TrainLstm {
    /// Labeled cloze CSV, split into train and dev parts.
    #[arg(long)]
    dev: PathBuf,
    #[command(flatten)]
    embeddings: EmbeddingArgs,
    #[arg(long, default_value = "raw")]
    variant: Variant,
    /// Hidden size, or a comma list to search.
    #[arg(long, default_value = "384")]
    hidden: String,
    /// Batch size, or a comma list to search.
    #[arg(long, default_value = "500")]
    batch: String,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of `--dev` used for training.
    #[arg(long, default_value_t = 0.9)]
    split_ratio: f64,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[arg(long)]
    model_out: Option<PathBuf>,
    /// Grid report CSV.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn train_lstm(a: TrainLstm) -> Result<()> {
    if !(a.split_ratio > 0.0 && a.split_ratio < 1.0) {
        bail!("--split-ratio must lie strictly between 0 and 1");
    }
    let table = a.embeddings.load()?;
    let instances = load_cloze(&a.dev)?;
    let split = split_dev(&instances, a.split_ratio, a.split_seed);
    let hidden = parse_sizes(&a.hidden)?;
    let batch = parse_sizes(&a.batch)?;
    let base = TrainConfig {
        variant: a.variant,
        hidden: hidden.first().copied().unwrap_or(0),
        batch: batch.first().copied().unwrap_or(0),
        epochs: a.epochs,
        lr: a.lr,
        seed: a.seed,
        restarts: a.restarts,
    };
    let grid = GridSpec { hidden, batch, base };
    let (best, report) = grid_search(&split.dev_train, &split.dev_dev, &table, &grid)?;
    if let Some(path) = &a.report {
        report.write_csv(output(&Some(path.clone()))?)?;
    }
    if let Some(path) = &a.model_out {
        best.model.save(path)?;
    }
    let row = report.best_row();
    println!(
        "best hidden {} batch {} restart {} epoch {}: dev accuracy {:.4}",
        row.hidden, row.batch, row.restart, row.best_epoch, row.dev_accuracy
    );
    Ok(())
}

/// `NAME=FORMAT:PATH` or `NAME=PATH`.
fn parse_table_spec(spec: &str) -> Result<(String, Option<EmbeddingFormat>, PathBuf)> {
    let (name, rest) = spec
        .split_once('=')
        .with_context(|| format!("embedding spec {spec:?} is not NAME=[FORMAT:]PATH"))?;
    let (format, path) = match rest.split_once(':') {
        Some((f, p)) if f.parse::<EmbeddingFormat>().is_ok() => (Some(f.parse()?), p),
        _ => (None, rest),
    };
    Ok((name.to_string(), format, PathBuf::from(path)))
}

#[derive(Args)]
struct Ablate {
    #[arg(long)]
    dev: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Comma list of NAME=FORMAT:PATH.
    #[arg(long)]
    embeddings: String,
    /// Comma list of configs; all seven when omitted.
    #[arg(long)]
    configs: Option<String>,
    #[arg(long, default_value = "heuristic")]
    dev_annotations: String,
    #[arg(long, default_value = "heuristic")]
    test_annotations: String,
    #[arg(long, default_value_t = 5)]
    cv_folds: usize,
    #[arg(long)]
    c_grid: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn ablate(a: Ablate) -> Result<()> {
    let dev = load_annotated(&a.dev, &a.dev_annotations)?;
    let test = load_annotated(&a.test, &a.test_annotations)?;
    let configs: Vec<FeatureConfig> = match &a.configs {
        Some(s) => s.split(',').map(|c| c.trim().parse()).collect::<Result<_, _>>()?,
        None => FeatureConfig::ALL.to_vec(),
    };
    let mut tables = Vec::new();
    for spec in a.embeddings.split(',') {
        let (name, format, path) = parse_table_spec(spec.trim())?;
        tables.push((name, load_table(&path, format)?));
    }
    let refs: Vec<(&str, &EmbeddingTable)> = tables.iter().map(|(n, t)| (n.as_str(), t)).collect();
    let options = LinearOptions {
        folds: a.cv_folds,
        c_grid: match &a.c_grid {
            Some(s) => parse_grid(s)?,
            None => DEFAULT_C_GRID.to_vec(),
        },
        seed: a.seed,
    };
    let report = run_ablation(&dev, &test, &refs, &configs, &options)?;
    let mut out = output(&a.out)?;
    report.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

#[derive(Args)]
struct Filter {
    #[arg(long)]
    data: PathBuf,
    /// Comma list of saved model files (linear or LSTM).
    #[arg(long)]
    models: String,
    #[command(flatten)]
    embeddings: EmbeddingArgs,
    #[arg(long, default_value = "heuristic")]
    annotations: String,
    #[arg(long)]
    out: PathBuf,
}

fn filter(a: Filter) -> Result<()> {
    let table = a.embeddings.load()?;
    let data = load_annotated(&a.data, &a.annotations)?;
    let predictors: Vec<Box<dyn Predictor + '_>> = a
        .models
        .split(',')
        .map(|p| {
            let model = SavedModel::load(p.trim()).with_context(|| format!("loading model {}", p.trim()))?;
            Ok(predictor_for(model, &table, &data))
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&dyn Predictor> = predictors.iter().map(|p| p.as_ref()).collect();
    let kept = consensus_filter(&data.instances, &refs)?;
    save_cloze_csv(&kept, &a.out)?;
    println!("kept {} of {} instances", kept.len(), data.len());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Extract(a) => extract(a),
        Command::TrainLinear(a) => train_linear(a),
        Command::Eval(a) => eval(a),
        Command::TrainLstm(a) => train_lstm(a),
        Command::Ablate(a) => ablate(a),
        Command::Filter(a) => filter(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
