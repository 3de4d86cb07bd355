//! Embedding representation and similarity features for the linear model.
//!
//! Layout of a full vector, in order:
//!
//! | block             | size    | names                          |
//! |-------------------|---------|--------------------------------|
//! | story centroid    | dim     | `story.centroid.{i}`           |
//! | ending centroids  | 2·dim   | `e{k}.centroid.{i}`            |
//! | per ending `k`:   |         |                                |
//! | plain similarity  | 1       | `e{k}.sim`                     |
//! | top-N max sim     | 4       | `e{k}.maxsim.top{1,2,3,5}`     |
//! | aligned sim       | 1       | `e{k}.aligned`                 |
//! | POS-pair sims     | 25      | `e{k}.pos.{STORY}.{ENDING}`    |
//!
//! Blocks are switched on and off by [`FeatureConfig`].

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::annotate::{tokenize, AnnotatedToken, CoarseClass, InstanceAnnotations};
use crate::corpus::{ClozeInstance, Label};
use crate::embeddings::{centroid, cosine_same_len, EmbeddingTable};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("feature config {0} needs part-of-speech annotations")]
    MissingAnnotations(FeatureConfig),
    #[error("got {annotations} annotations for {instances} instances")]
    AnnotationCount { instances: usize, annotations: usize },
    #[error("unknown feature config {0:?}")]
    UnknownConfig(String),
    #[error("cannot fit a scaler on an empty training set")]
    EmptyTraining,
    #[error("feature vector has {found} values, layout has {expected}")]
    Width { expected: usize, found: usize },
    #[error("feature names do not match any known config layout")]
    UnknownLayout,
    #[error("feature file row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Top-N cut-offs of the maximized similarity block.
pub const MAX_SIM_TOP_N: [usize; 4] = [1, 2, 3, 5];

/// Number of POS-pair similarities per ending.
pub const POS_PAIRS: usize = 25;

/// One column of the feature ablation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureConfig {
    All,
    AllWoPosSim,
    AllWoMaxSim,
    AllWoSim,
    ReprPlusSim,
    EndingsOnly,
    SimsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureFlags {
    pub repr_story: bool,
    pub repr_endings: bool,
    pub plain_sim: bool,
    pub max_sim: bool,
    pub aligned_sim: bool,
    pub pos_sim: bool,
}

impl FeatureConfig {
    pub const ALL: [FeatureConfig; 7] = [
        FeatureConfig::All,
        FeatureConfig::AllWoPosSim,
        FeatureConfig::AllWoMaxSim,
        FeatureConfig::AllWoSim,
        FeatureConfig::ReprPlusSim,
        FeatureConfig::EndingsOnly,
        FeatureConfig::SimsOnly,
    ];

    pub fn flags(self) -> FeatureFlags {
        let all = FeatureFlags {
            repr_story: true,
            repr_endings: true,
            plain_sim: true,
            max_sim: true,
            aligned_sim: true,
            pos_sim: true,
        };
        let none = FeatureFlags {
            repr_story: false,
            repr_endings: false,
            plain_sim: false,
            max_sim: false,
            aligned_sim: false,
            pos_sim: false,
        };
        match self {
            FeatureConfig::All => all,
            FeatureConfig::AllWoPosSim => FeatureFlags { pos_sim: false, ..all },
            FeatureConfig::AllWoMaxSim => FeatureFlags {
                max_sim: false,
                aligned_sim: false,
                ..all
            },
            FeatureConfig::AllWoSim => FeatureFlags { plain_sim: false, ..all },
            FeatureConfig::ReprPlusSim => FeatureFlags {
                repr_story: true,
                repr_endings: true,
                plain_sim: true,
                ..none
            },
            FeatureConfig::EndingsOnly => FeatureFlags {
                repr_endings: true,
                ..none
            },
            FeatureConfig::SimsOnly => FeatureFlags {
                repr_story: false,
                repr_endings: false,
                ..all
            },
        }
    }

    /// Short command-line name.
    pub fn name(self) -> &'static str {
        match self {
            FeatureConfig::All => "all",
            FeatureConfig::AllWoPosSim => "all-wo-pos-sim",
            FeatureConfig::AllWoMaxSim => "all-wo-max-sim",
            FeatureConfig::AllWoSim => "all-wo-sim",
            FeatureConfig::ReprPlusSim => "repr-plus-sim",
            FeatureConfig::EndingsOnly => "endings-only",
            FeatureConfig::SimsOnly => "sims-only",
        }
    }

    /// Column heading used in ablation reports.
    pub fn title(self) -> &'static str {
        match self {
            FeatureConfig::All => "All",
            FeatureConfig::AllWoPosSim => "All wo POS sim",
            FeatureConfig::AllWoMaxSim => "All wo MaxSim",
            FeatureConfig::AllWoSim => "All wo Sim",
            FeatureConfig::ReprPlusSim => "WE S, E1, E2+Sim",
            FeatureConfig::EndingsOnly => "WE E1, E2",
            FeatureConfig::SimsOnly => "Sims only",
        }
    }

    pub fn from_title(title: &str) -> Option<FeatureConfig> {
        Self::ALL.into_iter().find(|c| c.title() == title)
    }

    /// Feature names for embeddings of dimension `dim`.
    pub fn feature_names(self, dim: usize) -> Vec<String> {
        let f = self.flags();
        let mut names = Vec::new();
        if f.repr_story {
            names.extend((0..dim).map(|i| format!("story.centroid.{i}")));
        }
        if f.repr_endings {
            for e in 1..=2 {
                names.extend((0..dim).map(|i| format!("e{e}.centroid.{i}")));
            }
        }
        for e in 1..=2 {
            if f.plain_sim {
                names.push(format!("e{e}.sim"));
            }
            if f.max_sim {
                names.extend(MAX_SIM_TOP_N.iter().map(|n| format!("e{e}.maxsim.top{n}")));
            }
            if f.aligned_sim {
                names.push(format!("e{e}.aligned"));
            }
            if f.pos_sim {
                for s in CoarseClass::CONTENT {
                    for t in CoarseClass::CONTENT {
                        names.push(format!("e{e}.pos.{}.{}", s.name(), t.name()));
                    }
                }
            }
        }
        names
    }

    /// Recovers the config (and embedding dimension) that produced `names`.
    pub fn infer(names: &[String]) -> Option<(FeatureConfig, usize)> {
        let dim = names
            .iter()
            .filter(|n| n.starts_with("e1.centroid.") || n.starts_with("story.centroid."))
            .map(|n| n.rsplit('.').next().and_then(|i| i.parse::<usize>().ok()).map_or(0, |i| i + 1))
            .max()
            .unwrap_or(0);
        Self::ALL
            .into_iter()
            .filter(|c| dim > 0 || !(c.flags().repr_story || c.flags().repr_endings))
            .find(|c| c.feature_names(dim) == names)
            .map(|c| (c, dim))
    }
}

impl fmt::Display for FeatureConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureConfig {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s || c.title() == s)
            .ok_or_else(|| FeatureError::UnknownConfig(s.to_string()))
    }
}

/// Named feature values for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub names: Arc<[String]>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }
}

/// Cosine of the story centroid (all four sentences) with the ending centroid.
pub fn sim_story_ending<S: AsRef<str>>(story: &[S], ending: &[S], table: &EmbeddingTable) -> f64 {
    cosine_same_len(&centroid(table, story), &centroid(table, ending))
}

/// Mean of the `n` highest cosines between a story word and the ending
/// centroid; fewer if fewer story words are in vocabulary.
pub fn max_sim_topn<S: AsRef<str>>(story: &[S], ending: &[S], table: &EmbeddingTable, n: usize) -> f64 {
    let ending_centroid = centroid(table, ending);
    let scores = sorted_word_scores(story, &ending_centroid, table);
    top_mean(&scores, n)
}

fn sorted_word_scores<S: AsRef<str>>(story: &[S], ending_centroid: &[f64], table: &EmbeddingTable) -> Vec<f64> {
    let mut scores: Vec<f64> = story
        .iter()
        .filter_map(|t| table.lookup(t.as_ref()))
        .map(|v| cosine_same_len(v, ending_centroid))
        .collect();
    scores.sort_by(|a, b| b.total_cmp(a));
    scores
}

fn top_mean(sorted_desc: &[f64], n: usize) -> f64 {
    let take = n.min(sorted_desc.len());
    if take == 0 {
        return 0.0;
    }
    sorted_desc[..take].iter().sum::<f64>() / take as f64
}

/// For every in-vocabulary story word, the best cosine with any ending word,
/// averaged over story words.
pub fn aligned_sim<S: AsRef<str>>(story: &[S], ending: &[S], table: &EmbeddingTable) -> f64 {
    let ending_vecs: Vec<&[f64]> = ending.iter().filter_map(|t| table.lookup(t.as_ref())).collect();
    if ending_vecs.is_empty() {
        return 0.0;
    }
    let (mut sum, mut count) = (0.0, 0usize);
    for v in story.iter().filter_map(|t| table.lookup(t.as_ref())) {
        let best = ending_vecs
            .iter()
            .map(|e| cosine_same_len(v, e))
            .fold(f64::NEG_INFINITY, f64::max);
        sum += best;
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

fn class_centroid<'a, I>(tokens: I, class: CoarseClass, table: &EmbeddingTable) -> Vec<f64>
where
    I: IntoIterator<Item = &'a AnnotatedToken>,
{
    let members: Vec<&str> = tokens
        .into_iter()
        .filter(|t| t.coarse() == class)
        .map(|t| t.surface.as_str())
        .collect();
    centroid(table, &members).into_inner()
}

/// Cosines between story and ending class centroids for every ordered pair of
/// content classes, story class major.
pub fn pos_sims<'a, I, J>(story: I, ending: J, table: &EmbeddingTable) -> [f64; POS_PAIRS]
where
    I: IntoIterator<Item = &'a AnnotatedToken> + Clone,
    J: IntoIterator<Item = &'a AnnotatedToken> + Clone,
{
    let story_c: Vec<Vec<f64>> = CoarseClass::CONTENT
        .iter()
        .map(|&c| class_centroid(story.clone(), c, table))
        .collect();
    let ending_c: Vec<Vec<f64>> = CoarseClass::CONTENT
        .iter()
        .map(|&c| class_centroid(ending.clone(), c, table))
        .collect();
    let mut out = [0.0; POS_PAIRS];
    for (i, s) in story_c.iter().enumerate() {
        for (j, e) in ending_c.iter().enumerate() {
            out[i * 5 + j] = cosine_same_len(s, e);
        }
    }
    out
}

struct Tokens<'a> {
    story: Vec<&'a str>,
    endings: [Vec<&'a str>; 2],
}

/// Extracts the features of `config` for one instance.
///
/// Tokens come from `annotations` when given, otherwise from [`tokenize`].
pub fn extract(
    instance: &ClozeInstance,
    table: &EmbeddingTable,
    annotations: Option<&InstanceAnnotations>,
    config: FeatureConfig,
) -> Result<FeatureVector, FeatureError> {
    let names: Arc<[String]> = config.feature_names(table.dim()).into();
    extract_with_names(instance, table, annotations, config, names)
}

fn extract_with_names(
    instance: &ClozeInstance,
    table: &EmbeddingTable,
    annotations: Option<&InstanceAnnotations>,
    config: FeatureConfig,
    names: Arc<[String]>,
) -> Result<FeatureVector, FeatureError> {
    let flags = config.flags();
    if flags.pos_sim && annotations.is_none() {
        return Err(FeatureError::MissingAnnotations(config));
    }
    let owned;
    let tokens = match annotations {
        Some(a) => Tokens {
            story: a.story().map(|t| t.surface.as_str()).collect(),
            endings: [0, 1].map(|k| a.endings[k].iter().map(|t| t.surface.as_str()).collect()),
        },
        None => {
            owned = (
                instance.context.iter().flat_map(|s| tokenize(s)).collect::<Vec<_>>(),
                tokenize(&instance.ending1),
                tokenize(&instance.ending2),
            );
            Tokens {
                story: owned.0.iter().map(String::as_str).collect(),
                endings: [
                    owned.1.iter().map(String::as_str).collect(),
                    owned.2.iter().map(String::as_str).collect(),
                ],
            }
        }
    };

    let mut values = Vec::with_capacity(names.len());
    let story_centroid = centroid(table, &tokens.story);
    let ending_centroids = [0, 1].map(|k| centroid(table, &tokens.endings[k]));
    if flags.repr_story {
        values.extend_from_slice(&story_centroid);
    }
    if flags.repr_endings {
        for c in &ending_centroids {
            values.extend_from_slice(c);
        }
    }
    for k in 0..2 {
        if flags.plain_sim {
            values.push(cosine_same_len(&story_centroid, &ending_centroids[k]));
        }
        if flags.max_sim {
            let scores = sorted_word_scores(&tokens.story, &ending_centroids[k], table);
            values.extend(MAX_SIM_TOP_N.iter().map(|&n| top_mean(&scores, n)));
        }
        if flags.aligned_sim {
            values.push(aligned_sim(&tokens.story, &tokens.endings[k], table));
        }
        if let (true, Some(a)) = (flags.pos_sim, annotations) {
            values.extend_from_slice(&pos_sims(a.story(), &a.endings[k], table));
        }
    }
    debug_assert_eq!(values.len(), names.len());
    Ok(FeatureVector { names, values })
}

/// Feature rows for a data set plus their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Arc<[String]>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Option<Label>>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    /// Each row followed by its ending-swapped counterpart: `e1.*` and `e2.*`
    /// columns exchanged and the label flipped. Equals extracting features
    /// from swapped instances.
    pub fn augment_swap(&self) -> Result<FeatureMatrix, FeatureError> {
        let position: std::collections::HashMap<&str, usize> =
            self.names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let source: Vec<usize> = self
            .names
            .iter()
            .map(|n| {
                let partner = if let Some(rest) = n.strip_prefix("e1.") {
                    format!("e2.{rest}")
                } else if let Some(rest) = n.strip_prefix("e2.") {
                    format!("e1.{rest}")
                } else {
                    n.clone()
                };
                position.get(partner.as_str()).copied().ok_or(FeatureError::UnknownLayout)
            })
            .collect::<Result<_, _>>()?;
        let mut rows = Vec::with_capacity(2 * self.rows.len());
        let mut labels = Vec::with_capacity(2 * self.rows.len());
        for (i, (row, label)) in self.rows.iter().zip(&self.labels).enumerate() {
            let label = label.ok_or_else(|| FeatureError::Row {
                row: i + 1,
                reason: "swap augmentation needs labeled rows".into(),
            })?;
            rows.push(row.clone());
            rows.push(source.iter().map(|&j| row[j]).collect());
            labels.push(Some(label));
            labels.push(Some(label.flip()));
        }
        Ok(FeatureMatrix {
            names: self.names.clone(),
            rows,
            labels,
        })
    }

    /// Writes a header of feature names plus `label`, then one row per
    /// instance with the 1/2 label last (empty when unlabeled).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), FeatureError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.names.iter().map(String::as_str).collect();
        header.push("label");
        w.write_record(&header)?;
        let mut fields = Vec::with_capacity(self.width() + 1);
        for (row, label) in self.rows.iter().zip(&self.labels) {
            fields.clear();
            fields.extend(row.iter().map(|x| x.to_string()));
            fields.push(label.map_or(String::new(), |l| l.indicator().to_string()));
            w.write_record(&fields)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), FeatureError> {
        self.write_csv(File::create(path)?)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, FeatureError> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.iter().next_back() != Some("label") {
            return Err(FeatureError::Row {
                row: 0,
                reason: "last header column must be \"label\"".to_string(),
            });
        }
        let width = header.len() - 1;
        let names: Arc<[String]> = header.iter().take(width).map(str::to_string).collect();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let row = i + 1;
            if record.len() != width + 1 {
                return Err(FeatureError::Row {
                    row,
                    reason: format!("expected {} columns, found {}", width + 1, record.len()),
                });
            }
            let values = record
                .iter()
                .take(width)
                .map(|v| {
                    v.parse::<f64>().map_err(|_| FeatureError::Row {
                        row,
                        reason: format!("bad value {v:?}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let label = match &record[width] {
                "" => None,
                v => Some(
                    v.parse::<u8>()
                        .ok()
                        .and_then(Label::from_indicator)
                        .ok_or_else(|| FeatureError::Row {
                            row,
                            reason: format!("label must be 1 or 2, found {v:?}"),
                        })?,
                ),
            };
            rows.push(values);
            labels.push(label);
        }
        Ok(FeatureMatrix { names, rows, labels })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FeatureError> {
        Self::read_csv(File::open(path)?)
    }
}

/// Extracts every instance in parallel; row order follows `instances`.
pub fn extract_all(
    instances: &[ClozeInstance],
    table: &EmbeddingTable,
    annotations: Option<&[InstanceAnnotations]>,
    config: FeatureConfig,
) -> Result<FeatureMatrix, FeatureError> {
    if let Some(a) = annotations {
        if a.len() != instances.len() {
            return Err(FeatureError::AnnotationCount {
                instances: instances.len(),
                annotations: a.len(),
            });
        }
    }
    let names: Arc<[String]> = config.feature_names(table.dim()).into();
    let rows = instances
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            extract_with_names(x, table, annotations.map(|a| &a[i]), config, names.clone())
                .map(|v| v.values)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FeatureMatrix {
        names,
        rows,
        labels: instances.iter().map(|x| x.gold).collect(),
    })
}

/// Per-feature min-max bounds learned from training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Scaler, FeatureError> {
        let first = rows.first().ok_or(FeatureError::EmptyTraining)?;
        let mut min = first.clone();
        let mut max = first.clone();
        for row in &rows[1..] {
            if row.len() != min.len() {
                return Err(FeatureError::Width {
                    expected: min.len(),
                    found: row.len(),
                });
            }
            for (j, &x) in row.iter().enumerate() {
                min[j] = min[j].min(x);
                max[j] = max[j].max(x);
            }
        }
        Ok(Scaler { min, max })
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    /// `(x − min)/(max − min)` clamped to `[0, 1]`; constant features map to 0.
    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&x, (&lo, &hi))| {
                let span = hi - lo;
                if span > 0.0 {
                    ((x - lo) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn apply(&self, v: &FeatureVector) -> Result<FeatureVector, FeatureError> {
        if v.values.len() != self.width() {
            return Err(FeatureError::Width {
                expected: self.width(),
                found: v.values.len(),
            });
        }
        Ok(FeatureVector {
            names: v.names.clone(),
            values: self.transform(&v.values),
        })
    }
}

pub fn fit_scaler(train: &[FeatureVector]) -> Result<Scaler, FeatureError> {
    let rows: Vec<Vec<f64>> = train.iter().map(|v| v.values.clone()).collect();
    Scaler::fit(&rows)
}

pub fn apply_scaler(scaler: &Scaler, v: &FeatureVector) -> Result<FeatureVector, FeatureError> {
    scaler.apply(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::{annotate_instances, AnnotationSource};
    use crate::embeddings::EmbeddingFormat;

    fn table() -> EmbeddingTable {
        EmbeddingTable::from_entries(
            EmbeddingFormat::GloveText,
            3,
            vec![
                ("mary", vec![1.0, 0.0, 0.0]),
                ("swam", vec![0.0, 1.0, 0.0]),
                ("ocean", vec![0.5, 0.5, 0.0]),
                ("she", vec![0.0, 0.0, 1.0]),
                ("waves", vec![0.2, 0.8, 0.1]),
                ("calm", vec![-0.3, 0.1, 0.9]),
            ],
        )
        .unwrap()
    }

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    fn instance() -> ClozeInstance {
        ClozeInstance {
            id: "t".into(),
            context: ["Mary swam.", "The ocean had waves.", "She swam.", "Mary swam."].map(String::from),
            ending1: "Mary swam in the ocean.".into(),
            ending2: "The ocean was calm.".into(),
            gold: Some(Label::Ending1),
        }
    }

    #[test]
    fn sim_identity_and_oov() {
        let t = table();
        let s = toks("Mary swam ocean");
        assert!((sim_story_ending(&s, &s, &t) - 1.0).abs() < 1e-15);
        assert_eq!(sim_story_ending(&s, &toks("zzz qqq"), &t), 0.0);
    }

    #[test]
    fn max_sim_reductions() {
        let t = table();
        let story = toks("mary swam she ocean");
        let ending = toks("waves calm");
        let c = centroid(&t, &ending);
        let best = story
            .iter()
            .map(|w| cosine_same_len(t.lookup(w).unwrap(), &c))
            .fold(f64::MIN, f64::max);
        assert!((max_sim_topn(&story, &ending, &t, 1) - best).abs() < 1e-15);

        let two = toks("mary zzz swam");
        let mean = (cosine_same_len(t.lookup("mary").unwrap(), &c)
            + cosine_same_len(t.lookup("swam").unwrap(), &c))
            / 2.0;
        assert!((max_sim_topn(&two, &ending, &t, 5) - mean).abs() < 1e-15);
        assert_eq!(max_sim_topn(&toks("zzz"), &ending, &t, 3), 0.0);
    }

    #[test]
    fn aligned_sim_cases() {
        let t = table();
        let s = toks("mary swam waves");
        assert!((aligned_sim(&s, &s, &t) - 1.0).abs() < 1e-15);
        let single = aligned_sim(&toks("mary"), &toks("ocean"), &t);
        assert!((single - cosine_same_len(&[1.0, 0.0, 0.0], &[0.5, 0.5, 0.0])).abs() < 1e-15);
        assert_eq!(aligned_sim(&s, &toks("zzz"), &t), 0.0);
        assert_eq!(aligned_sim(&toks("zzz"), &s, &t), 0.0);
    }

    #[test]
    fn pos_sims_missing_class_is_zero() {
        let t = table();
        let x = instance();
        let ann = annotate_instances(std::slice::from_ref(&x), AnnotationSource::Heuristic).unwrap();
        let sims = pos_sims(ann[0].story(), &ann[0].endings[0], &t);
        assert_eq!(sims.len(), POS_PAIRS);
        // No adjectives in the story: row ADJ is all zero.
        assert!(sims[10..15].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn layout_sizes() {
        assert_eq!(FeatureConfig::All.feature_names(300).len(), 962);
        assert_eq!(FeatureConfig::EndingsOnly.feature_names(300).len(), 600);
        assert_eq!(FeatureConfig::SimsOnly.feature_names(300).len(), 62);
        assert_eq!(FeatureConfig::ReprPlusSim.feature_names(10).len(), 32);
        assert_eq!(FeatureConfig::AllWoMaxSim.feature_names(10).len(), 30 + 2 * 26);
        for c in FeatureConfig::ALL {
            let names = c.feature_names(7);
            let mut dedup = names.clone();
            dedup.sort();
            dedup.dedup();
            assert_eq!(dedup.len(), names.len());
            assert_eq!(FeatureConfig::infer(&names), Some((c, if c == FeatureConfig::SimsOnly { 0 } else { 7 })));
            assert_eq!(c.name().parse::<FeatureConfig>().unwrap(), c);
            assert_eq!(FeatureConfig::from_title(c.title()), Some(c));
        }
    }

    #[test]
    fn pos_needs_annotations() {
        let t = table();
        assert!(matches!(
            extract(&instance(), &t, None, FeatureConfig::All),
            Err(FeatureError::MissingAnnotations(FeatureConfig::All))
        ));
        let v = extract(&instance(), &t, None, FeatureConfig::EndingsOnly).unwrap();
        assert_eq!(v.values.len(), 6);
        assert_eq!(&v.values[..3], &*centroid(&t, &toks("Mary swam in the ocean.")));
    }

    #[test]
    fn scaler_rules() {
        let s = Scaler::fit(&[vec![2.0, 5.0], vec![4.0, 5.0]]).unwrap();
        assert_eq!(s.transform(&[2.0, 5.0]), vec![0.0, 0.0]);
        assert_eq!(s.transform(&[4.0, 5.0]), vec![1.0, 0.0]);
        assert_eq!(s.transform(&[1.0, 9.0]), vec![0.0, 0.0]);
        assert_eq!(s.transform(&[3.0, 1.0]), vec![0.5, 0.0]);
        assert_eq!(s.transform(&[10.0, 1.0]), vec![1.0, 0.0]);
        assert!(matches!(Scaler::fit(&[]), Err(FeatureError::EmptyTraining)));
    }

    #[test]
    fn matrix_csv_round_trip() {
        let t = table();
        let xs = vec![instance(), instance().swapped()];
        let ann = annotate_instances(&xs, AnnotationSource::Heuristic).unwrap();
        let m = extract_all(&xs, &t, Some(&ann), FeatureConfig::All).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = FeatureMatrix::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        assert_eq!(FeatureConfig::infer(&back.names), Some((FeatureConfig::All, 3)));
    }
}
