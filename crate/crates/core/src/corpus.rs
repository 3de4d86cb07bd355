//! Story Cloze evaluation files, ROC stories, the Dev split and swap
//! augmentation.
//!
//! Both CSV schemas carry a mandatory header row and follow RFC 4180 quoting.
//! A cloze file has 8 columns (id, four context sentences, two endings, right
//! ending indicator) or 7 when unlabeled; a ROC file has 7 (id, title, five
//! sentences).

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error("header has {found} columns, expected {expected}")]
    Header { found: usize, expected: String },
    #[error("instance {id:?} is unlabeled")]
    Unlabeled { id: String },
    #[error("cannot write a mix of labeled and unlabeled instances")]
    MixedLabels,
}

/// Which candidate ending is the right one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Ending1,
    Ending2,
}

impl Label {
    /// Parses the dataset's right-ending indicator (1 or 2).
    pub fn from_indicator(value: u8) -> Option<Label> {
        match value {
            1 => Some(Label::Ending1),
            2 => Some(Label::Ending2),
            _ => None,
        }
    }

    pub fn indicator(self) -> u8 {
        match self {
            Label::Ending1 => 1,
            Label::Ending2 => 2,
        }
    }

    /// Position of the ending, 0 or 1.
    pub fn index(self) -> usize {
        self.indicator() as usize - 1
    }

    pub fn from_index(index: usize) -> Label {
        if index == 0 {
            Label::Ending1
        } else {
            Label::Ending2
        }
    }

    pub fn flip(self) -> Label {
        match self {
            Label::Ending1 => Label::Ending2,
            Label::Ending2 => Label::Ending1,
        }
    }
}

/// A four-sentence story with two candidate endings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClozeInstance {
    pub id: String,
    pub context: [String; 4],
    pub ending1: String,
    pub ending2: String,
    pub gold: Option<Label>,
}

impl ClozeInstance {
    pub fn ending(&self, which: Label) -> &str {
        match which {
            Label::Ending1 => &self.ending1,
            Label::Ending2 => &self.ending2,
        }
    }

    pub fn endings(&self) -> [&str; 2] {
        [&self.ending1, &self.ending2]
    }

    /// The same story with the endings exchanged and the label inverted.
    pub fn swapped(&self) -> ClozeInstance {
        ClozeInstance {
            id: format!("{}-swap", self.id),
            context: self.context.clone(),
            ending1: self.ending2.clone(),
            ending2: self.ending1.clone(),
            gold: self.gold.map(Label::flip),
        }
    }

    pub fn gold_or_err(&self) -> Result<Label, CorpusError> {
        self.gold.ok_or_else(|| CorpusError::Unlabeled {
            id: self.id.clone(),
        })
    }
}

/// A five-sentence ROC story.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RocStory {
    pub id: String,
    pub title: String,
    pub sentences: [String; 5],
}

impl RocStory {
    pub fn context(&self) -> &[String] {
        &self.sentences[..4]
    }

    pub fn ending(&self) -> &str {
        &self.sentences[4]
    }
}

const CLOZE_HEADER: [&str; 8] = [
    "InputStoryid",
    "InputSentence1",
    "InputSentence2",
    "InputSentence3",
    "InputSentence4",
    "RandomFifthSentenceQuiz1",
    "RandomFifthSentenceQuiz2",
    "AnswerRightEnding",
];

const ROC_HEADER: [&str; 7] = [
    "storyid",
    "storytitle",
    "sentence1",
    "sentence2",
    "sentence3",
    "sentence4",
    "sentence5",
];

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader)
}

pub fn parse_cloze_csv(path: impl AsRef<Path>) -> Result<Vec<ClozeInstance>, CorpusError> {
    read_cloze_csv(File::open(path)?)
}

/// Reads cloze instances; row numbers in errors count data rows from 1.
pub fn read_cloze_csv<R: Read>(reader: R) -> Result<Vec<ClozeInstance>, CorpusError> {
    let mut rdr = csv_reader(reader);
    let width = rdr.headers()?.len();
    let labeled = match width {
        8 => true,
        7 => false,
        found => {
            return Err(CorpusError::Header {
                found,
                expected: "7 or 8".to_string(),
            })
        }
    };
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != width {
            return Err(CorpusError::Row {
                row,
                reason: format!("expected {width} columns, found {}", record.len()),
            });
        }
        let gold = if labeled {
            let raw = record[7].trim();
            let label = raw
                .parse::<u8>()
                .ok()
                .and_then(Label::from_indicator)
                .ok_or_else(|| CorpusError::Row {
                    row,
                    reason: format!("right-ending indicator must be 1 or 2, found {raw:?}"),
                })?;
            Some(label)
        } else {
            None
        };
        out.push(ClozeInstance {
            id: record[0].to_string(),
            context: std::array::from_fn(|k| record[1 + k].to_string()),
            ending1: record[5].to_string(),
            ending2: record[6].to_string(),
            gold,
        });
    }
    Ok(out)
}

/// Writes instances in the cloze schema. The indicator column is present
/// iff every instance is labeled.
pub fn write_cloze_csv<W: Write>(instances: &[ClozeInstance], writer: W) -> Result<(), CorpusError> {
    let labeled = instances.iter().filter(|x| x.gold.is_some()).count();
    let with_label = match labeled {
        0 if !instances.is_empty() => false,
        n if n == instances.len() => true,
        _ => return Err(CorpusError::MixedLabels),
    };
    let mut w = csv::Writer::from_writer(writer);
    if with_label {
        w.write_record(CLOZE_HEADER)?;
    } else {
        w.write_record(&CLOZE_HEADER[..7])?;
    }
    for x in instances {
        let mut fields: Vec<&str> = Vec::with_capacity(8);
        fields.push(&x.id);
        fields.extend(x.context.iter().map(String::as_str));
        fields.push(&x.ending1);
        fields.push(&x.ending2);
        let indicator;
        if let Some(gold) = x.gold {
            indicator = gold.indicator().to_string();
            fields.push(&indicator);
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_cloze_csv(instances: &[ClozeInstance], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    write_cloze_csv(instances, File::create(path)?)
}

pub fn parse_roc_csv(path: impl AsRef<Path>) -> Result<Vec<RocStory>, CorpusError> {
    read_roc_csv(File::open(path)?)
}

pub fn read_roc_csv<R: Read>(reader: R) -> Result<Vec<RocStory>, CorpusError> {
    let mut rdr = csv_reader(reader);
    let width = rdr.headers()?.len();
    if width != ROC_HEADER.len() {
        return Err(CorpusError::Header {
            found: width,
            expected: ROC_HEADER.len().to_string(),
        });
    }
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != width {
            return Err(CorpusError::Row {
                row: i + 1,
                reason: format!(
                    "expected id, title and 5 sentences ({width} columns), found {} columns",
                    record.len()
                ),
            });
        }
        out.push(RocStory {
            id: record[0].to_string(),
            title: record[1].to_string(),
            sentences: std::array::from_fn(|k| record[2 + k].to_string()),
        });
    }
    Ok(out)
}

pub fn write_roc_csv<W: Write>(stories: &[RocStory], writer: W) -> Result<(), CorpusError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ROC_HEADER)?;
    for s in stories {
        let mut fields: Vec<&str> = vec![&s.id, &s.title];
        fields.extend(s.sentences.iter().map(String::as_str));
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

/// Random partition of the Dev set.
#[derive(Debug, Clone, PartialEq)]
pub struct DevSplit {
    pub dev_train: Vec<ClozeInstance>,
    pub dev_dev: Vec<ClozeInstance>,
    pub seed: u64,
}

/// Shuffles under `seed` and puts the first `round(ratio·N)` instances in
/// `dev_train`.
pub fn split_dev(instances: &[ClozeInstance], ratio: f64, seed: u64) -> DevSplit {
    assert!(ratio > 0.0 && ratio < 1.0, "split ratio must lie in (0, 1)");
    let mut shuffled = instances.to_vec();
    shuffled.shuffle(&mut rng::seeded(seed));
    let cut = ((ratio * instances.len() as f64).round() as usize).min(instances.len());
    let dev_dev = shuffled.split_off(cut);
    DevSplit {
        dev_train: shuffled,
        dev_dev,
        seed,
    }
}

/// Emits every instance followed by its ending-swapped copy.
pub fn augment_swap(instances: &[ClozeInstance]) -> Result<Vec<ClozeInstance>, CorpusError> {
    let mut out = Vec::with_capacity(instances.len() * 2);
    for x in instances {
        x.gold_or_err()?;
        out.push(x.clone());
        out.push(x.swapped());
    }
    Ok(out)
}
