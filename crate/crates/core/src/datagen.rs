//! Synthesizing labeled cloze instances from five-sentence stories.
//!
//! Each strategy keeps the story's own fifth sentence as the right ending
//! and borrows the wrong ending from another story:
//!
//! - [`gen_random`]: uniformly chosen other endings;
//! - [`gen_shared_args`]: the endings sharing the most noun/pronoun lemmas
//!   with the story context;
//! - [`gen_random_coherent`]: a random subset of the best-overlapping pool.
//!
//! Every story draws from its own random stream, so output does not depend
//! on scheduling.

use std::collections::{BTreeSet, HashMap};

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::annotate::{AnnotatedToken, CoarseClass, StoryAnnotations};
use crate::corpus::{ClozeInstance, Label, RocStory};
use crate::rng;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("need at least 2 stories, got {0}")]
    CorpusTooSmall(usize),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("pool size {pool} is smaller than k = {k}")]
    PoolTooSmall { pool: usize, k: usize },
    #[error("missing annotation for story {index} ({id:?})")]
    MissingAnnotation { index: usize, id: String },
    #[error("ending index covers {index} stories but {stories} were given")]
    IndexMismatch { index: usize, stories: usize },
    #[error("instance {0:?} is unlabeled")]
    Unlabeled(String),
    #[error("consensus filtering needs at least one predictor")]
    NoPredictors,
}

/// Anything that picks an ending for an instance.
pub trait Predictor: Sync {
    fn predict(&self, instance: &ClozeInstance) -> crate::Result<Label>;
}

impl<F> Predictor for F
where
    F: Fn(&ClozeInstance) -> Label + Sync,
{
    fn predict(&self, instance: &ClozeInstance) -> crate::Result<Label> {
        Ok(self(instance))
    }
}

/// Lowercased lemmas of the noun and pronoun tokens.
pub fn feature_lemmas<'a, I>(tokens: I) -> BTreeSet<String>
where
    I: IntoIterator<Item = &'a AnnotatedToken>,
{
    tokens
        .into_iter()
        .filter(|t| matches!(t.coarse(), CoarseClass::Noun | CoarseClass::Pronoun))
        .map(|t| t.lemma.to_lowercase())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndingEntry {
    pub story_id: String,
    pub ending: String,
    pub lemmas: BTreeSet<String>,
}

/// Noun/pronoun lemma sets of every ending and story context, with an
/// inverted lemma → ending index.
#[derive(Debug, Clone)]
pub struct EndingIndex {
    endings: Vec<EndingEntry>,
    contexts: Vec<BTreeSet<String>>,
    by_lemma: HashMap<String, Vec<usize>>,
    /// Story positions sorted by ascending id (ties by position).
    id_order: Vec<usize>,
}

impl EndingIndex {
    pub fn endings(&self) -> &[EndingEntry] {
        &self.endings
    }

    pub fn context_lemmas(&self, story: usize) -> &BTreeSet<String> {
        &self.contexts[story]
    }

    /// Positions of the endings containing `lemma`.
    pub fn endings_with(&self, lemma: &str) -> &[usize] {
        self.by_lemma.get(lemma).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.endings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.endings.is_empty()
    }

    /// Other stories' endings ranked by lemma overlap with the context of
    /// `story` (descending), ties by ascending story id, at most `limit`.
    pub fn ranked_candidates(&self, story: usize, limit: usize) -> Vec<(usize, usize)> {
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for lemma in &self.contexts[story] {
            for &e in self.endings_with(lemma) {
                if e != story {
                    *counts.entry(e).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(usize, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| {
            b.1.cmp(&a.1)
                .then_with(|| self.endings[a.0].story_id.cmp(&self.endings[b.0].story_id))
                .then(a.0.cmp(&b.0))
        });
        ranked.truncate(limit);
        if ranked.len() < limit {
            let scored: BTreeSet<usize> = ranked.iter().map(|&(e, _)| e).collect();
            let fill = self
                .id_order
                .iter()
                .copied()
                .filter(|&e| e != story && !scored.contains(&e))
                .take(limit - ranked.len())
                .map(|e| (e, 0));
            ranked.extend(fill.collect::<Vec<_>>());
        }
        ranked
    }
}

pub fn build_ending_index(
    stories: &[RocStory],
    annotations: &[StoryAnnotations],
) -> Result<EndingIndex, DatagenError> {
    if annotations.len() < stories.len() {
        let index = annotations.len();
        return Err(DatagenError::MissingAnnotation {
            index,
            id: stories[index].id.clone(),
        });
    }
    let mut endings = Vec::with_capacity(stories.len());
    let mut contexts = Vec::with_capacity(stories.len());
    let mut by_lemma: HashMap<String, Vec<usize>> = HashMap::new();
    for (i, (story, ann)) in stories.iter().zip(annotations).enumerate() {
        let lemmas = feature_lemmas(ann.ending());
        for lemma in &lemmas {
            by_lemma.entry(lemma.clone()).or_default().push(i);
        }
        endings.push(EndingEntry {
            story_id: story.id.clone(),
            ending: story.ending().to_string(),
            lemmas,
        });
        contexts.push(feature_lemmas(ann.context()));
    }
    let mut id_order: Vec<usize> = (0..stories.len()).collect();
    id_order.sort_by(|&a, &b| stories[a].id.cmp(&stories[b].id).then(a.cmp(&b)));
    Ok(EndingIndex {
        endings,
        contexts,
        by_lemma,
        id_order,
    })
}

fn make_instance<R: Rng>(story: &RocStory, bad: &str, id: String, rng: &mut R) -> ClozeInstance {
    let good = story.ending().to_string();
    let context = std::array::from_fn(|k| story.sentences[k].clone());
    if rng.gen_bool(0.5) {
        ClozeInstance {
            id,
            context,
            ending1: good,
            ending2: bad.to_string(),
            gold: Some(Label::Ending1),
        }
    } else {
        ClozeInstance {
            id,
            context,
            ending1: bad.to_string(),
            ending2: good,
            gold: Some(Label::Ending2),
        }
    }
}

/// `k` instances per story with endings drawn uniformly from other stories,
/// without repetition while enough stories exist.
pub fn gen_random(stories: &[RocStory], k: usize, seed: u64) -> Result<Vec<ClozeInstance>, DatagenError> {
    let n = stories.len();
    if n < 2 {
        return Err(DatagenError::CorpusTooSmall(n));
    }
    if k == 0 {
        return Err(DatagenError::ZeroK);
    }
    let per_story: Vec<Vec<ClozeInstance>> = (0..n)
        .into_par_iter()
        .map(|s| {
            let mut rng = rng::stream(seed, s as u64);
            let distinct = k.min(n - 1);
            let mut picks: Vec<usize> = index::sample(&mut rng, n - 1, distinct).into_vec();
            picks.extend((distinct..k).map(|_| rng.gen_range(0..n - 1)));
            picks
                .into_iter()
                .map(|p| if p >= s { p + 1 } else { p })
                .enumerate()
                .map(|(j, other)| {
                    let id = format!("{}-random-{j}", stories[s].id);
                    make_instance(&stories[s], stories[other].ending(), id, &mut rng)
                })
                .collect()
        })
        .collect();
    Ok(per_story.into_iter().flatten().collect())
}

fn check_index(stories: &[RocStory], index: &EndingIndex) -> Result<(), DatagenError> {
    if index.len() != stories.len() {
        return Err(DatagenError::IndexMismatch {
            index: index.len(),
            stories: stories.len(),
        });
    }
    Ok(())
}

/// The `k` best-overlapping other endings per story. `seed` only decides
/// which side the wrong ending is placed on.
pub fn gen_shared_args(
    stories: &[RocStory],
    index: &EndingIndex,
    k: usize,
    seed: u64,
) -> Result<Vec<ClozeInstance>, DatagenError> {
    check_index(stories, index)?;
    let per_story: Vec<Vec<ClozeInstance>> = (0..stories.len())
        .into_par_iter()
        .map(|s| {
            let mut rng = rng::stream(seed, s as u64);
            index
                .ranked_candidates(s, k)
                .into_iter()
                .enumerate()
                .map(|(j, (other, _))| {
                    let id = format!("{}-shared-{j}", stories[s].id);
                    make_instance(&stories[s], stories[other].ending(), id, &mut rng)
                })
                .collect()
        })
        .collect();
    Ok(per_story.into_iter().flatten().collect())
}

/// `k` endings sampled uniformly without replacement from the `pool`
/// best-overlapping other endings per story.
pub fn gen_random_coherent(
    stories: &[RocStory],
    index: &EndingIndex,
    pool: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<ClozeInstance>, DatagenError> {
    if pool < k {
        return Err(DatagenError::PoolTooSmall { pool, k });
    }
    check_index(stories, index)?;
    let per_story: Vec<Vec<ClozeInstance>> = (0..stories.len())
        .into_par_iter()
        .map(|s| {
            let mut rng = rng::stream(seed, s as u64);
            let ranked = index.ranked_candidates(s, pool);
            let mut picks = index::sample(&mut rng, ranked.len(), k.min(ranked.len())).into_vec();
            picks.sort_unstable();
            picks
                .into_iter()
                .enumerate()
                .map(|(j, p)| {
                    let id = format!("{}-coherent-{j}", stories[s].id);
                    make_instance(&stories[s], stories[ranked[p].0].ending(), id, &mut rng)
                })
                .collect()
        })
        .collect();
    Ok(per_story.into_iter().flatten().collect())
}

/// Keeps the instances every predictor labels correctly.
pub fn consensus_filter(
    instances: &[ClozeInstance],
    predictors: &[&dyn Predictor],
) -> crate::Result<Vec<ClozeInstance>> {
    if predictors.is_empty() {
        return Err(DatagenError::NoPredictors.into());
    }
    let keep: Vec<bool> = instances
        .par_iter()
        .map(|x| {
            let gold = x.gold.ok_or_else(|| DatagenError::Unlabeled(x.id.clone()))?;
            for p in predictors {
                if p.predict(x)? != gold {
                    return Ok(false);
                }
            }
            Ok(true)
        })
        .collect::<crate::Result<_>>()?;
    Ok(instances
        .iter()
        .zip(keep)
        .filter(|&(_, k)| k)
        .map(|(x, _)| x.clone())
        .collect())
}
