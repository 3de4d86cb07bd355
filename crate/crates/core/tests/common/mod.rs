//! Synthetic fixtures and brute-force reference implementations shared by
//! the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use cloze::annotate::{AnnotatedToken, InstanceAnnotations};
use cloze::corpus::{ClozeInstance, Label, RocStory};
use cloze::embeddings::{EmbeddingFormat, EmbeddingTable};
use cloze::neural::{backward, forward, init_params, loss, EmbeddedInstance, Variant};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` lowercase tokens `w0..` with uniform vectors in [-1, 1).
pub fn synthetic_table(seed: u64, n: usize, dim: usize) -> (EmbeddingTable, Vec<String>) {
    let mut r = rng(seed);
    let vocab: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
    let entries: Vec<(String, Vec<f64>)> = vocab
        .iter()
        .map(|w| (w.clone(), (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect()))
        .collect();
    let table = EmbeddingTable::from_entries(EmbeddingFormat::GloveText, dim, entries).unwrap();
    (table, vocab)
}

const TAGS: [&str; 12] = ["NN", "NNS", "NNP", "VB", "VBD", "JJ", "RB", "PRP", "PRP$", "DT", "IN", "CC"];

/// A token from `vocab`, sometimes capitalized (hits the lowercase fallback)
/// and sometimes out of vocabulary.
fn random_token(r: &mut ChaCha8Rng, vocab: &[String]) -> String {
    let roll: f64 = r.gen();
    if roll < 0.1 {
        format!("oov{}", r.gen_range(0..1000))
    } else if roll < 0.2 {
        let w = vocab.choose(r).unwrap();
        w.to_uppercase()
    } else {
        vocab.choose(r).unwrap().clone()
    }
}

fn random_sentence(r: &mut ChaCha8Rng, vocab: &[String], min: usize, max: usize) -> Vec<AnnotatedToken> {
    let len = r.gen_range(min..=max);
    (0..len)
        .map(|_| {
            let surface = random_token(r, vocab);
            AnnotatedToken {
                lemma: surface.to_lowercase(),
                pos: TAGS.choose(r).unwrap().to_string(),
                surface,
            }
        })
        .collect()
}

fn join(tokens: &[AnnotatedToken]) -> String {
    tokens.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" ")
}

/// Random labeled instance whose text tokenizes back to its annotations.
pub fn random_instance(r: &mut ChaCha8Rng, vocab: &[String], id: usize) -> (ClozeInstance, InstanceAnnotations) {
    let context: [Vec<AnnotatedToken>; 4] = std::array::from_fn(|_| random_sentence(r, vocab, 0, 9));
    let endings: [Vec<AnnotatedToken>; 2] = std::array::from_fn(|_| random_sentence(r, vocab, 0, 7));
    let instance = ClozeInstance {
        id: format!("inst{id}"),
        context: std::array::from_fn(|k| join(&context[k])),
        ending1: join(&endings[0]),
        ending2: join(&endings[1]),
        gold: Some(if r.gen_bool(0.5) { Label::Ending1 } else { Label::Ending2 }),
    };
    (instance, InstanceAnnotations { context, endings })
}

pub fn random_instances(seed: u64, vocab: &[String], n: usize) -> (Vec<ClozeInstance>, Vec<InstanceAnnotations>) {
    let mut r = rng(seed);
    (0..n).map(|i| random_instance(&mut r, vocab, i)).unzip()
}

const NOUNS: [&str; 24] = [
    "dog", "cat", "car", "house", "garden", "teacher", "friend", "phone", "book", "ball", "cake", "door",
    "window", "river", "boat", "shop", "bike", "letter", "party", "team", "game", "job", "dinner", "trip",
];
const NAMES: [&str; 8] = ["Anna", "Ben", "Carla", "Dan", "Eve", "Femi", "Gus", "Hana"];

/// `n` five-sentence stories built from a small noun inventory, ids in
/// position order and every ending distinct.
pub fn synthetic_roc(seed: u64, n: usize) -> Vec<RocStory> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let name = NAMES.choose(&mut r).unwrap();
            let mut noun = || *NOUNS.choose(&mut r).unwrap();
            let sentences = [
                format!("{name} had a {}.", noun()),
                format!("One day the {} was near the {}.", noun(), noun()),
                format!("{name} looked at the {}.", noun()),
                format!("Then a {} came by.", noun()),
                format!("In the end {name} got a {} and a {} number {i}.", noun(), noun()),
            ];
            RocStory {
                id: format!("s{i:03}"),
                title: format!("Story {i}"),
                sentences,
            }
        })
        .collect()
}

/// Exact-then-lowercase lookup over a plain map.
pub struct OracleTable {
    map: HashMap<String, Vec<f64>>,
    pub dim: usize,
}

impl OracleTable {
    pub fn new(table: &EmbeddingTable) -> Self {
        OracleTable {
            map: table.iter().map(|(w, v)| (w.to_string(), v.to_vec())).collect(),
            dim: table.dim(),
        }
    }

    pub fn get(&self, token: &str) -> Option<&Vec<f64>> {
        self.map.get(token).or_else(|| self.map.get(&token.to_lowercase()))
    }

    pub fn centroid(&self, tokens: &[&str]) -> Vec<f64> {
        let mut sum = vec![0.0; self.dim];
        let mut count = 0;
        for t in tokens {
            if let Some(v) = self.get(t) {
                for i in 0..self.dim {
                    sum[i] += v[i];
                }
                count += 1;
            }
        }
        if count > 0 {
            for s in &mut sum {
                *s /= count as f64;
            }
        }
        sum
    }
}

pub fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Brute-force top-N: every in-vocabulary story word's cosine with the
/// ending centroid, sorted, mean of the first `min(n, count)`.
pub fn oracle_max_sim(t: &OracleTable, story: &[&str], ending: &[&str], n: usize) -> f64 {
    let c = t.centroid(ending);
    let mut scores: Vec<f64> = story.iter().filter_map(|w| t.get(w)).map(|v| oracle_cosine(v, &c)).collect();
    scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
    scores.truncate(n);
    if scores.is_empty() {
        0.0
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    }
}

pub fn oracle_aligned(t: &OracleTable, story: &[&str], ending: &[&str]) -> f64 {
    let ev: Vec<&Vec<f64>> = ending.iter().filter_map(|w| t.get(w)).collect();
    let sv: Vec<&Vec<f64>> = story.iter().filter_map(|w| t.get(w)).collect();
    if ev.is_empty() || sv.is_empty() {
        return 0.0;
    }
    let total: f64 = sv
        .iter()
        .map(|s| ev.iter().map(|e| oracle_cosine(s, e)).fold(f64::MIN, f64::max))
        .sum();
    total / sv.len() as f64
}

/// Coarse class by Penn tag prefix.
pub fn oracle_class(pos: &str) -> Option<usize> {
    ["NN", "VB", "JJ", "RB", "PR"].iter().position(|p| pos.starts_with(p))
}

pub fn oracle_pos_sims(t: &OracleTable, story: &[&AnnotatedToken], ending: &[AnnotatedToken]) -> Vec<f64> {
    let class_tokens = |tokens: Vec<&AnnotatedToken>, class: usize| -> Vec<f64> {
        let words: Vec<&str> = tokens
            .into_iter()
            .filter(|tok| oracle_class(&tok.pos) == Some(class))
            .map(|tok| tok.surface.as_str())
            .collect();
        t.centroid(&words)
    };
    let mut out = Vec::new();
    for s in 0..5 {
        for e in 0..5 {
            let sc = class_tokens(story.to_vec(), s);
            let ec = class_tokens(ending.iter().collect(), e);
            out.push(oracle_cosine(&sc, &ec));
        }
    }
    out
}

/// Every feature value by name, from the definitions alone.
pub fn oracle_features(t: &OracleTable, ann: &InstanceAnnotations) -> HashMap<String, f64> {
    let story_tok: Vec<&AnnotatedToken> = ann.context.iter().flatten().collect();
    let story: Vec<&str> = story_tok.iter().map(|a| a.surface.as_str()).collect();
    let mut out = HashMap::new();
    let sc = t.centroid(&story);
    for (i, v) in sc.iter().enumerate() {
        out.insert(format!("story.centroid.{i}"), *v);
    }
    for k in 0..2 {
        let e = k + 1;
        let ending: Vec<&str> = ann.endings[k].iter().map(|a| a.surface.as_str()).collect();
        let ec = t.centroid(&ending);
        for (i, v) in ec.iter().enumerate() {
            out.insert(format!("e{e}.centroid.{i}"), *v);
        }
        out.insert(format!("e{e}.sim"), oracle_cosine(&sc, &ec));
        for n in [1, 2, 3, 5] {
            out.insert(format!("e{e}.maxsim.top{n}"), oracle_max_sim(t, &story, &ending, n));
        }
        out.insert(format!("e{e}.aligned"), oracle_aligned(t, &story, &ending));
        let classes = ["NOUN", "VERB", "ADJ", "ADV", "PRONOUN"];
        for (j, v) in oracle_pos_sims(t, &story_tok, &ann.endings[k]).into_iter().enumerate() {
            out.insert(format!("e{e}.pos.{}.{}", classes[j / 5], classes[j % 5]), v);
        }
    }
    out
}

/// Feature name with endings 1 and 2 exchanged.
pub fn swap_name(name: &str) -> String {
    if let Some(rest) = name.strip_prefix("e1.") {
        format!("e2.{rest}")
    } else if let Some(rest) = name.strip_prefix("e2.") {
        format!("e1.{rest}")
    } else {
        name.to_string()
    }
}

/// `n` instances whose right ending is drawn from `w0..w9` and wrong
/// ending from `w10..w19`; stories use the rest of the table.
pub fn separable_cloze(seed: u64, n: usize) -> Vec<ClozeInstance> {
    let mut r = rng(seed);
    let pick = |r: &mut ChaCha8Rng, lo: usize, hi: usize, len: usize| -> String {
        (0..len).map(|_| format!("w{}", r.gen_range(lo..hi))).collect::<Vec<_>>().join(" ")
    };
    (0..n)
        .map(|i| {
            let context = std::array::from_fn(|_| pick(&mut r, 20, 50, 4));
            let good = pick(&mut r, 0, 10, 3);
            let bad = pick(&mut r, 10, 20, 3);
            let gold = if i % 2 == 0 { Label::Ending1 } else { Label::Ending2 };
            let (ending1, ending2) = if gold == Label::Ending1 { (good, bad) } else { (bad, good) };
            ClozeInstance {
                id: format!("sep{i}"),
                context,
                ending1,
                ending2,
                gold: Some(gold),
            }
        })
        .collect()
}

/// Largest relative error between backpropagated gradients and central
/// differences (step 1e-5) over every parameter of a d=4, h=5 model on
/// sequences of length 3/2/2, for both gold labels. The denominator is
/// floored at 1e-6.
pub fn max_gradient_error(variant: Variant, seed: u64) -> f64 {
    let step = 1e-5;
    let mut r = rng(1000 + seed);
    let mut model = init_params(seed, 4, 5, variant);
    // Offsets on every tensor so biases carry signal too.
    for t in model.tensors_mut() {
        t.iter_mut().for_each(|v| *v += r.gen_range(-0.3..0.3));
    }
    let xs: Vec<Vec<f64>> = (0..7).map(|_| (0..4).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let mut worst: f64 = 0.0;
    for gold in [Label::Ending1, Label::Ending2] {
        let input = EmbeddedInstance {
            id: "grad".into(),
            story: refs[0..3].to_vec(),
            endings: [refs[3..5].to_vec(), refs[5..7].to_vec()],
            gold: Some(gold),
        };
        let (_, cache) = forward(&model, &input).unwrap();
        let grads = backward(&model, &cache, gold);
        let analytic: Vec<Vec<f64>> = grads.tensors().into_iter().map(|(_, _, v)| v.to_vec()).collect();
        let eval = |m: &cloze::neural::NeuralModel| loss(forward(m, &input).unwrap().0, gold);
        for (ti, values) in analytic.iter().enumerate() {
            for (j, &a) in values.iter().enumerate() {
                let mut plus = model.clone();
                plus.tensors_mut()[ti][j] += step;
                let mut minus = model.clone();
                minus.tensors_mut()[ti][j] -= step;
                let numeric = (eval(&plus) - eval(&minus)) / (2.0 * step);
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
    }
    worst
}
