//! Tokenization, part-of-speech tags and lemmas.
//!
//! Tags come either from a sidecar file produced by an external tagger or
//! from a small built-in heuristic: a closed-class lexicon followed by
//! suffix rules. Only the coarse class of a tag matters downstream.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use crate::corpus::{ClozeInstance, RocStory};

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("i/o error reading annotations: {0}")]
    Io(#[from] io::Error),
    #[error("sidecar line {line}: expected surface<TAB>pos<TAB>lemma")]
    Parse { line: usize },
    #[error("sidecar has no annotation for sentence {sentence} ({text:?})")]
    Missing { sentence: usize, text: String },
    #[error("sentence {sentence} ({text:?}) has {tokens} tokens but the sidecar has {rows} rows")]
    CountMismatch {
        sentence: usize,
        text: String,
        tokens: usize,
        rows: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedToken {
    pub surface: String,
    pub pos: String,
    pub lemma: String,
}

impl AnnotatedToken {
    pub fn coarse(&self) -> CoarseClass {
        coarse_class(&self.pos)
    }
}

/// Coarse part-of-speech classes used by the similarity features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CoarseClass {
    Noun,
    Verb,
    Adj,
    Adv,
    Pronoun,
    Other,
}

impl CoarseClass {
    /// The five content classes, in feature order.
    pub const CONTENT: [CoarseClass; 5] = [
        CoarseClass::Noun,
        CoarseClass::Verb,
        CoarseClass::Adj,
        CoarseClass::Adv,
        CoarseClass::Pronoun,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CoarseClass::Noun => "NOUN",
            CoarseClass::Verb => "VERB",
            CoarseClass::Adj => "ADJ",
            CoarseClass::Adv => "ADV",
            CoarseClass::Pronoun => "PRONOUN",
            CoarseClass::Other => "OTHER",
        }
    }
}

/// Maps a Penn Treebank tag to its coarse class by prefix.
pub fn coarse_class(pos: &str) -> CoarseClass {
    if pos.starts_with("NN") {
        CoarseClass::Noun
    } else if pos.starts_with("VB") {
        CoarseClass::Verb
    } else if pos.starts_with("JJ") {
        CoarseClass::Adj
    } else if pos.starts_with("RB") {
        CoarseClass::Adv
    } else if pos.starts_with("PR") {
        CoarseClass::Pronoun
    } else {
        CoarseClass::Other
    }
}

const DETACHED: &[char] = &['.', ',', '!', '?', ';', ':', '\'', '"', '(', ')'];

/// Splits on whitespace and detaches leading and trailing punctuation
/// characters as one token each. Casing is preserved.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let mut rest = chunk;
        while let Some(c) = rest.chars().next().filter(|c| DETACHED.contains(c)) {
            out.push(c.to_string());
            rest = &rest[c.len_utf8()..];
        }
        let mut trailing = Vec::new();
        while let Some(c) = rest.chars().next_back().filter(|c| DETACHED.contains(c)) {
            trailing.push(c.to_string());
            rest = &rest[..rest.len() - c.len_utf8()];
        }
        if !rest.is_empty() {
            out.push(rest.to_string());
        }
        out.extend(trailing.into_iter().rev());
    }
    out
}

/// Externally produced annotations, one entry per sentence in corpus order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Sidecar {
    sentences: Vec<Vec<AnnotatedToken>>,
}

impl Sidecar {
    pub fn new(sentences: Vec<Vec<AnnotatedToken>>) -> Self {
        Sidecar { sentences }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AnnotateError> {
        Self::read(BufReader::new(File::open(path)?))
    }

    /// Parses `surface<TAB>pos<TAB>lemma` rows; every blank line closes a
    /// sentence.
    pub fn read<R: BufRead>(reader: R) -> Result<Self, AnnotateError> {
        let mut sentences = Vec::new();
        let mut current = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                sentences.push(std::mem::take(&mut current));
                continue;
            }
            let mut fields = line.split('\t');
            match (fields.next(), fields.next(), fields.next(), fields.next()) {
                (Some(surface), Some(pos), Some(lemma), None) if !surface.is_empty() && !pos.is_empty() => {
                    current.push(AnnotatedToken {
                        surface: surface.to_string(),
                        pos: pos.to_string(),
                        lemma: lemma.to_string(),
                    })
                }
                _ => return Err(AnnotateError::Parse { line: i + 1 }),
            }
        }
        if !current.is_empty() {
            sentences.push(current);
        }
        Ok(Sidecar { sentences })
    }

    pub fn write<W: Write>(&self, writer: W) -> io::Result<()> {
        let mut w = io::BufWriter::new(writer);
        for sentence in &self.sentences {
            for t in sentence {
                writeln!(w, "{}\t{}\t{}", t.surface, t.pos, t.lemma)?;
            }
            writeln!(w)?;
        }
        w.flush()
    }

    pub fn sentence(&self, index: usize) -> Option<&[AnnotatedToken]> {
        self.sentences.get(index).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

/// Where tags come from.
#[derive(Debug, Clone, Copy)]
pub enum AnnotationSource<'a> {
    FileBacked(&'a Sidecar),
    Heuristic,
}

/// Annotates the tokens of the `sentence`-th sentence in corpus order.
pub fn annotate(
    tokens: &[String],
    source: AnnotationSource<'_>,
    sentence: usize,
) -> Result<Vec<AnnotatedToken>, AnnotateError> {
    match source {
        AnnotationSource::Heuristic => Ok(heuristic_tag(tokens)),
        AnnotationSource::FileBacked(sidecar) => {
            let rows = sidecar.sentence(sentence).ok_or_else(|| AnnotateError::Missing {
                sentence,
                text: tokens.join(" "),
            })?;
            if rows.len() != tokens.len() {
                return Err(AnnotateError::CountMismatch {
                    sentence,
                    text: tokens.join(" "),
                    tokens: tokens.len(),
                    rows: rows.len(),
                });
            }
            Ok(tokens
                .iter()
                .zip(rows)
                .map(|(surface, row)| AnnotatedToken {
                    surface: surface.clone(),
                    pos: row.pos.clone(),
                    lemma: row.lemma.clone(),
                })
                .collect())
        }
    }
}

/// Tagged sentences of one cloze instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceAnnotations {
    pub context: [Vec<AnnotatedToken>; 4],
    pub endings: [Vec<AnnotatedToken>; 2],
}

impl InstanceAnnotations {
    /// All context tokens in order.
    pub fn story(&self) -> impl Iterator<Item = &AnnotatedToken> + Clone + '_ {
        self.context.iter().flatten()
    }

    pub fn swapped(&self) -> InstanceAnnotations {
        InstanceAnnotations {
            context: self.context.clone(),
            endings: [self.endings[1].clone(), self.endings[0].clone()],
        }
    }
}

/// Annotates every instance. With a sidecar, instance `i` owns sentences
/// `6i..6i+6`: the four context sentences, then ending 1 and ending 2.
pub fn annotate_instances(
    instances: &[ClozeInstance],
    source: AnnotationSource<'_>,
) -> Result<Vec<InstanceAnnotations>, AnnotateError> {
    instances
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let base = 6 * i;
            let run = |k: usize, text: &str| annotate(&tokenize(text), source, base + k);
            Ok(InstanceAnnotations {
                context: [
                    run(0, &x.context[0])?,
                    run(1, &x.context[1])?,
                    run(2, &x.context[2])?,
                    run(3, &x.context[3])?,
                ],
                endings: [run(4, &x.ending1)?, run(5, &x.ending2)?],
            })
        })
        .collect()
}

/// Tagged sentences of one ROC story.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoryAnnotations {
    pub sentences: [Vec<AnnotatedToken>; 5],
}

impl StoryAnnotations {
    pub fn context(&self) -> impl Iterator<Item = &AnnotatedToken> + Clone + '_ {
        self.sentences[..4].iter().flatten()
    }

    pub fn ending(&self) -> &[AnnotatedToken] {
        &self.sentences[4]
    }
}

/// Annotates ROC stories; story `i` owns sidecar sentences `5i..5i+5`.
pub fn annotate_stories(
    stories: &[RocStory],
    source: AnnotationSource<'_>,
) -> Result<Vec<StoryAnnotations>, AnnotateError> {
    stories
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut sentences: [Vec<AnnotatedToken>; 5] = Default::default();
            for (k, text) in s.sentences.iter().enumerate() {
                sentences[k] = annotate(&tokenize(text), source, 5 * i + k)?;
            }
            Ok(StoryAnnotations { sentences })
        })
        .collect()
}

/// Builds a sidecar from heuristic tags, e.g. as a template for hand or
/// external correction.
pub fn heuristic_sidecar_for_instances(instances: &[ClozeInstance]) -> Sidecar {
    let mut sentences = Vec::with_capacity(instances.len() * 6);
    for x in instances {
        for text in x.context.iter().map(String::as_str).chain(x.endings()) {
            sentences.push(heuristic_tag(&tokenize(text)));
        }
    }
    Sidecar::new(sentences)
}

/// Rule-based tagger.
///
/// Rules, first match wins:
/// 1. all-punctuation tokens get their Penn punctuation tag;
/// 2. numerals are `CD`;
/// 3. closed-class lexicon (pronouns, determiners, prepositions, auxiliaries,
///    modals, common adverbs and adjectives, irregular verbs and plurals);
/// 4. capitalized words are `NNP`;
/// 5. `-ly` → `RB`, `-ing` → `VBG`, `-ed` → `VBD`, adjective suffixes → `JJ`;
/// 6. `-s` → `VBZ` after a pronoun or singular noun, else `NNS`;
/// 7. bare words after `TO`/`MD` are `VB`, otherwise `NN`.
///
/// Lemmas are lowercase.
pub fn heuristic_tag(tokens: &[String]) -> Vec<AnnotatedToken> {
    let mut out: Vec<AnnotatedToken> = Vec::with_capacity(tokens.len());
    for token in tokens {
        let prev = out.last().map(|t| t.pos.as_str());
        let (pos, lemma) = tag_one(token, prev);
        out.push(AnnotatedToken {
            surface: token.clone(),
            pos: pos.to_string(),
            lemma,
        });
    }
    out
}

fn tag_one(token: &str, prev: Option<&str>) -> (&'static str, String) {
    let lower = token.to_lowercase();
    if token.chars().all(|c| c.is_ascii_punctuation()) {
        let tag = match token {
            "." | "!" | "?" => ".",
            "," => ",",
            ";" | ":" | "-" | "--" | "..." => ":",
            "\"" | "'" | "``" | "''" => "``",
            "(" => "-LRB-",
            ")" => "-RRB-",
            _ => "SYM",
        };
        return (tag, token.to_string());
    }
    if token.chars().any(|c| c.is_ascii_digit())
        && token.chars().all(|c| c.is_ascii_digit() || c == ',' || c == '.')
    {
        return ("CD", lower);
    }
    if let Some((tag, lemma)) = lexicon(&lower) {
        return (tag, lemma.map_or(lower, str::to_string));
    }
    if token.chars().next().is_some_and(char::is_uppercase) {
        return ("NNP", lower);
    }
    let n = lower.chars().count();
    if n > 4 && lower.ends_with("ly") {
        return ("RB", lower);
    }
    if n > 4 && lower.ends_with("ing") {
        return ("VBG", undouble(&lower[..lower.len() - 3]));
    }
    if n > 3 && lower.ends_with("ed") {
        let lemma = if lower.ends_with("ied") {
            format!("{}y", &lower[..lower.len() - 3])
        } else {
            undouble(&lower[..lower.len() - 2])
        };
        return ("VBD", lemma);
    }
    const ADJ_SUFFIXES: [&str; 9] = ["ous", "ful", "able", "ible", "ive", "less", "ish", "ic", "al"];
    if n > 4 && ADJ_SUFFIXES.iter().any(|s| lower.ends_with(s)) {
        return ("JJ", lower);
    }
    if n > 3 && lower.ends_with('s') && !["ss", "us", "is"].iter().any(|s| lower.ends_with(s)) {
        let tag = match prev {
            Some("PRP" | "NN" | "NNP") => "VBZ",
            _ => "NNS",
        };
        return (tag, strip_plural(&lower));
    }
    match prev {
        Some("TO" | "MD") => ("VB", lower),
        _ => ("NN", lower),
    }
}

fn strip_plural(word: &str) -> String {
    if let Some(stem) = word.strip_suffix("ies") {
        return format!("{stem}y");
    }
    for suffix in ["sses", "xes", "zes", "ches", "shes"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_string();
        }
    }
    word.strip_suffix('s').unwrap_or(word).to_string()
}

/// Undoes consonant doubling before `-ing`/`-ed` ("runn" → "run"), keeping
/// the doubled endings that occur in base forms.
fn undouble(stem: &str) -> String {
    let b = stem.as_bytes();
    if b.len() >= 3 {
        let (x, y) = (b[b.len() - 2], b[b.len() - 1]);
        let vowel = |c: u8| b"aeiou".contains(&c);
        if x == y && !vowel(y) && !b"lsfz".contains(&y) {
            return stem[..stem.len() - 1].to_string();
        }
    }
    stem.to_string()
}

fn lexicon(word: &str) -> Option<(&'static str, Option<&'static str>)> {
    let entry = match word {
        "i" | "me" | "myself" | "mine" => ("PRP", "i"),
        "my" => ("PRP$", "i"),
        "you" | "yourself" | "yours" => ("PRP", "you"),
        "your" => ("PRP$", "you"),
        "he" | "him" | "himself" => ("PRP", "he"),
        "his" => ("PRP$", "he"),
        "she" | "her" | "herself" | "hers" => ("PRP", "she"),
        "it" | "itself" => ("PRP", "it"),
        "its" => ("PRP$", "it"),
        "we" | "us" | "ourselves" | "ours" => ("PRP", "we"),
        "our" => ("PRP$", "we"),
        "they" | "them" | "themselves" | "theirs" => ("PRP", "they"),
        "their" => ("PRP$", "they"),
        "the" | "a" | "an" | "this" | "that" | "these" | "those" | "every" | "each" | "some"
        | "any" | "no" | "all" | "another" | "both" | "either" | "neither" => ("DT", ""),
        "in" | "on" | "at" | "for" | "with" | "from" | "of" | "by" | "about" | "into" | "over"
        | "after" | "before" | "under" | "through" | "during" | "around" | "out" | "up" | "down"
        | "off" | "near" | "behind" | "across" | "toward" | "towards" | "without" | "since"
        | "until" | "because" | "if" | "than" | "as" | "like" | "while" | "onto" | "upon"
        | "inside" | "outside" | "against" | "along" | "among" | "between" => ("IN", ""),
        "and" | "or" | "but" | "nor" | "yet" => ("CC", ""),
        "to" => ("TO", "to"),
        "can" | "could" | "will" | "would" | "shall" | "should" | "may" | "might" | "must" => {
            ("MD", "")
        }
        "am" | "are" => ("VBP", "be"),
        "is" => ("VBZ", "be"),
        "was" | "were" => ("VBD", "be"),
        "be" => ("VB", "be"),
        "been" => ("VBN", "be"),
        "being" => ("VBG", "be"),
        "has" => ("VBZ", "have"),
        "have" => ("VBP", "have"),
        "had" => ("VBD", "have"),
        "do" => ("VBP", "do"),
        "does" => ("VBZ", "do"),
        "did" => ("VBD", "do"),
        "not" | "n't" | "never" | "very" | "too" | "also" | "just" | "then" | "now" | "soon"
        | "always" | "often" | "still" | "again" | "later" | "here" | "there" | "ever" | "even"
        | "already" | "almost" | "away" | "back" | "together" | "instead" | "so" | "once"
        | "sometimes" | "anymore" | "quite" | "rather" => ("RB", ""),
        "who" | "whom" | "what" => ("WP", ""),
        "which" => ("WDT", "which"),
        "when" | "where" | "why" | "how" => ("WRB", ""),
        "good" | "bad" | "big" | "small" | "new" | "old" | "happy" | "sad" | "great" | "little"
        | "long" | "first" | "last" | "next" | "other" | "many" | "much" | "more" | "most"
        | "few" | "best" | "better" | "hot" | "cold" | "nice" | "hard" | "late" | "young"
        | "sure" | "able" | "afraid" | "angry" | "hungry" | "busy" | "ready" | "calm" | "own"
        | "same" | "whole" | "high" | "low" | "short" | "tired" | "excited" | "upset" => {
            ("JJ", "")
        }
        "went" => ("VBD", "go"),
        "gone" => ("VBN", "go"),
        "saw" => ("VBD", "see"),
        "seen" => ("VBN", "see"),
        "got" => ("VBD", "get"),
        "took" => ("VBD", "take"),
        "taken" => ("VBN", "take"),
        "made" => ("VBD", "make"),
        "came" => ("VBD", "come"),
        "said" => ("VBD", "say"),
        "knew" => ("VBD", "know"),
        "thought" => ("VBD", "think"),
        "told" => ("VBD", "tell"),
        "found" => ("VBD", "find"),
        "gave" => ("VBD", "give"),
        "given" => ("VBN", "give"),
        "felt" => ("VBD", "feel"),
        "left" => ("VBD", "leave"),
        "ran" => ("VBD", "run"),
        "ate" => ("VBD", "eat"),
        "eaten" => ("VBN", "eat"),
        "bought" => ("VBD", "buy"),
        "brought" => ("VBD", "bring"),
        "began" => ("VBD", "begin"),
        "drove" => ("VBD", "drive"),
        "fell" => ("VBD", "fall"),
        "kept" => ("VBD", "keep"),
        "lost" => ("VBD", "lose"),
        "met" => ("VBD", "meet"),
        "paid" => ("VBD", "pay"),
        "sat" => ("VBD", "sit"),
        "stood" => ("VBD", "stand"),
        "won" => ("VBD", "win"),
        "wrote" => ("VBD", "write"),
        "woke" => ("VBD", "wake"),
        "became" => ("VBD", "become"),
        "caught" => ("VBD", "catch"),
        "built" => ("VBD", "build"),
        "sold" => ("VBD", "sell"),
        "sent" => ("VBD", "send"),
        "spent" => ("VBD", "spend"),
        "taught" => ("VBD", "teach"),
        "heard" => ("VBD", "hear"),
        "held" => ("VBD", "hold"),
        "broke" => ("VBD", "break"),
        "broken" => ("VBN", "break"),
        "chose" => ("VBD", "choose"),
        "forgot" => ("VBD", "forget"),
        "grew" => ("VBD", "grow"),
        "swam" => ("VBD", "swim"),
        "threw" => ("VBD", "throw"),
        "wore" => ("VBD", "wear"),
        "flew" => ("VBD", "fly"),
        "drank" => ("VBD", "drink"),
        "slept" => ("VBD", "sleep"),
        "fed" => ("VBD", "feed"),
        "led" => ("VBD", "lead"),
        "hid" => ("VBD", "hide"),
        "bit" => ("VBD", "bite"),
        "dug" => ("VBD", "dig"),
        "children" => ("NNS", "child"),
        "men" => ("NNS", "man"),
        "women" => ("NNS", "woman"),
        "people" => ("NNS", "person"),
        "feet" => ("NNS", "foot"),
        "teeth" => ("NNS", "tooth"),
        "mice" => ("NNS", "mouse"),
        "someone" | "everyone" | "anyone" | "nobody" | "somebody" | "everybody" | "something"
        | "nothing" | "everything" | "anything" => ("NN", ""),
        _ => return None,
    };
    // An empty lemma means the word is its own lemma.
    Some((entry.0, (!entry.1.is_empty()).then_some(entry.1)))
}


#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Mary turned."), toks(&["Mary", "turned", "."]));
        assert!(tokenize("").is_empty());
        assert_eq!(
            tokenize("watch out for the waves."),
            toks(&["watch", "out", "for", "the", "waves", "."])
        );
        assert_eq!(
            tokenize("\"Stop!\" she said, (quietly)."),
            toks(&["\"", "Stop", "!", "\"", "she", "said", ",", "(", "quietly", ")", "."])
        );
        assert_eq!(tokenize("didn't  go"), toks(&["didn't", "go"]));
    }

    #[test]
    fn coarse_prefixes() {
        assert_eq!(coarse_class("NNS"), CoarseClass::Noun);
        assert_eq!(coarse_class("NNP"), CoarseClass::Noun);
        assert_eq!(coarse_class("PRP$"), CoarseClass::Pronoun);
        assert_eq!(coarse_class("VBZ"), CoarseClass::Verb);
        assert_eq!(coarse_class("JJR"), CoarseClass::Adj);
        assert_eq!(coarse_class("RBS"), CoarseClass::Adv);
        assert_eq!(coarse_class("CC"), CoarseClass::Other);
        assert_eq!(coarse_class(""), CoarseClass::Other);
    }

    #[test]
    fn heuristic_she_runs() {
        let tagged = heuristic_tag(&toks(&["She", "runs"]));
        assert_eq!(tagged[0].pos, "PRP");
        assert_eq!(tagged[0].lemma, "she");
        assert_eq!(tagged[1].pos, "VBZ");
        assert_eq!(tagged[1].lemma, "run");
    }

    #[test]
    fn heuristic_rule_table() {
        let tagged = heuristic_tag(&tokenize(
            "Mary and Emma drove to the beach. They decided to swim in the ocean quickly.",
        ));
        let tags: Vec<_> = tagged.iter().map(|t| t.pos.as_str()).collect();
        assert_eq!(
            tags,
            [
                "NNP", "CC", "NNP", "VBD", "TO", "DT", "NN", ".", "PRP", "VBD", "TO", "VB", "IN",
                "DT", "NN", "RB", "."
            ]
        );
        let lemmas: Vec<_> = tagged.iter().map(|t| t.lemma.as_str()).collect();
        assert_eq!(lemmas[0], "mary");
        assert_eq!(lemmas[3], "drive");
        assert_eq!(lemmas[9], "decid");
        assert_eq!(lemmas[8], "they");
    }

    #[test]
    fn heuristic_lemmas() {
        let t = heuristic_tag(&toks(&["the", "boxes", "running", "stopped", "puppies", "her", "dogs"]));
        let lemmas: Vec<_> = t.iter().map(|t| t.lemma.as_str()).collect();
        assert_eq!(lemmas, ["the", "box", "run", "stop", "puppy", "she", "dog"]);
        assert_eq!(t[1].pos, "NNS");
    }

    #[test]
    fn sidecar_copies_tags_verbatim() {
        let text = "She\tPRP\tshe\nruns\tVBZ\trun\n\nOk\tUH\tok\n";
        let sidecar = Sidecar::read(text.as_bytes()).unwrap();
        assert_eq!(sidecar.len(), 2);
        let out = annotate(&toks(&["She", "runs"]), AnnotationSource::FileBacked(&sidecar), 0).unwrap();
        assert_eq!(out[1].pos, "VBZ");
        assert_eq!(out[1].lemma, "run");
        let mut buf = Vec::new();
        sidecar.write(&mut buf).unwrap();
        assert_eq!(Sidecar::read(buf.as_slice()).unwrap(), sidecar);
    }

    #[test]
    fn sidecar_errors() {
        let sidecar = Sidecar::read("a\tDT\ta\nb\tNN\tb\n\n".as_bytes()).unwrap();
        match annotate(&toks(&["a", "b", "c"]), AnnotationSource::FileBacked(&sidecar), 0) {
            Err(AnnotateError::CountMismatch { tokens: 3, rows: 2, text, .. }) => assert_eq!(text, "a b c"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            annotate(&toks(&["a"]), AnnotationSource::FileBacked(&sidecar), 1),
            Err(AnnotateError::Missing { sentence: 1, .. })
        ));
        assert!(matches!(
            Sidecar::read("a\tDT\n".as_bytes()),
            Err(AnnotateError::Parse { line: 1 })
        ));
    }

    #[test]
    fn annotate_preserves_surfaces() {
        let tokens = tokenize("The dog barked at 3 cats, loudly!");
        let out = annotate(&tokens, AnnotationSource::Heuristic, 0).unwrap();
        assert_eq!(out.len(), tokens.len());
        assert!(out.iter().zip(&tokens).all(|(a, t)| &a.surface == t && !a.pos.is_empty()));
    }
}
