//! Pre-trained word embeddings and the vector primitives built on them.
//!
//! Two on-disk formats are understood:
//!
//! - word2vec binary: an ASCII header `"<vocab_size> <dim>\n"`, then per
//!   record the token bytes terminated by a single space and `dim`
//!   little-endian `f32` values. A newline after each record is tolerated.
//! - GloVe text: one `token f1 f2 … fdim` record per line.
//!
//! Values are widened to `f64` on load; everything downstream works in
//! double precision.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::ops::Deref;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("i/o error reading embeddings: {0}")]
    Io(#[from] io::Error),
    #[error("malformed word2vec header at byte {offset}: {reason}")]
    MalformedHeader { offset: u64, reason: String },
    #[error("truncated record {record} at byte {offset}: {reason}")]
    Truncated {
        record: usize,
        offset: u64,
        reason: String,
    },
    #[error("line {line}: expected {expected} values, found {found}")]
    InconsistentWidth {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: cannot parse value {value:?}")]
    BadValue { line: usize, value: String },
    #[error("{location}: non-finite component in vector for {token:?}")]
    NonFinite { location: String, token: String },
    #[error("embedding file is empty")]
    Empty,
    #[error("vector for {token:?} has {found} components, table dimension is {expected}")]
    WrongLength {
        token: String,
        expected: usize,
        found: usize,
    },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("unknown embedding format {0:?} (expected w2v-bin or glove-txt)")]
    UnknownFormat(String),
}

/// On-disk layout of an embedding file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EmbeddingFormat {
    Word2VecBinary,
    GloveText,
}

impl EmbeddingFormat {
    /// Guesses the format from a file extension: `.bin` is word2vec, anything
    /// else is GloVe text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("bin") => EmbeddingFormat::Word2VecBinary,
            _ => EmbeddingFormat::GloveText,
        }
    }
}

impl FromStr for EmbeddingFormat {
    type Err = EmbeddingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "w2v-bin" | "word2vec" => Ok(EmbeddingFormat::Word2VecBinary),
            "glove-txt" | "glove" => Ok(EmbeddingFormat::GloveText),
            other => Err(EmbeddingError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for EmbeddingFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingFormat::Word2VecBinary => "w2v-bin",
            EmbeddingFormat::GloveText => "glove-txt",
        })
    }
}

/// An owned vector of finite reals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn zeros(len: usize) -> Self {
        DenseVector(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(v: Vec<f64>) -> Self {
        DenseVector(v)
    }
}

/// Immutable token → vector map.
///
/// Vectors live in one contiguous row-major buffer; `index` maps a token to
/// its row. The first occurrence of a duplicated token wins.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    format: EmbeddingFormat,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    zero: Vec<f64>,
}

impl EmbeddingTable {
    /// Builds a table from in-memory entries, validating lengths and finiteness.
    pub fn from_entries<I, S>(
        format: EmbeddingFormat,
        dim: usize,
        entries: I,
    ) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut table = EmbeddingTable::with_dim(format, dim);
        for (token, vector) in entries {
            let token = token.into();
            if vector.len() != dim {
                return Err(EmbeddingError::WrongLength {
                    token,
                    expected: dim,
                    found: vector.len(),
                });
            }
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(EmbeddingError::NonFinite {
                    location: "entry".to_string(),
                    token,
                });
            }
            table.push(token, &vector);
        }
        Ok(table)
    }

    fn with_dim(format: EmbeddingFormat, dim: usize) -> Self {
        EmbeddingTable {
            dim,
            format,
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            zero: vec![0.0; dim],
        }
    }

    fn push(&mut self, token: String, vector: &[f64]) {
        if self.index.contains_key(&token) {
            return;
        }
        self.index.insert(token.clone(), self.words.len());
        self.words.push(token);
        self.data.extend_from_slice(vector);
    }

    /// Loads a table from `path`.
    pub fn load(path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<Self, EmbeddingError> {
        let reader = BufReader::with_capacity(1 << 20, File::open(path)?);
        match format {
            EmbeddingFormat::Word2VecBinary => Self::read_word2vec_binary(reader),
            EmbeddingFormat::GloveText => Self::read_glove_text(reader),
        }
    }

    pub fn read_word2vec_binary<R: BufRead>(mut reader: R) -> Result<Self, EmbeddingError> {
        let mut header = Vec::new();
        let header_len = reader.read_until(b'\n', &mut header)?;
        if header_len == 0 {
            return Err(EmbeddingError::Empty);
        }
        let malformed = |reason: &str| EmbeddingError::MalformedHeader {
            offset: 0,
            reason: reason.to_string(),
        };
        if header.last() != Some(&b'\n') {
            return Err(malformed("header is not newline-terminated"));
        }
        let header = std::str::from_utf8(&header).map_err(|_| malformed("header is not ASCII"))?;
        let mut fields = header.split_ascii_whitespace();
        let (vocab, dim) = match (fields.next(), fields.next(), fields.next()) {
            (Some(v), Some(d), None) => (v, d),
            _ => return Err(malformed("expected \"<vocab_size> <dim>\"")),
        };
        let vocab: usize = vocab.parse().map_err(|_| malformed("vocabulary size is not an integer"))?;
        let dim: usize = dim.parse().map_err(|_| malformed("dimension is not an integer"))?;
        if dim == 0 {
            return Err(malformed("dimension must be positive"));
        }

        let mut table = EmbeddingTable::with_dim(EmbeddingFormat::Word2VecBinary, dim);
        let mut offset = header_len as u64;
        let mut raw = vec![0u8; dim * 4];
        let mut vector = vec![0.0f64; dim];
        let mut token = Vec::new();
        for record in 0..vocab {
            // Skip the optional newline left by the previous record.
            loop {
                let buf = reader.fill_buf()?;
                match buf.first() {
                    Some(b'\n') => {
                        reader.consume(1);
                        offset += 1;
                    }
                    _ => break,
                }
            }
            token.clear();
            let record_start = offset;
            let n = reader.read_until(b' ', &mut token)?;
            offset += n as u64;
            if token.last() != Some(&b' ') {
                return Err(EmbeddingError::Truncated {
                    record,
                    offset: record_start,
                    reason: if n == 0 {
                        format!("expected {vocab} records, file ends after {record}")
                    } else {
                        "token is not space-terminated".to_string()
                    },
                });
            }
            token.pop();
            let word = String::from_utf8_lossy(&token).into_owned();
            let mut filled = 0;
            while filled < raw.len() {
                let n = reader.read(&mut raw[filled..])?;
                if n == 0 {
                    return Err(EmbeddingError::Truncated {
                        record,
                        offset: offset + filled as u64,
                        reason: format!("vector for {word:?} has {filled} of {} bytes", raw.len()),
                    });
                }
                filled += n;
            }
            for (dst, chunk) in vector.iter_mut().zip(raw.chunks_exact(4)) {
                *dst = f64::from(f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]));
            }
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(EmbeddingError::NonFinite {
                    location: format!("byte {record_start}"),
                    token: word,
                });
            }
            offset += raw.len() as u64;
            table.push(word, &vector);
        }
        Ok(table)
    }

    pub fn read_glove_text<R: BufRead>(reader: R) -> Result<Self, EmbeddingError> {
        let mut table: Option<EmbeddingTable> = None;
        let mut vector = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(' ');
            let token = fields.next().unwrap_or_default();
            vector.clear();
            for field in fields {
                let value: f64 = field.parse().map_err(|_| EmbeddingError::BadValue {
                    line: line_no,
                    value: field.to_string(),
                })?;
                vector.push(value);
            }
            let table = table.get_or_insert_with(|| {
                EmbeddingTable::with_dim(EmbeddingFormat::GloveText, vector.len())
            });
            if vector.len() != table.dim || vector.is_empty() {
                return Err(EmbeddingError::InconsistentWidth {
                    line: line_no,
                    expected: table.dim,
                    found: vector.len(),
                });
            }
            if vector.iter().any(|x| !x.is_finite()) {
                return Err(EmbeddingError::NonFinite {
                    location: format!("line {line_no}"),
                    token: token.to_string(),
                });
            }
            table.push(token.to_string(), &vector);
        }
        table.ok_or(EmbeddingError::Empty)
    }

    /// Writes the table in word2vec binary layout; values are narrowed to `f32`.
    pub fn write_word2vec_binary<W: Write>(&self, writer: W) -> io::Result<()> {
        let mut w = BufWriter::new(writer);
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (token, vector) in self.iter() {
            w.write_all(token.as_bytes())?;
            w.write_all(b" ")?;
            for &x in vector {
                w.write_all(&(x as f32).to_le_bytes())?;
            }
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    /// Writes the table as GloVe text using shortest round-trip decimals.
    pub fn write_glove_text<W: Write>(&self, writer: W) -> io::Result<()> {
        let mut w = BufWriter::new(writer);
        for (token, vector) in self.iter() {
            w.write_all(token.as_bytes())?;
            for x in vector {
                write!(w, " {x}")?;
            }
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn format(&self) -> EmbeddingFormat {
        self.format
    }

    /// Exact-match lookup with no case fallback.
    pub fn get_exact(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&row| self.row(row))
    }

    /// Exact match first, then the lowercased token.
    pub fn lookup(&self, token: &str) -> Option<&[f64]> {
        if let Some(v) = self.get_exact(token) {
            return Some(v);
        }
        let lower = token.to_lowercase();
        if lower != token {
            self.get_exact(&lower)
        } else {
            None
        }
    }

    /// [`lookup`](Self::lookup), mapping misses to the zero vector.
    pub fn lookup_or_zero(&self, token: &str) -> &[f64] {
        self.lookup(token).unwrap_or(&self.zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> + '_ {
        self.words
            .iter()
            .enumerate()
            .map(move |(row, w)| (w.as_str(), self.row(row)))
    }

    fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }
}

/// Mean of the vectors of all tokens that resolve through
/// [`EmbeddingTable::lookup`]. Unknown tokens are skipped; if none resolve the
/// result is the zero vector.
pub fn centroid<S: AsRef<str>>(table: &EmbeddingTable, tokens: &[S]) -> DenseVector {
    let mut sum = vec![0.0; table.dim()];
    let mut count = 0usize;
    for v in tokens.iter().filter_map(|t| table.lookup(t.as_ref())) {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        count += 1;
    }
    if count > 0 {
        let n = count as f64;
        sum.iter_mut().for_each(|s| *s /= n);
    }
    DenseVector(sum)
}

/// Cosine similarity; 0 when either operand has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbeddingError> {
    if a.len() != b.len() {
        return Err(EmbeddingError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(cosine_same_len(a, b))
}

pub(crate) fn cosine_same_len(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}
