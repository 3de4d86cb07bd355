//! Text checkpoint:
//!
//! ```text
//! cloze-lstm v1
//! variant <raw|att|combined>
//! input <d>
//! hidden <h>
//! tensor <name> <rows> <cols>
//! <cols values>        (repeated rows times)
//! ...
//! ```
//!
//! Tensors appear in [`NeuralModel::tensors`] order. Values use the shortest
//! representation that round-trips.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{NeuralError, NeuralModel, Variant};

const MAGIC: &str = "cloze-lstm v1";

impl NeuralModel {
    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "variant {}", self.variant)?;
        writeln!(w, "input {}", self.input_dim())?;
        writeln!(w, "hidden {}", self.hidden())?;
        for (name, (rows, cols), values) in self.tensors() {
            writeln!(w, "tensor {name} {rows} {cols}")?;
            for row in values.chunks(cols.max(1)) {
                let line: Vec<String> = row.iter().map(f64::to_string).collect();
                writeln!(w, "{}", line.join(" "))?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NeuralError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, NeuralError> {
        let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |expect: &str| -> Result<(usize, String), NeuralError> {
            match lines.next() {
                Some((n, Ok(l))) => Ok((n, l)),
                Some((_, Err(e))) => Err(e.into()),
                None => Err(NeuralError::Checkpoint {
                    line: 0,
                    reason: format!("unexpected end of file, expected {expect}"),
                }),
            }
        };
        let err = |line: usize, reason: String| NeuralError::Checkpoint { line, reason };

        let (n, magic) = next("header")?;
        if magic.trim_end() != MAGIC {
            return Err(err(n, format!("expected {MAGIC:?}, found {magic:?}")));
        }
        let mut field = |key: &str| -> Result<(usize, String), NeuralError> {
            let (n, l) = next(key)?;
            match l.split_once(' ') {
                Some((k, v)) if k == key => Ok((n, v.trim().to_string())),
                _ => Err(err(n, format!("expected `{key} <value>`, found {l:?}"))),
            }
        };
        let (n, v) = field("variant")?;
        let variant: Variant = v.parse().map_err(|_| err(n, format!("unknown variant {v:?}")))?;
        let (n, v) = field("input")?;
        let input: usize = v.parse().map_err(|_| err(n, format!("bad input size {v:?}")))?;
        let (n, v) = field("hidden")?;
        let hidden: usize = v.parse().map_err(|_| err(n, format!("bad hidden size {v:?}")))?;

        let mut model = NeuralModel::zeros(variant, input, hidden);
        let expected: Vec<(&'static str, (usize, usize))> =
            model.tensors().into_iter().map(|(name, shape, _)| (name, shape)).collect();
        for ((name, (rows, cols)), dst) in expected.into_iter().zip(model.tensors_mut()) {
            let (n, header) = next("tensor header")?;
            let want = format!("tensor {name} {rows} {cols}");
            if header.trim_end() != want {
                return Err(err(n, format!("expected {want:?}, found {header:?}")));
            }
            for r in 0..rows {
                let (n, line) = next("tensor row")?;
                let values: Vec<f64> = line
                    .split_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| err(n, format!("bad value in {name}: {e}")))?;
                if values.len() != cols {
                    return Err(err(n, format!("{name} row has {} values, expected {cols}", values.len())));
                }
                if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                    return Err(err(n, format!("non-finite value {v} in {name}")));
                }
                dst[r * cols..(r + 1) * cols].copy_from_slice(&values);
            }
        }
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NeuralError> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::super::init_params;
    use super::*;

    #[test]
    fn round_trip_all_variants() {
        for variant in Variant::ALL {
            let model = init_params(9, 3, 4, variant);
            let mut buf = Vec::new();
            model.write(&mut buf).unwrap();
            let back = NeuralModel::read(buf.as_slice()).unwrap();
            assert_eq!(back, model);
        }
    }

    #[test]
    fn rejects_wrong_shape() {
        let model = init_params(9, 3, 4, Variant::Raw);
        let mut buf = Vec::new();
        model.write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("tensor lstm.bias 16 1", "tensor lstm.bias 15 1");
        assert!(matches!(
            NeuralModel::read(text.as_bytes()),
            Err(NeuralError::Checkpoint { .. })
        ));
        assert!(NeuralModel::read("nope\n".as_bytes()).is_err());
    }
}
