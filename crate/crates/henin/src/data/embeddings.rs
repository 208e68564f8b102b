//! Pretrained word embedding files: plain text, one token per line, the
//! token followed by its whitespace-separated vector components.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::Array2;

use crate::data::types::{Vocabulary, PAD_INDEX};
use crate::{HeninError, Result};

/// Parse an embedding file into a token -> vector map. Every line must
/// carry the same number of components.
pub fn load_pretrained_embeddings(path: impl AsRef<Path>) -> Result<BTreeMap<String, Vec<f64>>> {
    let path = path.as_ref();
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut table = BTreeMap::new();
    let mut dim: Option<usize> = None;
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts
            .next()
            .expect("non-empty line has a first field")
            .to_string();
        let values: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>().map_err(|_| HeninError::Parse {
                    session_id: None,
                    msg: format!(
                        "bad embedding component '{p}' on line {} of {}",
                        line_no + 1,
                        path.display()
                    ),
                })
            })
            .collect::<Result<_>>()?;
        if values.is_empty() {
            return Err(HeninError::Parse {
                session_id: None,
                msg: format!("token '{token}' has no vector on line {}", line_no + 1),
            });
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(HeninError::Parse {
                    session_id: None,
                    msg: format!(
                        "embedding dim changed from {d} to {} on line {}",
                        values.len(),
                        line_no + 1
                    ),
                })
            }
            _ => {}
        }
        table.insert(token, values);
    }
    if table.is_empty() {
        return Err(HeninError::Parse {
            session_id: None,
            msg: format!("no embeddings in {}", path.display()),
        });
    }
    Ok(table)
}

/// Overwrite the rows of `embed` whose vocabulary tokens appear in the
/// table; the padding row stays zero. Returns how many rows were set.
pub fn apply_pretrained(
    embed: &mut Array2<f64>,
    vocabulary: &Vocabulary,
    table: &BTreeMap<String, Vec<f64>>,
) -> Result<usize> {
    let d = embed.ncols();
    let mut matched = 0;
    for (token, values) in table {
        let Some(index) = vocabulary.get(token) else {
            continue;
        };
        if index == PAD_INDEX {
            continue;
        }
        if values.len() != d {
            return Err(HeninError::ShapeMismatch {
                name: format!("embedding for '{token}'"),
                expected: format!("dim {d}"),
                got: format!("dim {}", values.len()),
            });
        }
        for (j, &v) in values.iter().enumerate() {
            embed[(index, j)] = v;
        }
        matched += 1;
    }
    Ok(matched)
}
