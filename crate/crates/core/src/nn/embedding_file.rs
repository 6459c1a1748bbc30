//! Reader for GloVe-style text embeddings: a token followed by its values, one per line.

use std::collections::HashMap;
use std::io::BufRead;

use crate::error::{Error, Result};

/// Read vectors for the tokens in `wanted`; other lines are skipped without parsing.
pub fn read_embeddings<R: BufRead>(
    reader: R,
    dim: usize,
    wanted: &dyn Fn(&str) -> bool,
) -> Result<HashMap<String, Vec<f64>>> {
    let mut out = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else { continue };
        if !wanted(token) {
            continue;
        }
        let values: Vec<f64> = parts
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Line { line: idx + 1, message: format!("bad float: {e}") })?;
        if values.len() != dim {
            return Err(Error::Line {
                line: idx + 1,
                message: format!("expected {dim} values, found {}", values.len()),
            });
        }
        out.insert(token.to_string(), values);
    }
    Ok(out)
}
