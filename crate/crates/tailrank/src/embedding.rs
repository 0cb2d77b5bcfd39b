//! Pretrained word embeddings, averaged context vectors and cosine
//! similarity.
//!
//! The on-disk format is the common textual one: an optional `count dim`
//! header line, then one term per line followed by its components,
//! whitespace-separated. The dimension is discovered from the first data
//! line when no header is present.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// term -> vector lookup with a fixed dimension.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

/// Averaged vector for a token sequence plus how many tokens were found
/// in the table.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextVector {
    pub values: Vec<f64>,
    pub covered_terms: usize,
}

impl EmbeddingTable {
    /// Loads a table from the textual format. Duplicate terms keep the last
    /// occurrence (a warning is logged); an inconsistent dimension is a
    /// parse error carrying the line number.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);

        let mut dimension: Option<usize> = None;
        let mut vectors = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if lineno == 1 && fields.len() == 2 {
                // Header line: "count dim", both integers.
                if let (Ok(_), Ok(dim)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                    if dim == 0 {
                        return Err(Error::parse(path, lineno, "zero dimension in header"));
                    }
                    dimension = Some(dim);
                    continue;
                }
            }
            if fields.len() < 2 {
                return Err(Error::parse(path, lineno, "expected term and components"));
            }
            let term = fields[0].to_string();
            let values: Vec<f64> = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(path, lineno, format!("bad component: {e}")))?;
            match dimension {
                None => dimension = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(Error::parse(
                        path,
                        lineno,
                        format!("expected {} components, found {}", d, values.len()),
                    ));
                }
                Some(_) => {}
            }
            if vectors.insert(term.clone(), values).is_some() {
                log::warn!("duplicate embedding term {term:?}; keeping the last occurrence");
            }
        }
        let dimension = dimension
            .ok_or_else(|| Error::parse(path, 0, "embedding file has no data lines"))?;
        Ok(EmbeddingTable { dimension, vectors })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<&[f64]> {
        self.vectors.get(term).map(Vec::as_slice)
    }

    /// Arithmetic mean of the vectors of tokens present in the table, each
    /// occurrence counted. Out-of-vocabulary tokens are skipped; if none is
    /// covered the zero vector is returned with `covered_terms = 0`.
    pub fn context_vector(&self, tokens: &[String]) -> ContextVector {
        let mut sum = vec![0.0; self.dimension];
        let mut covered = 0usize;
        for token in tokens {
            if let Some(v) = self.vectors.get(token) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                covered += 1;
            }
        }
        if covered > 0 {
            for s in &mut sum {
                *s /= covered as f64;
            }
        }
        ContextVector {
            values: sum,
            covered_terms: covered,
        }
    }
}

/// Cosine similarity between two context vectors; 0 by convention when
/// either has zero norm. Dimension mismatch is a usage error.
pub fn cosine(u: &ContextVector, v: &ContextVector) -> Result<f64> {
    if u.values.len() != v.values.len() {
        return Err(Error::Usage(format!(
            "cosine dimension mismatch: {} vs {}",
            u.values.len(),
            v.values.len()
        )));
    }
    let dot: f64 = u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum();
    let nu: f64 = u.values.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.values.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (nu * nv))
}
