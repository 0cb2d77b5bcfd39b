//! Tokenization and an inverted index with Okapi BM25 scoring.
//!
//! The analyzer lowercases and splits on non-alphanumeric boundaries; no
//! stemming, no stopword removal. The same analyzer is used for documents
//! and queries everywhere in the crate so that scores are comparable.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered list of normalized terms.
pub type TokenSequence = Vec<String>;

/// Splits on non-alphanumeric boundaries and lowercases. Deterministic.
pub fn analyze(text: &str) -> TokenSequence {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// BM25 free parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.8 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0) {
            return Err(Error::Usage(format!("k1 must be > 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Usage(format!("b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Posting {
    /// Internal document index; ascending within each posting list.
    doc: u32,
    tf: u32,
}

/// Immutable inverted index over a batch of documents.
///
/// Internal document indices follow ascending external id order, so
/// sorting by internal index is sorting by id.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct InvertedIndex {
    postings: BTreeMap<String, Vec<Posting>>,
    doc_ids: Vec<String>,
    doc_lengths: Vec<u32>,
    total_length: u64,
}

const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Snapshot {
    format_version: u32,
    index: InvertedIndex,
}

impl InvertedIndex {
    /// Builds an index from (doc id, text) pairs. Ids must be unique.
    pub fn build<I, S, T>(docs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: AsRef<str>,
    {
        let mut collected: Vec<(String, TokenSequence)> = docs
            .into_iter()
            .map(|(id, text)| (id.into(), analyze(text.as_ref())))
            .collect();
        collected.sort_by(|a, b| a.0.cmp(&b.0));
        for pair in collected.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::Integrity(format!(
                    "duplicate doc id {:?}",
                    pair[0].0
                )));
            }
        }

        let mut index = InvertedIndex::default();
        for (doc_idx, (id, tokens)) in collected.into_iter().enumerate() {
            let doc_idx = u32::try_from(doc_idx)
                .map_err(|_| Error::Usage("too many documents".into()))?;
            index.doc_lengths.push(tokens.len() as u32);
            index.total_length += tokens.len() as u64;
            index.doc_ids.push(id);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for token in tokens {
                *tf.entry(token).or_insert(0) += 1;
            }
            for (term, count) in tf {
                index
                    .postings
                    .entry(term)
                    .or_default()
                    .push(Posting { doc: doc_idx, tf: count });
            }
        }
        Ok(index)
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        if self.doc_ids.is_empty() {
            0.0
        } else {
            self.total_length as f64 / self.doc_ids.len() as f64
        }
    }

    /// External ids in ascending order.
    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    /// Writes a versioned snapshot of the index.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let snapshot = Snapshot {
            format_version: SNAPSHOT_VERSION,
            index: self.clone(),
        };
        serde_json::to_writer(BufWriter::new(file), &snapshot)
            .map_err(|e| Error::parse(path, 0, e.to_string()))?;
        Ok(())
    }

    /// Reads a snapshot written by [`InvertedIndex::save`].
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let snapshot: Snapshot = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::parse(path, 0, e.to_string()))?;
        if snapshot.format_version != SNAPSHOT_VERSION {
            return Err(Error::Usage(format!(
                "unsupported index snapshot version {}",
                snapshot.format_version
            )));
        }
        Ok(snapshot.index)
    }
}

/// Scores `query` against the index with Okapi BM25 and returns up to `k`
/// (doc id, score) pairs, descending by score, ties by ascending doc id.
///
/// idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), which keeps every score
/// non-negative. Documents sharing no query term are omitted. Query terms
/// are summed with multiplicity: a term occurring twice in the query
/// contributes twice.
pub fn bm25_search(
    index: &InvertedIndex,
    query: &[String],
    params: Bm25Params,
    k: usize,
) -> Vec<(String, f64)> {
    if k == 0 || index.doc_count() == 0 {
        return Vec::new();
    }
    let n = index.doc_count() as f64;
    let avgdl = index.avg_doc_length();

    let mut scores = vec![0.0f64; index.doc_count()];
    let mut touched = vec![false; index.doc_count()];
    for term in query {
        let Some(postings) = index.postings.get(term) else {
            continue;
        };
        let df = postings.len() as f64;
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        for p in postings {
            let dl = index.doc_lengths[p.doc as usize] as f64;
            let tf = p.tf as f64;
            let tf_norm =
                tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * dl / avgdl));
            scores[p.doc as usize] += idf * tf_norm;
            touched[p.doc as usize] = true;
        }
    }

    let mut hits: Vec<(u32, f64)> = (0..index.doc_count() as u32)
        .filter(|&i| touched[i as usize])
        .map(|i| (i, scores[i as usize]))
        .collect();
    // Internal index order is id order, so the tie-break falls out of a
    // stable sort on score alone.
    hits.sort_by(|a, b| b.1.total_cmp(&a.1));
    hits.truncate(k);
    hits.into_iter()
        .map(|(i, s)| (index.doc_ids[i as usize].clone(), s))
        .collect()
}
