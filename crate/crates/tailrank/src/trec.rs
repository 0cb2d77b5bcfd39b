//! TREC-style run file reading and writing.
//!
//! One line per scored context: `entity_id Q0 context_id rank score run_tag`,
//! rank starting at 1 within each entity.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pipeline::ContextRanking;

/// One parsed run line.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub context_id: String,
    pub rank: usize,
    pub score: f64,
}

/// A parsed run file: one tag, rankings per entity.
#[derive(Debug, Clone, Default)]
pub struct RunData {
    pub tag: String,
    /// entity id -> entries ordered by ascending rank.
    pub entities: BTreeMap<String, Vec<RunEntry>>,
}

impl RunData {
    /// Ranked context ids for one entity, best first.
    pub fn ranking(&self, entity_id: &str) -> Option<&[RunEntry]> {
        self.entities.get(entity_id).map(Vec::as_slice)
    }
}

/// Renders rankings in run format. Scores use the shortest exact decimal
/// representation so identical inputs always produce identical bytes.
pub fn format_run(rankings: &[ContextRanking]) -> String {
    let mut out = String::new();
    for ranking in rankings {
        for (i, entry) in ranking.entries.iter().enumerate() {
            let _ = writeln!(
                out,
                "{} Q0 {} {} {} {}",
                ranking.entity_id,
                entry.context_id,
                i + 1,
                entry.score,
                ranking.tag
            );
        }
    }
    out
}

/// Writes rankings to a run file.
pub fn write_run(path: impl AsRef<Path>, rankings: &[ContextRanking]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_run(rankings)).map_err(|e| Error::io(path, e))
}

/// Parses a run file. All lines must carry the same run tag.
pub fn read_run(path: impl AsRef<Path>) -> Result<RunData> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut data = RunData::default();
    for (idx, line) in content.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 6 fields, found {}", fields.len()),
            ));
        }
        let rank: usize = fields[3]
            .parse()
            .map_err(|e| Error::parse(path, lineno, format!("bad rank: {e}")))?;
        let score: f64 = fields[4]
            .parse()
            .map_err(|e| Error::parse(path, lineno, format!("bad score: {e}")))?;
        if data.tag.is_empty() {
            data.tag = fields[5].to_string();
        } else if data.tag != fields[5] {
            return Err(Error::parse(
                path,
                lineno,
                format!("mixed run tags {:?} and {:?}", data.tag, fields[5]),
            ));
        }
        data.entities
            .entry(fields[0].to_string())
            .or_default()
            .push(RunEntry {
                context_id: fields[2].to_string(),
                rank,
                score,
            });
    }
    for entries in data.entities.values_mut() {
        entries.sort_by_key(|e| e.rank);
    }
    Ok(data)
}
