//! Domain records and their line-delimited JSON stores.
//!
//! Four record files make up a corpus: an entity catalog (`catalog.jsonl`),
//! a sentence store (`contexts.jsonl`), precomputed entity-link annotations
//! (`annotations.jsonl`) and the long-tail entity queries themselves
//! (`entities.jsonl`). One JSON object per line; field names are part of
//! the format. Stores are immutable once loaded and safe to share across
//! threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Coarse entity type attached to a long-tail entity query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntityType {
    Person,
    Location,
    Organization,
}

impl EntityType {
    /// Canonical label, as it appears in catalog type sets.
    pub fn label(&self) -> &'static str {
        match self {
            EntityType::Person => "Person",
            EntityType::Location => "Location",
            EntityType::Organization => "Organization",
        }
    }
}

/// A long-tail entity to retrieve contexts for: identifier, short textual
/// description, coarse type and the set of known surface forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityQuery {
    pub id: String,
    pub description: String,
    pub entity_type: EntityType,
    pub surface_forms: Vec<String>,
}

/// A well-represented entity from the reference catalog. `opening_text` is
/// the indexed description field; `inlink_count` is the popularity signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntity {
    pub id: String,
    pub opening_text: String,
    pub types: Vec<String>,
    pub inlink_count: u64,
    pub surface_forms: Vec<String>,
}

/// A detected entity mention inside a context. Offsets count Unicode
/// scalar values, not bytes; `surface_string` must equal the spanned text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mention {
    pub char_start: usize,
    pub char_end: usize,
    pub surface_string: String,
}

/// One sentence with provenance and its detected mentions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Context {
    pub context_id: String,
    pub text: String,
    pub source_doc: String,
    pub mentions: Vec<Mention>,
}

/// A (context, entity, confidence) triple from a prior entity-linking pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkAnnotation {
    pub context_id: String,
    pub entity_id: String,
    pub confidence: f64,
}

/// The candidate contexts gathered for one long-tail entity, in ascending
/// `context_id` order. Every member mentions at least one of the entity's
/// surface forms under [`normalize_surface`] matching.
#[derive(Debug, Clone)]
pub struct ContextSet {
    pub entity_id: String,
    pub members: Vec<Context>,
}

impl ContextSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Canonical form used for alias matching: NFC normalization, whitespace
/// runs collapsed to single spaces, then lowercased.
pub fn normalize_surface(s: &str) -> String {
    let nfc: String = s.nfc().collect();
    nfc.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn check_id(path: &Path, line: usize, field: &str, value: &str) -> Result<()> {
    if value.is_empty() {
        return Err(Error::parse(path, line, format!("empty {field}")));
    }
    if value.chars().any(char::is_whitespace) {
        // Run files and qrels are whitespace-delimited, so ids must not
        // contain whitespace.
        return Err(Error::parse(
            path,
            line,
            format!("{field} {value:?} contains whitespace"),
        ));
    }
    Ok(())
}

fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, lineno, e.to_string()))?;
        out.push((lineno, record));
    }
    Ok(out)
}

/// The reference entity catalog, keyed by entity id.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    entities: BTreeMap<String, CatalogEntity>,
}

impl Catalog {
    /// Loads a catalog from a line-delimited record file. Duplicate ids are
    /// an integrity error.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut entities = BTreeMap::new();
        for (lineno, record) in read_records::<CatalogEntity>(path)? {
            check_id(path, lineno, "id", &record.id)?;
            if entities.insert(record.id.clone(), record.clone()).is_some() {
                return Err(Error::Integrity(format!(
                    "duplicate catalog entity id {:?}",
                    record.id
                )));
            }
        }
        Ok(Catalog { entities })
    }

    /// Builds a catalog from records already in memory.
    pub fn from_entities(records: impl IntoIterator<Item = CatalogEntity>) -> Result<Self> {
        let mut entities = BTreeMap::new();
        for record in records {
            if entities.insert(record.id.clone(), record.clone()).is_some() {
                return Err(Error::Integrity(format!(
                    "duplicate catalog entity id {:?}",
                    record.id
                )));
            }
        }
        Ok(Catalog { entities })
    }

    pub fn get(&self, id: &str) -> Option<&CatalogEntity> {
        self.entities.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entities.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// Entities in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &CatalogEntity> {
        self.entities.values()
    }
}

/// All contexts of a corpus, keyed by context id.
#[derive(Debug, Clone, Default)]
pub struct ContextStore {
    contexts: BTreeMap<String, Context>,
}

impl ContextStore {
    /// Loads contexts and validates every mention span against the text.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut contexts = BTreeMap::new();
        for (lineno, record) in read_records::<Context>(path)? {
            check_id(path, lineno, "context_id", &record.context_id)?;
            validate_mentions(&record)
                .map_err(|msg| Error::parse(path, lineno, msg))?;
            if contexts
                .insert(record.context_id.clone(), record.clone())
                .is_some()
            {
                return Err(Error::Integrity(format!(
                    "duplicate context_id {:?}",
                    record.context_id
                )));
            }
        }
        Ok(ContextStore { contexts })
    }

    /// Builds a store from records already in memory, with the same
    /// mention validation as [`ContextStore::load`].
    pub fn from_contexts(records: impl IntoIterator<Item = Context>) -> Result<Self> {
        let mut contexts = BTreeMap::new();
        for record in records {
            validate_mentions(&record).map_err(Error::Integrity)?;
            if contexts
                .insert(record.context_id.clone(), record.clone())
                .is_some()
            {
                return Err(Error::Integrity(format!(
                    "duplicate context_id {:?}",
                    record.context_id
                )));
            }
        }
        Ok(ContextStore { contexts })
    }

    pub fn get(&self, id: &str) -> Option<&Context> {
        self.contexts.get(id)
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    /// Contexts in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &Context> {
        self.contexts.values()
    }
}

fn validate_mentions(ctx: &Context) -> std::result::Result<(), String> {
    let chars: Vec<char> = ctx.text.chars().collect();
    for m in &ctx.mentions {
        if m.char_start >= m.char_end || m.char_end > chars.len() {
            return Err(format!(
                "mention span ({}, {}) out of bounds for text of length {}",
                m.char_start,
                m.char_end,
                chars.len()
            ));
        }
        let span: String = chars[m.char_start..m.char_end].iter().collect();
        if span != m.surface_string {
            return Err(format!(
                "mention surface {:?} does not match span text {:?}",
                m.surface_string, span
            ));
        }
    }
    Ok(())
}

/// Entity-link annotations retained at a confidence threshold.
///
/// Duplicate (context, entity) pairs keep the maximum confidence.
#[derive(Debug, Clone)]
pub struct AnnotationStore {
    theta: f64,
    /// entity id -> context id -> confidence
    by_entity: BTreeMap<String, BTreeMap<String, f64>>,
    /// context id -> entity id -> confidence
    by_context: BTreeMap<String, BTreeMap<String, f64>>,
}

impl AnnotationStore {
    /// Loads annotations, keeping only those with confidence >= `theta`.
    pub fn load(path: impl AsRef<Path>, theta: f64) -> Result<Self> {
        let path = path.as_ref();
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Usage(format!(
                "theta must be in [0, 1], got {theta}"
            )));
        }
        let mut store = AnnotationStore {
            theta,
            by_entity: BTreeMap::new(),
            by_context: BTreeMap::new(),
        };
        for (lineno, record) in read_records::<LinkAnnotation>(path)? {
            check_id(path, lineno, "context_id", &record.context_id)?;
            check_id(path, lineno, "entity_id", &record.entity_id)?;
            if !(0.0..=1.0).contains(&record.confidence) {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("confidence {} outside [0, 1]", record.confidence),
                ));
            }
            if record.confidence < theta {
                continue;
            }
            store.insert(record);
        }
        Ok(store)
    }

    /// Builds a store from annotations already in memory.
    pub fn from_annotations(
        records: impl IntoIterator<Item = LinkAnnotation>,
        theta: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Usage(format!(
                "theta must be in [0, 1], got {theta}"
            )));
        }
        let mut store = AnnotationStore {
            theta,
            by_entity: BTreeMap::new(),
            by_context: BTreeMap::new(),
        };
        for record in records {
            if !(0.0..=1.0).contains(&record.confidence) {
                return Err(Error::Integrity(format!(
                    "confidence {} outside [0, 1]",
                    record.confidence
                )));
            }
            if record.confidence >= theta {
                store.insert(record);
            }
        }
        Ok(store)
    }

    fn insert(&mut self, ann: LinkAnnotation) {
        let slot = self
            .by_entity
            .entry(ann.entity_id.clone())
            .or_default()
            .entry(ann.context_id.clone())
            .or_insert(f64::MIN);
        if ann.confidence > *slot {
            *slot = ann.confidence;
        }
        let slot = self
            .by_context
            .entry(ann.context_id)
            .or_default()
            .entry(ann.entity_id)
            .or_insert(f64::MIN);
        if ann.confidence > *slot {
            *slot = ann.confidence;
        }
    }

    /// The threshold the store was loaded with.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Retained (context, confidence) pairs for contexts linked to `entity_id`,
    /// ordered by descending confidence, ties by ascending context id.
    pub fn contexts_linked_to(&self, entity_id: &str) -> Vec<(&str, f64)> {
        let mut out: Vec<(&str, f64)> = self
            .by_entity
            .get(entity_id)
            .map(|m| m.iter().map(|(c, &conf)| (c.as_str(), conf)).collect())
            .unwrap_or_default();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        out
    }

    /// Retained (entity, confidence) pairs for annotations on `context_id`,
    /// in ascending entity id order.
    pub fn annotations_on(&self, context_id: &str) -> Vec<(&str, f64)> {
        self.by_context
            .get(context_id)
            .map(|m| m.iter().map(|(e, &conf)| (e.as_str(), conf)).collect())
            .unwrap_or_default()
    }

    /// Confidence of the (context, entity) link, if retained.
    pub fn confidence(&self, context_id: &str, entity_id: &str) -> Option<f64> {
        self.by_context
            .get(context_id)
            .and_then(|m| m.get(entity_id))
            .copied()
    }

    /// Number of retained (context, entity) pairs.
    pub fn len(&self) -> usize {
        self.by_context.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_context.is_empty()
    }
}

/// Loads long-tail entity queries. Each record must have a non-empty id,
/// description and surface form set.
pub fn load_entities(path: impl AsRef<Path>) -> Result<Vec<EntityQuery>> {
    let path = path.as_ref();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (lineno, record) in read_records::<EntityQuery>(path)? {
        check_id(path, lineno, "id", &record.id)?;
        if record.description.is_empty() {
            return Err(Error::parse(path, lineno, "empty description"));
        }
        if record.surface_forms.is_empty() {
            return Err(Error::parse(path, lineno, "empty surface_forms"));
        }
        if !seen.insert(record.id.clone()) {
            return Err(Error::Integrity(format!(
                "duplicate entity id {:?}",
                record.id
            )));
        }
        out.push(record);
    }
    Ok(out)
}

/// Gathers every context whose mentions include a surface form of `entity`,
/// in ascending context id order, truncated to the first `cap` matches.
pub fn gather_candidate_contexts(
    entity: &EntityQuery,
    store: &ContextStore,
    cap: usize,
) -> ContextSet {
    let aliases: BTreeSet<String> = entity
        .surface_forms
        .iter()
        .map(|s| normalize_surface(s))
        .collect();
    let mut members = Vec::new();
    for ctx in store.iter() {
        if members.len() >= cap {
            break;
        }
        let hit = ctx
            .mentions
            .iter()
            .any(|m| aliases.contains(&normalize_surface(&m.surface_string)));
        if hit {
            members.push(ctx.clone());
        }
    }
    ContextSet {
        entity_id: entity.id.clone(),
        members,
    }
}
