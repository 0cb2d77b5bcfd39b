//! The three-stage generative ranking model.
//!
//! A long-tail entity is scored against its candidate contexts by combining
//! three components: a ranking of support entities from the catalog, a
//! selection of support contexts per support entity from link annotations,
//! and a context-to-context relevance score. The final context score is
//!
//! ```text
//! P(c|e) = sum over support entities  P(entity | e)
//!        * sum over support contexts  P(context~ | entity)
//!        * ccr(c, context~) / sum over c' of ccr(c', context~)
//! ```
//!
//! Every inner normalization is a probability distribution, so the total
//! candidate mass is 1 unless a support entity has no usable contexts or a
//! support context scores zero against every candidate; the mass those
//! cases lose is reported in the diagnostics rather than re-normalized
//! away.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::{Catalog, ContextSet, ContextStore, EntityQuery};
use crate::data::{gather_candidate_contexts, AnnotationStore};
use crate::embedding::{cosine, ContextVector, EmbeddingTable};
use crate::error::{Error, Result};
use crate::index::{analyze, bm25_search, Bm25Params, InvertedIndex};

/// How support entities are ranked against the entity description.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SerVariant {
    /// Retrieval score of the description against catalog opening text.
    Basic,
    /// Basic score multiplied by the support entity's inlink count.
    Pop,
    /// Basic, keeping only entities sharing a type label with the query.
    Types,
}

impl SerVariant {
    pub fn name(&self) -> &'static str {
        match self {
            SerVariant::Basic => "basic",
            SerVariant::Pop => "pop",
            SerVariant::Types => "types",
        }
    }
}

/// How a candidate context is scored against a support context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CcrVariant {
    /// BM25 score of the candidate for the support context as query.
    Retrieval,
    /// Cosine similarity of averaged word vectors, clamped at zero.
    Semantic,
}

impl CcrVariant {
    pub fn name(&self) -> &'static str {
        match self {
            CcrVariant::Retrieval => "retrieval",
            CcrVariant::Semantic => "semantic",
        }
    }
}

/// Support entities are retrieved up to this depth before the cutoff
/// `support_entity_cutoff` is applied.
pub const SUPPORT_RETRIEVAL_DEPTH: usize = 200;

/// One full configuration of the ranking model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub ser_variant: SerVariant,
    /// N: how many support entities to keep.
    pub support_entity_cutoff: usize,
    /// M: how many support contexts to keep per support entity.
    pub support_context_cutoff: usize,
    pub ccr_variant: CcrVariant,
    /// Link-confidence threshold for support contexts.
    pub theta: f64,
    pub bm25: Bm25Params,
    /// Upper bound on gathered candidate contexts per entity.
    pub candidate_cap: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            ser_variant: SerVariant::Basic,
            support_entity_cutoff: 50,
            support_context_cutoff: 50,
            ccr_variant: CcrVariant::Semantic,
            theta: 0.9,
            bm25: Bm25Params::default(),
            candidate_cap: 5000,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.support_entity_cutoff == 0 {
            return Err(Error::Usage("support entity cutoff must be >= 1".into()));
        }
        if self.support_context_cutoff == 0 {
            return Err(Error::Usage("support context cutoff must be >= 1".into()));
        }
        if self.candidate_cap == 0 {
            return Err(Error::Usage("candidate cap must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Usage(format!(
                "theta must be in [0, 1], got {}",
                self.theta
            )));
        }
        self.bm25.validate()
    }

    /// Canonical run tag, e.g. `basic-n50-m50-semantic`.
    pub fn tag(&self) -> String {
        format!(
            "{}-n{}-m{}-{}",
            self.ser_variant.name(),
            self.support_entity_cutoff,
            self.support_context_cutoff,
            self.ccr_variant.name()
        )
    }

    /// All 24 configurations spanned by the variant and cutoff grid.
    pub fn grid(theta: f64, bm25: Bm25Params, candidate_cap: usize) -> Vec<PipelineConfig> {
        let mut out = Vec::new();
        for ser in [SerVariant::Basic, SerVariant::Pop, SerVariant::Types] {
            for n in [50, 100] {
                for m in [50, 100] {
                    for ccr in [CcrVariant::Retrieval, CcrVariant::Semantic] {
                        out.push(PipelineConfig {
                            ser_variant: ser,
                            support_entity_cutoff: n,
                            support_context_cutoff: m,
                            ccr_variant: ccr,
                            theta,
                            bm25,
                            candidate_cap,
                        });
                    }
                }
            }
        }
        out
    }
}

/// One ranked support entity.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportEntity {
    pub entity_id: String,
    pub raw_score: f64,
    pub probability: f64,
}

/// Ranked support entities with normalized probabilities.
#[derive(Debug, Clone, Default)]
pub struct SupportEntityRanking {
    pub entries: Vec<SupportEntity>,
}

impl SupportEntityRanking {
    /// Sorts by descending raw score (ties by ascending id) and normalizes
    /// the scores into probabilities. When every raw score is zero the
    /// probabilities are all zero.
    pub fn from_raw_scores(scores: Vec<(String, f64)>) -> Self {
        let mut entries: Vec<SupportEntity> = scores
            .into_iter()
            .map(|(entity_id, raw_score)| SupportEntity {
                entity_id,
                raw_score,
                probability: 0.0,
            })
            .collect();
        entries.sort_by(|a, b| {
            b.raw_score
                .total_cmp(&a.raw_score)
                .then_with(|| a.entity_id.cmp(&b.entity_id))
        });
        let total: f64 = entries.iter().map(|e| e.raw_score).sum();
        if total > 0.0 {
            for e in &mut entries {
                e.probability = e.raw_score / total;
            }
        }
        SupportEntityRanking { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// One selected support context for a support entity.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportContext {
    pub context_id: String,
    pub confidence: f64,
    pub probability: f64,
}

/// Per-entity support context selections and their union.
#[derive(Debug, Clone, Default)]
pub struct SupportContextSet {
    /// Support entity id -> its selected contexts, descending confidence.
    /// Entities with no retained annotations are absent.
    pub per_entity: BTreeMap<String, Vec<SupportContext>>,
    /// Distinct support context ids across all support entities.
    pub union: BTreeSet<String>,
}

impl SupportContextSet {
    pub fn is_empty(&self) -> bool {
        self.per_entity.is_empty()
    }
}

/// Ranks support entities for `entity` over the catalog index.
///
/// The index must be built over catalog opening text with the crate
/// analyzer. Up to [`SUPPORT_RETRIEVAL_DEPTH`] entities are retrieved,
/// the variant transformation is applied, and the result is truncated to
/// the configured cutoff before normalization.
pub fn rank_support_entities(
    entity: &EntityQuery,
    catalog_index: &InvertedIndex,
    catalog: &Catalog,
    cfg: &PipelineConfig,
) -> Result<SupportEntityRanking> {
    let query = analyze(&entity.description);
    let hits = bm25_search(catalog_index, &query, cfg.bm25, SUPPORT_RETRIEVAL_DEPTH);

    let mut scored: Vec<(String, f64)> = Vec::with_capacity(hits.len());
    for (id, score) in hits {
        let record = catalog.get(&id).ok_or_else(|| {
            Error::Integrity(format!("indexed entity {id:?} missing from catalog"))
        })?;
        match cfg.ser_variant {
            SerVariant::Basic => scored.push((id, score)),
            SerVariant::Pop => scored.push((id, score * record.inlink_count as f64)),
            SerVariant::Types => {
                let label = entity.entity_type.label();
                if record.types.iter().any(|t| t == label) {
                    scored.push((id, score));
                }
            }
        }
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(cfg.support_entity_cutoff);
    Ok(SupportEntityRanking::from_raw_scores(scored))
}

/// Selects up to M support contexts per ranked support entity, ordered by
/// descending link confidence (ties by ascending context id), and
/// normalizes the confidences per entity. Entities with no retained
/// annotations at the configured threshold are skipped.
pub fn select_support_contexts(
    ranking: &SupportEntityRanking,
    annotations: &AnnotationStore,
    cfg: &PipelineConfig,
) -> SupportContextSet {
    let mut set = SupportContextSet::default();
    for entry in &ranking.entries {
        let linked = annotations.contexts_linked_to(&entry.entity_id);
        let selected: Vec<(&str, f64)> = linked
            .into_iter()
            .filter(|(_, conf)| *conf >= cfg.theta)
            .take(cfg.support_context_cutoff)
            .collect();
        if selected.is_empty() {
            continue;
        }
        let total: f64 = selected.iter().map(|(_, c)| c).sum();
        let contexts: Vec<SupportContext> = selected
            .into_iter()
            .map(|(id, confidence)| SupportContext {
                context_id: id.to_string(),
                confidence,
                probability: if total > 0.0 { confidence / total } else { 0.0 },
            })
            .collect();
        for c in &contexts {
            set.union.insert(c.context_id.clone());
        }
        set.per_entity.insert(entry.entity_id.clone(), contexts);
    }
    set
}

/// Context-to-context scorer over a fixed candidate set.
///
/// Scores are parallel to `candidates.members`; every score is >= 0.
pub enum CcrScorer<'a> {
    Retrieval {
        index: InvertedIndex,
        params: Bm25Params,
        position: HashMap<String, usize>,
    },
    Semantic {
        table: &'a EmbeddingTable,
        candidate_vectors: Vec<ContextVector>,
    },
}

impl<'a> CcrScorer<'a> {
    /// Builds the scorer for a candidate set. Retrieval mode indexes
    /// exactly the candidates; semantic mode precomputes their vectors.
    pub fn new(
        candidates: &ContextSet,
        cfg: &PipelineConfig,
        table: Option<&'a EmbeddingTable>,
    ) -> Result<Self> {
        match cfg.ccr_variant {
            CcrVariant::Retrieval => {
                let index = InvertedIndex::build(
                    candidates
                        .members
                        .iter()
                        .map(|c| (c.context_id.clone(), c.text.as_str())),
                )?;
                let position = candidates
                    .members
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c.context_id.clone(), i))
                    .collect();
                Ok(CcrScorer::Retrieval {
                    index,
                    params: cfg.bm25,
                    position,
                })
            }
            CcrVariant::Semantic => {
                let table = table.ok_or_else(|| {
                    Error::Usage("semantic ccr requires an embedding table".into())
                })?;
                let candidate_vectors = candidates
                    .members
                    .iter()
                    .map(|c| table.context_vector(&analyze(&c.text)))
                    .collect();
                Ok(CcrScorer::Semantic {
                    table,
                    candidate_vectors,
                })
            }
        }
    }

    /// Raw relevance of every candidate for one support context, parallel
    /// to the candidate set this scorer was built over.
    pub fn scores(&self, support_text: &str, candidate_count: usize) -> Vec<f64> {
        match self {
            CcrScorer::Retrieval {
                index,
                params,
                position,
            } => {
                let mut out = vec![0.0; candidate_count];
                let query = analyze(support_text);
                for (id, score) in bm25_search(index, &query, *params, usize::MAX) {
                    if let Some(&pos) = position.get(&id) {
                        out[pos] = score;
                    }
                }
                out
            }
            CcrScorer::Semantic {
                table,
                candidate_vectors,
            } => {
                let support_vector = table.context_vector(&analyze(support_text));
                candidate_vectors
                    .iter()
                    .map(|v| {
                        cosine(v, &support_vector)
                            .expect("vectors from one table share a dimension")
                            .max(0.0)
                    })
                    .collect()
            }
        }
    }
}

/// Per-entity scoring diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineDiagnostics {
    /// Support entities in the truncated ranking.
    pub support_entities_ranked: usize,
    /// Support entities that contributed at least one support context.
    pub support_entities_used: usize,
    /// Ranked support entities with no retained annotations.
    pub support_entities_skipped: usize,
    /// Distinct support contexts across all support entities.
    pub support_context_union: usize,
    /// Distinct support contexts scoring zero against every candidate.
    pub zero_denominator_contexts: usize,
    /// Probability mass lost to skipped entities and zero denominators.
    pub lost_mass: f64,
    /// True when no support information was available at all.
    pub empty_support: bool,
}

/// One scored candidate context.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedContext {
    pub context_id: String,
    pub score: f64,
}

/// Ordered scored contexts for one entity under one configuration.
#[derive(Debug, Clone)]
pub struct ContextRanking {
    pub entity_id: String,
    pub tag: String,
    pub entries: Vec<RankedContext>,
    pub diagnostics: Option<PipelineDiagnostics>,
}

/// Borrowed handles to everything the pipeline reads.
#[derive(Clone, Copy)]
pub struct Stores<'a> {
    pub catalog: &'a Catalog,
    pub catalog_index: &'a InvertedIndex,
    pub contexts: &'a ContextStore,
    pub annotations: &'a AnnotationStore,
    pub embeddings: Option<&'a EmbeddingTable>,
}

/// Combines a support entity ranking and support context selection into a
/// final candidate ranking using the given context-to-context scorer.
///
/// Support context texts are looked up in `contexts`; a support context id
/// absent from the store is an integrity error.
pub fn combine_support(
    entity_id: &str,
    tag: &str,
    candidates: &ContextSet,
    ranking: &SupportEntityRanking,
    support: &SupportContextSet,
    scorer: &CcrScorer,
    contexts: &ContextStore,
) -> Result<ContextRanking> {
    let n = candidates.members.len();
    let mut acc = vec![0.0f64; n];

    // ccr normalizations depend only on the support context, so they are
    // computed once per distinct id even when it supports several entities.
    let mut normalized: BTreeMap<&str, Option<Vec<f64>>> = BTreeMap::new();
    for id in &support.union {
        let ctx = contexts.get(id).ok_or_else(|| {
            Error::Integrity(format!("support context {id:?} missing from context store"))
        })?;
        let raw = scorer.scores(&ctx.text, n);
        let denom: f64 = raw.iter().sum();
        let entry = if denom > 0.0 {
            Some(raw.into_iter().map(|s| s / denom).collect())
        } else {
            None
        };
        normalized.insert(id.as_str(), entry);
    }

    let mut delivered = 0.0f64;
    let mut used = 0usize;
    for entry in &ranking.entries {
        let Some(selected) = support.per_entity.get(&entry.entity_id) else {
            continue;
        };
        used += 1;
        for sc in selected {
            match normalized
                .get(sc.context_id.as_str())
                .expect("selected support contexts are in the union")
            {
                Some(weights) => {
                    let w = entry.probability * sc.probability;
                    delivered += w;
                    for (a, x) in acc.iter_mut().zip(weights) {
                        *a += w * x;
                    }
                }
                None => {}
            }
        }
    }

    let zero_denominators = normalized.values().filter(|v| v.is_none()).count();
    let diagnostics = PipelineDiagnostics {
        support_entities_ranked: ranking.len(),
        support_entities_used: used,
        support_entities_skipped: ranking.len() - used,
        support_context_union: support.union.len(),
        zero_denominator_contexts: zero_denominators,
        lost_mass: 1.0 - delivered,
        empty_support: ranking.is_empty() || support.is_empty(),
    };

    let mut entries: Vec<RankedContext> = candidates
        .members
        .iter()
        .zip(acc)
        .map(|(c, score)| RankedContext {
            context_id: c.context_id.clone(),
            score,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.context_id.cmp(&b.context_id))
    });

    Ok(ContextRanking {
        entity_id: entity_id.to_string(),
        tag: tag.to_string(),
        entries,
        diagnostics: Some(diagnostics),
    })
}

/// Scores a gathered candidate set for one entity under one configuration.
pub fn score_contexts(
    entity: &EntityQuery,
    candidates: &ContextSet,
    stores: Stores<'_>,
    cfg: &PipelineConfig,
) -> Result<ContextRanking> {
    cfg.validate()?;
    let ranking = rank_support_entities(entity, stores.catalog_index, stores.catalog, cfg)?;
    let support = select_support_contexts(&ranking, stores.annotations, cfg);
    let scorer = CcrScorer::new(candidates, cfg, stores.embeddings)?;
    combine_support(
        &entity.id,
        &cfg.tag(),
        candidates,
        &ranking,
        &support,
        &scorer,
        stores.contexts,
    )
}

/// Gathers candidates for `entity` and scores them.
pub fn rank_entity(
    entity: &EntityQuery,
    stores: Stores<'_>,
    cfg: &PipelineConfig,
) -> Result<ContextRanking> {
    let candidates = gather_candidate_contexts(entity, stores.contexts, cfg.candidate_cap);
    score_contexts(entity, &candidates, stores, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CatalogEntity, Context, EntityType, LinkAnnotation, Mention};

    fn ctx(id: &str, text: &str) -> Context {
        Context {
            context_id: id.into(),
            text: text.into(),
            source_doc: "doc".into(),
            mentions: Vec::new(),
        }
    }

    fn ctx_with_mention(id: &str, text: &str, surface: &str) -> Context {
        let start = text
            .find(surface)
            .map(|byte| text[..byte].chars().count())
            .unwrap();
        Context {
            context_id: id.into(),
            text: text.into(),
            source_doc: "doc".into(),
            mentions: vec![Mention {
                char_start: start,
                char_end: start + surface.chars().count(),
                surface_string: surface.into(),
            }],
        }
    }

    fn entity(id: &str, desc: &str, ty: EntityType) -> EntityQuery {
        EntityQuery {
            id: id.into(),
            description: desc.into(),
            entity_type: ty,
            surface_forms: vec![id.into()],
        }
    }

    fn cat(id: &str, text: &str, types: &[&str], inlinks: u64) -> CatalogEntity {
        CatalogEntity {
            id: id.into(),
            opening_text: text.into(),
            types: types.iter().map(|s| s.to_string()).collect(),
            inlink_count: inlinks,
            surface_forms: vec![id.into()],
        }
    }

    #[test]
    fn normalization_of_raw_scores() {
        let r = SupportEntityRanking::from_raw_scores(vec![
            ("b".into(), 1.0),
            ("a".into(), 2.0),
            ("c".into(), 1.0),
        ]);
        let probs: Vec<f64> = r.entries.iter().map(|e| e.probability).collect();
        assert_eq!(probs, vec![0.5, 0.25, 0.25]);
        // descending raw, ties ascending id
        let ids: Vec<&str> = r.entries.iter().map(|e| e.entity_id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b", "c"]);
    }

    #[test]
    fn all_zero_raw_scores_normalize_to_zero() {
        let r = SupportEntityRanking::from_raw_scores(vec![("a".into(), 0.0), ("b".into(), 0.0)]);
        assert!(r.entries.iter().all(|e| e.probability == 0.0));
    }

    fn small_catalog() -> Catalog {
        Catalog::from_entities(vec![
            cat("fund_a", "venture capital fund for startups", &["Organization"], 10),
            cat("fund_b", "seed capital fund", &["Organization", "Company"], 0),
            cat("film_x", "drama film festival winner", &["Film"], 100),
        ])
        .unwrap()
    }

    fn catalog_index(catalog: &Catalog) -> InvertedIndex {
        InvertedIndex::build(
            catalog
                .iter()
                .map(|e| (e.id.clone(), e.opening_text.as_str())),
        )
        .unwrap()
    }

    #[test]
    fn ser_variants() {
        let catalog = small_catalog();
        let index = catalog_index(&catalog);
        let e = entity("q", "venture capital fund", EntityType::Organization);

        let basic = rank_support_entities(&e, &index, &catalog, &PipelineConfig::default()).unwrap();
        assert_eq!(basic.entries[0].entity_id, "fund_a");
        assert!(basic.entries.iter().all(|x| x.raw_score >= 0.0));
        let total: f64 = basic.entries.iter().map(|x| x.probability).sum();
        assert!((total - 1.0).abs() < 1e-9);

        let pop_cfg = PipelineConfig {
            ser_variant: SerVariant::Pop,
            ..PipelineConfig::default()
        };
        let pop = rank_support_entities(&e, &index, &catalog, &pop_cfg).unwrap();
        // fund_b has zero inlinks: retained with zero probability.
        let fund_b = pop
            .entries
            .iter()
            .find(|x| x.entity_id == "fund_b")
            .unwrap();
        assert_eq!(fund_b.raw_score, 0.0);
        assert_eq!(fund_b.probability, 0.0);
        let basic_a = basic.entries.iter().find(|x| x.entity_id == "fund_a").unwrap();
        let pop_a = pop.entries.iter().find(|x| x.entity_id == "fund_a").unwrap();
        assert!((pop_a.raw_score - basic_a.raw_score * 10.0).abs() < 1e-12);

        let types_cfg = PipelineConfig {
            ser_variant: SerVariant::Types,
            ..PipelineConfig::default()
        };
        let e_film_terms = entity("q2", "capital fund film festival", EntityType::Organization);
        let types = rank_support_entities(&e_film_terms, &index, &catalog, &types_cfg).unwrap();
        assert!(types.entries.iter().all(|x| x.entity_id != "film_x"));
        assert!(types.entries.iter().any(|x| x.entity_id == "fund_a"));
    }

    #[test]
    fn truncation_applies_before_normalization() {
        let catalog = small_catalog();
        let index = catalog_index(&catalog);
        let e = entity("q", "venture capital fund", EntityType::Organization);
        let cfg = PipelineConfig {
            support_entity_cutoff: 1,
            ..PipelineConfig::default()
        };
        let r = rank_support_entities(&e, &index, &catalog, &cfg).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r.entries[0].probability - 1.0).abs() < 1e-12);
    }

    #[test]
    fn select_normalizes_per_entity() {
        let annotations = AnnotationStore::from_annotations(
            vec![
                LinkAnnotation { context_id: "c1".into(), entity_id: "e1".into(), confidence: 0.95 },
                LinkAnnotation { context_id: "c2".into(), entity_id: "e1".into(), confidence: 0.92 },
                LinkAnnotation { context_id: "c3".into(), entity_id: "e2".into(), confidence: 0.91 },
            ],
            0.9,
        )
        .unwrap();
        let ranking = SupportEntityRanking::from_raw_scores(vec![
            ("e1".into(), 2.0),
            ("e2".into(), 1.0),
            ("e3".into(), 1.0),
        ]);
        let cfg = PipelineConfig::default();
        let support = select_support_contexts(&ranking, &annotations, &cfg);

        let e1 = &support.per_entity["e1"];
        assert_eq!(e1.len(), 2);
        assert!((e1[0].probability - 0.95 / 1.87).abs() < 1e-12);
        assert!((e1[1].probability - 0.92 / 1.87).abs() < 1e-12);
        // e3 has no annotations: skipped.
        assert!(!support.per_entity.contains_key("e3"));
        assert_eq!(support.union.len(), 3);
    }

    #[test]
    fn select_truncates_to_cutoff_by_confidence() {
        let anns: Vec<LinkAnnotation> = (0..120)
            .map(|i| LinkAnnotation {
                context_id: format!("c{i:03}"),
                entity_id: "e1".into(),
                confidence: 0.9 + (i as f64) * 0.0005,
            })
            .collect();
        let annotations = AnnotationStore::from_annotations(anns, 0.9).unwrap();
        let ranking = SupportEntityRanking::from_raw_scores(vec![("e1".into(), 1.0)]);
        let cfg = PipelineConfig {
            support_context_cutoff: 100,
            ..PipelineConfig::default()
        };
        let support = select_support_contexts(&ranking, &annotations, &cfg);
        let sel = &support.per_entity["e1"];
        assert_eq!(sel.len(), 100);
        // top by confidence: the highest-index contexts
        assert_eq!(sel[0].context_id, "c119");
        let psum: f64 = sel.iter().map(|c| c.probability).sum();
        assert!((psum - 1.0).abs() < 1e-9);
    }

    fn toy_world() -> (ContextStore, ContextSet) {
        let all = vec![
            ctx("c1", "fund raised capital"),
            ctx("c2", "fund closed a round"),
            ctx("c3", "film premiered at festival"),
            ctx("c4", "fund backs startups"),
            ctx("s1", "capital fund raised money"),
            ctx("s2", "festival film screening"),
        ];
        let store = ContextStore::from_contexts(all.clone()).unwrap();
        let candidates = ContextSet {
            entity_id: "q".into(),
            members: all[..4].to_vec(),
        };
        (store, candidates)
    }

    #[test]
    fn degenerate_support_reduces_to_normalized_ccr() {
        let (store, candidates) = toy_world();
        let ranking = SupportEntityRanking::from_raw_scores(vec![("e1".into(), 3.0)]);
        let mut support = SupportContextSet::default();
        support.per_entity.insert(
            "e1".into(),
            vec![SupportContext {
                context_id: "s1".into(),
                confidence: 0.95,
                probability: 1.0,
            }],
        );
        support.union.insert("s1".into());

        let cfg = PipelineConfig {
            ccr_variant: CcrVariant::Retrieval,
            ..PipelineConfig::default()
        };
        let scorer = CcrScorer::new(&candidates, &cfg, None).unwrap();
        let ranking_out = combine_support(
            "q", "t", &candidates, &ranking, &support, &scorer, &store,
        )
        .unwrap();

        let raw = scorer.scores("capital fund raised money", candidates.len());
        let denom: f64 = raw.iter().sum();
        let mut expected: Vec<(String, f64)> = candidates
            .members
            .iter()
            .zip(&raw)
            .map(|(c, r)| (c.context_id.clone(), r / denom))
            .collect();
        expected.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let got: Vec<(String, f64)> = ranking_out
            .entries
            .iter()
            .map(|e| (e.context_id.clone(), e.score))
            .collect();
        for ((gi, gs), (ei, es)) in got.iter().zip(&expected) {
            assert_eq!(gi, ei);
            assert!((gs - es).abs() < 1e-12);
        }
        let d = ranking_out.diagnostics.unwrap();
        assert!(d.lost_mass.abs() < 1e-12);
        assert_eq!(d.zero_denominator_contexts, 0);
    }

    #[test]
    fn uniform_ccr_spreads_mass_evenly() {
        // All candidates identical, so every ccr normalization is uniform
        // and each of the 4 candidates scores 1/4 whatever the support is.
        let all = vec![
            ctx("c1", "same words here"),
            ctx("c2", "same words here"),
            ctx("c3", "same words here"),
            ctx("c4", "same words here"),
            ctx("s1", "same words here"),
        ];
        let store = ContextStore::from_contexts(all.clone()).unwrap();
        let candidates = ContextSet {
            entity_id: "q".into(),
            members: all[..4].to_vec(),
        };
        let ranking = SupportEntityRanking::from_raw_scores(vec![
            ("e1".into(), 2.0),
            ("e2".into(), 1.0),
        ]);
        let mut support = SupportContextSet::default();
        for e in ["e1", "e2"] {
            support.per_entity.insert(
                e.into(),
                vec![SupportContext {
                    context_id: "s1".into(),
                    confidence: 0.9,
                    probability: 1.0,
                }],
            );
        }
        support.union.insert("s1".into());
        let cfg = PipelineConfig {
            ccr_variant: CcrVariant::Retrieval,
            ..PipelineConfig::default()
        };
        let scorer = CcrScorer::new(&candidates, &cfg, None).unwrap();
        let out = combine_support("q", "t", &candidates, &ranking, &support, &scorer, &store)
            .unwrap();
        for e in &out.entries {
            assert!((e.score - 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_denominator_support_context_contributes_nothing() {
        let (store_base, candidates) = toy_world();
        let mut all: Vec<Context> = store_base.iter().cloned().collect();
        all.push(ctx("s3", "zzz qqq www"));
        let store = ContextStore::from_contexts(all).unwrap();

        let ranking = SupportEntityRanking::from_raw_scores(vec![("e1".into(), 1.0)]);
        let mut support = SupportContextSet::default();
        support.per_entity.insert(
            "e1".into(),
            vec![
                SupportContext { context_id: "s1".into(), confidence: 0.95, probability: 0.5 },
                SupportContext { context_id: "s3".into(), confidence: 0.95, probability: 0.5 },
            ],
        );
        support.union.insert("s1".into());
        support.union.insert("s3".into());

        let cfg = PipelineConfig {
            ccr_variant: CcrVariant::Retrieval,
            ..PipelineConfig::default()
        };
        let scorer = CcrScorer::new(&candidates, &cfg, None).unwrap();
        let out = combine_support("q", "t", &candidates, &ranking, &support, &scorer, &store)
            .unwrap();
        let d = out.diagnostics.unwrap();
        assert_eq!(d.zero_denominator_contexts, 1);
        assert!((d.lost_mass - 0.5).abs() < 1e-12);
        let total: f64 = out.entries.iter().map(|e| e.score).sum();
        assert!((total - 0.5).abs() < 1e-9);
    }

    #[test]
    fn empty_support_yields_all_zero_flagged_ranking() {
        let (store, candidates) = toy_world();
        let ranking = SupportEntityRanking::default();
        let support = SupportContextSet::default();
        let cfg = PipelineConfig {
            ccr_variant: CcrVariant::Retrieval,
            ..PipelineConfig::default()
        };
        let scorer = CcrScorer::new(&candidates, &cfg, None).unwrap();
        let out = combine_support("q", "t", &candidates, &ranking, &support, &scorer, &store)
            .unwrap();
        assert!(out.entries.iter().all(|e| e.score == 0.0));
        let ids: Vec<&str> = out.entries.iter().map(|e| e.context_id.as_str()).collect();
        assert_eq!(ids, vec!["c1", "c2", "c3", "c4"]);
        let d = out.diagnostics.unwrap();
        assert!(d.empty_support);
        assert!((d.lost_mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn candidate_can_also_be_support_context() {
        // No deduplication: a support context that is itself a candidate
        // scores itself highest under retrieval ccr.
        let all = vec![
            ctx_with_mention("c1", "Quni fund raised capital", "Quni"),
            ctx_with_mention("c2", "Quni premiered at the festival", "Quni"),
        ];
        let store = ContextStore::from_contexts(all.clone()).unwrap();
        let candidates = ContextSet { entity_id: "q".into(), members: all };
        let ranking = SupportEntityRanking::from_raw_scores(vec![("e1".into(), 1.0)]);
        let mut support = SupportContextSet::default();
        support.per_entity.insert(
            "e1".into(),
            vec![SupportContext { context_id: "c1".into(), confidence: 0.95, probability: 1.0 }],
        );
        support.union.insert("c1".into());
        let cfg = PipelineConfig {
            ccr_variant: CcrVariant::Retrieval,
            ..PipelineConfig::default()
        };
        let scorer = CcrScorer::new(&candidates, &cfg, None).unwrap();
        let out = combine_support("q", "t", &candidates, &ranking, &support, &scorer, &store)
            .unwrap();
        assert_eq!(out.entries[0].context_id, "c1");
        assert!(out.entries[0].score > out.entries[1].score);
    }

    #[test]
    fn confidence_scaling_leaves_order_unchanged() {
        let (store, candidates) = toy_world();
        let ranking = SupportEntityRanking::from_raw_scores(vec![
            ("e1".into(), 2.0),
            ("e2".into(), 1.0),
        ]);
        let build_support = |alpha: f64| {
            let mut support = SupportContextSet::default();
            let sel: Vec<SupportContext> = [("s1", 0.95 * alpha), ("s2", 0.91 * alpha)]
                .iter()
                .map(|(id, conf)| SupportContext {
                    context_id: id.to_string(),
                    confidence: *conf,
                    probability: 0.0,
                })
                .collect();
            let total: f64 = sel.iter().map(|c| c.confidence).sum();
            let sel = sel
                .into_iter()
                .map(|mut c| {
                    c.probability = c.confidence / total;
                    c
                })
                .collect::<Vec<_>>();
            for c in &sel {
                support.union.insert(c.context_id.clone());
            }
            support.per_entity.insert("e1".into(), sel.clone());
            support.per_entity.insert("e2".into(), sel);
            support
        };
        let cfg = PipelineConfig {
            ccr_variant: CcrVariant::Retrieval,
            ..PipelineConfig::default()
        };
        let scorer = CcrScorer::new(&candidates, &cfg, None).unwrap();
        let base = combine_support(
            "q", "t", &candidates, &ranking, &build_support(1.0), &scorer, &store,
        )
        .unwrap();
        for alpha in [0.1, 3.0, 1000.0] {
            let scaled = combine_support(
                "q", "t", &candidates, &ranking, &build_support(alpha), &scorer, &store,
            )
            .unwrap();
            let base_ids: Vec<&str> = base.entries.iter().map(|e| e.context_id.as_str()).collect();
            let scaled_ids: Vec<&str> =
                scaled.entries.iter().map(|e| e.context_id.as_str()).collect();
            assert_eq!(base_ids, scaled_ids);
        }
    }

    #[test]
    fn tags_encode_configuration() {
        assert_eq!(PipelineConfig::default().tag(), "basic-n50-m50-semantic");
        let grid = PipelineConfig::grid(0.9, Bm25Params::default(), 5000);
        assert_eq!(grid.len(), 24);
        let tags: BTreeSet<String> = grid.iter().map(|c| c.tag()).collect();
        assert_eq!(tags.len(), 24);
        assert!(tags.contains("pop-n100-m50-retrieval"));
    }
}
