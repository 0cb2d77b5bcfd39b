//! Comparison systems: BM25 sentence retrieval over the candidate set and
//! a confidence-thresholded entity-linker ranking.
//!
//! Both cover the whole candidate set so that rankings are comparable
//! under pooled evaluation: candidates the method does not score are
//! appended with score zero in ascending context id order.

use crate::data::{AnnotationStore, ContextSet, EntityQuery};
use crate::error::Result;
use crate::index::{analyze, bm25_search, Bm25Params, InvertedIndex};
use crate::pipeline::{ContextRanking, RankedContext};

fn finish_ranking(entity_id: &str, tag: &str, mut entries: Vec<RankedContext>) -> ContextRanking {
    entries.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.context_id.cmp(&b.context_id))
    });
    ContextRanking {
        entity_id: entity_id.to_string(),
        tag: tag.to_string(),
        entries,
        diagnostics: None,
    }
}

/// Ranks the candidate set by its BM25 score for the entity description,
/// over an index of exactly the candidates.
pub fn sentence_retrieval_baseline(
    entity: &EntityQuery,
    candidates: &ContextSet,
    params: Bm25Params,
    tag: &str,
) -> Result<ContextRanking> {
    params.validate()?;
    let index = InvertedIndex::build(
        candidates
            .members
            .iter()
            .map(|c| (c.context_id.clone(), c.text.as_str())),
    )?;
    let query = analyze(&entity.description);
    let hits = bm25_search(&index, &query, params, usize::MAX);

    let mut entries: Vec<RankedContext> = candidates
        .members
        .iter()
        .map(|c| RankedContext {
            context_id: c.context_id.clone(),
            score: 0.0,
        })
        .collect();
    let position: std::collections::HashMap<&str, usize> = candidates
        .members
        .iter()
        .enumerate()
        .map(|(i, c)| (c.context_id.as_str(), i))
        .collect();
    for (id, score) in hits {
        if let Some(&pos) = position.get(id.as_str()) {
            entries[pos].score = score;
        }
    }
    Ok(finish_ranking(&entity.id, tag, entries))
}

/// Ranks candidates by the confidence with which a prior entity-linking
/// pass linked them to the entity itself, zero below `theta`.
///
/// The annotation store should be loaded unthresholded; this function
/// applies its own threshold. Entities without a catalog identity never
/// appear in the annotations, so their rankings are all zero.
pub fn linker_baseline(
    entity: &EntityQuery,
    candidates: &ContextSet,
    annotations: &AnnotationStore,
    theta: f64,
    tag: &str,
) -> Result<ContextRanking> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(crate::error::Error::Usage(format!(
            "theta must be in [0, 1], got {theta}"
        )));
    }
    let entries: Vec<RankedContext> = candidates
        .members
        .iter()
        .map(|c| {
            let score = annotations
                .confidence(&c.context_id, &entity.id)
                .filter(|conf| *conf >= theta)
                .unwrap_or(0.0);
            RankedContext {
                context_id: c.context_id.clone(),
                score,
            }
        })
        .collect();
    Ok(finish_ranking(&entity.id, tag, entries))
}
