//! Rank-based evaluation: AP/RR and their means, top-k pooling for
//! assessment, qrels handling, and two-tailed paired t-tests.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::trec::RunData;

pub mod stats;

/// Binary relevance judgments: (entity, context) -> {0, 1}.
#[derive(Debug, Clone, Default)]
pub struct Qrels {
    by_entity: BTreeMap<String, BTreeMap<String, u8>>,
}

impl Qrels {
    /// Parses a qrels file: `entity_id 0 context_id rel`, rel in {0, 1}.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut qrels = Qrels::default();
        for (idx, line) in content.lines().enumerate() {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected 4 fields, found {}", fields.len()),
                ));
            }
            let rel: u8 = match fields[3] {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::parse(
                        path,
                        lineno,
                        format!("relevance must be 0 or 1, found {other:?}"),
                    ));
                }
            };
            qrels
                .by_entity
                .entry(fields[0].to_string())
                .or_default()
                .insert(fields[2].to_string(), rel);
        }
        Ok(qrels)
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, String, u8)>) -> Self {
        let mut qrels = Qrels::default();
        for (entity, context, rel) in pairs {
            qrels
                .by_entity
                .entry(entity)
                .or_default()
                .insert(context, rel.min(1));
        }
        qrels
    }

    /// Judged entities in ascending id order.
    pub fn entities(&self) -> impl Iterator<Item = &str> {
        self.by_entity.keys().map(String::as_str)
    }

    pub fn relevance(&self, entity: &str, context: &str) -> Option<u8> {
        self.by_entity.get(entity).and_then(|m| m.get(context)).copied()
    }

    pub fn is_relevant(&self, entity: &str, context: &str) -> bool {
        self.relevance(entity, context) == Some(1)
    }

    /// Number of judged-relevant contexts for the entity.
    pub fn relevant_count(&self, entity: &str) -> usize {
        self.by_entity
            .get(entity)
            .map(|m| m.values().filter(|&&r| r == 1).count())
            .unwrap_or(0)
    }

    pub fn contains_entity(&self, entity: &str) -> bool {
        self.by_entity.contains_key(entity)
    }
}

/// Average precision of a ranking against binary qrels; unjudged contexts
/// count as non-relevant and the denominator is the number of
/// judged-relevant contexts. Zero when nothing is judged relevant.
pub fn average_precision(ranked: &[&str], entity_id: &str, qrels: &Qrels) -> f64 {
    let total_relevant = qrels.relevant_count(entity_id);
    if total_relevant == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, ctx) in ranked.iter().enumerate() {
        if qrels.is_relevant(entity_id, ctx) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / total_relevant as f64
}

/// Reciprocal of the rank of the first relevant context; zero if none.
pub fn reciprocal_rank(ranked: &[&str], entity_id: &str, qrels: &Qrels) -> f64 {
    for (i, ctx) in ranked.iter().enumerate() {
        if qrels.is_relevant(entity_id, ctx) {
            return 1.0 / (i + 1) as f64;
        }
    }
    0.0
}

/// Paired two-tailed Student t-test result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedTTest {
    pub t: f64,
    pub p: f64,
    /// All differences equal but nonzero: sd = 0, reported as the p -> 0
    /// limit.
    pub degenerate_variance: bool,
}

/// Two-tailed paired t-test over equal-length score lists.
///
/// t = mean(d) / (sd(d) / sqrt(n)) with the sample standard deviation;
/// the p value comes from the t distribution with n - 1 degrees of
/// freedom. Identical lists give t = 0, p = 1.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<PairedTTest> {
    if a.len() != b.len() {
        return Err(Error::Usage(format!(
            "paired t-test needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Usage("paired t-test needs at least 2 pairs".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().all(|&d| d == 0.0) {
        return Ok(PairedTTest { t: 0.0, p: 1.0, degenerate_variance: false });
    }
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        return Ok(PairedTTest {
            t: if mean > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY },
            p: 0.0,
            degenerate_variance: true,
        });
    }
    let t = mean / (sd / (n as f64).sqrt());
    let p = stats::student_t_two_tailed_p(t, (n - 1) as f64);
    Ok(PairedTTest { t, p, degenerate_variance: false })
}

/// Union of the top `k` contexts of every run for every entity.
pub fn pool_top_k(runs: &[RunData], k: usize) -> BTreeSet<(String, String)> {
    let mut pool = BTreeSet::new();
    for run in runs {
        for (entity, entries) in &run.entities {
            for entry in entries.iter().take(k) {
                pool.insert((entity.clone(), entry.context_id.clone()));
            }
        }
    }
    pool
}

/// Entity partition for subset reporting (e.g. in-KB vs out-of-KB).
#[derive(Debug, Clone, Default)]
pub struct Partition {
    by_entity: BTreeMap<String, String>,
}

impl Partition {
    /// Parses `entity_id label` lines.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut by_entity = BTreeMap::new();
        for (idx, line) in content.lines().enumerate() {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected 2 fields, found {}", fields.len()),
                ));
            }
            by_entity.insert(fields[0].to_string(), fields[1].to_string());
        }
        Ok(Partition { by_entity })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        Partition { by_entity: pairs.into_iter().collect() }
    }

    pub fn label(&self, entity: &str) -> Option<&str> {
        self.by_entity.get(entity).map(String::as_str)
    }

    /// Distinct labels in ascending order.
    pub fn labels(&self) -> Vec<String> {
        self.by_entity
            .values()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

/// Per-entity metric pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntityScore {
    pub ap: f64,
    pub rr: f64,
}

/// Significance of a run against the reference run in one block.
#[derive(Debug, Clone, Serialize)]
pub struct Significance {
    pub vs: String,
    pub t_map: f64,
    pub p_map: f64,
    pub map_marker: String,
    pub t_mrr: f64,
    pub p_mrr: f64,
    pub mrr_marker: String,
    pub degenerate_variance: bool,
}

/// Aggregates for one run over one entity block.
#[derive(Debug, Clone, Serialize)]
pub struct BlockMetrics {
    pub block: String,
    pub entity_count: usize,
    pub map: f64,
    pub mrr: f64,
    pub significance: Option<Significance>,
}

/// Everything evaluated for one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tag: String,
    pub per_entity: BTreeMap<String, EntityScore>,
    pub blocks: Vec<BlockMetrics>,
}

/// The full evaluation report.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub reference_tag: Option<String>,
    pub block_names: Vec<String>,
    pub runs: Vec<RunReport>,
    pub notes: Vec<String>,
}

/// Marker for a two-tailed p value: `‡` below 0.001, `†` below 0.05.
pub fn significance_marker(p: f64) -> &'static str {
    if p < 0.001 {
        "‡"
    } else if p < 0.05 {
        "†"
    } else {
        ""
    }
}

/// Evaluates runs against qrels, with optional subset blocks and paired
/// significance testing against a reference run.
///
/// The judged entities in the qrels define the evaluation universe: an
/// entity missing from a run scores zero and is flagged in the notes, and
/// run entities without judgments are flagged and ignored. When
/// `reference` is `None` the first run serves as the reference.
pub fn evaluate_runs(
    runs: &[RunData],
    qrels: &Qrels,
    partition: Option<&Partition>,
    reference: Option<&str>,
) -> Result<EvalReport> {
    if runs.is_empty() {
        return Err(Error::Usage("no runs to evaluate".into()));
    }
    let reference_tag = match reference {
        Some(tag) => {
            if !runs.iter().any(|r| r.tag == tag) {
                return Err(Error::Usage(format!(
                    "reference tag {tag:?} does not match any run"
                )));
            }
            Some(tag.to_string())
        }
        None if runs.len() >= 2 => Some(runs[0].tag.clone()),
        None => None,
    };

    let universe: Vec<String> = qrels.entities().map(str::to_string).collect();
    let mut notes: Vec<String> = Vec::new();
    for entity in &universe {
        if qrels.relevant_count(entity) == 0 {
            notes.push(format!("entity {entity} has no relevant judgments; AP = 0"));
        }
    }

    // Block name -> member entities, in report order.
    let mut blocks: Vec<(String, Vec<String>)> = vec![("All".to_string(), universe.clone())];
    if let Some(partition) = partition {
        for label in partition.labels() {
            let members: Vec<String> = universe
                .iter()
                .filter(|e| partition.label(e) == Some(label.as_str()))
                .cloned()
                .collect();
            blocks.push((label, members));
        }
        for entity in &universe {
            if partition.label(entity).is_none() {
                notes.push(format!("entity {entity} missing from the subset file"));
            }
        }
    }

    // Per-run per-entity scores over the universe.
    let mut scored: Vec<RunReport> = Vec::with_capacity(runs.len());
    for run in runs {
        let mut per_entity = BTreeMap::new();
        for entity in &universe {
            let entry = match run.ranking(entity) {
                Some(entries) => {
                    let ranked: Vec<&str> =
                        entries.iter().map(|e| e.context_id.as_str()).collect();
                    EntityScore {
                        ap: average_precision(&ranked, entity, qrels),
                        rr: reciprocal_rank(&ranked, entity, qrels),
                    }
                }
                None => {
                    notes.push(format!(
                        "run {} is missing entity {entity}; scored 0",
                        run.tag
                    ));
                    EntityScore { ap: 0.0, rr: 0.0 }
                }
            };
            per_entity.insert(entity.clone(), entry);
        }
        for entity in run.entities.keys() {
            if !qrels.contains_entity(entity) {
                notes.push(format!(
                    "run {} entity {entity} has no judgments; ignored",
                    run.tag
                ));
            }
        }
        scored.push(RunReport {
            tag: run.tag.clone(),
            per_entity,
            blocks: Vec::new(),
        });
    }

    let reference_scores: Option<BTreeMap<String, EntityScore>> = reference_tag
        .as_ref()
        .and_then(|tag| scored.iter().find(|r| &r.tag == tag))
        .map(|r| r.per_entity.clone());

    for report in &mut scored {
        for (block, members) in &blocks {
            let n = members.len();
            let (map, mrr) = if n == 0 {
                (0.0, 0.0)
            } else {
                let ap_sum: f64 = members.iter().map(|e| report.per_entity[e].ap).sum();
                let rr_sum: f64 = members.iter().map(|e| report.per_entity[e].rr).sum();
                (ap_sum / n as f64, rr_sum / n as f64)
            };
            let significance = match (&reference_tag, &reference_scores) {
                (Some(tag), Some(ref_scores)) if tag != &report.tag && n >= 2 => {
                    let a_ap: Vec<f64> = members.iter().map(|e| report.per_entity[e].ap).collect();
                    let b_ap: Vec<f64> = members.iter().map(|e| ref_scores[e].ap).collect();
                    let a_rr: Vec<f64> = members.iter().map(|e| report.per_entity[e].rr).collect();
                    let b_rr: Vec<f64> = members.iter().map(|e| ref_scores[e].rr).collect();
                    let map_test = paired_ttest(&a_ap, &b_ap)?;
                    let mrr_test = paired_ttest(&a_rr, &b_rr)?;
                    Some(Significance {
                        vs: tag.clone(),
                        t_map: map_test.t,
                        p_map: map_test.p,
                        map_marker: significance_marker(map_test.p).to_string(),
                        t_mrr: mrr_test.t,
                        p_mrr: mrr_test.p,
                        mrr_marker: significance_marker(mrr_test.p).to_string(),
                        degenerate_variance: map_test.degenerate_variance
                            || mrr_test.degenerate_variance,
                    })
                }
                _ => None,
            };
            report.blocks.push(BlockMetrics {
                block: block.clone(),
                entity_count: n,
                map,
                mrr,
                significance,
            });
        }
    }

    notes.sort();
    notes.dedup();
    Ok(EvalReport {
        reference_tag,
        block_names: blocks.into_iter().map(|(name, _)| name).collect(),
        runs: scored,
        notes,
    })
}

/// Renders the report as an aligned plain-text table: one row per run,
/// MAP/MRR columns per block, significance markers attached to values.
pub fn render_text(report: &EvalReport) -> String {
    let tag_width = report
        .runs
        .iter()
        .map(|r| r.tag.len())
        .chain(["run".len()])
        .max()
        .unwrap_or(3);

    let fmt_value = |value: f64, marker: &str| format!("{value:.4}{marker}");

    // Collect cell text first so columns can be sized.
    let mut rows: Vec<Vec<String>> = Vec::new();
    for run in &report.runs {
        let mut cells = Vec::new();
        for block in &run.blocks {
            let (m1, m2) = match &block.significance {
                Some(s) => (s.map_marker.clone(), s.mrr_marker.clone()),
                None => (String::new(), String::new()),
            };
            cells.push(fmt_value(block.map, &m1));
            cells.push(fmt_value(block.mrr, &m2));
        }
        rows.push(cells);
    }
    let col_count = report.block_names.len() * 2;
    let mut widths = vec!["MAP".len(); col_count];
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }

    let mut out = String::new();
    // Block header row.
    out.push_str(&format!("{:<tag_width$}", ""));
    for (b, name) in report.block_names.iter().enumerate() {
        let span = widths[2 * b] + widths[2 * b + 1] + 2;
        let counted = report
            .runs
            .first()
            .map(|r| format!("{} (n={})", name, r.blocks[b].entity_count))
            .unwrap_or_else(|| name.clone());
        out.push_str(&format!("  | {counted:<span$}"));
    }
    out.push('\n');
    // Metric header row.
    out.push_str(&format!("{:<tag_width$}", "run"));
    for b in 0..report.block_names.len() {
        out.push_str(&format!(
            "  | {:<w1$}  {:<w2$}",
            "MAP",
            "MRR",
            w1 = widths[2 * b],
            w2 = widths[2 * b + 1]
        ));
    }
    out.push('\n');
    for (run, cells) in report.runs.iter().zip(&rows) {
        out.push_str(&format!("{:<tag_width$}", run.tag));
        for b in 0..report.block_names.len() {
            out.push_str(&format!(
                "  | {:<w1$}  {:<w2$}",
                cells[2 * b],
                cells[2 * b + 1],
                w1 = widths[2 * b],
                w2 = widths[2 * b + 1]
            ));
        }
        out.push('\n');
    }
    if let Some(tag) = &report.reference_tag {
        out.push_str(&format!(
            "significance vs {tag}: \u{2020} p<0.05, \u{2021} p<0.001\n"
        ));
    }
    if !report.notes.is_empty() {
        out.push_str("notes:\n");
        for note in &report.notes {
            out.push_str(&format!("  - {note}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trec::RunEntry;

    fn qrels() -> Qrels {
        Qrels::from_pairs(vec![
            ("e1".into(), "c1".into(), 1),
            ("e1".into(), "c2".into(), 0),
            ("e1".into(), "c3".into(), 1),
            ("e2".into(), "c4".into(), 1),
        ])
    }

    #[test]
    fn ap_worked_examples() {
        let q = qrels();
        // relevant at ranks 1 and 3, R = 2 -> (1 + 2/3) / 2 = 5/6
        let ap = average_precision(&["c1", "c2", "c3"], "e1", &q);
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);
        // nothing relevant retrieved
        assert_eq!(average_precision(&["c2"], "e1", &q), 0.0);
        // all top-R relevant
        assert_eq!(average_precision(&["c1", "c3", "c2"], "e1", &q), 1.0);
        // R = 0
        let empty = Qrels::from_pairs(vec![("e1".into(), "c1".into(), 0)]);
        assert_eq!(average_precision(&["c1"], "e1", &empty), 0.0);
    }

    #[test]
    fn rr_worked_examples() {
        let q = qrels();
        assert_eq!(reciprocal_rank(&["c2", "c1"], "e1", &q), 0.5);
        assert_eq!(reciprocal_rank(&["c1", "c2"], "e1", &q), 1.0);
        assert_eq!(reciprocal_rank(&["c2"], "e1", &q), 0.0);
    }

    // Expected t and p computed independently from the textbook formula
    // and a reference t CDF before this module was written.
    #[test]
    fn ttest_matches_independent_oracle() {
        let a = [0.60, 0.55, 0.70, 0.45, 0.80];
        let b = [0.50, 0.52, 0.61, 0.46, 0.70];
        let r = paired_ttest(&a, &b).unwrap();
        assert!((r.t - 2.789_511_878_128_255).abs() < 1e-6);
        assert!((r.p - 0.049_336_631_830_897_15).abs() < 1e-6);
        assert!(!r.degenerate_variance);
    }

    #[test]
    fn ttest_edge_cases() {
        let a = [0.5, 0.6, 0.7];
        let same = paired_ttest(&a, &a).unwrap();
        assert_eq!(same.t, 0.0);
        assert_eq!(same.p, 1.0);

        let shifted: Vec<f64> = a.iter().map(|x| x - 0.1).collect();
        let degenerate = paired_ttest(&a, &shifted).unwrap();
        assert!(degenerate.degenerate_variance);
        assert_eq!(degenerate.p, 0.0);
        assert!(degenerate.t.is_infinite() && degenerate.t > 0.0);

        assert!(paired_ttest(&[1.0], &[2.0]).is_err());
        assert!(paired_ttest(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn ttest_antisymmetry() {
        let a = [0.60, 0.55, 0.70, 0.45, 0.80];
        let b = [0.50, 0.52, 0.61, 0.46, 0.70];
        let ab = paired_ttest(&a, &b).unwrap();
        let ba = paired_ttest(&b, &a).unwrap();
        assert!((ab.t + ba.t).abs() < 1e-12);
        assert!((ab.p - ba.p).abs() < 1e-12);
    }

    fn run(tag: &str, rankings: &[(&str, &[&str])]) -> RunData {
        let mut data = RunData { tag: tag.into(), entities: BTreeMap::new() };
        for (entity, ctxs) in rankings {
            let entries: Vec<RunEntry> = ctxs
                .iter()
                .enumerate()
                .map(|(i, c)| RunEntry {
                    context_id: c.to_string(),
                    rank: i + 1,
                    score: 1.0 / (i + 1) as f64,
                })
                .collect();
            data.entities.insert(entity.to_string(), entries);
        }
        data
    }

    #[test]
    fn pooling_union_and_dedup() {
        let r1 = run("a", &[("e1", &["c1", "c2", "c3"])]);
        let r2 = run("b", &[("e1", &["c3", "c4", "c5"])]);
        let pool = pool_top_k(&[r1.clone(), r2.clone()], 2);
        let expected: BTreeSet<(String, String)> = [
            ("e1", "c1"), ("e1", "c2"), ("e1", "c3"), ("e1", "c4"),
        ]
        .iter()
        .map(|(e, c)| (e.to_string(), c.to_string()))
        .collect();
        assert_eq!(pool, expected);

        let dup = pool_top_k(&[r1.clone(), r1.clone()], 2);
        assert_eq!(dup.len(), 2);

        // monotone in k
        let small = pool_top_k(&[r1.clone(), r2.clone()], 1);
        assert!(small.is_subset(&pool));
    }

    #[test]
    fn evaluate_runs_means_and_flags() {
        let q = qrels();
        let good = run("good", &[("e1", &["c1", "c3", "c2"]), ("e2", &["c4"])]);
        let partial = run("partial", &[("e1", &["c2", "c1", "c3"])]);
        let report = evaluate_runs(&[good, partial], &q, None, None).unwrap();

        let good_all = &report.runs[0].blocks[0];
        assert!((good_all.map - 1.0).abs() < 1e-12);
        assert!((good_all.mrr - 1.0).abs() < 1e-12);

        // partial run misses e2 entirely: scored 0 and noted.
        let partial_report = &report.runs[1];
        assert_eq!(partial_report.per_entity["e2"].ap, 0.0);
        assert!(report
            .notes
            .iter()
            .any(|n| n.contains("partial") && n.contains("e2")));

        // two entities with AP 0.4 / 0.6 average to 0.5
        let q2 = Qrels::from_pairs(vec![
            ("e1".into(), "c1".into(), 1),
            ("e1".into(), "c2".into(), 1),
            ("e1".into(), "c3".into(), 1),
            ("e1".into(), "c4".into(), 1),
            ("e1".into(), "c5".into(), 1),
            ("e2".into(), "d1".into(), 1),
        ]);
        // AP(e1): rel at 1,2,3 of 5 judged-relevant -> (1+1+1)/5 = 0.6
        // AP(e2): rel at rank 2 of 1 -> 0.5... craft 0.4/0.6 directly:
        let r = run(
            "r",
            &[("e1", &["c1", "c2", "c3"]), ("e2", &["x", "x2", "d1"])],
        );
        let report2 = evaluate_runs(&[r], &q2, None, None).unwrap();
        let e1 = report2.runs[0].per_entity["e1"].ap;
        let e2 = report2.runs[0].per_entity["e2"].ap;
        assert!((e1 - 0.6).abs() < 1e-12);
        assert!((e2 - 1.0 / 3.0).abs() < 1e-12);
        let map = report2.runs[0].blocks[0].map;
        assert!((map - (e1 + e2) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn subset_blocks() {
        let q = qrels();
        let r = run("r", &[("e1", &["c1", "c3"]), ("e2", &["c4"])]);
        let partition = Partition::from_pairs(vec![
            ("e1".into(), "inkb".into()),
            ("e2".into(), "outkb".into()),
        ]);
        let report = evaluate_runs(&[r], &q, Some(&partition), None).unwrap();
        assert_eq!(report.block_names, vec!["All", "inkb", "outkb"]);
        let blocks = &report.runs[0].blocks;
        // subset of one entity: subset MAP equals that entity's AP
        let e2_ap = report.runs[0].per_entity["e2"].ap;
        assert_eq!(blocks[2].map, e2_ap);
        assert_eq!(blocks[1].entity_count, 1);
    }

    #[test]
    fn reference_comparison_markers() {
        let q = Qrels::from_pairs(
            (0..6)
                .map(|i| (format!("e{i}"), "c1".to_string(), 1))
                .collect::<Vec<_>>(),
        );
        // reference always ranks the relevant context second; system ranks
        // it first -> constant positive difference, degenerate variance.
        let entities: Vec<String> = (0..6).map(|i| format!("e{i}")).collect();
        let mut reference = RunData { tag: "ref".into(), entities: BTreeMap::new() };
        let mut system = RunData { tag: "sys".into(), entities: BTreeMap::new() };
        for e in &entities {
            reference.entities.insert(
                e.clone(),
                vec![
                    RunEntry { context_id: "x".into(), rank: 1, score: 0.9 },
                    RunEntry { context_id: "c1".into(), rank: 2, score: 0.5 },
                ],
            );
            system.entities.insert(
                e.clone(),
                vec![
                    RunEntry { context_id: "c1".into(), rank: 1, score: 0.9 },
                    RunEntry { context_id: "x".into(), rank: 2, score: 0.5 },
                ],
            );
        }
        let report =
            evaluate_runs(&[reference, system], &q, None, Some("ref")).unwrap();
        let sys_block = &report.runs[1].blocks[0];
        let sig = sys_block.significance.as_ref().unwrap();
        assert_eq!(sig.map_marker, "‡");
        assert!(sig.degenerate_variance);
        assert!(report.runs[0].blocks[0].significance.is_none());

        let text = render_text(&report);
        assert!(text.contains("sys"));
        assert!(text.contains("‡"));
        assert!(text.contains("MAP"));
    }

    #[test]
    fn unknown_reference_is_usage_error() {
        let q = qrels();
        let r = run("r", &[("e1", &["c1"])]);
        assert!(matches!(
            evaluate_runs(&[r], &q, None, Some("nope")),
            Err(Error::Usage(_))
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Brute-force re-derivations of AP and RR from their
            // definitions, on random rankings and judgments.
            #[test]
            fn ap_rr_match_definitions(
                rel_mask in proptest::collection::vec(0u8..2, 1..12),
                order in proptest::collection::vec(0usize..12, 1..12),
            ) {
                let qrels = Qrels::from_pairs(
                    rel_mask
                        .iter()
                        .enumerate()
                        .map(|(i, &r)| ("e".to_string(), format!("c{i}"), r)),
                );
                let ranked: Vec<String> = order
                    .iter()
                    .enumerate()
                    .map(|(pos, o)| format!("c{}", (o + pos) % 12))
                    .collect();
                let mut seen = std::collections::BTreeSet::new();
                let ranked: Vec<&str> = ranked
                    .iter()
                    .filter(|c| seen.insert(c.as_str().to_string()))
                    .map(|s| s.as_str())
                    .collect();

                let ap = average_precision(&ranked, "e", &qrels);
                let rr = reciprocal_rank(&ranked, "e", &qrels);

                // definitional recomputation
                let total_rel = rel_mask.iter().filter(|&&r| r == 1).count();
                let mut expected_ap = 0.0;
                if total_rel > 0 {
                    let mut hits = 0.0;
                    let mut acc = 0.0;
                    for (i, c) in ranked.iter().enumerate() {
                        if qrels.is_relevant("e", c) {
                            hits += 1.0;
                            acc += hits / (i as f64 + 1.0);
                        }
                    }
                    expected_ap = acc / total_rel as f64;
                }
                let mut expected_rr = 0.0;
                for (i, c) in ranked.iter().enumerate() {
                    if qrels.is_relevant("e", c) {
                        expected_rr = 1.0 / (i as f64 + 1.0);
                        break;
                    }
                }
                prop_assert!((ap - expected_ap).abs() < 1e-12);
                prop_assert!((rr - expected_rr).abs() < 1e-12);
            }

            #[test]
            fn pooling_monotone(k1 in 1usize..6, k2 in 1usize..6) {
                let r1 = run("a", &[("e1", &["c1","c2","c3","c4","c5"]), ("e2", &["d1","d2","d3"])]);
                let r2 = run("b", &[("e1", &["c9","c2","c7"])]);
                let (lo, hi) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
                let small = pool_top_k(&[r1.clone(), r2.clone()], lo);
                let big = pool_top_k(&[r1, r2], hi);
                prop_assert!(small.is_subset(&big));
            }
        }
    }
}
