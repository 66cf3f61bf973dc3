//! Filtered ranking evaluation.
//!
//! Every test triple is scored twice, as `(h, r, ?)` and as `(t, r⁻¹, ?)`;
//! candidates are all tail corruptions not present in any split, plus the
//! true tail itself. Ranks use the mean-tie convention
//! `rank = 1 + #strictly-higher + round_half_up(#ties / 2)`, which keeps the
//! large tie groups created by LCWA zeros unbiased. Reported metrics
//! aggregate both query directions.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::embedding::EmbeddingModel;
use crate::error::{Error, Result};
use crate::kg::{EntityId, RelationId, TripleStore};
use crate::pipeline::{
    train_all_relations, AblationTarget, PipelineConfig, Predictor, RelationScorer,
};

/// Filtered rank of one query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankResult {
    pub head: EntityId,
    pub rel: RelationId,
    pub tail: EntityId,
    /// 1-based filtered rank of the true tail.
    pub rank: usize,
    /// Number of surviving candidates (including the true tail).
    pub candidates: usize,
}

/// Ranks `tail` among all tail corruptions of `(head, rel, ?)` that do not
/// appear in any split.
pub fn filtered_rank(
    head: EntityId,
    rel: RelationId,
    tail: EntityId,
    store: &TripleStore,
    mut score: impl FnMut(EntityId) -> f64,
) -> RankResult {
    let true_score = score(tail);
    let mut higher = 0usize;
    let mut ties = 0usize;
    let mut candidates = 1usize;
    for id in 0..store.num_entities() as u32 {
        let cand = EntityId(id);
        if cand == tail || store.contains(head, rel, cand) {
            continue;
        }
        candidates += 1;
        let s = score(cand);
        if s > true_score {
            higher += 1;
        } else if s == true_score {
            ties += 1;
        }
    }
    RankResult {
        head,
        rel,
        tail,
        rank: 1 + higher + (ties + 1) / 2,
        candidates,
    }
}

/// Aggregated ranking metrics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport {
    pub queries: usize,
    pub mr: f64,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub per_relation: Vec<RelationMetrics>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelationMetrics {
    pub rel: RelationId,
    pub queries: usize,
    pub mr: f64,
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
}

fn summarize(ranks: impl Iterator<Item = usize> + Clone, n: usize) -> (f64, f64, f64, f64, f64) {
    if n == 0 {
        return (0.0, 0.0, 0.0, 0.0, 0.0);
    }
    let nf = n as f64;
    let mr = ranks.clone().map(|r| r as f64).sum::<f64>() / nf;
    let mrr = ranks.clone().map(|r| 1.0 / r as f64).sum::<f64>() / nf;
    let hits = |k: usize| ranks.clone().filter(|&r| r <= k).count() as f64 / nf;
    (mr, mrr, hits(1), hits(3), hits(10))
}

/// Builds the report from per-query rank results.
pub fn aggregate(results: &[RankResult]) -> MetricsReport {
    let (mr, mrr, hits1, hits3, hits10) =
        summarize(results.iter().map(|r| r.rank), results.len());
    let mut by_rel: BTreeMap<RelationId, Vec<usize>> = BTreeMap::new();
    for r in results {
        by_rel.entry(r.rel).or_default().push(r.rank);
    }
    let per_relation = by_rel
        .into_iter()
        .map(|(rel, ranks)| {
            let (mr, mrr, hits1, hits3, hits10) = summarize(ranks.iter().copied(), ranks.len());
            RelationMetrics {
                rel,
                queries: ranks.len(),
                mr,
                mrr,
                hits1,
                hits3,
                hits10,
            }
        })
        .collect();
    MetricsReport {
        queries: results.len(),
        mr,
        mrr,
        hits1,
        hits3,
        hits10,
        per_relation,
    }
}

/// Both-direction queries for (up to) the first `subset` test triples;
/// 0 means the whole test split.
fn test_queries(store: &TripleStore, subset: usize) -> Vec<(EntityId, RelationId, EntityId)> {
    let n = if subset == 0 {
        store.test.len()
    } else {
        store.test.len().min(subset)
    };
    let nf = store.num_relations() as u32;
    let mut queries = Vec::with_capacity(2 * n);
    for t in &store.test[..n] {
        queries.push((t.head, t.rel, t.tail));
        queries.push((t.tail, t.rel.inverse(nf), t.head));
    }
    queries
}

/// Evaluates an arbitrary scorer over the filtered tail-ranking protocol.
pub fn evaluate_with<S>(store: &TripleStore, subset: usize, scorer: S) -> MetricsReport
where
    S: Fn(RelationId, EntityId, EntityId) -> f64 + Sync,
{
    let queries = test_queries(store, subset);
    let results: Vec<RankResult> = queries
        .par_iter()
        .map(|&(head, rel, tail)| filtered_rank(head, rel, tail, store, |t| scorer(rel, head, t)))
        .collect();
    aggregate(&results)
}

/// Evaluates the trained pipeline scorer.
pub fn evaluate(store: &TripleStore, predictor: &Predictor<'_>, subset: usize) -> MetricsReport {
    let queries = test_queries(store, subset);
    let results: Vec<RankResult> = queries
        .par_iter()
        .map(|&(head, rel, tail)| {
            let mut buf: Vec<f32> = Vec::with_capacity(predictor.embeddings.feature_dim());
            filtered_rank(head, rel, tail, store, |t| {
                predictor.score_buffered(rel, head, t, &mut buf)
            })
        })
        .collect();
    aggregate(&results)
}

/// Ranks by raw embedding distance (negated, so closer is better); the
/// classifier-free baseline.
pub fn evaluate_distance_baseline(
    store: &TripleStore,
    embeddings: &EmbeddingModel,
    subset: usize,
) -> MetricsReport {
    evaluate_with(store, subset, |rel, head, tail| {
        -embeddings.distance(head, rel, tail)
    })
}

/// Trains classifiers for every relation and evaluates them, honoring the
/// requested module bypasses.
pub fn run_pipeline<F>(
    store: &TripleStore,
    embeddings: &EmbeddingModel,
    config: &PipelineConfig,
    ablations: &[AblationTarget],
    subset: usize,
    on_trained: F,
) -> Result<(BTreeMap<RelationId, RelationScorer>, MetricsReport)>
where
    F: FnMut(RelationId, &RelationScorer),
{
    let prepared = crate::pipeline::prepare_relations(store, config, ablations);
    let scorers =
        train_all_relations(store, &prepared, embeddings, config, ablations, on_trained)?;
    let predictor = Predictor {
        embeddings,
        profiles: &prepared.profiles,
        scorers: &scorers,
        delta_lcw: config.delta_lcw,
        lcwa_enabled: !ablations.contains(&AblationTarget::LcwaPrediction),
    };
    let report = evaluate(store, &predictor, subset);
    Ok((scorers, report))
}

/// Reruns the pipeline with the named modules bypassed.
pub fn ablation_run(
    store: &TripleStore,
    embeddings: &EmbeddingModel,
    config: &PipelineConfig,
    disabled: &[AblationTarget],
    subset: usize,
) -> Result<MetricsReport> {
    let (_, report) = run_pipeline(store, embeddings, config, disabled, subset, |_, _| {})?;
    Ok(report)
}

/// Parses `--ablate` names; unknown names are an error.
pub fn parse_ablations(names: &[String]) -> Result<Vec<AblationTarget>> {
    let mut targets = Vec::new();
    for name in names {
        let target: AblationTarget = name.parse()?;
        if !targets.contains(&target) {
            targets.push(target);
        }
    }
    Ok(targets)
}

const REPORT_NOTE: &str =
    "each test triple is ranked as (h, r, ?) and (t, r_inverse, ?); metrics aggregate both";

/// Aligned human-readable table.
pub fn write_human_report(w: &mut impl Write, report: &MetricsReport) -> std::io::Result<()> {
    writeln!(w, "link prediction report (filtered tail ranking)")?;
    writeln!(w, "{}", REPORT_NOTE)?;
    writeln!(w, "queries: {}", report.queries)?;
    writeln!(w)?;
    writeln!(w, "{:<6} {:>14}", "metric", "value")?;
    writeln!(w, "{:<6} {:>14.3}", "MR", report.mr)?;
    writeln!(w, "{:<6} {:>14.6}", "MRR", report.mrr)?;
    writeln!(w, "{:<6} {:>14.6}", "H@1", report.hits1)?;
    writeln!(w, "{:<6} {:>14.6}", "H@3", report.hits3)?;
    writeln!(w, "{:<6} {:>14.6}", "H@10", report.hits10)?;
    Ok(())
}

/// Machine-readable `name<TAB>value` lines.
pub fn write_machine_report(w: &mut impl Write, report: &MetricsReport) -> std::io::Result<()> {
    writeln!(w, "queries\t{}", report.queries)?;
    writeln!(w, "MR\t{}", report.mr)?;
    writeln!(w, "MRR\t{}", report.mrr)?;
    writeln!(w, "H@1\t{}", report.hits1)?;
    writeln!(w, "H@3\t{}", report.hits3)?;
    writeln!(w, "H@10\t{}", report.hits10)?;
    Ok(())
}

/// Per-relation CSV breakdown; relation names resolve through the store.
pub fn write_per_relation_csv(
    w: &mut impl Write,
    report: &MetricsReport,
    store: &TripleStore,
) -> std::io::Result<()> {
    writeln!(w, "relation_id,relation,queries,MR,MRR,H@1,H@3,H@10")?;
    for m in &report.per_relation {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            m.rel.0,
            store.relation_name(m.rel),
            m.queries,
            m.mr,
            m.mrr,
            m.hits1,
            m.hits3,
            m.hits10
        )?;
    }
    Ok(())
}

/// Convenience wrapper writing all three report files.
pub fn save_reports(dir: &Path, report: &MetricsReport, store: &TripleStore) -> Result<()> {
    let write = |name: &str, f: &dyn Fn(&mut Vec<u8>) -> std::io::Result<()>| -> Result<()> {
        let path = dir.join(name);
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| Error::io(&path, e))?;
        std::fs::write(&path, buf).map_err(|e| Error::io(&path, e))
    };
    write("metrics.txt", &|w| write_human_report(w, report))?;
    write("metrics.tsv", &|w| write_machine_report(w, report))?;
    write("per_relation.csv", &|w| {
        write_per_relation_csv(w, report, store)
    })?;
    Ok(())
}
