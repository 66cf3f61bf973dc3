//! Acceptance suite: one test per criterion, each printing a PASS/FAIL/SKIP
//! line (run with `--nocapture` to see them).
//!
//! Criteria that need the published benchmark datasets look for them under
//! `KGBOOST_DATA_DIR` (default `<workspace>/data`). When a dataset is not
//! provided locally the test reports SKIP for the dataset-bound half and
//! exercises the same property on a structured synthetic graph instead.

mod common;

use std::collections::HashSet;
use std::time::Instant;

use rand::Rng;

use common::*;
use kgboost::embedding::{
    nll_gradient, nll_loss_with_weights, train_embeddings, EmbeddingKind, EmbeddingModel,
    EmbeddingTrainConfig,
};
use kgboost::eval::{
    evaluate_distance_baseline, filtered_rank, run_pipeline, save_reports,
};
use kgboost::gbt::{fit_tree, logistic_grad_hess, logistic_loss, GbtConfig, MatrixBuilder};
use kgboost::kg::{EntityId, RelationId, Triple, TripleStore};
use kgboost::pipeline::{
    lcwa_score, prepare_relations, AblationTarget, BaseStrategy, PipelineConfig,
};
use kgboost::relations::{build_profile, co_occurrence, inference_index, lcw_index};
use kgboost::sampling::{adversarial_negatives, naive_negatives, rcwc_negatives, NegativeStrategy};
use kgboost::{PairSet, PairSetMap};

fn desk_embedding_config(dim: usize, steps: usize, gamma: f64) -> EmbeddingTrainConfig {
    EmbeddingTrainConfig {
        kind: EmbeddingKind::TranslationalReal,
        dim,
        learning_rate: 0.1,
        batch_size: 64,
        steps,
        negatives: 8,
        alpha: 1.0,
        gamma,
        seed: 42,
    }
}

fn desk_pipeline_config(estimators: usize, negatives: usize) -> PipelineConfig {
    PipelineConfig {
        negatives_per_positive: negatives,
        gbt: GbtConfig {
            num_estimators: estimators,
            max_depth: 3,
            learning_rate: 0.1,
            ..Default::default()
        },
        base_strategy: BaseStrategy::Auto,
        seed: 42,
        ..Default::default()
    }
}

// criterion 1: filtered_rank equals the enumerate-score-sort-filter oracle
// on 200 randomized KGs, exact rank equality under the mean-tie convention
#[test]
fn criterion_1_ranking_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = kgboost::rng::derive(1001, 0, 0);
    let mut checked = 0usize;
    for kg in 0..200 {
        let dir = tempfile::tempdir().unwrap();
        let store = random_store(&mut rng, dir.path());
        let levels = rng.gen_range(2..6u64);
        let salt = rng.gen_range(0..10_000u64);
        let nf = store.num_relations() as u32;
        for triple in store.test.clone() {
            for (head, rel, tail) in [
                (triple.head, triple.rel, triple.tail),
                (triple.tail, triple.rel.inverse(nf), triple.head),
            ] {
                let score = quantized_scorer(levels, salt.wrapping_add(rel.0 as u64));
                let got = filtered_rank(head, rel, tail, &store, &score);
                let (want_rank, want_candidates) =
                    oracle_filtered_rank(head, rel, tail, &store, &score);
                assert_eq!(
                    (got.rank, got.candidates),
                    (want_rank, want_candidates),
                    "kg {} query ({:?} {:?} {:?})",
                    kg,
                    head,
                    rel,
                    tail
                );
                checked += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "ranking oracle sweep took {:?}", elapsed);
    println!(
        "[criterion 1] PASS — 200 random KGs, {} queries, exact rank equality, {:?}",
        checked, elapsed
    );
}

// criterion 2: fit_tree equals exhaustive split search on 500 random
// instances, exact match including tie-breaks
#[test]
fn criterion_2_split_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = kgboost::rng::derive(1002, 0, 0);
    for instance in 0..500 {
        let rows = rng.gen_range(2..=64usize);
        let features = rng.gen_range(1..=4usize);
        let discrete = rng.gen_bool(0.4);
        let duplicate_col = features >= 2 && rng.gen_bool(0.3);
        let mut b = MatrixBuilder::new(features);
        let mut margins = Vec::with_capacity(rows);
        for _ in 0..rows {
            let mut row: Vec<f32> = (0..features)
                .map(|_| {
                    if discrete {
                        (rng.gen_range(-3..=3) as f32) * 0.5
                    } else {
                        rng.gen_range(-2.0..2.0)
                    }
                })
                .collect();
            if duplicate_col {
                row[1] = row[0];
            }
            b.push_row(&row, rng.gen_range(0..2) as u8);
            margins.push(if rng.gen_bool(0.5) {
                0.0
            } else {
                rng.gen_range(-2.0..2.0)
            });
        }
        let matrix = b.build();
        let config = GbtConfig {
            max_depth: rng.gen_range(1..=3),
            l2_leaf_penalty: [0.0, 0.5, 1.0][rng.gen_range(0..3)],
            min_split_gain: [0.0, 0.0, 0.1][rng.gen_range(0..3)],
            min_child_hessian: [0.0, 0.0, 0.05][rng.gen_range(0..3)],
            ..Default::default()
        };
        let tree = fit_tree(&matrix, &margins, &config).unwrap();
        let oracle = oracle_fit_tree(&matrix, &margins, &config);
        assert!(
            trees_match(&tree, &oracle),
            "instance {}: {:?} vs {:?}",
            instance,
            tree,
            oracle
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "split oracle sweep took {:?}", elapsed);
    println!(
        "[criterion 2] PASS — 500 instances, trees identical to exhaustive search, {:?}",
        elapsed
    );
}

// criterion 3: analytic gradients match central finite differences
// (embedding loss ≤ 1e-4 relative with stop-gradient weights; logistic
// grad/hess ≤ 1e-6 relative), 100 random instances each
#[test]
fn criterion_3_gradient_checks() {
    // embedding loss
    let step = 1e-5;
    for instance in 0..100u64 {
        let kind = if instance % 2 == 0 {
            EmbeddingKind::TranslationalReal
        } else {
            EmbeddingKind::RotationalComplex
        };
        let mut rng = kgboost::rng::derive(1003, 0, instance);
        let n = 6usize;
        let dim = 3usize;
        let width = match kind {
            EmbeddingKind::TranslationalReal => dim,
            EmbeddingKind::RotationalComplex => 2 * dim,
        };
        let entities: Vec<f64> = (0..n * width).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let relations: Vec<f64> = (0..2 * dim)
            .map(|_| match kind {
                EmbeddingKind::TranslationalReal => rng.gen_range(-1.5..1.5),
                EmbeddingKind::RotationalComplex => rng.gen_range(0.0..std::f64::consts::TAU),
            })
            .collect();
        let model = EmbeddingModel::from_parts(kind, dim, 2.0, n, 2, entities.clone(), relations.clone());
        let positive = Triple::new(
            EntityId(rng.gen_range(0..n as u32)),
            RelationId(rng.gen_range(0..2)),
            EntityId(rng.gen_range(0..n as u32)),
        );
        let negatives: Vec<Triple> = (0..4)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    Triple::new(EntityId(rng.gen_range(0..n as u32)), positive.rel, positive.tail)
                } else {
                    Triple::new(positive.head, positive.rel, EntityId(rng.gen_range(0..n as u32)))
                }
            })
            .collect();
        let alpha = rng.gen_range(0.2..2.0);
        let weights = model.adversarial_weights(&negatives, alpha);
        let (_, grad) = nll_gradient(&model, positive, &negatives, alpha);

        let mut perturbed =
            |entities: &mut Vec<f64>, relations: &mut Vec<f64>, idx: usize, is_entity: bool, d: f64| {
                if is_entity {
                    entities[idx] += d;
                } else {
                    relations[idx] += d;
                }
                let m = EmbeddingModel::from_parts(
                    kind,
                    dim,
                    2.0,
                    n,
                    2,
                    entities.clone(),
                    relations.clone(),
                );
                if is_entity {
                    entities[idx] -= d;
                } else {
                    relations[idx] -= d;
                }
                nll_loss_with_weights(&m, positive, &negatives, &weights)
            };
        let mut ents = entities;
        let mut rels = relations;
        for is_entity in [true, false] {
            let len = if is_entity { ents.len() } else { rels.len() };
            for idx in 0..len {
                let up = perturbed(&mut ents, &mut rels, idx, is_entity, step);
                let down = perturbed(&mut ents, &mut rels, idx, is_entity, -step);
                let fd = (up - down) / (2.0 * step);
                let analytic = if is_entity {
                    grad.entities
                        .get(&((idx / width) as u32))
                        .map_or(0.0, |g| g[idx % width])
                } else {
                    grad.relations
                        .get(&((idx / dim) as u32))
                        .map_or(0.0, |g| g[idx % dim])
                };
                let err = (analytic - fd).abs();
                assert!(
                    err <= 1e-4 * analytic.abs().max(fd.abs()) + 1e-7,
                    "instance {} {} idx {}: {} vs {}",
                    instance,
                    if is_entity { "entity" } else { "relation" },
                    idx,
                    analytic,
                    fd
                );
            }
        }
    }

    // logistic grad/hess
    let mut rng = kgboost::rng::derive(1003, 1, 0);
    for _ in 0..100 {
        let y = rng.gen_range(0..2) as u8;
        let m: f64 = rng.gen_range(-6.0..6.0);
        let (g, h) = logistic_grad_hess(y, m);
        let fd_g = (logistic_loss(y, m + step) - logistic_loss(y, m - step)) / (2.0 * step);
        let wide = 1e-4;
        let fd_h =
            (logistic_grad_hess(y, m + wide).0 - logistic_grad_hess(y, m - wide).0) / (2.0 * wide);
        assert!((g - fd_g).abs() <= 1e-6 * g.abs().max(fd_g.abs()).max(1e-3));
        assert!((h - fd_h).abs() <= 1e-6 * h.abs().max(fd_h.abs()).max(1e-3));
    }
    println!("[criterion 3] PASS — 100 embedding-loss and 100 logistic grad/hess instances within tolerance");
}

fn assert_chain_for_store(store: &TripleStore, cap_per_relation: usize, batch_budget: Option<usize>) -> (usize, usize) {
    let cfg = PipelineConfig::default();
    let prepared = prepare_relations(store, &cfg, &[]);
    let mut batches = 0usize;
    let mut pairs_checked = 0usize;
    'outer: for (rel, aug) in &prepared.augmented {
        let profile = &prepared.profiles[rel];
        let positives = aug.sorted_pairs();
        for &(h, t) in positives.iter().take(cap_per_relation) {
            let mut rng = kgboost::rng::derive(1004, rel.0 as u64, pairs_checked as u64);
            let budget = 2 * store.num_entities();
            let naive = naive_negatives(*rel, (h, t), budget, store.num_entities(), aug, &mut rng);
            let rcwc = rcwc_negatives(
                *rel,
                (h, t),
                budget,
                profile,
                cfg.delta_rcwc,
                store.num_entities(),
                aug,
                &mut rng,
            );
            let empty = kgboost::gbt::TreeEnsemble::new(1, 1.0);
            let adv = adversarial_negatives(
                *rel,
                &rcwc,
                &empty,
                |_h, tt| vec![tt.0 as f32],
                0.5,
                usize::MAX,
            )
            .unwrap();
            let naive_set: HashSet<_> = naive.pairs.iter().copied().collect();
            let rcwc_set: HashSet<_> = rcwc.pairs.iter().copied().collect();
            let adv_set: HashSet<_> = adv.pairs.iter().copied().collect();
            if rcwc.strategy == NegativeStrategy::Rcwc {
                assert!(rcwc_set.is_subset(&naive_set), "rcwc ⊄ naive for rel {}", rel.0);
            }
            assert!(adv_set.is_subset(&rcwc_set), "adv ⊄ rcwc for rel {}", rel.0);
            for &(hh, tt) in naive_set.iter().chain(&rcwc_set) {
                assert!(!aug.contains(hh, tt), "positive sampled as negative");
            }
            batches += 3;
            pairs_checked += 1;
            if let Some(limit) = batch_budget {
                if batches >= limit {
                    break 'outer;
                }
            }
        }
    }
    (batches, pairs_checked)
}

// criterion 4: sampled N_adv ⊆ N_rcwc ⊆ N_naive with zero positives among
// negatives; exhaustive on toy KGs, spot-checked on benchmark data when
// provided
#[test]
fn criterion_4_subset_chain() {
    // exhaustive on toy graphs: the candidate budget of 2|E| forces full
    // enumeration of every valid candidate set
    let dir = tempfile::tempdir().unwrap();
    let store = synthetic_kg(4).load(dir.path());
    let (toy_batches, toy_pairs) = assert_chain_for_store(&store, usize::MAX, None);

    let mut spot = String::new();
    for name in ["WN18RR", "FB15k-237"] {
        match find_dataset(name) {
            Some((train, valid, test)) => {
                let store = kgboost::kg::load_dataset(&train, &valid, &test).unwrap();
                let (batches, _) = assert_chain_for_store(&store, 3, Some(1000));
                spot.push_str(&format!("{}: {} batches OK; ", name, batches));
            }
            None => spot.push_str(&format!("{}: SKIP (not provided); ", name)),
        }
    }
    println!(
        "[criterion 4] PASS — toy exhaustive: {} batches over {} positives, no chain or positivity violations; spot checks: {}",
        toy_batches, toy_pairs, spot
    );
}

// criterion 5: hand-derived formula fixtures, exact or within 1e-12
#[test]
fn criterion_5_formula_fixtures() {
    let pair = |h: u32, t: u32| (EntityId(h), EntityId(t));
    let set = |pairs: &[(u32, u32)]| PairSet::from_pairs(pairs.iter().map(|&(h, t)| pair(h, t)));

    // inference index
    let mut sets = PairSetMap::new();
    sets.insert(RelationId(0), set(&[(0, 1), (2, 3)]));
    sets.insert(RelationId(1), set(&[(0, 1), (4, 5)]));
    sets.insert(RelationId(2), set(&[(7, 8)]));
    assert_eq!(inference_index(RelationId(0), RelationId(0), &sets), 1.0);
    assert_eq!(inference_index(RelationId(0), RelationId(2), &sets), 0.0);
    assert_eq!(inference_index(RelationId(0), RelationId(1), &sets), 0.5);

    // co-occurrence
    let g = set(&[(10, 1), (10, 2), (11, 1), (11, 2)]);
    assert_eq!(co_occurrence(&g, EntityId(1), EntityId(2)), 2);
    assert_eq!(co_occurrence(&set(&[(10, 1), (11, 2)]), EntityId(1), EntityId(2)), 0);
    assert_eq!(co_occurrence(&g, EntityId(1), EntityId(1)), 2);

    // lcw index
    assert_eq!(lcw_index(&set(&[(0, 9), (1, 9), (2, 9), (3, 9)]), 2), 1.0);
    assert_eq!(lcw_index(&set(&[(0, 5), (1, 6), (2, 7), (3, 8)]), 2), 0.0);
    assert_eq!(lcw_index(&set(&[(0, 7), (1, 7), (2, 7), (3, 8)]), 2), 0.75);

    // lcwa gate
    let g = set(&[(0, 1), (2, 1), (3, 4)]);
    let mut profile = build_profile(RelationId(0), &g, vec![], 2);
    profile.lcw = 0.95;
    assert_eq!(lcwa_score(&profile, EntityId(3), 0.7, 0.9), 0.0);
    assert!((lcwa_score(&profile, EntityId(4), 0.7, 0.9) - 0.7).abs() < 1e-12);
    profile.lcw = 0.5;
    assert!((lcwa_score(&profile, EntityId(3), 0.7, 0.9) - 0.7).abs() < 1e-12);

    println!("[criterion 5] PASS — inference_index, co_occurrence, lcw_index, lcwa_score fixtures exact");
}

struct DirectionalOutcome {
    pipeline_mrr: f64,
    baseline_mrr: f64,
    random_mrr: f64,
}

fn directional_run(
    store: &TripleStore,
    emb_cfg: &EmbeddingTrainConfig,
    cfg: &PipelineConfig,
    subset: usize,
) -> DirectionalOutcome {
    let embeddings = train_embeddings(store, emb_cfg).unwrap();
    let (_, report) = run_pipeline(store, &embeddings, cfg, &[], subset, |_, _| {}).unwrap();
    let baseline = evaluate_distance_baseline(store, &embeddings, subset);
    // expected reciprocal rank of a uniformly random permutation is
    // H(c)/c; use the harmonic number at the mean candidate count
    let c = store.num_entities() as f64;
    let random_mrr = ((1..=store.num_entities()).map(|k| 1.0 / k as f64).sum::<f64>()) / c;
    DirectionalOutcome {
        pipeline_mrr: report.mrr,
        baseline_mrr: baseline.mrr,
        random_mrr,
    }
}

// criterion 6: filtered MRR beats the random-ranking expectation and the
// raw-distance baseline by ≥10% relative (WN18RR desk scale when provided,
// synthetic surrogate otherwise)
#[test]
fn criterion_6_directional_quality() {
    match find_dataset("WN18RR") {
        Some((train, valid, test)) => {
            let store = kgboost::kg::load_dataset(&train, &valid, &test).unwrap();
            let emb_cfg = EmbeddingTrainConfig {
                batch_size: 512,
                steps: 30_000,
                negatives: 16,
                ..desk_embedding_config(50, 30_000, 6.0)
            };
            let cfg = desk_pipeline_config(300, 32);
            let out = directional_run(&store, &emb_cfg, &cfg, 0);
            assert!(out.pipeline_mrr > out.random_mrr);
            assert!(
                out.pipeline_mrr >= 1.1 * out.baseline_mrr,
                "pipeline {} vs baseline {}",
                out.pipeline_mrr,
                out.baseline_mrr
            );
            println!(
                "[criterion 6] PASS — WN18RR d=50: pipeline MRR {:.4} ≥ 1.1 × baseline {:.4}, random {:.6}",
                out.pipeline_mrr, out.baseline_mrr, out.random_mrr
            );
        }
        None => {
            let dir = tempfile::tempdir().unwrap();
            let store = synthetic_kg(6).load(dir.path());
            let emb_cfg = desk_embedding_config(16, 3000, 2.0);
            let cfg = desk_pipeline_config(120, 16);
            let out = directional_run(&store, &emb_cfg, &cfg, 0);
            assert!(out.pipeline_mrr > out.random_mrr);
            assert!(
                out.pipeline_mrr >= 1.1 * out.baseline_mrr,
                "surrogate pipeline {} vs baseline {}",
                out.pipeline_mrr,
                out.baseline_mrr
            );
            println!(
                "[criterion 6] SKIP (WN18RR not provided under {}) — surrogate synthetic KG: pipeline MRR {:.4} ≥ 1.1 × baseline {:.4}, random {:.6}",
                data_dir().display(),
                out.pipeline_mrr,
                out.baseline_mrr,
                out.random_mrr
            );
        }
    }
}

/// Deterministic 2,000-entity subsample: keep the highest-train-degree
/// entities (ties by id) and every triple with both endpoints kept.
fn induce_subsample(store: &TripleStore, keep: usize, dir: &std::path::Path) -> TripleStore {
    let mut degree = vec![0usize; store.num_entities()];
    for t in &store.train {
        degree[t.head.index()] += 1;
        degree[t.tail.index()] += 1;
    }
    let mut order: Vec<u32> = (0..store.num_entities() as u32).collect();
    order.sort_by_key(|&e| (std::cmp::Reverse(degree[e as usize]), e));
    let kept: HashSet<EntityId> = order[..keep.min(order.len())]
        .iter()
        .map(|&e| EntityId(e))
        .collect();
    let render = |triples: &[Triple]| {
        let mut s = String::new();
        for t in triples {
            if kept.contains(&t.head) && kept.contains(&t.tail) {
                s.push_str(&format!(
                    "{}\t{}\t{}\n",
                    store.entity_name(t.head),
                    store.relation_name(t.rel),
                    store.entity_name(t.tail)
                ));
            }
        }
        s
    };
    std::fs::write(dir.join("train.txt"), render(&store.train)).unwrap();
    std::fs::write(dir.join("valid.txt"), render(&store.valid)).unwrap();
    std::fs::write(dir.join("test.txt"), render(&store.test)).unwrap();
    kgboost::kg::load_dataset(
        &dir.join("train.txt"),
        &dir.join("valid.txt"),
        &dir.join("test.txt"),
    )
    .unwrap()
}

// criterion 7: disabling LCWA-based prediction and disabling rcwc each
// reduce MRR (sign check; FB15k-237 subsample when provided, synthetic
// surrogate otherwise)
#[test]
fn criterion_7_ablation_direction() {
    let (store, label, emb_cfg, cfg, _tmp) = match find_dataset("FB15k-237") {
        Some((train, valid, test)) => {
            let full = kgboost::kg::load_dataset(&train, &valid, &test).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let store = induce_subsample(&full, 2000, dir.path());
            let emb_cfg = EmbeddingTrainConfig {
                batch_size: 256,
                ..desk_embedding_config(50, 15_000, 12.0)
            };
            let cfg = desk_pipeline_config(300, 32);
            (store, "FB15k-237 2k-entity subsample".to_owned(), emb_cfg, cfg, dir)
        }
        None => {
            let dir = tempfile::tempdir().unwrap();
            let store = synthetic_kg(7).load(dir.path());
            let emb_cfg = desk_embedding_config(16, 3000, 2.0);
            let cfg = desk_pipeline_config(120, 16);
            (store, format!("surrogate synthetic KG (FB15k-237 not provided under {})", data_dir().display()), emb_cfg, cfg, dir)
        }
    };
    let embeddings = train_embeddings(&store, &emb_cfg).unwrap();
    let (_, full) = run_pipeline(&store, &embeddings, &cfg, &[], 0, |_, _| {}).unwrap();
    let (_, no_lcwa) = run_pipeline(
        &store,
        &embeddings,
        &cfg,
        &[AblationTarget::LcwaPrediction],
        0,
        |_, _| {},
    )
    .unwrap();
    let (_, no_rcwc) =
        run_pipeline(&store, &embeddings, &cfg, &[AblationTarget::Rcwc], 0, |_, _| {}).unwrap();
    assert!(
        no_lcwa.mrr < full.mrr,
        "disabling LCWA did not reduce MRR: {} vs {}",
        no_lcwa.mrr,
        full.mrr
    );
    assert!(
        no_rcwc.mrr < full.mrr,
        "disabling rcwc did not reduce MRR: {} vs {}",
        no_rcwc.mrr,
        full.mrr
    );
    println!(
        "[criterion 7] {} — {}: full MRR {:.4}, w/o LCWA {:.4}, w/o rcwc {:.4}; both reduced",
        if label.starts_with("FB15k") { "PASS" } else { "SKIP (surrogate PASS)" },
        label,
        full.mrr,
        no_lcwa.mrr,
        no_rcwc.mrr
    );
}

// criterion 8: the loader reproduces the published dataset statistics
#[test]
fn criterion_8_dataset_statistics() {
    // (name, entities, relations, train, valid, test)
    let expected = [
        ("WN18", 40_943, 18, 141_442, 5_000, 5_000),
        ("WN18RR", 40_943, 11, 86_835, 3_034, 3_134),
        ("FB15K", 14_691, 1_345, 483_142, 50_000, 59_071),
        ("FB15k-237", 14_541, 237, 272_115, 17_535, 20_466),
    ];
    let mut found_any = false;
    let mut notes = String::new();
    for (name, ents, rels, train, valid, test) in expected {
        match find_dataset(name) {
            Some((tr, va, te)) => {
                let store = kgboost::kg::load_dataset(&tr, &va, &te).unwrap();
                assert_eq!(store.num_entities(), ents, "{} entities", name);
                assert_eq!(store.num_relations(), rels, "{} relations", name);
                assert_eq!(store.train.len(), train, "{} train", name);
                assert_eq!(store.valid.len(), valid, "{} valid", name);
                assert_eq!(store.test.len(), test, "{} test", name);
                notes.push_str(&format!("{}: exact; ", name));
                found_any = true;
            }
            None => notes.push_str(&format!("{}: not provided; ", name)),
        }
    }
    if found_any {
        println!("[criterion 8] PASS — {}", notes);
    } else {
        println!(
            "[criterion 8] SKIP — no benchmark dataset provided under {} ({})",
            data_dir().display(),
            notes
        );
    }
}

// criterion 9: two same-seed desk-scale pipeline runs produce byte-identical
// model files and reports
#[test]
fn criterion_9_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let (store, label) = match find_dataset("WN18RR") {
        Some((train, valid, test)) => (
            kgboost::kg::load_dataset(&train, &valid, &test).unwrap(),
            "WN18RR",
        ),
        None => (synthetic_kg(9).load(dir.path()), "surrogate synthetic KG"),
    };
    let (emb_cfg, cfg, subset) = if label == "WN18RR" {
        (
            EmbeddingTrainConfig {
                batch_size: 512,
                ..desk_embedding_config(50, 5_000, 6.0)
            },
            desk_pipeline_config(300, 32),
            200,
        )
    } else {
        (desk_embedding_config(16, 1500, 2.0), desk_pipeline_config(60, 8), 0)
    };

    let run_once = |out: &std::path::Path| {
        std::fs::create_dir_all(out).unwrap();
        let embeddings = train_embeddings(&store, &emb_cfg).unwrap();
        embeddings.save(&out.join("embedding.bin")).unwrap();
        let (scorers, report) = run_pipeline(&store, &embeddings, &cfg, &[], subset, |rel, s| {
            if let kgboost::pipeline::RelationScorer::Ensemble(e) = s {
                e.save(&out.join(format!("rel_{}.model", rel.0)), rel).unwrap();
            }
        })
        .unwrap();
        save_reports(out, &report, &store).unwrap();
        scorers.len()
    };

    let dir_a = dir.path().join("run_a");
    let dir_b = dir.path().join("run_b");
    let slots_a = run_once(&dir_a);
    let slots_b = run_once(&dir_b);
    assert_eq!(slots_a, slots_b);

    let mut compared = 0;
    for entry in std::fs::read_dir(&dir_a).unwrap() {
        let name = entry.unwrap().file_name();
        let a = std::fs::read(dir_a.join(&name)).unwrap();
        let b = std::fs::read(dir_b.join(&name)).unwrap();
        assert_eq!(a, b, "{:?} differs between runs", name);
        compared += 1;
    }
    assert!(compared >= 4);
    println!(
        "[criterion 9] PASS — {} ({} artifacts byte-identical across two same-seed runs)",
        label, compared
    );
}
