//! The five batch commands.

use std::collections::BTreeMap;
use std::io::Write;

use anyhow::{anyhow, bail, Context, Result};
use log::info;

use kgboost::embedding::{train_embeddings_from, validation_mrr, EmbeddingModel};
use kgboost::eval::{ablation_run, evaluate, parse_ablations, save_reports};
use kgboost::kg::{load_dataset, RelationId, TripleStore};
use kgboost::pipeline::{
    prepare_relations, train_relation, Predictor, PreparedRelations, RelationScorer,
};
use kgboost::relations::{load_pair_sets, load_profiles, save_pair_sets, save_profiles};

use crate::config::{parse_kind, RunConfig};
use crate::manifest::write_manifest;
use crate::workdir::Workdir;

pub fn prepare(cfg: &RunConfig) -> Result<()> {
    let workdir = Workdir::create(&cfg.workdir)?;
    let _lock = workdir.lock()?;

    let store = load_dataset(&cfg.train_path, &cfg.valid_path, &cfg.test_path)?;
    store.save(&workdir.store_dir())?;

    let pipeline_cfg = cfg.pipeline_config();
    let prepared = prepare_relations(&store, &pipeline_cfg, &[]);
    save_pair_sets(&workdir.pair_sets(), &prepared.pair_sets)?;
    save_pair_sets(&workdir.augmented(), &prepared.augmented)?;
    save_profiles(&workdir.profiles(), &prepared.profiles, cfg.delta_rcwc)?;
    let mut links = String::from("# kgboost subrelation links v1\n");
    for (r1, r2) in &prepared.links {
        links.push_str(&format!("{} {}\n", r1.0, r2.0));
    }
    std::fs::write(workdir.subrelations(), links)?;

    println!(
        "dataset: {} entities, {} relations, {} / {} / {} train/valid/test triples",
        store.num_entities(),
        store.num_relations(),
        store.train.len(),
        store.valid.len(),
        store.test.len()
    );
    println!(
        "relations: {} forward, {} with inverses; {} subrelation links",
        store.num_relations(),
        2 * store.num_relations(),
        prepared.links.len()
    );
    println!("artifacts written to {}", workdir.root().display());
    Ok(())
}

fn load_store(workdir: &Workdir) -> Result<TripleStore> {
    TripleStore::load(&workdir.store_dir())
        .map_err(|e| anyhow!("{e} (did `prepare` run in this workdir?)"))
}

pub fn train_embeddings(
    cfg: &RunConfig,
    kind: Option<&str>,
    dim: Option<usize>,
    resume: bool,
) -> Result<()> {
    let workdir = Workdir::open(&cfg.workdir)?;
    let _lock = workdir.lock()?;
    let store = load_store(&workdir)?;

    let mut train_cfg = cfg.embedding_config();
    if let Some(kind) = kind {
        train_cfg.kind = parse_kind(kind)?;
    }
    if let Some(dim) = dim {
        train_cfg.dim = dim;
    }

    let resume_state = if resume {
        let ckpt = workdir.embedding_checkpoint();
        if ckpt.exists() {
            let step: usize = std::fs::read_to_string(workdir.embedding_checkpoint_step())?
                .trim()
                .parse()
                .context("bad checkpoint step file")?;
            info!("resuming from checkpoint at step {}", step);
            Some((EmbeddingModel::load(&ckpt)?, step))
        } else {
            bail!("--resume given but {} does not exist", ckpt.display());
        }
    } else {
        None
    };

    let log_every = cfg.embedding_log_interval.max(1);
    let ckpt_every = cfg.embedding_checkpoint_interval;
    let valid_sample = cfg.embedding_valid_sample;
    let mut result: Result<()> = Ok(());
    let model = train_embeddings_from(&store, &train_cfg, resume_state, |model, step, loss| {
        if (step + 1) % log_every == 0 {
            let mrr = validation_mrr(model, &store, valid_sample);
            info!("step {:>7}: batch loss {:.6}, valid mrr {:.6}", step + 1, loss, mrr);
        }
        if ckpt_every > 0 && (step + 1) % ckpt_every == 0 && result.is_ok() {
            result = checkpoint(&workdir, model, step + 1);
        }
    })?;
    result?;

    model.save(&workdir.embedding())?;
    checkpoint(&workdir, &model, train_cfg.steps)?;
    let mrr = validation_mrr(&model, &store, valid_sample);
    println!(
        "embedding model ({}, d={}) written to {}; validation mrr {:.6}",
        train_cfg.kind.name(),
        train_cfg.dim,
        workdir.embedding().display(),
        mrr
    );
    Ok(())
}

fn checkpoint(workdir: &Workdir, model: &EmbeddingModel, step: usize) -> Result<()> {
    model.save(&workdir.embedding_checkpoint())?;
    std::fs::write(workdir.embedding_checkpoint_step(), format!("{}\n", step))?;
    Ok(())
}

fn load_prepared(workdir: &Workdir, store: &TripleStore) -> Result<PreparedRelations> {
    let pair_sets = load_pair_sets(&workdir.pair_sets())?;
    let augmented = load_pair_sets(&workdir.augmented())?;
    let profiles = load_profiles(&workdir.profiles())?;
    if pair_sets.len() != 2 * store.num_relations() {
        bail!(
            "pair sets cover {} relations but the store has {} (stale artifacts?)",
            pair_sets.len(),
            2 * store.num_relations()
        );
    }
    Ok(PreparedRelations {
        pair_sets,
        augmented,
        links: Vec::new(),
        profiles,
    })
}

pub fn train_classifiers(cfg: &RunConfig, resume: bool) -> Result<()> {
    let workdir = Workdir::open(&cfg.workdir)?;
    let _lock = workdir.lock()?;
    let store = load_store(&workdir)?;
    let prepared = load_prepared(&workdir, &store)?;
    let embeddings = EmbeddingModel::load(&workdir.embedding())
        .map_err(|e| anyhow!("{e} (did `train-embeddings` run?)"))?;
    let pipeline_cfg = cfg.pipeline_config();

    let total = prepared.augmented.len();
    let mut trained = 0usize;
    let mut skipped = 0usize;
    let mut fallbacks = 0usize;
    for (rel, positives) in &prepared.augmented {
        let model_path = workdir.classifier(rel.0);
        let marker_path = workdir.fallback_marker(rel.0);
        if resume && (model_path.exists() || marker_path.exists()) {
            skipped += 1;
            continue;
        }
        let scorer = train_relation(
            *rel,
            positives,
            &prepared.profiles[rel],
            &embeddings,
            store.num_entities(),
            &pipeline_cfg,
            &[],
        )?;
        match scorer {
            Some(ensemble) => {
                ensemble.save(&model_path, *rel)?;
                trained += 1;
                info!(
                    "relation {:>4} ({}): {} trees on {} positives [{}/{}]",
                    rel.0,
                    store.relation_name(*rel),
                    ensemble.len(),
                    positives.len(),
                    trained + skipped + fallbacks,
                    total
                );
            }
            None => {
                std::fs::write(&marker_path, "fallback distance\n")?;
                fallbacks += 1;
                info!(
                    "relation {:>4} ({}): fallback marker ({} positives)",
                    rel.0,
                    store.relation_name(*rel),
                    positives.len()
                );
            }
        }
    }
    println!(
        "classifiers: {} trained, {} fallback markers, {} skipped (resume), {} total slots",
        trained, fallbacks, skipped, total
    );
    Ok(())
}

fn load_scorers(
    workdir: &Workdir,
    relations: impl Iterator<Item = RelationId>,
) -> Result<BTreeMap<RelationId, RelationScorer>> {
    let mut scorers = BTreeMap::new();
    for rel in relations {
        let model_path = workdir.classifier(rel.0);
        let marker_path = workdir.fallback_marker(rel.0);
        if model_path.exists() {
            let (file_rel, ensemble) = kgboost::gbt::TreeEnsemble::load(&model_path)?;
            if file_rel != rel {
                bail!(
                    "{} claims relation {} but slot is {}",
                    model_path.display(),
                    file_rel.0,
                    rel.0
                );
            }
            scorers.insert(rel, RelationScorer::Ensemble(ensemble));
        } else if marker_path.exists() {
            scorers.insert(rel, RelationScorer::DistanceFallback);
        } else {
            bail!(
                "no classifier or fallback marker for relation {} (run `train-classifiers`)",
                rel.0
            );
        }
    }
    Ok(scorers)
}

pub fn evaluate_cmd(cfg: &RunConfig, subset: Option<usize>, ablate: &[String]) -> Result<()> {
    let workdir = Workdir::open(&cfg.workdir)?;
    let _lock = workdir.lock()?;
    let store = load_store(&workdir)?;
    let subset = subset.unwrap_or(cfg.eval_subset);
    let pipeline_cfg = cfg.pipeline_config();
    let embeddings = EmbeddingModel::load(&workdir.embedding())?;

    let (report, out_dir) = if ablate.is_empty() {
        let prepared = load_prepared(&workdir, &store)?;
        let scorers = load_scorers(&workdir, prepared.profiles.keys().copied())?;
        let predictor = Predictor {
            embeddings: &embeddings,
            profiles: &prepared.profiles,
            scorers: &scorers,
            delta_lcw: cfg.delta_lcw,
            lcwa_enabled: true,
        };
        (evaluate(&store, &predictor, subset), workdir.root().to_owned())
    } else {
        let targets = parse_ablations(ablate)?;
        info!("ablation run disabling {:?}; classifiers retrain in memory", targets);
        let report = ablation_run(&store, &embeddings, &pipeline_cfg, &targets, subset)?;
        let dir = workdir.root().join("ablations").join(ablate.join("+"));
        std::fs::create_dir_all(&dir)?;
        (report, dir)
    };

    save_reports(&out_dir, &report, &store)?;
    write_manifest(
        &out_dir.join("manifest.txt"),
        cfg,
        ablate,
        &[("embedding", workdir.embedding().as_path())],
    )?;

    let mut stdout = std::io::stdout().lock();
    kgboost::eval::write_human_report(&mut stdout, &report)?;
    writeln!(stdout, "\nreports written to {}", out_dir.display())?;
    Ok(())
}

pub fn predict(cfg: &RunConfig, head: &str, relation: &str, k: usize) -> Result<()> {
    let workdir = Workdir::open(&cfg.workdir)?;
    let _lock = workdir.lock()?;
    let store = load_store(&workdir)?;
    let head_id = store.entity_id(head)?;
    let rel_id = store.relation_id(relation)?;
    let profiles = load_profiles(&workdir.profiles())?;
    let embeddings = EmbeddingModel::load(&workdir.embedding())?;
    let scorers = load_scorers(&workdir, profiles.keys().copied())?;
    let predictor = Predictor {
        embeddings: &embeddings,
        profiles: &profiles,
        scorers: &scorers,
        delta_lcw: cfg.delta_lcw,
        lcwa_enabled: true,
    };

    let mut buf = Vec::new();
    let mut scored: Vec<(u32, f64)> = (0..store.num_entities() as u32)
        .map(|t| {
            (
                t,
                predictor.score_buffered(rel_id, head_id, kgboost::EntityId(t), &mut buf),
            )
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(k);

    let mut stdout = std::io::stdout().lock();
    for (t, score) in scored {
        writeln!(stdout, "{}\t{}", store.entity_name(kgboost::EntityId(t)), score)?;
    }
    Ok(())
}
