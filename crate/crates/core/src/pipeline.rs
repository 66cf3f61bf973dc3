//! Per-relation training orchestration and the gated link-prediction
//! scorer.
//!
//! Training runs in two stages per relation: the first `(1−ρ)·K` trees see
//! the positives against a base pool of negatives (range-constrained when
//! the relation's range is narrow, naive otherwise); the remaining trees see
//! only the base-pool negatives the partial ensemble still misclassifies,
//! re-mined once per refresh. Relations with too few positives get no
//! classifier and fall back to embedding-distance scoring.

use std::collections::BTreeMap;

use log::{info, warn};

use crate::embedding::EmbeddingModel;
use crate::error::Result;
use crate::gbt::{
    sigmoid, GbtConfig, LabeledMatrix, MatrixBuilder, Stage, StageSource, TreeEnsemble,
};
use crate::kg::{EntityId, PairSet, PairSetMap, RelationId, TripleStore};
use crate::relations::{
    augment_positives, build_profiles, detect_subrelations, ProfileParams, RelationProfile,
};
use crate::rng;
use crate::sampling::{
    adversarial_negatives, naive_negatives, rcwc_negatives, NegativeBatch, NegativeStrategy,
};

/// Base negative-sampling strategy for stage-1 pools.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BaseStrategy {
    /// Range-constrained when `|range(r)| < 0.5·|E|`, naive otherwise.
    Auto,
    Naive,
    Rcwc,
}

/// Modules that can be bypassed for ablation runs.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum AblationTarget {
    /// Skip subrelation detection and positive augmentation.
    RelationInference,
    /// Sample base negatives naively regardless of relation ranges.
    Rcwc,
    /// Score candidates with the raw classifier probability.
    LcwaPrediction,
}

impl std::str::FromStr for AblationTarget {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relation-inference" => Ok(AblationTarget::RelationInference),
            "rcwc" => Ok(AblationTarget::Rcwc),
            "lcwa-prediction" => Ok(AblationTarget::LcwaPrediction),
            other => Err(crate::error::Error::UnknownAblation(other.to_owned())),
        }
    }
}

/// End-to-end pipeline parameters.
#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub delta_sub: f64,
    pub delta_rcwc: u32,
    pub delta_lcw: f64,
    pub lcw_folds: usize,
    pub negatives_per_positive: usize,
    pub gbt: GbtConfig,
    /// Fraction ρ of the estimators trained on adversarial negatives.
    pub adversarial_fraction: f64,
    /// How many times the adversarial pool is re-mined.
    pub adversarial_refreshes: usize,
    /// Classifier probability above which a pool negative counts as
    /// misclassified.
    pub tau_adv: f64,
    /// Relations with fewer augmented positives fall back to distance
    /// scoring.
    pub min_positives: usize,
    pub base_strategy: BaseStrategy,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            delta_sub: 0.8,
            delta_rcwc: 1,
            delta_lcw: 0.9,
            lcw_folds: 5,
            negatives_per_positive: 32,
            gbt: GbtConfig::default(),
            adversarial_fraction: 0.5,
            adversarial_refreshes: 1,
            tau_adv: 0.5,
            min_positives: 4,
            base_strategy: BaseStrategy::Auto,
            seed: 42,
        }
    }
}

/// Relation-analysis artifacts the trainer and scorer share.
pub struct PreparedRelations {
    /// Forward + inverse pair sets straight from the train split.
    pub pair_sets: PairSetMap,
    /// Positive sets after subrelation augmentation.
    pub augmented: PairSetMap,
    /// Detected (r1, r2) subrelation links.
    pub links: Vec<(RelationId, RelationId)>,
    /// Per-relation priors from the pre-augmentation sets.
    pub profiles: BTreeMap<RelationId, RelationProfile>,
}

/// Builds pair sets over `[0, 2R)`, detects subrelations, augments
/// positives, and profiles every relation. With
/// [`AblationTarget::RelationInference`] disabled the augmented sets equal
/// the originals.
pub fn prepare_relations(
    store: &TripleStore,
    config: &PipelineConfig,
    ablations: &[AblationTarget],
) -> PreparedRelations {
    let forward = crate::kg::build_pair_sets(store);
    let pair_sets = crate::kg::add_inverse_relations(&forward);
    let (links, augmented) = if ablations.contains(&AblationTarget::RelationInference) {
        (Vec::new(), pair_sets.clone())
    } else {
        let links = detect_subrelations(&pair_sets, config.delta_sub);
        let augmented = augment_positives(&pair_sets, &links);
        (links, augmented)
    };
    let profiles = build_profiles(
        &pair_sets,
        ProfileParams {
            delta_sub: config.delta_sub,
            lcw_folds: config.lcw_folds,
        },
    );
    PreparedRelations {
        pair_sets,
        augmented,
        links,
        profiles,
    }
}

fn effective_base_strategy(
    config: &PipelineConfig,
    profile: &RelationProfile,
    num_entities: usize,
    ablations: &[AblationTarget],
) -> NegativeStrategy {
    if ablations.contains(&AblationTarget::Rcwc) {
        return NegativeStrategy::Naive;
    }
    match config.base_strategy {
        BaseStrategy::Naive => NegativeStrategy::Naive,
        BaseStrategy::Rcwc => NegativeStrategy::Rcwc,
        BaseStrategy::Auto => {
            if 2 * profile.range.len() < num_entities {
                NegativeStrategy::Rcwc
            } else {
                NegativeStrategy::Naive
            }
        }
    }
}

/// Splits `total` trees into the stage-1 count and per-refresh stage-2
/// counts.
fn stage_plan(total: usize, fraction: f64, refreshes: usize) -> (usize, Vec<usize>) {
    let stage2_total = (fraction * total as f64).round() as usize;
    let stage2_total = stage2_total.min(total);
    if stage2_total == 0 {
        return (total, Vec::new());
    }
    let refreshes = refreshes.max(1).min(stage2_total);
    let base = stage2_total / refreshes;
    let extra = stage2_total % refreshes;
    let chunks = (0..refreshes)
        .map(|i| base + usize::from(i < extra))
        .collect();
    (total - stage2_total, chunks)
}

struct RelationStages<'a> {
    rel: RelationId,
    positives: &'a [(EntityId, EntityId)],
    base_pool: Vec<(EntityId, EntityId)>,
    embeddings: &'a EmbeddingModel,
    tau_adv: f64,
    stage1: Option<usize>,
    refreshes: std::vec::IntoIter<usize>,
}

impl RelationStages<'_> {
    fn matrix_with_negatives(&self, negatives: &[(EntityId, EntityId)]) -> LabeledMatrix {
        let mut b = MatrixBuilder::with_capacity(
            self.embeddings.feature_dim(),
            self.positives.len() + negatives.len(),
        );
        for &(h, t) in self.positives {
            b.push_row(&self.embeddings.feature_vector(h, t), 1);
        }
        for &(h, t) in negatives {
            b.push_row(&self.embeddings.feature_vector(h, t), 0);
        }
        b.build()
    }
}

impl StageSource for RelationStages<'_> {
    fn next_stage(&mut self, partial: &TreeEnsemble) -> Option<Stage> {
        if let Some(trees) = self.stage1.take() {
            return Some(Stage {
                matrix: self.matrix_with_negatives(&self.base_pool),
                trees,
            });
        }
        let trees = self.refreshes.next()?;
        if partial.is_empty() {
            return Some(Stage {
                matrix: self.matrix_with_negatives(&self.base_pool),
                trees,
            });
        }
        let pool = NegativeBatch {
            rel: self.rel,
            pairs: self.base_pool.clone(),
            strategy: NegativeStrategy::Naive,
        };
        let mined = adversarial_negatives(
            self.rel,
            &pool,
            partial,
            |h, t| self.embeddings.feature_vector(h, t),
            self.tau_adv,
            self.base_pool.len(),
        )
        .expect("pool features match ensemble dimension");
        if mined.is_empty() {
            info!(
                "relation {}: no misclassified negatives, continuing on base pool",
                self.rel.0
            );
            return Some(Stage {
                matrix: self.matrix_with_negatives(&self.base_pool),
                trees,
            });
        }
        Some(Stage {
            matrix: self.matrix_with_negatives(&mined.pairs),
            trees,
        })
    }
}

/// Trains the boosted classifier of one relation; `Ok(None)` flags a
/// relation with too few positives for fallback scoring.
pub fn train_relation(
    rel: RelationId,
    augmented_positives: &PairSet,
    profile: &RelationProfile,
    embeddings: &EmbeddingModel,
    num_entities: usize,
    config: &PipelineConfig,
    ablations: &[AblationTarget],
) -> Result<Option<TreeEnsemble>> {
    let positives = augmented_positives.sorted_pairs();
    if positives.len() < config.min_positives {
        warn!(
            "relation {}: {} positives < {} minimum, using fallback scoring",
            rel.0,
            positives.len(),
            config.min_positives
        );
        return Ok(None);
    }
    let strategy = effective_base_strategy(config, profile, num_entities, ablations);
    let mut rng = rng::derive(config.seed, rng::PURPOSE_NEGATIVES, rel.0 as u64);
    let mut base_pool =
        Vec::with_capacity(positives.len() * config.negatives_per_positive);
    for &(h, t) in &positives {
        let batch = match strategy {
            NegativeStrategy::Rcwc => rcwc_negatives(
                rel,
                (h, t),
                config.negatives_per_positive,
                profile,
                config.delta_rcwc,
                num_entities,
                augmented_positives,
                &mut rng,
            ),
            _ => naive_negatives(
                rel,
                (h, t),
                config.negatives_per_positive,
                num_entities,
                augmented_positives,
                &mut rng,
            ),
        };
        base_pool.extend(batch.pairs);
    }

    let (stage1, refreshes) = stage_plan(
        config.gbt.num_estimators,
        config.adversarial_fraction,
        config.adversarial_refreshes,
    );
    let mut source = RelationStages {
        rel,
        positives: &positives,
        base_pool,
        embeddings,
        tau_adv: config.tau_adv,
        stage1: Some(stage1).filter(|&n| n > 0),
        refreshes: refreshes.into_iter(),
    };
    let ensemble = crate::gbt::train_ensemble(&mut source, &config.gbt)?;
    Ok(Some(ensemble))
}

/// A relation's scoring backend.
#[derive(Debug)]
pub enum RelationScorer {
    Ensemble(TreeEnsemble),
    /// Monotone squash of the negative embedding distance, `σ(γ − d)`.
    DistanceFallback,
}

/// Trains classifiers for every relation in `[0, 2R)`, in relation order.
/// `on_trained` observes each finished relation (for progress logs and
/// checkpointing).
pub fn train_all_relations<F>(
    store: &TripleStore,
    prepared: &PreparedRelations,
    embeddings: &EmbeddingModel,
    config: &PipelineConfig,
    ablations: &[AblationTarget],
    mut on_trained: F,
) -> Result<BTreeMap<RelationId, RelationScorer>>
where
    F: FnMut(RelationId, &RelationScorer),
{
    let mut scorers = BTreeMap::new();
    for (rel, positives) in &prepared.augmented {
        let scorer = match train_relation(
            *rel,
            positives,
            &prepared.profiles[rel],
            embeddings,
            store.num_entities(),
            config,
            ablations,
        )? {
            Some(ensemble) => RelationScorer::Ensemble(ensemble),
            None => RelationScorer::DistanceFallback,
        };
        on_trained(*rel, &scorer);
        scorers.insert(*rel, scorer);
    }
    Ok(scorers)
}

/// Range gate of the final score: relations whose lcw index clears
/// `delta_lcw` zero out candidates outside their observed range; everything
/// else passes `yhat` through.
pub fn lcwa_score(profile: &RelationProfile, tail: EntityId, yhat: f64, delta_lcw: f64) -> f64 {
    if profile.lcw > delta_lcw && !profile.in_range(tail) {
        0.0
    } else {
        yhat
    }
}

/// Bundles everything needed to score `(h, r, t')` candidates.
pub struct Predictor<'a> {
    pub embeddings: &'a EmbeddingModel,
    pub profiles: &'a BTreeMap<RelationId, RelationProfile>,
    pub scorers: &'a BTreeMap<RelationId, RelationScorer>,
    pub delta_lcw: f64,
    /// Cleared by the lcwa-prediction ablation.
    pub lcwa_enabled: bool,
}

impl Predictor<'_> {
    /// Classifier probability, or the distance fallback when the relation
    /// has no ensemble.
    pub fn raw_probability(&self, rel: RelationId, head: EntityId, tail: EntityId) -> f64 {
        self.raw_probability_buffered(rel, head, tail, &mut Vec::new())
    }

    fn raw_probability_buffered(
        &self,
        rel: RelationId,
        head: EntityId,
        tail: EntityId,
        buf: &mut Vec<f32>,
    ) -> f64 {
        match self.scorers.get(&rel) {
            Some(RelationScorer::Ensemble(ensemble)) => {
                buf.clear();
                buf.extend(self.embeddings.entity(head).iter().map(|&v| v as f32));
                buf.extend(self.embeddings.entity(tail).iter().map(|&v| v as f32));
                ensemble.predict(buf).expect("feature dimension matches")
            }
            Some(RelationScorer::DistanceFallback) => self.distance_fallback(rel, head, tail),
            None => {
                warn!("relation {}: no scorer, using distance fallback", rel.0);
                self.distance_fallback(rel, head, tail)
            }
        }
    }

    fn distance_fallback(&self, rel: RelationId, head: EntityId, tail: EntityId) -> f64 {
        sigmoid(self.embeddings.gamma() - self.embeddings.distance(head, rel, tail))
    }

    /// Final candidate score: the classifier probability through the LCWA
    /// gate.
    pub fn score(&self, rel: RelationId, head: EntityId, tail: EntityId) -> f64 {
        self.score_buffered(rel, head, tail, &mut Vec::new())
    }

    /// `score` with a caller-owned feature buffer; candidate loops reuse it
    /// to avoid per-candidate allocation.
    pub fn score_buffered(
        &self,
        rel: RelationId,
        head: EntityId,
        tail: EntityId,
        buf: &mut Vec<f32>,
    ) -> f64 {
        if self.lcwa_enabled {
            let profile = &self.profiles[&rel];
            if profile.lcw > self.delta_lcw && !profile.in_range(tail) {
                return 0.0;
            }
        }
        self.raw_probability_buffered(rel, head, tail, buf)
    }
}
