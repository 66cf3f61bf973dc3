//! Classifier training negatives under three strategies: naive tail
//! corruption, range-constrained corruption with co-occurrence exclusion,
//! and self-adversarial refresh from a partially trained ensemble. For any
//! fixed positive the three candidate sets form the chain
//! `adversarial ⊆ rcwc ⊆ naive`.
//!
//! Corruption is tail-only; materialized inverse relations make head
//! corruption redundant. The exclusion test runs against the relation's
//! augmented positive set (a superset of its train pairs); valid/test
//! triples are unknown at training time and are not excluded.

use std::collections::HashSet;
use std::io::Write;

use log::warn;
use rand::Rng;

use crate::error::Result;
use crate::gbt::TreeEnsemble;
use crate::kg::{EntityId, PairSet, RelationId};
use crate::relations::RelationProfile;

/// How a batch of negatives was produced.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NegativeStrategy {
    Naive,
    Rcwc,
    Adversarial,
}

impl NegativeStrategy {
    pub fn name(self) -> &'static str {
        match self {
            NegativeStrategy::Naive => "naive",
            NegativeStrategy::Rcwc => "rcwc",
            NegativeStrategy::Adversarial => "adversarial",
        }
    }
}

/// Corrupted (head, tail) pairs for one relation; duplicate-free, disjoint
/// from the relation's augmented positive set.
#[derive(Clone, Debug)]
pub struct NegativeBatch {
    pub rel: RelationId,
    pub pairs: Vec<(EntityId, EntityId)>,
    pub strategy: NegativeStrategy,
}

impl NegativeBatch {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Debug dump: relation, positive pair, strategy, then one negative per
    /// line.
    pub fn write_dump(
        &self,
        w: &mut impl Write,
        positive: (EntityId, EntityId),
    ) -> std::io::Result<()> {
        writeln!(
            w,
            "negatives relation={} positive={},{} strategy={} count={}",
            self.rel.0,
            positive.0 .0,
            positive.1 .0,
            self.strategy.name(),
            self.pairs.len()
        )?;
        for (h, t) in &self.pairs {
            writeln!(w, "{} {}", h.0, t.0)?;
        }
        Ok(())
    }
}

/// Uniform tail corruptions `(h, t')` with `(h, t') ∉ positives`, sampled
/// without replacement within the batch. When fewer than `count` valid
/// candidates exist, all of them are returned (in entity-id order) and the
/// shortfall is logged.
pub fn naive_negatives(
    rel: RelationId,
    positive: (EntityId, EntityId),
    count: usize,
    num_entities: usize,
    positives: &PairSet,
    rng: &mut impl Rng,
) -> NegativeBatch {
    let (h, _) = positive;
    let mut pairs = Vec::with_capacity(count);
    let mut seen: HashSet<EntityId> = HashSet::with_capacity(count * 2);
    let max_attempts = 30 * count + 100;
    let mut attempts = 0;
    while pairs.len() < count && attempts < max_attempts {
        attempts += 1;
        let t = EntityId(rng.gen_range(0..num_entities as u32));
        if positives.contains(h, t) || !seen.insert(t) {
            continue;
        }
        pairs.push((h, t));
    }
    if pairs.len() < count {
        // rejection sampling starved; enumerate the exact candidate set
        let mut all: Vec<(EntityId, EntityId)> = (0..num_entities as u32)
            .map(EntityId)
            .filter(|&t| !positives.contains(h, t))
            .map(|t| (h, t))
            .collect();
        if all.len() <= count {
            if all.len() < count {
                warn!(
                    "relation {}: only {} naive candidates for {} requested",
                    rel.0,
                    all.len(),
                    count
                );
            }
            pairs = all;
        } else {
            all.retain(|&(_, t)| !seen.contains(&t));
            for cand in all {
                if pairs.len() == count {
                    break;
                }
                pairs.push(cand);
            }
        }
    }
    NegativeBatch {
        rel,
        pairs,
        strategy: NegativeStrategy::Naive,
    }
}

/// Range-constrained corruptions with co-occurrence exclusion: `t' ∈
/// range(r)`, `(h, t') ∉ positives`, and `co-occur(t, t') ≤ delta_rcwc`,
/// uniform over the valid set. An empty valid set falls back to naive
/// sampling (logged) so every positive receives negatives.
pub fn rcwc_negatives(
    rel: RelationId,
    positive: (EntityId, EntityId),
    count: usize,
    profile: &RelationProfile,
    delta_rcwc: u32,
    num_entities: usize,
    positives: &PairSet,
    rng: &mut impl Rng,
) -> NegativeBatch {
    let (h, t) = positive;
    let range = &profile.range;
    let valid = |cand: EntityId| {
        !positives.contains(h, cand) && profile.cooc_count(t, cand) <= delta_rcwc
    };
    let mut pairs = Vec::with_capacity(count);
    if !range.is_empty() {
        let mut seen: HashSet<EntityId> = HashSet::with_capacity(count * 2);
        let max_attempts = 30 * count + 100;
        let mut attempts = 0;
        while pairs.len() < count && attempts < max_attempts {
            attempts += 1;
            let cand = range[rng.gen_range(0..range.len())];
            if !valid(cand) || !seen.insert(cand) {
                continue;
            }
            pairs.push((h, cand));
        }
        if pairs.len() < count {
            let mut all: Vec<(EntityId, EntityId)> = range
                .iter()
                .copied()
                .filter(|&cand| valid(cand))
                .map(|cand| (h, cand))
                .collect();
            if all.len() <= count {
                pairs = all;
            } else {
                let chosen: HashSet<EntityId> = pairs.iter().map(|&(_, t)| t).collect();
                all.retain(|&(_, cand)| !chosen.contains(&cand));
                for cand in all {
                    if pairs.len() == count {
                        break;
                    }
                    pairs.push(cand);
                }
            }
        }
    }
    if pairs.is_empty() {
        warn!(
            "relation {}: rcwc candidate set empty for positive ({}, {}), falling back to naive",
            rel.0, h.0, t.0
        );
        return naive_negatives(rel, positive, count, num_entities, positives, rng);
    }
    NegativeBatch {
        rel,
        pairs,
        strategy: NegativeStrategy::Rcwc,
    }
}

/// Pool negatives the partial ensemble still classifies as positive
/// (predicted probability ≥ `tau_adv`), highest score first; at most `count`
/// survive. Equal scores keep their pool order.
pub fn adversarial_negatives(
    rel: RelationId,
    base_pool: &NegativeBatch,
    partial_ensemble: &TreeEnsemble,
    features: impl Fn(EntityId, EntityId) -> Vec<f32>,
    tau_adv: f64,
    count: usize,
) -> Result<NegativeBatch> {
    let mut scored: Vec<(f64, (EntityId, EntityId))> = Vec::new();
    for &(h, t) in &base_pool.pairs {
        let score = partial_ensemble.predict(&features(h, t))?;
        if score >= tau_adv {
            scored.push((score, (h, t)));
        }
    }
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    scored.truncate(count);
    Ok(NegativeBatch {
        rel,
        pairs: scored.into_iter().map(|(_, p)| p).collect(),
        strategy: NegativeStrategy::Adversarial,
    })
}
