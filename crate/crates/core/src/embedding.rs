//! Distance-based entity/relation embeddings.
//!
//! Two model families are supported: translational vectors in real space
//! (distance `‖h + r − t‖`) and rotations in complex space (distance
//! `‖h ∘ r − t‖²`, with relation coordinates constrained to unit modulus by
//! storing phases). Embeddings are trained with a negative log likelihood
//! loss whose negative terms carry softmax self-adversarial weights; the
//! weights are treated as constants during the gradient step.
//!
//! Trained entity vectors are frozen and served as classifier features:
//! classifiers never backpropagate into them.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kg::{EntityId, RelationId, Triple, TripleStore};
use crate::rng;

/// Model family.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EmbeddingKind {
    /// Real vectors; relations are translations.
    TranslationalReal,
    /// Complex vectors; relations are elementwise rotations (unit modulus).
    RotationalComplex,
}

impl EmbeddingKind {
    pub fn name(self) -> &'static str {
        match self {
            EmbeddingKind::TranslationalReal => "translational-real",
            EmbeddingKind::RotationalComplex => "rotational-complex",
        }
    }
}

/// Entity/relation embedding matrices plus the margin γ.
///
/// Entity rows are `d` reals for the translational kind and `2d` reals for
/// the rotational kind, laid out as all real parts then all imaginary parts.
/// Relation rows are `d` reals: a translation vector, or rotation phases in
/// `[0, 2π)`.
#[derive(Clone, Debug)]
pub struct EmbeddingModel {
    kind: EmbeddingKind,
    num_entities: usize,
    num_relations: usize,
    dim: usize,
    gamma: f64,
    entities: Vec<f64>,
    relations: Vec<f64>,
}

impl EmbeddingModel {
    pub fn from_parts(
        kind: EmbeddingKind,
        dim: usize,
        gamma: f64,
        num_entities: usize,
        num_relations: usize,
        entities: Vec<f64>,
        relations: Vec<f64>,
    ) -> Self {
        let width = match kind {
            EmbeddingKind::TranslationalReal => dim,
            EmbeddingKind::RotationalComplex => 2 * dim,
        };
        assert_eq!(entities.len(), num_entities * width);
        assert_eq!(relations.len(), num_relations * dim);
        EmbeddingModel {
            kind,
            num_entities,
            num_relations,
            dim,
            gamma,
            entities,
            relations,
        }
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    /// Forward relation count; inverse ids are scored with head and tail
    /// swapped.
    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    fn entity_width(&self) -> usize {
        match self.kind {
            EmbeddingKind::TranslationalReal => self.dim,
            EmbeddingKind::RotationalComplex => 2 * self.dim,
        }
    }

    pub fn entity(&self, e: EntityId) -> &[f64] {
        let w = self.entity_width();
        &self.entities[e.index() * w..(e.index() + 1) * w]
    }

    pub fn relation(&self, r: usize) -> &[f64] {
        &self.relations[r * self.dim..(r + 1) * self.dim]
    }

    /// `‖h + r − t‖` for the translational kind.
    pub fn transe_distance(&self, h: EntityId, rel: RelationId, t: EntityId) -> Result<f64> {
        if self.kind != EmbeddingKind::TranslationalReal {
            return Err(Error::KindMismatch {
                expected: EmbeddingKind::TranslationalReal.name(),
                actual: self.kind.name(),
            });
        }
        let (r, h, t) = self.resolve(rel, h, t);
        Ok(transe_distance_raw(self.entity(h), self.relation(r), self.entity(t)))
    }

    /// `‖h ∘ r − t‖²` for the rotational kind.
    pub fn rotate_distance(&self, h: EntityId, rel: RelationId, t: EntityId) -> Result<f64> {
        if self.kind != EmbeddingKind::RotationalComplex {
            return Err(Error::KindMismatch {
                expected: EmbeddingKind::RotationalComplex.name(),
                actual: self.kind.name(),
            });
        }
        let (r, h, t) = self.resolve(rel, h, t);
        let phases = self.relation(r);
        let cos: Vec<f64> = phases.iter().map(|p| p.cos()).collect();
        let sin: Vec<f64> = phases.iter().map(|p| p.sin()).collect();
        Ok(rotate_distance_raw(
            self.entity(h),
            &cos,
            &sin,
            self.entity(t),
            self.dim,
        ))
    }

    /// Distance under whichever kind the model is; relation ids in `[R, 2R)`
    /// score the forward relation with head and tail swapped.
    pub fn distance(&self, h: EntityId, rel: RelationId, t: EntityId) -> f64 {
        match self.kind {
            EmbeddingKind::TranslationalReal => self.transe_distance(h, rel, t).unwrap(),
            EmbeddingKind::RotationalComplex => self.rotate_distance(h, rel, t).unwrap(),
        }
    }

    fn resolve(&self, rel: RelationId, h: EntityId, t: EntityId) -> (usize, EntityId, EntityId) {
        let nf = self.num_relations as u32;
        if rel.is_inverse(nf) {
            (rel.inverse(nf).index(), t, h)
        } else {
            (rel.index(), h, t)
        }
    }

    /// Softmax self-adversarial weights `p_i ∝ exp(α (γ − d_i))` over a
    /// batch of corrupted triples.
    pub fn adversarial_weights(&self, negatives: &[Triple], alpha: f64) -> Vec<f64> {
        let logits: Vec<f64> = negatives
            .iter()
            .map(|n| alpha * (self.gamma - self.distance(n.head, n.rel, n.tail)))
            .collect();
        softmax(&logits)
    }

    /// Classifier feature row: the head entity's coordinates followed by the
    /// tail's. Length `2d` (real) or `4d` (complex).
    pub fn feature_vector(&self, h: EntityId, t: EntityId) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.feature_dim());
        out.extend(self.entity(h).iter().map(|&v| v as f32));
        out.extend(self.entity(t).iter().map(|&v| v as f32));
        out
    }

    pub fn feature_dim(&self) -> usize {
        2 * self.entity_width()
    }

    /// Writes the model in the documented binary layout.
    ///
    /// Header (little-endian): magic `KGBEMB1\0`; kind byte (0 translational,
    /// 1 rotational); layout byte (0 plain rows, 1 complex rows split as real
    /// parts then imaginary parts); 6 reserved zero bytes; `|E|` u64; `|R|`
    /// u64; `d` u64; γ f64. Then the entity matrix (row-major, `|E| × width`
    /// f64) and the relation matrix (`|R| × d` f64).
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        w.write_all(b"KGBEMB1\0").map_err(io)?;
        let (kind, layout) = match self.kind {
            EmbeddingKind::TranslationalReal => (0u8, 0u8),
            EmbeddingKind::RotationalComplex => (1u8, 1u8),
        };
        w.write_all(&[kind, layout, 0, 0, 0, 0, 0, 0]).map_err(io)?;
        w.write_all(&(self.num_entities as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.num_relations as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&(self.dim as u64).to_le_bytes()).map_err(io)?;
        w.write_all(&self.gamma.to_le_bytes()).map_err(io)?;
        for v in self.entities.iter().chain(&self.relations) {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<EmbeddingModel> {
        let bad = |reason: &str| Error::BadModelFile {
            path: path.to_owned(),
            reason: reason.to_owned(),
        };
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let mut header = [0u8; 48];
        r.read_exact(&mut header).map_err(|_| bad("truncated header"))?;
        if &header[0..8] != b"KGBEMB1\0" {
            return Err(bad("bad magic"));
        }
        let kind = match header[8] {
            0 => EmbeddingKind::TranslationalReal,
            1 => EmbeddingKind::RotationalComplex,
            _ => return Err(bad("unknown kind byte")),
        };
        let expected_layout = match kind {
            EmbeddingKind::TranslationalReal => 0u8,
            EmbeddingKind::RotationalComplex => 1u8,
        };
        if header[9] != expected_layout {
            return Err(bad("layout tag does not match kind"));
        }
        let u64_at = |i: usize| u64::from_le_bytes(header[i..i + 8].try_into().unwrap());
        let num_entities = u64_at(16) as usize;
        let num_relations = u64_at(24) as usize;
        let dim = u64_at(32) as usize;
        let gamma = f64::from_le_bytes(header[40..48].try_into().unwrap());
        let width = match kind {
            EmbeddingKind::TranslationalReal => dim,
            EmbeddingKind::RotationalComplex => 2 * dim,
        };
        let n_floats = num_entities * width + num_relations * dim;
        let mut bytes = vec![0u8; n_floats * 8];
        r.read_exact(&mut bytes).map_err(|_| bad("truncated matrices"))?;
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
            return Err(bad("trailing bytes after matrices"));
        }
        let mut floats = Vec::with_capacity(n_floats);
        for chunk in bytes.chunks_exact(8) {
            floats.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        let relations = floats.split_off(num_entities * width);
        Ok(EmbeddingModel {
            kind,
            num_entities,
            num_relations,
            dim,
            gamma,
            entities: floats,
            relations,
        })
    }
}

fn transe_distance_raw(h: &[f64], r: &[f64], t: &[f64]) -> f64 {
    let mut sum = 0.0;
    for i in 0..h.len() {
        let u = h[i] + r[i] - t[i];
        sum += u * u;
    }
    sum.sqrt()
}

fn rotate_distance_raw(h: &[f64], cos: &[f64], sin: &[f64], t: &[f64], dim: usize) -> f64 {
    let mut sum = 0.0;
    for j in 0..dim {
        let (a, b) = (h[j], h[dim + j]);
        let (e, f) = (t[j], t[dim + j]);
        let u_re = a * cos[j] - b * sin[j] - e;
        let u_im = a * sin[j] + b * cos[j] - f;
        sum += u_re * u_re + u_im * u_im;
    }
    sum
}

/// Numerically stable softmax; a singleton input maps to `[1.0]`.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / total).collect()
}

/// `−log σ(x)`, computed as a stable softplus of `−x`.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Self-adversarial negative log likelihood of one positive against its
/// corrupted negatives:
/// `−log σ(γ − d(h,t)) − Σ_i p_i · log σ(d(h'_i,t'_i) − γ)`.
pub fn nll_loss(model: &EmbeddingModel, positive: Triple, negatives: &[Triple], alpha: f64) -> f64 {
    let weights = model.adversarial_weights(negatives, alpha);
    nll_loss_with_weights(model, positive, negatives, &weights)
}

/// The loss with externally fixed weights; this is the function the
/// stop-gradient convention differentiates.
pub fn nll_loss_with_weights(
    model: &EmbeddingModel,
    positive: Triple,
    negatives: &[Triple],
    weights: &[f64],
) -> f64 {
    let gamma = model.gamma;
    let d_pos = model.distance(positive.head, positive.rel, positive.tail);
    let mut loss = neg_log_sigmoid(gamma - d_pos);
    for (n, &p) in negatives.iter().zip(weights) {
        let d_neg = model.distance(n.head, n.rel, n.tail);
        loss += p * neg_log_sigmoid(d_neg - gamma);
    }
    loss
}

/// Sparse gradient of the loss for one positive example, keyed by entity and
/// (forward) relation ids. Deterministic iteration order.
#[derive(Debug, Default)]
pub struct SparseGrad {
    pub entities: BTreeMap<u32, Vec<f64>>,
    pub relations: BTreeMap<u32, Vec<f64>>,
}

impl SparseGrad {
    fn entity_mut(&mut self, e: EntityId, width: usize) -> &mut Vec<f64> {
        self.entities.entry(e.0).or_insert_with(|| vec![0.0; width])
    }

    fn relation_mut(&mut self, r: usize, dim: usize) -> &mut Vec<f64> {
        self.relations.entry(r as u32).or_insert_with(|| vec![0.0; dim])
    }
}

/// Loss and analytic gradient for one example under the stop-gradient
/// convention (adversarial weights held constant).
pub fn nll_gradient(
    model: &EmbeddingModel,
    positive: Triple,
    negatives: &[Triple],
    alpha: f64,
) -> (f64, SparseGrad) {
    let weights = model.adversarial_weights(negatives, alpha);
    let gamma = model.gamma;
    let mut grad = SparseGrad::default();

    // ∂loss/∂d is σ(d − γ) for the positive term and −p_i σ(γ − d_i) for
    // each negative term.
    let d_pos = model.distance(positive.head, positive.rel, positive.tail);
    let mut loss = neg_log_sigmoid(gamma - d_pos);
    accumulate_distance_grad(model, positive, sigmoid(d_pos - gamma), &mut grad);
    for (n, &p) in negatives.iter().zip(&weights) {
        let d_neg = model.distance(n.head, n.rel, n.tail);
        loss += p * neg_log_sigmoid(d_neg - gamma);
        accumulate_distance_grad(model, *n, -p * sigmoid(gamma - d_neg), &mut grad);
    }
    (loss, grad)
}

/// Adds `coef · ∂d(h,r,t)/∂θ` into the gradient buffer.
fn accumulate_distance_grad(model: &EmbeddingModel, triple: Triple, coef: f64, grad: &mut SparseGrad) {
    let (r, h_id, t_id) = model.resolve(triple.rel, triple.head, triple.tail);
    let dim = model.dim;
    let h = model.entity(h_id);
    let t = model.entity(t_id);
    let rel = model.relation(r);
    match model.kind {
        EmbeddingKind::TranslationalReal => {
            // d = ‖u‖ with u = h + r − t; ∂d/∂h = u/‖u‖ = −∂d/∂t.
            let mut u = vec![0.0; dim];
            let mut norm_sq = 0.0;
            for i in 0..dim {
                u[i] = h[i] + rel[i] - t[i];
                norm_sq += u[i] * u[i];
            }
            let norm = norm_sq.sqrt();
            if norm < 1e-12 {
                return;
            }
            let scale = coef / norm;
            {
                let gh = grad.entity_mut(h_id, dim);
                for i in 0..dim {
                    gh[i] += scale * u[i];
                }
            }
            {
                let gt = grad.entity_mut(t_id, dim);
                for i in 0..dim {
                    gt[i] -= scale * u[i];
                }
            }
            let gr = grad.relation_mut(r, dim);
            for i in 0..dim {
                gr[i] += scale * u[i];
            }
        }
        EmbeddingKind::RotationalComplex => {
            // d = Σ_j |h_j r_j − t_j|² with r_j = e^{iθ_j}.
            let width = 2 * dim;
            for j in 0..dim {
                let (a, b) = (h[j], h[dim + j]);
                let (e, f) = (t[j], t[dim + j]);
                let (c, s) = (rel[j].cos(), rel[j].sin());
                let u_re = a * c - b * s - e;
                let u_im = a * s + b * c - f;
                let gh = grad.entity_mut(h_id, width);
                gh[j] += coef * 2.0 * (u_re * c + u_im * s);
                gh[dim + j] += coef * 2.0 * (-u_re * s + u_im * c);
                let gt = grad.entity_mut(t_id, width);
                gt[j] += coef * -2.0 * u_re;
                gt[dim + j] += coef * -2.0 * u_im;
                let gr = grad.relation_mut(r, dim);
                gr[j] += coef * 2.0 * (u_re * (-a * s - b * c) + u_im * (a * c - b * s));
            }
        }
    }
}

/// Training hyperparameters.
#[derive(Clone, Debug)]
pub struct EmbeddingTrainConfig {
    pub kind: EmbeddingKind,
    pub dim: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps: usize,
    /// Corruptions per positive.
    pub negatives: usize,
    /// Self-adversarial temperature α.
    pub alpha: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for EmbeddingTrainConfig {
    fn default() -> Self {
        EmbeddingTrainConfig {
            kind: EmbeddingKind::TranslationalReal,
            dim: 50,
            learning_rate: 0.05,
            batch_size: 256,
            steps: 2000,
            negatives: 16,
            alpha: 1.0,
            gamma: 6.0,
            seed: 42,
        }
    }
}

fn init_model(store: &TripleStore, cfg: &EmbeddingTrainConfig) -> EmbeddingModel {
    let mut rng = rng::derive(cfg.seed, rng::PURPOSE_EMBEDDING, u64::MAX);
    let width = match cfg.kind {
        EmbeddingKind::TranslationalReal => cfg.dim,
        EmbeddingKind::RotationalComplex => 2 * cfg.dim,
    };
    let bound = cfg.gamma / cfg.dim as f64;
    let entities: Vec<f64> = (0..store.num_entities() * width)
        .map(|_| rng.gen_range(-bound..bound))
        .collect();
    let relations: Vec<f64> = match cfg.kind {
        EmbeddingKind::TranslationalReal => (0..store.num_relations() * cfg.dim)
            .map(|_| rng.gen_range(-bound..bound))
            .collect(),
        EmbeddingKind::RotationalComplex => (0..store.num_relations() * cfg.dim)
            .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
            .collect(),
    };
    EmbeddingModel::from_parts(
        cfg.kind,
        cfg.dim,
        cfg.gamma,
        store.num_entities(),
        store.num_relations(),
        entities,
        relations,
    )
}

/// Trains embeddings on the train split by minibatch SGD.
pub fn train_embeddings(store: &TripleStore, cfg: &EmbeddingTrainConfig) -> Result<EmbeddingModel> {
    train_embeddings_from(store, cfg, None, |_, _, _| {})
}

/// Trainer with resume support and a per-step callback (called after each
/// applied update with the model, the step index, and the batch loss).
///
/// Each step derives its own RNG stream from (seed, step), draws the batch
/// and all corruptions up front, computes per-example gradients in parallel
/// from the step-start snapshot, and applies them in batch order. Results
/// are bitwise reproducible at any thread count, and a resumed run matches
/// an uninterrupted one.
pub fn train_embeddings_from<F>(
    store: &TripleStore,
    cfg: &EmbeddingTrainConfig,
    resume: Option<(EmbeddingModel, usize)>,
    mut on_step: F,
) -> Result<EmbeddingModel>
where
    F: FnMut(&EmbeddingModel, usize, f64),
{
    assert!(cfg.dim >= 1 && cfg.negatives >= 1 && cfg.alpha >= 0.0);
    let (mut model, start_step) = match resume {
        Some((m, step)) => (m, step),
        None => (init_model(store, cfg), 0),
    };
    let n_train = store.train.len();
    let n_entities = store.num_entities();

    for step in start_step..cfg.steps {
        let mut rng = rng::derive(cfg.seed, rng::PURPOSE_EMBEDDING, step as u64);
        // Sample the whole step's randomness before any parallel work.
        let mut examples = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let positive = store.train[rng.gen_range(0..n_train)];
            let negatives: Vec<Triple> = (0..cfg.negatives)
                .map(|_| {
                    // redraw corruptions that collide with a train triple;
                    // valid/test triples are unknown at training time
                    let mut candidate = positive;
                    for _ in 0..20 {
                        let corrupt_head = rng.gen_bool(0.5);
                        let e = EntityId(rng.gen_range(0..n_entities as u32));
                        candidate = if corrupt_head {
                            Triple::new(e, positive.rel, positive.tail)
                        } else {
                            Triple::new(positive.head, positive.rel, e)
                        };
                        if !store.contains_train(candidate.head, candidate.rel, candidate.tail) {
                            break;
                        }
                    }
                    candidate
                })
                .collect();
            examples.push((positive, negatives));
        }

        let results: Vec<(f64, SparseGrad)> = examples
            .par_iter()
            .map(|(pos, negs)| nll_gradient(&model, *pos, negs, cfg.alpha))
            .collect();

        let batch_loss: f64 = results.iter().map(|(l, _)| l).sum::<f64>() / cfg.batch_size as f64;
        if !batch_loss.is_finite() {
            return Err(Error::Diverged { step });
        }

        let scale = cfg.learning_rate / cfg.batch_size as f64;
        let width = model.entity_width();
        for (_, grad) in &results {
            for (&e, g) in &grad.entities {
                let base = e as usize * width;
                for (i, gi) in g.iter().enumerate() {
                    model.entities[base + i] -= scale * gi;
                }
            }
            for (&r, g) in &grad.relations {
                let base = r as usize * model.dim;
                for (i, gi) in g.iter().enumerate() {
                    model.relations[base + i] -= scale * gi;
                }
            }
        }
        if model.kind == EmbeddingKind::RotationalComplex {
            // keep phases canonical in [0, 2π)
            for (_, grad) in &results {
                for &r in grad.relations.keys() {
                    let base = r as usize * model.dim;
                    for v in &mut model.relations[base..base + model.dim] {
                        *v = v.rem_euclid(std::f64::consts::TAU);
                    }
                }
            }
        }
        on_step(&model, step, batch_loss);
    }
    Ok(model)
}

/// Raw tail-ranking MRR on (up to) the first `max_triples` validation
/// triples, ranking by ascending distance with mean-tie positions. A cheap
/// progress signal, not the filtered evaluation.
pub fn validation_mrr(model: &EmbeddingModel, store: &TripleStore, max_triples: usize) -> f64 {
    let n = if max_triples == 0 {
        store.valid.len()
    } else {
        store.valid.len().min(max_triples)
    };
    if n == 0 {
        return 0.0;
    }
    let sum: f64 = store.valid[..n]
        .par_iter()
        .map(|triple| {
            let d_true = model.distance(triple.head, triple.rel, triple.tail);
            let mut lower = 0usize;
            let mut ties = 0usize;
            for t in 0..store.num_entities() as u32 {
                let cand = EntityId(t);
                if cand == triple.tail {
                    continue;
                }
                let d = model.distance(triple.head, triple.rel, cand);
                if d < d_true {
                    lower += 1;
                } else if d == d_true {
                    ties += 1;
                }
            }
            1.0 / (1 + lower + (ties + 1) / 2) as f64
        })
        .sum();
    sum / n as f64
}
