//! Shared fixtures for integration tests: a structured synthetic KG,
//! benchmark-dataset discovery, and independent brute-force oracles for
//! ranking and tree splits.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::Rng;

use kgboost::gbt::{logistic_grad_hess, GbtConfig, LabeledMatrix};
use kgboost::kg::{load_dataset, EntityId, RelationId, TripleStore};

/// Directory holding benchmark datasets (`WN18RR/train.txt`, ...).
/// `KGBOOST_DATA_DIR` overrides the default `<workspace>/data`.
pub fn data_dir() -> PathBuf {
    match std::env::var_os("KGBOOST_DATA_DIR") {
        Some(dir) => PathBuf::from(dir),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"),
    }
}

/// Split files of a benchmark dataset, when provided locally.
pub fn find_dataset(name: &str) -> Option<(PathBuf, PathBuf, PathBuf)> {
    let dir = data_dir().join(name);
    let paths = (
        dir.join("train.txt"),
        dir.join("valid.txt"),
        dir.join("test.txt"),
    );
    if paths.0.exists() && paths.1.exists() && paths.2.exists() {
        Some(paths)
    } else {
        None
    }
}

/// A synthetic KG with the structure the pipeline exploits: relations with
/// confined tail ranges (`works_in`, `lives_in`), a symmetric ring
/// (`adjacent`), heavy tail co-occurrence (each subject works in two
/// departments), and a broad-range noise relation (`touches`). Test triples
/// are held out from the three structured relations only.
pub struct SynthKg {
    pub train: String,
    pub valid: String,
    pub test: String,
}

pub const SYNTH_SUBJECTS: u32 = 120;
pub const SYNTH_DEPTS: u32 = 15;
pub const SYNTH_CITIES: u32 = 15;
pub const SYNTH_DISTRACTORS: u32 = 60;

pub fn synthetic_kg(seed: u64) -> SynthKg {
    let mut rng = kgboost::rng::derive(seed, 777, 0);
    let mut train = String::new();
    let mut valid = String::new();
    let mut test = String::new();

    // works_in: two departments per subject (tails co-occur)
    for s in 0..SYNTH_SUBJECTS {
        let d1 = s % SYNTH_DEPTS;
        let d2 = (s + 3) % SYNTH_DEPTS;
        for (i, d) in [d1, d2].into_iter().enumerate() {
            let line = format!("s{}\tworks_in\tdept{}\n", s, d);
            match (s + i as u32) % 12 {
                5 => test.push_str(&line),
                9 => valid.push_str(&line),
                _ => train.push_str(&line),
            }
        }
    }
    // lives_in: one city per block of subjects
    for s in 0..SYNTH_SUBJECTS {
        let c = (s / 8) % SYNTH_CITIES;
        let line = format!("s{}\tlives_in\tcity{}\n", s, c);
        match s % 11 {
            4 => test.push_str(&line),
            8 => valid.push_str(&line),
            _ => train.push_str(&line),
        }
    }
    // adjacent: symmetric ring; only forward edges are ever held out, so
    // every subject stays in the observed tail range
    for s in 0..SYNTH_SUBJECTS {
        let fwd = format!("s{}\tadjacent\ts{}\n", s, (s + 1) % SYNTH_SUBJECTS);
        match s % 10 {
            3 => test.push_str(&fwd),
            7 => valid.push_str(&fwd),
            _ => train.push_str(&fwd),
        }
        train.push_str(&format!("s{}\tadjacent\ts{}\n", (s + 1) % SYNTH_SUBJECTS, s));
    }
    // touches: broad-range noise keeping distractors in the vocabulary
    for s in 0..SYNTH_SUBJECTS {
        let d = rng.gen_range(0..SYNTH_DISTRACTORS);
        train.push_str(&format!("s{}\ttouches\tx{}\n", s, d));
    }

    SynthKg { train, valid, test }
}

impl SynthKg {
    pub fn write(&self, dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
        let train = dir.join("train.txt");
        let valid = dir.join("valid.txt");
        let test = dir.join("test.txt");
        std::fs::write(&train, &self.train).unwrap();
        std::fs::write(&valid, &self.valid).unwrap();
        std::fs::write(&test, &self.test).unwrap();
        (train, valid, test)
    }

    pub fn load(&self, dir: &Path) -> TripleStore {
        let (train, valid, test) = self.write(dir);
        load_dataset(&train, &valid, &test).unwrap()
    }
}

/// Reference filtered ranking: score every surviving candidate, sort, and
/// place the true tail at the mean position of its tie group (rounded half
/// up). Returns (rank, candidate count).
pub fn oracle_filtered_rank(
    head: EntityId,
    rel: RelationId,
    tail: EntityId,
    store: &TripleStore,
    score: impl Fn(EntityId) -> f64,
) -> (usize, usize) {
    let mut kept = Vec::new();
    for id in 0..store.num_entities() as u32 {
        let cand = EntityId(id);
        if cand == tail || !store.contains(head, rel, cand) {
            kept.push((cand, score(cand)));
        }
    }
    kept.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let true_score = score(tail);
    let first = 1 + kept.iter().filter(|(_, s)| *s > true_score).count();
    let tied = kept.iter().filter(|(_, s)| *s == true_score).count();
    let last = first + tied - 1;
    ((first + last + 1) / 2, kept.len())
}

/// Reference tree for the exhaustive split-search oracle.
#[derive(Debug, PartialEq)]
pub enum OracleNode {
    Branch {
        feature: usize,
        threshold: f64,
        left: Box<OracleNode>,
        right: Box<OracleNode>,
    },
    Leaf {
        weight: f64,
    },
}

/// Exhaustive greedy tree growth: every (feature, midpoint) pair of every
/// node is evaluated directly. Follows the pinned arithmetic conventions
/// (row-order node sums, sorted-order left prefixes, right = node − left,
/// gain `0.5*((l + r) − parent)`) so agreement with the fast path is exact,
/// including tie-breaks to the lowest feature then lowest threshold.
pub fn oracle_fit_tree(matrix: &LabeledMatrix, margins: &[f64], config: &GbtConfig) -> OracleNode {
    let mut g = Vec::with_capacity(matrix.num_rows());
    let mut h = Vec::with_capacity(matrix.num_rows());
    for i in 0..matrix.num_rows() {
        let (gi, hi) = logistic_grad_hess(matrix.label(i), margins[i]);
        g.push(gi);
        h.push(hi);
    }
    let rows: Vec<usize> = (0..matrix.num_rows()).collect();
    grow(matrix, &rows, &g, &h, config.max_depth, config)
}

fn grow(
    matrix: &LabeledMatrix,
    rows: &[usize],
    g: &[f64],
    h: &[f64],
    depth_left: usize,
    config: &GbtConfig,
) -> OracleNode {
    let mut gt = 0.0;
    let mut ht = 0.0;
    for &r in rows {
        gt += g[r];
        ht += h[r];
    }
    let l2 = config.l2_leaf_penalty;
    let leaf = || {
        let denom = ht + l2;
        OracleNode::Leaf {
            weight: if denom > 0.0 { -gt / denom } else { 0.0 },
        }
    };
    if depth_left == 0 || rows.len() < 2 {
        return leaf();
    }
    let parent_term = if ht + l2 > 0.0 { gt * gt / (ht + l2) } else { 0.0 };
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..matrix.num_features() {
        let mut order: Vec<usize> = rows.to_vec();
        order.sort_by(|&a, &b| {
            matrix
                .value(a, f)
                .partial_cmp(&matrix.value(b, f))
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut gl = 0.0;
        let mut hl = 0.0;
        for i in 0..order.len() {
            if i > 0 {
                let prev = matrix.value(order[i - 1], f);
                let cur = matrix.value(order[i], f);
                if cur > prev {
                    let gr = gt - gl;
                    let hr = ht - hl;
                    if hl >= config.min_child_hessian && hr >= config.min_child_hessian {
                        let dl = hl + l2;
                        let dr = hr + l2;
                        if dl > 0.0 && dr > 0.0 {
                            let gain = 0.5 * ((gl * gl / dl + gr * gr / dr) - parent_term);
                            let threshold = (prev as f64 + cur as f64) * 0.5;
                            let better = match best {
                                None => true,
                                Some((bg, _, _)) => gain > bg,
                            };
                            if better {
                                best = Some((gain, f, threshold));
                            }
                        }
                    }
                }
            }
            gl += g[order[i]];
            hl += h[order[i]];
        }
    }
    match best {
        Some((gain, feature, threshold)) if gain > config.min_split_gain => {
            let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                .iter()
                .partition(|&&r| (matrix.value(r, feature) as f64) < threshold);
            OracleNode::Branch {
                feature,
                threshold,
                left: Box::new(grow(matrix, &left_rows, g, h, depth_left - 1, config)),
                right: Box::new(grow(matrix, &right_rows, g, h, depth_left - 1, config)),
            }
        }
        _ => leaf(),
    }
}

/// Structural equality between a fitted tree and the oracle tree, exact on
/// features, thresholds, and leaf weights.
pub fn trees_match(tree: &kgboost::gbt::RegressionTree, oracle: &OracleNode) -> bool {
    fn walk(nodes: &[kgboost::gbt::Node], idx: usize, oracle: &OracleNode) -> bool {
        match (&nodes[idx], oracle) {
            (kgboost::gbt::Node::Leaf { weight }, OracleNode::Leaf { weight: ow }) => {
                weight.to_bits() == ow.to_bits()
            }
            (
                kgboost::gbt::Node::Branch {
                    feature,
                    threshold,
                    left,
                    right,
                },
                OracleNode::Branch {
                    feature: of,
                    threshold: ot,
                    left: ol,
                    right: or,
                },
            ) => {
                feature == of
                    && threshold.to_bits() == ot.to_bits()
                    && walk(nodes, *left, ol)
                    && walk(nodes, *right, or)
            }
            _ => false,
        }
    }
    walk(tree.nodes(), 0, oracle)
}

/// Deterministic pseudo-random scorer with deliberate tie mass, for ranking
/// oracles.
pub fn quantized_scorer(levels: u64, salt: u64) -> impl Fn(EntityId) -> f64 {
    move |t: EntityId| ((t.0 as u64).wrapping_mul(2654435761).wrapping_add(salt) % levels) as f64
}

fn emit_triples(
    rng: &mut impl Rng,
    n_ent: u32,
    n_rel: u32,
    count: usize,
    seen: &mut HashSet<(u32, u32, u32)>,
) -> String {
    let mut s = String::new();
    for _ in 0..count {
        let t = (
            rng.gen_range(0..n_ent),
            rng.gen_range(0..n_rel),
            rng.gen_range(0..n_ent),
        );
        if seen.insert(t) {
            s.push_str(&format!("n{}\tr{}\tn{}\n", t.0, t.1, t.2));
        }
    }
    s
}

/// Random small KG written through the loader; for ranking-oracle sweeps.
pub fn random_store(rng: &mut impl Rng, dir: &Path) -> TripleStore {
    let n_ent = rng.gen_range(5..=50u32);
    let n_rel = rng.gen_range(1..=5u32);
    let mut seen = HashSet::new();
    let n_train = rng.gen_range(10..60);
    let train = emit_triples(rng, n_ent, n_rel, n_train, &mut seen);
    let n_valid = rng.gen_range(0..10);
    let valid = emit_triples(rng, n_ent, n_rel, n_valid, &mut seen);
    let n_test = rng.gen_range(3..12);
    let test = emit_triples(rng, n_ent, n_rel, n_test, &mut seen);
    std::fs::write(dir.join("train.txt"), &train).unwrap();
    std::fs::write(dir.join("valid.txt"), &valid).unwrap();
    std::fs::write(dir.join("test.txt"), &test).unwrap();
    load_dataset(
        &dir.join("train.txt"),
        &dir.join("valid.txt"),
        &dir.join("test.txt"),
    )
    .unwrap()
}
