//! Gradient-boosted regression trees with logistic loss.
//!
//! Split finding is exact greedy: every midpoint between consecutive
//! distinct feature values is a candidate, scored with the second-order gain
//! `½[G_L²/(H_L+λ) + G_R²/(H_R+λ) − (G_L+G_R)²/(H_L+H_R+λ)]`. Ties break to
//! the lowest feature index, then the lowest threshold. Leaf weights are
//! `−G/(H+λ)`; trees store raw weights and the learning rate is applied at
//! accumulation and prediction time.
//!
//! Floating-point conventions are pinned so that runs, serialized models and
//! tests reproduce bit-identical results: node G/H sums accumulate in row
//! order, per-candidate left sums accumulate in (value, row) order, right
//! sums are `node − left`, and gains evaluate as `0.5*((l + r) - parent)`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kg::RelationId;

/// Boosting hyperparameters.
#[derive(Clone, Debug)]
pub struct GbtConfig {
    pub num_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub l2_leaf_penalty: f64,
    pub min_split_gain: f64,
    pub min_child_hessian: f64,
    /// Recorded for provenance; exact greedy growth draws no randomness.
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            num_estimators: 300,
            max_depth: 3,
            learning_rate: 0.1,
            l2_leaf_penalty: 1.0,
            min_split_gain: 0.0,
            min_child_hessian: 0.0,
            seed: 42,
        }
    }
}

/// First and second derivatives of the binary cross entropy at margin `yhat`:
/// `g = σ(ŷ) − y`, `h = σ(ŷ)(1 − σ(ŷ))`.
pub fn logistic_grad_hess(y: u8, yhat: f64) -> (f64, f64) {
    let p = sigmoid(yhat);
    (p - y as f64, p * (1.0 - p))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross entropy at margin `yhat`.
pub fn logistic_loss(y: u8, yhat: f64) -> f64 {
    // −y log σ − (1−y) log(1−σ), as stable softplus terms
    let softplus = |x: f64| {
        if x > 0.0 {
            x + (-x).exp().ln_1p()
        } else {
            x.exp().ln_1p()
        }
    };
    if y == 1 {
        softplus(-yhat)
    } else {
        softplus(yhat)
    }
}

/// Row-major feature matrix with {0,1} labels and optional per-row weights.
#[derive(Clone, Debug)]
pub struct LabeledMatrix {
    features: Vec<f32>,
    labels: Vec<u8>,
    weights: Option<Vec<f64>>,
    num_features: usize,
    /// Per feature, row indices sorted by (value, row).
    sorted: Vec<Vec<u32>>,
}

/// Accumulates rows, then freezes them into a [`LabeledMatrix`] with
/// presorted feature columns.
pub struct MatrixBuilder {
    features: Vec<f32>,
    labels: Vec<u8>,
    weights: Vec<f64>,
    any_weighted: bool,
    num_features: usize,
}

impl MatrixBuilder {
    pub fn new(num_features: usize) -> Self {
        MatrixBuilder {
            features: Vec::new(),
            labels: Vec::new(),
            weights: Vec::new(),
            any_weighted: false,
            num_features,
        }
    }

    pub fn with_capacity(num_features: usize, rows: usize) -> Self {
        let mut b = Self::new(num_features);
        b.features.reserve(rows * num_features);
        b.labels.reserve(rows);
        b
    }

    pub fn push_row(&mut self, features: &[f32], label: u8) {
        self.push_weighted_row(features, label, 1.0);
    }

    pub fn push_weighted_row(&mut self, features: &[f32], label: u8, weight: f64) {
        assert_eq!(features.len(), self.num_features);
        self.features.extend_from_slice(features);
        self.labels.push(label);
        self.weights.push(weight);
        if weight != 1.0 {
            self.any_weighted = true;
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn build(self) -> LabeledMatrix {
        let n = self.labels.len();
        let nf = self.num_features;
        let features = self.features;
        let sorted: Vec<Vec<u32>> = (0..nf)
            .into_par_iter()
            .map(|f| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_unstable_by(|&a, &b| {
                    let va = features[a as usize * nf + f];
                    let vb = features[b as usize * nf + f];
                    va.partial_cmp(&vb).unwrap().then(a.cmp(&b))
                });
                idx
            })
            .collect();
        LabeledMatrix {
            features,
            labels: self.labels,
            weights: if self.any_weighted { Some(self.weights) } else { None },
            num_features: nf,
            sorted,
        }
    }
}

impl LabeledMatrix {
    pub fn num_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.num_features..(i + 1) * self.num_features]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn value(&self, row: usize, feature: usize) -> f32 {
        self.features[row * self.num_features + feature]
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }

    /// Gradient/hessian pairs at the given margins.
    pub fn grad_hess(&self, margins: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut g = Vec::with_capacity(self.num_rows());
        let mut h = Vec::with_capacity(self.num_rows());
        for i in 0..self.num_rows() {
            let (gi, hi) = logistic_grad_hess(self.labels[i], margins[i]);
            let w = self.weight(i);
            g.push(gi * w);
            h.push(hi * w);
        }
        (g, h)
    }
}

/// A single regression tree. Nodes live in a flat arena; the root is node 0.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Branch {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
    },
}

impl RegressionTree {
    pub fn leaf(weight: f64) -> Self {
        RegressionTree {
            nodes: vec![Node::Leaf { weight }],
        }
    }

    pub fn from_nodes(nodes: Vec<Node>) -> Self {
        RegressionTree { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Raw leaf weight for a feature row; rows route left when
    /// `value < threshold`.
    pub fn evaluate(&self, features: &[f32]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { weight } => return *weight,
                Node::Branch {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if (features[*feature] as f64) < *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn depth_at(nodes: &[Node], idx: usize) -> usize {
            match &nodes[idx] {
                Node::Leaf { .. } => 0,
                Node::Branch { left, right, .. } => {
                    1 + depth_at(nodes, *left).max(depth_at(nodes, *right))
                }
            }
        }
        depth_at(&self.nodes, 0)
    }
}

/// Ordered list of trees realizing `σ(Σ_k η·f_k(x))`.
#[derive(Clone, Debug)]
pub struct TreeEnsemble {
    trees: Vec<RegressionTree>,
    learning_rate: f64,
    feature_dim: usize,
}

impl TreeEnsemble {
    pub fn new(feature_dim: usize, learning_rate: f64) -> Self {
        TreeEnsemble {
            trees: Vec::new(),
            learning_rate,
            feature_dim,
        }
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn push(&mut self, tree: RegressionTree) {
        self.trees.push(tree);
    }

    /// `Σ_k η·f_k(x)`, the pre-sigmoid margin.
    pub fn predict_margin(&self, features: &[f32]) -> Result<f64> {
        if features.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                got: features.len(),
            });
        }
        let mut margin = 0.0;
        for tree in &self.trees {
            margin += self.learning_rate * tree.evaluate(features);
        }
        Ok(margin)
    }

    /// Predicted probability `σ(Σ_k η·f_k(x))`; an empty ensemble predicts
    /// 0.5.
    pub fn predict(&self, features: &[f32]) -> Result<f64> {
        Ok(sigmoid(self.predict_margin(features)?))
    }

    /// Text serialization: a header, then each tree as a preorder node list
    /// (a branch line is followed by its left subtree, then its right).
    pub fn save(&self, path: &Path, rel: RelationId) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "# kgboost tree ensemble v1").map_err(io)?;
        writeln!(w, "relation {}", rel.0).map_err(io)?;
        writeln!(w, "features {}", self.feature_dim).map_err(io)?;
        writeln!(w, "learning_rate {}", self.learning_rate).map_err(io)?;
        writeln!(w, "trees {}", self.trees.len()).map_err(io)?;
        for tree in &self.trees {
            writeln!(w, "tree {}", tree.nodes.len()).map_err(io)?;
            write_preorder(&mut w, tree, 0).map_err(io)?;
        }
        writeln!(w, "end").map_err(io)?;
        w.flush().map_err(io)
    }

    pub fn load(path: &Path) -> Result<(RelationId, TreeEnsemble)> {
        let bad = |reason: String| Error::BadModelFile {
            path: path.to_owned(),
            reason,
        };
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let mut next = || -> Result<String> {
            match lines.next() {
                Some(Ok(l)) => Ok(l),
                Some(Err(e)) => Err(Error::io(path, e)),
                None => Err(Error::BadModelFile {
                    path: path.to_owned(),
                    reason: "unexpected end of file".into(),
                }),
            }
        };
        if next()? != "# kgboost tree ensemble v1" {
            return Err(bad("missing header".into()));
        }
        let rel: u32 = parse_kv(&next()?, "relation ").ok_or_else(|| bad("bad relation line".into()))?;
        let feature_dim: usize =
            parse_kv(&next()?, "features ").ok_or_else(|| bad("bad features line".into()))?;
        let learning_rate: f64 = parse_kv(&next()?, "learning_rate ")
            .ok_or_else(|| bad("bad learning_rate line".into()))?;
        let n_trees: usize = parse_kv(&next()?, "trees ").ok_or_else(|| bad("bad trees line".into()))?;
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let n_nodes: usize =
                parse_kv(&next()?, "tree ").ok_or_else(|| bad("bad tree line".into()))?;
            let mut nodes = Vec::with_capacity(n_nodes);
            read_preorder(&mut next, &mut nodes, &bad)?;
            if nodes.len() != n_nodes {
                return Err(bad(format!(
                    "tree declares {} nodes but has {}",
                    n_nodes,
                    nodes.len()
                )));
            }
            trees.push(RegressionTree { nodes });
        }
        if next()? != "end" {
            return Err(bad("missing end marker".into()));
        }
        Ok((
            RelationId(rel),
            TreeEnsemble {
                trees,
                learning_rate,
                feature_dim,
            },
        ))
    }
}

fn parse_kv<T: std::str::FromStr>(line: &str, key: &str) -> Option<T> {
    line.strip_prefix(key)?.parse().ok()
}

fn write_preorder(w: &mut impl Write, tree: &RegressionTree, idx: usize) -> std::io::Result<()> {
    match &tree.nodes[idx] {
        Node::Leaf { weight } => writeln!(w, "leaf {}", weight),
        Node::Branch {
            feature,
            threshold,
            left,
            right,
        } => {
            writeln!(w, "branch {} {}", feature, threshold)?;
            write_preorder(w, tree, *left)?;
            write_preorder(w, tree, *right)
        }
    }
}

fn read_preorder(
    next: &mut impl FnMut() -> Result<String>,
    nodes: &mut Vec<Node>,
    bad: &impl Fn(String) -> Error,
) -> Result<usize> {
    let line = next()?;
    if let Some(rest) = line.strip_prefix("leaf ") {
        let weight: f64 = rest.parse().map_err(|_| bad(format!("bad leaf {:?}", line)))?;
        nodes.push(Node::Leaf { weight });
        Ok(nodes.len() - 1)
    } else if let Some(rest) = line.strip_prefix("branch ") {
        let mut parts = rest.split(' ');
        let feature: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("bad branch {:?}", line)))?;
        let threshold: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("bad branch {:?}", line)))?;
        let idx = nodes.len();
        nodes.push(Node::Branch {
            feature,
            threshold,
            left: 0,
            right: 0,
        });
        let left = read_preorder(next, nodes, bad)?;
        let right = read_preorder(next, nodes, bad)?;
        if let Node::Branch {
            left: l, right: r, ..
        } = &mut nodes[idx]
        {
            *l = left;
            *r = right;
        }
        Ok(idx)
    } else {
        Err(bad(format!("expected node line, got {:?}", line)))
    }
}

/// Split-finding parameters shared by [`best_split`] and tree growth.
#[derive(Clone, Copy, Debug)]
pub struct SplitParams {
    pub l2: f64,
    pub min_split_gain: f64,
    pub min_child_hessian: f64,
}

impl From<&GbtConfig> for SplitParams {
    fn from(cfg: &GbtConfig) -> Self {
        SplitParams {
            l2: cfg.l2_leaf_penalty,
            min_split_gain: cfg.min_split_gain,
            min_child_hessian: cfg.min_child_hessian,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitCandidate {
    pub threshold: f64,
    pub gain: f64,
}

fn leaf_weight(g: f64, h: f64, l2: f64) -> f64 {
    let denom = h + l2;
    if denom > 0.0 {
        -g / denom
    } else {
        0.0
    }
}

/// Best split of one feature column, or `None` when no candidate clears
/// `min_split_gain` and `min_child_hessian`.
///
/// `values[i]`, `g[i]`, `h[i]` describe row `i`; candidates are midpoints of
/// consecutive distinct sorted values.
pub fn best_split(values: &[f32], g: &[f64], h: &[f64], params: &SplitParams) -> Option<SplitCandidate> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        values[a as usize]
            .partial_cmp(&values[b as usize])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut gt = 0.0;
    let mut ht = 0.0;
    for i in 0..n {
        gt += g[i];
        ht += h[i];
    }
    let mut scan = FeatureScan::new(gt, ht, n as u32, params);
    for &i in &order {
        scan.visit(values[i as usize], g[i as usize], h[i as usize]);
    }
    scan.finish()
}

/// Streaming candidate evaluation over one node's rows in (value, row)
/// order; the shared kernel of [`best_split`] and level-wise growth.
struct FeatureScan {
    gt: f64,
    ht: f64,
    n: u32,
    l2: f64,
    min_child_hessian: f64,
    min_split_gain: f64,
    parent_term: f64,
    gl: f64,
    hl: f64,
    seen: u32,
    last_value: f32,
    best_gain: f64,
    best_threshold: f64,
    has_best: bool,
}

impl FeatureScan {
    fn new(gt: f64, ht: f64, n: u32, params: &SplitParams) -> Self {
        let denom = ht + params.l2;
        FeatureScan {
            gt,
            ht,
            n,
            l2: params.l2,
            min_child_hessian: params.min_child_hessian,
            min_split_gain: params.min_split_gain,
            parent_term: if denom > 0.0 { gt * gt / denom } else { 0.0 },
            gl: 0.0,
            hl: 0.0,
            seen: 0,
            last_value: 0.0,
            best_gain: f64::NEG_INFINITY,
            best_threshold: 0.0,
            has_best: false,
        }
    }

    #[inline]
    fn visit(&mut self, value: f32, g: f64, h: f64) {
        if self.seen > 0 && value > self.last_value && self.seen < self.n {
            let gr = self.gt - self.gl;
            let hr = self.ht - self.hl;
            if self.hl >= self.min_child_hessian && hr >= self.min_child_hessian {
                let dl = self.hl + self.l2;
                let dr = hr + self.l2;
                if dl > 0.0 && dr > 0.0 {
                    let gain = 0.5 * ((self.gl * self.gl / dl + gr * gr / dr) - self.parent_term);
                    if gain > self.best_gain {
                        self.best_gain = gain;
                        self.best_threshold = (self.last_value as f64 + value as f64) * 0.5;
                        self.has_best = true;
                    }
                }
            }
        }
        self.gl += g;
        self.hl += h;
        self.seen += 1;
        self.last_value = value;
    }

    fn finish(&self) -> Option<SplitCandidate> {
        if self.has_best && self.best_gain > self.min_split_gain {
            Some(SplitCandidate {
                threshold: self.best_threshold,
                gain: self.best_gain,
            })
        } else {
            None
        }
    }
}

const SETTLED: u32 = u32::MAX;

/// Fits one tree to the matrix at the given margins by greedy growth: every
/// node takes its best (feature, threshold) until the split gain, child
/// hessian, or `max_depth` stops it. Leaves weigh `−G/(H+λ)`.
pub fn fit_tree(matrix: &LabeledMatrix, margins: &[f64], config: &GbtConfig) -> Result<RegressionTree> {
    let n = matrix.num_rows();
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    assert_eq!(margins.len(), n);
    let (g, h) = matrix.grad_hess(margins);
    Ok(fit_tree_inner(matrix, &g, &h, config))
}

fn fit_tree_inner(matrix: &LabeledMatrix, g: &[f64], h: &[f64], config: &GbtConfig) -> RegressionTree {
    let n = matrix.num_rows();
    let nf = matrix.num_features();
    let params = SplitParams::from(config);

    let mut nodes: Vec<Node> = vec![Node::Leaf { weight: 0.0 }];
    // rows -> slot among this level's live nodes; SETTLED once a leaf closes
    let mut slot_of: Vec<u32> = vec![0; n];
    // arena index of each live slot
    let mut slot_node: Vec<usize> = vec![0];

    for depth in 0..=config.max_depth {
        let live = slot_node.len();
        if live == 0 {
            break;
        }
        // node G/H accumulate in row order
        let mut stats = vec![(0.0f64, 0.0f64, 0u32); live];
        for row in 0..n {
            let s = slot_of[row];
            if s != SETTLED {
                let st = &mut stats[s as usize];
                st.0 += g[row];
                st.1 += h[row];
                st.2 += 1;
            }
        }

        let at_depth_limit = depth == config.max_depth;
        let best: Vec<Option<(f64, usize, f64)>> = if at_depth_limit {
            vec![None; live]
        } else {
            // per feature, one pass over its sorted column; a node's rows
            // appear in (value, row) order
            let per_feature: Vec<Vec<Option<SplitCandidate>>> = (0..nf)
                .into_par_iter()
                .map(|f| {
                    let mut scans: Vec<FeatureScan> = stats
                        .iter()
                        .map(|&(gt, ht, cnt)| FeatureScan::new(gt, ht, cnt, &params))
                        .collect();
                    for &row in &matrix.sorted[f] {
                        let s = slot_of[row as usize];
                        if s != SETTLED {
                            scans[s as usize].visit(
                                matrix.value(row as usize, f),
                                g[row as usize],
                                h[row as usize],
                            );
                        }
                    }
                    scans.iter().map(FeatureScan::finish).collect()
                })
                .collect();
            // lowest feature index wins gain ties
            let mut best: Vec<Option<(f64, usize, f64)>> = vec![None; live];
            for (f, candidates) in per_feature.iter().enumerate() {
                for (s, cand) in candidates.iter().enumerate() {
                    if let Some(c) = cand {
                        let better = match &best[s] {
                            None => true,
                            Some((gain, _, _)) => c.gain > *gain,
                        };
                        if better {
                            best[s] = Some((c.gain, f, c.threshold));
                        }
                    }
                }
            }
            best
        };

        // close leaves, open children
        let mut next_slot_node: Vec<usize> = Vec::new();
        let mut child_slots: Vec<Option<(u32, usize, f64)>> = vec![None; live];
        for s in 0..live {
            let node_idx = slot_node[s];
            match best[s] {
                None => {
                    let (gt, ht, _) = stats[s];
                    nodes[node_idx] = Node::Leaf {
                        weight: leaf_weight(gt, ht, params.l2),
                    };
                }
                Some((_, feature, threshold)) => {
                    let left = nodes.len();
                    nodes.push(Node::Leaf { weight: 0.0 });
                    let right = nodes.len();
                    nodes.push(Node::Leaf { weight: 0.0 });
                    nodes[node_idx] = Node::Branch {
                        feature,
                        threshold,
                        left,
                        right,
                    };
                    let base = next_slot_node.len() as u32;
                    next_slot_node.push(left);
                    next_slot_node.push(right);
                    child_slots[s] = Some((base, feature, threshold));
                }
            }
        }
        for row in 0..n {
            let s = slot_of[row];
            if s == SETTLED {
                continue;
            }
            slot_of[row] = match child_slots[s as usize] {
                None => SETTLED,
                Some((base, feature, threshold)) => {
                    if (matrix.value(row, feature) as f64) < threshold {
                        base
                    } else {
                        base + 1
                    }
                }
            };
        }
        slot_node = next_slot_node;
    }

    RegressionTree { nodes }
}

/// One boosting stage: a matrix and how many trees to fit on it.
pub struct Stage {
    pub matrix: LabeledMatrix,
    pub trees: usize,
}

/// Supplies stage matrices; the pipeline mines adversarial negatives from
/// the partial ensemble between stages.
pub trait StageSource {
    fn next_stage(&mut self, partial: &TreeEnsemble) -> Option<Stage>;
}

/// A single fixed matrix trained for a fixed number of trees.
pub struct SingleStage(Option<LabeledMatrix>, usize);

impl SingleStage {
    pub fn new(matrix: LabeledMatrix, trees: usize) -> Self {
        SingleStage(Some(matrix), trees)
    }
}

impl StageSource for SingleStage {
    fn next_stage(&mut self, _partial: &TreeEnsemble) -> Option<Stage> {
        self.0.take().map(|matrix| Stage {
            matrix,
            trees: self.1,
        })
    }
}

/// Boosts trees over a schedule of stage matrices. Within a stage margins
/// accumulate `ŷ ← ŷ + η·f_k(x)`; at a stage boundary every row's margin is
/// the partial ensemble's prediction, which for rows carried over from the
/// previous stage reproduces their accumulated margin bit-for-bit.
pub fn train_ensemble(source: &mut dyn StageSource, config: &GbtConfig) -> Result<TreeEnsemble> {
    let mut ensemble = TreeEnsemble::new(0, config.learning_rate);
    let mut saw_stage = false;
    let mut stage_idx = 0;
    while let Some(stage) = source.next_stage(&ensemble) {
        saw_stage = true;
        let matrix = stage.matrix;
        if matrix.num_rows() == 0 {
            return Err(Error::EmptyMatrix);
        }
        if ensemble.is_empty() && ensemble.feature_dim == 0 {
            ensemble.feature_dim = matrix.num_features();
        }
        let mut margins: Vec<f64> = (0..matrix.num_rows())
            .into_par_iter()
            .map(|i| ensemble.predict_margin(matrix.row(i)))
            .collect::<Result<_>>()?;
        for k in 0..stage.trees {
            if margins.iter().any(|m| !m.is_finite()) {
                return Err(Error::NonFiniteMargin {
                    stage: stage_idx,
                    tree: k,
                });
            }
            let tree = fit_tree(&matrix, &margins, config)?;
            margins
                .par_iter_mut()
                .enumerate()
                .for_each(|(i, m)| *m += config.learning_rate * tree.evaluate(matrix.row(i)));
            ensemble.push(tree);
        }
        stage_idx += 1;
    }
    if !saw_stage {
        return Err(Error::EmptyMatrix);
    }
    Ok(ensemble)
}

/// Mean logistic loss of the ensemble on a matrix.
pub fn ensemble_logloss(ensemble: &TreeEnsemble, matrix: &LabeledMatrix) -> f64 {
    let total: f64 = (0..matrix.num_rows())
        .map(|i| {
            let margin = ensemble.predict_margin(matrix.row(i)).unwrap();
            logistic_loss(matrix.label(i), margin)
        })
        .sum();
    total / matrix.num_rows() as f64
}
