//! Least-squares gradient-boosted regression trees.
//!
//! Each stage fits a depth-limited regression tree to the current residuals
//! and adds it scaled by the learning rate. Leaves hold the weighted mean
//! residual of the training rows that reach them, which is the exact
//! squared-error minimizer for a fixed partition, so the training loss never
//! increases from one stage to the next.
//!
//! Trees are grown level by level with exact greedy split search: every
//! feature is presorted once per fit, and a single pass over each sorted
//! order per level evaluates every threshold between consecutive distinct
//! values for every open node. Among equal gains the lowest feature index
//! and then the lowest threshold win, so fitting is deterministic.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Column, Dataset};
use crate::stats::{self, Metrics, WetBulbBin};
use crate::{math, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub n_trees: usize,
    pub max_depth: u32,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    /// Fraction of rows used to choose each tree's splits. Leaf values are
    /// always fitted on every row.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: 4,
            learning_rate: 0.1,
            min_samples_leaf: 5,
            subsample: 1.0,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning_rate {} outside (0, 1]",
                self.learning_rate
            )));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Config("min_samples_leaf must be at least 1".into()));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::Config(format!("subsample {} outside (0, 1]", self.subsample)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub max_depth: u32,
    /// Node 0 is the root; children always come after their parent.
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf(value: f64) -> Self {
        Self {
            max_depth: 0,
            nodes: vec![Node::Leaf { value }],
        }
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.predict_with(|f| x[f])
    }

    #[inline]
    fn predict_with(&self, feature: impl Fn(usize) -> f64) -> f64 {
        self.nodes[self.leaf_index(feature)].leaf_value()
    }

    fn leaf_index(&self, feature: impl Fn(usize) -> f64) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature: f,
                    threshold,
                    left,
                    right,
                } => {
                    i = if feature(f as usize) <= threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
            }
        }
    }

    fn leaf_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value } => Some(*value),
            Node::Split { .. } => None,
        })
    }

    /// Structural checks: binary, acyclic (children strictly after their
    /// parent, each referenced once), finite leaves, depth within bound.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Schema(msg));
        if self.nodes.is_empty() {
            return bad("tree has no nodes".into());
        }
        let mut referenced = vec![false; self.nodes.len()];
        let mut depth = vec![0u32; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Leaf { value } => {
                    if !value.is_finite() {
                        return bad(format!("node {i}: non-finite leaf"));
                    }
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature as usize >= n_features || !threshold.is_finite() {
                        return bad(format!("node {i}: bad split"));
                    }
                    for child in [left as usize, right as usize] {
                        if child <= i || child >= self.nodes.len() || referenced[child] {
                            return bad(format!("node {i}: bad child index {child}"));
                        }
                        referenced[child] = true;
                        depth[child] = depth[i] + 1;
                        if depth[child] > self.max_depth {
                            return bad(format!("node {child}: deeper than max_depth"));
                        }
                    }
                }
            }
        }
        if referenced.iter().skip(1).any(|r| !r) {
            return bad("tree has unreachable nodes".into());
        }
        Ok(())
    }
}

impl Node {
    #[inline]
    fn leaf_value(&self) -> f64 {
        match self {
            Node::Leaf { value } => *value,
            Node::Split { .. } => unreachable!("leaf_index returns leaves"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub base_prediction: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
    /// Fit metrics on the training rows; `None` when undefined (zero-mean
    /// target).
    pub training_metrics: Option<Metrics>,
    /// Set when the target was constant and the model is base-only.
    pub constant_target: bool,
}

impl GbtModel {
    /// `base + learning_rate · Σ tree(x)`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.feature_names.len() {
            return Err(Error::Schema(format!(
                "model `{}` expects {} features, got {}",
                self.target_name,
                self.feature_names.len(),
                x.len()
            )));
        }
        Ok(self.predict_trees(x, self.trees.len()))
    }

    /// Prediction using only the first `n_trees` stages.
    pub fn predict_trees(&self, x: &[f64], n_trees: usize) -> f64 {
        let sum: f64 = self.trees[..n_trees.min(self.trees.len())]
            .iter()
            .map(|t| t.predict(x))
            .sum();
        self.base_prediction + self.learning_rate * sum
    }

    /// Largest value `predict` can return for any input.
    pub fn upper_bound(&self) -> f64 {
        let sum: f64 = self
            .trees
            .iter()
            .map(|t| t.leaf_values().fold(f64::NEG_INFINITY, f64::max))
            .sum();
        self.base_prediction + self.learning_rate * sum
    }

    /// Smallest value `predict` can return for any input.
    pub fn lower_bound(&self) -> f64 {
        let sum: f64 = self
            .trees
            .iter()
            .map(|t| t.leaf_values().fold(f64::INFINITY, f64::min))
            .sum();
        self.base_prediction + self.learning_rate * sum
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_names.is_empty() {
            return Err(Error::Schema("model has no features".into()));
        }
        for (i, a) in self.feature_names.iter().enumerate() {
            if self.feature_names[..i].contains(a) {
                return Err(Error::Schema(format!("duplicate feature `{a}`")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) || !self.base_prediction.is_finite() {
            return Err(Error::Schema("bad learning rate or base prediction".into()));
        }
        for (i, t) in self.trees.iter().enumerate() {
            t.validate(self.feature_names.len())
                .map_err(|e| Error::Schema(format!("tree {i}: {e}")))?;
        }
        Ok(())
    }

    pub fn feature_columns(&self) -> Result<Vec<Column>> {
        self.feature_names.iter().map(|n| n.parse()).collect()
    }

    pub fn target_column(&self) -> Result<Column> {
        self.target_name.parse()
    }
}

/// Trains a model on column-major features.
pub fn fit(
    features: &[Vec<f64>],
    target: &[f64],
    weights: Option<&[f64]>,
    feature_names: &[&str],
    target_name: &str,
    hp: &Hyperparams,
) -> Result<GbtModel> {
    hp.validate()?;
    let n = target.len();
    if features.is_empty() || features.len() != feature_names.len() {
        return Err(Error::Training("feature names do not match feature columns".into()));
    }
    if features.iter().any(|c| c.len() != n) {
        return Err(Error::Training("feature columns differ in length from target".into()));
    }
    if n < 2 * hp.min_samples_leaf {
        return Err(Error::Training(format!(
            "{n} rows is fewer than 2 × min_samples_leaf ({})",
            hp.min_samples_leaf
        )));
    }
    if features.iter().flatten().chain(target).any(|v| !v.is_finite()) {
        return Err(Error::Training("non-finite feature or target value".into()));
    }
    let unit;
    let weights = match weights {
        Some(w) => {
            if w.len() != n || w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::Training("weights must be positive, one per row".into()));
            }
            w
        }
        None => {
            unit = vec![1.0; n];
            &unit[..]
        }
    };

    let total_w: f64 = weights.iter().sum();
    let base = target.iter().zip(weights).map(|(y, w)| y * w).sum::<f64>() / total_w;
    let names = feature_names.iter().map(|s| s.to_string()).collect();
    let constant = target.iter().all(|y| *y == target[0]);
    let mut model = GbtModel {
        feature_names: names,
        target_name: target_name.to_string(),
        base_prediction: if constant { target[0] } else { base },
        learning_rate: hp.learning_rate,
        trees: Vec::new(),
        training_metrics: None,
        constant_target: constant,
    };

    if !constant {
        let sorted: Vec<Vec<u32>> = features
            .iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|a, b| col[*a as usize].total_cmp(&col[*b as usize]));
                idx
            })
            .collect();
        let mut current = vec![model.base_prediction; n];
        let mut residual = vec![0.0; n];
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        let sample_size = if hp.subsample < 1.0 {
            (math::round(hp.subsample * n as f64) as usize).clamp(2 * hp.min_samples_leaf, n)
        } else {
            n
        };
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut grower = Grower::new(n);
        for _ in 0..hp.n_trees {
            for i in 0..n {
                residual[i] = target[i] - current[i];
            }
            let sample = if sample_size < n {
                order.shuffle(&mut rng);
                let mut s = order[..sample_size].to_vec();
                s.sort_unstable();
                s
            } else {
                order.clone()
            };
            let tree = grower.grow(features, &sorted, &residual, weights, &sample, hp);
            for (i, c) in current.iter_mut().enumerate() {
                *c += hp.learning_rate * tree.predict_with(|f| features[f][i]);
            }
            model.trees.push(tree);
        }
    }

    let predictions: Vec<f64> = (0..n)
        .map(|i| {
            let row: Vec<f64> = features.iter().map(|c| c[i]).collect();
            model.predict_trees(&row, model.trees.len())
        })
        .collect();
    model.training_metrics = stats::metrics(&predictions, target).ok();
    Ok(model)
}

/// Trains on dataset columns.
pub fn fit_dataset(
    data: &Dataset,
    target: Column,
    features: &[Column],
    weights: Option<&[f64]>,
    hp: &Hyperparams,
) -> Result<GbtModel> {
    let cols: Vec<Vec<f64>> = features.iter().map(|c| data.column(*c)).collect();
    let names: Vec<&str> = features.iter().map(|c| c.name()).collect();
    fit(&cols, &data.column(target), weights, &names, target.name(), hp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub rows: usize,
    pub metrics: Metrics,
    /// Average percentage difference per integer wet-bulb bin; empty when
    /// the dataset has no wet-bulb spread to bin.
    pub wet_bulb_bins: Vec<WetBulbBin>,
}

/// Scores a model against the dataset rows, using the columns its feature
/// and target names refer to.
pub fn evaluate(model: &GbtModel, data: &Dataset) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::UndefinedMetric("no rows to evaluate"));
    }
    let features = model.feature_columns()?;
    let target = model.target_column()?;
    let mut row = vec![0.0; features.len()];
    let predicted: Vec<f64> = data
        .records
        .iter()
        .map(|r| {
            for (slot, c) in row.iter_mut().zip(&features) {
                *slot = r.get(*c);
            }
            model.predict_trees(&row, model.trees.len())
        })
        .collect();
    let actual = data.column(target);
    Ok(Evaluation {
        rows: data.len(),
        metrics: stats::metrics(&predicted, &actual)?,
        wet_bulb_bins: stats::wet_bulb_bins(&predicted, &actual, &data.column(Column::TWb)),
    })
}

const UNASSIGNED: u32 = u32::MAX;

#[derive(Clone, Copy, Default)]
struct NodeStats {
    w: f64,
    wr: f64,
    wrr: f64,
    count: usize,
}

impl NodeStats {
    fn add(&mut self, w: f64, r: f64) {
        self.w += w;
        self.wr += w * r;
        self.wrr += w * r * r;
        self.count += 1;
    }
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    feature: u32,
    threshold: f64,
}

#[derive(Clone, Copy)]
struct Scan {
    left: NodeStats,
    last: f64,
}

struct Open {
    node: u32,
    stats: NodeStats,
}

// Scratch buffers reused across trees.
struct Grower {
    node_of: Vec<u32>,
}

impl Grower {
    fn new(n: usize) -> Self {
        Self {
            node_of: vec![UNASSIGNED; n],
        }
    }

    fn grow(
        &mut self,
        features: &[Vec<f64>],
        sorted: &[Vec<u32>],
        residual: &[f64],
        weights: &[f64],
        sample: &[u32],
        hp: &Hyperparams,
    ) -> RegressionTree {
        let min_leaf = hp.min_samples_leaf;
        self.node_of.fill(UNASSIGNED);
        let mut root = NodeStats::default();
        for &i in sample {
            self.node_of[i as usize] = 0;
            root.add(weights[i as usize], residual[i as usize]);
        }
        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        let mut level = vec![Open { node: 0, stats: root }];
        let mut depth = 0;

        while !level.is_empty() && depth < hp.max_depth {
            // slot_of[node] = index into `level` for nodes still splittable
            let mut slot_of = vec![usize::MAX; nodes.len()];
            for (s, open) in level.iter().enumerate() {
                if open.stats.count >= 2 * min_leaf {
                    slot_of[open.node as usize] = s;
                }
            }
            let mut best: Vec<Option<Best>> = vec![None; level.len()];
            for (f, order) in sorted.iter().enumerate() {
                let col = &features[f];
                let mut scans = vec![
                    Scan {
                        left: NodeStats::default(),
                        last: f64::NAN,
                    };
                    level.len()
                ];
                for &i in order {
                    let nd = self.node_of[i as usize];
                    if nd == UNASSIGNED {
                        continue;
                    }
                    let s = slot_of[nd as usize];
                    if s == usize::MAX {
                        continue;
                    }
                    let v = col[i as usize];
                    let scan = &mut scans[s];
                    let total = &level[s].stats;
                    if scan.left.count >= min_leaf
                        && v > scan.last
                        && total.count - scan.left.count >= min_leaf
                    {
                        let l = &scan.left;
                        let (rw, rwr) = (total.w - l.w, total.wr - l.wr);
                        let gain = l.wr * l.wr / l.w + rwr * rwr / rw - total.wr * total.wr / total.w;
                        let min_gain = 1e-12 * total.wrr.max(f64::MIN_POSITIVE);
                        if gain > min_gain && best[s].is_none_or(|b| gain > b.gain) {
                            best[s] = Some(Best {
                                gain,
                                feature: f as u32,
                                threshold: midpoint(scan.last, v),
                            });
                        }
                    }
                    scan.left.add(weights[i as usize], residual[i as usize]);
                    scan.last = v;
                }
            }

            // Materialize the chosen splits and route rows to children.
            let mut children: Vec<(u32, u32, Best)> = vec![(0, 0, Best { gain: 0.0, feature: 0, threshold: 0.0 }); level.len()];
            let mut next = Vec::new();
            let mut split_any = false;
            for (s, open) in level.iter().enumerate() {
                if let Some(b) = best[s] {
                    let left = nodes.len() as u32;
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes[open.node as usize] = Node::Split {
                        feature: b.feature,
                        threshold: b.threshold,
                        left,
                        right: left + 1,
                    };
                    children[s] = (left, left + 1, b);
                    split_any = true;
                }
            }
            if !split_any {
                break;
            }
            let mut child_stats = vec![NodeStats::default(); nodes.len()];
            for &i in sample {
                let nd = self.node_of[i as usize];
                if nd == UNASSIGNED {
                    continue;
                }
                let s = slot_of[nd as usize];
                if s == usize::MAX || best[s].is_none() {
                    self.node_of[i as usize] = UNASSIGNED;
                    continue;
                }
                let (left, right, b) = children[s];
                let child = if features[b.feature as usize][i as usize] <= b.threshold {
                    left
                } else {
                    right
                };
                self.node_of[i as usize] = child;
                child_stats[child as usize].add(weights[i as usize], residual[i as usize]);
            }
            for (s, _) in level.iter().enumerate() {
                if best[s].is_some() {
                    let (left, right, _) = children[s];
                    for c in [left, right] {
                        next.push(Open {
                            node: c,
                            stats: child_stats[c as usize],
                        });
                    }
                }
            }
            level = next;
            depth += 1;
        }

        let mut tree = RegressionTree {
            max_depth: hp.max_depth,
            nodes,
        };
        // Leaf values: weighted mean residual over every row, sampled or not.
        let mut sums = vec![(0.0f64, 0.0f64); tree.nodes.len()];
        for i in 0..residual.len() {
            let leaf = tree.leaf_index(|f| features[f][i]);
            sums[leaf].0 += weights[i] * residual[i];
            sums[leaf].1 += weights[i];
        }
        for (node, (wr, w)) in tree.nodes.iter_mut().zip(sums) {
            if let Node::Leaf { value } = node {
                *value = if w > 0.0 { wr / w } else { 0.0 };
            }
        }
        tree
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let mid = a + (b - a) * 0.5;
    if mid >= b {
        a
    } else {
        mid
    }
}
