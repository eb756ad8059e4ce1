//! CART decision trees and random forests with Gini impurity.

use std::io::Write;

use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::derive_seed;
use crate::error::{Error, Result};
use crate::nn::argmax;
use crate::types::{Prediction, SemanticType};

/// Gini impurity `1 - sum(p_c^2)` of a class-count vector.
pub fn gini(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Features examined per split; `None` means all of them.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 50,
            max_features: None,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class_counts: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub n_samples: f64,
    pub impurity: f64,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub n_features: usize,
    pub n_classes: usize,
    pub params: TreeParams,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

/// Best threshold on one feature for the samples in `idx`. Thresholds are
/// midpoints between consecutive distinct sorted values; the lowest
/// threshold wins ties.
fn best_threshold(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    idx: &[usize],
    feature: usize,
    parent_counts: &[f64],
    parent_gini: f64,
    scratch: &mut Vec<(f64, usize)>,
) -> Option<Candidate> {
    scratch.clear();
    scratch.extend(idx.iter().map(|&i| (x[(i, feature)], y[i])));
    let (lo, hi) = scratch
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(v, _)| (lo.min(v), hi.max(v)));
    if lo == hi {
        return None;
    }
    scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = scratch.len() as f64;
    let mut left = vec![0.0; parent_counts.len()];
    let mut right = parent_counts.to_vec();
    let mut sq_left = 0.0;
    let mut sq_right: f64 = right.iter().map(|c| c * c).sum();
    let mut best: Option<Candidate> = None;
    for i in 0..scratch.len() - 1 {
        let c = scratch[i].1;
        sq_left += 2.0 * left[c] + 1.0;
        left[c] += 1.0;
        sq_right -= 2.0 * right[c] - 1.0;
        right[c] -= 1.0;
        let (a, b) = (scratch[i].0, scratch[i + 1].0);
        if a == b {
            continue;
        }
        let nl = (i + 1) as f64;
        let nr = n - nl;
        let weighted = (nl - sq_left / nl + nr - sq_right / nr) / n;
        let decrease = parent_gini - weighted;
        if best.as_ref().is_none_or(|bc| decrease > bc.decrease) {
            let mut threshold = a + (b - a) / 2.0;
            if threshold >= b {
                threshold = a;
            }
            best = Some(Candidate {
                feature,
                threshold,
                decrease,
            });
        }
    }
    best
}

/// Splits may leave impurity unchanged (XOR-like layouts need them to
/// reach pure leaves) but not raise it beyond rounding noise.
const MAX_INCREASE: f64 = 1e-12;

impl DecisionTree {
    /// Greedy CART growth on rows `idx` (duplicates allowed, as produced by
    /// bootstrap resampling).
    pub fn fit_rows(
        x: ArrayView2<'_, f64>,
        y: &[usize],
        idx: Vec<usize>,
        n_classes: usize,
        params: &TreeParams,
        seed: u64,
    ) -> Result<Self> {
        if x.nrows() == 0 || idx.is_empty() {
            return Err(Error::Empty("training matrix".into()));
        }
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: y.len(),
            });
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
            return Err(Error::InvalidArgument(format!("label {bad} out of range")));
        }
        let n_features = x.ncols();
        let max_features = params.max_features.unwrap_or(n_features).clamp(1, n_features);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tree = DecisionTree {
            nodes: Vec::new(),
            n_features,
            n_classes,
            params: *params,
        };
        // (node slot, samples, depth)
        let mut stack = vec![(0usize, idx, 0usize)];
        tree.nodes.push(placeholder());
        while let Some((slot, samples, depth)) = stack.pop() {
            let mut counts = vec![0.0; n_classes];
            for &i in &samples {
                counts[y[i]] += 1.0;
            }
            let impurity = gini(&counts);
            let n_samples = samples.len() as f64;
            let can_split = impurity > 0.0 && depth < params.max_depth && samples.len() >= params.min_samples_split.max(2);
            let split = if can_split {
                let features: Vec<usize> = if max_features == n_features {
                    (0..n_features).collect()
                } else {
                    let mut f = sample(&mut rng, n_features, max_features).into_vec();
                    f.sort_unstable();
                    f
                };
                features
                    .par_iter()
                    .map_init(Vec::new, |scratch, &f| best_threshold(x, y, &samples, f, &counts, impurity, scratch))
                    .collect::<Vec<_>>()
                    .into_iter()
                    .flatten()
                    .fold(None::<Candidate>, |best, c| match best {
                        Some(b) if b.decrease >= c.decrease => Some(b),
                        _ => Some(c),
                    })
                    .filter(|c| c.decrease >= -MAX_INCREASE)
            } else {
                None
            };
            let kind = match split {
                None => NodeKind::Leaf { class_counts: counts },
                Some(c) => {
                    let (l, r): (Vec<usize>, Vec<usize>) = samples.iter().partition(|&&i| x[(i, c.feature)] <= c.threshold);
                    let left = tree.nodes.len();
                    tree.nodes.push(placeholder());
                    let right = tree.nodes.len();
                    tree.nodes.push(placeholder());
                    stack.push((right, r, depth + 1));
                    stack.push((left, l, depth + 1));
                    NodeKind::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right,
                    }
                }
            };
            tree.nodes[slot] = Node {
                n_samples,
                impurity,
                kind,
            };
        }
        Ok(tree)
    }

    fn leaf(&self, row: &[f64]) -> &[f64] {
        let mut node = 0;
        loop {
            match &self.nodes[node].kind {
                NodeKind::Leaf { class_counts } => return class_counts,
                NodeKind::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Class distribution of the leaf the row falls into.
    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check_row(row)?;
        let counts = self.leaf(row);
        let total: f64 = counts.iter().sum();
        Ok(counts.iter().map(|c| c / total).collect())
    }

    pub fn predict_class(&self, row: &[f64]) -> Result<usize> {
        self.check_row(row)?;
        Ok(argmax(self.leaf(row)))
    }

    fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: row.len(),
            });
        }
        Ok(())
    }

    pub fn depth(&self) -> usize {
        fn walk(tree: &DecisionTree, node: usize) -> usize {
            match &tree.nodes[node].kind {
                NodeKind::Leaf { .. } => 0,
                NodeKind::Split { left, right, .. } => 1 + walk(tree, *left).max(walk(tree, *right)),
            }
        }
        walk(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Leaf { .. })).count()
    }
}

fn placeholder() -> Node {
    Node {
        n_samples: 0.0,
        impurity: 0.0,
        kind: NodeKind::Leaf { class_counts: Vec::new() },
    }
}

pub fn train_decision_tree(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    n_classes: usize,
    params: &TreeParams,
    seed: u64,
) -> Result<DecisionTree> {
    DecisionTree::fit_rows(x, y, (0..x.nrows()).collect(), n_classes, params, seed)
}

/// Total weighted impurity decrease per feature, scaled so the largest is 1.
/// All zeros when no split lowers impurity.
pub fn feature_importances(tree: &DecisionTree) -> Vec<f64> {
    let mut scores = vec![0.0; tree.n_features];
    for node in &tree.nodes {
        if let NodeKind::Split { feature, left, right, .. } = node.kind {
            let (l, r) = (&tree.nodes[left], &tree.nodes[right]);
            let decrease = node.n_samples * node.impurity - l.n_samples * l.impurity - r.n_samples * r.impurity;
            scores[feature] += decrease.max(0.0);
        }
    }
    let max = scores.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        scores.iter_mut().for_each(|s| *s /= max);
    }
    scores
}

/// Writes `rank,feature,score` rows sorted by descending score.
pub fn write_importances_csv(scores: &[f64], names: &[String], writer: impl Write) -> Result<()> {
    if scores.len() != names.len() {
        return Err(Error::DimensionMismatch {
            expected: names.len(),
            found: scores.len(),
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["rank", "feature", "score"])?;
    for (rank, i) in order.into_iter().enumerate() {
        out.write_record([(rank + 1).to_string(), names[i].clone(), format!("{:.4}", scores[i])])?;
    }
    out.flush().map_err(|e| Error::io("<importances>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// `None` uses floor(sqrt(number of features)).
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 10,
            max_depth: 50,
            max_features: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub params: ForestParams,
}

pub fn train_random_forest(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    n_classes: usize,
    params: &ForestParams,
    seed: u64,
) -> Result<RandomForest> {
    if params.n_trees == 0 {
        return Err(Error::InvalidArgument("forest needs at least one tree".into()));
    }
    if x.nrows() == 0 {
        return Err(Error::Empty("training matrix".into()));
    }
    let n = x.nrows();
    let max_features = params
        .max_features
        .unwrap_or_else(|| ((x.ncols() as f64).sqrt().floor() as usize).max(1));
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        max_features: Some(max_features),
        min_samples_split: 2,
    };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let tree_seed = derive_seed(seed, t as u64);
            let rows = if params.bootstrap {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(tree_seed, 0xB007));
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            DecisionTree::fit_rows(x, y, rows, n_classes, &tree_params, tree_seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RandomForest { trees, params: *params })
}

impl RandomForest {
    /// Mean of the trees' leaf distributions.
    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; self.trees[0].n_classes];
        for tree in &self.trees {
            for (a, p) in acc.iter_mut().zip(tree.predict_proba(row)?) {
                *a += p;
            }
        }
        let k = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= k);
        Ok(acc)
    }

    /// Majority vote of the trees; ties go to the smaller class index.
    pub fn predict_class(&self, row: &[f64]) -> Result<usize> {
        let mut votes = vec![0.0; self.trees[0].n_classes];
        for tree in &self.trees {
            votes[tree.predict_class(row)?] += 1.0;
        }
        Ok(argmax(&votes))
    }

    pub fn predict(&self, row: &[f64]) -> Result<Prediction> {
        let class = self.predict_class(row)?;
        SemanticType::from_index(class)
            .map(Prediction::Type)
            .ok_or_else(|| Error::InvalidArgument(format!("class {class} outside the type vocabulary")))
    }
}
