//! Hoeffding tree (VFDT) for binary labels over numeric features.
//!
//! Leaves keep per-class counts plus, for every feature, a Gaussian
//! estimator per class. Every `grace_period` units of weight an impure leaf
//! scores candidate thresholds by information gain and splits once the gap
//! between the best and second-best feature exceeds the Hoeffding bound (or
//! the bound falls under the tie threshold). Splits are never undone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::hoeffding_bound;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafPrediction {
    MajorityClass,
    NaiveBayes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoeffdingTreeParams {
    pub grace_period: usize,
    pub split_confidence: f64,
    pub tie_threshold: f64,
    /// Candidate thresholds evaluated per numeric feature.
    pub n_bins: usize,
    pub leaf_prediction: LeafPrediction,
    /// A split needs at least two branches holding this fraction of the weight.
    pub min_branch_fraction: f64,
}

impl Default for HoeffdingTreeParams {
    fn default() -> Self {
        Self {
            grace_period: 200,
            split_confidence: 1e-7,
            tie_threshold: 0.05,
            n_bins: 10,
            leaf_prediction: LeafPrediction::MajorityClass,
            min_branch_fraction: 0.01,
        }
    }
}

impl HoeffdingTreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.grace_period == 0 || self.n_bins == 0 {
            return Err(Error::config(
                "tree",
                "grace_period and n_bins must be positive",
            ));
        }
        if !(self.split_confidence > 0.0 && self.split_confidence < 1.0) {
            return Err(Error::config("tree.split_confidence", "must lie in (0,1)"));
        }
        if self.tie_threshold < 0.0 {
            return Err(Error::config("tree.tie_threshold", "must be non-negative"));
        }
        Ok(())
    }
}

/// Weighted running mean and variance of one feature for one class.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct GaussianEstimator {
    weight: f64,
    mean: f64,
    var_sum: f64,
    min: Option<f64>,
    max: Option<f64>,
}

impl GaussianEstimator {
    fn add(&mut self, value: f64, w: f64) {
        if self.weight > 0.0 {
            self.weight += w;
            let last = self.mean;
            self.mean += w * (value - last) / self.weight;
            self.var_sum += w * (value - last) * (value - self.mean);
        } else {
            self.weight = w;
            self.mean = value;
        }
        self.min = Some(self.min.map_or(value, |m| m.min(value)));
        self.max = Some(self.max.map_or(value, |m| m.max(value)));
    }

    fn std_dev(&self) -> f64 {
        if self.weight > 1.0 {
            (self.var_sum / (self.weight - 1.0)).max(0.0).sqrt()
        } else {
            0.0
        }
    }

    fn pdf(&self, v: f64) -> f64 {
        let sd = self.std_dev();
        if sd > 0.0 {
            let z = (v - self.mean) / sd;
            (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
        } else if v == self.mean {
            1.0
        } else {
            0.0
        }
    }

    /// Estimated weight at or below `v`.
    fn weight_at_or_below(&self, v: f64) -> f64 {
        let (Some(min), Some(max)) = (self.min, self.max) else {
            return 0.0;
        };
        if v < min {
            0.0
        } else if v >= max {
            self.weight
        } else {
            let sd = self.std_dev();
            let cdf = if sd > 0.0 {
                normal_cdf((v - self.mean) / sd)
            } else if v < self.mean {
                0.0
            } else {
                1.0
            };
            cdf * self.weight
        }
    }
}

/// Standard normal CDF via the complementary error function (|error| < 1.2e-7).
pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn erfc(x: f64) -> f64 {
    // Numerical Recipes erfcc, Chebyshev fit
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277)))))))))
            .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    /// Weight per class observed since this node became a leaf.
    pub class_counts: [f64; 2],
    /// Class distribution estimated by the parent's split; used only until
    /// the leaf sees its own data.
    prior: [f64; 2],
    weight_at_last_eval: f64,
    observers: Vec<[GaussianEstimator; 2]>,
}

impl Leaf {
    fn new(dim: usize, prior: [f64; 2]) -> Self {
        Self {
            class_counts: [0.0; 2],
            prior,
            weight_at_last_eval: 0.0,
            observers: vec![Default::default(); dim],
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.class_counts[0] + self.class_counts[1]
    }

    fn is_pure(&self) -> bool {
        self.class_counts[0] == 0.0 || self.class_counts[1] == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(Leaf),
}

#[derive(Debug, Clone, PartialEq)]
struct SplitCandidate {
    feature: usize,
    threshold: f64,
    merit: f64,
    branch_dists: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingTree {
    params: HoeffdingTreeParams,
    dim: Option<usize>,
    /// Arena; index 0 is the root.
    nodes: Vec<Node>,
}

fn entropy(dist: &[f64; 2]) -> f64 {
    let total = dist[0] + dist[1];
    if total <= 0.0 {
        return 0.0;
    }
    dist.iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / total;
            -p * p.log2()
        })
        .sum()
}

fn normalize(dist: [f64; 2]) -> [f64; 2] {
    let total = dist[0] + dist[1];
    if total > 0.0 {
        [dist[0] / total, dist[1] / total]
    } else {
        [0.5, 0.5]
    }
}

impl HoeffdingTree {
    pub fn new(params: HoeffdingTreeParams) -> Self {
        Self {
            params,
            dim: None,
            nodes: vec![Node::Leaf(Leaf::new(0, [0.0; 2]))],
        }
    }

    pub fn params(&self) -> &HoeffdingTreeParams {
        &self.params
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    /// Feature of the root split, if the root has split.
    pub fn root_split_feature(&self) -> Option<usize> {
        match &self.nodes[0] {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf(_) => None,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        match self.dim {
            Some(d) if d != x.len() => Err(Error::param(format!(
                "feature dimension {} does not match tree dimension {d}",
                x.len()
            ))),
            _ => Ok(()),
        }
    }

    fn leaf_index(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                Node::Leaf(_) => return idx,
            }
        }
    }

    /// Class distribution at the leaf `x` reaches; sums to 1.
    pub fn predict_proba(&self, x: &[f64]) -> Result<[f64; 2]> {
        self.check_dim(x)?;
        if self.dim.is_none() {
            return Ok([0.5, 0.5]);
        }
        let Node::Leaf(leaf) = &self.nodes[self.leaf_index(x)] else {
            unreachable!("leaf_index always stops at a leaf")
        };
        if leaf.total_weight() <= 0.0 {
            return Ok(normalize(leaf.prior));
        }
        if self.params.leaf_prediction == LeafPrediction::NaiveBayes {
            return Ok(naive_bayes(leaf, x));
        }
        Ok(normalize(leaf.class_counts))
    }

    /// Majority label; ties go to class 0.
    pub fn predict(&self, x: &[f64]) -> Result<(u8, [f64; 2])> {
        let dist = self.predict_proba(x)?;
        Ok(((dist[1] > dist[0]) as u8, dist))
    }

    pub fn learn_one(&mut self, x: &[f64], y: u8, weight: f64) -> Result<()> {
        if y > 1 {
            return Err(Error::param(format!("label must be 0 or 1, got {y}")));
        }
        self.check_dim(x)?;
        if weight <= 0.0 {
            return Ok(());
        }
        if self.dim.is_none() {
            self.dim = Some(x.len());
            self.nodes[0] = Node::Leaf(Leaf::new(x.len(), [0.0; 2]));
        }
        let idx = self.leaf_index(x);
        let should_eval = {
            let Node::Leaf(leaf) = &mut self.nodes[idx] else {
                unreachable!()
            };
            leaf.class_counts[y as usize] += weight;
            for (obs, &v) in leaf.observers.iter_mut().zip(x) {
                obs[y as usize].add(v, weight);
            }
            let seen = leaf.total_weight();
            if seen - leaf.weight_at_last_eval >= self.params.grace_period as f64 {
                leaf.weight_at_last_eval = seen;
                !leaf.is_pure()
            } else {
                false
            }
        };
        if should_eval {
            self.attempt_split(idx);
        }
        Ok(())
    }

    fn best_split_for_feature(&self, leaf: &Leaf, feature: usize) -> Option<SplitCandidate> {
        let obs = &leaf.observers[feature];
        let lo = obs.iter().filter_map(|o| o.min).reduce(f64::min)?;
        let hi = obs.iter().filter_map(|o| o.max).reduce(f64::max)?;
        if hi <= lo {
            return None;
        }
        let parent = entropy(&leaf.class_counts);
        let total = leaf.total_weight();
        let bins = self.params.n_bins;
        let mut best: Option<SplitCandidate> = None;
        for i in 1..=bins {
            let t = lo + (hi - lo) * i as f64 / (bins + 1) as f64;
            let mut left = [0.0; 2];
            let mut right = [0.0; 2];
            for c in 0..2 {
                let below = obs[c].weight_at_or_below(t);
                left[c] = below;
                right[c] = obs[c].weight - below;
            }
            let wl = left[0] + left[1];
            let wr = right[0] + right[1];
            let min_w = self.params.min_branch_fraction * total;
            if wl < min_w || wr < min_w {
                continue;
            }
            let merit = parent - (wl / total) * entropy(&left) - (wr / total) * entropy(&right);
            if best.as_ref().is_none_or(|b| merit > b.merit) {
                best = Some(SplitCandidate {
                    feature,
                    threshold: t,
                    merit,
                    branch_dists: [left, right],
                });
            }
        }
        best
    }

    fn attempt_split(&mut self, idx: usize) {
        let Node::Leaf(leaf) = &self.nodes[idx] else {
            return;
        };
        let dim = leaf.observers.len();
        let mut candidates: Vec<SplitCandidate> = (0..dim)
            .filter_map(|f| self.best_split_for_feature(leaf, f))
            .collect();
        // the null split (keep the leaf) competes with merit 0
        candidates.push(SplitCandidate {
            feature: usize::MAX,
            threshold: 0.0,
            merit: 0.0,
            branch_dists: [[0.0; 2]; 2],
        });
        // stable sort keeps the lowest feature index first among equal merits
        candidates.sort_by(|a, b| b.merit.total_cmp(&a.merit));
        let best = &candidates[0];
        let second = &candidates[1];
        if best.feature == usize::MAX || best.merit <= 0.0 {
            return;
        }
        let n = leaf.total_weight().round().max(1.0) as u64;
        let eps = hoeffding_bound(1.0, self.params.split_confidence, n)
            .expect("validated tree parameters");
        if best.merit - second.merit > eps || eps < self.params.tie_threshold {
            let best = best.clone();
            self.split_leaf(idx, &best);
        }
    }

    fn split_leaf(&mut self, idx: usize, split: &SplitCandidate) {
        let dim = self.dim.unwrap_or(0);
        let left = self.nodes.len();
        self.nodes
            .push(Node::Leaf(Leaf::new(dim, split.branch_dists[0])));
        self.nodes
            .push(Node::Leaf(Leaf::new(dim, split.branch_dists[1])));
        self.nodes[idx] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right: left + 1,
        };
    }

    /// Hand-built tree, for tests and fixtures.
    #[doc(hidden)]
    pub fn from_nodes(params: HoeffdingTreeParams, dim: usize, nodes: Vec<Node>) -> Self {
        Self {
            params,
            dim: Some(dim),
            nodes,
        }
    }

    #[doc(hidden)]
    pub fn leaf_with_counts(dim: usize, counts: [f64; 2]) -> Node {
        let mut leaf = Leaf::new(dim, [0.0; 2]);
        leaf.class_counts = counts;
        leaf.weight_at_last_eval = counts[0] + counts[1];
        Node::Leaf(leaf)
    }
}

fn naive_bayes(leaf: &Leaf, x: &[f64]) -> [f64; 2] {
    let total = leaf.total_weight();
    let mut log_score = [0.0f64; 2];
    for c in 0..2 {
        if leaf.class_counts[c] <= 0.0 {
            log_score[c] = f64::NEG_INFINITY;
            continue;
        }
        log_score[c] = (leaf.class_counts[c] / total).ln();
        for (obs, &v) in leaf.observers.iter().zip(x) {
            log_score[c] += obs[c].pdf(v).max(1e-300).ln();
        }
    }
    let m = log_score[0].max(log_score[1]);
    let e = [(log_score[0] - m).exp(), (log_score[1] - m).exp()];
    normalize(e)
}
