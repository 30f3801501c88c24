//! Gradient-boosted regression trees on logistic loss.
//!
//! Splits are chosen greedily over at most 256 quantized candidate
//! thresholds per feature with second-order gain, as in XGBoost.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_two_classes, ClassifierError, Dataset, FeatureLayout};
use crate::numeric::sigmoid;

pub const MAX_BINS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    /// Minimum gain for a split to be kept.
    pub gamma: f64,
    /// Minimum hessian sum on each side of a split.
    pub min_child_weight: f64,
    /// Row sampling fraction per tree; 1.0 uses every row.
    pub subsample: f64,
    /// Feature sampling fraction per tree; 1.0 uses every feature.
    pub colsample_bytree: f64,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 4,
            learning_rate: 0.3,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            subsample: 1.0,
            colsample_bytree: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(f64),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[feature] < threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gbdt {
    pub layout: FeatureLayout,
    /// Log-odds of the training prior.
    pub base_score: f64,
    pub trees: Vec<Tree>,
}

impl Gbdt {
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row))
    }

    /// Flat encoding: base score, tree count, then per tree a node count and
    /// `[is_leaf, feature, threshold, left, right, value]` per node.
    pub(crate) fn to_params(&self) -> Vec<f64> {
        let mut out = vec![self.base_score, self.trees.len() as f64];
        for t in &self.trees {
            out.push(t.nodes.len() as f64);
            for n in &t.nodes {
                match *n {
                    Node::Leaf(v) => out.extend([1.0, 0.0, 0.0, 0.0, 0.0, v]),
                    Node::Split { feature, threshold, left, right } => {
                        out.extend([0.0, feature as f64, threshold, left as f64, right as f64, 0.0])
                    }
                }
            }
        }
        out
    }

    pub(crate) fn from_params(layout: FeatureLayout, p: &[f64]) -> Option<Self> {
        let mut it = p.iter().copied();
        let base_score = it.next()?;
        let n_trees = it.next()? as usize;
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let n_nodes = it.next()? as usize;
            let mut nodes = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                let rec: Vec<f64> = it.by_ref().take(6).collect();
                if rec.len() != 6 {
                    return None;
                }
                nodes.push(if rec[0] == 1.0 {
                    Node::Leaf(rec[5])
                } else {
                    let (left, right) = (rec[3] as usize, rec[4] as usize);
                    if left >= n_nodes || right >= n_nodes || rec[1] as usize >= layout.dim() {
                        return None;
                    }
                    Node::Split { feature: rec[1] as usize, threshold: rec[2], left, right }
                });
            }
            trees.push(Tree { nodes });
        }
        it.next().is_none().then_some(Self { layout, base_score, trees })
    }
}

/// Candidate split thresholds for one feature column.
pub fn candidate_thresholds(values: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = values.to_vec();
    u.sort_by(f64::total_cmp);
    u.dedup();
    let mid = |a: f64, b: f64| 0.5 * (a + b);
    if u.len() <= MAX_BINS {
        return u.windows(2).map(|w| mid(w[0], w[1])).collect();
    }
    let mut out: Vec<f64> = (1..MAX_BINS)
        .map(|k| {
            let idx = k * u.len() / MAX_BINS;
            mid(u[idx - 1], u[idx])
        })
        .collect();
    out.dedup();
    out
}

struct Binned {
    thresholds: Vec<Vec<f64>>,
    /// Feature-major bin codes: `codes[f][row]`.
    codes: Vec<Vec<u8>>,
}

fn quantize(data: &Dataset) -> Binned {
    let d = data.layout.dim();
    let mut thresholds = Vec::with_capacity(d);
    let mut codes = Vec::with_capacity(d);
    for f in 0..d {
        let col: Vec<f64> = data.samples.iter().map(|s| s.features[f]).collect();
        let t = candidate_thresholds(&col);
        codes.push(col.iter().map(|&x| t.partition_point(|&c| c <= x) as u8).collect());
        thresholds.push(t);
    }
    Binned { thresholds, codes }
}

/// Second-order split gain with leaf penalty `lambda`.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr))
}

struct Builder<'a> {
    binned: &'a Binned,
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbdtParams,
    features: &'a [usize],
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let g: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        let leaf = Node::Leaf(-g / (h + self.params.lambda) * self.params.learning_rate);
        let id = self.nodes.len();
        self.nodes.push(leaf);
        if depth >= self.params.max_depth || rows.len() < 2 {
            return id;
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for &f in self.features {
            let thr = &self.binned.thresholds[f];
            if thr.is_empty() {
                continue;
            }
            let codes = &self.binned.codes[f];
            let mut hg = vec![0.0; thr.len() + 1];
            let mut hh = vec![0.0; thr.len() + 1];
            for &i in &rows {
                let b = codes[i] as usize;
                hg[b] += self.grad[i];
                hh[b] += self.hess[i];
            }
            let (mut gl, mut hl) = (0.0, 0.0);
            for j in 0..thr.len() {
                gl += hg[j];
                hl += hh[j];
                let (gr, hr) = (g - gl, h - hl);
                if hl < self.params.min_child_weight || hr < self.params.min_child_weight {
                    continue;
                }
                let gain = split_gain(gl, hl, gr, hr, self.params.lambda) - self.params.gamma;
                if gain > best.map_or(0.0, |b| b.0) {
                    best = Some((gain, f, j));
                }
            }
        }
        let Some((_, feature, j)) = best else {
            return id;
        };
        let codes = &self.binned.codes[feature];
        let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| codes[i] as usize <= j);
        if l.is_empty() || r.is_empty() {
            return id;
        }
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold: self.binned.thresholds[feature][j],
            left,
            right,
        };
        id
    }
}

pub fn train_gbdt(data: &Dataset, params: &GbdtParams) -> Result<Gbdt, ClassifierError> {
    data.validate()?;
    if params.n_trees == 0 || params.max_depth == 0 {
        return Err(ClassifierError::InvalidParameter("n_trees and max_depth must be >= 1".into()));
    }
    if !(params.learning_rate > 0.0 && params.lambda >= 0.0 && params.subsample > 0.0 && params.subsample <= 1.0)
        || !(params.colsample_bytree > 0.0 && params.colsample_bytree <= 1.0)
    {
        return Err(ClassifierError::InvalidParameter(
            "learning_rate, lambda, subsample or colsample_bytree out of range".into(),
        ));
    }
    check_two_classes(data)?;
    let n = data.len();
    let y = data.labels();
    let prior = y.iter().sum::<f64>() / n as f64;
    let base_score = (prior / (1.0 - prior)).ln();
    let binned = quantize(data);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut margin = vec![base_score; n];
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let p: Vec<f64> = margin.iter().map(|&m| sigmoid(m)).collect();
        let grad: Vec<f64> = p.iter().zip(&y).map(|(p, y)| p - y).collect();
        let hess: Vec<f64> = p.iter().map(|p| p * (1.0 - p)).collect();
        let rows: Vec<usize> = if params.subsample < 1.0 {
            (0..n).filter(|_| rng.random::<f64>() < params.subsample).collect()
        } else {
            (0..n).collect()
        };
        let features: Vec<usize> = if params.colsample_bytree < 1.0 {
            let d = binned.thresholds.len();
            let k = ((params.colsample_bytree * d as f64).round() as usize).max(1);
            let mut f = rand::seq::index::sample(&mut rng, d, k).into_vec();
            f.sort_unstable();
            f
        } else {
            (0..binned.thresholds.len()).collect()
        };
        let mut b = Builder { binned: &binned, grad: &grad, hess: &hess, params, features: &features, nodes: Vec::new() };
        b.build(rows, 0);
        let tree = Tree { nodes: b.nodes };
        for (m, s) in margin.iter_mut().zip(&data.samples) {
            *m += tree.predict(&s.features);
        }
        trees.push(tree);
    }
    Ok(Gbdt { layout: data.layout, base_score, trees })
}
