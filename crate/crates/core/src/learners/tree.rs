//! Greedy binary trees over presorted feature orders.
//!
//! Every node keeps, for each feature, its samples sorted by that feature's
//! value. A split stably partitions those lists, so growth costs
//! `O(n * d)` per tree level and no per-node sorting is needed. The same
//! builder grows Gini classification trees and the Newton regression trees
//! used by boosting; only the [`Objective`] differs.

use ndarray::ArrayView2;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{argmax, Classifier, TreeConfig};

/// Gains at or below this are treated as "no improvement".
pub const GAIN_EPSILON: f64 = 1e-12;

/// Flat tree storage; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node<L> {
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf(L),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree<L> {
    pub nodes: Vec<Node<L>>,
}

impl<L> Tree<L> {
    pub fn leaf_for(&self, x: &[f64]) -> &L {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold { *left } else { *right } as usize;
                }
                Node::Leaf(l) => return l,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go<L>(t: &Tree<L>, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Split { left, right, .. } => 1 + go(t, *left as usize).max(go(t, *right as usize)),
                Node::Leaf(_) => 0,
            }
        }
        go(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}

pub type ClassCounts = [u64; 3];

/// Gini impurity of a class-count vector.
pub fn gini(counts: &ClassCounts) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let mut s = 0.0;
    for &c in counts {
        let p = c as f64 / n;
        s += p * p;
    }
    1.0 - s
}

/// Parent impurity minus the size-weighted child impurities.
pub fn gini_gain(parent: &ClassCounts, left: &ClassCounts, right: &ClassCounts) -> f64 {
    let n: u64 = parent.iter().sum();
    let nl: u64 = left.iter().sum();
    let nr: u64 = right.iter().sum();
    let n = n as f64;
    gini(parent) - (nl as f64 / n) * gini(left) - (nr as f64 / n) * gini(right)
}

/// Split objective plugged into the builder.
pub(crate) trait Objective: Sync {
    type Stats: Copy + Default;
    type Leaf;

    fn add(&self, stats: &mut Self::Stats, sample: usize);
    fn sub(&self, parent: &Self::Stats, left: &Self::Stats) -> Self::Stats;
    /// Gain of splitting `parent` into `left`/`right`; `None` when the split
    /// violates a child constraint.
    fn gain(&self, parent: &Self::Stats, left: &Self::Stats, right: &Self::Stats) -> Option<f64>;
    fn is_pure(&self, stats: &Self::Stats) -> bool;
    fn leaf(&self, stats: &Self::Stats) -> Self::Leaf;
}

pub(crate) struct GiniObjective<'a> {
    pub labels: &'a [usize],
    /// Sample -> label lookup (samples may be bootstrap duplicates).
    pub sample_rows: &'a [usize],
}

impl Objective for GiniObjective<'_> {
    type Stats = ClassCounts;
    type Leaf = ClassCounts;

    fn add(&self, stats: &mut ClassCounts, sample: usize) {
        stats[self.labels[self.sample_rows[sample]]] += 1;
    }

    fn sub(&self, parent: &ClassCounts, left: &ClassCounts) -> ClassCounts {
        [parent[0] - left[0], parent[1] - left[1], parent[2] - left[2]]
    }

    fn gain(&self, parent: &ClassCounts, left: &ClassCounts, right: &ClassCounts) -> Option<f64> {
        Some(gini_gain(parent, left, right))
    }

    fn is_pure(&self, stats: &ClassCounts) -> bool {
        stats.iter().filter(|&&c| c > 0).count() <= 1
    }

    fn leaf(&self, stats: &ClassCounts) -> ClassCounts {
        *stats
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Midpoint between consecutive distinct values, kept strictly below `hi`.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m < hi {
        m
    } else {
        lo
    }
}

/// Sweeps one feature's sorted sample list for the best threshold.
fn sweep<O: Objective>(
    obj: &O,
    x: &ArrayView2<f64>,
    sample_rows: &[usize],
    feature: usize,
    sorted: &[u32],
    parent: &O::Stats,
    best: &mut Option<SplitCandidate>,
) {
    let mut left = O::Stats::default();
    for w in 0..sorted.len().saturating_sub(1) {
        let s = sorted[w] as usize;
        obj.add(&mut left, s);
        let v = x[[sample_rows[s], feature]];
        let next = x[[sample_rows[sorted[w + 1] as usize], feature]];
        if v < next {
            let right = obj.sub(parent, &left);
            if let Some(g) = obj.gain(parent, &left, &right) {
                let better = match best {
                    Some(b) => g > b.gain,
                    None => true,
                };
                if g > GAIN_EPSILON && better {
                    *best = Some(SplitCandidate {
                        feature,
                        threshold: midpoint(v, next),
                        gain: g,
                    });
                }
            }
        }
    }
}

/// Best Gini split of `rows` over `candidate_features`, scanning midpoints of
/// consecutive distinct values. Ties go to the lower feature index, then the
/// lower threshold. `None` when no split has positive gain.
pub fn best_split(
    x: ArrayView2<f64>,
    labels: &[usize],
    rows: &[usize],
    candidate_features: &[usize],
) -> Option<SplitCandidate> {
    if rows.len() < 2 {
        return None;
    }
    let obj = GiniObjective {
        labels,
        sample_rows: rows,
    };
    let mut parent = ClassCounts::default();
    for s in 0..rows.len() {
        obj.add(&mut parent, s);
    }
    if obj.is_pure(&parent) {
        return None;
    }
    let mut features = candidate_features.to_vec();
    features.sort_unstable();
    features.dedup();
    let mut best = None;
    for f in features {
        let mut sorted: Vec<u32> = (0..rows.len() as u32).collect();
        sorted.sort_by(|&a, &b| {
            x[[rows[a as usize], f]]
                .total_cmp(&x[[rows[b as usize], f]])
                .then(a.cmp(&b))
        });
        sweep(&obj, &x, rows, f, &sorted, &parent, &mut best);
    }
    best
}

/// Per-feature row orders of a full matrix, sorted by value then row index.
pub(crate) fn presort(x: &ArrayView2<f64>) -> Vec<Vec<u32>> {
    (0..x.ncols())
        .map(|f| {
            let mut o: Vec<u32> = (0..x.nrows() as u32).collect();
            o.sort_by(|&a, &b| x[[a as usize, f]].total_cmp(&x[[b as usize, f]]).then(a.cmp(&b)));
            o
        })
        .collect()
}

/// Sample lists for a multiset of rows: samples are numbered row-major by
/// row, so row `r` owns `start[r]..start[r]+count[r]`.
pub(crate) fn expand_orders(orders: &[Vec<u32>], counts: &[u32]) -> (Vec<usize>, Vec<Vec<u32>>) {
    let mut start = vec![0u32; counts.len()];
    let mut sample_rows = Vec::new();
    for (r, &c) in counts.iter().enumerate() {
        start[r] = sample_rows.len() as u32;
        sample_rows.extend(std::iter::repeat(r).take(c as usize));
    }
    let lists = orders
        .iter()
        .map(|o| {
            let mut l = Vec::with_capacity(sample_rows.len());
            for &r in o {
                let r = r as usize;
                l.extend(start[r]..start[r] + counts[r]);
            }
            l
        })
        .collect();
    (sample_rows, lists)
}

pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features examined per node; `None` means all, in index order.
    pub features_per_split: Option<usize>,
}

pub(crate) struct Builder<'a, 'x, O: Objective> {
    pub obj: &'a O,
    pub x: ArrayView2<'x, f64>,
    pub sample_rows: &'a [usize],
    pub params: GrowParams,
    pub rng: Option<&'a mut ChaCha8Rng>,
    nodes: Vec<Node<O::Leaf>>,
    goes_left: Vec<bool>,
}

impl<'a, 'x, O: Objective> Builder<'a, 'x, O> {
    pub fn new(obj: &'a O, x: ArrayView2<'x, f64>, sample_rows: &'a [usize], params: GrowParams, rng: Option<&'a mut ChaCha8Rng>) -> Self {
        Builder {
            obj,
            x,
            sample_rows,
            params,
            rng,
            nodes: Vec::new(),
            goes_left: vec![false; sample_rows.len()],
        }
    }

    /// Grows from `lists` (one sorted sample list per feature) and `members`
    /// (the node's samples, any order).
    pub fn grow(mut self, lists: Vec<Vec<u32>>, members: Vec<u32>) -> Tree<O::Leaf> {
        self.node(lists, members, 0);
        Tree { nodes: self.nodes }
    }

    fn candidates(&mut self) -> Vec<usize> {
        let d = self.x.ncols();
        match (self.params.features_per_split, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut f: Vec<usize> = rand::seq::index::sample(rng, d, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn node(&mut self, lists: Vec<Vec<u32>>, members: Vec<u32>, depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        let mut stats = O::Stats::default();
        for &s in &members {
            self.obj.add(&mut stats, s as usize);
        }
        let can_split = members.len() >= self.params.min_samples_split.max(2)
            && self.params.max_depth.map_or(true, |m| depth < m)
            && !self.obj.is_pure(&stats)
            && !lists.is_empty();
        let split = if can_split {
            let mut best = None;
            for f in self.candidates() {
                sweep(self.obj, &self.x, self.sample_rows, f, &lists[f], &stats, &mut best);
            }
            best
        } else {
            None
        };
        let Some(split) = split else {
            self.nodes.push(Node::Leaf(self.obj.leaf(&stats)));
            return id;
        };

        for &s in &members {
            self.goes_left[s as usize] = self.x[[self.sample_rows[s as usize], split.feature]] <= split.threshold;
        }
        let (lm, rm): (Vec<u32>, Vec<u32>) = members.iter().partition(|&&s| self.goes_left[s as usize]);
        drop(members);
        let mut left_lists = Vec::with_capacity(lists.len());
        let mut right_lists = Vec::with_capacity(lists.len());
        for l in lists {
            let (a, b): (Vec<u32>, Vec<u32>) = l.into_iter().partition(|&s| self.goes_left[s as usize]);
            left_lists.push(a);
            right_lists.push(b);
        }
        self.nodes.push(Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: 0,
            right: 0,
        });
        let left = self.node(left_lists, lm, depth + 1);
        let right = self.node(right_lists, rm, depth + 1);
        if let Node::Split { left: l, right: r, .. } = &mut self.nodes[id as usize] {
            *l = left;
            *r = right;
        }
        id
    }
}

/// CART classification tree with Gini impurity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub tree: Tree<ClassCounts>,
    pub config: TreeConfig,
    pub n_features: usize,
}

impl DecisionTreeModel {
    pub fn leaf_counts(&self, x: &[f64]) -> ClassCounts {
        *self.tree.leaf_for(x)
    }

    pub fn proba_row(&self, x: &[f64]) -> [f64; 3] {
        let c = self.leaf_counts(x);
        let total: u64 = c.iter().sum();
        let t = total as f64;
        [c[0] as f64 / t, c[1] as f64 / t, c[2] as f64 / t]
    }

    pub fn depth(&self) -> usize {
        self.tree.depth()
    }
}

impl Classifier for DecisionTreeModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn proba_row(&self, x: &[f64]) -> [f64; 3] {
        DecisionTreeModel::proba_row(self, x)
    }
}

/// Grows a tree on `sample_rows` (row indices, duplicates allowed).
pub(crate) fn grow_classifier(
    x: ArrayView2<f64>,
    labels: &[usize],
    orders: &[Vec<u32>],
    counts: &[u32],
    config: &TreeConfig,
    features_per_split: Option<usize>,
    rng: Option<&mut ChaCha8Rng>,
) -> DecisionTreeModel {
    let (sample_rows, lists) = expand_orders(orders, counts);
    let obj = GiniObjective {
        labels,
        sample_rows: &sample_rows,
    };
    let members: Vec<u32> = (0..sample_rows.len() as u32).collect();
    let params = GrowParams {
        max_depth: config.max_depth,
        min_samples_split: config.min_samples_split,
        features_per_split,
    };
    let tree = Builder::new(&obj, x, &sample_rows, params, rng).grow(lists, members);
    DecisionTreeModel {
        tree,
        config: config.clone(),
        n_features: x.ncols(),
    }
}

pub fn train_decision_tree(x: ArrayView2<f64>, labels: &[usize], config: &TreeConfig) -> Result<DecisionTreeModel> {
    if x.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if labels.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: labels.len(),
        });
    }
    let orders = presort(&x);
    let counts = vec![1u32; x.nrows()];
    Ok(grow_classifier(x, labels, &orders, &counts, config, None, None))
}

/// Class index with the largest probability; ties to the lower index.
pub fn predict_class(p: &[f64; 3]) -> usize {
    argmax(p)
}
