//! Classification trees over discretized road features.
//!
//! Splits are binary. Ordinal features (speed, lanes) split on a threshold
//! `code <= t`; categorical features split one category against the rest.
//! A missing value at a split follows the child that received more training
//! samples. Leaves keep the class distribution of their training samples,
//! which the fusion head consumes as a feature embedding.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{Feature, FeatureRecord};
use crate::lts::LtsLabel;
use crate::smoothing::{argmax_first, CategoricalDistribution};

pub const N_CLASSES: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CartError {
    #[error("no training samples")]
    EmptyData,
    #[error("{records} feature records but {labels} labels")]
    LengthMismatch { records: usize, labels: usize },
    #[error("{folds} folds requested for {samples} samples")]
    TooFewSamples { folds: usize, samples: usize },
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("invalid min_samples_split {0}")]
    BadMinSplit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Entropy,
}

impl FromStr for Criterion {
    type Err = CartError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gini" => Ok(Criterion::Gini),
            "entropy" => Ok(Criterion::Entropy),
            _ => Err(CartError::BadGrid(format!("unknown criterion {s:?}"))),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Gini => "gini",
            Criterion::Entropy => "entropy",
        })
    }
}

impl Criterion {
    /// Impurity of a class-count vector. Entropy is measured in bits.
    pub fn impurity(self, counts: &[usize]) -> f64 {
        let n: usize = counts.iter().sum();
        if n == 0 {
            return 0.0;
        }
        let n = n as f64;
        match self {
            Criterion::Gini => 1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>(),
            Criterion::Entropy => -counts
                .iter()
                .filter(|&&c| c > 0)
                .map(|&c| {
                    let p = c as f64 / n;
                    p * p.log2()
                })
                .sum::<f64>(),
        }
    }
}

/// Minimum node size eligible for splitting. Values below 1 are fractions of
/// the training-set size, values of 1 or more are absolute counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinSplit(f64);

impl MinSplit {
    pub fn new(v: f64) -> Result<Self, CartError> {
        if !(v > 0.0) || !v.is_finite() || (v >= 1.0 && v.fract() != 0.0) {
            return Err(CartError::BadMinSplit(v));
        }
        Ok(MinSplit(v))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Resolved sample count for a training set of `n` samples (at least 2).
    pub fn resolve(self, n: usize) -> usize {
        let count = if self.0 < 1.0 {
            (self.0 * n as f64).ceil() as usize
        } else {
            self.0 as usize
        };
        count.max(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: usize,
    pub min_samples_split: MinSplit,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            criterion: Criterion::Gini,
            max_depth: 10,
            min_samples_split: MinSplit(2.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Split {
    /// `code == value` goes left.
    Equals { feature: Feature, value: u8 },
    /// `code <= value` goes left.
    AtMost { feature: Feature, value: u8 },
}

impl Split {
    pub fn feature(self) -> Feature {
        match self {
            Split::Equals { feature, .. } | Split::AtMost { feature, .. } => feature,
        }
    }

    fn goes_left(self, code: u8) -> bool {
        match self {
            Split::Equals { value, .. } => code == value,
            Split::AtMost { value, .. } => code <= value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        counts: [usize; N_CLASSES],
    },
    Internal {
        split: Split,
        missing_left: bool,
        impurity_decrease: f64,
        counts: [usize; N_CLASSES],
        left: usize,
        right: usize,
    },
}

impl Node {
    pub fn counts(&self) -> &[usize; N_CLASSES] {
        match self {
            Node::Leaf { counts } | Node::Internal { counts, .. } => counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub params: TreeParams,
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

struct Builder<'a> {
    codes: &'a [[Option<u8>; 7]],
    labels: &'a [usize],
    criterion: Criterion,
    max_depth: usize,
    min_split: usize,
    nodes: Vec<Node>,
}

struct Candidate {
    split: Split,
    missing_left: bool,
    decrease: f64,
}

fn class_counts(idx: &[usize], labels: &[usize]) -> [usize; N_CLASSES] {
    let mut c = [0; N_CLASSES];
    for &i in idx {
        c[labels[i]] += 1;
    }
    c
}

fn add(a: &[usize; N_CLASSES], b: &[usize; N_CLASSES]) -> [usize; N_CLASSES] {
    std::array::from_fn(|k| a[k] + b[k])
}

fn sub(a: &[usize; N_CLASSES], b: &[usize; N_CLASSES]) -> [usize; N_CLASSES] {
    std::array::from_fn(|k| a[k] - b[k])
}

impl Builder<'_> {
    fn best_split(&self, idx: &[usize], counts: &[usize; N_CLASSES]) -> Option<Candidate> {
        let n = idx.len() as f64;
        let parent = self.criterion.impurity(counts);
        let mut best: Option<Candidate> = None;
        for (fi, feature) in Feature::ALL.into_iter().enumerate() {
            let card = feature.cardinality();
            let mut hist = vec![[0usize; N_CLASSES]; card + 1];
            let mut missing = [0usize; N_CLASSES];
            for &i in idx {
                match self.codes[i][fi] {
                    Some(c) => hist[c as usize][self.labels[i]] += 1,
                    None => missing[self.labels[i]] += 1,
                }
            }
            let present = sub(counts, &missing);
            let mut consider = |split: Split, left_present: [usize; N_CLASSES]| {
                let right_present = sub(&present, &left_present);
                let nl: usize = left_present.iter().sum();
                let nr: usize = right_present.iter().sum();
                if nl == 0 || nr == 0 {
                    return;
                }
                let missing_left = nl >= nr;
                let (left, right) = if missing_left {
                    (add(&left_present, &missing), right_present)
                } else {
                    (left_present, add(&right_present, &missing))
                };
                let wl = left.iter().sum::<usize>() as f64 / n;
                let wr = right.iter().sum::<usize>() as f64 / n;
                let decrease = parent - wl * self.criterion.impurity(&left) - wr * self.criterion.impurity(&right);
                if best.as_ref().is_none_or(|b| decrease > b.decrease) {
                    best = Some(Candidate {
                        split,
                        missing_left,
                        decrease,
                    });
                }
            };
            if feature.is_ordinal() {
                let mut acc = [0usize; N_CLASSES];
                for t in 1..card as u8 {
                    acc = add(&acc, &hist[t as usize]);
                    consider(Split::AtMost { feature, value: t }, acc);
                }
            } else {
                for c in 1..=card as u8 {
                    consider(Split::Equals { feature, value: c }, hist[c as usize]);
                }
            }
        }
        best.filter(|b| b.decrease >= -1e-12)
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = class_counts(&idx, self.labels);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.max_depth || idx.len() < self.min_split {
            return id;
        }
        let Some(cand) = self.best_split(&idx, &counts) else {
            return id;
        };
        let fi = Feature::ALL.iter().position(|&f| f == cand.split.feature()).expect("known feature");
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| match self.codes[i][fi] {
            Some(c) => cand.split.goes_left(c),
            None => cand.missing_left,
        });
        let left = self.grow(left_idx, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        self.nodes[id] = Node::Internal {
            split: cand.split,
            missing_left: cand.missing_left,
            impurity_decrease: cand.decrease.max(0.0),
            counts,
            left,
            right,
        };
        id
    }
}

fn check_inputs(records: &[FeatureRecord], labels: &[LtsLabel]) -> Result<(), CartError> {
    if records.len() != labels.len() {
        return Err(CartError::LengthMismatch {
            records: records.len(),
            labels: labels.len(),
        });
    }
    if records.is_empty() {
        return Err(CartError::EmptyData);
    }
    Ok(())
}

/// Greedy recursive binary splitting that maximizes impurity decrease.
pub fn fit(records: &[FeatureRecord], labels: &[LtsLabel], params: &TreeParams) -> Result<DecisionTree, CartError> {
    check_inputs(records, labels)?;
    let codes: Vec<[Option<u8>; 7]> = records.iter().map(FeatureRecord::codes).collect();
    let labels: Vec<usize> = labels.iter().map(|l| l.index()).collect();
    let mut builder = Builder {
        codes: &codes,
        labels: &labels,
        criterion: params.criterion,
        max_depth: params.max_depth,
        min_split: params.min_samples_split.resolve(records.len()),
        nodes: Vec::new(),
    };
    builder.grow((0..records.len()).collect(), 0);
    Ok(DecisionTree {
        params: *params,
        nodes: builder.nodes,
    })
}

impl DecisionTree {
    fn leaf_of(&self, rec: &FeatureRecord) -> &Node {
        let mut node = &self.nodes[0];
        while let Node::Internal {
            split,
            missing_left,
            left,
            right,
            ..
        } = node
        {
            let go_left = match rec.code(split.feature()) {
                Some(c) => split.goes_left(c),
                None => *missing_left,
            };
            node = &self.nodes[if go_left { *left } else { *right }];
        }
        node
    }

    /// Training-label distribution of the leaf that `rec` reaches.
    pub fn leaf_distribution(&self, rec: &FeatureRecord) -> CategoricalDistribution {
        let counts = self.leaf_of(rec).counts();
        let w: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        CategoricalDistribution::from_weights(&w).expect("leaves hold at least one sample")
    }

    pub fn predict(&self, rec: &FeatureRecord) -> LtsLabel {
        let counts = self.leaf_of(rec).counts().map(|c| c as f64);
        LtsLabel::from_index(argmax_first(&counts)).expect("four classes")
    }

    pub fn accuracy(&self, records: &[FeatureRecord], labels: &[LtsLabel]) -> f64 {
        let hits = records.iter().zip(labels).filter(|(r, y)| self.predict(r) == **y).count();
        hits as f64 / records.len().max(1) as f64
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Internal { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub criteria: Vec<Criterion>,
    pub max_depth: Vec<usize>,
    pub min_samples_split: Vec<f64>,
    pub folds: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            criteria: vec![Criterion::Entropy, Criterion::Gini],
            max_depth: (1..=10).collect(),
            min_samples_split: vec![0.01, 0.03, 0.05, 0.1, 0.15, 0.2, 2.0, 4.0, 6.0],
            folds: 10,
        }
    }
}

impl GridSpec {
    fn cells(&self) -> Result<Vec<TreeParams>, CartError> {
        if self.criteria.is_empty() || self.max_depth.is_empty() || self.min_samples_split.is_empty() {
            return Err(CartError::BadGrid("every hyperparameter needs at least one value".into()));
        }
        if self.folds < 2 {
            return Err(CartError::BadGrid(format!("need at least 2 folds, got {}", self.folds)));
        }
        let mut out = Vec::new();
        for &criterion in &self.criteria {
            for &max_depth in &self.max_depth {
                for &m in &self.min_samples_split {
                    out.push(TreeParams {
                        criterion,
                        max_depth,
                        min_samples_split: MinSplit::new(m)?,
                    });
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub params: TreeParams,
    pub mean_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: TreeParams,
    pub best_accuracy: f64,
    pub table: Vec<CvRow>,
}

/// Stratified fold ids: each class is shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[LtsLabel], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for class in LtsLabel::ALL {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            fold[i] = next % k;
            next += 1;
        }
    }
    fold
}

/// Orders grid rows best-first: higher accuracy, then shallower, then gini,
/// then the larger effective minimum split.
fn compare_rows(a: &CvRow, b: &CvRow, n_train: usize) -> Ordering {
    let acc = if (a.mean_accuracy - b.mean_accuracy).abs() <= 1e-12 {
        Ordering::Equal
    } else {
        b.mean_accuracy.total_cmp(&a.mean_accuracy)
    };
    let crit_rank = |c: Criterion| match c {
        Criterion::Gini => 0,
        Criterion::Entropy => 1,
    };
    acc.then(a.params.max_depth.cmp(&b.params.max_depth))
        .then(crit_rank(a.params.criterion).cmp(&crit_rank(b.params.criterion)))
        .then(
            b.params
                .min_samples_split
                .resolve(n_train)
                .cmp(&a.params.min_samples_split.resolve(n_train)),
        )
        .then(b.params.min_samples_split.0.total_cmp(&a.params.min_samples_split.0))
}

pub fn grid_search(records: &[FeatureRecord], labels: &[LtsLabel], grid: &GridSpec, seed: u64) -> Result<GridResult, CartError> {
    check_inputs(records, labels)?;
    let cells = grid.cells()?;
    let k = grid.folds;
    if k > records.len() {
        return Err(CartError::TooFewSamples {
            folds: k,
            samples: records.len(),
        });
    }
    let fold_of = stratified_folds(labels, k, seed);
    let splits: Vec<_> = (0..k)
        .map(|f| {
            let mut train = (Vec::new(), Vec::new());
            let mut test = (Vec::new(), Vec::new());
            for i in 0..records.len() {
                let side = if fold_of[i] == f { &mut test } else { &mut train };
                side.0.push(records[i]);
                side.1.push(labels[i]);
            }
            (train, test)
        })
        .collect();

    let table: Vec<CvRow> = cells
        .par_iter()
        .map(|params| {
            let fold_accuracies: Vec<f64> = splits
                .iter()
                .map(|((tr_x, tr_y), (te_x, te_y))| {
                    let tree = fit(tr_x, tr_y, params).expect("non-empty training fold");
                    tree.accuracy(te_x, te_y)
                })
                .collect();
            CvRow {
                params: *params,
                mean_accuracy: fold_accuracies.iter().sum::<f64>() / k as f64,
                fold_accuracies,
            }
        })
        .collect();

    let n_train = records.len() - records.len() / k;
    let best = table
        .iter()
        .min_by(|a, b| compare_rows(a, b, n_train))
        .expect("grid has at least one cell");
    Ok(GridResult {
        best: best.params,
        best_accuracy: best.mean_accuracy,
        table,
    })
}

impl GridResult {
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["criterion", "max_depth", "min_samples_split", "mean_accuracy"])?;
        for row in &self.table {
            wtr.write_record([
                row.params.criterion.to_string(),
                row.params.max_depth.to_string(),
                row.params.min_samples_split.0.to_string(),
                format!("{:.6}", row.mean_accuracy),
            ])?;
        }
        wtr.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec_pv(parking: Option<u8>, volume: Option<u8>) -> FeatureRecord {
        let mut r = FeatureRecord::default();
        r.set_code(Feature::Parking, parking).unwrap();
        r.set_code(Feature::Volume, volume).unwrap();
        r
    }

    fn lts(v: u8) -> LtsLabel {
        LtsLabel::new(v as i64).unwrap()
    }

    #[test]
    fn impurities() {
        assert_eq!(Criterion::Gini.impurity(&[5, 0, 0, 0]), 0.0);
        assert_eq!(Criterion::Entropy.impurity(&[5, 0, 0, 0]), 0.0);
        assert!((Criterion::Entropy.impurity(&[3, 3, 0, 0]) - 1.0).abs() < 1e-15);
        assert!((Criterion::Gini.impurity(&[3, 3, 0, 0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn min_split_semantics() {
        assert_eq!(MinSplit::new(0.1).unwrap().resolve(55), 6);
        assert_eq!(MinSplit::new(0.01).unwrap().resolve(50), 2);
        assert_eq!(MinSplit::new(4.0).unwrap().resolve(1000), 4);
        assert!(MinSplit::new(2.5).is_err());
        assert!(MinSplit::new(0.0).is_err());
    }

    #[test]
    fn one_binary_feature_separates() {
        let x: Vec<_> = (0..20).map(|i| rec_pv(Some(1 + (i % 2) as u8), Some(1))).collect();
        let y: Vec<_> = (0..20).map(|i| lts(if i % 2 == 0 { 1 } else { 3 })).collect();
        let tree = fit(&x, &y, &TreeParams::default()).unwrap();
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.accuracy(&x, &y), 1.0);
        assert_eq!(tree.leaf_distribution(&rec_pv(Some(2), None)).probs(), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn pure_node_is_not_split() {
        let x: Vec<_> = (0..6).map(|i| rec_pv(Some(1 + (i % 2) as u8), Some(1))).collect();
        let y = vec![lts(2); 6];
        let tree = fit(&x, &y, &TreeParams::default()).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.leaf_distribution(&x[0]).probs(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn root_only_tree_reports_marginals() {
        let mut y = Vec::new();
        for (class, n) in [(1, 490), (2, 345), (3, 69), (4, 97)] {
            y.extend(std::iter::repeat_n(lts(class), n));
        }
        let x = vec![FeatureRecord::default(); y.len()];
        let params = TreeParams {
            max_depth: 0,
            ..TreeParams::default()
        };
        let tree = fit(&x, &y, &params).unwrap();
        let p = tree.leaf_distribution(&x[0]);
        let expected = [490.0 / 1001.0, 345.0 / 1001.0, 69.0 / 1001.0, 97.0 / 1001.0];
        for (a, b) in p.probs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_values_follow_the_larger_child() {
        let mut x: Vec<_> = (0..9).map(|i| rec_pv(Some(if i < 6 { 1 } else { 2 }), None)).collect();
        let mut y: Vec<_> = (0..9).map(|i| lts(if i < 6 { 1 } else { 4 })).collect();
        x.push(rec_pv(None, None));
        y.push(lts(1));
        let tree = fit(&x, &y, &TreeParams::default()).unwrap();
        assert_eq!(tree.predict(&rec_pv(None, Some(2))), lts(1));
        let Node::Internal { missing_left, .. } = &tree.nodes[0] else {
            panic!("root should split");
        };
        assert!(*missing_left);
    }

    #[test]
    fn unbounded_tree_memorizes_consistent_data() {
        let grid = crate::features::full_grid();
        let y: Vec<_> = grid.iter().map(|r| crate::lts::compute_lts(r).unwrap()).collect();
        let params = TreeParams {
            max_depth: usize::MAX,
            ..TreeParams::default()
        };
        let tree = fit(&grid, &y, &params).unwrap();
        assert_eq!(tree.accuracy(&grid, &y), 1.0);
        for node in &tree.nodes {
            if let Node::Internal { impurity_decrease, .. } = node {
                assert!(*impurity_decrease >= 0.0);
            }
        }
    }

    #[test]
    fn stump_matches_exhaustive_search() {
        // Every labeling of 8 samples over two binary features.
        let x: Vec<_> = (0..8).map(|i| rec_pv(Some(1 + (i & 1) as u8), Some(1 + ((i >> 1) & 1) as u8))).collect();
        for mask in 0u32..256 {
            let y: Vec<_> = (0..8).map(|i| lts(if mask >> i & 1 == 1 { 3 } else { 1 })).collect();
            for criterion in [Criterion::Gini, Criterion::Entropy] {
                let params = TreeParams {
                    criterion,
                    max_depth: 1,
                    min_samples_split: MinSplit(2.0),
                };
                let tree = fit(&x, &y, &params).unwrap();
                // Exhaustive: weighted child impurity of each possible stump.
                let stump_cost = |f: usize| {
                    let mut cost = 0.0;
                    for v in 1..=2u8 {
                        let mut counts = [0usize; 4];
                        for (r, l) in x.iter().zip(&y) {
                            let code = if f == 0 { r.parking.unwrap() as u8 } else { r.volume.unwrap() as u8 };
                            if code == v {
                                counts[l.index()] += 1;
                            }
                        }
                        cost += counts.iter().sum::<usize>() as f64 / 8.0 * criterion.impurity(&counts);
                    }
                    cost
                };
                let best = stump_cost(0).min(stump_cost(1));
                let parent = criterion.impurity(tree.nodes[0].counts());
                match &tree.nodes[0] {
                    Node::Internal { impurity_decrease, .. } => {
                        assert!((parent - impurity_decrease - best).abs() < 1e-12, "mask {mask}");
                    }
                    Node::Leaf { counts } => {
                        assert!(counts.iter().filter(|&&c| c > 0).count() <= 1, "mask {mask}");
                    }
                }
            }
        }
    }

    #[test]
    fn single_cell_grid_and_determinism() {
        let grid_x = crate::features::full_grid();
        let y: Vec<_> = grid_x.iter().map(|r| crate::lts::compute_lts(r).unwrap()).collect();
        let search_grid = GridSpec {
            criteria: vec![Criterion::Gini],
            max_depth: vec![3],
            min_samples_split: vec![2.0],
            folds: 5,
        };
        let a = grid_search(&grid_x, &y, &search_grid, 11).unwrap();
        assert_eq!(a.table.len(), 1);
        assert_eq!(a.best.max_depth, 3);
        assert_eq!(a, grid_search(&grid_x, &y, &search_grid, 11).unwrap());
    }

    #[test]
    fn grid_errors() {
        let x = vec![FeatureRecord::default(); 3];
        let y = vec![lts(1); 3];
        assert!(matches!(
            grid_search(&x, &y, &GridSpec::default(), 0),
            Err(CartError::TooFewSamples { .. })
        ));
        assert_eq!(fit(&[], &[], &TreeParams::default()), Err(CartError::EmptyData));
        let bad = GridSpec {
            folds: 1,
            ..GridSpec::default()
        };
        assert!(matches!(grid_search(&x, &y, &bad, 0), Err(CartError::BadGrid(_))));
    }

    #[test]
    fn stratified_folds_balance_classes() {
        let y: Vec<_> = (0..40).map(|i| lts(1 + (i % 4) as u8)).collect();
        let folds = stratified_folds(&y, 5, 3);
        for f in 0..5 {
            for class in LtsLabel::ALL {
                let n = (0..40).filter(|&i| folds[i] == f && y[i] == class).count();
                assert_eq!(n, 2);
            }
        }
    }

    #[test]
    fn tree_json_round_trip() {
        let x: Vec<_> = (0..20).map(|i| rec_pv(Some(1 + (i % 2) as u8), Some(1 + (i % 3 == 0) as u8))).collect();
        let y: Vec<_> = (0..20).map(|i| lts(1 + (i % 4) as u8)).collect();
        let tree = fit(&x, &y, &TreeParams::default()).unwrap();
        let json = serde_json::to_string(&tree).unwrap();
        assert_eq!(serde_json::from_str::<DecisionTree>(&json).unwrap(), tree);
    }
}
