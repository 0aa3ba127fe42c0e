//! Spatial post-processing of per-segment categorical predictions.
//!
//! Each segment's label is scored by the product of neighbor transition
//! probabilities and the model's own probability for that label. [`adapt`]
//! repeats synchronous argmax sweeps over the network until no label changes.

use std::collections::HashMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::RoadNetwork;

const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmoothingError {
    #[error("undefined transition row {0}: no observations and zero pseudo-count")]
    UndefinedRow(usize),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("label {label} outside alphabet of size {k}")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("pseudo-count must be finite and non-negative, got {0}")]
    BadAlpha(f64),
    #[error("max_iters must be at least 1")]
    NoIterations,
    #[error("transition file: {0}")]
    Format(String),
}

/// Probability vector over a finite alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalDistribution(Vec<f64>);

impl CategoricalDistribution {
    pub fn new(p: Vec<f64>) -> Result<Self, SmoothingError> {
        if p.is_empty() {
            return Err(SmoothingError::InvalidDistribution("empty".into()));
        }
        if p.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(SmoothingError::InvalidDistribution(format!("negative or non-finite entry in {p:?}")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(SmoothingError::InvalidDistribution(format!("sums to {sum}")));
        }
        Ok(CategoricalDistribution(p))
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(w: &[f64]) -> Result<Self, SmoothingError> {
        let sum: f64 = w.iter().sum();
        if !(sum > 0.0) || w.iter().any(|v| !(*v >= 0.0)) {
            return Err(SmoothingError::InvalidDistribution(format!("cannot normalize {w:?}")));
        }
        Ok(CategoricalDistribution(w.iter().map(|v| v / sum).collect()))
    }

    pub fn uniform(k: usize) -> Self {
        CategoricalDistribution(vec![1.0 / k as f64; k])
    }

    pub fn one_hot(k: usize, idx: usize) -> Self {
        let mut p = vec![0.0; k];
        p[idx] = 1.0;
        CategoricalDistribution(p)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.0[idx]
    }

    /// Index of the largest probability; ties go to the smallest index.
    pub fn argmax(&self) -> usize {
        argmax_first(&self.0)
    }
}

pub(crate) fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Row-stochastic matrix with `prob(from, to) = P(neighbor = to | segment = from)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    k: usize,
    probs: Vec<f64>,
    alpha: f64,
}

impl TransitionMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, SmoothingError> {
        let k = rows.len();
        if k == 0 {
            return Err(SmoothingError::Format("empty matrix".into()));
        }
        let mut probs = Vec::with_capacity(k * k);
        for row in rows {
            if row.len() != k {
                return Err(SmoothingError::LengthMismatch {
                    expected: k,
                    got: row.len(),
                });
            }
            probs.extend(CategoricalDistribution::new(row)?.0);
        }
        Ok(TransitionMatrix { k, probs, alpha: 0.0 })
    }

    pub fn uniform(k: usize) -> Self {
        TransitionMatrix {
            k,
            probs: vec![1.0 / k as f64; k * k],
            alpha: 0.0,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.probs[from * self.k + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.probs[from * self.k..(from + 1) * self.k]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.k).map(|r| self.row(r).to_vec()).collect()
    }

    /// Writes a header row of K column names followed by K rows of K
    /// probabilities.
    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let header: Vec<String> = (1..=self.k).map(|c| format!("to_{c}")).collect();
        wtr.write_record(&header)?;
        for r in 0..self.k {
            wtr.write_record(self.row(r).iter().map(|p| p.to_string()))?;
        }
        wtr.flush()
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, SmoothingError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let k = rdr.headers().map_err(|e| SmoothingError::Format(e.to_string()))?.len();
        let mut rows = Vec::with_capacity(k);
        for rec in rdr.records() {
            let rec = rec.map_err(|e| SmoothingError::Format(e.to_string()))?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| SmoothingError::Format(format!("{s:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        if rows.len() != k {
            return Err(SmoothingError::LengthMismatch {
                expected: k,
                got: rows.len(),
            });
        }
        Self::from_rows(rows)
    }
}

/// Counts every ordered adjacent labeled pair and normalizes each row with
/// additive smoothing `alpha`. `labels[i]` is the category of segment `i`,
/// or `None` when unlabeled.
pub fn estimate_transitions(
    net: &RoadNetwork,
    labels: &[Option<usize>],
    k: usize,
    alpha: f64,
) -> Result<TransitionMatrix, SmoothingError> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(SmoothingError::BadAlpha(alpha));
    }
    if labels.len() != net.len() {
        return Err(SmoothingError::LengthMismatch {
            expected: net.len(),
            got: labels.len(),
        });
    }
    let mut counts = vec![0u64; k * k];
    for (i, li) in labels.iter().enumerate() {
        let Some(a) = *li else { continue };
        if a >= k {
            return Err(SmoothingError::LabelOutOfRange { label: a, k });
        }
        for &j in net.neighbors(i) {
            if let Some(b) = labels[j] {
                if b >= k {
                    return Err(SmoothingError::LabelOutOfRange { label: b, k });
                }
                counts[a * k + b] += 1;
            }
        }
    }
    let mut probs = vec![0.0; k * k];
    for r in 0..k {
        let row = &counts[r * k..(r + 1) * k];
        let total: u64 = row.iter().sum();
        let denom = total as f64 + alpha * k as f64;
        if denom == 0.0 {
            return Err(SmoothingError::UndefinedRow(r));
        }
        for c in 0..k {
            probs[r * k + c] = (row[c] as f64 + alpha) / denom;
        }
    }
    Ok(TransitionMatrix { k, probs, alpha })
}

/// Log of `prod_j P(neighbor_j | candidate) * P(candidate | x)`. Returns
/// negative infinity when any factor is zero.
pub fn local_score(
    candidate: usize,
    neighbor_labels: impl IntoIterator<Item = usize>,
    transitions: &TransitionMatrix,
    model: &CategoricalDistribution,
) -> f64 {
    let mut score = model.get(candidate).ln();
    for b in neighbor_labels {
        score += transitions.prob(candidate, b).ln();
    }
    score
}

fn best_label(i: usize, net: &RoadNetwork, snapshot: &[usize], t: &TransitionMatrix, model: &CategoricalDistribution) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for a in 0..t.k() {
        let s = local_score(a, net.neighbors(i).iter().map(|&j| snapshot[j]), t, model);
        if s > best_score {
            best = a;
            best_score = s;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdaptOutcome {
    pub labels: Vec<usize>,
    pub converged: bool,
    /// Sweeps performed, including the final sweep that changed nothing.
    pub iterations: usize,
    /// True when the sweep sequence revisited an earlier labeling.
    pub cycled: bool,
}

fn validate_inputs(
    net: &RoadNetwork,
    labels: &[usize],
    t: &TransitionMatrix,
    models: &[CategoricalDistribution],
) -> Result<(), SmoothingError> {
    for (len, what) in [(labels.len(), net.len()), (models.len(), net.len())] {
        if len != what {
            return Err(SmoothingError::LengthMismatch { expected: what, got: len });
        }
    }
    if let Some(&bad) = labels.iter().find(|&&a| a >= t.k()) {
        return Err(SmoothingError::LabelOutOfRange { label: bad, k: t.k() });
    }
    if let Some(m) = models.iter().find(|m| m.len() != t.k()) {
        return Err(SmoothingError::LengthMismatch {
            expected: t.k(),
            got: m.len(),
        });
    }
    Ok(())
}

/// One synchronous sweep: every segment takes its best label given the
/// previous labeling of its neighbors.
pub fn sweep(net: &RoadNetwork, current: &[usize], t: &TransitionMatrix, models: &[CategoricalDistribution]) -> Vec<usize> {
    (0..net.len())
        .into_par_iter()
        .map(|i| best_label(i, net, current, t, &models[i]))
        .collect()
}

/// Whether every segment already holds its best label.
pub fn is_fixed_point(net: &RoadNetwork, labels: &[usize], t: &TransitionMatrix, models: &[CategoricalDistribution]) -> bool {
    sweep(net, labels, t, models) == labels
}

pub fn adapt(
    net: &RoadNetwork,
    initial: &[usize],
    t: &TransitionMatrix,
    models: &[CategoricalDistribution],
    max_iters: usize,
) -> Result<AdaptOutcome, SmoothingError> {
    if max_iters == 0 {
        return Err(SmoothingError::NoIterations);
    }
    validate_inputs(net, initial, t, models)?;

    let mut current = initial.to_vec();
    // Labelings seen so far, bucketed by hash; a revisit means an oscillation.
    let mut seen: HashMap<u64, Vec<usize>> = HashMap::new();
    let mut history: Vec<Vec<usize>> = Vec::new();
    let mut remember = |labels: &Vec<usize>, history: &mut Vec<Vec<usize>>| -> bool {
        let h = hash_labels(labels);
        let bucket = seen.entry(h).or_default();
        if bucket.iter().any(|&idx| history[idx] == *labels) {
            return true;
        }
        bucket.push(history.len());
        history.push(labels.clone());
        false
    };
    remember(&current, &mut history);

    for iteration in 1..=max_iters {
        let next = sweep(net, &current, t, models);
        if next == current {
            return Ok(AdaptOutcome {
                labels: current,
                converged: true,
                iterations: iteration,
                cycled: false,
            });
        }
        current = next;
        if remember(&current, &mut history) {
            log::warn!("label sweeps entered a cycle after {iteration} iterations");
            return Ok(AdaptOutcome {
                labels: current,
                converged: false,
                iterations: iteration,
                cycled: true,
            });
        }
    }
    Ok(AdaptOutcome {
        labels: current,
        converged: false,
        iterations: max_iters,
        cycled: false,
    })
}

fn hash_labels(labels: &[usize]) -> u64 {
    use std::hash::{DefaultHasher, Hash, Hasher};
    let mut h = DefaultHasher::new();
    labels.hash(&mut h);
    h.finish()
}
