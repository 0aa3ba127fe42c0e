//! Contrastive representation learning with a momentum twin encoder and a
//! key queue.
//!
//! Three losses share the same machinery:
//!
//! * ordinal contrastive loss: supervised positives at several label
//!   granularities `ceil(y / u)`, `u = 1..=l`, weighted by `w[u-1]`;
//! * supervised contrastive loss: positives are queue keys with the anchor's
//!   label (the ordinal loss with `l = 1`, `w = [1]`);
//! * single-positive InfoNCE: the only positive is the anchor's own twin view.
//!
//! Encoders are linear maps over input vectors. A table of free per-sample
//! embeddings is the special case of one-hot inputs. The projection head is a
//! linear map followed by L2 normalization. Queue keys come from the momentum
//! encoder and are constants for differentiation, so gradients only reach the
//! encoder and the projection.

use std::collections::VecDeque;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContrastiveError {
    #[error("queue is empty")]
    EmptyQueue,
    #[error("temperature must be positive, got {0}")]
    BadTemperature(f64),
    #[error("label {label} outside 1..={max}")]
    LabelOutOfRange { label: u8, max: u8 },
    #[error("twin view of sample {0} is not in the queue")]
    MissingTwin(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid hyperparameter: {0}")]
    Hyper(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Moco,
    Supcon,
    Ordcon,
}

impl std::str::FromStr for LossKind {
    type Err = ContrastiveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "moco" => Ok(LossKind::Moco),
            "supcon" => Ok(LossKind::Supcon),
            "ordcon" => Ok(LossKind::Ordcon),
            _ => Err(ContrastiveError::Hyper(format!("unknown loss {s:?}"))),
        }
    }
}

/// `ceil(y / u)` for `u = 1..=levels`.
pub fn virtual_labels(y: u8, levels: usize, max_label: u8) -> Result<Vec<u8>, ContrastiveError> {
    if y == 0 || y > max_label {
        return Err(ContrastiveError::LabelOutOfRange { label: y, max: max_label });
    }
    if levels == 0 {
        return Err(ContrastiveError::Hyper("levels must be at least 1".into()));
    }
    Ok((1..=levels).map(|u| (y as usize).div_ceil(u) as u8).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueEntry {
    /// Unit-norm projected key.
    pub key: Array1<f64>,
    pub label: u8,
    pub virtual_labels: Vec<u8>,
    /// Index of the sample whose view produced this key.
    pub sample: usize,
}

/// Fixed-capacity FIFO of keys; the oldest entry is evicted first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyQueue {
    capacity: usize,
    entries: VecDeque<QueueEntry>,
}

impl KeyQueue {
    pub fn new(capacity: usize) -> Self {
        KeyQueue {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, entry: QueueEntry) {
        if self.capacity == 0 {
            return;
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> impl ExactSizeIterator<Item = &QueueEntry> + DoubleEndedIterator {
        self.entries.iter()
    }

    pub fn get(&self, i: usize) -> &QueueEntry {
        &self.entries[i]
    }

    /// Reorders entries by `perm`, where new position `i` takes old entry `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> KeyQueue {
        KeyQueue {
            capacity: self.capacity,
            entries: perm.iter().map(|&i| self.entries[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingState {
    /// Trainable encoder, embed_dim x input_dim.
    pub encoder: Array2<f64>,
    /// Momentum twin of the encoder, same shape.
    pub momentum_encoder: Array2<f64>,
    /// Projection head, proj_dim x embed_dim, output L2-normalized.
    pub projection: Array2<f64>,
    pub queue: KeyQueue,
    pub tau: f64,
    /// Weight of each label granularity; its length is the level count.
    pub level_weights: Vec<f64>,
    /// Labels range over 1..=num_classes.
    pub num_classes: u8,
}

/// Anchor views and twin views, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub anchors: Array2<f64>,
    pub twins: Array2<f64>,
    pub labels: Vec<u8>,
    pub samples: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub grad_encoder: Array2<f64>,
    pub grad_projection: Array2<f64>,
}

fn normalize(h: &Array1<f64>) -> (Array1<f64>, f64) {
    let norm = h.dot(h).sqrt();
    (h / norm, norm)
}

impl EmbeddingState {
    pub fn new(
        input_dim: usize,
        embed_dim: usize,
        proj_dim: usize,
        queue_capacity: usize,
        tau: f64,
        level_weights: Vec<f64>,
        num_classes: u8,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, ContrastiveError> {
        if input_dim == 0 || embed_dim == 0 || proj_dim == 0 {
            return Err(ContrastiveError::Hyper("dimensions must be positive".into()));
        }
        let enc_scale = Normal::new(0.0, 1.0 / (input_dim as f64).sqrt()).expect("positive std");
        let proj_scale = Normal::new(0.0, 1.0 / (embed_dim as f64).sqrt()).expect("positive std");
        let encoder = Array2::from_shape_fn((embed_dim, input_dim), |_| enc_scale.sample(rng));
        let projection = Array2::from_shape_fn((proj_dim, embed_dim), |_| proj_scale.sample(rng));
        let state = EmbeddingState {
            momentum_encoder: encoder.clone(),
            encoder,
            projection,
            queue: KeyQueue::new(queue_capacity),
            tau,
            level_weights,
            num_classes,
        };
        state.check_hyper()?;
        Ok(state)
    }

    fn check_hyper(&self) -> Result<(), ContrastiveError> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(ContrastiveError::BadTemperature(self.tau));
        }
        if self.level_weights.is_empty() {
            return Err(ContrastiveError::Hyper("at least one level weight required".into()));
        }
        if self.level_weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(ContrastiveError::Hyper(format!("level weights must be non-negative, got {:?}", self.level_weights)));
        }
        if self.encoder.dim() != self.momentum_encoder.dim() {
            return Err(ContrastiveError::Shape("encoder and momentum encoder differ".into()));
        }
        if self.projection.ncols() != self.encoder.nrows() {
            return Err(ContrastiveError::Shape("projection input must match embedding size".into()));
        }
        Ok(())
    }

    pub fn levels(&self) -> usize {
        self.level_weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.encoder.ncols()
    }

    /// Inference embedding `f(x)`; the projection head is not applied.
    pub fn embed(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.encoder.dot(&x)
    }

    /// Unit-norm projected embedding `p(f(x))`.
    pub fn project(&self, x: ArrayView1<f64>) -> Array1<f64> {
        normalize(&self.projection.dot(&self.encoder.dot(&x))).0
    }

    /// Unit-norm projected key `p(g(x))` from the momentum encoder.
    pub fn key(&self, x: ArrayView1<f64>) -> Array1<f64> {
        normalize(&self.projection.dot(&self.momentum_encoder.dot(&x))).0
    }

    /// Encodes twin views with the momentum encoder and appends them to the queue.
    pub fn enqueue(&mut self, batch: &Batch) -> Result<(), ContrastiveError> {
        self.check_batch(batch)?;
        for (r, (&y, &sample)) in batch.labels.iter().zip(&batch.samples).enumerate() {
            let key = self.key(batch.twins.row(r));
            let virtual_labels = virtual_labels(y, self.levels(), self.num_classes)?;
            self.queue.push(QueueEntry {
                key,
                label: y,
                virtual_labels,
                sample,
            });
        }
        Ok(())
    }

    fn check_batch(&self, batch: &Batch) -> Result<(), ContrastiveError> {
        let n = batch.labels.len();
        if batch.anchors.nrows() != n || batch.twins.nrows() != n || batch.samples.len() != n {
            return Err(ContrastiveError::Shape("batch rows disagree".into()));
        }
        if batch.anchors.ncols() != self.input_dim() || batch.twins.ncols() != self.input_dim() {
            return Err(ContrastiveError::Shape(format!(
                "views have {} columns, encoder expects {}",
                batch.anchors.ncols(),
                self.input_dim()
            )));
        }
        if let Some(&y) = batch.labels.iter().find(|&&y| y == 0 || y > self.num_classes) {
            return Err(ContrastiveError::LabelOutOfRange {
                label: y,
                max: self.num_classes,
            });
        }
        Ok(())
    }

    fn check_loss_inputs(&self, batch: &Batch) -> Result<(), ContrastiveError> {
        self.check_hyper()?;
        self.check_batch(batch)?;
        if self.queue.is_empty() {
            return Err(ContrastiveError::EmptyQueue);
        }
        if batch.is_empty() {
            return Err(ContrastiveError::Shape("empty batch".into()));
        }
        Ok(())
    }

    /// Forward pass through encoder and projection for one anchor, then the
    /// per-key logits `q . k / tau`.
    fn anchor_logits(&self, x: ArrayView1<f64>) -> AnchorPass {
        let z = self.encoder.dot(&x);
        let h = self.projection.dot(&z);
        let (q, norm) = normalize(&h);
        let logits: Vec<f64> = self.queue.entries().map(|e| q.dot(&e.key) / self.tau).collect();
        AnchorPass { z, q, norm, logits }
    }

    /// Back-propagates `dL/dlogits` for one anchor into the gradient buffers.
    fn accumulate(&self, x: ArrayView1<f64>, pass: &AnchorPass, dlogits: &[f64], grads: &mut (Array2<f64>, Array2<f64>)) {
        let mut dq = Array1::<f64>::zeros(pass.q.len());
        for (entry, g) in self.queue.entries().zip(dlogits) {
            if *g != 0.0 {
                dq.scaled_add(*g / self.tau, &entry.key);
            }
        }
        // Jacobian of h / |h| is (I - q q^T) / |h|.
        let radial = pass.q.dot(&dq);
        let dh = (&dq - &(&pass.q * radial)) / pass.norm;
        let dz = self.projection.t().dot(&dh);
        grads.1 += &outer(&dh, &pass.z);
        grads.0 += &outer(&dz, &x.to_owned());
    }

    fn zero_grads(&self) -> (Array2<f64>, Array2<f64>) {
        (Array2::zeros(self.encoder.dim()), Array2::zeros(self.projection.dim()))
    }

    /// Ordinal contrastive loss and its gradients. Levels whose positive set
    /// is empty contribute nothing for that anchor.
    pub fn ordcon_loss(&self, batch: &Batch) -> Result<LossOutput, ContrastiveError> {
        self.check_loss_inputs(batch)?;
        let levels = self.levels();
        let n = batch.len() as f64;
        let mut total = 0.0;
        let mut grads = self.zero_grads();
        for (r, &y) in batch.labels.iter().enumerate() {
            let vl = virtual_labels(y, levels, self.num_classes)?;
            let x = batch.anchors.row(r);
            let pass = self.anchor_logits(x);
            let lse = log_sum_exp(&pass.logits);
            let mut dlogits = vec![0.0; pass.logits.len()];
            for (u, &w) in self.level_weights.iter().enumerate() {
                let positives: Vec<usize> = self
                    .queue
                    .entries()
                    .enumerate()
                    .filter(|(_, e)| e.virtual_labels.get(u).copied().unwrap_or_else(|| (e.label as usize).div_ceil(u + 1) as u8) == vl[u])
                    .map(|(k, _)| k)
                    .collect();
                if positives.is_empty() {
                    continue;
                }
                let scale = w / positives.len() as f64;
                let mut term = 0.0;
                for &j in &positives {
                    term += pass.logits[j] - lse;
                    dlogits[j] -= scale;
                }
                total -= scale * term;
                for (k, s) in pass.logits.iter().enumerate() {
                    dlogits[k] += w * (s - lse).exp();
                }
            }
            dlogits.iter_mut().for_each(|g| *g /= n);
            self.accumulate(x, &pass, &dlogits, &mut grads);
        }
        Ok(LossOutput {
            loss: total / n,
            grad_encoder: grads.0,
            grad_projection: grads.1,
        })
    }

    /// Supervised contrastive loss: positives share the anchor's label.
    pub fn supcon_loss(&self, batch: &Batch) -> Result<LossOutput, ContrastiveError> {
        self.check_loss_inputs(batch)?;
        let n = batch.len() as f64;
        let mut total = 0.0;
        let mut grads = self.zero_grads();
        for (r, &y) in batch.labels.iter().enumerate() {
            let x = batch.anchors.row(r);
            let pass = self.anchor_logits(x);
            let positives: Vec<usize> = self
                .queue
                .entries()
                .enumerate()
                .filter(|(_, e)| e.label == y)
                .map(|(k, _)| k)
                .collect();
            if positives.is_empty() {
                continue;
            }
            let lse = log_sum_exp(&pass.logits);
            let p = positives.len() as f64;
            let mean_log_prob: f64 = positives.iter().map(|&j| pass.logits[j] - lse).sum::<f64>() / p;
            total -= mean_log_prob;
            let mut dlogits: Vec<f64> = pass.logits.iter().map(|s| (s - lse).exp() / n).collect();
            for &j in &positives {
                dlogits[j] -= 1.0 / (p * n);
            }
            self.accumulate(x, &pass, &dlogits, &mut grads);
        }
        Ok(LossOutput {
            loss: total / n,
            grad_encoder: grads.0,
            grad_projection: grads.1,
        })
    }

    /// Single-positive InfoNCE. The positive of each anchor is the most
    /// recently queued key produced from the same sample.
    pub fn moco_loss(&self, batch: &Batch) -> Result<LossOutput, ContrastiveError> {
        self.check_loss_inputs(batch)?;
        let n = batch.len() as f64;
        let mut total = 0.0;
        let mut grads = self.zero_grads();
        for (r, &sample) in batch.samples.iter().enumerate() {
            let twin = self
                .queue
                .entries()
                .rposition(|e| e.sample == sample)
                .ok_or(ContrastiveError::MissingTwin(sample))?;
            let x = batch.anchors.row(r);
            let pass = self.anchor_logits(x);
            let lse = log_sum_exp(&pass.logits);
            total -= pass.logits[twin] - lse;
            let mut dlogits: Vec<f64> = pass.logits.iter().map(|s| (s - lse).exp() / n).collect();
            dlogits[twin] -= 1.0 / n;
            self.accumulate(x, &pass, &dlogits, &mut grads);
        }
        Ok(LossOutput {
            loss: total / n,
            grad_encoder: grads.0,
            grad_projection: grads.1,
        })
    }

    pub fn loss(&self, kind: LossKind, batch: &Batch) -> Result<LossOutput, ContrastiveError> {
        match kind {
            LossKind::Moco => self.moco_loss(batch),
            LossKind::Supcon => self.supcon_loss(batch),
            LossKind::Ordcon => self.ordcon_loss(batch),
        }
    }

    /// `g <- m * g + (1 - m) * f`.
    pub fn momentum_update(&mut self, m: f64) -> Result<(), ContrastiveError> {
        if !(0.0..=1.0).contains(&m) {
            return Err(ContrastiveError::Hyper(format!("momentum must be in [0, 1], got {m}")));
        }
        if self.encoder.dim() != self.momentum_encoder.dim() {
            return Err(ContrastiveError::Shape("encoder and momentum encoder differ".into()));
        }
        self.momentum_encoder.zip_mut_with(&self.encoder, |g, f| *g = m * *g + (1.0 - m) * *f);
        Ok(())
    }
}

struct AnchorPass {
    z: Array1<f64>,
    q: Array1<f64>,
    norm: f64,
    logits: Vec<f64>,
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let a2 = a.view().insert_axis(Axis(1));
    let b2 = b.view().insert_axis(Axis(0));
    a2.dot(&b2)
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    /// Weight per label granularity; the length is the level count.
    pub level_weights: Vec<f64>,
    pub tau: f64,
    pub momentum: f64,
    pub queue_capacity: usize,
    pub embed_dim: usize,
    pub proj_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Standard deviation of the Gaussian noise that creates the two views.
    pub view_noise: f64,
    pub num_classes: u8,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossKind::Ordcon,
            level_weights: vec![0.95, 0.05],
            tau: 0.07,
            momentum: 0.999,
            queue_capacity: 256,
            embed_dim: 16,
            proj_dim: 8,
            epochs: 20,
            batch_size: 32,
            learning_rate: 0.05,
            view_noise: 0.1,
            num_classes: 4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), ContrastiveError> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(ContrastiveError::Hyper("batch size and epochs must be positive".into()));
        }
        if self.queue_capacity < self.batch_size {
            return Err(ContrastiveError::Hyper(format!(
                "queue capacity {} must hold a full batch of {}",
                self.queue_capacity, self.batch_size
            )));
        }
        if !(self.learning_rate > 0.0) || !(self.view_noise >= 0.0) {
            return Err(ContrastiveError::Hyper("learning rate must be positive and view noise non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.momentum) {
            return Err(ContrastiveError::Hyper(format!("momentum must be in [0, 1], got {}", self.momentum)));
        }
        Ok(())
    }

    fn effective_weights(&self) -> Vec<f64> {
        match self.loss {
            LossKind::Ordcon => self.level_weights.clone(),
            LossKind::Supcon | LossKind::Moco => vec![1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: u8,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub state: EmbeddingState,
    /// Mean step loss per epoch.
    pub history: Vec<f64>,
}

/// Plain gradient descent on the chosen loss. Every step encodes the twin
/// views into the queue first, so the current batch's keys are among the
/// contrasted keys.
pub fn train_toy(config: &TrainConfig, data: &[Sample]) -> Result<TrainOutcome, ContrastiveError> {
    config.validate()?;
    let input_dim = data
        .first()
        .map(|s| s.x.len())
        .ok_or_else(|| ContrastiveError::Hyper("no training samples".into()))?;
    if let Some(s) = data.iter().find(|s| s.x.len() != input_dim) {
        return Err(ContrastiveError::Shape(format!("sample has {} inputs, expected {input_dim}", s.x.len())));
    }
    if let Some(s) = data.iter().find(|s| s.y == 0 || s.y > config.num_classes) {
        return Err(ContrastiveError::LabelOutOfRange {
            label: s.y,
            max: config.num_classes,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = EmbeddingState::new(
        input_dim,
        config.embed_dim,
        config.proj_dim,
        config.queue_capacity,
        config.tau,
        config.effective_weights(),
        config.num_classes,
        &mut rng,
    )?;
    let noise = Normal::new(0.0, config.view_noise.max(f64::MIN_POSITIVE)).expect("valid std");
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut steps = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let mut view = |i: usize| -> Vec<f64> {
                data[i]
                    .x
                    .iter()
                    .map(|v| if config.view_noise > 0.0 { v + noise.sample(&mut rng) } else { *v })
                    .collect()
            };
            let mut anchors = Vec::with_capacity(chunk.len() * input_dim);
            let mut twins = Vec::with_capacity(chunk.len() * input_dim);
            for &i in chunk {
                anchors.extend(view(i));
                twins.extend(view(i));
            }
            let batch = Batch {
                anchors: Array2::from_shape_vec((chunk.len(), input_dim), anchors).expect("row-major batch"),
                twins: Array2::from_shape_vec((chunk.len(), input_dim), twins).expect("row-major batch"),
                labels: chunk.iter().map(|&i| data[i].y).collect(),
                samples: chunk.to_vec(),
            };
            state.enqueue(&batch)?;
            let out = state.loss(config.loss, &batch)?;
            state.encoder.scaled_add(-config.learning_rate, &out.grad_encoder);
            state.projection.scaled_add(-config.learning_rate, &out.grad_projection);
            state.momentum_update(config.momentum)?;
            epoch_loss += out.loss;
            steps += 1;
        }
        history.push(epoch_loss / steps as f64);
    }
    Ok(TrainOutcome { state, history })
}
