//! Two-step LTS prediction.
//!
//! Per-feature predictions are optionally smoothed over the network, ground
//! truth replaces the features the data-availability scenario supplies, and
//! the resulting record is routed through a fitted tree. The tree leaf's
//! label distribution is mapped into the segment-embedding space, averaged
//! with the segment embedding, and classified by a linear softmax head.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cart::{DecisionTree, N_CLASSES};
use crate::contrastive::log_sum_exp;
use crate::features::{Feature, FeatureError, FeatureRecord};
use crate::lts::LtsLabel;
use crate::network::RoadNetwork;
use crate::smoothing::{adapt, CategoricalDistribution, SmoothingError, TransitionMatrix};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    Shape { what: String, expected: usize, got: usize },
    #[error("scenario must be 1, 2 or 3, got {0}")]
    BadScenario(u8),
    #[error("missing {0}")]
    Missing(String),
    #[error("invalid training setup: {0}")]
    Training(String),
    #[error("smoothing {feature}: {source}")]
    Smoothing { feature: Feature, source: SmoothingError },
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

fn shape(what: &str, expected: usize, got: usize) -> Result<(), PipelineError> {
    if expected == got {
        Ok(())
    } else {
        Err(PipelineError::Shape {
            what: what.to_string(),
            expected,
            got,
        })
    }
}

/// Which ground-truth road features accompany the segment imagery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario(u8);

impl Scenario {
    /// 1: none. 2: road type and cycling infrastructure. 3: lanes and speed.
    pub fn new(id: u8) -> Result<Self, PipelineError> {
        if (1..=3).contains(&id) {
            Ok(Scenario(id))
        } else {
            Err(PipelineError::BadScenario(id))
        }
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn available(self, feature: Feature) -> bool {
        match self.0 {
            2 => matches!(feature, Feature::RoadType | Feature::Infra),
            3 => matches!(feature, Feature::Lanes | Feature::Speed),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    pub xi: usize,
    /// `xi x 4`
    pub map: Array2<f64>,
    pub map_bias: Array1<f64>,
    /// `4 x xi`
    pub classifier: Array2<f64>,
    pub class_bias: Array1<f64>,
}

fn softmax(logits: &Array1<f64>) -> CategoricalDistribution {
    let lse = log_sum_exp(logits.as_slice().expect("contiguous"));
    let p: Vec<f64> = logits.iter().map(|z| (z - lse).exp()).collect();
    CategoricalDistribution::from_weights(&p).expect("softmax of finite logits")
}

impl FusionModel {
    pub fn zeros(xi: usize) -> Self {
        FusionModel {
            xi,
            map: Array2::zeros((xi, N_CLASSES)),
            map_bias: Array1::zeros(xi),
            classifier: Array2::zeros((N_CLASSES, xi)),
            class_bias: Array1::zeros(N_CLASSES),
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        shape("map rows", self.xi, self.map.nrows())?;
        shape("map columns", N_CLASSES, self.map.ncols())?;
        shape("map bias", self.xi, self.map_bias.len())?;
        shape("classifier rows", N_CLASSES, self.classifier.nrows())?;
        shape("classifier columns", self.xi, self.classifier.ncols())?;
        shape("classifier bias", N_CLASSES, self.class_bias.len())
    }

    /// `(embedding + map * leaf + map_bias) / 2`
    fn fused(&self, embedding: ArrayView1<f64>, leaf: &CategoricalDistribution) -> Array1<f64> {
        let leaf = ArrayView1::from(leaf.probs());
        (&embedding + &self.map.dot(&leaf) + &self.map_bias) / 2.0
    }

    pub fn logits(&self, embedding: ArrayView1<f64>, leaf: &CategoricalDistribution) -> Result<Array1<f64>, PipelineError> {
        shape("segment embedding", self.xi, embedding.len())?;
        shape("leaf distribution", N_CLASSES, leaf.len())?;
        Ok(self.classifier.dot(&self.fused(embedding, leaf)) + &self.class_bias)
    }
}

pub fn fuse_predict(
    model: &FusionModel,
    embedding: ArrayView1<f64>,
    leaf: &CategoricalDistribution,
) -> Result<CategoricalDistribution, PipelineError> {
    Ok(softmax(&model.logits(embedding, leaf)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Standard deviation of the initial weights.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            epochs: 300,
            learning_rate: 0.5,
            init_scale: 0.01,
            seed: 0,
        }
    }
}

fn check_training_inputs(embeddings: ArrayView2<f64>, leaves: &[CategoricalDistribution], labels: &[LtsLabel]) -> Result<(), PipelineError> {
    if labels.is_empty() {
        return Err(PipelineError::Training("no training samples".into()));
    }
    shape("embedding rows", labels.len(), embeddings.nrows())?;
    shape("leaf distributions", labels.len(), leaves.len())?;
    if let Some(l) = leaves.iter().find(|l| l.len() != N_CLASSES) {
        shape("leaf distribution", N_CLASSES, l.len())?;
    }
    Ok(())
}

/// Mean cross-entropy of the fused classifier.
pub fn cross_entropy(model: &FusionModel, embeddings: ArrayView2<f64>, leaves: &[CategoricalDistribution], labels: &[LtsLabel]) -> Result<f64, PipelineError> {
    check_training_inputs(embeddings, leaves, labels)?;
    let mut total = 0.0;
    for ((e, leaf), y) in embeddings.rows().into_iter().zip(leaves).zip(labels) {
        let z = model.logits(e, leaf)?;
        total += log_sum_exp(z.as_slice().expect("contiguous")) - z[y.index()];
    }
    Ok(total / labels.len() as f64)
}

/// Full-batch gradient descent on mean cross-entropy. Returns the model and
/// the loss before each epoch followed by the final loss.
pub fn train_fusion(
    embeddings: ArrayView2<f64>,
    leaves: &[CategoricalDistribution],
    labels: &[LtsLabel],
    config: &FusionConfig,
) -> Result<(FusionModel, Vec<f64>), PipelineError> {
    check_training_inputs(embeddings, leaves, labels)?;
    if !(config.learning_rate > 0.0) || !(config.init_scale >= 0.0) {
        return Err(PipelineError::Training("learning rate must be positive and init scale non-negative".into()));
    }
    let xi = embeddings.ncols();
    let n = labels.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, config.init_scale).expect("validated scale");
    let mut model = FusionModel::zeros(xi);
    model.map.mapv_inplace(|_| normal.sample(&mut rng));
    model.classifier.mapv_inplace(|_| normal.sample(&mut rng));

    let mut history = Vec::with_capacity(config.epochs + 1);
    for _ in 0..config.epochs {
        let mut g_map = Array2::<f64>::zeros((xi, N_CLASSES));
        let mut g_map_bias = Array1::<f64>::zeros(xi);
        let mut g_cls = Array2::<f64>::zeros((N_CLASSES, xi));
        let mut g_cls_bias = Array1::<f64>::zeros(N_CLASSES);
        let mut loss = 0.0;
        for ((e, leaf), y) in embeddings.rows().into_iter().zip(leaves).zip(labels) {
            let h = model.fused(e, leaf);
            let z = model.classifier.dot(&h) + &model.class_bias;
            let lse = log_sum_exp(z.as_slice().expect("contiguous"));
            loss += lse - z[y.index()];
            let mut dz = z.mapv(|v| (v - lse).exp());
            dz[y.index()] -= 1.0;
            let dh = model.classifier.t().dot(&dz) / 2.0;
            let leaf = ArrayView1::from(leaf.probs());
            for r in 0..N_CLASSES {
                for c in 0..xi {
                    g_cls[[r, c]] += dz[r] * h[c];
                }
            }
            g_cls_bias += &dz;
            for r in 0..xi {
                for c in 0..N_CLASSES {
                    g_map[[r, c]] += dh[r] * leaf[c];
                }
            }
            g_map_bias += &dh;
        }
        history.push(loss / n);
        let step = config.learning_rate / n;
        model.map.scaled_add(-step, &g_map);
        model.map_bias.scaled_add(-step, &g_map_bias);
        model.classifier.scaled_add(-step, &g_cls);
        model.class_bias.scaled_add(-step, &g_cls_bias);
    }
    history.push(cross_entropy(&model, embeddings, leaves, labels)?);
    Ok((model, history))
}

/// Per-feature model outputs and the transition matrices of the features to
/// smooth. Distributions are indexed by network segment and range over the
/// feature's codes.
#[derive(Debug, Clone, Default)]
pub struct FeatureInputs {
    pub predictions: BTreeMap<Feature, Vec<CategoricalDistribution>>,
    pub transitions: BTreeMap<Feature, TransitionMatrix>,
    pub max_iters: usize,
}

/// Feature records seen by the tree: ground truth for the scenario's
/// available features (when the segment has it), otherwise the smoothed or
/// raw argmax of the feature predictions, otherwise missing.
pub fn resolve_features(net: &RoadNetwork, scenario: Scenario, inputs: &FeatureInputs) -> Result<Vec<FeatureRecord>, PipelineError> {
    let n = net.len();
    let mut out: Vec<FeatureRecord> = vec![FeatureRecord::default(); n];
    for feature in Feature::ALL {
        let predicted: Option<Vec<u8>> = match inputs.predictions.get(&feature) {
            None => None,
            Some(dists) => {
                shape(&format!("{feature} predictions"), n, dists.len())?;
                if let Some(d) = dists.iter().find(|d| d.len() != feature.cardinality()) {
                    shape(&format!("{feature} distribution"), feature.cardinality(), d.len())?;
                }
                let mut idx: Vec<usize> = dists.iter().map(CategoricalDistribution::argmax).collect();
                if let Some(t) = inputs.transitions.get(&feature) {
                    let outcome = adapt(net, &idx, t, dists, inputs.max_iters.max(1))
                        .map_err(|source| PipelineError::Smoothing { feature, source })?;
                    if !outcome.converged {
                        log::warn!("{feature}: smoothing stopped without a fixed point after {} sweeps", outcome.iterations);
                    }
                    idx = outcome.labels;
                }
                Some(idx.into_iter().map(|i| i as u8 + 1).collect())
            }
        };
        for (i, rec) in out.iter_mut().enumerate() {
            let truth = net.segment(i).features.code(feature).filter(|_| scenario.available(feature));
            let code = truth.or_else(|| predicted.as_ref().map(|p| p[i]));
            rec.set_code(feature, code)?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoLtsOutput {
    pub features: Vec<FeatureRecord>,
    pub leaves: Vec<CategoricalDistribution>,
    pub probs: Vec<CategoricalDistribution>,
    pub labels: Vec<LtsLabel>,
}

pub fn run_autolts(
    net: &RoadNetwork,
    scenario: Scenario,
    inputs: &FeatureInputs,
    embeddings: ArrayView2<f64>,
    tree: &DecisionTree,
    fusion: &FusionModel,
) -> Result<AutoLtsOutput, PipelineError> {
    fusion.validate()?;
    shape("embedding rows", net.len(), embeddings.nrows())?;
    shape("embedding columns", fusion.xi, embeddings.ncols())?;
    let features = resolve_features(net, scenario, inputs)?;
    let leaves: Vec<CategoricalDistribution> = features.par_iter().map(|r| tree.leaf_distribution(r)).collect();
    let probs = (0..net.len())
        .into_par_iter()
        .map(|i| fuse_predict(fusion, embeddings.row(i), &leaves[i]))
        .collect::<Result<Vec<_>, _>>()?;
    let labels = probs
        .iter()
        .map(|p| LtsLabel::from_index(p.argmax()).expect("four classes"))
        .collect();
    Ok(AutoLtsOutput {
        features,
        leaves,
        probs,
        labels,
    })
}
