//! Seeded synthetic networks, labels, noisy model outputs and embeddings.
//!
//! Labels are drawn by a breadth-first sweep over the segment graph: each
//! component's root is drawn from the root distribution and every newly
//! reached segment draws its label from the transition row of the segment it
//! was reached from. When labels are LTS levels, each segment also receives a
//! discretized feature combination whose rule-based LTS equals its label.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contrastive::Sample;
use crate::features::{full_grid, Feature, FeatureRecord};
use crate::io::{self, TableError};
use crate::lts::{compute_lts, LtsLabel};
use crate::network::{split, write_network_csv, NetworkError, RoadNetwork, SegmentRecord, SplitAssignment, SplitMode, SplitRole};
use crate::smoothing::{CategoricalDistribution, TransitionMatrix};

/// LTS shares of the Toronto dataset, LTS1 through LTS4, as published
/// (they total 1.001 and are normalized before sampling).
pub const TORONTO_MARGINALS: [f64; 4] = [0.490, 0.345, 0.069, 0.097];

/// Label persistence used with the Toronto marginals; weak enough that the
/// realized shares stay close to the root distribution.
pub const TORONTO_PERSISTENCE: f64 = 0.1;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Topology {
    Chain,
    Grid,
    /// Random spanning tree plus extra edges over a lattice with diagonals;
    /// `avg_degree` is the target mean node degree (2 to 5.5).
    Random { avg_degree: f64 },
}

impl FromStr for Topology {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "chain" => Ok(Topology::Chain),
            "grid" => Ok(Topology::Grid),
            "random" => Ok(Topology::Random { avg_degree: 3.0 }),
            _ => Err(GenError::Config(format!("unknown topology {s:?}"))),
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Topology::Chain => f.write_str("chain"),
            Topology::Grid => f.write_str("grid"),
            Topology::Random { avg_degree } => write!(f, "random(avg_degree={avg_degree})"),
        }
    }
}

/// `rho * I + (1 - rho) * 1 pi^T`: keep the parent's label with probability
/// `rho`, otherwise redraw from `pi`. `pi` is stationary for this kernel.
pub fn sticky_kernel(pi: &[f64], rho: f64) -> Result<TransitionMatrix, GenError> {
    let pi = CategoricalDistribution::from_weights(pi).map_err(|e| GenError::Config(e.to_string()))?;
    let pi = pi.probs();
    if !(0.0..=1.0).contains(&rho) {
        return Err(GenError::Config(format!("kernel persistence {rho} outside [0, 1]")));
    }
    let rows = (0..pi.len())
        .map(|a| {
            pi.iter()
                .enumerate()
                .map(|(b, &p)| (1.0 - rho) * p + if a == b { rho } else { 0.0 })
                .collect()
        })
        .collect();
    TransitionMatrix::from_rows(rows).map_err(|e| GenError::Config(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub topology: Topology,
    /// Number of segments.
    pub n: usize,
    /// Label kernel. Defaults to `sticky_kernel(root, kernel_persistence)`.
    pub kernel: Option<TransitionMatrix>,
    /// Distribution of component roots. Defaults to uniform over the kernel's labels.
    pub root_distribution: Option<Vec<f64>>,
    pub kernel_persistence: f64,
    /// Corruption level of model outputs, for LTS and for every feature.
    pub noise: f64,
    /// Flip labels at rate `noise` before smearing.
    pub flips: bool,
    /// Probability that a segment copies the features of the same-label
    /// segment it was reached from.
    pub feature_persistence: f64,
    pub embed_dim: usize,
    pub embed_separation: f64,
    pub embed_noise: f64,
    pub regions: usize,
    pub split_fractions: [f64; 3],
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            topology: Topology::Random { avg_degree: 3.0 },
            n: 1000,
            kernel: None,
            root_distribution: None,
            kernel_persistence: 0.3,
            noise: 0.3,
            flips: true,
            feature_persistence: 0.8,
            embed_dim: 8,
            embed_separation: 1.5,
            embed_noise: 1.0,
            regions: 4,
            split_fractions: [0.6, 0.2, 0.2],
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn toronto(n: usize, seed: u64) -> Self {
        GenConfig {
            n,
            seed,
            root_distribution: Some(TORONTO_MARGINALS.to_vec()),
            kernel_persistence: TORONTO_PERSISTENCE,
            ..GenConfig::default()
        }
    }

    fn resolve_kernel(&self) -> Result<(TransitionMatrix, Vec<f64>), GenError> {
        let k = self.kernel.as_ref().map_or(4, TransitionMatrix::k);
        let root = match &self.root_distribution {
            Some(p) => CategoricalDistribution::from_weights(p)
                .map_err(|e| GenError::Config(format!("root distribution: {e}")))?
                .probs()
                .to_vec(),
            None => vec![1.0 / k as f64; k],
        };
        if root.len() != k {
            return Err(GenError::Config(format!("root distribution has {} classes, kernel has {k}", root.len())));
        }
        let kernel = match &self.kernel {
            Some(t) => t.clone(),
            None => sticky_kernel(&root, self.kernel_persistence)?,
        };
        Ok((kernel, root))
    }

    fn validate(&self) -> Result<(), GenError> {
        if self.n == 0 {
            return Err(GenError::Config("n must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.noise) || !(0.0..=1.0).contains(&self.feature_persistence) {
            return Err(GenError::Config("noise and feature_persistence must lie in [0, 1]".into()));
        }
        if self.embed_dim == 0 || self.regions == 0 {
            return Err(GenError::Config("embed_dim and regions must be positive".into()));
        }
        if !(self.embed_noise >= 0.0) || !self.embed_separation.is_finite() {
            return Err(GenError::Config("embedding scales must be finite and non-negative".into()));
        }
        Ok(())
    }
}

fn node(i: usize) -> String {
    format!("n{i}")
}

fn lattice_width(nodes: usize) -> usize {
    (nodes as f64).sqrt().ceil().max(1.0) as usize
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Right, down and down-right neighbours on a row-major lattice of `m` nodes.
fn lattice_candidates(m: usize) -> Vec<(usize, usize)> {
    let w = lattice_width(m);
    let mut out = Vec::new();
    for v in 0..m {
        let c = v % w;
        if c + 1 < w && v + 1 < m {
            out.push((v, v + 1));
        }
        if v + w < m {
            out.push((v, v + w));
        }
        if c + 1 < w && v + w + 1 < m {
            out.push((v, v + w + 1));
        }
    }
    out
}

/// Endpoint pairs of the generated topology, in a spatially coherent order.
pub fn topology_edges(topology: Topology, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<(usize, usize)>, GenError> {
    match topology {
        Topology::Chain => Ok((0..n).map(|i| (i, i + 1)).collect()),
        Topology::Grid => {
            let w = ((n as f64 / 2.0).sqrt().ceil() as usize) + 1;
            let mut edges = Vec::with_capacity(n);
            'outer: for r in 0..w {
                for c in 0..w {
                    let v = r * w + c;
                    for (ok, u) in [(c + 1 < w, v + 1), (r + 1 < w, v + w)] {
                        if ok {
                            edges.push((v, u));
                            if edges.len() == n {
                                break 'outer;
                            }
                        }
                    }
                }
            }
            Ok(edges)
        }
        Topology::Random { avg_degree } => {
            if !(2.0..=5.5).contains(&avg_degree) {
                return Err(GenError::Config(format!("avg_degree {avg_degree} outside [2, 5.5]")));
            }
            let mut m = ((2.0 * n as f64 / avg_degree).round() as usize).clamp(2, n + 1);
            let mut candidates = lattice_candidates(m);
            while candidates.len() < n && m <= n {
                m += 1;
                candidates = lattice_candidates(m);
            }
            candidates.shuffle(rng);
            let mut parent: Vec<usize> = (0..m).collect();
            let (mut tree, mut rest) = (Vec::new(), Vec::new());
            for (a, b) in candidates {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra] = rb;
                    tree.push((a, b));
                } else {
                    rest.push((a, b));
                }
            }
            tree.extend(rest);
            tree.truncate(n);
            tree.sort_unstable();
            Ok(tree)
        }
    }
}

/// Builds a network with segment ids `s000..`, node ids `n0..` and `regions`
/// contiguous blocks of segments tagged `r0..`.
pub fn build_network(topology: Topology, n: usize, regions: usize, rng: &mut ChaCha8Rng) -> Result<RoadNetwork, GenError> {
    let edges = topology_edges(topology, n, rng)?;
    let width = n.to_string().len();
    let segments = edges
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            let mut s = SegmentRecord::new(format!("s{i:0width$}"), node(a), node(b));
            s.region = Some(format!("r{}", i * regions / n));
            s
        })
        .collect();
    Ok(RoadNetwork::from_segments(segments)?)
}

/// Breadth-first label sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSweep {
    pub labels: Vec<usize>,
    /// Segment each label was conditioned on; `None` for component roots.
    pub parent: Vec<Option<usize>>,
    /// Visit order.
    pub order: Vec<usize>,
}

pub fn markov_labels(net: &RoadNetwork, kernel: &TransitionMatrix, root: &[f64], rng: &mut ChaCha8Rng) -> MarkovSweep {
    let n = net.len();
    let root_dist = WeightedIndex::new(root).expect("validated root distribution");
    let rows: Vec<_> = (0..kernel.k())
        .map(|a| WeightedIndex::new(kernel.row(a)).expect("stochastic kernel row"))
        .collect();
    let mut starts: Vec<usize> = (0..n).collect();
    starts.shuffle(rng);
    let mut labels = vec![usize::MAX; n];
    let mut parent = vec![None; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    for s in starts {
        if labels[s] != usize::MAX {
            continue;
        }
        labels[s] = root_dist.sample(rng);
        queue.push_back(s);
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for &j in net.neighbors(i) {
                if labels[j] == usize::MAX {
                    labels[j] = rows[labels[i]].sample(rng);
                    parent[j] = Some(i);
                    queue.push_back(j);
                }
            }
        }
    }
    MarkovSweep { labels, parent, order }
}

/// Assigns each segment a grid feature combination whose LTS is its label
/// (zero-based). A segment whose parent shares its label copies the parent's
/// combination with probability `persistence`.
pub fn lts_consistent_features(sweep: &MarkovSweep, persistence: f64, rng: &mut ChaCha8Rng) -> Vec<FeatureRecord> {
    let mut pools: [Vec<FeatureRecord>; 4] = Default::default();
    for rec in full_grid() {
        let y = compute_lts(&rec).expect("grid records are complete");
        pools[y.index()].push(rec);
    }
    let mut out = vec![FeatureRecord::default(); sweep.labels.len()];
    for &i in &sweep.order {
        let y = sweep.labels[i];
        let inherit = match sweep.parent[i] {
            Some(p) if sweep.labels[p] == y => rng.random::<f64>() < persistence,
            _ => false,
        };
        out[i] = if inherit {
            out[sweep.parent[i].expect("checked above")]
        } else {
            *pools[y].choose(rng).expect("every level is reachable")
        };
    }
    out
}

/// Model outputs for known labels: with `flips`, each label is first replaced
/// by a uniformly chosen different label with probability `eta`; the result
/// is then smeared to `(1 - eta) * one_hot + eta * uniform`. For `eta < 1`
/// the argmax recovers the possibly flipped label, so argmax accuracy is
/// `1 - eta` in expectation with flips and 1 without.
pub fn corrupt(labels: &[usize], k: usize, eta: f64, flips: bool, rng: &mut ChaCha8Rng) -> Result<Vec<CategoricalDistribution>, GenError> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(GenError::Config(format!("noise {eta} outside [0, 1]")));
    }
    if k < 2 || labels.iter().any(|&l| l >= k) {
        return Err(GenError::Config(format!("labels must lie in 0..{k} with k >= 2")));
    }
    Ok(labels
        .iter()
        .map(|&l| {
            let mut shown = l;
            if flips && rng.random::<f64>() < eta {
                let other = rng.random_range(0..k - 1);
                shown = if other >= l { other + 1 } else { other };
            }
            let p = (0..k)
                .map(|c| eta / k as f64 + if c == shown { 1.0 - eta } else { 0.0 })
                .collect();
            CategoricalDistribution::new(p).expect("convex mixture of distributions")
        })
        .collect())
}

/// Class centers drawn from `N(0, separation^2 I)`, then one
/// `N(0, noise^2 I)` perturbation per sample.
pub fn class_embeddings(labels: &[usize], k: usize, dim: usize, separation: f64, noise: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let centers = Array2::from_shape_fn((k, dim), |_| separation * rng.sample::<f64, _>(StandardNormal));
    let mut out = Array2::zeros((labels.len(), dim));
    for (i, &y) in labels.iter().enumerate() {
        for d in 0..dim {
            out[[i, d]] = centers[[y, d]] + noise * rng.sample::<f64, _>(StandardNormal);
        }
    }
    out
}

/// Balanced ordinal training set: `per_class` samples of each of `k` labels
/// (1-based `y`) around random class centers.
pub fn ordinal_samples(k: usize, per_class: usize, dim: usize, separation: f64, noise: f64, rng: &mut ChaCha8Rng) -> Vec<Sample> {
    let labels: Vec<usize> = (0..k).flat_map(|c| std::iter::repeat_n(c, per_class)).collect();
    let x = class_embeddings(&labels, k, dim, separation, noise, rng);
    labels
        .iter()
        .zip(x.rows())
        .map(|(&y, row)| Sample {
            x: row.to_vec(),
            y: (y + 1) as u8,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    /// Segments carry region tags, and for four-level labels also features
    /// and their LTS.
    pub network: RoadNetwork,
    /// Zero-based labels.
    pub labels: Vec<usize>,
    pub kernel: TransitionMatrix,
    pub model: Vec<CategoricalDistribution>,
    /// Noisy per-feature outputs over feature codes (empty unless labels are LTS).
    pub feature_models: BTreeMap<Feature, Vec<CategoricalDistribution>>,
    pub embeddings: Array2<f64>,
    pub split: SplitAssignment,
}

pub fn generate(config: &GenConfig) -> Result<Synthetic, GenError> {
    config.validate()?;
    let (kernel, root) = config.resolve_kernel()?;
    let k = kernel.k();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let net = build_network(config.topology, config.n, config.regions, &mut rng)?;
    let sweep = markov_labels(&net, &kernel, &root, &mut rng);

    let mut segments = net.segments().to_vec();
    let mut feature_models = BTreeMap::new();
    if k == 4 {
        let features = lts_consistent_features(&sweep, config.feature_persistence, &mut rng);
        for (seg, (f, &y)) in segments.iter_mut().zip(features.iter().zip(&sweep.labels)) {
            seg.features = *f;
            seg.lts = Some(LtsLabel::from_index(y).expect("four levels"));
        }
        for feature in Feature::ALL {
            let codes: Vec<usize> = features
                .iter()
                .map(|f| f.code(feature).expect("grid records are complete") as usize - 1)
                .collect();
            feature_models.insert(feature, corrupt(&codes, feature.cardinality(), config.noise, config.flips, &mut rng)?);
        }
    }
    let network = RoadNetwork::from_segments(segments)?;
    let model = corrupt(&sweep.labels, k, config.noise, config.flips, &mut rng)?;
    let embeddings = class_embeddings(&sweep.labels, k, config.embed_dim, config.embed_separation, config.embed_noise, &mut rng);
    let split_seed = rng.random::<u64>();
    let split = split(
        &network,
        &SplitMode::Random {
            fractions: config.split_fractions,
            seed: split_seed,
        },
    )?;
    Ok(Synthetic {
        network,
        labels: sweep.labels,
        kernel,
        model,
        feature_models,
        embeddings,
        split,
    })
}

impl Synthetic {
    pub fn ids(&self) -> Vec<String> {
        self.network.ids().map(str::to_string).collect()
    }

    /// Writes the generated data set as the tables read by the other
    /// subcommands:
    ///
    /// | file | contents |
    /// |---|---|
    /// | `network.csv` | segments with features, LTS and region |
    /// | `truth.csv` | `segment_id,lts` |
    /// | `predictions.csv` | noisy LTS model outputs |
    /// | `feature_preds/<feature>.csv` | noisy per-feature outputs |
    /// | `feature_labels/<feature>.csv` | true feature codes of training segments |
    /// | `embeddings.csv` | synthetic segment embeddings |
    /// | `samples.csv`, `samples_train.csv` | embeddings with labels, all and training only |
    /// | `split.csv` | `segment_id,role` |
    /// | `kernel.csv` | label transition matrix |
    pub fn write_dir(&self, dir: &Path) -> Result<(), GenError> {
        fs::create_dir_all(dir)?;
        let create = |name: &str| -> Result<BufWriter<File>, GenError> { Ok(BufWriter::new(File::create(dir.join(name))?)) };
        let ids = self.ids();
        let one_based: Vec<u32> = self.labels.iter().map(|&l| l as u32 + 1).collect();
        let train: Vec<usize> = (0..ids.len())
            .filter(|&i| self.split.role(&ids[i]) == Some(SplitRole::Train))
            .collect();

        write_network_csv(&self.network, create("network.csv")?)?;
        io::write_labels(create("truth.csv")?, "lts", &ids, &one_based)?;
        io::write_distributions(create("predictions.csv")?, &ids, &self.model)?;
        io::write_matrix(create("embeddings.csv")?, "segment_id", "e_", &ids, &self.embeddings)?;
        let samples: Vec<Sample> = self
            .embeddings
            .rows()
            .into_iter()
            .zip(&one_based)
            .map(|(row, &y)| Sample { x: row.to_vec(), y: y as u8 })
            .collect();
        io::write_samples(create("samples.csv")?, &ids, &samples)?;
        let train_ids: Vec<String> = train.iter().map(|&i| ids[i].clone()).collect();
        let train_samples: Vec<Sample> = train.iter().map(|&i| samples[i].clone()).collect();
        io::write_samples(create("samples_train.csv")?, &train_ids, &train_samples)?;
        self.split.write_csv(create("split.csv")?)?;
        self.kernel.write_csv(create("kernel.csv")?)?;

        if !self.feature_models.is_empty() {
            fs::create_dir_all(dir.join("feature_preds"))?;
            fs::create_dir_all(dir.join("feature_labels"))?;
            for (feature, dists) in &self.feature_models {
                let file = format!("{}.csv", feature.name());
                io::write_distributions(create(&format!("feature_preds/{file}"))?, &ids, dists)?;
                let codes: Vec<u32> = train
                    .iter()
                    .map(|&i| self.network.segment(i).features.code(*feature).expect("complete") as u32)
                    .collect();
                io::write_labels(create(&format!("feature_labels/{file}"))?, "label", &train_ids, &codes)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn topologies_are_valid_networks() {
        for topo in [Topology::Chain, Topology::Grid, Topology::Random { avg_degree: 3.0 }, Topology::Random { avg_degree: 5.0 }] {
            for n in [1, 2, 7, 100, 1000] {
                let net = build_network(topo, n, 3, &mut rng(n as u64)).unwrap();
                assert_eq!(net.len(), n, "{topo} n={n}");
                net.validate().unwrap();
            }
        }
    }

    #[test]
    fn random_topology_is_connected_with_target_degree() {
        let net = build_network(Topology::Random { avg_degree: 3.0 }, 2000, 1, &mut rng(3)).unwrap();
        let degree = 2.0 * net.len() as f64 / net.nodes().len() as f64;
        assert!((degree - 3.0).abs() < 0.05, "{degree}");
        let mut seen = vec![false; net.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in net.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn identity_kernel_on_chain_gives_one_label() {
        let net = build_network(Topology::Chain, 50, 1, &mut rng(0)).unwrap();
        let t = TransitionMatrix::from_rows((0..4).map(|a| (0..4).map(|b| f64::from(u8::from(a == b))).collect()).collect()).unwrap();
        let sweep = markov_labels(&net, &t, &[0.25; 4], &mut rng(1));
        assert!(sweep.labels.iter().all(|&l| l == sweep.labels[0]));
        assert_eq!(sweep.parent.iter().filter(|p| p.is_none()).count(), 1);
    }

    #[test]
    fn corrupt_edge_cases() {
        let labels = vec![0, 1, 2, 3, 2];
        for d in corrupt(&labels, 4, 0.0, true, &mut rng(0)).unwrap().iter().zip(&labels) {
            assert_eq!(d.0.probs(), CategoricalDistribution::one_hot(4, *d.1).probs());
        }
        for d in corrupt(&labels, 4, 1.0, true, &mut rng(0)).unwrap() {
            assert_eq!(d.probs(), &[0.25; 4]);
        }
        assert!(corrupt(&labels, 4, 1.5, true, &mut rng(0)).is_err());
        assert!(corrupt(&[4], 4, 0.1, true, &mut rng(0)).is_err());
    }

    #[test]
    fn corrupt_accuracy_matches_closed_form() {
        let n = 10_000;
        let labels: Vec<usize> = (0..n).map(|i| i % 4).collect();
        let eta = 0.3;
        let d = corrupt(&labels, 4, eta, true, &mut rng(5)).unwrap();
        let acc = d.iter().zip(&labels).filter(|(d, l)| d.argmax() == **l).count() as f64 / n as f64;
        // Binomial standard error at n = 10,000 is about 0.0046.
        assert!((acc - (1.0 - eta)).abs() < 0.02, "{acc}");
        let smeared = corrupt(&labels, 4, eta, false, &mut rng(5)).unwrap();
        assert!(smeared.iter().zip(&labels).all(|(d, l)| d.argmax() == *l));
    }

    #[test]
    fn sticky_kernel_keeps_marginals_stationary() {
        let t = sticky_kernel(&TORONTO_MARGINALS, 0.3).unwrap();
        let total: f64 = TORONTO_MARGINALS.iter().sum();
        let pi: Vec<f64> = TORONTO_MARGINALS.iter().map(|p| p / total).collect();
        for b in 0..4 {
            let next: f64 = (0..4).map(|a| pi[a] * t.prob(a, b)).sum();
            assert!((next - pi[b]).abs() < 1e-12);
        }
    }

    #[test]
    fn features_agree_with_labels() {
        let synth = generate(&GenConfig {
            n: 500,
            ..GenConfig::default()
        })
        .unwrap();
        for (seg, &y) in synth.network.segments().iter().zip(&synth.labels) {
            assert_eq!(compute_lts(&seg.features).unwrap().index(), y);
            assert_eq!(seg.lts.unwrap().index(), y);
        }
        assert_eq!(synth.feature_models.len(), 7);
        assert_eq!(synth.embeddings.shape(), &[500, 8]);
    }

    #[test]
    fn zero_noise_models_are_exact() {
        let synth = generate(&GenConfig {
            n: 300,
            noise: 0.0,
            ..GenConfig::default()
        })
        .unwrap();
        assert!(synth.model.iter().zip(&synth.labels).all(|(d, &l)| d.argmax() == l));
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenConfig::toronto(400, 9);
        let (a, b) = (generate(&cfg).unwrap(), generate(&cfg).unwrap());
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.model, b.model);
        assert_eq!(a.embeddings, b.embeddings);
        assert_eq!(a.split, b.split);
        let c = generate(&GenConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.labels, c.labels);
    }

    #[test]
    fn non_lts_kernel_skips_features() {
        let t = sticky_kernel(&[0.5, 0.5], 0.5).unwrap();
        let synth = generate(&GenConfig {
            n: 50,
            kernel: Some(t),
            ..GenConfig::default()
        })
        .unwrap();
        assert!(synth.feature_models.is_empty());
        assert!(synth.network.segments().iter().all(|s| s.lts.is_none()));
        assert!(synth.labels.iter().all(|&l| l < 2));
    }

    #[test]
    fn write_dir_produces_tables() {
        let synth = generate(&GenConfig {
            n: 60,
            ..GenConfig::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        synth.write_dir(dir.path()).unwrap();
        for f in ["network.csv", "truth.csv", "predictions.csv", "embeddings.csv", "samples.csv", "samples_train.csv", "split.csv", "kernel.csv", "feature_preds/speed.csv", "feature_labels/infra.csv"] {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        let back = crate::network::load_network(&dir.path().join("network.csv"), crate::network::FileFormat::Csv).unwrap();
        for (a, b) in back.segments().iter().zip(synth.network.segments()) {
            assert_eq!((a.features, a.lts), (b.features, b.lts));
        }
    }
}
