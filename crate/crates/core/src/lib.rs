//! Cycling level-of-traffic-stress (LTS) assessment over road-network graphs.
//!
//! The crate covers the whole desk-scale workflow:
//!
//! * [`network`]: segment files, shared-endpoint adjacency and data splits;
//! * [`features`] and [`lts`]: road-feature discretization and the rule-based
//!   LTS decision list;
//! * [`smoothing`]: transition estimation and iterative spatial smoothing of
//!   per-segment categorical predictions;
//! * [`contrastive`]: ordinal, supervised and self-supervised contrastive
//!   losses with a momentum encoder and key queue;
//! * [`cart`]: a small CART classifier with grid search and leaf distributions;
//! * [`pipeline`]: the two-step predictor fusing leaf distributions with
//!   segment embeddings;
//! * [`metrics`]: Acc, HLA and AFR;
//! * [`synthgen`]: seeded synthetic networks and predictions.

pub mod cart;
pub mod contrastive;
pub mod features;
pub mod io;
pub mod lts;
pub mod metrics;
pub mod network;
pub mod pipeline;
pub mod smoothing;
pub mod synthgen;

pub use features::{Feature, FeatureRecord, RawFeatures};
pub use lts::{compute_lts, stress_class, LtsLabel, StressClass};
pub use network::{RoadNetwork, SegmentRecord, SplitAssignment, SplitRole};
pub use smoothing::{CategoricalDistribution, TransitionMatrix};
