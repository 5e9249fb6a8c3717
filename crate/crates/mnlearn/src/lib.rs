//! Learning multinomial logit (MNL) choice models from a MaxSample oracle.
//!
//! The pipeline has three stages: an ordered clustering of the items
//! ([`ordering`]), an estimation forest over the clusters ([`forest`]), and
//! weight extraction from the forest ([`weights`]). Two pipelines are
//! provided: an adaptive one that minimises the total number of queries and a
//! pair-balanced one that bounds the number of queries made to any single
//! pair, which also makes it usable non-adaptively through a replay table.
//!
//! All weights are natural logarithms. Oracles answer pair queries in
//! aggregate (see [`oracle::Oracle`]) so that the large query budgets the
//! guarantees require can be simulated exactly in distribution.

pub mod cli;
pub mod error;
pub mod forest;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod ordering;
pub mod primitives;
pub mod weights;

pub use error::{Error, Result};
pub use forest::{
    build_balanced_estimation_forest, build_estimation_forest, validate_forest, EstimationForest,
};
pub use metrics::{distance_exact, distance_sampled, DistanceReport};
pub use model::{generate_instance, InstanceKind, InstanceSpec, LogWeightMnl, MatchingPseudoMnl, Model};
pub use oracle::{LiveOracle, Oracle, QueryLedger, ReplayOracle, ReplayTable, StreamKey};
pub use ordering::{cluster_sort, epsilon_ordering, quicksort_clustering, ClusterGraph, Ordering};
pub use primitives::RatioEstimate;
pub use weights::{generate_weights, learn_adaptive, learn_balanced, learn_nonadaptive, Learned};
