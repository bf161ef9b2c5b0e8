//! Fisher information embeddings (FIE) for multisets and graph nodes.
//!
//! A multiset of vectors is mapped to the Fisher-scaled displacement between
//! a Gaussian-mixture estimate of its distribution and a fixed anchor
//! mixture. Stacking this map over graph neighborhoods yields unsupervised
//! node embeddings whose concatenation across layers realizes a multilayer
//! node kernel.

pub mod anchors;
pub mod error;
pub mod eval;
pub mod fie;
pub mod formats;
pub mod gmm;
pub mod graph;
pub mod matrix;
pub mod rng;
pub mod sim;

pub use error::{FieError, Result};
pub use fie::{
    e_step, e_step_balanced_ot, e_step_softmax, e_step_unbalanced_ot, em_estimate, fie_embed,
    fie_embed_distribution, m_step, AnchorSet, AssignmentMatrix, EstepConfig, EstepVariant,
    MultisetEstimate,
};
pub use gmm::{kl_matching_approx, kl_monte_carlo, log_component_density, sample_mixture, MixtureSpec, SampleSet};
pub use matrix::DenseMatrix;
pub use graph::{
    embed_graph, embed_layer, neighborhood_multiset, FieLayer, FieModel, LayerConfig, NodeEmbeddings, Nonlinearity,
    SparseGraph,
};
pub use anchors::{fit_model, kmeans_fit, FitOutcome, KMeansConfig, KMeansFit};
pub use eval::{evaluate, train_logreg, LabeledSplit, LogRegConfig, LogRegModel, Metrics, StepRule};
pub use sim::{run_simulation, Scenario, SimConfig, SimRecord};
