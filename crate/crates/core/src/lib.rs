//! Commute-time embedding and spectral clustering without eigendecomposition.
//!
//! Builds a similarity graph, embeds its nodes so that squared Euclidean
//! distances approximate commute times, then clusters the embedding with
//! k-means. An exact eigendecomposition-based stack is kept alongside as a
//! reference.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod ctembed;
pub mod dataset;
pub mod dense;
pub mod eigen;
pub mod error;
pub mod eval;
pub mod exactspec;
pub mod kmeans;
pub mod knn;
pub mod multigrid;
pub mod simgraph;
pub mod sparse;

pub use ctembed::{
    build_embedding, laplacian_solve, Embedding, EmbeddingConfig, EmbeddingKind, LaplacianSolver, Preconditioner,
    ProjectionMatrix, SolverReport,
};
pub use dataset::{standardize, synth_shapes, EdgeList, EdgeListBuilder, FeatureMatrix, ShapeKind};
pub use dense::DenseMatrix;
pub use error::{Error, Result};
pub use eval::hungarian_accuracy;
pub use exactspec::{commute_pinv, exact_commute_embedding, hitting_times, spectral_cluster_exact, SpectralVariant};
pub use kmeans::{kmeans_cluster, ClusterAssignment, Init, KMeansConfig};
pub use simgraph::{build_graph, edge_graph, largest_component, Bandwidth, GraphMode, SimilarityGraph};
pub use sparse::SparseMatrix;
