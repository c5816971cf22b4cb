//! Multi-threaded versions of the pipeline stages. Work is split into
//! independent units whose results are combined in a fixed order, so the
//! output does not depend on the number of threads.

use rayon::prelude::*;

use cesc_core::ctembed::{EmbeddingConfig, EmbeddingProblem, SolverReport};
use cesc_core::dense::DenseMatrix;
use cesc_core::exactspec::spectral_embedding;
use cesc_core::kmeans::{best_of, kmeans_replication};
use cesc_core::knn::KnnIndex;
use cesc_core::simgraph::{graph_from_neighbor_lists, neighbor_count_for};
use cesc_core::{
    Bandwidth, ClusterAssignment, Embedding, FeatureMatrix, GraphMode, KMeansConfig, Result, SimilarityGraph,
    SpectralVariant,
};

/// Thread pool with `threads` workers, or one per core when `threads` is 0.
pub fn thread_pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool")
}

pub fn max_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn build_graph(x: &FeatureMatrix, mode: GraphMode, bandwidth: Bandwidth) -> Result<SimilarityGraph> {
    let k = neighbor_count_for(mode, bandwidth, x.n());
    let lists = if k > 0 && k < x.n() {
        let index = KnnIndex::new(x.values());
        (0..x.n()).into_par_iter().map(|i| index.neighbors_of(i, k)).collect()
    } else {
        Vec::new()
    };
    graph_from_neighbor_lists(x, mode, bandwidth, &lists)
}

/// Approximate commute-time embedding with the Laplacian solves spread over
/// the pool.
pub fn build_embedding(g: &SimilarityGraph, cfg: &EmbeddingConfig) -> Result<(Embedding, SolverReport)> {
    let problem = EmbeddingProblem::new(g, cfg)?;
    let rows = (0..problem.rows()).into_par_iter().map(|r| problem.solve_row(r)).collect::<Result<Vec<_>>>()?;
    problem.assemble(rows)
}

/// k-means with one task per replication.
pub fn kmeans(points: &DenseMatrix, cfg: &KMeansConfig) -> Result<ClusterAssignment> {
    cfg.validate(points.rows())?;
    let runs =
        (0..cfg.replications).into_par_iter().map(|rep| kmeans_replication(points, cfg, rep)).collect::<Result<Vec<_>>>()?;
    Ok(best_of(runs))
}

pub fn spectral_cluster_exact(
    g: &SimilarityGraph,
    k: usize,
    variant: SpectralVariant,
    cfg: &KMeansConfig,
) -> Result<ClusterAssignment> {
    let u = spectral_embedding(g, k, variant)?;
    kmeans(&u, &KMeansConfig { k, ..*cfg })
}
