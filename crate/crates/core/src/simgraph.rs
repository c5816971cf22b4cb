//! Similarity graphs and their Laplacian family: `L = D - A`, the two
//! normalised forms, the signed incidence factorisation `L = B' W B`, and
//! largest-component extraction.

use alloc::collections::VecDeque;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{Edge, EdgeList, FeatureMatrix};
use crate::dense::sq_dist;
use crate::error::{Error, Result};
use crate::knn::{KnnIndex, Neighbor};
use crate::sparse::SparseMatrix;

/// Kernel weights below this are clamped rather than dropped.
pub const MIN_WEIGHT: f64 = 1e-300;

/// Neighbour count used by the median bandwidth heuristic when the graph is
/// not itself a kNN graph.
pub const DEFAULT_HEURISTIC_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphMode {
    /// Union-rule k-nearest-neighbour graph.
    Knn(usize),
    /// Connect pairs closer than epsilon.
    Epsilon(f64),
    /// Fully connected.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    /// Median over all points of the distance to the k1-th nearest neighbour.
    Median,
}

/// How a graph was built, with the bandwidth resolved to a number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphMeta {
    pub mode: GraphMode,
    pub sigma: f64,
}

/// Weighted undirected graph with cached degrees and volume.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    adjacency: SparseMatrix,
    degrees: Vec<f64>,
    volume: f64,
    meta: Option<GraphMeta>,
}

impl SimilarityGraph {
    /// Wraps a symmetric, non-negative adjacency matrix with an empty
    /// diagonal.
    pub fn from_adjacency(adjacency: SparseMatrix, meta: Option<GraphMeta>) -> Result<Self> {
        let n = adjacency.rows();
        if adjacency.cols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: adjacency.cols() });
        }
        for (i, j, w) in adjacency.triplets() {
            if i == j {
                return Err(Error::SelfLoop { index: i, node: i as u64 });
            }
            if !(w > 0.0) {
                return Err(Error::InvalidWeight { index: i, weight: w });
            }
        }
        if !adjacency.is_symmetric() {
            return Err(Error::InvalidParameter("adjacency matrix is not symmetric".to_string()));
        }
        let degrees: Vec<f64> = (0..n).map(|i| adjacency.row(i).map(|(_, w)| w).sum()).collect();
        let volume = degrees.iter().sum();
        Ok(SimilarityGraph { adjacency, degrees, volume, meta })
    }

    // Builds from canonical (i < j) pairs, each listed once.
    fn from_pairs(n: usize, pairs: &[(usize, usize, f64)], meta: Option<GraphMeta>) -> Result<Self> {
        let mut triplets = Vec::with_capacity(2 * pairs.len());
        for &(i, j, w) in pairs {
            triplets.push((i, j, w));
            triplets.push((j, i, w));
        }
        Self::from_adjacency(SparseMatrix::from_triplets(n, n, &triplets)?, meta)
    }

    pub fn n(&self) -> usize {
        self.adjacency.rows()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.adjacency.nnz() / 2
    }

    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adjacency
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn meta(&self) -> Option<&GraphMeta> {
        self.meta.as_ref()
    }

    /// Edges `(i, j, w)` with `i < j` in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.triplets().filter(|&(i, j, _)| i < j)
    }

    /// Serialisable form with identity node ids.
    pub fn to_edge_list(&self) -> EdgeList {
        EdgeList {
            edges: self.edges().map(|(u, v, w)| Edge { u, v, w }).collect(),
            node_count: self.n(),
            external_ids: (0..self.n() as u64).collect(),
            duplicates: 0,
        }
    }
}

fn gaussian(sq_dist: f64, sigma: f64) -> f64 {
    libm::exp(-sq_dist / (2.0 * sigma * sigma)).max(MIN_WEIGHT)
}

fn check_fixed_sigma(bandwidth: Bandwidth) -> Result<()> {
    if let Bandwidth::Fixed(s) = bandwidth {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!("sigma must be positive, got {s}")));
        }
    }
    Ok(())
}

/// Resolves the bandwidth from per-point neighbour lists sorted by distance.
/// The median heuristic uses the last entry of each list.
pub fn resolve_bandwidth(bandwidth: Bandwidth, lists: &[Vec<Neighbor>]) -> Result<f64> {
    check_fixed_sigma(bandwidth)?;
    match bandwidth {
        Bandwidth::Fixed(s) => Ok(s),
        Bandwidth::Median => {
            let mut kth: Vec<f64> = lists.iter().filter_map(|l| l.last()).map(Neighbor::dist).collect();
            if kth.is_empty() {
                return Err(Error::DegenerateBandwidth);
            }
            kth.sort_by(f64::total_cmp);
            let m = kth.len();
            let median = if m % 2 == 1 { kth[m / 2] } else { 0.5 * (kth[m / 2 - 1] + kth[m / 2]) };
            if median > 0.0 {
                Ok(median)
            } else {
                Err(Error::DegenerateBandwidth)
            }
        }
    }
}

fn validate_mode(mode: GraphMode, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter("a similarity graph needs at least two points".to_string()));
    }
    match mode {
        GraphMode::Knn(0) => Err(Error::InvalidParameter("k1 must be at least 1".to_string())),
        GraphMode::Knn(k) if k >= n => Err(Error::TooFewPoints { k, n }),
        GraphMode::Epsilon(e) if !(e > 0.0 && e.is_finite()) => {
            Err(Error::InvalidParameter(alloc::format!("epsilon must be positive, got {e}")))
        }
        _ => Ok(()),
    }
}

/// Neighbour count needed to resolve the bandwidth for `mode`, if any search
/// is required at all.
pub fn neighbor_count_for(mode: GraphMode, bandwidth: Bandwidth, n: usize) -> usize {
    match (mode, bandwidth) {
        (GraphMode::Knn(k), _) => k,
        (_, Bandwidth::Median) => DEFAULT_HEURISTIC_K.min(n.saturating_sub(1)),
        _ => 0,
    }
}

/// Builds a similarity graph over the rows of `x` with Gaussian kernel
/// weights `exp(-|xi - xj|^2 / 2 sigma^2)`.
pub fn build_graph(x: &FeatureMatrix, mode: GraphMode, bandwidth: Bandwidth) -> Result<SimilarityGraph> {
    validate_mode(mode, x.n())?;
    check_fixed_sigma(bandwidth)?;
    let k = neighbor_count_for(mode, bandwidth, x.n());
    let lists = if k > 0 {
        let index = KnnIndex::new(x.values());
        (0..x.n()).map(|i| index.neighbors_of(i, k)).collect()
    } else {
        Vec::new()
    };
    graph_from_neighbor_lists(x, mode, bandwidth, &lists)
}

/// Second half of [`build_graph`], taking precomputed neighbour lists
/// (`neighbor_count_for` entries per point) so the search can run elsewhere.
pub fn graph_from_neighbor_lists(
    x: &FeatureMatrix,
    mode: GraphMode,
    bandwidth: Bandwidth,
    lists: &[Vec<Neighbor>],
) -> Result<SimilarityGraph> {
    let n = x.n();
    validate_mode(mode, n)?;
    let sigma = resolve_bandwidth(bandwidth, lists)?;
    let meta = Some(GraphMeta { mode, sigma });
    let mut pairs = Vec::new();
    match mode {
        GraphMode::Knn(k) => {
            if lists.len() != n || lists.iter().any(|l| l.len() != k) {
                return Err(Error::InvalidParameter("neighbour lists do not match k1".to_string()));
            }
            let mut canon: Vec<(usize, usize, f64)> = Vec::with_capacity(n * k);
            for (i, list) in lists.iter().enumerate() {
                for nb in list {
                    let (a, b) = (i.min(nb.index), i.max(nb.index));
                    canon.push((a, b, nb.sq_dist));
                }
            }
            canon.sort_by(|p, q| (p.0, p.1).cmp(&(q.0, q.1)));
            canon.dedup_by(|p, q| p.0 == q.0 && p.1 == q.1);
            pairs.extend(canon.into_iter().map(|(a, b, d2)| (a, b, gaussian(d2, sigma))));
        }
        GraphMode::Epsilon(eps) => {
            let eps2 = eps * eps;
            for i in 0..n {
                for j in i + 1..n {
                    let d2 = sq_dist(x.point(i), x.point(j));
                    if d2 < eps2 {
                        pairs.push((i, j, gaussian(d2, sigma)));
                    }
                }
            }
        }
        GraphMode::Full => {
            for i in 0..n {
                for j in i + 1..n {
                    pairs.push((i, j, gaussian(sq_dist(x.point(i), x.point(j)), sigma)));
                }
            }
        }
    }
    SimilarityGraph::from_pairs(n, &pairs, meta)
}

/// Graph taken directly from an edge list; weights are used unchanged.
pub fn edge_graph(e: &EdgeList) -> Result<SimilarityGraph> {
    if e.edges.is_empty() {
        return Err(Error::EmptyInput);
    }
    let pairs: Vec<_> = e.edges.iter().map(|ed| (ed.u.min(ed.v), ed.u.max(ed.v), ed.w)).collect();
    SimilarityGraph::from_pairs(e.node_count, &pairs, None)
}

/// `L = D - A`.
pub fn laplacian(g: &SimilarityGraph) -> SparseMatrix {
    let n = g.n();
    let mut triplets = Vec::with_capacity(g.adjacency.nnz() + n);
    for i in 0..n {
        triplets.push((i, i, g.degrees[i]));
    }
    triplets.extend(g.adjacency.triplets().map(|(i, j, w)| (i, j, -w)));
    SparseMatrix::from_triplets(n, n, &triplets).expect("laplacian indices are in range")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizedKind {
    /// `D^-1/2 L D^-1/2`
    Sym,
    /// `D^-1 L`
    RandomWalk,
}

pub fn normalized_laplacian(g: &SimilarityGraph, kind: NormalizedKind) -> Result<SparseMatrix> {
    if let Some(i) = g.degrees.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::IsolatedNode(i));
    }
    let n = g.n();
    let inv_sqrt: Vec<f64> = g.degrees.iter().map(|&d| 1.0 / libm::sqrt(d)).collect();
    let mut triplets = Vec::with_capacity(g.adjacency.nnz() + n);
    for i in 0..n {
        triplets.push((i, i, 1.0));
    }
    for (i, j, w) in g.adjacency.triplets() {
        let v = match kind {
            NormalizedKind::Sym => w * inv_sqrt[i] * inv_sqrt[j],
            NormalizedKind::RandomWalk => w / g.degrees[i],
        };
        triplets.push((i, j, -v));
    }
    SparseMatrix::from_triplets(n, n, &triplets)
}

/// Row-stochastic transition matrix `P = D^-1 A`.
pub fn transition_matrix(g: &SimilarityGraph) -> Result<SparseMatrix> {
    if let Some(i) = g.degrees.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::IsolatedNode(i));
    }
    let triplets: Vec<_> = g.adjacency.triplets().map(|(i, j, w)| (i, j, w / g.degrees[i])).collect();
    SparseMatrix::from_triplets(g.n(), g.n(), &triplets)
}

/// Signed edge-vertex incidence matrix `B` (m x n) with diagonal weights `W`.
/// Every edge is oriented with its lower node id as head (+1).
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceFactor {
    pub incidence: SparseMatrix,
    pub weights: Vec<f64>,
    pub edge_order: Vec<(usize, usize)>,
}

impl IncidenceFactor {
    pub fn edge_count(&self) -> usize {
        self.weights.len()
    }

    /// Recomposes `B' W B` by sparse products.
    pub fn gram(&self) -> SparseMatrix {
        let wb = self.incidence.scale_rows(&self.weights);
        self.incidence.transpose().matmul(&wb).expect("B' and WB have compatible shapes")
    }
}

pub fn incidence_factorization(g: &SimilarityGraph) -> IncidenceFactor {
    let mut triplets = Vec::with_capacity(2 * g.edge_count());
    let mut weights = Vec::with_capacity(g.edge_count());
    let mut edge_order = Vec::with_capacity(g.edge_count());
    for (e, (head, tail, w)) in g.edges().enumerate() {
        triplets.push((e, head, 1.0));
        triplets.push((e, tail, -1.0));
        weights.push(w);
        edge_order.push((head, tail));
    }
    let incidence =
        SparseMatrix::from_triplets(weights.len(), g.n(), &triplets).expect("incidence indices are in range");
    IncidenceFactor { incidence, weights, edge_order }
}

/// Component id per node (numbered in order of their smallest node) and the
/// component count.
pub fn connected_components(g: &SimilarityGraph) -> (usize, Vec<usize>) {
    let n = g.n();
    let mut comp = vec![usize::MAX; n];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = count;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for (v, _) in g.adjacency.row(u) {
                if comp[v] == usize::MAX {
                    comp[v] = count;
                    queue.push_back(v);
                }
            }
        }
        count += 1;
    }
    (count, comp)
}

pub fn is_connected(g: &SimilarityGraph) -> bool {
    g.n() > 0 && connected_components(g).0 == 1
}

pub(crate) fn require_connected(g: &SimilarityGraph) -> Result<()> {
    let (components, _) = connected_components(g);
    if components == 1 {
        Ok(())
    } else {
        Err(Error::Disconnected { components })
    }
}

/// Mapping between node ids of a graph and an induced subgraph.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMap {
    pub old_to_new: Vec<Option<usize>>,
    pub new_to_old: Vec<usize>,
}

impl NodeMap {
    pub fn is_identity(&self) -> bool {
        self.new_to_old.len() == self.old_to_new.len() && self.new_to_old.iter().enumerate().all(|(i, &o)| i == o)
    }
}

/// Induced subgraph on the largest connected component. Among equally large
/// components the one holding the smallest node id wins.
pub fn largest_component(g: &SimilarityGraph) -> (SimilarityGraph, NodeMap) {
    let (count, comp) = connected_components(g);
    let mut sizes = vec![0usize; count];
    for &c in &comp {
        sizes[c] += 1;
    }
    // components are numbered by smallest member, so the first maximum wins ties
    let best = (0..count).fold(0, |b, c| if sizes[c] > sizes[b] { c } else { b });
    let mut old_to_new = vec![None; g.n()];
    let mut new_to_old = Vec::with_capacity(sizes.get(best).copied().unwrap_or(0));
    for (i, &c) in comp.iter().enumerate() {
        if c == best {
            old_to_new[i] = Some(new_to_old.len());
            new_to_old.push(i);
        }
    }
    let map = NodeMap { old_to_new, new_to_old };
    if count <= 1 {
        return (g.clone(), map);
    }
    let triplets: Vec<_> = g
        .adjacency
        .triplets()
        .filter_map(|(i, j, w)| Some((map.old_to_new[i]?, map.old_to_new[j]?, w)))
        .collect();
    let m = map.new_to_old.len();
    let adjacency = SparseMatrix::from_triplets(m, m, &triplets).expect("induced indices are in range");
    let sub = SimilarityGraph::from_adjacency(adjacency, g.meta).expect("induced subgraph keeps invariants");
    (sub, map)
}
