//! Exact references: eigenvector-based spectral clustering, the exact
//! commute-time embedding, pseudoinverse commute times and hitting times.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::str::FromStr;

use crate::ctembed::{Embedding, EmbeddingKind};
use crate::dense::{Cholesky, DenseMatrix};
use crate::eigen::{lanczos_lowest, symmetric_eigen, symmetric_eigen_lowest, SymmetricEigen};
use crate::error::{Error, Result};
use crate::kmeans::{kmeans_cluster, ClusterAssignment, KMeansConfig};
use crate::simgraph::{laplacian, normalized_laplacian, require_connected, NormalizedKind, SimilarityGraph};
use crate::sparse::SparseMatrix;

/// Largest graph handled by the dense eigensolver; Lanczos above.
pub const DENSE_EIGEN_LIMIT: usize = 2000;
/// Largest graph for which dense pseudoinverse quantities are computed.
pub const DENSE_LIMIT: usize = 5000;
pub const LANCZOS_TOL: f64 = 1e-8;
/// Eigenvalues below this fraction of the largest are treated as zero.
pub const ZERO_EIGEN_CUT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectralVariant {
    /// Eigenvectors of `L`.
    Unnormalized,
    /// Eigenvectors of `D^-1 L`.
    ShiMalik,
    /// Eigenvectors of `D^-1/2 L D^-1/2` with rows scaled to unit length.
    #[default]
    Njw,
}

impl FromStr for SpectralVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unnorm" | "unnormalized" => Ok(SpectralVariant::Unnormalized),
            "shi_malik" | "shi-malik" | "rw" => Ok(SpectralVariant::ShiMalik),
            "njw" | "sym" => Ok(SpectralVariant::Njw),
            _ => Err(Error::InvalidParameter(alloc::format!("unknown spectral variant `{s}`"))),
        }
    }
}

impl core::fmt::Display for SpectralVariant {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            SpectralVariant::Unnormalized => "unnorm",
            SpectralVariant::ShiMalik => "shi_malik",
            SpectralVariant::Njw => "njw",
        })
    }
}

/// Lowest `k` eigenpairs of a symmetric sparse matrix: dense up to
/// [`DENSE_EIGEN_LIMIT`] nodes, Lanczos beyond.
pub fn lowest_eigenpairs(m: &SparseMatrix, k: usize) -> Result<SymmetricEigen> {
    let n = m.rows();
    if k == 0 || k > n {
        return Err(Error::TooManyClusters { k, n });
    }
    if n <= DENSE_EIGEN_LIMIT {
        symmetric_eigen_lowest(&m.to_dense(), k)
    } else {
        lanczos_lowest(m, k, LANCZOS_TOL)
    }
}

/// The `n x k` matrix whose rows are clustered by the chosen variant.
pub fn spectral_embedding(g: &SimilarityGraph, k: usize, variant: SpectralVariant) -> Result<DenseMatrix> {
    require_connected(g)?;
    match variant {
        SpectralVariant::Unnormalized => Ok(lowest_eigenpairs(&laplacian(g), k)?.vectors),
        SpectralVariant::ShiMalik => {
            // D^-1 L u = l u  <=>  u = D^-1/2 v with v an eigenvector of the sym form
            let mut u = lowest_eigenpairs(&normalized_laplacian(g, NormalizedKind::Sym)?, k)?.vectors;
            for (i, d) in g.degrees().iter().enumerate() {
                let s = 1.0 / libm::sqrt(*d);
                u.row_mut(i).iter_mut().for_each(|x| *x *= s);
            }
            Ok(u)
        }
        SpectralVariant::Njw => {
            let mut u = lowest_eigenpairs(&normalized_laplacian(g, NormalizedKind::Sym)?, k)?.vectors;
            for i in 0..u.rows() {
                let norm = crate::dense::norm2(u.row(i));
                if norm > 0.0 {
                    u.row_mut(i).iter_mut().for_each(|x| *x /= norm);
                }
            }
            Ok(u)
        }
    }
}

/// Spectral clustering from the first `k` eigenvectors.
pub fn spectral_cluster_exact(
    g: &SimilarityGraph,
    k: usize,
    variant: SpectralVariant,
    cfg: &KMeansConfig,
) -> Result<ClusterAssignment> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".to_string()));
    }
    if k > g.n() {
        return Err(Error::TooManyClusters { k, n: g.n() });
    }
    let u = spectral_embedding(g, k, variant)?;
    kmeans_cluster(&u, &KMeansConfig { k, ..*cfg })
}

fn check_dense_size(g: &SimilarityGraph) -> Result<()> {
    if g.n() > DENSE_LIMIT {
        return Err(Error::TooLarge { n: g.n(), limit: DENSE_LIMIT });
    }
    if g.n() == 0 {
        return Err(Error::EmptyInput);
    }
    require_connected(g)
}

/// `theta = sqrt(V_G) V S^-1/2` over the nonzero eigenpairs of `L`; rows are
/// points. Always uses the dense eigensolver since every pair is needed.
pub fn exact_commute_embedding(g: &SimilarityGraph) -> Result<Embedding> {
    check_dense_size(g)?;
    let n = g.n();
    let eig = symmetric_eigen(&laplacian(g).to_dense())?;
    let top = eig.values.last().copied().unwrap_or(0.0);
    let kept: Vec<usize> = (0..n).filter(|&j| eig.values[j] > ZERO_EIGEN_CUT * top).collect();
    let scale = libm::sqrt(g.volume());
    let mut coords = DenseMatrix::zeros(n, kept.len());
    for (c, &j) in kept.iter().enumerate() {
        let f = scale / libm::sqrt(eig.values[j]);
        for i in 0..n {
            coords[(i, c)] = f * eig.vectors[(i, j)];
        }
    }
    Ok(Embedding { coords, kind: EmbeddingKind::Exact, volume: g.volume() })
}

/// Dense Laplacian pseudoinverse, computed as `(L + J/n)^-1 - J/n`.
pub fn laplacian_pinv(g: &SimilarityGraph) -> Result<DenseMatrix> {
    check_dense_size(g)?;
    let n = g.n();
    let j = 1.0 / n as f64;
    let mut a = laplacian(g).to_dense();
    for r in 0..n {
        a.row_mut(r).iter_mut().for_each(|x| *x += j);
    }
    let inv = Cholesky::new(&a)?.inverse();
    let mut out = DenseMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            out[(r, c)] = 0.5 * (inv[(r, c)] + inv[(c, r)]) - j;
        }
    }
    Ok(out)
}

/// Commute times `c_ij = V_G (l+_ii + l+_jj - 2 l+_ij)` for every pair.
#[derive(Debug, Clone)]
pub struct CommuteTimes {
    pinv: DenseMatrix,
    volume: f64,
}

impl CommuteTimes {
    pub fn new(g: &SimilarityGraph) -> Result<Self> {
        Ok(CommuteTimes { pinv: laplacian_pinv(g)?, volume: g.volume() })
    }

    pub fn n(&self) -> usize {
        self.pinv.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.n();
        for idx in [i, j] {
            if idx >= n {
                return Err(Error::IndexOutOfRange { index: idx, n });
            }
        }
        if i == j {
            return Ok(0.0);
        }
        let l = &self.pinv;
        Ok((self.volume * (l[(i, i)] + l[(j, j)] - 2.0 * l[(i, j)])).max(0.0))
    }

    pub fn pinv(&self) -> &DenseMatrix {
        &self.pinv
    }
}

/// Commute time between `i` and `j` from the Laplacian pseudoinverse.
pub fn commute_pinv(g: &SimilarityGraph, i: usize, j: usize) -> Result<f64> {
    CommuteTimes::new(g)?.get(i, j)
}

/// Expected steps `h[i]` for a random walk from `i` to reach `target`,
/// solved on the Laplacian grounded at `target` with the degrees as
/// right-hand side.
pub fn hitting_times(g: &SimilarityGraph, target: usize) -> Result<Vec<f64>> {
    let n = g.n();
    if target >= n {
        return Err(Error::IndexOutOfRange { index: target, n });
    }
    check_dense_size(g)?;
    let l = laplacian(g);
    let keep: Vec<usize> = (0..n).filter(|&i| i != target).collect();
    let mut h = alloc::vec![0.0; n];
    if keep.is_empty() {
        return Ok(h);
    }
    let mut grounded = DenseMatrix::zeros(n - 1, n - 1);
    for (a, &i) in keep.iter().enumerate() {
        for (j, v) in l.row(i) {
            if j != target {
                let b = if j < target { j } else { j - 1 };
                grounded[(a, b)] = v;
            }
        }
    }
    let rhs: Vec<f64> = keep.iter().map(|&i| g.degrees()[i]).collect();
    let sol = Cholesky::new(&grounded)?.solve(&rhs);
    for (&i, v) in keep.iter().zip(sol) {
        h[i] = v;
    }
    Ok(h)
}
