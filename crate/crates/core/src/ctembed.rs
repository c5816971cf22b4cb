//! Approximate commute-time embedding: a random sign projection of
//! `sqrt(V_G) W^1/2 B` followed by one Laplacian solve per projected row.
//! Squared distances between rows of the result approximate commute times.

use alloc::vec;
use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::{dot, norm2, DenseMatrix};
use crate::error::{Error, Result};
use crate::multigrid::Hierarchy;
use crate::simgraph::{incidence_factorization, laplacian, require_connected, IncidenceFactor, SimilarityGraph};
use crate::sparse::SparseMatrix;

pub const DEFAULT_KRP: usize = 50;
pub const DEFAULT_TOL: f64 = 1e-6;

/// `10 sqrt(m) + 1000`.
pub fn default_max_iter(edges: usize) -> usize {
    (10.0 * libm::sqrt(edges as f64)) as usize + 1000
}

/// Random `k_rp x m` matrix with entries `+-1/sqrt(k_rp)`. Row `r` is drawn
/// from its own ChaCha stream, so any row can be regenerated independently.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    k_rp: usize,
    m: usize,
    seed: u64,
    negative: Vec<bool>,
}

impl ProjectionMatrix {
    pub fn sample(k_rp: usize, m: usize, seed: u64) -> Result<Self> {
        if k_rp == 0 || m == 0 {
            return Err(Error::InvalidParameter(alloc::format!(
                "projection needs k_rp >= 1 and m >= 1, got {k_rp} x {m}"
            )));
        }
        let mut negative = Vec::with_capacity(k_rp * m);
        for r in 0..k_rp {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut bits = 0u64;
            for e in 0..m {
                if e % 64 == 0 {
                    bits = rng.next_u64();
                }
                negative.push(bits & 1 == 1);
                bits >>= 1;
            }
        }
        Ok(ProjectionMatrix { k_rp, m, seed, negative })
    }

    pub fn k_rp(&self) -> usize {
        self.k_rp
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Magnitude shared by every entry.
    pub fn magnitude(&self) -> f64 {
        1.0 / libm::sqrt(self.k_rp as f64)
    }

    pub fn get(&self, r: usize, e: usize) -> f64 {
        if self.negative[r * self.m + e] {
            -self.magnitude()
        } else {
            self.magnitude()
        }
    }

    pub fn row(&self, r: usize) -> Vec<f64> {
        (0..self.m).map(|e| self.get(r, e)).collect()
    }
}

/// Result of one Laplacian solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `||L x - y|| / ||y||` for the deflated `y`, or 0 when `y = 0`.
    pub residual: f64,
}

/// Preconditioner used inside the conjugate gradient Laplacian solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    /// Diagonal of `L`.
    Jacobi,
    /// Smoothed-aggregation multigrid V-cycle.
    #[default]
    Multigrid,
}

enum Precond {
    Jacobi(Vec<f64>),
    Multigrid(Hierarchy),
}

/// Conjugate gradient solver for one Laplacian, reusable across right-hand
/// sides. Shared references may solve concurrently.
pub struct LaplacianSolver {
    l: SparseMatrix,
    precond: Precond,
}

impl LaplacianSolver {
    pub fn new(l: &SparseMatrix, kind: Preconditioner) -> Result<Self> {
        let n = l.rows();
        if l.cols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: l.cols() });
        }
        let diag = l.diagonal();
        if n > 1 {
            if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
                return Err(Error::IsolatedNode(i));
            }
        }
        let precond = match kind {
            Preconditioner::Jacobi => Precond::Jacobi(diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 }).collect()),
            Preconditioner::Multigrid => Precond::Multigrid(Hierarchy::new(l)?),
        };
        Ok(LaplacianSolver { l: l.clone(), precond })
    }

    pub fn laplacian(&self) -> &SparseMatrix {
        &self.l
    }

    /// Minimum-norm solution of `L x = y`. The mean of `y` is removed first
    /// and the returned `x` sums to zero.
    pub fn solve(&self, y: &[f64], tol: f64, max_iter: usize) -> Result<SolveOutcome> {
        let l = &self.l;
        let n = l.rows();
        if y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: y.len() });
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(alloc::format!("tolerance must be positive, got {tol}")));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: 0 });
        }
        let mut b = y.to_vec();
        remove_mean(&mut b);
        let b_norm = norm2(&b);
        let sum: f64 = b.iter().sum();
        if sum.abs() > 1e-10 * b_norm.max(f64::MIN_POSITIVE) * libm::sqrt(n as f64) {
            return Err(Error::InconsistentRhs { sum });
        }
        if b_norm == 0.0 {
            return Ok(SolveOutcome { x: vec![0.0; n], iterations: 0, residual: 0.0 });
        }
        let mut ws = match &self.precond {
            Precond::Multigrid(h) => Some(h.workspace()),
            Precond::Jacobi(_) => None,
        };
        let mut apply = |r: &[f64], z: &mut [f64]| match &self.precond {
            Precond::Jacobi(inv) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * di;
                }
            }
            Precond::Multigrid(h) => h.apply(r, z, ws.as_mut().expect("workspace exists")),
        };

        let target = tol * b_norm;
        let mut x = vec![0.0; n];
        let mut r = b.clone();
        let mut z = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        let mut iterations = 0;
        let mut true_res = b_norm;
        // restart from the current iterate whenever the recurred residual
        // drifts away from the true one
        while iterations < max_iter {
            let before = iterations;
            apply(&r, &mut z);
            p.copy_from_slice(&z);
            let mut rz = dot(&r, &z);
            while iterations < max_iter {
                l.mul_vec_into(&p, &mut q);
                let pq = dot(&p, &q);
                if !(pq > 0.0) || !(rz > 0.0) {
                    break;
                }
                let alpha = rz / pq;
                for i in 0..n {
                    x[i] += alpha * p[i];
                    r[i] -= alpha * q[i];
                }
                iterations += 1;
                if norm2(&r) <= target {
                    break;
                }
                apply(&r, &mut z);
                let rz_next = dot(&r, &z);
                let beta = rz_next / rz;
                rz = rz_next;
                for (pi, zi) in p.iter_mut().zip(&z) {
                    *pi = zi + beta * *pi;
                }
            }
            remove_mean(&mut x);
            l.mul_vec_into(&x, &mut q);
            for i in 0..n {
                r[i] = b[i] - q[i];
            }
            true_res = norm2(&r);
            if true_res <= target {
                return Ok(SolveOutcome { x, iterations, residual: true_res / b_norm });
            }
            if iterations == before {
                break;
            }
        }
        Err(Error::NotConverged { iterations, residual: true_res / b_norm })
    }
}

/// One-off solve of `L x = y` with the default preconditioner.
pub fn laplacian_solve(l: &SparseMatrix, y: &[f64], tol: f64, max_iter: usize) -> Result<SolveOutcome> {
    laplacian_solve_with(l, y, tol, max_iter, Preconditioner::default())
}

pub fn laplacian_solve_with(
    l: &SparseMatrix,
    y: &[f64],
    tol: f64,
    max_iter: usize,
    kind: Preconditioner,
) -> Result<SolveOutcome> {
    if y.len() != l.rows() {
        return Err(Error::DimensionMismatch { expected: l.rows(), found: y.len() });
    }
    LaplacianSolver::new(l, kind)?.solve(y, tol, max_iter)
}

fn remove_mean(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingKind {
    /// Eigendecomposition-based commute embedding.
    Exact,
    /// Random projection plus Laplacian solves.
    Approximate,
}

/// Point coordinates whose squared row distances (approximately) equal
/// commute times.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub coords: DenseMatrix,
    pub kind: EmbeddingKind,
    pub volume: f64,
}

impl Embedding {
    pub fn n(&self) -> usize {
        self.coords.rows()
    }

    pub fn dim(&self) -> usize {
        self.coords.cols()
    }

    /// Squared distance between rows `i` and `j`.
    pub fn approx_commute(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.n();
        for idx in [i, j] {
            if idx >= n {
                return Err(Error::IndexOutOfRange { index: idx, n });
            }
        }
        Ok(self.coords.row_sq_dist(i, j))
    }
}

/// Per-row solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub tol: f64,
    pub max_iter: usize,
    pub residuals: Vec<f64>,
    pub iterations: Vec<usize>,
}

impl SolverReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn total_iterations(&self) -> usize {
        self.iterations.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingConfig {
    pub k_rp: usize,
    pub seed: u64,
    pub tol: f64,
    /// Per-solve iteration cap; `None` means [`default_max_iter`].
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            k_rp: DEFAULT_KRP,
            seed: 0,
            tol: DEFAULT_TOL,
            max_iter: None,
            preconditioner: Preconditioner::default(),
        }
    }
}

/// Everything needed to compute the embedding rows, which are independent
/// of each other and may be solved in any order.
pub struct EmbeddingProblem {
    solver: LaplacianSolver,
    factor: IncidenceFactor,
    projection: ProjectionMatrix,
    volume: f64,
    tol: f64,
    max_iter: usize,
}

impl EmbeddingProblem {
    pub fn new(g: &SimilarityGraph, cfg: &EmbeddingConfig) -> Result<Self> {
        if !(cfg.tol > 0.0) {
            return Err(Error::InvalidParameter(alloc::format!("tolerance must be positive, got {}", cfg.tol)));
        }
        require_connected(g)?;
        let factor = incidence_factorization(g);
        let projection = ProjectionMatrix::sample(cfg.k_rp, factor.edge_count().max(1), cfg.seed)?;
        Ok(EmbeddingProblem {
            solver: LaplacianSolver::new(&laplacian(g), cfg.preconditioner)?,
            max_iter: cfg.max_iter.unwrap_or_else(|| default_max_iter(factor.edge_count())),
            factor,
            projection,
            volume: g.volume(),
            tol: cfg.tol,
        })
    }

    pub fn rows(&self) -> usize {
        self.projection.k_rp()
    }

    pub fn laplacian(&self) -> &SparseMatrix {
        self.solver.laplacian()
    }

    pub fn projection(&self) -> &ProjectionMatrix {
        &self.projection
    }

    /// Row `r` of `Y = sqrt(V_G) Q W^1/2 B`.
    pub fn rhs(&self, r: usize) -> Vec<f64> {
        let n = self.laplacian().rows();
        let scale = libm::sqrt(self.volume);
        let mut y = vec![0.0; n];
        for (e, (&(head, tail), &w)) in self.factor.edge_order.iter().zip(&self.factor.weights).enumerate() {
            let c = scale * self.projection.get(r, e) * libm::sqrt(w);
            y[head] += c;
            y[tail] -= c;
        }
        y
    }

    /// Row `r` of the embedding transposed: the solution of `z L = y_r`.
    pub fn solve_row(&self, r: usize) -> Result<SolveOutcome> {
        self.solver.solve(&self.rhs(r), self.tol, self.max_iter)
    }

    /// Stacks solved rows (in row order) into the `n x k_rp` embedding.
    pub fn assemble(&self, rows: Vec<SolveOutcome>) -> Result<(Embedding, SolverReport)> {
        if rows.len() != self.rows() {
            return Err(Error::DimensionMismatch { expected: self.rows(), found: rows.len() });
        }
        let n = self.laplacian().rows();
        let k = rows.len();
        let mut coords = DenseMatrix::zeros(n, k);
        let mut report =
            SolverReport { tol: self.tol, max_iter: self.max_iter, residuals: Vec::new(), iterations: Vec::new() };
        for (r, out) in rows.into_iter().enumerate() {
            for (i, v) in out.x.iter().enumerate() {
                coords[(i, r)] = *v;
            }
            report.residuals.push(out.residual);
            report.iterations.push(out.iterations);
        }
        Ok((Embedding { coords, kind: EmbeddingKind::Approximate, volume: self.volume }, report))
    }
}

/// Builds the approximate commute-time embedding sequentially.
pub fn build_embedding(g: &SimilarityGraph, k_rp: usize, seed: u64, tol: f64) -> Result<(Embedding, SolverReport)> {
    build_embedding_with(g, &EmbeddingConfig { k_rp, seed, tol, ..EmbeddingConfig::default() })
}

pub fn build_embedding_with(g: &SimilarityGraph, cfg: &EmbeddingConfig) -> Result<(Embedding, SolverReport)> {
    let problem = EmbeddingProblem::new(g, cfg)?;
    let rows = (0..problem.rows()).map(|r| problem.solve_row(r)).collect::<Result<Vec<_>>>()?;
    problem.assemble(rows)
}
