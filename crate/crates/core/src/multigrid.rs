//! Smoothed-aggregation algebraic multigrid for graph Laplacians, applied as
//! a symmetric V-cycle preconditioner.

use alloc::vec;
use alloc::vec::Vec;

use crate::dense::{Cholesky, DenseMatrix};
use crate::error::Result;
use crate::sparse::SparseMatrix;

const COARSE_SIZE: usize = 256;
const MAX_LEVELS: usize = 16;
const STRENGTH: f64 = 0.08;

struct Level {
    a: SparseMatrix,
    inv_diag: Vec<f64>,
    /// Prolongation from the next coarser level.
    p: SparseMatrix,
    /// `p` transposed.
    r: SparseMatrix,
}

/// Multigrid hierarchy for a connected-graph Laplacian (or any symmetric
/// positive semidefinite matrix whose null space is the constant vector).
pub struct Hierarchy {
    levels: Vec<Level>,
    coarse_a: SparseMatrix,
    coarse: Cholesky,
}

/// Scratch vectors for one V-cycle per level.
pub struct Workspace {
    x: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    t: Vec<Vec<f64>>,
}

impl Hierarchy {
    pub fn new(l: &SparseMatrix) -> Result<Self> {
        let mut levels = Vec::new();
        let mut a = l.clone();
        while a.rows() > COARSE_SIZE && levels.len() < MAX_LEVELS {
            let (agg, count) = aggregate(&a);
            if count * 10 > a.rows() * 9 || count == 0 {
                break;
            }
            let inv_diag = inverse_diagonal(&a);
            let p = smoothed_prolongator(&a, &inv_diag, &agg, count)?;
            let r = p.transpose();
            let coarse = r.matmul(&a.matmul(&p)?)?;
            levels.push(Level { a, inv_diag, p, r });
            a = coarse;
        }
        let n = a.rows();
        let mut dense = a.to_dense();
        // lift the constant null space so the coarse system is definite
        let shift = (0..n).map(|i| dense[(i, i)].abs()).sum::<f64>().max(f64::MIN_POSITIVE) / (n * n) as f64;
        for i in 0..n {
            for j in 0..n {
                dense[(i, j)] += shift;
            }
        }
        let coarse = Cholesky::new(&dense)?;
        Ok(Hierarchy { levels, coarse_a: a, coarse })
    }

    /// Number of levels including the coarsest one.
    pub fn depth(&self) -> usize {
        self.levels.len() + 1
    }

    /// Total stored entries over all levels relative to the finest level.
    pub fn operator_complexity(&self) -> f64 {
        let fine = self.levels.first().map_or(self.coarse_a.nnz(), |l| l.a.nnz()).max(1);
        let total: usize = self.levels.iter().map(|l| l.a.nnz()).sum::<usize>() + self.coarse_a.nnz();
        total as f64 / fine as f64
    }

    pub fn workspace(&self) -> Workspace {
        let mut sizes: Vec<usize> = self.levels.iter().map(|l| l.a.rows()).collect();
        sizes.push(self.coarse_a.rows());
        Workspace {
            x: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            b: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// `out = M^-1 r` for one V-cycle with a zero initial guess.
    pub fn apply(&self, r: &[f64], out: &mut [f64], ws: &mut Workspace) {
        ws.b[0].copy_from_slice(r);
        self.cycle(0, ws);
        out.copy_from_slice(&ws.x[0]);
    }

    fn cycle(&self, lvl: usize, ws: &mut Workspace) {
        if lvl == self.levels.len() {
            let sol = self.coarse.solve(&ws.b[lvl]);
            ws.x[lvl].copy_from_slice(&sol);
            return;
        }
        let level = &self.levels[lvl];
        let x = &mut ws.x[lvl];
        x.iter_mut().for_each(|v| *v = 0.0);
        gauss_seidel(&level.a, &level.inv_diag, &ws.b[lvl], x, false);
        let t = &mut ws.t[lvl];
        level.a.mul_vec_into(x, t);
        for (ti, bi) in t.iter_mut().zip(&ws.b[lvl]) {
            *ti = bi - *ti;
        }
        level.r.mul_vec_into(t, &mut ws.b[lvl + 1]);
        self.cycle(lvl + 1, ws);
        let t = &mut ws.t[lvl];
        level.p.mul_vec_into(&ws.x[lvl + 1], t);
        let x = &mut ws.x[lvl];
        for (xi, ti) in x.iter_mut().zip(t.iter()) {
            *xi += ti;
        }
        gauss_seidel(&level.a, &level.inv_diag, &ws.b[lvl], x, true);
    }
}

fn inverse_diagonal(a: &SparseMatrix) -> Vec<f64> {
    a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 }).collect()
}

fn gauss_seidel(a: &SparseMatrix, inv_diag: &[f64], b: &[f64], x: &mut [f64], backward: bool) {
    let n = a.rows();
    let mut sweep = |i: usize| {
        if inv_diag[i] == 0.0 {
            return;
        }
        let mut s = b[i];
        for (j, v) in a.row(i) {
            if j != i {
                s -= v * x[j];
            }
        }
        x[i] = s * inv_diag[i];
    };
    if backward {
        (0..n).rev().for_each(&mut sweep);
    } else {
        (0..n).for_each(&mut sweep);
    }
}

// Standard three-pass greedy aggregation over strong connections
// |a_ij| >= theta sqrt(a_ii a_jj).
fn aggregate(a: &SparseMatrix) -> (Vec<usize>, usize) {
    let n = a.rows();
    let diag = a.diagonal();
    let diag = &diag;
    let strong = |i: usize| {
        a.row(i).filter(move |&(j, v)| j != i && v.abs() >= STRENGTH * libm::sqrt((diag[i] * diag[j]).abs()))
    };
    const NONE: usize = usize::MAX;
    let mut agg = vec![NONE; n];
    let mut count = 0;
    for i in 0..n {
        if agg[i] != NONE {
            continue;
        }
        let mut has_strong = false;
        let mut free = true;
        for (j, _) in strong(i) {
            has_strong = true;
            if agg[j] != NONE {
                free = false;
                break;
            }
        }
        if has_strong && free {
            agg[i] = count;
            for (j, _) in strong(i) {
                agg[j] = count;
            }
            count += 1;
        }
    }
    let first_pass = agg.clone();
    for i in 0..n {
        if agg[i] != NONE {
            continue;
        }
        let best = strong(i)
            .filter(|&(j, _)| first_pass[j] != NONE)
            .fold(None, |best: Option<(usize, f64)>, (j, v)| match best {
                Some((_, bv)) if bv >= v.abs() => best,
                _ => Some((j, v.abs())),
            });
        if let Some((j, _)) = best {
            agg[i] = first_pass[j];
        }
    }
    for i in 0..n {
        if agg[i] != NONE {
            continue;
        }
        agg[i] = count;
        for (j, _) in strong(i) {
            if agg[j] == NONE {
                agg[j] = count;
            }
        }
        count += 1;
    }
    (agg, count)
}

// P = (I - omega D^-1 A) T with the piecewise-constant tentative prolongator T.
fn smoothed_prolongator(a: &SparseMatrix, inv_diag: &[f64], agg: &[usize], count: usize) -> Result<SparseMatrix> {
    let n = a.rows();
    // Gershgorin bound on the spectral radius of D^-1 A
    let rho = (0..n)
        .map(|i| a.row(i).map(|(_, v)| v.abs()).sum::<f64>() * inv_diag[i])
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let omega = 4.0 / (3.0 * rho);
    let mut triplets = Vec::with_capacity(a.nnz() + n);
    for i in 0..n {
        triplets.push((i, agg[i], 1.0));
        for (j, v) in a.row(i) {
            triplets.push((i, agg[j], -omega * inv_diag[i] * v));
        }
    }
    let p = SparseMatrix::from_triplets(n, count, &triplets)?;
    Ok(drop_small(&p, 1e-14))
}

fn drop_small(m: &SparseMatrix, rel: f64) -> SparseMatrix {
    let scale = m.triplets().fold(0.0, |s, (_, _, v)| f64::max(s, v.abs()));
    let kept: Vec<_> = m.triplets().filter(|&(_, _, v)| v.abs() > rel * scale).collect();
    SparseMatrix::from_triplets(m.rows(), m.cols(), &kept).expect("filtered entries stay in range")
}

/// Dense matrix of the coarsest operator, for inspection in tests.
pub fn coarse_operator(h: &Hierarchy) -> DenseMatrix {
    h.coarse_a.to_dense()
}
