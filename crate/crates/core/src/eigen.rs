//! Symmetric eigensolvers: dense Householder tridiagonalisation with implicit
//! QL, and Lanczos with full reorthogonalisation for larger sparse operators.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dense::{dot, norm2, DenseMatrix};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Eigenvalues in ascending order with matching orthonormal eigenvectors
/// stored as the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

impl SymmetricEigen {
    pub fn vector(&self, j: usize) -> Vec<f64> {
        self.vectors.column(j)
    }
}

/// Full eigendecomposition of a dense symmetric matrix.
pub fn symmetric_eigen(a: &DenseMatrix) -> Result<SymmetricEigen> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: a.cols() });
    }
    if n == 0 {
        return Ok(SymmetricEigen { values: Vec::new(), vectors: DenseMatrix::zeros(0, 0) });
    }
    // symmetric input, so the copy already is the transposed storage
    let mut z = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut z, &mut d, &mut e);
    tridiagonal_ql(&mut d, &mut e, Some(&mut z))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for (row, x) in z.row(src).iter().enumerate() {
            vectors[(row, col)] = *x;
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

/// Lowest `k` eigenpairs of a dense symmetric matrix. Eigenvectors come from
/// inverse iteration on the tridiagonal form, falling back to the full
/// decomposition if any pair misses the residual bound `1e-9 ||A||`.
pub fn symmetric_eigen_lowest(a: &DenseMatrix, k: usize) -> Result<SymmetricEigen> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: a.cols() });
    }
    if k > n {
        return Err(Error::TooManyClusters { k, n });
    }
    if k == 0 {
        return Ok(SymmetricEigen { values: Vec::new(), vectors: DenseMatrix::zeros(n, 0) });
    }
    let mut z = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut z, &mut d, &mut e);
    // sub-diagonal: off[i] couples i and i + 1
    let off: Vec<f64> = e[1..].to_vec();
    let values = tridiagonal_eigenvalues(&d, &off)?;
    let tnorm = (0..n)
        .map(|i| d[i].abs() + off.get(i).map_or(0.0, |x| x.abs()) + if i > 0 { off[i - 1].abs() } else { 0.0 })
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let cluster_gap = 1e-3 * tnorm;

    let mut ys: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let lambda = values[j];
        let group: Vec<usize> = (0..j).filter(|&i| (values[i] - lambda).abs() <= cluster_gap).collect();
        let lu = TridiagonalLu::new(&d, &off, lambda, tnorm);
        let mut y: Vec<f64> = (0..n).map(|i| libm::sin((i + 1) as f64 * (0.7548776662 + j as f64 * 0.5698402910))).collect();
        normalize(&mut y);
        for _ in 0..6 {
            lu.solve(&mut y);
            for &i in &group {
                let c = dot(&y, &ys[i]);
                for (yv, xv) in y.iter_mut().zip(&ys[i]) {
                    *yv -= c * xv;
                }
            }
            normalize(&mut y);
        }
        ys.push(y);
    }
    let mut vectors = DenseMatrix::zeros(n, k);
    for (j, y) in ys.iter().enumerate() {
        for (r, &c) in y.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            for (i, q) in z.row(r).iter().enumerate() {
                vectors[(i, j)] += c * q;
            }
        }
    }
    let anorm = (0..n).map(|i| a.row(i).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    for j in 0..k {
        let v = vectors.column(j);
        let av = a.mul_vec(&v);
        let r: f64 = av.iter().zip(&v).map(|(x, y)| (x - values[j] * y) * (x - values[j] * y)).sum();
        if !(libm::sqrt(r) <= 1e-9 * anorm.max(f64::MIN_POSITIVE)) {
            let full = symmetric_eigen(a)?;
            let mut vectors = DenseMatrix::zeros(n, k);
            for i in 0..n {
                vectors.row_mut(i).copy_from_slice(&full.vectors.row(i)[..k]);
            }
            return Ok(SymmetricEigen { values: full.values[..k].to_vec(), vectors });
        }
    }
    Ok(SymmetricEigen { values: values[..k].to_vec(), vectors })
}

fn normalize(v: &mut [f64]) {
    let norm = norm2(v);
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

// LU factorisation with partial pivoting of T - lambda I for a symmetric
// tridiagonal T (LAPACK gttrf layout).
struct TridiagonalLu {
    dl: Vec<f64>,
    dd: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    fn new(diag: &[f64], off: &[f64], lambda: f64, tnorm: f64) -> Self {
        let n = diag.len();
        let mut dd: Vec<f64> = diag.iter().map(|x| x - lambda).collect();
        let mut dl = off.to_vec();
        let mut du = off.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if dd[i].abs() >= dl[i].abs() {
                if dd[i] != 0.0 {
                    let fact = dl[i] / dd[i];
                    dl[i] = fact;
                    dd[i + 1] -= fact * du[i];
                }
            } else {
                let fact = dd[i] / dl[i];
                dd[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = dd[i + 1];
                dd[i + 1] = temp - fact * dd[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        let tiny = f64::EPSILON * tnorm;
        for x in dd.iter_mut() {
            if x.abs() < tiny {
                *x = if *x < 0.0 { -tiny } else { tiny };
            }
        }
        TridiagonalLu { dl, dd, du, du2, swapped }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i] - self.dl[i] * b[i + 1];
                b[i] = b[i + 1];
                b[i + 1] = temp;
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.dd[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.dd[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.dd[i];
        }
    }
}

/// Eigenvalues of a symmetric tridiagonal matrix with diagonal `diag` and
/// off-diagonal `off` (length n-1), ascending.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[1..n].copy_from_slice(&off[..n.saturating_sub(1)]);
    tridiagonal_ql(&mut d, &mut e, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

// Householder reduction to tridiagonal form (EISPACK tred2) working on the
// transposed storage so inner loops run along rows. On return row j of `w`
// holds column j of the accumulated orthogonal transform, `d` the diagonal
// and `e[1..]` the sub-diagonal.
fn tridiagonalize(w: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = w[(j, n - 1)];
    }
    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = w[(j, i - 1)];
                w[(j, i)] = 0.0;
                w[(i, j)] = 0.0;
            }
        } else {
            for x in d[..i].iter_mut() {
                *x /= scale;
                h += *x * *x;
            }
            let f = d[i - 1];
            let mut g = libm::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].iter_mut().for_each(|x| *x = 0.0);

            for j in 0..i {
                let f = d[j];
                w[(i, j)] = f;
                let row = &w.row(j)[j..i];
                let mut g = e[j] + row[0] * f;
                for ((vkj, dk), ek) in row[1..].iter().zip(&d[j + 1..i]).zip(&mut e[j + 1..i]) {
                    g += vkj * dk;
                    *ek += vkj * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for ((wk, ek), dk) in w.row_mut(j)[j..i].iter_mut().zip(&e[j..i]).zip(&d[j..i]) {
                    *wk -= f * ek + g * dk;
                }
                d[j] = w[(j, i - 1)];
                w[(j, i)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n - 1 {
        w[(i, n - 1)] = w[(i, i)];
        w[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            let u = w.row(i + 1)[..=i].to_vec();
            for k in 0..=i {
                d[k] = u[k] / h;
            }
            for j in 0..=i {
                let row = &mut w.row_mut(j)[..=i];
                let g = dot(&u, row);
                for (wk, dk) in row.iter_mut().zip(&d[..=i]) {
                    *wk -= g * dk;
                }
            }
        }
        for k in 0..=i {
            w[(i + 1, k)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = w[(j, n - 1)];
        w[(j, n - 1)] = 0.0;
    }
    w[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

// Implicit QL iterations on a symmetric tridiagonal matrix (EISPACK tql2).
// `e[1..]` is the sub-diagonal on entry. When `z` is given its rows are
// rotated alongside, so row i ends up as the eigenvector for `d[i]`.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], mut z: Option<&mut DenseMatrix>) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    if n > 0 {
        e[n - 1] = 0.0;
    }
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::Eigen(format!("QL iteration stalled at index {l}")));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for x in d[l + 2..].iter_mut() {
                    *x -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = z.as_deref_mut() {
                        rotate_rows(z, i, s, c);
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[inline]
fn rotate_rows(z: &mut DenseMatrix, i: usize, s: f64, c: f64) {
    let (a_row, b_row) = z.rows_pair_mut(i);
    for (a, b) in a_row.iter_mut().zip(b_row.iter_mut()) {
        let h = *b;
        *b = s * *a + c * h;
        *a = c * *a - s * h;
    }
}

/// Lowest `k` eigenpairs of a sparse symmetric matrix via Lanczos with full
/// reorthogonalisation. Converged when every retained Ritz pair has residual
/// below `tol * ||A||`.
pub fn lanczos_lowest(a: &SparseMatrix, k: usize, tol: f64) -> Result<SymmetricEigen> {
    let n = a.rows();
    if k == 0 || k > n {
        return Err(Error::TooManyClusters { k, n });
    }
    // Gershgorin bound on the spectral radius.
    let norm = (0..n)
        .map(|i| a.row(i).map(|(_, v)| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);

    // Deterministic, non-degenerate start vector.
    let mut q: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * libm::sin(1.0 + i as f64 * 0.7548776662)).collect();
    let qn = norm2(&q);
    q.iter_mut().for_each(|x| *x /= qn);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let check_every = 10;

    for step in 0..n {
        a.mul_vec_into(&q, &mut w);
        let a_j = dot(&w, &q);
        alpha.push(a_j);
        for (wi, qi) in w.iter_mut().zip(&q) {
            *wi -= a_j * qi;
        }
        if let Some(prev) = basis.last() {
            let b = *beta.last().unwrap();
            for (wi, pi) in w.iter_mut().zip(prev) {
                *wi -= b * pi;
            }
        }
        basis.push(q.clone());
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for v in &basis {
                let c = dot(&w, v);
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= c * vi;
                }
            }
        }
        let b = norm2(&w);
        let m = basis.len();
        let exhausted = b <= 1e-12 * norm || m == n;

        if m >= k && (exhausted || (step + 1) % check_every == 0) {
            let mut t = DenseMatrix::zeros(m, m);
            for i in 0..m {
                t[(i, i)] = alpha[i];
                if i + 1 < m {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let ritz = symmetric_eigen(&t)?;
            let converged = (0..k).all(|j| (b * ritz.vectors[(m - 1, j)]).abs() <= tol * norm);
            if converged || exhausted {
                let mut vectors = DenseMatrix::zeros(n, k);
                for j in 0..k {
                    for (i, v) in basis.iter().enumerate() {
                        let s = ritz.vectors[(i, j)];
                        if s == 0.0 {
                            continue;
                        }
                        for r in 0..n {
                            vectors[(r, j)] += s * v[r];
                        }
                    }
                }
                return Ok(SymmetricEigen { values: ritz.values[..k].to_vec(), vectors });
            }
        }
        if exhausted {
            break;
        }
        beta.push(b);
        q = w.iter().map(|x| x / b).collect();
    }
    Err(Error::Eigen(format!("Lanczos did not converge for k = {k}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.random_range(-1.0..1.0);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }

    fn path_laplacian(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.extend([(i, i, 1.0), (i + 1, i + 1, 1.0), (i, i + 1, -1.0), (i + 1, i, -1.0)]);
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn dense_pairs_satisfy_definition() {
        for (n, seed) in [(1, 1), (2, 2), (7, 3), (40, 4)] {
            let a = random_symmetric(n, seed);
            let eig = symmetric_eigen(&a).unwrap();
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
            for j in 0..n {
                let v = eig.vector(j);
                let av = a.mul_vec(&v);
                let r: f64 = av.iter().zip(&v).map(|(x, y)| (x - eig.values[j] * y).powi(2)).sum();
                assert!(r.sqrt() < 1e-10, "residual {r}");
                for i in 0..j {
                    assert!(dot(&v, &eig.vector(i)).abs() < 1e-10);
                }
                assert!((norm2(&v) - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn path_spectrum_is_known() {
        // eigenvalues of the unit path Laplacian are 2 - 2cos(pi k / n)
        let n = 12;
        let eig = symmetric_eigen(&path_laplacian(n).to_dense()).unwrap();
        for (k, &l) in eig.values.iter().enumerate() {
            let exact = 2.0 - 2.0 * libm::cos(core::f64::consts::PI * k as f64 / n as f64);
            assert!((l - exact).abs() < 1e-12);
        }
        let diag: Vec<f64> = (0..n).map(|i| if i == 0 || i == n - 1 { 1.0 } else { 2.0 }).collect();
        let vals = tridiagonal_eigenvalues(&diag, &vec![-1.0; n - 1]).unwrap();
        for (a, b) in vals.iter().zip(&eig.values) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(tridiagonal_eigenvalues(&[], &[]).unwrap().is_empty());
    }

    #[test]
    fn lowest_subset_matches_full() {
        for (n, seed) in [(1, 1), (3, 2), (60, 3)] {
            let a = random_symmetric(n, seed);
            let full = symmetric_eigen(&a).unwrap();
            let k = n.min(5);
            let low = symmetric_eigen_lowest(&a, k).unwrap();
            for j in 0..k {
                assert!((low.values[j] - full.values[j]).abs() < 1e-10);
                assert!(dot(&low.vector(j), &full.vector(j)).abs() > 1.0 - 1e-8);
            }
        }
        // a disconnected path pair has a repeated zero eigenvalue
        let mut t = Vec::new();
        for (a, b) in [(0, 1), (1, 2), (3, 4), (4, 5)] {
            t.extend([(a, a, 1.0), (b, b, 1.0), (a, b, -1.0), (b, a, -1.0)]);
        }
        let l = SparseMatrix::from_triplets(6, 6, &t).unwrap().to_dense();
        let low = symmetric_eigen_lowest(&l, 3).unwrap();
        assert!(low.values[0].abs() < 1e-12 && low.values[1].abs() < 1e-12);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&low.vector(i), &low.vector(j)) - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let n = 150;
        let l = path_laplacian(n);
        let dense = symmetric_eigen(&l.to_dense()).unwrap();
        let lz = lanczos_lowest(&l, 4, 1e-10).unwrap();
        for j in 0..4 {
            assert!((lz.values[j] - dense.values[j]).abs() < 1e-8);
            let v = lz.vectors.column(j);
            let lv = l.mul_vec(&v);
            let r: f64 = lv.iter().zip(&v).map(|(x, y)| (x - lz.values[j] * y).powi(2)).sum();
            assert!(r.sqrt() < 1e-7);
        }
        assert!(lanczos_lowest(&l, 0, 1e-8).is_err());
    }
}
