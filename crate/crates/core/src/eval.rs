//! Clustering accuracy under the best one-to-one cluster-to-class matching.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Maximum-weight perfect matching on a square matrix. Returns, for every
/// row, the column assigned to it.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> Vec<usize> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let top = weights.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    // minimise top - w with the potentials form of the Hungarian method
    let cost = |i: usize, j: usize| top - weights[i][j];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    let dense = labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(*l).or_insert(next)
        })
        .collect();
    (dense, ids.len())
}

/// Square confusion matrix (zero-padded) with `pred` clusters as rows.
pub fn confusion_matrix(pred: &[usize], reference: &[usize]) -> Result<Vec<Vec<usize>>> {
    if pred.len() != reference.len() {
        return Err(Error::DimensionMismatch { expected: reference.len(), found: pred.len() });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (p, kp) = compact(pred);
    let (r, kr) = compact(reference);
    let k = kp.max(kr);
    let mut m = vec![vec![0usize; k]; k];
    for (a, b) in p.iter().zip(&r) {
        m[*a][*b] += 1;
    }
    Ok(m)
}

/// Fraction of points whose cluster maps onto their reference class under
/// the optimal matching. Label values are arbitrary; cluster counts may differ.
pub fn hungarian_accuracy(pred: &[usize], reference: &[usize]) -> Result<f64> {
    let m = confusion_matrix(pred, reference)?;
    let w: Vec<Vec<f64>> = m.iter().map(|row| row.iter().map(|&c| c as f64).collect()).collect();
    let matched: usize = max_weight_assignment(&w).iter().enumerate().map(|(i, &j)| m[i][j]).sum();
    Ok(matched as f64 / pred.len() as f64)
}
