//! Lloyd's k-means with k-means++ (or uniform) seeding and replications.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::{sq_dist, DenseMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_REPLICATIONS: usize = 5;
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Init {
    #[default]
    PlusPlus,
    /// `k` distinct points chosen uniformly.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansConfig {
    pub k: usize,
    pub replications: usize,
    pub max_iter: usize,
    pub seed: u64,
    pub init: Init,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        KMeansConfig { k, replications: DEFAULT_REPLICATIONS, max_iter: DEFAULT_MAX_ITER, seed: 0, init: Init::PlusPlus }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        KMeansConfig { seed, ..self }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.replications == 0 || self.max_iter == 0 {
            return Err(Error::InvalidParameter(alloc::format!(
                "k, replications and max_iter must be at least 1 (got {}, {}, {})",
                self.k,
                self.replications,
                self.max_iter
            )));
        }
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if self.k > n {
            return Err(Error::TooManyClusters { k: self.k, n });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
    /// Sum of squared distances to the assigned centroids.
    pub cost: f64,
    /// Lloyd iterations of the winning replication.
    pub iterations: usize,
    pub replication_index: usize,
    pub converged: bool,
    /// Cost after every iteration of the winning replication.
    pub cost_history: Vec<f64>,
}

impl ClusterAssignment {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

fn check_points(points: &DenseMatrix) -> Result<()> {
    for i in 0..points.rows() {
        if let Some(j) = points.row(i).iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: j });
        }
    }
    Ok(())
}

/// Best of `cfg.replications` runs by cost (earlier replication on ties).
pub fn kmeans_cluster(points: &DenseMatrix, cfg: &KMeansConfig) -> Result<ClusterAssignment> {
    cfg.validate(points.rows())?;
    check_points(points)?;
    let runs = (0..cfg.replications).map(|rep| run_replication(points, cfg, rep)).collect();
    Ok(best_of(runs))
}

/// A single replication; replication `rep` draws from its own stream of the
/// configured seed, so replications can run in any order.
pub fn kmeans_replication(points: &DenseMatrix, cfg: &KMeansConfig, rep: usize) -> Result<ClusterAssignment> {
    cfg.validate(points.rows())?;
    check_points(points)?;
    Ok(run_replication(points, cfg, rep))
}

/// Lowest-cost run, earlier index first on ties.
///
/// # Panics
/// If `runs` is empty.
pub fn best_of(runs: Vec<ClusterAssignment>) -> ClusterAssignment {
    runs.into_iter()
        .reduce(|best, r| if r.cost < best.cost { r } else { best })
        .expect("at least one replication")
}

/// k-means++ seeding as used by replication 0 of `seed`. Returns the indices
/// of the chosen points.
pub fn plusplus_init(points: &DenseMatrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    KMeansConfig::new(k).validate(points.rows())?;
    Ok(choose_plusplus(points, k, &mut replication_rng(seed, 0)))
}

// Greedy k-means++: each step draws `2 + ln k` candidates with probability
// proportional to D^2 and keeps the one leaving the smallest potential.
fn choose_plusplus(points: &DenseMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.rows();
    let trials = 2 + libm::log(k as f64) as usize;
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut d2: Vec<f64> = (0..n).map(|i| points.row_sq_dist(i, first)).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            // only duplicates of chosen centres remain
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            let pick = free[rng.random_range(0..free.len())];
            chosen.push(pick);
            taken[pick] = true;
            continue;
        }
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            let cand = sample_weighted(&d2, rng.random::<f64>() * total);
            let next: Vec<f64> = d2.iter().enumerate().map(|(i, &d)| d.min(points.row_sq_dist(i, cand))).collect();
            let potential: f64 = next.iter().sum();
            if best.as_ref().is_none_or(|b| potential < b.0) {
                best = Some((potential, cand, next));
            }
        }
        let (_, pick, next) = best.expect("at least one trial");
        chosen.push(pick);
        taken[pick] = true;
        d2 = next;
    }
    chosen
}

// Index whose cumulative positive weight first exceeds `u`.
fn sample_weighted(w: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &x) in w.iter().enumerate() {
        if x > 0.0 {
            acc += x;
            last_positive = i;
            if acc > u {
                return i;
            }
        }
    }
    last_positive
}

fn run_replication(points: &DenseMatrix, cfg: &KMeansConfig, rep: usize) -> ClusterAssignment {
    let mut rng = replication_rng(cfg.seed, rep);
    let (n, d, k) = (points.rows(), points.cols(), cfg.k);
    let seeds = match cfg.init {
        Init::PlusPlus => choose_plusplus(points, k, &mut rng),
        Init::Sample => index::sample(&mut rng, n, k).into_vec(),
    };
    let mut centroids = DenseMatrix::zeros(k, d);
    for (c, &i) in seeds.iter().enumerate() {
        centroids.row_mut(c).copy_from_slice(points.row(i));
    }
    let mut labels = vec![0; n];
    assign(points, &centroids, &mut labels);
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        repair_empty(points, &mut centroids, &mut labels);
        update_centroids(points, &labels, &mut centroids);
        history.push(cost(points, &centroids, &labels));
        if iterations == cfg.max_iter {
            break;
        }
        iterations += 1;
        let changed = assign(points, &centroids, &mut labels);
        if !changed {
            converged = true;
            break;
        }
    }
    ClusterAssignment {
        labels,
        k,
        cost: *history.last().expect("at least one cost"),
        iterations,
        replication_index: rep,
        converged,
        cost_history: history,
    }
}

// Nearest centroid per point, lower id on ties. Returns whether any label changed.
fn assign(points: &DenseMatrix, centroids: &DenseMatrix, labels: &mut [usize]) -> bool {
    let mut changed = false;
    for (i, label) in labels.iter_mut().enumerate() {
        let p = points.row(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..centroids.rows() {
            let dist = sq_dist(p, centroids.row(c));
            if dist < best_d {
                best_d = dist;
                best = c;
            }
        }
        if *label != best {
            *label = best;
            changed = true;
        }
    }
    changed
}

// Each empty cluster takes the point farthest from its current centroid
// among clusters that can spare one.
fn repair_empty(points: &DenseMatrix, centroids: &mut DenseMatrix, labels: &mut [usize]) {
    let k = centroids.rows();
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &l) in labels.iter().enumerate() {
            if sizes[l] < 2 {
                continue;
            }
            let dist = sq_dist(points.row(i), centroids.row(l));
            if dist > far_d {
                far_d = dist;
                far = Some(i);
            }
        }
        let Some(i) = far else { return };
        sizes[labels[i]] -= 1;
        sizes[c] = 1;
        labels[i] = c;
        centroids.row_mut(c).copy_from_slice(points.row(i));
    }
}

fn update_centroids(points: &DenseMatrix, labels: &[usize], centroids: &mut DenseMatrix) {
    let k = centroids.rows();
    let mut counts = vec![0usize; k];
    let mut sums = DenseMatrix::zeros(k, points.cols());
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, v) in sums.row_mut(l).iter_mut().zip(points.row(i)) {
            *s += v;
        }
    }
    for c in 0..k {
        if counts[c] == 0 {
            continue;
        }
        let inv = counts[c] as f64;
        for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
            *dst = s / inv;
        }
    }
}

fn cost(points: &DenseMatrix, centroids: &DenseMatrix, labels: &[usize]) -> f64 {
    labels.iter().enumerate().map(|(i, &l)| sq_dist(points.row(i), centroids.row(l))).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::hungarian_accuracy;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(per: usize, centres: &[(f64, f64)], sd: f64, seed: u64) -> (DenseMatrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (c, &(x, y)) in centres.iter().enumerate() {
            for _ in 0..per {
                let dx: f64 = StandardNormal.sample(&mut rng);
                let dy: f64 = StandardNormal.sample(&mut rng);
                rows.push(vec![x + sd * dx, y + sd * dy]);
                truth.push(c);
            }
        }
        (DenseMatrix::from_rows(&rows).unwrap(), truth)
    }

    fn random_points(n: usize, d: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_vec(n, d, (0..n * d).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap()
    }

    #[test]
    fn k_equals_n_is_zero_cost() {
        let p = random_points(12, 3, 1);
        let a = kmeans_cluster(&p, &KMeansConfig::new(12)).unwrap();
        assert_eq!(a.cost, 0.0);
        let mut l = a.labels.clone();
        l.sort_unstable();
        assert_eq!(l, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let p = random_points(40, 2, 2);
        let a = kmeans_cluster(&p, &KMeansConfig::new(1)).unwrap();
        assert!(a.labels.iter().all(|&l| l == 0));
        let mean: Vec<f64> = (0..2).map(|j| p.column(j).iter().sum::<f64>() / 40.0).collect();
        let total: f64 = (0..40).map(|i| sq_dist(p.row(i), &mean)).sum();
        assert!((a.cost - total).abs() <= 1e-10 * total);
    }

    #[test]
    fn separated_blobs_recovered_for_all_seeds() {
        // separation 20 standard deviations
        let (p, truth) = blobs(100, &[(0.0, 0.0), (20.0, 0.0), (10.0, 17.3)], 1.0, 3);
        for seed in 0..10 {
            let a = kmeans_cluster(&p, &KMeansConfig::new(3).with_seed(seed)).unwrap();
            assert_eq!(hungarian_accuracy(&a.labels, &truth).unwrap(), 1.0);
        }
    }

    #[test]
    fn errors() {
        let p = random_points(3, 2, 0);
        assert_eq!(kmeans_cluster(&p, &KMeansConfig::new(4)).unwrap_err(), Error::TooManyClusters { k: 4, n: 3 });
        assert!(kmeans_cluster(&p, &KMeansConfig::new(0)).is_err());
        let mut bad = p.clone();
        bad[(1, 1)] = f64::NAN;
        assert_eq!(kmeans_cluster(&bad, &KMeansConfig::new(1)).unwrap_err(), Error::NonFinite { row: 1, col: 1 });
    }

    #[test]
    fn plusplus_avoids_duplicates() {
        let mut rows = vec![vec![0.0, 0.0]; 20];
        rows.extend(vec![vec![1.0, 1.0]; 20]);
        rows.push(vec![5.0, 5.0]);
        let p = DenseMatrix::from_rows(&rows).unwrap();
        for seed in 0..50 {
            let c = plusplus_init(&p, 3, seed).unwrap();
            let mut pts: Vec<Vec<f64>> = c.iter().map(|&i| p.row(i).to_vec()).collect();
            pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
            pts.dedup();
            assert_eq!(pts.len(), 3);
            assert_eq!(c, plusplus_init(&p, 3, seed).unwrap());
        }
        // more centres than distinct points falls back to unchosen duplicates
        let c = plusplus_init(&p, 5, 1).unwrap();
        let mut sorted = c.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 5);
    }

    #[test]
    fn empty_clusters_are_repaired() {
        // uniform init may pick duplicates, leaving a cluster empty
        let mut rows = vec![vec![0.0]; 10];
        rows.push(vec![10.0]);
        rows.push(vec![11.0]);
        let p = DenseMatrix::from_rows(&rows).unwrap();
        for seed in 0..20 {
            let cfg = KMeansConfig { init: Init::Sample, ..KMeansConfig::new(3).with_seed(seed) };
            let a = kmeans_cluster(&p, &cfg).unwrap();
            assert!(a.cluster_sizes().iter().all(|&s| s > 0));
        }
    }

    #[test]
    fn permuted_input_gives_same_partition() {
        let (p, _) = blobs(60, &[(0.0, 0.0), (15.0, 0.0), (0.0, 15.0), (15.0, 15.0)], 1.0, 8);
        let n = p.rows();
        let perm: Vec<usize> = (0..n).map(|i| (i * 37) % n).collect();
        let rows: Vec<Vec<f64>> = perm.iter().map(|&i| p.row(i).to_vec()).collect();
        let q = DenseMatrix::from_rows(&rows).unwrap();
        let a = kmeans_cluster(&p, &KMeansConfig::new(4).with_seed(5)).unwrap();
        let b = kmeans_cluster(&q, &KMeansConfig::new(4).with_seed(5)).unwrap();
        let mut back = vec![0; n];
        for (pos, &i) in perm.iter().enumerate() {
            back[i] = b.labels[pos];
        }
        assert_eq!(hungarian_accuracy(&a.labels, &back).unwrap(), 1.0);
    }

    #[test]
    fn max_iter_caps_the_run() {
        let p = random_points(300, 2, 4);
        let cfg = KMeansConfig { max_iter: 1, replications: 1, ..KMeansConfig::new(8) };
        let a = kmeans_cluster(&p, &cfg).unwrap();
        assert!(a.iterations <= 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn cost_never_increases(seed in 0u64..1000, k in 1usize..7) {
            let p = random_points(80, 3, seed);
            let cfg = KMeansConfig::new(k).with_seed(seed);
            for rep in 0..3 {
                let a = kmeans_replication(&p, &cfg, rep).unwrap();
                for w in a.cost_history.windows(2) {
                    prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
                }
                prop_assert!(a.labels.iter().all(|&l| l < k));
            }
        }

        #[test]
        fn scaling_scales_cost_only(seed in 0u64..1000, k in 1usize..6, e in -4i32..5) {
            let p = random_points(60, 2, seed);
            let c = libm::pow(2.0, e as f64);
            let mut q = p.clone();
            q.scale(c);
            let cfg = KMeansConfig::new(k).with_seed(seed);
            let a = kmeans_cluster(&p, &cfg).unwrap();
            let b = kmeans_cluster(&q, &cfg).unwrap();
            prop_assert_eq!(&a.labels, &b.labels);
            prop_assert!((b.cost - c * c * a.cost).abs() <= 1e-12 * b.cost.max(1e-300));
        }

        #[test]
        fn best_replication_has_minimum_cost(seed in 0u64..1000) {
            let p = random_points(50, 2, seed);
            let cfg = KMeansConfig::new(4).with_seed(seed);
            let best = kmeans_cluster(&p, &cfg).unwrap();
            for rep in 0..cfg.replications {
                prop_assert!(best.cost <= kmeans_replication(&p, &cfg, rep).unwrap().cost);
            }
        }
    }
}
