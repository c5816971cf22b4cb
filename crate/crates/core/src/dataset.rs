//! Feature matrices, edge lists, column standardisation and synthetic shape
//! generators.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// `n x d` data matrix with optional per-row class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: DenseMatrix,
    labels: Option<Vec<usize>>,
}

impl FeatureMatrix {
    pub fn new(values: DenseMatrix, labels: Option<Vec<usize>>) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::EmptyInput);
        }
        for i in 0..values.rows() {
            if let Some(j) = values.row(i).iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
        if let Some(l) = &labels {
            if l.len() != values.rows() {
                return Err(Error::DimensionMismatch { expected: values.rows(), found: l.len() });
            }
        }
        Ok(FeatureMatrix { values, labels })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn d(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }
}

/// Rescales every column to sample mean 0 and sample standard deviation 1
/// (divisor `n - 1`). Zero-variance columns become all zeros.
pub fn standardize(x: &FeatureMatrix) -> Result<FeatureMatrix> {
    let (n, d) = (x.n(), x.d());
    if n < 2 {
        return Err(Error::InvalidParameter("standardize needs at least two rows".to_string()));
    }
    let mut out = x.values.clone();
    for j in 0..d {
        let mean = (0..n).map(|i| out[(i, j)]).sum::<f64>() / n as f64;
        for i in 0..n {
            out[(i, j)] -= mean;
        }
        // second pass removes the rounding left over from the first mean
        let resid = (0..n).map(|i| out[(i, j)]).sum::<f64>() / n as f64;
        for i in 0..n {
            out[(i, j)] -= resid;
        }
        let var = (0..n).map(|i| out[(i, j)] * out[(i, j)]).sum::<f64>() / (n - 1) as f64;
        let sd = libm::sqrt(var);
        if sd > 0.0 && sd.is_finite() {
            for i in 0..n {
                out[(i, j)] /= sd;
            }
        } else {
            for i in 0..n {
                out[(i, j)] = 0.0;
            }
        }
    }
    FeatureMatrix::new(out, x.labels.clone())
}

/// One undirected weighted edge between dense node ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

/// Undirected edge list over dense ids `0..node_count`. `external_ids[i]` is
/// the id node `i` carried in the source.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub edges: Vec<Edge>,
    pub node_count: usize,
    pub external_ids: Vec<u64>,
    /// Number of repeated undirected pairs that were dropped.
    pub duplicates: usize,
}

impl EdgeList {
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
}

/// Accumulates raw `(u, v, w)` records, remapping ids densely in order of
/// first appearance and keeping the first weight seen for a repeated pair.
#[derive(Debug, Default)]
pub struct EdgeListBuilder {
    ids: BTreeMap<u64, usize>,
    external: Vec<u64>,
    seen: BTreeSet<(usize, usize)>,
    edges: Vec<Edge>,
    duplicates: usize,
    records: usize,
}

impl EdgeListBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern(&mut self, id: u64) -> usize {
        let next = self.external.len();
        *self.ids.entry(id).or_insert_with(|| {
            self.external.push(id);
            next
        })
    }

    /// Adds one record. Returns `Ok(false)` when the pair was already present.
    pub fn push(&mut self, u: u64, v: u64, w: f64) -> Result<bool> {
        let index = self.records;
        self.records += 1;
        if u == v {
            return Err(Error::SelfLoop { index, node: u });
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidWeight { index, weight: w });
        }
        let a = self.intern(u);
        let b = self.intern(v);
        if !self.seen.insert((a.min(b), a.max(b))) {
            self.duplicates += 1;
            return Ok(false);
        }
        self.edges.push(Edge { u: a, v: b, w });
        Ok(true)
    }

    pub fn finish(self) -> Result<EdgeList> {
        if self.edges.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(EdgeList {
            edges: self.edges,
            node_count: self.external.len(),
            external_ids: self.external,
            duplicates: self.duplicates,
        })
    }
}

/// Synthetic dataset family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    /// Two interleaved half circles.
    TwoMoons,
    /// Isotropic Gaussian blobs with centres spaced evenly on a circle of
    /// radius 10.
    Blobs { centers: usize },
    /// Ten bold glyphs spelling DATAMINING, one cluster per glyph.
    TextMask,
}

impl ShapeKind {
    pub fn cluster_count(&self) -> usize {
        match self {
            ShapeKind::TwoMoons => 2,
            ShapeKind::Blobs { centers } => *centers,
            ShapeKind::TextMask => TEXT.len(),
        }
    }
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "two_moons" | "moons" => Ok(ShapeKind::TwoMoons),
            "text_mask" | "text" => Ok(ShapeKind::TextMask),
            "blobs" => Ok(ShapeKind::Blobs { centers: 3 }),
            _ => match s.strip_prefix("blobs:").map(str::parse::<usize>) {
                Some(Ok(centers)) if centers >= 1 => Ok(ShapeKind::Blobs { centers }),
                _ => Err(Error::UnknownShape(String::from(s))),
            },
        }
    }
}

impl core::fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ShapeKind::TwoMoons => f.write_str("two_moons"),
            ShapeKind::Blobs { centers } => write!(f, "blobs:{centers}"),
            ShapeKind::TextMask => f.write_str("text_mask"),
        }
    }
}

const TEXT: &[u8] = b"DATAMINING";

// 5x7 bitmap font, top row first.
fn glyph_rows(c: u8) -> [&'static str; 7] {
    match c {
        b'D' => ["11110", "10001", "10001", "10001", "10001", "10001", "11110"],
        b'A' => ["01110", "10001", "10001", "11111", "10001", "10001", "10001"],
        b'T' => ["11111", "00100", "00100", "00100", "00100", "00100", "00100"],
        b'M' => ["10001", "11011", "10101", "10101", "10001", "10001", "10001"],
        b'I' => ["01110", "00100", "00100", "00100", "00100", "00100", "01110"],
        b'N' => ["10001", "11001", "10101", "10011", "10001", "10001", "10001"],
        b'G' => ["01110", "10001", "10000", "10111", "10001", "10001", "01111"],
        _ => unreachable!("glyph not in the font"),
    }
}

// Each font pixel is dilated into a BOLD x BOLD block of unit cells.
const BOLD: usize = 3;
const GLYPH_WIDTH: f64 = (5 + BOLD - 1) as f64;
const GLYPH_GAP: f64 = 1.0;

fn glyph_cells(c: u8) -> Vec<(usize, usize)> {
    let rows = glyph_rows(c);
    let height = rows.len() + BOLD - 1;
    let mut cells = BTreeSet::new();
    for (r, row) in rows.iter().enumerate() {
        for (col, bit) in row.bytes().enumerate() {
            if bit == b'1' {
                for dx in 0..BOLD {
                    for dy in 0..BOLD {
                        // flip so y grows upwards
                        cells.insert((col + dx, height - 1 - (r + dy)));
                    }
                }
            }
        }
    }
    cells.into_iter().collect()
}

/// Generates a labelled synthetic dataset. Output is a pure function of the
/// arguments. `noise` is the standard deviation of the Gaussian jitter added
/// to every coordinate.
pub fn synth_shapes(kind: ShapeKind, n: usize, noise: f64, seed: u64) -> Result<FeatureMatrix> {
    let k = kind.cluster_count();
    if k == 0 || n < 2 * k {
        return Err(Error::InvalidParameter(alloc::format!(
            "{kind} needs n >= {} points, got {n}",
            2 * k
        )));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidParameter(alloc::format!("noise must be >= 0, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    let jitter = |rng: &mut ChaCha8Rng| -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        noise * z
    };
    // points per cluster: n / k, the remainder going to the first clusters
    let share = |c: usize| n / k + usize::from(c < n % k);

    match kind {
        ShapeKind::TwoMoons => {
            for c in 0..2 {
                for _ in 0..share(c) {
                    let t = core::f64::consts::PI * rng.random::<f64>();
                    let (x, y) = if c == 0 {
                        (libm::cos(t), libm::sin(t))
                    } else {
                        (1.0 - libm::cos(t), 0.5 - libm::sin(t))
                    };
                    data.push(x + jitter(&mut rng));
                    data.push(y + jitter(&mut rng));
                    labels.push(c);
                }
            }
        }
        ShapeKind::Blobs { centers } => {
            for c in 0..centers {
                let angle = 2.0 * core::f64::consts::PI * c as f64 / centers as f64;
                let (cx, cy) = (10.0 * libm::cos(angle), 10.0 * libm::sin(angle));
                for _ in 0..share(c) {
                    data.push(cx + jitter(&mut rng));
                    data.push(cy + jitter(&mut rng));
                    labels.push(c);
                }
            }
        }
        ShapeKind::TextMask => {
            for (c, &glyph) in TEXT.iter().enumerate() {
                let cells = glyph_cells(glyph);
                let offset = c as f64 * (GLYPH_WIDTH + GLYPH_GAP);
                for _ in 0..share(c) {
                    let (cx, cy) = cells[rng.random_range(0..cells.len())];
                    let x = offset + cx as f64 + rng.random::<f64>();
                    let y = cy as f64 + rng.random::<f64>();
                    data.push(x + jitter(&mut rng));
                    data.push(y + jitter(&mut rng));
                    labels.push(c);
                }
            }
        }
    }
    FeatureMatrix::new(DenseMatrix::from_vec(n, 2, data)?, Some(labels))
}
