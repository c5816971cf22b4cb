//! Per-run report: resolved configuration, sizes, stage timings and accuracy.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

/// Configuration echo with every heuristic resolved to the value used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub input: String,
    pub kind: String,
    pub graph: String,
    pub k1: Option<usize>,
    pub epsilon: Option<f64>,
    /// Bandwidth actually used; `None` for edge-list input.
    pub sigma: Option<f64>,
    pub sigma_rule: String,
    pub standardize: bool,
    pub k: usize,
    pub pipeline: String,
    pub k_rp: Option<usize>,
    pub seed: u64,
    pub tol: Option<f64>,
    pub solver_max_iter: Option<usize>,
    pub preconditioner: Option<String>,
    pub reps: usize,
    pub max_iter: usize,
    pub threads: usize,
    pub reference: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sizes {
    /// Points or nodes read from the input.
    pub n_input: usize,
    /// Nodes clustered, after keeping the largest component.
    pub n: usize,
    pub m: usize,
    pub d: Option<usize>,
    pub k: usize,
    pub k_rp: Option<usize>,
}

/// Seconds per stage.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub load: f64,
    pub graph: f64,
    /// Embedding for CESC, eigendecomposition for the exact pipeline.
    pub embedding: f64,
    pub kmeans: f64,
    pub total: f64,
    /// Exact reference clustering, outside `total`.
    pub reference: Option<f64>,
}

/// Percentages of graph + embedding + k-means time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shares {
    pub graph: f64,
    pub embedding: f64,
    pub kmeans: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub components: usize,
    pub dropped_nodes: usize,
    pub duplicate_edges: Option<usize>,
    pub kmeans_cost: f64,
    pub kmeans_iterations: usize,
    pub kmeans_replication: usize,
    pub kmeans_converged: bool,
    pub solver_max_residual: Option<f64>,
    pub solver_iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub params: ResolvedParams,
    pub sizes: Sizes,
    pub timings: Timings,
    pub shares: Shares,
    /// Agreement with exact spectral clustering on the same graph.
    pub accuracy_vs_exact: Option<f64>,
    /// Agreement with the labels shipped with the input.
    pub accuracy_vs_truth: Option<f64>,
    pub diagnostics: Diagnostics,
}

pub fn shares(graph: f64, embedding: f64, kmeans: f64) -> Shares {
    let sum = graph + embedding + kmeans;
    let pct = |x: f64| if sum > 0.0 { 100.0 * x / sum } else { 0.0 };
    Shares { graph: pct(graph), embedding: pct(embedding), kmeans: pct(kmeans) }
}

/// Monotonic stage clock. Each `lap` returns the seconds since the previous
/// one.
#[derive(Debug)]
pub struct StageClock {
    start: Instant,
    last: Instant,
}

impl StageClock {
    pub fn start() -> Self {
        let now = Instant::now();
        StageClock { start: now, last: now }
    }

    pub fn lap(&mut self) -> f64 {
        let now = Instant::now();
        let s = now.duration_since(self.last).as_secs_f64();
        self.last = now;
        s
    }

    pub fn total(&self) -> f64 {
        self.last.duration_since(self.start).as_secs_f64()
    }
}

impl Default for StageClock {
    fn default() -> Self {
        Self::start()
    }
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.params;
        let s = &self.sizes;
        let t = &self.timings;
        writeln!(f, "pipeline   {} (k = {}, seed = {})", p.pipeline, p.k, p.seed)?;
        write!(f, "graph      {}", p.graph)?;
        if let Some(k1) = p.k1 {
            write!(f, " k1 = {k1}")?;
        }
        if let Some(e) = p.epsilon {
            write!(f, " epsilon = {e}")?;
        }
        if let Some(sigma) = p.sigma {
            write!(f, ", sigma = {sigma:.6} ({})", p.sigma_rule)?;
        }
        writeln!(f)?;
        write!(f, "sizes      n = {} of {}, m = {}", s.n, s.n_input, s.m)?;
        if let Some(d) = s.d {
            write!(f, ", d = {d}")?;
        }
        if let Some(k_rp) = s.k_rp {
            write!(f, ", k_RP = {k_rp}")?;
        }
        writeln!(f)?;
        writeln!(
            f,
            "time       graph {:.3}s ({:.1}%)  embedding {:.3}s ({:.1}%)  k-means {:.3}s ({:.1}%)  total {:.3}s",
            t.graph, self.shares.graph, t.embedding, self.shares.embedding, t.kmeans, self.shares.kmeans, t.total
        )?;
        if let Some(r) = t.reference {
            writeln!(f, "reference  {:.3}s", r)?;
        }
        if let Some(a) = self.accuracy_vs_exact {
            writeln!(f, "accuracy   {a:.4} vs exact spectral clustering")?;
        }
        if let Some(a) = self.accuracy_vs_truth {
            writeln!(f, "accuracy   {a:.4} vs ground truth")?;
        }
        let d = &self.diagnostics;
        write!(
            f,
            "k-means    cost {:.6e}, {} iterations, replication {}{}",
            d.kmeans_cost,
            d.kmeans_iterations,
            d.kmeans_replication,
            if d.kmeans_converged { "" } else { " (not converged)" }
        )?;
        if let (Some(r), Some(it)) = (d.solver_max_residual, d.solver_iterations) {
            write!(f, "\nsolver     max residual {r:.2e}, {it} CG iterations")?;
        }
        if d.dropped_nodes > 0 {
            write!(f, "\nwarning    {} nodes outside the largest of {} components were left unlabelled", d.dropped_nodes, d.components)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn share_arithmetic() {
        assert_eq!(shares(2.0, 1.0, 1.0), Shares { graph: 50.0, embedding: 25.0, kmeans: 25.0 });
        assert_eq!(shares(0.0, 0.0, 0.0), Shares { graph: 0.0, embedding: 0.0, kmeans: 0.0 });
        assert_eq!(shares(1.0, 0.0, 3.0).embedding, 0.0);
    }

    #[test]
    fn clock_laps_never_exceed_total() {
        let mut c = StageClock::start();
        let laps: f64 = (0..5).map(|_| c.lap()).sum();
        assert!(laps >= 0.0 && laps <= c.total() + 1e-12);
    }
}
