//! End-to-end clustering runs: ingest, graph, embedding or eigenvectors,
//! k-means and evaluation.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context};

use cesc_core::ctembed::{EmbeddingConfig, Preconditioner, SolverReport, DEFAULT_KRP, DEFAULT_TOL};
use cesc_core::kmeans::{DEFAULT_MAX_ITER, DEFAULT_REPLICATIONS};
use cesc_core::simgraph::{connected_components, NodeMap};
use cesc_core::{
    edge_graph, hungarian_accuracy, largest_component, standardize, synth_shapes, Bandwidth, ClusterAssignment,
    Embedding, FeatureMatrix, GraphMode, KMeansConfig, ShapeKind, SimilarityGraph, SpectralVariant,
};

use crate::io::{self, Header, LabelColumn};
use crate::parallel;
use crate::report::{shares, Diagnostics, ResolvedParams, RunReport, Sizes, StageClock, Timings};

pub const DEFAULT_K1: usize = 10;
pub const DEFAULT_SYNTH_N: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputKind {
    /// Synthetic two moons without a path, otherwise sniffed from the file.
    Auto,
    Csv,
    EdgeList,
    Synth(ShapeKind),
}

impl FromStr for InputKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "auto" => Ok(InputKind::Auto),
            "csv" => Ok(InputKind::Csv),
            "edgelist" | "edges" => Ok(InputKind::EdgeList),
            other => match other.strip_prefix("synth:") {
                Some(shape) => shape.parse().map(InputKind::Synth).map_err(|e: cesc_core::Error| e.to_string()),
                None => Err(format!("input kind must be csv, edgelist or synth:<shape>, got `{other}`")),
            },
        }
    }
}

impl std::fmt::Display for InputKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InputKind::Auto => f.write_str("auto"),
            InputKind::Csv => f.write_str("csv"),
            InputKind::EdgeList => f.write_str("edgelist"),
            InputKind::Synth(s) => write!(f, "synth:{s}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    Cesc,
    Exact(SpectralVariant),
}

impl FromStr for Pipeline {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "cesc" => Ok(Pipeline::Cesc),
            "exact" => Ok(Pipeline::Exact(SpectralVariant::default())),
            other => match other.strip_prefix("exact:") {
                Some(v) => v.parse().map(Pipeline::Exact).map_err(|e: cesc_core::Error| e.to_string()),
                None => Err(format!("pipeline must be cesc or exact:<variant>, got `{other}`")),
            },
        }
    }
}

impl std::fmt::Display for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Pipeline::Cesc => f.write_str("cesc"),
            Pipeline::Exact(v) => write!(f, "exact:{v}"),
        }
    }
}

/// Jitter used when none is given.
pub fn default_noise(shape: ShapeKind) -> f64 {
    match shape {
        ShapeKind::TwoMoons => 0.1,
        ShapeKind::Blobs { .. } => 1.0,
        ShapeKind::TextMask => 0.35,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputSpec {
    pub kind: InputKind,
    pub path: Option<PathBuf>,
    pub header: Header,
    pub label_column: LabelColumn,
    /// Synthetic inputs only.
    pub n: usize,
    pub noise: Option<f64>,
    /// Seed of the synthetic generator; the run seed when `None`.
    pub data_seed: Option<u64>,
}

impl Default for InputSpec {
    fn default() -> Self {
        InputSpec {
            kind: InputKind::Auto,
            path: None,
            header: Header::Auto,
            label_column: LabelColumn::Auto,
            n: DEFAULT_SYNTH_N,
            noise: None,
            data_seed: None,
        }
    }
}

impl InputSpec {
    pub fn synth(shape: ShapeKind, n: usize, noise: f64, data_seed: u64) -> Self {
        InputSpec {
            kind: InputKind::Synth(shape),
            n,
            noise: Some(noise),
            data_seed: Some(data_seed),
            ..Default::default()
        }
    }

    /// Kind with `Auto` resolved.
    pub fn resolved_kind(&self) -> anyhow::Result<InputKind> {
        if self.kind != InputKind::Auto {
            return Ok(self.kind);
        }
        let Some(path) = &self.path else {
            return Ok(InputKind::Synth(ShapeKind::TwoMoons));
        };
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            return Ok(InputKind::Csv);
        }
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        for line in BufReader::new(file).lines() {
            let line = line?;
            let body = line.split('#').next().unwrap_or("").trim();
            if !body.is_empty() {
                return Ok(if body.contains(',') { InputKind::Csv } else { InputKind::EdgeList });
            }
        }
        bail!("{}: file is empty", path.display())
    }

    fn describe(&self) -> String {
        match &self.path {
            Some(p) => p.display().to_string(),
            None => format!("n = {}", self.n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: InputSpec,
    pub graph: GraphMode,
    pub sigma: Bandwidth,
    pub standardize: bool,
    /// Cluster count; taken from the labels or the synthetic shape when
    /// `None`, else 2.
    pub k: Option<usize>,
    pub k_rp: usize,
    pub seed: u64,
    pub tol: f64,
    pub solver_max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
    pub reps: usize,
    pub max_iter: usize,
    pub pipeline: Pipeline,
    /// Variant of the exact reference used by `compare_exact`.
    pub variant: SpectralVariant,
    pub compare_exact: bool,
    /// Worker threads, 0 for one per core.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: InputSpec::default(),
            graph: GraphMode::Knn(DEFAULT_K1),
            sigma: Bandwidth::Median,
            standardize: false,
            k: None,
            k_rp: DEFAULT_KRP,
            seed: 0,
            tol: DEFAULT_TOL,
            solver_max_iter: None,
            preconditioner: Preconditioner::default(),
            reps: DEFAULT_REPLICATIONS,
            max_iter: DEFAULT_MAX_ITER,
            pipeline: Pipeline::Cesc,
            variant: SpectralVariant::default(),
            compare_exact: false,
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn embedding_config(&self) -> EmbeddingConfig {
        EmbeddingConfig {
            k_rp: self.k_rp,
            seed: self.seed,
            tol: self.tol,
            max_iter: self.solver_max_iter,
            preconditioner: self.preconditioner,
        }
    }

    pub fn kmeans_config(&self, k: usize) -> KMeansConfig {
        KMeansConfig { k, replications: self.reps, max_iter: self.max_iter, ..KMeansConfig::new(k) }.with_seed(self.seed)
    }
}

/// Graph ready for clustering, restricted to its largest component.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub kind: InputKind,
    pub graph: SimilarityGraph,
    pub map: NodeMap,
    pub n_input: usize,
    pub d: Option<usize>,
    /// Reference labels of the kept nodes.
    pub truth: Option<Vec<usize>>,
    /// Cluster count implied by the input, if any.
    pub implied_k: Option<usize>,
    pub components: usize,
    pub duplicates: Option<usize>,
    /// Source id of every input node.
    pub external_ids: Vec<u64>,
    pub load_time: f64,
    pub graph_time: f64,
}

impl Prepared {
    pub fn k(&self, requested: Option<usize>) -> usize {
        requested.or(self.implied_k).unwrap_or(2)
    }
}

fn load_features(cfg: &RunConfig, kind: InputKind) -> anyhow::Result<FeatureMatrix> {
    let x = match kind {
        InputKind::Csv => {
            let path = cfg.input.path.as_ref().context("csv input needs --input")?;
            io::load_features(path, cfg.input.header, cfg.input.label_column)?.features
        }
        InputKind::Synth(shape) => {
            let noise = cfg.input.noise.unwrap_or_else(|| default_noise(shape));
            synth_shapes(shape, cfg.input.n, noise, cfg.input.data_seed.unwrap_or(cfg.seed))?
        }
        _ => unreachable!("not a feature input"),
    };
    Ok(if cfg.standardize { standardize(&x)? } else { x })
}

/// Loads the input, builds the graph and keeps its largest component.
pub fn prepare(cfg: &RunConfig) -> anyhow::Result<Prepared> {
    let kind = cfg.input.resolved_kind()?;
    let mut clock = StageClock::start();
    let (graph, n_input, d, labels, implied_k, duplicates, external_ids, load_time) = match kind {
        InputKind::EdgeList => {
            let path = cfg.input.path.as_ref().context("edge-list input needs --input")?;
            let e = io::load_edge_list(path)?;
            let load = clock.lap();
            let g = edge_graph(&e)?;
            (g, e.node_count, None, None, None, Some(e.duplicates), e.external_ids, load)
        }
        _ => {
            let x = load_features(cfg, kind)?;
            let load = clock.lap();
            let implied = match kind {
                InputKind::Synth(shape) => Some(shape.cluster_count()),
                _ => x.labels().map(|l| l.iter().max().map_or(0, |m| m + 1)),
            };
            let g = parallel::build_graph(&x, cfg.graph, cfg.sigma)?;
            let labels = x.labels().map(<[usize]>::to_vec);
            (g, x.n(), Some(x.d()), labels, implied, None, (0..x.n() as u64).collect(), load)
        }
    };
    let (components, _) = connected_components(&graph);
    let (graph, map) = largest_component(&graph);
    let graph_time = clock.lap();
    let truth = labels.map(|l| map.new_to_old.iter().map(|&o| l[o]).collect());
    Ok(Prepared {
        kind,
        graph,
        map,
        n_input,
        d,
        truth,
        implied_k,
        components,
        duplicates,
        external_ids,
        load_time,
        graph_time,
    })
}

/// CESC clustering of a prepared graph.
pub struct CescRun {
    pub assignment: ClusterAssignment,
    pub embedding: Embedding,
    pub solver: SolverReport,
    pub embed_time: f64,
    pub kmeans_time: f64,
}

pub fn run_cesc(prep: &Prepared, cfg: &RunConfig, k: usize) -> anyhow::Result<CescRun> {
    let mut clock = StageClock::start();
    let (embedding, solver) = parallel::build_embedding(&prep.graph, &cfg.embedding_config())?;
    let embed_time = clock.lap();
    let assignment = parallel::kmeans(&embedding.coords, &cfg.kmeans_config(k))?;
    let kmeans_time = clock.lap();
    Ok(CescRun { assignment, embedding, solver, embed_time, kmeans_time })
}

/// Exact spectral clustering; returns the assignment with eigen and k-means
/// seconds.
pub fn run_exact(
    prep: &Prepared,
    variant: SpectralVariant,
    kcfg: &KMeansConfig,
) -> anyhow::Result<(ClusterAssignment, f64, f64)> {
    let mut clock = StageClock::start();
    let u = cesc_core::exactspec::spectral_embedding(&prep.graph, kcfg.k, variant)?;
    let eigen_time = clock.lap();
    let a = parallel::kmeans(&u, kcfg)?;
    Ok((a, eigen_time, clock.lap()))
}

pub struct RunOutcome {
    pub report: RunReport,
    /// One label per input node, `-1` for nodes outside the kept component.
    pub labels: Vec<i64>,
    pub prepared: Prepared,
    pub embedding: Option<Embedding>,
}

/// Full clustering run. Call inside a thread pool to bound parallelism.
pub fn run_cluster(cfg: &RunConfig) -> anyhow::Result<RunOutcome> {
    let prep = prepare(cfg)?;
    let k = prep.k(cfg.k);
    let kcfg = cfg.kmeans_config(k);
    let (assignment, embedding, solver, embed_time, kmeans_time) = match cfg.pipeline {
        Pipeline::Cesc => {
            let r = run_cesc(&prep, cfg, k)?;
            (r.assignment, Some(r.embedding), Some(r.solver), r.embed_time, r.kmeans_time)
        }
        Pipeline::Exact(v) => {
            let (a, e, km) = run_exact(&prep, v, &kcfg)?;
            (a, None, None, e, km)
        }
    };
    let mut reference_time = None;
    let mut accuracy_vs_exact = None;
    if cfg.compare_exact {
        let reference = match cfg.pipeline {
            Pipeline::Exact(v) if v == cfg.variant => assignment.labels.clone(),
            _ => {
                let (a, e, km) = run_exact(&prep, cfg.variant, &kcfg)?;
                reference_time = Some(e + km);
                a.labels
            }
        };
        accuracy_vs_exact = Some(hungarian_accuracy(&assignment.labels, &reference)?);
    }
    let accuracy_vs_truth = match &prep.truth {
        Some(t) => Some(hungarian_accuracy(&assignment.labels, t)?),
        None => None,
    };

    let mut labels = vec![-1i64; prep.n_input];
    for (new, &old) in prep.map.new_to_old.iter().enumerate() {
        labels[old] = assignment.labels[new] as i64;
    }

    let meta = prep.graph.meta();
    let (graph_name, k1, epsilon) = match (prep.kind, cfg.graph) {
        (InputKind::EdgeList, _) => ("edgelist".to_string(), None, None),
        (_, GraphMode::Knn(k1)) => ("knn".to_string(), Some(k1), None),
        (_, GraphMode::Epsilon(e)) => ("epsilon".to_string(), None, Some(e)),
        (_, GraphMode::Full) => ("full".to_string(), None, None),
    };
    let cesc = cfg.pipeline == Pipeline::Cesc;
    let params = ResolvedParams {
        input: cfg.input.describe(),
        kind: prep.kind.to_string(),
        graph: graph_name,
        k1,
        epsilon,
        sigma: meta.map(|m| m.sigma),
        sigma_rule: match (meta, cfg.sigma) {
            (None, _) => "none".to_string(),
            (_, Bandwidth::Median) => "median".to_string(),
            (_, Bandwidth::Fixed(_)) => "fixed".to_string(),
        },
        standardize: cfg.standardize,
        k,
        pipeline: cfg.pipeline.to_string(),
        k_rp: cesc.then_some(cfg.k_rp),
        seed: cfg.seed,
        tol: cesc.then_some(cfg.tol),
        solver_max_iter: solver.as_ref().map(|s| s.max_iter),
        preconditioner: cesc.then(|| format!("{:?}", cfg.preconditioner).to_lowercase()),
        reps: cfg.reps,
        max_iter: cfg.max_iter,
        threads: rayon::current_num_threads(),
        reference: cfg.compare_exact.then(|| format!("exact:{}", cfg.variant)),
    };
    let sizes = Sizes {
        n_input: prep.n_input,
        n: prep.graph.n(),
        m: prep.graph.edge_count(),
        d: prep.d,
        k,
        k_rp: cesc.then_some(cfg.k_rp),
    };
    let timings = Timings {
        load: prep.load_time,
        graph: prep.graph_time,
        embedding: embed_time,
        kmeans: kmeans_time,
        total: prep.load_time + prep.graph_time + embed_time + kmeans_time,
        reference: reference_time,
    };
    let diagnostics = Diagnostics {
        components: prep.components,
        dropped_nodes: prep.n_input - prep.graph.n(),
        duplicate_edges: prep.duplicates,
        kmeans_cost: assignment.cost,
        kmeans_iterations: assignment.iterations,
        kmeans_replication: assignment.replication_index,
        kmeans_converged: assignment.converged,
        solver_max_residual: solver.as_ref().map(SolverReport::max_residual),
        solver_iterations: solver.as_ref().map(SolverReport::total_iterations),
    };
    let report = RunReport {
        params,
        sizes,
        shares: shares(timings.graph, timings.embedding, timings.kmeans),
        timings,
        accuracy_vs_exact,
        accuracy_vs_truth,
        diagnostics,
    };
    Ok(RunOutcome { report, labels, prepared: prep, embedding })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_kinds_and_pipelines() {
        assert_eq!("synth:text_mask".parse::<InputKind>().unwrap(), InputKind::Synth(ShapeKind::TextMask));
        assert_eq!("edgelist".parse::<InputKind>().unwrap(), InputKind::EdgeList);
        assert!("synth:spiral".parse::<InputKind>().is_err());
        assert_eq!("exact:shi_malik".parse::<Pipeline>().unwrap(), Pipeline::Exact(SpectralVariant::ShiMalik));
        assert_eq!("exact".parse::<Pipeline>().unwrap(), Pipeline::Exact(SpectralVariant::Njw));
        for p in [Pipeline::Cesc, Pipeline::Exact(SpectralVariant::Unnormalized)] {
            assert_eq!(p.to_string().parse::<Pipeline>().unwrap(), p);
        }
    }

    #[test]
    fn defaults_match_the_reference_settings() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.graph, GraphMode::Knn(10));
        assert_eq!((cfg.k_rp, cfg.reps, cfg.max_iter), (50, 5, 100));
    }

    #[test]
    fn single_cluster_run() {
        let cfg = RunConfig {
            input: InputSpec::synth(ShapeKind::TwoMoons, 200, 0.1, 1),
            k: Some(1),
            compare_exact: true,
            ..Default::default()
        };
        let out = run_cluster(&cfg).unwrap();
        assert!(out.labels.iter().all(|&l| l == 0 || l == -1));
        assert_eq!(out.report.accuracy_vs_exact, Some(1.0));
        let kept: Vec<usize> = out.labels.iter().filter(|&&l| l >= 0).map(|_| 0).collect();
        assert_eq!(hungarian_accuracy(&kept, &vec![7; kept.len()]).unwrap(), 1.0);
    }
}
