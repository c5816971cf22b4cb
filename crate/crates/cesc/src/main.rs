use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use cesc::io::{self, Header, LabelColumn};
use cesc::pipeline::{InputKind, InputSpec, Pipeline, RunConfig, DEFAULT_K1, DEFAULT_SYNTH_N};
use cesc::{bench, parallel, sweep};
use cesc_core::ctembed::Preconditioner;
use cesc_core::{exact_commute_embedding, hungarian_accuracy, Bandwidth, GraphMode, SpectralVariant};

#[derive(Parser)]
#[command(name = "cesc", version, about = "Spectral clustering through approximate commute-time embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster the input and write one label per point.
    Cluster {
        #[command(flatten)]
        run: RunArgs,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Accuracy against exact spectral clustering for several k_RP values.
    SweepKrp {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "10,25,50,100,200")]
        krp_list: Vec<usize>,
        /// Seeds per k_RP, starting at --seed.
        #[arg(long, default_value_t = 5)]
        seeds: usize,
    },
    /// Stage timings over input sizes on synthetic data.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000,8000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
    /// Write the commute-time embedding (approximate, or exact with
    /// `--pipeline exact`) as CSV.
    Embed {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Matched accuracy between two label files. Points labelled -1 in either
    /// file are skipped.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Input file; synthetic data when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    /// csv, edgelist, synth:two_moons, synth:blobs[:k], synth:text_mask or auto.
    #[arg(long, default_value = "auto")]
    kind: InputKind,
    /// auto, yes or no.
    #[arg(long, default_value = "auto")]
    header: Header,
    /// auto, none, last or a zero-based column index.
    #[arg(long, default_value = "auto")]
    label_column: LabelColumn,
    /// Points for synthetic inputs.
    #[arg(long, default_value_t = DEFAULT_SYNTH_N)]
    n: usize,
    /// Jitter for synthetic inputs (default depends on the shape).
    #[arg(long)]
    noise: Option<f64>,
    /// Generator seed for synthetic inputs (default: --seed).
    #[arg(long)]
    data_seed: Option<u64>,
    /// Standardize feature columns before building the graph.
    #[arg(long)]
    standardize: bool,
    /// knn, epsilon or full.
    #[arg(long, default_value = "knn")]
    graph: String,
    #[arg(long, default_value_t = DEFAULT_K1)]
    k1: usize,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    /// Gaussian bandwidth, or `median` for the median k1-th neighbour distance.
    #[arg(long, default_value = "median")]
    sigma: String,
    /// Number of clusters (default: implied by the labels or shape, else 2).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = cesc_core::ctembed::DEFAULT_KRP)]
    krp: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Relative residual tolerance of the Laplacian solves.
    #[arg(long, default_value_t = cesc_core::ctembed::DEFAULT_TOL)]
    tol: f64,
    /// Iteration cap per Laplacian solve (default grows with the edge count).
    #[arg(long)]
    solver_max_iter: Option<usize>,
    /// multigrid or jacobi.
    #[arg(long, default_value = "multigrid")]
    precond: String,
    /// k-means replications.
    #[arg(long, default_value_t = cesc_core::kmeans::DEFAULT_REPLICATIONS)]
    reps: usize,
    /// k-means iteration cap.
    #[arg(long, default_value_t = cesc_core::kmeans::DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// cesc or exact[:variant].
    #[arg(long, default_value = "cesc")]
    pipeline: Pipeline,
    /// Exact spectral variant used as reference: njw, shi_malik or unnorm.
    #[arg(long, default_value = "njw")]
    variant: SpectralVariant,
    /// Also run exact spectral clustering and report agreement with it.
    #[arg(long)]
    compare_exact: bool,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Output file, `-` for standard output.
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

impl RunArgs {
    fn config(&self) -> anyhow::Result<RunConfig> {
        let graph = match self.graph.as_str() {
            "knn" => GraphMode::Knn(self.k1),
            "epsilon" => GraphMode::Epsilon(self.epsilon),
            "full" => GraphMode::Full,
            other => bail!("--graph must be knn, epsilon or full, got `{other}`"),
        };
        let sigma = match self.sigma.as_str() {
            "median" => Bandwidth::Median,
            s => Bandwidth::Fixed(s.parse().with_context(|| format!("--sigma must be `median` or a number, got `{s}`"))?),
        };
        let preconditioner = match self.precond.as_str() {
            "multigrid" => Preconditioner::Multigrid,
            "jacobi" => Preconditioner::Jacobi,
            other => bail!("--precond must be multigrid or jacobi, got `{other}`"),
        };
        let mut input = InputSpec {
            kind: self.kind,
            path: self.input.clone(),
            header: self.header,
            label_column: self.label_column,
            n: self.n,
            noise: self.noise,
            data_seed: self.data_seed,
        };
        input.kind = input.resolved_kind()?;
        Ok(RunConfig {
            input,
            graph,
            sigma,
            standardize: self.standardize,
            k: self.k,
            k_rp: self.krp,
            seed: self.seed,
            tol: self.tol,
            solver_max_iter: self.solver_max_iter,
            preconditioner,
            reps: self.reps,
            max_iter: self.max_iter,
            pipeline: self.pipeline,
            variant: self.variant,
            compare_exact: self.compare_exact,
            threads: self.threads,
        })
    }
}

fn node_map_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".nodes");
    s.into()
}

fn cluster(run: &RunArgs, report_path: Option<&Path>) -> anyhow::Result<()> {
    let cfg = run.config()?;
    let outcome = cesc::run_cluster(&cfg)?;
    io::write_output(&run.out, |w| io::write_labels(w, &outcome.labels))?;
    if cfg.input.kind == InputKind::EdgeList && run.out != Path::new("-") {
        let ids = &outcome.prepared.external_ids;
        io::write_atomic(&node_map_path(&run.out), |w| {
            ids.iter().enumerate().try_for_each(|(i, id)| writeln!(w, "{i} {id}"))
        })?;
    }
    if let Some(path) = report_path {
        let json = outcome.report.to_json();
        io::write_output(path, |w| writeln!(w, "{json}"))?;
    }
    eprintln!("{}", outcome.report);
    Ok(())
}

fn sweep_krp(run: &RunArgs, krp_list: &[usize], seeds: usize) -> anyhow::Result<()> {
    let cfg = run.config()?;
    let rows = sweep::sweep_krp(&cfg, krp_list, seeds)?;
    io::write_output(&run.out, |w| sweep::write_csv(w, &rows))?;
    for (k_rp, m) in sweep::median_by_krp(&rows) {
        match m {
            Some(m) => eprintln!("k_RP = {k_rp:>5}  median accuracy {m:.4}"),
            None => eprintln!("k_RP = {k_rp:>5}  all runs failed"),
        }
    }
    for r in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("k_RP = {}, seed {}: {}", r.k_rp, r.seed, r.error.as_deref().unwrap_or_default());
    }
    Ok(())
}

fn run_bench(run: &RunArgs, sizes: &[usize], repeats: usize) -> anyhow::Result<()> {
    let cfg = run.config()?;
    let rows = bench::bench(&cfg, sizes, repeats)?;
    io::write_output(&run.out, |w| sweep::write_csv(w, &rows))?;
    if let Some(alpha) = bench::embedding_exponent(&rows) {
        eprintln!("embedding time ~ n^{alpha:.3}");
    }
    if rows.windows(2).any(|w| w[1].total_seconds < w[0].total_seconds) {
        eprintln!("note: total time is not monotone in n");
    }
    if let Some(last) = rows.last() {
        let s = cesc::report::shares(last.graph_seconds, last.embed_seconds, last.kmeans_seconds);
        eprintln!(
            "shares at n = {}: graph {:.1}%, embedding {:.1}%, k-means {:.1}%",
            last.n, s.graph, s.embedding, s.kmeans
        );
    }
    Ok(())
}

fn embed(run: &RunArgs) -> anyhow::Result<()> {
    let cfg = run.config()?;
    let prep = cesc::prepare(&cfg)?;
    let e = match cfg.pipeline {
        Pipeline::Cesc => parallel::build_embedding(&prep.graph, &cfg.embedding_config())?.0,
        Pipeline::Exact(_) => exact_commute_embedding(&prep.graph)?,
    };
    io::write_output(&run.out, |w| io::write_embedding(w, &e.coords))?;
    if prep.graph.n() < prep.n_input {
        eprintln!(
            "embedding covers {} of {} nodes (largest connected component)",
            prep.graph.n(),
            prep.n_input
        );
    }
    Ok(())
}

fn eval(pred: &Path, reference: &Path) -> anyhow::Result<()> {
    let p = io::read_labels(pred)?;
    let r = io::read_labels(reference)?;
    if p.len() != r.len() {
        bail!("{} has {} labels but {} has {}", pred.display(), p.len(), reference.display(), r.len());
    }
    let (a, b): (Vec<usize>, Vec<usize>) =
        p.iter().zip(&r).filter(|(x, y)| **x >= 0 && **y >= 0).map(|(&x, &y)| (x as usize, y as usize)).unzip();
    let acc = hungarian_accuracy(&a, &b)?;
    println!("{acc:.6}");
    eprintln!("{} of {} points compared", a.len(), p.len());
    Ok(())
}

fn threads_of(command: &Command) -> usize {
    match command {
        Command::Cluster { run, .. } | Command::SweepKrp { run, .. } | Command::Bench { run, .. } | Command::Embed { run } => {
            run.threads
        }
        Command::Eval { .. } => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = parallel::thread_pool(threads_of(&cli.command));
    let result = pool.install(|| match &cli.command {
        Command::Cluster { run, report } => cluster(run, report.as_deref()),
        Command::SweepKrp { run, krp_list, seeds } => sweep_krp(run, krp_list, *seeds),
        Command::Bench { run, sizes, repeats } => run_bench(run, sizes, *repeats),
        Command::Embed { run } => embed(run),
        Command::Eval { pred, reference } => eval(pred, reference),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
