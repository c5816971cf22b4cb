//! Stage timings across input sizes and a power-law fit of the embedding
//! time.

use serde::Serialize;

use cesc_core::largest_component;

use crate::pipeline::{InputKind, RunConfig};
use crate::report::StageClock;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub m: usize,
    pub graph_seconds: f64,
    pub embed_seconds: f64,
    pub kmeans_seconds: f64,
    pub total_seconds: f64,
    pub cg_iterations: usize,
}

/// Times graph construction, embedding and k-means on synthetic inputs of
/// each size. Every stage reports its fastest of `repeats` runs.
pub fn bench(cfg: &RunConfig, sizes: &[usize], repeats: usize) -> anyhow::Result<Vec<BenchRow>> {
    let InputKind::Synth(shape) = cfg.input.kind else {
        anyhow::bail!("bench needs a synthetic input kind (synth:<shape>)");
    };
    let repeats = repeats.max(1);
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let noise = cfg.input.noise.unwrap_or_else(|| crate::pipeline::default_noise(shape));
        let x = cesc_core::synth_shapes(shape, n, noise, cfg.input.data_seed.unwrap_or(cfg.seed))?;
        let k = cfg.k.unwrap_or_else(|| shape.cluster_count());
        let mut best: Option<BenchRow> = None;
        for _ in 0..repeats {
            let mut clock = StageClock::start();
            let g = crate::parallel::build_graph(&x, cfg.graph, cfg.sigma)?;
            let (g, _) = largest_component(&g);
            let graph_seconds = clock.lap();
            let (e, solver) = crate::parallel::build_embedding(&g, &cfg.embedding_config())?;
            let embed_seconds = clock.lap();
            crate::parallel::kmeans(&e.coords, &cfg.kmeans_config(k))?;
            let kmeans_seconds = clock.lap();
            let row = BenchRow {
                n: g.n(),
                m: g.edge_count(),
                graph_seconds,
                embed_seconds,
                kmeans_seconds,
                total_seconds: clock.total(),
                cg_iterations: solver.total_iterations(),
            };
            best = Some(match best {
                None => row,
                Some(b) => BenchRow {
                    graph_seconds: b.graph_seconds.min(row.graph_seconds),
                    embed_seconds: b.embed_seconds.min(row.embed_seconds),
                    kmeans_seconds: b.kmeans_seconds.min(row.kmeans_seconds),
                    total_seconds: b.total_seconds.min(row.total_seconds),
                    ..b
                },
            });
        }
        rows.extend(best);
    }
    Ok(rows)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn power_law_exponent(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if logs.len() < 2 {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn embedding_exponent(rows: &[BenchRow]) -> Option<f64> {
    power_law_exponent(&rows.iter().map(|r| (r.n as f64, r.embed_seconds)).collect::<Vec<_>>())
}
