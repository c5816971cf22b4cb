//! Accuracy as a function of the projection dimension k_RP.

use std::io::{self, Write};

use serde::Serialize;

use cesc_core::hungarian_accuracy;

use crate::pipeline::{prepare, run_cesc, run_exact, RunConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub k_rp: usize,
    pub seed: u64,
    /// Against exact spectral clustering of the same graph.
    pub accuracy: Option<f64>,
    pub accuracy_truth: Option<f64>,
    pub embed_seconds: Option<f64>,
    pub kmeans_seconds: Option<f64>,
    pub error: Option<String>,
}

/// Runs CESC for every `k_rp` in `krp_list` with seeds `cfg.seed ..
/// cfg.seed + seeds`. Seed `s` is shared by all k_RP values, so rows with
/// the same seed differ only in k_RP. A failing row is recorded and the
/// sweep moves on.
pub fn sweep_krp(cfg: &RunConfig, krp_list: &[usize], seeds: usize) -> anyhow::Result<Vec<SweepRow>> {
    let prep = prepare(cfg)?;
    let k = prep.k(cfg.k);
    let (reference, _, _) = run_exact(&prep, cfg.variant, &cfg.kmeans_config(k))?;
    let mut rows = Vec::with_capacity(krp_list.len() * seeds);
    for &k_rp in krp_list {
        for s in 0..seeds as u64 {
            let seed = cfg.seed + s;
            let run_cfg = RunConfig { k_rp, seed, ..cfg.clone() };
            let row = match run_cesc(&prep, &run_cfg, k) {
                Ok(r) => SweepRow {
                    k_rp,
                    seed,
                    accuracy: Some(hungarian_accuracy(&r.assignment.labels, &reference.labels)?),
                    accuracy_truth: match &prep.truth {
                        Some(t) => Some(hungarian_accuracy(&r.assignment.labels, t)?),
                        None => None,
                    },
                    embed_seconds: Some(r.embed_time),
                    kmeans_seconds: Some(r.kmeans_time),
                    error: None,
                },
                Err(e) => SweepRow {
                    k_rp,
                    seed,
                    accuracy: None,
                    accuracy_truth: None,
                    embed_seconds: None,
                    kmeans_seconds: None,
                    error: Some(format!("{e:#}")),
                },
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len();
    Some(if m % 2 == 1 { values[m / 2] } else { 0.5 * (values[m / 2 - 1] + values[m / 2]) })
}

/// Median accuracy per k_RP, in order of first appearance.
pub fn median_by_krp(rows: &[SweepRow]) -> Vec<(usize, Option<f64>)> {
    let mut order: Vec<usize> = Vec::new();
    for r in rows {
        if !order.contains(&r.k_rp) {
            order.push(r.k_rp);
        }
    }
    order
        .into_iter()
        .map(|k_rp| {
            let mut acc: Vec<f64> = rows.iter().filter(|r| r.k_rp == k_rp).filter_map(|r| r.accuracy).collect();
            (k_rp, median(&mut acc))
        })
        .collect()
}

pub fn write_csv<T: Serialize>(out: &mut dyn Write, rows: &[T]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()
}
