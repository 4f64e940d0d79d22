//! Test-only oracles that share no code path with the library's models.
#![allow(dead_code)]

use nalgebra::DMatrix;
use zerodiffusion::embedding_io::{FeatureTable, SynthBenchmark};

/// Nearest-predicted-centroid accuracy on the unseen classes, where unseen
/// centroids are predicted by a least-squares (pseudo-inverse) linear decoder
/// fitted from seen class embeddings to seen class means.
pub fn linear_decoder_accuracy(bench: &SynthBenchmark) -> f64 {
    let seen = &bench.partition.seen_classes;
    let unseen = &bench.partition.unseen_classes;
    let fdim = bench.features.dim();
    let cdim = bench.classes.dim();

    let class_means = |labels: &[String], table: &FeatureTable| -> DMatrix<f64> {
        let mut m = DMatrix::zeros(fdim, labels.len());
        for (j, l) in labels.iter().enumerate() {
            let rows: Vec<&Vec<f64>> = table
                .records()
                .iter()
                .filter(|r| &r.class_label == l)
                .map(|r| &r.vector)
                .collect();
            for v in &rows {
                for d in 0..fdim {
                    m[(d, j)] += v[d] / rows.len() as f64;
                }
            }
        }
        m
    };
    let embeddings = |labels: &[String]| -> DMatrix<f64> {
        let mut z = DMatrix::zeros(cdim, labels.len());
        for (j, l) in labels.iter().enumerate() {
            let v = &bench.classes.get(l).unwrap().vector;
            for k in 0..cdim {
                z[(k, j)] = v[k];
            }
        }
        z
    };

    let mu_seen = class_means(seen, &bench.features);
    let z_seen = embeddings(seen);
    let decoder = &mu_seen * z_seen.pseudo_inverse(1e-10).unwrap();
    let predicted = decoder * embeddings(unseen);

    let mut correct = 0usize;
    let mut total = 0usize;
    for r in bench.features.records() {
        let Some(truth) = unseen.iter().position(|u| u == &r.class_label) else {
            continue;
        };
        let x = nalgebra::DVector::from_column_slice(&r.vector);
        let best = (0..unseen.len())
            .map(|j| (j, (&x - predicted.column(j)).norm_squared()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap()
            .0;
        correct += usize::from(best == truth);
        total += 1;
    }
    correct as f64 / total as f64
}
