#![allow(dead_code)]

use fie_core::rng::rng_for_stream;
use fie_core::{AnchorSet, DenseMatrix, SampleSet, SparseGraph};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian_matrix(rows: usize, cols: usize, scale: f64, seed: u64) -> DenseMatrix {
    let mut rng = rng_for_stream(seed, 0);
    let data = (0..rows * cols).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    DenseMatrix::from_vec(rows, cols, data).unwrap()
}

pub fn samples(n: usize, d: usize, scale: f64, seed: u64) -> SampleSet {
    SampleSet::new(gaussian_matrix(n, d, scale, seed)).unwrap()
}

pub fn anchors(p: usize, d: usize, scale: f64, seed: u64) -> AnchorSet {
    AnchorSet::new(gaussian_matrix(p, d, scale, seed)).unwrap()
}

/// Erdős–Rényi graph with Gaussian node features.
pub fn random_graph(n: usize, d: usize, edge_prob: f64, seed: u64) -> SparseGraph {
    let mut rng = rng_for_stream(seed, 1);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < edge_prob {
                edges.push((u, v));
            }
        }
    }
    SparseGraph::from_edges(gaussian_matrix(n, d, 1.0, seed), &edges).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
