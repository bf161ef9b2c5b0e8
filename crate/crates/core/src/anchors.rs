//! Unsupervised anchor learning with k-means.
//!
//! Anchors for each layer are the k-means centers of a uniform sample of that
//! layer's input node features. Layers are fitted greedily in one forward
//! pass: layer `t` is fitted on the output of the already-fitted layer `t−1`.

use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FieError, Result};
use crate::fie::AnchorSet;
use crate::graph::{embed_layer, FieLayer, FieModel, LayerConfig, SparseGraph};
use crate::matrix::{sq_dist, DenseMatrix};
use crate::rng::{derive_seed, rng_for_stream, SeededRng};

const SAMPLE_STREAM: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub clusters: usize,
    pub max_iters: usize,
    /// Stop once the relative inertia decrease falls below this value.
    pub tol: f64,
    /// Maximum number of rows fed to k-means per layer.
    pub sample_cap: usize,
    pub seed: u64,
    pub restarts: usize,
    /// Sample rows with replacement when a layer exceeds `sample_cap`.
    pub with_replacement: bool,
    /// Draw a fresh node sample for every layer instead of reusing layer 1's.
    pub resample_per_layer: bool,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            clusters: 4,
            max_iters: 100,
            tol: 1e-6,
            sample_cap: 300_000,
            seed: 0,
            restarts: 3,
            with_replacement: false,
            resample_per_layer: true,
        }
    }
}

impl KMeansConfig {
    fn validate(&self) -> Result<()> {
        if self.clusters == 0 {
            return Err(FieError::invalid("k-means needs at least one cluster"));
        }
        if self.sample_cap < self.clusters {
            return Err(FieError::invalid(format!(
                "sample_cap {} is smaller than the cluster count {}",
                self.sample_cap, self.clusters
            )));
        }
        if self.restarts == 0 || self.max_iters == 0 {
            return Err(FieError::invalid("k-means needs at least one restart and one iteration"));
        }
        if !(self.tol >= 0.0) {
            return Err(FieError::invalid("k-means tolerance must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub anchors: AnchorSet,
    pub inertia: f64,
    /// Inertia after every assignment step of the winning restart.
    pub inertia_trace: Vec<f64>,
    pub warning: Option<String>,
}

/// Index of the closest center; the lowest index wins exact ties.
fn nearest(x: &[f64], centers: &DenseMatrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter_rows().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(points: &DenseMatrix, centers: &DenseMatrix) -> (Vec<usize>, f64) {
    let pairs: Vec<(usize, f64)> = (0..points.rows())
        .into_par_iter()
        .map(|i| nearest(points.row(i), centers))
        .collect();
    // sequential sum keeps the result independent of the thread count
    let inertia = pairs.iter().map(|p| p.1).sum();
    (pairs.into_iter().map(|p| p.0).collect(), inertia)
}

fn plus_plus_init(points: &DenseMatrix, k: usize, rng: &mut SeededRng) -> DenseMatrix {
    let n = points.rows();
    let mut centers = DenseMatrix::zeros(k, points.cols());
    let first = rng.random_range(0..n);
    centers.row_mut(0).copy_from_slice(points.row(first));
    let mut d2: Vec<f64> = points.iter_rows().map(|x| sq_dist(x, centers.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && *d > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).copy_from_slice(points.row(pick));
        for (i, x) in points.iter_rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(x, centers.row(c)));
        }
    }
    centers
}

fn lloyd(points: &DenseMatrix, mut centers: DenseMatrix, cfg: &KMeansConfig) -> (DenseMatrix, f64, Vec<f64>) {
    let (n, d) = points.shape();
    let k = centers.rows();
    let mut trace = Vec::new();
    loop {
        let (labels, inertia) = assign(points, &centers);
        let done = match trace.last() {
            Some(&prev) => prev - inertia <= cfg.tol * prev,
            None => false,
        } || trace.len() + 1 >= cfg.max_iters;
        trace.push(inertia);
        if done {
            return (centers, inertia, trace);
        }
        let mut sums = DenseMatrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (x, &l) in points.iter_rows().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums.row_mut(l).iter_mut().zip(x) {
                *s += v;
            }
        }
        let mut taken: HashSet<usize> = HashSet::new();
        for j in 0..k {
            if counts[j] > 0 {
                let c = counts[j] as f64;
                for (dst, s) in centers.row_mut(j).iter_mut().zip(sums.row(j)) {
                    *dst = s / c;
                }
                continue;
            }
            // empty cluster: move it to the point farthest from its old center
            let old = centers.row(j).to_vec();
            let mut far = (usize::MAX, f64::NEG_INFINITY);
            for i in 0..n {
                if taken.contains(&i) {
                    continue;
                }
                let dist = sq_dist(points.row(i), &old);
                if dist > far.1 {
                    far = (i, dist);
                }
            }
            if far.0 != usize::MAX {
                taken.insert(far.0);
                centers.row_mut(j).copy_from_slice(points.row(far.0));
            }
        }
    }
}

/// Indices of the first occurrence of each distinct row, in row order.
fn distinct_rows(points: &DenseMatrix, limit: usize) -> Vec<usize> {
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut out = Vec::new();
    for (i, row) in points.iter_rows().enumerate() {
        let key: Vec<u64> = row.iter().map(|v| (v + 0.0).to_bits()).collect();
        if seen.insert(key) {
            out.push(i);
            if out.len() >= limit {
                break;
            }
        }
    }
    out
}

/// k-means++ seeding followed by Lloyd iterations; the best of
/// `cfg.restarts` runs by inertia is returned.
///
/// When the data hold fewer distinct rows than clusters, the distinct rows
/// become centers, the remaining centers repeat them round-robin, and a
/// warning is attached.
pub fn kmeans_fit(points: &DenseMatrix, cfg: &KMeansConfig) -> Result<KMeansFit> {
    cfg.validate()?;
    if points.rows() == 0 || points.cols() == 0 {
        return Err(FieError::invalid("k-means needs a nonempty point matrix"));
    }
    if !points.is_finite() {
        return Err(FieError::NonFinite("k-means input"));
    }
    let k = cfg.clusters;
    let distinct = distinct_rows(points, k);
    if distinct.len() < k {
        let picks: Vec<usize> = (0..k).map(|j| distinct[j % distinct.len()]).collect();
        let centers = points.select_rows(&picks);
        let (_, inertia) = assign(points, &centers);
        return Ok(KMeansFit {
            anchors: AnchorSet::new(centers)?,
            inertia,
            inertia_trace: vec![inertia],
            warning: Some(format!(
                "only {} distinct rows for {k} clusters; centers repeat round-robin",
                distinct.len()
            )),
        });
    }

    let mut best: Option<(DenseMatrix, f64, Vec<f64>)> = None;
    for restart in 0..cfg.restarts {
        let mut rng = rng_for_stream(cfg.seed, restart as u64);
        let init = plus_plus_init(points, k, &mut rng);
        let run = lloyd(points, init, cfg);
        if best.as_ref().is_none_or(|b| run.1 < b.1) {
            best = Some(run);
        }
    }
    let (centers, inertia, inertia_trace) = best.expect("at least one restart");
    Ok(KMeansFit {
        anchors: AnchorSet::new(centers)?,
        inertia,
        inertia_trace,
        warning: None,
    })
}

/// Row indices fed to k-means: all rows when they fit under the cap,
/// otherwise a uniform sample (sorted) drawn from `seed`.
pub fn sample_rows(n: usize, cap: usize, with_replacement: bool, seed: u64) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut rng = rng_for_stream(seed, SAMPLE_STREAM);
    let mut rows: Vec<usize> = if with_replacement {
        (0..cap).map(|_| rng.random_range(0..n)).collect()
    } else {
        index::sample(&mut rng, n, cap).into_vec()
    };
    rows.sort_unstable();
    rows
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub model: FieModel,
    pub layer_inertia: Vec<f64>,
    /// Warnings tagged with their 1-based layer index.
    pub warnings: Vec<(usize, String)>,
}

/// Greedy layer-by-layer anchor fitting in a single forward pass.
pub fn fit_model(graph: &SparseGraph, layer_cfgs: &[LayerConfig], km: &KMeansConfig) -> Result<FitOutcome> {
    if layer_cfgs.is_empty() {
        return Err(FieError::invalid("fit_model needs at least one layer"));
    }
    let mut features = graph.features().clone();
    let mut layers = Vec::with_capacity(layer_cfgs.len());
    let mut layer_inertia = Vec::with_capacity(layer_cfgs.len());
    let mut warnings = Vec::new();
    for (t, cfg) in layer_cfgs.iter().enumerate() {
        let layer = t + 1;
        let in_layer = |e: FieError| FieError::InLayer {
            layer,
            source: Box::new(e),
        };
        let sample_seed = derive_seed(km.seed, if km.resample_per_layer { layer as u64 } else { 1 });
        let rows = sample_rows(features.rows(), km.sample_cap, km.with_replacement, sample_seed);
        let layer_km = KMeansConfig {
            clusters: cfg.components,
            seed: derive_seed(km.seed, 1000 + layer as u64),
            ..*km
        };
        let fit = kmeans_fit(&features.select_rows(&rows), &layer_km).map_err(in_layer)?;
        if let Some(w) = fit.warning {
            warnings.push((layer, w));
        }
        let out = embed_layer(graph, &features, cfg, &fit.anchors).map_err(in_layer)?;
        if !out.unconverged_nodes.is_empty() {
            warnings.push((
                layer,
                format!("{} nodes hit the Sinkhorn iteration cap", out.unconverged_nodes.len()),
            ));
        }
        layer_inertia.push(fit.inertia);
        layers.push(FieLayer {
            config: *cfg,
            anchors: fit.anchors,
        });
        features = out.features;
    }
    Ok(FitOutcome {
        model: FieModel::new(graph.feature_dim(), layers)?,
        layer_inertia,
        warnings,
    })
}
