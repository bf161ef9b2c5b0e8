//! Synthetic check of how well half the squared embedding distance tracks
//! the KL divergence between two Gaussian mixtures.
//!
//! Each trial draws samples from two mixtures, fits anchors by k-means on
//! the pooled samples, embeds both sample sets with the same anchors and
//! compares `‖φ(x) − φ(y)‖²/2` with the matching KL approximation (and a
//! Monte Carlo estimate as a second reference).
//!
//! Built-in scenarios place three-component mixtures at `x = ±5`:
//!
//! | scenario             | varied value | first mixture         | second mixture               |
//! |----------------------|--------------|-----------------------|------------------------------|
//! | `vary_components`    | κ            | (−5, {−2,0,2})        | κ means evenly on x=5, y∈[−2,2] |
//! | `vary_mean_distance` | d            | (−5, {−2,0,2})        | (−5+d, {−2,0,2})             |
//! | `vary_spread`        | d            | (−5, {−d,0,d})        | (5, {−d,0,d})                |
//! | `vary_family_size`   | k            | (−5, {−2,0,2})        | (5, {−2,0,2})                |
//! | `vary_em_iters`      | M            | (−5, {−2,0,2})        | (5, {−2,0,2})                |
//!
//! `single_gaussian_exact` skips sampling: it embeds exact single-Gaussian
//! parameters at mean distance `d` in `dim` dimensions.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anchors::{kmeans_fit, KMeansConfig};
use crate::error::{FieError, Result};
use crate::fie::{fie_embed, fie_embed_distribution, AnchorSet, EstepConfig};
use crate::gmm::{kl_matching_approx, kl_monte_carlo, sample_mixture, MixtureSpec};
use crate::matrix::{sq_dist, DenseMatrix};
use crate::rng::{derive_seed, rng_for_stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    VaryComponents,
    VaryMeanDistance,
    VarySpread,
    VaryFamilySize,
    VaryEmIters,
    SingleGaussianExact,
}

fn default_family() -> usize {
    10
}
fn default_em_iters() -> usize {
    10
}
fn default_samples() -> usize {
    5000
}
fn default_trials() -> usize {
    10
}
fn default_mc_samples() -> usize {
    20_000
}
fn default_restarts() -> usize {
    3
}
fn default_dim() -> usize {
    2
}
fn default_estep() -> EstepConfig {
    EstepConfig {
        min_component_mass: 0.0,
        ..EstepConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub scenario_grid: Vec<f64>,
    /// Components `k` of the fitted mixture family.
    #[serde(default = "default_family")]
    pub family_components: usize,
    /// EM iterations `M`.
    #[serde(default = "default_em_iters")]
    pub em_iters: usize,
    #[serde(default = "default_samples")]
    pub samples_per_dist: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Draws for the Monte Carlo KL reference.
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default = "default_restarts")]
    pub kmeans_restarts: usize,
    /// Lower bound applied to `M`; 1 replaces the anchor-only `M = 0` embedding.
    #[serde(default)]
    pub min_em_iters: usize,
    /// Dimension of the `single_gaussian_exact` scenario.
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_estep")]
    pub estep: EstepConfig,
}

impl SimConfig {
    pub fn new(scenario: Scenario, scenario_grid: Vec<f64>) -> Self {
        Self {
            scenario,
            scenario_grid,
            family_components: default_family(),
            em_iters: default_em_iters(),
            samples_per_dist: default_samples(),
            trials: default_trials(),
            seed: 0,
            mc_samples: default_mc_samples(),
            kmeans_restarts: default_restarts(),
            min_em_iters: 0,
            dim: default_dim(),
            estep: default_estep(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenario_grid.is_empty() {
            return Err(FieError::invalid("scenario_grid must not be empty"));
        }
        if self.scenario_grid.iter().any(|v| !v.is_finite()) {
            return Err(FieError::invalid("scenario_grid values must be finite"));
        }
        if self.family_components == 0 || self.samples_per_dist == 0 || self.trials == 0 || self.dim == 0 {
            return Err(FieError::invalid("counts in the simulation config must be positive"));
        }
        if self.kmeans_restarts == 0 {
            return Err(FieError::invalid("kmeans_restarts must be positive"));
        }
        if self.mc_samples < 1000 {
            return Err(FieError::invalid("mc_samples must be at least 1000"));
        }
        if matches!(
            self.scenario,
            Scenario::VaryComponents | Scenario::VaryFamilySize | Scenario::VaryEmIters
        ) {
            let lower = if self.scenario == Scenario::VaryEmIters { 0.0 } else { 1.0 };
            if self.scenario_grid.iter().any(|v| v.fract() != 0.0 || *v < lower) {
                return Err(FieError::invalid(format!(
                    "{:?} needs integer grid values >= {lower}",
                    self.scenario
                )));
            }
        }
        self.estep.validate()
    }
}

/// One (grid value, trial) outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimRecord {
    pub scenario_value: f64,
    pub trial: usize,
    pub kl_matching: f64,
    pub kl_matching_raw: f64,
    pub kl_mc: f64,
    pub kl_mc_stderr: f64,
    pub sq_embed_dist_half: f64,
    /// `sq_embed_dist_half / kl_matching`.
    pub ratio: f64,
}

fn mixture(points: &[[f64; 2]]) -> Result<MixtureSpec> {
    MixtureSpec::uniform(DenseMatrix::from_rows(points)?)
}

fn column(x: f64, ys: &[f64]) -> Vec<[f64; 2]> {
    ys.iter().map(|&y| [x, y]).collect()
}

/// `count` values evenly spaced on `[lo, hi]`; a single value sits at the midpoint.
fn evenly_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

/// Data mixtures, family size and EM iterations for one grid value.
fn scenario_setup(cfg: &SimConfig, value: f64) -> Result<(MixtureSpec, MixtureSpec, usize, usize)> {
    let base = [-2.0, 0.0, 2.0];
    let (k, m) = (cfg.family_components, cfg.em_iters);
    let left = || mixture(&column(-5.0, &base));
    let right = || mixture(&column(5.0, &base));
    Ok(match cfg.scenario {
        Scenario::VaryComponents => (
            left()?,
            mixture(&column(5.0, &evenly_spaced(-2.0, 2.0, value as usize)))?,
            k,
            m,
        ),
        Scenario::VaryMeanDistance => (left()?, mixture(&column(-5.0 + value, &base))?, k, m),
        Scenario::VarySpread => {
            let spread = [-value, 0.0, value];
            (mixture(&column(-5.0, &spread))?, mixture(&column(5.0, &spread))?, k, m)
        }
        Scenario::VaryFamilySize => (left()?, right()?, value as usize, m),
        Scenario::VaryEmIters => (left()?, right()?, k, value as usize),
        Scenario::SingleGaussianExact => unreachable!("handled separately"),
    })
}

fn half_sq_distance(a: &[f64], b: &[f64]) -> f64 {
    0.5 * sq_dist(a, b)
}

fn exact_single_gaussian(cfg: &SimConfig, value: f64, trial: usize, seed: u64) -> Result<SimRecord> {
    let mut rng = rng_for_stream(seed, 0);
    let d = cfg.dim;
    let mut gauss = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.sample(StandardNormal)).collect() };
    let anchor = gauss(d);
    let theta = gauss(d);
    let dir = gauss(d);
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let theta2: Vec<f64> = theta.iter().zip(&dir).map(|(t, u)| t + value * u / norm).collect();

    let anchors = AnchorSet::from_rows(&[anchor])?;
    let e1 = fie_embed_distribution(&AnchorSet::from_rows(std::slice::from_ref(&theta))?, &anchors)?;
    let e2 = fie_embed_distribution(&AnchorSet::from_rows(std::slice::from_ref(&theta2))?, &anchors)?;
    let f = MixtureSpec::single(&theta)?;
    let g = MixtureSpec::single(&theta2)?;
    let kl = kl_matching_approx(&f, &g)?;
    let mc = kl_monte_carlo(&f, &g, cfg.mc_samples, derive_seed(seed, 3))?;
    let sq = half_sq_distance(&e1, &e2);
    Ok(SimRecord {
        scenario_value: value,
        trial,
        kl_matching: kl.value,
        kl_matching_raw: kl.raw,
        kl_mc: mc.estimate,
        kl_mc_stderr: mc.std_error,
        sq_embed_dist_half: sq,
        ratio: sq / kl.value,
    })
}

fn sampled_trial(cfg: &SimConfig, value: f64, trial: usize, seed: u64) -> Result<SimRecord> {
    let (f, g, k, m) = scenario_setup(cfg, value)?;
    let iters = m.max(cfg.min_em_iters);
    let xs = sample_mixture(&f, cfg.samples_per_dist, derive_seed(seed, 1))?;
    let ys = sample_mixture(&g, cfg.samples_per_dist, derive_seed(seed, 2))?;
    let pooled = DenseMatrix::vconcat(&[xs.points(), ys.points()])?;
    let km = KMeansConfig {
        clusters: k,
        sample_cap: pooled.rows().max(k),
        seed: derive_seed(seed, 4),
        restarts: cfg.kmeans_restarts,
        ..KMeansConfig::default()
    };
    let anchors = kmeans_fit(&pooled, &km)?.anchors;
    let ex = fie_embed(&xs, &anchors, iters, &cfg.estep)?;
    let ey = fie_embed(&ys, &anchors, iters, &cfg.estep)?;
    let kl = kl_matching_approx(&f, &g)?;
    let mc = kl_monte_carlo(&f, &g, cfg.mc_samples, derive_seed(seed, 3))?;
    let sq = half_sq_distance(&ex, &ey);
    Ok(SimRecord {
        scenario_value: value,
        trial,
        kl_matching: kl.value,
        kl_matching_raw: kl.raw,
        kl_mc: mc.estimate,
        kl_mc_stderr: mc.std_error,
        sq_embed_dist_half: sq,
        ratio: sq / kl.value,
    })
}

/// Runs every (grid value, trial) pair; records come back in grid-major order.
/// Trial seeds derive from `(seed, grid index, trial)`, so the output does not
/// depend on scheduling.
pub fn run_simulation(cfg: &SimConfig) -> Result<Vec<SimRecord>> {
    cfg.validate()?;
    let jobs: Vec<(usize, f64, usize)> = cfg
        .scenario_grid
        .iter()
        .enumerate()
        .flat_map(|(gi, &v)| (0..cfg.trials).map(move |t| (gi, v, t)))
        .collect();
    jobs.into_par_iter()
        .map(|(gi, value, trial)| {
            let seed = derive_seed(derive_seed(cfg.seed, gi as u64), trial as u64);
            if cfg.scenario == Scenario::SingleGaussianExact {
                exact_single_gaussian(cfg, value, trial, seed)
            } else {
                sampled_trial(cfg, value, trial, seed)
            }
        })
        .collect()
}

pub const SIM_CSV_HEADER: &str = "scenario_value,trial,kl_matching,kl_mc,kl_mc_stderr,sq_embed_dist_half,ratio";

/// CSV with [`SIM_CSV_HEADER`] columns, floats at 17 significant digits.
pub fn write_sim_csv<W: Write>(records: &[SimRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SIM_CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            crate::formats::fmt_f64(r.scenario_value),
            r.trial,
            crate::formats::fmt_f64(r.kl_matching),
            crate::formats::fmt_f64(r.kl_mc),
            crate::formats::fmt_f64(r.kl_mc_stderr),
            crate::formats::fmt_f64(r.sq_embed_dist_half),
            crate::formats::fmt_f64(r.ratio),
        )?;
    }
    Ok(())
}

/// Records of one grid value.
pub fn records_at(records: &[SimRecord], value: f64) -> Vec<SimRecord> {
    records.iter().copied().filter(|r| r.scenario_value == value).collect()
}

/// Mean of `|ratio − 1|` over records.
pub fn mean_abs_ratio_error(records: &[SimRecord]) -> f64 {
    records.iter().map(|r| (r.ratio - 1.0).abs()).sum::<f64>() / records.len() as f64
}

/// Median ratio over records.
pub fn median_ratio(records: &[SimRecord]) -> f64 {
    let mut v: Vec<f64> = records.iter().map(|r| r.ratio).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
