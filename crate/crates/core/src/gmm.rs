//! Unit-covariance Gaussian mixtures: densities, sampling and KL estimates.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FieError, Result};
use crate::matrix::{log_sum_exp, sq_dist, DenseMatrix};
use crate::rng::{rng_for_stream, SeededRng};

const WEIGHT_SUM_TOL: f64 = 1e-12;
const MC_SHARDS: u64 = 8;

/// Gaussian mixture with identity covariances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureSpecRepr", into = "MixtureSpecRepr")]
pub struct MixtureSpec {
    means: DenseMatrix,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MixtureSpecRepr {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
}

impl TryFrom<MixtureSpecRepr> for MixtureSpec {
    type Error = FieError;

    fn try_from(r: MixtureSpecRepr) -> Result<Self> {
        MixtureSpec::new(DenseMatrix::from_rows(&r.means)?, r.weights)
    }
}

impl From<MixtureSpec> for MixtureSpecRepr {
    fn from(s: MixtureSpec) -> Self {
        MixtureSpecRepr {
            means: s.means.iter_rows().map(<[f64]>::to_vec).collect(),
            weights: s.weights,
        }
    }
}

impl MixtureSpec {
    pub fn new(means: DenseMatrix, weights: Vec<f64>) -> Result<Self> {
        let (p, d) = means.shape();
        if p == 0 || d == 0 {
            return Err(FieError::invalid("mixture needs at least one component and one dimension"));
        }
        if weights.len() != p {
            return Err(FieError::DimensionMismatch {
                context: "mixture weights",
                expected: p,
                actual: weights.len(),
            });
        }
        if !means.is_finite() {
            return Err(FieError::NonFinite("mixture means"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(FieError::invalid("mixture weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(FieError::invalid(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(Self { means, weights })
    }

    /// Mixture with uniform weights over the given means.
    pub fn uniform(means: DenseMatrix) -> Result<Self> {
        let p = means.rows();
        let weights = vec![1.0 / p as f64; p];
        Self::new(means, weights)
    }

    /// Single Gaussian `N(mean, I)`.
    pub fn single(mean: &[f64]) -> Result<Self> {
        Self::new(DenseMatrix::from_rows(&[mean])?, vec![1.0])
    }

    pub fn means(&self) -> &DenseMatrix {
        &self.means
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> usize {
        self.means.rows()
    }

    pub fn dim(&self) -> usize {
        self.means.cols()
    }

    /// `log Σ_j w_j N(x; μ_j, I)`, stabilized with log-sum-exp.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_dim("mixture log-density", self.dim(), x.len())?;
        Ok(self.log_density_unchecked(x))
    }

    fn log_density_unchecked(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .means
            .iter_rows()
            .zip(&self.weights)
            .map(|(mu, &w)| w.ln() + gaussian_log_density(x, mu))
            .collect();
        log_sum_exp(&terms)
    }
}

/// A multiset of points, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    points: DenseMatrix,
    source_seed: Option<u64>,
}

impl SampleSet {
    pub fn new(points: DenseMatrix) -> Result<Self> {
        if points.rows() == 0 {
            return Err(FieError::invalid("a sample set needs at least one point"));
        }
        if !points.is_finite() {
            return Err(FieError::NonFinite("sample points"));
        }
        Ok(Self {
            points,
            source_seed: None,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(DenseMatrix::from_rows(rows)?)
    }

    pub fn points(&self) -> &DenseMatrix {
        &self.points
    }

    pub fn into_points(self) -> DenseMatrix {
        self.points
    }

    /// Seed the set was drawn with, if it came from [`sample_mixture`].
    pub fn source_seed(&self) -> Option<u64> {
        self.source_seed
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for row in self.points.iter_rows() {
            for (acc, v) in m.iter_mut().zip(row) {
                *acc += v;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }
}

fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(FieError::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}

#[inline]
fn gaussian_log_density(x: &[f64], mean: &[f64]) -> f64 {
    -0.5 * x.len() as f64 * (2.0 * PI).ln() - 0.5 * sq_dist(x, mean)
}

/// `log N(x; mean, I) = −d/2·log(2π) − ‖x − mean‖²/2`.
pub fn log_component_density(x: &[f64], mean: &[f64]) -> Result<f64> {
    check_dim("component log-density", mean.len(), x.len())?;
    Ok(gaussian_log_density(x, mean))
}

fn draw_point(spec: &MixtureSpec, rng: &mut SeededRng, out: &mut [f64]) {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut comp = spec.components() - 1;
    for (j, w) in spec.weights.iter().enumerate() {
        acc += w;
        if u < acc {
            comp = j;
            break;
        }
    }
    let mean = spec.means.row(comp);
    for (o, m) in out.iter_mut().zip(mean) {
        let z: f64 = rng.sample(StandardNormal);
        *o = m + z;
    }
}

/// Draws `n` i.i.d. points: a component by weight, then `N(mean, I)`.
pub fn sample_mixture(spec: &MixtureSpec, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(FieError::invalid("sample_mixture needs n >= 1"));
    }
    let mut rng = rng_for_stream(seed, 0);
    let mut points = DenseMatrix::zeros(n, spec.dim());
    for i in 0..n {
        draw_point(spec, &mut rng, points.row_mut(i));
    }
    Ok(SampleSet {
        points,
        source_seed: Some(seed),
    })
}

/// Matching-based KL approximation between two mixtures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlMatching {
    /// `max(raw, 0)`.
    pub value: f64,
    /// The approximation before clamping; may be slightly negative.
    pub raw: f64,
}

/// Component-matching approximation of `KL(f‖g)`.
///
/// Each component `f_i` is matched to `g_m(i)` with
/// `m(i) = argmin_j KL(f_i‖g_j) − log ω_j` (lowest index on ties), and
/// `KL ≈ Σ_i π_i (KL(f_i‖g_m(i)) + log(π_i/ω_m(i)))`. Unit covariances make
/// the component divergence `‖μ_i − ν_j‖²/2`.
pub fn kl_matching_approx(f: &MixtureSpec, g: &MixtureSpec) -> Result<KlMatching> {
    check_dim("kl_matching_approx", f.dim(), g.dim())?;
    let mut raw = 0.0;
    for (mu, &pi) in f.means.iter_rows().zip(&f.weights) {
        if pi == 0.0 {
            continue;
        }
        let mut best = (f64::INFINITY, f64::INFINITY, 0.0);
        for (nu, &omega) in g.means.iter_rows().zip(&g.weights) {
            let kl = 0.5 * sq_dist(mu, nu);
            let score = kl - omega.ln();
            if score < best.0 {
                best = (score, kl, omega);
            }
        }
        let (_, kl, omega) = best;
        raw += pi * (kl + (pi / omega).ln());
    }
    Ok(KlMatching {
        value: raw.max(0.0),
        raw,
    })
}

/// Monte Carlo estimate of a mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Clone, Copy, Default)]
struct Welford {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.count;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Welford) -> Welford {
        if other.count == 0.0 {
            return self;
        }
        if self.count == 0.0 {
            return other;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        Welford {
            count,
            mean: self.mean + delta * other.count / count,
            m2: self.m2 + other.m2 + delta * delta * self.count * other.count / count,
        }
    }
}

/// Unbiased estimate of `E_{x~f}[log f(x) − log g(x)]` from `n` draws of `f`.
///
/// The draws are split over a fixed number of shards with seeds derived from
/// `(seed, shard)`; shard statistics are merged in shard order, so the result
/// does not depend on the thread count.
pub fn kl_monte_carlo(f: &MixtureSpec, g: &MixtureSpec, n: usize, seed: u64) -> Result<McEstimate> {
    check_dim("kl_monte_carlo", f.dim(), g.dim())?;
    if n < 1000 {
        return Err(FieError::invalid("kl_monte_carlo needs n >= 1000"));
    }
    let base = n as u64 / MC_SHARDS;
    let extra = n as u64 % MC_SHARDS;
    let shards: Vec<Welford> = (0..MC_SHARDS)
        .into_par_iter()
        .map(|s| {
            let count = base + u64::from(s < extra);
            let mut rng = rng_for_stream(seed, s + 1);
            let mut x = vec![0.0; f.dim()];
            let mut acc = Welford::default();
            for _ in 0..count {
                draw_point(f, &mut rng, &mut x);
                acc.push(f.log_density_unchecked(&x) - g.log_density_unchecked(&x));
            }
            acc
        })
        .collect();
    let total = shards.into_iter().fold(Welford::default(), Welford::merge);
    let variance = total.m2 / (total.count - 1.0);
    Ok(McEstimate {
        estimate: total.mean,
        std_error: (variance / total.count).sqrt(),
    })
}
