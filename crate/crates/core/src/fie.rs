//! Fisher information embedding of a single multiset.
//!
//! A multiset of points is summarized by the means of a unit-covariance,
//! uniform-weight Gaussian mixture estimated with a few EM steps started at
//! the anchor parameter. The embedding is the parameter displacement scaled
//! by the square root of the approximate Fisher information `(1/p)·I`.
//!
//! The E-step comes in three flavours: the plain posterior (softmax), an
//! entropic optimal-transport plan with balanced component usage, and an
//! unbalanced relaxation of the latter. The transport solvers work on dual
//! potentials in the log domain.

use serde::{Deserialize, Serialize};

use crate::error::{FieError, Result};
use crate::gmm::SampleSet;
use crate::matrix::{log_sum_exp, sq_dist, DenseMatrix};

/// Anchor parameter: one mean per mixture component.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    means: DenseMatrix,
}

impl AnchorSet {
    pub fn new(means: DenseMatrix) -> Result<Self> {
        if means.rows() == 0 || means.cols() == 0 {
            return Err(FieError::invalid("anchor set needs p >= 1 components of dimension >= 1"));
        }
        if !means.is_finite() {
            return Err(FieError::NonFinite("anchor means"));
        }
        Ok(Self { means })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(DenseMatrix::from_rows(rows)?)
    }

    pub fn means(&self) -> &DenseMatrix {
        &self.means
    }

    pub fn into_means(self) -> DenseMatrix {
        self.means
    }

    pub fn components(&self) -> usize {
        self.means.rows()
    }

    pub fn dim(&self) -> usize {
        self.means.cols()
    }

    /// Component means concatenated in component order.
    pub fn flatten(&self) -> &[f64] {
        self.means.as_slice()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstepVariant {
    Softmax,
    BalancedOt,
    UnbalancedOt,
}

/// E-step settings and the M-step degenerate-component threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstepConfig {
    pub variant: EstepVariant,
    /// Entropic regularization weight of the transport variants.
    pub epsilon: f64,
    /// Row-marginal penalty of the unbalanced variant; `f64::INFINITY`
    /// enforces unit row sums exactly. Serialized as `null` when infinite.
    #[serde(with = "infinite_as_null")]
    pub tau1: f64,
    /// Column-marginal penalty of the unbalanced variant.
    pub tau2: f64,
    pub max_sinkhorn_iters: usize,
    /// Balanced: L1 column-marginal violation divided by `n`. Unbalanced:
    /// largest potential change relative to `1 + max |potential|`.
    pub sinkhorn_tol: f64,
    /// Components whose total responsibility falls below this mass keep
    /// their current mean in the M-step. Zero means only components with no
    /// mass at all are kept.
    pub min_component_mass: f64,
}

impl Default for EstepConfig {
    fn default() -> Self {
        Self {
            variant: EstepVariant::Softmax,
            epsilon: 1.0,
            tau1: f64::INFINITY,
            tau2: 1.0,
            max_sinkhorn_iters: 1000,
            sinkhorn_tol: 1e-12,
            min_component_mass: 1e-12,
        }
    }
}

impl EstepConfig {
    pub fn softmax() -> Self {
        Self::default()
    }

    pub fn balanced_ot(epsilon: f64) -> Self {
        Self {
            variant: EstepVariant::BalancedOt,
            epsilon,
            ..Self::default()
        }
    }

    pub fn unbalanced_ot(epsilon: f64, tau1: f64, tau2: f64) -> Self {
        Self {
            variant: EstepVariant::UnbalancedOt,
            epsilon,
            tau1,
            tau2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && !v.is_nan();
        if !positive(self.epsilon) || !self.epsilon.is_finite() {
            return Err(FieError::invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !positive(self.tau1) {
            return Err(FieError::invalid(format!("tau1 must be positive or infinite, got {}", self.tau1)));
        }
        if !positive(self.tau2) {
            return Err(FieError::invalid(format!("tau2 must be positive, got {}", self.tau2)));
        }
        if !positive(self.sinkhorn_tol) {
            return Err(FieError::invalid("sinkhorn_tol must be positive"));
        }
        if !(self.min_component_mass >= 0.0) {
            return Err(FieError::invalid("min_component_mass must be nonnegative"));
        }
        Ok(())
    }
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Responsibilities or transport plan `α` (n × p), kept alongside `log α`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentMatrix {
    alpha: DenseMatrix,
    log_alpha: DenseMatrix,
    converged: bool,
    iterations: usize,
}

impl AssignmentMatrix {
    /// Wraps an explicit nonnegative matrix.
    pub fn from_alpha(alpha: DenseMatrix) -> Result<Self> {
        if alpha.as_slice().iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(FieError::invalid("assignment entries must be finite and nonnegative"));
        }
        let mut log_alpha = alpha.clone();
        log_alpha.map_inplace(f64::ln);
        Ok(Self {
            alpha,
            log_alpha,
            converged: true,
            iterations: 0,
        })
    }

    fn from_log(log_alpha: DenseMatrix, converged: bool, iterations: usize) -> Self {
        let mut alpha = log_alpha.clone();
        alpha.map_inplace(f64::exp);
        Self {
            alpha,
            log_alpha,
            converged,
            iterations,
        }
    }

    pub fn alpha(&self) -> &DenseMatrix {
        &self.alpha
    }

    pub fn log_alpha(&self) -> &DenseMatrix {
        &self.log_alpha
    }

    /// False when a transport solver hit its iteration cap.
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Sinkhorn iterations used (0 for the softmax variant).
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.alpha.iter_rows().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.alpha.cols()];
        for row in self.alpha.iter_rows() {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }
}

fn check_shapes(points: &SampleSet, anchors: &AnchorSet) -> Result<()> {
    if points.dim() != anchors.dim() {
        return Err(FieError::DimensionMismatch {
            context: "points vs anchors",
            expected: anchors.dim(),
            actual: points.dim(),
        });
    }
    Ok(())
}

/// `C_ij = ‖x_i − w_j‖²/2`, the negative log joint density up to a constant.
pub fn cost_matrix(points: &SampleSet, anchors: &AnchorSet) -> Result<DenseMatrix> {
    check_shapes(points, anchors)?;
    let (n, p) = (points.len(), anchors.components());
    let mut cost = DenseMatrix::zeros(n, p);
    for (i, x) in points.points().iter_rows().enumerate() {
        let row = cost.row_mut(i);
        for (j, w) in anchors.means().iter_rows().enumerate() {
            row[j] = 0.5 * sq_dist(x, w);
        }
    }
    if !cost.is_finite() {
        return Err(FieError::NonFinite("E-step cost matrix"));
    }
    Ok(cost)
}

/// Posterior responsibilities `α_ij ∝ exp(−‖x_i − w_j‖²/2)`.
pub fn e_step_softmax(points: &SampleSet, anchors: &AnchorSet) -> Result<AssignmentMatrix> {
    let cost = cost_matrix(points, anchors)?;
    let mut log_alpha = cost;
    let mut alpha = DenseMatrix::zeros(log_alpha.rows(), log_alpha.cols());
    for i in 0..log_alpha.rows() {
        let lrow = log_alpha.row_mut(i);
        let min_cost = lrow.iter().copied().fold(f64::INFINITY, f64::min);
        let arow = alpha.row_mut(i);
        let mut total = 0.0;
        for (a, c) in arow.iter_mut().zip(lrow.iter()) {
            *a = (min_cost - c).exp();
            total += *a;
        }
        let log_total = total.ln();
        for (l, a) in lrow.iter_mut().zip(arow.iter_mut()) {
            *l = min_cost - *l - log_total;
            *a /= total;
        }
    }
    Ok(AssignmentMatrix {
        alpha,
        log_alpha,
        converged: true,
        iterations: 0,
    })
}

/// Log-domain Sinkhorn state over dual potentials `f` (rows) and `g` (columns).
struct DualSolver<'a> {
    cost: &'a DenseMatrix,
    eps: f64,
    f: Vec<f64>,
    g: Vec<f64>,
    buf: Vec<f64>,
}

impl<'a> DualSolver<'a> {
    fn new(cost: &'a DenseMatrix, eps: f64) -> Self {
        let (n, p) = cost.shape();
        Self {
            cost,
            eps,
            f: vec![0.0; n],
            g: vec![0.0; p],
            buf: Vec::with_capacity(n.max(p)),
        }
    }

    /// `f_i ← damp·(ε log a_i − ε lse_j((g_j − C_ij)/ε))` with `a_i = 1`.
    /// Returns the largest potential change.
    fn update_rows(&mut self, damp: f64) -> f64 {
        let mut delta: f64 = 0.0;
        for i in 0..self.f.len() {
            self.buf.clear();
            let c = self.cost.row(i);
            self.buf.extend(self.g.iter().zip(c).map(|(g, c)| (g - c) / self.eps));
            let new = damp * (-self.eps * log_sum_exp(&self.buf));
            delta = delta.max((new - self.f[i]).abs());
            self.f[i] = new;
        }
        delta
    }

    /// `g_j ← damp·(ε log b_j − ε lse_i((f_i − C_ij)/ε))`.
    fn update_cols(&mut self, damp: f64, log_b: f64) -> f64 {
        let mut delta: f64 = 0.0;
        for j in 0..self.g.len() {
            self.buf.clear();
            for (i, f) in self.f.iter().enumerate() {
                self.buf.push((f - self.cost.get(i, j)) / self.eps);
            }
            let new = damp * (self.eps * log_b - self.eps * log_sum_exp(&self.buf));
            delta = delta.max((new - self.g[j]).abs());
            self.g[j] = new;
        }
        delta
    }

    fn log_plan(&self) -> DenseMatrix {
        let (n, p) = self.cost.shape();
        let mut out = DenseMatrix::zeros(n, p);
        for i in 0..n {
            let c = self.cost.row(i);
            let row = out.row_mut(i);
            for j in 0..p {
                row[j] = (self.f[i] + self.g[j] - c[j]) / self.eps;
            }
        }
        out
    }

    fn max_potential(&self) -> f64 {
        self.f.iter().chain(&self.g).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// L1 violation of the column marginal `n/p`.
    fn column_violation(&self, target: f64) -> f64 {
        let plan = self.log_plan();
        let mut sums = vec![0.0; plan.cols()];
        for row in plan.iter_rows() {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v.exp();
            }
        }
        sums.iter().map(|s| (s - target).abs()).sum()
    }
}

/// Entropic OT plan with unit row sums and column sums `n/p`.
///
/// Runs until the L1 column-marginal violation per point drops below `sinkhorn_tol`
/// (rows are exact after every sweep) or the iteration cap is reached; the
/// latter is reported through [`AssignmentMatrix::converged`].
pub fn e_step_balanced_ot(points: &SampleSet, anchors: &AnchorSet, cfg: &EstepConfig) -> Result<AssignmentMatrix> {
    cfg.validate()?;
    let cost = cost_matrix(points, anchors)?;
    let (n, p) = cost.shape();
    let target = n as f64 / p as f64;
    let log_b = target.ln();
    let mut solver = DualSolver::new(&cost, cfg.epsilon);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_sinkhorn_iters {
        iterations += 1;
        solver.update_cols(1.0, log_b);
        solver.update_rows(1.0);
        if solver.column_violation(target) / (n as f64) < cfg.sinkhorn_tol {
            converged = true;
            break;
        }
    }
    finish(solver.log_plan(), converged, iterations)
}

/// Unbalanced entropic OT plan with KL-penalized marginals.
///
/// Each dual update is damped by `τ/(τ+ε)` for its marginal; with
/// `tau1 = ∞` the row update is an exact renormalization, so rows sum to one.
/// Iterates until the potentials move by less than `sinkhorn_tol` relative
/// to their magnitude.
pub fn e_step_unbalanced_ot(points: &SampleSet, anchors: &AnchorSet, cfg: &EstepConfig) -> Result<AssignmentMatrix> {
    cfg.validate()?;
    let cost = cost_matrix(points, anchors)?;
    let (n, p) = cost.shape();
    let log_b = (n as f64 / p as f64).ln();
    let damp_rows = if cfg.tau1.is_infinite() {
        1.0
    } else {
        cfg.tau1 / (cfg.tau1 + cfg.epsilon)
    };
    let damp_cols = cfg.tau2 / (cfg.tau2 + cfg.epsilon);
    let mut solver = DualSolver::new(&cost, cfg.epsilon);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_sinkhorn_iters {
        iterations += 1;
        let dg = solver.update_cols(damp_cols, log_b);
        let df = solver.update_rows(damp_rows);
        if dg.max(df) < cfg.sinkhorn_tol * (1.0 + solver.max_potential()) {
            converged = true;
            break;
        }
    }
    finish(solver.log_plan(), converged, iterations)
}

fn finish(log_plan: DenseMatrix, converged: bool, iterations: usize) -> Result<AssignmentMatrix> {
    if log_plan.as_slice().iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(FieError::NonFinite("Sinkhorn potentials"));
    }
    Ok(AssignmentMatrix::from_log(log_plan, converged, iterations))
}

/// Dispatches on `cfg.variant`.
pub fn e_step(points: &SampleSet, anchors: &AnchorSet, cfg: &EstepConfig) -> Result<AssignmentMatrix> {
    match cfg.variant {
        EstepVariant::Softmax => e_step_softmax(points, anchors),
        EstepVariant::BalancedOt => e_step_balanced_ot(points, anchors, cfg),
        EstepVariant::UnbalancedOt => e_step_unbalanced_ot(points, anchors, cfg),
    }
}

/// Weighted means `μ_j = Σ_i α_ij x_i / Σ_i α_ij`.
///
/// Weights are normalized per column in the log domain, so components with
/// tiny but nonzero mass still get an exact weighted mean. A component whose
/// mass is zero or below `min_mass` keeps its row from `current`.
pub fn m_step(
    points: &SampleSet,
    assignment: &AssignmentMatrix,
    current: &AnchorSet,
    min_mass: f64,
) -> Result<AnchorSet> {
    check_shapes(points, current)?;
    let log_alpha = assignment.log_alpha();
    let (n, p) = log_alpha.shape();
    if n != points.len() || p != current.components() {
        return Err(FieError::DimensionMismatch {
            context: "assignment shape",
            expected: points.len() * current.components(),
            actual: n * p,
        });
    }
    let d = points.dim();
    let mut means = current.means().clone();
    let mut column = vec![0.0; n];
    for j in 0..p {
        for (i, c) in column.iter_mut().enumerate() {
            *c = log_alpha.get(i, j);
        }
        let log_mass = log_sum_exp(&column);
        if log_mass == f64::NEG_INFINITY || log_mass.exp() < min_mass {
            continue;
        }
        let mut mean = vec![0.0; d];
        for (x, la) in points.points().iter_rows().zip(&column) {
            let w = (la - log_mass).exp();
            if w == 0.0 {
                continue;
            }
            for (m, v) in mean.iter_mut().zip(x) {
                *m += w * v;
            }
        }
        means.row_mut(j).copy_from_slice(&mean);
    }
    if !means.is_finite() {
        return Err(FieError::NonFinite("M-step means"));
    }
    AnchorSet::new(means)
}

/// Mean over points of `log((1/p) Σ_j N(x_i; θ_j, I))`.
pub fn mean_log_likelihood(points: &SampleSet, theta: &AnchorSet) -> Result<f64> {
    check_shapes(points, theta)?;
    let p = theta.components();
    let d = points.dim() as f64;
    let constant = -(p as f64).ln() - 0.5 * d * (2.0 * std::f64::consts::PI).ln();
    let mut terms = vec![0.0; p];
    let mut total = 0.0;
    for x in points.points().iter_rows() {
        for (t, w) in terms.iter_mut().zip(theta.means().iter_rows()) {
            *t = -0.5 * sq_dist(x, w);
        }
        total += constant + log_sum_exp(&terms);
    }
    Ok(total / points.len() as f64)
}

/// Result of EM started at the anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct MultisetEstimate {
    pub theta: AnchorSet,
    /// Assignment used by the last M-step, or the E-step at the anchors when
    /// no iteration ran.
    pub alpha: AssignmentMatrix,
    /// Mean mixture log-likelihood after each M-step.
    pub loglik_trace: Vec<f64>,
    /// False if any transport E-step hit its iteration cap.
    pub converged: bool,
}

/// Runs `iters` (E, M) pairs from the anchors; `iters = 0` returns the anchors.
pub fn em_estimate(points: &SampleSet, anchors: &AnchorSet, iters: usize, cfg: &EstepConfig) -> Result<MultisetEstimate> {
    cfg.validate()?;
    let mut theta = anchors.clone();
    let mut alpha = e_step(points, &theta, cfg)?;
    let mut converged = alpha.converged();
    let mut loglik_trace = Vec::with_capacity(iters);
    for it in 0..iters {
        if it > 0 {
            alpha = e_step(points, &theta, cfg)?;
            converged &= alpha.converged();
        }
        theta = m_step(points, &alpha, &theta, cfg.min_component_mass)?;
        loglik_trace.push(mean_log_likelihood(points, &theta)?);
    }
    Ok(MultisetEstimate {
        theta,
        alpha,
        loglik_trace,
        converged,
    })
}

/// `(1/√p)·(θ − θ0)` flattened in component order.
pub fn fie_embed_distribution(theta: &AnchorSet, anchors: &AnchorSet) -> Result<Vec<f64>> {
    if theta.means().shape() != anchors.means().shape() {
        return Err(FieError::DimensionMismatch {
            context: "theta vs anchors",
            expected: anchors.components() * anchors.dim(),
            actual: theta.components() * theta.dim(),
        });
    }
    let scale = 1.0 / (anchors.components() as f64).sqrt();
    Ok(theta
        .flatten()
        .iter()
        .zip(anchors.flatten())
        .map(|(t, a)| scale * (t - a))
        .collect())
}

/// Embedding of a multiset: EM estimate followed by the Fisher-scaled displacement.
pub fn fie_embed(points: &SampleSet, anchors: &AnchorSet, iters: usize, cfg: &EstepConfig) -> Result<Vec<f64>> {
    let est = em_estimate(points, anchors, iters, cfg)?;
    fie_embed_distribution(&est.theta, anchors)
}
