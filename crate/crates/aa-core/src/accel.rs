//! Anderson acceleration of fixed-point iterations.
//!
//! The iteration keeps a sliding window of iterate differences E and
//! residual differences F (the latter as an incrementally maintained thin
//! QR factorization), solves the unconstrained least-squares problem
//! min |w - F gamma| each step, and updates
//!
//! ```text
//! x_next = (x - E gamma) + beta (w - F gamma)
//! ```
//!
//! With depth 0 this reduces to the damped Picard iteration
//! `x_next = x + beta w`.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::qr::{ColumnGeometry, QrError, QrOptions, ThinQr};
use crate::scalar::{Euclidean, InnerProduct, Real};

/// A fixed-point problem x = g(x) on R^n. Evaluations must be
/// deterministic for a fixed input.
pub trait FixedPointProblem<T: Real> {
    fn dimension(&self) -> usize;

    /// Evaluate g at x.
    fn evaluate(&self, x: &[T]) -> Result<Vec<T>, EvaluationError>;

    fn description(&self) -> String {
        "fixed-point problem".to_string()
    }
}

/// Evaluation failure of the underlying map.
#[derive(Debug, Clone, Error)]
#[error("problem evaluation failed: {0}")]
pub struct EvaluationError(pub String);

/// Wrap a closure as a [`FixedPointProblem`]; handy for tests and small
/// experiments.
pub struct FnProblem<F> {
    dimension: usize,
    f: F,
    description: String,
}

impl<F> FnProblem<F> {
    pub fn new(dimension: usize, description: &str, f: F) -> Self {
        FnProblem {
            dimension,
            f,
            description: description.to_string(),
        }
    }
}

impl<T: Real, F: Fn(&[T]) -> Vec<T>> FixedPointProblem<T> for FnProblem<F> {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn evaluate(&self, x: &[T]) -> Result<Vec<T>, EvaluationError> {
        Ok((self.f)(x))
    }

    fn description(&self) -> String {
        self.description.clone()
    }
}

/// How the algorithmic depth m_k is chosen each step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DepthPolicy<T> {
    /// m_k = min(k, m).
    Fixed(usize),
    /// m_k = k - 1, capped by the ambient dimension. History grows
    /// without bound.
    Unbounded,
    /// Depth m_low until the residual norm first drops below
    /// `switch_tol`, then m_high permanently (one-way latch).
    SwitchOnResidual {
        m_low: usize,
        m_high: usize,
        switch_tol: T,
    },
}

/// What to do when a new residual-difference column is numerically
/// dependent on the current window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankPolicy {
    /// Drop oldest columns until the new one fits (the default).
    DropOldestOnDeficiency,
    /// Abort the run.
    FailOnDeficiency,
}

#[derive(Debug, Clone)]
pub struct AcceleratorConfig<T> {
    pub depth_policy: DepthPolicy<T>,
    /// Damping (mixing) factor beta in (0, 1], constant over the run.
    pub damping: T,
    pub residual_tolerance: T,
    pub max_iterations: usize,
    pub rank_policy: RankPolicy,
    pub qr_options: QrOptions<T>,
}

impl<T: Real> AcceleratorConfig<T> {
    pub fn new(depth_policy: DepthPolicy<T>, damping: T) -> Self {
        AcceleratorConfig {
            depth_policy,
            damping,
            residual_tolerance: crate::scalar::lit(1e-8),
            max_iterations: 1000,
            rank_policy: RankPolicy::DropOldestOnDeficiency,
            qr_options: QrOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.damping > T::zero() && self.damping <= T::one()) {
            return Err(ConfigError("damping must lie in (0, 1]".into()));
        }
        if !(self.residual_tolerance > T::zero()) {
            return Err(ConfigError("residual tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(ConfigError("max_iterations must be positive".into()));
        }
        if let DepthPolicy::SwitchOnResidual { switch_tol, .. } = self.depth_policy {
            if !(switch_tol > T::zero()) {
                return Err(ConfigError("switch tolerance must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error)]
#[error("invalid accelerator configuration: {0}")]
pub struct ConfigError(pub String);

/// Per-step diagnostics: the residual norm `|w_k|`, the optimization gain
/// `theta_k`, both coefficient vectors, and the window geometry.
///
/// `gamma` and `alpha` are ordered oldest to newest; `alpha` sums to one.
#[derive(Debug, Clone)]
pub struct StepDiagnostics<T> {
    /// Residual index k (the step computed w_k from x_{k-1}).
    pub k: usize,
    pub residual_norm: T,
    pub theta: T,
    pub gamma: Vec<T>,
    pub alpha: Vec<T>,
    pub geometry: ColumnGeometry<T>,
    /// Window size actually used after policy trimming and rank drops.
    pub m_k_used: usize,
    pub beta_used: T,
    /// Columns dropped this step due to rank deficiency.
    pub rank_events: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    Converged,
    MaxIterations,
    Diverged,
}

/// Full history of a run: the initial residual norm plus one
/// [`StepDiagnostics`] per accelerated step (k = 2, 3, ...).
#[derive(Debug, Clone)]
pub struct RunReport<T> {
    pub problem: String,
    pub initial_residual_norm: T,
    pub steps: Vec<StepDiagnostics<T>>,
    pub final_iterate: Vec<T>,
    pub termination: TerminationReason,
    pub wall_time: Duration,
}

impl<T: Real> RunReport<T> {
    /// Number of residuals computed (the index k of the last one).
    pub fn iterations(&self) -> usize {
        self.steps.len() + 1
    }

    /// Residual norms |w_1|, |w_2|, ... in order.
    pub fn residual_norms(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        out.push(self.initial_residual_norm);
        out.extend(self.steps.iter().map(|s| s.residual_norm));
        out
    }

    pub fn final_residual_norm(&self) -> T {
        self.steps
            .last()
            .map(|s| s.residual_norm)
            .unwrap_or(self.initial_residual_norm)
    }

    /// Mean gain over all accelerated steps, if any.
    pub fn mean_theta(&self) -> Option<T> {
        if self.steps.is_empty() {
            return None;
        }
        let sum: T = self.steps.iter().map(|s| s.theta).sum();
        Some(sum / T::from_usize(self.steps.len()).unwrap())
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("dimension mismatch: problem has {problem}, initial iterate has {x0}")]
    Dimension { problem: usize, x0: usize },
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error("rank-deficient residual differences with RankPolicy::FailOnDeficiency")]
    RankDeficiency,
    #[error(transparent)]
    Qr(#[from] QrError),
}

/// The accelerator state: current iterate and residual, the windows of
/// iterate/residual differences, and the depth-switch latch.
///
/// The optimization geometry comes from the inner product `P`; only the
/// Euclidean one ships.
pub struct AcceleratorState<T, P = Euclidean> {
    config: AcceleratorConfig<T>,
    dimension: usize,
    /// Residual counter: w_1 .. w_k have been computed.
    k: usize,
    x: Vec<T>,
    w: Vec<T>,
    /// e_{k} = x_k - x_{k-1}, pushed into the window on the next step.
    pending_e: Vec<T>,
    e_window: VecDeque<Vec<T>>,
    f_qr: ThinQr<T, P>,
    switched: bool,
    product: P,
}

impl<T: Real> AcceleratorState<T> {
    /// Step 1 of the iteration: w_1 = g(x_0) - x_0 and x_1 = x_0 + w_1
    /// (undamped, by definition of the algorithm).
    pub fn initialize<Pr: FixedPointProblem<T>>(
        problem: &Pr,
        x0: &[T],
        config: AcceleratorConfig<T>,
    ) -> Result<Self, SolveError> {
        Self::initialize_in(problem, x0, config, Euclidean)
    }
}

impl<T: Real, P: InnerProduct<T> + Clone> AcceleratorState<T, P> {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn iterate(&self) -> &[T] {
        &self.x
    }

    pub fn residual(&self) -> &[T] {
        &self.w
    }

    pub fn residual_norm(&self) -> T {
        self.product.norm(&self.w)
    }

    pub fn window_len(&self) -> usize {
        self.f_qr.m()
    }

    /// Residual-difference columns currently in the window (oldest first).
    pub fn residual_difference_columns(&self) -> &[Vec<T>] {
        self.f_qr.columns()
    }

    /// Iterate-difference columns currently in the window (oldest first).
    pub fn iterate_difference_columns(&self) -> impl Iterator<Item = &[T]> {
        self.e_window.iter().map(|c| c.as_slice())
    }

    pub fn config(&self) -> &AcceleratorConfig<T> {
        &self.config
    }

    /// [`AcceleratorState::initialize`] under an explicit inner product.
    pub fn initialize_in<Pr: FixedPointProblem<T>>(
        problem: &Pr,
        x0: &[T],
        config: AcceleratorConfig<T>,
        product: P,
    ) -> Result<Self, SolveError> {
        config.validate()?;
        if problem.dimension() != x0.len() {
            return Err(SolveError::Dimension {
                problem: problem.dimension(),
                x0: x0.len(),
            });
        }
        let g0 = problem.evaluate(x0)?;
        let w1: Vec<T> = g0.iter().zip(x0).map(|(&g, &x)| g - x).collect();
        let x1: Vec<T> = x0.iter().zip(&w1).map(|(&x, &w)| x + w).collect();
        Ok(AcceleratorState {
            dimension: x0.len(),
            k: 1,
            pending_e: w1.clone(),
            e_window: VecDeque::new(),
            f_qr: ThinQr::empty_in(x0.len(), product.clone(), config.qr_options),
            x: x1,
            w: w1,
            switched: false,
            config,
            product,
        })
    }

    /// One accelerated step: computes w_{k+1}, updates the difference
    /// windows under the depth policy, solves the least-squares problem
    /// and forms x_{k+1}.
    pub fn step<Pr: FixedPointProblem<T>>(
        &mut self,
        problem: &Pr,
    ) -> Result<StepDiagnostics<T>, SolveError> {
        let k = self.k;
        let (mut target_m, switched) = next_depth(
            &self.config.depth_policy,
            k,
            self.product.norm(&self.w),
            self.switched,
        );
        self.switched = switched;
        target_m = target_m.min(self.dimension);

        let gx = problem.evaluate(&self.x)?;
        let w_new: Vec<T> = gx.iter().zip(&self.x).map(|(&g, &x)| g - x).collect();
        let rn = self.product.norm(&w_new);
        if !rn.is_finite() {
            // Leave state untouched; the caller reports divergence.
            return Ok(StepDiagnostics {
                k: k + 1,
                residual_norm: rn,
                theta: T::one(),
                gamma: Vec::new(),
                alpha: vec![T::one()],
                geometry: empty_geometry(),
                m_k_used: 0,
                beta_used: self.config.damping,
                rank_events: 0,
            });
        }
        if rn == T::zero() {
            // Exact fixed point; nothing to optimize.
            self.k += 1;
            self.w = w_new;
            self.pending_e = vec![T::zero(); self.dimension];
            return Ok(StepDiagnostics {
                k: self.k,
                residual_norm: rn,
                theta: T::zero(),
                gamma: Vec::new(),
                alpha: vec![T::one()],
                geometry: empty_geometry(),
                m_k_used: 0,
                beta_used: self.config.damping,
                rank_events: 0,
            });
        }

        let v: Vec<T> = w_new.iter().zip(&self.w).map(|(&a, &b)| a - b).collect();
        let e = std::mem::take(&mut self.pending_e);
        let mut rank_events = 0usize;

        if target_m == 0 {
            self.e_window.clear();
            self.f_qr = ThinQr::empty_in(self.dimension, self.product.clone(), self.config.qr_options);
        } else {
            loop {
                match self.f_qr.push_column(&v) {
                    Ok(()) => {
                        self.e_window.push_back(e.clone());
                        break;
                    }
                    Err(QrError::RankDeficiency { .. }) | Err(QrError::Dimension { .. })
                        if !self.f_qr.is_empty() =>
                    {
                        if self.config.rank_policy == RankPolicy::FailOnDeficiency {
                            return Err(SolveError::RankDeficiency);
                        }
                        self.f_qr.drop_oldest()?;
                        self.e_window.pop_front();
                        rank_events += 1;
                    }
                    Err(QrError::DegenerateColumn { .. })
                    | Err(QrError::RankDeficiency { .. }) => {
                        // The new difference itself is (numerically) zero:
                        // dropping history cannot help, so restart the window.
                        if self.config.rank_policy == RankPolicy::FailOnDeficiency {
                            return Err(SolveError::RankDeficiency);
                        }
                        rank_events += self.f_qr.m() + 1;
                        self.e_window.clear();
                        self.f_qr =
                            ThinQr::empty_in(self.dimension, self.product.clone(), self.config.qr_options);
                        break;
                    }
                    Err(other) => return Err(SolveError::Qr(other)),
                }
            }
            while self.f_qr.m() > target_m {
                self.f_qr.drop_oldest()?;
                self.e_window.pop_front();
            }
        }

        let (gamma, ls_residual) = self.f_qr.ls_solve(&w_new)?;
        let theta = compute_gain(rn, ls_residual).expect("rn > 0 checked above");
        let beta = self.config.damping;

        // x_{k+1} = (x_k - E gamma) + beta (w_{k+1} - F gamma)
        let mut x_next = self.x.clone();
        let mut w_avg = w_new.clone();
        for (col_idx, g) in gamma.iter().enumerate() {
            let ecol = &self.e_window[col_idx];
            let fcol = &self.f_qr.columns()[col_idx];
            for i in 0..self.dimension {
                x_next[i] -= *g * ecol[i];
                w_avg[i] -= *g * fcol[i];
            }
        }
        for i in 0..self.dimension {
            x_next[i] += beta * w_avg[i];
        }

        let geometry = self.f_qr.column_geometry();
        let alpha = alpha_from_gamma(&gamma);
        let m_k_used = self.f_qr.m();

        self.pending_e = x_next.iter().zip(&self.x).map(|(&a, &b)| a - b).collect();
        self.x = x_next;
        self.w = w_new;
        self.k += 1;

        Ok(StepDiagnostics {
            k: self.k,
            residual_norm: rn,
            theta,
            gamma,
            alpha,
            geometry,
            m_k_used,
            beta_used: beta,
            rank_events,
        })
    }
}

fn empty_geometry<T: Real>() -> ColumnGeometry<T> {
    ColumnGeometry {
        sines: Vec::new(),
        max_cosines: Vec::new(),
        c_s_estimate: T::one(),
        c_t_estimate: T::zero(),
    }
}

/// Gain theta = |w_opt| / |w| of the optimization; tiny overshoots of the
/// least-squares residual are clamped so the result lies in [0, 1].
pub fn compute_gain<T: Real>(residual_norm: T, ls_residual_norm: T) -> Result<T, GainError> {
    if residual_norm == T::zero() {
        return Err(GainError::Converged);
    }
    let ls = ls_residual_norm.max(T::zero()).min(residual_norm);
    Ok(ls / residual_norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GainError {
    #[error("residual is exactly zero; the iteration has converged")]
    Converged,
}

/// Recover the constrained coefficients alpha (summing to one) from the
/// unconstrained gamma. Both are ordered oldest to newest; gamma holds the
/// partial sums of alpha from the oldest entry.
pub fn alpha_from_gamma<T: Real>(gamma: &[T]) -> Vec<T> {
    let m = gamma.len();
    let mut alpha = Vec::with_capacity(m + 1);
    if m == 0 {
        alpha.push(T::one());
        return alpha;
    }
    alpha.push(gamma[0]);
    for i in 1..m {
        alpha.push(gamma[i] - gamma[i - 1]);
    }
    alpha.push(T::one() - gamma[m - 1]);
    alpha
}

/// Closed-form m=1 coefficient gamma = (w_next, w_next - w_prev) / |w_next - w_prev|^2.
pub fn gamma_m1_closed_form<T: Real>(w_next: &[T], w_prev: &[T]) -> Result<T, DegenerateDifference> {
    gamma_m1_closed_form_in(&Euclidean, w_next, w_prev)
}

/// [`gamma_m1_closed_form`] under an explicit inner product.
pub fn gamma_m1_closed_form_in<T: Real, P: InnerProduct<T>>(
    product: &P,
    w_next: &[T],
    w_prev: &[T],
) -> Result<T, DegenerateDifference> {
    let v: Vec<T> = w_next.iter().zip(w_prev).map(|(&a, &b)| a - b).collect();
    let vv = product.dot(&v, &v);
    if vv == T::zero() {
        return Err(DegenerateDifference);
    }
    Ok(product.dot(w_next, &v) / vv)
}

/// Closed-form m=1 gain: the direction sine between w_next and
/// w_next - w_prev.
pub fn theta_m1_closed_form<T: Real>(w_next: &[T], w_prev: &[T]) -> Result<T, DegenerateDifference> {
    theta_m1_closed_form_in(&Euclidean, w_next, w_prev)
}

/// [`theta_m1_closed_form`] under an explicit inner product.
pub fn theta_m1_closed_form_in<T: Real, P: InnerProduct<T>>(
    product: &P,
    w_next: &[T],
    w_prev: &[T],
) -> Result<T, DegenerateDifference> {
    let v: Vec<T> = w_next.iter().zip(w_prev).map(|(&a, &b)| a - b).collect();
    let vv = product.dot(&v, &v);
    let ww = product.dot(w_next, w_next);
    if vv == T::zero() || ww == T::zero() {
        return Err(DegenerateDifference);
    }
    let c = product.dot(w_next, &v);
    let cos_sq = (c * c) / (ww * vv);
    Ok((T::one() - cos_sq).max(T::zero()).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("residual difference (or residual) is zero")]
pub struct DegenerateDifference;

/// Depth for the step with counter `k`, given the latest known residual
/// norm, plus the updated switch latch. The caller additionally caps the
/// result by the ambient dimension.
pub fn next_depth<T: Real>(
    policy: &DepthPolicy<T>,
    k: usize,
    residual_norm: T,
    switched: bool,
) -> (usize, bool) {
    match *policy {
        DepthPolicy::Fixed(m) => (k.min(m), switched),
        DepthPolicy::Unbounded => (k.saturating_sub(1), switched),
        DepthPolicy::SwitchOnResidual {
            m_low,
            m_high,
            switch_tol,
        } => {
            let now = switched || residual_norm < switch_tol;
            (k.min(if now { m_high } else { m_low }), now)
        }
    }
}

/// Run the accelerated iteration until the residual norm drops below the
/// configured tolerance, `max_iterations` residuals have been computed, or
/// the iteration produces a non-finite residual.
pub fn solve<T: Real, Pr: FixedPointProblem<T>>(
    problem: &Pr,
    x0: &[T],
    config: AcceleratorConfig<T>,
) -> Result<RunReport<T>, SolveError> {
    let start = Instant::now();
    let max_iterations = config.max_iterations;
    let tolerance = config.residual_tolerance;
    let mut state = AcceleratorState::initialize(problem, x0, config)?;
    let mut steps = Vec::new();
    let initial_residual_norm = state.residual_norm();
    let mut termination = TerminationReason::MaxIterations;
    if initial_residual_norm < tolerance {
        termination = TerminationReason::Converged;
    } else {
        while state.k() < max_iterations {
            let diag = state.step(problem)?;
            let rn = diag.residual_norm;
            steps.push(diag);
            if !rn.is_finite() {
                termination = TerminationReason::Diverged;
                break;
            }
            if rn < tolerance {
                termination = TerminationReason::Converged;
                break;
            }
        }
    }
    Ok(RunReport {
        problem: problem.description(),
        initial_residual_norm,
        steps,
        final_iterate: state.iterate().to_vec(),
        termination,
        wall_time: start.elapsed(),
    })
}
