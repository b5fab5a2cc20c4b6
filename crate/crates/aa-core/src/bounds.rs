//! Calculators for the one-step residual bounds and the constants that
//! enter them, so runs can be checked against the theory.
//!
//! The per-step bound on the residual ratio |w_{k+1}| / |w_k| splits into
//! a lower-order part `theta_k ((1 - beta) + kappa_g beta)` and a
//! higher-order part carrying a factor sqrt(1 - theta_k^2): a step whose
//! optimization achieved nothing (theta = 1) pays no higher-order price.

use thiserror::Error;

use crate::accel::RunReport;
use crate::scalar::{lit, Real};

/// Where the lower bound sigma in |w_{j+1} - w_j| >= sigma |e_j| comes
/// from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaSource {
    /// g contractive with kappa_g < 1: sigma = 1 - kappa_g.
    Contractive,
    /// Smallest singular value sigma_f of the Jacobian of f = g - x:
    /// sigma = sigma_f / 2 near the solution.
    JacobianLowerBound,
}

/// Operator constants feeding the bound calculators.
#[derive(Debug, Clone, Copy)]
pub struct OperatorConstants<T> {
    /// Bound on |g'(x)|.
    pub kappa_g: T,
    /// Lipschitz constant of g'.
    pub kappa_hat_g: T,
    /// Lower bound with |w_{j+1} - w_j| >= sigma |e_j|.
    pub sigma: T,
    pub sigma_source: SigmaSource,
    /// Lower bound on the subspace sines of the residual-difference
    /// columns.
    pub c_s: T,
    /// Upper bound on the pairwise direction cosines.
    pub c_t: T,
}

impl<T: Real> OperatorConstants<T> {
    /// Constants for a contractive operator (kappa_g < 1, sigma = 1 - kappa_g).
    pub fn contractive(kappa_g: T, kappa_hat_g: T, c_s: T, c_t: T) -> Result<Self, BoundsError> {
        if !(kappa_g < T::one()) {
            return Err(BoundsError::NotContractive);
        }
        let c = OperatorConstants {
            kappa_g,
            kappa_hat_g,
            sigma: T::one() - kappa_g,
            sigma_source: SigmaSource::Contractive,
            c_s,
            c_t,
        };
        c.validate()?;
        Ok(c)
    }

    /// Constants for the noncontractive setting, with sigma = sigma_f / 2
    /// from a lower bound on the Jacobian of f = g - x.
    pub fn from_jacobian_lower_bound(
        kappa_g: T,
        kappa_hat_g: T,
        sigma_f: T,
        c_s: T,
        c_t: T,
    ) -> Result<Self, BoundsError> {
        let c = OperatorConstants {
            kappa_g,
            kappa_hat_g,
            sigma: sigma_f / lit(2.0),
            sigma_source: SigmaSource::JacobianLowerBound,
            c_s,
            c_t,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), BoundsError> {
        if !(self.sigma > T::zero())
            || !(self.c_s > T::zero() && self.c_s <= T::one())
            || !(self.c_t >= T::zero() && self.c_t < T::one())
            || !(self.kappa_g > T::zero())
            || !(self.kappa_hat_g >= T::zero())
        {
            return Err(BoundsError::InvalidConstants);
        }
        if self.sigma_source == SigmaSource::Contractive && !(self.kappa_g < T::one()) {
            return Err(BoundsError::NotContractive);
        }
        Ok(())
    }

    /// Copy with different geometry constants.
    pub fn with_geometry(mut self, c_s: T, c_t: T) -> Self {
        self.c_s = c_s;
        self.c_t = c_t;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum BoundsError {
    #[error("invalid operator constants (need sigma > 0, 0 < c_s <= 1, 0 <= c_t < 1)")]
    InvalidConstants,
    #[error("operator is not contractive (kappa_g >= 1)")]
    NotContractive,
    #[error("window index outside j-m ..= j")]
    IndexOutOfWindow,
    #[error("window lengths do not match the depth")]
    WindowMismatch,
    #[error("depth must be at least 1")]
    DepthZero,
    #[error("run history too short to evaluate the bound")]
    InsufficientHistory,
}

/// One evaluated bound, split into its lower- and higher-order parts,
/// together with an echo of the inputs that produced it.
#[derive(Debug, Clone)]
pub struct BoundBreakdown<T> {
    pub lower_order: T,
    pub higher_order: T,
    /// Bound on the ratio |w_{k+1}| / |w_k|: lower + higher.
    pub total: T,
    pub inputs: BoundInputs<T>,
}

/// Record of the gains, dampings and residual norms a bound was built
/// from (ascending stage order).
#[derive(Debug, Clone, Default)]
pub struct BoundInputs<T> {
    pub thetas: Vec<T>,
    pub betas: Vec<T>,
    pub residual_norms: Vec<T>,
}

impl<T: Real> BoundBreakdown<T> {
    /// Bound on |w_{k+1}| itself.
    pub fn absolute(&self, w_k_norm: T) -> T {
        self.total * w_k_norm
    }
}

fn sin_from_theta<T: Real>(theta: T) -> T {
    (T::one() - theta * theta).max(T::zero()).sqrt()
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// The constant C_F of depth m:
/// sigma^{-1} (1 + (1+c_t) sum_{l=1}^{m-1} C(m-1,l) c_t^{l-1} c_s^{m-l-1} / c_s^{m-1}),
/// with the empty sum for m = 1. With orthogonal columns (c_t = 0,
/// c_s = 1) this collapses to m / sigma.
pub fn c_f_constant<T: Real>(m: usize, consts: &OperatorConstants<T>) -> Result<T, BoundsError> {
    consts.validate()?;
    if m == 0 {
        return Err(BoundsError::DepthZero);
    }
    let inv_sigma = T::one() / consts.sigma;
    if m == 1 {
        return Ok(inv_sigma);
    }
    let (c_s, c_t) = (consts.c_s, consts.c_t);
    let mut sum = T::zero();
    for l in 1..m {
        let b = T::from_f64(binomial(m - 1, l)).unwrap();
        // c_t^0 = 1 by convention, also when c_t = 0
        let ct_pow = if l == 1 { T::one() } else { c_t.powi(l as i32 - 1) };
        sum += b * ct_pow * c_s.powi((m - 1 - l) as i32);
    }
    Ok(inv_sigma * (T::one() + (T::one() + c_t) * sum / c_s.powi(m as i32 - 1)))
}

/// The window constant C_{n,j}: sigma^{-1} rho^{m-1} for n = j and
/// (sigma c_s)^{-1} rho^{m-(j-n+1)} for n < j, where rho = (c_t+c_s)/c_s.
pub fn c_n_constant<T: Real>(
    n: usize,
    j: usize,
    m: usize,
    consts: &OperatorConstants<T>,
) -> Result<T, BoundsError> {
    consts.validate()?;
    if m == 0 {
        return Err(BoundsError::DepthZero);
    }
    if n > j || j - n > m {
        return Err(BoundsError::IndexOutOfWindow);
    }
    let rho = (consts.c_t + consts.c_s) / consts.c_s;
    if n == j {
        Ok(rho.powi(m as i32 - 1) / consts.sigma)
    } else {
        let lag = (j - n) as i32;
        Ok(rho.powi(m as i32 - lag - 1) / (consts.sigma * consts.c_s))
    }
}

/// h(theta_j) = C_F sqrt(1 - theta_j^2) + beta_{j-1} theta_j.
pub fn h_function<T: Real>(theta: T, beta_prev: T, c_f: T) -> T {
    c_f * sin_from_theta(theta) + beta_prev * theta
}

/// h_j(theta_k) = C_{j,k} beta_{k-1} sqrt(1 - theta_k^2).
pub fn h_j_function<T: Real>(theta_k: T, beta_km1: T, c_jk: T) -> T {
    c_jk * beta_km1 * sin_from_theta(theta_k)
}

/// One-step ratio bound for depth m = 1:
///
/// ```text
/// |w_{k+1}|/|w_k| <= theta_k ((1-b_{k-1}) + kg b_{k-1})
///   + kg_hat/sigma sqrt(1-theta_k^2) ( |w_k|   (sqrt(1-theta_k^2)/sigma   + b_{k-1} theta_k)
///                                    + |w_{k-1}|(sqrt(1-theta_{k-1}^2)/sigma + b_{k-2} theta_{k-1}) )
/// ```
#[allow(clippy::too_many_arguments)]
pub fn bound_step_m1<T: Real>(
    theta_k: T,
    theta_km1: T,
    beta_km1: T,
    beta_km2: T,
    w_k_norm: T,
    w_km1_norm: T,
    consts: &OperatorConstants<T>,
) -> Result<BoundBreakdown<T>, BoundsError> {
    consts.validate()?;
    let inv_sigma = T::one() / consts.sigma;
    let s_k = sin_from_theta(theta_k);
    let s_km1 = sin_from_theta(theta_km1);
    let lower_order = theta_k * ((T::one() - beta_km1) + consts.kappa_g * beta_km1);
    let higher_order = consts.kappa_hat_g
        * inv_sigma
        * s_k
        * (w_k_norm * (inv_sigma * s_k + beta_km1 * theta_k)
            + w_km1_norm * (inv_sigma * s_km1 + beta_km2 * theta_km1));
    Ok(BoundBreakdown {
        lower_order,
        higher_order,
        total: lower_order + higher_order,
        inputs: BoundInputs {
            thetas: vec![theta_km1, theta_k],
            betas: vec![beta_km2, beta_km1],
            residual_norms: vec![w_km1_norm, w_k_norm],
        },
    })
}

/// One-step ratio bound for general depth m.
///
/// `thetas`, `betas` and `residual_norms` are windows of length m+1 in
/// ascending stage order theta_{k-m} .. theta_k; `betas[i]` is the damping
/// used at the step that produced the matching gain. For m = 1 this
/// delegates to [`bound_step_m1`], whose constants the depth-1 theory
/// states directly.
pub fn bound_step_general<T: Real>(
    thetas: &[T],
    betas: &[T],
    residual_norms: &[T],
    m: usize,
    consts: &OperatorConstants<T>,
) -> Result<BoundBreakdown<T>, BoundsError> {
    consts.validate()?;
    if m == 0 {
        return Err(BoundsError::DepthZero);
    }
    if thetas.len() != m + 1 || betas.len() != m + 1 || residual_norms.len() != m + 1 {
        return Err(BoundsError::WindowMismatch);
    }
    if m == 1 {
        return bound_step_m1(
            thetas[1],
            thetas[0],
            betas[1],
            betas[0],
            residual_norms[1],
            residual_norms[0],
            consts,
        );
    }

    let c_f = c_f_constant(m, consts)?;
    let theta_k = thetas[m];
    let beta_km1 = betas[m];
    let rho = (consts.c_t + consts.c_s) / consts.c_s;

    // h(theta_n) over the window, ascending.
    let h: Vec<T> = thetas
        .iter()
        .zip(betas)
        .map(|(&t, &b)| h_function(t, b, c_f))
        .collect();
    // h_j(theta_k) for j = k-m .. k-1, indexed by t = j - (k - m).
    let hj: Vec<T> = (0..m)
        .map(|t| {
            let c = if t == m - 1 {
                rho.powi(m as i32 - 1) / consts.sigma
            } else {
                rho.powi(t as i32) / (consts.sigma * consts.c_s)
            };
            h_j_function(theta_k, beta_km1, c)
        })
        .collect();

    let lower_order = theta_k * ((T::one() - beta_km1) + consts.kappa_g * beta_km1);

    let mut acc = residual_norms[m] * h[m] * hj[m - 1];
    let two = lit::<T>(2.0);
    for s in 1..m {
        let tail: T = hj[s..].iter().copied().sum();
        acc += two * residual_norms[s] * h[s] * tail;
    }
    let full_tail: T = hj.iter().copied().sum();
    acc += residual_norms[0] * h[0] * full_tail;
    let higher_order = consts.kappa_hat_g / two * acc;

    Ok(BoundBreakdown {
        lower_order,
        higher_order,
        total: lower_order + higher_order,
        inputs: BoundInputs {
            thetas: thetas.to_vec(),
            betas: betas.to_vec(),
            residual_norms: residual_norms.to_vec(),
        },
    })
}

/// Residual-sum threshold under which the depth-1 contractive iteration
/// (beta = 1) decreases monotonically:
/// |w_j| + |w_{j-1}| < sqrt(1-kappa_g^2)(1-kappa_g)^2 / (sqrt(2) kappa_hat_g).
pub fn monotonicity_threshold_m1<T: Real>(
    consts: &OperatorConstants<T>,
) -> Result<T, BoundsError> {
    if !(consts.kappa_g < T::one()) {
        return Err(BoundsError::NotContractive);
    }
    let kg = consts.kappa_g;
    let num = (T::one() - kg * kg).sqrt() * (T::one() - kg).powi(2);
    Ok(num / (lit::<T>(2.0).sqrt() * consts.kappa_hat_g))
}

/// The simplified contractive ratio bound for m = 1 and beta = 1:
/// theta_k kappa_g + sqrt(2) kappa_hat_g (1-kappa_g)^{-2} sqrt(1-theta_k^2)(|w_k| + |w_{k-1}|).
pub fn contractive_ratio_bound_m1<T: Real>(
    theta_k: T,
    w_k_norm: T,
    w_km1_norm: T,
    consts: &OperatorConstants<T>,
) -> Result<T, BoundsError> {
    if !(consts.kappa_g < T::one()) {
        return Err(BoundsError::NotContractive);
    }
    let kg = consts.kappa_g;
    let s = sin_from_theta(theta_k);
    Ok(theta_k * kg
        + lit::<T>(2.0).sqrt() * consts.kappa_hat_g / (T::one() - kg).powi(2)
            * s
            * (w_k_norm + w_km1_norm))
}

/// General-depth monotonicity threshold
/// 2 (1-kappa_g) / (C sqrt(1+C^2) kappa_hat_g) with
/// C = max{ (sigma c_s)^{-1} rho^{m-1}, C_F } and sigma = 1 - kappa_g.
///
/// The quantity compared against the threshold is the weighted window sum
/// |w_j| + 2 sum_{n=j-m+1}^{j-1} |w_n| + |w_{j-m}|.
pub fn monotonicity_threshold_general<T: Real>(
    m: usize,
    consts: &OperatorConstants<T>,
) -> Result<T, BoundsError> {
    if !(consts.kappa_g < T::one()) {
        return Err(BoundsError::NotContractive);
    }
    if m == 0 {
        return Err(BoundsError::DepthZero);
    }
    let sigma = T::one() - consts.kappa_g;
    let mut contractive = *consts;
    contractive.sigma = sigma;
    let rho = (consts.c_t + consts.c_s) / consts.c_s;
    let c1 = rho.powi(m as i32 - 1) / (sigma * consts.c_s);
    let c2 = c_f_constant(m, &contractive)?;
    let c = c1.max(c2);
    Ok(lit::<T>(2.0) * sigma / (c * (T::one() + c * c).sqrt() * consts.kappa_hat_g))
}

/// Which form of the one-step bound the run is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMode {
    M1,
    General,
}

/// Where the geometry constants for the check come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeometryEstimate<T> {
    /// Run-wide extrema of the per-step measured column geometry.
    Measured,
    /// Caller-supplied values.
    Fixed { c_s: T, c_t: T },
}

/// One row of a bound-check table: the measured ratio |w_k| / |w_{k-1}|
/// against the predicted bound for it.
#[derive(Debug, Clone)]
pub struct BoundCheckRow<T> {
    /// Residual index k of the ratio numerator.
    pub k: usize,
    pub measured_ratio: T,
    pub bound: BoundBreakdown<T>,
    pub satisfied: bool,
}

/// Run-wide extrema of the measured column geometry over all steps with a
/// window of at least two columns; (1, 0) when no such step exists.
pub fn measured_geometry_extrema<T: Real>(report: &RunReport<T>) -> (T, T) {
    let mut c_s = T::one();
    let mut c_t = T::zero();
    for step in &report.steps {
        if step.m_k_used >= 2 {
            c_s = c_s.min(step.geometry.c_s_estimate);
            c_t = c_t.max(step.geometry.c_t_estimate);
        }
    }
    (c_s, c_t)
}

/// Compare every checkable residual ratio of a run against the one-step
/// bound. A ratio at index k is checkable when the full window of gains
/// it needs has been recorded and (for the general mode) the window depth
/// was uniform. The satisfied flag allows a 1e-9 relative slack.
pub fn check_run_against_bounds<T: Real>(
    report: &RunReport<T>,
    consts: &OperatorConstants<T>,
    mode: BoundMode,
    geometry: GeometryEstimate<T>,
) -> Result<Vec<BoundCheckRow<T>>, BoundsError> {
    let consts = match geometry {
        GeometryEstimate::Measured => {
            let (c_s, c_t) = measured_geometry_extrema(report);
            consts.with_geometry(c_s, c_t)
        }
        GeometryEstimate::Fixed { c_s, c_t } => consts.with_geometry(c_s, c_t),
    };
    consts.validate()?;

    let norms = report.residual_norms();
    let total = norms.len();
    // diagnostics for residual index k live at steps[k - 2]
    let diag = |k: usize| &report.steps[k - 2];
    let slack = T::one() + lit::<T>(1e-9);

    let mut rows = Vec::new();
    for k in 2..=total {
        let ratio = norms[k - 1] / norms[k - 2];
        let bound = match mode {
            BoundMode::M1 => {
                if k < 4 {
                    continue;
                }
                let (dk, dkm1) = (diag(k - 1), diag(k - 2));
                bound_step_m1(
                    dk.theta,
                    dkm1.theta,
                    dk.beta_used,
                    dkm1.beta_used,
                    norms[k - 2],
                    norms[k - 3],
                    &consts,
                )?
            }
            BoundMode::General => {
                if k < 3 {
                    continue;
                }
                let m = diag(k - 1).m_k_used.max(1);
                if k < m + 3 {
                    continue;
                }
                let window: Vec<&crate::accel::StepDiagnostics<T>> =
                    (k - 1 - m..=k - 1).map(diag).collect();
                if window.iter().any(|d| d.m_k_used != m) {
                    continue;
                }
                let thetas: Vec<T> = window.iter().map(|d| d.theta).collect();
                let betas: Vec<T> = window.iter().map(|d| d.beta_used).collect();
                let ws: Vec<T> = (k - 1 - m..=k - 1).map(|i| norms[i - 1]).collect();
                bound_step_general(&thetas, &betas, &ws, m, &consts)?
            }
        };
        let satisfied = ratio <= bound.total * slack;
        rows.push(BoundCheckRow {
            k,
            measured_ratio: ratio,
            bound,
            satisfied,
        });
    }
    if rows.is_empty() {
        return Err(BoundsError::InsufficientHistory);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts(kappa_g: f64, kappa_hat_g: f64, sigma: f64) -> OperatorConstants<f64> {
        OperatorConstants {
            kappa_g,
            kappa_hat_g,
            sigma,
            sigma_source: SigmaSource::JacobianLowerBound,
            c_s: 1.0,
            c_t: 0.0,
        }
    }

    #[test]
    fn c_f_m1_is_inverse_sigma() {
        let c = consts(2.0, 1.0, 0.5);
        assert_eq!(c_f_constant(1, &c).unwrap(), 2.0);
    }

    #[test]
    fn c_f_orthogonal_columns_is_m_over_sigma() {
        for m in 1..8 {
            for &sigma in &[0.5, 1.0, 2.0] {
                let c = consts(2.0, 1.0, sigma);
                let cf = c_f_constant(m, &c).unwrap();
                assert!(
                    (cf - m as f64 / sigma).abs() < 1e-12,
                    "m={m} sigma={sigma}: {cf}"
                );
            }
        }
    }

    #[test]
    fn c_f_hand_value_m2() {
        // m=2, c_s=c_t=1/sqrt(2), sigma=1 -> 2 + sqrt(2)
        let c = consts(2.0, 1.0, 1.0).with_geometry(1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt());
        let cf = c_f_constant(2, &c).unwrap();
        assert!((cf - (2.0 + 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn c_n_examples() {
        let c = consts(2.0, 1.0, 0.5);
        // n = j, m = 1 -> 1/sigma
        assert!((c_n_constant(7, 7, 1, &c).unwrap() - 2.0).abs() < 1e-14);
        // n = j-1, m = 2 -> 1/(sigma c_s)
        assert!((c_n_constant(6, 7, 2, &c).unwrap() - 2.0).abs() < 1e-14);
        // n = j, m = 3, c_t = c_s -> 4/sigma
        let c2 = consts(2.0, 1.0, 1.0).with_geometry(0.5, 0.5);
        assert!((c_n_constant(7, 7, 3, &c2).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(
            c_n_constant(3, 7, 2, &c).unwrap_err(),
            BoundsError::IndexOutOfWindow
        );
    }

    #[test]
    fn h_functions() {
        assert!((h_function(1.0f64, 0.3, 5.0) - 0.3).abs() < 1e-15);
        assert!((h_function(0.0f64, 0.3, 5.0) - 5.0).abs() < 1e-15);
        assert_eq!(h_j_function(1.0f64, 0.3, 5.0), 0.0);
        assert!((h_j_function(0.0f64, 0.3, 5.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn h_maximum_bound() {
        // max over theta of C sqrt(1-t^2) + t is sqrt(1+C^2) (beta = 1)
        for &cf in &[0.5f64, 1.0, 3.0] {
            let cap = (1.0 + cf * cf).sqrt();
            for i in 0..=1000 {
                let t = i as f64 / 1000.0;
                assert!(h_function(t, 1.0, cf) <= cap + 1e-12);
            }
        }
    }

    #[test]
    fn m1_bound_theta_one_kills_higher_order() {
        let c = consts(6.609, 1.0, 1.0);
        let b = bound_step_m1(1.0, 0.7, 0.1, 0.1, 5.0, 7.0, &c).unwrap();
        assert_eq!(b.higher_order, 0.0);
        assert!((b.lower_order - (0.9 + 0.6609)).abs() < 1e-12);
    }

    #[test]
    fn m1_bound_theta_zero_has_no_lower_order() {
        // theta_k = 0: higher_order = kh/s^2 |w_k| + kh/s |w_{k-1}| (sqrt(1-t1^2)/s + b t1)
        let sigma = 2.0;
        let c = consts(6.609, 1.0, sigma);
        let (wk, wkm1, beta, th1) = (3.0, 4.0, 0.25, 0.6);
        let b = bound_step_m1(0.0, th1, beta, beta, wk, wkm1, &c).unwrap();
        assert_eq!(b.lower_order, 0.0);
        let s1 = (1.0 - th1 * th1).sqrt();
        let expect = wk / (sigma * sigma) + wkm1 / sigma * (s1 / sigma + beta * th1);
        assert!((b.higher_order - expect).abs() < 1e-12);
    }

    #[test]
    fn general_reduces_to_m1() {
        let c = consts(6.609, 1.0, 1.0).with_geometry(0.7, 0.5);
        let b1 = bound_step_m1(0.4, 0.9, 0.5, 0.5, 2.0, 3.0, &c).unwrap();
        let bg = bound_step_general(&[0.9, 0.4], &[0.5, 0.5], &[3.0, 2.0], 1, &c).unwrap();
        assert!((b1.total - bg.total).abs() < 1e-12);
        assert!((b1.lower_order - bg.lower_order).abs() < 1e-12);
        assert!((b1.higher_order - bg.higher_order).abs() < 1e-12);
    }

    #[test]
    fn general_theta_one_kills_higher_order() {
        let c = consts(6.609, 1.0, 1.0).with_geometry(0.5, 0.3);
        let b = bound_step_general(
            &[0.2, 0.5, 0.7, 1.0],
            &[0.5; 4],
            &[4.0, 3.0, 2.0, 1.0],
            3,
            &c,
        )
        .unwrap();
        assert_eq!(b.higher_order, 0.0);
    }

    #[test]
    fn general_window_mismatch() {
        let c = consts(6.609, 1.0, 1.0);
        assert_eq!(
            bound_step_general(&[0.5, 0.5], &[0.5, 0.5], &[1.0], 1, &c).unwrap_err(),
            BoundsError::WindowMismatch
        );
    }

    #[test]
    fn monotonicity_m1_hand_values() {
        let c = OperatorConstants::<f64>::contractive(0.5, 1.0, 1.0, 0.0).unwrap();
        let t = monotonicity_threshold_m1(&c).unwrap();
        assert!((t - 0.75f64.sqrt() * 0.25 / 2f64.sqrt()).abs() < 1e-14);

        let c0 = OperatorConstants::<f64>::contractive(1e-12, 1.0, 1.0, 0.0).unwrap();
        let t0 = monotonicity_threshold_m1(&c0).unwrap();
        assert!((t0 - 1.0 / 2f64.sqrt()).abs() < 1e-9);

        let c_near1 = OperatorConstants::<f64>::contractive(1.0 - 1e-6, 1.0, 1.0, 0.0).unwrap();
        assert!(monotonicity_threshold_m1(&c_near1).unwrap() < 1e-11);

        let mut nc = consts(1.5, 1.0, 1.0);
        nc.sigma_source = SigmaSource::JacobianLowerBound;
        assert_eq!(
            monotonicity_threshold_m1(&nc).unwrap_err(),
            BoundsError::NotContractive
        );
    }

    #[test]
    fn contractive_ratio_bound_hand_value() {
        // theta 0.6, kg 0.5, kh 1, |w| sums 0.3:
        // 0.6*0.5 + sqrt(2)*0.8/(0.25)*0.3
        let c = OperatorConstants::<f64>::contractive(0.5, 1.0, 1.0, 0.0).unwrap();
        let b = contractive_ratio_bound_m1(0.6, 0.2, 0.1, &c).unwrap();
        let expect = 0.3 + 2f64.sqrt() * 0.8 / 0.25 * 0.3;
        assert!((b - expect).abs() < 1e-13, "{b} vs {expect}");
        let nc = consts(2.0, 1.0, 1.0);
        assert_eq!(
            contractive_ratio_bound_m1(0.5, 1.0, 1.0, &nc).unwrap_err(),
            BoundsError::NotContractive
        );
    }

    #[test]
    fn monotonicity_general_hand_values() {
        // m = 1, c_s = 1, c_t = 0: C = 1/(1-kg)
        let kg = 0.5f64;
        let c = OperatorConstants::contractive(kg, 1.0, 1.0, 0.0).unwrap();
        let t = monotonicity_threshold_general(1, &c).unwrap();
        let cc = 1.0 / (1.0 - kg);
        let expect = 2.0 * (1.0 - kg) / (cc * (1.0 + cc * cc).sqrt());
        assert!((t - expect).abs() < 1e-13);
        // m = 3 orthogonal case: C = 3/sigma
        let t3 = monotonicity_threshold_general(3, &c).unwrap();
        let c3 = 3.0 / (1.0 - kg);
        let expect3 = 2.0 * (1.0 - kg) / (c3 * (1.0 + c3 * c3).sqrt());
        assert!((t3 - expect3).abs() < 1e-13);
    }

    #[test]
    fn monotonicity_threshold_decreases_in_m() {
        let c = OperatorConstants::<f64>::contractive(0.3, 1.0, 0.8, 0.4).unwrap();
        let mut prev = f64::INFINITY;
        for m in 1..10 {
            let t = monotonicity_threshold_general(m, &c).unwrap();
            assert!(t < prev, "threshold not decreasing at m={m}");
            prev = t;
        }
    }

    #[test]
    fn ratio_maximization_inequality() {
        // theta kg + A sqrt(1-theta^2) <= sqrt(kg^2 + A^2) on a grid
        for &(kg, a) in &[(0.5f64, 1.0), (0.9, 0.1), (0.2, 3.0)] {
            let cap = (kg * kg + a * a).sqrt();
            for i in 0..=1000 {
                let t = i as f64 / 1000.0;
                let val = t * kg + a * (1.0 - t * t).sqrt();
                assert!(val <= cap + 1e-12);
            }
        }
    }

    #[test]
    fn cf_monotone_in_geometry() {
        let base = consts(2.0, 1.0, 1.0);
        for m in 2..6 {
            let mut prev = 0.0;
            for i in 1..=10 {
                let ct = i as f64 * 0.09;
                let cf = c_f_constant(m, &base.with_geometry(0.5, ct)).unwrap();
                assert!(cf >= prev, "C_F not nondecreasing in c_t");
                prev = cf;
            }
            let mut prev = f64::INFINITY;
            for i in 1..=10 {
                let cs = i as f64 * 0.1;
                let cf = c_f_constant(m, &base.with_geometry(cs, 0.3)).unwrap();
                assert!(cf <= prev, "C_F not nonincreasing in c_s");
                prev = cf;
            }
        }
    }
}
