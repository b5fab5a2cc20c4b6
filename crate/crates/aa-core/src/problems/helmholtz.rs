//! 1D nonlinear Helmholtz equation on [0, 10] with Sommerfeld (Robin)
//! radiation conditions, discretized by second-order centered differences
//! with ghost points at both boundaries:
//!
//! ```text
//! u'' + k0^2 (1 + eps |u_prev|^2) u = 0,   0 < x < 10
//! u' + i k0 u = 2 i k0   at x = 0
//! u' - i k0 u = 0        at x = 10
//! ```
//!
//! Freezing |u_prev|^2 makes each outer iteration a complex tridiagonal
//! solve; the resulting map u -> g(u) is the fixed point problem handed
//! to the accelerator after flattening C^n into R^{2n}.

use num_complex::Complex;
use thiserror::Error;

use crate::accel::{EvaluationError, FixedPointProblem};
use crate::scalar::{lit, Real};

const DOMAIN_LENGTH: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NlhError {
    #[error("grid spacing {h} does not divide the domain length")]
    GridMismatch { h: f64 },
    #[error("nonlinearity coefficient must be nonnegative, got {epsilon}")]
    NegativeEpsilon { epsilon: f64 },
    #[error("grid function has {got} values, expected {expected}")]
    GridLength { expected: usize, got: usize },
    #[error(transparent)]
    Solve(#[from] TridiagonalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TridiagonalError {
    #[error("singular tridiagonal system (pivot below threshold at row {row})")]
    SingularSystem { row: usize },
    #[error("band arrays have inconsistent lengths")]
    BandLength,
}

/// Interleaved-layout error for the complex/real adapters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("real vector has odd length {0}; expected interleaved re/im pairs")]
pub struct LayoutError(pub usize);

/// Tridiagonal bands and right-hand side (sub, diag, sup, rhs).
type BandedSystem<T> = (Vec<Complex<T>>, Vec<Complex<T>>, Vec<Complex<T>>, Vec<Complex<T>>);

/// The discretized nonlinear Helmholtz problem.
#[derive(Debug, Clone)]
pub struct NlhProblem<T> {
    k0: T,
    epsilon: T,
    h: T,
    nodes: usize,
}

impl<T: Real> NlhProblem<T> {
    /// Build the problem on [0, 10]; `h` must divide the length to
    /// machine precision.
    pub fn new(k0: T, epsilon: T, h: T) -> Result<Self, NlhError> {
        let length = lit::<T>(DOMAIN_LENGTH);
        if epsilon < T::zero() {
            return Err(NlhError::NegativeEpsilon {
                epsilon: epsilon.to_f64().unwrap_or(f64::NAN),
            });
        }
        let steps_real = length / h;
        let steps = steps_real.round();
        if (steps_real - steps).abs() > T::epsilon() * steps_real.abs() * lit(8.0)
            || steps < T::one()
        {
            return Err(NlhError::GridMismatch {
                h: h.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(NlhProblem {
            k0,
            epsilon,
            h,
            nodes: steps.to_usize().unwrap() + 1,
        })
    }

    pub fn k0(&self) -> T {
        self.k0
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn grid_spacing(&self) -> T {
        self.h
    }

    /// Number of grid nodes (L/h + 1).
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// Node coordinates x_i = i h.
    pub fn grid(&self) -> Vec<T> {
        (0..self.nodes)
            .map(|i| T::from_usize(i).unwrap() * self.h)
            .collect()
    }

    /// Initial iterate u_0(x) = exp(i k0 x).
    pub fn initial_iterate(&self) -> Vec<Complex<T>> {
        self.grid()
            .into_iter()
            .map(|x| Complex::new(T::zero(), self.k0 * x).exp())
            .collect()
    }

    /// Tridiagonal system (sub, diag, sup, rhs) of the linearized equation
    /// at `u_prev`, scaled by h^2. Ghost-point elimination folds both Robin
    /// conditions into the first and last rows.
    fn assemble(&self, u_prev: &[Complex<T>]) -> BandedSystem<T> {
        let n = self.nodes;
        let h = self.h;
        let k0 = self.k0;
        let two = lit::<T>(2.0);
        let hh = h * h;
        let coeff = |u: &Complex<T>| self.k0 * self.k0 * (T::one() + self.epsilon * u.norm_sqr());

        let mut sub = vec![Complex::new(T::zero(), T::zero()); n - 1];
        let mut diag = vec![Complex::new(T::zero(), T::zero()); n];
        let mut sup = vec![Complex::new(T::zero(), T::zero()); n - 1];
        let mut rhs = vec![Complex::new(T::zero(), T::zero()); n];

        let i2hk = Complex::new(T::zero(), two * h * k0);
        diag[0] = Complex::new(-two + hh * coeff(&u_prev[0]), T::zero()) + i2hk;
        sup[0] = Complex::new(two, T::zero());
        rhs[0] = i2hk * two;
        for i in 1..n - 1 {
            sub[i - 1] = Complex::new(T::one(), T::zero());
            diag[i] = Complex::new(-two + hh * coeff(&u_prev[i]), T::zero());
            sup[i] = Complex::new(T::one(), T::zero());
        }
        sub[n - 2] = Complex::new(two, T::zero());
        diag[n - 1] = Complex::new(-two + hh * coeff(&u_prev[n - 1]), T::zero()) + i2hk;
        (sub, diag, sup, rhs)
    }

    /// One outer iteration: solve the linear system frozen at `u_prev`.
    pub fn fixed_point_map(&self, u_prev: &[Complex<T>]) -> Result<Vec<Complex<T>>, NlhError> {
        if u_prev.len() != self.nodes {
            return Err(NlhError::GridLength {
                expected: self.nodes,
                got: u_prev.len(),
            });
        }
        let (sub, diag, sup, rhs) = self.assemble(u_prev);
        Ok(solve_complex_tridiagonal(&sub, &diag, &sup, &rhs)?)
    }

    /// Relative residual |A u - b| / |b| of the assembled system, the
    /// direct-solve certificate.
    pub fn system_residual(&self, u_prev: &[Complex<T>], u: &[Complex<T>]) -> T {
        let (sub, diag, sup, rhs) = self.assemble(u_prev);
        let n = diag.len();
        let mut num = T::zero();
        let mut den = T::zero();
        for i in 0..n {
            let mut v = diag[i] * u[i];
            if i > 0 {
                v += sub[i - 1] * u[i - 1];
            }
            if i < n - 1 {
                v += sup[i] * u[i + 1];
            }
            num += (v - rhs[i]).norm_sqr();
            den += rhs[i].norm_sqr();
        }
        (num / den).sqrt()
    }
}

/// Thomas-style elimination for a complex tridiagonal system, with a
/// partial-pivot fallback (one-row look-ahead) whenever a pivot magnitude
/// drops below 1e-14. The matrix is not Hermitian positive definite, so
/// the guard is needed.
pub fn solve_complex_tridiagonal<T: Real>(
    sub: &[Complex<T>],
    diag: &[Complex<T>],
    sup: &[Complex<T>],
    rhs: &[Complex<T>],
) -> Result<Vec<Complex<T>>, TridiagonalError> {
    let n = diag.len();
    if n == 0 || rhs.len() != n || (n > 1 && (sub.len() != n - 1 || sup.len() != n - 1)) {
        return Err(TridiagonalError::BandLength);
    }
    let tiny = lit::<T>(1e-14);
    let zero = Complex::new(T::zero(), T::zero());

    // Working bands: b = diagonal, c = first superdiagonal, d = second
    // superdiagonal (fill-in from pivoting), a = subdiagonal.
    let mut a: Vec<Complex<T>> = sub.to_vec();
    let mut b: Vec<Complex<T>> = diag.to_vec();
    let mut c: Vec<Complex<T>> = sup.to_vec();
    let mut d: Vec<Complex<T>> = vec![zero; n];
    let mut y: Vec<Complex<T>> = rhs.to_vec();

    for i in 0..n - 1 {
        if b[i].norm() < tiny && a[i].norm() > b[i].norm() {
            // Swap rows i and i+1. Row i+1 cannot have fill-in yet, so the
            // band stays within two superdiagonals.
            let (bi, ci, di) = (b[i], c[i], d[i]);
            b[i] = a[i];
            a[i] = bi;
            c[i] = b[i + 1];
            b[i + 1] = ci;
            if i + 1 < n - 1 {
                d[i] = c[i + 1];
                c[i + 1] = di;
            } else {
                d[i] = zero;
            }
            y.swap(i, i + 1);
        }
        if b[i].norm() < tiny {
            return Err(TridiagonalError::SingularSystem { row: i });
        }
        let m = a[i] / b[i];
        b[i + 1] -= m * c[i];
        if i + 1 < n - 1 {
            c[i + 1] -= m * d[i];
        }
        y[i + 1] = y[i + 1] - m * y[i];
        a[i] = zero;
    }
    if b[n - 1].norm() < tiny {
        return Err(TridiagonalError::SingularSystem { row: n - 1 });
    }

    let mut x = vec![zero; n];
    x[n - 1] = y[n - 1] / b[n - 1];
    if n >= 2 {
        x[n - 2] = (y[n - 2] - c[n - 2] * x[n - 1]) / b[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (y[i] - c[i] * x[i + 1] - d[i] * x[i + 2]) / b[i];
    }
    Ok(x)
}

/// Flatten a complex grid function into an interleaved real vector
/// (re_0, im_0, re_1, im_1, ...). The Euclidean norms agree, so residual
/// norms and gains are layout independent.
pub fn complex_to_real<T: Real>(u: &[Complex<T>]) -> Vec<T> {
    let mut out = Vec::with_capacity(2 * u.len());
    for z in u {
        out.push(z.re);
        out.push(z.im);
    }
    out
}

/// Inverse of [`complex_to_real`]; fails on odd-length input.
pub fn real_to_complex<T: Real>(v: &[T]) -> Result<Vec<Complex<T>>, LayoutError> {
    if !v.len().is_multiple_of(2) {
        return Err(LayoutError(v.len()));
    }
    Ok(v.chunks_exact(2).map(|c| Complex::new(c[0], c[1])).collect())
}

/// The Helmholtz iteration as a real fixed-point problem on R^{2n}.
#[derive(Debug, Clone)]
pub struct NlhFixedPoint<T> {
    problem: NlhProblem<T>,
}

impl<T: Real> NlhFixedPoint<T> {
    pub fn new(problem: NlhProblem<T>) -> Self {
        NlhFixedPoint { problem }
    }

    pub fn problem(&self) -> &NlhProblem<T> {
        &self.problem
    }

    pub fn initial_iterate(&self) -> Vec<T> {
        complex_to_real(&self.problem.initial_iterate())
    }
}

impl<T: Real> FixedPointProblem<T> for NlhFixedPoint<T> {
    fn dimension(&self) -> usize {
        2 * self.problem.nodes()
    }

    fn evaluate(&self, x: &[T]) -> Result<Vec<T>, EvaluationError> {
        let u = real_to_complex(x).map_err(|e| EvaluationError(e.to_string()))?;
        let next = self
            .problem
            .fixed_point_map(&u)
            .map_err(|e| EvaluationError(e.to_string()))?;
        Ok(complex_to_real(&next))
    }

    fn description(&self) -> String {
        format!(
            "1D nonlinear Helmholtz (k0 = {}, eps = {}, h = {})",
            self.problem.k0, self.problem.epsilon, self.problem.h
        )
    }
}
