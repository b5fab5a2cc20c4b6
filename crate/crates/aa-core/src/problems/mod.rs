//! Built-in fixed-point problems: the 4D polynomial system and the 1D
//! nonlinear Helmholtz iteration.

mod helmholtz;
mod polynomial;

pub use helmholtz::{
    complex_to_real, real_to_complex, solve_complex_tridiagonal, LayoutError, NlhError,
    NlhFixedPoint, NlhProblem, TridiagonalError,
};
pub use polynomial::{poly_g, poly_g_jacobian, PolynomialProblem, POLY_INITIAL_GUESS};
