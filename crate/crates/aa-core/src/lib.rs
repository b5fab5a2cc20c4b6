//! Anderson acceleration for fixed-point iterations, with the one-step
//! residual bounds and per-step diagnostics (optimization gain, coefficient
//! vectors, column geometry) needed to check runs against the theory.
//!
//! Everything numerical is generic over the scalar type via [`scalar::Real`]
//! (`f32` or `f64`); the aliases below fix `f64`, which the built-in
//! experiments use.
//!
//! ```
//! use aa_core::{solve, AcceleratorConfig, DepthPolicy, FnProblem, TerminationReason};
//!
//! let problem = FnProblem::new(1, "halving", |x: &[f64]| vec![0.5 * x[0]]);
//! let mut config = AcceleratorConfig::new(DepthPolicy::Fixed(1), 1.0);
//! config.residual_tolerance = 1e-12;
//! let report = solve(&problem, &[1.0], config).unwrap();
//! assert_eq!(report.termination, TerminationReason::Converged);
//! ```

// Validation uses negated comparisons (`!(x > 0)`) on purpose: they also
// reject NaN, which `x <= 0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accel;
pub mod bounds;
pub mod problems;
pub mod qr;
pub mod scalar;

pub use accel::{
    alpha_from_gamma, compute_gain, gamma_m1_closed_form, next_depth, solve,
    theta_m1_closed_form, AcceleratorConfig, AcceleratorState, DepthPolicy, FixedPointProblem,
    FnProblem, RankPolicy, RunReport, StepDiagnostics, TerminationReason,
};
pub use bounds::{
    bound_step_general, bound_step_m1, c_f_constant, c_n_constant, check_run_against_bounds,
    contractive_ratio_bound_m1, h_function, h_j_function, measured_geometry_extrema,
    monotonicity_threshold_general, monotonicity_threshold_m1, BoundBreakdown, BoundCheckRow,
    BoundMode, GeometryEstimate, OperatorConstants, SigmaSource,
};
pub use qr::{ColumnGeometry, QrOptions, ThinQr};
pub use scalar::{Euclidean, InnerProduct, Real};

/// `f64` aliases for the main types.
pub type ThinQr64 = qr::ThinQr<f64>;
pub type ColumnGeometry64 = qr::ColumnGeometry<f64>;
pub type AcceleratorConfig64 = accel::AcceleratorConfig<f64>;
pub type AcceleratorState64 = accel::AcceleratorState<f64>;
pub type StepDiagnostics64 = accel::StepDiagnostics<f64>;
pub type RunReport64 = accel::RunReport<f64>;
pub type OperatorConstants64 = bounds::OperatorConstants<f64>;
pub type BoundBreakdown64 = bounds::BoundBreakdown<f64>;

/// `f32` aliases.
pub type ThinQr32 = qr::ThinQr<f32>;
pub type AcceleratorConfig32 = accel::AcceleratorConfig<f32>;
pub type RunReport32 = accel::RunReport<f32>;
