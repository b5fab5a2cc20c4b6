//! 4D polynomial fixed-point system with known fixed point (1, 1, 1, 1).
//!
//! The map is noncontractive around the fixed point, so the plain Picard
//! iteration fails on it, while the Jacobian of f(x) = g(x) - x is
//! symmetric positive definite near the solution.

use crate::accel::{EvaluationError, FixedPointProblem};
use crate::scalar::{lit, Real};

/// Standard initial guess for the problem.
pub const POLY_INITIAL_GUESS: [f64; 4] = [1.2, 1.2, 1.2, 1.2];

/// Evaluate the polynomial map. The first three components carry a cubic
/// term x_i^3/6; the fourth is purely linear.
pub fn poly_g<T: Real>(x: &[T]) -> [T; 4] {
    let sixth = T::one() / lit::<T>(6.0);
    let half = lit::<T>(0.5);
    let (x1, x2, x3, x4) = (x[0], x[1], x[2], x[3]);
    [
        sixth * x1.powi(3) + lit::<T>(4.0) * x1 + x2 + half * x3 + x4 - (lit::<T>(5.5) + sixth),
        x1 + sixth * x2.powi(3) + lit::<T>(3.0) * x2 + half * x3 + half * x4
            - (lit::<T>(4.0) + sixth),
        half * x1 + half * x2 + sixth * x3.powi(3) + lit::<T>(5.0) * x3 + x4
            - (lit::<T>(6.0) + sixth),
        x1 + half * x2 + x3 + lit::<T>(4.0) * x4 - lit::<T>(5.5),
    ]
}

/// Analytic Jacobian of [`poly_g`]: the constant symmetric linear part
/// plus x_i^2/2 on the first three diagonal entries.
pub fn poly_g_jacobian<T: Real>(x: &[T]) -> [[T; 4]; 4] {
    let half = lit::<T>(0.5);
    let one = T::one();
    let mut j = [
        [lit::<T>(4.0), one, half, one],
        [one, lit::<T>(3.0), half, half],
        [half, half, lit::<T>(5.0), one],
        [one, half, one, lit::<T>(4.0)],
    ];
    for i in 0..3 {
        j[i][i] += half * x[i] * x[i];
    }
    j
}

/// The polynomial system as a [`FixedPointProblem`].
#[derive(Debug, Clone, Copy, Default)]
pub struct PolynomialProblem;

impl<T: Real> FixedPointProblem<T> for PolynomialProblem {
    fn dimension(&self) -> usize {
        4
    }

    fn evaluate(&self, x: &[T]) -> Result<Vec<T>, EvaluationError> {
        Ok(poly_g(x).to_vec())
    }

    fn description(&self) -> String {
        "4D polynomial system".to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_is_all_ones() {
        let g = poly_g(&[1.0f64, 1.0, 1.0, 1.0]);
        for v in g {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_terms_at_origin() {
        let g = poly_g(&[0.0f64; 4]);
        let sixth = 1.0 / 6.0;
        assert!((g[0] + 5.5 + sixth).abs() < 1e-14);
        assert!((g[1] + 4.0 + sixth).abs() < 1e-14);
        assert!((g[2] + 6.0 + sixth).abs() < 1e-14);
        assert!((g[3] + 5.5).abs() < 1e-14);
    }

    #[test]
    fn regression_fixture_at_initial_guess() {
        // Independent evaluation: 1.2^3/6 = 0.288 and the linear parts
        // summed by hand.
        let g = poly_g(&POLY_INITIAL_GUESS);
        let c = 1.728 / 6.0;
        let expect = [
            c + 4.8 + 1.2 + 0.6 + 1.2 - 5.5 - 1.0 / 6.0,
            1.2 + c + 3.6 + 0.6 + 0.6 - 4.0 - 1.0 / 6.0,
            0.6 + 0.6 + c + 6.0 + 1.2 - 6.0 - 1.0 / 6.0,
            1.2 + 0.6 + 1.2 + 4.8 - 5.5,
        ];
        for (got, want) in g.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn jacobian_is_symmetric() {
        let j = poly_g_jacobian(&[1.3f64, -0.2, 0.7, 2.0]);
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(j[a][b], j[b][a]);
            }
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        // 10 fixed pseudo-random points, step 1e-5, relative error <= 1e-6
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut rand = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        };
        let h = 1e-5;
        for _ in 0..10 {
            let x: Vec<f64> = (0..4).map(|_| rand()).collect();
            let j = poly_g_jacobian(&x);
            for col in 0..4 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[col] += h;
                xm[col] -= h;
                let gp = poly_g(&xp);
                let gm = poly_g(&xm);
                for row in 0..4 {
                    let fd = (gp[row] - gm[row]) / (2.0 * h);
                    let denom = j[row][col].abs().max(1.0);
                    assert!(
                        (fd - j[row][col]).abs() / denom <= 1e-6,
                        "row {row} col {col}: fd {fd} vs {}",
                        j[row][col]
                    );
                }
            }
        }
    }
}
