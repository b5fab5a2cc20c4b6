//! Thin (economy) QR factorization with incremental column append and
//! oldest-column drop, least-squares solving, and the column geometry
//! (direction sines/cosines, inverse-R entry bounds) used by the
//! convergence diagnostics.
//!
//! Columns are kept in insertion order: `push_column` appends at the end,
//! `drop_oldest` removes the first column. The diagonal of R is kept
//! positive.

use thiserror::Error;

use crate::scalar::{lit, Euclidean, InnerProduct, Real};
#[cfg(test)]
use crate::scalar::norm2;

/// Errors from factorization and related operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QrError {
    #[error("column {index} has zero norm")]
    DegenerateColumn { index: usize },
    #[error("cannot hold {m} columns in ambient dimension {n}")]
    Dimension { m: usize, n: usize },
    #[error("column length {got} does not match ambient dimension {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("new column is numerically dependent on the current columns (r/|a| = {ratio:.3e})")]
    RankDeficiency { ratio: f64 },
    #[error("factorization holds no columns")]
    EmptyFactorization,
    #[error("invalid geometry constants: need 0 < c_s <= 1 and 0 <= c_t < 1")]
    InvalidConstants,
}

/// Tolerances governing a [`ThinQr`]. All default to `1e-10`.
#[derive(Debug, Clone, Copy)]
pub struct QrOptions<T> {
    /// Maximum entry of |Q^T Q - I| before a full recompute is triggered.
    pub tau_orth: T,
    /// Relative reconstruction error tolerance (used by invariant checks).
    pub tau_recon: T,
    /// Rank cutoff on r_new/|a| when appending a column.
    pub tau_rank: T,
}

impl<T: Real> Default for QrOptions<T> {
    fn default() -> Self {
        QrOptions {
            tau_orth: lit(1e-10),
            tau_recon: lit(1e-10),
            tau_rank: lit(1e-10),
        }
    }
}

/// Thin QR factorization of an n x m matrix, m <= n, with the original
/// columns retained for recompute fallbacks and invariant checks.
///
/// Orthogonality is with respect to the inner product `P`; only the
/// Euclidean one ships.
#[derive(Debug, Clone)]
pub struct ThinQr<T, P = Euclidean> {
    n: usize,
    /// Original columns, oldest first.
    columns: Vec<Vec<T>>,
    /// Orthonormal columns of Q.
    q: Vec<Vec<T>>,
    /// Upper-triangular R, stored row-major as dense m x m.
    r: Vec<Vec<T>>,
    /// Norms of the original columns.
    column_norms: Vec<T>,
    opts: QrOptions<T>,
    product: P,
}

/// Per-column direction sines/cosines of a factorization, and the derived
/// window estimates c_s (smallest subspace sine) and c_t (largest cosine).
///
/// `sines[j] = r_jj / |a_j|` is the sine between column j and the span of
/// the columns before it; the first entry is 1 by convention.
#[derive(Debug, Clone)]
pub struct ColumnGeometry<T> {
    pub sines: Vec<T>,
    pub max_cosines: Vec<T>,
    pub c_s_estimate: T,
    pub c_t_estimate: T,
}

impl<T: Real> ThinQr<T> {
    /// An empty factorization in ambient dimension `n`.
    pub fn empty(n: usize) -> Self {
        Self::empty_with(n, QrOptions::default())
    }

    pub fn empty_with(n: usize, opts: QrOptions<T>) -> Self {
        Self::empty_in(n, Euclidean, opts)
    }

    /// Factor a set of columns (order preserved).
    pub fn factor(columns: &[Vec<T>]) -> Result<Self, QrError> {
        Self::factor_with(columns, QrOptions::default())
    }

    pub fn factor_with(columns: &[Vec<T>], opts: QrOptions<T>) -> Result<Self, QrError> {
        Self::factor_in(columns, Euclidean, opts)
    }
}

impl<T: Real, P: InnerProduct<T> + Clone> ThinQr<T, P> {
    /// An empty factorization orthogonal with respect to `product`.
    pub fn empty_in(n: usize, product: P, opts: QrOptions<T>) -> Self {
        ThinQr {
            n,
            columns: Vec::new(),
            q: Vec::new(),
            r: Vec::new(),
            column_norms: Vec::new(),
            opts,
            product,
        }
    }

    pub fn factor_in(columns: &[Vec<T>], product: P, opts: QrOptions<T>) -> Result<Self, QrError> {
        let n = columns.first().map(|c| c.len()).unwrap_or(0);
        let mut qr = Self::empty_in(n, product, opts);
        for (index, col) in columns.iter().enumerate() {
            qr.push_column(col).map_err(|e| match e {
                QrError::DegenerateColumn { .. } => QrError::DegenerateColumn { index },
                other => other,
            })?;
        }
        Ok(qr)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Current column count.
    pub fn m(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// The stored original columns, oldest first.
    pub fn columns(&self) -> &[Vec<T>] {
        &self.columns
    }

    pub fn column_norms(&self) -> &[T] {
        &self.column_norms
    }

    /// Entry of R (zero below the diagonal).
    pub fn r_entry(&self, i: usize, j: usize) -> T {
        self.r[i][j]
    }

    pub fn q_column(&self, j: usize) -> &[T] {
        &self.q[j]
    }

    pub fn options(&self) -> &QrOptions<T> {
        &self.opts
    }

    /// Append a column at the end. Rejects with [`QrError::RankDeficiency`]
    /// when the orthogonal remainder falls below `tau_rank * |col|`; the
    /// factorization is left untouched in every error case.
    ///
    /// Classical Gram-Schmidt with one reorthogonalization pass: O(n*m).
    pub fn push_column(&mut self, col: &[T]) -> Result<(), QrError> {
        if col.len() != self.n {
            return Err(QrError::LengthMismatch {
                expected: self.n,
                got: col.len(),
            });
        }
        let m = self.m();
        if m >= self.n {
            return Err(QrError::Dimension { m: m + 1, n: self.n });
        }
        let a_norm = self.product.norm(col);
        if a_norm == T::zero() {
            return Err(QrError::DegenerateColumn { index: m });
        }

        let mut u = col.to_vec();
        let mut coeffs = vec![T::zero(); m];
        for _pass in 0..2 {
            for (j, qj) in self.q.iter().enumerate() {
                let c = self.product.dot(qj, &u);
                coeffs[j] += c;
                for (ui, &qi) in u.iter_mut().zip(qj) {
                    *ui -= c * qi;
                }
            }
        }
        let rho = self.product.norm(&u);
        if rho / a_norm < self.opts.tau_rank {
            return Err(QrError::RankDeficiency {
                ratio: (rho / a_norm).to_f64().unwrap_or(0.0),
            });
        }

        for ui in u.iter_mut() {
            *ui /= rho;
        }
        for (row, &c) in self.r.iter_mut().zip(&coeffs) {
            row.push(c);
        }
        let mut last_row = vec![T::zero(); m + 1];
        last_row[m] = rho;
        self.r.push(last_row);
        self.q.push(u);
        self.columns.push(col.to_vec());
        self.column_norms.push(a_norm);
        Ok(())
    }

    /// Remove the oldest (first) column, downdating Q and R with Givens
    /// rotations in O(n*m). Falls back to a full recompute from the stored
    /// columns when the orthogonality defect exceeds `tau_orth`.
    #[allow(clippy::needless_range_loop)] // rotations touch row pairs in place
    pub fn drop_oldest(&mut self) -> Result<(), QrError> {
        let m = self.m();
        if m == 0 {
            return Err(QrError::EmptyFactorization);
        }
        // R without its first column is upper Hessenberg.
        let mut h: Vec<Vec<T>> = self
            .r
            .iter()
            .map(|row| row[1..].to_vec())
            .collect();
        for j in 0..m - 1 {
            let a = h[j][j];
            let b = h[j + 1][j];
            let r = a.hypot(b);
            let (c, s) = if r == T::zero() {
                (T::one(), T::zero())
            } else {
                (a / r, b / r)
            };
            for col in j..m - 1 {
                let hj = h[j][col];
                let hj1 = h[j + 1][col];
                h[j][col] = c * hj + s * hj1;
                h[j + 1][col] = -s * hj + c * hj1;
            }
            h[j + 1][j] = T::zero();
            for i in 0..self.n {
                let qa = self.q[j][i];
                let qb = self.q[j + 1][i];
                self.q[j][i] = c * qa + s * qb;
                self.q[j + 1][i] = -s * qa + c * qb;
            }
        }
        self.q.pop();
        h.pop();
        // Restore the positive-diagonal convention.
        for j in 0..m - 1 {
            if h[j][j] < T::zero() {
                for e in h[j].iter_mut() {
                    *e = -*e;
                }
                for e in self.q[j].iter_mut() {
                    *e = -*e;
                }
            }
        }
        self.r = h;
        self.columns.remove(0);
        self.column_norms.remove(0);

        if self.m() > 0 && self.orthogonality_defect() > self.opts.tau_orth {
            self.recompute()?;
        }
        Ok(())
    }

    /// Rebuild Q and R from the stored original columns.
    fn recompute(&mut self) -> Result<(), QrError> {
        let cols = std::mem::take(&mut self.columns);
        let fresh = Self::factor_in(&cols, self.product.clone(), self.opts)?;
        *self = fresh;
        Ok(())
    }

    /// Least-squares solve min |rhs - A x| over the stored columns A.
    ///
    /// Returns the coefficients (one per column, oldest first) and the
    /// residual norm sqrt(max(|rhs|^2 - |Q^T rhs|^2, 0)).
    #[allow(clippy::needless_range_loop)] // triangular back-substitution
    pub fn ls_solve(&self, rhs: &[T]) -> Result<(Vec<T>, T), QrError> {
        if rhs.len() != self.n {
            return Err(QrError::LengthMismatch {
                expected: self.n,
                got: rhs.len(),
            });
        }
        let m = self.m();
        let qt_rhs: Vec<T> = self.q.iter().map(|qj| self.product.dot(qj, rhs)).collect();
        let rhs_sq = self.product.dot(rhs, rhs);
        // coefficients live in R^m, so their norm is the plain one
        let proj_sq: T = qt_rhs.iter().map(|&c| c * c).sum();
        let resid = (rhs_sq - proj_sq).max(T::zero()).sqrt();

        // Back-substitute R x = Q^T rhs.
        let mut x = qt_rhs;
        for i in (0..m).rev() {
            let mut s = x[i];
            for j in i + 1..m {
                s -= self.r[i][j] * x[j];
            }
            x[i] = s / self.r[i][i];
        }
        Ok((x, resid))
    }

    /// Direction sines/cosines of each column against its predecessors.
    /// An empty factorization reports the trivial estimates c_s = 1, c_t = 0.
    pub fn column_geometry(&self) -> ColumnGeometry<T> {
        let m = self.m();
        if m == 0 {
            return ColumnGeometry {
                sines: Vec::new(),
                max_cosines: Vec::new(),
                c_s_estimate: T::one(),
                c_t_estimate: T::zero(),
            };
        }
        let mut sines = Vec::with_capacity(m);
        let mut max_cosines = Vec::with_capacity(m);
        for j in 0..m {
            if j == 0 {
                sines.push(T::one());
                max_cosines.push(T::zero());
            } else {
                sines.push(self.r[j][j] / self.column_norms[j]);
                let mc = (0..j)
                    .map(|i| (self.r[i][j] / self.column_norms[j]).abs())
                    .fold(T::zero(), T::max);
                max_cosines.push(mc);
            }
        }
        let c_s_estimate = sines[1..].iter().copied().fold(T::one(), T::min);
        let c_t_estimate = max_cosines[1..].iter().copied().fold(T::zero(), T::max);
        ColumnGeometry {
            sines,
            max_cosines,
            c_s_estimate,
            c_t_estimate,
        }
    }

    /// Entrywise bounds on |R^{-1}| implied by the geometry constants:
    /// the diagonal is 1/|a_1| (exact) and 1/(|a_i| c_s), the first row
    /// obeys |s_1j| <= c_t (c_t+c_s)^{j-2} / (|a_1| c_s^{j-1}) and rows
    /// i >= 2 obey |s_ij| <= c_t (c_t+c_s)^{j-i-1} / (|a_i| c_s^{j-i+1})
    /// (1-based indices). Returns a dense m x m matrix, zero below the
    /// diagonal.
    #[allow(clippy::needless_range_loop)]
    pub fn inv_r_entry_bounds(&self, c_s: T, c_t: T) -> Result<Vec<Vec<T>>, QrError> {
        if !(c_s > T::zero() && c_s <= T::one()) || !(c_t >= T::zero() && c_t < T::one()) {
            return Err(QrError::InvalidConstants);
        }
        let m = self.m();
        let mut bounds = vec![vec![T::zero(); m]; m];
        for i in 0..m {
            bounds[i][i] = if i == 0 {
                T::one() / self.column_norms[0]
            } else {
                T::one() / (self.column_norms[i] * c_s)
            };
            for j in i + 1..m {
                let d = (j - i) as i32;
                bounds[i][j] = if i == 0 {
                    c_t * (c_t + c_s).powi(d - 1) / (self.column_norms[0] * c_s.powi(d))
                } else {
                    c_t * (c_t + c_s).powi(d - 1) / (self.column_norms[i] * c_s.powi(d + 1))
                };
            }
        }
        Ok(bounds)
    }

    /// Largest entry of |Q^T Q - I|.
    pub fn orthogonality_defect(&self) -> T {
        let m = self.m();
        let mut worst = T::zero();
        for i in 0..m {
            for j in i..m {
                let g = self.product.dot(&self.q[i], &self.q[j]);
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// Largest relative error of Q R against the stored columns.
    pub fn reconstruction_error(&self) -> T {
        let m = self.m();
        let mut worst = T::zero();
        for j in 0..m {
            let mut err_sq = T::zero();
            for i in 0..self.n {
                let mut v = T::zero();
                for (p, qp) in self.q.iter().enumerate() {
                    v += qp[i] * self.r[p][j];
                }
                let d = v - self.columns[j][i];
                err_sq += d * d;
            }
            worst = worst.max(err_sq.sqrt() / self.column_norms[j]);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qr2(cols: &[Vec<f64>]) -> ThinQr<f64> {
        ThinQr::factor(cols).unwrap()
    }

    #[test]
    fn factor_hand_example() {
        // {(1,0),(1,1)} -> r = [[1,1],[0,1]], q1=(1,0), q2=(0,1)
        let qr = qr2(&[vec![1.0, 0.0], vec![1.0, 1.0]]);
        assert!((qr.r_entry(0, 0) - 1.0).abs() < 1e-14);
        assert!((qr.r_entry(0, 1) - 1.0).abs() < 1e-14);
        assert!((qr.r_entry(1, 1) - 1.0).abs() < 1e-14);
        assert!((qr.q_column(0)[0] - 1.0).abs() < 1e-14);
        assert!((qr.q_column(1)[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn factor_single_column() {
        let qr = qr2(&[vec![3.0, 4.0]]);
        assert!((qr.r_entry(0, 0) - 5.0).abs() < 1e-14);
        assert!((qr.q_column(0)[0] - 0.6).abs() < 1e-14);
        assert!((qr.q_column(0)[1] - 0.8).abs() < 1e-14);
    }

    #[test]
    fn factor_orthogonal_columns() {
        let qr = qr2(&[vec![2.0, 0.0], vec![0.0, 3.0]]);
        assert!((qr.r_entry(0, 0) - 2.0).abs() < 1e-14);
        assert!((qr.r_entry(1, 1) - 3.0).abs() < 1e-14);
        assert!(qr.r_entry(0, 1).abs() < 1e-14);
    }

    #[test]
    fn factor_rejects_zero_column() {
        let err = ThinQr::<f64>::factor(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap_err();
        assert_eq!(err, QrError::DegenerateColumn { index: 1 });
    }

    #[test]
    fn factor_rejects_too_many_columns() {
        let err =
            ThinQr::<f64>::factor(&[vec![1.0], vec![2.0]]).unwrap_err();
        assert!(matches!(err, QrError::Dimension { .. }));
    }

    #[test]
    fn append_matches_fresh_factor() {
        let mut qr = qr2(&[vec![1.0, 0.0]]);
        qr.push_column(&[1.0, 1.0]).unwrap();
        let fresh = qr2(&[vec![1.0, 0.0], vec![1.0, 1.0]]);
        for i in 0..2 {
            for j in 0..2 {
                assert!((qr.r[i][j] - fresh.r[i][j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn append_parallel_column_is_rank_deficient() {
        let mut qr = qr2(&[vec![1.0, 2.0, 3.0]]);
        let err = qr.push_column(&[2.0, 4.0, 6.0]).unwrap_err();
        assert!(matches!(err, QrError::RankDeficiency { .. }));
        assert_eq!(qr.m(), 1, "failed append must leave the factorization untouched");
    }

    #[test]
    fn append_orthogonal_column_has_zero_off_diagonal() {
        let mut qr = qr2(&[vec![1.0, 1.0, 0.0]]);
        qr.push_column(&[0.0, 0.0, 2.0]).unwrap();
        assert!(qr.r_entry(0, 1).abs() < 1e-12);
    }

    #[test]
    fn drop_oldest_hand_example() {
        let mut qr = qr2(&[vec![1.0, 0.0], vec![1.0, 1.0]]);
        qr.drop_oldest().unwrap();
        assert_eq!(qr.m(), 1);
        assert!((qr.r_entry(0, 0) - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn drop_from_empty_errors() {
        let mut qr = ThinQr::<f64>::empty(3);
        assert_eq!(qr.drop_oldest().unwrap_err(), QrError::EmptyFactorization);
    }

    #[test]
    fn drop_to_empty_is_allowed() {
        let mut qr = qr2(&[vec![1.0, 2.0]]);
        qr.drop_oldest().unwrap();
        assert_eq!(qr.m(), 0);
    }

    #[test]
    fn ls_solve_hand_projection() {
        // columns {(1,-1,0)}, rhs (1,0,0) -> coeff 1/2, residual 1/sqrt(2)
        let qr = qr2(&[vec![1.0, -1.0, 0.0]]);
        let (coeffs, res) = qr.ls_solve(&[1.0, 0.0, 0.0]).unwrap();
        assert!((coeffs[0] - 0.5).abs() < 1e-14);
        assert!((res - 1.0 / 2.0f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn ls_solve_in_span_and_orthogonal() {
        let qr = qr2(&[vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0]]);
        let rhs = [3.0, 2.0, 0.0];
        let (_, res) = qr.ls_solve(&rhs).unwrap();
        assert!(res <= 1e-10 * norm2(&rhs));
        let rhs_perp = [0.0, 0.0, 4.0];
        let (coeffs, res) = qr.ls_solve(&rhs_perp).unwrap();
        assert!(coeffs.iter().all(|c| c.abs() < 1e-12));
        assert!((res - 4.0).abs() < 1e-12);
    }

    #[test]
    fn geometry_hand_example() {
        // second column of {(1,0),(1,1)} meets the first at 45 degrees
        let qr = qr2(&[vec![1.0, 0.0], vec![1.0, 1.0]]);
        let geo = qr.column_geometry();
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        assert!((geo.sines[1] - inv_sqrt2).abs() < 1e-12);
        assert!((geo.max_cosines[1] - inv_sqrt2).abs() < 1e-12);
        assert!((geo.c_s_estimate - inv_sqrt2).abs() < 1e-12);
    }

    #[test]
    fn geometry_orthogonal_columns() {
        let qr = qr2(&[vec![2.0, 0.0], vec![0.0, 3.0]]);
        let geo = qr.column_geometry();
        assert!(geo.sines.iter().all(|&s| (s - 1.0).abs() < 1e-12));
        assert_eq!(geo.c_t_estimate, 0.0);
    }

    #[test]
    fn geometry_single_column() {
        let qr = qr2(&[vec![1.0, 2.0]]);
        let geo = qr.column_geometry();
        assert_eq!(geo.sines, vec![1.0]);
        assert_eq!(geo.c_s_estimate, 1.0);
        assert_eq!(geo.c_t_estimate, 0.0);
    }

    #[test]
    fn inv_r_bounds_hand_example() {
        // A with |a1|=2, |a2|=sqrt(2), R=[[2,1],[0,1]]: S=[[0.5,-0.5],[0,1]],
        // bounds met with equality at c_s=c_t=1/sqrt(2).
        let qr = qr2(&[vec![2.0, 0.0], vec![1.0, 1.0]]);
        assert!((qr.r_entry(0, 0) - 2.0).abs() < 1e-14);
        assert!((qr.r_entry(0, 1) - 1.0).abs() < 1e-14);
        assert!((qr.r_entry(1, 1) - 1.0).abs() < 1e-14);
        let c = 1.0 / 2.0f64.sqrt();
        let b = qr.inv_r_entry_bounds(c, c).unwrap();
        assert!((b[0][0] - 0.5).abs() < 1e-12);
        assert!((b[0][1] - 0.5).abs() < 1e-12);
        assert!((b[1][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inv_r_bounds_orthogonal_case() {
        let qr = qr2(&[vec![2.0, 0.0], vec![0.0, 3.0]]);
        let b = qr.inv_r_entry_bounds(1.0, 0.0).unwrap();
        assert_eq!(b[0][1], 0.0);
        assert!((b[0][0] - 0.5).abs() < 1e-14);
        assert!((b[1][1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn inv_r_bounds_rejects_bad_constants() {
        let qr = qr2(&[vec![1.0, 0.0]]);
        assert_eq!(qr.inv_r_entry_bounds(0.0, 0.5).unwrap_err(), QrError::InvalidConstants);
        assert_eq!(qr.inv_r_entry_bounds(0.5, 1.0).unwrap_err(), QrError::InvalidConstants);
    }
}
