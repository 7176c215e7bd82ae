//! Small dense linear algebra.
//!
//! Everything in this crate lives in low dimension (parameter vectors up to a
//! few hundred entries, matrices up to [`JACOBI_MAX_DIM`]), so a hand-rolled
//! row-major matrix plus a cyclic Jacobi eigensolver covers all needs:
//! quadratic objectives, SPD validation, update-operator products and their
//! Schatten 1-norms. Keeping this in-crate avoids pulling a large linear
//! algebra stack for what amounts to a few dozen lines of kernels, and gives
//! us an explicit non-convergence error path required by callers.

use crate::error::{LeapError, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Largest dimension accepted by the eigensolver-backed routines
/// ([`symmetric_eigenvalues`], [`singular_values`], [`schatten1`]).
pub const JACOBI_MAX_DIM: usize = 64;

const JACOBI_MAX_SWEEPS: usize = 64;

// ---------------------------------------------------------------------------
// Vector helpers
// ---------------------------------------------------------------------------

/// Dot product. Panics in debug builds on length mismatch.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Euclidean distance between two vectors of equal length.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// In-place `y += alpha * x`.
pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Elementwise `a - b` as a new vector.
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// True iff every entry is finite.
pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

// ---------------------------------------------------------------------------
// Matrix
// ---------------------------------------------------------------------------

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Square matrix with `diag` on the diagonal.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds a matrix from row slices. Errors if the rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(LeapError::DimensionMismatch {
                    context: "Matrix::from_rows",
                    expected: n_cols,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: n_rows,
            cols: n_cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    /// Matrix-vector product.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(self.cols, x.len());
        let mut out = vec![0.0; self.rows];
        for (r, out_r) in out.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            *out_r = dot(row, x);
        }
        out
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    out.data[r * out.cols + c] += a * other.get(k, c);
                }
            }
        }
        out
    }

    /// Transposed copy.
    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    /// Elementwise `self - other`.
    pub fn sub(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Scaled copy `factor * self`.
    pub fn scale(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * factor).collect(),
        }
    }

    /// `self^k` for square matrices by repeated multiplication (`k = 0` gives
    /// the identity). Exponents here are tiny, so no squaring tricks.
    pub fn power(&self, k: usize) -> Matrix {
        debug_assert!(self.is_square());
        let mut out = Matrix::identity(self.rows);
        for _ in 0..k {
            out = out.matmul(self);
        }
        out
    }

    /// Largest absolute difference between the matrix and its transpose.
    pub fn max_asymmetry(&self) -> f64 {
        debug_assert!(self.is_square());
        let mut worst: f64 = 0.0;
        for r in 0..self.rows {
            for c in (r + 1)..self.cols {
                worst = worst.max((self.get(r, c) - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Whether the matrix is symmetric up to `tol` (absolute, entrywise).
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.is_square() && self.max_asymmetry() <= tol
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// True iff every entry is finite.
    pub fn all_finite(&self) -> bool {
        all_finite(&self.data)
    }
}

// ---------------------------------------------------------------------------
// Eigenvalues / singular values
// ---------------------------------------------------------------------------

fn check_eigensolver_input(m: &Matrix, context: &'static str) -> Result<()> {
    if !m.is_square() {
        return Err(LeapError::DimensionMismatch {
            context: "symmetric_eigenvalues",
            expected: m.rows(),
            actual: m.cols(),
        });
    }
    if m.rows() > JACOBI_MAX_DIM {
        return Err(LeapError::Unsupported(format!(
            "{context}: dimension {} exceeds the eigensolver cap of {JACOBI_MAX_DIM}",
            m.rows()
        )));
    }
    if !m.all_finite() {
        return Err(LeapError::Numerical(format!(
            "{context}: matrix has non-finite entries"
        )));
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix, ascending, via cyclic Jacobi rotations.
///
/// Errors with [`LeapError::Numerical`] if the sweep limit is exhausted before
/// the off-diagonal mass drops below the convergence threshold, with
/// [`LeapError::Unsupported`] above [`JACOBI_MAX_DIM`], and with
/// [`LeapError::Config`] if the input is not symmetric.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    check_eigensolver_input(m, "symmetric_eigenvalues")?;
    if !m.is_symmetric(1e-9 * (1.0 + m.frobenius())) {
        return Err(LeapError::Config(format!(
            "symmetric_eigenvalues: matrix is not symmetric (max asymmetry {:.3e})",
            m.max_asymmetry()
        )));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a = m.clone();
    // Work on an explicitly symmetrized copy so tiny input asymmetry cannot
    // bias the rotations.
    for r in 0..n {
        for c in (r + 1)..n {
            let avg = 0.5 * (a.get(r, c) + a.get(c, r));
            a.set(r, c, avg);
            a.set(c, r, avg);
        }
    }
    let scale = a.frobenius().max(f64::MIN_POSITIVE);
    let tol = 1e-15 * scale;

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for r in 0..n {
            for c in (r + 1)..n {
                off += a.get(r, c) * a.get(r, c);
            }
        }
        if (2.0 * off).sqrt() <= tol {
            let mut eig: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
            eig.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
            return Ok(eig);
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= tol / (n as f64) {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    Err(LeapError::Numerical(format!(
        "jacobi eigensolver did not converge within {JACOBI_MAX_SWEEPS} sweeps (n = {n})"
    )))
}

/// Singular values of a square matrix, descending, computed as the square
/// roots of the eigenvalues of `MᵀM` (clamped at zero against roundoff).
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    check_eigensolver_input(m, "singular_values")?;
    let gram = m.transpose().matmul(m);
    let mut sv: Vec<f64> = symmetric_eigenvalues(&gram)?
        .into_iter()
        .map(|ev| ev.max(0.0).sqrt())
        .collect();
    sv.sort_by(|x, y| y.partial_cmp(x).expect("finite singular values"));
    Ok(sv)
}

/// Schatten 1-norm (nuclear norm): the sum of singular values.
pub fn schatten1(m: &Matrix) -> Result<f64> {
    Ok(singular_values(m)?.iter().sum())
}

// ---------------------------------------------------------------------------
// Random constructions
// ---------------------------------------------------------------------------

/// Random orthogonal matrix via Gram-Schmidt on a standard Gaussian matrix.
pub fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let mut q = Matrix::zeros(n, n);
    for r in 0..n {
        let mut v: Vec<f64> = (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        for prev in 0..r {
            let row: Vec<f64> = (0..n).map(|c| q.get(prev, c)).collect();
            let proj = dot(&v, &row);
            axpy(&mut v, -proj, &row);
        }
        let len = norm(&v);
        // Degenerate draws are vanishingly unlikely; renormalize or fall back
        // to a unit vector to stay orthonormal.
        if len < 1e-12 {
            v = vec![0.0; n];
            v[r] = 1.0;
        } else {
            for x in &mut v {
                *x /= len;
            }
        }
        for (c, &value) in v.iter().enumerate() {
            q.set(r, c, value);
        }
    }
    q
}

/// Random symmetric positive definite matrix `QᵀΛQ` with eigenvalues drawn
/// uniformly from `eigenvalue_range` (symmetrized so asymmetry stays at
/// machine level).
pub fn random_spd(n: usize, eigenvalue_range: (f64, f64), rng: &mut ChaCha8Rng) -> Result<Matrix> {
    let (lo, hi) = eigenvalue_range;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(LeapError::Config(format!(
            "random_spd: eigenvalue range must satisfy 0 < lo <= hi, got ({lo}, {hi})"
        )));
    }
    let q = random_orthogonal(n, rng);
    let eig: Vec<f64> = (0..n)
        .map(|_| {
            if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            }
        })
        .collect();
    let a = q
        .transpose()
        .matmul(&Matrix::from_diagonal(&eig))
        .matmul(&q);
    let mut sym = a.clone();
    for r in 0..n {
        for c in (r + 1)..n {
            let avg = 0.5 * (a.get(r, c) + a.get(c, r));
            sym.set(r, c, avg);
            sym.set(c, r, avg);
        }
    }
    Ok(sym)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    #[test]
    fn matvec_and_matmul_agree_with_hand_results() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(a.matvec(&[1.0, 1.0]), vec![3.0, 7.0]);
        let b = a.matmul(&Matrix::identity(2));
        assert_eq!(a, b);
        let sq = a.matmul(&a);
        assert_eq!(sq.get(0, 0), 7.0);
        assert_eq!(sq.get(1, 1), 22.0);
    }

    #[test]
    fn power_matches_repeated_matmul() {
        let a = Matrix::from_rows(&[vec![0.8, 0.1], vec![0.1, 0.6]]).unwrap();
        let p3 = a.power(3);
        let manual = a.matmul(&a).matmul(&a);
        for r in 0..2 {
            for c in 0..2 {
                assert!((p3.get(r, c) - manual.get(r, c)).abs() < 1e-15);
            }
        }
        assert_eq!(a.power(0), Matrix::identity(2));
    }

    #[test]
    fn eigenvalues_of_diagonal_matrix_are_its_entries() {
        let m = Matrix::from_diagonal(&[3.0, -1.0, 2.0]);
        let eig = symmetric_eigenvalues(&m).unwrap();
        assert_eq!(eig, vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn eigenvalues_match_2x2_closed_form() {
        // Eigenvalues of [[a, b], [b, d]] are ((a+d) ± sqrt((a-d)^2+4b^2))/2.
        let (a, b, d) = (2.0, 0.7, 1.1);
        let m = Matrix::from_rows(&[vec![a, b], vec![b, d]]).unwrap();
        let disc = ((a - d) * (a - d) + 4.0 * b * b).sqrt();
        let expected = [(a + d - disc) / 2.0, (a + d + disc) / 2.0];
        let eig = symmetric_eigenvalues(&m).unwrap();
        assert!((eig[0] - expected[0]).abs() < 1e-12);
        assert!((eig[1] - expected[1]).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_recover_planted_spectrum() {
        let mut rng = rng::stream(&[11, 0]);
        let planted = vec![0.5, 1.0, 2.5, 4.0, 9.0];
        let q = random_orthogonal(5, &mut rng);
        let a = q
            .transpose()
            .matmul(&Matrix::from_diagonal(&planted))
            .matmul(&q);
        let eig = symmetric_eigenvalues(&a).unwrap();
        for (got, want) in eig.iter().zip(&planted) {
            assert!(
                (got - want).abs() < 1e-10,
                "planted eigenvalue {want} recovered as {got}"
            );
        }
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let m = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            symmetric_eigenvalues(&m),
            Err(LeapError::Config(_))
        ));
    }

    #[test]
    fn dimension_cap_is_enforced() {
        let m = Matrix::identity(JACOBI_MAX_DIM + 1);
        assert!(matches!(
            symmetric_eigenvalues(&m),
            Err(LeapError::Unsupported(_))
        ));
    }

    #[test]
    fn singular_values_of_diagonal_are_absolute_entries() {
        let m = Matrix::from_diagonal(&[-3.0, 2.0, 0.5]);
        let sv = singular_values(&m).unwrap();
        assert!((sv[0] - 3.0).abs() < 1e-12);
        assert!((sv[1] - 2.0).abs() < 1e-12);
        assert!((sv[2] - 0.5).abs() < 1e-12);
        assert!((schatten1(&m).unwrap() - 5.5).abs() < 1e-12);
    }

    #[test]
    fn schatten1_is_orthogonally_invariant() {
        let mut rng = rng::stream(&[23, 1]);
        let a = random_spd(4, (0.5, 3.0), &mut rng).unwrap();
        let q = random_orthogonal(4, &mut rng);
        let rotated = q.transpose().matmul(&a).matmul(&q);
        let direct = schatten1(&a).unwrap();
        let invariant = schatten1(&rotated).unwrap();
        assert!((direct - invariant).abs() < 1e-9 * direct.max(1.0));
    }

    #[test]
    fn random_orthogonal_has_orthonormal_rows() {
        let mut rng = rng::stream(&[5, 2]);
        let q = random_orthogonal(6, &mut rng);
        let gram = q.matmul(&q.transpose());
        for r in 0..6 {
            for c in 0..6 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((gram.get(r, c) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_spd_is_positive_definite() {
        let mut rng = rng::stream(&[17, 3]);
        for trial in 0..10u64 {
            let a = random_spd(5, (0.2, 4.0), &mut rng).unwrap();
            assert!(a.is_symmetric(1e-12), "trial {trial} not symmetric");
            let eig = symmetric_eigenvalues(&a).unwrap();
            assert!(eig[0] > 0.15, "trial {trial} min eigenvalue {}", eig[0]);
            assert!(eig[4] < 4.05, "trial {trial} max eigenvalue {}", eig[4]);
        }
    }

    proptest! {
        // The eigenvalue sum of a symmetric matrix equals its trace, and the
        // spectrum is orthogonally invariant by construction of the solver.
        #[test]
        fn eigenvalue_sum_equals_trace(seed in 0u64..512, n in 2usize..7) {
            let mut rng = rng::stream(&[seed, 99]);
            let a = random_spd(n, (0.1, 5.0), &mut rng).unwrap();
            let eig = symmetric_eigenvalues(&a).unwrap();
            let trace: f64 = (0..n).map(|i| a.get(i, i)).sum();
            let sum: f64 = eig.iter().sum();
            prop_assert!((trace - sum).abs() < 1e-9 * (1.0 + trace.abs()));
        }

        // For SPD matrices the Schatten 1-norm coincides with the trace.
        #[test]
        fn schatten1_of_spd_equals_trace(seed in 0u64..256, n in 2usize..6) {
            let mut rng = rng::stream(&[seed, 101]);
            let a = random_spd(n, (0.3, 2.0), &mut rng).unwrap();
            let trace: f64 = (0..n).map(|i| a.get(i, i)).sum();
            let nuclear = schatten1(&a).unwrap();
            prop_assert!((trace - nuclear).abs() < 1e-8 * (1.0 + trace.abs()));
        }
    }
}
