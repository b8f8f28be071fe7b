use nalgebra::{DMatrix, DVector};

/// Solves H x = b for a symmetric positive-definite H (row-major, n×n).
///
/// Falls back to LU when the Cholesky factorization fails.
pub fn solve_spd(h: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let m = DMatrix::from_row_slice(n, n, h);
    let rhs = DVector::from_column_slice(b);
    let x = match m.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => m.lu().solve(&rhs)?,
    };
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}
