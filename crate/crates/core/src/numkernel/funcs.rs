use super::eigen::{hermitian_eig, HermitianEigen};
use super::matrix::{ComplexMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// Relative eigenvalue floor for the non-total matrix functions.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Scalar functions accepted by [`matrix_function`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatFn {
    Exp,
    Log,
    Sqrt,
    Inv,
    InvSqrt,
}

/// V diag(f(λ)) V† for Hermitian A.
///
/// `Log`, `Inv` and `InvSqrt` fail with `SingularOperand` when an eigenvalue
/// sits below `EIGEN_FLOOR` times the largest eigenvalue magnitude. `Sqrt`
/// clamps eigenvalues down to that floor to zero.
pub fn matrix_function(a: &ComplexMatrix, f: MatFn) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(a)?;
    spectral_function(&eig, f)
}

pub fn spectral_function(eig: &HermitianEigen, f: MatFn) -> Result<ComplexMatrix> {
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let floor = EIGEN_FLOOR * scale;
    let check_positive = |eig: &HermitianEigen| -> Result<()> {
        let lo = eig.min();
        if lo <= floor || scale == 0.0 {
            return Err(Error::SingularOperand { eigenvalue: lo, floor });
        }
        Ok(())
    };
    match f {
        MatFn::Exp => Ok(eig.map(f64::exp)),
        MatFn::Sqrt => {
            let lo = eig.min();
            if lo < -floor {
                return Err(Error::SingularOperand { eigenvalue: lo, floor: -floor });
            }
            Ok(eig.map(|x| x.max(0.0).sqrt()))
        }
        MatFn::Log => {
            check_positive(eig)?;
            Ok(eig.map(f64::ln))
        }
        MatFn::InvSqrt => {
            check_positive(eig)?;
            Ok(eig.map(|x| 1.0 / x.sqrt()))
        }
        MatFn::Inv => {
            if let Some(&bad) = eig.eigenvalues.iter().find(|x| x.abs() <= floor) {
                return Err(Error::SingularOperand { eigenvalue: bad, floor });
            }
            if scale == 0.0 {
                return Err(Error::SingularOperand { eigenvalue: 0.0, floor });
            }
            Ok(eig.map(|x| 1.0 / x))
        }
    }
}

/// e^{s·A} for Hermitian A and real s.
pub fn expm_hermitian(a: &ComplexMatrix, s: f64) -> Result<ComplexMatrix> {
    Ok(hermitian_eig(a)?.map(|x| (s * x).exp()))
}

/// e^{−i t A} for Hermitian A.
pub fn unitary_propagator(a: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(a)?;
    let v = &eig.eigenvectors;
    let n = eig.dim();
    let ph: Vec<C64> = eig.eigenvalues.iter().map(|&x| C64::from_polar(1.0, -t * x)).collect();
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| v.get(i, k) * ph[k] * v.get(j, k).conj()).sum()
    }))
}

/// Kronecker product, row = r_A·dim_B + r_B.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kron(b)
}

/// Which subsystem a partial trace keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Keep {
    A,
    B,
}

/// Partial trace of a (d_A·d_B)-square matrix.
pub fn partial_trace(m: &ComplexMatrix, dims: (usize, usize), keep: Keep) -> Result<ComplexMatrix> {
    let (da, db) = dims;
    if !m.is_square() || m.rows() != da * db || da == 0 || db == 0 {
        return Err(Error::DimensionMismatch(format!(
            "partial trace over ({da}, {db}) of a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    Ok(match keep {
        Keep::A => ComplexMatrix::from_fn(da, da, |i, j| {
            (0..db).fold(ZERO, |acc, k| acc + m.get(i * db + k, j * db + k))
        }),
        Keep::B => ComplexMatrix::from_fn(db, db, |i, j| {
            (0..da).fold(ZERO, |acc, k| acc + m.get(k * db + i, k * db + j))
        }),
    })
}

/// Partial transpose on subsystem B.
pub fn partial_transpose_b(m: &ComplexMatrix, dims: (usize, usize)) -> ComplexMatrix {
    let (da, db) = dims;
    assert_eq!(m.rows(), da * db, "partial transpose: dimension mismatch");
    ComplexMatrix::from_fn(da * db, da * db, |r, c| {
        let (ia, ib) = (r / db, r % db);
        let (ja, jb) = (c / db, c % db);
        m.get(ia * db + jb, ja * db + ib)
    })
}
