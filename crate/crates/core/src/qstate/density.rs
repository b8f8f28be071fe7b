use serde::{Deserialize, Serialize};

use super::literal::MatrixLiteral;
use crate::error::{Error, Result};
use crate::numkernel::{hermitian_eig, partial_trace, ComplexMatrix, Keep, C64};

/// Hermiticity, positivity and trace tolerance for accepted states.
pub const STATE_TOL: f64 = 1e-10;

/// Largest negativity that numerical pipelines may clip away.
pub const REPAIR_TOL: f64 = 1e-7;

/// Positive, unit-trace Hermitian matrix with an optional bipartite split.
///
/// Serializes as `{"state": <matrix literal>, "dims": [d_A, d_B]}`;
/// deserialization re-validates through [`DensityMatrix::from_numeric`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "StateRecord", try_from = "StateRecord")]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    dims: Option<(usize, usize)>,
}

impl DensityMatrix {
    /// Validates without modifying the input.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        validate(&matrix)?;
        Ok(Self { matrix, dims: None })
    }

    pub fn bipartite(matrix: ComplexMatrix, dims: (usize, usize)) -> Result<Self> {
        Self::new(matrix)?.with_dims(dims)
    }

    /// Accepts matrices produced by numerical pipelines.
    ///
    /// The Hermitian part is taken first. Inputs already within tolerance are
    /// kept as they are; small negative eigenvalues (down to `-REPAIR_TOL`)
    /// are clipped to zero and the trace renormalized.
    pub fn from_numeric(matrix: &ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch(format!("state must be square, got {}x{}", matrix.rows(), matrix.cols())));
        }
        let h = matrix.hermitian_part();
        let tr = h.trace().re;
        let eig = hermitian_eig(&h)?;
        if eig.min() >= -STATE_TOL && (tr - 1.0).abs() <= STATE_TOL {
            return Ok(Self { matrix: h, dims: None });
        }
        if eig.min() < -REPAIR_TOL * tr.abs().max(1.0) || tr <= 0.0 {
            return Err(Error::InvalidState(format!("min eigenvalue {:.3e}, trace {tr:.12}", eig.min())));
        }
        let clipped = eig.map(|x| x.max(0.0));
        let t = clipped.trace().re;
        Ok(Self { matrix: clipped.scale_re(1.0 / t), dims: None })
    }

    pub fn with_dims(mut self, dims: (usize, usize)) -> Result<Self> {
        if dims.0 * dims.1 != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "split ({}, {}) for a state of dimension {}",
                dims.0,
                dims.1,
                self.dim()
            )));
        }
        self.dims = Some(dims);
        Ok(self)
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self { matrix: ComplexMatrix::identity(d).scale_re(1.0 / d as f64), dims: None }
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalized) vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let n: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(n > 0.0) {
            return Err(Error::InvalidState("zero vector".into()));
        }
        Ok(Self { matrix: ComplexMatrix::outer(psi, psi).scale_re(1.0 / n), dims: None })
    }

    /// Computational-basis state |k⟩⟨k|.
    pub fn basis_state(d: usize, k: usize) -> Self {
        let mut m = ComplexMatrix::zeros(d, d);
        m.set(k, k, C64::new(1.0, 0.0));
        Self { matrix: m, dims: None }
    }

    /// Qubit state [[a, γ], [γ*, 1−a]]; requires |γ|² ≤ a(1−a).
    pub fn qubit_coherent(a: f64, gamma: C64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::InvalidState(format!("population a = {a} outside [0, 1]")));
        }
        if gamma.norm_sqr() > a * (1.0 - a) + 1e-15 {
            return Err(Error::InvalidState(format!("|γ|² = {} exceeds a(1−a) = {}", gamma.norm_sqr(), a * (1.0 - a))));
        }
        let m = ComplexMatrix::from_vec(2, 2, vec![C64::new(a, 0.0), gamma, gamma.conj(), C64::new(1.0 - a, 0.0)])?;
        Ok(Self { matrix: m, dims: None })
    }

    /// p|Φ⁺⟩⟨Φ⁺| + (1−p)I/4.
    pub fn werner(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidState(format!("Werner parameter p = {p} outside [0, 1]")));
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let phi = [C64::new(h, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(h, 0.0)];
        let bell = ComplexMatrix::outer(&phi, &phi);
        let m = &bell.scale_re(p) + &ComplexMatrix::identity(4).scale_re((1.0 - p) / 4.0);
        Ok(Self { matrix: m, dims: Some((2, 2)) })
    }

    pub fn product(a: &Self, b: &Self) -> Self {
        Self { matrix: a.matrix.kron(&b.matrix), dims: Some((a.dim(), b.dim())) }
    }

    /// Convex combination Σ w_k ρ_k (weights must be nonnegative and sum to one).
    pub fn mixture(terms: &[(f64, &Self)]) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::InvalidState("empty mixture".into()))?;
        let mut m = ComplexMatrix::zeros(first.1.dim(), first.1.dim());
        for (w, s) in terms {
            m.axpy(C64::new(*w, 0.0), s.matrix());
        }
        let mut out = Self::from_numeric(&m)?;
        out.dims = first.1.dims;
        Ok(out)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.dims
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eig(&self.matrix).map(|e| e.eigenvalues).unwrap_or_default()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(f64::NAN)
    }

    pub fn purity(&self) -> f64 {
        self.matrix.trace_product(&self.matrix).re
    }

    /// Reduced state of one party; requires a bipartite split.
    pub fn reduced(&self, keep: Keep) -> Result<Self> {
        let dims = self.dims.ok_or_else(|| Error::DimensionMismatch("state has no bipartite split".into()))?;
        Self::from_numeric(&partial_trace(&self.matrix, dims, keep)?)
    }

    /// Tr(ρ X) for Hermitian X.
    pub fn expect(&self, x: &ComplexMatrix) -> f64 {
        self.matrix.expectation(x)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.matrix.distance(&other.matrix)
    }
}

fn validate(m: &ComplexMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!("state must be square, got {}x{}", m.rows(), m.cols())));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    let defect = m.hermiticity_defect();
    if defect > STATE_TOL {
        return Err(Error::InvalidState(format!("Hermiticity defect {defect:.3e}")));
    }
    let tr = m.trace();
    if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
        return Err(Error::InvalidState(format!("trace {tr}")));
    }
    let lo = hermitian_eig(&m.hermitian_part())?.min();
    if lo < -STATE_TOL {
        return Err(Error::InvalidState(format!("min eigenvalue {lo:.3e}")));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateRecord {
    state: MatrixLiteral,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dims: Option<(usize, usize)>,
}

impl From<DensityMatrix> for StateRecord {
    fn from(r: DensityMatrix) -> Self {
        Self { state: MatrixLiteral::from_matrix(&r.matrix), dims: r.dims }
    }
}

impl TryFrom<StateRecord> for DensityMatrix {
    type Error = Error;

    fn try_from(rec: StateRecord) -> Result<Self> {
        let s = Self::from_numeric(&rec.state.to_matrix()?)?;
        match rec.dims {
            Some(d) => s.with_dims(d),
            None => Ok(s),
        }
    }
}
