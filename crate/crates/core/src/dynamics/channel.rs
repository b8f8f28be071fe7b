use rayon::prelude::*;

use super::lindblad::LindbladSpec;
use crate::error::{Error, Result};
use crate::numkernel::{hermitian_eig, matrix_function, ComplexMatrix, MatFn, C64, ONE, ZERO};
use crate::qstate::DensityMatrix;

/// Choi eigenvalues below this are a complete-positivity violation.
pub const CP_TOL: f64 = 1e-9;
/// Trace-preservation tolerance for constructed channels.
pub const TP_TOL: f64 = 1e-9;
/// Choi eigenvalues below this are dropped when extracting Kraus operators.
pub const KRAUS_DROP: f64 = 1e-10;
/// Singular values of S − I below this count towards the fixed-point space.
pub const FIXED_POINT_CLUSTER: f64 = 1e-8;
/// Fixed points with a smaller eigenvalue are singular.
pub const FULL_RANK_FLOOR: f64 = 1e-10;

/// CPTP map on d×d matrices.
///
/// `superoperator` acts on column-stacked matrices: vec(|i⟩⟨j|) has index
/// j·d + i.
#[derive(Clone, Debug)]
pub struct QuantumChannel {
    dim: usize,
    superoperator: ComplexMatrix,
    kraus: Option<Vec<ComplexMatrix>>,
}

/// Stationary state of a channel.
#[derive(Clone, Debug)]
pub struct FixedPoint {
    pub state: DensityMatrix,
    pub min_eigenvalue: f64,
    pub full_rank: bool,
}

impl FixedPoint {
    pub fn require_full_rank(&self) -> Result<&DensityMatrix> {
        if self.full_rank {
            Ok(&self.state)
        } else {
            Err(Error::SingularFixedPoint(self.min_eigenvalue))
        }
    }
}

fn kraus_superoperator(a: &ComplexMatrix) -> ComplexMatrix {
    // vec(A X A†) = (conj(A) ⊗ A) vec(X)
    a.conj().kron(a)
}

impl QuantumChannel {
    /// Validates trace preservation and complete positivity.
    pub fn from_superoperator(dim: usize, superoperator: ComplexMatrix) -> Result<Self> {
        if superoperator.rows() != dim * dim || !superoperator.is_square() {
            return Err(Error::DimensionMismatch(format!("superoperator of size {} for dimension {dim}", superoperator.rows())));
        }
        if !superoperator.is_finite() {
            return Err(Error::NonFinite);
        }
        let ch = Self { dim, superoperator, kraus: None };
        let tp = ch.trace_defect();
        if tp > TP_TOL {
            return Err(Error::InvalidState(format!("map is not trace preserving (defect {tp:.3e})")));
        }
        let m = ch.choi_min_eigenvalue()?;
        if m < -CP_TOL {
            return Err(Error::CompletePositivityViolation(m));
        }
        Ok(ch)
    }

    pub fn from_kraus(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let first = kraus.first().ok_or_else(|| Error::Config("empty Kraus list".into()))?;
        let d = first.rows();
        let mut s = ComplexMatrix::zeros(d * d, d * d);
        let mut completeness = ComplexMatrix::zeros(d, d);
        for a in &kraus {
            if a.rows() != d || !a.is_square() {
                return Err(Error::DimensionMismatch("Kraus operators of different sizes".into()));
            }
            s += &kraus_superoperator(a);
            completeness += &a.adjoint().matmul(a);
        }
        let defect = completeness.distance(&ComplexMatrix::identity(d));
        if defect > TP_TOL {
            return Err(Error::InvalidState(format!("Kraus set is not trace preserving (defect {defect:.3e})")));
        }
        Ok(Self { dim: d, superoperator: s, kraus: Some(kraus) })
    }

    pub fn identity(d: usize) -> Self {
        Self { dim: d, superoperator: ComplexMatrix::identity(d * d), kraus: Some(vec![ComplexMatrix::identity(d)]) }
    }

    /// ρ ↦ U ρ U†; `u` must be unitary.
    pub fn unitary(u: &ComplexMatrix) -> Result<Self> {
        Self::from_kraus(vec![u.clone()])
    }

    /// ρ ↦ (1 − p)ρ + p σ_z ρ σ_z.
    pub fn dephasing(p: f64) -> Result<Self> {
        check_probability(p)?;
        let z = crate::numkernel::ops::sigma_z();
        Self::from_kraus(vec![ComplexMatrix::identity(2).scale_re((1.0 - p).sqrt()), z.scale_re(p.sqrt())])
    }

    /// Decay |1⟩ → |0⟩ with probability g.
    pub fn amplitude_damping(g: f64) -> Result<Self> {
        check_probability(g)?;
        let k0 = ComplexMatrix::from_real(2, &[1.0, 0.0, 0.0, (1.0 - g).sqrt()]);
        let k1 = ComplexMatrix::from_real(2, &[0.0, g.sqrt(), 0.0, 0.0]);
        Self::from_kraus(vec![k0, k1])
    }

    /// ρ ↦ (1 − p)ρ + p Tr(ρ) I/d.
    pub fn depolarizing(d: usize, p: f64) -> Result<Self> {
        check_probability(p)?;
        let mut s = ComplexMatrix::identity(d * d).scale_re(1.0 - p);
        for i in 0..d {
            for j in 0..d {
                let v = s.get(i * d + i, j * d + j) + C64::new(p / d as f64, 0.0);
                s.set(i * d + i, j * d + j, v);
            }
        }
        Self::from_superoperator(d, s)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn superoperator(&self) -> &ComplexMatrix {
        &self.superoperator
    }

    pub fn kraus(&self) -> Option<&[ComplexMatrix]> {
        self.kraus.as_deref()
    }

    pub fn apply_operator(&self, x: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::unvec(&self.superoperator.matvec(&x.vec()), self.dim)
    }

    /// Φ[ρ], validated as a state and carrying ρ's bipartite dims.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!("state of dimension {} for channel of dimension {}", rho.dim(), self.dim)));
        }
        let out = DensityMatrix::from_numeric(&self.apply_operator(rho.matrix()))?;
        match rho.dims() {
            Some(d) => out.with_dims(d),
            None => Ok(out),
        }
    }

    /// Heisenberg-picture map Φ†[X].
    pub fn adjoint_apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::unvec(&self.superoperator.adjoint().matvec(&x.vec()), self.dim)
    }

    /// Φ₂ ∘ Φ₁ with `self` = Φ₁ applied first.
    pub fn then(&self, next: &Self) -> Result<Self> {
        if next.dim != self.dim {
            return Err(Error::DimensionMismatch("composing channels of different dimension".into()));
        }
        Ok(Self { dim: self.dim, superoperator: next.superoperator.matmul(&self.superoperator), kraus: None })
    }

    /// max_j |Tr Φ[E_j] − Tr E_j| over matrix units.
    pub fn trace_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for col in 0..d * d {
            let t: C64 = (0..d).map(|i| self.superoperator.get(i * d + i, col)).sum();
            let expect = if col % (d + 1) == 0 { ONE } else { ZERO };
            worst = worst.max((t - expect).norm());
        }
        worst
    }

    /// J = Σ_ij |i⟩⟨j| ⊗ Φ(|i⟩⟨j|).
    pub fn choi(&self) -> ComplexMatrix {
        let d = self.dim;
        ComplexMatrix::from_fn(d * d, d * d, |r, c| {
            let (i, k) = (r / d, r % d);
            let (j, l) = (c / d, c % d);
            self.superoperator.get(l * d + k, j * d + i)
        })
    }

    fn choi_min_eigenvalue(&self) -> Result<f64> {
        Ok(hermitian_eig(&self.choi().hermitian_part())?.min())
    }

    /// Copy with Kraus operators A_α[k][i] = √μ_α w_α[i·d + k] from the Choi
    /// eigendecomposition.
    pub fn with_kraus(&self) -> Result<Self> {
        if self.kraus.is_some() {
            return Ok(self.clone());
        }
        Ok(Self { kraus: Some(kraus_from_choi(self)?), ..self.clone() })
    }

    /// Unique stationary state, from the null space of S − I.
    pub fn fixed_point(&self) -> Result<FixedPoint> {
        let n = self.dim * self.dim;
        let mut m = self.superoperator.clone();
        for i in 0..n {
            m.set(i, i, m.get(i, i) - ONE);
        }
        // Hermitian dilation [[0, M], [M†, 0]] has eigenvalues ±σ_k.
        let madj = m.adjoint();
        let dil = ComplexMatrix::from_fn(2 * n, 2 * n, |r, c| match (r < n, c < n) {
            (true, false) => m.get(r, c - n),
            (false, true) => madj.get(r - n, c),
            _ => ZERO,
        });
        let eig = hermitian_eig(&dil)?;
        let small: Vec<usize> = (0..2 * n).filter(|&k| eig.eigenvalues[k].abs() < FIXED_POINT_CLUSTER).collect();
        if small.len() != 2 {
            return Err(Error::NoUniqueFixedPoint(small.len() / 2));
        }
        // Right singular vector: lower half of the dilation eigenvector.
        let v = small
            .iter()
            .map(|&k| eig.vector(k)[n..].to_vec())
            .max_by(|a, b| norm(a).total_cmp(&norm(b)))
            .expect("two candidates");
        let x = ComplexMatrix::unvec(&v, self.dim);
        let tr = x.trace();
        if tr.norm() < 1e-12 {
            return Err(Error::NoUniqueFixedPoint(0));
        }
        let state = DensityMatrix::from_numeric(&x.scale(ONE / tr).hermitian_part())?;
        let min_eigenvalue = state.min_eigenvalue();
        Ok(FixedPoint { state, min_eigenvalue, full_rank: min_eigenvalue >= FULL_RANK_FLOOR })
    }

    /// Time-reversed map Φ̃[X] = π^{1/2} Φ†[π^{−1/2} X π^{−1/2}] π^{1/2},
    /// with Kraus operators Ã_α = π^{1/2} A_α† π^{−1/2}.
    pub fn dual_channel(&self, pi: &DensityMatrix) -> Result<Self> {
        if pi.dim() != self.dim {
            return Err(Error::DimensionMismatch("reference state and channel differ in dimension".into()));
        }
        let m = pi.min_eigenvalue();
        if m < FULL_RANK_FLOOR {
            return Err(Error::SingularFixedPoint(m));
        }
        let residual = self.apply_operator(pi.matrix()).distance(pi.matrix());
        if residual > 1e-8 {
            return Err(Error::NotAFixedPoint(residual));
        }
        let r = matrix_function(pi.matrix(), MatFn::Sqrt)?;
        let q = matrix_function(pi.matrix(), MatFn::InvSqrt)?;
        let superoperator = kraus_superoperator(&r).matmul(&self.superoperator.adjoint()).matmul(&kraus_superoperator(&q));
        let with = self.with_kraus()?;
        let kraus = with.kraus.expect("populated").iter().map(|a| r.matmul(&a.adjoint()).matmul(&q)).collect();
        Ok(Self { dim: self.dim, superoperator, kraus: Some(kraus) })
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("channel parameter {p} outside [0, 1]")));
    }
    Ok(())
}

/// Kraus operators from the Choi eigendecomposition; eigenvalues below 1e-10
/// are dropped.
pub fn kraus_from_choi(channel: &QuantumChannel) -> Result<Vec<ComplexMatrix>> {
    let d = channel.dim;
    let eig = hermitian_eig(&channel.choi().hermitian_part())?;
    if eig.min() < -CP_TOL {
        return Err(Error::CompletePositivityViolation(eig.min()));
    }
    let mut out = Vec::new();
    for k in (0..eig.dim()).rev() {
        let mu = eig.eigenvalues[k];
        if mu < KRAUS_DROP {
            continue;
        }
        let w = eig.vector(k);
        let s = mu.sqrt();
        out.push(ComplexMatrix::from_fn(d, d, |row, col| w[col * d + row] * s));
    }
    Ok(out)
}

/// Channel obtained by propagating all d² matrix units on one shared time grid.
pub fn channel_from_propagator(spec: &LindbladSpec, steps: usize) -> Result<QuantumChannel> {
    let d = spec.dim();
    let grid = spec.grid(steps)?;
    let columns: Vec<Vec<C64>> = (0..d * d)
        .into_par_iter()
        .map(|col| {
            let (i, j) = (col % d, col / d);
            let mut e = ComplexMatrix::zeros(d, d);
            e.set(i, j, ONE);
            spec.integrate(&grid, &e).vec()
        })
        .collect();
    let mut s = ComplexMatrix::zeros(d * d, d * d);
    for (col, v) in columns.iter().enumerate() {
        s.set_column(col, v);
    }
    if !s.is_finite() {
        return Err(Error::IntegrationUnstable(f64::INFINITY));
    }
    let ch = QuantumChannel { dim: d, superoperator: s, kraus: None };
    let drift = ch.trace_defect();
    if drift > super::lindblad::TRACE_DRIFT_TOL {
        return Err(Error::IntegrationUnstable(drift));
    }
    let m = ch.choi_min_eigenvalue()?;
    if m < -CP_TOL {
        return Err(Error::CompletePositivityViolation(m));
    }
    Ok(ch)
}
