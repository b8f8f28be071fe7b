use serde::Serialize;

use crate::error::{Error, Result};
use crate::numkernel::{hermitian_eig, matrix_function, MatFn};
use crate::qstate::DensityMatrix;

/// References with a smaller eigenvalue are rejected.
pub const REFERENCE_FLOOR: f64 = 1e-10;

/// ρ = (1 − a)γ + aτ with minimal a.
#[derive(Clone, Debug, Serialize)]
pub struct AthermalityDecomposition {
    pub a: f64,
    pub tau: DensityMatrix,
    pub reference: DensityMatrix,
}

/// a = 1 − μ_min(γ^{−1/2} ρ γ^{−1/2}), τ = (ρ − (1 − a)γ)/a, and τ = γ when a = 0.
pub fn weight_of_athermality(rho: &DensityMatrix, gamma: &DensityMatrix) -> Result<AthermalityDecomposition> {
    if rho.dim() != gamma.dim() {
        return Err(Error::DimensionMismatch(format!("state {} vs reference {}", rho.dim(), gamma.dim())));
    }
    let g_min = gamma.min_eigenvalue();
    if !(g_min > REFERENCE_FLOOR) {
        return Err(Error::SingularReference(g_min));
    }
    let w = matrix_function(gamma.matrix(), MatFn::InvSqrt)?;
    let x = w.matmul(rho.matrix()).matmul(&w).hermitian_part();
    let mu = hermitian_eig(&x)?.min();
    let mut a = (1.0 - mu).clamp(0.0, 1.0);
    if a < 1e-12 {
        a = 0.0;
    }
    let tau = if a == 0.0 {
        gamma.clone()
    } else {
        let mut m = rho.matrix().clone();
        m -= &gamma.matrix().scale_re(1.0 - a);
        DensityMatrix::from_numeric(&m.scale_re(1.0 / a))?
    };
    let tau = match rho.dims() {
        Some(d) => tau.with_dims(d)?,
        None => tau,
    };
    Ok(AthermalityDecomposition { a, tau, reference: gamma.clone() })
}

impl AthermalityDecomposition {
    /// ‖(1 − a)γ + aτ − ρ‖_F.
    pub fn residual(&self, rho: &DensityMatrix) -> f64 {
        let mut m = self.reference.matrix().scale_re(1.0 - self.a);
        m += &self.tau.matrix().scale_re(self.a);
        m.distance(rho.matrix())
    }
}
