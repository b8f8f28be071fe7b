use super::basis::EnergyBasis;
use super::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::numkernel::{hermitian_eig, ComplexMatrix, EIGEN_FLOOR};

/// Gibbs state e^{−βH}/Z together with Z = Tr e^{−βH}.
pub fn thermal_state(h: &ComplexMatrix, beta: f64) -> Result<(DensityMatrix, f64)> {
    if !beta.is_finite() {
        return Err(Error::InvalidState(format!("inverse temperature {beta}")));
    }
    let eig = hermitian_eig(h)?;
    let e0 = eig.min();
    let w: Vec<f64> = eig.eigenvalues.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let s: f64 = w.iter().sum();
    let z = s * (-beta * e0).exp();
    let n = eig.dim();
    let v = &eig.eigenvectors;
    let gamma = ComplexMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| v.get(i, k) * v.get(j, k).conj() * (w[k] / s)).sum()
    });
    Ok((DensityMatrix::from_numeric(&gamma)?, z))
}

/// ln Z computed without overflow.
pub fn log_partition_function(h: &ComplexMatrix, beta: f64) -> Result<f64> {
    let eig = hermitian_eig(h)?;
    let e0 = eig.min();
    let s: f64 = eig.eigenvalues.iter().map(|&e| (-beta * (e - e0)).exp()).sum();
    Ok(s.ln() - beta * e0)
}

/// ΔF = −(1/β) ln(Z_f/Z_i).
pub fn free_energy_difference(z_i: f64, z_f: f64, beta: f64) -> Result<f64> {
    if !(z_i > 0.0 && z_f > 0.0) {
        return Err(Error::NonpositivePartitionFunction { z_i, z_f });
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidState(format!("free energy needs β > 0, got {beta}")));
    }
    Ok(-(z_f / z_i).ln() / beta)
}

/// Block-diagonal part Σ_l Π_l ρ Π_l.
pub fn dephase(rho: &DensityMatrix, basis: &EnergyBasis) -> Result<DensityMatrix> {
    basis.check_dim(rho.dim())?;
    let mut out = DensityMatrix::from_numeric(&dephase_operator(rho.matrix(), basis))?;
    if let Some(d) = rho.dims() {
        out = out.with_dims(d)?;
    }
    Ok(out)
}

/// Σ_l Π_l X Π_l for any operator X.
pub fn dephase_operator(x: &ComplexMatrix, basis: &EnergyBasis) -> ComplexMatrix {
    let n = x.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for p in basis.projectors() {
        out += &p.matmul(x).matmul(p);
    }
    out
}

/// S(ρ) = −Tr ρ ln ρ in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    rho.eigenvalues().iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// D(ρ‖σ) = Tr ρ(ln ρ − ln σ) in nats.
///
/// Fails with `SupportViolation` when ρ has weight above 1e-12 on the
/// numerical kernel of σ, i.e. when the divergence is +∞.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!("D(ρ‖σ) with dimensions {} and {}", rho.dim(), sigma.dim())));
    }
    let es = hermitian_eig(sigma.matrix())?;
    let floor = EIGEN_FLOOR * es.max().abs();
    let mut cross = 0.0;
    for k in 0..es.dim() {
        let v = es.vector(k);
        let w: f64 = rho.matrix().matvec(&v).iter().zip(&v).map(|(a, b)| (b.conj() * a).re).sum();
        let s = es.eigenvalues[k];
        if s > floor {
            cross -= w * s.ln();
        } else if w > 1e-12 {
            return Err(Error::SupportViolation);
        }
    }
    Ok(cross - von_neumann_entropy(rho))
}

/// C_re(ρ) = S(Δ[ρ]) − S(ρ).
pub fn relative_entropy_of_coherence(rho: &DensityMatrix, basis: &EnergyBasis) -> Result<f64> {
    let d = dephase(rho, basis)?;
    Ok(von_neumann_entropy(&d) - von_neumann_entropy(rho))
}
