use serde::Serialize;

use super::athermality::weight_of_athermality;
use super::coherence::weight_of_coherence;
use crate::error::{Error, Result};
use crate::numkernel::{hermitian_eig, partial_trace, ComplexMatrix, Keep};
use crate::qstate::{thermal_state, DensityMatrix, EnergyBasis};

/// ρ = (1 − a)γ + a(1 − c)τ_d + a·c·τ_c.
#[derive(Clone, Debug, Serialize)]
pub struct TripleDecomposition {
    pub a: f64,
    pub c: f64,
    pub gamma: DensityMatrix,
    pub tau_d: DensityMatrix,
    pub tau_c: DensityMatrix,
    /// Set when a = 0, where c is 0 by convention rather than computed.
    pub zero_athermality: bool,
}

impl TripleDecomposition {
    /// Mixture weights of (γ, τ_d, τ_c).
    pub fn weights(&self) -> [f64; 3] {
        [1.0 - self.a, self.a * (1.0 - self.c), self.a * self.c]
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let [w0, w1, w2] = self.weights();
        let mut m = self.gamma.matrix().scale_re(w0);
        m += &self.tau_d.matrix().scale_re(w1);
        m += &self.tau_c.matrix().scale_re(w2);
        m
    }

    pub fn residual(&self, rho: &DensityMatrix) -> f64 {
        self.reconstruct().distance(rho.matrix())
    }
}

/// Weight of athermality against γ, then weight of coherence of τ in `basis`.
pub fn triple_decompose(rho: &DensityMatrix, gamma: &DensityMatrix, basis: &EnergyBasis) -> Result<TripleDecomposition> {
    let ath = weight_of_athermality(rho, gamma)?;
    if ath.a == 0.0 {
        return Ok(TripleDecomposition {
            a: 0.0,
            c: 0.0,
            gamma: gamma.clone(),
            tau_d: gamma.clone(),
            tau_c: gamma.clone(),
            zero_athermality: true,
        });
    }
    let coh = weight_of_coherence(&ath.tau, basis)?;
    Ok(TripleDecomposition { a: ath.a, c: coh.c, gamma: gamma.clone(), tau_d: coh.sigma, tau_c: coh.tau, zero_athermality: false })
}

/// ρ_A ⊗ ρ_B = w·(γ_A ⊗ γ_B) + ρ_d + ρ_c, with ρ_d collecting the terms
/// built from thermal and diagonal factors only and ρ_c every term with a
/// coherent factor.
#[derive(Clone, Debug, Serialize)]
pub struct NineTermProduct {
    pub thermal_weight: f64,
    pub rho_d: ComplexMatrix,
    pub rho_c: ComplexMatrix,
    pub local_a: TripleDecomposition,
    pub local_b: TripleDecomposition,
}

impl NineTermProduct {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let g = self.local_a.gamma.matrix().kron(self.local_b.gamma.matrix());
        let mut m = g.scale_re(self.thermal_weight);
        m += &self.rho_d;
        m += &self.rho_c;
        m
    }
}

pub fn nine_term_split(
    rho_a: &DensityMatrix,
    rho_b: &DensityMatrix,
    gamma_a: &DensityMatrix,
    gamma_b: &DensityMatrix,
    basis_a: &EnergyBasis,
    basis_b: &EnergyBasis,
) -> Result<NineTermProduct> {
    let ta = triple_decompose(rho_a, gamma_a, basis_a)?;
    let tb = triple_decompose(rho_b, gamma_b, basis_b)?;
    let fa = [ta.gamma.matrix(), ta.tau_d.matrix(), ta.tau_c.matrix()];
    let fb = [tb.gamma.matrix(), tb.tau_d.matrix(), tb.tau_c.matrix()];
    let (wa, wb) = (ta.weights(), tb.weights());
    let n = rho_a.dim() * rho_b.dim();
    let mut rho_d = ComplexMatrix::zeros(n, n);
    let mut rho_c = ComplexMatrix::zeros(n, n);
    for i in 0..3 {
        for j in 0..3 {
            if i == 0 && j == 0 {
                continue;
            }
            let w = wa[i] * wb[j];
            if w == 0.0 {
                continue;
            }
            let term = fa[i].kron(fb[j]).scale_re(w);
            if i == 2 || j == 2 {
                rho_c += &term;
            } else {
                rho_d += &term;
            }
        }
    }
    Ok(NineTermProduct { thermal_weight: wa[0] * wb[0], rho_d, rho_c, local_a: ta, local_b: tb })
}

/// Marginals allowed to deviate from the thermal states by this much.
pub const MARGINAL_TOL: f64 = 1e-8;

/// ρ = γ_A ⊗ γ_B + 𝔈_AB for states with thermal marginals.
#[derive(Clone, Debug, Serialize)]
pub struct CorrelationSplit {
    pub marginal_a: DensityMatrix,
    pub marginal_b: DensityMatrix,
    pub correlation_operator: ComplexMatrix,
}

pub fn correlation_split(rho: &DensityMatrix, beta: f64, h_a: &ComplexMatrix, h_b: &ComplexMatrix) -> Result<CorrelationSplit> {
    let (ga, _) = thermal_state(h_a, beta)?;
    let (gb, _) = thermal_state(h_b, beta)?;
    correlation_split_with(rho, &ga, &gb)
}

/// Same split with the local thermal states supplied.
pub fn correlation_split_with(rho: &DensityMatrix, gamma_a: &DensityMatrix, gamma_b: &DensityMatrix) -> Result<CorrelationSplit> {
    let dims = (gamma_a.dim(), gamma_b.dim());
    if rho.dim() != dims.0 * dims.1 {
        return Err(Error::DimensionMismatch(format!("state of dimension {} for parties {dims:?}", rho.dim())));
    }
    let ra = partial_trace(rho.matrix(), dims, Keep::A)?;
    let rb = partial_trace(rho.matrix(), dims, Keep::B)?;
    let dev = ra.distance(gamma_a.matrix()).max(rb.distance(gamma_b.matrix()));
    if dev > MARGINAL_TOL {
        return Err(Error::MarginalsNotThermal(dev));
    }
    let mut e = rho.matrix().clone();
    e -= &gamma_a.matrix().kron(gamma_b.matrix());
    Ok(CorrelationSplit { marginal_a: gamma_a.clone(), marginal_b: gamma_b.clone(), correlation_operator: e })
}

impl CorrelationSplit {
    /// Largest partial-trace norm of 𝔈.
    pub fn marginal_defect(&self) -> f64 {
        let dims = (self.marginal_a.dim(), self.marginal_b.dim());
        let a = partial_trace(&self.correlation_operator, dims, Keep::A).map(|m| m.frobenius_norm()).unwrap_or(f64::INFINITY);
        let b = partial_trace(&self.correlation_operator, dims, Keep::B).map(|m| m.frobenius_norm()).unwrap_or(f64::INFINITY);
        a.max(b)
    }
}

/// Smallest eigenvalue of a Hermitian block (NaN on failure).
pub fn block_min_eigenvalue(m: &ComplexMatrix) -> f64 {
    hermitian_eig(&m.hermitian_part()).map(|e| e.min()).unwrap_or(f64::NAN)
}
