use serde::Serialize;

use super::kl::{kl_divergence, kl_divergence_tables};
use super::simplex::{minimize_on_simplex, SimplexObjective};
use crate::dynamics::QuantumChannel;
use crate::epm::{epm_distribution, Protocol};
use crate::error::{Error, Result};
use crate::numkernel::{unitary_propagator, ComplexMatrix};
use crate::qstate::{dephase, relative_entropy_of_coherence, DensityMatrix, EnergyBasis};
use crate::random;

/// Gradient-norm certificate for the CFD minimum.
pub const CFD_GRAD_TOL: f64 = 1e-9;
/// Phase-covariance defect below which a channel counts as covariant.
pub const COVARIANCE_TOL: f64 = 1e-9;
const COVARIANCE_SEED: u64 = 0x5eed_c0de;
const COVARIANCE_SAMPLES: usize = 20;
const COVARIANCE_PHASES: [f64; 3] = [std::f64::consts::PI / 7.0, 1.0, 2.5];

/// Coherence fluctuation distance and its upper bounds.
#[derive(Clone, Debug, Serialize)]
pub struct CfdReport {
    pub cfd: f64,
    pub argmin_state: DensityMatrix,
    /// D_KL against the table of the dephased state.
    pub bound_dephased: f64,
    /// 2·C_re(ρ_i).
    pub bound_cre: f64,
    pub converged: bool,
    /// Objective value per iteration.
    pub optimizer_trace: Vec<f64>,
}

/// Objective q ↦ D(p^i‖Bq) + D(p^f‖Tq) over populations q of incoherent states.
struct CfdObjective {
    p_i: Vec<f64>,
    p_f: Vec<f64>,
    /// B[l][n]: weight of reference vector n in level l.
    b: Vec<Vec<f64>>,
    /// T[k][n] = Tr(Π_k Φ[|n⟩⟨n|]).
    t: Vec<Vec<f64>>,
}

fn apply(m: &[Vec<f64>], q: &[f64]) -> Vec<f64> {
    m.iter().map(|r| r.iter().zip(q).map(|(a, b)| a * b).sum()).collect()
}

impl SimplexObjective for CfdObjective {
    fn value(&self, q: &[f64]) -> f64 {
        kl_divergence(&self.p_i, &apply(&self.b, q)) + kl_divergence(&self.p_f, &apply(&self.t, q))
    }

    fn gradient(&self, q: &[f64]) -> Vec<f64> {
        let (bq, tq) = (apply(&self.b, q), apply(&self.t, q));
        let mut g = vec![0.0; q.len()];
        for (m, p, mq) in [(&self.b, &self.p_i, &bq), (&self.t, &self.p_f, &tq)] {
            for (row, (&pl, &ql)) in m.iter().zip(p.iter().zip(mq)) {
                if pl <= 0.0 {
                    continue;
                }
                for (gn, &a) in g.iter_mut().zip(row) {
                    *gn -= pl * a / ql;
                }
            }
        }
        g
    }
}

fn reference_projector(basis: &EnergyBasis, n: usize) -> ComplexMatrix {
    let v = basis.vectors().column(n);
    ComplexMatrix::outer(&v, &v)
}

/// min over incoherent σ of D_KL(p(ρ_i)‖p(σ)).
pub fn cfd(rho_i: &DensityMatrix, channel: &QuantumChannel, basis_i: &EnergyBasis, basis_f: &EnergyBasis) -> Result<CfdReport> {
    let d = rho_i.dim();
    let dist = epm_distribution(rho_i, channel, basis_i, basis_f)?;
    let projs: Vec<ComplexMatrix> = (0..d).map(|n| reference_projector(basis_i, n)).collect();
    // Entries are probabilities; clamping keeps rounding from making Bq negative.
    let b = basis_i.projectors().iter().map(|p| projs.iter().map(|x| x.expectation(p).max(0.0)).collect()).collect();
    let images: Vec<ComplexMatrix> = projs.iter().map(|x| channel.apply_operator(x)).collect();
    let t = basis_f.projectors().iter().map(|p| images.iter().map(|x| x.expectation(p).max(0.0)).collect()).collect();
    let obj = CfdObjective { p_i: dist.p_initial().to_vec(), p_f: dist.p_final().to_vec(), b, t };
    let run = if d == 2 { qubit_minimize(&obj) } else { minimize_on_simplex(&obj, &vec![1.0 / d as f64; d], CFD_GRAD_TOL, 20_000) };
    let (bound_dephased, bound_cre) = cfd_bounds(rho_i, channel, basis_i, basis_f)?;
    let argmin_state = DensityMatrix::from_numeric(&basis_i.diagonal_operator(&run.point))?;
    let mut cfd = run.value.max(0.0);
    // The dephased state is incoherent, so its value bounds the minimum.
    cfd = cfd.min(bound_dephased);
    Ok(CfdReport { cfd, argmin_state, bound_dephased, bound_cre, converged: run.converged, optimizer_trace: run.trace })
}

/// (D_KL(p(ρ_i)‖p(Δ[ρ_i])), 2·C_re(ρ_i)).
pub fn cfd_bounds(rho_i: &DensityMatrix, channel: &QuantumChannel, basis_i: &EnergyBasis, basis_f: &EnergyBasis) -> Result<(f64, f64)> {
    let p = epm_distribution(rho_i, channel, basis_i, basis_f)?;
    let q = epm_distribution(&dephase(rho_i, basis_i)?, channel, basis_i, basis_f)?;
    let kl = kl_divergence_tables(&p, &q)?;
    Ok((kl.value, 2.0 * relative_entropy_of_coherence(rho_i, basis_i)?))
}

/// CFD with the protocol's bases and forward map.
pub fn cfd_for(protocol: &Protocol, rho_i: &DensityMatrix) -> Result<CfdReport> {
    cfd(rho_i, &protocol.channel, &protocol.basis_i, &protocol.basis_f)
}

/// Result of a convex minimization over probability vectors.
#[derive(Clone, Debug)]
pub struct SimplexRun {
    pub point: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub trace: Vec<f64>,
}

/// Bisection on the derivative of the convex function x ↦ f(x, 1 − x).
fn qubit_minimize(obj: &CfdObjective) -> SimplexRun {
    let deriv = |x: f64| {
        let g = obj.gradient(&[x, 1.0 - x]);
        g[0] - g[1]
    };
    let mut trace = Vec::new();
    let value = |x: f64| obj.value(&[x, 1.0 - x]);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let d_lo = deriv(f64::MIN_POSITIVE.max(1e-300));
    let d_hi = deriv(1.0 - f64::EPSILON);
    let x = if d_lo.is_finite() && d_lo >= 0.0 {
        0.0
    } else if d_hi.is_finite() && d_hi <= 0.0 {
        1.0
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            trace.push(value(mid));
            let g = deriv(mid);
            if g.abs() < CFD_GRAD_TOL {
                lo = mid;
                hi = mid;
                break;
            }
            if g > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-16 {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let v = value(x);
    trace.push(v);
    let g = deriv(x);
    let converged = g.abs() < CFD_GRAD_TOL || (x == 0.0 && g >= 0.0) || (x == 1.0 && g <= 0.0) || hi - lo < 1e-15;
    SimplexRun { point: vec![x, 1.0 - x], value: v, converged, trace }
}

/// Covariance test under e^{−iφZ} with Z = Π₀ − Π₁ of a qubit basis.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PhaseCovariance {
    pub covariant: bool,
    pub deviation: f64,
}

pub fn phase_covariance_check(channel: &QuantumChannel, basis: &EnergyBasis) -> Result<PhaseCovariance> {
    if channel.dim() != 2 || basis.dim() != 2 {
        return Err(Error::DimensionMismatch("phase covariance is defined for qubit channels".into()));
    }
    let z = &reference_projector(basis, 0) - &reference_projector(basis, 1);
    let mut rng = random::rng(COVARIANCE_SEED);
    let states: Vec<DensityMatrix> = (0..COVARIANCE_SAMPLES).map(|_| random::density(&mut rng, 2)).collect();
    let mut deviation: f64 = 0.0;
    for phi in COVARIANCE_PHASES {
        let u = unitary_propagator(&z, phi)?;
        let ud = u.adjoint();
        for rho in &states {
            let rotated_after = u.matmul(&channel.apply_operator(rho.matrix())).matmul(&ud);
            let rotated_before = channel.apply_operator(&u.matmul(rho.matrix()).matmul(&ud));
            deviation = deviation.max(rotated_after.distance(&rotated_before));
        }
    }
    Ok(PhaseCovariance { covariant: deviation < COVARIANCE_TOL, deviation })
}
