use serde::Serialize;

use crate::error::{Error, Result};
use crate::numkernel::{hermitian_eig, solve_spd, ComplexMatrix, C64};
use crate::qstate::{DensityMatrix, EnergyBasis};

/// Eigenvalues of ρ above this span its range.
const RANGE_FLOOR: f64 = 1e-11;
/// Barrier duality-gap target.
const GAP_TOL: f64 = 1e-12;

/// ρ = (1 − c)σ + cτ with σ diagonal in the reference basis and c minimal.
#[derive(Clone, Debug, Serialize)]
pub struct CoherenceDecomposition {
    pub c: f64,
    pub sigma: DensityMatrix,
    pub tau: DensityMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CoherenceSolver {
    /// Closed form for qubits, barrier method otherwise.
    #[default]
    Auto,
    /// Barrier method in every dimension.
    Barrier,
}

/// Minimal c with ρ − (1 − c)σ ⪰ 0 for some diagonal state σ.
pub fn weight_of_coherence(rho: &DensityMatrix, basis: &EnergyBasis) -> Result<CoherenceDecomposition> {
    weight_of_coherence_with(rho, basis, CoherenceSolver::Auto)
}

pub fn weight_of_coherence_with(rho: &DensityMatrix, basis: &EnergyBasis, solver: CoherenceSolver) -> Result<CoherenceDecomposition> {
    basis.check_dim(rho.dim())?;
    let r = basis.to_reference(rho.matrix()).hermitian_part();
    let n = r.rows();
    let offdiag = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| r.get(i, j).norm_sqr()).sum::<f64>().sqrt();
    if offdiag < 1e-13 {
        return Ok(CoherenceDecomposition { c: 0.0, sigma: rho.clone(), tau: rho.clone() });
    }
    let x = match (solver, n) {
        (CoherenceSolver::Auto, 2) => qubit_masses(&r),
        _ => barrier_masses(&r)?,
    };
    assemble(rho, basis, &r, &x)
}

/// Closed form for 2×2: minimize s + r subject to s·r ≥ |g|², s ≤ p, r ≤ 1 − p.
fn qubit_masses(r: &ComplexMatrix) -> Vec<f64> {
    let p = r.get(0, 0).re;
    let q = r.get(1, 1).re;
    let g = r.get(0, 1).norm();
    let m = p.min(q);
    if g <= m {
        vec![p - g, q - g]
    } else if p <= q {
        vec![0.0, q - g * g / p]
    } else {
        vec![p - g * g / q, 0.0]
    }
}

/// Maximizes Σx_i subject to R − diag(x) ⪰ 0, x ≥ 0, by a log-barrier Newton method.
///
/// Only indices whose basis vector lies in the range of R can carry mass;
/// the constraint is imposed on that range, where it is strictly feasible.
fn barrier_masses(r: &ComplexMatrix) -> Result<Vec<f64>> {
    let n = r.rows();
    let eig = hermitian_eig(r)?;
    let range: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > RANGE_FLOOR).collect();
    let rk = range.len();
    let lam: Vec<f64> = range.iter().map(|&k| eig.eigenvalues[k]).collect();
    // w_i = V_r† e_i, the i-th row of V_r conjugated.
    let w_all: Vec<Vec<C64>> = (0..n).map(|i| range.iter().map(|&k| eig.eigenvectors.get(i, k).conj()).collect()).collect();
    let admissible: Vec<usize> = (0..n).filter(|&i| 1.0 - w_all[i].iter().map(|z| z.norm_sqr()).sum::<f64>() < 1e-12).collect();
    let mut x_full = vec![0.0; n];
    if admissible.is_empty() {
        return Ok(x_full);
    }
    let w: Vec<&Vec<C64>> = admissible.iter().map(|&i| &w_all[i]).collect();
    let m = admissible.len();

    let slack = |x: &[f64]| -> ComplexMatrix {
        let mut s = ComplexMatrix::from_diag(&lam);
        for (xi, wi) in x.iter().zip(&w) {
            s -= &ComplexMatrix::outer(wi, wi).scale_re(*xi);
        }
        s
    };
    let feasible = |x: &[f64]| -> Option<f64> {
        if x.iter().any(|&v| v <= 0.0) {
            return None;
        }
        let e = hermitian_eig(&slack(x)).ok()?;
        if e.min() <= 0.0 {
            return None;
        }
        Some(e.eigenvalues.iter().map(|v| v.ln()).sum::<f64>() + x.iter().map(|v| v.ln()).sum::<f64>())
    };

    let start = 0.5 * lam.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut x = vec![start; m];
    let mut t = 1.0;
    let barrier_dim = (rk + m) as f64;
    for _outer in 0..40 {
        for _inner in 0..200 {
            let s = slack(&x);
            let sinv = hermitian_eig(&s)?.map(|v| 1.0 / v);
            let sw: Vec<Vec<C64>> = w.iter().map(|wi| sinv.matvec(wi)).collect();
            let inner = |a: usize, b: usize| -> C64 { w[a].iter().zip(&sw[b]).map(|(p, q)| p.conj() * q).sum() };
            let mut grad = vec![0.0; m];
            let mut hess = vec![0.0; m * m];
            for a in 0..m {
                grad[a] = -t + inner(a, a).re - 1.0 / x[a];
                for b in 0..m {
                    hess[a * m + b] = inner(a, b).norm_sqr();
                }
                hess[a * m + a] += 1.0 / (x[a] * x[a]);
            }
            let step = solve_spd(&hess, &grad.iter().map(|g| -g).collect::<Vec<_>>())
                .ok_or_else(|| Error::OptimizationNotConverged("singular Newton system in coherence weight".into()))?;
            let decrement: f64 = -grad.iter().zip(&step).map(|(g, s)| g * s).sum::<f64>();
            if decrement < 1e-14 {
                break;
            }
            let phi = |x: &[f64]| feasible(x).map(|logdet| -t * x.iter().sum::<f64>() - logdet);
            let f0 = phi(&x).expect("iterate is strictly feasible");
            let mut alpha = 1.0;
            loop {
                let cand: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + alpha * b).collect();
                if let Some(f1) = phi(&cand) {
                    if f1 <= f0 - 0.25 * alpha * decrement {
                        x = cand;
                        break;
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-14 {
                    break;
                }
            }
            if alpha < 1e-14 {
                break;
            }
        }
        if barrier_dim / t < GAP_TOL {
            break;
        }
        t *= 10.0;
    }
    for (k, &i) in admissible.iter().enumerate() {
        x_full[i] = x[k];
    }
    Ok(x_full)
}

fn assemble(rho: &DensityMatrix, basis: &EnergyBasis, r: &ComplexMatrix, x: &[f64]) -> Result<CoherenceDecomposition> {
    let mass: f64 = x.iter().sum();
    let mut c = (1.0 - mass).clamp(0.0, 1.0);
    if c < 1e-12 {
        c = 0.0;
    }
    let with_dims = |s: DensityMatrix| match rho.dims() {
        Some(d) => s.with_dims(d),
        None => Ok(s),
    };
    if c == 0.0 {
        return Ok(CoherenceDecomposition { c, sigma: rho.clone(), tau: rho.clone() });
    }
    let sigma = if mass > 0.0 {
        DensityMatrix::from_numeric(&basis.diagonal_operator(&x.iter().map(|v| v / mass).collect::<Vec<_>>()))?
    } else {
        let diag: Vec<f64> = r.diagonal().iter().map(|z| z.re).collect();
        DensityMatrix::from_numeric(&basis.diagonal_operator(&diag))?
    };
    let tau = if c >= 1.0 {
        rho.clone()
    } else {
        let mut t = r.clone();
        t -= &ComplexMatrix::from_diag(x);
        DensityMatrix::from_numeric(&basis.from_reference(&t).scale_re(1.0 / c))?
    };
    Ok(CoherenceDecomposition { c, sigma: with_dims(sigma)?, tau: with_dims(tau)? })
}

impl CoherenceDecomposition {
    /// ‖(1 − c)σ + cτ − ρ‖_F.
    pub fn residual(&self, rho: &DensityMatrix) -> f64 {
        let mut m = self.sigma.matrix().scale_re(1.0 - self.c);
        m += &self.tau.matrix().scale_re(self.c);
        m.distance(rho.matrix())
    }
}
