use std::io::Write;

use crate::dynamics::QuantumChannel;
use crate::error::{Error, Result};
use crate::fmt::{num, row};
use crate::numkernel::{hermitian_eig, ComplexMatrix, C64};
use crate::qstate::{DensityMatrix, EnergyBasis};

/// ΔE values closer than this are merged in histograms.
pub const MERGE_TOL: f64 = 1e-12;

/// One labelled trajectory l → k.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpmEntry {
    pub l: usize,
    pub k: usize,
    pub delta_e: f64,
    pub probability: f64,
}

/// Factorized joint distribution p(l, k) = p^i_l p^f_k.
///
/// Entries are ordered with l major. For product bases the labels encode
/// pairs, see [`EnergyBasis::split_label`].
#[derive(Clone, Debug)]
pub struct EpmDistribution {
    entries: Vec<EpmEntry>,
    initial_basis: EnergyBasis,
    final_basis: EnergyBasis,
    p_initial: Vec<f64>,
    p_final: Vec<f64>,
}

impl EpmDistribution {
    /// Builds the table from marginals. Marginals need not be normalized or
    /// non-negative, which lets callers evaluate it on non-state operators.
    pub fn from_marginals(p_initial: Vec<f64>, p_final: Vec<f64>, initial_basis: EnergyBasis, final_basis: EnergyBasis) -> Result<Self> {
        if p_initial.len() != initial_basis.len() || p_final.len() != final_basis.len() {
            return Err(Error::DimensionMismatch("marginal lengths differ from level counts".into()));
        }
        let mut entries = Vec::with_capacity(p_initial.len() * p_final.len());
        for (l, &pi) in p_initial.iter().enumerate() {
            for (k, &pf) in p_final.iter().enumerate() {
                entries.push(EpmEntry {
                    l,
                    k,
                    delta_e: final_basis.energy(k) - initial_basis.energy(l),
                    probability: pi * pf,
                });
            }
        }
        Ok(Self { entries, initial_basis, final_basis, p_initial, p_final })
    }

    pub fn entries(&self) -> &[EpmEntry] {
        &self.entries
    }

    pub fn initial_basis(&self) -> &EnergyBasis {
        &self.initial_basis
    }

    pub fn final_basis(&self) -> &EnergyBasis {
        &self.final_basis
    }

    pub fn p_initial(&self) -> &[f64] {
        &self.p_initial
    }

    pub fn p_final(&self) -> &[f64] {
        &self.p_final
    }

    pub fn probability(&self, l: usize, k: usize) -> f64 {
        self.entries[l * self.p_final.len() + k].probability
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }

    /// ⟨ΔE⟩ over the table.
    pub fn mean_delta_e(&self) -> f64 {
        self.entries.iter().map(|e| e.probability * e.delta_e).sum()
    }

    /// Σ p(l,k) f(ΔE_lk).
    pub fn average(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.entries.iter().map(|e| e.probability * f(e.delta_e)).sum()
    }

    /// Entries whose joint probability vanishes.
    pub fn zero_entries(&self) -> impl Iterator<Item = &EpmEntry> {
        self.entries.iter().filter(|e| e.probability == 0.0)
    }

    /// Distribution over distinct ΔE values, ascending, merging values
    /// within `MERGE_TOL`.
    pub fn histogram(&self) -> Vec<(f64, f64)> {
        let mut pairs: Vec<(f64, f64)> = self.entries.iter().map(|e| (e.delta_e, e.probability)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (de, p) in pairs {
            match out.last_mut() {
                Some(last) if (de - last.0).abs() <= MERGE_TOL * de.abs().max(1.0) => last.1 += p,
                _ => out.push((de, p)),
            }
        }
        out
    }

    /// CSV with columns l,k (or l_A,l_B,k_A,k_B),E_i,E_f,delta_E,p_i,p_f,p_joint.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let bipartite = self.initial_basis.factors().is_some() && self.final_basis.factors().is_some();
        let head = if bipartite { "l_A,l_B,k_A,k_B" } else { "l,k" };
        writeln!(w, "{head},E_i,E_f,delta_E,p_i,p_f,p_joint")?;
        for e in &self.entries {
            let mut cells = Vec::with_capacity(10);
            if bipartite {
                let (la, lb) = self.initial_basis.split_label(e.l).expect("product basis");
                let (ka, kb) = self.final_basis.split_label(e.k).expect("product basis");
                cells.extend([la, lb, ka, kb].map(|x| x.to_string()));
            } else {
                cells.extend([e.l, e.k].map(|x| x.to_string()));
            }
            cells.push(num(self.initial_basis.energy(e.l)));
            cells.push(num(self.final_basis.energy(e.k)));
            cells.push(num(e.delta_e));
            cells.push(num(self.p_initial[e.l]));
            cells.push(num(self.p_final[e.k]));
            cells.push(num(e.probability));
            writeln!(w, "{}", row(&cells))?;
        }
        Ok(())
    }
}

/// p^i_l = Tr(ρ_i Π^i_l), p^f_k = Tr(Φ[ρ_i] Π^f_k).
pub fn epm_distribution(rho_i: &DensityMatrix, channel: &QuantumChannel, basis_i: &EnergyBasis, basis_f: &EnergyBasis) -> Result<EpmDistribution> {
    let d = rho_i.dim();
    if channel.dim() != d || basis_i.dim() != d || basis_f.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "state {d}, channel {}, bases {} and {}",
            channel.dim(),
            basis_i.dim(),
            basis_f.dim()
        )));
    }
    let rho_f = channel.apply_operator(rho_i.matrix());
    EpmDistribution::from_marginals(basis_i.probabilities(rho_i.matrix()), basis_f.probabilities(&rho_f), basis_i.clone(), basis_f.clone())
}

/// G(u) = Σ p(l,k) e^{iuΔE}; u may be complex.
pub fn characteristic_function(dist: &EpmDistribution, u: C64) -> C64 {
    let i = C64::new(0.0, 1.0);
    dist.entries().iter().map(|e| (i * u * e.delta_e).exp() * e.probability).sum()
}

/// e^{zH} for Hermitian H and complex z.
fn exp_hermitian_complex(h: &ComplexMatrix, z: C64) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(h)?;
    let n = eig.dim();
    let v = &eig.eigenvectors;
    let w: Vec<C64> = eig.eigenvalues.iter().map(|&e| (z * e).exp()).collect();
    Ok(ComplexMatrix::from_fn(n, n, |a, b| (0..n).map(|k| v.get(a, k) * w[k] * v.get(b, k).conj()).sum()))
}

/// G(u) = Tr(ρ_i e^{−iuH_i}) Tr(Φ[ρ_i] e^{iuH_f}).
pub fn characteristic_operator_form(rho_i: &DensityMatrix, channel: &QuantumChannel, h_i: &ComplexMatrix, h_f: &ComplexMatrix, u: C64) -> Result<C64> {
    let i = C64::new(0.0, 1.0);
    let a = rho_i.matrix().trace_product(&exp_hermitian_complex(h_i, -i * u)?);
    let b = channel.apply_operator(rho_i.matrix()).trace_product(&exp_hermitian_complex(h_f, i * u)?);
    Ok(a * b)
}

/// |⟨ΔE⟩_table − (Tr(H_f Φ[ρ_i]) − Tr(H_i ρ_i))|.
pub fn mean_energy_residual(dist: &EpmDistribution, rho_i: &DensityMatrix, channel: &QuantumChannel, h_i: &ComplexMatrix, h_f: &ComplexMatrix) -> f64 {
    let rho_f = channel.apply_operator(rho_i.matrix());
    let direct = rho_f.expectation(h_f) - rho_i.matrix().expectation(h_i);
    (dist.mean_delta_e() - direct).abs()
}
