use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::dynamics::QuantumChannel;
use crate::epm::{EpmDistribution, Protocol};
use crate::error::{Error, Result};
use crate::fmt::{num, row};
use crate::numkernel::ComplexMatrix;
use crate::qstate::{DensityMatrix, EnergyBasis};
use crate::resources::{bsa_decompose, correlation_split_with, nine_term_split, triple_decompose, BsaDecomposition, TripleDecomposition};

/// Marginal probabilities at or below this are treated as exact zeros.
pub const ZERO_PROBABILITY: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyMode {
    SingleTriple,
    BipartiteCorrelation,
    BipartiteBsa,
}

impl EntropyMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::SingleTriple => "single_triple",
            Self::BipartiteCorrelation => "bipartite_correlation",
            Self::BipartiteBsa => "bipartite_bsa",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportFlag {
    Ok,
    /// P_Γ = 0.
    ForwardZero,
    /// P_Γ̃ = 0 with P_Γ > 0; Δs_tot = +∞.
    BackwardZero,
    /// Both probabilities positive but a correction term has a vanishing
    /// reference probability.
    SingularTerm,
}

/// One trajectory (l → k) and its entropy-production budget.
#[derive(Clone, Debug, Serialize)]
pub struct EntropyRow {
    pub l: usize,
    pub k: usize,
    pub delta_e: f64,
    pub p_forward: f64,
    pub p_backward: f64,
    pub ds_tot: f64,
    pub tpm_part: f64,
    /// tpm_part − β(ΔE − ΔF); ln of the level-multiplicity ratio.
    pub tpm_gap: f64,
    pub d_sigma: f64,
    pub d_theta: f64,
    pub d_sigma_coh: f64,
    pub d_psi: f64,
    pub d_lambda: f64,
    pub d_xi: f64,
    pub residual: f64,
    pub support_flag: SupportFlag,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryEntropyTable {
    pub mode: EntropyMode,
    pub beta: f64,
    pub delta_f: f64,
    pub rows: Vec<EntropyRow>,
}

/// Decompositions of the forward and backward initial states.
#[derive(Clone, Debug)]
pub enum EntropyDecompositions {
    Triple { forward: TripleDecomposition, backward: TripleDecomposition },
    /// Correlation operators ρ − γ_A ⊗ γ_B.
    Correlation { forward: ComplexMatrix, backward: ComplexMatrix },
    Bsa { forward: BsaDecomposition, backward: BsaDecomposition },
}

impl EntropyDecompositions {
    pub fn mode(&self) -> EntropyMode {
        match self {
            Self::Triple { .. } => EntropyMode::SingleTriple,
            Self::Correlation { .. } => EntropyMode::BipartiteCorrelation,
            Self::Bsa { .. } => EntropyMode::BipartiteBsa,
        }
    }

    /// Decomposes ρ_i against γ_i and ρ̃_i against γ_f.
    pub fn compute(protocol: &Protocol, rho_i: &DensityMatrix, rho_tilde: &DensityMatrix, mode: EntropyMode) -> Result<Self> {
        let (rho, rho_t) = (protocol.tag(rho_i)?, protocol.tag(rho_tilde)?);
        match mode {
            EntropyMode::SingleTriple => Ok(Self::Triple {
                forward: triple_decompose(&rho, &protocol.gamma_i, &protocol.basis_i)?,
                backward: triple_decompose(&rho_t, &protocol.gamma_f, &protocol.basis_f)?,
            }),
            EntropyMode::BipartiteCorrelation => {
                let l = local(protocol)?;
                Ok(Self::Correlation {
                    forward: correlation_split_with(&rho, &l.gamma_a_i, &l.gamma_b_i)?.correlation_operator,
                    backward: correlation_split_with(&rho_t, &l.gamma_a_f, &l.gamma_b_f)?.correlation_operator,
                })
            }
            EntropyMode::BipartiteBsa => {
                if local(protocol)?.dims != (2, 2) {
                    return Err(Error::DecompositionInapplicable("best separable approximation needs two qubits".into()));
                }
                Ok(Self::Bsa { forward: bsa_decompose(&rho)?, backward: bsa_decompose(&rho_t)? })
            }
        }
    }
}

fn local(protocol: &Protocol) -> Result<&crate::epm::LocalThermal> {
    protocol.local.as_ref().ok_or_else(|| Error::DecompositionInapplicable("bipartite mode on a single-system protocol".into()))
}

/// Measurement of one end of a trajectory: projectors of `basis` after
/// applying `map` (none for the initial measurement).
#[derive(Clone, Copy)]
struct Side<'a> {
    basis: &'a EnergyBasis,
    map: Option<&'a QuantumChannel>,
}

impl Side<'_> {
    fn probs(&self, x: &ComplexMatrix) -> Vec<f64> {
        match self.map {
            Some(m) => self.basis.probabilities(&m.apply_operator(x)),
            None => self.basis.probabilities(x),
        }
    }
}

/// Per-label correction terms of one side; `None` marks a singular term.
#[derive(Clone, Default)]
struct SideTerms {
    theta: Vec<Option<f64>>,
    sigma: Vec<Option<f64>>,
    psi: Vec<Option<f64>>,
    lambda: Vec<Option<f64>>,
    xi: Vec<Option<f64>>,
}

fn ln_checked(x: f64) -> Option<f64> {
    (x > 0.0).then(|| x.ln())
}

fn triple_side(side: Side<'_>, dec: &TripleDecomposition) -> SideTerms {
    let [w0, w1, w2] = dec.weights();
    let g = side.probs(dec.gamma.matrix());
    let td = side.probs(dec.tau_d.matrix());
    let tc = side.probs(dec.tau_c.matrix());
    let mut out = SideTerms::default();
    for n in 0..g.len() {
        if g[n] <= ZERO_PROBABILITY {
            out.theta.push(None);
            out.sigma.push(None);
            continue;
        }
        // Θ = ln((1−a) + a(1−c) p(τ_d)/p(γ))
        let base = w0 + w1 * td[n] / g[n];
        out.theta.push(ln_checked(base));
        // Σ = ln(1 + ac p(τ_c) / ((1−a)p(γ) + a(1−c)p(τ_d)))
        let denom = w0 * g[n] + w1 * td[n];
        out.sigma.push(if w2 == 0.0 { Some(0.0) } else if denom > ZERO_PROBABILITY { ln_checked(1.0 + w2 * tc[n] / denom) } else { None });
    }
    out
}

fn correlation_side(side: Side<'_>, gamma: &ComplexMatrix, corr: &ComplexMatrix) -> SideTerms {
    let g = side.probs(gamma);
    let e = side.probs(corr);
    // Ψ = ln(1 + p(𝔈)/p(γ))
    let psi = g.iter().zip(&e).map(|(&g, &e)| if g > ZERO_PROBABILITY { ln_checked(1.0 + e / g) } else { None }).collect();
    SideTerms { psi, ..Default::default() }
}

struct BsaLocal<'a> {
    gamma_a: &'a DensityMatrix,
    gamma_b: &'a DensityMatrix,
    basis_a: &'a EnergyBasis,
    basis_b: &'a EnergyBasis,
}

fn bsa_side(side: Side<'_>, gamma: &ComplexMatrix, dec: &BsaDecomposition, loc: &BsaLocal<'_>) -> Result<SideTerms> {
    let g = side.probs(gamma);
    let n_lab = g.len();
    // Σ_j r_j p(ρ^A_j ⊗ ρ^B_j) assembled from the nine-term split.
    let mut sep = vec![0.0; n_lab];
    for t in &dec.product_terms {
        let split = nine_term_split(&t.rho_a, &t.rho_b, loc.gamma_a, loc.gamma_b, loc.basis_a, loc.basis_b)?;
        let pd = side.probs(&split.rho_d);
        let pc = side.probs(&split.rho_c);
        for n in 0..n_lab {
            sep[n] += t.weight * (split.thermal_weight * g[n] + pd[n] + pc[n]);
        }
    }
    let pe = side.probs(dec.rho_e.matrix());
    let lam = dec.lambda;
    let mut out = SideTerms::default();
    for n in 0..n_lab {
        if g[n] <= ZERO_PROBABILITY {
            out.lambda.push(None);
            out.xi.push(None);
            continue;
        }
        // Λ = ln Σ_j r_j 𝒮_j with 𝒮_j = p(ρ^A_j ⊗ ρ^B_j)/p(γ).
        let s = sep[n] / g[n];
        let big_lambda = ln_checked(s);
        out.lambda.push(big_lambda);
        // Ξ = ln((1−λ) + λ p(ρ_E) / (p(γ) e^Λ))
        out.xi.push(big_lambda.and_then(|_| ln_checked((1.0 - lam) + lam * pe[n] / sep[n])));
    }
    Ok(out)
}

fn get(v: &[Option<f64>], n: usize) -> Option<f64> {
    if v.is_empty() {
        Some(0.0)
    } else {
        v[n]
    }
}

/// Trajectory-level entropy production Δs_tot = ln(P_Γ(l,k)/P_Γ̃(k,l)) and
/// its additive decomposition for the chosen mode.
pub fn entropy_table(
    protocol: &Protocol,
    forward: &EpmDistribution,
    backward: &EpmDistribution,
    decompositions: &EntropyDecompositions,
) -> Result<TrajectoryEntropyTable> {
    let (ni, nf) = (protocol.basis_i.len(), protocol.basis_f.len());
    if forward.p_initial().len() != ni
        || forward.p_final().len() != nf
        || backward.p_initial().len() != nf
        || backward.p_final().len() != ni
    {
        return Err(Error::LabelMismatch);
    }
    let fi = Side { basis: &protocol.basis_i, map: None };
    let ff = Side { basis: &protocol.basis_f, map: Some(&protocol.channel) };
    let bi = Side { basis: &protocol.basis_f, map: None };
    let bf = Side { basis: &protocol.basis_i, map: Some(&protocol.dual) };
    let (gi, gf) = (protocol.gamma_i.matrix(), protocol.gamma_f.matrix());

    // Thermal reference marginals.
    let ref_fi = fi.probs(gi);
    let ref_ff = ff.probs(gi);
    let ref_bi = bi.probs(gf);
    let ref_bf = bf.probs(gf);

    let [t_fi, t_ff, t_bi, t_bf] = match decompositions {
        EntropyDecompositions::Triple { forward: f, backward: b } => [triple_side(fi, f), triple_side(ff, f), triple_side(bi, b), triple_side(bf, b)],
        EntropyDecompositions::Correlation { forward: f, backward: b } => {
            [correlation_side(fi, gi, f), correlation_side(ff, gi, f), correlation_side(bi, gf, b), correlation_side(bf, gf, b)]
        }
        EntropyDecompositions::Bsa { forward: f, backward: b } => {
            let l = local(protocol)?;
            let li = BsaLocal { gamma_a: &l.gamma_a_i, gamma_b: &l.gamma_b_i, basis_a: &l.basis_a_i, basis_b: &l.basis_b_i };
            let lf = BsaLocal { gamma_a: &l.gamma_a_f, gamma_b: &l.gamma_b_f, basis_a: &l.basis_a_f, basis_b: &l.basis_b_f };
            [bsa_side(fi, gi, f, &li)?, bsa_side(ff, gi, f, &li)?, bsa_side(bi, gf, b, &lf)?, bsa_side(bf, gf, b, &lf)?]
        }
    };
    let mode = decompositions.mode();
    let beta = protocol.beta;
    let mut rows = Vec::with_capacity(ni * nf);
    for l in 0..ni {
        for k in 0..nf {
            let (pl, pk) = (forward.p_initial()[l], forward.p_final()[k]);
            let (qk, ql) = (backward.p_initial()[k], backward.p_final()[l]);
            let p_forward = forward.probability(l, k);
            let p_backward = backward.probability(k, l);
            let delta_e = protocol.basis_f.energy(k) - protocol.basis_i.energy(l);
            let tpm_part = ref_fi[l].ln() - ref_bi[k].ln();
            let tpm_gap = tpm_part - beta * (delta_e - protocol.delta_f);
            let d_sigma = ref_ff[k].ln() - ref_bf[l].ln();
            let forward_zero = pl <= ZERO_PROBABILITY || pk <= ZERO_PROBABILITY;
            let backward_zero = qk <= ZERO_PROBABILITY || ql <= ZERO_PROBABILITY;
            let diff = |v: fn(&SideTerms) -> &Vec<Option<f64>>| -> Option<f64> {
                Some(get(v(&t_fi), l)? + get(v(&t_ff), k)? - get(v(&t_bi), k)? - get(v(&t_bf), l)?)
            };
            let terms = [diff(|t| &t.theta), diff(|t| &t.sigma), diff(|t| &t.psi), diff(|t| &t.lambda), diff(|t| &t.xi)];
            let singular = terms.iter().any(Option::is_none) || !d_sigma.is_finite() || !tpm_part.is_finite();
            let [d_theta, d_sigma_coh, mut d_psi, d_lambda, d_xi] = terms.map(|t| t.unwrap_or(f64::NAN));
            if mode == EntropyMode::BipartiteBsa {
                // Ψ = ln(p(ρ)/p(γ)) from the measured marginals, independent of the decomposition.
                d_psi = (pl / ref_fi[l]).ln() + (pk / ref_ff[k]).ln() - (qk / ref_bi[k]).ln() - (ql / ref_bf[l]).ln();
            }
            let (ds_tot, support_flag) = if forward_zero {
                (f64::NAN, SupportFlag::ForwardZero)
            } else if backward_zero {
                (f64::INFINITY, SupportFlag::BackwardZero)
            } else {
                let ds = pl.ln() + pk.ln() - qk.ln() - ql.ln();
                (ds, if singular { SupportFlag::SingularTerm } else { SupportFlag::Ok })
            };
            let predicted = tpm_part
                + d_sigma
                + match mode {
                    EntropyMode::SingleTriple => d_theta + d_sigma_coh,
                    EntropyMode::BipartiteCorrelation => d_psi,
                    EntropyMode::BipartiteBsa => d_lambda + d_xi,
                };
            let residual = if support_flag == SupportFlag::Ok { ds_tot - predicted } else { f64::NAN };
            rows.push(EntropyRow {
                l,
                k,
                delta_e,
                p_forward,
                p_backward,
                ds_tot,
                tpm_part,
                tpm_gap,
                d_sigma,
                d_theta,
                d_sigma_coh,
                d_psi,
                d_lambda,
                d_xi,
                residual,
                support_flag,
            });
        }
    }
    Ok(TrajectoryEntropyTable { mode, beta, delta_f: protocol.delta_f, rows })
}

/// Decomposes ρ_i and ρ̃_i, builds both tables and the entropy table.
pub fn entropy_table_for(protocol: &Protocol, rho_i: &DensityMatrix, rho_tilde: &DensityMatrix, mode: EntropyMode) -> Result<(TrajectoryEntropyTable, EpmDistribution)> {
    let forward = protocol.forward(rho_i)?;
    let backward = protocol.backward(rho_tilde)?;
    let dec = EntropyDecompositions::compute(protocol, rho_i, rho_tilde, mode)?;
    Ok((entropy_table(protocol, &forward, &backward, &dec)?, forward))
}

impl TrajectoryEntropyTable {
    fn ok_rows(&self) -> impl Iterator<Item = &EntropyRow> {
        self.rows.iter().filter(|r| r.support_flag == SupportFlag::Ok)
    }

    /// Largest |residual| over rows with full support.
    pub fn max_residual(&self) -> f64 {
        self.ok_rows().map(|r| r.residual.abs()).fold(0.0, f64::max)
    }

    /// Largest |tpm_gap| over all rows.
    pub fn max_tpm_gap(&self) -> f64 {
        self.rows.iter().map(|r| r.tpm_gap.abs()).fold(0.0, f64::max)
    }

    /// Largest |ΔΨ − ΔΛ − ΔΞ| (bipartite_bsa mode only).
    pub fn max_psi_gap(&self) -> f64 {
        self.ok_rows().map(|r| (r.d_psi - r.d_lambda - r.d_xi).abs()).fold(0.0, f64::max)
    }

    pub fn count(&self, flag: SupportFlag) -> usize {
        self.rows.iter().filter(|r| r.support_flag == flag).count()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "l,k,delta_E,p_forward,p_backward,ds_tot,tpm_part,tpm_gap,d_sigma,d_theta,d_Sigma,d_psi,d_lambda,d_xi,residual,support"
        )?;
        for r in &self.rows {
            let mut cells = vec![r.l.to_string(), r.k.to_string()];
            cells.extend(
                [
                    r.delta_e,
                    r.p_forward,
                    r.p_backward,
                    r.ds_tot,
                    r.tpm_part,
                    r.tpm_gap,
                    r.d_sigma,
                    r.d_theta,
                    r.d_sigma_coh,
                    r.d_psi,
                    r.d_lambda,
                    r.d_xi,
                    r.residual,
                ]
                .map(num),
            );
            cells.push(serde_json::to_value(r.support_flag).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default());
            writeln!(w, "{}", row(&cells))?;
        }
        Ok(())
    }
}

/// Averages over the forward table behind the integral fluctuation theorems.
#[derive(Clone, Debug, Serialize)]
pub struct IntegralFtReport {
    /// ⟨e^{−Δs_tot}⟩_Γ
    pub exp_minus_ds_tot: f64,
    /// ⟨Δs_tot⟩_Γ
    pub mean_ds_tot: f64,
    /// ⟨e^{−ΔΣ}⟩_Γ
    pub exp_minus_d_sigma_coh: f64,
    /// ⟨e^{−ΔΨ}⟩_Γ
    pub exp_minus_d_psi: f64,
    pub mean_tpm_part: f64,
    pub mean_d_sigma: f64,
    pub mean_d_theta: f64,
    pub mean_d_sigma_coh: f64,
    pub mean_d_psi: f64,
    pub mean_d_lambda: f64,
    pub mean_d_xi: f64,
    /// β(⟨ΔE⟩ − ΔF) + ⟨Δσ⟩ + ⟨ΔΘ⟩ + ⟨ΔΣ⟩ (+ ⟨ΔΨ⟩ in bipartite modes).
    pub second_law_budget: f64,
    /// No row with P_Γ > 0 lacks backward support or has a singular term.
    pub valid: bool,
    pub excluded_rows: usize,
}

impl IntegralFtReport {
    pub fn ift_holds(&self, tol: f64) -> bool {
        self.valid && (self.exp_minus_ds_tot - 1.0).abs() <= tol
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        let v = serde_json::to_value(self).expect("plain struct");
        v.as_object()
            .expect("object")
            .iter()
            .filter_map(|(k, v)| v.as_f64().or_else(|| v.as_bool().map(|b| b as u8 as f64)).map(|x| (k.clone(), x)))
            .collect()
    }
}

/// Forward averages of the table columns; rows with P_Γ = 0 contribute 0.
pub fn integral_ft_check(table: &TrajectoryEntropyTable, forward: &EpmDistribution) -> IntegralFtReport {
    let mut acc = [0.0f64; 11];
    let mut excluded = 0;
    for r in &table.rows {
        let p = forward.probability(r.l, r.k);
        if r.support_flag == SupportFlag::ForwardZero || p <= 0.0 {
            continue;
        }
        if r.support_flag != SupportFlag::Ok {
            excluded += 1;
            continue;
        }
        let vals = [
            (-r.ds_tot).exp(),
            r.ds_tot,
            (-r.d_sigma_coh).exp(),
            (-r.d_psi).exp(),
            r.tpm_part,
            r.d_sigma,
            r.d_theta,
            r.d_sigma_coh,
            r.d_psi,
            r.d_lambda,
            r.d_xi,
        ];
        for (a, v) in acc.iter_mut().zip(vals) {
            *a += p * v;
        }
    }
    let corrections = match table.mode {
        EntropyMode::SingleTriple => acc[6] + acc[7],
        EntropyMode::BipartiteCorrelation | EntropyMode::BipartiteBsa => acc[8],
    };
    IntegralFtReport {
        exp_minus_ds_tot: acc[0],
        mean_ds_tot: acc[1],
        exp_minus_d_sigma_coh: acc[2],
        exp_minus_d_psi: acc[3],
        mean_tpm_part: acc[4],
        mean_d_sigma: acc[5],
        mean_d_theta: acc[6],
        mean_d_sigma_coh: acc[7],
        mean_d_psi: acc[8],
        mean_d_lambda: acc[9],
        mean_d_xi: acc[10],
        second_law_budget: table.beta * (forward.mean_delta_e() - table.delta_f) + acc[5] + corrections,
        valid: excluded == 0,
        excluded_rows: excluded,
    }
}
