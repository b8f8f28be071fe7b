use std::collections::BTreeMap;

use serde::Serialize;

use crate::epm::{EpmDistribution, LocalThermal, Protocol};
use crate::error::{Error, Result};
use crate::numkernel::{matrix_function, ComplexMatrix, MatFn};
use crate::qstate::DensityMatrix;
use crate::resources::{
    bsa_decompose, correlation_split_with, nine_term_split, triple_decompose, weight_of_athermality, AthermalityDecomposition,
    BsaDecomposition, CorrelationSplit, TripleDecomposition,
};

/// Populations may deviate from the Gibbs populations by this much for the
/// coherence-operator form.
pub const POPULATION_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JarzynskiForm {
    CoherenceOperator,
    Athermality,
    Triple,
    CorrelationOperator,
    Bsa,
}

impl JarzynskiForm {
    pub const ALL: [JarzynskiForm; 5] = [Self::CoherenceOperator, Self::Athermality, Self::Triple, Self::CorrelationOperator, Self::Bsa];

    pub fn name(self) -> &'static str {
        match self {
            Self::CoherenceOperator => "coherence_operator",
            Self::Athermality => "athermality",
            Self::Triple => "triple",
            Self::CorrelationOperator => "correlation_operator",
            Self::Bsa => "bsa",
        }
    }
}

/// ⟨e^{−β(ΔE−ΔF)}⟩ and one decomposition-based evaluation of it.
#[derive(Clone, Debug, Serialize)]
pub struct JarzynskiReport {
    pub lhs: f64,
    pub rhs: f64,
    pub form: JarzynskiForm,
    pub term_breakdown: BTreeMap<String, f64>,
}

impl JarzynskiReport {
    /// |lhs − rhs| / max(1, lhs).
    pub fn relative_gap(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.lhs.abs().max(1.0)
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.relative_gap() <= tol
    }
}

/// Σ p(l,k) e^{−β(ΔE_lk − ΔF)}.
pub fn jarzynski_lhs(dist: &EpmDistribution, beta: f64, delta_f: f64) -> f64 {
    dist.average(|de| (-beta * (de - delta_f)).exp())
}

/// Tr(ρ_i γ_i⁻¹) · Tr(Φ[ρ_i] γ_f).
pub fn jarzynski_operator_form(protocol: &Protocol, rho_i: &DensityMatrix) -> Result<f64> {
    let inv = matrix_function(protocol.gamma_i.matrix(), MatFn::Inv)?;
    Ok(rho_i.matrix().expectation(&inv) * protocol.channel.apply_operator(rho_i.matrix()).expectation(protocol.gamma_f.matrix()))
}

/// Decomposition consumed by a right-hand side.
#[derive(Clone, Copy, Debug)]
pub enum JarzynskiIngredients<'a> {
    CoherenceOperator,
    Athermality(&'a AthermalityDecomposition),
    Triple(&'a TripleDecomposition),
    CorrelationOperator(&'a CorrelationSplit),
    Bsa(&'a BsaDecomposition),
}

impl JarzynskiIngredients<'_> {
    pub fn form(&self) -> JarzynskiForm {
        match self {
            Self::CoherenceOperator => JarzynskiForm::CoherenceOperator,
            Self::Athermality(_) => JarzynskiForm::Athermality,
            Self::Triple(_) => JarzynskiForm::Triple,
            Self::CorrelationOperator(_) => JarzynskiForm::CorrelationOperator,
            Self::Bsa(_) => JarzynskiForm::Bsa,
        }
    }
}

/// Trace functionals X ↦ Tr(γ_i⁻¹X) and X ↦ Tr(γ_f Φ[X]).
struct Traces<'a> {
    protocol: &'a Protocol,
    gamma_i_inv: ComplexMatrix,
}

impl<'a> Traces<'a> {
    fn new(protocol: &'a Protocol) -> Result<Self> {
        Ok(Self { protocol, gamma_i_inv: matrix_function(protocol.gamma_i.matrix(), MatFn::Inv)? })
    }

    fn initial(&self, x: &ComplexMatrix) -> f64 {
        x.trace_product(&self.gamma_i_inv).re
    }

    fn final_(&self, x: &ComplexMatrix) -> f64 {
        self.protocol.channel.apply_operator(x).trace_product(self.protocol.gamma_f.matrix()).re
    }
}

/// Assembles the right-hand side of the chosen form term by term.
pub fn jarzynski_rhs(protocol: &Protocol, rho_i: &DensityMatrix, ingredients: JarzynskiIngredients<'_>) -> Result<JarzynskiReport> {
    let lhs = jarzynski_lhs(&protocol.forward(rho_i)?, protocol.beta, protocol.delta_f);
    let tr = Traces::new(protocol)?;
    let d = protocol.dim() as f64;
    let gi = protocol.gamma_i.matrix();
    let tr_gf_phi_gi = tr.final_(gi);
    let mut terms = BTreeMap::new();
    let mut put = |k: &str, v: f64| {
        terms.insert(k.to_string(), v);
    };
    let rhs = match ingredients {
        JarzynskiIngredients::CoherenceOperator => {
            let p = protocol.basis_i.probabilities(rho_i.matrix());
            let g = protocol.basis_i.probabilities(gi);
            let dev = p.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if dev > POPULATION_TOL {
                return Err(Error::DecompositionInapplicable(format!("populations differ from Gibbs populations by {dev:e}")));
            }
            // Tr(γ_f Φ[χ]) by linearity, χ = ρ_i − γ_i.
            let tr_chi = tr.final_(rho_i.matrix()) - tr_gf_phi_gi;
            put("d", d);
            put("population_deviation", dev);
            put("tr_gf_phi_gi", tr_gf_phi_gi);
            put("tr_gf_phi_chi", tr_chi);
            d * (tr_gf_phi_gi + tr_chi)
        }
        JarzynskiIngredients::Athermality(dec) => {
            let a = dec.a;
            let ti = tr.initial(dec.tau.matrix());
            let tf = tr.final_(dec.tau.matrix());
            put("a", a);
            put("d", d);
            put("tr_gi_inv_tau", ti);
            put("tr_gf_phi_gi", tr_gf_phi_gi);
            put("tr_gf_phi_tau", tf);
            ((1.0 - a) * d + a * ti) * ((1.0 - a) * tr_gf_phi_gi + a * tf)
        }
        JarzynskiIngredients::Triple(dec) => {
            let [w0, w1, w2] = dec.weights();
            let (di, ci) = (tr.initial(dec.tau_d.matrix()), tr.initial(dec.tau_c.matrix()));
            let (df, cf) = (tr.final_(dec.tau_d.matrix()), tr.final_(dec.tau_c.matrix()));
            put("a", dec.a);
            put("c", dec.c);
            put("d", d);
            put("tr_gi_inv_tau_d", di);
            put("tr_gi_inv_tau_c", ci);
            put("tr_gf_phi_gi", tr_gf_phi_gi);
            put("tr_gf_phi_tau_d", df);
            put("tr_gf_phi_tau_c", cf);
            (w0 * d + w1 * di + w2 * ci) * (w0 * tr_gf_phi_gi + w1 * df + w2 * cf)
        }
        JarzynskiIngredients::CorrelationOperator(split) => {
            let e = &split.correlation_operator;
            let (ei, ef) = (tr.initial(e), tr.final_(e));
            put("d", d);
            put("tr_gi_inv_corr", ei);
            put("tr_gf_phi_gi", tr_gf_phi_gi);
            put("tr_gf_phi_corr", ef);
            put("marginal_defect", split.marginal_defect());
            (d + ei) * (tr_gf_phi_gi + ef)
        }
        JarzynskiIngredients::Bsa(dec) => {
            let local = require_local(protocol)?;
            let lam = dec.lambda;
            let (e_i, e_f) = (tr.initial(dec.rho_e.matrix()), tr.final_(dec.rho_e.matrix()));
            let (mut th_i, mut th_f, mut dg_i, mut dg_f, mut co_i, mut co_f) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
            for t in &dec.product_terms {
                let n = nine_term_split(&t.rho_a, &t.rho_b, &local.gamma_a_i, &local.gamma_b_i, &local.basis_a_i, &local.basis_b_i)?;
                th_i += t.weight * n.thermal_weight * d;
                th_f += t.weight * n.thermal_weight * tr_gf_phi_gi;
                dg_i += t.weight * tr.initial(&n.rho_d);
                dg_f += t.weight * tr.final_(&n.rho_d);
                co_i += t.weight * tr.initial(&n.rho_c);
                co_f += t.weight * tr.final_(&n.rho_c);
            }
            let j_i = lam * e_i + (1.0 - lam) * (th_i + dg_i + co_i);
            let j_f = lam * e_f + (1.0 - lam) * (th_f + dg_f + co_f);
            put("lambda", lam);
            put("terms", dec.product_terms.len() as f64);
            put("tr_gi_inv_rho_e", e_i);
            put("tr_gf_phi_rho_e", e_f);
            put("separable_thermal_i", th_i);
            put("separable_thermal_f", th_f);
            put("separable_diagonal_i", dg_i);
            put("separable_diagonal_f", dg_f);
            put("separable_coherent_i", co_i);
            put("separable_coherent_f", co_f);
            put("j_i", j_i);
            put("j_f", j_f);
            j_i * j_f
        }
    };
    Ok(JarzynskiReport { lhs, rhs, form: ingredients.form(), term_breakdown: terms })
}

fn require_local(protocol: &Protocol) -> Result<&LocalThermal> {
    protocol
        .local
        .as_ref()
        .ok_or_else(|| Error::DecompositionInapplicable("bipartite form on a protocol without local endpoint Hamiltonians".into()))
}

/// Computes the decomposition the form needs, then its right-hand side.
pub fn jarzynski_report(protocol: &Protocol, rho_i: &DensityMatrix, form: JarzynskiForm) -> Result<JarzynskiReport> {
    let rho = protocol.tag(rho_i)?;
    match form {
        JarzynskiForm::CoherenceOperator => jarzynski_rhs(protocol, &rho, JarzynskiIngredients::CoherenceOperator),
        JarzynskiForm::Athermality => {
            let dec = weight_of_athermality(&rho, &protocol.gamma_i)?;
            jarzynski_rhs(protocol, &rho, JarzynskiIngredients::Athermality(&dec))
        }
        JarzynskiForm::Triple => {
            let dec = triple_decompose(&rho, &protocol.gamma_i, &protocol.basis_i)?;
            jarzynski_rhs(protocol, &rho, JarzynskiIngredients::Triple(&dec))
        }
        JarzynskiForm::CorrelationOperator => {
            let local = require_local(protocol)?;
            let split = correlation_split_with(&rho, &local.gamma_a_i, &local.gamma_b_i)?;
            jarzynski_rhs(protocol, &rho, JarzynskiIngredients::CorrelationOperator(&split))
        }
        JarzynskiForm::Bsa => {
            if require_local(protocol)?.dims != (2, 2) {
                return Err(Error::DecompositionInapplicable("best separable approximation needs two qubits".into()));
            }
            let dec = bsa_decompose(&rho)?;
            jarzynski_rhs(protocol, &rho, JarzynskiIngredients::Bsa(&dec))
        }
    }
}

/// Every form whose preconditions hold for this state; inapplicable forms
/// are skipped.
pub fn applicable_reports(protocol: &Protocol, rho_i: &DensityMatrix) -> Result<Vec<JarzynskiReport>> {
    let mut out = Vec::new();
    for form in JarzynskiForm::ALL {
        match jarzynski_report(protocol, rho_i, form) {
            Ok(r) => out.push(r),
            Err(Error::DecompositionInapplicable(_)) | Err(Error::MarginalsNotThermal(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
