use serde::Serialize;

use crate::epm::EpmDistribution;
use crate::error::{Error, Result};

/// Energy differences of matched entries may differ by this much.
pub const LABEL_TOL: f64 = 1e-12;

/// D_KL(p‖q) between two EPM tables and between their marginals.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct KlDivergence {
    /// Σ p(l,k) ln(p(l,k)/q(l,k)); +∞ when q misses part of the support of p.
    pub value: f64,
    pub initial: f64,
    pub final_: f64,
    pub infinite: bool,
}

impl KlDivergence {
    /// |D(joint) − D(initial) − D(final)|; zero for normalized factorized tables.
    pub fn factorization_gap(&self) -> f64 {
        if self.infinite {
            return 0.0;
        }
        (self.value - self.initial - self.final_).abs()
    }
}

/// Σ p ln(p/q) with 0·ln 0 = 0 and +∞ where p > 0 = q.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a <= 0.0 {
            continue;
        }
        if b <= 0.0 {
            return f64::INFINITY;
        }
        s += a * (a / b).ln();
    }
    s
}

pub fn kl_divergence_tables(p: &EpmDistribution, q: &EpmDistribution) -> Result<KlDivergence> {
    let (ep, eq) = (p.entries(), q.entries());
    if ep.len() != eq.len() || p.p_initial().len() != q.p_initial().len() {
        return Err(Error::LabelMismatch);
    }
    for (a, b) in ep.iter().zip(eq) {
        if a.l != b.l || a.k != b.k || (a.delta_e - b.delta_e).abs() > LABEL_TOL * a.delta_e.abs().max(1.0) {
            return Err(Error::LabelMismatch);
        }
    }
    let joint_p: Vec<f64> = ep.iter().map(|e| e.probability).collect();
    let joint_q: Vec<f64> = eq.iter().map(|e| e.probability).collect();
    let value = kl_divergence(&joint_p, &joint_q);
    Ok(KlDivergence {
        value,
        initial: kl_divergence(p.p_initial(), q.p_initial()),
        final_: kl_divergence(p.p_final(), q.p_final()),
        infinite: value.is_infinite(),
    })
}
