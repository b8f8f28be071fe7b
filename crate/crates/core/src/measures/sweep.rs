use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::cfd::cfd_for;
use crate::epm::Protocol;
use crate::error::Result;
use crate::fmt::{num, row};
use crate::numkernel::C64;
use crate::qstate::DensityMatrix;

/// One point of a coherence sweep over the family [[a, γ], [γ, 1 − a]].
#[derive(Clone, Debug, Serialize)]
pub struct CfdSweepPoint {
    pub gamma: f64,
    pub cfd: f64,
    pub bound_dephased: f64,
    pub bound_cre: f64,
    pub converged: bool,
    pub optimizer_trace: Vec<f64>,
}

/// γ ∈ {0, step, …, n·step}.
pub fn gamma_grid(n: usize, step: f64) -> Vec<f64> {
    (0..=n).map(|k| k as f64 * step).collect()
}

/// CFD and both bounds at each γ, evaluated in parallel and returned in grid order.
pub fn cfd_sweep(protocol: &Protocol, a: f64, gammas: &[f64]) -> Result<Vec<CfdSweepPoint>> {
    gammas
        .par_iter()
        .map(|&g| {
            let rho = DensityMatrix::qubit_coherent(a, C64::new(g, 0.0))?;
            let r = cfd_for(protocol, &rho)?;
            Ok(CfdSweepPoint {
                gamma: g,
                cfd: r.cfd,
                bound_dephased: r.bound_dephased,
                bound_cre: r.bound_cre,
                converged: r.converged,
                optimizer_trace: r.optimizer_trace,
            })
        })
        .collect()
}

pub fn write_cfd_sweep_csv<W: Write>(points: &[CfdSweepPoint], mut w: W) -> Result<()> {
    writeln!(w, "gamma,cfd,bound_dephased,bound_cre")?;
    for p in points {
        writeln!(w, "{}", row(&[num(p.gamma), num(p.cfd), num(p.bound_dephased), num(p.bound_cre)]))?;
    }
    Ok(())
}

/// One line per point: γ, convergence flag, then the objective trace.
pub fn write_cfd_trace_log<W: Write>(points: &[CfdSweepPoint], mut w: W) -> Result<()> {
    for p in points {
        let trace: Vec<String> = p.optimizer_trace.iter().map(|&x| num(x)).collect();
        writeln!(w, "gamma={} converged={} trace={}", num(p.gamma), p.converged, trace.join(" "))?;
    }
    Ok(())
}

/// Smallest slack of 0 ≤ cfd ≤ bound_dephased ≤ bound_cre over the sweep.
pub fn bound_chain_slack(points: &[CfdSweepPoint]) -> f64 {
    points
        .iter()
        .map(|p| p.cfd.min(p.bound_dephased - p.cfd).min(p.bound_cre - p.bound_dephased))
        .fold(f64::INFINITY, f64::min)
}

/// Largest decrease of cfd between consecutive points ordered by |γ|.
pub fn monotonicity_violation(points: &[CfdSweepPoint]) -> f64 {
    let mut v: Vec<(f64, f64)> = points.iter().map(|p| (p.gamma.abs(), p.cfd)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v.windows(2).map(|w| w[0].1 - w[1].1).fold(0.0, f64::max)
}
