//! Fluctuation distances: KL divergences between EPM tables, the coherence
//! fluctuation distance (CFD), the entanglement fluctuation distance (EFD)
//! and their upper-bound chains.

mod cfd;
mod efd;
mod kl;
mod simplex;
mod sweep;

pub use cfd::{cfd, cfd_bounds, cfd_for, phase_covariance_check, CfdReport, PhaseCovariance, SimplexRun, CFD_GRAD_TOL, COVARIANCE_TOL};
pub use efd::{efd_bounds, efd_estimate, EfdBounds, EfdReport, EFD_ATOMS, FW_CONVERGED_GAP, FW_GAP_TOL};
pub use kl::{kl_divergence, kl_divergence_tables, KlDivergence, LABEL_TOL};
pub use simplex::{kkt_defect, minimize_on_simplex, project_to_simplex, SimplexObjective};
pub use sweep::{bound_chain_slack, cfd_sweep, gamma_grid, monotonicity_violation, write_cfd_sweep_csv, write_cfd_trace_log, CfdSweepPoint};
