//! Quantum states, energy bases, Gibbs states, Hamiltonian schedules and
//! entropic functionals. Units: ħ = k_B = 1, natural logarithms.

mod basis;
mod density;
mod literal;
mod schedule;
mod thermo;

pub use basis::{EnergyBasis, DEGENERACY_TOL};
pub use density::{DensityMatrix, REPAIR_TOL, STATE_TOL};
pub use literal::MatrixLiteral;
pub use schedule::{cosine_window, exchange_coupling, BipartiteLocal, HamiltonianFn, HamiltonianSchedule};
pub use thermo::{
    dephase, dephase_operator, free_energy_difference, log_partition_function, relative_entropy,
    relative_entropy_of_coherence, thermal_state, von_neumann_entropy,
};
