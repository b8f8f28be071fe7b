//! End-point-measurement joint statistics.

mod distribution;
mod protocol;

pub use distribution::{
    characteristic_function, characteristic_operator_form, epm_distribution, mean_energy_residual, EpmDistribution,
    EpmEntry, MERGE_TOL,
};
pub use protocol::{dual_reference, LocalThermal, Protocol, ENDPOINT_INTERACTION_TOL, UNITAL_TOL};
