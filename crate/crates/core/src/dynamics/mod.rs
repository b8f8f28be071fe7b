//! Open and closed time evolution as CPTP maps.

mod channel;
mod lindblad;
pub mod registry;

pub use channel::{
    channel_from_propagator, kraus_from_choi, FixedPoint, QuantumChannel, CP_TOL, FIXED_POINT_CLUSTER, FULL_RANK_FLOOR,
    KRAUS_DROP, TP_TOL,
};
pub use lindblad::{propagate, steps_for, JumpOperator, LindbladSpec, STEPS_PER_UNIT_TIME, TRACE_DRIFT_TOL};
