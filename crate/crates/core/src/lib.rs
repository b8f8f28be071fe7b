//! End-point-measurement (EPM) fluctuation theorems on small quantum systems.
//!
//! The crate builds exact EPM joint distributions from a state, a CPTP map and
//! the initial/final energy bases, then evaluates Jarzynski-type equalities,
//! trajectory-level entropy-production decompositions and KL-divergence based
//! fluctuation distances for coherence and entanglement.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod epm;
pub mod error;
pub mod fmt;
pub mod ftheorems;
pub mod measures;
pub mod numkernel;
pub mod qstate;
pub mod random;
pub mod resources;

pub use error::{Error, Result};
