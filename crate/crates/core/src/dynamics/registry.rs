//! Named schedules and operators for configuration files.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::lindblad::{JumpOperator, LindbladSpec};
use crate::error::{Error, Result};
use crate::numkernel::{ops, ComplexMatrix};
use crate::qstate::{cosine_window, exchange_coupling, HamiltonianSchedule, MatrixLiteral};

/// An operator given by name, as a scaled operator, or as a matrix literal.
///
/// Names: `sigma_x`, `sigma_y`, `sigma_z`, `sigma_minus`, `sigma_plus`,
/// `identity` (qubit), `zero` (qubit), `exchange` (σxσx + σyσy), `xx`, `yy`,
/// `zz`, `swap`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum OperatorSpec {
    Named(String),
    Scaled { scale: f64, op: Box<OperatorSpec> },
    Literal(MatrixLiteral),
}

impl OperatorSpec {
    pub fn named(name: &str) -> Self {
        OperatorSpec::Named(name.into())
    }

    pub fn scaled(scale: f64, name: &str) -> Self {
        OperatorSpec::Scaled { scale, op: Box::new(Self::named(name)) }
    }

    pub fn build(&self) -> Result<ComplexMatrix> {
        match self {
            OperatorSpec::Named(n) => named_operator(n),
            OperatorSpec::Scaled { scale, op } => Ok(op.build()?.scale_re(*scale)),
            OperatorSpec::Literal(l) => l.to_matrix(),
        }
    }
}

pub fn named_operator(name: &str) -> Result<ComplexMatrix> {
    Ok(match name {
        "sigma_x" => ops::sigma_x(),
        "sigma_y" => ops::sigma_y(),
        "sigma_z" => ops::sigma_z(),
        "sigma_minus" => ops::sigma_minus(),
        "sigma_plus" => ops::sigma_plus(),
        "identity" => ComplexMatrix::identity(2),
        "zero" => ComplexMatrix::zeros(2, 2),
        "exchange" => exchange_coupling(),
        "xx" => ops::sigma_x().kron(&ops::sigma_x()),
        "yy" => ops::sigma_y().kron(&ops::sigma_y()),
        "zz" => ops::sigma_z().kron(&ops::sigma_z()),
        "swap" => {
            let mut s = ComplexMatrix::zeros(4, 4);
            for a in 0..2 {
                for b in 0..2 {
                    s.set(a * 2 + b, b * 2 + a, crate::numkernel::ONE);
                }
            }
            s
        }
        other => return Err(Error::Config(format!("unknown operator name {other:?}"))),
    })
}

/// Registered Hamiltonian schedules.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// Time-independent H.
    Static {
        hamiltonian: OperatorSpec,
        #[serde(default)]
        t_i: f64,
        t_f: f64,
    },
    /// H(t) = (Ω/2)(sin(ωt)σ_x + cos(ωt)σ_z).
    RotatingXz {
        #[serde(default = "one")]
        rabi: f64,
        #[serde(default = "one")]
        omega: f64,
        #[serde(default)]
        t_i: f64,
        t_f: f64,
    },
    /// Static local Hamiltonians plus g·w(t)·V with the sin² window w.
    BipartiteSwitched {
        h_a: OperatorSpec,
        h_b: OperatorSpec,
        interaction: OperatorSpec,
        #[serde(default = "one")]
        coupling: f64,
        #[serde(default)]
        t_i: f64,
        t_f: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<HamiltonianSchedule> {
        match self {
            ScheduleSpec::Static { hamiltonian, t_i, t_f } => HamiltonianSchedule::constant(hamiltonian.build()?, *t_i, *t_f),
            ScheduleSpec::RotatingXz { rabi, omega, t_i, t_f } => HamiltonianSchedule::rotating_xz(*rabi, *omega, *t_i, *t_f),
            ScheduleSpec::BipartiteSwitched { h_a, h_b, interaction, coupling, t_i, t_f } => {
                let (ha, hb) = (h_a.build()?, h_b.build()?);
                let v = interaction.build()?.scale_re(*coupling);
                HamiltonianSchedule::bipartite_switched(
                    Arc::new(move |_| ha.clone()),
                    Arc::new(move |_| hb.clone()),
                    v,
                    cosine_window(*t_i, *t_f),
                    *t_i,
                    *t_f,
                )
            }
        }
    }

    pub fn is_bipartite(&self) -> bool {
        matches!(self, ScheduleSpec::BipartiteSwitched { .. })
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub enum Site {
    A,
    B,
}

/// A jump operator with rate κ; `site` lifts a local operator to A⊗B.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct JumpSpec {
    pub operator: OperatorSpec,
    pub kappa: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<Site>,
}

impl JumpSpec {
    pub fn build(&self, schedule: &HamiltonianSchedule) -> Result<JumpOperator> {
        let op = self.operator.build()?;
        let op = match (self.site, schedule.local()) {
            (None, _) => op,
            (Some(site), Some(local)) => {
                let (da, db) = local.dims;
                match site {
                    Site::A => op.kron(&ComplexMatrix::identity(db)),
                    Site::B => ComplexMatrix::identity(da).kron(&op),
                }
            }
            (Some(_), None) => return Err(Error::Config("jump site given for a single-system schedule".into())),
        };
        Ok(JumpOperator { op, kappa: self.kappa })
    }
}

pub fn build_dynamics(schedule: &ScheduleSpec, jumps: &[JumpSpec]) -> Result<LindbladSpec> {
    let s = schedule.build()?;
    let j = jumps.iter().map(|j| j.build(&s)).collect::<Result<Vec<_>>>()?;
    LindbladSpec::new(s, j)
}
