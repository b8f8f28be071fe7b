use crate::error::{Error, Result};
use crate::numkernel::{ComplexMatrix, C64};
use crate::qstate::{DensityMatrix, HamiltonianSchedule};

/// Default RK4 resolution.
pub const STEPS_PER_UNIT_TIME: f64 = 2000.0;

/// Trace drift above which integration is declared unstable.
pub const TRACE_DRIFT_TOL: f64 = 1e-6;

/// Dissipator term κ(LρL† − ½{L†L, ρ}).
#[derive(Clone, Debug)]
pub struct JumpOperator {
    pub op: ComplexMatrix,
    pub kappa: f64,
}

/// Master equation dρ/dt = −i[H(t), ρ] + Σ_α κ_α(L_α ρ L_α† − ½{L_α†L_α, ρ}).
#[derive(Clone, Debug)]
pub struct LindbladSpec {
    schedule: HamiltonianSchedule,
    jumps: Vec<JumpOperator>,
    // Cached L†L per jump.
    decay: Vec<ComplexMatrix>,
}

impl LindbladSpec {
    pub fn new(schedule: HamiltonianSchedule, jumps: Vec<JumpOperator>) -> Result<Self> {
        let d = schedule.dim();
        for j in &jumps {
            if !(j.kappa >= 0.0) || !j.kappa.is_finite() {
                return Err(Error::Config(format!("jump rate must be finite and non-negative, got {}", j.kappa)));
            }
            if j.op.rows() != d || !j.op.is_square() {
                return Err(Error::DimensionMismatch(format!("jump operator of size {} for dimension {d}", j.op.rows())));
            }
            if !j.op.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        let decay = jumps.iter().map(|j| j.op.adjoint().matmul(&j.op)).collect();
        Ok(Self { schedule, jumps, decay })
    }

    /// Closed-system evolution under `schedule`.
    pub fn unitary(schedule: HamiltonianSchedule) -> Self {
        Self { schedule, jumps: Vec::new(), decay: Vec::new() }
    }

    pub fn schedule(&self) -> &HamiltonianSchedule {
        &self.schedule
    }

    pub fn jumps(&self) -> &[JumpOperator] {
        &self.jumps
    }

    pub fn dim(&self) -> usize {
        self.schedule.dim()
    }

    /// ceil(2000 · (t_f − t_i)), at least 1.
    pub fn default_steps(&self) -> usize {
        steps_for(self.schedule.duration(), STEPS_PER_UNIT_TIME)
    }

    /// Right-hand side of the master equation at time t with H = H(t) supplied.
    pub fn generator(&self, h: &ComplexMatrix, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = h.commutator(x).scale(C64::new(0.0, -1.0));
        for (j, ldl) in self.jumps.iter().zip(&self.decay) {
            if j.kappa == 0.0 {
                continue;
            }
            let mut term = j.op.matmul(x).matmul(&j.op.adjoint());
            term -= &ldl.anticommutator(x).scale_re(0.5);
            out.axpy(C64::new(j.kappa, 0.0), &term);
        }
        out
    }

    /// Hamiltonians at the RK4 nodes (start, midpoint, end) of every step.
    pub(crate) fn grid(&self, steps: usize) -> Result<TimeGrid> {
        if steps == 0 {
            return Err(Error::Config("integration needs at least one step".into()));
        }
        let (t_i, t_f) = (self.schedule.t_i(), self.schedule.t_f());
        let dt = (t_f - t_i) / steps as f64;
        let mut nodes = Vec::with_capacity(2 * steps + 1);
        for n in 0..=2 * steps {
            let t = if n == 2 * steps { t_f } else { t_i + 0.5 * dt * n as f64 };
            nodes.push(self.schedule.at(t));
        }
        Ok(TimeGrid { dt, nodes })
    }

    /// RK4 integration of an arbitrary operator on a precomputed grid.
    pub(crate) fn integrate(&self, grid: &TimeGrid, x0: &ComplexMatrix) -> ComplexMatrix {
        let dt = grid.dt;
        let mut x = x0.clone();
        let steps = (grid.nodes.len() - 1) / 2;
        for n in 0..steps {
            let (h0, hm, h1) = (&grid.nodes[2 * n], &grid.nodes[2 * n + 1], &grid.nodes[2 * n + 2]);
            let k1 = self.generator(h0, &x);
            let k2 = self.generator(hm, &(&x + &k1.scale_re(0.5 * dt)));
            let k3 = self.generator(hm, &(&x + &k2.scale_re(0.5 * dt)));
            let k4 = self.generator(h1, &(&x + &k3.scale_re(dt)));
            let mut inc = k1;
            inc += &k2.scale_re(2.0);
            inc += &k3.scale_re(2.0);
            inc += &k4;
            x.axpy(C64::new(dt / 6.0, 0.0), &inc);
        }
        x
    }
}

pub(crate) struct TimeGrid {
    dt: f64,
    nodes: Vec<ComplexMatrix>,
}

pub fn steps_for(duration: f64, per_unit_time: f64) -> usize {
    ((per_unit_time * duration).ceil() as usize).max(1)
}

/// ρ(t_f) from ρ(t_i) = ρ0 with `steps` RK4 steps.
pub fn propagate(spec: &LindbladSpec, rho0: &DensityMatrix, steps: usize) -> Result<DensityMatrix> {
    if rho0.dim() != spec.dim() {
        return Err(Error::DimensionMismatch(format!("state of dimension {} for dynamics of dimension {}", rho0.dim(), spec.dim())));
    }
    let grid = spec.grid(steps)?;
    let x = spec.integrate(&grid, rho0.matrix());
    if !x.is_finite() {
        return Err(Error::IntegrationUnstable(f64::INFINITY));
    }
    let drift = (x.trace() - rho0.matrix().trace()).norm();
    if drift > TRACE_DRIFT_TOL {
        return Err(Error::IntegrationUnstable(drift));
    }
    let out = DensityMatrix::from_numeric(&x)?;
    match rho0.dims() {
        Some(d) => out.with_dims(d),
        None => Ok(out),
    }
}
