use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numkernel::{ops, ComplexMatrix};

pub type HamiltonianFn = Arc<dyn Fn(f64) -> ComplexMatrix + Send + Sync>;

/// Local pieces of a bipartite schedule H(t) = H_A(t)⊗I + I⊗H_B(t) + H_int(t).
#[derive(Clone)]
pub struct BipartiteLocal {
    pub dims: (usize, usize),
    pub h_a: HamiltonianFn,
    pub h_b: HamiltonianFn,
    pub h_int: HamiltonianFn,
}

/// Time-dependent Hamiltonian on [t_i, t_f] (ħ = 1).
#[derive(Clone)]
pub struct HamiltonianSchedule {
    evaluator: HamiltonianFn,
    t_i: f64,
    t_f: f64,
    dim: usize,
    local: Option<BipartiteLocal>,
}

impl fmt::Debug for HamiltonianSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianSchedule")
            .field("t_i", &self.t_i)
            .field("t_f", &self.t_f)
            .field("dim", &self.dim)
            .field("bipartite", &self.local.as_ref().map(|l| l.dims))
            .finish()
    }
}

impl HamiltonianSchedule {
    pub fn new(evaluator: HamiltonianFn, t_i: f64, t_f: f64) -> Result<Self> {
        if !(t_f > t_i) {
            return Err(Error::Config(format!("schedule needs t_f > t_i, got [{t_i}, {t_f}]")));
        }
        let h0 = evaluator(t_i);
        if !h0.is_square() {
            return Err(Error::DimensionMismatch("Hamiltonian must be square".into()));
        }
        let dim = h0.rows();
        for k in 0..=4 {
            let t = t_i + (t_f - t_i) * k as f64 / 4.0;
            let h = evaluator(t);
            if h.rows() != dim || h.hermiticity_defect() > 1e-10 * h.frobenius_norm().max(1.0) {
                return Err(Error::NonHermitianInput(h.hermiticity_defect()));
            }
        }
        Ok(Self { evaluator, t_i, t_f, dim, local: None })
    }

    /// Time-independent H.
    pub fn constant(h: ComplexMatrix, t_i: f64, t_f: f64) -> Result<Self> {
        Self::new(Arc::new(move |_| h.clone()), t_i, t_f)
    }

    /// H(t) = (Ω/2)(sin(ωt) σ_x + cos(ωt) σ_z).
    pub fn rotating_xz(rabi: f64, omega: f64, t_i: f64, t_f: f64) -> Result<Self> {
        let (sx, sz) = (ops::sigma_x(), ops::sigma_z());
        Self::new(
            Arc::new(move |t| &sx.scale_re(0.5 * rabi * (omega * t).sin()) + &sz.scale_re(0.5 * rabi * (omega * t).cos())),
            t_i,
            t_f,
        )
    }

    /// Local schedules plus an interaction switched by `window`, which must
    /// vanish at both endpoints.
    pub fn bipartite_switched(
        h_a: HamiltonianFn,
        h_b: HamiltonianFn,
        interaction: ComplexMatrix,
        window: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        t_i: f64,
        t_f: f64,
    ) -> Result<Self> {
        let da = h_a(t_i).rows();
        let db = h_b(t_i).rows();
        if interaction.rows() != da * db || !interaction.is_square() {
            return Err(Error::DimensionMismatch(format!("interaction of size {} for parties ({da}, {db})", interaction.rows())));
        }
        let h_int: HamiltonianFn = {
            let w = window.clone();
            Arc::new(move |t| interaction.scale_re(w(t)))
        };
        for t in [t_i, t_f] {
            let n = h_int(t).frobenius_norm();
            if n > 1e-12 {
                return Err(Error::Config(format!("interaction does not vanish at t = {t} (norm {n:.3e})")));
            }
        }
        let (ia, ib) = (ComplexMatrix::identity(da), ComplexMatrix::identity(db));
        let (fa, fb, fi) = (h_a.clone(), h_b.clone(), h_int.clone());
        let evaluator: HamiltonianFn = Arc::new(move |t| {
            let mut h = fa(t).kron(&ib);
            h += &ia.kron(&fb(t));
            h += &fi(t);
            h
        });
        let mut s = Self::new(evaluator, t_i, t_f)?;
        s.local = Some(BipartiteLocal { dims: (da, db), h_a, h_b, h_int });
        Ok(s)
    }

    pub fn at(&self, t: f64) -> ComplexMatrix {
        (self.evaluator)(t)
    }

    pub fn t_i(&self) -> f64 {
        self.t_i
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }

    pub fn duration(&self) -> f64 {
        self.t_f - self.t_i
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn initial(&self) -> ComplexMatrix {
        self.at(self.t_i)
    }

    pub fn final_(&self) -> ComplexMatrix {
        self.at(self.t_f)
    }

    pub fn local(&self) -> Option<&BipartiteLocal> {
        self.local.as_ref()
    }
}

/// sin²(π s) on s = (t − t_i)/(t_f − t_i): a smooth switch vanishing at both ends.
pub fn cosine_window(t_i: f64, t_f: f64) -> Arc<dyn Fn(f64) -> f64 + Send + Sync> {
    Arc::new(move |t| {
        let s = ((t - t_i) / (t_f - t_i)).clamp(0.0, 1.0);
        if s == 0.0 || s == 1.0 {
            0.0
        } else {
            0.5 * (1.0 - (2.0 * std::f64::consts::PI * s).cos())
        }
    })
}

/// σ_x⊗σ_x + σ_y⊗σ_y, the excitation-exchange coupling.
pub fn exchange_coupling() -> ComplexMatrix {
    let (x, y) = (ops::sigma_x(), ops::sigma_y());
    &x.kron(&x) + &y.kron(&y)
}

