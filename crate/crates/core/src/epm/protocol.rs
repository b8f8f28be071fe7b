use super::distribution::{epm_distribution, EpmDistribution};
use crate::dynamics::{channel_from_propagator, LindbladSpec, QuantumChannel};
use crate::error::{Error, Result};
use crate::numkernel::ComplexMatrix;
use crate::qstate::{free_energy_difference, thermal_state, DensityMatrix, EnergyBasis};

/// Interaction terms below this Frobenius norm at the endpoints count as switched off.
pub const ENDPOINT_INTERACTION_TOL: f64 = 1e-12;
/// Φ[I] may deviate from I by this much for the unital fallback.
pub const UNITAL_TOL: f64 = 1e-9;

/// Local Gibbs states and bases of a bipartite protocol whose interaction
/// vanishes at both endpoints.
#[derive(Clone, Debug)]
pub struct LocalThermal {
    pub dims: (usize, usize),
    pub gamma_a_i: DensityMatrix,
    pub gamma_b_i: DensityMatrix,
    pub gamma_a_f: DensityMatrix,
    pub gamma_b_f: DensityMatrix,
    pub basis_a_i: EnergyBasis,
    pub basis_b_i: EnergyBasis,
    pub basis_a_f: EnergyBasis,
    pub basis_b_f: EnergyBasis,
}

/// Everything fixed by the driving: endpoint Hamiltonians and their Gibbs
/// states at inverse temperature β, the forward map Φ and the time-reversed
/// map Φ̃.
#[derive(Clone, Debug)]
pub struct Protocol {
    pub beta: f64,
    pub h_i: ComplexMatrix,
    pub h_f: ComplexMatrix,
    pub basis_i: EnergyBasis,
    pub basis_f: EnergyBasis,
    pub gamma_i: DensityMatrix,
    pub gamma_f: DensityMatrix,
    pub delta_f: f64,
    pub channel: QuantumChannel,
    pub dual: QuantumChannel,
    /// Reference state used to build Φ̃.
    pub reference: DensityMatrix,
    pub local: Option<LocalThermal>,
}

impl Protocol {
    /// Single-system protocol.
    pub fn single(h_i: &ComplexMatrix, h_f: &ComplexMatrix, channel: QuantumChannel, beta: f64) -> Result<Self> {
        let basis_i = EnergyBasis::from_hamiltonian(h_i)?;
        let basis_f = EnergyBasis::from_hamiltonian(h_f)?;
        let (gamma_i, z_i) = thermal_state(h_i, beta)?;
        let (gamma_f, z_f) = thermal_state(h_f, beta)?;
        Self::assemble(beta, h_i.clone(), h_f.clone(), basis_i, basis_f, gamma_i, gamma_f, (z_i, z_f), channel, None)
    }

    /// Bipartite protocol with H = H_A⊗I + I⊗H_B at both endpoints.
    /// Labels are pairs, ordered A-major.
    pub fn bipartite(
        (h_a_i, h_b_i): (&ComplexMatrix, &ComplexMatrix),
        (h_a_f, h_b_f): (&ComplexMatrix, &ComplexMatrix),
        channel: QuantumChannel,
        beta: f64,
    ) -> Result<Self> {
        let dims = (h_a_i.rows(), h_b_i.rows());
        if (h_a_f.rows(), h_b_f.rows()) != dims {
            return Err(Error::DimensionMismatch("local dimensions change between endpoints".into()));
        }
        let local_h = |a: &ComplexMatrix, b: &ComplexMatrix| &a.kron(&ComplexMatrix::identity(dims.1)) + &ComplexMatrix::identity(dims.0).kron(b);
        let (ga_i, za_i) = thermal_state(h_a_i, beta)?;
        let (gb_i, zb_i) = thermal_state(h_b_i, beta)?;
        let (ga_f, za_f) = thermal_state(h_a_f, beta)?;
        let (gb_f, zb_f) = thermal_state(h_b_f, beta)?;
        let local = LocalThermal {
            dims,
            basis_a_i: EnergyBasis::from_hamiltonian(h_a_i)?,
            basis_b_i: EnergyBasis::from_hamiltonian(h_b_i)?,
            basis_a_f: EnergyBasis::from_hamiltonian(h_a_f)?,
            basis_b_f: EnergyBasis::from_hamiltonian(h_b_f)?,
            gamma_a_i: ga_i.clone(),
            gamma_b_i: gb_i.clone(),
            gamma_a_f: ga_f.clone(),
            gamma_b_f: gb_f.clone(),
        };
        let basis_i = EnergyBasis::product(&local.basis_a_i, &local.basis_b_i);
        let basis_f = EnergyBasis::product(&local.basis_a_f, &local.basis_b_f);
        let gamma_i = DensityMatrix::product(&ga_i, &gb_i);
        let gamma_f = DensityMatrix::product(&ga_f, &gb_f);
        Self::assemble(
            beta,
            local_h(h_a_i, h_b_i),
            local_h(h_a_f, h_b_f),
            basis_i,
            basis_f,
            gamma_i,
            gamma_f,
            (za_i * zb_i, za_f * zb_f),
            channel,
            Some(local),
        )
    }

    /// Protocol generated by Lindblad dynamics. Bipartite schedules whose
    /// interaction vanishes at the endpoints get product bases.
    pub fn from_dynamics(spec: &LindbladSpec, steps: usize, beta: f64) -> Result<Self> {
        let channel = channel_from_propagator(spec, steps)?;
        let s = spec.schedule();
        match s.local() {
            Some(l) if (l.h_int)(s.t_i()).frobenius_norm() < ENDPOINT_INTERACTION_TOL && (l.h_int)(s.t_f()).frobenius_norm() < ENDPOINT_INTERACTION_TOL => {
                Self::bipartite((&(l.h_a)(s.t_i()), &(l.h_b)(s.t_i())), (&(l.h_a)(s.t_f()), &(l.h_b)(s.t_f())), channel, beta)
            }
            _ => Self::single(&s.initial(), &s.final_(), channel, beta),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        beta: f64,
        h_i: ComplexMatrix,
        h_f: ComplexMatrix,
        basis_i: EnergyBasis,
        basis_f: EnergyBasis,
        gamma_i: DensityMatrix,
        gamma_f: DensityMatrix,
        (z_i, z_f): (f64, f64),
        channel: QuantumChannel,
        local: Option<LocalThermal>,
    ) -> Result<Self> {
        let d = channel.dim();
        if h_i.rows() != d || h_f.rows() != d {
            return Err(Error::DimensionMismatch(format!("Hamiltonians of dimension {} and {} for a channel on {d}", h_i.rows(), h_f.rows())));
        }
        let delta_f = free_energy_difference(z_i, z_f, beta)?;
        let reference = dual_reference(&channel)?;
        let dual = channel.dual_channel(&reference)?;
        let dims = local.as_ref().map(|l| l.dims);
        let tag = |s: DensityMatrix| match dims {
            Some(d) => s.with_dims(d),
            None => Ok(s),
        };
        Ok(Self {
            beta,
            h_i,
            h_f,
            basis_i,
            basis_f,
            gamma_i: tag(gamma_i)?,
            gamma_f: tag(gamma_f)?,
            delta_f,
            channel,
            dual,
            reference,
            local,
        })
    }

    pub fn dim(&self) -> usize {
        self.channel.dim()
    }

    pub fn is_bipartite(&self) -> bool {
        self.local.is_some()
    }

    /// Attaches the local split to a state of the right dimension.
    pub fn tag(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        match &self.local {
            Some(l) => rho.clone().with_dims(l.dims),
            None => Ok(rho.clone()),
        }
    }

    /// Forward table of ρ_i under Φ.
    pub fn forward(&self, rho_i: &DensityMatrix) -> Result<EpmDistribution> {
        epm_distribution(rho_i, &self.channel, &self.basis_i, &self.basis_f)
    }

    /// Backward table of ρ̃_i under Φ̃, initial labels in the final basis.
    pub fn backward(&self, rho_tilde: &DensityMatrix) -> Result<EpmDistribution> {
        epm_distribution(rho_tilde, &self.dual, &self.basis_f, &self.basis_i)
    }
}

/// Full-rank fixed point of Φ, or I/d when Φ is unital and the fixed point
/// is not unique.
pub fn dual_reference(channel: &QuantumChannel) -> Result<DensityMatrix> {
    let d = channel.dim();
    let fallback = || -> Result<DensityMatrix> {
        let id = ComplexMatrix::identity(d);
        let defect = channel.apply_operator(&id).distance(&id);
        if defect > UNITAL_TOL {
            return Err(Error::NotAFixedPoint(defect));
        }
        Ok(DensityMatrix::maximally_mixed(d))
    };
    match channel.fixed_point() {
        Ok(fp) if fp.full_rank => Ok(fp.state),
        Ok(fp) => fallback().map_err(|_| Error::SingularFixedPoint(fp.min_eigenvalue)),
        Err(Error::NoUniqueFixedPoint(n)) => fallback().map_err(|_| Error::NoUniqueFixedPoint(n)),
        Err(e) => Err(e),
    }
}
