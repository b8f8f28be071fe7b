use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::registry::{build_dynamics, JumpSpec, ScheduleSpec};
use crate::dynamics::steps_for;
use crate::epm::Protocol;
use crate::error::{Error, Result};
use crate::numkernel::C64;
use crate::qstate::{DensityMatrix, MatrixLiteral};

/// Current configuration schema version.
pub const SCHEMA_VERSION: u32 = 1;

/// A scenario: system, dynamics, initial states and the tasks to run.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub name: String,
    pub system: SystemKind,
    pub beta: f64,
    pub initial_state: StateSpec,
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub jumps: Vec<JumpSpec>,
    /// Initial state of the backward process; defaults to the final Gibbs state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backward_initial_state: Option<StateSpec>,
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_per_unit_time: Option<f64>,
    /// Assert ⟨e^{−ΔΣ}⟩ = 1 in addition to reporting it.
    #[serde(default)]
    pub expect_sigma_ift: bool,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Single,
    Bipartite,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative tolerance for whole-table identities (Jarzynski, integral FT).
    #[serde(default = "default_identity")]
    pub identity: f64,
    /// Absolute tolerance for row-wise entropy-production identities.
    #[serde(default = "default_row")]
    pub row: f64,
    /// Reconstruction residual allowed for state decompositions.
    #[serde(default = "default_decomposition")]
    pub decomposition: f64,
    /// Mean-energy residual of the EPM table.
    #[serde(default = "default_mean_energy")]
    pub mean_energy: f64,
}

fn default_identity() -> f64 {
    1e-9
}

fn default_row() -> f64 {
    1e-9
}

fn default_decomposition() -> f64 {
    1e-8
}

fn default_mean_energy() -> f64 {
    1e-8
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { identity: default_identity(), row: default_row(), decomposition: default_decomposition(), mean_energy: default_mean_energy() }
    }
}

/// Named state families, literals and files.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// Qubit [[a, γ], [γ*, 1 − a]] in the computational basis, |γ|² ≤ a(1 − a).
    IniCoh {
        a: f64,
        gamma: f64,
        #[serde(default)]
        gamma_im: f64,
    },
    /// p|Φ+⟩⟨Φ+| + (1 − p)I/4.
    Werner { p: f64 },
    /// Gibbs state of the initial Hamiltonian (local Gibbs state inside a product).
    Thermal,
    /// Gibbs state of the final Hamiltonian.
    FinalThermal,
    MaximallyMixed { dim: usize },
    Literal { matrix: MatrixLiteral },
    /// JSON state record, relative to the configuration file.
    File { path: PathBuf },
    Product { a: Box<StateSpec>, b: Box<StateSpec> },
}

/// Which subsystem a nested state spec describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Site {
    Whole,
    A,
    B,
}

impl StateSpec {
    /// Builds the state for `protocol`; relative file paths resolve against `base_dir`.
    pub fn build(&self, protocol: &Protocol, base_dir: &Path) -> Result<DensityMatrix> {
        let rho = self.build_at(protocol, base_dir, Site::Whole)?;
        if rho.dim() != protocol.dim() {
            return Err(Error::Config(format!("state of dimension {} for a system of dimension {}", rho.dim(), protocol.dim())));
        }
        protocol.tag(&rho)
    }

    fn build_at(&self, protocol: &Protocol, base_dir: &Path, site: Site) -> Result<DensityMatrix> {
        let local = protocol.local.as_ref();
        Ok(match self {
            StateSpec::IniCoh { a, gamma, gamma_im } => DensityMatrix::qubit_coherent(*a, C64::new(*gamma, *gamma_im))?,
            StateSpec::Werner { p } => DensityMatrix::werner(*p)?,
            StateSpec::Thermal => match (site, local) {
                (Site::Whole, _) => protocol.gamma_i.clone(),
                (Site::A, Some(l)) => l.gamma_a_i.clone(),
                (Site::B, Some(l)) => l.gamma_b_i.clone(),
                _ => return Err(Error::Config("product state on a single system".into())),
            },
            StateSpec::FinalThermal => match (site, local) {
                (Site::Whole, _) => protocol.gamma_f.clone(),
                (Site::A, Some(l)) => l.gamma_a_f.clone(),
                (Site::B, Some(l)) => l.gamma_b_f.clone(),
                _ => return Err(Error::Config("product state on a single system".into())),
            },
            StateSpec::MaximallyMixed { dim } => DensityMatrix::maximally_mixed(*dim),
            StateSpec::Literal { matrix } => DensityMatrix::new(matrix.to_matrix()?)?,
            StateSpec::File { path } => {
                let full = base_dir.join(path);
                let text = std::fs::read_to_string(&full).map_err(|e| Error::Config(format!("cannot read state file {}: {e}", full.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("state file {}: {e}", full.display())))?
            }
            StateSpec::Product { a, b } => {
                if site != Site::Whole || local.is_none() {
                    return Err(Error::Config("product states need a bipartite system".into()));
                }
                let (ra, rb) = (a.build_at(protocol, base_dir, Site::A)?, b.build_at(protocol, base_dir, Site::B)?);
                let dims = local.map(|l| l.dims).unwrap_or_default();
                if (ra.dim(), rb.dim()) != dims {
                    return Err(Error::Config(format!("product factors of dimensions ({}, {}) for subsystems {dims:?}", ra.dim(), rb.dim())));
                }
                DensityMatrix::product(&ra, &rb)
            }
        })
    }

    fn validate(&self, what: &str) -> Result<()> {
        match self {
            StateSpec::IniCoh { a, gamma, gamma_im } => {
                if !(0.0..=1.0).contains(a) {
                    return Err(Error::Config(format!("{what}: a = {a} outside [0, 1]")));
                }
                let g2 = gamma * gamma + gamma_im * gamma_im;
                if !(g2 <= a * (1.0 - a) + 1e-15) {
                    return Err(Error::Config(format!("{what}: |γ|² = {g2} exceeds a(1 − a) = {}", a * (1.0 - a))));
                }
            }
            StateSpec::Werner { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::Config(format!("{what}: Werner p = {p} outside [0, 1]")));
                }
            }
            StateSpec::MaximallyMixed { dim } if *dim == 0 => return Err(Error::Config(format!("{what}: dimension must be positive"))),
            StateSpec::Product { a, b } => {
                a.validate(what)?;
                b.validate(what)?;
            }
            _ => {}
        }
        Ok(())
    }
}

/// One task, written either as a bare name or as an object with parameters.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(try_from = "TaskRepr", into = "TaskRepr")]
pub enum TaskSpec {
    /// Resource decompositions of the initial state.
    Decompose,
    /// Every applicable Jarzynski form against the EPM average.
    Jarzynski,
    /// Trajectory tables of the detailed fluctuation theorem.
    Crooks,
    /// Forward averages behind the integral fluctuation theorems.
    IntegralFt,
    /// CFD of the initial state.
    Cfd,
    /// CFD over the coherent qubit family [[a, γ], [γ, 1 − a]].
    CfdSweep(CfdSweepTask),
    /// EFD estimate and bounds, once per seed.
    Efd { seeds: Option<Vec<u64>> },
    Fig2,
    Fig3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CfdSweepTask {
    /// Population a; defaults to the one of an `ini_coh` initial state.
    pub a: Option<f64>,
    /// Grid of γ ≥ 0; defaults to {0, 0.01, …, 0.30}.
    pub gammas: Option<Vec<f64>>,
    /// Also evaluate −γ.
    pub both_signs: bool,
    /// Assert that the CFD is nondecreasing in |γ|.
    pub expect_monotone: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
enum FullTask {
    Decompose,
    Jarzynski,
    Crooks,
    IntegralFt,
    Cfd,
    CfdSweep {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gammas: Option<Vec<f64>>,
        #[serde(default)]
        both_signs: bool,
        #[serde(default)]
        expect_monotone: bool,
    },
    Efd {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seeds: Option<Vec<u64>>,
    },
    Fig2,
    Fig3,
}

/// A bare task name or an object tagged by `task`.
#[derive(Serialize, Deserialize)]
#[serde(transparent)]
struct TaskRepr(serde_json::Value);

impl TryFrom<TaskRepr> for TaskSpec {
    type Error = serde_json::Error;

    fn try_from(TaskRepr(v): TaskRepr) -> std::result::Result<Self, Self::Error> {
        let v = match v {
            serde_json::Value::String(name) => serde_json::json!({ "task": name }),
            other => other,
        };
        Ok(match serde_json::from_value::<FullTask>(v)? {
            FullTask::Decompose => TaskSpec::Decompose,
            FullTask::Jarzynski => TaskSpec::Jarzynski,
            FullTask::Crooks => TaskSpec::Crooks,
            FullTask::IntegralFt => TaskSpec::IntegralFt,
            FullTask::Cfd => TaskSpec::Cfd,
            FullTask::CfdSweep { a, gammas, both_signs, expect_monotone } => TaskSpec::CfdSweep(CfdSweepTask { a, gammas, both_signs, expect_monotone }),
            FullTask::Efd { seeds } => TaskSpec::Efd { seeds },
            FullTask::Fig2 => TaskSpec::Fig2,
            FullTask::Fig3 => TaskSpec::Fig3,
        })
    }
}

impl From<TaskSpec> for TaskRepr {
    fn from(t: TaskSpec) -> Self {
        let full = match t {
            TaskSpec::Decompose => FullTask::Decompose,
            TaskSpec::Jarzynski => FullTask::Jarzynski,
            TaskSpec::Crooks => FullTask::Crooks,
            TaskSpec::IntegralFt => FullTask::IntegralFt,
            TaskSpec::Cfd => FullTask::Cfd,
            TaskSpec::CfdSweep(CfdSweepTask { a, gammas, both_signs, expect_monotone }) => FullTask::CfdSweep { a, gammas, both_signs, expect_monotone },
            TaskSpec::Efd { seeds } => FullTask::Efd { seeds },
            TaskSpec::Fig2 => FullTask::Fig2,
            TaskSpec::Fig3 => FullTask::Fig3,
        };
        TaskRepr(serde_json::to_value(full).expect("task serializes"))
    }
}

impl TaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TaskSpec::Decompose => "decompose",
            TaskSpec::Jarzynski => "jarzynski",
            TaskSpec::Crooks => "crooks",
            TaskSpec::IntegralFt => "integral_ft",
            TaskSpec::Cfd => "cfd",
            TaskSpec::CfdSweep(_) => "cfd_sweep",
            TaskSpec::Efd { .. } => "efd",
            TaskSpec::Fig2 => "fig2",
            TaskSpec::Fig3 => "fig3",
        }
    }
}

impl ScenarioConfig {
    /// Parses a configuration; syntax and schema problems become `Error::Config`.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks parameter domains and that names, tasks and system agree.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.version != SCHEMA_VERSION {
            return fail(format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.version));
        }
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c)) || self.name.starts_with('.') {
            return fail(format!("scenario name {:?} must be a nonempty [A-Za-z0-9_.-] string", self.name));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return fail(format!("beta = {} must be positive", self.beta));
        }
        let t = &self.tolerances;
        for (name, v) in [("identity", t.identity), ("row", t.row), ("decomposition", t.decomposition), ("mean_energy", t.mean_energy)] {
            if !(v.is_finite() && v > 0.0) {
                return fail(format!("tolerance {name} = {v} must be positive"));
            }
        }
        if let Some(s) = self.steps_per_unit_time {
            if !(s.is_finite() && s > 0.0) {
                return fail(format!("steps_per_unit_time = {s} must be positive"));
            }
        }
        if self.schedule.is_bipartite() != (self.system == SystemKind::Bipartite) {
            return fail(format!("system {:?} does not match the schedule", self.system));
        }
        for j in &self.jumps {
            if !(j.kappa.is_finite() && j.kappa >= 0.0) {
                return fail(format!("jump rate {} must be nonnegative", j.kappa));
            }
        }
        self.initial_state.validate("initial_state")?;
        if let Some(b) = &self.backward_initial_state {
            b.validate("backward_initial_state")?;
        }
        if self.tasks.is_empty() {
            return fail("no tasks".into());
        }
        let mut names: Vec<&str> = self.tasks.iter().map(TaskSpec::name).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return fail(format!("task {} listed twice", w[0]));
        }
        for task in &self.tasks {
            match task {
                TaskSpec::CfdSweep(p) => {
                    if self.system != SystemKind::Single {
                        return fail("cfd_sweep needs a single qubit".into());
                    }
                    let a = match (p.a, &self.initial_state) {
                        (Some(a), _) => a,
                        (None, StateSpec::IniCoh { a, .. }) => *a,
                        (None, _) => return fail("cfd_sweep needs `a` unless the initial state is ini_coh".into()),
                    };
                    if !(0.0..=1.0).contains(&a) {
                        return fail(format!("cfd_sweep: a = {a} outside [0, 1]"));
                    }
                    for &g in p.gammas.as_deref().unwrap_or(&[]) {
                        if !(g * g <= a * (1.0 - a) + 1e-15) {
                            return fail(format!("cfd_sweep: γ = {g} violates γ² ≤ a(1 − a)"));
                        }
                    }
                    if p.gammas.is_none() && 0.09 > a * (1.0 - a) + 1e-15 {
                        return fail(format!("cfd_sweep: the default grid up to γ = 0.3 needs a(1 − a) ≥ 0.09 (a = {a})"));
                    }
                }
                TaskSpec::Efd { seeds } => {
                    if self.system != SystemKind::Bipartite {
                        return fail("efd needs a bipartite system".into());
                    }
                    if seeds.as_ref().is_some_and(|s| s.is_empty()) {
                        return fail("efd: empty seed list".into());
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// EPM protocol generated by the configured dynamics.
    pub fn protocol(&self) -> Result<Protocol> {
        let spec = build_dynamics(&self.schedule, &self.jumps)?;
        let steps = match self.steps_per_unit_time {
            Some(s) => steps_for(spec.schedule().duration(), s),
            None => spec.default_steps(),
        };
        let p = Protocol::from_dynamics(&spec, steps, self.beta)?;
        if self.system == SystemKind::Bipartite && !p.is_bipartite() {
            return Err(Error::Config("bipartite schedule with an interaction that does not vanish at the endpoints".into()));
        }
        Ok(p)
    }

    /// Canonical JSON serialization, hashed into the manifest.
    pub fn canonical_json(&self) -> String {
        let v = serde_json::to_value(self).expect("configuration serializes");
        serde_json::to_string(&v).expect("value serializes")
    }
}

/// Canonical scenario of the unitary CFD figure (`fig2`) or its dissipative
/// counterpart with κ = 0.1, L = σ_x (`fig3`).
pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    use crate::dynamics::registry::OperatorSpec;
    let jumps = match name {
        "fig2" => vec![],
        "fig3" => vec![JumpSpec { operator: OperatorSpec::named("sigma_x"), kappa: 0.1, site: None }],
        _ => return None,
    };
    Some(ScenarioConfig {
        version: SCHEMA_VERSION,
        name: name.into(),
        system: SystemKind::Single,
        beta: 1.0,
        initial_state: StateSpec::IniCoh { a: 0.9, gamma: 0.0, gamma_im: 0.0 },
        schedule: ScheduleSpec::RotatingXz { rabi: 1.0, omega: 1.0, t_i: 0.0, t_f: 10.0 },
        jumps,
        backward_initial_state: None,
        tasks: vec![TaskSpec::CfdSweep(CfdSweepTask { a: Some(0.9), gammas: None, both_signs: true, expect_monotone: true })],
        seed: 0,
        tolerances: Tolerances::default(),
        steps_per_unit_time: None,
        expect_sigma_ift: false,
    })
}

/// Path of the configuration's directory, for resolving state files.
pub fn base_dir_of(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}
