use rand::Rng;
use serde::Serialize;

use super::kl::{kl_divergence, kl_divergence_tables};
use super::simplex::{minimize_on_simplex, SimplexObjective};
use crate::epm::Protocol;
use crate::error::{Error, Result};
use crate::numkernel::{hermitian_eig, ComplexMatrix, C64, ZERO};
use crate::qstate::{relative_entropy, von_neumann_entropy, DensityMatrix};
use crate::random::{self, SeededRng};
use crate::resources::{bsa_decompose, BsaDecomposition};

/// Maximum number of product atoms kept in a separable candidate.
pub const EFD_ATOMS: usize = 8;
/// Frank–Wolfe gap at which a search stops.
pub const FW_GAP_TOL: f64 = 1e-10;
/// Gap below which the reported search counts as converged.
pub const FW_CONVERGED_GAP: f64 = 1e-6;
const FW_ITERATIONS: usize = 150;
const WEIGHT_ITERATIONS: usize = 60;
const RANDOM_STARTS: usize = 3;
const ORACLE_RANDOM_STARTS: usize = 4;
const RHO_STAR_SEED: u64 = 0xe0f0_5eed;

/// Upper bounds on the entanglement fluctuation distance.
#[derive(Clone, Debug, Serialize)]
pub struct EfdBounds {
    /// D_KL(p(ρ_i)‖p(ρ_S)).
    pub bound_bsa: f64,
    /// 2·D(ρ_i‖ρ_S).
    pub bound_bsa_relent: f64,
    /// D_KL(p(ρ_i)‖p(ρ_*)).
    pub bound_relent_table: f64,
    /// 2·D(ρ_i‖ρ_*), an upper estimate of twice the relative entropy of entanglement.
    pub bound_relent_ent: f64,
    pub rho_star: DensityMatrix,
    /// Some relative entropy is +∞.
    pub support_violation: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EfdReport {
    /// Best value found; an upper estimate of the true minimum.
    pub efd_upper_estimate: f64,
    pub best_separable_found: DensityMatrix,
    pub bound_bsa: f64,
    pub bound_bsa_relent: f64,
    pub bound_relent_table: f64,
    pub bound_relent_ent: f64,
    pub support_violation: bool,
    /// The winning search closed its Frank–Wolfe gap.
    pub converged: bool,
    pub final_gap: f64,
    /// Smallest eigenvalue of the best separable state (boundary diagnostic).
    pub boundary_min_eigenvalue: f64,
}

/// Pure product vector a ⊗ b of two qubits.
#[derive(Clone, Debug)]
struct Atom {
    a: [C64; 2],
    b: [C64; 2],
}

impl Atom {
    fn vector(&self) -> Vec<C64> {
        (0..4).map(|n| self.a[n / 2] * self.b[n % 2]).collect()
    }

    fn projector(&self) -> ComplexMatrix {
        let v = self.vector();
        ComplexMatrix::outer(&v, &v)
    }

    fn random(rng: &mut SeededRng) -> Self {
        let a = random::unit_vector(rng, 2);
        let b = random::unit_vector(rng, 2);
        Self { a: [a[0], a[1]], b: [b[0], b[1]] }
    }
}

fn lowest_eigvec(m: &ComplexMatrix) -> [C64; 2] {
    let e = hermitian_eig(&m.hermitian_part()).expect("2x2 Hermitian");
    let v = e.vector(0);
    [v[0], v[1]]
}

/// Alternating minimization of ⟨ab|G|ab⟩ over product vectors from `start`.
fn refine_atom(g: &ComplexMatrix, mut at: Atom) -> (Atom, f64) {
    let mut last = f64::INFINITY;
    for _ in 0..50 {
        let ma = ComplexMatrix::from_fn(2, 2, |i, ip| {
            let mut s = ZERO;
            for j in 0..2 {
                for jp in 0..2 {
                    s += at.b[j].conj() * g.get(2 * i + j, 2 * ip + jp) * at.b[jp];
                }
            }
            s
        });
        at.a = lowest_eigvec(&ma);
        let mb = ComplexMatrix::from_fn(2, 2, |j, jp| {
            let mut s = ZERO;
            for i in 0..2 {
                for ip in 0..2 {
                    s += at.a[i].conj() * g.get(2 * i + j, 2 * ip + jp) * at.a[ip];
                }
            }
            s
        });
        at.b = lowest_eigvec(&mb);
        let v = at.vector();
        let val = g.matvec(&v).iter().zip(&v).map(|(x, y)| (y.conj() * x).re).sum::<f64>();
        if (last - val).abs() < 1e-15 {
            return (at, val);
        }
        last = val;
    }
    (at, last)
}

fn product_oracle(g: &ComplexMatrix, active: &[Atom], rng: &mut SeededRng) -> (Atom, f64) {
    let mut starts: Vec<Atom> = active.to_vec();
    starts.extend((0..ORACLE_RANDOM_STARTS).map(|_| Atom::random(rng)));
    starts
        .into_iter()
        .map(|s| refine_atom(g, s))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("at least one start")
}

/// Convex objective on two-qubit operators with a Hermitian gradient.
trait OperatorObjective {
    fn value(&self, sigma: &ComplexMatrix) -> f64;
    fn gradient(&self, sigma: &ComplexMatrix) -> ComplexMatrix;
}

fn mixture(weights: &[f64], projs: &[ComplexMatrix]) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(4, 4);
    for (w, p) in weights.iter().zip(projs) {
        m += &p.scale_re(*w);
    }
    m
}

struct WeightProblem<'a> {
    obj: &'a dyn OperatorObjective,
    projs: &'a [ComplexMatrix],
}

impl SimplexObjective for WeightProblem<'_> {
    fn value(&self, w: &[f64]) -> f64 {
        self.obj.value(&mixture(w, self.projs))
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let g = self.obj.gradient(&mixture(w, self.projs));
        self.projs.iter().map(|p| p.trace_product(&g).re).collect()
    }
}

struct SearchResult {
    sigma: ComplexMatrix,
    value: f64,
    gap: f64,
}

/// Fully corrective Frank–Wolfe over mixtures of at most `EFD_ATOMS` product atoms.
fn frank_wolfe(obj: &dyn OperatorObjective, init: Vec<(f64, Atom)>, rng: &mut SeededRng) -> SearchResult {
    let (mut weights, mut atoms): (Vec<f64>, Vec<Atom>) = init.into_iter().unzip();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let mut projs: Vec<ComplexMatrix> = atoms.iter().map(Atom::projector).collect();
    let mut best = SearchResult { sigma: mixture(&weights, &projs), value: f64::INFINITY, gap: f64::INFINITY };
    best.value = obj.value(&best.sigma);
    for _ in 0..FW_ITERATIONS {
        let sigma = mixture(&weights, &projs);
        let value = obj.value(&sigma);
        if !value.is_finite() {
            break;
        }
        let g = obj.gradient(&sigma);
        let current = sigma.trace_product(&g).re;
        let (atom, atom_val) = product_oracle(&g, &atoms, rng);
        let gap = current - atom_val;
        if value <= best.value {
            best = SearchResult { sigma: sigma.clone(), value, gap };
        }
        if gap < FW_GAP_TOL {
            break;
        }
        atoms.push(atom);
        projs.push(atoms.last().expect("pushed").projector());
        weights.push(0.0);
        let run = minimize_on_simplex(&WeightProblem { obj, projs: &projs }, &weights, 1e-12, WEIGHT_ITERATIONS);
        weights = run.point;
        // Drop unused atoms, then the lightest ones beyond the cap.
        let mut keep: Vec<usize> = (0..atoms.len()).filter(|&j| weights[j] > 1e-13).collect();
        keep.sort_by(|&x, &y| weights[y].total_cmp(&weights[x]));
        keep.truncate(EFD_ATOMS);
        keep.sort_unstable();
        atoms = keep.iter().map(|&j| atoms[j].clone()).collect();
        projs = keep.iter().map(|&j| projs[j].clone()).collect();
        weights = keep.iter().map(|&j| weights[j]).collect();
        let s: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= s);
    }
    let sigma = mixture(&weights, &projs);
    let value = obj.value(&sigma);
    if value < best.value {
        let g = obj.gradient(&sigma);
        let gap = sigma.trace_product(&g).re - product_oracle(&g, &atoms, rng).1;
        best = SearchResult { sigma, value, gap };
    }
    best
}

/// Pure product atoms whose mixture is Σ r_j ρ^A_j ⊗ ρ^B_j.
fn atoms_of(dec: &BsaDecomposition) -> Vec<(f64, Atom)> {
    let mut out = Vec::new();
    for t in &dec.product_terms {
        let (ea, eb) = (hermitian_eig(t.rho_a.matrix()).expect("state"), hermitian_eig(t.rho_b.matrix()).expect("state"));
        for i in 0..2 {
            for j in 0..2 {
                let w = t.weight * ea.eigenvalues[i] * eb.eigenvalues[j];
                if w > 1e-14 {
                    let (va, vb) = (ea.vector(i), eb.vector(j));
                    out.push((w, Atom { a: [va[0], va[1]], b: [vb[0], vb[1]] }));
                }
            }
        }
    }
    out
}

fn basis_atoms() -> Vec<(f64, Atom)> {
    let e = |k: usize| if k == 0 { [C64::new(1.0, 0.0), ZERO] } else { [ZERO, C64::new(1.0, 0.0)] };
    (0..4).map(|n| (0.25, Atom { a: e(n / 2), b: e(n % 2) })).collect()
}

fn random_atoms(rng: &mut SeededRng) -> Vec<(f64, Atom)> {
    (0..EFD_ATOMS).map(|_| (rng.random::<f64>() + 0.5, Atom::random(rng))).collect()
}

/// σ ↦ D_KL(p(ρ_i)‖p(σ)) over the protocol's tables.
struct TableObjective<'a> {
    protocol: &'a Protocol,
    p_i: Vec<f64>,
    p_f: Vec<f64>,
    /// Φ†[Π^f_k].
    heisenberg: Vec<ComplexMatrix>,
}

impl<'a> TableObjective<'a> {
    fn new(protocol: &'a Protocol, rho: &DensityMatrix) -> Result<Self> {
        let dist = protocol.forward(rho)?;
        let heisenberg = protocol.basis_f.projectors().iter().map(|p| protocol.channel.adjoint_apply(p)).collect();
        Ok(Self { protocol, p_i: dist.p_initial().to_vec(), p_f: dist.p_final().to_vec(), heisenberg })
    }

    fn marginals(&self, sigma: &ComplexMatrix) -> (Vec<f64>, Vec<f64>) {
        (self.protocol.basis_i.probabilities(sigma), self.heisenberg.iter().map(|h| sigma.expectation(h)).collect())
    }
}

impl OperatorObjective for TableObjective<'_> {
    fn value(&self, sigma: &ComplexMatrix) -> f64 {
        let (qi, qf) = self.marginals(sigma);
        kl_divergence(&self.p_i, &qi) + kl_divergence(&self.p_f, &qf)
    }

    fn gradient(&self, sigma: &ComplexMatrix) -> ComplexMatrix {
        let (qi, qf) = self.marginals(sigma);
        let mut g = ComplexMatrix::zeros(4, 4);
        for ((p, q), proj) in self.p_i.iter().zip(&qi).zip(self.protocol.basis_i.projectors()) {
            if *p > 0.0 {
                g -= &proj.scale_re(p / q);
            }
        }
        for ((p, q), h) in self.p_f.iter().zip(&qf).zip(&self.heisenberg) {
            if *p > 0.0 {
                g -= &h.scale_re(p / q);
            }
        }
        g
    }
}

/// σ ↦ D(ρ‖σ).
struct RelentObjective {
    rho: DensityMatrix,
    entropy: f64,
}

impl RelentObjective {
    fn new(rho: &DensityMatrix) -> Self {
        Self { rho: rho.clone(), entropy: von_neumann_entropy(rho) }
    }
}

impl OperatorObjective for RelentObjective {
    fn value(&self, sigma: &ComplexMatrix) -> f64 {
        let Ok(e) = hermitian_eig(&sigma.hermitian_part()) else {
            return f64::INFINITY;
        };
        let mut cross = 0.0;
        for k in 0..e.dim() {
            let v = e.vector(k);
            let w = self.rho.matrix().matvec(&v).iter().zip(&v).map(|(a, b)| (b.conj() * a).re).sum::<f64>();
            let s = e.eigenvalues[k];
            if s > 1e-14 {
                cross -= w * s.ln();
            } else if w > 1e-12 {
                return f64::INFINITY;
            }
        }
        cross - self.entropy
    }

    /// −D log(σ)[ρ] through first divided differences of ln in σ's eigenbasis.
    fn gradient(&self, sigma: &ComplexMatrix) -> ComplexMatrix {
        let e = hermitian_eig(&sigma.hermitian_part()).expect("Hermitian");
        let v = &e.eigenvectors;
        let r = v.adjoint().matmul(self.rho.matrix()).matmul(v);
        let s: Vec<f64> = e.eigenvalues.iter().map(|x| x.max(1e-300)).collect();
        let dd = ComplexMatrix::from_fn(4, 4, |i, j| {
            let l = if (s[i] - s[j]).abs() > 1e-12 * s[i].max(s[j]) { (s[i].ln() - s[j].ln()) / (s[i] - s[j]) } else { 1.0 / s[i] };
            r.get(i, j) * (-l)
        });
        v.matmul(&dd).matmul(&v.adjoint())
    }
}

fn require_two_qubits(protocol: &Protocol) -> Result<()> {
    match &protocol.local {
        Some(l) if l.dims == (2, 2) => Ok(()),
        _ => Err(Error::DecompositionInapplicable("entanglement fluctuation distance needs a two-qubit protocol".into())),
    }
}

fn relent(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    match relative_entropy(rho, sigma) {
        Ok(v) => Ok(v),
        Err(Error::SupportViolation) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

fn table_kl(protocol: &Protocol, rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    Ok(kl_divergence_tables(&protocol.forward(rho)?, &protocol.forward(sigma)?)?.value)
}

/// Bounds from the BSA separable part and from the ρ_* search.
pub fn efd_bounds(protocol: &Protocol, rho_i: &DensityMatrix, bsa: &BsaDecomposition) -> Result<EfdBounds> {
    require_two_qubits(protocol)?;
    let rho = protocol.tag(rho_i)?;
    let bound_bsa = table_kl(protocol, &rho, &bsa.rho_s)?;
    let d_bsa = relent(&rho, &bsa.rho_s)?;
    let obj = RelentObjective::new(&rho);
    let mut rng = random::rng(RHO_STAR_SEED);
    // Start from ρ_S blended with I/4 so that D(ρ‖σ) is finite.
    let mut init: Vec<(f64, Atom)> = atoms_of(bsa).into_iter().map(|(w, a)| (0.9 * w, a)).collect();
    init.extend(basis_atoms().into_iter().map(|(w, a)| (0.1 * w, a)));
    let mut best = frank_wolfe(&obj, init, &mut rng);
    for _ in 0..RANDOM_STARTS {
        let r = frank_wolfe(&obj, random_atoms(&mut rng), &mut rng);
        if r.value < best.value {
            best = r;
        }
    }
    let (rho_star, d_star) = if d_bsa <= best.value {
        (bsa.rho_s.clone(), d_bsa)
    } else {
        (DensityMatrix::from_numeric(&best.sigma)?.with_dims((2, 2))?, best.value)
    };
    let bound_relent_table = table_kl(protocol, &rho, &rho_star)?;
    Ok(EfdBounds {
        bound_bsa,
        bound_bsa_relent: 2.0 * d_bsa,
        bound_relent_table,
        bound_relent_ent: 2.0 * d_star,
        rho_star,
        support_violation: !(bound_bsa.is_finite() && d_bsa.is_finite() && d_star.is_finite()),
    })
}

/// Multi-start search for min over separable σ of D_KL(p(ρ_i)‖p(σ)).
pub fn efd_estimate(protocol: &Protocol, rho_i: &DensityMatrix, seed: u64) -> Result<EfdReport> {
    require_two_qubits(protocol)?;
    let rho = protocol.tag(rho_i)?;
    let bsa = bsa_decompose(&rho)?;
    let bounds = efd_bounds(protocol, &rho, &bsa)?;
    let obj = TableObjective::new(protocol, &rho)?;
    let mut rng = random::rng(seed);
    let mut best = frank_wolfe(&obj, atoms_of(&bsa), &mut rng);
    for _ in 0..RANDOM_STARTS {
        let r = frank_wolfe(&obj, random_atoms(&mut rng), &mut rng);
        if r.value < best.value {
            best = r;
        }
    }
    // ρ_S and ρ_* are separable candidates too.
    let mut candidates = vec![(best.value, best.sigma.clone(), best.gap)];
    candidates.push((bounds.bound_bsa, bsa.rho_s.matrix().clone(), f64::INFINITY));
    candidates.push((bounds.bound_relent_table, bounds.rho_star.matrix().clone(), f64::INFINITY));
    let (value, sigma, gap) = candidates.into_iter().min_by(|x, y| x.0.total_cmp(&y.0)).expect("nonempty");
    let best_separable_found = DensityMatrix::from_numeric(&sigma)?.with_dims((2, 2))?;
    Ok(EfdReport {
        efd_upper_estimate: value.max(0.0),
        boundary_min_eigenvalue: best_separable_found.min_eigenvalue(),
        best_separable_found,
        bound_bsa: bounds.bound_bsa,
        bound_bsa_relent: bounds.bound_bsa_relent,
        bound_relent_table: bounds.bound_relent_table,
        bound_relent_ent: bounds.bound_relent_ent,
        support_violation: bounds.support_violation,
        converged: gap < FW_CONVERGED_GAP,
        final_gap: gap,
    })
}
