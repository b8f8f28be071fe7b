mod common;

use epmflux::dynamics::QuantumChannel;
use epmflux::epm::Protocol;
use epmflux::measures::{
    bound_chain_slack, cfd, cfd_for, cfd_sweep, efd_estimate, gamma_grid, kkt_defect, kl_divergence, kl_divergence_tables,
    minimize_on_simplex, monotonicity_violation, phase_covariance_check, project_to_simplex, write_cfd_sweep_csv, SimplexObjective,
};
use epmflux::numkernel::{ops, ComplexMatrix, C64};
use epmflux::qstate::{DensityMatrix, EnergyBasis};
use epmflux::random;
use epmflux::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

/// Eigenprojectors of a nondegenerate Hamiltonian, ascending in energy.
fn spectral(h: &ComplexMatrix) -> Vec<DMatrix<C64>> {
    let eig = common::to_nalgebra(h).symmetric_eigen();
    let mut order: Vec<usize> = (0..h.rows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order
        .iter()
        .map(|&k| {
            let v = eig.eigenvectors.column(k);
            v * v.adjoint()
        })
        .collect()
}

fn from_nalgebra(m: &DMatrix<C64>) -> ComplexMatrix {
    ComplexMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn plain_kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum()
}

/// D_KL between EPM tables of ρ and of the incoherent state Σ q_n P_n,
/// rebuilt from projectors.
struct OracleCfd {
    p_i: Vec<DMatrix<C64>>,
    p_f: Vec<DMatrix<C64>>,
    channel: QuantumChannel,
    table: Vec<f64>,
}

impl OracleCfd {
    fn new(rho: &DensityMatrix, channel: &QuantumChannel, h_i: &ComplexMatrix, h_f: &ComplexMatrix) -> Self {
        let mut o = Self { p_i: spectral(h_i), p_f: spectral(h_f), channel: channel.clone(), table: vec![] };
        o.table = o.table_of(&common::to_nalgebra(rho.matrix()));
        o
    }

    fn table_of(&self, r: &DMatrix<C64>) -> Vec<f64> {
        let out = common::to_nalgebra(&self.channel.apply_operator(&from_nalgebra(r)));
        let mut t = Vec::new();
        for pl in &self.p_i {
            for pk in &self.p_f {
                t.push((pl * r).trace().re * (pk * &out).trace().re);
            }
        }
        t
    }

    fn incoherent(&self, q: &[f64]) -> DMatrix<C64> {
        self.p_i.iter().zip(q).fold(DMatrix::zeros(q.len(), q.len()), |acc, (p, &w)| acc + p * C64::new(w, 0.0))
    }

    fn objective(&self, q: &[f64]) -> f64 {
        plain_kl(&self.table, &self.table_of(&self.incoherent(q)))
    }
}

impl SimplexObjective for OracleCfd {
    fn value(&self, q: &[f64]) -> f64 {
        self.objective(q)
    }

    fn gradient(&self, q: &[f64]) -> Vec<f64> {
        // Central differences along each coordinate.
        let h = 1e-7;
        (0..q.len())
            .map(|n| {
                let (mut up, mut dn) = (q.to_vec(), q.to_vec());
                up[n] += h;
                dn[n] -= h;
                (self.objective(&up) - self.objective(&dn)) / (2.0 * h)
            })
            .collect()
    }
}

/// Golden-section refinement of a dense scan over x ∈ [0, 1].
fn qubit_oracle_minimum(o: &OracleCfd) -> f64 {
    let f = |x: f64| o.objective(&[x, 1.0 - x]);
    let n = 2000;
    let k = (1..n).min_by(|&a, &b| f(a as f64 / n as f64).total_cmp(&f(b as f64 / n as f64))).unwrap();
    let (mut lo, mut hi) = ((k - 1) as f64 / n as f64, (k + 1) as f64 / n as f64);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let (a, b) = (hi - r * (hi - lo), lo + r * (hi - lo));
        if f(a) < f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    f(0.5 * (lo + hi))
}

/// Σ_j c_j ln(c_j / (A q)_j) for a column-stochastic A: a convex test function
/// on the simplex unrelated to the CFD.
struct MixtureKl {
    a: Vec<Vec<f64>>,
    c: Vec<f64>,
}

impl SimplexObjective for MixtureKl {
    fn value(&self, q: &[f64]) -> f64 {
        let aq: Vec<f64> = self.a.iter().map(|r| r.iter().zip(q).map(|(x, y)| x * y).sum()).collect();
        plain_kl(&self.c, &aq)
    }

    fn gradient(&self, q: &[f64]) -> Vec<f64> {
        let aq: Vec<f64> = self.a.iter().map(|r| r.iter().zip(q).map(|(x, y)| x * y).sum()).collect();
        (0..q.len()).map(|n| -self.a.iter().zip(&self.c).zip(&aq).map(|((r, c), s)| c * r[n] / s).sum::<f64>()).collect()
    }
}

fn random_simplex_point(rng: &mut random::SeededRng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| -rng.random_range(1e-9f64..1.0).ln()).collect();
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

fn qutrit_protocol(rng: &mut random::SeededRng) -> (ComplexMatrix, ComplexMatrix, QuantumChannel) {
    let (h_i, h_f) = (random::hermitian(rng, 3, 1.0), random::hermitian(rng, 3, 1.0));
    let u = random::unitary(rng, 3);
    let ch = QuantumChannel::depolarizing(3, rng.random_range(0.05..0.4)).unwrap().then(&QuantumChannel::unitary(&u).unwrap()).unwrap();
    (h_i, h_f, ch)
}

fn sigma_z_basis() -> EnergyBasis {
    EnergyBasis::from_hamiltonian(&ops::sigma_z().scale_re(0.5)).unwrap()
}

proptest! {
    #![proptest_config(common::cases(32))]

    #[test]
    fn kl_is_nonnegative_and_vanishes_on_equal_inputs(seed in any::<u64>(), d in 2usize..6) {
        let mut rng = common::rng(seed);
        let (p, q) = (random_simplex_point(&mut rng, d), random_simplex_point(&mut rng, d));
        prop_assert!(kl_divergence(&p, &q) >= -1e-15);
        prop_assert!((kl_divergence(&p, &q) - plain_kl(&p, &q)).abs() < 1e-14);
        prop_assert_eq!(kl_divergence(&p, &p), 0.0);
    }

    #[test]
    fn table_kl_factorizes(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let p = common::qubit_lindblad(&mut rng, 1.0);
        let (a, b) = (random::density(&mut rng, 2), random::full_rank_density(&mut rng, 2, 1e-2));
        let kl = kl_divergence_tables(&p.forward(&a).unwrap(), &p.forward(&b).unwrap()).unwrap();
        prop_assert!(!kl.infinite);
        prop_assert!(kl.factorization_gap() < 1e-12);
        prop_assert!(kl.value >= -1e-15);
    }

    #[test]
    fn qubit_cfd_matches_oracle(seed in any::<u64>(), lindblad in any::<bool>()) {
        let mut rng = common::rng(seed);
        let p = if lindblad { common::qubit_lindblad(&mut rng, 1.0) } else { common::qubit_unitary(&mut rng, 1.0) };
        let rho = random::density(&mut rng, 2);
        let r = cfd_for(&p, &rho).unwrap();
        let oracle = qubit_oracle_minimum(&OracleCfd::new(&rho, &p.channel, &p.h_i, &p.h_f));
        prop_assert!((r.cfd - oracle).abs() < 1e-9, "{} vs {oracle}", r.cfd);
        prop_assert!(r.converged);
        prop_assert!(r.cfd >= 0.0);
        prop_assert!(r.cfd <= r.bound_dephased + 1e-12);
        prop_assert!(r.bound_dephased <= r.bound_cre + 1e-10);
        prop_assert!(r.argmin_state.min_eigenvalue() >= -1e-12);
    }

    #[test]
    fn simplex_projection_is_idempotent(v in proptest::collection::vec(-2.0f64..2.0, 1..6)) {
        let p = project_to_simplex(&v);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        let pp = project_to_simplex(&p);
        prop_assert!(p.iter().zip(&pp).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn simplex_minimizer_is_start_independent(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let d = 3;
        let a: Vec<Vec<f64>> = {
            let cols: Vec<Vec<f64>> = (0..d).map(|_| random_simplex_point(&mut rng, 4)).collect();
            (0..4).map(|j| (0..d).map(|n| cols[n][j]).collect()).collect()
        };
        let obj = MixtureKl { a, c: random_simplex_point(&mut rng, 4) };
        let runs: Vec<_> = (0..5).map(|_| minimize_on_simplex(&obj, &random_simplex_point(&mut rng, d), 1e-10, 50_000)).collect();
        for r in &runs {
            prop_assert!((r.value - runs[0].value).abs() < 1e-8, "{} vs {}", r.value, runs[0].value);
            prop_assert!(kkt_defect(&r.point, &obj.gradient(&r.point)) < 1e-6);
        }
    }
}

#[test]
fn qutrit_cfd_matches_random_start_oracle() {
    for seed in 0..4 {
        let mut rng = common::rng(100 + seed);
        let (h_i, h_f, ch) = qutrit_protocol(&mut rng);
        let (bi, bf) = (EnergyBasis::from_hamiltonian(&h_i).unwrap(), EnergyBasis::from_hamiltonian(&h_f).unwrap());
        let rho = random::full_rank_density(&mut rng, 3, 1e-2);
        let r = cfd(&rho, &ch, &bi, &bf).unwrap();
        let oracle = OracleCfd::new(&rho, &ch, &h_i, &h_f);
        let values: Vec<f64> =
            (0..5).map(|_| minimize_on_simplex(&oracle, &random_simplex_point(&mut rng, 3), 1e-9, 50_000).value).collect();
        for v in &values {
            assert!((v - values[0]).abs() < 1e-8, "{values:?}");
        }
        let best = values.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((r.cfd - best).abs() < 1e-8, "seed {seed}: {} vs {best}", r.cfd);
        assert!(r.cfd <= r.bound_dephased + 1e-12 && r.bound_dephased <= r.bound_cre + 1e-10);
    }
}

#[test]
fn phase_covariant_channels_have_no_cfd() {
    let basis = sigma_z_basis();
    let rot = QuantumChannel::unitary(&epmflux::numkernel::unitary_propagator(&ops::sigma_z().scale_re(0.5), 0.7).unwrap()).unwrap();
    let deph = QuantumChannel::dephasing(0.3).unwrap().then(&rot).unwrap();
    let damp = QuantumChannel::amplitude_damping(0.4).unwrap().then(&rot).unwrap();
    let both = QuantumChannel::dephasing(0.3).unwrap().then(&QuantumChannel::amplitude_damping(0.4).unwrap()).unwrap().then(&rot).unwrap();
    for ch in [deph, damp, both] {
        assert!(phase_covariance_check(&ch, &basis).unwrap().covariant);
        for g in [0.1, 0.2, 0.3] {
            let r = cfd(&common::qubit_coherent(0.9, g), &ch, &basis, &basis).unwrap();
            assert!(r.bound_dephased <= 1e-10, "γ={g}: {}", r.bound_dephased);
            assert!(r.cfd <= 1e-10);
        }
    }
}

#[test]
fn rotated_channels_are_not_covariant() {
    let u = epmflux::numkernel::unitary_propagator(&ops::sigma_y(), 0.4).unwrap();
    let ch = QuantumChannel::unitary(&u).unwrap();
    let check = phase_covariance_check(&ch, &sigma_z_basis()).unwrap();
    assert!(!check.covariant && check.deviation > 1e-3);
    let r = cfd(&common::qubit_coherent(0.9, 0.2), &ch, &sigma_z_basis(), &sigma_z_basis()).unwrap();
    assert!(r.bound_dephased > 1e-6);
}

#[test]
fn figure_sweeps_are_ordered_and_monotone() {
    for kappa in [0.0, 0.1] {
        let p = common::figure_protocol(kappa);
        let points = cfd_sweep(&p, 0.9, &gamma_grid(30, 0.01)).unwrap();
        assert_eq!(points.len(), 31);
        assert!(bound_chain_slack(&points) >= -1e-9, "κ={kappa}");
        assert!(monotonicity_violation(&points) <= 1e-10, "κ={kappa}");
        let first = &points[0];
        assert!(first.cfd.abs() <= 1e-10 && first.bound_dephased.abs() <= 1e-10 && first.bound_cre.abs() <= 1e-10);
        assert!(points.iter().all(|p| p.converged));
        let mut buf = Vec::new();
        write_cfd_sweep_csv(&points, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 32);
    }
}

#[test]
fn mismatched_tables_are_rejected() {
    let mut rng = common::rng(1);
    let (a, b) = (common::qubit_unitary(&mut rng, 1.0), common::qubit_unitary(&mut rng, 1.0));
    let rho = random::density(&mut rng, 2);
    assert!(matches!(kl_divergence_tables(&a.forward(&rho).unwrap(), &b.forward(&rho).unwrap()), Err(Error::LabelMismatch)));
}

#[test]
fn missing_support_gives_infinite_kl() {
    assert_eq!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]), f64::INFINITY);
    assert_eq!(kl_divergence(&[1.0, 0.0], &[0.5, 0.5]), 2f64.ln());
}

fn efd_protocol(seed: u64) -> Protocol {
    common::bipartite_switched(&mut common::rng(seed), 1.0, seed.is_multiple_of(2))
}

#[test]
fn efd_respects_its_bound_hierarchy() {
    for seed in 0..6u64 {
        let p = efd_protocol(seed);
        let rho = common::entangled_state(&mut common::rng(500 + seed), 0.1);
        let r = efd_estimate(&p, &rho, seed).unwrap();
        // ρ_S may be rank-deficient, in which case the relative-entropy bounds are +∞.
        assert!(r.efd_upper_estimate >= 0.0);
        assert!(r.efd_upper_estimate <= r.bound_bsa + 1e-9, "seed {seed}");
        assert!(r.bound_bsa <= r.bound_bsa_relent + 1e-9, "seed {seed}");
        assert!(r.efd_upper_estimate <= r.bound_relent_table + 1e-9);
        assert!(r.bound_relent_ent <= r.bound_bsa_relent + 1e-9);
        assert!(common::is_ppt(r.best_separable_found.matrix(), 1e-9));
    }
}

#[test]
fn product_states_have_no_efd() {
    for seed in 0..4u64 {
        let p = efd_protocol(seed);
        let rho = common::product_state(&mut common::rng(900 + seed));
        let r = efd_estimate(&p, &rho, seed).unwrap();
        assert!(r.efd_upper_estimate <= 1e-8, "{}", r.efd_upper_estimate);
        assert!(r.bound_bsa <= 1e-8);
    }
}

#[test]
fn efd_needs_a_bipartite_protocol() {
    let p = common::qubit_unitary(&mut common::rng(3), 1.0);
    assert!(efd_estimate(&p, &random::density(&mut common::rng(4), 2), 0).is_err());
}
