mod common;

use epmflux::numkernel::{ops, partial_trace, ComplexMatrix, Keep, C64};
use epmflux::qstate::{thermal_state, DensityMatrix, EnergyBasis};
use epmflux::random;
use epmflux::resources::{
    bsa_decompose, concurrence, correlation_split, correlation_split_with, nine_term_split, triple_decompose, weight_of_athermality,
    weight_of_coherence, weight_of_coherence_with, CoherenceSolver,
};
use epmflux::Error;
use proptest::prelude::*;

fn gibbs(seed: u64, d: usize, beta: f64) -> (DensityMatrix, EnergyBasis) {
    let h = random::hermitian(&mut common::rng(seed), d, 1.0);
    (thermal_state(&h, beta).unwrap().0, EnergyBasis::from_hamiltonian(&h).unwrap())
}

fn is_diagonal_in(m: &ComplexMatrix, basis: &EnergyBasis) -> bool {
    let r = basis.to_reference(m);
    (0..r.rows()).all(|i| (0..r.cols()).all(|j| i == j || r.get(i, j).norm() < 1e-10))
}

proptest! {
    #![proptest_config(common::cases(32))]

    #[test]
    fn athermality_matches_bisection(seed in any::<u64>(), d in 2usize..=4, beta in 0.3f64..2.0) {
        let (gamma, _) = gibbs(seed, d, beta);
        let rho = random::density(&mut common::rng(seed ^ 0xabc), d);
        let dec = weight_of_athermality(&rho, &gamma).unwrap();
        let oracle = common::athermality_bisection(rho.matrix(), gamma.matrix());
        prop_assert!((dec.a - oracle).abs() < 1e-9, "{} vs {oracle}", dec.a);
        prop_assert!(dec.residual(&rho) < 1e-10);
        prop_assert!(dec.tau.min_eigenvalue() > -1e-10);
        prop_assert!(weight_of_athermality(&gamma, &gamma).unwrap().a < 1e-10);
    }

    #[test]
    fn qubit_coherence_matches_oracles(a in 0.01f64..0.99, t in 0.0f64..1.0, phase in 0.0f64..std::f64::consts::TAU) {
        let g = t * (a * (1.0 - a)).sqrt();
        let rho = DensityMatrix::qubit_coherent(a, C64::from_polar(g, phase)).unwrap();
        let basis = EnergyBasis::diagonal(&[0.0, 1.0]).unwrap();
        let closed = weight_of_coherence(&rho, &basis).unwrap();
        let barrier = weight_of_coherence_with(&rho, &basis, CoherenceSolver::Barrier).unwrap();
        let analytic = common::qubit_coherence_analytic(a, g);
        prop_assert!((closed.c - analytic).abs() < 1e-12, "{} vs {analytic}", closed.c);
        prop_assert!((closed.c - common::qubit_coherence_oracle(a, g)).abs() < 1e-7);
        prop_assert!((barrier.c - analytic).abs() < 1e-7, "{} vs {analytic}", barrier.c);
        prop_assert!(closed.residual(&rho) < 1e-12);
        prop_assert!(is_diagonal_in(closed.sigma.matrix(), &basis));
    }

    #[test]
    fn qutrit_coherence_matches_pattern_search(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let rho = random::density(&mut rng, 3);
        let basis = EnergyBasis::diagonal(&[0.0, 1.0, 2.5]).unwrap();
        let dec = weight_of_coherence(&rho, &basis).unwrap();
        let oracle = common::coherence_pattern_search(rho.matrix());
        prop_assert!((dec.c - oracle).abs() < 1e-6, "{} vs {oracle}", dec.c);
        prop_assert!(dec.residual(&rho) < 1e-9);
        prop_assert!(dec.tau.min_eigenvalue() > -1e-9);
        prop_assert!(is_diagonal_in(dec.sigma.matrix(), &basis));
    }

    #[test]
    fn triple_decomposition_is_a_mixture(seed in any::<u64>(), d in 2usize..=3) {
        let (gamma, basis) = gibbs(seed, d, 1.0);
        let rho = random::density(&mut common::rng(seed ^ 7), d);
        let t = triple_decompose(&rho, &gamma, &basis).unwrap();
        let w = t.weights();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert!(t.residual(&rho) < 1e-9);
        prop_assert!((t.a - weight_of_athermality(&rho, &gamma).unwrap().a).abs() < 1e-12);
        prop_assert!(is_diagonal_in(t.tau_d.matrix(), &basis));
        prop_assert!(t.tau_c.min_eigenvalue() > -1e-9);
    }

    #[test]
    fn nine_term_split_reconstructs_products(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let (ga, ba) = gibbs(seed, 2, 1.0);
        let (gb, bb) = gibbs(seed ^ 1, 2, 0.5);
        let (ra, rb) = (random::density(&mut rng, 2), random::density(&mut rng, 2));
        let split = nine_term_split(&ra, &rb, &ga, &gb, &ba, &bb).unwrap();
        prop_assert!(split.reconstruct().distance(&ra.matrix().kron(rb.matrix())) < 1e-9);
    }

    #[test]
    fn correlation_operator_has_vanishing_marginals(seed in any::<u64>(), eps in -0.2f64..0.2) {
        let mut rng = common::rng(seed);
        let beta = 1.0;
        let (ha, hb) = (random::hermitian(&mut rng, 2, 0.5), random::hermitian(&mut rng, 2, 0.5));
        let (ga, _) = thermal_state(&ha, beta).unwrap();
        let (gb, _) = thermal_state(&hb, beta).unwrap();
        let mut m = ga.matrix().kron(gb.matrix());
        m += &ops::sigma_x().kron(&ops::sigma_y()).scale_re(eps * 0.1);
        let rho = DensityMatrix::bipartite(m, (2, 2)).unwrap();
        let split = correlation_split(&rho, beta, &ha, &hb).unwrap();
        prop_assert!(split.marginal_defect() < 1e-14);
        let e = &split.correlation_operator;
        prop_assert!(partial_trace(e, (2, 2), Keep::A).unwrap().max_abs() < 1e-14);
        prop_assert!((e.trace()).norm() < 1e-14);
    }

    #[test]
    fn bsa_of_hilbert_schmidt_states(seed in any::<u64>()) {
        let rho = random::density(&mut common::rng(seed), 4).with_dims((2, 2)).unwrap();
        let d = bsa_decompose(&rho).unwrap();
        let c = common::wootters_concurrence(rho.matrix());
        prop_assert!(c <= d.lambda + 1e-6, "C {c} > lambda {}", d.lambda);
        prop_assert!(d.residual(&rho) < 1e-12);
        prop_assert!(d.separable_residual() < 1e-12);
        prop_assert!(common::is_ppt(d.rho_s.matrix(), 1e-9));
        prop_assert!(d.gap < 1e-8);
    }

    #[test]
    fn concurrence_never_exceeds_bsa_weight(seed in any::<u64>()) {
        let rho = common::entangled_state(&mut common::rng(seed), 0.05);
        let d = bsa_decompose(&rho).unwrap();
        let c = concurrence(&rho).unwrap();
        prop_assert!(c <= d.lambda + 1e-6, "C {c} > lambda {}", d.lambda);
        prop_assert!(d.rho_e.min_eigenvalue() > -1e-7);
        prop_assert!(common::is_ppt(d.rho_s.matrix(), 1e-9));
    }

    #[test]
    fn concurrence_matches_wootters_oracle(seed in any::<u64>()) {
        let rho = random::density(&mut common::rng(seed), 4);
        prop_assert!((concurrence(&rho).unwrap() - common::wootters_concurrence(rho.matrix())).abs() < 1e-9);
    }

    #[test]
    fn separable_states_have_no_entangled_part(seed in any::<u64>()) {
        let rho = common::product_state(&mut common::rng(seed));
        let d = bsa_decompose(&rho).unwrap();
        prop_assert!(d.lambda <= 1e-4);
        prop_assert!(d.separable_residual() < 1e-8);
    }
}

#[test]
fn werner_family_bsa() {
    for p in [0.4, 0.6, 0.8, 1.0] {
        let rho = common::werner(p);
        let d = bsa_decompose(&rho).unwrap();
        assert!((d.lambda - common::werner_concurrence(p)).abs() < 1e-6, "p={p}: {}", d.lambda);
    }
    assert!(bsa_decompose(&common::werner(0.3)).unwrap().lambda <= 1e-4);
}

#[test]
fn pure_entangled_states_have_no_separable_part() {
    // Any S with 0 ⪯ S ⪯ |ψ⟩⟨ψ| is proportional to |ψ⟩⟨ψ|, so λ = 1 while C = sin 2θ.
    let theta: f64 = 0.3;
    let psi = [C64::new(theta.cos(), 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(theta.sin(), 0.0)];
    let rho = DensityMatrix::pure(&psi).unwrap().with_dims((2, 2)).unwrap();
    let d = bsa_decompose(&rho).unwrap();
    assert!((d.lambda - 1.0).abs() < 1e-9);
    assert!((concurrence(&rho).unwrap() - (2.0 * theta).sin()).abs() < 1e-9);
}

#[test]
fn interior_qubit_coherence_is_twice_the_coherence() {
    let basis = EnergyBasis::diagonal(&[0.0, 1.0]).unwrap();
    for k in 0..=10 {
        let g = 0.01 * k as f64;
        let c = weight_of_coherence(&common::qubit_coherent(0.9, g), &basis).unwrap().c;
        assert!((c - 2.0 * g).abs() < 1e-12);
    }
}

#[test]
fn incoherent_states_have_zero_coherence_weight() {
    let basis = EnergyBasis::diagonal(&[0.0, 1.0, 3.0]).unwrap();
    let rho = DensityMatrix::new(ComplexMatrix::from_diag(&[0.2, 0.3, 0.5])).unwrap();
    assert_eq!(weight_of_coherence(&rho, &basis).unwrap().c, 0.0);
}

#[test]
fn singular_reference_is_rejected() {
    let rho = DensityMatrix::maximally_mixed(2);
    let pure = DensityMatrix::basis_state(2, 0);
    assert!(matches!(weight_of_athermality(&rho, &pure), Err(Error::SingularReference(_))));
}

#[test]
fn non_thermal_marginals_are_rejected() {
    let rho = common::product_state(&mut common::rng(5));
    let g = DensityMatrix::maximally_mixed(2);
    assert!(matches!(correlation_split_with(&rho, &g, &g), Err(Error::MarginalsNotThermal(_))));
}

#[test]
fn bsa_needs_two_qubits() {
    assert!(bsa_decompose(&DensityMatrix::maximally_mixed(3)).is_err());
}
