mod common;

use epmflux::dynamics::registry::{build_dynamics, named_operator, JumpSpec, OperatorSpec, ScheduleSpec, Site};
use epmflux::dynamics::{channel_from_propagator, kraus_from_choi, propagate, JumpOperator, LindbladSpec, QuantumChannel};
use epmflux::numkernel::{ops, unitary_propagator, ComplexMatrix, C64};
use epmflux::qstate::{DensityMatrix, HamiltonianSchedule};
use epmflux::random;
use epmflux::Error;
use proptest::prelude::*;

fn conjugate(u: &ComplexMatrix, x: &ComplexMatrix) -> ComplexMatrix {
    u.matmul(x).matmul(&u.adjoint())
}

fn static_spec(h: ComplexMatrix, t: f64, jumps: Vec<JumpOperator>) -> LindbladSpec {
    LindbladSpec::new(HamiltonianSchedule::constant(h, 0.0, t).unwrap(), jumps).unwrap()
}

fn random_channel(seed: u64, d: usize, n_kraus: usize) -> QuantumChannel {
    // Stinespring: columns of a random isometry give Kraus operators.
    let mut rng = random::rng(seed);
    let v = random::unitary(&mut rng, d * n_kraus);
    let kraus = (0..n_kraus).map(|a| ComplexMatrix::from_fn(d, d, |i, j| v.get(a * d + i, j))).collect();
    QuantumChannel::from_kraus(kraus).unwrap()
}

proptest! {
    #![proptest_config(common::cases(16))]

    #[test]
    fn lindblad_channels_are_cptp(seed in any::<u64>(), beta in 0.5f64..2.0) {
        let p = common::qubit_lindblad(&mut common::rng(seed), beta);
        prop_assert!(p.channel.trace_defect() < 1e-9);
        prop_assert!(common::min_eigenvalue(&p.channel.choi()) > -1e-9);
    }

    #[test]
    fn closed_evolution_matches_exact_propagator(seed in any::<u64>(), t in 0.2f64..2.0) {
        let mut rng = common::rng(seed);
        let h = random::hermitian(&mut rng, 3, 1.0);
        let spec = LindbladSpec::unitary(HamiltonianSchedule::constant(h.clone(), 0.0, t).unwrap());
        let ch = channel_from_propagator(&spec, spec.default_steps()).unwrap();
        let u = unitary_propagator(&h, t).unwrap();
        let rho = random::density(&mut rng, 3);
        prop_assert!(ch.apply_operator(rho.matrix()).distance(&conjugate(&u, rho.matrix())) < 1e-10);
    }

    #[test]
    fn channel_agrees_with_state_propagation(seed in any::<u64>()) {
        let rho = random::density(&mut common::rng(seed), 4);
        let schedule = ScheduleSpec::BipartiteSwitched {
            h_a: OperatorSpec::named("sigma_z"),
            h_b: OperatorSpec::named("sigma_z"),
            interaction: OperatorSpec::named("exchange"),
            coupling: 0.7,
            t_i: 0.0,
            t_f: 1.5,
        };
        let spec = build_dynamics(&schedule, &[JumpSpec { operator: OperatorSpec::named("sigma_minus"), kappa: 0.1, site: Some(Site::B) }]).unwrap();
        let steps = spec.default_steps();
        let ch = channel_from_propagator(&spec, steps).unwrap();
        let direct = propagate(&spec, &rho, steps).unwrap();
        prop_assert!(ch.apply(&rho).unwrap().distance(&direct) < 1e-12);
    }

    #[test]
    fn kraus_round_trip(seed in any::<u64>(), d in 2usize..=3, n in 1usize..=3) {
        let ch = random_channel(seed, d, n);
        let rebuilt = QuantumChannel::from_kraus(kraus_from_choi(&ch).unwrap()).unwrap();
        prop_assert!(rebuilt.superoperator().distance(ch.superoperator()) < 1e-10);
        prop_assert!(ch.trace_defect() < 1e-12);
    }

    #[test]
    fn adjoint_is_hilbert_schmidt_dual(seed in any::<u64>()) {
        let ch = random_channel(seed, 3, 2);
        let mut rng = common::rng(seed ^ 1);
        let (x, y) = (random::ginibre(&mut rng, 3, 3), random::ginibre(&mut rng, 3, 3));
        let lhs = y.adjoint().trace_product(&ch.apply_operator(&x));
        let rhs = ch.adjoint_apply(&y).adjoint().trace_product(&x);
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn dual_channel_properties(seed in any::<u64>()) {
        let p = common::qubit_lindblad(&mut common::rng(seed), 1.0);
        let pi = &p.reference;
        // Stationarity of the reference under both maps.
        prop_assert!(p.channel.apply(pi).unwrap().distance(pi) < 1e-9);
        prop_assert!(p.dual.apply(pi).unwrap().distance(pi) < 1e-9);
        prop_assert!(p.dual.trace_defect() < 1e-9);
        prop_assert!(common::min_eigenvalue(&p.dual.choi()) > -1e-9);
        // Reversing twice with the same reference recovers Φ.
        let back = p.dual.dual_channel(pi).unwrap();
        prop_assert!(back.superoperator().distance(p.channel.superoperator()) < 1e-8);
    }
}

#[test]
fn dephasing_decays_coherences_at_twice_the_rate() {
    let (kappa, t) = (0.3, 1.7);
    let spec = static_spec(ops::sigma_z().scale_re(0.5), t, vec![JumpOperator { op: ops::sigma_z(), kappa }]);
    let ch = channel_from_propagator(&spec, spec.default_steps()).unwrap();
    let rho = common::qubit_coherent(0.6, 0.4);
    let out = ch.apply(&rho).unwrap();
    let expect = C64::new(0.4, 0.0) * C64::from_polar((-2.0 * kappa * t).exp(), -t);
    assert!((out.matrix().get(0, 1) - expect).norm() < 1e-11);
    assert!((out.matrix().get(0, 0).re - 0.6).abs() < 1e-12);
}

#[test]
fn emission_empties_the_excited_level() {
    let (kappa, t) = (0.5, 2.0);
    let spec = static_spec(ComplexMatrix::zeros(2, 2), t, vec![JumpOperator { op: ops::sigma_minus(), kappa }]);
    let ch = channel_from_propagator(&spec, spec.default_steps()).unwrap();
    let out = ch.apply(&DensityMatrix::basis_state(2, 1)).unwrap();
    assert!((out.matrix().get(1, 1).re - (-kappa * t).exp()).abs() < 1e-11);
    let exact = QuantumChannel::amplitude_damping(1.0 - (-kappa * t).exp()).unwrap();
    assert!(ch.superoperator().distance(exact.superoperator()) < 1e-10);
}

#[test]
fn detailed_balance_fixed_point() {
    let (down, up) = (0.4, 0.1);
    let spec = static_spec(
        ops::sigma_z().scale_re(0.5),
        8.0,
        vec![JumpOperator { op: ops::sigma_minus(), kappa: down }, JumpOperator { op: ops::sigma_plus(), kappa: up }],
    );
    let ch = channel_from_propagator(&spec, spec.default_steps()).unwrap();
    let fp = ch.fixed_point().unwrap();
    assert!(fp.full_rank);
    let m = fp.state.matrix();
    assert!((m.get(1, 1).re / m.get(0, 0).re - up / down).abs() < 1e-9);
    assert!(m.get(0, 1).norm() < 1e-10);
}

#[test]
fn singular_and_degenerate_fixed_points_are_reported() {
    let damping = QuantumChannel::amplitude_damping(0.3).unwrap();
    let fp = damping.fixed_point().unwrap();
    assert!(!fp.full_rank);
    assert!(matches!(fp.require_full_rank(), Err(Error::SingularFixedPoint(_))));
    assert!(matches!(QuantumChannel::identity(2).fixed_point(), Err(Error::NoUniqueFixedPoint(_))));
    let dep = QuantumChannel::depolarizing(3, 0.2).unwrap().fixed_point().unwrap();
    assert!(dep.state.distance(&DensityMatrix::maximally_mixed(3)) < 1e-12);
}

#[test]
fn invalid_superoperators_are_rejected() {
    let mut not_tp = ComplexMatrix::identity(4);
    not_tp.set(0, 0, C64::new(1.5, 0.0));
    assert!(QuantumChannel::from_superoperator(2, not_tp).is_err());
    // Transposition is positive and trace preserving but not completely positive.
    let mut transpose = ComplexMatrix::zeros(4, 4);
    for i in 0..2 {
        for j in 0..2 {
            transpose.set(i * 2 + j, j * 2 + i, C64::new(1.0, 0.0));
        }
    }
    assert!(matches!(QuantumChannel::from_superoperator(2, transpose), Err(Error::CompletePositivityViolation(_))));
    assert!(QuantumChannel::dephasing(1.2).is_err());
}

#[test]
fn rk4_converges_under_step_refinement() {
    let schedule = ScheduleSpec::RotatingXz { rabi: 1.0, omega: 1.0, t_i: 0.0, t_f: 3.0 };
    let spec = build_dynamics(&schedule, &[JumpSpec { operator: OperatorSpec::named("sigma_x"), kappa: 0.1, site: None }]).unwrap();
    let coarse = channel_from_propagator(&spec, 3000).unwrap();
    let fine = channel_from_propagator(&spec, 6000).unwrap();
    assert!(coarse.superoperator().distance(fine.superoperator()) < 1e-11);
}

#[test]
fn named_operators() {
    let exchange = named_operator("exchange").unwrap();
    let xy = &named_operator("xx").unwrap() + &named_operator("yy").unwrap();
    assert!(exchange.distance(&xy) < 1e-15);
    let swap = named_operator("swap").unwrap();
    assert!(swap.matmul(&swap).distance(&ComplexMatrix::identity(4)) < 1e-15);
    assert!(matches!(named_operator("sigma_w"), Err(Error::Config(_))));
    let scaled = OperatorSpec::scaled(0.5, "sigma_z").build().unwrap();
    assert!(scaled.distance(&ops::sigma_z().scale_re(0.5)) < 1e-15);
}

#[test]
fn jump_sites_lift_local_operators() {
    let schedule = ScheduleSpec::BipartiteSwitched {
        h_a: OperatorSpec::named("sigma_z"),
        h_b: OperatorSpec::named("sigma_z"),
        interaction: OperatorSpec::named("xx"),
        coupling: 1.0,
        t_i: 0.0,
        t_f: 1.0,
    };
    let built = schedule.build().unwrap();
    let jump = JumpSpec { operator: OperatorSpec::named("sigma_minus"), kappa: 0.1, site: Some(Site::B) }.build(&built).unwrap();
    assert!(jump.op.distance(&ComplexMatrix::identity(2).kron(&ops::sigma_minus())) < 1e-15);
    let single = ScheduleSpec::RotatingXz { rabi: 1.0, omega: 1.0, t_i: 0.0, t_f: 1.0 };
    let err = build_dynamics(&single, &[JumpSpec { operator: OperatorSpec::named("sigma_x"), kappa: 0.1, site: Some(Site::A) }]);
    assert!(matches!(err, Err(Error::Config(_))));
}

#[test]
fn schedule_json_round_trip() {
    let text = r#"{"name": "bipartite_switched", "h_a": "sigma_z", "h_b": {"scale": 0.5, "op": "sigma_z"}, "interaction": "exchange", "t_f": 2}"#;
    let spec: ScheduleSpec = serde_json::from_str(text).unwrap();
    assert!(spec.is_bipartite());
    let back: ScheduleSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
    assert_eq!(spec, back);
    assert!(serde_json::from_str::<ScheduleSpec>(r#"{"name": "rotating_xz", "t_f": 1, "omga": 2}"#).is_err());
}

#[test]
fn switched_coupling_vanishes_at_the_endpoints() {
    let schedule = ScheduleSpec::BipartiteSwitched {
        h_a: OperatorSpec::named("sigma_z"),
        h_b: OperatorSpec::named("sigma_x"),
        interaction: OperatorSpec::named("xx"),
        coupling: 2.0,
        t_i: 0.5,
        t_f: 2.5,
    };
    let s = schedule.build().unwrap();
    let local = ops::sigma_z().kron(&ComplexMatrix::identity(2));
    let expect = &local + &ComplexMatrix::identity(2).kron(&ops::sigma_x());
    assert!(s.at(0.5).distance(&expect) < 1e-12);
    assert!(s.at(2.5).distance(&expect) < 1e-12);
    assert!(s.at(1.5).distance(&expect) > 1.0);
}
