//! Independent oracles and scenario builders shared by the integration tests.
#![allow(dead_code)]

use epmflux::dynamics::registry::{build_dynamics, JumpSpec, OperatorSpec, ScheduleSpec, Site};
use epmflux::dynamics::{steps_for, QuantumChannel};
use epmflux::epm::Protocol;
use epmflux::numkernel::{ComplexMatrix, C64};
use epmflux::qstate::DensityMatrix;
use epmflux::random::{self, SeededRng};
use nalgebra::DMatrix;
use rand::Rng;

pub const BETAS: [f64; 3] = [0.5, 1.0, 2.0];

pub fn to_nalgebra(m: &ComplexMatrix) -> DMatrix<C64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j))
}

/// Ascending eigenvalues of a Hermitian matrix from nalgebra's solver.
pub fn eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    let h = to_nalgebra(m);
    let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
    let mut v: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn min_eigenvalue(m: &ComplexMatrix) -> f64 {
    eigenvalues(m)[0]
}

fn combine(a: &ComplexMatrix, wa: f64, b: &ComplexMatrix, wb: f64) -> ComplexMatrix {
    ComplexMatrix::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j) * wa + b.get(i, j) * wb)
}

/// Smallest a with ρ − (1 − a)γ ⪰ 0, by bisection on PSD feasibility.
pub fn athermality_bisection(rho: &ComplexMatrix, gamma: &ComplexMatrix) -> f64 {
    let feasible = |a: f64| min_eigenvalue(&combine(rho, 1.0, gamma, -(1.0 - a))) >= 0.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    if feasible(0.0) {
        return 0.0;
    }
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Weight of coherence of [[a, g], [g*, 1 − a]] by bisection on c, with the
/// inner maximization over σ = diag(s, 1 − s) of the 2×2 determinant solved
/// on a fine grid refined by golden sections.
pub fn qubit_coherence_oracle(a: f64, g: f64) -> f64 {
    let g2 = g * g;
    if g2 == 0.0 {
        return 0.0;
    }
    let feasible = |c: f64| {
        let w = 1.0 - c;
        let slack = |s: f64| {
            let (x, y) = (a - w * s, 1.0 - a - w * (1.0 - s));
            if x < 0.0 || y < 0.0 {
                f64::NEG_INFINITY
            } else {
                x * y - g2
            }
        };
        let mut best = (0.0, slack(0.0));
        for k in 1..=2000 {
            let s = k as f64 / 2000.0;
            let v = slack(s);
            if v > best.1 {
                best = (s, v);
            }
        }
        let (mut lo, mut hi) = ((best.0 - 1e-3).max(0.0), (best.0 + 1e-3).min(1.0));
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..100 {
            let (m1, m2) = (hi - r * (hi - lo), lo + r * (hi - lo));
            if slack(m1) < slack(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        slack(0.5 * (lo + hi)).max(best.1) >= 0.0
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Wootters concurrence from the eigenvalues of √ρ ρ̃ √ρ, ρ̃ = (σy⊗σy)ρ*(σy⊗σy).
pub fn wootters_concurrence(rho: &ComplexMatrix) -> f64 {
    let r = to_nalgebra(rho);
    let i = C64::new(0.0, 1.0);
    let sy = DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), -i, i, C64::new(0.0, 0.0)]);
    let yy = sy.kronecker(&sy);
    let tilde = &yy * r.conjugate() * &yy;
    let eig = r.clone().symmetric_eigen();
    let sqrt_vals = eig.eigenvalues.map(|v| C64::new(v.max(0.0).sqrt(), 0.0));
    let sqrt_r = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.adjoint();
    let m = &sqrt_r * tilde * &sqrt_r;
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut l: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    (l[0] - l[1] - l[2] - l[3]).max(0.0)
}

pub fn werner_concurrence(p: f64) -> f64 {
    ((3.0 * p - 1.0) / 2.0).max(0.0)
}

/// Positive partial transpose test with nalgebra eigenvalues.
pub fn is_ppt(rho: &ComplexMatrix, tol: f64) -> bool {
    let pt = ComplexMatrix::from_fn(4, 4, |r, c| {
        let (a, b) = (r / 2, r % 2);
        let (a2, b2) = (c / 2, c % 2);
        rho.get(a * 2 + b2, a2 * 2 + b)
    });
    min_eigenvalue(&pt) >= -tol
}

pub fn rng(seed: u64) -> SeededRng {
    random::rng(seed)
}

fn qubit_h(rng: &mut SeededRng) -> ComplexMatrix {
    random::hermitian(rng, 2, 1.0)
}

/// Random qubit Hamiltonians at both ends and a Haar-random unitary.
pub fn qubit_unitary(rng: &mut SeededRng, beta: f64) -> Protocol {
    let (h_i, h_f) = (qubit_h(rng), qubit_h(rng));
    let u = random::unitary(rng, 2);
    Protocol::single(&h_i, &h_f, QuantumChannel::unitary(&u).unwrap(), beta).unwrap()
}

/// Driven qubit with emission and absorption at random rates.
pub fn qubit_lindblad(rng: &mut SeededRng, beta: f64) -> Protocol {
    let schedule = ScheduleSpec::RotatingXz { rabi: rng.random_range(0.5..1.5), omega: rng.random_range(0.5..1.5), t_i: 0.0, t_f: rng.random_range(1.0..3.0) };
    let jumps = vec![
        JumpSpec { operator: OperatorSpec::named("sigma_minus"), kappa: rng.random_range(0.02..0.2), site: None },
        JumpSpec { operator: OperatorSpec::named("sigma_plus"), kappa: rng.random_range(0.0..0.05), site: None },
    ];
    from_specs(&schedule, &jumps, beta)
}

/// Two qubits with random local fields and a switched σx⊗σx or exchange coupling.
pub fn bipartite_switched(rng: &mut SeededRng, beta: f64, dissipative: bool) -> Protocol {
    let interaction = if rng.random_bool(0.5) { "xx" } else { "exchange" };
    let schedule = ScheduleSpec::BipartiteSwitched {
        h_a: OperatorSpec::scaled(rng.random_range(0.3..1.2), "sigma_z"),
        h_b: OperatorSpec::scaled(rng.random_range(0.3..1.2), "sigma_z"),
        interaction: OperatorSpec::named(interaction),
        coupling: rng.random_range(0.3..1.5),
        t_i: 0.0,
        t_f: rng.random_range(1.0..2.5),
    };
    let jumps = if dissipative {
        vec![
            JumpSpec { operator: OperatorSpec::named("sigma_minus"), kappa: rng.random_range(0.02..0.1), site: Some(Site::A) },
            JumpSpec { operator: OperatorSpec::named("sigma_plus"), kappa: rng.random_range(0.01..0.05), site: Some(Site::A) },
        ]
    } else {
        vec![]
    };
    from_specs(&schedule, &jumps, beta)
}

pub fn from_specs(schedule: &ScheduleSpec, jumps: &[JumpSpec], beta: f64) -> Protocol {
    let spec = build_dynamics(schedule, jumps).unwrap();
    let steps = steps_for(spec.schedule().duration(), 1000.0);
    Protocol::from_dynamics(&spec, steps, beta).unwrap()
}

/// Qubit protocol of the CFD figures: H(t) = (sin t σx + cos t σz)/2 on [0, 10].
pub fn figure_protocol(kappa: f64) -> Protocol {
    let schedule = ScheduleSpec::RotatingXz { rabi: 1.0, omega: 1.0, t_i: 0.0, t_f: 10.0 };
    let jumps: Vec<JumpSpec> = if kappa > 0.0 { vec![JumpSpec { operator: OperatorSpec::named("sigma_x"), kappa, site: None }] } else { vec![] };
    let spec = build_dynamics(&schedule, &jumps).unwrap();
    Protocol::from_dynamics(&spec, spec.default_steps(), 1.0).unwrap()
}

/// Random two-qubit state with concurrence at least `min_c`.
pub fn entangled_state(rng: &mut SeededRng, min_c: f64) -> DensityMatrix {
    loop {
        let psi = random::pure(rng, 4);
        let mix = random::density(rng, 4);
        let w = rng.random_range(0.6..1.0);
        let m = combine(psi.matrix(), w, mix.matrix(), 1.0 - w);
        if wootters_concurrence(&m) >= min_c {
            return DensityMatrix::bipartite(m, (2, 2)).unwrap();
        }
    }
}

pub fn product_state(rng: &mut SeededRng) -> DensityMatrix {
    let (a, b) = (random::density(rng, 2), random::density(rng, 2));
    DensityMatrix::product(&a, &b).with_dims((2, 2)).unwrap()
}

pub fn werner(p: f64) -> DensityMatrix {
    DensityMatrix::werner(p).unwrap().with_dims((2, 2)).unwrap()
}

pub fn qubit_coherent(a: f64, g: f64) -> DensityMatrix {
    DensityMatrix::qubit_coherent(a, C64::new(g, 0.0)).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Proptest configuration with `n` cases and no regression files.
pub fn cases(n: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config { cases: n, failure_persistence: None, ..Default::default() }
}

/// Weight of coherence of [[a, g], [g*, 1 − a]] in closed form:
/// min s + r subject to s·r ≥ |g|², s ≤ a, r ≤ 1 − a.
pub fn qubit_coherence_analytic(a: f64, g: f64) -> f64 {
    let g = g.abs();
    let m = a.min(1.0 - a);
    if g == 0.0 {
        0.0
    } else if g <= m {
        2.0 * g
    } else {
        m + g * g / m
    }
}

/// min over diagonal states σ of min{c : ρ − (1 − c)σ ⪰ 0} with ρ given in
/// the reference basis; bisection per σ, pattern search over the simplex.
pub fn coherence_pattern_search(rho: &ComplexMatrix) -> f64 {
    let n = rho.rows();
    let value = |s: &[f64]| {
        if s.iter().any(|&x| x < 0.0) {
            return f64::INFINITY;
        }
        athermality_bisection(rho, &ComplexMatrix::from_diag(s))
    };
    let mut s: Vec<f64> = (0..n).map(|i| rho.get(i, i).re).collect();
    let mut best = value(&s);
    let mut h = 0.05;
    while h > 1e-12 {
        let mut improved = false;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let mut cand = s.clone();
                cand[i] += h;
                cand[j] = (cand[j] - h).max(0.0);
                cand[i] -= cand.iter().sum::<f64>() - 1.0;
                let v = value(&cand);
                if v < best {
                    best = v;
                    s = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    best
}

/// e^{sH} through nalgebra's eigendecomposition.
pub fn exp_h(h: &ComplexMatrix, s: f64) -> DMatrix<C64> {
    let eig = to_nalgebra(h).symmetric_eigen();
    let d = eig.eigenvalues.map(|e| C64::new((s * e).exp(), 0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.adjoint()
}

/// ⟨e^{−β(ΔE−ΔF)}⟩ = Tr(ρ e^{βH_i}) Tr(Φ[ρ] e^{−βH_f}) Z_i/Z_f.
pub fn jarzynski_oracle(p: &Protocol, rho: &DensityMatrix) -> f64 {
    let b = p.beta;
    let r = to_nalgebra(rho.matrix());
    let rf = to_nalgebra(&p.channel.apply_operator(rho.matrix()));
    let a = (&r * exp_h(&p.h_i, b)).trace().re;
    let c = (&rf * exp_h(&p.h_f, -b)).trace().re;
    let (zi, zf) = (exp_h(&p.h_i, -b).trace().re, exp_h(&p.h_f, -b).trace().re);
    a * c * zi / zf
}

/// Two-qubit state with the protocol's thermal marginals plus σx⊗σy correlations.
pub fn correlated_thermal(p: &Protocol, eps: f64) -> DensityMatrix {
    let l = p.local.as_ref().unwrap();
    let mut m = l.gamma_a_i.matrix().kron(l.gamma_b_i.matrix());
    m += &epmflux::numkernel::ops::sigma_x().kron(&epmflux::numkernel::ops::sigma_y()).scale_re(eps);
    DensityMatrix::bipartite(m, (2, 2)).unwrap()
}

/// Thermal populations of the protocol's initial Hamiltonian with coherence
/// `c` between the two lowest levels.
pub fn thermal_with_coherence(p: &Protocol, c: f64) -> DensityMatrix {
    let pops: Vec<f64> = (0..p.basis_i.dim()).map(|n| p.basis_i.to_reference(p.gamma_i.matrix()).get(n, n).re).collect();
    let mut m = ComplexMatrix::from_diag(&pops);
    let c = c * (pops[0] * pops[1]).sqrt();
    m.set(0, 1, C64::new(c, 0.0));
    m.set(1, 0, C64::new(c, 0.0));
    DensityMatrix::new(p.basis_i.from_reference(&m)).unwrap()
}
