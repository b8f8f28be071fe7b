use serde::Serialize;

use crate::error::{Error, Result};
use crate::numkernel::{hermitian_eig, ops, partial_trace, partial_transpose_b, solve_spd, ComplexMatrix, Keep, C64, ONE, ZERO};
use crate::qstate::DensityMatrix;

/// Partial-transpose eigenvalues above −PPT_TOL count as positive.
pub const PPT_TOL: f64 = 1e-12;
/// Target duality gap of the separable-weight program.
const GAP_TOL: f64 = 1e-10;
/// Regularization applied to rank-deficient inputs before the barrier solve.
const REGULARIZATION: f64 = 1e-10;

/// Weight-r product state r·ρ_A ⊗ ρ_B.
#[derive(Clone, Debug, Serialize)]
pub struct ProductTerm {
    pub weight: f64,
    pub rho_a: DensityMatrix,
    pub rho_b: DensityMatrix,
}

/// ρ = λρ_E + (1 − λ)ρ_S with ρ_S = Σ_j r_j ρ^A_j ⊗ ρ^B_j.
#[derive(Clone, Debug, Serialize)]
pub struct BsaDecomposition {
    pub lambda: f64,
    pub rho_e: DensityMatrix,
    pub rho_s: DensityMatrix,
    pub product_terms: Vec<ProductTerm>,
    /// Smallest eigenvalue of ρ_S^Γ.
    pub ppt_min_eigenvalue: f64,
    /// Upper bound on the suboptimality of 1 − λ.
    pub gap: f64,
}

impl BsaDecomposition {
    pub fn residual(&self, rho: &DensityMatrix) -> f64 {
        let mut m = self.rho_e.matrix().scale_re(self.lambda);
        m += &self.rho_s.matrix().scale_re(1.0 - self.lambda);
        m.distance(rho.matrix())
    }

    /// ‖Σ r_j ρ^A_j ⊗ ρ^B_j − ρ_S‖_F.
    pub fn separable_residual(&self) -> f64 {
        product_mixture(&self.product_terms).distance(self.rho_s.matrix())
    }
}

fn two_qubit(rho: &DensityMatrix) -> Result<()> {
    match rho.dims() {
        Some((2, 2)) => Ok(()),
        None if rho.dim() == 4 => Ok(()),
        other => Err(Error::DimensionMismatch(format!("two-qubit state required, got split {other:?} of dimension {}", rho.dim()))),
    }
}

fn spin_flip() -> ComplexMatrix {
    let y = ops::sigma_y();
    y.kron(&y)
}

/// Wootters concurrence max(0, μ₁ − μ₂ − μ₃ − μ₄) with μ the square roots
/// of the eigenvalues of √ρ ρ̃ √ρ, ρ̃ = (σ_y⊗σ_y)ρ*(σ_y⊗σ_y).
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    two_qubit(rho)?;
    let yy = spin_flip();
    let tilde = yy.matmul(&rho.matrix().conj()).matmul(&yy);
    let e = hermitian_eig(rho.matrix())?;
    let s = e.map(|x| denoise(x, e.max()).sqrt());
    let m = s.matmul(&tilde).matmul(&s).hermitian_part();
    let e = hermitian_eig(&m)?;
    let mut mu: Vec<f64> = e.eigenvalues.iter().map(|&x| denoise(x, e.max()).sqrt()).collect();
    mu.sort_by(|a, b| b.total_cmp(a));
    Ok((mu[0] - mu[1] - mu[2] - mu[3]).max(0.0))
}

/// Eigenvalues within rounding of zero are zero, so that rank-deficient
/// inputs do not pick up √ε-sized spurious roots.
fn denoise(x: f64, scale: f64) -> f64 {
    if x <= 4.0 * f64::EPSILON * scale.abs() {
        0.0
    } else {
        x
    }
}

/// Smallest eigenvalue of the partial transpose.
pub fn ppt_min_eigenvalue(rho: &ComplexMatrix) -> f64 {
    hermitian_eig(&partial_transpose_b(rho, (2, 2)).hermitian_part()).map(|e| e.min()).unwrap_or(f64::NAN)
}

fn product_mixture(terms: &[ProductTerm]) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(4, 4);
    for t in terms {
        m += &t.rho_a.matrix().kron(t.rho_b.matrix()).scale_re(t.weight);
    }
    m
}

/// Best separable approximation of a two-qubit state.
///
/// The separable weight 1 − λ = max Tr S over S ⪰ 0, S^Γ ⪰ 0, ρ − S ⪰ 0
/// (PPT is exact separability for two qubits) is solved by a log-barrier
/// Newton method; ρ_S = S/Tr S is then written as a mixture of pure product
/// states and ρ_E is what remains.
pub fn bsa_decompose(rho: &DensityMatrix) -> Result<BsaDecomposition> {
    two_qubit(rho)?;
    let rho = rho.clone().with_dims((2, 2))?;
    let m = rho.matrix();
    let ppt = ppt_min_eigenvalue(m);
    if ppt >= -PPT_TOL {
        let terms = separable_terms(m)?;
        return finish(&rho, 0.0, terms, 0.0);
    }
    let eig = hermitian_eig(m)?;
    let rank = eig.eigenvalues.iter().filter(|&&x| x > 1e-12).count();
    if rank <= 1 {
        return maximal_entanglement(&rho);
    }
    let target = if eig.min() > 1e-9 {
        m.clone()
    } else {
        &m.scale_re(1.0 - REGULARIZATION) + &ComplexMatrix::identity(4).scale_re(REGULARIZATION / 4.0)
    };
    let (s, gap) = separable_weight_sdp(&target)?;
    let weight = s.trace().re;
    if weight < 1e-9 {
        return maximal_entanglement(&rho);
    }
    let terms = separable_terms(&s.scale_re(1.0 / weight))?;
    finish(&rho, (1.0 - weight).clamp(0.0, 1.0), terms, gap)
}

fn maximal_entanglement(rho: &DensityMatrix) -> Result<BsaDecomposition> {
    let half = DensityMatrix::maximally_mixed(2);
    let terms = vec![ProductTerm { weight: 1.0, rho_a: half.clone(), rho_b: half }];
    finish(rho, 1.0, terms, 0.0)
}

fn finish(rho: &DensityMatrix, lambda: f64, terms: Vec<ProductTerm>, gap: f64) -> Result<BsaDecomposition> {
    let rho_s = DensityMatrix::from_numeric(&product_mixture(&terms))?.with_dims((2, 2))?;
    let remainder = |w: f64| {
        let mut r = rho.matrix().clone();
        r -= &rho_s.matrix().scale_re(w);
        r
    };
    let psd = |w: f64| hermitian_eig(&remainder(w).hermitian_part()).map(|e| e.min() >= 0.0).unwrap_or(false);
    let mut lambda = lambda;
    if lambda > 0.0 && lambda < 1.0 && !psd(1.0 - lambda) {
        // Back the separable weight off until ρ − (1 − λ)ρ_S is PSD, so that
        // ρ_E is the exact remainder rather than a clipped one.
        let (mut lo, mut hi) = (0.0, 1.0 - lambda);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if psd(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lambda = 1.0 - lo;
    }
    let rho_e = if lambda == 0.0 {
        rho.clone()
    } else {
        DensityMatrix::from_numeric(&remainder(1.0 - lambda).scale_re(1.0 / lambda))?.with_dims((2, 2))?
    };
    let ppt_min_eigenvalue = ppt_min_eigenvalue(rho_s.matrix());
    Ok(BsaDecomposition { lambda, rho_e, rho_s, product_terms: terms, ppt_min_eigenvalue, gap })
}

/// Orthonormal Hermitian basis of 4×4 matrices under ⟨A, B⟩ = Tr(AB).
fn hermitian_basis() -> Vec<ComplexMatrix> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(16);
    for i in 0..4 {
        let mut e = ComplexMatrix::zeros(4, 4);
        e.set(i, i, ONE);
        out.push(e);
    }
    for i in 0..4 {
        for j in i + 1..4 {
            let mut re = ComplexMatrix::zeros(4, 4);
            re.set(i, j, C64::new(h, 0.0));
            re.set(j, i, C64::new(h, 0.0));
            out.push(re);
            let mut im = ComplexMatrix::zeros(4, 4);
            im.set(i, j, C64::new(0.0, h));
            im.set(j, i, C64::new(0.0, -h));
            out.push(im);
        }
    }
    out
}

struct Blocks {
    s: ComplexMatrix,
    p: ComplexMatrix,
    q: ComplexMatrix,
}

fn blocks(x: &[f64], basis: &[ComplexMatrix], rho: &ComplexMatrix) -> Blocks {
    let mut s = ComplexMatrix::zeros(4, 4);
    for (xa, b) in x.iter().zip(basis) {
        s.axpy(C64::new(*xa, 0.0), b);
    }
    let p = partial_transpose_b(&s, (2, 2));
    let q = rho - &s;
    Blocks { s, p, q }
}

/// Σ ln det over the three blocks, or None outside the interior.
fn log_det_sum(b: &Blocks) -> Option<f64> {
    let mut total = 0.0;
    for m in [&b.s, &b.p, &b.q] {
        let e = hermitian_eig(m).ok()?;
        if e.min() <= 0.0 {
            return None;
        }
        total += e.eigenvalues.iter().map(|v| v.ln()).sum::<f64>();
    }
    Some(total)
}

/// Barrier solve of max Tr S, S ⪰ 0, S^Γ ⪰ 0, ρ − S ⪰ 0 for full-rank ρ.
fn separable_weight_sdp(rho: &ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
    let basis = hermitian_basis();
    let basis_pt: Vec<ComplexMatrix> = basis.iter().map(|b| partial_transpose_b(b, (2, 2))).collect();
    let n = basis.len();
    let lo = hermitian_eig(rho)?.min();
    let mut x = vec![0.0; n];
    for xa in x.iter_mut().take(4) {
        *xa = 0.5 * lo;
    }
    let trace_of = |x: &[f64]| x[..4].iter().sum::<f64>();
    let mut t = 1.0;
    let barrier_dim = 12.0;
    let mut gap = f64::INFINITY;
    for _outer in 0..60 {
        for _inner in 0..100 {
            let b = blocks(&x, &basis, rho);
            let inv = |m: &ComplexMatrix| hermitian_eig(m).map(|e| e.map(|v| 1.0 / v));
            let (si, pi, qi) = (inv(&b.s)?, inv(&b.p)?, inv(&b.q)?);
            let ms: Vec<ComplexMatrix> = basis.iter().map(|ba| si.matmul(ba)).collect();
            let mp: Vec<ComplexMatrix> = basis_pt.iter().map(|ba| pi.matmul(ba)).collect();
            let mq: Vec<ComplexMatrix> = basis.iter().map(|ba| qi.matmul(ba)).collect();
            let mut grad = vec![0.0; n];
            let mut hess = vec![0.0; n * n];
            for a in 0..n {
                let tr_a = if a < 4 { 1.0 } else { 0.0 };
                grad[a] = -t * tr_a - ms[a].trace().re - mp[a].trace().re + mq[a].trace().re;
                for c in a..n {
                    let h = ms[a].trace_product(&ms[c]).re + mp[a].trace_product(&mp[c]).re + mq[a].trace_product(&mq[c]).re;
                    hess[a * n + c] = h;
                    hess[c * n + a] = h;
                }
            }
            let Some(step) = solve_spd(&hess, &grad.iter().map(|g| -g).collect::<Vec<_>>()) else {
                break;
            };
            let decrement: f64 = -grad.iter().zip(&step).map(|(g, s)| g * s).sum::<f64>();
            if decrement < 1e-13 {
                break;
            }
            let f = |x: &[f64]| log_det_sum(&blocks(x, &basis, rho)).map(|ld| -t * trace_of(x) - ld);
            let f0 = f(&x).expect("iterate is strictly feasible");
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha > 1e-14 {
                let cand: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + alpha * s).collect();
                if let Some(f1) = f(&cand) {
                    if f1 <= f0 - 0.25 * alpha * decrement {
                        x = cand;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        gap = barrier_dim / t;
        if gap < GAP_TOL {
            break;
        }
        t *= 10.0;
    }
    Ok((blocks(&x, &basis, rho).s.hermitian_part(), gap))
}

/// Takagi factorization τ = U Σ Uᵀ of a complex symmetric matrix, via the
/// real symmetric embedding [[X, Y], [Y, −X]] with τ = X + iY.
fn takagi(tau: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let n = tau.rows();
    let emb = ComplexMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let z = tau.get(r % n, c % n);
        let v = match (r < n, c < n) {
            (true, true) => z.re,
            (false, false) => -z.re,
            _ => z.im,
        };
        C64::new(v, 0.0)
    });
    let eig = hermitian_eig(&emb)?;
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut sv = Vec::with_capacity(n);
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    let as_complex = |k: usize| -> Vec<C64> {
        let v = eig.vector(k);
        (0..n).map(|i| C64::new(v[i].re, v[n + i].re)).collect()
    };
    // Positive eigenvalues, largest first.
    for k in (0..2 * n).rev() {
        if eig.eigenvalues[k] > 1e-12 * scale && cols.len() < n {
            sv.push(eig.eigenvalues[k]);
            cols.push(as_complex(k));
        }
    }
    // Null space: complex Gram–Schmidt over the (near-)zero eigenvectors.
    for k in 0..2 * n {
        if cols.len() == n {
            break;
        }
        if eig.eigenvalues[k].abs() > 1e-12 * scale {
            continue;
        }
        let mut w = as_complex(k);
        for u in &cols {
            let ip: C64 = u.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in w.iter_mut().zip(u) {
                *x -= ip * y;
            }
        }
        let nn = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nn > 0.5 {
            cols.push(w.into_iter().map(|z| z / nn).collect());
            sv.push(0.0);
        }
    }
    if cols.len() != n {
        return Err(Error::OptimizationNotConverged("Takagi factorization lost rank".into()));
    }
    Ok((sv, ComplexMatrix::from_fn(n, n, |i, j| cols[j][i])))
}

/// Phases φ with Σ λ_j e^{iφ_j} = 0 for λ sorted descending, or the closest
/// configuration when λ₁ exceeds the sum of the others.
fn closing_phases(l: &[f64; 4]) -> [f64; 4] {
    let angle = |a: f64, b: f64, len: f64| -> f64 {
        if a <= 0.0 || b <= 0.0 {
            return 0.0;
        }
        // π minus the triangle angle opposite `len`, in half-angle form to
        // stay accurate near the degenerate triangle.
        let num = ((len - a + b) * (len + a - b)).max(0.0).sqrt();
        let den = ((a + b - len) * (a + b + len)).max(0.0).sqrt();
        std::f64::consts::PI - 2.0 * num.atan2(den)
    };
    let len = (l[0] - l[1]).max(l[2] - l[3]).min(l[2] + l[3]).max(0.0);
    let d12 = angle(l[0], l[1], len);
    let psi = (C64::new(l[0], 0.0) + C64::from_polar(l[1], d12)).arg();
    let d34 = angle(l[2], l[3], len);
    let chi = (C64::new(l[2], 0.0) + C64::from_polar(l[3], d34)).arg();
    let a3 = psi + std::f64::consts::PI - chi;
    [0.0, d12, a3, a3 + d34]
}

/// Mixture of pure product states equal to a two-qubit state of zero
/// concurrence.
fn separable_terms(rho: &ComplexMatrix) -> Result<Vec<ProductTerm>> {
    let rho = rho.hermitian_part();
    if let Some(t) = exact_product(&rho)? {
        return Ok(vec![t]);
    }
    let eig = hermitian_eig(&rho)?;
    let v: Vec<Vec<C64>> = (0..4).map(|k| eig.vector(k).into_iter().map(|z| z * eig.eigenvalues[k].max(0.0).sqrt()).collect()).collect();
    let yy = spin_flip();
    let tau = ComplexMatrix::from_fn(4, 4, |i, j| {
        let yvj = yy.matvec(&v[j].iter().map(|z| z.conj()).collect::<Vec<_>>());
        v[i].iter().zip(&yvj).map(|(a, b)| a.conj() * b).sum()
    });
    let tau = ComplexMatrix::from_fn(4, 4, |i, j| (tau.get(i, j) + tau.get(j, i)) * 0.5);
    let (sv, u) = takagi(&tau)?;
    // x_i = Σ_j U_ji v_j
    let x: Vec<Vec<C64>> = (0..4)
        .map(|i| (0..4).map(|c| (0..4).map(|j| u.get(j, i) * v[j][c]).sum()).collect())
        .collect();
    let lam = [sv[0], sv[1], sv[2], sv[3]];
    let phi = closing_phases(&lam);
    let y: Vec<Vec<C64>> = (0..4).map(|j| x[j].iter().map(|z| z * C64::from_polar(1.0, -phi[j] / 2.0)).collect()).collect();
    const H: [[f64; 4]; 4] = [[1.0, 1.0, 1.0, 1.0], [1.0, -1.0, 1.0, -1.0], [1.0, 1.0, -1.0, -1.0], [1.0, -1.0, -1.0, 1.0]];
    let mut terms = Vec::with_capacity(4);
    // H is symmetric, so its rows are its columns.
    for h in &H {
        let z: Vec<C64> = (0..4).map(|c| (0..4).map(|j| y[j][c] * (0.5 * h[j])).sum()).collect();
        if let Some(t) = factor_product(&z)? {
            terms.push(t);
        }
    }
    let total: f64 = terms.iter().map(|t| t.weight).sum();
    if total <= 0.0 {
        return Err(Error::DecompositionInapplicable("empty product decomposition".into()));
    }
    for t in &mut terms {
        t.weight /= total;
    }
    Ok(terms)
}

/// Single term when ρ equals the product of its marginals.
fn exact_product(rho: &ComplexMatrix) -> Result<Option<ProductTerm>> {
    let a = partial_trace(rho, (2, 2), Keep::A)?;
    let b = partial_trace(rho, (2, 2), Keep::B)?;
    if a.kron(&b).distance(rho) > 1e-12 {
        return Ok(None);
    }
    Ok(Some(ProductTerm { weight: 1.0, rho_a: DensityMatrix::from_numeric(&a)?, rho_b: DensityMatrix::from_numeric(&b)? }))
}

/// Best rank-one factorization z ≈ a ⊗ b of a 4-vector, as r·|a⟩⟨a| ⊗ |b̂⟩⟨b̂|.
fn factor_product(z: &[C64]) -> Result<Option<ProductTerm>> {
    let weight: f64 = z.iter().map(|c| c.norm_sqr()).sum();
    if weight < 1e-15 {
        return Ok(None);
    }
    let zm = ComplexMatrix::from_fn(2, 2, |i, j| z[2 * i + j]);
    let g = zm.matmul(&zm.adjoint());
    let e = hermitian_eig(&g)?;
    let u = e.vector(1);
    let b: Vec<C64> = (0..2).map(|j| (0..2).map(|i| u[i].conj() * zm.get(i, j)).sum()).collect();
    let rho_a = DensityMatrix::pure(&u)?;
    let rho_b = if b.iter().all(|c| *c == ZERO) { DensityMatrix::maximally_mixed(2) } else { DensityMatrix::pure(&b)? };
    Ok(Some(ProductTerm { weight, rho_a, rho_b }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;

    #[test]
    fn werner_separable_weight_matches_concurrence() {
        for p in [0.4, 0.6, 0.8, 0.95] {
            let rho = DensityMatrix::werner(p).unwrap();
            let c = concurrence(&rho).unwrap();
            let d = bsa_decompose(&rho).unwrap();
            assert!((d.lambda - c).abs() < 1e-7, "p={p} lambda={} c={c}", d.lambda);
            assert!(d.residual(&rho) < 1e-9);
            assert!(d.separable_residual() < 1e-8, "sep {}", d.separable_residual());
            assert!(d.ppt_min_eigenvalue > -1e-9);
        }
    }

    #[test]
    fn random_states_decompose() {
        let mut rng = random::rng(7);
        for _ in 0..20 {
            let rho = random::full_rank_density(&mut rng, 4, 1e-3);
            let d = bsa_decompose(&rho).unwrap();
            assert!(d.residual(&rho) < 1e-8);
            assert!(d.separable_residual() < 1e-7, "sep {}", d.separable_residual());
            assert!(d.rho_e.min_eigenvalue() > -1e-7, "rho_e {}", d.rho_e.min_eigenvalue());
            assert!(d.product_terms.iter().all(|t| t.weight >= 0.0));
        }
    }

    #[test]
    fn separable_input_has_zero_lambda() {
        let rho = DensityMatrix::werner(0.2).unwrap();
        let d = bsa_decompose(&rho).unwrap();
        assert_eq!(d.lambda, 0.0);
        assert!(d.separable_residual() < 1e-10);
    }

    #[test]
    fn bell_state_is_fully_entangled() {
        let d = bsa_decompose(&DensityMatrix::werner(1.0).unwrap()).unwrap();
        assert_eq!(d.lambda, 1.0);
    }
}

