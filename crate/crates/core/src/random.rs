//! Seeded random matrices and states for tests, sweeps and multi-start searches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numkernel::{ComplexMatrix, C64};
use crate::qstate::DensityMatrix;

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_complex<R: Rng>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn gaussian_vector<R: Rng>(rng: &mut R, d: usize) -> Vec<C64> {
    (0..d).map(|_| gaussian_complex(rng)).collect()
}

pub fn ginibre<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian_complex(rng))
}

/// (G + G†)/2 with complex Gaussian G, rescaled to Frobenius norm `scale`.
pub fn hermitian<R: Rng>(rng: &mut R, d: usize, scale: f64) -> ComplexMatrix {
    let h = ginibre(rng, d, d).hermitian_part();
    let n = h.frobenius_norm();
    h.scale_re(scale / n)
}

/// Hilbert–Schmidt random mixed state G G†/Tr(G G†); full rank almost surely.
pub fn density<R: Rng>(rng: &mut R, d: usize) -> DensityMatrix {
    let g = ginibre(rng, d, d);
    let m = g.matmul(&g.adjoint());
    let t = m.trace().re;
    DensityMatrix::from_numeric(&m.scale_re(1.0 / t)).expect("Gram matrix is a state")
}

/// Random state whose smallest eigenvalue is at least `floor/d`.
pub fn full_rank_density<R: Rng>(rng: &mut R, d: usize, floor: f64) -> DensityMatrix {
    let r = density(rng, d);
    let m = &r.matrix().scale_re(1.0 - floor) + &ComplexMatrix::identity(d).scale_re(floor / d as f64);
    DensityMatrix::from_numeric(&m).expect("mixture of states")
}

pub fn unit_vector<R: Rng>(rng: &mut R, d: usize) -> Vec<C64> {
    let v = gaussian_vector(rng, d);
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

pub fn pure<R: Rng>(rng: &mut R, d: usize) -> DensityMatrix {
    DensityMatrix::pure(&unit_vector(rng, d)).expect("unit vector")
}

/// Haar-distributed unitary via Gram–Schmidt on a Ginibre matrix.
pub fn unitary<R: Rng>(rng: &mut R, d: usize) -> ComplexMatrix {
    let g = ginibre(rng, d, d);
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut v = g.column(j);
        for u in &cols {
            let ip: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(u) {
                *x -= ip * y;
            }
        }
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        cols.push(v.into_iter().map(|z| z / n).collect());
    }
    ComplexMatrix::from_fn(d, d, |i, j| cols[j][i])
}
