use crate::error::{Error, Result};
use crate::numkernel::{hermitian_eig, ComplexMatrix, C64};

/// Absolute gap below which neighbouring eigenvalues form one block.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Spectral resolution H = Σ_l E_l Π_l.
///
/// Degenerate levels share one projector of rank > 1. `vectors` keeps the
/// individual eigenvectors (columns, block-ordered) as the reference basis for
/// diagonal states; `block_of[n]` names the block of column n.
#[derive(Clone, Debug)]
pub struct EnergyBasis {
    energies: Vec<f64>,
    projectors: Vec<ComplexMatrix>,
    vectors: ComplexMatrix,
    block_of: Vec<usize>,
    factors: Option<(usize, usize)>,
}

impl EnergyBasis {
    /// Diagonalizes H and merges levels closer than `DEGENERACY_TOL`.
    pub fn from_hamiltonian(h: &ComplexMatrix) -> Result<Self> {
        Self::from_hamiltonian_with_tol(h, DEGENERACY_TOL)
    }

    /// Keeps every eigenvector as its own level, even when energies coincide.
    pub fn from_hamiltonian_unmerged(h: &ComplexMatrix) -> Result<Self> {
        Self::from_hamiltonian_with_tol(h, -1.0)
    }

    fn from_hamiltonian_with_tol(h: &ComplexMatrix, tol: f64) -> Result<Self> {
        let eig = hermitian_eig(h)?;
        let n = eig.dim();
        let mut energies: Vec<f64> = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for k in 0..n {
            let e = eig.eigenvalues[k];
            match energies.last() {
                Some(&last) if (e - last).abs() <= tol * last.abs().max(1.0) => {
                    members.last_mut().expect("nonempty").push(k);
                }
                _ => {
                    energies.push(e);
                    members.push(vec![k]);
                }
            }
        }
        // Block energy is the mean of its eigenvalues.
        for (e, m) in energies.iter_mut().zip(&members) {
            *e = m.iter().map(|&k| eig.eigenvalues[k]).sum::<f64>() / m.len() as f64;
        }
        let mut block_of = vec![0; n];
        let mut projectors = Vec::with_capacity(members.len());
        for (b, m) in members.iter().enumerate() {
            let mut p = ComplexMatrix::zeros(n, n);
            for &k in m {
                block_of[k] = b;
                let v = eig.vector(k);
                p += &ComplexMatrix::outer(&v, &v);
            }
            projectors.push(p);
        }
        Ok(Self { energies, projectors, vectors: eig.eigenvectors, block_of, factors: None })
    }

    /// Product basis of two local bases: label l = l_A·n_B + l_B, energy
    /// E_A + E_B, projector Π_A ⊗ Π_B. Coinciding sums are not merged.
    pub fn product(a: &Self, b: &Self) -> Self {
        let (na, nb) = (a.len(), b.len());
        let mut energies = Vec::with_capacity(na * nb);
        let mut projectors = Vec::with_capacity(na * nb);
        for la in 0..na {
            for lb in 0..nb {
                energies.push(a.energies[la] + b.energies[lb]);
                projectors.push(a.projectors[la].kron(&b.projectors[lb]));
            }
        }
        let vectors = a.vectors.kron(&b.vectors);
        let (da, db) = (a.dim(), b.dim());
        let block_of = (0..da * db).map(|n| a.block_of[n / db] * nb + b.block_of[n % db]).collect();
        Self { energies, projectors, vectors, block_of, factors: Some((na, nb)) }
    }

    /// Standard basis with the given energies (diagonal Hamiltonian).
    pub fn diagonal(energies: &[f64]) -> Result<Self> {
        Self::from_hamiltonian(&ComplexMatrix::from_diag(energies))
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.rows()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn energy(&self, l: usize) -> f64 {
        self.energies[l]
    }

    pub fn projectors(&self) -> &[ComplexMatrix] {
        &self.projectors
    }

    pub fn projector(&self, l: usize) -> &ComplexMatrix {
        &self.projectors[l]
    }

    /// Eigenvectors as columns; the reference basis for "diagonal" states.
    pub fn vectors(&self) -> &ComplexMatrix {
        &self.vectors
    }

    pub fn block_of(&self) -> &[usize] {
        &self.block_of
    }

    /// (n_A, n_B) level counts for product bases.
    pub fn factors(&self) -> Option<(usize, usize)> {
        self.factors
    }

    /// Splits a product label into (l_A, l_B).
    pub fn split_label(&self, l: usize) -> Option<(usize, usize)> {
        self.factors.map(|(_, nb)| (l / nb, l % nb))
    }

    /// Σ_l E_l Π_l
    pub fn hamiltonian(&self) -> ComplexMatrix {
        let n = self.dim();
        let mut h = ComplexMatrix::zeros(n, n);
        for (e, p) in self.energies.iter().zip(&self.projectors) {
            h.axpy(C64::new(*e, 0.0), p);
        }
        h
    }

    /// Born probabilities Tr(X Π_l) of a Hermitian operator X.
    pub fn probabilities(&self, x: &ComplexMatrix) -> Vec<f64> {
        self.projectors.iter().map(|p| x.expectation(p)).collect()
    }

    /// U† X U in the reference basis.
    pub fn to_reference(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.vectors.adjoint().matmul(x).matmul(&self.vectors)
    }

    /// U X U† back from the reference basis.
    pub fn from_reference(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.vectors.matmul(x).matmul(&self.vectors.adjoint())
    }

    /// Σ_n q_n |n⟩⟨n| over the reference vectors.
    pub fn diagonal_operator(&self, q: &[f64]) -> ComplexMatrix {
        self.from_reference(&ComplexMatrix::from_diag(q))
    }

    /// Largest deviation from Σ Π = I, Π² = Π and Π_l Π_m = 0.
    pub fn completeness_defect(&self) -> f64 {
        let n = self.dim();
        let mut sum = ComplexMatrix::zeros(n, n);
        let mut worst: f64 = 0.0;
        for (l, p) in self.projectors.iter().enumerate() {
            sum += p;
            worst = worst.max(p.matmul(p).distance(p));
            for q in &self.projectors[l + 1..] {
                worst = worst.max(p.matmul(q).frobenius_norm());
            }
        }
        worst.max(sum.distance(&ComplexMatrix::identity(n)))
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(Error::DimensionMismatch(format!("basis of dimension {} for operator of dimension {d}", self.dim())));
        }
        Ok(())
    }
}
