//! Resource-theoretic state decompositions: athermality, coherence,
//! correlations and two-qubit best separable approximation.

mod athermality;
mod bsa;
mod coherence;
mod triple;

pub use athermality::{weight_of_athermality, AthermalityDecomposition, REFERENCE_FLOOR};
pub use bsa::{bsa_decompose, concurrence, ppt_min_eigenvalue, BsaDecomposition, ProductTerm, PPT_TOL};
pub use coherence::{weight_of_coherence, weight_of_coherence_with, CoherenceDecomposition, CoherenceSolver};
pub use triple::{
    block_min_eigenvalue, correlation_split, correlation_split_with, nine_term_split, triple_decompose, CorrelationSplit,
    NineTermProduct, TripleDecomposition, MARGINAL_TOL,
};
