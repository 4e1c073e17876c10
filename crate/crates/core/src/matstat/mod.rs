//! Symmetric-matrix calculus and the distribution functions used by the
//! estimation and testing layers.

mod dist;
mod linalg;
mod sym;

pub use dist::{
    chi2_cdf, chi2_quantile, chi2_sf, gamma_p, gamma_q, kolmogorov_sf, ks_pvalue, ks_statistic,
    ln_gamma, normal_cdf, normal_quantile,
};
pub use linalg::{condition_number, duplication, kron, numeric_rank, pinv, w_matrix, DuplicationPair};
pub use sym::{half_len, unvech, vec, vech, vech_index, vech_pairs, HalfVec, SymMatrix};
