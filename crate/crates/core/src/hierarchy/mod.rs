//! k-particle tensor fields in low-rank form and the nested Duhamel iterates
//! of the linear hierarchy `∂ₜu⁽ᵏ⁾ = Δu⁽ᵏ⁾ + W⁽ᵏ⁾u⁽ᵏ⁺¹⁾`.

mod dense;
mod duhamel;
mod lowrank;
mod quadrature;

pub use dense::{dense_materialize, DenseTensor};
pub use duhamel::{
    compressible_fixture, consistency_check, consistency_residual_k, duhamel_remainder_frozen,
    duhamel_term_direct, duhamel_term_with_estimate, history_count, DuhamelEstimate,
    MAX_DUHAMEL_TERMS,
};
pub use lowrank::{heat_propagate_k, tensor_power, LowRankTensorField, RankOneTerm};
pub use quadrature::{gauss_legendre_unit, QuadScheme, SimplexQuadrature};
