//! Federated rank aggregation under the Mallows model.
//!
//! The crate implements two one-round protocols for estimating a consensus
//! ranking from rankings spread across clients:
//!
//! * quantized Borda scoring ([`fra_borda`]), where every client sends the
//!   nearest-centroid quantization of its mean item positions, and
//! * bit-split Lehmer-code majority ([`fra_lehmer`]), where every client sends
//!   the high bits of its coordinate-wise Lehmer majority plus a one-hot
//!   histogram of the low bits.
//!
//! Both run over zero-sum masked secure aggregation ([`secure_agg`]) with an
//! exact bit ledger. Around them sit the permutation toolkit ([`perm`]), the
//! exact Mallows sampler and quantization tables ([`mallows`]), classical
//! baselines ([`baselines`]), dataset ingestion ([`data_ingest`]) and the
//! experiment harness ([`harness`]).
//!
//! Real-valued math is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below are what the harness and CLI use.

pub mod baselines;
pub mod data_ingest;
pub mod error;
pub mod fra_borda;
pub mod fra_lehmer;
pub mod harness;
pub mod mallows;
pub mod perm;
pub mod scalar;
pub mod secure_agg;
pub mod seeds;

pub use error::{FraError, Result};
pub use perm::{DisplacementVector, LehmerCode, Permutation, TieRule};
pub use scalar::Real;

pub type MallowsParams64 = mallows::MallowsParams<f64>;
pub type MallowsParams32 = mallows::MallowsParams<f32>;
pub type QuantTable64 = mallows::QuantTable<f64>;
pub type QuantTable32 = mallows::QuantTable<f32>;
pub type BordaEstimate64 = fra_borda::BordaEstimate<f64>;
pub type BordaEstimate32 = fra_borda::BordaEstimate<f32>;
