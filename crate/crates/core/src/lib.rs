//! Comb-structured sector codebooks and in-sector 2D convolutional compressed
//! sensing for beam alignment with low-resolution planar phased arrays.
//!
//! Conventions used throughout:
//!
//! * `U_N` is the unitary DFT with entries `exp(-j 2 pi m n / N) / sqrt(N)`.
//! * The beamspace of an antenna-domain matrix `H` is `X = U_N^* H U_N^*`.
//! * `<A, B> = sum_ij A_ij conj(B_ij)`.
//! * AWM entries have modulus `1/N`, so every AWM has unit Frobenius norm.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ccs;
pub mod channel;
pub mod codebook;
pub mod error;
pub mod metrics;
pub mod noise;
pub mod quantize;
pub mod recovery;
pub mod sim;
pub mod sweep;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::ComplexGrid;
