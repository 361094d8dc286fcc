//! Complex matrix primitives and the unitary 2D-DFT toolkit.

mod dft;
mod grid;

pub use dft::{circconv2, circshift2, dft2, dft_matrix, flip_conjugate, idft2, unitary_dft2, upsample2};
pub use grid::ComplexGrid;
