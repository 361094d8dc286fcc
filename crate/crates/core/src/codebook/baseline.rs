//! A simple contiguous-sector codebook used as a comparison point.
//!
//! Sector `s = N_a k_e + k_a` is the `rho_e x rho_a` block of beamspace cells
//! starting at `(k_e rho_e, k_a rho_a)`. The ideal AWM whose mask is the
//! indicator of that block is computed with unlimited resolution and then
//! phase-quantized entrywise to `Q_q`, which is an approximation to how
//! practical codebooks are realized on low-resolution arrays.

use super::SectorLayout;
use crate::error::Result;
use crate::quantize::{project, Resolution};
use crate::tensor::{dft2, flip_conjugate, ComplexGrid};

/// Beamspace cells of contiguous sector `s`.
pub fn contiguous_cells(layout: &SectorLayout, s: usize) -> Vec<(usize, usize)> {
    let (re, ra) = (layout.rho_e(), layout.rho_a());
    let (ke, ka) = (s / layout.n_a(), s % layout.n_a());
    let mut out = Vec::with_capacity(re * ra);
    for i in 0..re {
        for j in 0..ra {
            out.push((ke * re + i, ka * ra + j));
        }
    }
    out
}

/// Unquantized AWM with mask equal to the block indicator, scaled to unit norm.
pub fn ideal_contiguous_awm(layout: &SectorLayout, s: usize) -> Result<ComplexGrid> {
    let n = layout.n();
    let mut mask = ComplexGrid::zeros(n, n);
    for cell in contiguous_cells(layout, s) {
        mask[cell] = 1.0.into();
    }
    // Z = N U^* FC(P) U^*  =>  P = FC(U Z U) / N
    let p = flip_conjugate(&dft2(&mask)?);
    let norm = p.frobenius_norm();
    Ok(p.scale_real(1.0 / norm))
}

/// The `S` baseline AWMs, each entry projected to modulus `1/N` on the `q`-bit grid.
pub fn contiguous_codebook(layout: &SectorLayout, q: u32) -> Result<Vec<ComplexGrid>> {
    let mag = 1.0 / layout.n() as f64;
    (0..layout.num_sectors())
        .map(|s| {
            let ideal = ideal_contiguous_awm(layout, s)?;
            Ok(ideal.map(|z| project(z, Resolution::Bits(q), mag)))
        })
        .collect()
}
