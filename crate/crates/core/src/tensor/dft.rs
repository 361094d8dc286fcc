//! Unitary 2D-DFT toolkit.
//!
//! Convention: `U_N(m, n) = exp(-j 2 pi m n / N) / sqrt(N)`. The forward
//! transform of an `R x C` grid is `U_R X U_C` and the inverse is
//! `U_R^* X U_C^*`. Both are computed with `rustfft` along rows, then columns.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::ComplexGrid;
use crate::error::{Error, Result};

/// The `n x n` unitary DFT matrix `U_n`.
pub fn dft_matrix(n: usize) -> ComplexGrid {
    let scale = 1.0 / (n as f64).sqrt();
    ComplexGrid::from_fn(n, n, |m, k| {
        Complex64::from_polar(scale, -2.0 * PI * ((m * k) % n) as f64 / n as f64)
    })
}

fn plans(rows: usize, cols: usize, inverse: bool) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    let mut planner = FftPlanner::new();
    if inverse {
        (planner.plan_fft_inverse(rows), planner.plan_fft_inverse(cols))
    } else {
        (planner.plan_fft_forward(rows), planner.plan_fft_forward(cols))
    }
}

/// Unnormalized separable 2D FFT in place.
fn fft2_in_place(grid: &mut ComplexGrid, inverse: bool) {
    let (rows, cols) = grid.shape();
    let (row_plan, col_plan) = plans(rows, cols, inverse);

    // Transform each row (length `cols`).
    for chunk in grid.data_mut().chunks_exact_mut(cols) {
        col_plan.process(chunk);
    }
    // Transform each column (length `rows`).
    let mut column = vec![Complex64::new(0.0, 0.0); rows];
    for j in 0..cols {
        for (i, c) in column.iter_mut().enumerate() {
            *c = grid[(i, j)];
        }
        row_plan.process(&mut column);
        for (i, c) in column.iter().enumerate() {
            grid[(i, j)] = *c;
        }
    }
}

/// `U_R X U_C` (forward) or `U_R^* X U_C^*` (inverse) for any `R x C` grid.
pub fn unitary_dft2(grid: &ComplexGrid, inverse: bool) -> ComplexGrid {
    let mut out = grid.clone();
    fft2_in_place(&mut out, inverse);
    let scale = 1.0 / ((grid.rows() * grid.cols()) as f64).sqrt();
    for z in out.data_mut() {
        *z *= scale;
    }
    out
}

/// Forward unitary 2D-DFT `U_N X U_N` of a square grid.
pub fn dft2(grid: &ComplexGrid) -> Result<ComplexGrid> {
    grid.check_square()?;
    Ok(unitary_dft2(grid, false))
}

/// Inverse unitary 2D-DFT `U_N^* X U_N^*` of a square grid.
pub fn idft2(grid: &ComplexGrid) -> Result<ComplexGrid> {
    grid.check_square()?;
    Ok(unitary_dft2(grid, true))
}

fn wrap(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}

/// 2D circular shift: `out(i, j) = grid(<i - r>, <j - c>)`.
pub fn circshift2(grid: &ComplexGrid, r: i64, c: i64) -> ComplexGrid {
    let (rows, cols) = grid.shape();
    ComplexGrid::from_fn(rows, cols, |i, j| {
        grid[(wrap(i as i64 - r, rows), wrap(j as i64 - c, cols))]
    })
}

/// Flip-and-conjugate: `out(i, j) = conj(grid(<-i>, <-j>))`.
pub fn flip_conjugate(grid: &ComplexGrid) -> ComplexGrid {
    let (rows, cols) = grid.shape();
    ComplexGrid::from_fn(rows, cols, |i, j| {
        grid[(wrap(-(i as i64), rows), wrap(-(j as i64), cols))].conj()
    })
}

/// Zero-insertion upsampling by `rho_e` along rows and `rho_a` along columns.
pub fn upsample2(grid: &ComplexGrid, rho_e: usize, rho_a: usize) -> Result<ComplexGrid> {
    if rho_e == 0 || rho_a == 0 {
        return Err(Error::Dimension(format!(
            "upsampling factors must be >= 1, got ({rho_e}, {rho_a})"
        )));
    }
    let (rows, cols) = grid.shape();
    let mut out = ComplexGrid::zeros(rows * rho_e, cols * rho_a);
    for i in 0..rows {
        for j in 0..cols {
            out[(i * rho_e, j * rho_a)] = grid[(i, j)];
        }
    }
    Ok(out)
}

/// 2D circular convolution `(a * b)(r, c) = sum_ij a(i, j) b(<r - i>, <c - j>)`.
///
/// Computed through the unitary transform: `U (a * b) U = N (U a U) . (U b U)`.
pub fn circconv2(a: &ComplexGrid, b: &ComplexGrid) -> Result<ComplexGrid> {
    let n = a.check_square()?;
    a.check_same_shape(b)?;
    let fa = unitary_dft2(a, false);
    let fb = unitary_dft2(b, false);
    let prod = fa.hadamard(&fb)?.scale_real(n as f64);
    Ok(unitary_dft2(&prod, true))
}
