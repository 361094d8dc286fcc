//! Comb-sector base AWMs built from a weighted sum of circular shifts of an
//! upsampled DFT building block.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::SectorSpec;
use crate::error::{Error, Result};
use crate::quantize::{exact_phase_index, phasor};
use crate::tensor::{circshift2, flip_conjugate, idft2, unitary_dft2, upsample2, ComplexGrid};

/// Phase tolerance (radians) when checking that an AWM lies on the `Q_q` grid.
pub const PHASE_TOL: f64 = 1e-9;

/// `C_s = U_{N_e}(:, k_e) U_{N_a}(:, k_a)^T`, an `N_e x N_a` block with entries
/// of modulus `1 / sqrt(N_e N_a)`.
pub fn building_block(spec: &SectorSpec) -> ComplexGrid {
    let (ne, na) = (spec.n_e(), spec.n_a());
    let scale = 1.0 / ((ne * na) as f64).sqrt();
    ComplexGrid::from_fn(ne, na, |i, j| {
        let ph = -2.0 * PI * (((spec.k_e() * i) % ne) as f64 / ne as f64 + ((spec.k_a() * j) % na) as f64 / na as f64);
        Complex64::from_polar(scale, ph)
    })
}

/// Unit-modulus weights from phase indices (row-major, `rho_e x rho_a`).
pub fn weights_from_indices(spec: &SectorSpec, q: u32, indices: &[u32]) -> Result<ComplexGrid> {
    if indices.len() != spec.size() {
        return Err(Error::Dimension(format!(
            "weight matrix needs {} entries, got {}",
            spec.size(),
            indices.len()
        )));
    }
    if let Some(bad) = indices.iter().find(|&&i| i >= 1 << q) {
        return Err(Error::config("weights", format!("phase index {bad} outside [2^{q}]")));
    }
    ComplexGrid::new(
        spec.rho_e(),
        spec.rho_a(),
        indices.iter().map(|&i| phasor(i, q, 1.0)).collect(),
    )
}

fn check_weight_shape(spec: &SectorSpec, weights: &ComplexGrid) -> Result<()> {
    if weights.shape() != (spec.rho_e(), spec.rho_a()) {
        return Err(Error::Dimension(format!(
            "weight matrix must be {}x{}, got {}x{}",
            spec.rho_e(),
            spec.rho_a(),
            weights.rows(),
            weights.cols()
        )));
    }
    Ok(())
}

/// An antenna weight matrix in `Q_q^{N x N}` that illuminates one comb sector.
#[derive(Debug, Clone, PartialEq)]
pub struct Awm {
    grid: ComplexGrid,
    q: u32,
    sector: SectorSpec,
    weights: Vec<u32>,
}

impl Awm {
    pub fn grid(&self) -> &ComplexGrid {
        &self.grid
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn sector(&self) -> &SectorSpec {
        &self.sector
    }

    /// Phase indices of `W^s`, row-major.
    pub fn weight_indices(&self) -> &[u32] {
        &self.weights
    }

    pub fn weights(&self) -> ComplexGrid {
        weights_from_indices(&self.sector, self.q, &self.weights).expect("validated at construction")
    }

    /// Phase index of every AWM entry, row-major.
    pub fn phase_indices(&self) -> Vec<u32> {
        self.grid
            .data()
            .iter()
            .map(|&z| exact_phase_index(z, self.q, PHASE_TOL).expect("validated at construction"))
            .collect()
    }

    pub fn spectral_mask(&self) -> SpectralMask {
        let grid = spectral_mask(&self.grid).expect("AWM is square");
        SpectralMask::new(grid, self.sector)
    }
}

impl AsRef<ComplexGrid> for Awm {
    fn as_ref(&self) -> &ComplexGrid {
        &self.grid
    }
}

/// `P_s = sum_{l,m} W_lm / sqrt(rho_e rho_a) * circshift(upsample(C_s), l, m)`.
///
/// `weights` is `rho_e x rho_a` and unit-modulus; the `1/sqrt(rho_e rho_a)`
/// factor puts every AWM entry at modulus `1/N`.
pub fn assemble_awm(spec: &SectorSpec, q: u32, weights: &ComplexGrid) -> Result<Awm> {
    check_weight_shape(spec, weights)?;
    let mut indices = Vec::with_capacity(spec.size());
    for &w in weights.data() {
        if (w.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Construction(format!("weight {w} is not unit-modulus")));
        }
        indices.push(exact_phase_index(w, q, PHASE_TOL).ok_or_else(|| {
            Error::Construction(format!("weight {w} is not on the {q}-bit phase grid"))
        })?);
    }

    let (rho_e, rho_a) = (spec.rho_e(), spec.rho_a());
    let upsampled = upsample2(&building_block(spec), rho_e, rho_a)?;
    let scale = 1.0 / ((rho_e * rho_a) as f64).sqrt();
    let n = spec.n();
    let mut p = ComplexGrid::zeros(n, n);
    for l in 0..rho_e {
        for m in 0..rho_a {
            let w = weights[(l, m)] * scale;
            let shifted = circshift2(&upsampled, l as i64, m as i64);
            for (acc, v) in p.data_mut().iter_mut().zip(shifted.data()) {
                *acc += w * v;
            }
        }
    }

    let target = 1.0 / n as f64;
    for &z in p.data() {
        if (z.norm() - target).abs() > 1e-9 * target || exact_phase_index(z, q, PHASE_TOL).is_none() {
            return Err(Error::Construction(format!(
                "AWM entry {z} is not in Q_{q} (is q >= log2(max(N_e, N_a))?)"
            )));
        }
    }
    Ok(Awm {
        grid: p,
        q,
        sector: *spec,
        weights: indices,
    })
}

/// Spectral mask `Z = N U_N^* FC(P) U_N^*` of any square AWM.
pub fn spectral_mask(awm: &ComplexGrid) -> Result<ComplexGrid> {
    let n = awm.check_square()?;
    Ok(idft2(&flip_conjugate(awm))?.scale_real(n as f64))
}

/// `T^s = sum_{l,m} W_lm / sqrt(rho_e rho_a) a_N(2 pi l / N) a_N(2 pi m / N)^T`.
pub fn t_matrix(spec: &SectorSpec, weights: &ComplexGrid) -> Result<ComplexGrid> {
    check_weight_shape(spec, weights)?;
    let n = spec.n();
    let scale = 1.0 / (spec.size() as f64).sqrt();
    let mut padded = ComplexGrid::zeros(n, n);
    for l in 0..spec.rho_e() {
        for m in 0..spec.rho_a() {
            padded[(l, m)] = weights[(l, m)] * scale;
        }
    }
    // sum_lm w_lm e^{+j 2 pi (l i + m j) / N} = N * (U^* w U^*)(i, j)
    Ok(idft2(&padded)?.scale_real(n as f64))
}

/// In-sector restriction `T_A = U_{rho_e}^* D_{rho_e}(2 pi k_e/N) W D_{rho_a}(2 pi k_a/N) U_{rho_a}^*`.
pub fn t_in_sector(spec: &SectorSpec, weights: &ComplexGrid) -> Result<ComplexGrid> {
    check_weight_shape(spec, weights)?;
    let modulated = modulate(spec, weights, false);
    Ok(unitary_dft2(&modulated, true))
}

/// `D_e W D_a`, or `D_e^* W D_a^*` when `conjugate` is set.
pub(crate) fn modulate(spec: &SectorSpec, weights: &ComplexGrid, conjugate: bool) -> ComplexGrid {
    let n = spec.n() as f64;
    let sign = if conjugate { -1.0 } else { 1.0 };
    let (ke, ka) = (spec.k_e() as f64, spec.k_a() as f64);
    ComplexGrid::from_fn(weights.rows(), weights.cols(), |l, m| {
        let ph = sign * 2.0 * PI * (ke * l as f64 + ka * m as f64) / n;
        weights[(l, m)] * Complex64::from_polar(1.0, ph)
    })
}

/// max/min of in-sector magnitudes; infinite if any is zero.
pub fn uniformity_ratio(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Uniformity ratio the weights would achieve, computed in the `rho_e x rho_a` domain.
pub fn weights_uniformity(spec: &SectorSpec, weights: &ComplexGrid) -> Result<f64> {
    let t = t_in_sector(spec, weights)?;
    Ok(uniformity_ratio(t.data().iter().map(|z| z.norm())))
}

/// The spectral mask of a comb-sector AWM.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMask {
    grid: ComplexGrid,
    sector: SectorSpec,
    uniformity_ratio: f64,
}

impl SpectralMask {
    pub fn new(grid: ComplexGrid, sector: SectorSpec) -> Self {
        let ratio = uniformity_ratio(sector.cells().into_iter().map(|c| grid[c].norm()));
        Self {
            grid,
            sector,
            uniformity_ratio: ratio,
        }
    }

    pub fn grid(&self) -> &ComplexGrid {
        &self.grid
    }

    pub fn sector(&self) -> &SectorSpec {
        &self.sector
    }

    pub fn uniformity_ratio(&self) -> f64 {
        self.uniformity_ratio
    }

    /// Energy of the mask outside `A_s`.
    pub fn leakage_energy(&self) -> f64 {
        let n = self.grid.rows();
        let mut e = 0.0;
        for p in 0..n {
            for q in 0..n {
                if !self.sector.contains(p, q) {
                    e += self.grid[(p, q)].norm_sqr();
                }
            }
        }
        e
    }

    /// Mask values on `A_s` in column-major vector order (the `z_{L_o}` subvector).
    pub fn in_sector_vector(&self) -> Vec<Complex64> {
        self.sector
            .vec_indices()
            .into_iter()
            .map(|(_, cell)| self.grid[cell])
            .collect()
    }
}
