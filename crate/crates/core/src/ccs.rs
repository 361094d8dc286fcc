//! In-sector 2D convolutional compressed sensing: circulant-shift sets, their
//! point spread function and coherence, and measurement acquisition.
//!
//! Applying the base AWM `P_o` circularly shifted by `(r, c)` measures
//! `<H, circshift(P_o, r, c)> = (H * FC(P_o))(r, c) = (U (X . Z_o) U)(r, c)`,
//! a sample of the 2D-DFT of the masked beamspace. Only the `rho_e rho_a`
//! entries of `X` on the sector comb contribute.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::codebook::{Awm, SectorSpec};
use crate::error::{Error, Result};
use crate::noise::complex_normal;
use crate::tensor::{circconv2, flip_conjugate, idft2, ComplexGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftKind {
    /// The full `[rho_e] x [rho_a]` block.
    Nyquist,
    /// Random subset of the Nyquist block.
    Pcs,
    /// Random subset of `[N] x [N]`.
    Rcs,
    /// Anything supplied by the caller.
    Custom,
}

impl std::fmt::Display for ShiftKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ShiftKind::Nyquist => "nyquist",
            ShiftKind::Pcs => "pcs",
            ShiftKind::Rcs => "rcs",
            ShiftKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// Ordered set of distinct circulant shifts `(r[m], c[m])` on an `N x N` grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftSet {
    n: usize,
    shifts: Vec<(usize, usize)>,
    kind: ShiftKind,
}

impl ShiftSet {
    pub fn new(n: usize, shifts: Vec<(usize, usize)>, kind: ShiftKind) -> Result<Self> {
        if shifts.is_empty() {
            return Err(Error::config("shifts", "shift set must be nonempty"));
        }
        let mut seen = vec![false; n * n];
        for &(r, c) in &shifts {
            if r >= n || c >= n {
                return Err(Error::config("shifts", format!("shift ({r}, {c}) outside [{n}] x [{n}]")));
            }
            if std::mem::replace(&mut seen[r * n + c], true) {
                return Err(Error::config("shifts", format!("duplicate shift ({r}, {c})")));
            }
        }
        Ok(Self { n, shifts, kind })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shifts(&self) -> &[(usize, usize)] {
        &self.shifts
    }

    pub fn kind(&self) -> ShiftKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }

    /// Binary indicator `N_Omega`.
    pub fn indicator(&self) -> ComplexGrid {
        let mut g = ComplexGrid::zeros(self.n, self.n);
        for &s in &self.shifts {
            g[s] = Complex64::new(1.0, 0.0);
        }
        g
    }
}

/// `Omega = [rho_e] x [rho_a]`, row-major.
pub fn nyquist_shifts(spec: &SectorSpec) -> ShiftSet {
    let shifts = (0..spec.rho_e())
        .flat_map(|r| (0..spec.rho_a()).map(move |c| (r, c)))
        .collect();
    ShiftSet::new(spec.n(), shifts, ShiftKind::Nyquist).expect("block fits in the grid")
}

/// `m` shifts drawn without replacement from the Nyquist block.
pub fn pcs_shifts<R: Rng + ?Sized>(spec: &SectorSpec, m: usize, rng: &mut R) -> Result<ShiftSet> {
    let total = spec.size();
    if m == 0 || m > total {
        return Err(Error::config("m", format!("{m} outside 1..={total} for PCS")));
    }
    let ra = spec.rho_a();
    let shifts = sample(rng, total, m).into_iter().map(|i| (i / ra, i % ra)).collect();
    ShiftSet::new(spec.n(), shifts, ShiftKind::Pcs)
}

/// `m` shifts drawn without replacement from `[N] x [N]`.
pub fn rcs_shifts<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<ShiftSet> {
    let total = n * n;
    if m == 0 || m > total {
        return Err(Error::config("m", format!("{m} outside 1..={total} for RCS")));
    }
    let shifts = sample(rng, total, m).into_iter().map(|i| (i / n, i % n)).collect();
    ShiftSet::new(n, shifts, ShiftKind::Rcs)
}

/// Point spread function `(N / M) U^* N_Omega U^*`.
pub fn psf(set: &ShiftSet) -> ComplexGrid {
    let scale = set.n() as f64 / set.len() as f64;
    idft2(&set.indicator()).expect("square").scale_real(scale)
}

/// The comb lattice `{(n N_e, m N_a)} \ {(0, 0)}` of in-sector index differences.
pub fn coherence_lattice(spec: &SectorSpec) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(spec.size().saturating_sub(1));
    for i in 0..spec.rho_e() {
        for j in 0..spec.rho_a() {
            if (i, j) != (0, 0) {
                out.push((i * spec.n_e(), j * spec.n_a()));
            }
        }
    }
    out
}

/// `mu_0 = max |PSF|` over the comb lattice; zero when the lattice is empty.
pub fn in_sector_coherence(set: &ShiftSet, spec: &SectorSpec) -> f64 {
    let p = psf(set);
    coherence_lattice(spec)
        .into_iter()
        .map(|c| p[c].norm())
        .fold(0.0, f64::max)
}

/// Largest normalized off-diagonal Gram entry `|a_i^H a_j| / (|a_i| |a_j|)`.
pub fn gram_coherence(a: &DMatrix<Complex64>) -> f64 {
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    let mut mu = 0.0f64;
    for i in 0..a.ncols() {
        for j in (i + 1)..a.ncols() {
            let g = a.column(i).dotc(&a.column(j)).norm();
            mu = mu.max(g / (norms[i] * norms[j]));
        }
    }
    mu
}

/// Measurement matrix restricted to the sector: `M x rho_e rho_a` with
/// `A(m, i) = exp(-j 2 pi (r_m p_i + c_m q_i) / N) z_i / N`, columns ordered
/// by the column-major index `q_i N + p_i`.
pub fn effective_matrix(set: &ShiftSet, cells: &[(usize, usize)], z_sub: &[Complex64]) -> DMatrix<Complex64> {
    let n = set.n();
    let nf = n as f64;
    DMatrix::from_fn(set.len(), cells.len(), |m, i| {
        let (r, c) = set.shifts()[m];
        let (p, q) = cells[i];
        let k = ((r * p + c * q) % n) as f64;
        Complex64::from_polar(1.0 / nf, -2.0 * PI * k / nf) * z_sub[i]
    })
}

/// One in-sector CS problem `y = A x + v`.
#[derive(Debug, Clone)]
pub struct CsInstance {
    pub y: DVector<Complex64>,
    pub a_eff: DMatrix<Complex64>,
    pub z_sub: Vec<Complex64>,
    /// Column-major indices `q N + p` of the sector cells, ascending.
    pub l_indices: Vec<usize>,
    /// `(p, q)` cell of each column.
    pub cells: Vec<(usize, usize)>,
    /// Standard deviation of the total noise on each measurement.
    pub sigma: f64,
    pub sector: SectorSpec,
}

impl CsInstance {
    pub fn m(&self) -> usize {
        self.y.len()
    }

    /// Column norms `d_i`.
    pub fn column_norms(&self) -> Vec<f64> {
        self.a_eff.column_iter().map(|c| c.norm()).collect()
    }

    /// In-sector beamspace entries of `X` in column order.
    pub fn restrict(&self, x: &ComplexGrid) -> DVector<Complex64> {
        DVector::from_iterator(self.cells.len(), self.cells.iter().map(|&c| x[c]))
    }
}

/// Noise model for CS acquisition.
///
/// Each channel tap contributes independent `CN(0, sigma^2 / spreading)` noise,
/// modeling a correlator with `spreading` chips per measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Acquisition {
    pub sigma: f64,
    pub spreading: f64,
}

impl Acquisition {
    pub fn noiseless() -> Self {
        Self {
            sigma: 0.0,
            spreading: 1.0,
        }
    }

    pub fn narrowband(sigma: f64) -> Self {
        Self { sigma, spreading: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::config("sigma", format!("noise std {} must be non-negative", self.sigma)));
        }
        if !(self.spreading >= 1.0) {
            return Err(Error::config("spreading", "spreading gain must be >= 1"));
        }
        Ok(())
    }
}

/// Acquires the DC-subcarrier measurements `y[m] = sum_l (H[l] * FC(P_o))(r_m, c_m) + v[m]`.
pub fn assemble_cs<R: Rng + ?Sized>(
    channel: &ChannelRealization,
    awm: &Awm,
    set: &ShiftSet,
    acq: Acquisition,
    rng: &mut R,
) -> Result<CsInstance> {
    acq.validate()?;
    let spec = *awm.sector();
    if channel.n() != spec.n() || set.n() != spec.n() {
        return Err(Error::Dimension(format!(
            "channel N = {}, AWM N = {}, shift grid N = {}",
            channel.n(),
            spec.n(),
            set.n()
        )));
    }
    let conv = circconv2(&channel.h_sum(), &flip_conjugate(awm.grid()))?;
    let tap_var = acq.sigma * acq.sigma / acq.spreading;
    let taps = channel.num_taps();
    let y = DVector::from_iterator(
        set.len(),
        set.shifts().iter().map(|&s| {
            let mut v = conv[s];
            if tap_var > 0.0 {
                for _ in 0..taps {
                    v += complex_normal(rng, tap_var);
                }
            }
            v
        }),
    );

    let mask = awm.spectral_mask();
    let vi = spec.vec_indices();
    let l_indices: Vec<usize> = vi.iter().map(|&(l, _)| l).collect();
    let cells: Vec<(usize, usize)> = vi.iter().map(|&(_, c)| c).collect();
    let z_sub: Vec<Complex64> = cells.iter().map(|&c| mask.grid()[c]).collect();
    let a_eff = effective_matrix(set, &cells, &z_sub);
    Ok(CsInstance {
        y,
        a_eff,
        z_sub,
        l_indices,
        cells,
        sigma: (tap_var * taps as f64).sqrt(),
        sector: spec,
    })
}

/// A unit-norm phase-only AWM whose mask has modulus one everywhere, built
/// from Zadoff-Chu sequences. Used as the wide-beam reference.
pub fn flat_mask_awm(n: usize) -> ComplexGrid {
    let z = crate::codebook::optimize::zadoff_chu(n);
    ComplexGrid::from_fn(n, n, |i, j| z[i] * z[j] / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{beamspace, GridMode, Ray};
    use crate::codebook::{build_codebook, spectral_mask, PecanConfig, WeightMode};
    use crate::tensor::circshift2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn shift_set_validation() {
        assert!(ShiftSet::new(4, vec![], ShiftKind::Custom).is_err());
        assert!(ShiftSet::new(4, vec![(4, 0)], ShiftKind::Custom).is_err());
        assert!(ShiftSet::new(4, vec![(1, 2), (1, 2)], ShiftKind::Custom).is_err());
        let s = ShiftSet::new(4, vec![(1, 2), (3, 0)], ShiftKind::Custom).unwrap();
        assert_eq!(s.indicator().frobenius_norm_sqr(), 2.0);
    }

    #[test]
    fn nyquist_has_zero_coherence() {
        let spec = SectorSpec::new(32, 4, 4, 1, 2).unwrap();
        let set = nyquist_shifts(&spec);
        assert_eq!(set.len(), 64);
        assert!(in_sector_coherence(&set, &spec) < 1e-12);
    }

    #[test]
    fn shifted_nyquist_block_also_has_zero_coherence() {
        let spec = SectorSpec::new(16, 2, 4, 0, 0).unwrap();
        for (r0, c0) in [(1, 0), (5, 11), (15, 15)] {
            let shifts = nyquist_shifts(&spec)
                .shifts()
                .iter()
                .map(|&(r, c)| ((r + r0) % 16, (c + c0) % 16))
                .collect();
            let set = ShiftSet::new(16, shifts, ShiftKind::Custom).unwrap();
            assert!(in_sector_coherence(&set, &spec) < 1e-12);
        }
    }

    #[test]
    fn full_grid_psf_is_a_delta() {
        let spec = SectorSpec::new(8, 1, 1, 0, 0).unwrap();
        let set = nyquist_shifts(&spec);
        assert_eq!(set.len(), 64);
        let p = psf(&set);
        for i in 0..8 {
            for j in 0..8 {
                let expect = if (i, j) == (0, 0) { 1.0 } else { 0.0 };
                assert!((p[(i, j)].norm() - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_shift_psf_is_flat_and_fully_coherent() {
        let set = ShiftSet::new(4, vec![(0, 0)], ShiftKind::Custom).unwrap();
        let p = psf(&set);
        assert!(p.data().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        let spec = SectorSpec::new(4, 2, 2, 0, 0).unwrap();
        assert!((in_sector_coherence(&set, &spec) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_sector_has_empty_lattice() {
        let spec = SectorSpec::new(8, 8, 8, 2, 3).unwrap();
        assert!(coherence_lattice(&spec).is_empty());
        let set = ShiftSet::new(8, vec![(0, 0)], ShiftKind::Custom).unwrap();
        assert_eq!(in_sector_coherence(&set, &spec), 0.0);
    }

    #[test]
    fn pcs_and_rcs_sampling() {
        let spec = SectorSpec::new(16, 4, 4, 0, 0).unwrap();
        let s = pcs_shifts(&spec, 5, &mut rng(1)).unwrap();
        assert_eq!(s.len(), 5);
        assert!(s.shifts().iter().all(|&(r, c)| r < 4 && c < 4));
        let mut full = pcs_shifts(&spec, 16, &mut rng(2)).unwrap().shifts().to_vec();
        full.sort();
        assert_eq!(full, nyquist_shifts(&spec).shifts());
        assert!(pcs_shifts(&spec, 17, &mut rng(0)).is_err());
        assert!(pcs_shifts(&spec, 0, &mut rng(0)).is_err());

        let r = rcs_shifts(8, 64, &mut rng(3)).unwrap();
        assert_eq!(r.len(), 64);
        let sp = SectorSpec::new(8, 2, 2, 0, 0).unwrap();
        assert!(in_sector_coherence(&r, &sp) < 1e-12);
        assert!(rcs_shifts(8, 65, &mut rng(0)).is_err());
    }

    #[test]
    fn psf_coherence_matches_gram_for_any_mask() {
        let cb = build_codebook(16, 2, 2, 2, WeightMode::Random, &PecanConfig::default()).unwrap();
        for seed in 0..10 {
            let awm = cb.awm(seed as usize % 4);
            let spec = *awm.sector();
            let set = pcs_shifts(&spec, 12, &mut rng(seed)).unwrap();
            let z: Vec<Complex64> = awm.spectral_mask().in_sector_vector();
            let cells: Vec<_> = spec.vec_indices().into_iter().map(|x| x.1).collect();
            let a = effective_matrix(&set, &cells, &z);
            assert!((gram_coherence(&a) - in_sector_coherence(&set, &spec)).abs() < 1e-10);

            let ones = vec![Complex64::new(1.0, 0.0); cells.len()];
            let a = effective_matrix(&set, &cells, &ones);
            assert!((gram_coherence(&a) - in_sector_coherence(&set, &spec)).abs() < 1e-10);
        }
    }

    fn in_sector_channel(spec: &SectorSpec, k: usize, seed: u64) -> ChannelRealization {
        let mut r = rng(seed);
        let cells = spec.cells();
        let picks = sample(&mut r, cells.len(), k).into_vec();
        let rays = picks
            .into_iter()
            .map(|i| {
                let (p, q) = cells[i];
                Ray::on_grid(complex_normal(&mut r, 1.0), p, q, spec.n(), 0)
            })
            .collect();
        ChannelRealization::from_rays(rays, spec.n(), 1, GridMode::OnGrid).unwrap()
    }

    #[test]
    fn measurements_match_inner_products_and_the_model() {
        let cb = build_codebook(8, 2, 2, 1, WeightMode::Optimized, &PecanConfig::default()).unwrap();
        let awm = cb.awm(3);
        let spec = *awm.sector();
        let ch = in_sector_channel(&spec, 3, 4);
        let set = rcs_shifts(8, 10, &mut rng(5)).unwrap();
        let inst = assemble_cs(&ch, awm, &set, Acquisition::noiseless(), &mut rng(6)).unwrap();
        let h = ch.h_sum();
        for (m, &(r, c)) in set.shifts().iter().enumerate() {
            let direct = h.inner(&circshift2(awm.grid(), r as i64, c as i64)).unwrap();
            assert!((inst.y[m] - direct).norm() < 1e-9);
        }
        let x = beamspace(&h).unwrap();
        let model = &inst.a_eff * inst.restrict(&x);
        assert!((model - &inst.y).norm() < 1e-9);
    }

    #[test]
    fn single_ray_gives_constant_magnitude() {
        let cb = build_codebook(16, 2, 2, 2, WeightMode::Optimized, &PecanConfig::default()).unwrap();
        let awm = cb.awm(1);
        let spec = *awm.sector();
        let (p, q) = spec.cell(3, 5);
        let gain = Complex64::new(0.6, -0.3);
        let ch = ChannelRealization::from_rays(vec![Ray::on_grid(gain, p, q, 16, 0)], 16, 1, GridMode::OnGrid).unwrap();
        let set = nyquist_shifts(&spec);
        let inst = assemble_cs(&ch, awm, &set, Acquisition::noiseless(), &mut rng(0)).unwrap();
        let x = beamspace(&ch.h_sum()).unwrap()[(p, q)];
        let z = awm.spectral_mask().grid()[(p, q)];
        for (m, &(r, c)) in set.shifts().iter().enumerate() {
            let ph = -2.0 * PI * ((r * p + c * q) % 16) as f64 / 16.0;
            let expect = x * z * Complex64::from_polar(1.0 / 16.0, ph);
            assert!((inst.y[m] - expect).norm() < 1e-10);
        }
    }

    #[test]
    fn column_norm_law() {
        let cb = build_codebook(16, 4, 2, 2, WeightMode::Random, &PecanConfig::default()).unwrap();
        let ch = in_sector_channel(cb.awm(0).sector(), 1, 0);
        for awm in cb.awms() {
            let set = pcs_shifts(awm.sector(), 7, &mut rng(awm.sector().index() as u64)).unwrap();
            let inst = assemble_cs(&ch, awm, &set, Acquisition::noiseless(), &mut rng(0)).unwrap();
            let d = inst.column_norms();
            let m = inst.m() as f64;
            for (di, zi) in d.iter().zip(&inst.z_sub) {
                assert!((di - m.sqrt() / 16.0 * zi.norm()).abs() < 1e-10);
            }
            // the mask carries energy N^2 over the sector, so sum d_i^2 = M
            let total: f64 = d.iter().map(|x| x * x).sum();
            assert!((total - m).abs() < 1e-9);
        }
    }

    #[test]
    fn noise_level_accounts_for_taps_and_spreading() {
        let cb = build_codebook(8, 2, 2, 1, WeightMode::Optimized, &PecanConfig::default()).unwrap();
        let ch = ChannelRealization::from_rays(vec![], 8, 4, GridMode::OnGrid).unwrap();
        let set = nyquist_shifts(cb.awm(0).sector());
        let acq = Acquisition { sigma: 2.0, spreading: 16.0 };
        let inst = assemble_cs(&ch, cb.awm(0), &set, acq, &mut rng(0)).unwrap();
        assert!((inst.sigma - 1.0).abs() < 1e-12);
        let bad = Acquisition { sigma: -1.0, spreading: 1.0 };
        assert!(assemble_cs(&ch, cb.awm(0), &set, bad, &mut rng(0)).is_err());
    }

    #[test]
    fn flat_reference_has_unit_mask() {
        for n in [8, 16, 32] {
            let p = flat_mask_awm(n);
            assert!((p.frobenius_norm() - 1.0).abs() < 1e-12);
            let z = spectral_mask(&p).unwrap();
            assert!(z.data().iter().all(|v| (v.norm() - 1.0).abs() < 1e-9));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn lemma_nyquist_zero_coherence(log_n in 1u32..=6, a in 0u32..=6, b in 0u32..=6, ke in 0usize..64, ka in 0usize..64) {
                let n = 1usize << log_n;
                let ne = 1usize << a.min(log_n);
                let na = 1usize << b.min(log_n);
                let spec = SectorSpec::new(n, ne, na, ke % ne, ka % na).unwrap();
                prop_assert!(in_sector_coherence(&nyquist_shifts(&spec), &spec) < 1e-12);
            }

            #[test]
            fn convolution_path_equals_masked_dft(seed in 0u64..500, m in 1usize..30) {
                let cb = build_codebook(8, 2, 4, 2, WeightMode::Random, &PecanConfig { seed, ..PecanConfig::default() }).unwrap();
                let awm = cb.awm((seed % 8) as usize);
                let mut r = rng(seed);
                let rays = (0..3).map(|_| Ray {
                    gain: complex_normal(&mut r, 1.0),
                    omega_e: r.random_range(0.0..2.0 * PI),
                    omega_a: r.random_range(0.0..2.0 * PI),
                    tap: 0,
                }).collect();
                let ch = ChannelRealization::from_rays(rays, 8, 1, GridMode::OffGrid).unwrap();
                let set = rcs_shifts(8, m, &mut r).unwrap();
                let inst = assemble_cs(&ch, awm, &set, Acquisition::noiseless(), &mut r).unwrap();
                let x = beamspace(&ch.h_sum()).unwrap();
                let masked = x.hadamard(awm.spectral_mask().grid()).unwrap();
                let full = crate::tensor::dft2(&masked).unwrap();
                for (k, &s) in set.shifts().iter().enumerate() {
                    prop_assert!((inst.y[k] - full[s]).norm() < 1e-9);
                }
            }
        }
    }
}
