//! Beamformer synthesis from a channel estimate and link-quality metrics.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::quantize::{project, Resolution};
use crate::tensor::ComplexGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    pub grid: ComplexGrid,
    /// Set when the estimate was all zeros and a flat-phase beam was used.
    pub flat_fallback: bool,
}

/// `F_ij = Q(exp(j arg H_ij)) / N`, which maximizes `|<F, H>|` over
/// unit-modulus beams before quantization.
pub fn beamformer_from_estimate(h_hat: &ComplexGrid, resolution: Resolution) -> Result<Beamformer> {
    let n = h_hat.check_square()?;
    let mag = 1.0 / n as f64;
    let flat = h_hat.data().iter().all(|z| z.norm() == 0.0);
    let grid = if flat {
        ComplexGrid::from_fn(n, n, |_, _| Complex64::new(mag, 0.0))
    } else {
        h_hat.map(|z| project(z, resolution, mag))
    };
    Ok(Beamformer {
        grid,
        flat_fallback: flat,
    })
}

/// `h_eff[l] = <H[l], F>`.
pub fn effective_channel(channel: &ChannelRealization, f: &ComplexGrid) -> Result<Vec<Complex64>> {
    channel.taps().iter().map(|t| t.inner(f)).collect()
}

/// Waterfilling power allocation over channel gains (already divided by the
/// noise power). Returns per-channel powers summing to `total_power`.
pub fn waterfill(gains: &[f64], total_power: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > 0.0).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    let mut powers = vec![0.0; gains.len()];
    if order.is_empty() {
        return powers;
    }
    // grow the active set while the water level stays above the next floor
    let mut inv_sum = 0.0;
    let mut level = 0.0;
    let mut active = 0;
    for (j, &i) in order.iter().enumerate() {
        let cand_sum = inv_sum + 1.0 / gains[i];
        let cand_level = (total_power + cand_sum) / (j + 1) as f64;
        if cand_level <= 1.0 / gains[i] {
            break;
        }
        inv_sum = cand_sum;
        level = cand_level;
        active = j + 1;
    }
    for &i in &order[..active] {
        powers[i] = (level - 1.0 / gains[i]).max(0.0);
    }
    powers
}

/// Subcarrier SNRs `|DFT_{n_fft}(h_eff)(k)|^2 / sigma^2` of the zero-padded response.
pub fn subcarrier_gains(h_eff: &[Complex64], sigma: f64, n_fft: usize) -> Result<Vec<f64>> {
    if n_fft < h_eff.len() || n_fft == 0 {
        return Err(Error::config("n_fft", format!("{n_fft} is shorter than {} taps", h_eff.len())));
    }
    if !(sigma > 0.0) {
        return Err(Error::config("sigma", "noise std must be positive for a rate"));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    buf[..h_eff.len()].copy_from_slice(h_eff);
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);
    let nv = sigma * sigma;
    Ok(buf.iter().map(|z| z.norm_sqr() / nv).collect())
}

/// `(1 / n_fft) sum_k log2(1 + p_k g_k)` with waterfilling powers.
pub fn waterfilling_rate(h_eff: &[Complex64], sigma: f64, n_fft: usize, total_power: f64) -> Result<f64> {
    if !(total_power > 0.0) {
        return Err(Error::config("total_power", "must be positive"));
    }
    let gains = subcarrier_gains(h_eff, sigma, n_fft)?;
    Ok(rate_from_gains(&gains, total_power))
}

pub fn rate_from_gains(gains: &[f64], total_power: f64) -> f64 {
    let powers = waterfill(gains, total_power);
    let sum: f64 = gains.iter().zip(&powers).map(|(g, p)| (1.0 + p * g).log2()).sum();
    sum / gains.len() as f64
}

/// `||H - H_hat||_F^2 / ||H||_F^2`.
pub fn nmse(truth: &ComplexGrid, estimate: &ComplexGrid) -> Result<f64> {
    let err = truth.sub(estimate)?.frobenius_norm_sqr();
    Ok(err / truth.frobenius_norm_sqr())
}

/// Batch NMSE as a ratio of summed errors to summed truth energy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NmseAccumulator {
    pub error: f64,
    pub energy: f64,
    pub count: usize,
    /// Trials skipped because the masked truth had zero energy.
    pub excluded: usize,
}

impl NmseAccumulator {
    pub fn push(&mut self, truth: &ComplexGrid, estimate: &ComplexGrid) -> Result<()> {
        let energy = truth.frobenius_norm_sqr();
        if energy == 0.0 {
            self.excluded += 1;
            return Ok(());
        }
        self.error += truth.sub(estimate)?.frobenius_norm_sqr();
        self.energy += energy;
        self.count += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &NmseAccumulator) {
        self.error += other.error;
        self.energy += other.energy;
        self.count += other.count;
        self.excluded += other.excluded;
    }

    /// `NaN` when no trial contributed.
    pub fn value(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.error / self.energy
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub nmse_in_sector: f64,
    pub rate_bits_per_s_hz: f64,
    pub best_sector: usize,
    pub mu0: f64,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{GridMode, Ray};
    use crate::quantize::phase;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(n: usize, seed: u64) -> ComplexGrid {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        ComplexGrid::from_fn(n, n, |_, _| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
    }

    #[test]
    fn real_positive_estimate_gives_flat_beam() {
        let h = ComplexGrid::from_fn(4, 4, |i, j| Complex64::new(1.0 + (i * j) as f64, 0.0));
        let f = beamformer_from_estimate(&h, Resolution::Bits(1)).unwrap();
        assert!(f.grid.data().iter().all(|z| (z - Complex64::new(0.25, 0.0)).norm() < 1e-15));
        let sum: f64 = h.data().iter().map(|z| z.re).sum();
        assert!((h.inner(&f.grid).unwrap().re - sum / 4.0).abs() < 1e-12);
    }

    #[test]
    fn unquantized_beam_attains_the_dual_norm() {
        let h = random_grid(8, 1);
        let f = beamformer_from_estimate(&h, Resolution::Infinite).unwrap();
        let gain = h.inner(&f.grid).unwrap().norm();
        let l1: f64 = h.data().iter().map(|z| z.norm()).sum::<f64>() / 8.0;
        assert!((gain - l1).abs() < 1e-12);
        let mut r = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let g = ComplexGrid::from_fn(8, 8, |_, _| Complex64::from_polar(0.125, r.random_range(0.0..6.3)));
            assert!(h.inner(&g).unwrap().norm() <= gain + 1e-12);
        }
    }

    #[test]
    fn one_bit_beam_matches_sign_pattern() {
        let n = 8;
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let u: Vec<f64> = (0..n).map(|_| if r.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let v: Vec<f64> = (0..n).map(|_| if r.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let h = ComplexGrid::from_fn(n, n, |i, j| Complex64::new(u[i] * v[j], 0.0));
        let f = beamformer_from_estimate(&h, Resolution::Bits(1)).unwrap();
        let g = (h.inner(&f.grid).unwrap() * n as f64).norm_sqr();
        assert!((g - (n * n * n * n) as f64).abs() < 1e-6);
    }

    #[test]
    fn zero_estimate_is_flagged() {
        let f = beamformer_from_estimate(&ComplexGrid::zeros(4, 4), Resolution::Bits(2)).unwrap();
        assert!(f.flat_fallback);
        assert!((f.grid.frobenius_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantization_loss_is_bounded() {
        for q in 1..=4u32 {
            for seed in 0..10 {
                let h = random_grid(8, seed);
                let ideal = beamformer_from_estimate(&h, Resolution::Infinite).unwrap();
                let quant = beamformer_from_estimate(&h, Resolution::Bits(q)).unwrap();
                let a = h.inner(&quant.grid).unwrap().norm();
                let b = h.inner(&ideal.grid).unwrap().norm();
                let bound = (std::f64::consts::PI / (1u32 << q) as f64).cos() * b;
                assert!(a >= bound - 1e-12, "q={q} seed={seed}");
                for z in quant.grid.data() {
                    let k = phase(*z) * (1u32 << q) as f64 / (2.0 * std::f64::consts::PI);
                    assert!((k - k.round()).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn effective_channel_is_tapwise_inner_product() {
        let rays = vec![
            Ray::on_grid(Complex64::new(1.0, 0.0), 0, 0, 4, 0),
            Ray::on_grid(Complex64::new(0.0, 0.5), 1, 2, 4, 2),
        ];
        let ch = ChannelRealization::from_rays(rays, 4, 3, GridMode::OnGrid).unwrap();
        let f = ComplexGrid::from_fn(4, 4, |_, _| Complex64::new(0.25, 0.0));
        let h = effective_channel(&ch, &f).unwrap();
        assert_eq!(h.len(), 3);
        assert!((h[0] - Complex64::new(4.0, 0.0)).norm() < 1e-12);
        assert!(h[1].norm() < 1e-12);
        let lhs: f64 = h.iter().map(|z| z.norm_sqr()).sum();
        let rhs: f64 = ch.taps().iter().map(|t| t.frobenius_norm_sqr()).sum();
        assert!(lhs <= rhs * f.frobenius_norm_sqr() + 1e-12);
    }

    #[test]
    fn flat_channel_allocates_equally() {
        let h = [Complex64::new(0.5, 0.0)];
        let r = waterfilling_rate(&h, 0.1, 64, 1.0).unwrap();
        let g: f64 = 25.0;
        assert!((r - (1.0 + g / 64.0).log2()).abs() < 1e-12);
    }

    #[test]
    fn weak_power_goes_to_the_best_carrier() {
        let p = waterfill(&[10.0, 1.0, 0.5], 0.01);
        assert!((p[0] - 0.01).abs() < 1e-15);
        assert_eq!(&p[1..], &[0.0, 0.0]);
    }

    #[test]
    fn waterfilling_conserves_power_and_beats_uniform() {
        let mut r = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let gains: Vec<f64> = (0..16).map(|_| r.random_range(0.01..20.0)).collect();
            let total = r.random_range(0.1..10.0);
            let p = waterfill(&gains, total);
            assert!((p.iter().sum::<f64>() - total).abs() < 1e-9);
            let wf: f64 = gains.iter().zip(&p).map(|(g, p)| (1.0 + g * p).log2()).sum();
            let uni: f64 = gains.iter().map(|g| (1.0 + g * total / 16.0).log2()).sum();
            assert!(wf >= uni - 1e-12);
        }
    }

    #[test]
    fn rate_is_monotone_in_power_and_noise() {
        let h = [Complex64::new(1.0, 0.2), Complex64::new(-0.3, 0.4), Complex64::new(0.1, 0.0)];
        let mut last = 0.0;
        for p in [0.1, 0.5, 1.0, 4.0] {
            let r = waterfilling_rate(&h, 0.5, 64, p).unwrap();
            assert!(r >= last);
            last = r;
        }
        let mut last = f64::INFINITY;
        for s in [0.1, 0.3, 1.0, 3.0] {
            let r = waterfilling_rate(&h, s, 64, 1.0).unwrap();
            assert!(r <= last);
            last = r;
        }
        assert_eq!(waterfilling_rate(&[Complex64::new(0.0, 0.0)], 1.0, 8, 1.0).unwrap(), 0.0);
        assert!(waterfilling_rate(&h, 1.0, 2, 1.0).is_err());
    }

    #[test]
    fn nmse_cases() {
        let h = random_grid(8, 5);
        assert_eq!(nmse(&h, &h).unwrap(), 0.0);
        assert!((nmse(&h, &ComplexGrid::zeros(8, 8)).unwrap() - 1.0).abs() < 1e-15);

        // orthogonal perturbation of relative norm 0.1
        let mut d = random_grid(8, 6);
        let proj = d.inner(&h).unwrap() / h.frobenius_norm_sqr();
        d = d.sub(&h.scale(proj)).unwrap();
        d = d.scale_real(0.1 * h.frobenius_norm() / d.frobenius_norm());
        assert!((nmse(&h, &h.add(&d).unwrap()).unwrap() - 0.01).abs() < 1e-12);

        let a = Complex64::new(-2.0, 3.0);
        let e = random_grid(8, 7);
        assert!((nmse(&h.scale(a), &e.scale(a)).unwrap() - nmse(&h, &e).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn accumulator_excludes_empty_truth() {
        let mut acc = NmseAccumulator::default();
        acc.push(&ComplexGrid::zeros(4, 4), &random_grid(4, 0)).unwrap();
        assert!(acc.value().is_nan());
        let h = random_grid(4, 1);
        acc.push(&h, &ComplexGrid::zeros(4, 4)).unwrap();
        assert_eq!(acc.excluded, 1);
        assert!((acc.value() - 1.0).abs() < 1e-15);
    }
}
