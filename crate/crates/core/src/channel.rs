//! Sparse narrowband and `L`-tap wideband MISO channels for an `N x N`
//! uniform planar array, and their beamspace representation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::complex_normal;
use crate::tensor::{idft2, ComplexGrid};

/// One propagation ray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub gain: Complex64,
    /// Elevation beamspace angle in radians, `[0, 2 pi)`.
    pub omega_e: f64,
    /// Azimuth beamspace angle in radians, `[0, 2 pi)`.
    pub omega_a: f64,
    pub tap: usize,
}

impl Ray {
    /// A ray that lands exactly on beamspace cell `(p, q)` of an `n x n` grid.
    ///
    /// With the `exp(-j...)` DFT convention, `a_N(omega)` maps to cell
    /// `<-omega N / 2 pi>_N`, so the angle is `2 pi <-p>_N / N`.
    pub fn on_grid(gain: Complex64, p: usize, q: usize, n: usize, tap: usize) -> Self {
        Ray {
            gain,
            omega_e: grid_angle(p, n),
            omega_a: grid_angle(q, n),
            tap,
        }
    }

    /// Ray from physical departure angles (radians).
    pub fn from_departure_angles(gain: Complex64, theta_e: f64, theta_a: f64, tap: usize) -> Self {
        let (omega_e, omega_a) = angles_to_beamspace(theta_e, theta_a);
        Ray {
            gain,
            omega_e,
            omega_a,
            tap,
        }
    }
}

fn grid_angle(index: usize, n: usize) -> f64 {
    2.0 * PI * ((n - index % n) % n) as f64 / n as f64
}

/// `(omega_e, omega_a) = (pi sin(theta_e) cos(theta_a), pi sin(theta_e) sin(theta_a))`,
/// wrapped to `[0, 2 pi)`.
pub fn angles_to_beamspace(theta_e: f64, theta_a: f64) -> (f64, f64) {
    let we = PI * theta_e.sin() * theta_a.cos();
    let wa = PI * theta_e.sin() * theta_a.sin();
    (we.rem_euclid(2.0 * PI), wa.rem_euclid(2.0 * PI))
}

/// Nearest beamspace cell index for a beamspace angle.
pub fn beamspace_index(omega: f64, n: usize) -> usize {
    let k = (-omega * n as f64 / (2.0 * PI)).round() as i64;
    k.rem_euclid(n as i64) as usize
}

/// `[1, e^{j w}, ..., e^{j (n-1) w}]`.
pub fn vandermonde(omega: f64, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| Complex64::from_polar(1.0, omega * k as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridMode {
    OnGrid,
    OffGrid,
}

/// A synthesized channel: `L` antenna-domain taps plus the rays that built them.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    n: usize,
    taps: Vec<ComplexGrid>,
    rays: Vec<Ray>,
    mode: GridMode,
    seed: Option<u64>,
}

/// JSON replay record of a channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub n: usize,
    pub taps: usize,
    pub mode: GridMode,
    pub seed: Option<u64>,
    pub rays: Vec<Ray>,
}

impl ChannelRealization {
    /// `H[l] = sum_{rays with tap l} beta a_N(omega_e) a_N(omega_a)^T`.
    pub fn from_rays(rays: Vec<Ray>, n: usize, taps: usize, mode: GridMode) -> Result<Self> {
        if n == 0 || taps == 0 {
            return Err(Error::config("n/taps", "array size and tap count must be positive"));
        }
        let mut grids = vec![ComplexGrid::zeros(n, n); taps];
        for (idx, ray) in rays.iter().enumerate() {
            if ray.tap >= taps {
                return Err(Error::config(
                    "tap",
                    format!("ray {idx} has tap {} but the channel has {taps} taps", ray.tap),
                ));
            }
            let ve = vandermonde(ray.omega_e, n);
            let va = vandermonde(ray.omega_a, n);
            let h = &mut grids[ray.tap];
            for i in 0..n {
                let row = ray.gain * ve[i];
                for j in 0..n {
                    h[(i, j)] += row * va[j];
                }
            }
        }
        Ok(Self {
            n,
            taps: grids,
            rays,
            mode,
            seed: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn taps(&self) -> &[ComplexGrid] {
        &self.taps
    }

    pub fn num_taps(&self) -> usize {
        self.taps.len()
    }

    pub fn rays(&self) -> &[Ray] {
        &self.rays
    }

    pub fn mode(&self) -> GridMode {
        self.mode
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// DC-subcarrier channel `H_sum = sum_l H[l]`.
    pub fn h_sum(&self) -> ComplexGrid {
        let mut acc = self.taps[0].clone();
        for t in &self.taps[1..] {
            acc.add_assign(t).expect("taps share a shape");
        }
        acc
    }

    pub fn to_record(&self) -> ChannelRecord {
        ChannelRecord {
            n: self.n,
            taps: self.taps.len(),
            mode: self.mode,
            seed: self.seed,
            rays: self.rays.clone(),
        }
    }

    pub fn from_record(record: &ChannelRecord) -> Result<Self> {
        let mut ch = Self::from_rays(record.rays.clone(), record.n, record.taps, record.mode)?;
        ch.seed = record.seed;
        Ok(ch)
    }
}

/// Beamspace `X = U_N^* H U_N^*`, so that `H = U_N X U_N`.
pub fn beamspace(h: &ComplexGrid) -> Result<ComplexGrid> {
    idft2(h)
}

/// Random sparse channel generator.
///
/// Ray count is uniform on `[rays_min, rays_max]`, gains are `CN(0, 1/k)`,
/// and each ray's tap index is uniform on `[taps]`. On-grid angles are
/// distinct grid cells; off-grid angles are uniform on `[0, 2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomChannel {
    pub n: usize,
    pub taps: usize,
    pub rays_min: usize,
    pub rays_max: usize,
    pub mode: GridMode,
}

impl RandomChannel {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n", "must be positive"));
        }
        if self.taps == 0 {
            return Err(Error::config("l_taps", "must be positive"));
        }
        if self.rays_min == 0 || self.rays_min > self.rays_max {
            return Err(Error::config(
                "rays_min/rays_max",
                format!("need 1 <= rays_min <= rays_max, got {}..{}", self.rays_min, self.rays_max),
            ));
        }
        if self.mode == GridMode::OnGrid && self.rays_max > self.n * self.n {
            return Err(Error::config("rays_max", "exceeds the number of grid cells"));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ChannelRealization> {
        self.validate()?;
        let k = rng.random_range(self.rays_min..=self.rays_max);
        let var = 1.0 / k as f64;
        let n = self.n;
        let rays = match self.mode {
            GridMode::OnGrid => {
                let cells = sample(rng, n * n, k).into_vec();
                cells
                    .into_iter()
                    .map(|cell| {
                        let gain = complex_normal(rng, var);
                        let tap = rng.random_range(0..self.taps);
                        Ray::on_grid(gain, cell / n, cell % n, n, tap)
                    })
                    .collect()
            }
            GridMode::OffGrid => (0..k)
                .map(|_| {
                    let gain = complex_normal(rng, var);
                    let omega_e = rng.random_range(0.0..2.0 * PI);
                    let omega_a = rng.random_range(0.0..2.0 * PI);
                    let tap = rng.random_range(0..self.taps);
                    Ray {
                        gain,
                        omega_e,
                        omega_a,
                        tap,
                    }
                })
                .collect(),
        };
        ChannelRealization::from_rays(rays, n, self.taps, self.mode)
    }

    /// Deterministic draw from a seed; the seed is kept for replay.
    pub fn sample_seeded(&self, seed: u64) -> Result<ChannelRealization> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ch = self.sample(&mut rng)?;
        ch.seed = Some(seed);
        Ok(ch)
    }
}

/// Noise variance from the omnidirectional SNR:
/// `sigma^2 = mean(||H_sum||_F^2) / (N^2 SNR)`.
pub fn noise_variance_for_snr(mean_energy: f64, n: usize, snr_omni_db: f64) -> f64 {
    let snr = 10f64.powf(snr_omni_db / 10.0);
    mean_energy / ((n * n) as f64 * snr)
}
