//! Weight-matrix design for near-uniform in-sector illumination.
//!
//! The in-sector mask magnitude is proportional to `|T_A|` with
//! `T_A = U^* D_e W D_a U^*`. An alternating projection in the style of
//! PeCAN drives `T_A` toward a unit-modulus target `V`:
//!
//! 1. fix `W`, set `V = exp(j arg T_A)`;
//! 2. fix `V`, invert the transform `G = D_e^* (U V U) D_a^*` and project
//!    each entry of `G` to the nearest `q`-bit phase.
//!
//! With unit-modulus `W`, Parseval gives `||T_A||_F^2 = rho_e rho_a`, so the
//! flat target has unit-modulus entries.
//!
//! Quantizing every iteration makes the projection stall in poor fixed points
//! on small alphabets, so each run is finished with a single-entry coordinate
//! descent on the alphabet before the runs are compared.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::awm::{modulate, uniformity_ratio};
use super::SectorSpec;
use crate::quantize::{levels, project, Resolution};
use crate::tensor::{unitary_dft2, ComplexGrid};

const POLISH_SWEEPS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PecanConfig {
    pub max_iters: usize,
    pub tol: f64,
    /// Number of uniform-random initializations run after the structured ones.
    pub random_inits: usize,
    pub seed: u64,
}

impl Default for PecanConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-8,
            random_inits: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    QuantizedDft,
    ZadoffChu,
    Random,
}

/// Result of one alternating-projection run.
#[derive(Debug, Clone)]
pub struct PecanRun {
    pub weights: ComplexGrid,
    pub ratio: f64,
    pub objective: f64,
    pub iterations: usize,
}

/// Best design over a set of initializations.
#[derive(Debug, Clone)]
pub struct WeightDesign {
    pub weights: ComplexGrid,
    pub ratio: f64,
    pub init_index: usize,
}

fn quantize_grid(g: &ComplexGrid, q: u32) -> ComplexGrid {
    g.map(|z| project(z, Resolution::Bits(q), 1.0))
}

/// Zadoff-Chu sequence of length `len` with root 1.
pub fn zadoff_chu(len: usize) -> Vec<Complex64> {
    let l = len as f64;
    let odd = (len % 2) as f64;
    (0..len)
        .map(|n| {
            let n = n as f64;
            Complex64::from_polar(1.0, -PI * n * (n + odd) / l)
        })
        .collect()
}

/// Pre-compensates the sector modulation so that `D_e W D_a` equals `target`
/// before quantization.
fn compensated(spec: &SectorSpec, target: &ComplexGrid, q: u32) -> ComplexGrid {
    quantize_grid(&modulate(spec, target, true), q)
}

/// Structured and random starting points, in a fixed order.
pub fn initializations(spec: &SectorSpec, q: u32, cfg: &PecanConfig) -> Vec<(InitKind, ComplexGrid)> {
    let (re, ra) = (spec.rho_e(), spec.rho_a());
    let mut out = Vec::with_capacity(2 + cfg.random_inits);

    // DFT-like chirp: exp(-j 2 pi l m / max(rho_e, rho_a)); for square blocks this
    // is the (unnormalized) DFT matrix, whose 2D transform has flat magnitude.
    let r = re.max(ra) as f64;
    let dft = ComplexGrid::from_fn(re, ra, |l, m| {
        Complex64::from_polar(1.0, -2.0 * PI * (l * m) as f64 / r)
    });
    out.push((InitKind::QuantizedDft, compensated(spec, &dft, q)));

    let (ze, za) = (zadoff_chu(re), zadoff_chu(ra));
    let zc = ComplexGrid::from_fn(re, ra, |l, m| ze[l] * za[m]);
    out.push((InitKind::ZadoffChu, compensated(spec, &zc, q)));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((spec.index() as u64) << 32));
    for _ in 0..cfg.random_inits {
        out.push((InitKind::Random, random_weights(spec, q, &mut rng)));
    }
    out
}

/// Uniformly random weights in `Q_q` (unit-modulus form).
pub fn random_weights<R: Rng + ?Sized>(spec: &SectorSpec, q: u32, rng: &mut R) -> ComplexGrid {
    let l = levels(q);
    ComplexGrid::from_fn(spec.rho_e(), spec.rho_a(), |_, _| {
        crate::quantize::phasor(rng.random_range(0..l), q, 1.0)
    })
}

/// Runs the alternating projection from one starting point.
///
/// Returns the iterate with the lowest uniformity ratio seen.
pub fn pecan(spec: &SectorSpec, q: u32, init: &ComplexGrid, max_iters: usize, tol: f64) -> PecanRun {
    let mut w = quantize_grid(init, q);
    let mut best: Option<PecanRun> = None;
    let mut prev_obj = f64::INFINITY;

    for it in 0..=max_iters {
        let t = unitary_dft2(&modulate(spec, &w, false), true);
        let ratio = uniformity_ratio(t.data().iter().map(|z| z.norm()));
        let v = t.map(|z| {
            if z.norm() > 0.0 {
                z / z.norm()
            } else {
                Complex64::new(1.0, 0.0)
            }
        });
        let objective = t.sub(&v).expect("same shape").frobenius_norm();

        if best.as_ref().is_none_or(|b| ratio < b.ratio) {
            best = Some(PecanRun {
                weights: w.clone(),
                ratio,
                objective,
                iterations: it,
            });
        }
        if it == max_iters || (prev_obj - objective).abs() < tol {
            break;
        }
        prev_obj = objective;

        let g = modulate(spec, &unitary_dft2(&v, false), true);
        let next = quantize_grid(&g, q);
        if next == w {
            break;
        }
        w = next;
    }
    best.expect("at least one iterate")
}

/// Objective used by [`polish`]: the uniformity ratio, then the squared
/// deviation of `|T_A|` from one to break plateaus.
fn polish_key(t: &[Complex64]) -> (f64, f64) {
    let ratio = uniformity_ratio(t.iter().map(|z| z.norm()));
    let dev = t.iter().map(|z| (z.norm() - 1.0).powi(2)).sum();
    (ratio, dev)
}

fn key_less(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 < b.0 * (1.0 - 1e-12) || (a.0 <= b.0 * (1.0 + 1e-12) && a.1 < b.1 * (1.0 - 1e-12))
}

/// Coordinate descent over single weight entries on the `q`-bit alphabet.
///
/// Changing `W_lm` by `delta` moves `T_A` by a rank-one plane wave, so each
/// candidate costs `O(rho_e rho_a)`. Sweeps repeat until no entry improves.
pub fn polish(spec: &SectorSpec, q: u32, weights: &ComplexGrid, max_sweeps: usize) -> ComplexGrid {
    let (re, ra) = (spec.rho_e(), spec.rho_a());
    let mut w = weights.clone();
    let mut t = unitary_dft2(&modulate(spec, &w, false), true).into_data();
    let mut key = polish_key(&t);
    let scale = 1.0 / ((re * ra) as f64).sqrt();
    let n = spec.n() as f64;
    let (ke, ka) = (spec.k_e() as f64, spec.k_a() as f64);
    let levels = levels(q);
    let mut cand = vec![Complex64::new(0.0, 0.0); t.len()];

    for _ in 0..max_sweeps {
        let mut improved = false;
        for l in 0..re {
            for m in 0..ra {
                let modu = Complex64::from_polar(scale, 2.0 * PI * (ke * l as f64 + ka * m as f64) / n);
                let current = w[(l, m)];
                for idx in 0..levels {
                    let next = crate::quantize::phasor(idx, q, 1.0);
                    if (next - current).norm() < 1e-12 {
                        continue;
                    }
                    let delta = (next - w[(l, m)]) * modu;
                    for a in 0..re {
                        for b in 0..ra {
                            let ph = 2.0 * PI * ((a * l) as f64 / re as f64 + (b * m) as f64 / ra as f64);
                            cand[a * ra + b] = t[a * ra + b] + delta * Complex64::from_polar(1.0, ph);
                        }
                    }
                    let k = polish_key(&cand);
                    if key_less(k, key) {
                        key = k;
                        std::mem::swap(&mut t, &mut cand);
                        w[(l, m)] = next;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    w
}

/// Runs every initialization and keeps the lowest ratio; ties go to the
/// earliest initialization.
pub fn optimize_weights(
    spec: &SectorSpec,
    q: u32,
    inits: &[ComplexGrid],
    max_iters: usize,
    tol: f64,
) -> WeightDesign {
    assert!(!inits.is_empty(), "need at least one initialization");
    let mut best: Option<WeightDesign> = None;
    for (idx, init) in inits.iter().enumerate() {
        let run = pecan(spec, q, init, max_iters, tol);
        let weights = polish(spec, q, &run.weights, POLISH_SWEEPS);
        let t = unitary_dft2(&modulate(spec, &weights, false), true);
        let ratio = uniformity_ratio(t.data().iter().map(|z| z.norm()));
        if best.as_ref().is_none_or(|b| ratio < b.ratio) {
            best = Some(WeightDesign {
                weights,
                ratio,
                init_index: idx,
            });
        }
    }
    best.expect("non-empty")
}

/// Designs weights for one sector with the default initialization library.
pub fn design_sector_weights(spec: &SectorSpec, q: u32, cfg: &PecanConfig) -> WeightDesign {
    let inits: Vec<ComplexGrid> = initializations(spec, q, cfg).into_iter().map(|(_, w)| w).collect();
    optimize_weights(spec, q, &inits, cfg.max_iters, cfg.tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::awm::{assemble_awm, weights_uniformity};

    #[test]
    fn zadoff_chu_has_flat_spectrum() {
        for len in [4usize, 7, 16] {
            let z = zadoff_chu(len);
            let g = ComplexGrid::new(1, len, z).unwrap();
            let f = unitary_dft2(&g, false);
            for v in f.data() {
                assert!((v.norm() - 1.0).abs() < 1e-10, "len {len}");
            }
        }
    }

    #[test]
    fn single_entry_sector_is_exactly_flat() {
        let spec = SectorSpec::new(8, 8, 8, 3, 5).unwrap();
        let d = design_sector_weights(&spec, 3, &PecanConfig::default());
        assert_eq!(d.weights.shape(), (1, 1));
        assert_eq!(d.ratio, 1.0);
    }

    #[test]
    fn result_lies_on_the_phase_grid_and_reports_true_ratio() {
        let spec = SectorSpec::new(16, 2, 2, 1, 0).unwrap();
        let d = design_sector_weights(&spec, 1, &PecanConfig::default());
        let awm = assemble_awm(&spec, 1, &d.weights).unwrap();
        let direct = awm.spectral_mask().uniformity_ratio();
        assert!((direct - d.ratio).abs() < 1e-9 * d.ratio);
        assert!((weights_uniformity(&spec, &d.weights).unwrap() - d.ratio).abs() < 1e-9);
    }

    #[test]
    fn deterministic_for_fixed_config() {
        let spec = SectorSpec::new(16, 4, 2, 2, 1).unwrap();
        let cfg = PecanConfig::default();
        let a = design_sector_weights(&spec, 2, &cfg);
        let b = design_sector_weights(&spec, 2, &cfg);
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.init_index, b.init_index);
    }

    #[test]
    fn within_bound_of_exhaustive_optimum() {
        // N = 8, 2x2 blocks, q = 1: all 2^16 weight matrices per sector
        let layout = crate::codebook::SectorLayout::new(8, 2, 2).unwrap();
        for spec in layout.sectors() {
            let mut best = f64::INFINITY;
            for bits in 0u32..(1 << 16) {
                let idx: Vec<u32> = (0..16).map(|i| (bits >> i) & 1).collect();
                let w = crate::codebook::weights_from_indices(&spec, 1, &idx).unwrap();
                best = best.min(weights_uniformity(&spec, &w).unwrap());
            }
            let d = design_sector_weights(&spec, 1, &PecanConfig::default());
            assert!(d.ratio <= 1.5 * best, "sector {}: {} vs {}", spec.index(), d.ratio, best);
        }
    }

    #[test]
    fn optimized_beats_random_draws() {
        let spec = SectorSpec::new(16, 2, 2, 1, 1).unwrap();
        let opt = design_sector_weights(&spec, 2, &PecanConfig::default()).ratio;
        let mut wins = 0;
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let w = random_weights(&spec, 2, &mut rng);
            if opt <= weights_uniformity(&spec, &w).unwrap() {
                wins += 1;
            }
        }
        assert!(wins >= 45, "{wins}/50");
    }

    #[test]
    fn earliest_initialization_wins_ties() {
        let spec = SectorSpec::new(8, 2, 2, 0, 0).unwrap();
        let init = ComplexGrid::from_real(4, 4, &[1.0; 16]).unwrap();
        let d = optimize_weights(&spec, 1, &[init.clone(), init], 10, 1e-8);
        assert_eq!(d.init_index, 0);
    }
}
