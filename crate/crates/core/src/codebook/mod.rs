//! Comb-sector codebooks for `q`-bit phased arrays.

mod awm;
pub mod baseline;
pub mod io;
pub mod optimize;
mod sector;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use awm::{
    assemble_awm, building_block, spectral_mask, t_in_sector, t_matrix, uniformity_ratio, weights_from_indices,
    weights_uniformity, Awm, SpectralMask, PHASE_TOL,
};
pub use optimize::{design_sector_weights, optimize_weights, pecan, PecanConfig, WeightDesign};
pub use sector::{SectorLayout, SectorSpec};

use crate::error::{Error, Result};

/// How the per-sector weight matrices are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    #[default]
    Optimized,
    Random,
}

/// A full comb codebook: one AWM per sector, indexed by `s = N_a k_e + k_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    layout: SectorLayout,
    q: u32,
    awms: Vec<Awm>,
}

impl Codebook {
    pub fn from_awms(layout: SectorLayout, q: u32, awms: Vec<Awm>) -> Result<Self> {
        if awms.len() != layout.num_sectors() {
            return Err(Error::Dimension(format!(
                "codebook needs {} AWMs, got {}",
                layout.num_sectors(),
                awms.len()
            )));
        }
        for (s, a) in awms.iter().enumerate() {
            if a.sector().index() != s || a.sector().layout() != layout || a.q() != q {
                return Err(Error::Construction(format!("AWM {s} does not belong to this codebook")));
            }
        }
        Ok(Self { layout, q, awms })
    }

    pub fn layout(&self) -> SectorLayout {
        self.layout
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn awms(&self) -> &[Awm] {
        &self.awms
    }

    pub fn awm(&self, s: usize) -> &Awm {
        &self.awms[s]
    }

    pub fn len(&self) -> usize {
        self.awms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.awms.is_empty()
    }

    pub fn masks(&self) -> Vec<SpectralMask> {
        self.awms.iter().map(Awm::spectral_mask).collect()
    }
}

fn check_bits(layout: &SectorLayout, q: u32) -> Result<()> {
    if q < layout.min_bits() {
        return Err(Error::config(
            "q",
            format!(
                "{q} bits is too few for N_e = {}, N_a = {}; need q >= {}",
                layout.n_e(),
                layout.n_a(),
                layout.min_bits()
            ),
        ));
    }
    if q > 16 {
        return Err(Error::config("q", format!("{q} bits is unsupported (max 16)")));
    }
    Ok(())
}

/// Builds the `S` comb AWMs with independently designed weights.
///
/// Random mode draws each sector's weights uniformly from `Q_q` using a
/// stream derived from `cfg.seed` and the sector index.
pub fn build_codebook(n: usize, n_e: usize, n_a: usize, q: u32, mode: WeightMode, cfg: &PecanConfig) -> Result<Codebook> {
    let layout = SectorLayout::new(n, n_e, n_a)?;
    check_bits(&layout, q)?;
    let specs: Vec<SectorSpec> = layout.sectors().collect();
    let awms = specs
        .par_iter()
        .map(|spec| {
            let weights = match mode {
                WeightMode::Optimized => design_sector_weights(spec, q, cfg).weights,
                WeightMode::Random => {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream(spec.index() as u64 + 1);
                    optimize::random_weights(spec, q, &mut rng)
                }
            };
            assemble_awm(spec, q, &weights)
        })
        .collect::<Result<Vec<_>>>()?;
    Codebook::from_awms(layout, q, awms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_one_bit_codebook_has_flat_masks() {
        let cb = build_codebook(4, 2, 2, 1, WeightMode::Optimized, &PecanConfig::default()).unwrap();
        assert_eq!(cb.len(), 4);
        for mask in cb.masks() {
            assert!((mask.uniformity_ratio() - 1.0).abs() < 1e-12);
            for (p, q) in mask.sector().cells() {
                // unnormalized +-1 AWM entries scale the mask by N = 4
                assert!((4.0 * mask.grid()[(p, q)].norm() - 8.0).abs() < 1e-10);
            }
            assert!(mask.leakage_energy() < 1e-18);
        }
    }

    #[test]
    fn too_few_bits_names_the_minimum() {
        let err = build_codebook(16, 4, 2, 1, WeightMode::Optimized, &PecanConfig::default()).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("q >= 2"), "{err}");
    }

    #[test]
    fn random_mode_is_seeded() {
        let cfg = PecanConfig {
            seed: 9,
            ..PecanConfig::default()
        };
        let a = build_codebook(16, 2, 2, 2, WeightMode::Random, &cfg).unwrap();
        let b = build_codebook(16, 2, 2, 2, WeightMode::Random, &cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.awm(0).weight_indices(), a.awm(1).weight_indices());
    }

    #[test]
    fn codebook_32_by_4x4_has_exact_support() {
        let cb = build_codebook(32, 4, 4, 2, WeightMode::Optimized, &PecanConfig::default()).unwrap();
        assert_eq!(cb.len(), 16);
        for mask in cb.masks() {
            assert!(mask.leakage_energy() < 1e-18);
            assert!(mask.uniformity_ratio().is_finite());
        }
    }
}
