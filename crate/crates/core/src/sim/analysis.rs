//! Smaller studies: shift-set coherence, sweep power against the contiguous
//! baseline, and the in-sector measurement gain.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::rng::{stream, Stage};
use crate::ccs::{flat_mask_awm, in_sector_coherence, nyquist_shifts, pcs_shifts, psf, rcs_shifts, ShiftKind, ShiftSet};
use crate::channel::{ChannelRealization, GridMode, RandomChannel, Ray};
use crate::codebook::baseline::contiguous_codebook;
use crate::codebook::{Awm, Codebook, SectorSpec};
use crate::error::Result;
use crate::noise::complex_normal;
use crate::sweep::sls_measure;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceSample {
    pub kind: ShiftKind,
    pub seed: u64,
    pub m: usize,
    pub mu0: f64,
}

/// `mu_0` of the Nyquist set, then PCS and RCS draws of size `m` for each seed.
///
/// PCS rows are skipped when `m` exceeds the Nyquist block.
pub fn coherence_samples(spec: &SectorSpec, m: usize, seeds: usize, base_seed: u64) -> Result<Vec<CoherenceSample>> {
    let mut out = vec![CoherenceSample {
        kind: ShiftKind::Nyquist,
        seed: base_seed,
        m: spec.size(),
        mu0: in_sector_coherence(&nyquist_shifts(spec), spec),
    }];
    for s in 0..seeds as u64 {
        if m <= spec.size() {
            let mut rng = stream(base_seed, s, Stage::Analysis, 0);
            let set = pcs_shifts(spec, m, &mut rng)?;
            out.push(CoherenceSample {
                kind: ShiftKind::Pcs,
                seed: base_seed + s,
                m,
                mu0: in_sector_coherence(&set, spec),
            });
        }
        let mut rng = stream(base_seed, s, Stage::Analysis, 1);
        let set = rcs_shifts(spec.n(), m, &mut rng)?;
        out.push(CoherenceSample {
            kind: ShiftKind::Rcs,
            seed: base_seed + s,
            m,
            mu0: in_sector_coherence(&set, spec),
        });
    }
    Ok(out)
}

pub fn write_coherence_csv<W: std::io::Write>(samples: &[CoherenceSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

/// `i,j,abs_psf` for every cell.
pub fn write_psf_csv<W: std::io::Write>(set: &ShiftSet, out: W) -> Result<()> {
    let p = psf(set);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "j", "abs_psf"])?;
    for i in 0..p.rows() {
        for j in 0..p.cols() {
            w.write_record(&[i.to_string(), j.to_string(), format!("{:.12e}", p[(i, j)].norm())])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepComparison {
    pub trial: u64,
    pub comb_sector: usize,
    pub comb_power: f64,
    pub baseline_sector: usize,
    pub baseline_power: f64,
}

/// Noiseless sweep with the comb codebook and the quantized contiguous baseline
/// on the same random channels.
pub fn sweep_comparison(
    codebook: &Codebook,
    model: &RandomChannel,
    trials: usize,
    base_seed: u64,
) -> Result<Vec<SweepComparison>> {
    let baseline = contiguous_codebook(&codebook.layout(), codebook.q())?;
    (0..trials as u64)
        .map(|t| {
            let mut rng = stream(base_seed, t, Stage::Channel, 0);
            let ch = model.sample(&mut rng)?;
            let comb = sls_measure(&ch, codebook.awms(), 0.0, &mut rng)?;
            let base = sls_measure(&ch, &baseline, 0.0, &mut rng)?;
            Ok(SweepComparison {
                trial: t,
                comb_sector: comb.best_sector,
                comb_power: comb.best_power(),
                baseline_sector: base.best_sector,
                baseline_power: base.best_power(),
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepComparison], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Random on-grid channel whose rays all fall on the comb of `spec`.
pub fn sector_channel<R: rand::Rng + ?Sized>(spec: &SectorSpec, k: usize, rng: &mut R) -> Result<ChannelRealization> {
    let cells = spec.cells();
    let var = 1.0 / k as f64;
    let rays = sample(rng, cells.len(), k)
        .into_vec()
        .into_iter()
        .map(|i| {
            let (p, q) = cells[i];
            Ray::on_grid(complex_normal(rng, var), p, q, spec.n(), 0)
        })
        .collect();
    ChannelRealization::from_rays(rays, spec.n(), 1, GridMode::OnGrid)
}

/// Ratio in dB of the mean in-sector measurement power under `awm` to that
/// under the flat-mask reference, over channels confined to the sector.
pub fn in_sector_gain_db(awm: &Awm, rays: usize, trials: usize, base_seed: u64) -> Result<f64> {
    let spec = awm.sector();
    let flat = flat_mask_awm(spec.n());
    let (mut comb, mut wide) = (0.0, 0.0);
    for t in 0..trials as u64 {
        let mut rng = stream(base_seed, t, Stage::Analysis, 2);
        let ch = sector_channel(spec, rays, &mut rng)?;
        let h = ch.h_sum();
        comb += h.inner(awm.grid())?.norm_sqr();
        wide += h.inner(&flat)?.norm_sqr();
    }
    Ok(10.0 * (comb / wide).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{build_codebook, PecanConfig, WeightMode};

    #[test]
    fn coherence_rows() {
        let spec = SectorSpec::new(16, 4, 4, 0, 0).unwrap();
        let rows = coherence_samples(&spec, 5, 3, 0).unwrap();
        assert_eq!(rows.len(), 7);
        assert_eq!(rows[0].kind, ShiftKind::Nyquist);
        assert!(rows[0].mu0 < 1e-12);
        let rows = coherence_samples(&spec, 40, 2, 0).unwrap();
        assert!(rows[1..].iter().all(|r| r.kind == ShiftKind::Rcs));
    }

    #[test]
    fn degenerate_layout_reports_zero() {
        let spec = SectorSpec::new(8, 8, 8, 0, 0).unwrap();
        let rows = coherence_samples(&spec, 1, 2, 0).unwrap();
        assert!(rows.iter().all(|r| r.mu0 == 0.0));
    }

    #[test]
    fn sweep_comparison_runs() {
        let cb = build_codebook(16, 2, 2, 1, WeightMode::Optimized, &PecanConfig::default()).unwrap();
        let model = RandomChannel {
            n: 16,
            taps: 1,
            rays_min: 1,
            rays_max: 3,
            mode: GridMode::OffGrid,
        };
        let rows = sweep_comparison(&cb, &model, 5, 1).unwrap();
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| r.comb_power > 0.0 && r.baseline_power > 0.0));
    }
}
