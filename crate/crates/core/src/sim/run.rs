use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, PipelineStop};
use super::rng::{stream, Stage};
use crate::ccs::{assemble_cs, in_sector_coherence, nyquist_shifts, pcs_shifts, rcs_shifts, Acquisition, ShiftKind, ShiftSet};
use crate::channel::{noise_variance_for_snr, ChannelRealization};
use crate::codebook::io::Provenance;
use crate::codebook::{build_codebook, Codebook, SectorSpec, WeightMode};
use crate::error::{Error, Result};
use crate::metrics::{beamformer_from_estimate, effective_channel, waterfilling_rate, NmseAccumulator};
use crate::quantize::Resolution;
use crate::recovery::{in_sector_estimate, masked_truth, recover, OmpConfig};
use crate::sweep::sls_measure;

/// Per-trial outcome for one `(M, SNR)` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub trial: u64,
    pub best_sector: usize,
    pub sls_correct: bool,
    pub truth_energy: f64,
    pub error_energy: f64,
    pub rate: f64,
    pub mu0: f64,
    pub atoms: usize,
}

/// Aggregates for one `(M, SNR)` cell, with the configuration echoed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub n: usize,
    pub n_e: usize,
    pub n_a: usize,
    pub q: u32,
    pub l_taps: usize,
    pub shift_kind: ShiftKind,
    pub weight_mode: WeightMode,
    pub base_seed: u64,
    pub trials: usize,
    pub m: usize,
    pub snr_omni_db: f64,
    pub noise_variance: f64,
    pub nmse: f64,
    pub nmse_excluded: usize,
    pub mean_rate: f64,
    pub rate_p10: f64,
    pub rate_p50: f64,
    pub rate_p90: f64,
    pub sls_accuracy: f64,
    pub mean_mu0: f64,
    pub mean_atoms: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn shift_set(cfg: &ExperimentConfig, spec: &SectorSpec, m: usize, trial: u64, cell: u64) -> Result<ShiftSet> {
    let mut rng = stream(cfg.base_seed, trial, Stage::Shifts, cell);
    match cfg.shift_kind {
        ShiftKind::Nyquist => Ok(nyquist_shifts(spec)),
        ShiftKind::Pcs => pcs_shifts(spec, m, &mut rng),
        ShiftKind::Rcs => rcs_shifts(cfg.n, m, &mut rng),
        ShiftKind::Custom => Err(Error::config("shift_kind", "custom shift sets are not available here")),
    }
}

/// Runs sweep, acquisition, recovery and beamforming for one trial and cell.
#[allow(clippy::too_many_arguments)]
pub fn run_trial(
    cfg: &ExperimentConfig,
    codebook: &Codebook,
    channel: &ChannelRealization,
    trial: u64,
    cell: u64,
    m: usize,
    noise_variance: f64,
) -> Result<TrialOutcome> {
    let sigma = noise_variance.sqrt();
    let spread = cfg.n_seq as f64;

    let mut rng = stream(cfg.base_seed, trial, Stage::Sweep, cell);
    let sls = sls_measure(channel, codebook.awms(), sigma / spread.sqrt(), &mut rng)?;
    let clean = sls_measure(channel, codebook.awms(), 0.0, &mut rng)?;
    let awm = codebook.awm(sls.best_sector);
    let spec = *awm.sector();

    let set = shift_set(cfg, &spec, m, trial, cell)?;
    let mu0 = in_sector_coherence(&set, &spec);
    let mut rng = stream(cfg.base_seed, trial, Stage::Measurement, cell);
    let acq = Acquisition { sigma, spreading: spread };
    let instance = assemble_cs(channel, awm, &set, acq, &mut rng)?;

    let omp_cfg = match cfg.omp_stop {
        PipelineStop::ResidualFactor(f) => OmpConfig::residual(f * instance.sigma * (instance.m() as f64).sqrt()),
        PipelineStop::Sparsity(k) => OmpConfig::sparsity(k),
    };
    let result = recover(&instance, &omp_cfg)?;
    let estimate = in_sector_estimate(&result.estimate, &spec)?;
    let truth = masked_truth(&channel.h_sum(), &spec)?;

    let beam = beamformer_from_estimate(&estimate, Resolution::Bits(cfg.q))?;
    let h_eff = effective_channel(channel, &beam.grid)?;
    let rate = waterfilling_rate(&h_eff, sigma, cfg.n_fft, cfg.total_power)?;

    Ok(TrialOutcome {
        trial,
        best_sector: sls.best_sector,
        sls_correct: sls.best_sector == clean.best_sector,
        truth_energy: truth.frobenius_norm_sqr(),
        error_energy: truth.sub(&estimate)?.frobenius_norm_sqr(),
        rate,
        mu0,
        atoms: result.support.len(),
    })
}

/// Everything produced by one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub codebook: Codebook,
    pub mean_channel_energy: f64,
}

/// Draws the trial channels; trial `t` uses seed `base_seed + t`.
pub fn trial_channels(cfg: &ExperimentConfig) -> Result<Vec<ChannelRealization>> {
    let model = cfg.channel_model();
    (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(cfg.base_seed, t, Stage::Channel, 0);
            model.sample(&mut rng)
        })
        .collect()
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let pecan = crate::codebook::PecanConfig {
        seed: cfg.base_seed,
        ..cfg.pecan
    };
    let codebook = build_codebook(cfg.n, cfg.n_e, cfg.n_a, cfg.q, cfg.weight_mode, &pecan)?;
    let channels = trial_channels(cfg)?;
    let mean_energy = channels.iter().map(|c| c.h_sum().frobenius_norm_sqr()).sum::<f64>() / channels.len() as f64;

    let mut rows = Vec::new();
    let mut cell = 0u64;
    for &snr in &cfg.snr_omni_db_list {
        let nv = noise_variance_for_snr(mean_energy, cfg.n, snr);
        for &m in &cfg.m_list {
            let outcomes = channels
                .par_iter()
                .enumerate()
                .map(|(t, ch)| run_trial(cfg, &codebook, ch, t as u64, cell, m, nv))
                .collect::<Result<Vec<_>>>()?;
            rows.push(aggregate(cfg, m, snr, nv, &outcomes));
            cell += 1;
        }
    }
    Ok(ExperimentOutput {
        rows,
        codebook,
        mean_channel_energy: mean_energy,
    })
}

/// Sequential, trial-ordered aggregation.
pub fn aggregate(cfg: &ExperimentConfig, m: usize, snr: f64, noise_variance: f64, outcomes: &[TrialOutcome]) -> ResultRow {
    let mut acc = NmseAccumulator::default();
    for o in outcomes {
        if o.truth_energy == 0.0 {
            acc.excluded += 1;
        } else {
            acc.error += o.error_energy;
            acc.energy += o.truth_energy;
            acc.count += 1;
        }
    }
    let k = outcomes.len() as f64;
    let mut rates: Vec<f64> = outcomes.iter().map(|o| o.rate).collect();
    let mean_rate = rates.iter().sum::<f64>() / k;
    rates.sort_by(f64::total_cmp);
    ResultRow {
        n: cfg.n,
        n_e: cfg.n_e,
        n_a: cfg.n_a,
        q: cfg.q,
        l_taps: cfg.l_taps,
        shift_kind: cfg.shift_kind,
        weight_mode: cfg.weight_mode,
        base_seed: cfg.base_seed,
        trials: outcomes.len(),
        m,
        snr_omni_db: snr,
        noise_variance,
        nmse: acc.value(),
        nmse_excluded: acc.excluded,
        mean_rate,
        rate_p10: quantile(&rates, 0.1),
        rate_p50: quantile(&rates, 0.5),
        rate_p90: quantile(&rates, 0.9),
        sls_accuracy: outcomes.iter().filter(|o| o.sls_correct).count() as f64 / k,
        mean_mu0: outcomes.iter().map(|o| o.mu0).sum::<f64>() / k,
        mean_atoms: outcomes.iter().map(|o| o.atoms as f64).sum::<f64>() / k,
    }
}

pub fn write_rows_csv<W: std::io::Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Path of the JSON provenance file written next to a CSV.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the CSV and its JSON sidecar.
pub fn write_experiment(cfg: &ExperimentConfig, out: &ExperimentOutput, csv_path: &Path) -> Result<()> {
    let file = std::fs::File::create(csv_path)?;
    write_rows_csv(&out.rows, std::io::BufWriter::new(file))?;

    let side = serde_json::json!({
        "provenance": Provenance::new(serde_json::to_value(cfg)?),
        "mean_channel_energy": out.mean_channel_energy,
        "notes": [
            "noise variance = mean ||H_sum||_F^2 / (N^2 SNR_omni) over the trial batch; an approximation of the omnidirectional-beam SNR definition",
            "nmse is sum of squared errors over sum of masked-truth energy across trials",
        ],
    });
    let mut f = std::io::BufWriter::new(std::fs::File::create(sidecar_path(csv_path))?);
    serde_json::to_writer_pretty(&mut f, &side)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}
