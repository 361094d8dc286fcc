use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ccs::ShiftKind;
use crate::channel::{GridMode, RandomChannel};
use crate::codebook::{PecanConfig, SectorLayout, WeightMode};
use crate::error::{Error, Result};

/// How OMP decides when to stop inside the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", content = "value")]
pub enum PipelineStop {
    /// Residual threshold `factor * sigma_eff * sqrt(M)`.
    ResidualFactor(f64),
    /// Fixed number of atoms.
    Sparsity(usize),
}

/// Full description of one Monte-Carlo experiment. Every field has a default,
/// so a JSON config only needs the fields it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub n_e: usize,
    pub n_a: usize,
    pub q: u32,
    pub l_taps: usize,
    pub m_list: Vec<usize>,
    pub snr_omni_db_list: Vec<f64>,
    pub shift_kind: ShiftKind,
    pub weight_mode: WeightMode,
    pub trials: usize,
    pub base_seed: u64,
    pub output_path: Option<PathBuf>,
    pub rays_min: usize,
    pub rays_max: usize,
    pub grid_mode: GridMode,
    /// Correlator spreading gain applied to sweep and CS measurements.
    pub n_seq: usize,
    pub n_fft: usize,
    pub total_power: f64,
    pub omp_stop: PipelineStop,
    pub pecan: PecanConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 32,
            n_e: 2,
            n_a: 2,
            q: 1,
            l_taps: 4,
            m_list: vec![40, 80, 160],
            snr_omni_db_list: vec![-10.0],
            shift_kind: ShiftKind::Pcs,
            weight_mode: WeightMode::Optimized,
            trials: 100,
            base_seed: 0,
            output_path: None,
            rays_min: 1,
            rays_max: 4,
            grid_mode: GridMode::OffGrid,
            n_seq: 256,
            n_fft: 64,
            total_power: 1.0,
            omp_stop: PipelineStop::ResidualFactor(1.0),
            pecan: PecanConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::config("config", format!("{}: {e}", path.display())))
    }

    pub fn layout(&self) -> Result<SectorLayout> {
        SectorLayout::new(self.n, self.n_e, self.n_a)
    }

    pub fn channel_model(&self) -> RandomChannel {
        RandomChannel {
            n: self.n,
            taps: self.l_taps,
            rays_min: self.rays_min,
            rays_max: self.rays_max,
            mode: self.grid_mode,
        }
    }

    /// Checks every field, naming the first offending one.
    pub fn validate(&self) -> Result<()> {
        let layout = self.layout()?;
        if self.q < layout.min_bits() || self.q > 16 {
            return Err(Error::config(
                "q",
                format!("{} bits outside {}..=16 for this layout", self.q, layout.min_bits()),
            ));
        }
        self.channel_model().validate()?;
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.m_list.is_empty() {
            return Err(Error::config("m_list", "must list at least one measurement count"));
        }
        let cap = match self.shift_kind {
            ShiftKind::Pcs | ShiftKind::Nyquist => layout.rho_e() * layout.rho_a(),
            ShiftKind::Rcs => self.n * self.n,
            ShiftKind::Custom => {
                return Err(Error::config("shift_kind", "custom shift sets are not available here"));
            }
        };
        if let Some(&m) = self.m_list.iter().find(|&&m| m == 0 || m > cap) {
            return Err(Error::config(
                "m_list",
                format!("{m} outside 1..={cap} for {} shifts", self.shift_kind),
            ));
        }
        if self.shift_kind == ShiftKind::Nyquist && self.m_list.iter().any(|&m| m != cap) {
            return Err(Error::config("m_list", format!("nyquist shifts always use M = {cap}")));
        }
        if self.snr_omni_db_list.is_empty() || self.snr_omni_db_list.iter().any(|s| !s.is_finite()) {
            return Err(Error::config("snr_omni_db_list", "must be a nonempty list of finite values"));
        }
        if self.n_seq == 0 {
            return Err(Error::config("n_seq", "must be at least 1"));
        }
        if self.n_fft < self.l_taps {
            return Err(Error::config("n_fft", "must be at least l_taps"));
        }
        if !(self.total_power > 0.0) {
            return Err(Error::config("total_power", "must be positive"));
        }
        match self.omp_stop {
            PipelineStop::ResidualFactor(f) if !(f >= 0.0) => {
                return Err(Error::config("omp_stop", "residual factor must be non-negative"));
            }
            PipelineStop::Sparsity(0) => return Err(Error::config("omp_stop", "sparsity must be positive")),
            _ => {}
        }
        if self.pecan.max_iters == 0 {
            return Err(Error::config("pecan.max_iters", "must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_of(cfg: &ExperimentConfig) -> String {
        match cfg.validate().unwrap_err() {
            Error::Config { field, .. } => field,
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn default_is_valid() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn errors_name_the_field() {
        let base = ExperimentConfig::default();
        assert_eq!(field_of(&ExperimentConfig { trials: 0, ..base.clone() }), "trials");
        assert_eq!(field_of(&ExperimentConfig { m_list: vec![257], ..base.clone() }), "m_list");
        assert_eq!(field_of(&ExperimentConfig { n_e: 3, ..base.clone() }), "n_e");
        assert_eq!(field_of(&ExperimentConfig { n_e: 4, q: 1, ..base.clone() }), "q");
        assert_eq!(field_of(&ExperimentConfig { n_fft: 2, ..base.clone() }), "n_fft");
        let rcs = ExperimentConfig {
            shift_kind: ShiftKind::Rcs,
            m_list: vec![1024],
            ..base.clone()
        };
        rcs.validate().unwrap();
        let nyq = ExperimentConfig {
            shift_kind: ShiftKind::Nyquist,
            m_list: vec![100],
            ..base
        };
        assert_eq!(field_of(&nyq), "m_list");
    }

    #[test]
    fn partial_json_uses_defaults() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"n": 16, "shift_kind": "rcs", "omp_stop": {"rule": "sparsity", "value": 3}}"#).unwrap();
        assert_eq!(cfg.n, 16);
        assert_eq!(cfg.shift_kind, ShiftKind::Rcs);
        assert_eq!(cfg.omp_stop, PipelineStop::Sparsity(3));
        assert_eq!(cfg.trials, 100);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
