//! JSON codebook files and CSV mask dumps.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{assemble_awm, weights_from_indices, Codebook, SectorLayout};
use crate::error::{Error, Result};

/// Provenance header stored with every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    /// Free-form echo of the configuration that produced the artifact.
    #[serde(default)]
    pub config: serde_json::Value,
}

impl Provenance {
    pub fn new(config: serde_json::Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorRecord {
    pub index: usize,
    pub k_e: usize,
    pub k_a: usize,
    /// `rho_e x rho_a` weight phase indices in `[2^q]`.
    pub weights: Vec<Vec<u32>>,
    /// `N x N` AWM phase indices in `[2^q]`.
    pub phase_indices: Vec<Vec<u32>>,
    pub uniformity_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookFile {
    pub provenance: Provenance,
    pub n: usize,
    pub n_e: usize,
    pub n_a: usize,
    pub q: u32,
    pub sectors: Vec<SectorRecord>,
}

fn rows(flat: &[u32], cols: usize) -> Vec<Vec<u32>> {
    flat.chunks(cols).map(<[u32]>::to_vec).collect()
}

impl CodebookFile {
    pub fn from_codebook(cb: &Codebook, provenance: Provenance) -> Self {
        let layout = cb.layout();
        let sectors = cb
            .awms()
            .iter()
            .map(|a| {
                let spec = a.sector();
                SectorRecord {
                    index: spec.index(),
                    k_e: spec.k_e(),
                    k_a: spec.k_a(),
                    weights: rows(a.weight_indices(), spec.rho_a()),
                    phase_indices: rows(&a.phase_indices(), layout.n()),
                    uniformity_ratio: a.spectral_mask().uniformity_ratio(),
                }
            })
            .collect();
        Self {
            provenance,
            n: layout.n(),
            n_e: layout.n_e(),
            n_a: layout.n_a(),
            q: cb.q(),
            sectors,
        }
    }

    /// Rebuilds the codebook from the stored weights and checks the stored AWMs.
    pub fn to_codebook(&self) -> Result<Codebook> {
        let layout = SectorLayout::new(self.n, self.n_e, self.n_a)?;
        if self.sectors.len() != layout.num_sectors() {
            return Err(Error::Dimension(format!(
                "file lists {} sectors, layout has {}",
                self.sectors.len(),
                layout.num_sectors()
            )));
        }
        let mut awms = Vec::with_capacity(self.sectors.len());
        for (s, rec) in self.sectors.iter().enumerate() {
            let spec = layout.sector(s)?;
            if rec.index != s || rec.k_e != spec.k_e() || rec.k_a != spec.k_a() {
                return Err(Error::config("sectors", format!("record {s} is out of order")));
            }
            let flat: Vec<u32> = rec.weights.iter().flatten().copied().collect();
            let awm = assemble_awm(&spec, self.q, &weights_from_indices(&spec, self.q, &flat)?)?;
            let stored: Vec<u32> = rec.phase_indices.iter().flatten().copied().collect();
            if stored != awm.phase_indices() {
                return Err(Error::Construction(format!(
                    "sector {s}: stored AWM does not match its weights"
                )));
            }
            awms.push(awm);
        }
        Codebook::from_awms(layout, self.q, awms)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Writes `sector,p,q,abs_z` rows for every cell of every mask.
pub fn write_mask_csv<W: std::io::Write>(cb: &Codebook, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sector", "p", "q", "abs_z"])?;
    for mask in cb.masks() {
        let g = mask.grid();
        for p in 0..g.rows() {
            for q in 0..g.cols() {
                w.write_record(&[
                    mask.sector().index().to_string(),
                    p.to_string(),
                    q.to_string(),
                    format!("{:.12e}", g[(p, q)].norm()),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{build_codebook, PecanConfig, WeightMode};

    #[test]
    fn json_round_trip() {
        let cb = build_codebook(8, 2, 2, 1, WeightMode::Optimized, &PecanConfig::default()).unwrap();
        let file = CodebookFile::from_codebook(&cb, Provenance::new(serde_json::json!({"n": 8})));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cb.json");
        file.save(&path).unwrap();
        let back = CodebookFile::load(&path).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_codebook().unwrap(), cb);
    }

    #[test]
    fn tampered_awm_is_rejected() {
        let cb = build_codebook(4, 2, 2, 1, WeightMode::Optimized, &PecanConfig::default()).unwrap();
        let mut file = CodebookFile::from_codebook(&cb, Provenance::new(serde_json::Value::Null));
        file.sectors[1].phase_indices[0][0] ^= 1;
        assert!(file.to_codebook().is_err());
    }

    #[test]
    fn mask_csv_has_one_row_per_cell() {
        let cb = build_codebook(4, 2, 2, 1, WeightMode::Optimized, &PecanConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_mask_csv(&cb, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 4 * 16);
    }
}
