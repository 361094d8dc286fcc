//! Sector-level sweep: one noisy measurement per sector, pick the strongest.

use rand::Rng;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::noise::complex_normal;
use crate::tensor::ComplexGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct SlsResult {
    /// Received power per sector, summed over channel taps.
    pub powers: Vec<f64>,
    pub best_sector: usize,
}

impl SlsResult {
    pub fn best_power(&self) -> f64 {
        self.powers[self.best_sector]
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Applies every AWM once. Each tap sees independent `CN(0, sigma^2)` noise and
/// the per-tap powers `|<H[l], P_s> + v_l|^2` are summed.
pub fn sls_measure<A, R>(channel: &ChannelRealization, codebook: &[A], sigma: f64, rng: &mut R) -> Result<SlsResult>
where
    A: AsRef<ComplexGrid>,
    R: Rng + ?Sized,
{
    if codebook.is_empty() {
        return Err(Error::config("codebook", "must contain at least one AWM"));
    }
    if !(sigma >= 0.0) {
        return Err(Error::config("sigma", format!("noise std {sigma} must be non-negative")));
    }
    let var = sigma * sigma;
    let mut powers = Vec::with_capacity(codebook.len());
    for p in codebook {
        let mut power = 0.0;
        for tap in channel.taps() {
            let mut y = tap.inner(p.as_ref())?;
            if var > 0.0 {
                y += complex_normal(rng, var);
            }
            power += y.norm_sqr();
        }
        powers.push(power);
    }
    let best_sector = argmax_first(&powers);
    Ok(SlsResult { powers, best_sector })
}
