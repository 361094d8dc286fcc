//! Orthogonal matching pursuit over the in-sector CS matrix, plus the
//! support-recovery and error guarantees it comes with.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ccs::{gram_coherence, CsInstance};
use crate::codebook::SectorSpec;
use crate::error::{Error, Result};
use crate::tensor::{dft2, idft2, ComplexGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRule {
    /// Stop after exactly `k` atoms.
    Sparsity(usize),
    /// Stop once the residual norm is at or below the threshold.
    Residual(f64),
    /// Stop after this many iterations.
    MaxIterations(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmpConfig {
    pub stop: StopRule,
    /// Relative singular-value cutoff for the least-squares refit.
    pub tol: f64,
}

impl OmpConfig {
    pub fn sparsity(k: usize) -> Self {
        Self {
            stop: StopRule::Sparsity(k),
            tol: 1e-12,
        }
    }

    pub fn residual(eps: f64) -> Self {
        Self {
            stop: StopRule::Residual(eps),
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OmpResult {
    /// Estimate of `x_{L_o}`, zero off the support.
    pub estimate: DVector<Complex64>,
    /// Selected columns in selection order.
    pub support: Vec<usize>,
    /// Residual norm before the first iteration and after each one.
    pub residual_norms: Vec<f64>,
    /// Set when a refit hit a rank-deficient column subset.
    pub regularized: bool,
}

fn least_squares(a: &DMatrix<Complex64>, y: &DVector<Complex64>, tol: f64) -> (DVector<Complex64>, bool) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = tol * smax.max(f64::MIN_POSITIVE);
    let deficient = svd.rank(eps) < a.ncols();
    let x = svd.solve(y, eps).expect("U and V were computed");
    (x, deficient)
}

/// Greedy recovery with norm-normalized correlations and a least-squares
/// refit on the selected support at every iteration.
pub fn omp(a: &DMatrix<Complex64>, y: &DVector<Complex64>, config: &OmpConfig) -> Result<OmpResult> {
    let (m, n) = a.shape();
    if m == 0 || y.len() != m {
        return Err(Error::Dimension(format!("matrix is {m}x{n}, measurements {}", y.len())));
    }
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    let dmax = norms.iter().copied().fold(0.0, f64::max);
    if dmax <= 0.0 {
        return Err(Error::Construction("CS matrix is zero".into()));
    }
    // cells the mask cannot see are never selected
    let blind: Vec<bool> = norms.iter().map(|&d| d <= 1e-12 * dmax).collect();
    let cap = m.min(n);
    let (limit, eps) = match config.stop {
        StopRule::Sparsity(k) => (k.min(cap), -1.0),
        StopRule::Residual(eps) => (cap, eps),
        StopRule::MaxIterations(c) => (c.min(cap), -1.0),
    };

    let mut support: Vec<usize> = Vec::new();
    let mut chosen = vec![false; n];
    let mut residual = y.clone();
    let mut residual_norms = vec![residual.norm()];
    let mut coeffs = DVector::zeros(0);
    let mut regularized = false;

    while support.len() < limit && residual.norm() > eps {
        let mut best: Option<(usize, f64)> = None;
        for (i, col) in a.column_iter().enumerate() {
            if chosen[i] || blind[i] {
                continue;
            }
            let c = col.dotc(&residual).norm() / norms[i];
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((i, c));
            }
        }
        let Some((pick, corr)) = best else { break };
        if corr == 0.0 && !matches!(config.stop, StopRule::Sparsity(_)) {
            break;
        }
        chosen[pick] = true;
        support.push(pick);

        let sub = a.select_columns(&support);
        let (x, deficient) = least_squares(&sub, y, config.tol);
        regularized |= deficient;
        let fitted = &sub * &x;
        let next = y - fitted;
        // the refit is a projection, so the residual cannot grow; clamp rounding noise
        let prev = *residual_norms.last().expect("seeded");
        residual_norms.push(next.norm().min(prev));
        residual = next;
        coeffs = x;
    }

    let mut estimate = DVector::zeros(n);
    for (j, &i) in support.iter().enumerate() {
        estimate[i] = coeffs[j];
    }
    Ok(OmpResult {
        estimate,
        support,
        residual_norms,
        regularized,
    })
}

/// Runs OMP on a CS instance.
pub fn recover(instance: &CsInstance, config: &OmpConfig) -> Result<OmpResult> {
    omp(&instance.a_eff, &instance.y, config)
}

/// Scatters `x_{L_o}` into an `N x N` beamspace and returns `U X U`.
pub fn in_sector_estimate(x_hat: &DVector<Complex64>, spec: &SectorSpec) -> Result<ComplexGrid> {
    let vi = spec.vec_indices();
    if x_hat.len() != vi.len() {
        return Err(Error::Dimension(format!(
            "estimate has {} entries, sector has {}",
            x_hat.len(),
            vi.len()
        )));
    }
    let n = spec.n();
    let mut x = ComplexGrid::zeros(n, n);
    for (v, (_, cell)) in x_hat.iter().zip(vi) {
        x[cell] = *v;
    }
    dft2(&x)
}

/// Ground truth restricted to the sector: `U (X . 1_{A_o}) U`.
pub fn masked_truth(h: &ComplexGrid, spec: &SectorSpec) -> Result<ComplexGrid> {
    let x = idft2(h)?;
    let n = spec.n();
    let mut masked = ComplexGrid::zeros(n, n);
    for c in spec.cells() {
        masked[c] = x[c];
    }
    dft2(&masked)
}

/// Quantities from the OMP recovery guarantee for one CS instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeReport {
    pub d_min: f64,
    pub d_max: f64,
    pub mu: f64,
    pub k: usize,
    pub gamma: f64,
    pub sigma: f64,
    /// Smallest `x_min` for which the recovery condition holds; infinite if none.
    pub x_min_required: f64,
    /// Whether the condition holds for the supplied `x_min`, if one was given.
    pub condition_holds: Option<bool>,
    pub prob_lower_bound: f64,
    pub mse_upper_bound: f64,
    /// Set when `d_min - (k - 1) mu d_max <= 0`, making the error bound vacuous.
    pub mse_bound_vacuous: bool,
}

/// `(1 - sqrt(2/pi) sqrt(sigma/gamma) exp(-gamma^2 / (2 sigma^2)))^(2 N^2 / S)`, floored at 0.
pub fn support_probability_bound(sigma: f64, gamma: f64, n: usize, num_sectors: usize) -> f64 {
    let base = 1.0 - (2.0 / PI).sqrt() * (sigma / gamma).sqrt() * (-gamma * gamma / (2.0 * sigma * sigma)).exp();
    let expo = 2.0 * (n * n) as f64 / num_sectors as f64;
    if base <= 0.0 {
        0.0
    } else {
        base.powf(expo).max(0.0)
    }
}

/// `(d_max / d_min)^2 k gamma^2 / (d_min - (k - 1) mu d_max)^2`, or `None` when the
/// denominator is not positive.
pub fn mse_bound(d_min: f64, d_max: f64, mu: f64, k: usize, gamma: f64) -> Option<f64> {
    let den = d_min - (k as f64 - 1.0) * mu * d_max;
    (den > 0.0).then(|| (d_max / d_min).powi(2) * k as f64 * gamma * gamma / (den * den))
}

/// `2 gamma / (d_min - (2k - 1) mu d_max)`, infinite when the denominator is not positive.
pub fn required_x_min(d_min: f64, d_max: f64, mu: f64, k: usize, gamma: f64) -> f64 {
    let den = d_min - (2.0 * k as f64 - 1.0) * mu * d_max;
    if den > 0.0 {
        2.0 * gamma / den
    } else {
        f64::INFINITY
    }
}

pub fn guarantee_report(
    instance: &CsInstance,
    k: usize,
    gamma: f64,
    sigma: f64,
    num_sectors: usize,
    x_min: Option<f64>,
) -> Result<GuaranteeReport> {
    if !(gamma > 0.0) || !(sigma > 0.0) || k == 0 {
        return Err(Error::config("gamma/sigma/k", "need gamma > 0, sigma > 0 and k >= 1"));
    }
    let d = instance.column_norms();
    let d_min = d.iter().copied().fold(f64::INFINITY, f64::min);
    let d_max = d.iter().copied().fold(0.0, f64::max);
    let mu = gram_coherence(&instance.a_eff);
    let x_min_required = required_x_min(d_min, d_max, mu, k, gamma);
    let mse = mse_bound(d_min, d_max, mu, k, gamma);
    Ok(GuaranteeReport {
        d_min,
        d_max,
        mu,
        k,
        gamma,
        sigma,
        x_min_required,
        condition_holds: x_min.map(|x| x >= x_min_required),
        prob_lower_bound: support_probability_bound(sigma, gamma, instance.sector.n(), num_sectors),
        mse_upper_bound: mse.unwrap_or(f64::INFINITY),
        mse_bound_vacuous: mse.is_none(),
    })
}
