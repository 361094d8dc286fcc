//! The `q`-bit phase alphabet of a phased array.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Phase-shifter resolution. `Infinite` means unquantized unit-modulus weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    Bits(u32),
    Infinite,
}

/// Number of phase levels `2^q`.
pub fn levels(q: u32) -> u32 {
    1u32 << q
}

/// Phase angle in `[0, 2 pi)`.
pub fn phase(z: Complex64) -> f64 {
    let a = z.im.atan2(z.re);
    if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Index of the nearest phase on the `2^q` grid; ties go to the smaller index.
pub fn nearest_phase_index(z: Complex64, q: u32) -> u32 {
    let l = levels(q);
    let x = phase(z) * l as f64 / (2.0 * PI);
    let lo = x.floor();
    let frac = x - lo;
    let lo = lo as u32 % l;
    let hi = (lo + 1) % l;
    if (frac - 0.5).abs() < 1e-9 {
        lo.min(hi)
    } else if frac < 0.5 {
        lo
    } else {
        hi
    }
}

/// `exp(j 2 pi index / 2^q)` with the given magnitude.
pub fn phasor(index: u32, q: u32, magnitude: f64) -> Complex64 {
    Complex64::from_polar(magnitude, 2.0 * PI * index as f64 / levels(q) as f64)
}

/// Projects `z` onto the unit circle at the given resolution, then scales.
pub fn project(z: Complex64, resolution: Resolution, magnitude: f64) -> Complex64 {
    match resolution {
        Resolution::Bits(q) => phasor(nearest_phase_index(z, q), q, magnitude),
        Resolution::Infinite => Complex64::from_polar(magnitude, phase(z)),
    }
}

/// Phase index of `z` when it lies on the `2^q` grid within `tol` radians.
pub fn exact_phase_index(z: Complex64, q: u32, tol: f64) -> Option<u32> {
    let idx = nearest_phase_index(z, q);
    let target = 2.0 * PI * idx as f64 / levels(q) as f64;
    let mut err = (phase(z) - target).abs();
    err = err.min(2.0 * PI - err);
    (err <= tol).then_some(idx)
}
