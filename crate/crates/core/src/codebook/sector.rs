use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Partition of the `N x N` beamspace into `S = N_e N_a` comb-like sectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorLayout {
    n: usize,
    n_e: usize,
    n_a: usize,
}

impl SectorLayout {
    pub fn new(n: usize, n_e: usize, n_a: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("n", "must be positive"));
        }
        if n_e == 0 || !n.is_multiple_of(n_e) {
            return Err(Error::config("n_e", format!("{n_e} does not divide N = {n}")));
        }
        if n_a == 0 || !n.is_multiple_of(n_a) {
            return Err(Error::config("n_a", format!("{n_a} does not divide N = {n}")));
        }
        if !(n_e * n_a).is_power_of_two() {
            return Err(Error::config(
                "n_e/n_a",
                format!("N_e * N_a = {} is not a power of two", n_e * n_a),
            ));
        }
        Ok(Self { n, n_e, n_a })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_e(&self) -> usize {
        self.n_e
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn rho_e(&self) -> usize {
        self.n / self.n_e
    }

    pub fn rho_a(&self) -> usize {
        self.n / self.n_a
    }

    pub fn num_sectors(&self) -> usize {
        self.n_e * self.n_a
    }

    /// Minimum phase-shifter resolution `log2(max(N_e, N_a))`.
    pub fn min_bits(&self) -> u32 {
        self.n_e.max(self.n_a).trailing_zeros()
    }

    pub fn sector(&self, s: usize) -> Result<SectorSpec> {
        if s >= self.num_sectors() {
            return Err(Error::config(
                "sector",
                format!("{s} out of range for {} sectors", self.num_sectors()),
            ));
        }
        Ok(SectorSpec {
            layout: *self,
            k_e: s / self.n_a,
            k_a: s % self.n_a,
        })
    }

    pub fn sectors(&self) -> impl Iterator<Item = SectorSpec> + '_ {
        (0..self.num_sectors()).map(|s| self.sector(s).expect("index in range"))
    }

    /// The sector whose comb contains beamspace cell `(p, q)`.
    pub fn sector_of(&self, p: usize, q: usize) -> usize {
        self.n_a * (p % self.n_e) + (q % self.n_a)
    }
}

/// One comb-like sector `A_s`, anchored at `(k_e, k_a)` with `s = N_a k_e + k_a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorSpec {
    layout: SectorLayout,
    k_e: usize,
    k_a: usize,
}

impl SectorSpec {
    pub fn new(n: usize, n_e: usize, n_a: usize, k_e: usize, k_a: usize) -> Result<Self> {
        let layout = SectorLayout::new(n, n_e, n_a)?;
        if k_e >= n_e {
            return Err(Error::config("k_e", format!("{k_e} >= N_e = {n_e}")));
        }
        if k_a >= n_a {
            return Err(Error::config("k_a", format!("{k_a} >= N_a = {n_a}")));
        }
        Ok(Self { layout, k_e, k_a })
    }

    pub fn layout(&self) -> SectorLayout {
        self.layout
    }

    pub fn n(&self) -> usize {
        self.layout.n
    }

    pub fn n_e(&self) -> usize {
        self.layout.n_e
    }

    pub fn n_a(&self) -> usize {
        self.layout.n_a
    }

    pub fn k_e(&self) -> usize {
        self.k_e
    }

    pub fn k_a(&self) -> usize {
        self.k_a
    }

    pub fn rho_e(&self) -> usize {
        self.layout.rho_e()
    }

    pub fn rho_a(&self) -> usize {
        self.layout.rho_a()
    }

    /// Sector dimension `rho_e rho_a = N^2 / S`.
    pub fn size(&self) -> usize {
        self.rho_e() * self.rho_a()
    }

    pub fn index(&self) -> usize {
        self.layout.n_a * self.k_e + self.k_a
    }

    pub fn contains(&self, p: usize, q: usize) -> bool {
        p % self.layout.n_e == self.k_e && q % self.layout.n_a == self.k_a
    }

    /// Comb cell `(n N_e + k_e, m N_a + k_a)` for comb coordinates `(n, m)`.
    pub fn cell(&self, n: usize, m: usize) -> (usize, usize) {
        (n * self.layout.n_e + self.k_e, m * self.layout.n_a + self.k_a)
    }

    /// All cells of `A_s`, row-major over `(n, m) in [rho_e] x [rho_a]`.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.size());
        for n in 0..self.rho_e() {
            for m in 0..self.rho_a() {
                out.push(self.cell(n, m));
            }
        }
        out
    }

    /// Column-major vector indices `q N + p` of `A_s`, ascending, with their cells.
    pub fn vec_indices(&self) -> Vec<(usize, (usize, usize))> {
        let n = self.n();
        let mut out: Vec<_> = self.cells().into_iter().map(|(p, q)| (q * n + p, (p, q))).collect();
        out.sort_unstable_by_key(|&(l, _)| l);
        out
    }
}
