use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::math::{powi, TAU};

/// Cubic periodic box `[0, L]^dim` sampled with `n` points per axis.
///
/// Mode index `j` along an axis maps to the integer wavenumber
/// `m = j` for `j <= n/2` and `m = j - n` otherwise, so the stored band is
/// `{-n/2+1, ..., n/2}`.
#[derive(Debug, Clone)]
pub struct PeriodicGrid {
    length: f64,
    dim: usize,
    n: usize,
    modes: Vec<i64>,
    k_even: Vec<f64>,
    k_odd: Vec<f64>,
}

impl PartialEq for PeriodicGrid {
    fn eq(&self, other: &Self) -> bool {
        self.length == other.length && self.dim == other.dim && self.n == other.n
    }
}

impl PeriodicGrid {
    pub fn new(length: f64, dim: usize, n: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("box length {length} must be positive")));
        }
        if !(dim == 2 || dim == 3) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{2, 3}}")));
        }
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "resolution {n} must be even and at least 4"
            )));
        }
        let unit = TAU / length;
        let modes: Vec<i64> = (0..n)
            .map(|j| if j <= n / 2 { j as i64 } else { j as i64 - n as i64 })
            .collect();
        let k_even = modes.iter().map(|&m| unit * m as f64).collect();
        let k_odd = modes
            .iter()
            .map(|&m| if m == (n / 2) as i64 { 0.0 } else { unit * m as f64 })
            .collect();
        Ok(Self {
            length,
            dim,
            n,
            modes,
            k_even,
            k_odd,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of grid points (and of stored modes) per component.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `|Ω| = L^dim`.
    pub fn volume(&self) -> f64 {
        powi(self.length, self.dim as i32)
    }

    /// Lowest nonzero wavenumber `2π/L`.
    pub fn k_min(&self) -> f64 {
        TAU / self.length
    }

    /// Lowest eigenvalue `(2π/L)^2` of `-Δ` on mean-free fields.
    pub fn kappa(&self) -> f64 {
        self.k_min() * self.k_min()
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn fft(&self) -> FftNd {
        FftNd::new(self.n, self.dim)
    }

    /// Per-axis array indices of a flat index (axis 0 fastest); unused axes are 0.
    #[inline]
    pub fn axes(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        match self.dim {
            2 => [idx % n, idx / n, 0],
            _ => [idx % n, (idx / n) % n, idx / (n * n)],
        }
    }

    #[inline]
    pub fn flat(&self, axes: [usize; 3]) -> usize {
        let n = self.n;
        match self.dim {
            2 => axes[0] + n * axes[1],
            _ => axes[0] + n * (axes[1] + n * axes[2]),
        }
    }

    /// Integer wavenumber vector of a flat mode index.
    #[inline]
    pub fn mode(&self, idx: usize) -> [i64; 3] {
        let a = self.axes(idx);
        let mut m = [0; 3];
        for d in 0..self.dim {
            m[d] = self.modes[a[d]];
        }
        m
    }

    /// Flat index of the mode `-m` (Hermitian partner).
    #[inline]
    pub fn partner(&self, idx: usize) -> usize {
        let a = self.axes(idx);
        let mut b = [0; 3];
        for d in 0..self.dim {
            b[d] = (self.n - a[d]) % self.n;
        }
        self.flat(b)
    }

    /// Physical wavevector `(2π/L) m`, used for even-order multipliers.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let a = self.axes(idx);
        let mut k = [0.0; 3];
        for d in 0..self.dim {
            k[d] = self.k_even[a[d]];
        }
        k
    }

    /// Wavevector with the Nyquist component zeroed: the symbol of a
    /// first derivative, which must vanish there to keep real fields real.
    #[inline]
    pub fn wavevector_odd(&self, idx: usize) -> [f64; 3] {
        let a = self.axes(idx);
        let mut k = [0.0; 3];
        for d in 0..self.dim {
            k[d] = self.k_odd[a[d]];
        }
        k
    }

    /// Symbol magnitude of `∂^order` along one axis at array index `j`.
    #[inline]
    pub(crate) fn axis_symbol(&self, j: usize, order: u32) -> f64 {
        if order == 0 {
            1.0
        } else if order % 2 == 1 {
            powi(self.k_odd[j], order as i32)
        } else {
            powi(self.k_even[j], order as i32)
        }
    }

    /// True if any `|m_i| > n/3` (outside the 2/3-rule band).
    #[inline]
    pub fn is_aliased(&self, idx: usize) -> bool {
        let cut = (self.n / 3) as i64;
        self.mode(idx).iter().any(|m| m.abs() > cut)
    }

    pub fn compatible_3d(&self, other: &PeriodicGrid) -> bool {
        self.length == other.length && self.n == other.n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(PeriodicGrid::new(1.0, 3, 6).is_ok());
        assert!(PeriodicGrid::new(1.0, 3, 2).is_err());
        assert!(PeriodicGrid::new(1.0, 3, 7).is_err());
        assert!(PeriodicGrid::new(0.0, 3, 8).is_err());
        assert!(PeriodicGrid::new(1.0, 1, 8).is_err());
    }

    #[test]
    fn partner_negates_mode() {
        let g = PeriodicGrid::new(TAU, 3, 8).unwrap();
        for idx in 0..g.len() {
            let m = g.mode(idx);
            let p = g.mode(g.partner(idx));
            for d in 0..3 {
                if m[d] == 4 {
                    assert_eq!(p[d], 4);
                } else {
                    assert_eq!(p[d], -m[d]);
                }
            }
        }
    }
}
