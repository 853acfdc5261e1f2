//! Mixed-radix complex FFT over 1, 2 or 3 axes.
//!
//! Summation order depends only on the transform length, so results are
//! bitwise reproducible for a given grid.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::math::{cos, sin, TAU};

#[derive(Debug, Clone)]
pub struct Fft {
    n: usize,
    factors: Vec<usize>,
    /// `e^{-2πi j/n}` for `j < n`.
    twiddles: Vec<Complex64>,
}

impl Fft {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "FFT length must be positive");
        let mut factors = Vec::new();
        let mut rest = n;
        for p in [4usize, 2, 3, 5] {
            while rest.is_multiple_of(p) {
                factors.push(p);
                rest /= p;
            }
        }
        let mut p = 7;
        while rest > 1 {
            while rest.is_multiple_of(p) {
                factors.push(p);
                rest /= p;
            }
            p += 2;
        }
        let twiddles = (0..n)
            .map(|j| {
                let a = -TAU * j as f64 / n as f64;
                Complex64::new(cos(a), sin(a))
            })
            .collect();
        Self {
            n,
            factors,
            twiddles,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized transform of `input` into `output`.
    /// `inverse` selects the `e^{+2πi jk/n}` kernel.
    pub fn process(&self, input: &[Complex64], output: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(input.len(), self.n);
        debug_assert_eq!(output.len(), self.n);
        self.recurse(input, 1, 1, output, &self.factors, inverse);
    }

    #[inline]
    fn twiddle(&self, idx: usize, inverse: bool) -> Complex64 {
        let w = self.twiddles[idx % self.n];
        if inverse {
            w.conj()
        } else {
            w
        }
    }

    fn recurse(
        &self,
        src: &[Complex64],
        src_stride: usize,
        tw_stride: usize,
        dst: &mut [Complex64],
        factors: &[usize],
        inverse: bool,
    ) {
        let n = dst.len();
        if n == 1 {
            dst[0] = src[0];
            return;
        }
        let p = factors[0];
        let m = n / p;
        for r in 0..p {
            self.recurse(
                &src[r * src_stride..],
                src_stride * p,
                tw_stride * p,
                &mut dst[r * m..(r + 1) * m],
                &factors[1..],
                inverse,
            );
        }
        // Twiddle table index for ω_n^j is j * tw_stride.
        let root_p = self.n / p;
        match p {
            2 => {
                for k in 0..m {
                    let a = dst[k];
                    let b = dst[m + k] * self.twiddle(k * tw_stride, inverse);
                    dst[k] = a + b;
                    dst[m + k] = a - b;
                }
            }
            4 => {
                let j = if inverse {
                    Complex64::new(0.0, 1.0)
                } else {
                    Complex64::new(0.0, -1.0)
                };
                for k in 0..m {
                    let a0 = dst[k];
                    let a1 = dst[m + k] * self.twiddle(k * tw_stride, inverse);
                    let a2 = dst[2 * m + k] * self.twiddle(2 * k * tw_stride, inverse);
                    let a3 = dst[3 * m + k] * self.twiddle(3 * k * tw_stride, inverse);
                    let s02 = a0 + a2;
                    let d02 = a0 - a2;
                    let s13 = a1 + a3;
                    let d13 = (a1 - a3) * j;
                    dst[k] = s02 + s13;
                    dst[m + k] = d02 + d13;
                    dst[2 * m + k] = s02 - s13;
                    dst[3 * m + k] = d02 - d13;
                }
            }
            _ => {
                let mut t = vec![Complex64::new(0.0, 0.0); p];
                for k in 0..m {
                    for (r, tr) in t.iter_mut().enumerate() {
                        *tr = dst[r * m + k] * self.twiddle(r * k * tw_stride, inverse);
                    }
                    for q in 0..p {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for (r, tr) in t.iter().enumerate() {
                            acc += *tr * self.twiddle(root_p * ((r * q) % p), inverse);
                        }
                        dst[q * m + k] = acc;
                    }
                }
            }
        }
    }
}

/// Separable transform over a cubic `n^dim` array stored with axis 0 fastest.
#[derive(Debug, Clone)]
pub struct FftNd {
    n: usize,
    dim: usize,
    plan: Fft,
}

impl FftNd {
    pub fn new(n: usize, dim: usize) -> Self {
        Self {
            n,
            dim,
            plan: Fft::new(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Forward transform scaled by `1/n^dim`, so the zero mode is the sample mean.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, false);
        let scale = 1.0 / self.len() as f64;
        for c in data.iter_mut() {
            *c *= scale;
        }
    }

    /// Unscaled inverse of [`FftNd::forward`].
    pub fn backward(&self, data: &mut [Complex64]) {
        self.apply(data, true);
    }

    fn apply(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.len(), "array does not match FFT grid");
        let n = self.n;
        let zero = Complex64::new(0.0, 0.0);
        let mut line = vec![zero; n];
        let mut out = vec![zero; n];
        let total = data.len();
        for axis in 0..self.dim {
            let stride = n.pow(axis as u32);
            let block = stride * n;
            for outer in (0..total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    if stride == 1 {
                        self.plan
                            .process(&data[base..base + n], &mut out, inverse);
                        data[base..base + n].copy_from_slice(&out);
                    } else {
                        for (j, l) in line.iter_mut().enumerate() {
                            *l = data[base + j * stride];
                        }
                        self.plan.process(&line, &mut out, inverse);
                        for (j, o) in out.iter().enumerate() {
                            data[base + j * stride] = *o;
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[Complex64], inverse: bool) -> Vec<Complex64> {
        let n = x.len();
        let sign = if inverse { 1.0 } else { -1.0 };
        (0..n)
            .map(|k| {
                x.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (j, v)| {
                    let a = sign * TAU * ((j * k) % n) as f64 / n as f64;
                    acc + v * Complex64::new(cos(a), sin(a))
                })
            })
            .collect()
    }

    fn signal(n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|j| Complex64::new(sin(1.3 * j as f64 + 0.2), cos(0.7 * (j * j) as f64)))
            .collect()
    }

    #[test]
    fn matches_naive_for_mixed_lengths() {
        for n in [1usize, 2, 3, 4, 6, 8, 10, 12, 14, 16, 18, 30, 32, 48, 64] {
            let x = signal(n);
            let plan = Fft::new(n);
            for inverse in [false, true] {
                let mut y = vec![Complex64::new(0.0, 0.0); n];
                plan.process(&x, &mut y, inverse);
                let z = naive_dft(&x, inverse);
                for (a, b) in y.iter().zip(&z) {
                    assert!((a - b).norm() < 1e-11 * n as f64, "n={n} inverse={inverse}");
                }
            }
        }
    }

    #[test]
    fn nd_roundtrip() {
        for (n, dim) in [(8usize, 2usize), (6, 3), (16, 3)] {
            let plan = FftNd::new(n, dim);
            let x = signal(plan.len());
            let mut y = x.clone();
            plan.forward(&mut y);
            plan.backward(&mut y);
            for (a, b) in x.iter().zip(&y) {
                assert!((a - b).norm() < 1e-13);
            }
        }
    }
}
