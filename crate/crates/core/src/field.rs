//! Fourier representation of real periodic fields.
//!
//! Coefficients are stored component-major: component `c` occupies
//! `coeffs[c * len .. (c + 1) * len]` with the grid's flat mode ordering.
//! The forward transform carries `1/N^dim`, so `û(0)` is the integral mean
//! and `‖u‖²_{L2} = |Ω| Σ_k |û(k)|²`.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::fft::FftNd;
use crate::grid::PeriodicGrid;
use crate::math::{powf, powi, sqrt};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Spatial mean `⨍_Ω w dx`, one entry per component.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanVector(pub [f64; 3]);

impl MeanVector {
    pub const ZERO: MeanVector = MeanVector([0.0; 3]);

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        sqrt(self.norm_sq())
    }

    pub fn add(&self, other: &MeanVector) -> MeanVector {
        let mut out = self.0;
        for (o, b) in out.iter_mut().zip(other.0) {
            *o += b;
        }
        MeanVector(out)
    }

    pub fn scaled(&self, s: f64) -> MeanVector {
        MeanVector(self.0.map(|v| v * s))
    }
}

/// Multi-index `α` of a mixed partial derivative `∂^α`.
pub type MultiIndex = [u32; 3];

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: PeriodicGrid,
    components: usize,
    coeffs: Vec<Complex64>,
    mean_free: bool,
    solenoidal: bool,
}

impl SpectralField {
    pub fn zeros(grid: &PeriodicGrid, components: usize) -> Self {
        assert!((1..=3).contains(&components), "1 to 3 components");
        Self {
            grid: grid.clone(),
            components,
            coeffs: vec![ZERO; components * grid.len()],
            mean_free: true,
            solenoidal: components == grid.dim(),
        }
    }

    /// Wraps raw coefficients. Flags start cleared.
    pub fn from_coeffs(grid: &PeriodicGrid, components: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if !(1..=3).contains(&components) {
            return Err(invalid("components", "must be 1, 2 or 3"));
        }
        let expected = components * grid.len();
        if coeffs.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                found: coeffs.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            components,
            coeffs,
            mean_free: false,
            solenoidal: false,
        })
    }

    /// Exact DFT of physical samples (component-major, axis 0 fastest).
    pub fn transform_forward(grid: &PeriodicGrid, components: usize, samples: &[f64]) -> Result<Self> {
        Self::transform_forward_with(&grid.fft(), grid, components, samples)
    }

    pub fn transform_forward_with(
        fft: &FftNd,
        grid: &PeriodicGrid,
        components: usize,
        samples: &[f64],
    ) -> Result<Self> {
        let expected = components * grid.len();
        if samples.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                found: samples.len(),
            });
        }
        let mut coeffs: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for chunk in coeffs.chunks_mut(grid.len()) {
            fft.forward(chunk);
        }
        Self::from_coeffs(grid, components, coeffs)
    }

    /// Physical samples in the same layout [`SpectralField::transform_forward`] accepts.
    pub fn transform_backward(&self) -> Vec<f64> {
        self.transform_backward_with(&self.grid.fft())
    }

    pub fn transform_backward_with(&self, fft: &FftNd) -> Vec<f64> {
        let mut buf = self.coeffs.clone();
        for chunk in buf.chunks_mut(self.grid.len()) {
            fft.backward(chunk);
        }
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Samples a closed-form vector function at the grid points.
    pub fn from_fn<F>(grid: &PeriodicGrid, components: usize, f: F) -> Self
    where
        F: Fn([f64; 3]) -> [f64; 3],
    {
        let len = grid.len();
        let h = grid.spacing();
        let mut samples = vec![0.0; components * len];
        for idx in 0..len {
            let a = grid.axes(idx);
            let x = [a[0] as f64 * h, a[1] as f64 * h, a[2] as f64 * h];
            let v = f(x);
            for c in 0..components {
                samples[c * len + idx] = v[c];
            }
        }
        Self::transform_forward(grid, components, &samples).expect("shape matches by construction")
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        self.mean_free = false;
        self.solenoidal = false;
        &mut self.coeffs
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let len = self.grid.len();
        &self.coeffs[c * len..(c + 1) * len]
    }

    pub fn coeff(&self, c: usize, idx: usize) -> Complex64 {
        self.coeffs[c * self.grid.len() + idx]
    }

    pub fn is_mean_free(&self) -> bool {
        self.mean_free
    }

    pub fn is_solenoidal(&self) -> bool {
        self.solenoidal
    }

    pub(crate) fn set_flags(&mut self, mean_free: bool, solenoidal: bool) {
        self.mean_free = mean_free;
        self.solenoidal = solenoidal;
    }

    fn same_shape(&self, other: &SpectralField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.components != other.components {
            return Err(Error::ComponentMismatch {
                expected: self.components,
                found: other.components,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.axpy(-1.0, other)
    }

    /// `self + a * other`
    pub fn axpy(&self, a: f64, other: &SpectralField) -> Result<SpectralField> {
        self.same_shape(other)?;
        let mut out = self.clone();
        for (o, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *o += b * a;
        }
        out.mean_free = self.mean_free && other.mean_free;
        out.solenoidal = self.solenoidal && other.solenoidal;
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> SpectralField {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            *c *= s;
        }
        out
    }

    /// Largest coefficient-wise difference.
    pub fn max_abs_diff(&self, other: &SpectralField) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest violation of `û(-m) = conj(û(m))`.
    pub fn hermitian_defect(&self) -> f64 {
        let len = self.grid.len();
        let mut worst = 0.0f64;
        for c in 0..self.components {
            let comp = &self.coeffs[c * len..(c + 1) * len];
            for idx in 0..len {
                let p = self.grid.partner(idx);
                worst = worst.max((comp[p] - comp[idx].conj()).norm());
            }
        }
        worst
    }

    /// `∂^α u`, symbol `(ik)^α` per mode. Odd orders vanish on Nyquist modes.
    pub fn derivative(&self, alpha: MultiIndex) -> SpectralField {
        debug_assert!(alpha.iter().sum::<u32>() <= 3, "derivatives above third order are not needed");
        let dim = self.grid.dim();
        let mut out = self.clone();
        if alpha[dim..].iter().any(|&a| a > 0) {
            out.coeffs.iter_mut().for_each(|c| *c = ZERO);
            out.mean_free = true;
            return out;
        }
        let order: u32 = alpha.iter().sum();
        if order == 0 {
            return out;
        }
        // i^order
        let phase = match order % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        let len = self.grid.len();
        for idx in 0..len {
            let a = self.grid.axes(idx);
            let mut s = 1.0;
            for d in 0..dim {
                s *= self.grid.axis_symbol(a[d], alpha[d]);
            }
            let mult = phase * s;
            for c in 0..self.components {
                out.coeffs[c * len + idx] *= mult;
            }
        }
        out.mean_free = true;
        out.solenoidal = self.solenoidal && self.components == dim;
        out
    }

    /// Gradient of a scalar field as a `dim`-component vector field.
    pub fn gradient(&self) -> Result<SpectralField> {
        if self.components != 1 {
            return Err(Error::ComponentMismatch {
                expected: 1,
                found: self.components,
            });
        }
        let dim = self.grid.dim();
        let len = self.grid.len();
        let mut coeffs = vec![ZERO; dim * len];
        for idx in 0..len {
            let k = self.grid.wavevector_odd(idx);
            let v = self.coeffs[idx];
            for d in 0..dim {
                coeffs[d * len + idx] = Complex64::new(0.0, k[d]) * v;
            }
        }
        let mut out = SpectralField::from_coeffs(&self.grid, dim, coeffs)?;
        out.mean_free = true;
        Ok(out)
    }

    /// Spectral divergence `i k · û` of a vector field.
    pub fn divergence(&self) -> Result<SpectralField> {
        self.require_vector()?;
        let dim = self.grid.dim();
        let len = self.grid.len();
        let mut coeffs = vec![ZERO; len];
        for (idx, out) in coeffs.iter_mut().enumerate() {
            let k = self.grid.wavevector_odd(idx);
            let mut acc = ZERO;
            for d in 0..dim {
                acc += self.coeffs[d * len + idx] * k[d];
            }
            *out = Complex64::new(0.0, 1.0) * acc;
        }
        let mut out = SpectralField::from_coeffs(&self.grid, 1, coeffs)?;
        out.mean_free = true;
        Ok(out)
    }

    fn require_vector(&self) -> Result<()> {
        let dim = self.grid.dim();
        if self.components != dim {
            return Err(Error::ComponentMismatch {
                expected: dim,
                found: self.components,
            });
        }
        Ok(())
    }

    /// Leray projection `û ← û - k (k·û)/|k|²` on every mode with a nonzero
    /// first-derivative symbol. The zero mode is left untouched.
    pub fn leray_project(&self) -> Result<SpectralField> {
        self.require_vector()?;
        let mut out = self.clone();
        leray_in_place(&self.grid, &mut out.coeffs);
        out.solenoidal = true;
        Ok(out)
    }

    /// Integral mean `⨍_Ω u dx` (the rescaled zero mode).
    pub fn mean(&self) -> MeanVector {
        let mut m = [0.0; 3];
        for (c, slot) in m.iter_mut().enumerate().take(self.components) {
            *slot = self.coeff(c, 0).re;
        }
        MeanVector(m)
    }

    pub fn subtract_mean(&self) -> SpectralField {
        let mut out = self.clone();
        let len = self.grid.len();
        for c in 0..self.components {
            out.coeffs[c * len] = ZERO;
        }
        out.mean_free = true;
        out
    }

    /// Sets the zero mode to `mean`, leaving every other mode unchanged.
    pub fn with_mean(&self, mean: &MeanVector) -> SpectralField {
        let mut out = self.clone();
        let len = self.grid.len();
        for c in 0..self.components {
            out.coeffs[c * len] = Complex64::new(mean.0[c], 0.0);
        }
        out.mean_free = mean.0.iter().take(self.components).all(|&v| v == 0.0);
        out
    }

    /// `⟨u, v⟩_{L2(Ω)}`
    pub fn inner(&self, other: &SpectralField) -> Result<f64> {
        self.same_shape(other)?;
        let s: f64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a * b.conj()).re)
            .sum();
        Ok(s * self.grid.volume())
    }

    /// `Σ_{|α| ≤ s} ‖D^α u‖²_{L2}` (squared ℓ²-combination over multi-indices).
    pub fn sobolev_sq(&self, s: u32) -> Result<f64> {
        if s > 3 {
            return Err(invalid("s", "Sobolev order must be 0..=3"));
        }
        let len = self.grid.len();
        let weights = sobolev_weights(&self.grid, s);
        let mut acc = 0.0;
        for c in 0..self.components {
            let comp = &self.coeffs[c * len..(c + 1) * len];
            acc += comp
                .iter()
                .zip(&weights)
                .map(|(v, w)| w * v.norm_sqr())
                .sum::<f64>();
        }
        Ok(acc * self.grid.volume())
    }

    pub fn sobolev_norm(&self, s: u32) -> Result<f64> {
        Ok(sqrt(self.sobolev_sq(s)?))
    }

    /// `‖∇^order u‖²_{L2}` with the full (Frobenius) tensor norm, i.e.
    /// `|Ω| Σ_k |k|^{2·order} |û(k)|²`. This is the quantity energy identities produce.
    pub fn grad_seminorm_sq(&self, order: u32) -> f64 {
        let len = self.grid.len();
        let dim = self.grid.dim();
        let mut acc = 0.0;
        for idx in 0..len {
            let a = self.grid.axes(idx);
            // Σ_d (symbol_1)^2 for odd pieces, matching the derivative operator.
            let w = if order == 0 {
                1.0
            } else {
                let mut ksq_even = 0.0;
                let mut ksq_odd = 0.0;
                for d in 0..dim {
                    let se = self.grid.axis_symbol(a[d], 2);
                    let so = self.grid.axis_symbol(a[d], 1);
                    ksq_even += se;
                    ksq_odd += so * so;
                }
                // ∇^{2j} uses |k|^{2j}; one extra odd derivative uses the odd symbol.
                let half = order / 2;
                let mut w = powi(ksq_even, 2 * half as i32);
                if order % 2 == 1 {
                    w *= ksq_odd;
                }
                w
            };
            if w == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for c in 0..self.components {
                s += self.coeffs[c * len + idx].norm_sqr();
            }
            acc += w * s;
        }
        acc * self.grid.volume()
    }

    /// `‖u‖_{L_p}` by equal-weight quadrature of `|u|^p` in physical space,
    /// `p ∈ {2, 3, 4, 6, ∞}`; `|u|` is the Euclidean norm over components.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        let values = self.transform_backward();
        lp_norm_of_samples(&self.grid, self.components, &values, p)
    }

    /// 2/3-rule truncation: zero every mode with some `|m_i| > N/3`.
    pub fn dealias(&self) -> SpectralField {
        let mut out = self.clone();
        dealias_in_place(&self.grid, &mut out.coeffs);
        out
    }

    /// Embeds an `x₃`-independent 2D field into the 3D box with the same `L`, `N`.
    /// Vector fields gain a zero third component.
    pub fn lift_2d_to_3d(&self, grid3: &PeriodicGrid) -> Result<SpectralField> {
        if self.grid.dim() != 2 || grid3.dim() != 3 || !self.grid.compatible_3d(grid3) {
            return Err(Error::GridMismatch);
        }
        let comps = if self.components == 2 { 3 } else { self.components };
        let len2 = self.grid.len();
        let len3 = grid3.len();
        let mut coeffs = vec![ZERO; comps * len3];
        for c in 0..self.components {
            // k₃ = 0 plane is the first n² entries of each component.
            coeffs[c * len3..c * len3 + len2].copy_from_slice(self.component(c));
        }
        let mut out = SpectralField::from_coeffs(grid3, comps, coeffs)?;
        out.mean_free = self.mean_free;
        out.solenoidal = self.solenoidal && comps == 3;
        Ok(out)
    }
}

/// Per-mode weight `Σ_{|α| ≤ s} Π_i |sym_{α_i}(k_i)|²`.
pub fn sobolev_weights(grid: &PeriodicGrid, s: u32) -> Vec<f64> {
    let dim = grid.dim();
    let mut alphas: Vec<[u32; 3]> = Vec::new();
    for a0 in 0..=s {
        for a1 in 0..=(s - a0) {
            if dim == 2 {
                alphas.push([a0, a1, 0]);
            } else {
                for a2 in 0..=(s - a0 - a1) {
                    alphas.push([a0, a1, a2]);
                }
            }
        }
    }
    (0..grid.len())
        .map(|idx| {
            let ax = grid.axes(idx);
            alphas
                .iter()
                .map(|alpha| {
                    let mut w = 1.0;
                    for d in 0..dim {
                        let sym = grid.axis_symbol(ax[d], alpha[d]);
                        w *= sym * sym;
                    }
                    w
                })
                .sum()
        })
        .collect()
}

pub(crate) fn leray_in_place(grid: &PeriodicGrid, coeffs: &mut [Complex64]) {
    let dim = grid.dim();
    let len = grid.len();
    for idx in 1..len {
        let k = grid.wavevector_odd(idx);
        let ksq: f64 = k.iter().map(|v| v * v).sum();
        if ksq == 0.0 {
            continue;
        }
        let mut kdotu = ZERO;
        for d in 0..dim {
            kdotu += coeffs[d * len + idx] * k[d];
        }
        let f = kdotu / ksq;
        for d in 0..dim {
            coeffs[d * len + idx] -= f * k[d];
        }
    }
}

pub(crate) fn dealias_in_place(grid: &PeriodicGrid, coeffs: &mut [Complex64]) {
    let len = grid.len();
    for idx in 0..len {
        if grid.is_aliased(idx) {
            for c in coeffs.chunks_mut(len) {
                c[idx] = ZERO;
            }
        }
    }
}

/// Equal-weight quadrature `(L/N)^dim Σ |u(x)|^p` of component-major samples.
pub fn lp_norm_of_samples(grid: &PeriodicGrid, components: usize, values: &[f64], p: f64) -> Result<f64> {
    let len = grid.len();
    if values.len() != components * len {
        return Err(Error::ShapeMismatch {
            expected: components * len,
            found: values.len(),
        });
    }
    let mag_sq = |idx: usize| -> f64 { (0..components).map(|c| powi(values[c * len + idx], 2)).sum() };
    if p == f64::INFINITY {
        return Ok((0..len).map(|i| sqrt(mag_sq(i))).fold(0.0, f64::max));
    }
    let ip = p as i32;
    if !(p == 2.0 || p == 3.0 || p == 4.0 || p == 6.0) {
        return Err(invalid("p", "supported exponents are 2, 3, 4, 6 and infinity"));
    }
    let cell = grid.volume() / len as f64;
    let sum: f64 = (0..len)
        .map(|i| {
            let m2 = mag_sq(i);
            match ip {
                2 => m2,
                4 => m2 * m2,
                6 => m2 * m2 * m2,
                _ => m2 * sqrt(m2),
            }
        })
        .sum();
    Ok(powf(sum * cell, 1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{cos, sin, PI, TAU};

    fn grid3(n: usize) -> PeriodicGrid {
        PeriodicGrid::new(TAU, 3, n).unwrap()
    }

    #[test]
    fn constant_field_is_pure_zero_mode() {
        let g = grid3(8);
        let f = SpectralField::from_fn(&g, 1, |_| [2.5, 0.0, 0.0]);
        assert!((f.coeff(0, 0).re - 2.5).abs() < 1e-15);
        assert!(f.coeffs()[1..].iter().all(|c| c.norm() < 1e-15));
        assert!((f.mean().0[0] - 2.5).abs() < 1e-15);
        assert!(f.subtract_mean().max_abs_coeff() < 1e-15);
        assert!(f.derivative([1, 0, 0]).max_abs_coeff() < 1e-15);
    }

    #[test]
    fn single_sine_has_two_modes() {
        let g = PeriodicGrid::new(3.0, 3, 8).unwrap();
        let f = SpectralField::from_fn(&g, 1, |x| [sin(TAU * x[0] / 3.0), 0.0, 0.0]);
        for idx in 0..g.len() {
            let m = g.mode(idx);
            let c = f.coeff(0, idx);
            if m == [1, 0, 0] {
                assert!((c - Complex64::new(0.0, -0.5)).norm() < 1e-15);
            } else if m == [-1, 0, 0] {
                assert!((c - Complex64::new(0.0, 0.5)).norm() < 1e-15);
            } else {
                assert!(c.norm() < 1e-15);
            }
        }
        assert!(f.mean().0[0].abs() < 1e-16);
    }

    #[test]
    fn derivative_of_sine_is_cosine() {
        let l = 2.0;
        let g = PeriodicGrid::new(l, 2, 16).unwrap();
        let f = SpectralField::from_fn(&g, 1, |x| [sin(TAU * x[0] / l), 0.0, 0.0]);
        let d = f.derivative([1, 0, 0]).transform_backward();
        let h = g.spacing();
        for idx in 0..g.len() {
            let x0 = g.axes(idx)[0] as f64 * h;
            assert!((d[idx] - TAU / l * cos(TAU * x0 / l)).abs() < 1e-13);
        }
    }

    #[test]
    fn l2_and_h1_norms_of_sine() {
        let g = grid3(16);
        let f = SpectralField::from_fn(&g, 1, |x| [sin(x[0]), 0.0, 0.0]);
        let l2 = f.sobolev_sq(0).unwrap();
        assert!((l2 - 4.0 * PI.powi(3)).abs() < 1e-10);
        assert!((f.sobolev_sq(1).unwrap() - 8.0 * PI.powi(3)).abs() < 1e-10);
        assert!(f.sobolev_sq(4).is_err());
        let l4 = f.lp_norm(4.0).unwrap().powi(4);
        assert!((l4 - 3.0 / 8.0 * TAU.powi(3)).abs() < 1e-10);
        assert!(f.lp_norm(5.0).is_err());
    }

    #[test]
    fn projection_kills_gradients() {
        let g = grid3(8);
        let phi = SpectralField::from_fn(&g, 1, |x| [sin(x[0]), 0.0, 0.0]);
        let grad = phi.gradient().unwrap();
        assert!(grad.max_abs_coeff() > 0.1);
        let p = grad.leray_project().unwrap();
        assert!(p.max_abs_coeff() < 1e-15);
        assert!(phi.leray_project().is_err());
    }

    #[test]
    fn dealias_removes_nyquist() {
        let g = grid3(8);
        let mut f = SpectralField::zeros(&g, 1);
        let idx = g.flat([4, 0, 0]);
        f.coeffs_mut()[idx] = Complex64::new(1.0, 0.0);
        assert!(f.dealias().max_abs_coeff() == 0.0);
        let mut low = SpectralField::zeros(&g, 1);
        low.coeffs_mut()[g.flat([2, 1, 0])] = Complex64::new(0.3, 0.1);
        assert_eq!(low.dealias(), low);
    }

    #[test]
    fn lift_rejects_mismatch_and_zeroes_third_axis() {
        let g2 = PeriodicGrid::new(TAU, 2, 8).unwrap();
        let g3 = grid3(8);
        let bad = PeriodicGrid::new(TAU, 3, 16).unwrap();
        let v = SpectralField::from_fn(&g2, 2, |x| [sin(x[0]) * cos(x[1]), -cos(x[0]) * sin(x[1]), 0.0]);
        assert!(v.lift_2d_to_3d(&bad).is_err());
        let lifted = v.lift_2d_to_3d(&g3).unwrap();
        assert_eq!(lifted.components(), 3);
        assert!(lifted.derivative([0, 0, 1]).max_abs_coeff() == 0.0);
        for idx in 0..g3.len() {
            if g3.mode(idx)[2] != 0 {
                assert!((0..3).all(|c| lifted.coeff(c, idx).norm() == 0.0));
            }
        }
        let r = lifted.sobolev_sq(0).unwrap() / v.sobolev_sq(0).unwrap();
        assert!((r - TAU).abs() < 1e-12);
    }
}
