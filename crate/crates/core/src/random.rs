//! Seeded random fields.

use alloc::vec::Vec;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::field::SpectralField;
use crate::grid::PeriodicGrid;
use crate::math::{cos, exp, ln, sin, sqrt, TAU};

/// Deterministic generator; identical seeds give bitwise identical fields.
#[derive(Debug, Clone)]
pub struct FieldRng {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl FieldRng {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box–Muller.
    pub fn normal(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = sqrt(-2.0 * ln(u1));
        let (s, c) = (sin(TAU * u2), cos(TAU * u2));
        self.spare = Some(r * s);
        r * c
    }
}

/// Radial envelope applied to white noise in Fourier space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Spectrum {
    /// Flat amplitude on `1 <= |m|_∞ <= max_mode`.
    Flat { max_mode: i64 },
    /// `e^{-|k|²/k0²}` on `1 <= |m|_2 <= max_mode`.
    Gaussian { k0: f64, max_mode: f64 },
}

impl Spectrum {
    fn weight(&self, grid: &PeriodicGrid, idx: usize) -> f64 {
        let m = grid.mode(idx);
        if m.iter().all(|&v| v == 0) {
            return 0.0;
        }
        match *self {
            Spectrum::Flat { max_mode } => {
                if m.iter().all(|v| v.abs() <= max_mode) {
                    1.0
                } else {
                    0.0
                }
            }
            Spectrum::Gaussian { k0, max_mode } => {
                let msq: i64 = m.iter().map(|v| v * v).sum();
                if (msq as f64) > max_mode * max_mode {
                    return 0.0;
                }
                let k = grid.wavevector(idx);
                let ksq: f64 = k.iter().map(|v| v * v).sum();
                exp(-ksq / (k0 * k0))
            }
        }
    }
}

/// Real white noise, transformed and shaped by `spectrum`. Modes touching the
/// Nyquist plane are always dropped. The result is mean-free.
pub fn random_field(grid: &PeriodicGrid, components: usize, spectrum: Spectrum, rng: &mut FieldRng) -> SpectralField {
    let len = grid.len();
    let samples: Vec<f64> = (0..components * len).map(|_| rng.normal()).collect();
    let mut f = SpectralField::transform_forward(grid, components, &samples).expect("shape matches");
    let half = (grid.n() / 2) as i64;
    let weights: Vec<f64> = (0..len)
        .map(|idx| {
            if grid.mode(idx).contains(&half) {
                0.0
            } else {
                spectrum.weight(grid, idx)
            }
        })
        .collect();
    let coeffs = f.coeffs_mut();
    for chunk in coeffs.chunks_mut(len) {
        for (c, w) in chunk.iter_mut().zip(&weights) {
            *c *= *w;
        }
    }
    f.subtract_mean()
}

/// Random divergence-free, mean-free vector field.
pub fn random_solenoidal(grid: &PeriodicGrid, spectrum: Spectrum, rng: &mut FieldRng) -> SpectralField {
    random_field(grid, grid.dim(), spectrum, rng)
        .leray_project()
        .expect("vector field")
        .subtract_mean()
}
