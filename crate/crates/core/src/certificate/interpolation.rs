//! Interpolation inequalities on the box and the rate constants assembled from them.
//!
//! Every constant is expressed in the 3D box measure. Planar fields (no `x₃`
//! dependence) are measured over the full box as well, so averaged-measure
//! constants convert with `|Ω|^{1/p - 1/2}` for both kinds.
//!
//! Fields are assumed free of Nyquist-plane content, which the solver keeps
//! true for seeded data; on such a mode a first derivative vanishes and no
//! interpolation bound can hold.

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::field::{lp_norm_of_samples, sobolev_weights};
use crate::grid::PeriodicGrid;
use crate::math::{powf, powi, sqrt};
use crate::random::{random_field, FieldRng, Spectrum};

use super::PoincareConstants;

/// Headroom applied to calibrated Rayleigh maxima.
pub const CALIBRATION_HEADROOM: f64 = 1.1;
/// Smallest calibration set accepted.
pub const MIN_CALIBRATION_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantsMode {
    AnalyticConservative,
    EmpiricalCalibrated,
}

impl ConstantsMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConstantsMode::AnalyticConservative => "analytic_conservative",
            ConstantsMode::EmpiricalCalibrated => "empirical_calibrated",
        }
    }
}

/// Constants `K` of the five inequalities used for mean-free fields `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityConstants {
    /// Planar `‖w‖_{L3} ≤ K ‖w‖^{2/3} ‖∇w‖^{1/3}`.
    pub l3_planar: f64,
    /// `‖w‖_{L3} ≤ K ‖w‖^{1/2} ‖∇w‖^{1/2}` in 3D.
    pub l3_spatial: f64,
    /// `‖w‖_{L6} ≤ K ‖∇w‖` in 3D.
    pub l6_spatial: f64,
    /// Planar `‖w‖_{L4} ≤ K ‖w‖^{1/2} ‖∇w‖^{1/2}`.
    pub l4_planar: f64,
    /// Planar `‖w‖_{L∞} ≤ K ‖w‖_{H²}`.
    pub linf_planar: f64,
}

/// One inequality shape: `‖w‖_{Lp} ≤ K ‖w‖^{1-θ} ‖∇w‖^θ`.
#[derive(Debug, Clone, Copy)]
struct Shape {
    p: f64,
    theta: f64,
}

const L3_PLANAR: Shape = Shape { p: 3.0, theta: 1.0 / 3.0 };
const L3_SPATIAL: Shape = Shape { p: 3.0, theta: 0.5 };
const L6_SPATIAL: Shape = Shape { p: 6.0, theta: 1.0 };
const L4_PLANAR: Shape = Shape { p: 4.0, theta: 0.5 };

fn to_box(k_avg: f64, p: f64, volume: f64) -> f64 {
    k_avg * powf(volume, 1.0 / p - 0.5)
}

/// Modes that carry no Nyquist component, excluding zero.
fn interior_modes(grid: &PeriodicGrid) -> impl Iterator<Item = usize> + '_ {
    let half = (grid.n() / 2) as i64;
    (1..grid.len()).filter(move |&i| grid.mode(i).iter().all(|m| m.abs() != half))
}

/// Averaged-measure constant from Hausdorff–Young plus a frequency split.
///
/// With `s = p/(p-1)`, `‖w‖_p ≤ ‖ŵ‖_{ℓ^s}` and for any radius `R`
/// `‖ŵ‖_s^s ≤ n(R)^{1-s/2} a^s + H(R)^{1-s/2} b^s`, where `a`, `b` are the
/// averaged `L2` norms of `w`, `∇w`, `n(R)` counts lattice points with
/// `|k| ≤ R`, and `H(R) = Σ_{|k|>R} |k|^{-2s/(2-s)}`. The ratio `ρ = b/a`
/// lives in `[k_min, k_max]`; the sup over `ρ` is taken cell by cell on a
/// geometric grid, using the upper end in the numerator and the lower end in
/// the denominator.
fn hausdorff_young(kabs: &[f64], shape: Shape) -> f64 {
    let s = shape.p / (shape.p - 1.0);
    let u = 2.0 * s / (2.0 - s);
    let e = 1.0 - 0.5 * s;
    let mut k: Vec<f64> = kabs.to_vec();
    k.sort_by(|a, b| a.partial_cmp(b).expect("finite wavenumbers"));
    let kmin = k[0];
    let kmax = k[k.len() - 1];
    // Split candidates at shell boundaries: (count below, tail sum above).
    let mut splits: Vec<(f64, f64)> = Vec::new();
    let mut tail: f64 = k.iter().map(|v| powf(*v, -u)).sum();
    splits.push((0.0, tail));
    let mut i = 0;
    while i < k.len() {
        let shell = k[i];
        while i < k.len() && k[i] <= shell * (1.0 + 1e-12) {
            tail -= powf(k[i], -u);
            i += 1;
        }
        splits.push((i as f64, tail.max(0.0)));
    }
    let bound_at = |rho_hi: f64, rho_lo: f64| -> f64 {
        let best = splits
            .iter()
            .map(|&(n, h)| {
                let low = if n > 0.0 { powf(n, e) } else { 0.0 };
                let high = if h > 0.0 { powf(h, e) * powf(rho_hi, s) } else { 0.0 };
                low + high
            })
            .fold(f64::INFINITY, f64::min);
        powf(best, 1.0 / s) / powf(rho_lo, shape.theta)
    };
    let step = 1.01;
    let mut worst = 0.0f64;
    let mut lo = kmin;
    while lo < kmax {
        let hi = (lo * step).min(kmax);
        worst = worst.max(bound_at(hi, lo));
        lo = hi;
    }
    worst.max(bound_at(kmin, kmin))
}

fn planar_grid(grid3: &PeriodicGrid) -> Result<PeriodicGrid> {
    PeriodicGrid::new(grid3.length(), 2, grid3.n())
}

fn odd_magnitudes(grid: &PeriodicGrid) -> Vec<f64> {
    interior_modes(grid)
        .map(|i| {
            let k = grid.wavevector_odd(i);
            sqrt(k.iter().map(|v| v * v).sum())
        })
        .collect()
}

impl InequalityConstants {
    /// Conservative bounds valid for every Nyquist-free mean-free field on
    /// the `L`, `N` lattice of `grid3`.
    pub fn analytic(grid3: &PeriodicGrid) -> Result<Self> {
        if grid3.dim() != 3 {
            return Err(invalid("grid", "constants are built for the 3D box"));
        }
        let g2 = planar_grid(grid3)?;
        let vol = grid3.volume();
        let k2 = odd_magnitudes(&g2);
        let k3 = odd_magnitudes(grid3);
        let w2 = sobolev_weights(&g2, 2);
        let inv_w: f64 = interior_modes(&g2).map(|i| 1.0 / w2[i]).sum();
        Ok(Self {
            l3_planar: to_box(hausdorff_young(&k2, L3_PLANAR), 3.0, vol),
            l3_spatial: to_box(hausdorff_young(&k3, L3_SPATIAL), 3.0, vol),
            l6_spatial: to_box(hausdorff_young(&k3, L6_SPATIAL), 6.0, vol),
            l4_planar: to_box(hausdorff_young(&k2, L4_PLANAR), 4.0, vol),
            linf_planar: sqrt(inv_w) / sqrt(vol),
        })
    }

    /// Largest Rayleigh ratios over `samples` random band-limited fields per
    /// dimension, in box measure, without headroom.
    pub fn rayleigh_maxima(grid3: &PeriodicGrid, seed: u64, samples: usize) -> Result<Self> {
        if grid3.dim() != 3 {
            return Err(invalid("grid", "constants are built for the 3D box"));
        }
        let g2 = planar_grid(grid3)?;
        let vol = grid3.volume();
        let mut rng = FieldRng::new(seed);
        let mut out = Self {
            l3_planar: 0.0,
            l3_spatial: 0.0,
            l6_spatial: 0.0,
            l4_planar: 0.0,
            linf_planar: 0.0,
        };
        let fft2 = g2.fft();
        let fft3 = grid3.fft();
        for _ in 0..samples {
            let spec = draw_spectrum(&g2, &mut rng);
            let w = random_field(&g2, 1, spec, &mut rng);
            let area = g2.volume();
            let a = sqrt(w.sobolev_sq(0)? / area);
            let b = sqrt(w.grad_seminorm_sq(1) / area);
            let h2 = sqrt(w.sobolev_sq(2)? / area);
            if a == 0.0 {
                continue;
            }
            let x = w.transform_backward_with(&fft2);
            let l3 = lp_norm_of_samples(&g2, 1, &x, 3.0)? / powf(area, 1.0 / 3.0);
            let l4 = lp_norm_of_samples(&g2, 1, &x, 4.0)? / powf(area, 0.25);
            let linf = lp_norm_of_samples(&g2, 1, &x, f64::INFINITY)?;
            out.l3_planar = out.l3_planar.max(to_box(l3 / (powf(a, 2.0 / 3.0) * powf(b, 1.0 / 3.0)), 3.0, vol));
            out.l4_planar = out.l4_planar.max(to_box(l4 / sqrt(a * b), 4.0, vol));
            out.linf_planar = out.linf_planar.max(linf / h2 / sqrt(vol));

            let spec = draw_spectrum(grid3, &mut rng);
            let w = random_field(grid3, 1, spec, &mut rng);
            let a = sqrt(w.sobolev_sq(0)? / vol);
            let b = sqrt(w.grad_seminorm_sq(1) / vol);
            if a == 0.0 {
                continue;
            }
            let x = w.transform_backward_with(&fft3);
            let l3 = lp_norm_of_samples(grid3, 1, &x, 3.0)? / powf(vol, 1.0 / 3.0);
            let l6 = lp_norm_of_samples(grid3, 1, &x, 6.0)? / powf(vol, 1.0 / 6.0);
            out.l3_spatial = out.l3_spatial.max(to_box(l3 / sqrt(a * b), 3.0, vol));
            out.l6_spatial = out.l6_spatial.max(to_box(l6 / b, 6.0, vol));
        }
        Ok(out)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            l3_planar: self.l3_planar * factor,
            l3_spatial: self.l3_spatial * factor,
            l6_spatial: self.l6_spatial * factor,
            l4_planar: self.l4_planar * factor,
            linf_planar: self.linf_planar * factor,
        }
    }

    /// Entrywise `self >= other`.
    pub fn dominates(&self, other: &Self) -> bool {
        self.l3_planar >= other.l3_planar
            && self.l3_spatial >= other.l3_spatial
            && self.l6_spatial >= other.l6_spatial
            && self.l4_planar >= other.l4_planar
            && self.linf_planar >= other.linf_planar
    }
}

/// Mixes narrow and broad spectra so both low-mode and rough fields are probed.
fn draw_spectrum(grid: &PeriodicGrid, rng: &mut FieldRng) -> Spectrum {
    let top = (grid.n() / 2 - 1) as f64;
    let pick = rng.uniform();
    if pick < 0.5 {
        let m = 1 + (rng.uniform() * top) as i64;
        Spectrum::Flat { max_mode: m.min(top as i64) }
    } else {
        let k0 = grid.k_min() * (0.5 + rng.uniform() * top);
        Spectrum::Gaussian { k0, max_mode: top }
    }
}

/// Coefficient `C` in `xy ≤ ε x^p + C y^q`, `1/p + 1/q = 1`.
pub fn young_coefficient(p: f64, eps: f64) -> f64 {
    let q = p / (p - 1.0);
    powf(p * eps, -q / p) / q
}

/// Rate constants of the differential inequalities for the base flow and the
/// perturbation (see `docs/constants.md` for the derivations).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationConstants {
    pub mode: ConstantsMode,
    pub inequalities: InequalityConstants,
    /// Number of random fields behind an empirical calibration (0 for analytic).
    pub calibration_samples: usize,
    pub c_s2: f64,
    pub c_s3: f64,
    pub c_s4: f64,
    pub c_2: f64,
    pub c_3: f64,
    pub c_4: f64,
}

impl InterpolationConstants {
    pub fn from_inequalities(
        mode: ConstantsMode,
        k: InequalityConstants,
        nu: f64,
        poincare: &PoincareConstants,
        volume: f64,
        calibration_samples: usize,
    ) -> Self {
        let kappa = poincare.kappa;
        let g1 = k.l3_planar;
        let k3 = k.l3_spatial;
        let k6 = k.l6_spatial;
        let c_s2 = (2.0 * powi(g1, 6) / nu).max(2.0 / nu);
        let c_s3 = 3.0 / nu * (powi(k.l4_planar, 4) + powi(k.linf_planar, 2)).max(1.0);
        let c_s4 = c_s3 / poincare.c_s1;
        let c_2 = 3.0 / nu * (k6 * k6).max(2.0 * k6 * k6 * g1 * g1).max(1.0).max(1.0 / kappa);
        // 2 K3³ b^{3/2} c^{3/2} ≤ (ν/5) c² + young · (2 K3³)⁴ b⁶
        let sextic = young_coefficient(4.0 / 3.0, nu / 5.0) * 16.0 * powi(k3, 12);
        let drift = (5.0 + 3.0 / kappa) * powf(volume, 1.0 / 3.0) / nu;
        let c_3 = sextic
            .max((5.0 * powi(k3, 4) + 8.0 * k6 * k6) / nu)
            .max(drift)
            .max((5.0 + 3.0 / kappa) / nu);
        Self {
            mode,
            inequalities: k,
            calibration_samples,
            c_s2,
            c_s3,
            c_s4,
            c_2,
            c_3,
            c_4: c_3,
        }
    }

    pub fn analytic_conservative(grid3: &PeriodicGrid, nu: f64, poincare: &PoincareConstants) -> Result<Self> {
        let k = InequalityConstants::analytic(grid3)?;
        Ok(Self::from_inequalities(
            ConstantsMode::AnalyticConservative,
            k,
            nu,
            poincare,
            grid3.volume(),
            0,
        ))
    }

    pub fn empirical_calibrated(
        grid3: &PeriodicGrid,
        nu: f64,
        poincare: &PoincareConstants,
        seed: u64,
        samples: usize,
    ) -> Result<Self> {
        if samples < MIN_CALIBRATION_SAMPLES {
            return Err(invalid("samples", "calibration needs at least 1000 random fields"));
        }
        let k = InequalityConstants::rayleigh_maxima(grid3, seed, samples)?.scaled(CALIBRATION_HEADROOM);
        Ok(Self::from_inequalities(
            ConstantsMode::EmpiricalCalibrated,
            k,
            nu,
            poincare,
            grid3.volume(),
            samples,
        ))
    }
}
