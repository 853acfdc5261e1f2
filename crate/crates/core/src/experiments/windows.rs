use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::integrator::{PairTrajectory, Role, StepRecord, Trajectory};
use crate::math::round;
use crate::quadrature::uniform_integral;

use super::scenario::Certificate;

/// Ratio allowed between the sups of consecutive windows.
pub const UNIFORMITY_RATIO: f64 = 1.05;
/// Window sups below this fraction of the largest one are roundoff and pass.
pub const UNIFORMITY_FLOOR: f64 = 1e-10;

/// Factor turning 2D records into 3D box measure (the lift is constant in `x₃`).
fn measure(traj: &Trajectory) -> f64 {
    match traj.role {
        Role::Base2d => traj.states.first().map_or(1.0, |s| s.grid().length()),
        _ => 1.0,
    }
}

/// Steps per window, checked against the stored step.
fn steps_per_window(traj: &Trajectory, window: f64) -> Result<usize> {
    if !(window.is_finite() && window > 0.0) {
        return Err(invalid("window", "must be positive"));
    }
    let n = round(window / traj.dt);
    if n < 1.0 || (n * traj.dt - window).abs() > 1e-9 * window {
        return Err(invalid("window", format!("{window} is not a multiple of dt = {}", traj.dt)));
    }
    Ok(n as usize)
}

/// Record ranges `[kT, (k+1)T]` of the complete windows.
fn window_slices(traj: &Trajectory, window: f64) -> Result<Vec<&[StepRecord]>> {
    let per = steps_per_window(traj, window)?;
    if traj.records.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: traj.records.len(),
        });
    }
    for (i, r) in traj.records.iter().enumerate() {
        if (r.t - i as f64 * traj.dt).abs() > 1e-9 * r.t.abs().max(1.0) {
            return Err(invalid("trajectory", "records must hold every step"));
        }
    }
    let complete = (traj.records.len() - 1) / per;
    Ok((0..complete).map(|k| &traj.records[k * per..=(k + 1) * per]).collect())
}

fn sup(rs: &[StepRecord], f: impl Fn(&StepRecord) -> f64) -> f64 {
    rs.iter().map(f).fold(0.0, f64::max)
}

fn integral(rs: &[StepRecord], dt: f64, f: impl Fn(&StepRecord) -> f64) -> f64 {
    let v: Vec<f64> = rs.iter().map(f).collect();
    uniform_integral(&v, dt)
}

/// `∫‖∂_t w‖²` from step increments: each increment is the midpoint value of its step.
fn increment_integral(rs: &[StepRecord], dt: f64) -> f64 {
    rs[1..].iter().map(|r| r.increment_sq).sum::<f64>() * dt
}

/// Per-window statistics in 3D box measure. Sups are of squared norms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WindowStats {
    pub k: usize,
    pub base_h1_sup_sq: f64,
    pub base_h2_sup_sq: f64,
    pub pert_l2_sup_sq: f64,
    pub pert_h1_sup_sq: f64,
    pub base_h2_integral: f64,
    pub base_h3_integral: f64,
    pub pert_h1_integral: f64,
    pub pert_h2_integral: f64,
    pub base_dt_integral: f64,
    pub pert_dt_integral: f64,
    pub base_pressure_integral: f64,
    pub pert_pressure_integral: f64,
}

impl WindowStats {
    pub fn sups(&self) -> [(&'static str, f64); 4] {
        [
            ("base_h1", self.base_h1_sup_sq),
            ("base_h2", self.base_h2_sup_sq),
            ("perturbation_l2", self.pert_l2_sup_sq),
            ("perturbation_h1", self.pert_h1_sup_sq),
        ]
    }

    pub fn is_finite_nonnegative(&self) -> bool {
        let v = [
            self.base_h1_sup_sq,
            self.base_h2_sup_sq,
            self.pert_l2_sup_sq,
            self.pert_h1_sup_sq,
            self.base_h2_integral,
            self.base_h3_integral,
            self.pert_h1_integral,
            self.pert_h2_integral,
            self.base_dt_integral,
            self.pert_dt_integral,
            self.base_pressure_integral,
            self.pert_pressure_integral,
        ];
        v.iter().all(|x| x.is_finite() && *x >= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformityEntry {
    pub quantity: &'static str,
    /// Largest `sup_{k+1} / sup_k` over the checked pairs.
    pub max_ratio: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformityReport {
    pub entries: Vec<UniformityEntry>,
    pub holds: bool,
    /// Windows dropped because the run ended inside them.
    pub excluded_windows: usize,
    pub notice: Option<String>,
}

/// Statistics of every complete window, and the check that window sups do
/// not trend upward.
pub fn window_statistics(pair: &PairTrajectory, window: f64) -> Result<(Vec<WindowStats>, UniformityReport)> {
    let base = window_slices(&pair.base, window)?;
    let pert = window_slices(&pair.perturbation, window)?;
    if base.len() != pert.len() || pair.base.dt != pair.perturbation.dt {
        return Err(Error::TimeMismatch("base and perturbation cover different windows".into()));
    }
    let dt = pair.base.dt;
    let lb = measure(&pair.base);
    let stats: Vec<WindowStats> = base
        .iter()
        .zip(&pert)
        .enumerate()
        .map(|(k, (b, p))| WindowStats {
            k,
            base_h1_sup_sq: lb * sup(b, |r| r.h1_sq),
            base_h2_sup_sq: lb * sup(b, |r| r.h2_sq),
            pert_l2_sup_sq: sup(p, |r| r.l2_sq),
            pert_h1_sup_sq: sup(p, |r| r.h1_sq),
            base_h2_integral: lb * integral(b, dt, |r| r.h2_sq),
            base_h3_integral: lb * integral(b, dt, |r| r.h3_sq),
            pert_h1_integral: integral(p, dt, |r| r.h1_sq),
            pert_h2_integral: integral(p, dt, |r| r.h2_sq),
            base_dt_integral: lb * increment_integral(b, dt),
            pert_dt_integral: increment_integral(p, dt),
            base_pressure_integral: lb * integral(b, dt, |r| r.pressure_grad_sq),
            pert_pressure_integral: integral(p, dt, |r| r.pressure_grad_sq),
        })
        .collect();

    let total = pair.base.records.last().map_or(0.0, |r| r.t);
    let excluded = if (total / window - round(total / window)).abs() > 1e-9 { 1 } else { 0 };
    let mut report = uniformity(&stats);
    report.excluded_windows = excluded;
    if excluded > 0 {
        report.notice = Some(format!("incomplete final window after t = {} excluded", stats.len() as f64 * window));
    }
    Ok((stats, report))
}

/// Consecutive-window sup ratios against [`UNIFORMITY_RATIO`].
pub fn uniformity(stats: &[WindowStats]) -> UniformityReport {
    let names = WindowStats::default().sups().map(|(n, _)| n);
    let entries: Vec<UniformityEntry> = names
        .iter()
        .enumerate()
        .map(|(j, &quantity)| {
            let series: Vec<f64> = stats.iter().map(|s| s.sups()[j].1).collect();
            let top = series.iter().copied().fold(0.0, f64::max);
            let floor = UNIFORMITY_FLOOR * top;
            let mut max_ratio: f64 = 0.0;
            let mut holds = true;
            for w in series.windows(2) {
                if w[1] <= floor {
                    continue;
                }
                let r = w[1] / w[0];
                max_ratio = max_ratio.max(r);
                holds &= r <= UNIFORMITY_RATIO;
            }
            UniformityEntry {
                quantity,
                max_ratio,
                holds,
            }
        })
        .collect();
    UniformityReport {
        holds: entries.iter().all(|e| e.holds),
        entries,
        excluded_windows: 0,
        notice: None,
    }
}

/// Windowed `H^{2,1}` data: `∫‖w‖²_{H²} + ∫‖∂_t w‖²` and `∫‖∇q‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H21Window {
    pub k: usize,
    pub h2_integral: f64,
    pub dt_integral: f64,
    pub pressure_integral: f64,
    pub h21_sq: f64,
}

/// Per-window `H^{2,1}` and pressure-gradient norms of one trajectory, in 3D box measure.
pub fn h21_window_norm(traj: &Trajectory, window: f64) -> Result<Vec<H21Window>> {
    let l = measure(traj);
    let dt = traj.dt;
    Ok(window_slices(traj, window)?
        .iter()
        .enumerate()
        .map(|(k, rs)| {
            let h2 = l * integral(rs, dt, |r| r.h2_sq);
            let d = l * increment_integral(rs, dt);
            H21Window {
                k,
                h2_integral: h2,
                dt_integral: d,
                pressure_integral: l * integral(rs, dt, |r| r.pressure_grad_sq),
                h21_sq: h2 + d,
            }
        })
        .collect())
}

/// Extrapolates two estimates at steps `h` and `h/2` with error `O(h^order)`.
pub fn richardson(coarse: f64, fine: f64, order: u32) -> f64 {
    let f = (1u64 << order) as f64;
    fine + (fine - coarse) / (f - 1.0)
}

/// Ratios of measured window `H^{2,1}` data to the bound shapes `A₈²(1+A₈²) + A₈²A₉²`
/// (base) and `B₇²` (perturbation). The constant in front of these shapes is
/// not explicit, so the ratios are reported only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H21Envelope {
    pub base_shape: f64,
    pub base_ratio: f64,
    pub perturbation_shape: f64,
    pub perturbation_ratio: f64,
}

pub fn h21_envelope(base: &[H21Window], pert: &[H21Window], cert: &Certificate) -> H21Envelope {
    let a8 = cert.a.get(8);
    let a9 = cert.a.get(9);
    let base_shape = a8 * (1.0 + a8) + a8 * a9;
    let perturbation_shape = cert.b.b7_sq;
    let top = |w: &[H21Window]| w.iter().map(|x| x.h21_sq + x.pressure_integral).fold(0.0, f64::max);
    H21Envelope {
        base_shape,
        base_ratio: top(base) / base_shape,
        perturbation_shape,
        perturbation_ratio: top(pert) / perturbation_shape,
    }
}

/// Relative slack on non-strict comparisons: a bound met with equality is
/// computed along a different summation order than the measurement.
pub const BOUND_ROUNDOFF: f64 = 1e-12;

/// One measured quantity against its certified bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub name: &'static str,
    pub measured: f64,
    pub bound: f64,
    pub worst_window: usize,
    pub holds: bool,
    /// Whether the certificate's hypotheses make the bound a claim.
    pub applicable: bool,
    pub strict: bool,
}

fn cumulative(rs: &[StepRecord], dt: f64, f: impl Fn(&StepRecord) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(rs.len());
    let mut acc = 0.0;
    let mut prev = f(&rs[0]);
    out.push(0.0);
    for r in &rs[1..] {
        let v = f(r);
        acc += 0.5 * dt * (prev + v);
        prev = v;
        out.push(acc);
    }
    out
}

/// `sup_t [level(t) + weight ∫_{kT}^t rate]` on one window.
fn energy(rs: &[StepRecord], dt: f64, level: impl Fn(&StepRecord) -> f64, weight: f64, rate: impl Fn(&StepRecord) -> f64) -> f64 {
    let c = cumulative(rs, dt, rate);
    rs.iter().zip(&c).map(|(r, i)| level(r) + weight * i).fold(0.0, f64::max)
}

fn worst(values: &[f64]) -> (f64, usize) {
    values
        .iter()
        .enumerate()
        .fold((0.0, 0), |(m, k), (j, &v)| if v > m { (v, j) } else { (m, k) })
}

/// Simulated window quantities against the certificate chains.
pub fn bound_checks(pair: &PairTrajectory, window: f64, cert: &Certificate) -> Result<Vec<BoundCheck>> {
    let base = window_slices(&pair.base, window)?;
    let pert = window_slices(&pair.perturbation, window)?;
    let dt = pair.base.dt;
    let lb = measure(&pair.base);
    let cs1 = cert.constants.poincare.c_s1;
    let c1 = cert.constants.poincare.c_1;
    let a = &cert.a;
    let b = &cert.b;
    let gamma = cert.perturbation_data.gamma;
    let base_ok = cert.base_hypotheses();
    let pert_ok = cert.perturbation_hypotheses();

    let per_base = |f: &dyn Fn(&[StepRecord]) -> f64| -> (f64, usize) {
        let v: Vec<f64> = base.iter().map(|rs| lb * f(rs)).collect();
        worst(&v)
    };
    let per_pert = |f: &dyn Fn(&[StepRecord]) -> f64| -> (f64, usize) {
        let v: Vec<f64> = pert.iter().map(|rs| f(rs)).collect();
        worst(&v)
    };
    let check = |name, (measured, k): (f64, usize), bound: f64, applicable, strict: bool| BoundCheck {
        name,
        measured,
        bound,
        worst_window: k,
        holds: if strict { measured < bound } else { measured <= bound * (1.0 + BOUND_ROUNDOFF) },
        applicable,
        strict,
    };

    let mut out = Vec::new();
    out.push(check("base_l2_window_start", per_base(&|rs| rs[0].l2_sq), a.get(2), base_ok, false));
    out.push(check(
        "base_l2_energy",
        per_base(&|rs| energy(rs, dt, |r| r.l2_sq, cs1, |r| r.h1_sq)),
        a.get(3),
        base_ok,
        false,
    ));
    out.push(check("base_grad_window_start", per_base(&|rs| rs[0].grad_sq), a.get(5), base_ok, false));
    out.push(check(
        "base_grad_energy",
        per_base(&|rs| energy(rs, dt, |r| r.grad_sq, cs1, |r| r.h2_sq)),
        a.get(8),
        base_ok,
        false,
    ));
    out.push(check(
        "base_h1_energy",
        per_base(&|rs| energy(rs, dt, |r| r.h1_sq, 1.0, |r| r.h2_sq)),
        a.get(8),
        base_ok,
        false,
    ));
    out.push(check("base_hessian", per_base(&|rs| sup(rs, |r| r.hess_sq)), a.get(13), base_ok, false));
    out.push(check(
        "base_hessian_energy",
        per_base(&|rs| energy(rs, dt, |r| r.hess_sq, cs1, |r| r.hess_sq + r.third_sq)),
        a.get(14),
        base_ok,
        false,
    ));
    out.push(check(
        "perturbation_l2_window_start",
        per_pert(&|rs| rs[0].l2_sq),
        2.0 * b.b3_sq + cert.perturbation_data.init_l2_sq,
        pert_ok,
        false,
    ));
    out.push(check(
        "perturbation_l2_energy",
        per_pert(&|rs| energy(rs, dt, |r| r.l2_sq, c1, |r| r.h1_sq)),
        b.b5_sq,
        pert_ok,
        false,
    ));
    out.push(check(
        "perturbation_l2_energy_restart",
        per_pert(&|rs| energy(rs, dt, |r| r.l2_sq, c1, |r| r.h1_sq)),
        b.b5_sq_with_restart,
        pert_ok,
        false,
    ));
    out.push(check("perturbation_h1_gamma", per_pert(&|rs| sup(rs, |r| r.h1_sq)), gamma, pert_ok, true));
    let h21: Vec<f64> = h21_window_norm(&pair.perturbation, window)?
        .iter()
        .map(|w| w.h21_sq + w.pressure_integral)
        .collect();
    out.push(check("perturbation_h21", worst(&h21), b.b7_sq, false, false));
    Ok(out)
}
