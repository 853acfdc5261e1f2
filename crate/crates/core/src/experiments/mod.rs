//! Scenarios tying the solver to the certificate: run a base flow and a
//! perturbation together, then compare the trajectories with the bounds.

mod barrier;
mod scenario;
mod windows;

pub use barrier::{barrier_monitor, BarrierDiagnostics, BarrierReport, Series};
pub use scenario::{
    flows, forcing_families, initial_perturbation, prepare, prepare_from_initial, prepare_with_constants, scenario_constants, BaseInitial,
    Certificate, ConstantsSpec, FieldShape, Flows, ForcingSpec, PerturbationForcing, PerturbationSpec, Scenario, Setup,
    GAMMA_FILL,
};
pub use windows::{
    bound_checks, h21_envelope, h21_window_norm, richardson, uniformity, window_statistics, BoundCheck, H21Envelope,
    H21Window, UniformityEntry, BOUND_ROUNDOFF, UniformityReport, WindowStats, UNIFORMITY_FLOOR, UNIFORMITY_RATIO,
};

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::certificate::{budget_sq, data_functional_check, smallness_check, BudgetSample, DataFunctional, SmallnessReport};
use crate::error::{Error, Result};
use crate::forcing::SpatialNorm;
use crate::integrator::{evolve_pair, Aborted, PairTrajectory, Sampling, SolverConfig};
use crate::math::{floor, powf};

/// Largest step the automatic choice takes.
pub const AUTO_DT_CAP: f64 = 0.01;
const CFL_RETRIES: usize = 4;

/// Everything a stability run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityOutcome {
    pub setup: Setup,
    pub dt: f64,
    pub trajectory: PairTrajectory,
    pub windows: Vec<WindowStats>,
    pub uniformity: UniformityReport,
    pub bounds: Vec<BoundCheck>,
    pub base_h21: Vec<H21Window>,
    pub perturbation_h21: Vec<H21Window>,
    pub h21_envelope: H21Envelope,
    pub barrier: BarrierReport,
    pub smallness: SmallnessReport,
    pub data_functional: DataFunctional,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    /// Scenario or certificate inputs rejected before any stepping.
    Invalid(Error),
    /// The solver stopped; the partial trajectory is kept.
    Aborted(Box<Aborted<PairTrajectory>>),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Invalid(e)
    }
}

/// Largest step not above `dt` that divides the window evenly.
pub fn snap_to_window(dt: f64, window: f64) -> f64 {
    let q = window / dt;
    let mut n = floor(q);
    if n * dt < window * (1.0 - 1e-12) {
        n += 1.0;
    }
    window / n.max(1.0)
}

/// Step `cfl_max · h / (2 · speed)`, capped at [`AUTO_DT_CAP`] and snapped to the window.
pub fn cfl_dt(speed: f64, spacing: f64, cfl_max: f64, window: f64) -> f64 {
    let mut dt = AUTO_DT_CAP;
    if speed > 0.0 {
        dt = dt.min(0.5 * cfl_max * spacing / speed);
    }
    snap_to_window(dt, window)
}

/// CFL-limited starting step from the initial fluctuation speeds.
fn auto_dt(s: &Scenario, setup: &Setup) -> Result<f64> {
    let speed = setup.base0.u_bar.lp_norm(f64::INFINITY)? + setup.u0.u_bar.lp_norm(f64::INFINITY)?;
    Ok(cfl_dt(speed, setup.grid3.spacing(), s.cfl_max, s.window))
}

/// Forcing-budget samples `G²(t)` inputs at the record times.
pub fn budget_samples(setup: &Setup, pair: &PairTrajectory) -> Vec<BudgetSample> {
    let l = setup.grid3.length();
    let w = powf(l, 1.0 / 3.0);
    pair.base
        .records
        .iter()
        .map(|r| {
            let gl3 = w * r.grad_l3;
            BudgetSample {
                t: r.t,
                base_grad_l3_sq: gl3 * gl3,
                mean_sq: setup.perturbation_forcing.mean_drift(&setup.u0.mean, r.t).norm_sq(),
                forcing_sq: setup.perturbation_forcing.bar_norm_sq_at(r.t, SpatialNorm::L2),
            }
        })
        .collect()
}

/// Runs a prepared scenario at a fixed step and evaluates every diagnostic.
pub fn evaluate(s: &Scenario, setup: Setup, dt: f64) -> core::result::Result<StabilityOutcome, RunError> {
    let mut cfg = SolverConfig::new(s.nu, dt, s.t_end());
    cfg.scheme = s.scheme;
    cfg.cfl_max = s.cfl_max;
    let pair = evolve_pair(
        &setup.base0,
        &setup.base_forcing,
        &setup.u0,
        &setup.perturbation_forcing,
        &cfg,
        &Sampling::windows(s.window),
    )
    .map_err(|a| RunError::Aborted(Box::new(a)))?;
    analyse(s, setup, dt, pair).map_err(RunError::Invalid)
}

/// Diagnostics of a finished pair run.
pub fn analyse(s: &Scenario, setup: Setup, dt: f64, pair: PairTrajectory) -> Result<StabilityOutcome> {
    let cert = &setup.certificate;
    let k = &cert.constants;
    let (windows, uniformity) = window_statistics(&pair, s.window)?;
    let bounds = bound_checks(&pair, s.window, cert)?;
    let base_h21 = h21_window_norm(&pair.base, s.window)?;
    let perturbation_h21 = h21_window_norm(&pair.perturbation, s.window)?;
    let h21_envelope = h21_envelope(&base_h21, &perturbation_h21, cert);

    let samples = budget_samples(&setup, &pair);
    let smallness = smallness_check(s.perturbation.gamma, &samples, &cert.b, k);
    let data_functional = data_functional_check(s.epsilon, s.perturbation.gamma, &cert.perturbation_data, &samples)?;
    let p = &pair.perturbation.records;
    let barrier = BarrierReport::build(
        p.iter().map(|r| r.t).collect(),
        p.iter().map(|r| r.h1_sq).collect(),
        p.iter().map(|r| r.h2_sq).collect(),
        samples.iter().map(|x| budget_sq(x, cert.b.l2_sup_sq, &k.rates)).collect(),
        s.perturbation.gamma,
        k.gamma_star(),
        k.poincare.c_1,
        k.rates.c_3,
    )?;
    Ok(StabilityOutcome {
        setup,
        dt,
        trajectory: pair,
        windows,
        uniformity,
        bounds,
        base_h21,
        perturbation_h21,
        h21_envelope,
        barrier,
        smallness,
        data_functional,
    })
}

/// Prepares, runs and analyses a scenario. Without a fixed step the run
/// starts from a CFL estimate and retries with the solver's advisory step.
pub fn run_stability_experiment(s: &Scenario) -> core::result::Result<StabilityOutcome, RunError> {
    let setup = prepare(s)?;
    run_prepared(s, setup)
}

/// Like [`run_stability_experiment`] with a setup built by the caller.
pub fn run_prepared(s: &Scenario, setup: Setup) -> core::result::Result<StabilityOutcome, RunError> {
    if let Some(dt) = s.dt {
        return evaluate(s, setup, dt);
    }
    let mut dt = auto_dt(s, &setup)?;
    let mut attempt = 0;
    loop {
        match evaluate(s, setup.clone(), dt) {
            Err(RunError::Aborted(a)) if attempt < CFL_RETRIES => match a.error {
                Error::CflViolation { advisory_dt, .. } if advisory_dt > 0.0 && advisory_dt < dt => {
                    dt = snap_to_window(advisory_dt, s.window);
                    attempt += 1;
                }
                _ => return Err(RunError::Aborted(a)),
            },
            other => return other,
        }
    }
}
