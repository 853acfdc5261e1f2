use alloc::format;
use alloc::vec;

use crate::certificate::{
    abar_chain, admissible_threshold, a_chain, b_chain, poincare_constants, AChain, AbarChain, AdmissibleThreshold,
    BChain, BaseData, Constants, ConstantsMode, GammaHypothesis, InterpolationConstants, PerturbationData,
    MIN_CALIBRATION_SAMPLES,
};
use crate::error::{invalid, Error, Result};
use crate::field::{MeanVector, SpectralField};
use crate::forcing::{Forcing, ForcingTerm, SpatialNorm, TimeProfile};
use crate::grid::PeriodicGrid;
use crate::integrator::{FlowState, Role, Scheme};
use crate::math::{cos, sin, sqrt, TAU};
use crate::random::{random_solenoidal, FieldRng, Spectrum};

/// Planar divergence-free profiles with wavenumber `m` in units of `2π/L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldShape {
    /// `(sin mx cos my, -cos mx sin my)`
    Cellular { mode: u32 },
    /// `(sin my, 0)`
    Shear { mode: u32 },
}

impl FieldShape {
    pub fn field(&self, grid: &PeriodicGrid, amplitude: f64) -> Result<SpectralField> {
        if grid.dim() != 2 {
            return Err(invalid("shape", "planar shapes live on the 2D grid"));
        }
        let mode = match *self {
            FieldShape::Cellular { mode } | FieldShape::Shear { mode } => mode,
        };
        if mode == 0 || mode as usize > grid.n() / 3 {
            return Err(invalid("mode", format!("must lie in 1..={} for N = {}", grid.n() / 3, grid.n())));
        }
        if !amplitude.is_finite() {
            return Err(invalid("amplitude", "must be finite"));
        }
        let k = TAU * mode as f64 / grid.length();
        let f = match *self {
            FieldShape::Cellular { .. } => SpectralField::from_fn(grid, 2, |x| {
                [
                    amplitude * sin(k * x[0]) * cos(k * x[1]),
                    -amplitude * cos(k * x[0]) * sin(k * x[1]),
                    0.0,
                ]
            }),
            FieldShape::Shear { .. } => SpectralField::from_fn(grid, 2, |x| [amplitude * sin(k * x[1]), 0.0, 0.0]),
        };
        Ok(f.leray_project()?.subtract_mean())
    }
}

/// Base-flow force.
#[derive(Debug, Clone, PartialEq)]
pub enum ForcingSpec {
    Zero,
    /// `a + e^{-λt} h(x)`: a constant mean plus a decaying profile.
    Decaying {
        mean: [f64; 2],
        shape: FieldShape,
        amplitude: f64,
        decay: f64,
    },
    /// The same force restarted every window: `f(t) = a + e^{-λ(t-kT)} h(x)` on `[kT, (k+1)T)`.
    Periodic {
        mean: [f64; 2],
        shape: FieldShape,
        amplitude: f64,
        decay: f64,
    },
    /// Any closed-form planar force.
    Custom(Forcing),
}

fn constant_shape(grid: &PeriodicGrid, mean: &[f64]) -> SpectralField {
    let mut m = [0.0; 3];
    m[..mean.len()].copy_from_slice(mean);
    SpectralField::zeros(grid, grid.dim()).with_mean(&MeanVector(m))
}

fn decaying(grid: &PeriodicGrid, mean: [f64; 2], shape: FieldShape, amplitude: f64, decay: f64) -> Result<Forcing> {
    if !(decay.is_finite() && decay > 0.0) {
        return Err(invalid("decay", "decay rate must be positive"));
    }
    let mut terms = vec![];
    if mean != [0.0, 0.0] {
        terms.push(ForcingTerm {
            shape: constant_shape(grid, &mean),
            profile: TimeProfile::Constant,
        });
    }
    if amplitude != 0.0 {
        terms.push(ForcingTerm {
            shape: shape.field(grid, amplitude)?,
            profile: TimeProfile::Exponential { rate: decay },
        });
    }
    Forcing::new(grid, 2, terms)
}

/// Builds the planar force of a family on the 2D grid.
pub fn forcing_families(spec: &ForcingSpec, grid: &PeriodicGrid, window: f64) -> Result<Forcing> {
    if grid.dim() != 2 {
        return Err(invalid("grid", "base forces live on the 2D grid"));
    }
    match spec {
        ForcingSpec::Zero => Ok(Forcing::zero(grid, 2)),
        ForcingSpec::Decaying {
            mean,
            shape,
            amplitude,
            decay,
        } => decaying(grid, *mean, *shape, *amplitude, *decay),
        ForcingSpec::Periodic {
            mean,
            shape,
            amplitude,
            decay,
        } => decaying(grid, *mean, *shape, *amplitude, *decay)?.periodic(window),
        ForcingSpec::Custom(f) => {
            if f.grid() != grid || f.components() != 2 {
                return Err(invalid("forcing", "custom force must be a planar vector force on the scenario grid"));
            }
            Ok(f.clone())
        }
    }
}

/// `∫_0^∞ ‖h̄‖²_{H¹}` of the force's decaying part in box measure: the input of
/// the window-independent admissibility threshold.
fn total_h1(spec: &ForcingSpec, grid2: &PeriodicGrid, grid3: &PeriodicGrid) -> Result<f64> {
    let once = match spec {
        ForcingSpec::Zero => return Ok(0.0),
        ForcingSpec::Decaying {
            mean,
            shape,
            amplitude,
            decay,
        }
        | ForcingSpec::Periodic {
            mean,
            shape,
            amplitude,
            decay,
        } => decaying(grid2, *mean, *shape, *amplitude, *decay)?,
        ForcingSpec::Custom(f) => f.clone(),
    };
    Ok(once.lift_2d_to_3d(grid3)?.total_bar_norm_sq(SpatialNorm::H1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseInitial {
    pub shape: FieldShape,
    pub amplitude: f64,
    pub mean: [f64; 2],
}

/// Random perturbation with a Gaussian spectrum `e^{-|k|²/k0²}` on
/// `1 ≤ |m| ≤ N/4`, scaled so that `‖u(0)‖²_{H¹} = fill · γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    pub gamma: f64,
    pub k0: f64,
    pub seed: u64,
    pub mean: [f64; 3],
    /// In `[0, 1)`; zero gives the zero perturbation.
    pub fill: f64,
}

/// Default fraction of `γ` the initial perturbation is scaled to.
pub const GAMMA_FILL: f64 = 1.0 - 1e-9;

/// Force acting on the perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerturbationForcing {
    Zero,
    ConstantMean { mean: [f64; 3] },
    /// `amplitude e^{-decay t} (sin mz, sin mx, sin my)`
    Decaying { mode: u32, amplitude: f64, decay: f64 },
}

impl PerturbationForcing {
    pub fn build(&self, grid3: &PeriodicGrid) -> Result<Forcing> {
        match *self {
            PerturbationForcing::Zero => Ok(Forcing::zero(grid3, 3)),
            PerturbationForcing::ConstantMean { mean } => Forcing::new(
                grid3,
                3,
                vec![ForcingTerm {
                    shape: constant_shape(grid3, &mean),
                    profile: TimeProfile::Constant,
                }],
            ),
            PerturbationForcing::Decaying { mode, amplitude, decay } => {
                if mode == 0 || mode as usize > grid3.n() / 3 {
                    return Err(invalid("mode", format!("must lie in 1..={}", grid3.n() / 3)));
                }
                let k = TAU * mode as f64 / grid3.length();
                let shape = SpectralField::from_fn(grid3, 3, |x| {
                    [
                        amplitude * sin(k * x[2]),
                        amplitude * sin(k * x[0]),
                        amplitude * sin(k * x[1]),
                    ]
                });
                Forcing::new(
                    grid3,
                    3,
                    vec![ForcingTerm {
                        shape,
                        profile: TimeProfile::Exponential { rate: decay },
                    }],
                )
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsSpec {
    pub mode: ConstantsMode,
    pub seed: u64,
    pub samples: usize,
}

/// Everything needed to run and certify one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub length: f64,
    pub n: usize,
    pub nu: f64,
    /// Window length `T`.
    pub window: f64,
    /// Horizon in windows; `t_end = windows · T`.
    pub windows: usize,
    /// Fixed step; chosen from a speed bound when absent.
    pub dt: Option<f64>,
    pub scheme: Scheme,
    pub cfl_max: f64,
    pub base_forcing: ForcingSpec,
    pub base_initial: BaseInitial,
    pub perturbation: PerturbationSpec,
    pub perturbation_forcing: PerturbationForcing,
    pub constants: ConstantsSpec,
    /// Windows scanned when taking sups over `k`.
    pub k_max: usize,
    /// Budget fraction: each data addend must stay below `εγ`.
    pub epsilon: f64,
}

impl Scenario {
    /// Constant mean force `(1, 0)` plus a decaying cellular force (rate 1),
    /// `γ = 1e-4`, `N = 32`, five windows of length 6.5.
    pub fn reference() -> Self {
        Self {
            length: TAU,
            n: 32,
            nu: 1.0,
            window: 6.5,
            windows: 5,
            dt: None,
            scheme: Scheme::ImexAb2,
            cfl_max: 0.5,
            base_forcing: ForcingSpec::Decaying {
                mean: [1.0, 0.0],
                shape: FieldShape::Cellular { mode: 1 },
                amplitude: 0.0137,
                decay: 1.0,
            },
            base_initial: BaseInitial {
                shape: FieldShape::Cellular { mode: 1 },
                amplitude: 0.01,
                mean: [0.0, 0.0],
            },
            perturbation: PerturbationSpec {
                gamma: 1e-4,
                k0: 2.0,
                seed: 7,
                mean: [0.0; 3],
                fill: GAMMA_FILL,
            },
            perturbation_forcing: PerturbationForcing::Zero,
            constants: ConstantsSpec {
                mode: ConstantsMode::EmpiricalCalibrated,
                seed: 1,
                samples: MIN_CALIBRATION_SAMPLES,
            },
            k_max: 64,
            epsilon: 0.5,
        }
    }

    pub fn t_end(&self) -> f64 {
        self.window * self.windows as f64
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(name, "must be positive and finite"))
            }
        };
        positive("length", self.length)?;
        positive("nu", self.nu)?;
        positive("window", self.window)?;
        positive("cfl_max", self.cfl_max)?;
        positive("gamma", self.perturbation.gamma)?;
        positive("k0", self.perturbation.k0)?;
        if let Some(dt) = self.dt {
            positive("dt", dt)?;
        }
        if !(0.0..1.0).contains(&self.perturbation.fill) {
            return Err(invalid("fill", "must lie in [0, 1)"));
        }
        if self.windows == 0 {
            return Err(invalid("windows", "need at least one window"));
        }
        if self.n < 8 || !self.n.is_multiple_of(2) {
            return Err(invalid("n", "resolution must be even and at least 8"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid("epsilon", "must lie in (0, 1)"));
        }
        if self.constants.mode == ConstantsMode::EmpiricalCalibrated && self.constants.samples < MIN_CALIBRATION_SAMPLES {
            return Err(invalid("samples", "calibration needs at least 1000 random fields"));
        }
        if self.base_initial.mean.iter().chain(&self.perturbation.mean).any(|v| !v.is_finite()) {
            return Err(invalid("mean", "must be finite"));
        }
        Ok(())
    }
}

pub fn scenario_constants(s: &Scenario) -> Result<Constants> {
    let grid3 = PeriodicGrid::new(s.length, 3, s.n)?;
    let poincare = poincare_constants(s.nu, s.length)?;
    let rates = match s.constants.mode {
        ConstantsMode::AnalyticConservative => InterpolationConstants::analytic_conservative(&grid3, s.nu, &poincare)?,
        ConstantsMode::EmpiricalCalibrated => {
            InterpolationConstants::empirical_calibrated(&grid3, s.nu, &poincare, s.constants.seed, s.constants.samples)?
        }
    };
    Ok(Constants {
        nu: s.nu,
        poincare,
        rates,
    })
}

/// Certificate of a scenario: inputs, chains and thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub constants: Constants,
    pub base_data: BaseData,
    pub perturbation_data: PerturbationData,
    pub abar: AbarChain,
    /// `∫_0^∞ ‖h̄‖²_{H¹}` of the decaying part of the base force.
    pub forcing_total_h1: f64,
    pub threshold: AdmissibleThreshold,
    pub a: AChain,
    pub b: BChain,
}

impl Certificate {
    /// Base-flow hypotheses: membership, every window condition, certified inputs.
    pub fn base_hypotheses(&self) -> bool {
        self.abar.membership && self.a.flags.all_hold() && self.a.flags.inputs_certified
    }

    /// Adds the perturbation window conditions and `γ ≤ γ_*`.
    pub fn perturbation_hypotheses(&self) -> bool {
        self.base_hypotheses()
            && self.b.flags.all_hold()
            && self.b.flags.inputs_certified
            && self.b.gamma_hypothesis == GammaHypothesis::Satisfied
    }
}

/// Grids, forces, initial states and certificate of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub grid2: PeriodicGrid,
    pub grid3: PeriodicGrid,
    pub base_forcing: Forcing,
    pub perturbation_forcing: Forcing,
    pub base0: FlowState,
    pub u0: FlowState,
    pub certificate: Certificate,
}

/// Seeded initial perturbation, mean included, at `‖u‖²_{H¹} = fill · γ`.
pub fn initial_perturbation(grid3: &PeriodicGrid, spec: &PerturbationSpec) -> Result<SpectralField> {
    let mean = MeanVector(spec.mean);
    let target = spec.gamma * spec.fill;
    let mean_part = mean.norm_sq() * grid3.volume();
    if spec.fill == 0.0 && mean_part == 0.0 {
        return Ok(SpectralField::zeros(grid3, 3));
    }
    if mean_part >= target {
        return Err(invalid("mean", "the perturbation mean alone exceeds gamma"));
    }
    let spectrum = Spectrum::Gaussian {
        k0: spec.k0,
        max_mode: (grid3.n() / 4) as f64,
    };
    let bar = random_solenoidal(grid3, spectrum, &mut FieldRng::new(spec.seed));
    let h1 = bar.sobolev_sq(1)?;
    if h1 == 0.0 {
        return Err(invalid("k0", "spectrum selects no modes"));
    }
    Ok(bar.scale(sqrt((target - mean_part) / h1)).with_mean(&mean))
}

/// Grids, forces and initial velocities (means included) of a scenario,
/// without the certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct Flows {
    pub grid2: PeriodicGrid,
    pub grid3: PeriodicGrid,
    pub base_forcing: Forcing,
    pub perturbation_forcing: Forcing,
    pub base_velocity: SpectralField,
    pub perturbation_velocity: SpectralField,
}

pub fn flows(s: &Scenario) -> Result<Flows> {
    s.validate()?;
    let grid2 = PeriodicGrid::new(s.length, 2, s.n)?;
    let grid3 = PeriodicGrid::new(s.length, 3, s.n)?;
    let base_forcing = forcing_families(&s.base_forcing, &grid2, s.window)?;
    let perturbation_forcing = s.perturbation_forcing.build(&grid3)?;
    let bi = &s.base_initial;
    let base_velocity = bi
        .shape
        .field(&grid2, bi.amplitude)?
        .with_mean(&MeanVector([bi.mean[0], bi.mean[1], 0.0]));
    let perturbation_velocity = initial_perturbation(&grid3, &s.perturbation)?;
    Ok(Flows {
        grid2,
        grid3,
        base_forcing,
        perturbation_forcing,
        base_velocity,
        perturbation_velocity,
    })
}

pub fn prepare(s: &Scenario) -> Result<Setup> {
    s.validate()?;
    let constants = scenario_constants(s)?;
    prepare_with_constants(s, constants)
}

/// Like [`prepare`] with constants computed elsewhere (calibration is the slow part).
pub fn prepare_with_constants(s: &Scenario, constants: Constants) -> Result<Setup> {
    let f = flows(s)?;
    prepare_from_initial(s, constants, &f.base_velocity, &f.perturbation_velocity)
}

/// Like [`prepare_with_constants`] with given initial velocities (means
/// included) in place of the ones the scenario describes, e.g. states read
/// back from disk.
pub fn prepare_from_initial(
    s: &Scenario,
    constants: Constants,
    base_velocity: &SpectralField,
    perturbation_velocity: &SpectralField,
) -> Result<Setup> {
    s.validate()?;
    let grid2 = PeriodicGrid::new(s.length, 2, s.n)?;
    let grid3 = PeriodicGrid::new(s.length, 3, s.n)?;
    if base_velocity.grid() != &grid2 || perturbation_velocity.grid() != &grid3 {
        return Err(Error::GridMismatch);
    }
    let base_forcing = forcing_families(&s.base_forcing, &grid2, s.window)?;
    let perturbation_forcing = s.perturbation_forcing.build(&grid3)?;
    let base0 = FlowState::from_velocity(base_velocity, 0.0, Role::Base2d)?;
    let u0 = FlowState::from_velocity(perturbation_velocity, 0.0, Role::Perturbation)?;

    let f3 = base_forcing.lift_2d_to_3d(&grid3)?;
    let lifted = base0.u_bar.lift_2d_to_3d(&grid3)?;
    let per_window = 64;
    let base_data = BaseData {
        forcing_l2: f3.window_sup(s.window, s.k_max, SpatialNorm::L2),
        forcing_grad: f3.window_sup(s.window, s.k_max, SpatialNorm::Grad),
        forcing_h1: f3.window_sup(s.window, s.k_max, SpatialNorm::H1),
        init_l2_sq: lifted.sobolev_sq(0)?,
        init_grad_sq: lifted.grad_seminorm_sq(1),
        init_hess_sq: lifted.grad_seminorm_sq(2),
        mean_sup: f3.mean_drift_sup(&base0.mean, s.window, s.k_max, per_window),
    };
    let g = &perturbation_forcing;
    let perturbation_data = PerturbationData {
        forcing_l2: g.window_sup(s.window, s.k_max, SpatialNorm::L2),
        mean_window_sq: g.mean_drift_window_sq_sup(&u0.mean, s.window, s.k_max),
        mean_sup: g.mean_drift_sup(&u0.mean, s.window, s.k_max, per_window),
        init_l2_sq: u0.u_bar.sobolev_sq(0)?,
        gamma: s.perturbation.gamma,
    };
    let abar = abar_chain(&base_data, s.window, &constants)?;
    let forcing_total_h1 = total_h1(&s.base_forcing, &grid2, &grid3)?;
    let threshold = admissible_threshold(forcing_total_h1, abar.abar2_sq, &constants);
    let a = a_chain(&base_data, s.window, &constants)?;
    let b = b_chain(&perturbation_data, &a, &constants)?;
    Ok(Setup {
        grid2,
        grid3,
        base_forcing,
        perturbation_forcing,
        base0,
        u0,
        certificate: Certificate {
            constants,
            base_data,
            perturbation_data,
            abar,
            forcing_total_h1,
            threshold,
            a,
            b,
        },
    })
}
