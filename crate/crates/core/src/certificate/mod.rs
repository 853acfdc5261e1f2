//! Explicit constants, chained bounds and hypothesis checks for the stability
//! of a planar flow under 3D perturbations.
//!
//! All norms are in the 3D box measure; planar quantities are lifted first.
//! Every chain is computed by literal substitution. Non-finite values are
//! legitimate results (a divergent mean drift, say), never errors.

mod interpolation;

pub use interpolation::{
    young_coefficient, ConstantsMode, InequalityConstants, InterpolationConstants, CALIBRATION_HEADROOM,
    MIN_CALIBRATION_SAMPLES,
};

use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::field::sobolev_weights;
use crate::forcing::SupEstimate;
use crate::grid::PeriodicGrid;
use crate::math::{exp, expm1, powf, powi, LN_2, TAU};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareConstants {
    /// Rate for the base flow.
    pub c_s1: f64,
    /// Rate for the perturbation.
    pub c_1: f64,
    /// Lowest nonzero eigenvalue `(2π/L)²`.
    pub kappa: f64,
}

/// `c_s1 = c_1 = νκ/(1+κ)`, the best constant in `c ‖w‖²_{H¹} ≤ ν ‖∇w‖²`
/// for mean-free `w`.
pub fn poincare_constants(nu: f64, length: f64) -> Result<PoincareConstants> {
    if !(nu.is_finite() && nu > 0.0) {
        return Err(invalid("nu", "must be positive and finite"));
    }
    if !(length.is_finite() && length > 0.0) {
        return Err(invalid("L", "must be positive and finite"));
    }
    let kappa = powi(TAU / length, 2);
    let c = nu * kappa / (1.0 + kappa);
    Ok(PoincareConstants { c_s1: c, c_1: c, kappa })
}

/// Largest single-mode value of `c ‖w‖²_{H¹} / (ν ‖∇w‖²)` on the grid.
/// Equals 1 exactly when `c` is sharp.
pub fn poincare_rayleigh_max(grid: &PeriodicGrid, nu: f64, c: f64) -> f64 {
    let w1 = sobolev_weights(grid, 1);
    (1..grid.len())
        .filter_map(|i| {
            let grad = w1[i] - 1.0;
            (grad > 0.0).then(|| c * w1[i] / (nu * grad))
        })
        .fold(0.0, f64::max)
}

/// Minimal window length `T_* = 2 ln 2 / c_s1`, so that `e^{-c_s1 T_*/2} = 1/2`.
pub fn t_star(p: &PoincareConstants) -> f64 {
    2.0 * LN_2 / p.c_s1
}

/// `γ_* = (c_1 / (2 c_3))^{1/4}`, so that `c_1 - c_3 γ_*⁴ = c_1/2`.
pub fn gamma_star(p: &PoincareConstants, rates: &InterpolationConstants) -> f64 {
    powf(p.c_1 / (2.0 * rates.c_3), 0.25)
}

/// `x_k` for `x_{k+1} = a + r x_k`, in closed form.
pub fn geometric_iterate(a: f64, r: f64, x0: f64, k: u32) -> f64 {
    let rk = powi(r, k as i32);
    a * (1.0 - rk) / (1.0 - r) + rk * x0
}

/// `a/(1-r) + r^k x0`: the k-uniform bound on `x_k` when `x_{k+1} ≤ a + r x_k`, `0 < r < 1`.
pub fn geometric_bound(a: f64, r: f64, x0: f64, k: u32) -> f64 {
    a / (1.0 - r) + powi(r, k as i32) * x0
}

/// `x_k` by running the recursion.
pub fn geometric_recursion(a: f64, r: f64, x0: f64, k: u32) -> f64 {
    (0..k).fold(x0, |x, _| a + r * x)
}

/// `1 - e^{-x}` without cancellation.
fn one_minus_exp(x: f64) -> f64 {
    -expm1(-x)
}

/// Products where an undefined `0·∞` is read as unbounded.
fn settle(x: f64) -> f64 {
    if x.is_nan() {
        f64::INFINITY
    } else {
        x
    }
}

fn check_input(name: &'static str, v: f64) -> Result<()> {
    if v.is_nan() || v < 0.0 {
        return Err(invalid(name, "must be a nonnegative number"));
    }
    Ok(())
}

fn check_window(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(invalid("T", "window length must be positive and finite"));
    }
    Ok(())
}

/// Constants shared by all chains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub nu: f64,
    pub poincare: PoincareConstants,
    pub rates: InterpolationConstants,
}

impl Constants {
    pub fn t_star(&self) -> f64 {
        t_star(&self.poincare)
    }

    pub fn gamma_star(&self) -> f64 {
        gamma_star(&self.poincare, &self.rates)
    }
}

/// Inputs describing the base flow and its force, all in box measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseData {
    /// `sup_k ∫_{kT}^{(k+1)T} ‖f̄‖²_{L2}`
    pub forcing_l2: SupEstimate,
    /// `sup_k ∫ ‖∇f̄‖²_{L2}`
    pub forcing_grad: SupEstimate,
    /// `sup_k ∫ ‖f̄‖²_{H¹}`
    pub forcing_h1: SupEstimate,
    /// `‖v̄(0)‖²`, `‖∇v̄(0)‖²`, `‖∇²v̄(0)‖²`
    pub init_l2_sq: f64,
    pub init_grad_sq: f64,
    pub init_hess_sq: f64,
    /// `sup_t |⨍ v(t)|`
    pub mean_sup: SupEstimate,
}

impl BaseData {
    pub fn zero() -> Self {
        Self {
            forcing_l2: SupEstimate::exact(0.0, 0),
            forcing_grad: SupEstimate::exact(0.0, 0),
            forcing_h1: SupEstimate::exact(0.0, 0),
            init_l2_sq: 0.0,
            init_grad_sq: 0.0,
            init_hess_sq: 0.0,
            mean_sup: SupEstimate::exact(0.0, 0),
        }
    }

    fn validate(&self) -> Result<()> {
        check_input("forcing_l2", self.forcing_l2.value)?;
        check_input("forcing_grad", self.forcing_grad.value)?;
        check_input("forcing_h1", self.forcing_h1.value)?;
        check_input("init_l2_sq", self.init_l2_sq)?;
        check_input("init_grad_sq", self.init_grad_sq)?;
        check_input("init_hess_sq", self.init_hess_sq)?;
        check_input("mean_sup", self.mean_sup.value)
    }
}

/// Admissibility data of the base force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbarChain {
    pub window: f64,
    pub t_star: f64,
    pub abar1_sq: f64,
    pub abar2_sq: f64,
    pub abar3_sq: f64,
    pub abar4_sq: f64,
    /// `T ≥ T_*` and `T > Ā₃²`.
    pub membership: bool,
    /// The sup over windows covers every `k`.
    pub certified: bool,
}

/// `Ā₃² = c₁(Ā₁²+Ā₂²)Ā₂² + (Ā₁²+1) e^{c₂(Ā₁²+Ā₂²)}`.
pub fn abar3_sq(abar1_sq: f64, abar2_sq: f64, c_1: f64, c_2: f64) -> f64 {
    let s = abar1_sq + abar2_sq;
    settle(c_1 * s * abar2_sq + (abar1_sq + 1.0) * exp(c_2 * s))
}

pub fn abar_chain(data: &BaseData, window: f64, k: &Constants) -> Result<AbarChain> {
    check_window(window)?;
    data.validate()?;
    let abar1_sq = data.forcing_h1.value;
    let abar2_sq = data.init_l2_sq + data.init_grad_sq;
    let abar3_sq = abar3_sq(abar1_sq, abar2_sq, k.poincare.c_1, k.rates.c_2);
    let abar4_sq = data.mean_sup.value * data.mean_sup.value;
    let ts = k.t_star();
    Ok(AbarChain {
        window,
        t_star: ts,
        abar1_sq,
        abar2_sq,
        abar3_sq,
        abar4_sq,
        membership: window >= ts && window > abar3_sq,
        certified: data.forcing_h1.certified && data.mean_sup.certified,
    })
}

/// Window-independent thresholds for a force whose total `∫₀^∞ ‖h̄‖²_{H¹} = h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleThreshold {
    /// `c₁(h+Ā₂²) + (h+1) e^{c₂(h+Ā₂²)}`; bounds `Ā₃²` when `Ā₂² ≤ 1`.
    pub literal: f64,
    /// The same with the first term multiplied by `max(Ā₂², 1)`; bounds `Ā₃²` always.
    pub sufficient: f64,
}

pub fn admissible_threshold(total_h1: f64, abar2_sq: f64, k: &Constants) -> AdmissibleThreshold {
    let s = total_h1 + abar2_sq;
    let c1 = k.poincare.c_1;
    let tail = (total_h1 + 1.0) * exp(k.rates.c_2 * s);
    AdmissibleThreshold {
        literal: settle(c1 * s + tail),
        sufficient: settle(c1 * s * abar2_sq.max(1.0) + tail),
    }
}

/// Time-largeness conditions the base-flow bounds rely on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaseFlags {
    /// `T ≥ T_*`
    pub window_ge_t_star: bool,
    /// `T ≥ 2 c_s2 A₃² / c_s1`
    pub window_ge_gradient_threshold: bool,
    /// `-c_s1 T/2 + c_s4 A₈² ≤ 0`
    pub hessian_decay: bool,
    /// `1 - e^{-c_s1 T/2} ≥ 1/2`
    pub hessian_half: bool,
    /// Every sup over windows in the inputs is certified.
    pub inputs_certified: bool,
}

impl BaseFlags {
    pub fn all_hold(&self) -> bool {
        self.window_ge_t_star && self.window_ge_gradient_threshold && self.hessian_decay && self.hessian_half
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AChain {
    pub window: f64,
    /// `a[i]` holds `A_{i+1}²`, `i = 0..14`.
    pub a_sq: [f64; 14],
    pub flags: BaseFlags,
}

impl AChain {
    /// `A_i²` for `i` in `1..=14`.
    pub fn get(&self, i: usize) -> f64 {
        self.a_sq[i - 1]
    }
}

pub fn a_chain(data: &BaseData, window: f64, k: &Constants) -> Result<AChain> {
    check_window(window)?;
    data.validate()?;
    let cs1 = k.poincare.c_s1;
    let r = &k.rates;
    let t = window;

    let a1 = data.forcing_l2.value / cs1;
    let a2 = settle(a1 / one_minus_exp(cs1 * t) + data.init_l2_sq);
    let a3 = a1 + a2;
    let a4 = settle(cs1 * exp(cs1 * a3) * a1);
    let a5 = settle(a4 / one_minus_exp(0.5 * cs1 * t) + data.init_grad_sq);
    let a6 = a4 + a5;
    let a7 = settle(r.c_s2 * (a6 + 1.0) * a3 + a5);
    let a8 = a3 + a7;
    let a9 = data.mean_sup.value * data.mean_sup.value;
    let a10 = data.forcing_grad.value;
    let a11 = settle(exp(r.c_s3 * a8) * r.c_s3 * a10);
    let a12 = 2.0 * a11 + data.init_hess_sq;
    let a13 = settle(a11 + a12 * exp(r.c_s4 * a8));
    let a14 = settle(r.c_s3 * (a13 * a8 + a10) + a12);

    let flags = BaseFlags {
        window_ge_t_star: t >= k.t_star(),
        window_ge_gradient_threshold: t >= 2.0 * r.c_s2 * a3 / cs1,
        hessian_decay: -0.5 * cs1 * t + r.c_s4 * a8 <= 0.0,
        hessian_half: one_minus_exp(0.5 * cs1 * t) >= 0.5,
        inputs_certified: data.forcing_l2.certified
            && data.forcing_grad.certified
            && data.mean_sup.certified,
    };
    Ok(AChain {
        window,
        a_sq: [a1, a2, a3, a4, a5, a6, a7, a8, a9, a10, a11, a12, a13, a14],
        flags,
    })
}

/// Inputs describing the perturbation force and initial data, in box measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationData {
    /// `sup_k ∫ ‖ḡ‖²`
    pub forcing_l2: SupEstimate,
    /// `sup_k ∫_{kT}^{(k+1)T} |⨍ u(t)|² dt`
    pub mean_window_sq: SupEstimate,
    /// `sup_t |⨍ u(t)|`
    pub mean_sup: SupEstimate,
    /// `‖ū(0)‖²`
    pub init_l2_sq: f64,
    pub gamma: f64,
}

impl PerturbationData {
    pub fn zero(gamma: f64) -> Self {
        Self {
            forcing_l2: SupEstimate::exact(0.0, 0),
            mean_window_sq: SupEstimate::exact(0.0, 0),
            mean_sup: SupEstimate::exact(0.0, 0),
            init_l2_sq: 0.0,
            gamma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaHypothesis {
    Satisfied,
    Violated,
}

impl GammaHypothesis {
    pub fn as_str(&self) -> &'static str {
        match self {
            GammaHypothesis::Satisfied => "satisfied",
            GammaHypothesis::Violated => "violated",
        }
    }
}

/// Time-largeness conditions the perturbation bounds rely on. The decay condition is
/// given in two readings: with and without the `c₂` factor carried by the
/// exponent it controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerturbationFlags {
    /// `-c₁T/2 + A₈² ≤ 0`
    pub decay_literal: bool,
    /// `-c₁T/2 + c₂A₈² ≤ 0`
    pub decay_scaled: bool,
    /// `1 - e^{-c₁T/2} ≥ 1/2`
    pub half: bool,
    pub inputs_certified: bool,
}

impl PerturbationFlags {
    pub fn all_hold(&self) -> bool {
        self.decay_literal && self.decay_scaled && self.half
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BChain {
    pub b1_sq: f64,
    pub b2_sq: f64,
    pub b3_sq: f64,
    pub b4_sq: f64,
    pub b5_sq: f64,
    /// `B₅² + B₄²`: also covers the value `‖ū(kT)‖²` at window starts.
    pub b5_sq_with_restart: f64,
    /// Bound used for `sup_t ‖ū(t)‖²` (equal to `B₅²`).
    pub l2_sup_sq: f64,
    /// `sup_t |⨍ u(t)|`
    pub b6_mean: f64,
    pub b7_sq: f64,
    pub gamma: f64,
    pub gamma_star: f64,
    pub gamma_hypothesis: GammaHypothesis,
    pub flags: PerturbationFlags,
}

pub fn b_chain(data: &PerturbationData, a: &AChain, k: &Constants) -> Result<BChain> {
    check_input("forcing_l2", data.forcing_l2.value)?;
    check_input("mean_window_sq", data.mean_window_sq.value)?;
    check_input("mean_sup", data.mean_sup.value)?;
    check_input("init_l2_sq", data.init_l2_sq)?;
    if !(data.gamma.is_finite() && data.gamma > 0.0) {
        return Err(invalid("gamma", "must be positive and finite"));
    }
    let c1 = k.poincare.c_1;
    let c2 = k.rates.c_2;
    let t = a.window;
    let a3 = a.get(3);
    let a8 = a.get(8);
    let a9 = a.get(9);
    let g = data.gamma;

    let b1 = data.forcing_l2.value;
    let b2 = data.mean_window_sq.value;
    let growth = exp(c2 * a8);
    let b3 = settle((c2 * b1 + settle(c2 * a3 * b2)) * growth);
    let b4 = settle(b3 + growth * (2.0 * b3 + data.init_l2_sq));
    let b5 = settle(c2 * a8 * b4 + settle(c2 * a3 * b2) + c2 * b1 + b3);
    let b6 = data.mean_sup.value;
    let span = (t + 1.0) * g * g;
    let b7 = settle((span + b6 * b6) * (a8 * (1.0 + a8 + a9) + a9 + span) + g * g);
    let gs = k.gamma_star();
    Ok(BChain {
        b1_sq: b1,
        b2_sq: b2,
        b3_sq: b3,
        b4_sq: b4,
        b5_sq: b5,
        b5_sq_with_restart: b5 + b4,
        l2_sup_sq: b5,
        b6_mean: b6,
        b7_sq: b7,
        gamma: g,
        gamma_star: gs,
        gamma_hypothesis: if g <= gs {
            GammaHypothesis::Satisfied
        } else {
            GammaHypothesis::Violated
        },
        flags: PerturbationFlags {
            decay_literal: -0.5 * c1 * t + a8 <= 0.0,
            decay_scaled: -0.5 * c1 * t + c2 * a8 <= 0.0,
            half: one_minus_exp(0.5 * c1 * t) >= 0.5,
            inputs_certified: data.forcing_l2.certified && data.mean_window_sq.certified && data.mean_sup.certified,
        },
    })
}

/// Pointwise data entering the forcing budget at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetSample {
    pub t: f64,
    /// `‖∇v̄(t)‖²_{L3}` of the base flow.
    pub base_grad_l3_sq: f64,
    /// `|⨍ u(t)|²`
    pub mean_sq: f64,
    /// `‖ḡ(t)‖²`
    pub forcing_sq: f64,
}

/// `G² = c₃ ‖∇v̄‖²_{L3} (B² + |⨍u|²) + c₄ ‖ḡ‖²` with `B²` the sup bound on `‖ū‖²`.
pub fn budget_sq(s: &BudgetSample, l2_sup_sq: f64, rates: &InterpolationConstants) -> f64 {
    settle(rates.c_3 * s.base_grad_l3_sq * (l2_sup_sq + s.mean_sq) + rates.c_4 * s.forcing_sq)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmallnessReport {
    pub times: Vec<f64>,
    pub budget_sq: Vec<f64>,
    /// `c₁γ/4`
    pub threshold: f64,
    pub max_budget_sq: f64,
    pub passes: bool,
    pub gamma_hypothesis: GammaHypothesis,
}

/// Checks `G²(t) ≤ c₁γ/4` at every sample, and `γ ≤ γ_*`.
pub fn smallness_check(gamma: f64, samples: &[BudgetSample], b: &BChain, k: &Constants) -> SmallnessReport {
    let threshold = k.poincare.c_1 * gamma / 4.0;
    let budget: Vec<f64> = samples.iter().map(|s| budget_sq(s, b.l2_sup_sq, &k.rates)).collect();
    let max = budget.iter().copied().fold(0.0, f64::max);
    SmallnessReport {
        times: samples.iter().map(|s| s.t).collect(),
        threshold,
        max_budget_sq: max,
        passes: budget.iter().all(|g| *g <= threshold),
        budget_sq: budget,
        gamma_hypothesis: if gamma <= k.gamma_star() {
            GammaHypothesis::Satisfied
        } else {
            GammaHypothesis::Violated
        },
    }
}

/// Addends of the perturbation data functional, each checked against `εγ`
/// on its own; the reported value is their max.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataFunctional {
    pub forcing_window: f64,
    pub initial_l2: f64,
    pub mean_window: f64,
    /// Maxima over the sampled times.
    pub mean_pointwise: f64,
    pub forcing_pointwise: f64,
    pub max_addend: f64,
    pub sum: f64,
    pub epsilon: f64,
    pub passes: bool,
}

pub fn data_functional_check(
    epsilon: f64,
    gamma: f64,
    data: &PerturbationData,
    samples: &[BudgetSample],
) -> Result<DataFunctional> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid("epsilon", "must lie in (0, 1)"));
    }
    let mean_pointwise = samples.iter().map(|s| s.mean_sq).fold(0.0, f64::max);
    let forcing_pointwise = samples.iter().map(|s| s.forcing_sq).fold(0.0, f64::max);
    let parts = [
        data.forcing_l2.value,
        data.init_l2_sq,
        data.mean_window_sq.value,
        mean_pointwise,
        forcing_pointwise,
    ];
    let max_addend = parts.iter().copied().fold(0.0, f64::max);
    Ok(DataFunctional {
        forcing_window: parts[0],
        initial_l2: parts[1],
        mean_window: parts[2],
        mean_pointwise,
        forcing_pointwise,
        max_addend,
        sum: parts.iter().sum(),
        epsilon,
        passes: max_addend.is_finite() && max_addend <= epsilon * gamma,
    })
}
