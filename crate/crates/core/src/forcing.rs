//! Body forces as finite sums of spatial shapes times scalar time profiles,
//! optionally extended periodically in time.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::field::{sobolev_weights, MeanVector, SpectralField};
use crate::grid::PeriodicGrid;
use crate::math::{cos, exp, floor, one_minus_exp_over, rem_euclid, sin, sqrt};
use crate::quadrature::adaptive_simpson;

/// Relative tolerance for time integrals without a closed form.
pub const QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum TimeProfile {
    Constant,
    /// `e^{-rate t}`
    Exponential { rate: f64 },
    /// `sin(omega t + phase)`
    Sinusoid { omega: f64, phase: f64 },
    /// Piecewise linear through `(times, values)`, held constant outside.
    Sampled { times: Vec<f64>, values: Vec<f64> },
}

impl TimeProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            TimeProfile::Exponential { rate } if !(rate.is_finite() && *rate > 0.0) => {
                Err(invalid("rate", "decay rate must be positive"))
            }
            TimeProfile::Sinusoid { omega, phase } if !(omega.is_finite() && phase.is_finite()) => {
                Err(invalid("omega", "frequency and phase must be finite"))
            }
            TimeProfile::Sampled { times, values } => {
                if times.len() != values.len() || times.is_empty() {
                    return Err(invalid("times", "need matching, nonempty times and values"));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(invalid("times", "sample times must increase strictly"));
                }
                if values.iter().chain(times).any(|v| !v.is_finite()) {
                    return Err(invalid("values", "samples must be finite"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Exponential { rate } => exp(-rate * t),
            TimeProfile::Sinusoid { omega, phase } => sin(omega * t + phase),
            TimeProfile::Sampled { times, values } => {
                let n = times.len();
                if t <= times[0] {
                    return values[0];
                }
                if t >= times[n - 1] {
                    return values[n - 1];
                }
                let j = times.partition_point(|&s| s <= t) - 1;
                let w = (t - times[j]) / (times[j + 1] - times[j]);
                values[j] + w * (values[j + 1] - values[j])
            }
        }
    }

    /// `∫_a^b p(t) dt`, exact for every profile kind.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            TimeProfile::Constant => b - a,
            TimeProfile::Exponential { rate } => exp(-rate * a) * (b - a) * one_minus_exp_over(rate * (b - a)),
            TimeProfile::Sinusoid { omega, phase } => {
                if *omega == 0.0 {
                    sin(*phase) * (b - a)
                } else {
                    (cos(omega * a + phase) - cos(omega * b + phase)) / omega
                }
            }
            TimeProfile::Sampled { times, .. } => {
                // Integrate the piecewise linear interpolant between breakpoints.
                let mut pts: Vec<f64> = vec![a];
                pts.extend(times.iter().copied().filter(|&s| s > a && s < b));
                pts.push(b);
                pts.windows(2)
                    .map(|w| 0.5 * (w[1] - w[0]) * (self.value(w[0]) + self.value(w[1])))
                    .sum()
            }
        }
    }

    /// `sup_t |p(t)|`
    pub fn sup_abs(&self) -> f64 {
        match self {
            TimeProfile::Constant | TimeProfile::Exponential { .. } => 1.0,
            TimeProfile::Sinusoid { .. } => 1.0,
            TimeProfile::Sampled { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// Bound on `|p(t)|` for all `t >= t0`.
    fn tail_abs(&self, t0: f64) -> f64 {
        match self {
            TimeProfile::Exponential { rate } => exp(-rate * t0.max(0.0)),
            TimeProfile::Sampled { times, values } => {
                let start = times.partition_point(|&s| s <= t0).saturating_sub(1);
                values[start..].iter().fold(self.value(t0).abs(), |m, v| m.max(v.abs()))
            }
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForcingTerm {
    pub shape: SpectralField,
    pub profile: TimeProfile,
}

/// Sup over windows `k = 0..=k_max` of a windowed quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupEstimate {
    /// Largest value found over the evaluated windows (may be `+inf`).
    pub value: f64,
    /// Upper bound on every window beyond `k_max` (`+inf` when none is known).
    pub tail_bound: f64,
    pub k_max: usize,
    /// True when `value` is the sup over all `k ∈ ℕ₀`.
    pub certified: bool,
}

impl SupEstimate {
    pub fn exact(value: f64, k_max: usize) -> Self {
        Self {
            value,
            tail_bound: value,
            k_max,
            certified: true,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Spatial norm used for windowed forcing integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialNorm {
    L2,
    /// `‖∇w‖_{L2}`
    Grad,
    H1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forcing {
    grid: PeriodicGrid,
    components: usize,
    terms: Vec<ForcingTerm>,
    period: Option<f64>,
}

impl Forcing {
    pub fn zero(grid: &PeriodicGrid, components: usize) -> Self {
        Self {
            grid: grid.clone(),
            components,
            terms: Vec::new(),
            period: None,
        }
    }

    pub fn new(grid: &PeriodicGrid, components: usize, terms: Vec<ForcingTerm>) -> Result<Self> {
        for term in &terms {
            if term.shape.grid() != grid {
                return Err(Error::GridMismatch);
            }
            if term.shape.components() != components {
                return Err(Error::ComponentMismatch {
                    expected: components,
                    found: term.shape.components(),
                });
            }
            term.profile.validate()?;
        }
        Ok(Self {
            grid: grid.clone(),
            components,
            terms,
            period: None,
        })
    }

    /// Periodic extension `f(t) = f(t - kT)` for `t ∈ [kT, (k+1)T)`.
    pub fn periodic(mut self, period: f64) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(invalid("period", "must be positive"));
        }
        self.period = Some(period);
        Ok(self)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn terms(&self) -> &[ForcingTerm] {
        &self.terms
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.shape.max_abs_coeff() == 0.0)
    }

    /// Time reduced into the base period.
    pub fn local_time(&self, t: f64) -> f64 {
        match self.period {
            Some(p) => rem_euclid(t, p),
            None => t,
        }
    }

    /// Full force (mean included) at time `t`.
    pub fn eval(&self, t: f64) -> SpectralField {
        let s = self.local_time(t);
        let mut out = SpectralField::zeros(&self.grid, self.components);
        for term in &self.terms {
            let p = term.profile.value(s);
            if p != 0.0 {
                out = out.axpy(p, &term.shape).expect("shapes validated");
            }
        }
        out
    }

    /// Mean-free part of the force.
    pub fn eval_bar(&self, t: f64) -> SpectralField {
        self.eval(t).subtract_mean()
    }

    pub fn mean_at(&self, t: f64) -> MeanVector {
        let s = self.local_time(t);
        self.terms.iter().fold(MeanVector::ZERO, |acc, term| {
            acc.add(&term.shape.mean().scaled(term.profile.value(s)))
        })
    }

    /// `∫_a^b ⨍ f dt`, exact.
    pub fn mean_integral(&self, a: f64, b: f64) -> MeanVector {
        let mut acc = MeanVector::ZERO;
        for term in &self.terms {
            let m = term.shape.mean();
            if m.norm_sq() == 0.0 {
                continue;
            }
            acc = acc.add(&m.scaled(self.profile_integral(&term.profile, a, b)));
        }
        acc
    }

    fn profile_integral(&self, p: &TimeProfile, a: f64, b: f64) -> f64 {
        match self.period {
            None => p.integral(a, b),
            Some(per) => {
                let full = p.integral(0.0, per);
                primitive_periodic(p, per, full, b) - primitive_periodic(p, per, full, a)
            }
        }
    }

    /// Mean drift `M(t) = m0 + ∫_0^t ⨍ f`.
    pub fn mean_drift(&self, m0: &MeanVector, t: f64) -> MeanVector {
        m0.add(&self.mean_integral(0.0, t))
    }

    /// Asymptotic growth of the mean drift: the average forcing mean per unit time.
    /// Nonzero means `M(t)` is unbounded.
    pub fn mean_drift_rate(&self) -> MeanVector {
        let mut acc = MeanVector::ZERO;
        for term in &self.terms {
            let m = term.shape.mean();
            if m.norm_sq() == 0.0 {
                continue;
            }
            let rate = match (self.period, &term.profile) {
                (Some(per), p) => p.integral(0.0, per) / per,
                (None, TimeProfile::Constant) => 1.0,
                (None, TimeProfile::Sampled { values, .. }) => values[values.len() - 1],
                (None, TimeProfile::Sinusoid { omega, phase }) if *omega == 0.0 => sin(*phase),
                (None, _) => 0.0,
            };
            acc = acc.add(&m.scaled(rate));
        }
        acc
    }

    fn drift_diverges(&self) -> bool {
        let rate = self.mean_drift_rate().norm();
        let scale: f64 = self
            .terms
            .iter()
            .map(|t| t.shape.mean().norm() * t.profile.sup_abs())
            .sum();
        rate > 1e-12 * scale.max(f64::MIN_POSITIVE)
    }

    /// Bound on `|d/dt M(t)|`.
    fn drift_lipschitz(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.shape.mean().norm() * t.profile.sup_abs())
            .sum()
    }

    /// `sup_{t >= 0} |M(t)|` sampled on `[0, (k_max+1) T]`, padded by the
    /// Lipschitz bound between samples.
    pub fn mean_drift_sup(&self, m0: &MeanVector, window: f64, k_max: usize, per_window: usize) -> SupEstimate {
        if self.drift_diverges() {
            return SupEstimate::exact(f64::INFINITY, k_max);
        }
        let per_window = per_window.max(2);
        let horizon = window * (k_max + 1) as f64;
        let n = per_window * (k_max + 1);
        let h = horizon / n as f64;
        let mut best = 0.0f64;
        let mut acc = *m0;
        let mut t0 = 0.0;
        best = best.max(acc.norm());
        for i in 1..=n {
            let t1 = i as f64 * h;
            acc = acc.add(&self.mean_integral(t0, t1));
            t0 = t1;
            best = best.max(acc.norm());
        }
        let value = best + 0.5 * h * self.drift_lipschitz();
        let tail = self.drift_tail(&acc, horizon);
        SupEstimate {
            value,
            tail_bound: tail,
            k_max,
            certified: tail <= value,
        }
    }

    /// Bound on `|M(t)|` for `t >= t0` given `M(t0)`.
    fn drift_tail(&self, m_t0: &MeanVector, t0: f64) -> f64 {
        if let Some(per) = self.period {
            // Zero net drift per period: later values repeat earlier ones.
            if t0 >= per {
                return 0.0;
            }
            return f64::INFINITY;
        }
        let mut bound = m_t0.norm();
        for term in &self.terms {
            let m = term.shape.mean().norm();
            if m == 0.0 {
                continue;
            }
            match &term.profile {
                TimeProfile::Exponential { rate } => bound += m * exp(-rate * t0) / rate,
                TimeProfile::Sinusoid { omega, .. } if *omega != 0.0 => bound += 2.0 * m / omega.abs(),
                TimeProfile::Sampled { times, values } => {
                    if values[values.len() - 1] != 0.0 {
                        return f64::INFINITY;
                    }
                    let end = times[times.len() - 1];
                    if t0 < end {
                        bound += m * term.profile.tail_abs(t0) * (end - t0);
                    }
                }
                _ => {}
            }
        }
        bound
    }

    /// `sup_k ∫_{kT}^{(k+1)T} |M(t)|² dt`.
    pub fn mean_drift_window_sq_sup(&self, m0: &MeanVector, window: f64, k_max: usize) -> SupEstimate {
        if self.drift_diverges() {
            return SupEstimate::exact(f64::INFINITY, k_max);
        }
        let k_eval = self.windows_to_evaluate(window, k_max);
        let mut best = 0.0f64;
        let mut start = *m0;
        for k in 0..=k_eval {
            let a = k as f64 * window;
            let b = a + window;
            let v = adaptive_simpson(
                |t| start.add(&self.mean_integral(a, t)).norm_sq(),
                a,
                b,
                QUAD_TOL,
            );
            best = best.max(v);
            start = start.add(&self.mean_integral(a, b));
        }
        if k_eval < k_max || self.window_pattern(window).is_some() {
            return SupEstimate::exact(best, k_max);
        }
        let sup = self.drift_tail(&start, (k_max + 1) as f64 * window);
        let tail = window * sup * sup;
        SupEstimate {
            value: best,
            tail_bound: tail,
            k_max,
            certified: tail <= best,
        }
    }

    /// Number of distinct windows when the force repeats in a way commensurate with `window`.
    fn window_pattern(&self, window: f64) -> Option<usize> {
        let per = self.period?;
        let ratio = window / per;
        let r = crate::math::round(ratio);
        if r >= 1.0 && (ratio - r).abs() < 1e-12 * ratio {
            return Some(1);
        }
        let inv = per / window;
        let q = crate::math::round(inv);
        if q >= 1.0 && (inv - q).abs() < 1e-12 * inv {
            return Some(q as usize);
        }
        None
    }

    fn windows_to_evaluate(&self, window: f64, k_max: usize) -> usize {
        match self.window_pattern(window) {
            Some(n) if n <= k_max + 1 => n - 1,
            _ => k_max,
        }
    }

    /// Gram matrix of the mean-free shapes in the chosen norm.
    fn gram(&self, norm: SpatialNorm) -> Vec<f64> {
        let len = self.grid.len();
        let w0 = sobolev_weights(&self.grid, 0);
        let w1 = sobolev_weights(&self.grid, 1);
        let weights: Vec<f64> = (0..len)
            .map(|i| {
                if i == 0 {
                    return 0.0;
                }
                match norm {
                    SpatialNorm::L2 => w0[i],
                    SpatialNorm::Grad => w1[i] - w0[i],
                    SpatialNorm::H1 => w1[i],
                }
            })
            .collect();
        let n = self.terms.len();
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let a = self.terms[i].shape.coeffs();
                let b = self.terms[j].shape.coeffs();
                let mut s = 0.0;
                for (idx, (x, y)) in a.iter().zip(b).enumerate() {
                    s += weights[idx % len] * (x * y.conj()).re;
                }
                s *= self.grid.volume();
                g[i * n + j] = s;
                g[j * n + i] = s;
            }
        }
        g
    }

    /// `‖f̄(t)‖²` in the chosen norm.
    pub fn bar_norm_sq_at(&self, t: f64, norm: SpatialNorm) -> f64 {
        let gram = self.gram(norm);
        let s = self.local_time(t);
        let p: Vec<f64> = self.terms.iter().map(|term| term.profile.value(s)).collect();
        let n = p.len();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                total += gram[i * n + j] * p[i] * p[j];
            }
        }
        total.max(0.0)
    }

    /// `∫_a^b ‖f̄(t)‖² dt` in the chosen norm.
    pub fn bar_norm_sq_integral(&self, a: f64, b: f64, norm: SpatialNorm) -> f64 {
        let gram = self.gram(norm);
        self.bar_integral_with(&gram, a, b)
    }

    fn bar_integral_with(&self, gram: &[f64], a: f64, b: f64) -> f64 {
        let n = self.terms.len();
        let mut total = 0.0;
        for (lo, hi) in self.local_pieces(a, b) {
            for i in 0..n {
                for j in i..n {
                    let gij = gram[i * n + j];
                    if gij == 0.0 {
                        continue;
                    }
                    let mult = if i == j { 1.0 } else { 2.0 };
                    total += mult * gij * product_integral(&self.terms[i].profile, &self.terms[j].profile, lo, hi);
                }
            }
        }
        total.max(0.0)
    }

    /// Splits `[a, b]` into pieces expressed in local (reduced) time.
    fn local_pieces(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        match self.period {
            None => vec![(a, b)],
            Some(per) => {
                let mut out = Vec::new();
                let mut t = a;
                while t < b {
                    let k = floor(t / per);
                    let mut end = ((k + 1.0) * per).min(b);
                    if end <= t {
                        end = (t + per).min(b);
                    }
                    let lo = rem_euclid(t, per);
                    let hi = lo + (end - t);
                    out.push((lo, hi.min(per)));
                    t = end;
                }
                out
            }
        }
    }

    /// `sup_k ∫_{kT}^{(k+1)T} ‖f̄‖² dt` over `k = 0..=k_max`, with a tail bound.
    pub fn window_sup(&self, window: f64, k_max: usize, norm: SpatialNorm) -> SupEstimate {
        let gram = self.gram(norm);
        let k_eval = self.windows_to_evaluate(window, k_max);
        let mut best = 0.0f64;
        for k in 0..=k_eval {
            let a = k as f64 * window;
            best = best.max(self.bar_integral_with(&gram, a, a + window));
        }
        if k_eval < k_max || self.window_pattern(window).is_some() {
            return SupEstimate::exact(best, k_max);
        }
        let t0 = (k_max + 1) as f64 * window;
        let n = self.terms.len();
        let amp: f64 = (0..n)
            .map(|i| sqrt(gram[i * n + i].max(0.0)) * self.terms[i].profile.tail_abs(t0))
            .sum();
        let tail = if self.period.is_some() {
            // Non-commensurate period: bound by the largest amplitude over a period.
            let a: f64 = (0..n)
                .map(|i| sqrt(gram[i * n + i].max(0.0)) * self.terms[i].profile.sup_abs())
                .sum();
            window * a * a
        } else {
            window * amp * amp
        };
        SupEstimate {
            value: best,
            tail_bound: tail,
            k_max,
            certified: tail <= best,
        }
    }

    /// `∫_0^∞ ‖f̄‖² dt` when every profile decays exponentially; `+inf` otherwise.
    pub fn total_bar_norm_sq(&self, norm: SpatialNorm) -> f64 {
        if self.period.is_some() && !self.is_zero() {
            return f64::INFINITY;
        }
        let gram = self.gram(norm);
        let n = self.terms.len();
        let mut total = 0.0;
        for i in 0..n {
            for j in i..n {
                let gij = gram[i * n + j];
                if gij == 0.0 {
                    continue;
                }
                let rate = match (&self.terms[i].profile, &self.terms[j].profile) {
                    (TimeProfile::Exponential { rate: r1 }, TimeProfile::Exponential { rate: r2 }) => r1 + r2,
                    _ => return f64::INFINITY,
                };
                let mult = if i == j { 1.0 } else { 2.0 };
                total += mult * gij / rate;
            }
        }
        total.max(0.0)
    }

    /// Embeds a 2D force into the 3D box (third component zero).
    pub fn lift_2d_to_3d(&self, grid3: &PeriodicGrid) -> Result<Forcing> {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                Ok(ForcingTerm {
                    shape: t.shape.lift_2d_to_3d(grid3)?,
                    profile: t.profile.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let comps = if self.components == 2 { 3 } else { self.components };
        let mut out = Forcing::new(grid3, comps, terms)?;
        out.period = self.period;
        Ok(out)
    }

    /// Sum of two forces on the same grid; periods must agree.
    pub fn plus(&self, other: &Forcing) -> Result<Forcing> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let period = match (self.period, other.period) {
            (a, b) if a == b => a,
            (Some(_), None) if other.is_zero() => self.period,
            (None, Some(_)) if self.is_zero() => other.period,
            _ => return Err(Error::TimeMismatch("forces with different periods".to_string())),
        };
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        let mut out = Forcing::new(&self.grid, self.components, terms)?;
        out.period = period;
        Ok(out)
    }
}

/// Antiderivative from 0 of a periodically extended profile.
fn primitive_periodic(p: &TimeProfile, per: f64, full: f64, t: f64) -> f64 {
    let k = floor(t / per);
    k * full + p.integral(0.0, t - k * per)
}

/// `∫_a^b p(t) q(t) dt`; closed form for constant/exponential pairs.
fn product_integral(p: &TimeProfile, q: &TimeProfile, a: f64, b: f64) -> f64 {
    use TimeProfile::*;
    match (p, q) {
        (Constant, Constant) => b - a,
        (Constant, Exponential { rate }) | (Exponential { rate }, Constant) => {
            Exponential { rate: *rate }.integral(a, b)
        }
        (Exponential { rate: r1 }, Exponential { rate: r2 }) => Exponential { rate: r1 + r2 }.integral(a, b),
        (Constant, other) | (other, Constant) => other.integral(a, b),
        _ => adaptive_simpson(|t| p.value(t) * q.value(t), a, b, QUAD_TOL),
    }
}
