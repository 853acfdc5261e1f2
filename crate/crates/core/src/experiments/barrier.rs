use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A scalar time series.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Series {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::TimeMismatch(format!(
                "{} times for {} values",
                times.len(),
                values.len()
            )));
        }
        Ok(Self { times, values })
    }
}

/// Discrete checks of `dX²/dt ≤ -(c₁/2)X² + G²` (the decay form) and
/// `dX²/dt ≤ -X²(c₁ - c₃X⁴) + G²` (the raw form) on forward differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierDiagnostics {
    /// Largest slack added to the right-hand sides. On each interval the slack
    /// is ten times the forward-difference error estimate `|Δ²X²| / (2h)` at
    /// its two ends.
    pub tol_slack: f64,
    /// Intervals checked (those starting at `X² ≤ γ`).
    pub checked: usize,
    pub decay_violations: usize,
    /// Largest `lhs - rhs` of the decay form; negative means margin everywhere.
    pub decay_max_residual: f64,
    pub raw_violations: usize,
    pub raw_max_residual: f64,
}

pub fn barrier_monitor(x2: &Series, g2: &Series, c_1: f64, c_3: f64, gamma: f64) -> Result<BarrierDiagnostics> {
    if x2.times != g2.times || x2.values.len() != x2.times.len() || g2.values.len() != g2.times.len() {
        return Err(Error::TimeMismatch("X² and G² series must share timestamps".into()));
    }
    let t = &x2.times;
    let x = &x2.values;
    let g = &g2.values;
    let n = t.len();
    for i in 1..n {
        if !(t[i] > t[i - 1]) {
            return Err(Error::TimeMismatch(format!("times not increasing at index {i}")));
        }
    }
    // |X²''| h / 2 at each interior sample: the forward-difference error there
    let curvature: Vec<f64> = (0..n)
        .map(|i| {
            if i == 0 || i + 1 >= n {
                return 0.0;
            }
            let s1 = (x[i + 1] - x[i]) / (t[i + 1] - t[i]);
            let s0 = (x[i] - x[i - 1]) / (t[i] - t[i - 1]);
            (s1 - s0).abs() / 2.0
        })
        .collect();
    let mut d = BarrierDiagnostics {
        tol_slack: 0.0,
        checked: 0,
        decay_violations: 0,
        decay_max_residual: f64::NEG_INFINITY,
        raw_violations: 0,
        raw_max_residual: f64::NEG_INFINITY,
    };
    for i in 0..n.saturating_sub(1) {
        if !(x[i] <= gamma) {
            continue;
        }
        let slack = 10.0 * curvature[i].max(curvature[i + 1]);
        d.tol_slack = d.tol_slack.max(slack);
        let slope = (x[i + 1] - x[i]) / (t[i + 1] - t[i]);
        let decay = slope - (-0.5 * c_1 * x[i] + g[i] + slack);
        let raw = slope - (-x[i] * (c_1 - c_3 * x[i] * x[i]) + g[i] + slack);
        d.checked += 1;
        d.decay_max_residual = d.decay_max_residual.max(decay);
        d.raw_max_residual = d.raw_max_residual.max(raw);
        d.decay_violations += usize::from(decay > 0.0);
        d.raw_violations += usize::from(raw > 0.0);
    }
    if d.checked == 0 {
        d.decay_max_residual = 0.0;
        d.raw_max_residual = 0.0;
    }
    Ok(d)
}

/// `X² = ‖ū‖²_{H¹}`, `Y² = ‖ū‖²_{H²}` and the forcing budget `G²` over a run,
/// with the verdict on `X² < γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierReport {
    pub times: Vec<f64>,
    pub x2: Vec<f64>,
    pub y2: Vec<f64>,
    pub g2: Vec<f64>,
    pub gamma: f64,
    pub gamma_star: f64,
    pub never_exceeded: bool,
    pub first_exceedance_time: Option<f64>,
    /// `X ≤ Y` at every sample.
    pub nesting_holds: bool,
    pub diagnostics: BarrierDiagnostics,
}

impl BarrierReport {
    pub fn build(
        times: Vec<f64>,
        x2: Vec<f64>,
        y2: Vec<f64>,
        g2: Vec<f64>,
        gamma: f64,
        gamma_star: f64,
        c_1: f64,
        c_3: f64,
    ) -> Result<Self> {
        if y2.len() != times.len() {
            return Err(Error::TimeMismatch("Y² series length differs".into()));
        }
        let xs = Series::new(times.clone(), x2)?;
        let gs = Series::new(times.clone(), g2)?;
        let diagnostics = barrier_monitor(&xs, &gs, c_1, c_3, gamma)?;
        let first = xs.values.iter().position(|v| !(*v < gamma)).map(|i| times[i]);
        let nesting_holds = xs.values.iter().zip(&y2).all(|(x, y)| *x <= *y * (1.0 + 1e-12));
        Ok(Self {
            times,
            x2: xs.values,
            y2,
            g2: gs.values,
            gamma,
            gamma_star,
            never_exceeded: first.is_none(),
            first_exceedance_time: first,
            nesting_holds,
            diagnostics,
        })
    }
}
