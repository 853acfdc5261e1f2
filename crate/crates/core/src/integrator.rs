//! Time integration of the periodic Navier–Stokes system for a single flow
//! (2D or 3D) and for a 2D base flow co-stepped with a 3D perturbation.
//!
//! The mean-free part is advanced with an integrating factor that applies the
//! viscous decay `e^{-ν|k|² dt}` and the translation by the spatial mean
//! exactly; the remaining advection and the mean-free force are explicit.
//! The spatial mean obeys `dm/dt = ⨍ f` and is advanced separately with
//! Gauss–Legendre quadrature of the forcing mean. Since the mean never enters
//! the explicit part, the stable step does not shrink as a forced mean drifts.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::fft::FftNd;
use crate::field::{sobolev_weights, MeanVector, SpectralField};
use crate::forcing::Forcing;
use crate::grid::PeriodicGrid;
use crate::math::{cos, exp, powf, powi, round, sin, sqrt};
use crate::quadrature::gauss_legendre3;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Integrating-factor Adams–Bashforth 2, started with one RK3 step.
    ImexAb2,
    /// Integrating-factor SSP Runge–Kutta 3.
    ImexRk3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub nu: f64,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub dealias: bool,
    pub cfl_max: f64,
}

impl SolverConfig {
    pub fn new(nu: f64, dt: f64, t_end: f64) -> Self {
        Self {
            nu,
            dt,
            t_end,
            scheme: Scheme::ImexAb2,
            dealias: true,
            cfl_max: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(invalid("nu", "viscosity must be positive"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", "time step must be positive"));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(invalid("t_end", "horizon must be nonnegative"));
        }
        if !(self.cfl_max.is_finite() && self.cfl_max > 0.0) {
            return Err(invalid("cfl_max", "must be positive"));
        }
        Ok(())
    }

    /// Number of steps to reach `t_end`; `t_end` must be a multiple of `dt`.
    pub fn steps(&self) -> Result<usize> {
        steps_for(self.t_end, self.dt, "t_end")
    }
}

fn steps_for(span: f64, dt: f64, what: &'static str) -> Result<usize> {
    let n = round(span / dt);
    if (n * dt - span).abs() > 1e-9 * span.max(dt) {
        return Err(invalid(what, format!("{span} is not a multiple of dt = {dt}")));
    }
    Ok(n as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Base2d,
    Full3d,
    Perturbation,
}

/// Velocity split into its mean-free part and its spatial mean.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub u_bar: SpectralField,
    pub mean: MeanVector,
    pub role: Role,
}

impl FlowState {
    /// Splits a full velocity field. Rejects non-solenoidal input.
    pub fn from_velocity(velocity: &SpectralField, t: f64, role: Role) -> Result<Self> {
        let dim = velocity.grid().dim();
        if velocity.components() != dim {
            return Err(Error::ComponentMismatch {
                expected: dim,
                found: velocity.components(),
            });
        }
        match (role, dim) {
            (Role::Base2d, 2) | (Role::Full3d, 3) | (Role::Perturbation, 3) => {}
            _ => return Err(invalid("role", "role does not match the grid dimension")),
        }
        let div = velocity.divergence()?.sobolev_norm(0)?;
        let scale = velocity.sobolev_norm(1)?;
        if div > 1e-11 * scale.max(f64::MIN_POSITIVE) {
            return Err(invalid("velocity", format!("not divergence free (‖div‖ = {div:e})")));
        }
        let mut u_bar = velocity.subtract_mean();
        u_bar.set_flags(true, true);
        Ok(Self {
            t,
            u_bar,
            mean: velocity.mean(),
            role,
        })
    }

    pub fn zero(grid: &PeriodicGrid, role: Role) -> Self {
        let mut u_bar = SpectralField::zeros(grid, grid.dim());
        u_bar.set_flags(true, true);
        Self {
            t: 0.0,
            u_bar,
            mean: MeanVector::ZERO,
            role,
        }
    }

    /// `u_bar + mean`
    pub fn velocity(&self) -> SpectralField {
        self.u_bar.with_mean(&self.mean)
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.u_bar.grid()
    }
}

/// Per-step scalar diagnostics of one flow.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepRecord {
    pub t: f64,
    /// `‖ū‖²_{L2}`
    pub l2_sq: f64,
    /// `‖ū‖²_{H^s}` for `s = 1, 2, 3`.
    pub h1_sq: f64,
    pub h2_sq: f64,
    pub h3_sq: f64,
    /// `‖∇ū‖²_{L2}`
    pub grad_sq: f64,
    /// `‖∇²ū‖²_{L2}` and `‖∇³ū‖²_{L2}`, Frobenius.
    pub hess_sq: f64,
    pub third_sq: f64,
    /// `‖∇ū‖_{L3}` with the pointwise Frobenius norm.
    pub grad_l3: f64,
    /// `‖∇q̄‖²_{L2}`, reconstructed as the gradient part of the unprojected right side.
    pub pressure_grad_sq: f64,
    /// `‖(ū_n - ū_{n-1})/dt‖²_{L2}`, zero at the first sample.
    pub increment_sq: f64,
    /// `⟨f̄, ū⟩_{L2}`
    pub forcing_inner: f64,
    /// `‖div ū‖_{L2}`
    pub div_l2: f64,
    pub mean: MeanVector,
    /// Largest pointwise speed of the advecting velocity, uniform drift excluded.
    pub max_speed: f64,
}

/// Which states to keep besides the per-step scalar records.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sampling {
    pub times: Vec<f64>,
    /// Window length `T`; states at every `kT` are kept.
    pub window: Option<f64>,
}

impl Sampling {
    pub fn at(times: &[f64]) -> Self {
        Self {
            times: times.to_vec(),
            window: None,
        }
    }

    pub fn windows(window: f64) -> Self {
        Self {
            times: Vec::new(),
            window: Some(window),
        }
    }

    fn indices(&self, cfg: &SolverConfig, n_steps: usize) -> Result<Vec<usize>> {
        let mut idx = vec![0usize, n_steps];
        for &t in &self.times {
            if !(0.0..=cfg.t_end * (1.0 + 1e-12)).contains(&t) {
                return Err(Error::TimeMismatch(format!("sample time {t} outside [0, {}]", cfg.t_end)));
            }
            let n = steps_for(t, cfg.dt, "sample time")
                .map_err(|_| Error::TimeMismatch(format!("sample time {t} is not on the step grid")))?;
            idx.push(n);
        }
        if let Some(w) = self.window {
            if !(w.is_finite() && w > 0.0) {
                return Err(invalid("window", "must be positive"));
            }
            if cfg.dt > w {
                return Err(invalid("dt", "time step exceeds the window length"));
            }
            if cfg.t_end < w {
                return Err(invalid("t_end", "horizon shorter than one window"));
            }
            let per = steps_for(w, cfg.dt, "window")?;
            let mut n = 0;
            while n <= n_steps {
                idx.push(n);
                n += per;
            }
        }
        idx.sort_unstable();
        idx.dedup();
        Ok(idx)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub role: Role,
    pub dt: f64,
    pub window: Option<f64>,
    /// One record per step, including `t = 0` and the final time.
    pub records: Vec<StepRecord>,
    /// Stored states in increasing time.
    pub states: Vec<FlowState>,
}

impl Trajectory {
    fn empty(role: Role, dt: f64, window: Option<f64>) -> Self {
        Self {
            role,
            dt,
            window,
            records: Vec::new(),
            states: Vec::new(),
        }
    }

    pub fn state_at(&self, t: f64) -> Option<&FlowState> {
        self.states
            .iter()
            .find(|s| (s.t - t).abs() <= 1e-9 * t.abs().max(self.dt))
    }

    pub fn final_state(&self) -> Option<&FlowState> {
        self.states.last()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairTrajectory {
    pub base: Trajectory,
    pub perturbation: Trajectory,
}

/// A run that stopped early; `partial` holds everything computed before the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct Aborted<T> {
    pub error: Error,
    pub partial: Box<T>,
}

impl<T> fmt::Display for Aborted<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run aborted: {}", self.error)
    }
}

impl<T> From<Aborted<T>> for Error {
    fn from(a: Aborted<T>) -> Error {
        a.error
    }
}

/// Precomputed per-grid operators and the force acting on one flow.
struct Block {
    grid: PeriodicGrid,
    fft: FftNd,
    partner: Vec<usize>,
    k_odd: Vec<[f64; 3]>,
    /// First-derivative symbol along one axis, by array index.
    axis_k: Vec<f64>,
    alias: Vec<bool>,
    e_full: Vec<f64>,
    e_half: Vec<f64>,
    /// Sobolev weights for `s = 0..=3`, then `|k|⁴` and `|k|⁶` (Frobenius).
    weights: [Vec<f64>; 6],
    forcing: Forcing,
    dealias: bool,
}

impl Block {
    fn new(grid: &PeriodicGrid, forcing: &Forcing, cfg: &SolverConfig) -> Result<Self> {
        if forcing.grid() != grid {
            return Err(Error::GridMismatch);
        }
        if forcing.components() != grid.dim() {
            return Err(Error::ComponentMismatch {
                expected: grid.dim(),
                found: forcing.components(),
            });
        }
        let len = grid.len();
        let mut e_full = Vec::with_capacity(len);
        let mut e_half = Vec::with_capacity(len);
        for idx in 0..len {
            let k = grid.wavevector(idx);
            let ksq: f64 = k.iter().map(|v| v * v).sum();
            e_full.push(exp(-cfg.nu * ksq * cfg.dt));
            e_half.push(exp(-0.5 * cfg.nu * ksq * cfg.dt));
        }
        Ok(Self {
            grid: grid.clone(),
            fft: grid.fft(),
            partner: (0..len).map(|i| grid.partner(i)).collect(),
            k_odd: (0..len).map(|i| grid.wavevector_odd(i)).collect(),
            axis_k: (0..grid.n()).map(|j| grid.axis_symbol(j, 1)).collect(),
            alias: (0..len).map(|i| grid.is_aliased(i)).collect(),
            e_full,
            e_half,
            weights: [
                sobolev_weights(grid, 0),
                sobolev_weights(grid, 1),
                sobolev_weights(grid, 2),
                sobolev_weights(grid, 3),
                (0..len).map(|i| frobenius_weight(grid, i, 2)).collect(),
                (0..len).map(|i| frobenius_weight(grid, i, 3)).collect(),
            ],
            forcing: forcing.clone(),
            dealias: cfg.dealias,
        })
    }

    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn len(&self) -> usize {
        self.grid.len()
    }

    /// Inverse transforms of real fields, two per complex FFT.
    fn backward_real(&self, spectra: &[Vec<Complex64>]) -> Vec<Vec<f64>> {
        let len = self.len();
        let mut out = Vec::with_capacity(spectra.len());
        let mut buf = vec![ZERO; len];
        let mut i = 0;
        while i < spectra.len() {
            if i + 1 < spectra.len() {
                let (a, b) = (&spectra[i], &spectra[i + 1]);
                for q in 0..len {
                    buf[q] = a[q] + Complex64::new(-b[q].im, b[q].re);
                }
                self.fft.backward(&mut buf);
                out.push(buf.iter().map(|c| c.re).collect());
                out.push(buf.iter().map(|c| c.im).collect());
                i += 2;
            } else {
                buf.copy_from_slice(&spectra[i]);
                self.fft.backward(&mut buf);
                out.push(buf.iter().map(|c| c.re).collect());
                i += 1;
            }
        }
        out
    }

    /// Forward transforms of real fields, two per complex FFT.
    fn forward_real(&self, fields: &[Vec<f64>]) -> Vec<Vec<Complex64>> {
        let len = self.len();
        let mut out = Vec::with_capacity(fields.len());
        let mut i = 0;
        while i < fields.len() {
            if i + 1 < fields.len() {
                let mut z: Vec<Complex64> = fields[i]
                    .iter()
                    .zip(&fields[i + 1])
                    .map(|(&a, &b)| Complex64::new(a, b))
                    .collect();
                self.fft.forward(&mut z);
                let mut a = vec![ZERO; len];
                let mut b = vec![ZERO; len];
                for q in 0..len {
                    let zc = z[self.partner[q]].conj();
                    a[q] = (z[q] + zc) * 0.5;
                    let d = (z[q] - zc) * 0.5;
                    b[q] = Complex64::new(d.im, -d.re);
                }
                out.push(a);
                out.push(b);
                i += 2;
            } else {
                let mut z: Vec<Complex64> = fields[i].iter().map(|&a| Complex64::new(a, 0.0)).collect();
                self.fft.forward(&mut z);
                out.push(z);
                i += 1;
            }
        }
        out
    }

    /// Physical `∂_j u_i`, ordered `i`-major.
    fn gradients(&self, coeffs: &[Complex64]) -> Vec<Vec<f64>> {
        let dim = self.dim();
        let len = self.len();
        let mut spectra = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            let comp = &coeffs[i * len..(i + 1) * len];
            for j in 0..dim {
                spectra.push(
                    comp.iter()
                        .zip(&self.k_odd)
                        .map(|(c, k)| Complex64::new(-c.im * k[j], c.re * k[j]))
                        .collect(),
                );
            }
        }
        self.backward_real(&spectra)
    }

    /// Physical velocity `ū + mean`.
    fn velocity(&self, coeffs: &[Complex64], mean: &MeanVector) -> Vec<Vec<f64>> {
        let dim = self.dim();
        let len = self.len();
        let spectra: Vec<Vec<Complex64>> = (0..dim)
            .map(|i| {
                let mut c = coeffs[i * len..(i + 1) * len].to_vec();
                c[0] = Complex64::new(mean.0[i], 0.0);
                c
            })
            .collect();
        self.backward_real(&spectra)
    }

    /// Turns physical products `(w·∇)u` into the projected right side
    /// `P[-(w·∇)u + f̄(t)]`; also returns `‖∇q̄‖²` and `⟨f̄, ū⟩`.
    fn finish(&self, products: &[Vec<f64>], t: f64, coeffs: &[Complex64]) -> (Vec<Complex64>, f64, f64) {
        let dim = self.dim();
        let len = self.len();
        let spectra = self.forward_real(products);
        let force = self.forcing.eval(t);
        let fc = force.coeffs();
        let mut out = vec![ZERO; dim * len];
        let mut pressure = 0.0;
        let mut inner = 0.0;
        let mut v = [ZERO; 3];
        for idx in 1..len {
            let drop = self.dealias && self.alias[idx];
            for i in 0..dim {
                let adv = if drop { ZERO } else { -spectra[i][idx] };
                let f = fc[i * len + idx];
                inner += (f * coeffs[i * len + idx].conj()).re;
                v[i] = adv + f;
            }
            let k = self.k_odd[idx];
            let ksq: f64 = k[..dim].iter().map(|x| x * x).sum();
            if ksq > 0.0 {
                let mut kv = ZERO;
                for i in 0..dim {
                    kv += v[i] * k[i];
                }
                let s = kv / ksq;
                for i in 0..dim {
                    let grad = s * k[i];
                    pressure += grad.norm_sqr();
                    out[i * len + idx] = v[i] - grad;
                }
            } else {
                for i in 0..dim {
                    out[i * len + idx] = v[i];
                }
            }
        }
        let vol = self.grid.volume();
        (out, pressure * vol, inner * vol)
    }

    fn norms(&self, coeffs: &[Complex64]) -> [f64; 7] {
        let len = self.len();
        let dim = self.dim();
        let mut acc = [0.0; 6];
        let mut div = 0.0;
        for idx in 0..len {
            let mut m = 0.0;
            let mut kv = ZERO;
            for i in 0..dim {
                let c = coeffs[i * len + idx];
                m += c.norm_sqr();
                kv += c * self.k_odd[idx][i];
            }
            div += kv.norm_sqr();
            for (s, a) in acc.iter_mut().enumerate() {
                *a += self.weights[s][idx] * m;
            }
        }
        let vol = self.grid.volume();
        let mut out = [0.0; 7];
        for (o, a) in out.iter_mut().zip(acc) {
            *o = a * vol;
        }
        out[6] = sqrt(div * vol);
        out
    }

    fn cell(&self) -> f64 {
        self.grid.volume() / self.len() as f64
    }

    fn grad_l3(&self, grads: &[Vec<f64>]) -> f64 {
        let len = self.len();
        let mut s = 0.0;
        for q in 0..len {
            let m: f64 = grads.iter().map(|g| g[q] * g[q]).sum();
            s += m * sqrt(m);
        }
        powf(s * self.cell(), 1.0 / 3.0)
    }

    fn mean_step(&self, mean: &MeanVector, t0: f64, t1: f64) -> MeanVector {
        if t1 == t0 {
            return *mean;
        }
        let inc: MeanVector = gauss_legendre3(|s| Mv(self.forcing.mean_at(s)), t0, t1).0;
        mean.add(&inc)
    }

    /// Displacement `∫_{t0}^{t1} m(s) ds` of the mean starting from `mean` at `t0`.
    fn drift(&self, mean: &MeanVector, t0: f64, t1: f64) -> MeanVector {
        gauss_legendre3(|s| Mv(self.mean_step(mean, t0, s)), t0, t1).0
    }

    /// Integrating factor: `decay` times the phase `e^{-i k·s}` of a uniform
    /// translation by `shift`.
    fn factor(&self, decay: &[f64], shift: &MeanVector) -> Vec<Complex64> {
        let dim = self.dim();
        if shift.0[..dim].iter().all(|v| *v == 0.0) {
            return decay.iter().map(|&e| Complex64::new(e, 0.0)).collect();
        }
        let phases: Vec<Vec<Complex64>> = (0..dim)
            .map(|d| {
                self.axis_k
                    .iter()
                    .map(|k| {
                        let a = -k * shift.0[d];
                        Complex64::new(cos(a), sin(a))
                    })
                    .collect()
            })
            .collect();
        (0..self.len())
            .map(|idx| {
                let ax = self.grid.axes(idx);
                let mut z = Complex64::new(decay[idx], 0.0);
                for (d, p) in phases.iter().enumerate() {
                    z *= p[ax[d]];
                }
                z
            })
            .collect()
    }

    /// `-i (k·s) û`: uniform advection by `s`, which the explicit part omits.
    fn translation_term(&self, coeffs: &[Complex64], s: &MeanVector) -> Vec<Complex64> {
        let len = self.len();
        coeffs
            .iter()
            .enumerate()
            .map(|(q, c)| {
                let k = self.k_odd[q % len];
                let ks: f64 = (0..self.dim()).map(|d| k[d] * s.0[d]).sum();
                Complex64::new(c.im * ks, -c.re * ks)
            })
            .collect()
    }
}

/// Wrapper giving `MeanVector` the arithmetic the quadrature rule needs.
#[derive(Clone, Copy)]
struct Mv(MeanVector);

impl core::ops::Mul<f64> for Mv {
    type Output = Mv;
    fn mul(self, s: f64) -> Mv {
        Mv(self.0.scaled(s))
    }
}

impl core::ops::Add for Mv {
    type Output = Mv;
    fn add(self, o: Mv) -> Mv {
        Mv(self.0.add(&o.0))
    }
}

/// Diagnostics produced alongside one right-side evaluation.
#[derive(Debug, Clone, Copy, Default)]
struct EvalDiag {
    pressure_grad_sq: f64,
    forcing_inner: f64,
    grad_l3: f64,
    max_speed: f64,
}

fn max_speed(vel: &[Vec<f64>]) -> f64 {
    let len = vel[0].len();
    let mut best = 0.0f64;
    for q in 0..len {
        let m: f64 = vel.iter().map(|v| v[q] * v[q]).sum();
        best = best.max(m);
    }
    sqrt(best)
}

/// The systems the integrator knows how to advance.
enum System {
    Single(Block),
    /// Block 0 is the 2D base flow, block 1 the 3D perturbation.
    Pair(Block, Block),
}

impl System {
    fn blocks(&self) -> Vec<&Block> {
        match self {
            System::Single(b) => vec![b],
            System::Pair(a, b) => vec![a, b],
        }
    }

    /// Per-block displacement over `[t0, t1]` by the uniform advecting velocity:
    /// the flow's own mean, plus the base mean for the perturbation.
    fn shifts(&self, m: &[MeanVector], t0: f64, t1: f64) -> Vec<MeanVector> {
        match self {
            System::Single(b) => vec![b.drift(&m[0], t0, t1)],
            System::Pair(base, pert) => {
                let sb = base.drift(&m[0], t0, t1);
                vec![sb, sb.add(&pert.drift(&m[1], t0, t1))]
            }
        }
    }

    fn rhs(&self, t: f64, u: &[Vec<Complex64>], m: &[MeanVector]) -> (Vec<Vec<Complex64>>, Vec<EvalDiag>) {
        match self {
            System::Single(b) => {
                let grads = b.gradients(&u[0]);
                let vel = b.velocity(&u[0], &MeanVector::ZERO);
                let products = advect(b.dim(), &vel, &grads);
                let (n, p, fi) = b.finish(&products, t, &u[0]);
                let d = EvalDiag {
                    pressure_grad_sq: p,
                    forcing_inner: fi,
                    grad_l3: b.grad_l3(&grads),
                    max_speed: max_speed(&vel),
                };
                (vec![n], vec![d])
            }
            System::Pair(base, pert) => {
                let gb = base.gradients(&u[0]);
                let vb = base.velocity(&u[0], &MeanVector::ZERO);
                let pb = advect(2, &vb, &gb);
                let (nb, ppb, fib) = base.finish(&pb, t, &u[0]);
                let db = EvalDiag {
                    pressure_grad_sq: ppb,
                    forcing_inner: fib,
                    grad_l3: base.grad_l3(&gb),
                    max_speed: max_speed(&vb),
                };

                let gu = pert.gradients(&u[1]);
                let vu = pert.velocity(&u[1], &MeanVector::ZERO);
                let mu = m[1].0;
                let len2 = base.len();
                let len3 = pert.len();
                // Advecting fluctuation ū + v̄_s, base broadcast along x3.
                let mut total = vu.clone();
                for (i, ti) in total.iter_mut().enumerate().take(2) {
                    for (q, val) in ti.iter_mut().enumerate() {
                        *val += vb[i][q % len2];
                    }
                }
                let mut prod = advect(3, &total, &gu);
                // + (u·∇) v̄_s; the base gradient has no x3 derivative and no third component.
                for i in 0..2 {
                    for q in 0..len3 {
                        let q2 = q % len2;
                        prod[i][q] += (vu[0][q] + mu[0]) * gb[2 * i][q2] + (vu[1][q] + mu[1]) * gb[2 * i + 1][q2];
                    }
                }
                let (nu, ppu, fiu) = pert.finish(&prod, t, &u[1]);
                let du = EvalDiag {
                    pressure_grad_sq: ppu,
                    forcing_inner: fiu,
                    grad_l3: pert.grad_l3(&gu),
                    max_speed: max_speed(&total).max(db.max_speed),
                };
                (vec![nb, nu], vec![db, du])
            }
        }
    }
}

/// `(w·∇)u` in physical space; `grads` is `∂_j u_i` ordered `i`-major.
fn advect(dim: usize, w: &[Vec<f64>], grads: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let len = w[0].len();
    (0..dim)
        .map(|i| {
            let mut p = vec![0.0; len];
            for j in 0..dim {
                let g = &grads[i * dim + j];
                let wj = &w[j];
                for q in 0..len {
                    p[q] += wj[q] * g[q];
                }
            }
            p
        })
        .collect()
}

/// Advances a [`System`] with either scheme, keeping AB2 history.
struct Integrator {
    system: System,
    cfg: SolverConfig,
    prev_rhs: Option<Vec<Vec<Complex64>>>,
}

impl Integrator {
    fn check_cfl(&self, t: f64, speed: f64) -> Result<()> {
        let h = self.system.blocks()[0].grid.spacing();
        let cfl = self.cfg.dt * speed / h;
        if cfl > self.cfg.cfl_max {
            return Err(Error::CflViolation {
                t,
                cfl,
                advisory_dt: 0.9 * self.cfg.cfl_max * h / speed,
            });
        }
        Ok(())
    }

    /// One step from `(t, u, m)` given the right side already evaluated there.
    /// The AB2 history is kept already carried through its step's factor.
    fn advance(
        &mut self,
        t: f64,
        u: &[Vec<Complex64>],
        m: &[MeanVector],
        n0: Vec<Vec<Complex64>>,
    ) -> (Vec<Vec<Complex64>>, Vec<MeanVector>) {
        let dt = self.cfg.dt;
        let blocks = self.system.blocks();
        let m1: Vec<MeanVector> = blocks.iter().zip(m).map(|(b, mv)| b.mean_step(mv, t, t + dt)).collect();
        let full_shift = self.system.shifts(m, t, t + dt);
        let e: Vec<Vec<Complex64>> = blocks
            .iter()
            .zip(&full_shift)
            .map(|(b, s)| b.factor(&b.e_full, s))
            .collect();
        let use_ab2 = self.cfg.scheme == Scheme::ImexAb2 && self.prev_rhs.is_some();
        let next: Vec<Vec<Complex64>> = if use_ab2 {
            let prev = self.prev_rhs.as_ref().expect("checked");
            (0..blocks.len())
                .map(|bi| {
                    let len = blocks[bi].len();
                    u[bi]
                        .iter()
                        .enumerate()
                        .map(|(q, c)| e[bi][q % len] * (c + (n0[bi][q] * 1.5 - prev[bi][q] * 0.5) * dt))
                        .collect()
                })
                .collect()
        } else {
            let mh: Vec<MeanVector> = blocks
                .iter()
                .zip(m)
                .map(|(b, mv)| b.mean_step(mv, t, t + 0.5 * dt))
                .collect();
            let half_shift = self.system.shifts(m, t, t + 0.5 * dt);
            // Factors over the first and second half step.
            let ea: Vec<Vec<Complex64>> = blocks
                .iter()
                .zip(&half_shift)
                .map(|(b, s)| b.factor(&b.e_half, s))
                .collect();
            let eb: Vec<Vec<Complex64>> = blocks
                .iter()
                .zip(full_shift.iter().zip(&half_shift))
                .map(|(b, (f, h))| b.factor(&b.e_half, &f.add(&h.scaled(-1.0))))
                .collect();
            let u1: Vec<Vec<Complex64>> = (0..blocks.len())
                .map(|bi| {
                    let len = blocks[bi].len();
                    u[bi]
                        .iter()
                        .enumerate()
                        .map(|(q, c)| (c + n0[bi][q] * dt) * e[bi][q % len])
                        .collect()
                })
                .collect();
            let (n1, _) = self.system.rhs(t + dt, &u1, &m1);
            let u2: Vec<Vec<Complex64>> = (0..blocks.len())
                .map(|bi| {
                    let len = blocks[bi].len();
                    u[bi]
                        .iter()
                        .enumerate()
                        .map(|(q, c)| {
                            let a = ea[bi][q % len];
                            // E_b^{-1}(u1 + dt N1) written without dividing u1 by E_b.
                            c * (a * 0.75) + ((c + n0[bi][q] * dt) * a + n1[bi][q] * dt / eb[bi][q % len]) * 0.25
                        })
                        .collect()
                })
                .collect();
            let (n2, _) = self.system.rhs(t + 0.5 * dt, &u2, &mh);
            (0..blocks.len())
                .map(|bi| {
                    let len = blocks[bi].len();
                    u[bi]
                        .iter()
                        .enumerate()
                        .map(|(q, c)| c * e[bi][q % len] / 3.0 + (u2[bi][q] + n2[bi][q] * dt) * eb[bi][q % len] * (2.0 / 3.0))
                        .collect()
                })
                .collect()
        };
        let carried: Vec<Vec<Complex64>> = n0
            .iter()
            .zip(&e)
            .map(|(n, f)| n.iter().enumerate().map(|(q, a)| a * f[q % f.len()]).collect())
            .collect();
        self.prev_rhs = Some(carried);
        (next, m1)
    }
}

/// `|k|^{2·order}` with the odd-order factor taken from the derivative symbol.
fn frobenius_weight(grid: &PeriodicGrid, idx: usize, order: u32) -> f64 {
    let k = grid.wavevector(idx);
    let ko = grid.wavevector_odd(idx);
    let even: f64 = k.iter().map(|v| v * v).sum();
    let odd: f64 = ko.iter().map(|v| v * v).sum();
    let w = powi(even, (order / 2) as i32 * 2);
    if order % 2 == 1 {
        w * odd
    } else {
        w
    }
}

fn record_for(b: &Block, t: f64, u: &[Complex64], prev: Option<&[Complex64]>, dt: f64, d: EvalDiag, mean: MeanVector) -> StepRecord {
    let [l2, h1, h2, h3, hess, third, div] = b.norms(u);
    let increment_sq = match prev {
        Some(p) => {
            let s: f64 = u.iter().zip(p).map(|(a, c)| (a - c).norm_sqr()).sum();
            s * b.grid.volume() / (dt * dt)
        }
        None => 0.0,
    };
    StepRecord {
        t,
        l2_sq: l2,
        h1_sq: h1,
        h2_sq: h2,
        h3_sq: h3,
        grad_sq: h1 - l2,
        hess_sq: hess,
        third_sq: third,
        grad_l3: d.grad_l3,
        pressure_grad_sq: d.pressure_grad_sq,
        increment_sq,
        forcing_inner: d.forcing_inner,
        div_l2: div,
        mean,
        max_speed: d.max_speed,
    }
}

fn to_state(b: &Block, coeffs: &[Complex64], mean: MeanVector, t: f64, role: Role) -> FlowState {
    let mut u_bar = SpectralField::from_coeffs(&b.grid, b.dim(), coeffs.to_vec()).expect("block shape");
    u_bar.set_flags(true, true);
    FlowState { t, u_bar, mean, role }
}

fn is_finite(u: &[Vec<Complex64>]) -> bool {
    u.iter().all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
}

/// Shared time loop; returns one trajectory per block.
fn run(system: System, roles: &[Role], initial: Vec<(Vec<Complex64>, MeanVector)>, cfg: &SolverConfig, sampling: &Sampling) -> (Vec<Trajectory>, Option<Error>) {
    let mut trajs: Vec<Trajectory> = roles
        .iter()
        .map(|&r| Trajectory::empty(r, cfg.dt, sampling.window))
        .collect();
    let n_steps = match cfg.steps() {
        Ok(n) => n,
        Err(e) => return (trajs, Some(e)),
    };
    let keep = match sampling.indices(cfg, n_steps) {
        Ok(k) => k,
        Err(e) => return (trajs, Some(e)),
    };
    let mut integ = Integrator {
        system,
        cfg: cfg.clone(),
        prev_rhs: None,
    };
    let (mut u, mut m): (Vec<Vec<Complex64>>, Vec<MeanVector>) = initial.into_iter().unzip();
    let mut prev_u: Option<Vec<Vec<Complex64>>> = None;
    let mut keep_iter = keep.iter().peekable();
    for n in 0..=n_steps {
        let t = n as f64 * cfg.dt;
        let (n0, diags) = integ.system.rhs(t, &u, &m);
        {
            let blocks = integ.system.blocks();
            for (bi, b) in blocks.iter().enumerate() {
                let prev = prev_u.as_ref().map(|p| p[bi].as_slice());
                trajs[bi].records.push(record_for(b, t, &u[bi], prev, cfg.dt, diags[bi], m[bi]));
            }
            if keep_iter.peek() == Some(&&n) {
                keep_iter.next();
                for (bi, b) in blocks.iter().enumerate() {
                    trajs[bi].states.push(to_state(b, &u[bi], m[bi], t, roles[bi]));
                }
            }
        }
        if n == n_steps {
            break;
        }
        let speed = diags.iter().fold(0.0f64, |a, d| a.max(d.max_speed));
        if let Err(e) = integ.check_cfl(t, speed) {
            return (trajs, Some(e));
        }
        let (next, m1) = integ.advance(t, &u, &m, n0);
        if !is_finite(&next) {
            return (
                trajs,
                Some(Error::NonFinite {
                    t: t + cfg.dt,
                    what: "velocity coefficients",
                }),
            );
        }
        prev_u = Some(core::mem::replace(&mut u, next));
        m = m1;
    }
    (trajs, None)
}

fn check_state(state: &FlowState, role: Role, dim: usize) -> Result<()> {
    if state.grid().dim() != dim || state.u_bar.components() != dim {
        return Err(Error::GridMismatch);
    }
    if state.role != role {
        return Err(invalid("role", "initial state has the wrong role"));
    }
    if state.t != 0.0 {
        return Err(Error::TimeMismatch(format!("initial state at t = {}, expected 0", state.t)));
    }
    Ok(())
}

fn single(initial: &FlowState, forcing: &Forcing, cfg: &SolverConfig, sampling: &Sampling, role: Role, dim: usize) -> core::result::Result<Trajectory, Aborted<Trajectory>> {
    let fail = |e: Error| Aborted {
        error: e,
        partial: Box::new(Trajectory::empty(role, cfg.dt, sampling.window)),
    };
    cfg.validate().map_err(fail)?;
    check_state(initial, role, dim).map_err(fail)?;
    let block = Block::new(initial.grid(), forcing, cfg).map_err(fail)?;
    let (mut trajs, err) = run(
        System::Single(block),
        &[role],
        vec![(initial.u_bar.coeffs().to_vec(), initial.mean)],
        cfg,
        sampling,
    );
    let traj = trajs.remove(0);
    match err {
        None => Ok(traj),
        Some(error) => Err(Aborted {
            error,
            partial: Box::new(traj),
        }),
    }
}

/// Evolves a 2D flow, advected by its full velocity (mean included).
pub fn evolve_base_2d(initial: &FlowState, forcing: &Forcing, cfg: &SolverConfig, sampling: &Sampling) -> core::result::Result<Trajectory, Aborted<Trajectory>> {
    single(initial, forcing, cfg, sampling, Role::Base2d, 2)
}

/// Evolves a full 3D flow.
pub fn evolve_full_3d(initial: &FlowState, forcing: &Forcing, cfg: &SolverConfig, sampling: &Sampling) -> core::result::Result<Trajectory, Aborted<Trajectory>> {
    single(initial, forcing, cfg, sampling, Role::Full3d, 3)
}

/// Evolves a 2D base flow and a 3D perturbation together, step for step.
///
/// The perturbation obeys
/// `ū_t + P[(u·∇)ū + (v_s·∇)ū + (u·∇)v̄_s] - νΔū = P ḡ`,
/// where `v_s` is the lifted base flow including its mean.
pub fn evolve_pair(
    base0: &FlowState,
    base_forcing: &Forcing,
    u0: &FlowState,
    g: &Forcing,
    cfg: &SolverConfig,
    sampling: &Sampling,
) -> core::result::Result<PairTrajectory, Aborted<PairTrajectory>> {
    let empty = || PairTrajectory {
        base: Trajectory::empty(Role::Base2d, cfg.dt, sampling.window),
        perturbation: Trajectory::empty(Role::Perturbation, cfg.dt, sampling.window),
    };
    let fail = |e: Error| Aborted {
        error: e,
        partial: Box::new(empty()),
    };
    cfg.validate().map_err(fail)?;
    check_state(base0, Role::Base2d, 2).map_err(fail)?;
    check_state(u0, Role::Perturbation, 3).map_err(fail)?;
    if !base0.grid().compatible_3d(u0.grid()) {
        return Err(fail(Error::GridMismatch));
    }
    let bb = Block::new(base0.grid(), base_forcing, cfg).map_err(fail)?;
    let bp = Block::new(u0.grid(), g, cfg).map_err(fail)?;
    let (mut trajs, err) = run(
        System::Pair(bb, bp),
        &[Role::Base2d, Role::Perturbation],
        vec![
            (base0.u_bar.coeffs().to_vec(), base0.mean),
            (u0.u_bar.coeffs().to_vec(), u0.mean),
        ],
        cfg,
        sampling,
    );
    let perturbation = trajs.pop().expect("two blocks");
    let base = trajs.pop().expect("two blocks");
    let out = PairTrajectory { base, perturbation };
    match err {
        None => Ok(out),
        Some(error) => Err(Aborted {
            error,
            partial: Box::new(out),
        }),
    }
}

/// Reusable single-flow stepper; keeps the AB2 history between calls.
pub struct Stepper {
    integ: Integrator,
    role: Role,
}

impl Stepper {
    pub fn new(grid: &PeriodicGrid, forcing: &Forcing, cfg: &SolverConfig, role: Role) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            integ: Integrator {
                system: System::Single(Block::new(grid, forcing, cfg)?),
                cfg: cfg.clone(),
                prev_rhs: None,
            },
            role,
        })
    }

    pub fn step(&mut self, state: &FlowState) -> Result<FlowState> {
        if state.role != self.role {
            return Err(invalid("role", "state role differs from the stepper's"));
        }
        let u = vec![state.u_bar.coeffs().to_vec()];
        let m = vec![state.mean];
        let (n0, diags) = self.integ.system.rhs(state.t, &u, &m);
        self.integ.check_cfl(state.t, diags[0].max_speed)?;
        let (next, m1) = self.integ.advance(state.t, &u, &m, n0);
        if !is_finite(&next) {
            return Err(Error::NonFinite {
                t: state.t + self.integ.cfg.dt,
                what: "velocity coefficients",
            });
        }
        let b = &self.integ.system.blocks()[0];
        Ok(to_state(b, &next[0], m1[0], state.t + self.integ.cfg.dt, self.role))
    }
}

/// One step from `state` (for AB2 this is the self-starting RK3 step).
pub fn step(state: &FlowState, forcing: &Forcing, cfg: &SolverConfig) -> Result<FlowState> {
    Stepper::new(state.grid(), forcing, cfg, state.role)?.step(state)
}

/// `m + ∫_t^{t+dt} ⨍ f`, by three-point Gauss–Legendre (exact for quintic forcing means).
pub fn mean_ode_step<F: Fn(f64) -> MeanVector>(mean: &MeanVector, forcing_mean: F, t: f64, dt: f64) -> MeanVector {
    let inc = gauss_legendre3(|s| Mv(forcing_mean(s)), t, t + dt).0;
    mean.add(&inc)
}

fn no_force_cfg(grid: &PeriodicGrid) -> (Forcing, SolverConfig) {
    let f = Forcing::zero(grid, grid.dim());
    (f, SolverConfig::new(1.0, 1.0, 0.0))
}

/// `P[-(w·∇)ū]` (dealiased), where `w` is any velocity on the same grid.
pub fn nonlinear_term(state: &FlowState, advecting: &SpectralField) -> Result<SpectralField> {
    let grid = state.grid();
    if advecting.grid() != grid {
        return Err(Error::GridMismatch);
    }
    if advecting.components() != grid.dim() {
        return Err(Error::ComponentMismatch {
            expected: grid.dim(),
            found: advecting.components(),
        });
    }
    let (f, cfg) = no_force_cfg(grid);
    let b = Block::new(grid, &f, &cfg)?;
    let grads = b.gradients(state.u_bar.coeffs());
    let vel = b.velocity(advecting.coeffs(), &advecting.mean());
    let prod = advect(b.dim(), &vel, &grads);
    let (n, _, _) = b.finish(&prod, state.t, state.u_bar.coeffs());
    let mut out = SpectralField::from_coeffs(grid, grid.dim(), n)?;
    out.set_flags(true, true);
    Ok(out)
}

/// Full perturbation right side `P[-(u·∇)ū - (v_s·∇)ū - (u·∇)v̄_s]`.
pub fn perturbation_term(u: &FlowState, base: &FlowState) -> Result<SpectralField> {
    if u.grid().dim() != 3 || base.grid().dim() != 2 || !base.grid().compatible_3d(u.grid()) {
        return Err(Error::GridMismatch);
    }
    let (f2, cfg) = no_force_cfg(base.grid());
    let (f3, _) = no_force_cfg(u.grid());
    let sys = System::Pair(Block::new(base.grid(), &f2, &cfg)?, Block::new(u.grid(), &f3, &cfg)?);
    let (n, _) = sys.rhs(
        u.t,
        &[base.u_bar.coeffs().to_vec(), u.u_bar.coeffs().to_vec()],
        &[base.mean, u.mean],
    );
    let pert = &sys.blocks()[1];
    let drift = pert.translation_term(u.u_bar.coeffs(), &base.mean.add(&u.mean));
    let total: Vec<Complex64> = n[1].iter().zip(&drift).map(|(a, b)| a + b).collect();
    let mut out = SpectralField::from_coeffs(u.grid(), 3, total)?;
    out.set_flags(true, true);
    Ok(out)
}

/// Energy-identity residual of a trajectory:
/// `r(t) = d/dt ½‖ū‖² + ν‖∇ū‖² - ⟨f̄, ū⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyResidual {
    pub times: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_abs: f64,
}

/// Evaluates the energy residual at interior samples with fourth-order
/// differences: centered five-point stencils, one-sided ones next to the ends.
pub fn energy_balance_residual(traj: &Trajectory, nu: f64) -> Result<EnergyResidual> {
    let r = &traj.records;
    if r.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            found: r.len(),
        });
    }
    let h = traj.dt;
    let e: Vec<f64> = r.iter().map(|x| 0.5 * x.l2_sq).collect();
    let n = r.len();
    let mut times = Vec::with_capacity(n - 2);
    let mut residuals = Vec::with_capacity(n - 2);
    for i in 1..n - 1 {
        let de = if i >= 2 && i + 2 < n {
            (e[i - 2] - 8.0 * e[i - 1] + 8.0 * e[i + 1] - e[i + 2]) / (12.0 * h)
        } else if n < 5 {
            (e[i + 1] - e[i - 1]) / (2.0 * h)
        } else if i == 1 {
            (-3.0 * e[0] - 10.0 * e[1] + 18.0 * e[2] - 6.0 * e[3] + e[4]) / (12.0 * h)
        } else {
            (3.0 * e[n - 1] + 10.0 * e[n - 2] - 18.0 * e[n - 3] + 6.0 * e[n - 4] - e[n - 5]) / (12.0 * h)
        };
        times.push(r[i].t);
        residuals.push(de + nu * r[i].grad_sq - r[i].forcing_inner);
    }
    let max_abs = residuals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(EnergyResidual {
        times,
        residuals,
        max_abs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::{ForcingTerm, TimeProfile};
    use crate::math::{cos, sin, TAU};

    fn taylor_green(grid: &PeriodicGrid, amp: f64) -> SpectralField {
        SpectralField::from_fn(grid, 2, |x| {
            [amp * sin(x[0]) * cos(x[1]), -amp * cos(x[0]) * sin(x[1]), 0.0]
        })
    }

    #[test]
    fn zero_stays_zero() {
        let g = PeriodicGrid::new(TAU, 2, 8).unwrap();
        let s = FlowState::zero(&g, Role::Base2d);
        let f = Forcing::zero(&g, 2);
        let cfg = SolverConfig::new(1.0, 0.01, 0.1);
        let tr = evolve_base_2d(&s, &f, &cfg, &Sampling::default()).unwrap();
        assert_eq!(tr.records.len(), 11);
        assert!(tr.final_state().unwrap().u_bar.max_abs_coeff() == 0.0);
    }

    #[test]
    fn taylor_green_decays_exactly() {
        let g = PeriodicGrid::new(TAU, 2, 16).unwrap();
        let v0 = taylor_green(&g, 1.0);
        let s = FlowState::from_velocity(&v0, 0.0, Role::Base2d).unwrap();
        let f = Forcing::zero(&g, 2);
        for scheme in [Scheme::ImexAb2, Scheme::ImexRk3] {
            let mut cfg = SolverConfig::new(0.5, 0.01, 0.5);
            cfg.scheme = scheme;
            let tr = evolve_base_2d(&s, &f, &cfg, &Sampling::default()).unwrap();
            let exact = v0.scale(exp(-2.0 * 0.5 * 0.5));
            let err = tr.final_state().unwrap().velocity().max_abs_diff(&exact).unwrap();
            assert!(err < 1e-13, "{scheme:?}: {err}");
        }
    }

    #[test]
    fn rejects_non_solenoidal_and_misaligned_times() {
        let g = PeriodicGrid::new(TAU, 2, 8).unwrap();
        let grad = SpectralField::from_fn(&g, 1, |x| [sin(x[0]), 0.0, 0.0]).gradient().unwrap();
        assert!(FlowState::from_velocity(&grad, 0.0, Role::Base2d).is_err());
        let s = FlowState::zero(&g, Role::Base2d);
        let f = Forcing::zero(&g, 2);
        let cfg = SolverConfig::new(1.0, 0.1, 1.0);
        assert!(evolve_base_2d(&s, &f, &cfg, &Sampling::at(&[0.25])).is_err());
        assert!(evolve_base_2d(&s, &f, &cfg, &Sampling::windows(2.0)).is_err());
        let mut big = cfg.clone();
        big.dt = 3.0;
        big.t_end = 3.0;
        assert!(evolve_base_2d(&s, &f, &big, &Sampling::windows(2.0)).is_err());
    }

    #[test]
    fn cfl_violation_reports_advisory_dt() {
        let g = PeriodicGrid::new(TAU, 2, 16).unwrap();
        let v0 = taylor_green(&g, 50.0);
        let s = FlowState::from_velocity(&v0, 0.0, Role::Base2d).unwrap();
        let f = Forcing::zero(&g, 2);
        let cfg = SolverConfig::new(0.01, 0.1, 1.0);
        let err = evolve_base_2d(&s, &f, &cfg, &Sampling::default()).unwrap_err();
        match err.error {
            Error::CflViolation { advisory_dt, .. } => assert!(advisory_dt < 0.1),
            e => panic!("unexpected {e:?}"),
        }
        assert_eq!(err.partial.records.len(), 1);
    }

    #[test]
    fn constant_mean_force_moves_mean_linearly() {
        let g = PeriodicGrid::new(TAU, 2, 8).unwrap();
        let a = SpectralField::from_fn(&g, 2, |_| [0.3, -0.2, 0.0]);
        let f = Forcing::new(
            &g,
            2,
            vec![ForcingTerm {
                shape: a,
                profile: TimeProfile::Constant,
            }],
        )
        .unwrap();
        let s = FlowState::zero(&g, Role::Base2d);
        let cfg = SolverConfig::new(1.0, 0.05, 2.0);
        let tr = evolve_base_2d(&s, &f, &cfg, &Sampling::default()).unwrap();
        let m = tr.final_state().unwrap().mean;
        assert!((m.0[0] - 0.6).abs() < 1e-14 && (m.0[1] + 0.4).abs() < 1e-14);
        assert!(tr.final_state().unwrap().u_bar.max_abs_coeff() == 0.0);
    }

    #[test]
    fn drifting_mean_translates_exactly() {
        // Taylor–Green under a constant mean force: the decaying pattern is carried
        // along by m(t) = m0 + a t, i.e. shifted by s(t) = m0 t + a t²/2.
        let g = PeriodicGrid::new(TAU, 2, 16).unwrap();
        let (m0, acc, nu, t_end) = ([0.7, -0.4], [2.0, 1.0], 0.5, 1.0);
        let a = SpectralField::from_fn(&g, 2, |_| [acc[0], acc[1], 0.0]);
        let f = Forcing::new(&g, 2, vec![ForcingTerm { shape: a, profile: TimeProfile::Constant }]).unwrap();
        let v0 = taylor_green(&g, 1.0).with_mean(&MeanVector([m0[0], m0[1], 0.0]));
        let s = FlowState::from_velocity(&v0, 0.0, Role::Base2d).unwrap();
        let sx = m0[0] * t_end + 0.5 * acc[0] * t_end * t_end;
        let sy = m0[1] * t_end + 0.5 * acc[1] * t_end * t_end;
        let decay = exp(-2.0 * nu * t_end);
        let exact = SpectralField::from_fn(&g, 2, |x| {
            let (x0, x1) = (x[0] - sx, x[1] - sy);
            [decay * sin(x0) * cos(x1), -decay * cos(x0) * sin(x1), 0.0]
        });
        for scheme in [Scheme::ImexAb2, Scheme::ImexRk3] {
            let mut cfg = SolverConfig::new(nu, 0.02, t_end);
            cfg.scheme = scheme;
            let tr = evolve_base_2d(&s, &f, &cfg, &Sampling::default()).unwrap();
            let fin = tr.final_state().unwrap();
            assert!((fin.mean.0[0] - (m0[0] + acc[0])).abs() < 1e-13);
            let err = fin.u_bar.max_abs_diff(&exact).unwrap();
            assert!(err < 1e-12, "{scheme:?}: {err}");
            assert!(tr.records.iter().all(|r| r.max_speed <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn mean_ode_step_integrates_sine() {
        let mut m = MeanVector::ZERO;
        let dt = 1e-3;
        for i in 0..1000 {
            m = mean_ode_step(&m, |t| MeanVector([sin(t), 0.0, 0.0]), i as f64 * dt, dt);
        }
        assert!((m.0[0] - (1.0 - cos(1.0))).abs() < 1e-12);
    }
}
