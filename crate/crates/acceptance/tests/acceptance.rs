//! Acceptance suite: one PASS/FAIL line per criterion.

use std::f64::consts::TAU;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ns_stability_core::certificate::*;
use ns_stability_core::experiments::*;
use ns_stability_core::forcing::{Forcing, ForcingTerm, TimeProfile};
use ns_stability_core::integrator::*;
use ns_stability_core::random::{random_field, FieldRng, Spectrum};
use ns_stability_core::{MeanVector, PeriodicGrid, SpectralField};

fn report(n: u32, pass: bool, detail: String) {
    println!("criterion {n} {}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {detail}");
}

fn reference_constants() -> &'static Constants {
    static K: OnceLock<Constants> = OnceLock::new();
    K.get_or_init(|| scenario_constants(&Scenario::reference()).expect("calibration"))
}

fn run_with_gamma(gamma: f64) -> (StabilityOutcome, Duration) {
    let start = Instant::now();
    let mut s = Scenario::reference();
    s.perturbation.gamma = gamma;
    let setup = prepare_with_constants(&s, *reference_constants()).expect("setup");
    let o = run_prepared(&s, setup).expect("run");
    (o, start.elapsed())
}

/// The stability scenario shared by criteria 6, 7, 8 and 9.
fn reference() -> &'static (StabilityOutcome, Duration) {
    static R: OnceLock<(StabilityOutcome, Duration)> = OnceLock::new();
    R.get_or_init(|| {
        let start = Instant::now();
        let (o, _) = run_with_gamma(Scenario::reference().perturbation.gamma);
        (o, start.elapsed())
    })
}

fn taylor_green(grid: &PeriodicGrid) -> SpectralField {
    SpectralField::from_fn(grid, 2, |x| [x[0].sin() * x[1].cos(), -x[0].cos() * x[1].sin(), 0.0])
}

fn taylor_green_error(n: usize) -> f64 {
    let nu = 1.0;
    let g = PeriodicGrid::new(TAU, 2, n).unwrap();
    let v0 = taylor_green(&g);
    let s = FlowState::from_velocity(&v0, 0.0, Role::Base2d).unwrap();
    let cfg = SolverConfig::new(nu, 1e-3, 1.0);
    let tr = evolve_base_2d(&s, &Forcing::zero(&g, 2), &cfg, &Sampling::default()).unwrap();
    let exact = v0.scale((-2.0 * nu * 1.0f64).exp());
    let diff = tr.final_state().unwrap().velocity().sub(&exact).unwrap();
    diff.sobolev_norm(0).unwrap() / exact.sobolev_norm(0).unwrap()
}

#[test]
fn criterion_1_taylor_green() {
    let start = Instant::now();
    let e32 = taylor_green_error(32);
    let e16 = taylor_green_error(16);
    let elapsed = start.elapsed();
    let ratio = e16 / e32;
    let pass = e32 < 1e-6 && ratio > 1e2 && elapsed < Duration::from_secs(30);
    report(
        1,
        pass,
        format!("rel L2 error N=32 {e32:.3e}, N=16 {e16:.3e}, ratio {ratio:.3} (need > 100), {elapsed:.2?}"),
    );
}

fn forced_single_mode_residual(seed: u64) -> f64 {
    let mut rng = FieldRng::new(seed);
    let g = PeriodicGrid::new(TAU, 2, 8).unwrap();
    let mode = 1 + (rng.uniform() * 2.0) as u32;
    let amp = 0.1 + rng.uniform();
    let famp = 0.1 + rng.uniform();
    let shape = if rng.uniform() < 0.5 {
        FieldShape::Cellular { mode }
    } else {
        FieldShape::Shear { mode }
    };
    let v0 = shape.field(&g, amp).unwrap();
    let f = Forcing::new(
        &g,
        2,
        vec![ForcingTerm {
            shape: shape.field(&g, famp).unwrap(),
            profile: TimeProfile::Sinusoid {
                omega: 1.0 + rng.uniform(),
                phase: rng.uniform(),
            },
        }],
    )
    .unwrap();
    let s = FlowState::from_velocity(&v0, 0.0, Role::Base2d).unwrap();
    let mut cfg = SolverConfig::new(1.0, 1e-3, 0.2);
    cfg.scheme = Scheme::ImexRk3;
    let tr = evolve_base_2d(&s, &f, &cfg, &Sampling::default()).unwrap();
    energy_balance_residual(&tr, 1.0).unwrap().max_abs
}

#[test]
fn criterion_2_structural_invariants() {
    let start = Instant::now();
    let g = PeriodicGrid::new(TAU, 3, 8).unwrap();
    let seeds = 100u64;
    let (mut idem, mut herm, mut div, mut split, mut energy) = (0.0f64, 0.0f64, 0.0f64, true, 0.0f64);
    for seed in 0..seeds {
        let f = random_field(&g, 3, Spectrum::Flat { max_mode: 3 }, &mut FieldRng::new(seed));
        let p = f.leray_project().unwrap();
        let pp = p.leray_project().unwrap();
        idem = idem.max(p.max_abs_diff(&pp).unwrap() / p.max_abs_coeff());
        herm = herm.max(p.hermitian_defect() / p.max_abs_coeff());
        div = div.max(p.divergence().unwrap().sobolev_norm(0).unwrap());
        let m = MeanVector([seed as f64 * 0.01, -0.5, 0.25]);
        let full = p.subtract_mean().with_mean(&m);
        split &= full.mean() == m && full.subtract_mean() == p.subtract_mean();
        energy = energy.max(forced_single_mode_residual(seed));
    }
    let elapsed = start.elapsed();
    let pass = idem <= 1e-14
        && herm <= 1e-15
        && div < 1e-11
        && split
        && energy < 1e-6
        && elapsed < Duration::from_secs(120);
    report(
        2,
        pass,
        format!(
            "{seeds} seeds: projector {idem:.1e}, hermitian {herm:.1e}, div {div:.1e}, split exact {split}, energy residual (RK3, dt 1e-3) {energy:.2e}, {elapsed:.2?}"
        ),
    );
}

#[test]
fn criterion_3_poincare() {
    let nu = 1.3;
    let length = 5.0;
    let p = poincare_constants(nu, length).unwrap();
    let kappa = (TAU / length).powi(2);
    let formula = (p.c_s1 - nu * kappa / (1.0 + kappa)).abs();
    let g = PeriodicGrid::new(length, 3, 8).unwrap();
    let k = TAU / length;
    let mut sharp = 0.0f64;
    for axis in 0..3 {
        let w = SpectralField::from_fn(&g, 3, |x| {
            let mut v = [0.0; 3];
            v[(axis + 1) % 3] = (k * x[axis]).sin();
            v
        });
        sharp = sharp.max((p.c_s1 * w.sobolev_sq(1).unwrap() / (nu * w.grad_seminorm_sq(1)) - 1.0).abs());
    }
    let mut worst = 0.0f64;
    for seed in 0..1000 {
        let w = random_field(&g, 3, Spectrum::Flat { max_mode: 3 }, &mut FieldRng::new(seed)).subtract_mean();
        worst = worst.max(p.c_s1 * w.sobolev_sq(1).unwrap() / (nu * w.grad_seminorm_sq(1)));
    }
    let pass = formula < 1e-15 && sharp < 1e-10 && worst <= 1.0;
    report(
        3,
        pass,
        format!("lowest-mode defect {sharp:.1e}, worst ratio over 1000 fields {worst:.6} (must be <= 1)"),
    );
}

#[test]
fn criterion_4_mean_evolution() {
    let g = PeriodicGrid::new(TAU, 2, 8).unwrap();
    let m0 = [0.2, -0.1];
    let v0 = FieldShape::Cellular { mode: 1 }
        .field(&g, 0.5)
        .unwrap()
        .with_mean(&MeanVector([m0[0], m0[1], 0.0]));
    let s = FlowState::from_velocity(&v0, 0.0, Role::Base2d).unwrap();
    let a = [0.3, -0.2];
    let (omega, phase) = (2.0f64, 0.3f64);
    let constant = |t: f64| [m0[0] + a[0] * t, m0[1] + a[1] * t];
    let oscillating =
        |t: f64| [m0[0] + a[0] * (phase.cos() - (omega * t + phase).cos()) / omega, m0[1] + a[1] * (phase.cos() - (omega * t + phase).cos()) / omega];
    let mut worst = [0.0f64; 2];
    for (j, profile) in [TimeProfile::Constant, TimeProfile::Sinusoid { omega, phase }].into_iter().enumerate() {
        let shape = SpectralField::zeros(&g, 2).with_mean(&MeanVector([a[0], a[1], 0.0]));
        let f = Forcing::new(&g, 2, vec![ForcingTerm { shape, profile }]).unwrap();
        let cfg = SolverConfig::new(1.0, 0.01, 10.0);
        let tr = evolve_base_2d(&s, &f, &cfg, &Sampling::default()).unwrap();
        for r in &tr.records {
            let exact = if j == 0 { constant(r.t) } else { oscillating(r.t) };
            let e = (r.mean.0[0] - exact[0]).abs().max((r.mean.0[1] - exact[1]).abs());
            worst[j] = worst[j].max(e);
        }
    }
    let pass = worst[0] < 1e-8 && worst[1] < 1e-8;
    report(
        4,
        pass,
        format!("max mean error on [0, 10]: constant {:.1e}, oscillatory {:.1e}", worst[0], worst[1]),
    );
}

fn analytic_constants(n: usize) -> Constants {
    let grid3 = PeriodicGrid::new(TAU, 3, n).unwrap();
    let poincare = poincare_constants(1.0, TAU).unwrap();
    let rates = InterpolationConstants::analytic_conservative(&grid3, 1.0, &poincare).unwrap();
    Constants { nu: 1.0, poincare, rates }
}

#[test]
fn criterion_5_certificate_arithmetic() {
    let k = analytic_constants(16);
    let t = 5.0;

    let a0 = a_chain(&BaseData::zero(), t, &k).unwrap();
    let ab0 = abar_chain(&BaseData::zero(), t, &k).unwrap();
    let b0 = b_chain(&PerturbationData::zero(1e-4), &a0, &k).unwrap();
    let collapse = a0.a_sq.iter().all(|v| *v == 0.0)
        && ab0.abar1_sq == 0.0
        && ab0.abar2_sq == 0.0
        && ab0.abar3_sq == 1.0
        && [b0.b1_sq, b0.b2_sq, b0.b3_sq, b0.b4_sq, b0.b5_sq, b0.b6_mean].iter().all(|v| *v == 0.0);

    let mut s = Scenario::reference();
    s.n = 16;
    s.window = 6.0;
    let setup = prepare_with_constants(&s, k).unwrap();
    let a = &setup.certificate.a;
    let identities =
        a.get(3) == a.get(1) + a.get(2) && a.get(6) == a.get(4) + a.get(5) && a.get(8) == a.get(3) + a.get(7);

    let mut geometric = 0.0f64;
    let mut rng = FieldRng::new(5);
    for _ in 0..200 {
        let (ga, r, x0) = (rng.uniform() * 3.0, rng.uniform() * 0.95, rng.uniform() * 3.0);
        for kk in 0..=50 {
            let d = geometric_recursion(ga, r, x0, kk);
            geometric = geometric.max((d - geometric_iterate(ga, r, x0, kk)).abs() / d.max(1.0));
        }
    }

    let mut membership = true;
    let mut thresholds = Vec::new();
    for periodic in [false, true] {
        let family = |window: f64| {
            let mut sc = s.clone();
            sc.window = window;
            sc.base_forcing = if periodic {
                ForcingSpec::Periodic {
                    mean: [1.0, 0.0],
                    shape: FieldShape::Cellular { mode: 1 },
                    amplitude: 0.0137,
                    decay: 1.0,
                }
            } else {
                ForcingSpec::Decaying {
                    mean: [1.0, 0.0],
                    shape: FieldShape::Cellular { mode: 1 },
                    amplitude: 0.0137,
                    decay: 1.0,
                }
            };
            prepare_with_constants(&sc, k).unwrap().certificate
        };
        let c = family(k.t_star());
        let floor = k.t_star().max(c.threshold.sufficient);
        thresholds.push(floor);
        for step in [1e-6, 0.1, 1.0, 3.7, 12.0] {
            let cert = family(floor + step);
            membership &= cert.abar.membership && cert.abar.abar3_sq <= c.threshold.sufficient;
        }
    }
    let pass = collapse && identities && geometric <= 1e-12 && membership;
    report(
        5,
        pass,
        format!(
            "zero collapse {collapse}, chain identities {identities}, geometric defect {geometric:.1e}, membership above max(T*, A0) = {:.4} / {:.4}: {membership}",
            thresholds[0], thresholds[1]
        ),
    );
}

#[test]
fn criterion_6_stability_reproduction() {
    let (o, elapsed) = reference();
    let c = &o.setup.certificate;
    let d = &o.barrier.diagnostics;
    let pass = c.perturbation_hypotheses()
        && o.smallness.passes
        && o.barrier.never_exceeded
        && d.decay_violations == 0
        && *elapsed < Duration::from_secs(600);
    report(
        6,
        pass,
        format!(
            "T = {}, gamma = {:.0e}, {} windows, hypotheses {}, smallness {} (max G2 {:.3e} vs {:.3e}), never_exceeded {}, max X2 {:.6e}, decay-form violations {} of {} (slack {:.2e}), {elapsed:.1?}",
            c.a.window,
            c.perturbation_data.gamma,
            o.windows.len(),
            c.perturbation_hypotheses(),
            o.smallness.passes,
            o.smallness.max_budget_sq,
            o.smallness.threshold,
            o.barrier.never_exceeded,
            o.barrier.x2.iter().copied().fold(0.0, f64::max),
            d.decay_violations,
            d.checked,
            d.tol_slack,
        ),
    );
}

#[test]
fn criterion_7_bound_checks() {
    let (o, _) = reference();
    let wanted = ["base_l2_window_start", "perturbation_l2_energy", "perturbation_h1_gamma"];
    let mut pass = o.windows.len() == 5;
    let mut detail = format!("windows k = 0..{}", o.windows.len().saturating_sub(1));
    for name in wanted {
        let b = o.bounds.iter().find(|b| b.name == name).expect("check present");
        pass &= b.holds && b.applicable;
        let op = if b.strict { "<" } else { "<=" };
        detail.push_str(&format!(", {name} {:.10e} {op} {:.10e}", b.measured, b.bound));
    }
    report(7, pass, detail);
}

#[test]
fn criterion_8_gamma_scaling() {
    let (high, _) = run_with_gamma(4e-4);
    let (low, _) = reference();
    let top = |o: &StabilityOutcome| o.perturbation_h21.iter().map(|w| w.h21_sq).fold(0.0, f64::max);
    let ratio = top(&high) / top(low);
    let pass = (2.8..=5.2).contains(&ratio);
    report(
        8,
        pass,
        format!("windowed H21 norm squared {:.4e} (4e-4) / {:.4e} (1e-4) = {ratio:.4}", top(&high), top(low)),
    );
}

#[test]
fn criterion_9_window_uniformity() {
    let (o, _) = reference();
    let u = &o.uniformity;
    let pass = o.windows.len() == 5 && u.holds;
    let ratios: Vec<String> = u.entries.iter().map(|e| format!("{} {:.3e}", e.quantity, e.max_ratio)).collect();
    report(9, pass, format!("{} windows, max consecutive sup ratio: {}", o.windows.len(), ratios.join(", ")));
}
