use ns_stability_core::certificate::{abar_chain, poincare_constants, BaseData, Constants, InterpolationConstants};
use ns_stability_core::experiments::*;
use ns_stability_core::forcing::{ForcingTerm, SpatialNorm, TimeProfile};
use ns_stability_core::integrator::{evolve_pair, FlowState, Role, Sampling, SolverConfig};
use ns_stability_core::{forcing::Forcing, PeriodicGrid, SpectralField};
use std::f64::consts::TAU;

fn analytic_constants(nu: f64, n: usize) -> Constants {
    let grid3 = PeriodicGrid::new(TAU, 3, n).unwrap();
    let poincare = poincare_constants(nu, TAU).unwrap();
    let rates = InterpolationConstants::analytic_conservative(&grid3, nu, &poincare).unwrap();
    Constants { nu, poincare, rates }
}

fn quiet_scenario() -> Scenario {
    let mut s = Scenario::reference();
    s.n = 16;
    s.window = 0.5;
    s.windows = 2;
    s.dt = Some(1e-3);
    s.base_forcing = ForcingSpec::Zero;
    s.base_initial.amplitude = 0.0;
    s.perturbation.fill = 0.0;
    s
}

#[test]
fn zero_data_gives_zero_windows_and_trivial_barrier() {
    let s = quiet_scenario();
    let setup = prepare_with_constants(&s, analytic_constants(s.nu, s.n)).unwrap();
    let o = run_prepared(&s, setup).unwrap();
    assert_eq!(o.windows.len(), 2);
    for w in &o.windows {
        assert!(w.is_finite_nonnegative());
        assert_eq!(w.base_h1_sup_sq, 0.0);
        assert_eq!(w.pert_h1_sup_sq, 0.0);
        assert_eq!(w.pert_dt_integral, 0.0);
    }
    assert!(o.uniformity.holds);
    assert!(o.barrier.never_exceeded);
    assert!(o.barrier.x2.iter().all(|x| *x == 0.0));
    assert_eq!(o.barrier.diagnostics.decay_violations, 0);
}

#[test]
fn shear_decay_matches_closed_form_window_data() {
    let nu = 1.0;
    let amp = 0.3;
    let window = 0.5;
    let grid2 = PeriodicGrid::new(TAU, 2, 16).unwrap();
    let grid3 = PeriodicGrid::new(TAU, 3, 16).unwrap();
    let v0 = FieldShape::Shear { mode: 1 }.field(&grid2, amp).unwrap();
    let base0 = FlowState::from_velocity(&v0, 0.0, Role::Base2d).unwrap();
    let u0 = FlowState::zero(&grid3, Role::Perturbation);
    let cfg = SolverConfig::new(nu, 1e-3, 2.0 * window);
    let pair = evolve_pair(
        &base0,
        &Forcing::zero(&grid2, 2),
        &u0,
        &Forcing::zero(&grid3, 3),
        &cfg,
        &Sampling::windows(window),
    )
    .unwrap();
    let (stats, uni) = window_statistics(&pair, window).unwrap();
    assert_eq!(stats.len(), 2);
    let ratio = stats[1].base_h1_sup_sq / stats[0].base_h1_sup_sq;
    assert!((ratio / (-2.0 * nu * window).exp() - 1.0).abs() < 1e-9, "ratio {ratio}");
    assert!(uni.holds);

    // ‖v‖² = amp² L³/2 e^{-2νt}, so ∫‖v_t‖² = ν² amp² L³/2 (1 - e^{-2νT}) / (2ν)
    let l3 = TAU.powi(3);
    let exact = nu * nu * amp * amp * l3 / 2.0 * (1.0 - (-2.0 * nu * window).exp()) / (2.0 * nu);
    let h21 = h21_window_norm(&pair.base, window).unwrap();
    assert!((h21[0].dt_integral / exact - 1.0).abs() < 1e-6, "{} vs {exact}", h21[0].dt_integral);
    assert!((stats[0].base_dt_integral - h21[0].dt_integral).abs() < 1e-15 * exact);
    // a single shear mode carries no pressure
    assert!(h21[0].pressure_integral < 1e-20);
}

#[test]
fn sparse_records_are_rejected() {
    let s = quiet_scenario();
    let setup = prepare_with_constants(&s, analytic_constants(s.nu, s.n)).unwrap();
    let o = run_prepared(&s, setup).unwrap();
    let mut traj = o.trajectory.perturbation.clone();
    traj.records = traj.records.iter().step_by(2).cloned().collect();
    assert!(h21_window_norm(&traj, s.window).is_err());
}

#[test]
fn incomplete_window_is_excluded() {
    let mut s = quiet_scenario();
    s.base_initial.amplitude = 0.1;
    let setup = prepare_with_constants(&s, analytic_constants(s.nu, s.n)).unwrap();
    let grid2 = setup.grid2.clone();
    let cfg = SolverConfig::new(s.nu, 1e-3, 1.25);
    let pair = evolve_pair(
        &setup.base0,
        &Forcing::zero(&grid2, 2),
        &setup.u0,
        &setup.perturbation_forcing,
        &cfg,
        &Sampling::default(),
    )
    .unwrap();
    let (stats, uni) = window_statistics(&pair, s.window).unwrap();
    assert_eq!(stats.len(), 2);
    assert_eq!(uni.excluded_windows, 1);
    assert!(uni.notice.is_some());
}

#[test]
fn constant_force_has_no_fluctuating_part() {
    let grid2 = PeriodicGrid::new(TAU, 2, 16).unwrap();
    let spec = ForcingSpec::Decaying {
        mean: [1.0, 0.0],
        shape: FieldShape::Cellular { mode: 1 },
        amplitude: 0.0,
        decay: 1.0,
    };
    let f = forcing_families(&spec, &grid2, 3.0).unwrap();
    let grid3 = PeriodicGrid::new(TAU, 3, 16).unwrap();
    let f3 = f.lift_2d_to_3d(&grid3).unwrap();
    let k = analytic_constants(1.0, 16);
    for window in [3.0, 7.5, 40.0] {
        let data = BaseData {
            forcing_l2: f3.window_sup(window, 16, SpatialNorm::L2),
            ..BaseData::zero()
        };
        assert_eq!(data.forcing_l2.value, 0.0);
        assert_eq!(abar_chain(&data, window, &k).unwrap().abar1_sq, 0.0);
    }
}

#[test]
fn decaying_unit_mode_integrates_to_half_over_rate() {
    let grid3 = PeriodicGrid::new(TAU, 3, 16).unwrap();
    let lam = 0.7;
    let shape = SpectralField::from_fn(&grid3, 3, |x| [x[1].sin(), 0.0, 0.0]);
    let unit = shape.scale(1.0 / shape.sobolev_sq(1).unwrap().sqrt());
    let f = Forcing::new(
        &grid3,
        3,
        vec![ForcingTerm {
            shape: unit,
            profile: TimeProfile::Exponential { rate: lam },
        }],
    )
    .unwrap();
    let total = f.total_bar_norm_sq(SpatialNorm::H1);
    assert!((total - 1.0 / (2.0 * lam)).abs() < 1e-12);
}

#[test]
fn periodic_family_repeats_window_integrals() {
    let grid2 = PeriodicGrid::new(TAU, 2, 16).unwrap();
    let window = 2.5;
    let spec = ForcingSpec::Periodic {
        mean: [1.0, 0.0],
        shape: FieldShape::Cellular { mode: 1 },
        amplitude: 0.2,
        decay: 1.0,
    };
    let f = forcing_families(&spec, &grid2, window).unwrap();
    let w0 = f.bar_norm_sq_integral(0.0, window, SpatialNorm::H1);
    let w7 = f.bar_norm_sq_integral(7.0 * window, 8.0 * window, SpatialNorm::H1);
    assert!(w0 > 0.0);
    assert_eq!(w0, w7);
}

#[test]
fn nonpositive_decay_is_rejected() {
    let grid2 = PeriodicGrid::new(TAU, 2, 16).unwrap();
    for decay in [0.0, -1.0, f64::NAN] {
        let spec = ForcingSpec::Decaying {
            mean: [0.0, 0.0],
            shape: FieldShape::Shear { mode: 1 },
            amplitude: 1.0,
            decay,
        };
        assert!(forcing_families(&spec, &grid2, 1.0).is_err());
    }
}

#[test]
fn initial_perturbation_hits_the_target() {
    let grid3 = PeriodicGrid::new(TAU, 3, 16).unwrap();
    for (seed, mean) in [(1, [0.0; 3]), (2, [1e-4, -2e-4, 0.0])] {
        let spec = PerturbationSpec {
            gamma: 1e-3,
            k0: 2.0,
            seed,
            mean,
            fill: GAMMA_FILL,
        };
        let u = initial_perturbation(&grid3, &spec).unwrap();
        let h1 = u.subtract_mean().sobolev_sq(1).unwrap() + u.mean().norm_sq() * grid3.volume();
        assert!((h1 / (spec.gamma * GAMMA_FILL) - 1.0).abs() < 1e-12);
        assert!(h1 <= spec.gamma);
        assert!(u.is_solenoidal());
        let again = initial_perturbation(&grid3, &spec).unwrap();
        assert_eq!(u, again);
    }
}

#[test]
fn gamma_above_threshold_is_flagged_not_rejected() {
    let mut s = quiet_scenario();
    s.perturbation.gamma = 10.0;
    s.perturbation.fill = 0.5;
    let setup = prepare_with_constants(&s, analytic_constants(s.nu, s.n)).unwrap();
    assert_eq!(
        setup.certificate.b.gamma_hypothesis,
        ns_stability_core::certificate::GammaHypothesis::Violated
    );
    assert!(!setup.certificate.perturbation_hypotheses());
}

#[test]
fn richardson_cancels_leading_error() {
    let exact = 2.0;
    let f = |h: f64| exact + 0.3 * h * h + 0.01 * h.powi(4);
    let r = richardson(f(0.1), f(0.05), 2);
    assert!((r - exact).abs() < 1e-6);
    assert!((f(0.05) - exact).abs() > 1e-4);
}

#[test]
fn snapped_step_divides_the_window() {
    for (dt, window) in [(0.01, 6.5), (0.0123, 1.0), (0.3, 0.25), (1e-3, 2.0)] {
        let s = snap_to_window(dt, window);
        assert!(s <= dt.min(window) * (1.0 + 1e-12));
        let n = window / s;
        assert!((n - n.round()).abs() < 1e-9);
    }
}

#[test]
fn invalid_scenarios_are_rejected() {
    let base = quiet_scenario();
    let cases: Vec<Box<dyn Fn(&mut Scenario)>> = vec![
        Box::new(|s| s.window = 0.0),
        Box::new(|s| s.nu = -1.0),
        Box::new(|s| s.windows = 0),
        Box::new(|s| s.n = 7),
        Box::new(|s| s.epsilon = 1.0),
        Box::new(|s| s.perturbation.fill = 1.0),
        Box::new(|s| s.perturbation.gamma = f64::NAN),
    ];
    for mutate in cases {
        let mut s = base.clone();
        mutate(&mut s);
        assert!(s.validate().is_err());
        assert!(matches!(run_stability_experiment(&s), Err(RunError::Invalid(_))));
    }
}

#[test]
fn bound_check_names_are_complete() {
    let mut s = quiet_scenario();
    s.base_initial.amplitude = 0.05;
    s.perturbation.fill = GAMMA_FILL;
    let setup = prepare_with_constants(&s, analytic_constants(s.nu, s.n)).unwrap();
    let o = run_prepared(&s, setup).unwrap();
    let names: Vec<&str> = o.bounds.iter().map(|b| b.name).collect();
    for n in [
        "base_l2_window_start",
        "base_l2_energy",
        "base_grad_window_start",
        "base_grad_energy",
        "base_h1_energy",
        "base_hessian",
        "base_hessian_energy",
        "perturbation_l2_window_start",
        "perturbation_l2_energy",
        "perturbation_l2_energy_restart",
        "perturbation_h1_gamma",
        "perturbation_h21",
    ] {
        assert!(names.contains(&n), "missing {n}");
    }
    // sup entries dominate the window endpoint values
    let p = &o.trajectory.perturbation.records;
    let per = (s.window / 1e-3).round() as usize;
    for w in &o.windows {
        assert!(w.pert_h1_sup_sq >= p[w.k * per].h1_sq);
        assert!(w.pert_h1_sup_sq >= p[(w.k + 1) * per].h1_sq);
    }
    assert!(o.barrier.nesting_holds);
}
