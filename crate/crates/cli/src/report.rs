//! JSON forms of certificates and experiment outcomes.

use ns_stability_core::certificate::{
    AbarChain, AChain, BChain, BaseData, BaseFlags, Constants, PerturbationData, PerturbationFlags,
};
use ns_stability_core::experiments::{Certificate, StabilityOutcome};
use ns_stability_core::forcing::SupEstimate;
use ns_stability_core::integrator::{StepRecord, Trajectory};
use serde_json::{json, Map, Value};

use crate::artifacts::num;

pub const SCHEMA_VERSION: u32 = 1;

fn sup(s: &SupEstimate) -> Value {
    json!({
        "value": num(s.value),
        "tail_bound": num(s.tail_bound),
        "k_max": s.k_max,
        "certified": s.certified,
    })
}

pub fn constants(k: &Constants) -> Value {
    let r = &k.rates;
    let q = &r.inequalities;
    json!({
        "mode": r.mode.as_str(),
        "calibration_samples": r.calibration_samples,
        "nu": num(k.nu),
        "kappa": num(k.poincare.kappa),
        "c_s1": num(k.poincare.c_s1),
        "c_1": num(k.poincare.c_1),
        "c_s2": num(r.c_s2),
        "c_s3": num(r.c_s3),
        "c_s4": num(r.c_s4),
        "c_2": num(r.c_2),
        "c_3": num(r.c_3),
        "c_4": num(r.c_4),
        "t_star": num(k.t_star()),
        "gamma_star": num(k.gamma_star()),
        "inequalities": {
            "l3_planar": num(q.l3_planar),
            "l3_spatial": num(q.l3_spatial),
            "l6_spatial": num(q.l6_spatial),
            "l4_planar": num(q.l4_planar),
            "linf_planar": num(q.linf_planar),
        },
    })
}

fn base_data(d: &BaseData) -> Value {
    json!({
        "forcing_l2": sup(&d.forcing_l2),
        "forcing_grad": sup(&d.forcing_grad),
        "forcing_h1": sup(&d.forcing_h1),
        "init_l2_sq": num(d.init_l2_sq),
        "init_grad_sq": num(d.init_grad_sq),
        "init_hess_sq": num(d.init_hess_sq),
        "mean_sup": sup(&d.mean_sup),
    })
}

fn perturbation_data(d: &PerturbationData) -> Value {
    json!({
        "forcing_l2": sup(&d.forcing_l2),
        "mean_window_sq": sup(&d.mean_window_sq),
        "mean_sup": sup(&d.mean_sup),
        "init_l2_sq": num(d.init_l2_sq),
        "gamma": num(d.gamma),
    })
}

fn abar(a: &AbarChain) -> Value {
    json!({
        "window": num(a.window),
        "t_star": num(a.t_star),
        "abar1_sq": num(a.abar1_sq),
        "abar2_sq": num(a.abar2_sq),
        "abar3_sq": num(a.abar3_sq),
        "abar4_sq": num(a.abar4_sq),
        "membership": a.membership,
        "certified": a.certified,
    })
}

fn base_flags(f: &BaseFlags) -> Value {
    json!({
        "window_ge_t_star": f.window_ge_t_star,
        "window_ge_gradient_threshold": f.window_ge_gradient_threshold,
        "hessian_decay": f.hessian_decay,
        "hessian_half": f.hessian_half,
        "inputs_certified": f.inputs_certified,
    })
}

fn a_chain(a: &AChain) -> Value {
    let mut m = Map::new();
    for i in 1..=14 {
        m.insert(format!("a{i}_sq"), num(a.get(i)));
    }
    m.insert("flags".into(), base_flags(&a.flags));
    Value::Object(m)
}

fn perturbation_flags(f: &PerturbationFlags) -> Value {
    json!({
        "decay_literal": f.decay_literal,
        "decay_scaled": f.decay_scaled,
        "half": f.half,
        "inputs_certified": f.inputs_certified,
    })
}

fn b_chain(b: &BChain) -> Value {
    json!({
        "b1_sq": num(b.b1_sq),
        "b2_sq": num(b.b2_sq),
        "b3_sq": num(b.b3_sq),
        "b4_sq": num(b.b4_sq),
        "b5_sq": num(b.b5_sq),
        "b5_sq_with_restart": num(b.b5_sq_with_restart),
        "l2_sup_sq": num(b.l2_sup_sq),
        "b6_mean": num(b.b6_mean),
        "b7_sq": num(b.b7_sq),
        "gamma": num(b.gamma),
        "gamma_star": num(b.gamma_star),
        "flags": perturbation_flags(&b.flags),
    })
}

pub fn certificate(c: &Certificate) -> Value {
    json!({
        "constants": constants(&c.constants),
        "base_data": base_data(&c.base_data),
        "perturbation_data": perturbation_data(&c.perturbation_data),
        "abar": abar(&c.abar),
        "forcing_total_h1": num(c.forcing_total_h1),
        "admissible_threshold": {
            "literal": num(c.threshold.literal),
            "sufficient": num(c.threshold.sufficient),
        },
        "a_chain": a_chain(&c.a),
        "b_chain": b_chain(&c.b),
        "gamma_hypothesis": c.b.gamma_hypothesis.as_str(),
        "base_hypotheses": c.base_hypotheses(),
        "perturbation_hypotheses": c.perturbation_hypotheses(),
    })
}

/// Final-record summary of a trajectory.
pub fn trajectory_summary(name: &str, t: &Trajectory) -> Value {
    let last = t.records.last().copied().unwrap_or_default();
    json!({
        "flow": name,
        "steps": t.records.len().saturating_sub(1),
        "dt": num(t.dt),
        "final": record(&last),
        "max_div_l2": num(t.records.iter().map(|r| r.div_l2).fold(0.0, f64::max)),
    })
}

fn record(r: &StepRecord) -> Value {
    json!({
        "t": num(r.t),
        "l2_sq": num(r.l2_sq),
        "h1_sq": num(r.h1_sq),
        "h2_sq": num(r.h2_sq),
        "grad_sq": num(r.grad_sq),
        "mean": [num(r.mean.0[0]), num(r.mean.0[1]), num(r.mean.0[2])],
    })
}

pub fn outcome(o: &StabilityOutcome) -> Value {
    let b = &o.barrier;
    let d = &b.diagnostics;
    let bounds: Vec<Value> = o
        .bounds
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "measured": num(c.measured),
                "bound": num(c.bound),
                "worst_window": c.worst_window,
                "holds": c.holds,
                "applicable": c.applicable,
                "strict": c.strict,
            })
        })
        .collect();
    let uniformity: Vec<Value> = o
        .uniformity
        .entries
        .iter()
        .map(|e| json!({"quantity": e.quantity, "max_ratio": num(e.max_ratio), "holds": e.holds}))
        .collect();
    let h21 = |w: &[ns_stability_core::experiments::H21Window]| -> Vec<Value> {
        w.iter()
            .map(|x| {
                json!({
                    "k": x.k,
                    "h2_integral": num(x.h2_integral),
                    "dt_integral": num(x.dt_integral),
                    "pressure_integral": num(x.pressure_integral),
                    "h21_sq": num(x.h21_sq),
                })
            })
            .collect()
    };
    let s = &o.smallness;
    let f = &o.data_functional;
    let e = &o.h21_envelope;
    json!({
        "dt": num(o.dt),
        "steps": o.trajectory.perturbation.records.len().saturating_sub(1),
        "barrier": {
            "gamma": num(b.gamma),
            "gamma_star": num(b.gamma_star),
            "never_exceeded": b.never_exceeded,
            "first_exceedance_time": b.first_exceedance_time.map(num),
            "max_x2": num(b.x2.iter().copied().fold(0.0, f64::max)),
            "nesting_holds": b.nesting_holds,
            "tol_slack": num(d.tol_slack),
            "checked_intervals": d.checked,
            "decay_violations": d.decay_violations,
            "decay_max_residual": num(d.decay_max_residual),
            "raw_violations": d.raw_violations,
            "raw_max_residual": num(d.raw_max_residual),
        },
        "smallness": {
            "threshold": num(s.threshold),
            "max_budget_sq": num(s.max_budget_sq),
            "passes": s.passes,
            "gamma_hypothesis": s.gamma_hypothesis.as_str(),
        },
        "data_functional": {
            "forcing_window": num(f.forcing_window),
            "initial_l2": num(f.initial_l2),
            "mean_window": num(f.mean_window),
            "mean_pointwise": num(f.mean_pointwise),
            "forcing_pointwise": num(f.forcing_pointwise),
            "max_addend": num(f.max_addend),
            "sum": num(f.sum),
            "epsilon": num(f.epsilon),
            "passes": f.passes,
        },
        "bounds": bounds,
        "uniformity": {
            "holds": o.uniformity.holds,
            "excluded_windows": o.uniformity.excluded_windows,
            "notice": o.uniformity.notice,
            "entries": uniformity,
        },
        "h21": {
            "base": h21(&o.base_h21),
            "perturbation": h21(&o.perturbation_h21),
            "envelope": {
                "base_shape": num(e.base_shape),
                "base_ratio": num(e.base_ratio),
                "perturbation_shape": num(e.perturbation_shape),
                "perturbation_ratio": num(e.perturbation_ratio),
            },
        },
        "base": trajectory_summary("base", &o.trajectory.base),
        "perturbation": trajectory_summary("perturbation", &o.trajectory.perturbation),
    })
}
