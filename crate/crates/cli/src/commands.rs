//! The subcommands. Each parses its config into a core scenario and calls
//! the core operations; everything here is file plumbing.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ns_stability_core::experiments::{
    cfl_dt, flows, prepare_from_initial, run_prepared, scenario_constants, Flows, RunError, Scenario, Setup,
    StabilityOutcome,
};
use ns_stability_core::forcing::Forcing;
use ns_stability_core::integrator::{
    evolve_base_2d, evolve_full_3d, evolve_pair, Aborted, FlowState, PairTrajectory, Role, Sampling, SolverConfig,
    Trajectory,
};
use ns_stability_core::{PeriodicGrid, SpectralField};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::artifacts::{num, sha256_hex, ArtifactDir, Table};
use crate::config::{self, RunConfig, System};
use crate::error::CliError;
use crate::report;
use crate::snapshot::{self, Snapshot};
use crate::svg::{Chart, Curve};
use crate::RunArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Simulate,
    Certify,
    Stability,
}

impl Kind {
    pub fn name(&self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::Certify => "certify",
            Kind::Stability => "stability",
        }
    }
}

pub const REPORT_FILE: &str = "report.json";
pub const SWEEP_FILE: &str = "sweep.json";

/// Config file, environment, then flags; the preset is applied last.
pub fn load_config<E>(args: &RunArgs, env: E) -> Result<RunConfig, CliError>
where
    E: IntoIterator<Item = (String, String)>,
{
    let text = match &args.config {
        Some(p) => fs::read_to_string(p)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut cfg = config::apply_env(config::parse(&text)?, env)?;
    if let Some(out) = &args.out {
        cfg.output.dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.perturbation.seed = seed;
        cfg.sweep.seed.clear();
    }
    cfg.output.svg |= args.svg;
    Ok(cfg.with_preset())
}

pub fn run<E>(kind: Kind, args: &RunArgs, env: E) -> Result<(), CliError>
where
    E: IntoIterator<Item = (String, String)>,
{
    if args.jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let cfg = load_config(args, env)?;
    if !cfg.is_sweep() {
        cfg.scenario()?;
        return run_point(kind, &cfg, &cfg.output.dir);
    }
    let points = cfg.sweep_points();
    for p in &points {
        p.scenario()?;
    }
    let root = ArtifactDir::create(&cfg.output.dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", args.jobs)))?;
    let results: Vec<(String, Result<(), CliError>)> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let name = format!("point_{i:03}");
                let r = run_point(kind, p, &root.dir.join(&name));
                (name, r)
            })
            .collect()
    });
    let index: Vec<Value> = points
        .iter()
        .zip(&results)
        .map(|(p, (name, r))| {
            json!({
                "dir": name,
                "gamma": num(p.perturbation.gamma),
                "seed": p.perturbation.seed,
                "exit_code": r.as_ref().map_or_else(|e| e.exit_code(), |_| 0),
                "error": r.as_ref().err().map(|e| e.to_string()),
            })
        })
        .collect();
    let doc = json!({
        "schema_version": report::SCHEMA_VERSION,
        "command": kind.name(),
        "points": index,
    });
    write_json(&root.dir.join(SWEEP_FILE), &doc)?;
    results
        .into_iter()
        .filter_map(|(_, r)| r.err())
        .reduce(CliError::worst)
        .map_or(Ok(()), Err)
}

fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    fs::write(path, s).map_err(|e| CliError::io(path.display(), e))
}

/// Snapshots named by `[resume]`, read and checked.
struct Resume {
    base: Option<Snapshot>,
    flow3d: Option<Snapshot>,
    bytes: Vec<u8>,
}

fn load_resume(cfg: &RunConfig) -> Result<Resume, CliError> {
    let mut bytes = Vec::new();
    let mut read = |p: &Option<PathBuf>| -> Result<Option<Snapshot>, CliError> {
        match p {
            None => Ok(None),
            Some(p) => {
                let raw = fs::read(p).map_err(|e| CliError::Config(format!("cannot read snapshot {}: {e}", p.display())))?;
                let s = snapshot::decode(&raw).map_err(|e| match e {
                    CliError::Integrity(m) => CliError::Integrity(format!("{}: {m}", p.display())),
                    other => other,
                })?;
                bytes.extend_from_slice(&raw);
                Ok(Some(s))
            }
        }
    };
    let base = read(&cfg.resume.base)?;
    let flow3d = read(&cfg.resume.flow3d)?;
    Ok(Resume { base, flow3d, bytes })
}

fn check_grid(s: &Snapshot, grid: &PeriodicGrid, what: &str) -> Result<(), CliError> {
    if s.velocity.grid() != grid {
        let g = s.velocity.grid();
        return Err(CliError::Config(format!(
            "{what} snapshot is on L = {}, dim {}, N = {}; config needs L = {}, dim {}, N = {}",
            g.length(),
            g.dim(),
            g.n(),
            grid.length(),
            grid.dim(),
            grid.n()
        )));
    }
    Ok(())
}

/// Flows of the scenario with resumed velocities swapped in. For `full3d`
/// the 3D snapshot is the full flow and is returned separately.
fn resumed_flows(s: &Scenario, resume: &Resume, system: Option<System>) -> Result<(Flows, Option<SpectralField>), CliError> {
    let mut f = flows(s).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(b) = &resume.base {
        check_grid(b, &f.grid2, "base")?;
        f.base_velocity = b.velocity.clone();
    }
    let mut full = None;
    if let Some(u) = &resume.flow3d {
        check_grid(u, &f.grid3, "3D")?;
        if system == Some(System::Full3d) {
            full = Some(u.velocity.clone());
        } else {
            f.perturbation_velocity = u.velocity.clone();
        }
    }
    Ok((f, full))
}

fn rejected(e: ns_stability_core::Error) -> CliError {
    CliError::Integrity(format!("initial state rejected: {e}"))
}

fn input_hash(kind: Kind, cfg: &RunConfig, resume: &Resume) -> String {
    let mut bytes = format!("{}\n", kind.name()).into_bytes();
    bytes.extend(serde_json::to_vec(&cfg.embedded()).expect("json serializes"));
    bytes.extend_from_slice(&resume.bytes);
    sha256_hex(&bytes)
}

fn run_point(kind: Kind, cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let s = cfg.scenario()?;
    let resume = load_resume(cfg)?;
    let mut out = ArtifactDir::create(dir)?;
    let hash = input_hash(kind, cfg, &resume);
    let (status, result, err) = match kind {
        Kind::Simulate => simulate(&s, cfg, &resume, &mut out)?,
        Kind::Certify => certify(&s, &resume)?,
        Kind::Stability => stability(&s, cfg, &resume, &mut out)?,
    };
    let generated = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let doc = json!({
        "schema_version": report::SCHEMA_VERSION,
        "command": kind.name(),
        "generated_unix": generated,
        "input_hash": hash,
        "config": cfg.embedded(),
        "status": status,
        "error": err.as_ref().map(|e| e.to_string()),
        "result": result,
        "artifacts": out.index(),
    });
    write_json(&dir.join(REPORT_FILE), &doc)?;
    err.map_or(Ok(()), Err)
}

type Finished = (&'static str, Value, Option<CliError>);

fn solver_config(s: &Scenario, dt: f64) -> SolverConfig {
    let mut c = SolverConfig::new(s.nu, dt, s.t_end());
    c.scheme = s.scheme;
    c.cfl_max = s.cfl_max;
    c
}

const SERIES_HEADER: [&str; 17] = [
    "t",
    "l2_sq",
    "h1_sq",
    "h2_sq",
    "h3_sq",
    "grad_sq",
    "hess_sq",
    "third_sq",
    "grad_l3",
    "pressure_grad_sq",
    "increment_sq",
    "forcing_inner",
    "div_l2",
    "mean_x",
    "mean_y",
    "mean_z",
    "max_speed",
];

/// Indices of the records kept at cadence `every`; the last one always is.
fn thinned(len: usize, every: usize) -> impl Iterator<Item = usize> {
    (0..len).filter(move |&i| i % every == 0 || i + 1 == len)
}

fn series(t: &Trajectory, every: usize) -> Table {
    let mut tab = Table::new(&SERIES_HEADER);
    for i in thinned(t.records.len(), every) {
        let r = &t.records[i];
        tab.push(vec![
            r.t,
            r.l2_sq,
            r.h1_sq,
            r.h2_sq,
            r.h3_sq,
            r.grad_sq,
            r.hess_sq,
            r.third_sq,
            r.grad_l3,
            r.pressure_grad_sq,
            r.increment_sq,
            r.forcing_inner,
            r.div_l2,
            r.mean.0[0],
            r.mean.0[1],
            r.mean.0[2],
            r.max_speed,
        ]);
    }
    tab
}

fn write_flow(out: &mut ArtifactDir, name: &str, t: &Trajectory, every: usize) -> Result<(), CliError> {
    out.write(&format!("series_{name}.csv"), series(t, every).to_csv().as_bytes())?;
    write_snapshots(out, name, t)
}

fn write_snapshots(out: &mut ArtifactDir, name: &str, t: &Trajectory) -> Result<(), CliError> {
    for (k, st) in t.states.iter().enumerate() {
        let snap = Snapshot {
            t: st.t,
            velocity: st.velocity(),
        };
        out.write(&format!("snapshots/{name}_{k:03}.nssnap"), &snapshot::encode(&snap))?;
    }
    Ok(())
}

fn abort_error<T>(a: &Aborted<T>) -> CliError {
    CliError::Solver(a.error.to_string())
}

fn speed(fields: &[&SpectralField]) -> Result<f64, CliError> {
    let mut s = 0.0;
    for f in fields {
        s += f.subtract_mean().lp_norm(f64::INFINITY).map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(s)
}

fn simulate(s: &Scenario, cfg: &RunConfig, resume: &Resume, out: &mut ArtifactDir) -> Result<Finished, CliError> {
    let system = cfg.simulate.system;
    let (f, full) = resumed_flows(s, resume, Some(system))?;
    let every = cfg.output.every;
    let sampling = Sampling::windows(s.window);
    let h = f.grid3.spacing();
    let pick_dt = |sp: f64| s.dt.unwrap_or_else(|| cfl_dt(sp, h, s.cfl_max, s.window));
    let cfg_dt;
    let (status, flows_json, err) = match system {
        System::Base2d => {
            cfg_dt = pick_dt(speed(&[&f.base_velocity])?);
            let v0 = FlowState::from_velocity(&f.base_velocity, 0.0, Role::Base2d).map_err(rejected)?;
            let (traj, err) = split(evolve_base_2d(&v0, &f.base_forcing, &solver_config(s, cfg_dt), &sampling));
            write_flow(out, "base", &traj, every)?;
            (status_of(&err), vec![report::trajectory_summary("base", &traj)], err)
        }
        System::Full3d => {
            let velocity = match full {
                Some(v) => v,
                None => f
                    .base_velocity
                    .lift_2d_to_3d(&f.grid3)
                    .and_then(|b| b.add(&f.perturbation_velocity))
                    .map_err(|e| CliError::Config(e.to_string()))?,
            };
            let forcing: Forcing = f
                .base_forcing
                .lift_2d_to_3d(&f.grid3)
                .and_then(|b| b.plus(&f.perturbation_forcing))
                .map_err(|e| CliError::Config(e.to_string()))?;
            cfg_dt = pick_dt(speed(&[&velocity])?);
            let u0 = FlowState::from_velocity(&velocity, 0.0, Role::Full3d).map_err(rejected)?;
            let (traj, err) = split(evolve_full_3d(&u0, &forcing, &solver_config(s, cfg_dt), &sampling));
            write_flow(out, "full3d", &traj, every)?;
            (status_of(&err), vec![report::trajectory_summary("full3d", &traj)], err)
        }
        System::Pair => {
            cfg_dt = pick_dt(speed(&[&f.base_velocity, &f.perturbation_velocity])?);
            let v0 = FlowState::from_velocity(&f.base_velocity, 0.0, Role::Base2d).map_err(rejected)?;
            let u0 = FlowState::from_velocity(&f.perturbation_velocity, 0.0, Role::Perturbation).map_err(rejected)?;
            let (pair, err) = split(evolve_pair(
                &v0,
                &f.base_forcing,
                &u0,
                &f.perturbation_forcing,
                &solver_config(s, cfg_dt),
                &sampling,
            ));
            write_flow(out, "base", &pair.base, every)?;
            write_flow(out, "perturbation", &pair.perturbation, every)?;
            (
                status_of(&err),
                vec![
                    report::trajectory_summary("base", &pair.base),
                    report::trajectory_summary("perturbation", &pair.perturbation),
                ],
                err,
            )
        }
    };
    let result = json!({
        "system": system,
        "dt": num(cfg_dt),
        "t_end": num(s.t_end()),
        "flows": flows_json,
    });
    Ok((status, result, err))
}

fn split<T>(r: Result<T, Aborted<T>>) -> (T, Option<CliError>) {
    match r {
        Ok(t) => (t, None),
        Err(a) => {
            let e = abort_error(&a);
            (*a.partial, Some(e))
        }
    }
}

fn status_of(err: &Option<CliError>) -> &'static str {
    if err.is_some() {
        "aborted"
    } else {
        "completed"
    }
}

fn setup(s: &Scenario, resume: &Resume) -> Result<Setup, CliError> {
    let (f, _) = resumed_flows(s, resume, None)?;
    let constants = scenario_constants(s).map_err(|e| CliError::Config(e.to_string()))?;
    prepare_from_initial(s, constants, &f.base_velocity, &f.perturbation_velocity).map_err(|e| match e {
        ns_stability_core::Error::InvalidParameter { name: "velocity", .. } => rejected(e),
        other => CliError::Config(other.to_string()),
    })
}

fn certify(s: &Scenario, resume: &Resume) -> Result<Finished, CliError> {
    let setup = setup(s, resume)?;
    let c = &setup.certificate;
    let result = json!({
        "gamma_hypothesis": c.b.gamma_hypothesis.as_str(),
        "membership": c.abar.membership,
        "certificate": report::certificate(c),
    });
    Ok(("completed", result, None))
}

pub const STABILITY_SERIES_HEADER: [&str; 10] = [
    "t",
    "x2",
    "y2",
    "g2",
    "perturbation_l2_sq",
    "perturbation_div_l2",
    "base_l2_sq",
    "base_h1_sq",
    "base_h2_sq",
    "base_grad_l3",
];

pub const WINDOWS_HEADER: [&str; 15] = [
    "k",
    "base_h1_sup_sq",
    "base_h2_sup_sq",
    "perturbation_l2_sup_sq",
    "perturbation_h1_sup_sq",
    "base_h2_integral",
    "base_h3_integral",
    "perturbation_h1_integral",
    "perturbation_h2_integral",
    "base_dt_integral",
    "perturbation_dt_integral",
    "base_pressure_integral",
    "perturbation_pressure_integral",
    "base_h21_sq",
    "perturbation_h21_sq",
];

/// Per-step barrier series; base norms are converted to 3D box measure.
fn stability_series(pair: &PairTrajectory, g2: Option<&[f64]>, length: f64, every: usize) -> Table {
    let mut tab = Table::new(&STABILITY_SERIES_HEADER);
    let w = length.cbrt();
    let n = pair.base.records.len().min(pair.perturbation.records.len());
    for i in thinned(n, every) {
        let b = &pair.base.records[i];
        let p = &pair.perturbation.records[i];
        tab.push(vec![
            p.t,
            p.h1_sq,
            p.h2_sq,
            g2.map_or(f64::NAN, |g| g[i]),
            p.l2_sq,
            p.div_l2,
            length * b.l2_sq,
            length * b.h1_sq,
            length * b.h2_sq,
            w * b.grad_l3,
        ]);
    }
    tab
}

fn windows_table(o: &StabilityOutcome) -> Table {
    let mut tab = Table::new(&WINDOWS_HEADER);
    for (i, w) in o.windows.iter().enumerate() {
        let h21 = |v: &[ns_stability_core::experiments::H21Window]| v.get(i).map_or(f64::NAN, |x| x.h21_sq);
        tab.push(vec![
            w.k as f64,
            w.base_h1_sup_sq,
            w.base_h2_sup_sq,
            w.pert_l2_sup_sq,
            w.pert_h1_sup_sq,
            w.base_h2_integral,
            w.base_h3_integral,
            w.pert_h1_integral,
            w.pert_h2_integral,
            w.base_dt_integral,
            w.pert_dt_integral,
            w.base_pressure_integral,
            w.pert_pressure_integral,
            h21(&o.base_h21),
            h21(&o.perturbation_h21),
        ]);
    }
    tab
}

fn stability(s: &Scenario, cfg: &RunConfig, resume: &Resume, out: &mut ArtifactDir) -> Result<Finished, CliError> {
    let setup = setup(s, resume)?;
    let cert = report::certificate(&setup.certificate);
    let every = cfg.output.every;
    match run_prepared(s, setup) {
        Ok(o) => {
            let g2 = &o.barrier.g2;
            let series = stability_series(&o.trajectory, Some(g2), s.length, every);
            let windows = windows_table(&o);
            out.write("series.csv", series.to_csv().as_bytes())?;
            out.write("windows.csv", windows.to_csv().as_bytes())?;
            write_snapshots(out, "base", &o.trajectory.base)?;
            write_snapshots(out, "perturbation", &o.trajectory.perturbation)?;
            if cfg.output.svg {
                for (name, svg) in stability_charts(&series, &windows, s.perturbation.gamma) {
                    out.write(name, svg.as_bytes())?;
                }
            }
            let result = json!({
                "never_exceeded": o.barrier.never_exceeded,
                "gamma_hypothesis": o.setup.certificate.b.gamma_hypothesis.as_str(),
                "certificate": cert,
                "outcome": report::outcome(&o),
            });
            Ok(("completed", result, None))
        }
        Err(RunError::Invalid(e)) => Err(CliError::Config(e.to_string())),
        Err(RunError::Aborted(a)) => {
            let err = abort_error(&a);
            let series = stability_series(&a.partial, None, s.length, every);
            out.write("series.csv", series.to_csv().as_bytes())?;
            let result = json!({
                "certificate": cert,
                "partial": {
                    "base": report::trajectory_summary("base", &a.partial.base),
                    "perturbation": report::trajectory_summary("perturbation", &a.partial.perturbation),
                },
            });
            Ok(("aborted", result, Some(err)))
        }
    }
}

/// `barrier.svg` (X², Y², G² and γ against t) and `windows.svg` (window sups).
pub fn stability_charts(series: &Table, windows: &Table, gamma: f64) -> Vec<(&'static str, String)> {
    let col = |t: &Table, c: &str| t.column(c).unwrap_or_default();
    let t = col(series, "t");
    let (x2, y2, g2) = (col(series, "x2"), col(series, "y2"), col(series, "g2"));
    let gline = vec![gamma; t.len()];
    let barrier = Chart {
        title: "Perturbation norms against the barrier",
        x_label: "t",
        log_y: true,
        curves: vec![
            Curve { label: "X² = ‖ū‖²_H¹", xs: &t, ys: &x2, dashed: false },
            Curve { label: "Y² = ‖ū‖²_H²", xs: &t, ys: &y2, dashed: false },
            Curve { label: "G²", xs: &t, ys: &g2, dashed: false },
            Curve { label: "γ", xs: &t, ys: &gline, dashed: true },
        ],
    }
    .render();
    let k = col(windows, "k");
    let sups: Vec<(&str, Vec<f64>)> = ["base_h1_sup_sq", "base_h2_sup_sq", "perturbation_l2_sup_sq", "perturbation_h1_sup_sq"]
        .iter()
        .map(|c| (*c, col(windows, c)))
        .collect();
    let windows_svg = Chart {
        title: "Window sups",
        x_label: "window k",
        log_y: true,
        curves: sups
            .iter()
            .map(|(name, ys)| Curve { label: name, xs: &k, ys, dashed: false })
            .collect(),
    }
    .render();
    vec![("barrier.svg", barrier), ("windows.svg", windows_svg)]
}

/// Checks every artifact hash recorded in `dir/report.json`.
fn verify(dir: &Path) -> Result<Value, CliError> {
    let path = dir.join(REPORT_FILE);
    let text = fs::read_to_string(&path).map_err(|e| CliError::Config(format!("no report at {}: {e}", path.display())))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Integrity(format!("{} is not valid JSON: {e}", path.display())))?;
    let artifacts = doc
        .get("artifacts")
        .and_then(Value::as_object)
        .ok_or_else(|| CliError::Integrity(format!("{} has no artifact index", path.display())))?;
    for (name, hash) in artifacts {
        let p = dir.join(name);
        let bytes = fs::read(&p).map_err(|e| CliError::Integrity(format!("artifact {} unreadable: {e}", p.display())))?;
        if Some(sha256_hex(&bytes).as_str()) != hash.as_str() {
            return Err(CliError::Integrity(format!("artifact {} does not match its recorded hash", p.display())));
        }
        if name.ends_with(".nssnap") {
            snapshot::decode(&bytes)?;
        }
    }
    Ok(doc)
}

fn summary_line(dir: &Path, doc: &Value) -> String {
    let get = |p: &str| doc.pointer(p).map(|v| v.to_string()).unwrap_or_else(|| "-".into());
    let mut s = format!(
        "{}: {} {} (input {})",
        dir.display(),
        get("/command").trim_matches('"'),
        get("/status").trim_matches('"'),
        get("/input_hash").trim_matches('"'),
    );
    match doc.pointer("/command").and_then(Value::as_str) {
        Some("stability") => s.push_str(&format!(
            "; never_exceeded {}, max X² {}, γ {}, barrier violations {}",
            get("/result/never_exceeded"),
            get("/result/outcome/barrier/max_x2"),
            get("/result/outcome/barrier/gamma"),
            get("/result/outcome/barrier/decay_violations"),
        )),
        Some("certify") => s.push_str(&format!(
            "; membership {}, gamma_hypothesis {}",
            get("/result/membership"),
            get("/result/gamma_hypothesis"),
        )),
        _ => {}
    }
    s
}

fn report_one(dir: &Path, svg: bool) -> Result<(), CliError> {
    let doc = verify(dir)?;
    println!("{}", summary_line(dir, &doc));
    if svg && doc.pointer("/command").and_then(Value::as_str) == Some("stability") {
        let read = |name: &str| -> Result<Table, CliError> {
            let p = dir.join(name);
            let text = fs::read_to_string(&p).map_err(|e| CliError::io(p.display(), e))?;
            Table::parse_csv(&text).map_err(|e| CliError::Integrity(format!("{}: {e}", p.display())))
        };
        let gamma = doc
            .pointer("/result/outcome/barrier/gamma")
            .and_then(Value::as_f64)
            .unwrap_or(f64::NAN);
        let windows = read("windows.csv").unwrap_or_default();
        for (name, text) in stability_charts(&read("series.csv")?, &windows, gamma) {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| CliError::io(p.display(), e))?;
        }
    }
    Ok(())
}

pub fn report(args: &crate::ReportArgs) -> Result<(), CliError> {
    let sweep = args.out.join(SWEEP_FILE);
    if !sweep.exists() {
        return report_one(&args.out, args.svg);
    }
    let text = fs::read_to_string(&sweep).map_err(|e| CliError::io(sweep.display(), e))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Integrity(format!("{} is not valid JSON: {e}", sweep.display())))?;
    let points = doc
        .get("points")
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::Integrity(format!("{} lists no points", sweep.display())))?;
    let mut worst: Option<CliError> = None;
    for p in points {
        let name = p
            .get("dir")
            .and_then(Value::as_str)
            .ok_or_else(|| CliError::Integrity(format!("{} has a point without a directory", sweep.display())))?;
        if let Err(e) = report_one(&args.out.join(name), args.svg) {
            eprintln!("ns-stability: {e}");
            worst = Some(match worst {
                Some(w) => w.worst(e),
                None => e,
            });
        }
    }
    worst.map_or(Ok(()), Err)
}
