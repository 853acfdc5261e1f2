use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ns_stability::artifacts::Table;
use ns_stability::config;
use ns_stability::snapshot;
use ns_stability_core::experiments::{run_stability_experiment, FieldShape};
use ns_stability_core::PeriodicGrid;
use serde_json::Value;
use tempfile::TempDir;

fn ns(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ns-stability"));
    c.args(args);
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn run_cmd(cmd: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    ns(&args, &[])
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn table(path: &Path) -> Table {
    Table::parse_csv(&fs::read_to_string(path).unwrap()).unwrap()
}

fn without_timestamp(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.contains("\"generated_unix\""))
        .collect::<Vec<_>>()
        .join("\n")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit status")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small, fast base: `N = 8`, analytic constants, no data.
const ZERO: &str = r#"
[domain]
n = 8
[time]
window = 3.0
windows = 2
dt = 0.05
[base.forcing]
kind = "zero"
[base.initial]
amplitude = 0.0
[perturbation]
fill = 0.0
[constants]
mode = "analytic_conservative"
"#;

/// Small live scenario shared by the stability tests.
const SMALL: &str = r#"
[domain]
n = 8
[time]
window = 3.0
windows = 2
dt = 0.02
[base.forcing]
kind = "decaying"
mean = [1.0, 0.0]
amplitude = 0.05
[base.initial]
amplitude = 0.05
[perturbation]
gamma = 1e-4
[constants]
mode = "analytic_conservative"
[output]
every = 5
"#;

#[test]
fn zero_data_simulation_has_zero_series() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), ZERO);
    let out = dir.path().join("out");
    let o = run_cmd("simulate", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for flow in ["base", "perturbation"] {
        let t = table(&out.join(format!("series_{flow}.csv")));
        assert_eq!(t.rows.len(), 121);
        for row in &t.rows {
            assert!(row[1..].iter().all(|v| *v == 0.0), "{flow}: {row:?}");
        }
    }
    assert!(out.join("snapshots/perturbation_002.nssnap").exists());
    assert_eq!(report(&out)["status"], "completed");
}

#[test]
fn taylor_green_preset_decays_in_closed_form() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
[domain]
n = 16
[time]
window = 1.0
windows = 1
dt = 1e-3
[simulate]
system = "base2d"
preset = "taylor_green"
[output]
every = 100
"#,
    );
    let out = dir.path().join("out");
    let o = run_cmd("simulate", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = table(&out.join("series_base.csv"));
    let time = t.column("t").unwrap();
    let e = t.column("l2_sq").unwrap();
    assert_eq!(*time.last().unwrap(), 1.0);
    // ν = 1, |k|² = 2: energy decays like e^{-4t}
    let ratio = e.last().unwrap() / e[0];
    assert!((ratio / (-4.0f64).exp() - 1.0).abs() < 1e-6, "ratio {ratio}");
}

#[test]
fn misspelled_key_exits_2_and_names_it() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[domain]\nviscocity = 1.0\n");
    let o = run_cmd("simulate", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("viscocity"), "{err}");
    assert!(err.contains("line 2"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_environment_override_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), ZERO);
    let out = dir.path().join("out");
    let o = ns(
        &["certify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[("NSSTAB_DOMAIN_VISCOCITY", "2")],
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("NSSTAB_DOMAIN_VISCOCITY"));
}

#[test]
fn environment_overrides_reach_the_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), ZERO);
    let out = dir.path().join("out");
    let o = ns(
        &["certify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[("NSSTAB_DOMAIN_NU", "2.5"), ("NSSTAB_CERTIFICATE_K_MAX", "8")],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = report(&out);
    assert_eq!(r["config"]["domain"]["nu"], 2.5);
    assert_eq!(r["config"]["certificate"]["k_max"], 8);
    assert_eq!(r["result"]["certificate"]["constants"]["nu"], 2.5);
}

#[test]
fn nonpositive_viscosity_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[domain]\nnu = -1.0\n");
    let o = run_cmd("certify", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("nu"));
}

#[test]
fn zero_data_certificate_collapses() {
    let dir = TempDir::new().unwrap();
    for (window, member) in [(3.0, true), (2.5, false)] {
        let cfg = write_config(dir.path(), &ZERO.replace("window = 3.0", &format!("window = {window:?}")));
        let out = dir.path().join(format!("out_{window}"));
        let o = run_cmd("certify", &cfg, &out, &[]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let c = &report(&out)["result"]["certificate"];
        assert_eq!(c["abar"]["abar3_sq"], 1.0);
        let t_star = c["constants"]["t_star"].as_f64().unwrap();
        assert!(t_star > 2.5 && t_star < 3.0);
        assert_eq!(c["abar"]["membership"], member, "T = {window}");
        for i in 1..=14 {
            assert_eq!(c["a_chain"][format!("a{i}_sq")], 0.0, "A{i}");
        }
    }
}

#[test]
fn unit_decaying_mode_reports_half_over_rate() {
    // amplitude giving ‖h‖²_{H¹} = 1 in 3D box measure
    let g2 = PeriodicGrid::new(std::f64::consts::TAU, 2, 8).unwrap();
    let g3 = PeriodicGrid::new(std::f64::consts::TAU, 3, 8).unwrap();
    let h1 = FieldShape::Cellular { mode: 1 }
        .field(&g2, 1.0)
        .unwrap()
        .lift_2d_to_3d(&g3)
        .unwrap()
        .sobolev_sq(1)
        .unwrap();
    let amp = 1.0 / h1.sqrt();
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        &ZERO.replace(
            "[base.forcing]\nkind = \"zero\"",
            &format!("[base.forcing]\nkind = \"decaying\"\nmean = [0.0, 0.0]\namplitude = {amp:?}\ndecay = 1.0"),
        ),
    );
    let out = dir.path().join("out");
    let o = run_cmd("certify", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let c = &report(&out)["result"]["certificate"];
    let total = c["forcing_total_h1"].as_f64().unwrap();
    assert!((total - 0.5).abs() < 1e-12, "{total}");
    let abar1 = c["abar"]["abar1_sq"].as_f64().unwrap();
    let expected = 0.5 * (1.0 - (-6.0f64).exp());
    assert!((abar1 - expected).abs() < 1e-9, "{abar1} vs {expected}");
}

#[test]
fn large_gamma_is_reported_as_violated() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &ZERO.replace("[perturbation]\nfill = 0.0", "[perturbation]\nfill = 0.0\ngamma = 1e6"));
    let out = dir.path().join("out");
    let o = run_cmd("certify", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "hypothesis failures are findings: {}", stderr(&o));
    let text = fs::read_to_string(out.join("report.json")).unwrap();
    assert!(text.contains(r#""gamma_hypothesis": "violated""#));
}

#[test]
fn zero_perturbation_never_exceeds() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("gamma = 1e-4", "gamma = 1e-4\nfill = 0.0"));
    let out = dir.path().join("out");
    let o = run_cmd("stability", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(report(&out)["result"]["never_exceeded"], true);
    let s = table(&out.join("series.csv"));
    assert!(s.column("x2").unwrap().iter().all(|v| *v == 0.0));
    assert!(s.column("base_l2_sq").unwrap().iter().any(|v| *v > 0.0));
}

#[test]
fn stability_is_a_thin_shell_over_the_core() {
    let dir = TempDir::new().unwrap();
    let cfg_path = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = run_cmd("stability", &cfg_path, &out, &["--svg"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = report(&out);

    let parsed = config::parse(SMALL).unwrap();
    let direct = run_stability_experiment(&parsed.scenario().unwrap()).unwrap();
    let b = &r["result"]["outcome"]["barrier"];
    assert_eq!(b["max_x2"].as_f64().unwrap(), direct.barrier.x2.iter().copied().fold(0.0, f64::max));
    assert_eq!(b["never_exceeded"], direct.barrier.never_exceeded);
    assert_eq!(b["decay_violations"], direct.barrier.diagnostics.decay_violations);
    assert_eq!(
        r["result"]["certificate"]["b_chain"]["b5_sq"].as_f64().unwrap(),
        direct.setup.certificate.b.b5_sq
    );
    assert_eq!(r["result"]["outcome"]["dt"].as_f64().unwrap(), direct.dt);

    let w = table(&out.join("windows.csv"));
    assert_eq!(w.rows.len(), 2);
    assert_eq!(w.column("perturbation_h1_sup_sq").unwrap()[1], direct.windows[1].pert_h1_sup_sq);
    let svg = fs::read_to_string(out.join("barrier.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(r["artifacts"]["barrier.svg"].is_string());
}

#[test]
fn rerun_report_is_byte_identical_apart_from_the_timestamp() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run_cmd("stability", &cfg, out, &[]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(report(&a)["input_hash"], report(&b)["input_hash"]);
    assert_eq!(without_timestamp(&a.join("report.json")), without_timestamp(&b.join("report.json")));
    assert_eq!(fs::read(a.join("series.csv")).unwrap(), fs::read(b.join("series.csv")).unwrap());

    let c = dir.path().join("c");
    let o = run_cmd("stability", &cfg, &c, &["--seed", "99"]);
    assert_eq!(code(&o), 0);
    assert_ne!(report(&a)["input_hash"], report(&c)["input_hash"]);
    assert_eq!(report(&c)["config"]["perturbation"]["seed"], 99);
}

#[test]
fn corrupted_resume_snapshot_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let sim = dir.path().join("sim");
    let o = run_cmd("simulate", &cfg, &sim, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let snap = sim.join("snapshots/perturbation_001.nssnap");

    // an intact snapshot resumes
    let resumed = format!("{SMALL}\n[resume]\nflow3d = {:?}\n", snap.to_str().unwrap());
    let cfg_ok = write_config(dir.path(), &resumed);
    let out = dir.path().join("resumed");
    let o = run_cmd("certify", &cfg_ok, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s = snapshot::read(&snap).unwrap();
    let l2 = s.velocity.subtract_mean().sobolev_sq(0).unwrap();
    let reported = report(&out)["result"]["certificate"]["perturbation_data"]["init_l2_sq"].as_f64().unwrap();
    assert!((reported - l2).abs() <= 1e-15 * l2);

    let mut bytes = fs::read(&snap).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x10;
    fs::write(&snap, bytes).unwrap();
    let o = run_cmd("stability", &cfg_ok, &dir.path().join("bad"), &[]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("checksum"));
}

#[test]
fn resume_grid_mismatch_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), ZERO);
    let sim = dir.path().join("sim");
    assert_eq!(code(&run_cmd("simulate", &cfg, &sim, &[])), 0);
    let snap = sim.join("snapshots/base_000.nssnap");
    let text = format!("{}\n[resume]\nbase = {:?}\n", ZERO.replace("n = 8", "n = 12"), snap.to_str().unwrap());
    let cfg = write_config(dir.path(), &text);
    let o = run_cmd("certify", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn solver_abort_exits_4_with_a_partial_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        &(ZERO
            .replace("[base.initial]\namplitude = 0.0", "[base.initial]\namplitude = 50.0")
            .replace("dt = 0.05", "dt = 0.1")
            + "[simulate]\nsystem = \"base2d\"\n"),
    );
    let out = dir.path().join("out");
    let o = run_cmd("simulate", &cfg, &out, &[]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("CFL"));
    let r = report(&out);
    assert_eq!(r["status"], "aborted");
    assert!(r["error"].as_str().unwrap().contains("CFL"));
}

#[test]
fn full3d_simulation_runs_and_stays_solenoidal() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}\n[simulate]\nsystem = \"full3d\"\n"));
    let out = dir.path().join("out");
    let o = run_cmd("simulate", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = table(&out.join("series_full3d.csv"));
    assert!(t.column("div_l2").unwrap().iter().all(|v| *v < 1e-11));
    assert!(t.column("l2_sq").unwrap()[0] > 0.0);
}

#[test]
fn report_verifies_artifacts_and_redraws_charts() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    assert_eq!(code(&run_cmd("stability", &cfg, &out, &[])), 0);

    let o = ns(&["report", "--out", out.to_str().unwrap(), "--svg"], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("never_exceeded true"), "{stdout}");
    assert!(out.join("barrier.svg").exists());
    assert!(out.join("windows.svg").exists());

    let series = out.join("series.csv");
    let mut text = fs::read_to_string(&series).unwrap();
    text.push_str("0,0,0,0,0,0,0,0,0,0\n");
    fs::write(&series, text).unwrap();
    let o = ns(&["report", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("series.csv"));

    let o = ns(&["report", "--out", dir.path().join("missing").to_str().unwrap()], &[]);
    assert_eq!(code(&o), 2);
}

#[test]
fn parallel_sweep_matches_sequential_sweep() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}\n[sweep]\ngamma = [1e-4, 4e-4]\n"));
    let (seq, par) = (dir.path().join("seq"), dir.path().join("par"));
    assert_eq!(code(&run_cmd("stability", &cfg, &seq, &["--jobs", "1"])), 0);
    let o = run_cmd("stability", &cfg, &par, &["--jobs", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let index: Value = serde_json::from_str(&fs::read_to_string(par.join("sweep.json")).unwrap()).unwrap();
    let points = index["points"].as_array().unwrap();
    assert_eq!(points.len(), 2);
    assert_eq!(points[1]["gamma"], 4e-4);
    for p in points {
        let name = p["dir"].as_str().unwrap();
        assert_eq!(
            without_timestamp(&seq.join(name).join("report.json")),
            without_timestamp(&par.join(name).join("report.json"))
        );
    }
    let r = report(&par.join("point_001"));
    assert_eq!(r["result"]["outcome"]["barrier"]["gamma"], 4e-4);
    let o = ns(&["report", "--out", par.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 2);
}

#[test]
fn zero_jobs_is_rejected() {
    let o = ns(&["certify", "--jobs", "0"], &[]);
    assert_eq!(code(&o), 2);
}

#[test]
fn reference_scenario_stays_below_the_barrier() {
    // the default config is the reference scenario
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = ns(&["stability", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = report(&out);
    assert_eq!(r["result"]["never_exceeded"], true);
    assert_eq!(r["result"]["certificate"]["perturbation_hypotheses"], true);
    assert_eq!(r["result"]["outcome"]["barrier"]["decay_violations"], 0);
}
