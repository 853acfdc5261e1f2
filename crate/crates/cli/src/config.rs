//! Run configuration: a strict TOML schema, environment overrides and the
//! mapping onto core scenarios.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::path::PathBuf;

use ns_stability_core::certificate::{ConstantsMode, MIN_CALIBRATION_SAMPLES};
use ns_stability_core::experiments::{
    BaseInitial, ConstantsSpec, FieldShape, ForcingSpec, PerturbationForcing, PerturbationSpec, Scenario, GAMMA_FILL,
};
use ns_stability_core::integrator::Scheme;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Prefix of environment overrides: `NSSTAB_DOMAIN_N=16` sets `domain.n`.
pub const ENV_PREFIX: &str = "NSSTAB";

/// Keys that have no default value and so are absent from the serialized default.
const OPTIONAL_KEYS: &[&str] = &["time.dt", "simulate.preset", "resume.base", "resume.flow3d"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub output: OutputConfig,
    pub domain: DomainConfig,
    pub time: TimeConfig,
    pub base: BaseConfig,
    pub perturbation: PerturbationConfig,
    pub constants: ConstantsConfig,
    pub certificate: CertificateConfig,
    pub simulate: SimulateConfig,
    pub resume: ResumeConfig,
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Write every `every`-th step to the series files.
    pub every: usize,
    pub svg: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            every: 1,
            svg: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainConfig {
    pub length: f64,
    pub n: usize,
    pub nu: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            length: TAU,
            n: 32,
            nu: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    ImexAb2,
    ImexRk3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub window: f64,
    pub windows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub scheme: SchemeName,
    pub cfl_max: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            window: 6.5,
            windows: 5,
            dt: None,
            scheme: SchemeName::ImexAb2,
            cfl_max: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeName {
    Cellular,
    Shear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseForcingKind {
    Zero,
    Decaying,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct BaseConfig {
    pub forcing: BaseForcingConfig,
    pub initial: BaseInitialConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaseForcingConfig {
    pub kind: BaseForcingKind,
    pub mean: [f64; 2],
    pub shape: ShapeName,
    pub mode: u32,
    pub amplitude: f64,
    pub decay: f64,
}

impl Default for BaseForcingConfig {
    fn default() -> Self {
        Self {
            kind: BaseForcingKind::Decaying,
            mean: [1.0, 0.0],
            shape: ShapeName::Cellular,
            mode: 1,
            amplitude: 0.0137,
            decay: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaseInitialConfig {
    pub shape: ShapeName,
    pub mode: u32,
    pub amplitude: f64,
    pub mean: [f64; 2],
}

impl Default for BaseInitialConfig {
    fn default() -> Self {
        Self {
            shape: ShapeName::Cellular,
            mode: 1,
            amplitude: 0.01,
            mean: [0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationConfig {
    pub gamma: f64,
    pub k0: f64,
    pub seed: u64,
    pub mean: [f64; 3],
    /// `‖u(0)‖²_{H¹} = fill · γ`; zero gives the zero perturbation.
    pub fill: f64,
    pub forcing: PerturbationForcingConfig,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            gamma: 1e-4,
            k0: 2.0,
            seed: 7,
            mean: [0.0; 3],
            fill: GAMMA_FILL,
            forcing: PerturbationForcingConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationForcingKind {
    Zero,
    ConstantMean,
    Decaying,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationForcingConfig {
    pub kind: PerturbationForcingKind,
    pub mean: [f64; 3],
    pub mode: u32,
    pub amplitude: f64,
    pub decay: f64,
}

impl Default for PerturbationForcingConfig {
    fn default() -> Self {
        Self {
            kind: PerturbationForcingKind::Zero,
            mean: [0.0; 3],
            mode: 1,
            amplitude: 0.0,
            decay: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantsModeName {
    AnalyticConservative,
    EmpiricalCalibrated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsConfig {
    pub mode: ConstantsModeName,
    pub seed: u64,
    pub samples: usize,
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self {
            mode: ConstantsModeName::EmpiricalCalibrated,
            seed: 1,
            samples: MIN_CALIBRATION_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertificateConfig {
    pub k_max: usize,
    pub epsilon: f64,
}

impl Default for CertificateConfig {
    fn default() -> Self {
        Self {
            k_max: 64,
            epsilon: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Base2d,
    Full3d,
    Pair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Unforced unit-amplitude cellular flow of mode 1, no perturbation.
    TaylorGreen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub system: System,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            system: System::Pair,
            preset: None,
        }
    }
}

/// Snapshot files whose velocities replace the configured initial states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ResumeConfig {
    /// Planar base flow.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base: Option<PathBuf>,
    /// 3D field: the perturbation, or the full flow for `system = "full3d"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow3d: Option<PathBuf>,
}

/// Values swept as a cartesian product; each point runs in its own directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub gamma: Vec<f64>,
    pub seed: Vec<u64>,
}

/// Parses a config document. Schema errors carry the line and the key.
pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
}

/// Dotted paths of every key the schema knows.
pub fn schema_keys() -> BTreeSet<String> {
    let value = toml::Value::try_from(RunConfig::default()).expect("default config serializes");
    let mut keys = BTreeSet::new();
    flatten(&value, String::new(), &mut keys);
    keys.extend(OPTIONAL_KEYS.iter().map(|k| k.to_string()));
    keys
}

fn flatten(v: &toml::Value, prefix: String, out: &mut BTreeSet<String>) {
    match v {
        toml::Value::Table(t) => {
            for (k, child) in t {
                let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(child, path, out);
            }
        }
        _ => {
            out.insert(prefix);
        }
    }
}

fn env_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `NSSTAB_SECTION_KEY=value` overrides. Values are read as TOML
/// literals, falling back to plain strings.
pub fn apply_env<I>(config: RunConfig, vars: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = (String, String)>,
{
    let prefix = format!("{ENV_PREFIX}_");
    let mut overrides: Vec<(String, String)> = vars.into_iter().filter(|(k, _)| k.starts_with(&prefix)).collect();
    if overrides.is_empty() {
        return Ok(config);
    }
    overrides.sort();
    let keys = schema_keys();
    let mut doc = toml::Value::try_from(&config).expect("config serializes");
    for (var, raw) in overrides {
        let suffix = var[prefix.len()..].to_ascii_lowercase();
        let path = keys
            .iter()
            .find(|k| k.replace('.', "_") == suffix)
            .ok_or_else(|| CliError::Config(format!("unknown key in environment override `{var}`")))?;
        let mut node = &mut doc;
        let parts: Vec<&str> = path.split('.').collect();
        for part in &parts[..parts.len() - 1] {
            node = node
                .as_table_mut()
                .expect("sections are tables")
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
        node.as_table_mut()
            .expect("sections are tables")
            .insert(parts[parts.len() - 1].to_string(), env_value(&raw));
    }
    doc.try_into()
        .map_err(|e: toml::de::Error| CliError::Config(format!("invalid environment override: {e}")))
}

impl RunConfig {
    /// Applies the preset, if any, over the sections it controls.
    pub fn with_preset(mut self) -> Self {
        if let Some(Preset::TaylorGreen) = self.simulate.preset {
            self.base.forcing.kind = BaseForcingKind::Zero;
            self.base.initial = BaseInitialConfig {
                shape: ShapeName::Cellular,
                mode: 1,
                amplitude: 1.0,
                mean: [0.0, 0.0],
            };
            self.perturbation.fill = 0.0;
            self.perturbation.mean = [0.0; 3];
            self.perturbation.forcing = PerturbationForcingConfig {
                kind: PerturbationForcingKind::Zero,
                ..PerturbationForcingConfig::default()
            };
        }
        self
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        if self.output.every == 0 {
            return Err(CliError::Config("output.every must be at least 1".into()));
        }
        let bf = &self.base.forcing;
        let base_forcing = match bf.kind {
            BaseForcingKind::Zero => ForcingSpec::Zero,
            BaseForcingKind::Decaying => ForcingSpec::Decaying {
                mean: bf.mean,
                shape: shape(bf.shape, bf.mode),
                amplitude: bf.amplitude,
                decay: bf.decay,
            },
            BaseForcingKind::Periodic => ForcingSpec::Periodic {
                mean: bf.mean,
                shape: shape(bf.shape, bf.mode),
                amplitude: bf.amplitude,
                decay: bf.decay,
            },
        };
        let bi = &self.base.initial;
        let p = &self.perturbation;
        let pf = &p.forcing;
        let s = Scenario {
            length: self.domain.length,
            n: self.domain.n,
            nu: self.domain.nu,
            window: self.time.window,
            windows: self.time.windows,
            dt: self.time.dt,
            scheme: match self.time.scheme {
                SchemeName::ImexAb2 => Scheme::ImexAb2,
                SchemeName::ImexRk3 => Scheme::ImexRk3,
            },
            cfl_max: self.time.cfl_max,
            base_forcing,
            base_initial: BaseInitial {
                shape: shape(bi.shape, bi.mode),
                amplitude: bi.amplitude,
                mean: bi.mean,
            },
            perturbation: PerturbationSpec {
                gamma: p.gamma,
                k0: p.k0,
                seed: p.seed,
                mean: p.mean,
                fill: p.fill,
            },
            perturbation_forcing: match pf.kind {
                PerturbationForcingKind::Zero => PerturbationForcing::Zero,
                PerturbationForcingKind::ConstantMean => PerturbationForcing::ConstantMean { mean: pf.mean },
                PerturbationForcingKind::Decaying => PerturbationForcing::Decaying {
                    mode: pf.mode,
                    amplitude: pf.amplitude,
                    decay: pf.decay,
                },
            },
            constants: ConstantsSpec {
                mode: match self.constants.mode {
                    ConstantsModeName::AnalyticConservative => ConstantsMode::AnalyticConservative,
                    ConstantsModeName::EmpiricalCalibrated => ConstantsMode::EmpiricalCalibrated,
                },
                seed: self.constants.seed,
                samples: self.constants.samples,
            },
            k_max: self.certificate.k_max,
            epsilon: self.certificate.epsilon,
        };
        s.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(s)
    }

    /// One config per sweep point, with the swept values filled in and the
    /// sweep section emptied. Without a sweep, the config itself.
    pub fn sweep_points(&self) -> Vec<RunConfig> {
        let gammas = if self.sweep.gamma.is_empty() {
            vec![self.perturbation.gamma]
        } else {
            self.sweep.gamma.clone()
        };
        let seeds = if self.sweep.seed.is_empty() {
            vec![self.perturbation.seed]
        } else {
            self.sweep.seed.clone()
        };
        let mut out = Vec::new();
        for &gamma in &gammas {
            for &seed in &seeds {
                let mut c = self.clone();
                c.perturbation.gamma = gamma;
                c.perturbation.seed = seed;
                c.sweep = SweepConfig::default();
                out.push(c);
            }
        }
        out
    }

    pub fn is_sweep(&self) -> bool {
        !self.sweep.gamma.is_empty() || !self.sweep.seed.is_empty()
    }

    /// The config as embedded in reports: output placement removed, since it
    /// does not change any result.
    pub fn embedded(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(out) = v.get_mut("output").and_then(|o| o.as_object_mut()) {
            out.remove("dir");
        }
        v
    }
}

fn shape(name: ShapeName, mode: u32) -> FieldShape {
    match name {
        ShapeName::Cellular => FieldShape::Cellular { mode },
        ShapeName::Shear => FieldShape::Shear { mode },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_reference_scenario() {
        let c = parse("").unwrap();
        assert_eq!(c.scenario().unwrap(), Scenario::reference());
    }

    #[test]
    fn unknown_key_is_named_with_its_line() {
        let err = parse("[domain]\nn = 16\nviscocity = 2.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("viscocity"), "{msg}");
        assert!(msg.contains("line 3"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn env_overrides_nested_and_underscored_keys() {
        let vars = [
            ("NSSTAB_DOMAIN_N".to_string(), "16".to_string()),
            ("NSSTAB_TIME_CFL_MAX".to_string(), "0.25".to_string()),
            ("NSSTAB_BASE_FORCING_MEAN".to_string(), "[0.5, 0.0]".to_string()),
            ("NSSTAB_TIME_SCHEME".to_string(), "imex_rk3".to_string()),
            ("NSSTAB_TIME_DT".to_string(), "0.01".to_string()),
            ("PATH".to_string(), "/bin".to_string()),
        ];
        let c = apply_env(RunConfig::default(), vars).unwrap();
        assert_eq!(c.domain.n, 16);
        assert_eq!(c.time.cfl_max, 0.25);
        assert_eq!(c.base.forcing.mean, [0.5, 0.0]);
        assert_eq!(c.time.scheme, SchemeName::ImexRk3);
        assert_eq!(c.time.dt, Some(0.01));
    }

    #[test]
    fn unknown_env_override_is_rejected() {
        let err = apply_env(RunConfig::default(), [("NSSTAB_DOMAIN_VISCOCITY".into(), "1".into())]).unwrap_err();
        assert!(err.to_string().contains("NSSTAB_DOMAIN_VISCOCITY"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn nonpositive_physical_parameters_are_config_errors() {
        for doc in ["[domain]\nnu = 0.0", "[domain]\nlength = -1.0", "[perturbation]\ngamma = 0.0", "[time]\nwindow = 0.0"] {
            let err = parse(doc).unwrap().scenario().unwrap_err();
            assert_eq!(err.exit_code(), 2, "{doc}");
        }
    }

    #[test]
    fn sweep_is_a_cartesian_product() {
        let c = parse("[sweep]\ngamma = [1e-4, 4e-4]\nseed = [1, 2, 3]").unwrap();
        let pts = c.sweep_points();
        assert_eq!(pts.len(), 6);
        assert!(pts.iter().all(|p| !p.is_sweep()));
        assert_eq!(pts[5].perturbation.gamma, 4e-4);
        assert_eq!(pts[5].perturbation.seed, 3);
    }

    #[test]
    fn every_schema_key_round_trips_through_the_environment() {
        for key in schema_keys() {
            let var = format!("{ENV_PREFIX}_{}", key.replace('.', "_").to_ascii_uppercase());
            // a wrong-typed value must fail on type, not on the key
            let err = apply_env(RunConfig::default(), [(var.clone(), "{}".into())]);
            if let Err(e) = err {
                assert!(!e.to_string().contains("unknown key"), "{var}: {e}");
            }
        }
    }
}
