//! Experiment configuration: schema validation, typed parsing and defaults.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use movwave::observability::EndpointMode;
use movwave::{CoefficientOptions, Geometry64, GeometrySpec, InitialData64, Preset};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const SCHEMA: &str = include_str!("../../../schema/config.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(rename = "N", default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub solve: GridConfig,
    #[serde(default)]
    pub energy_scan: EnergyScanConfig,
    #[serde(default)]
    pub observe: ObserveConfig,
    #[serde(default)]
    pub counterexample: CounterexampleConfig,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub compare_oracle: CompareConfig,
}

fn default_n() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<CsvData>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { preset: Some(Preset::Zero), csv: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvData {
    pub phi0: PathBuf,
    pub phi1: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub coefficients: CoefficientOptions,
    pub energy_nodes: usize,
    pub trace_nodes: usize,
    pub oracle_samples: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { coefficients: CoefficientOptions::default(), energy_nodes: 512, trace_nodes: 512, oracle_samples: 4096 }
    }
}

/// Space-time sampling grid; `t_end` defaults to `3 t0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    pub nt: usize,
    pub nx: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { t_end: None, nt: 64, nx: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyScanConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    pub count: usize,
    pub tolerance: f64,
}

impl Default for EnergyScanConfig {
    fn default() -> Self {
        Self { times: None, t_end: None, count: 20, tolerance: 1e-7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObserveConfig {
    #[serde(rename = "one_endpoint_M")]
    pub one_endpoint_m: Vec<usize>,
    #[serde(rename = "two_endpoint_M")]
    pub two_endpoint_m: Vec<usize>,
    pub tolerance: f64,
}

impl Default for ObserveConfig {
    fn default() -> Self {
        Self { one_endpoint_m: vec![1, 2, 3], two_endpoint_m: vec![1, 2], tolerance: 1e-7 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CounterexampleConfig {
    pub epsilon: f64,
    pub mode: EndpointMode,
    #[serde(rename = "N")]
    pub n: usize,
    pub samples: usize,
    pub tolerance: f64,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self { epsilon: 0.2, mode: EndpointMode::OneEndpoint, n: 1024, samples: 2000, tolerance: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    pub mode: EndpointMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    pub nodes: usize,
    pub control_samples: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub terminal_tolerance: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            mode: EndpointMode::OneEndpoint,
            horizon: None,
            nodes: 512,
            control_samples: 4096,
            tol: 1e-6,
            max_iter: 500,
            terminal_tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    pub nt: usize,
    pub nx: usize,
    pub tolerance: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self { t_end: None, nt: 64, nx: 64, tolerance: 1e-6 }
    }
}

/// A parsed configuration together with the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
}

fn validator() -> &'static jsonschema::Validator {
    static V: OnceLock<jsonschema::Validator> = OnceLock::new();
    V.get_or_init(|| {
        let schema: Value = serde_json::from_str(SCHEMA).expect("bundled schema is valid JSON");
        jsonschema::validator_for(&schema).expect("bundled schema compiles")
    })
}

/// Validates `text` against the bundled schema, then parses it.
pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| CliError::config(format!("invalid JSON: {e}")))?;
    let errors: Vec<String> = validator()
        .iter_errors(&value)
        .map(|e| {
            let at = e.instance_path.to_string();
            format!("{}: {e}", if at.is_empty() { "/" } else { at.as_str() })
        })
        .collect();
    if !errors.is_empty() {
        return Err(CliError::config_details("configuration does not match the schema", errors));
    }
    inject_seed(&mut value);
    serde_json::from_value(value).map_err(|e| CliError::config(e.to_string()))
}

/// Random presets without their own seed take the top-level one.
fn inject_seed(value: &mut Value) {
    let seed = value.get("seed").cloned().unwrap_or(Value::from(0u64));
    if let Some(p) = value.pointer_mut("/data/preset").and_then(Value::as_object_mut) {
        if p.get("kind").and_then(Value::as_str) == Some("random_modes") && !p.contains_key("seed") {
            p.insert("seed".into(), seed);
        }
    }
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let config = parse(&text)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig { config, base_dir })
}

impl LoadedConfig {
    pub fn geometry(&self) -> Result<Geometry64, CliError> {
        Geometry64::from_spec(&self.config.geometry).map_err(|e| CliError::config(e.to_string()))
    }

    pub fn initial_data(&self, g: &Geometry64) -> Result<InitialData64, CliError> {
        match (&self.config.data.preset, &self.config.data.csv) {
            (Some(p), None) => p.build(g).map_err(|e| CliError::config(e.to_string())),
            (None, Some(csv)) => self.csv_data(g, csv),
            _ => Err(CliError::config("data needs exactly one of preset or csv")),
        }
    }

    fn csv_data(&self, g: &Geometry64, csv: &CsvData) -> Result<InitialData64, CliError> {
        let (x0, v0) = read_samples(&self.base_dir.join(&csv.phi0))?;
        let (x1, v1) = read_samples(&self.base_dir.join(&csv.phi1))?;
        if x0 != x1 {
            return Err(CliError::config("phi0 and phi1 samples must share the same x column"));
        }
        InitialData64::from_samples(g, x0, v0, v1).map_err(|e| CliError::config(e.to_string()))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRow {
    x: f64,
    value: f64,
}

fn read_samples(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for row in reader.deserialize::<SampleRow>() {
        let r = row.map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        xs.push(r.x);
        vs.push(r.value);
    }
    Ok((xs, vs))
}
