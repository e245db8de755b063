//! Experiment configuration: one JSON file per run.

use std::fmt;
use std::path::{Path, PathBuf};

use np_spectra_core::{BoundaryGeometry, DiagonalRule, GeometrySpec};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometrySpec>,
    /// Geometry spec file, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry_file: Option<PathBuf>,
    pub grid_sizes: Vec<GridSize>,
    #[serde(default = "default_rule")]
    pub diagonal_rule: DiagonalRule,
    #[serde(default)]
    pub operator: OperatorChoice,
    pub operations: Vec<Operation>,
    #[serde(default)]
    pub probes: ProbeParams,
    /// Relative to the config file; `--output-dir` overrides it.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_rule() -> DiagonalRule {
    DiagonalRule::RowSum
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

/// `N` for curves, `[n_theta, n_phi]` for surfaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSize {
    Curve(usize),
    Surface([usize; 2]),
}

impl GridSize {
    pub fn nodes(&self) -> usize {
        match self {
            GridSize::Curve(n) => *n,
            GridSize::Surface([a, b]) => a * b,
        }
    }

    pub fn parts(&self) -> (usize, Option<usize>) {
        match self {
            GridSize::Curve(n) => (*n, None),
            GridSize::Surface([a, b]) => (*a, Some(*b)),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorChoice {
    #[default]
    NpStar,
    Np,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Spectrum,
    Decay,
    Probes,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_singularity: Option<PairParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convolution_bound: Option<ConvolutionParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holder_difference: Option<HolderParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sobolev_seminorm: Option<SobolevParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tangential_derivatives: Option<TangentialParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<SmoothingParams>,
}

impl ProbeParams {
    pub fn is_empty(&self) -> bool {
        *self == ProbeParams::default()
    }
}

fn default_pairs() -> usize {
    16
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairParams {
    #[serde(default = "default_pairs")]
    pub pair_sample: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvolutionParams {
    pub alpha: f64,
    pub beta: f64,
    #[serde(default = "default_separations")]
    pub pair_sample: usize,
}

fn default_separations() -> usize {
    12
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderParams {
    #[serde(default = "default_orders")]
    pub n: Vec<u32>,
    #[serde(default = "default_triples")]
    pub triple_sample: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_orders() -> Vec<u32> {
    vec![1]
}

fn default_triples() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SobolevParams {
    #[serde(default = "default_order")]
    pub n: u32,
    pub nu: Vec<f64>,
}

fn default_order() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TangentialParams {
    pub l: Vec<usize>,
    #[serde(default = "default_pairs")]
    pub pair_sample: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingParams {
    #[serde(default)]
    pub s: f64,
    #[serde(default = "default_source_decay")]
    pub source_decay: f64,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_source_decay() -> f64 {
    1.0
}

/// A config problem pinned to a position in the file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub file: PathBuf,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {}", self.file.display(), self.line, self.column, self.message)
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line and column of the first `"key"` in `text`, or (1, 1).
pub fn locate(text: &str, key: &str) -> (usize, usize) {
    let needle = format!("\"{key}\"");
    match text.find(&needle) {
        Some(pos) => {
            let before = &text[..pos];
            let line = before.matches('\n').count() + 1;
            let column = pos - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
            (line, column)
        }
        None => (1, 1),
    }
}

/// A validated config together with its source text and location.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub text: String,
    pub path: PathBuf,
}

impl LoadedConfig {
    pub fn error_at(&self, key: &str, message: impl Into<String>) -> ConfigError {
        let (line, column) = locate(&self.text, key);
        ConfigError { file: self.path.clone(), line, column, message: message.into() }
    }

    pub fn base_dir(&self) -> &Path {
        self.path.parent().unwrap_or(Path::new("."))
    }

    pub fn wants(&self, op: Operation) -> bool {
        self.config.operations.iter().any(|o| *o == op || *o == Operation::All)
    }

    /// Geometry spec, reading `geometry_file` if that is what the config names.
    pub fn geometry_spec(&self) -> Result<GeometrySpec, ConfigError> {
        match (&self.config.geometry, &self.config.geometry_file) {
            (Some(spec), None) => Ok(spec.clone()),
            (None, Some(file)) => {
                let path = self.base_dir().join(file);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| self.error_at("geometry_file", format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| ConfigError {
                    file: path.clone(),
                    line: e.line(),
                    column: e.column(),
                    message: e.to_string(),
                })
            }
            (Some(_), Some(_)) => Err(self.error_at("geometry_file", "give either `geometry` or `geometry_file`, not both")),
            (None, None) => Err(self.error_at("grid_sizes", "missing `geometry` or `geometry_file`")),
        }
    }

    pub fn build_geometry(&self) -> Result<BoundaryGeometry, ConfigError> {
        let spec = self.geometry_spec()?;
        let key = if self.config.geometry.is_some() { "geometry" } else { "geometry_file" };
        spec.build().map_err(|e| self.error_at(key, e.to_string()))
    }
}

pub fn parse(text: &str, path: &Path) -> Result<LoadedConfig, ConfigError> {
    let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| ConfigError {
        file: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let loaded = LoadedConfig { config, text: text.to_string(), path: path.to_path_buf() };
    validate(&loaded)?;
    Ok(loaded)
}

pub fn load(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        file: path.to_path_buf(),
        line: 1,
        column: 1,
        message: format!("cannot read config: {e}"),
    })?;
    parse(&text, path)
}

fn validate(l: &LoadedConfig) -> Result<(), ConfigError> {
    let c = &l.config;
    if c.grid_sizes.is_empty() {
        return Err(l.error_at("grid_sizes", "`grid_sizes` must list at least one size"));
    }
    let curve = matches!(c.grid_sizes[0], GridSize::Curve(_));
    for g in &c.grid_sizes {
        if matches!(g, GridSize::Curve(_)) != curve {
            return Err(l.error_at("grid_sizes", "`grid_sizes` mixes curve and surface sizes"));
        }
        let (a, b) = g.parts();
        if a < 2 || b.is_some_and(|b| b < 2) {
            return Err(l.error_at("grid_sizes", format!("grid size {g:?} is too small")));
        }
    }
    for w in c.grid_sizes.windows(2) {
        if w[1].nodes() <= w[0].nodes() {
            return Err(l.error_at("grid_sizes", "`grid_sizes` must be strictly increasing"));
        }
    }
    if c.operations.is_empty() {
        return Err(l.error_at("operations", "`operations` must not be empty"));
    }
    if c.formats.is_empty() {
        return Err(l.error_at("formats", "`formats` must not be empty"));
    }
    let spec = l.geometry_spec()?;
    let surface_geometry = matches!(
        spec.kind,
        np_spectra_core::geometry::GeometryKind::PerturbedSphere | np_spectra_core::geometry::GeometryKind::WeierstrassSphere
    );
    if surface_geometry == curve {
        let want = if surface_geometry { "[n_theta, n_phi] pairs" } else { "integers" };
        return Err(l.error_at("grid_sizes", format!("this geometry needs grid sizes given as {want}")));
    }
    if l.wants(Operation::Probes) {
        let p = &c.probes;
        if p.is_empty() {
            return Err(l.error_at("operations", "probes requested but no probe is configured under `probes`"));
        }
        if p.holder_difference.as_ref().is_some_and(|h| h.seed.is_none()) {
            return Err(l.error_at("holder_difference", "sampling probe `holder_difference` needs a `seed`"));
        }
        if p.smoothing.as_ref().is_some_and(|s| s.seed.is_none()) {
            return Err(l.error_at("smoothing", "sampling probe `smoothing` needs a `seed`"));
        }
        if p.sobolev_seminorm.as_ref().is_some_and(|s| s.nu.is_empty()) {
            return Err(l.error_at("sobolev_seminorm", "`nu` must list at least one value"));
        }
        if p.tangential_derivatives.as_ref().is_some_and(|t| t.l.is_empty()) {
            return Err(l.error_at("tangential_derivatives", "`l` must list at least one order"));
        }
        if p.holder_difference.as_ref().is_some_and(|h| h.n.is_empty()) {
            return Err(l.error_at("holder_difference", "`n` must list at least one order"));
        }
    }
    Ok(())
}
