//! Layered run configuration: built-in defaults, then a preset, then a
//! config file, then `--set key=value` overrides, then command flags.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::{Table, Value};

use crate::CliError;

const DESK: &str = include_str!("../../../presets/desk.toml");
const PAPER: &str = include_str!("../../../presets/paper.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Desk,
    Paper,
}

impl Preset {
    pub fn source(self) -> &'static str {
        match self {
            Preset::Desk => DESK,
            Preset::Paper => PAPER,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub boundaries: BoundaryConfig,
    pub dataset: DatasetConfig,
    pub solve: SolveConfig,
    pub train: TrainSection,
    pub eval: EvalConfig,
    pub field: FieldConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            boundaries: BoundaryConfig::default(),
            dataset: DatasetConfig::default(),
            solve: SolveConfig::default(),
            train: TrainSection::default(),
            eval: EvalConfig::default(),
            field: FieldConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryConfig {
    pub count: usize,
    pub order: usize,
    pub rhos: Vec<f64>,
    pub curvature_cap: f64,
    /// Abort threshold on the cumulative acceptance rate.
    pub min_acceptance: f64,
    pub file: PathBuf,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        Self {
            count: 5998,
            order: 20,
            rhos: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            curvature_cap: 10.0,
            min_acceptance: 0.01,
            file: PathBuf::from("boundaries.bieb"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub problem: String,
    pub boundary_file: Option<PathBuf>,
    pub file: PathBuf,
    /// Optional CSV export next to the binary file.
    pub csv: Option<PathBuf>,
    pub order: usize,
    pub quadrature: usize,
    pub densities: usize,
    pub decay: f64,
    pub v0_min: f64,
    pub v0_max: f64,
    pub v0_count: usize,
    pub shear_modulus: f64,
    pub poisson: f64,
    pub field_count: usize,
    pub k_min: f64,
    pub k_max: f64,
    pub k_count: usize,
    pub direction: [f64; 2],
    pub helmholtz_order: usize,
    /// Evenly strided subset of the boundary file used for Helmholtz.
    pub helmholtz_boundaries: Option<usize>,
    pub helmholtz_quadrature: Option<usize>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            problem: "IDP".into(),
            boundary_file: None,
            file: PathBuf::from("dataset.bied"),
            csv: None,
            order: 20,
            quadrature: 512,
            densities: 200,
            decay: 5.0,
            v0_min: 1.0,
            v0_max: 10.0,
            v0_count: 200,
            shear_modulus: 1.0,
            poisson: 0.3,
            field_count: 200,
            k_min: 40.0,
            k_max: 50.0,
            k_count: 100,
            direction: [1.0, 0.0],
            helmholtz_order: 300,
            helmholtz_boundaries: None,
            helmholtz_quadrature: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub problem: String,
    /// `circle`, `ellipse`, `kite` or `file`.
    pub shape: String,
    pub radius: f64,
    pub axes: [f64; 2],
    pub boundary_index: usize,
    pub order: usize,
    pub quadrature: Option<usize>,
    pub f_const: f64,
    pub f_cos: Vec<f64>,
    pub f_sin: Vec<f64>,
    pub v0: f64,
    pub k: f64,
    pub direction: [f64; 2],
    pub shear_modulus: f64,
    pub poisson: f64,
    /// `(a₁, b₁, a₂, b₂)` of the linear displacement `v = (a₁x + b₁y, a₂x + b₂y)`.
    pub displacement: [f64; 4],
    pub cross_check: bool,
    pub nystrom_quadrature: usize,
    pub output: PathBuf,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            problem: "IDP".into(),
            shape: "circle".into(),
            radius: 1.0,
            axes: [2.0, 1.0],
            boundary_index: 0,
            order: 20,
            quadrature: None,
            f_const: 0.0,
            f_cos: vec![1.0],
            f_sin: vec![],
            v0: 1.0,
            k: 5.0,
            direction: [1.0, 0.0],
            shear_modulus: 1.0,
            poisson: 0.3,
            displacement: [1.0, 0.0, 0.0, 0.0],
            cross_check: false,
            nystrom_quadrature: 512,
            output: PathBuf::from("density.csv"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    /// `tdonet` or `deeponet`.
    pub model: String,
    pub dataset: Option<PathBuf>,
    pub hidden: Vec<usize>,
    /// TDONet latent rank; defaults to the density length.
    pub rank: Option<usize>,
    /// DeepONet latent width.
    pub latent: usize,
    /// DeepONet sample points.
    pub points: usize,
    pub output_scale: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr0: f64,
    /// `plateau`, `staircase`, `constant` or `auto` (plateau for TDONet,
    /// staircase for DeepONet).
    pub schedule: String,
    pub decay_fraction: f64,
    pub decay_factor: f64,
    pub train_fraction: f64,
    pub checkpoint: PathBuf,
    pub log: PathBuf,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            model: "tdonet".into(),
            dataset: None,
            hidden: vec![300, 300, 300, 300],
            rank: None,
            latent: 300,
            points: 128,
            output_scale: 1.0,
            batch_size: 8192,
            epochs: 5000,
            lr0: 1e-3,
            schedule: "auto".into(),
            decay_fraction: 0.01,
            decay_factor: 0.5,
            train_fraction: 0.8,
            checkpoint: PathBuf::from("model.biop"),
            log: PathBuf::from("train_log.csv"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub checkpoint: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    /// `test` (the training split's held-out part) or `all`.
    pub split: String,
    pub table: PathBuf,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            checkpoint: None,
            dataset: None,
            split: "test".into(),
            table: PathBuf::from("metrics.csv"),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldConfig {
    pub dataset: Option<PathBuf>,
    pub record: usize,
    /// Model whose predicted density is compared with the stored one;
    /// without it the stored density is evaluated against itself.
    pub checkpoint: Option<PathBuf>,
    pub nx: usize,
    pub ny: usize,
    pub margin: f64,
    pub clearance: f64,
    pub quadrature: usize,
    pub prefix: String,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            record: 0,
            checkpoint: None,
            nx: 100,
            ny: 100,
            margin: 1.0,
            clearance: 0.1,
            quadrature: 1024,
            prefix: "field".into(),
        }
    }
}

impl RunConfig {
    /// Resolves a file name against the output directory.
    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out.join(p)
        }
    }

    /// Independent seed for one consumer of randomness.
    pub fn stream_seed(&self, stream: u64) -> u64 {
        self.seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15)
    }
}

fn parse_toml(src: &str, origin: &str) -> Result<Table, CliError> {
    src.parse::<Table>()
        .map_err(|e| CliError::Config(format!("{origin}: {e}")))
}

/// Recursive merge; tables merge key by key, everything else is replaced.
fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Sets `a.b.c = value`, creating intermediate tables.
pub fn set_path(root: &mut Table, key: &str, value: Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad key '{key}'")));
    }
    let mut t = root;
    for p in &parts[..parts.len() - 1] {
        let entry = t
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        t = match entry {
            Value::Table(t) => t,
            _ => return Err(CliError::Config(format!("'{p}' in '{key}' is not a table"))),
        };
    }
    t.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Parses one `key=value` override; the value is TOML, with bare words
/// taken as strings.
pub fn parse_assignment(s: &str) -> Result<(String, Value), CliError> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{s}' is not key=value")))?;
    let k = k.trim().to_string();
    let v = v.trim();
    let value = match format!("x = {v}").parse::<Table>() {
        Ok(mut t) => t.remove("x").expect("parsed key"),
        Err(_) => Value::String(v.to_string()),
    };
    Ok((k, value))
}

pub struct Layers<'a> {
    pub preset: Option<Preset>,
    pub config: Option<&'a Path>,
    pub sets: &'a [String],
    pub flags: Vec<(String, Value)>,
}

pub fn load(layers: Layers<'_>) -> Result<RunConfig, CliError> {
    let mut root = Table::new();
    if let Some(p) = layers.preset {
        merge(&mut root, parse_toml(p.source(), "preset")?);
    }
    if let Some(path) = layers.config {
        let src = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        merge(&mut root, parse_toml(&src, &path.display().to_string())?);
    }
    for s in layers.sets {
        let (k, v) = parse_assignment(s)?;
        set_path(&mut root, &k, v)?;
    }
    for (k, v) in layers.flags {
        set_path(&mut root, &k, v)?;
    }
    RunConfig::deserialize(Value::Table(root)).map_err(|e| CliError::Config(e.to_string()))
}
