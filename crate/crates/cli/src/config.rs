//! Run configuration: a TOML file (or the `config` block of a previous
//! run's `summary.json`), overridden by command-line flags.

use crate::error::CliError;
use raceline::baseline::Method;
use raceline::bayesopt::OptConfig;
use raceline::lap::DEFAULT_RESAMPLE;
use raceline::speed::VehicleParams;
use raceline::track::{DEFAULT_CORNER_WEIGHT, MAX_NODES, MIN_NODES};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub methods: Vec<Method>,
    pub runs: usize,
    /// Lap-time evaluations per run, initialization included.
    pub evaluations: usize,
    pub identical_seeds: bool,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            methods: Method::ALL.to_vec(),
            runs: 10,
            evaluations: 50,
            identical_seeds: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Track CSV. Relative paths in a config file resolve against the
    /// file's directory.
    pub track: PathBuf,
    pub nodes: usize,
    /// Points of the resampled trajectory.
    pub resample: usize,
    /// Extra node density per unit of `|curvature| * track length`.
    pub corner_weight: f64,
    pub out: PathBuf,
    /// Worker threads; 1 runs everything on the calling thread.
    pub jobs: Option<usize>,
    pub vehicle: VehicleParams,
    pub optimizer: OptConfig,
    pub compare: CompareConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            track: PathBuf::new(),
            nodes: 20,
            resample: DEFAULT_RESAMPLE,
            corner_weight: DEFAULT_CORNER_WEIGHT,
            out: PathBuf::from("out"),
            jobs: None,
            vehicle: VehicleParams::default(),
            optimizer: OptConfig::default(),
            compare: CompareConfig::default(),
        }
    }
}

/// Command-line values that win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub track: Option<PathBuf>,
    pub nodes: Option<usize>,
    pub budget: Option<usize>,
    pub seed: Option<u64>,
    pub acquisition: Option<String>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub methods: Option<String>,
    pub runs: Option<usize>,
    pub evaluations: Option<usize>,
}

#[derive(Deserialize)]
struct SummaryFile {
    config: RunConfig,
}

impl RunConfig {
    /// Reads a TOML config, or a JSON summary whose `config` block is used.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut cfg = if is_json {
            serde_json::from_str::<SummaryFile>(&text)
                .map(|s| s.config)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str::<RunConfig>(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        };
        if cfg.track.is_relative() && !cfg.track.as_os_str().is_empty() {
            if let Some(dir) = path.parent() {
                cfg.track = dir.join(&cfg.track);
            }
        }
        Ok(cfg)
    }

    pub fn load(file: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match file {
            Some(p) => Self::from_file(p)?,
            None => RunConfig::default(),
        };
        cfg.apply(overrides)?;
        cfg.validate()?;
        // Stored absolute so a summary.json echo works from any directory.
        if let Ok(abs) = std::fs::canonicalize(&cfg.track) {
            cfg.track = abs;
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(t) = &o.track {
            self.track = t.clone();
        }
        if let Some(n) = o.nodes {
            self.nodes = n;
        }
        if let Some(b) = o.budget {
            self.optimizer.budget = b;
        }
        if let Some(s) = o.seed {
            self.optimizer.rng_seed = s;
        }
        if let Some(a) = &o.acquisition {
            self.optimizer.acquisition = a.parse().map_err(|e: raceline::Error| CliError::Config(e.to_string()))?;
        }
        if let Some(j) = o.jobs {
            self.jobs = Some(j);
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let Some(m) = &o.methods {
            self.compare.methods = parse_methods(m)?;
        }
        if let Some(r) = o.runs {
            self.compare.runs = r;
        }
        if let Some(e) = o.evaluations {
            self.compare.evaluations = e;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.track.as_os_str().is_empty() {
            return Err(CliError::Config("no track given (use --track or `track` in the config)".into()));
        }
        if !self.track.is_file() {
            return Err(CliError::Config(format!("track file {} does not exist", self.track.display())));
        }
        if !(MIN_NODES..=MAX_NODES).contains(&self.nodes) {
            return Err(CliError::Config(format!(
                "nodes must be in [{MIN_NODES}, {MAX_NODES}], got {}",
                self.nodes
            )));
        }
        if self.jobs == Some(0) {
            return Err(CliError::Config("jobs must be at least 1".into()));
        }
        self.vehicle.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.optimizer.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }
}

/// Comma-separated method names, or `all`.
pub fn parse_methods(list: &str) -> Result<Vec<Method>, CliError> {
    if list.trim().eq_ignore_ascii_case("all") {
        return Ok(Method::ALL.to_vec());
    }
    let mut methods = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let m: Method = name.parse().map_err(|e: raceline::Error| CliError::Usage(e.to_string()))?;
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    if methods.is_empty() {
        return Err(CliError::Usage("no methods given (valid: random, ei, nei)".into()));
    }
    Ok(methods)
}
