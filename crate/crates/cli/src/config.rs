//! Resolved run configurations. Each subcommand reads an optional JSON file,
//! applies command-line overrides and echoes the result next to its outputs.

use std::fs;
use std::path::{Path, PathBuf};

use ive_core::audio::{InitStrategy, WavFormat};
use ive_core::sim::Method;
use ive_core::{ExtractionConfig, Mode, Score};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Iteration settings shared by `simulate` and `extract`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub score: String,
    pub score_table: Option<PathBuf>,
    pub max_iters: usize,
    pub conv_tol: f64,
    pub damping: bool,
    pub variance_ratio: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let base = ExtractionConfig::default();
        Self {
            score: "norm-smooth".into(),
            score_table: None,
            max_iters: base.max_iters,
            conv_tol: base.conv_tol,
            damping: base.damping,
            variance_ratio: base.variance_ratio,
        }
    }
}

impl SolverConfig {
    pub fn extraction(&self, mode: Mode, seed: u64) -> CliResult<ExtractionConfig> {
        let score = Score::from_name(&self.score, self.score_table.as_deref())?;
        let cfg = ExtractionConfig {
            max_iters: self.max_iters,
            conv_tol: self.conv_tol,
            mode,
            score,
            seed,
            damping: self.damping,
            variance_ratio: self.variance_ratio,
            ..ExtractionConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub sir_ini_db: f64,
    #[serde(rename = "N_grid")]
    pub n_grid: Option<Vec<usize>>,
    pub sir_ini_grid: Option<Vec<f64>>,
    pub trials: usize,
    pub eps2: f64,
    pub init_radius: f64,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub solver: SolverConfig,
    pub out: Option<PathBuf>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            d: 5,
            k: 1,
            n: 200,
            sir_ini_db: 0.0,
            n_grid: None,
            sir_ini_grid: None,
            trials: 200,
            eps2: 0.5,
            init_radius: 0.5,
            methods: Method::ALL.to_vec(),
            seed: 0,
            solver: SolverConfig::default(),
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractConfig {
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    pub pilot: Option<PathBuf>,
    pub oracle_refs: Option<PathBuf>,
    /// Index of the target among the sorted oracle reference files.
    pub target: usize,
    pub mics: usize,
    pub win: usize,
    pub shift: usize,
    pub init: InitStrategy,
    pub seed: u64,
    pub solver: SolverConfig,
    pub out: Option<PathBuf>,
    pub image_out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub pilot_out: Option<PathBuf>,
    pub format: WavFormat,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            input: None,
            pilot: None,
            oracle_refs: None,
            target: 0,
            mics: 4,
            win: 1000,
            shift: 200,
            init: InitStrategy::Pilot,
            seed: 0,
            solver: SolverConfig::default(),
            out: None,
            image_out: None,
            trace: None,
            pilot_out: None,
            format: WavFormat::Float32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub refs: Vec<PathBuf>,
    pub est: Option<PathBuf>,
    pub target: usize,
    /// Channel of the estimate file that is scored.
    pub channel: usize,
    pub taps: usize,
    pub out: Option<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            refs: Vec::new(),
            est: None,
            target: 0,
            channel: 0,
            taps: ive_core::audio::bss_eval::DEFAULT_TAPS,
            out: None,
        }
    }
}

/// Reads a config file; errors carry the line and column.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::usage(format!(
            "config {}: {e} (line {}, column {})",
            path.display(),
            e.line(),
            e.column()
        ))
    })
}

/// `<out>.config.json`.
pub fn echo_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".config.json");
    PathBuf::from(s)
}

pub fn write_echo<T: Serialize>(out: &Path, cfg: &T) -> CliResult<()> {
    let file = fs::File::create(echo_path(out))?;
    serde_json::to_writer_pretty(file, cfg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let s: SimulateConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(s, SimulateConfig::default());
        let e: ExtractConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(e, ExtractConfig::default());
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = serde_json::from_str::<SimulateConfig>(r#"{"trails": 3}"#).unwrap_err();
        assert!(err.to_string().contains("trails"));
    }

    #[test]
    fn round_trips() {
        let mut s = SimulateConfig::default();
        s.n_grid = Some(vec![10, 20]);
        s.methods = vec![Method::FastIca];
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<SimulateConfig>(&text).unwrap(), s);
    }

    #[test]
    fn echo_path_appends() {
        assert_eq!(
            echo_path(Path::new("a/curve.csv")),
            PathBuf::from("a/curve.csv.config.json")
        );
    }
}
