//! Run configuration: defaults, a `key = value` file, and flag overrides.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use predmult::formulation::DEFAULT_GAMMA;
use serde::Serialize;

use crate::CliError;

const DESK_BASELINE_SECS: f64 = 60.0;
const DESK_PATH_SECS: f64 = 300.0;
const PAPER_SECS: f64 = 6.0 * 3600.0;

/// Which epsilon values to profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonSpec {
    /// Every multiple of `1/n` up to `min(0.1, 2 * baseline risk)`, plus the
    /// 1% level set.
    Default,
    /// Multiples of `1/n` from 0 to `k/n`.
    Multiples(u64),
    Values(Vec<f64>),
}

impl EpsilonSpec {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let text = text.trim();
        if text == "default" {
            return Ok(EpsilonSpec::Default);
        }
        if let Some(k) = text.strip_prefix("multiples:") {
            return k
                .trim()
                .parse()
                .map(EpsilonSpec::Multiples)
                .map_err(|_| CliError::Input(format!("bad epsilon multiple count `{k}`")));
        }
        text.split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Input(format!("bad epsilon value `{v}`")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(EpsilonSpec::Values)
    }
}

impl fmt::Display for EpsilonSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpsilonSpec::Default => write!(f, "default"),
            EpsilonSpec::Multiples(k) => write!(f, "multiples:{k}"),
            EpsilonSpec::Values(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    /// CSV input. Exactly one of `dataset` and `generator` is set.
    pub dataset: Option<PathBuf>,
    pub generator: Option<String>,
    pub scale: u64,
    pub label_column: String,
    pub group_column: Option<String>,
    /// Feature columns in order; all remaining columns when unset.
    pub feature_columns: Option<Vec<String>>,
    pub split_fraction: f64,
    pub split_seed: u64,
    pub oversample: bool,
    pub gamma: f64,
    pub big_m: Option<f64>,
    pub per_example_big_m: bool,
    pub epsilons: EpsilonSpec,
    pub baseline_time_limit: f64,
    pub disc_time_limit: f64,
    pub flip_time_limit: f64,
    /// Node limit for every branch-and-bound solve.
    pub node_limit: Option<usize>,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub adhoc: bool,
    pub adhoc_alphas: usize,
    pub adhoc_lambdas: usize,
    pub adhoc_seed: u64,
    pub node_log: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            generator: None,
            scale: 1,
            label_column: "label".into(),
            group_column: None,
            feature_columns: None,
            split_fraction: 0.8,
            split_seed: 0,
            oversample: true,
            gamma: DEFAULT_GAMMA,
            big_m: None,
            per_example_big_m: false,
            epsilons: EpsilonSpec::Default,
            baseline_time_limit: DESK_BASELINE_SECS,
            disc_time_limit: DESK_PATH_SECS,
            flip_time_limit: DESK_PATH_SECS,
            node_limit: None,
            workers: 4,
            output_dir: PathBuf::from("predmult-out"),
            adhoc: false,
            adhoc_alphas: 11,
            adhoc_lambdas: 100,
            adhoc_seed: 0,
            node_log: false,
        }
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(CliError::Input(format!("`{key}` expects a boolean, got `{value}`"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Input(format!("`{key}` expects a number, got `{value}`")))
}

fn optional(value: &str) -> Option<&str> {
    match value {
        "" | "none" => None,
        v => Some(v),
    }
}

impl RunConfig {
    /// Reads `key = value` lines over the defaults. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = RunConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Input(format!("{}:{}: expected `key = value`", path.display(), i + 1))
            })?;
            config
                .set(key.trim(), value.trim())
                .map_err(|e| CliError::Input(format!("{}:{}: {e}", path.display(), i + 1)))?;
        }
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "dataset" => self.dataset = optional(value).map(PathBuf::from),
            "generator" => self.generator = optional(value).map(String::from),
            "scale" => self.scale = parse_num(key, value)?,
            "label_column" => self.label_column = value.to_string(),
            "group_column" => self.group_column = optional(value).map(String::from),
            "feature_columns" => {
                self.feature_columns =
                    optional(value).map(|v| v.split(',').map(|c| c.trim().to_string()).collect())
            }
            "split_fraction" => self.split_fraction = parse_num(key, value)?,
            "split_seed" => self.split_seed = parse_num(key, value)?,
            "oversample" => self.oversample = parse_bool(key, value)?,
            "gamma" => self.gamma = parse_num(key, value)?,
            "big_m" => self.big_m = optional(value).map(|v| parse_num(key, v)).transpose()?,
            "per_example_big_m" => self.per_example_big_m = parse_bool(key, value)?,
            "epsilons" => self.epsilons = EpsilonSpec::parse(value)?,
            "baseline_time_limit" => self.baseline_time_limit = parse_num(key, value)?,
            "disc_time_limit" => self.disc_time_limit = parse_num(key, value)?,
            "flip_time_limit" => self.flip_time_limit = parse_num(key, value)?,
            "node_limit" => self.node_limit = optional(value).map(|v| parse_num(key, v)).transpose()?,
            "workers" => self.workers = parse_num(key, value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "adhoc" => self.adhoc = parse_bool(key, value)?,
            "adhoc_alphas" => self.adhoc_alphas = parse_num(key, value)?,
            "adhoc_lambdas" => self.adhoc_lambdas = parse_num(key, value)?,
            "adhoc_seed" => self.adhoc_seed = parse_num(key, value)?,
            "node_log" => self.node_log = parse_bool(key, value)?,
            "preset" => self.apply_preset(value)?,
            _ => return Err(CliError::Input(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// `desk` restores the default time limits; `paper` sets every limit to
    /// six hours.
    pub fn apply_preset(&mut self, name: &str) -> Result<(), CliError> {
        let (baseline, path) = match name {
            "desk" => (DESK_BASELINE_SECS, DESK_PATH_SECS),
            "paper" => (PAPER_SECS, PAPER_SECS),
            _ => return Err(CliError::Input(format!("unknown preset `{name}`"))),
        };
        self.baseline_time_limit = baseline;
        self.disc_time_limit = path;
        self.flip_time_limit = path;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.dataset, &self.generator) {
            (Some(_), Some(_)) => {
                return Err(CliError::Input("set either a dataset or a generator, not both".into()))
            }
            (None, None) => return Err(CliError::Input("no dataset or generator given".into())),
            _ => {}
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(CliError::Input(format!(
                "split fraction must lie in (0, 1), got {}",
                self.split_fraction
            )));
        }
        for (name, v) in [
            ("baseline_time_limit", self.baseline_time_limit),
            ("disc_time_limit", self.disc_time_limit),
            ("flip_time_limit", self.flip_time_limit),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Input(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.gamma > 0.0) {
            return Err(CliError::Input(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.workers == 0 {
            return Err(CliError::Input("workers must be at least 1".into()));
        }
        if self.scale == 0 {
            return Err(CliError::Input("scale must be at least 1".into()));
        }
        if self.adhoc_alphas == 0 || self.adhoc_lambdas == 0 {
            return Err(CliError::Input("ad hoc grid must be nonempty".into()));
        }
        Ok(())
    }

    pub(crate) fn seconds(limit: f64) -> Duration {
        Duration::from_secs_f64(limit)
    }
}
