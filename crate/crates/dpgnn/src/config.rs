//! Run configuration: defaults, flat key-value config files, command-line
//! overrides, and content hashing for run directories.
//!
//! Precedence is defaults < config file < command-line flags. The config
//! file is a flat `key = value` document (a TOML table without sections);
//! unknown keys are rejected with their names.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::loss::LossWeights;
use crate::model::FirstLayerTransform;
use crate::train::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Unreadable { path: String, message: String },
    #[error("config {path}: {message}")]
    BadToml { path: String, message: String },
    #[error("config field {field}: {message}")]
    BadField { field: String, message: String },
    #[error("config has unknown key {key}")]
    UnknownKey { key: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn as_str(&self) -> &'static str {
        match self {
            Precision::F32 => "32",
            Precision::F64 => "64",
        }
    }
}

/// Fully resolved settings for one command invocation. Unset fields take the
/// protocol defaults: 5 layers, 300 epochs, batch 32, no dropout anywhere.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dataset_root: PathBuf,
    pub name: String,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub precision: Precision,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden: usize,
    pub lr: f64,
    pub layers: usize,
    pub first_tf: FirstLayerTransform,
    pub lambdas: [f64; 4],
    pub folds: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset_root: PathBuf::from("data"),
            name: String::from("MUTAG"),
            out_dir: PathBuf::from("runs"),
            workers: 0,
            precision: Precision::F32,
            seed: 0,
            epochs: 300,
            batch_size: 32,
            hidden: 32,
            lr: 0.01,
            layers: 5,
            first_tf: FirstLayerTransform::Identical,
            lambdas: [0.0; 4],
            folds: 10,
        }
    }
}

/// Optional per-field overrides collected from command-line flags.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub dataset_root: Option<PathBuf>,
    pub name: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub precision: Option<Precision>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub hidden: Option<usize>,
    pub lr: Option<f64>,
    pub layers: Option<usize>,
    pub first_tf: Option<FirstLayerTransform>,
    pub lambda2: Option<f64>,
    pub lambda3: Option<f64>,
    pub lambda4: Option<f64>,
    pub lambda5: Option<f64>,
    pub folds: Option<usize>,
}

impl RunConfig {
    /// defaults <- config file <- flags.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            cfg.apply_file(path)?;
        }
        cfg.apply_overrides(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::BadToml {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        for (key, value) in table {
            self.apply_key(&key, &value)?;
        }
        Ok(())
    }

    fn apply_key(&mut self, key: &str, value: &toml::Value) -> Result<(), ConfigError> {
        let bad = |message: String| ConfigError::BadField {
            field: key.to_string(),
            message,
        };
        let as_usize = |v: &toml::Value| {
            v.as_integer()
                .filter(|&i| i >= 0)
                .map(|i| i as usize)
                .ok_or_else(|| bad(format!("expected a non-negative integer, got {v}")))
        };
        let as_f64 = |v: &toml::Value| {
            v.as_float()
                .or_else(|| v.as_integer().map(|i| i as f64))
                .ok_or_else(|| bad(format!("expected a number, got {v}")))
        };
        let as_str = |v: &toml::Value| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| bad(format!("expected a string, got {v}")))
        };
        match key {
            "dataset" => self.dataset_root = PathBuf::from(as_str(value)?),
            "name" => self.name = as_str(value)?,
            "out" => self.out_dir = PathBuf::from(as_str(value)?),
            "workers" => self.workers = as_usize(value)?,
            "precision" => {
                self.precision = match as_usize(value)? {
                    32 => Precision::F32,
                    64 => Precision::F64,
                    other => return Err(bad(format!("expected 32 or 64, got {other}"))),
                }
            }
            "seed" => {
                self.seed = value
                    .as_integer()
                    .filter(|&i| i >= 0)
                    .map(|i| i as u64)
                    .ok_or_else(|| bad("expected a non-negative integer".into()))?
            }
            "epochs" => self.epochs = as_usize(value)?,
            "batch" => self.batch_size = as_usize(value)?,
            "hidden" => self.hidden = as_usize(value)?,
            "lr" => self.lr = as_f64(value)?,
            "layers" => self.layers = as_usize(value)?,
            "first_tf" => {
                self.first_tf = FirstLayerTransform::parse(&as_str(value)?)
                    .ok_or_else(|| bad("expected \"identical\" or \"mlp\"".into()))?
            }
            "lambda2" => self.lambdas[0] = as_f64(value)?,
            "lambda3" => self.lambdas[1] = as_f64(value)?,
            "lambda4" => self.lambdas[2] = as_f64(value)?,
            "lambda5" => self.lambdas[3] = as_f64(value)?,
            "folds" => self.folds = as_usize(value)?,
            other => {
                return Err(ConfigError::UnknownKey {
                    key: other.to_string(),
                })
            }
        }
        Ok(())
    }

    fn apply_overrides(&mut self, o: &Overrides) {
        macro_rules! take {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = o.$field.clone() { $target = v; })*
            };
        }
        take! {
            dataset_root => self.dataset_root,
            name => self.name,
            out_dir => self.out_dir,
            workers => self.workers,
            precision => self.precision,
            seed => self.seed,
            epochs => self.epochs,
            batch_size => self.batch_size,
            hidden => self.hidden,
            lr => self.lr,
            layers => self.layers,
            first_tf => self.first_tf,
            lambda2 => self.lambdas[0],
            lambda3 => self.lambdas[1],
            lambda4 => self.lambdas[2],
            lambda5 => self.lambdas[3],
            folds => self.folds,
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field: &str, message: String| {
            Err(ConfigError::BadField {
                field: field.to_string(),
                message,
            })
        };
        if self.name.is_empty() {
            return bad("name", "must not be empty".into());
        }
        if self.epochs == 0 {
            return bad("epochs", "must be >= 1".into());
        }
        if self.batch_size < 2 {
            return bad("batch", "must be >= 2 (batch norm)".into());
        }
        if self.hidden == 0 {
            return bad("hidden", "must be >= 1".into());
        }
        if !(self.lr > 0.0) {
            return bad("lr", format!("must be positive, got {}", self.lr));
        }
        if self.layers == 0 {
            return bad("layers", "must be >= 1".into());
        }
        if self.folds < 2 {
            return bad("folds", "must be >= 2".into());
        }
        if self.lambdas.iter().any(|&l| l < 0.0) {
            return bad("lambda", "weights must be non-negative".into());
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            initial_lr: self.lr,
            lr_decay_factor: 0.5,
            lr_decay_period: 50,
            seed: self.seed,
            weights: LossWeights::from_array(self.lambdas),
            num_layers: self.layers,
            hidden_dim: self.hidden,
            first_layer_transform: self.first_tf,
        }
    }

    /// Canonical `key = value` echo of every field, written into each output
    /// artifact so results are reproducible from their own files.
    pub fn echo(&self) -> String {
        let mut pairs: BTreeMap<&str, String> = BTreeMap::new();
        pairs.insert("dataset", self.dataset_root.display().to_string());
        pairs.insert("name", self.name.clone());
        pairs.insert("out", self.out_dir.display().to_string());
        pairs.insert("workers", self.workers.to_string());
        pairs.insert("precision", self.precision.as_str().to_string());
        pairs.insert("seed", self.seed.to_string());
        pairs.insert("epochs", self.epochs.to_string());
        pairs.insert("batch", self.batch_size.to_string());
        pairs.insert("hidden", self.hidden.to_string());
        pairs.insert("lr", self.lr.to_string());
        pairs.insert("layers", self.layers.to_string());
        pairs.insert("first_tf", self.first_tf.as_str().to_string());
        pairs.insert("lambda2", self.lambdas[0].to_string());
        pairs.insert("lambda3", self.lambdas[1].to_string());
        pairs.insert("lambda4", self.lambdas[2].to_string());
        pairs.insert("lambda5", self.lambdas[3].to_string());
        pairs.insert("folds", self.folds.to_string());
        let mut out = String::new();
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Short hex hash over the result-determining fields (dataset name, seed,
    /// schedule, architecture, weights, folds, precision — not paths or
    /// worker counts), used to name run directories.
    pub fn content_hash(&self) -> String {
        let identity = format!(
            "name={};seed={};epochs={};batch={};hidden={};lr={};layers={};tf={};lambdas={:?};folds={};precision={}",
            self.name,
            self.seed,
            self.epochs,
            self.batch_size,
            self.hidden,
            self.lr,
            self.layers,
            self.first_tf.as_str(),
            self.lambdas,
            self.folds,
            self.precision.as_str(),
        );
        let digest = Sha256::digest(identity.as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    /// Directory all artifacts of this run land in.
    pub fn run_dir(&self) -> PathBuf {
        self.out_dir.join(self.content_hash())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_match_protocol() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.epochs, 300);
        assert_eq!(cfg.batch_size, 32);
        assert_eq!(cfg.layers, 5);
        assert_eq!(cfg.folds, 10);
    }

    #[test]
    fn file_then_flags_precedence() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "hidden = 64\nlr = 0.001\nname = \"PTC\"").unwrap();
        let overrides = Overrides {
            lr: Some(0.01),
            ..Overrides::default()
        };
        let cfg = RunConfig::resolve(Some(file.path()), &overrides).unwrap();
        assert_eq!(cfg.hidden, 64); // from file
        assert_eq!(cfg.lr, 0.01); // flag wins
        assert_eq!(cfg.name, "PTC");
    }

    #[test]
    fn unknown_key_is_named() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "hiden = 64").unwrap();
        match RunConfig::resolve(Some(file.path()), &Overrides::default()) {
            Err(ConfigError::UnknownKey { key }) => assert_eq!(key, "hiden"),
            other => panic!("expected UnknownKey, got {other:?}"),
        }
    }

    #[test]
    fn validation_names_fields() {
        let overrides = Overrides {
            batch_size: Some(1),
            ..Overrides::default()
        };
        match RunConfig::resolve(None, &overrides) {
            Err(ConfigError::BadField { field, .. }) => assert_eq!(field, "batch"),
            other => panic!("expected BadField, got {other:?}"),
        }
    }

    #[test]
    fn hash_ignores_paths_but_not_science() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.out_dir = PathBuf::from("elsewhere");
        b.workers = 7;
        assert_eq!(a.content_hash(), b.content_hash());
        let mut c = a.clone();
        c.seed = 1;
        assert_ne!(a.content_hash(), c.content_hash());
    }

    #[test]
    fn echo_contains_every_field() {
        let echo = RunConfig::default().echo();
        for key in [
            "dataset", "name", "out", "workers", "precision", "seed", "epochs", "batch",
            "hidden", "lr", "layers", "first_tf", "lambda2", "lambda3", "lambda4", "lambda5",
            "folds",
        ] {
            assert!(echo.contains(&format!("{key} = ")), "missing {key}");
        }
    }
}
