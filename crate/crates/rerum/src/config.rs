//! Run configuration: a JSON document with every field defaulted except
//! input paths, plus dotted command-line overrides such as
//! `--train.batch_size 128`.

use std::path::{Path, PathBuf};

use rerum_core::data::{SchemaSpec, SplitFractions};
use rerum_core::hillstrom::HillstromArm;
use rerum_core::metrics::MetricOptions;
use rerum_core::model::ModelConfig;
use rerum_core::synthetic::SyntheticConfig;
use rerum_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::io::{read_json, require_exists};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    /// Delimited input file. Without one, data is drawn from `synthetic`.
    pub csv: Option<PathBuf>,
    /// Column roles, inline.
    pub schema: Option<SchemaSpec>,
    /// Column roles, as a separate JSON file.
    pub schema_file: Option<PathBuf>,
    /// Treat `csv` as the raw Hillstrom export and keep this arm.
    pub hillstrom_arm: Option<HillstromArm>,
    pub synthetic: SyntheticConfig,
    /// Seed of the synthetic draw; defaults to the training seed.
    pub synthetic_seed: Option<u64>,
    pub split: SplitFractions,
    /// Seed of the train/validation/test shuffle; defaults to the training seed.
    pub split_seed: Option<u64>,
    /// Scale numeric features with statistics of the training split.
    pub standardize: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            csv: None,
            schema: None,
            schema_file: None,
            hillstrom_arm: None,
            synthetic: SyntheticConfig::default(),
            synthetic_seed: None,
            split: SplitFractions::default(),
            split_seed: None,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSplit {
    Train,
    Validation,
    #[default]
    Test,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub checkpoint: Option<PathBuf>,
    pub split: EvalSplit,
    pub buckets: usize,
    /// Targeted percentage for LIFT@h.
    pub lift_h: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let m = MetricOptions::default();
        Self { checkpoint: None, split: EvalSplit::default(), buckets: m.buckets, lift_h: m.lift_h }
    }
}

impl EvalConfig {
    pub fn metrics(&self) -> MetricOptions {
        MetricOptions { buckets: self.buckets, lift_h: self.lift_h }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub overwrite: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("rerum-out"), overwrite: false }
    }
}

impl RunConfig {
    /// Read `file` (or start from defaults) and apply `overrides`, each a
    /// dotted path and a raw value. Unknown paths are rejected.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
        let base: Value = match file {
            Some(path) => read_json(path)?,
            None => Value::Object(Default::default()),
        };
        let config: RunConfig = serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))?;
        if overrides.is_empty() {
            return Ok(config);
        }
        let mut tree = serde_json::to_value(&config).map_err(|e| Error::Config(e.to_string()))?;
        for (path, raw) in overrides {
            set_path(&mut tree, path, raw)?;
        }
        serde_json::from_value(tree).map_err(|e| Error::Config(format!("after overrides: {e}")))
    }

    pub fn data_seed(&self) -> u64 {
        self.data.synthetic_seed.unwrap_or(self.train.seed)
    }

    pub fn split_seed(&self) -> u64 {
        self.data.split_seed.unwrap_or(self.train.seed)
    }

    /// Checks shared by every command that reads a dataset.
    pub fn validate_data(&self) -> Result<()> {
        if let Some(path) = &self.data.csv {
            require_exists(path)?;
            if let Some(schema) = &self.data.schema_file {
                require_exists(schema)?;
            }
            if self.data.schema.is_none() && self.data.schema_file.is_none() && self.data.hillstrom_arm.is_none() {
                return Err(Error::Config(
                    "data.csv needs data.schema, data.schema_file or data.hillstrom_arm".into(),
                ));
            }
        } else {
            self.data.synthetic.validate()?;
        }
        self.data.split.validate()?;
        Ok(())
    }

    pub fn validate_training(&self) -> Result<()> {
        self.validate_data()?;
        self.model.validate()?;
        self.train.validate()?;
        Ok(())
    }

    pub fn validate_eval(&self) -> Result<()> {
        self.validate_data()?;
        match &self.eval.checkpoint {
            Some(path) => require_exists(path)?,
            None => return Err(Error::Config("eval.checkpoint (or --checkpoint) is required".into())),
        }
        if self.eval.buckets == 0 {
            return Err(Error::Config("eval.buckets must be positive".into()));
        }
        if !(self.eval.lift_h > 0.0 && self.eval.lift_h <= 100.0) {
            return Err(Error::Config(format!("eval.lift_h must be in (0, 100], got {}", self.eval.lift_h)));
        }
        Ok(())
    }
}

/// Replace the value at a dotted `path`. The raw text is parsed as JSON
/// unless the current value is a string, so `--data.csv 2024.csv` stays a
/// path and `--train.seed 3` becomes a number.
fn set_path(tree: &mut Value, path: &str, raw: &str) -> Result<()> {
    let unknown = || Error::Config(format!("unknown option --{path}"));
    let mut node = tree;
    for key in path.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(key).ok_or_else(unknown)?,
            Value::Array(items) => key.parse::<usize>().ok().and_then(|i| items.get_mut(i)).ok_or_else(unknown)?,
            _ => return Err(unknown()),
        };
    }
    *node = match node {
        Value::String(_) => Value::String(raw.to_string()),
        _ => serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string())),
    };
    Ok(())
}

/// Split dotted `--a.b value` and `--a.b=value` options out of `args`.
pub fn extract_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>)> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let dotted = arg.strip_prefix("--").filter(|body| body.split('=').next().is_some_and(|k| k.contains('.')));
        match dotted {
            Some(body) => match body.split_once('=') {
                Some((key, value)) => overrides.push((key.to_string(), value.to_string())),
                None => {
                    let value = iter.next().ok_or_else(|| Error::Config(format!("--{body} needs a value")))?;
                    overrides.push((body.to_string(), value));
                }
            },
            None => rest.push(arg),
        }
    }
    Ok((rest, overrides))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn defaults_are_filled() {
        let c = RunConfig::resolve(None, &[]).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.train.batch_size, 256);
        assert_eq!(c.data.split, SplitFractions::default());
    }

    #[test]
    fn overrides_take_precedence() {
        let c = RunConfig::resolve(
            None,
            &ov(&[
                ("train.batch_size", "64"),
                ("train.weights.w_lu", "0"),
                ("data.csv", "2024.csv"),
                ("model.head_mode", "mse"),
                ("data.synthetic.n", "500"),
            ]),
        )
        .unwrap();
        assert_eq!(c.train.batch_size, 64);
        assert_eq!(c.train.weights.w_lu, 0.0);
        assert_eq!(c.data.csv, Some(PathBuf::from("2024.csv")));
        assert_eq!(c.model.head_mode, rerum_core::model::HeadMode::Mse);
        assert_eq!(c.data.synthetic.n, 500);
    }

    #[test]
    fn unknown_override_is_rejected() {
        assert!(matches!(RunConfig::resolve(None, &ov(&[("train.batchsize", "3")])), Err(Error::Config(_))));
        assert!(matches!(RunConfig::resolve(None, &ov(&[("train.batch_size", "many")])), Err(Error::Config(_))));
    }

    #[test]
    fn dotted_flags_are_extracted() {
        let args = ["rerum", "train", "--train.seed", "4", "--seed", "2", "--eval.lift_h=2"].map(String::from).to_vec();
        let (rest, overrides) = extract_overrides(args).unwrap();
        assert_eq!(rest, ["rerum", "train", "--seed", "2"]);
        assert_eq!(overrides, ov(&[("train.seed", "4"), ("eval.lift_h", "2")]));
        assert!(extract_overrides(vec!["--train.seed".into()]).is_err());
    }
}
