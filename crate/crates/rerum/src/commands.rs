//! The `train`, `eval`, `synth` and `curves` commands.

use std::fs;
use std::path::{Path, PathBuf};

use rerum_core::metrics::{evaluate, Evaluation, MetricReport};
use rerum_core::trainer::{score_dataset, train, TrainHistory};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{write_csv, write_curve_csv, write_json, write_truth_csv};
use crate::pipeline::{eval_indices, load_data, prepare_splits};

pub const CONFIG_FILE: &str = "config.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const HISTORY_FILE: &str = "history.json";
pub const VALIDATION_REPORT_FILE: &str = "validation_report.json";
pub const REPORT_FILE: &str = "report.json";
pub const UPLIFT_CURVE_FILE: &str = "uplift_curve.csv";
pub const QINI_CURVE_FILE: &str = "qini_curve.csv";
pub const DATA_FILE: &str = "data.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const SCHEMA_FILE: &str = "schema.json";

/// Output directory of one command. Files handed out by [`Self::path`] are
/// removed again unless [`Self::commit`] is reached.
struct OutputDir {
    dir: PathBuf,
    created: bool,
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputDir {
    /// Create `dir` if needed and refuse to clobber any of `files` unless
    /// `overwrite` is set.
    fn open(dir: &Path, overwrite: bool, files: &[&str]) -> Result<Self> {
        let created = !dir.exists();
        if !overwrite && !created {
            if let Some(existing) = files.iter().map(|f| dir.join(f)).find(|p| p.exists()) {
                return Err(Error::OutputExists(existing));
            }
        }
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
        Ok(Self { dir: dir.to_path_buf(), created, written: Vec::new(), committed: false })
    }

    fn path(&mut self, file: &str) -> PathBuf {
        let path = self.dir.join(file);
        self.written.push(path.clone());
        path
    }

    fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for path in &self.written {
            let _ = fs::remove_file(path);
        }
        if self.created {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

/// One-line summary of a report.
pub fn summary_line(report: &MetricReport) -> String {
    let show = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
    format!(
        "AUUC {} KRCC {} LIFT@{} {}",
        show(report.auuc_norm),
        show(report.krcc),
        report.lift_h,
        show(report.lift_at_h)
    )
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: TrainHistory,
    pub output_dir: PathBuf,
}

impl TrainOutcome {
    pub fn summary(&self) -> String {
        format!("best epoch {}: {}", self.history.best_epoch, summary_line(&self.history.best().validation))
    }
}

/// Load, split, train and write the best checkpoint, the history and the
/// validation report.
pub fn cmd_train(config: &RunConfig) -> Result<TrainOutcome> {
    config.validate_training()?;
    let mut out = OutputDir::open(
        &config.output.dir,
        config.output.overwrite,
        &[CONFIG_FILE, CHECKPOINT_FILE, HISTORY_FILE, VALIDATION_REPORT_FILE],
    )?;
    write_json(&out.path(CONFIG_FILE), config)?;
    let data = load_data(config)?;
    let splits = prepare_splits(&data.dataset, config)?;
    let (params, history) = train(&splits.train, &splits.validation, &config.model, &config.train)?;
    Checkpoint::new(&params, splits.train.schema(), splits.standardizer.clone()).save(&out.path(CHECKPOINT_FILE))?;
    write_json(&out.path(HISTORY_FILE), &history)?;
    write_json(&out.path(VALIDATION_REPORT_FILE), &history.best().validation)?;
    let output_dir = out.dir.clone();
    out.commit();
    Ok(TrainOutcome { history, output_dir })
}

/// Score the configured split with a checkpoint.
fn score_with_checkpoint(config: &RunConfig) -> Result<Evaluation> {
    config.validate_eval()?;
    let checkpoint_path = config.eval.checkpoint.as_deref().expect("validated");
    let checkpoint = Checkpoint::load(checkpoint_path)?;
    let params = checkpoint.params()?;
    let data = load_data(config)?;
    checkpoint.check_schema(data.dataset.schema())?;
    let indices = eval_indices(data.dataset.len(), config.eval.split, config)?;
    let mut subset = data.dataset.select(&indices).conform_to(&checkpoint.schema)?;
    if let Some(s) = &checkpoint.standardizer {
        subset = subset.standardized(s)?;
    }
    let scored = score_dataset(&params, &checkpoint.model_config, &subset)?;
    Ok(evaluate(&scored, &config.eval.metrics())?)
}

/// Write the metric report and both curves for the configured split.
pub fn cmd_eval(config: &RunConfig) -> Result<MetricReport> {
    let mut out = OutputDir::open(
        &config.output.dir,
        config.output.overwrite,
        &[CONFIG_FILE, REPORT_FILE, UPLIFT_CURVE_FILE, QINI_CURVE_FILE],
    )?;
    let evaluation = score_with_checkpoint(config)?;
    write_json(&out.path(CONFIG_FILE), config)?;
    write_json(&out.path(REPORT_FILE), &evaluation.report)?;
    write_curve_csv(&out.path(UPLIFT_CURVE_FILE), &evaluation.uplift_curve)?;
    write_curve_csv(&out.path(QINI_CURVE_FILE), &evaluation.qini_curve)?;
    out.commit();
    Ok(evaluation.report)
}

/// Write only the two curve files for the configured split.
pub fn cmd_curves(config: &RunConfig) -> Result<Evaluation> {
    let mut out =
        OutputDir::open(&config.output.dir, config.output.overwrite, &[CONFIG_FILE, UPLIFT_CURVE_FILE, QINI_CURVE_FILE])?;
    let evaluation = score_with_checkpoint(config)?;
    write_json(&out.path(CONFIG_FILE), config)?;
    write_curve_csv(&out.path(UPLIFT_CURVE_FILE), &evaluation.uplift_curve)?;
    write_curve_csv(&out.path(QINI_CURVE_FILE), &evaluation.qini_curve)?;
    out.commit();
    Ok(evaluation)
}

/// Draw a synthetic dataset and write it with its true effects and the
/// schema needed to load it again.
pub fn cmd_synth(config: &RunConfig) -> Result<usize> {
    config.data.synthetic.validate()?;
    let mut out = OutputDir::open(
        &config.output.dir,
        config.output.overwrite,
        &[CONFIG_FILE, DATA_FILE, TRUTH_FILE, SCHEMA_FILE],
    )?;
    let mut synthetic_only = config.clone();
    synthetic_only.data.csv = None;
    let data = load_data(&synthetic_only)?;
    let truth = data.truth.expect("synthetic draw carries its truth");
    let spec = config.data.synthetic.schema_spec();
    write_json(&out.path(CONFIG_FILE), config)?;
    write_csv(&out.path(DATA_FILE), &data.dataset, &spec)?;
    write_truth_csv(&out.path(TRUTH_FILE), &truth.cate)?;
    write_json(&out.path(SCHEMA_FILE), &spec)?;
    out.commit();
    Ok(data.dataset.len())
}
