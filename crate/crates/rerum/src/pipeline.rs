//! Data loading and splitting shared by the commands.

use rerum_core::data::{split_indices, Dataset, SchemaSpec, Standardizer};
use rerum_core::hillstrom::{adapt_hillstrom, raw_schema_spec};
use rerum_core::synthetic::{generate_synthetic, SyntheticTruth};

use crate::config::{EvalSplit, RunConfig};
use crate::error::{Error, Result};
use crate::io::{load_csv, read_json};

/// A full dataset before splitting.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub dataset: Dataset,
    /// Present for synthetic draws only.
    pub truth: Option<SyntheticTruth>,
}

/// Column roles for `config.data`, falling back to the Hillstrom layout when
/// an arm is selected.
pub fn schema_spec(config: &RunConfig) -> Result<SchemaSpec> {
    if let Some(spec) = &config.data.schema {
        return Ok(spec.clone());
    }
    if let Some(path) = &config.data.schema_file {
        return read_json(path);
    }
    if config.data.hillstrom_arm.is_some() {
        return Ok(raw_schema_spec());
    }
    Err(Error::Config("no schema given for data.csv".into()))
}

pub fn load_data(config: &RunConfig) -> Result<LoadedData> {
    match &config.data.csv {
        Some(path) => {
            let spec = schema_spec(config)?;
            let mut dataset = load_csv(path, &spec)?;
            if let Some(arm) = config.data.hillstrom_arm {
                dataset = adapt_hillstrom(&dataset, arm)?;
            }
            log::info!(
                "loaded {} records ({} treated, {} control) from {}",
                dataset.len(),
                dataset.treated_count(),
                dataset.control_count(),
                path.display()
            );
            Ok(LoadedData { dataset, truth: None })
        }
        None => {
            let (dataset, truth) = generate_synthetic(&config.data.synthetic, config.data_seed())?;
            Ok(LoadedData { dataset, truth: Some(truth) })
        }
    }
}

/// Train, validation and test sets ready for the model: vocabularies come
/// from the training split only and numeric scaling is fitted on it.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    /// Positions of each split's records in the loaded dataset.
    pub indices: [Vec<usize>; 3],
    pub standardizer: Option<Standardizer>,
}

pub fn prepare_splits(data: &Dataset, config: &RunConfig) -> Result<Splits> {
    let indices = split_indices(data.len(), config.data.split, config.split_seed())?;
    let train = data.select(&indices[0]).refit_vocabulary()?;
    let validation = data.select(&indices[1]).conform_to(train.schema())?;
    let test = data.select(&indices[2]).conform_to(train.schema())?;
    let (train, validation, test, standardizer) = if config.data.standardize {
        let s = Standardizer::fit(&train);
        (train.standardized(&s)?, validation.standardized(&s)?, test.standardized(&s)?, Some(s))
    } else {
        (train, validation, test, None)
    };
    Ok(Splits { train, validation, test, indices, standardizer })
}

/// Positions in the loaded dataset selected by `which`, using the same
/// seeded split as training.
pub fn eval_indices(n: usize, which: EvalSplit, config: &RunConfig) -> Result<Vec<usize>> {
    if which == EvalSplit::All {
        return Ok((0..n).collect());
    }
    let [train, validation, test] = split_indices(n, config.data.split, config.split_seed())?;
    Ok(match which {
        EvalSplit::Train => train,
        EvalSplit::Validation => validation,
        _ => test,
    })
}
