//! Datasets of randomized-trial records: schema, validation, splitting and
//! treatment/control partitioning.
//!
//! Splits and shuffles use [`SplitMix64`] seeded from a caller-provided
//! `u64`, so a given seed always yields the same assignment within this
//! implementation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vocabulary entry reserved for categories not seen while fitting.
pub const UNKNOWN_CATEGORY: &str = "<unknown>";

/// One individual: covariates, received treatment and observed revenue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub numeric: Vec<f64>,
    pub categorical: Vec<u32>,
    pub treated: bool,
    pub response: f64,
}

/// A categorical column and its dense vocabulary. Index 0 is always
/// [`UNKNOWN_CATEGORY`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalColumn {
    pub name: String,
    pub vocabulary: Vec<String>,
}

impl CategoricalColumn {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            vocabulary: alloc::vec![UNKNOWN_CATEGORY.to_string()],
        }
    }

    pub fn len(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocabulary.is_empty()
    }

    /// Index of `value`, or 0 when the value is not in the vocabulary.
    pub fn lookup(&self, value: &str) -> u32 {
        self.vocabulary
            .iter()
            .skip(1)
            .position(|v| v == value)
            .map_or(0, |i| (i + 1) as u32)
    }

    /// Index of `value`, appending it if unseen.
    pub fn intern(&mut self, value: &str) -> u32 {
        match self.lookup(value) {
            0 => {
                self.vocabulary.push(value.to_string());
                (self.vocabulary.len() - 1) as u32
            }
            i => i,
        }
    }

    pub fn category(&self, index: u32) -> Option<&str> {
        self.vocabulary.get(index as usize).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub numeric_columns: Vec<String>,
    pub categorical_columns: Vec<CategoricalColumn>,
    pub treatment_column: String,
    pub response_column: String,
}

impl FeatureSchema {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeMap::new();
        let names = self
            .numeric_columns
            .iter()
            .chain(self.categorical_columns.iter().map(|c| &c.name))
            .chain([&self.response_column]);
        for name in names {
            if seen.insert(name.as_str(), ()).is_some() {
                return Err(Error::InvalidSchema(format!("duplicate column name {name:?}")));
            }
        }
        // The treatment column may also be read as a categorical feature.
        let treatment = self.treatment_column.as_str();
        if self.numeric_columns.iter().any(|c| c == treatment) || self.response_column == treatment {
            return Err(Error::InvalidSchema(format!("duplicate column name {treatment:?}")));
        }
        for col in &self.categorical_columns {
            if col.vocabulary.first().map(String::as_str) != Some(UNKNOWN_CATEGORY) {
                return Err(Error::InvalidSchema(format!(
                    "vocabulary of {:?} must start with the unknown entry",
                    col.name
                )));
            }
            let mut entries = BTreeMap::new();
            for v in &col.vocabulary {
                if entries.insert(v.as_str(), ()).is_some() {
                    return Err(Error::InvalidSchema(format!(
                        "duplicate category {v:?} in column {:?}",
                        col.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn check_record(&self, index: usize, record: &SampleRecord) -> Result<()> {
        let mismatch = |reason: String| Error::SchemaMismatch { index, reason };
        if record.numeric.len() != self.numeric_columns.len() {
            return Err(mismatch(format!(
                "{} numeric values, schema has {}",
                record.numeric.len(),
                self.numeric_columns.len()
            )));
        }
        if record.categorical.len() != self.categorical_columns.len() {
            return Err(mismatch(format!(
                "{} categorical values, schema has {}",
                record.categorical.len(),
                self.categorical_columns.len()
            )));
        }
        for (value, col) in record.categorical.iter().zip(&self.categorical_columns) {
            if *value as usize >= col.len() {
                return Err(Error::CategoryOutOfRange {
                    column: col.name.clone(),
                    index: *value,
                    size: col.len(),
                });
            }
        }
        if !(record.response >= 0.0) || !record.response.is_finite() {
            return Err(mismatch(format!("response {} is not a finite non-negative value", record.response)));
        }
        Ok(())
    }

    /// Column layout without vocabularies: two schemas with the same layout
    /// describe the same kind of input file.
    pub fn layout_key(&self) -> String {
        let cats: Vec<&str> = self.categorical_columns.iter().map(|c| c.name.as_str()).collect();
        format!(
            "numeric={:?};categorical={:?};treatment={:?};response={:?}",
            self.numeric_columns, cats, self.treatment_column, self.response_column
        )
    }
}

/// Column roles for ingesting a delimited file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaSpec {
    #[serde(default)]
    pub numeric: Vec<String>,
    #[serde(default)]
    pub categorical: Vec<String>,
    pub treatment: TreatmentMapping,
    pub response: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_delimiter() -> char {
    ','
}

/// Declared mapping from raw treatment-column values to arms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreatmentMapping {
    pub column: String,
    pub treated: Vec<String>,
    pub control: Vec<String>,
}

impl TreatmentMapping {
    pub fn arm_of(&self, raw: &str) -> Option<bool> {
        if self.treated.iter().any(|v| v == raw) {
            Some(true)
        } else if self.control.iter().any(|v| v == raw) {
            Some(false)
        } else {
            None
        }
    }
}

impl SchemaSpec {
    pub fn validate(&self) -> Result<()> {
        if self.treatment.treated.is_empty() || self.treatment.control.is_empty() {
            return Err(Error::InvalidSchema("treatment mapping needs treated and control values".into()));
        }
        if self.treatment.treated.iter().any(|v| self.treatment.control.contains(v)) {
            return Err(Error::InvalidSchema("a raw treatment value maps to both arms".into()));
        }
        self.empty_schema().validate()
    }

    /// A schema with this spec's columns and vocabularies holding only the
    /// unknown entry.
    pub fn empty_schema(&self) -> FeatureSchema {
        FeatureSchema {
            numeric_columns: self.numeric.clone(),
            categorical_columns: self.categorical.iter().map(CategoricalColumn::new).collect(),
            treatment_column: self.treatment.column.clone(),
            response_column: self.response.clone(),
        }
    }
}

/// Builds a [`Dataset`] from delimited text rows. Vocabularies grow in
/// first-appearance order; numeric parsing is strict.
#[derive(Debug, Clone)]
pub struct RecordParser {
    spec: SchemaSpec,
    schema: FeatureSchema,
    numeric: Vec<usize>,
    categorical: Vec<usize>,
    treatment: usize,
    response: usize,
    records: Vec<SampleRecord>,
}

impl RecordParser {
    /// Resolve the spec's columns against a header row.
    pub fn new(spec: &SchemaSpec, header: &[&str]) -> Result<Self> {
        spec.validate()?;
        let find = |name: &str| {
            header.iter().position(|h| *h == name).ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        Ok(Self {
            numeric: spec.numeric.iter().map(|c| find(c)).collect::<Result<_>>()?,
            categorical: spec.categorical.iter().map(|c| find(c)).collect::<Result<_>>()?,
            treatment: find(&spec.treatment.column)?,
            response: find(&spec.response)?,
            schema: spec.empty_schema(),
            spec: spec.clone(),
            records: Vec::new(),
        })
    }

    /// Parse one data row; `row` is the 1-based data row number used in errors.
    pub fn push(&mut self, row: usize, fields: &[&str]) -> Result<()> {
        let cell = |idx: usize, name: &str| {
            fields.get(idx).map(|s| s.trim()).ok_or_else(|| Error::InvalidCell {
                row,
                column: name.to_string(),
                reason: format!("row has {} fields", fields.len()),
            })
        };
        let number = |idx: usize, name: &str| -> Result<f64> {
            let raw = cell(idx, name)?;
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::InvalidCell { row, column: name.to_string(), reason: format!("{raw:?} is not a finite number") }),
            }
        };
        let mut numeric = Vec::with_capacity(self.numeric.len());
        for (&idx, name) in self.numeric.iter().zip(&self.spec.numeric) {
            numeric.push(number(idx, name)?);
        }
        let mut categorical = Vec::with_capacity(self.categorical.len());
        for (k, &idx) in self.categorical.iter().enumerate() {
            let raw = cell(idx, &self.spec.categorical[k])?;
            categorical.push(self.schema.categorical_columns[k].intern(raw));
        }
        let raw_treatment = cell(self.treatment, &self.spec.treatment.column)?;
        let treated = self.spec.treatment.arm_of(raw_treatment).ok_or_else(|| Error::InvalidCell {
            row,
            column: self.spec.treatment.column.clone(),
            reason: format!("treatment value {raw_treatment:?} is not in the declared mapping"),
        })?;
        let response = number(self.response, &self.spec.response)?;
        if response < 0.0 {
            return Err(Error::InvalidCell {
                row,
                column: self.spec.response.clone(),
                reason: format!("negative response {response}"),
            });
        }
        self.records.push(SampleRecord { numeric, categorical, treated, response });
        Ok(())
    }

    pub fn finish(self) -> Result<Dataset> {
        Dataset::new(self.schema, self.records)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: FeatureSchema,
    records: Vec<SampleRecord>,
}

impl Dataset {
    pub fn new(schema: FeatureSchema, records: Vec<SampleRecord>) -> Result<Self> {
        schema.validate()?;
        for (i, r) in records.iter().enumerate() {
            schema.check_record(i, r)?;
        }
        Ok(Self { schema, records })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn into_parts(self) -> (FeatureSchema, Vec<SampleRecord>) {
        (self.schema, self.records)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn treated_count(&self) -> usize {
        self.records.iter().filter(|r| r.treated).count()
    }

    pub fn control_count(&self) -> usize {
        self.len() - self.treated_count()
    }

    /// Records at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    /// Re-express categorical values against `target`'s vocabularies,
    /// matching categories by name. Categories missing from `target` map to
    /// the unknown index.
    pub fn conform_to(&self, target: &FeatureSchema) -> Result<Dataset> {
        if self.schema.layout_key() != target.layout_key() {
            return Err(Error::InvalidSchema(format!(
                "column layout differs: {} vs {}",
                self.schema.layout_key(),
                target.layout_key()
            )));
        }
        let maps: Vec<Vec<u32>> = self
            .schema
            .categorical_columns
            .iter()
            .zip(&target.categorical_columns)
            .map(|(src, dst)| {
                src.vocabulary
                    .iter()
                    .enumerate()
                    .map(|(i, v)| if i == 0 { 0 } else { dst.lookup(v) })
                    .collect()
            })
            .collect();
        let records = self
            .records
            .iter()
            .map(|r| SampleRecord {
                categorical: r
                    .categorical
                    .iter()
                    .zip(&maps)
                    .map(|(&c, m)| m[c as usize])
                    .collect(),
                ..r.clone()
            })
            .collect();
        Dataset::new(target.clone(), records)
    }

    /// Rebuild vocabularies from the categories present in this dataset, in
    /// first-appearance order. Used on the training split so evaluation data
    /// never contributes vocabulary.
    pub fn refit_vocabulary(&self) -> Result<Dataset> {
        let mut schema = self.schema.clone();
        for (c, col) in schema.categorical_columns.iter_mut().enumerate() {
            let source = &self.schema.categorical_columns[c];
            *col = CategoricalColumn::new(col.name.clone());
            for r in &self.records {
                if r.categorical[c] != 0 {
                    col.intern(&source.vocabulary[r.categorical[c] as usize]);
                }
            }
        }
        self.conform_to(&schema)
    }

    /// Replace numeric columns using `scaler`.
    pub fn standardized(&self, scaler: &Standardizer) -> Result<Dataset> {
        if scaler.means.len() != self.schema.numeric_columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.schema.numeric_columns.len(),
                got: scaler.means.len(),
            });
        }
        let records = self
            .records
            .iter()
            .map(|r| SampleRecord {
                numeric: scaler.apply(&r.numeric),
                ..r.clone()
            })
            .collect();
        Dataset::new(self.schema.clone(), records)
    }
}

/// Per-column affine map of numeric features to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(dataset: &Dataset) -> Standardizer {
        let d = dataset.schema.numeric_columns.len();
        let n = dataset.len().max(1) as f64;
        let mut means = alloc::vec![0.0; d];
        for r in dataset.records() {
            for (m, x) in means.iter_mut().zip(&r.numeric) {
                *m += x;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = alloc::vec![0.0; d];
        for r in dataset.records() {
            for ((v, m), x) in vars.iter_mut().zip(&means).zip(&r.numeric) {
                *v += (x - m) * (x - m);
            }
        }
        let scales = vars
            .into_iter()
            .map(|v| {
                let s = libm::sqrt(v / n);
                if s > 1e-12 { s } else { 1.0 }
            })
            .collect();
        Standardizer { means, scales }
    }

    pub fn apply(&self, numeric: &[f64]) -> Vec<f64> {
        numeric
            .iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

/// Train/validation/test proportions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self { train: 0.6, validation: 0.1, test: 0.3 }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|f| !(*f > 0.0) || !f.is_finite()) {
            return Err(Error::InvalidConfig(format!("split fractions must be positive, got {parts:?}")));
        }
        if libm::fabs(parts.iter().sum::<f64>() - 1.0) > 1e-9 {
            return Err(Error::InvalidConfig(format!("split fractions must sum to 1, got {parts:?}")));
        }
        Ok(())
    }
}

/// Index assignment for [`split`]: a seeded shuffle of `0..n`, cut into
/// `floor(n*train)`, `floor(n*validation)` and the remainder.
pub fn split_indices(n: usize, fractions: SplitFractions, seed: u64) -> Result<[Vec<usize>; 3]> {
    fractions.validate()?;
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut SplitMix64::seed_from_u64(seed));
    // The 1e-9 nudge keeps products like 100 * 0.6 from flooring to 59.
    let n_train = libm::floor(n as f64 * fractions.train + 1e-9) as usize;
    let n_val = libm::floor(n as f64 * fractions.validation + 1e-9) as usize;
    let n_val = n_val.min(n - n_train.min(n));
    let n_train = n_train.min(n);
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    Ok([order, val, test])
}

pub fn split(dataset: &Dataset, fractions: SplitFractions, seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let [train, val, test] = split_indices(dataset.len(), fractions, seed)?;
    Ok((dataset.select(&train), dataset.select(&val), dataset.select(&test)))
}

/// Split into (treated, control), preserving record order.
pub fn partition_by_treatment(dataset: &Dataset) -> (Dataset, Dataset) {
    let (treated, control): (Vec<_>, Vec<_>) = dataset.records.iter().cloned().partition(|r| r.treated);
    (
        Dataset { schema: dataset.schema.clone(), records: treated },
        Dataset { schema: dataset.schema.clone(), records: control },
    )
}
