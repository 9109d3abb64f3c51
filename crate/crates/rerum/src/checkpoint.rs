//! Single-file JSON model checkpoints.
//!
//! Tensors are stored row-major with their declared shapes. Floats are
//! written in shortest round-trip form and parsed with exact rounding, so a
//! reload reproduces every parameter bit for bit.

use std::path::Path;

use rerum_core::data::{FeatureSchema, Standardizer};
use rerum_core::model::{ModelConfig, ModelParams, ParamLayout};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{read_json, write_json};

pub const FORMAT_VERSION: u32 = 1;

/// SHA-256 of the schema's column layout, hex encoded.
pub fn schema_fingerprint(schema: &FeatureSchema) -> String {
    hex::encode(Sha256::digest(schema.layout_key().as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    /// `[rows, cols]`
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub model_config: ModelConfig,
    pub schema_fingerprint: String,
    /// Training schema, including the vocabularies the embeddings index.
    pub schema: FeatureSchema,
    /// Numeric feature scaling fitted on the training split, if any.
    pub standardizer: Option<Standardizer>,
    pub tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn new(params: &ModelParams, schema: &FeatureSchema, standardizer: Option<Standardizer>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            model_config: params.config().clone(),
            schema_fingerprint: schema_fingerprint(schema),
            schema: schema.clone(),
            standardizer,
            tensors: params
                .tensors()
                .map(|(spec, values)| TensorRecord {
                    name: spec.name.clone(),
                    shape: [spec.rows, spec.cols],
                    values: values.to_vec(),
                })
                .collect(),
        }
    }

    /// Rebuild parameters, checking every tensor against the layout implied
    /// by the stored config and schema.
    pub fn params(&self) -> Result<ModelParams> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {}", self.format_version)));
        }
        if self.schema_fingerprint != schema_fingerprint(&self.schema) {
            return Err(Error::Checkpoint("stored fingerprint does not match the stored schema".into()));
        }
        let layout = ParamLayout::new(&self.model_config, &self.schema)?;
        if layout.tensors().len() != self.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                layout.tensors().len(),
                self.tensors.len()
            )));
        }
        let mut values = Vec::with_capacity(layout.len());
        for (spec, record) in layout.tensors().iter().zip(&self.tensors) {
            if spec.name != record.name || [spec.rows, spec.cols] != record.shape {
                return Err(Error::Checkpoint(format!(
                    "tensor {} {:?} does not match expected {} {:?}",
                    record.name,
                    record.shape,
                    spec.name,
                    [spec.rows, spec.cols]
                )));
            }
            if record.values.len() != spec.len() {
                return Err(Error::Checkpoint(format!(
                    "tensor {} holds {} values for shape {:?}",
                    record.name,
                    record.values.len(),
                    record.shape
                )));
            }
            values.extend_from_slice(&record.values);
        }
        Ok(ModelParams::from_values(&self.model_config, &self.schema, values)?)
    }

    /// Reject data whose column layout differs from the training data.
    pub fn check_schema(&self, schema: &FeatureSchema) -> Result<()> {
        let dataset = schema_fingerprint(schema);
        if dataset == self.schema_fingerprint {
            Ok(())
        } else {
            Err(Error::FingerprintMismatch { checkpoint: self.schema_fingerprint.clone(), dataset })
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}
