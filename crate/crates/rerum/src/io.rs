//! CSV and JSON file formats.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rerum_core::data::{Dataset, RecordParser, SchemaSpec};
use rerum_core::metrics::CurvePoints;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Header of exported curve files.
pub const CURVE_HEADER: [&str; 7] = ["fraction", "value", "n_treated", "n_control", "r_treated", "r_control", "flag"];

fn delimiter_byte(spec: &SchemaSpec) -> Result<u8> {
    u8::try_from(spec.delimiter)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| Error::Config(format!("delimiter {:?} must be a single ASCII character", spec.delimiter)))
}

pub fn require_exists(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingPath(path.to_path_buf()))
    }
}

/// Load a delimited file with a header row.
pub fn load_csv(path: &Path, spec: &SchemaSpec) -> Result<Dataset> {
    require_exists(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter_byte(spec)?)
        .flexible(true)
        .from_path(path)
        .map_err(Error::csv(path))?;
    let header = reader.headers().map_err(Error::csv(path))?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let mut parser = RecordParser::new(spec, &names)?;
    let mut row = csv::StringRecord::new();
    let mut index = 0;
    while reader.read_record(&mut row).map_err(Error::csv(path))? {
        index += 1;
        let fields: Vec<&str> = row.iter().collect();
        parser.push(index, &fields)?;
    }
    Ok(parser.finish()?)
}

/// Write `dataset` so that [`load_csv`] with the same spec reads it back
/// record for record. Arms are written as the first declared raw value.
pub fn write_csv(path: &Path, dataset: &Dataset, spec: &SchemaSpec) -> Result<()> {
    let schema = dataset.schema();
    let categorical: Vec<&str> = schema.categorical_columns.iter().map(|c| c.name.as_str()).collect();
    if schema.numeric_columns != spec.numeric
        || categorical != spec.categorical.iter().map(String::as_str).collect::<Vec<_>>()
        || schema.response_column != spec.response
    {
        return Err(Error::Config("schema spec does not describe the dataset's columns".into()));
    }
    // A treatment column that is also a categorical feature is written once.
    let treatment_is_feature = categorical.contains(&spec.treatment.column.as_str());
    let mut header: Vec<&str> = spec.numeric.iter().map(String::as_str).collect();
    header.extend(&categorical);
    if !treatment_is_feature {
        header.push(&spec.treatment.column);
    }
    header.push(&spec.response);

    let mut writer = csv::WriterBuilder::new()
        .delimiter(delimiter_byte(spec)?)
        .from_path(path)
        .map_err(Error::csv(path))?;
    writer.write_record(&header).map_err(Error::csv(path))?;
    let mut fields: Vec<String> = Vec::with_capacity(header.len());
    for record in dataset.records() {
        fields.clear();
        fields.extend(record.numeric.iter().map(f64::to_string));
        for (value, col) in record.categorical.iter().zip(&schema.categorical_columns) {
            fields.push(col.category(*value).unwrap_or_default().to_string());
        }
        if !treatment_is_feature {
            let arm = if record.treated { &spec.treatment.treated[0] } else { &spec.treatment.control[0] };
            fields.push(arm.clone());
        }
        fields.push(record.response.to_string());
        writer.write_record(&fields).map_err(Error::csv(path))?;
    }
    writer.flush().map_err(Error::io(path))
}

/// One row per record: its index and the true conditional effect.
pub fn write_truth_csv(path: &Path, cate: &[f64]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(Error::csv(path))?;
    writer.write_record(["index", "true_cate"]).map_err(Error::csv(path))?;
    for (i, c) in cate.iter().enumerate() {
        writer.write_record([i.to_string(), c.to_string()]).map_err(Error::csv(path))?;
    }
    writer.flush().map_err(Error::io(path))
}

pub fn read_truth_csv(path: &Path) -> Result<Vec<f64>> {
    require_exists(path)?;
    let mut reader = csv::Reader::from_path(path).map_err(Error::csv(path))?;
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(Error::csv(path))?;
        let value = record.get(1).and_then(|v| v.trim().parse::<f64>().ok()).ok_or_else(|| {
            Error::Config(format!("{}: row {} has no numeric true_cate", path.display(), row + 1))
        })?;
        out.push(value);
    }
    Ok(out)
}

/// Bucket-level curve values. Undefined buckets keep their counts, leave
/// `value` empty and carry the `undefined` flag.
pub fn write_curve_csv(path: &Path, curve: &CurvePoints) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(Error::csv(path))?;
    writer.write_record(CURVE_HEADER).map_err(Error::csv(path))?;
    for p in &curve.points {
        let (value, flag) = match p.value {
            Some(v) => (v.to_string(), ""),
            None => (String::new(), "undefined"),
        };
        writer
            .write_record([
                p.fraction.to_string(),
                value,
                p.n_treated.to_string(),
                p.n_control.to_string(),
                p.r_treated.to_string(),
                p.r_control.to_string(),
                flag.to_string(),
            ])
            .map_err(Error::csv(path))?;
    }
    writer.flush().map_err(Error::io(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(Error::io(path))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value).map_err(Error::json(path))?;
    out.write_all(b"\n").map_err(Error::io(path))?;
    out.flush().map_err(Error::io(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    require_exists(path)?;
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(Error::json(path))
}
