//! The MineThatData e-mail campaign export (64,000 customers, three arms).
//!
//! The raw file is loaded with [`raw_schema_spec`], which keeps `segment` as
//! a categorical column; [`adapt_hillstrom`] then keeps one e-mail arm plus
//! the no-e-mail control and drops `segment` from the features.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SampleRecord, SchemaSpec, TreatmentMapping};
use crate::error::{Error, Result};

pub const SEGMENT_COLUMN: &str = "segment";
pub const SPEND_COLUMN: &str = "spend";
pub const MENS_EMAIL: &str = "Mens E-Mail";
pub const WOMENS_EMAIL: &str = "Womens E-Mail";
pub const NO_EMAIL: &str = "No E-Mail";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HillstromArm {
    Men,
    Women,
}

impl HillstromArm {
    fn segment(self) -> &'static str {
        match self {
            HillstromArm::Men => MENS_EMAIL,
            HillstromArm::Women => WOMENS_EMAIL,
        }
    }
}

/// Column roles of the public export. `visit` and `conversion` are outcomes
/// and are not used as covariates.
pub fn raw_schema_spec() -> SchemaSpec {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<String>>();
    SchemaSpec {
        numeric: s(&["recency", "history", "mens", "womens", "newbie"]),
        categorical: s(&["history_segment", "zip_code", "channel", SEGMENT_COLUMN]),
        treatment: TreatmentMapping {
            column: SEGMENT_COLUMN.to_string(),
            treated: s(&[MENS_EMAIL, WOMENS_EMAIL]),
            control: s(&[NO_EMAIL]),
        },
        response: SPEND_COLUMN.to_string(),
        delimiter: ',',
    }
}

/// Keep the chosen e-mail arm (treated) and the no-e-mail group (control);
/// rows from the other e-mail arm are dropped.
pub fn adapt_hillstrom(raw: &Dataset, arm: HillstromArm) -> Result<Dataset> {
    let schema = raw.schema();
    if schema.response_column != SPEND_COLUMN {
        return Err(Error::MissingColumn(SPEND_COLUMN.to_string()));
    }
    let seg_idx = schema
        .categorical_columns
        .iter()
        .position(|c| c.name == SEGMENT_COLUMN)
        .ok_or_else(|| Error::MissingColumn(SEGMENT_COLUMN.to_string()))?;
    let seg_col = &schema.categorical_columns[seg_idx];

    let mut out_schema = schema.clone();
    out_schema.categorical_columns.remove(seg_idx);
    out_schema.treatment_column = SEGMENT_COLUMN.to_string();

    let mut records = Vec::new();
    for r in raw.records() {
        let segment = seg_col.category(r.categorical[seg_idx]).unwrap_or_default();
        let treated = match segment {
            s if s == arm.segment() => true,
            NO_EMAIL => false,
            MENS_EMAIL | WOMENS_EMAIL => continue,
            other => return Err(Error::UnknownSegment(other.to_string())),
        };
        let mut categorical = r.categorical.clone();
        categorical.remove(seg_idx);
        records.push(SampleRecord { numeric: r.numeric.clone(), categorical, treated, response: r.response });
    }
    if !records.iter().any(|r| r.treated) {
        log::warn!("Hillstrom adaptation produced no treated rows for arm {arm:?}");
    }
    Dataset::new(out_schema, records)
}
