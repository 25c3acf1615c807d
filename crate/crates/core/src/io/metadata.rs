//! Case metadata tables (CSV or TSV with a header row).

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetadataError {
    #[error("missing column {0}")]
    MissingColumn(String),
    #[error("invalid date {value:?} on row {row}")]
    BadDate { row: usize, value: String },
    #[error("unknown stage {token:?} on row {row}")]
    UnknownStage { token: String, row: usize },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Phi,
    ChronicUntreated,
    ChronicTreated,
    Unknown,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Phi => "PHI",
            Stage::ChronicUntreated => "CHRONIC_UNTREATED",
            Stage::ChronicTreated => "CHRONIC_TREATED",
            Stage::Unknown => "UNKNOWN",
        }
    }

    pub fn is_chronic(self) -> bool {
        matches!(self, Stage::ChronicUntreated | Stage::ChronicTreated)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PHI" => Ok(Stage::Phi),
            "CHRONIC_UNTREATED" => Ok(Stage::ChronicUntreated),
            "CHRONIC_TREATED" => Ok(Stage::ChronicTreated),
            "UNKNOWN" => Ok(Stage::Unknown),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseMetadata {
    pub id: String,
    pub collection_date: NaiveDate,
    pub stage: Stage,
    pub risk_group: String,
}

const COLUMNS: [&str; 4] = ["id", "collection_date", "stage", "risk_group"];

/// Parses a metadata table. The delimiter is a comma unless the header row
/// contains tabs and no commas.
pub fn parse_metadata(text: &str) -> Result<Vec<CaseMetadata>, MetadataError> {
    let header_line = text.lines().next().unwrap_or("");
    let delimiter = if header_line.contains('\t') && !header_line.contains(',') {
        b'\t'
    } else {
        b','
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| MetadataError::Malformed {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    let mut col = [0usize; 4];
    for (slot, name) in col.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| MetadataError::MissingColumn(name.to_string()))?;
    }

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| MetadataError::Malformed {
            row,
            message: e.to_string(),
        })?;
        let field = |k: usize| record.get(col[k]).unwrap_or("");
        let id = field(0).to_string();
        if id.is_empty() {
            return Err(MetadataError::Malformed {
                row,
                message: "empty id".into(),
            });
        }
        let date_raw = field(1);
        let collection_date =
            NaiveDate::parse_from_str(date_raw, "%Y-%m-%d").map_err(|_| MetadataError::BadDate {
                row,
                value: date_raw.to_string(),
            })?;
        let stage_raw = field(2);
        let stage = stage_raw.parse().map_err(|_| MetadataError::UnknownStage {
            token: stage_raw.to_string(),
            row,
        })?;
        if !seen.insert(id.clone()) {
            return Err(MetadataError::DuplicateId(id));
        }
        out.push(CaseMetadata {
            id,
            collection_date,
            stage,
            risk_group: field(3).to_string(),
        });
    }
    Ok(out)
}

pub fn write_metadata(rows: &[CaseMetadata]) -> String {
    let mut out = String::from("id,collection_date,stage,risk_group\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.id,
            r.collection_date.format("%Y-%m-%d"),
            r.stage,
            r.risk_group
        ));
    }
    out
}
