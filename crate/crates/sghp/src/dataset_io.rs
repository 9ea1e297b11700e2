//! Line-delimited JSON dataset files.
//!
//! The first line is a header object:
//!
//! ```text
//! {"num_types": K, "covariate_dim": C, "time_unit": "<label>"}
//! ```
//!
//! and every following line holds one sequence:
//!
//! ```text
//! {"events":[{"k":0,"t":1.0,"z":[...]}, ...]}
//! ```
//!
//! with `z` present exactly when `C > 0`. Floats carry full round-trip
//! precision, so `parse(write(ds))` reproduces `ds` value-exactly.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sghp_core::data::{Dataset, Event, EventSequence, Violation};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("missing header line")]
    MissingHeader,
    #[error("line {line}: {source}")]
    Malformed {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: {violation}")]
    Invalid { line: usize, violation: Violation },
    #[error("dataset has no sequences")]
    Empty,
}

impl DatasetIoError {
    /// Stable machine-readable code for CLI error lines.
    pub fn code(&self) -> &'static str {
        match self {
            DatasetIoError::Io(_) => "io_error",
            DatasetIoError::MissingHeader | DatasetIoError::Malformed { .. } => "parse_error",
            DatasetIoError::Invalid { .. } | DatasetIoError::Empty => "invalid_dataset",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    num_types: usize,
    covariate_dim: usize,
    time_unit: String,
}

#[derive(Serialize, Deserialize)]
struct EventLine {
    k: usize,
    t: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    z: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct SequenceLine {
    events: Vec<EventLine>,
}

/// Parses and validates a dataset stream. Errors carry 1-based line numbers.
pub fn parse_dataset<R: BufRead>(reader: R) -> Result<Dataset, DatasetIoError> {
    let (ds, line_of_sequence) = parse_dataset_unchecked(reader)?;
    if let Some(check) = ds.validate().failures().next() {
        return Err(DatasetIoError::Invalid {
            line: line_of_sequence[check.index],
            violation: check.violation.clone().unwrap(),
        });
    }
    Ok(ds)
}

/// Parses the format without enforcing sequence invariants; used by the
/// `validate` subcommand to report on possibly-invalid data. Returns the
/// dataset plus the 1-based source line of each sequence.
pub fn parse_dataset_unchecked<R: BufRead>(
    reader: R,
) -> Result<(Dataset, Vec<usize>), DatasetIoError> {
    let mut lines = reader.lines().enumerate();
    let header: HeaderLine = loop {
        match lines.next() {
            None => return Err(DatasetIoError::MissingHeader),
            Some((lineno, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line)
                    .map_err(|source| DatasetIoError::Malformed {
                        line: lineno + 1,
                        source,
                    })?;
            }
        }
    };

    let mut sequences = Vec::new();
    let mut line_of_sequence = Vec::new();
    for (lineno, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: SequenceLine =
            serde_json::from_str(&line).map_err(|source| DatasetIoError::Malformed {
                line: lineno + 1,
                source,
            })?;
        let events = parsed
            .events
            .into_iter()
            .map(|e| Event {
                type_index: e.k,
                timestamp: e.t,
                covariates: e.z,
            })
            .collect();
        sequences.push(EventSequence::new(events));
        line_of_sequence.push(lineno + 1);
    }
    if sequences.is_empty() {
        return Err(DatasetIoError::Empty);
    }

    let ds = Dataset::new_unchecked(
        sequences,
        header.num_types,
        header.covariate_dim,
        header.time_unit,
    );
    Ok((ds, line_of_sequence))
}

/// Writes a dataset in the line-delimited format.
pub fn write_dataset<W: Write>(ds: &Dataset, mut writer: W) -> Result<(), DatasetIoError> {
    let header = HeaderLine {
        num_types: ds.num_types(),
        covariate_dim: ds.covariate_dim(),
        time_unit: ds.time_unit().to_string(),
    };
    serde_json::to_writer(&mut writer, &header).map_err(io_from_json)?;
    writer.write_all(b"\n")?;
    for seq in ds.sequences() {
        let line = SequenceLine {
            events: seq
                .events
                .iter()
                .map(|e| EventLine {
                    k: e.type_index,
                    t: e.timestamp,
                    z: e.covariates.clone(),
                })
                .collect(),
        };
        serde_json::to_writer(&mut writer, &line).map_err(io_from_json)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Serializes a dataset to a string.
pub fn dataset_to_string(ds: &Dataset) -> Result<String, DatasetIoError> {
    let mut buf = Vec::new();
    write_dataset(ds, &mut buf)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

fn io_from_json(e: serde_json::Error) -> DatasetIoError {
    DatasetIoError::Io(std::io::Error::other(e))
}
