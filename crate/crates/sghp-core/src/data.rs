//! Event sequences and datasets.
//!
//! A dataset is a list of event sequences over `K` event types, optionally
//! carrying a fixed-length covariate vector per event. Timestamps are absolute
//! event times in a shared (but uninterpreted) unit; inter-arrival gaps are
//! derived where needed, never stored. Sequences with tied timestamps are
//! rejected rather than jittered.

use alloc::string::String;
use alloc::vec::Vec;

use crate::rng::{self, Stream};

/// A single event: type index, absolute timestamp, optional covariates.
#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub type_index: usize,
    pub timestamp: f64,
    pub covariates: Option<Vec<f64>>,
}

impl Event {
    pub fn new(type_index: usize, timestamp: f64) -> Self {
        Event {
            type_index,
            timestamp,
            covariates: None,
        }
    }

    pub fn with_covariates(type_index: usize, timestamp: f64, covariates: Vec<f64>) -> Self {
        Event {
            type_index,
            timestamp,
            covariates: Some(covariates),
        }
    }
}

/// An ordered list of events. Validity (strict ordering, type range,
/// covariate arity) is enforced when the sequence enters a [`Dataset`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventSequence {
    pub events: Vec<Event>,
}

impl EventSequence {
    pub fn new(events: Vec<Event>) -> Self {
        EventSequence { events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn last_timestamp(&self) -> Option<f64> {
        self.events.last().map(|e| e.timestamp)
    }

    /// First violated invariant under the dataset-level `(num_types, covariate_dim)`.
    pub fn check(&self, num_types: usize, covariate_dim: usize) -> Result<(), Violation> {
        if self.events.is_empty() {
            return Err(Violation::EmptySequence);
        }
        let mut prev = f64::NEG_INFINITY;
        for (i, ev) in self.events.iter().enumerate() {
            if !ev.timestamp.is_finite() {
                return Err(Violation::NonFiniteTimestamp { event: i });
            }
            if ev.timestamp < 0.0 {
                return Err(Violation::NegativeTimestamp { event: i });
            }
            if i > 0 {
                if ev.timestamp == prev {
                    return Err(Violation::TiedTimestamps { event: i });
                }
                if ev.timestamp < prev {
                    return Err(Violation::NonMonotoneTimestamps { event: i });
                }
            }
            prev = ev.timestamp;
            if ev.type_index >= num_types {
                return Err(Violation::TypeOutOfRange {
                    event: i,
                    type_index: ev.type_index,
                    num_types,
                });
            }
            let found = ev.covariates.as_ref().map(|z| z.len()).unwrap_or(0);
            if found != covariate_dim {
                return Err(Violation::CovariateLengthMismatch {
                    event: i,
                    expected: covariate_dim,
                    found,
                });
            }
            if let Some(z) = &ev.covariates {
                if z.iter().any(|v| !v.is_finite()) {
                    return Err(Violation::NonFiniteCovariate { event: i });
                }
            }
        }
        Ok(())
    }
}

/// A violated sequence invariant, reported with the offending event index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    EmptySequence,
    NonFiniteTimestamp {
        event: usize,
    },
    NegativeTimestamp {
        event: usize,
    },
    TiedTimestamps {
        event: usize,
    },
    NonMonotoneTimestamps {
        event: usize,
    },
    TypeOutOfRange {
        event: usize,
        type_index: usize,
        num_types: usize,
    },
    CovariateLengthMismatch {
        event: usize,
        expected: usize,
        found: usize,
    },
    NonFiniteCovariate {
        event: usize,
    },
}

impl core::fmt::Display for Violation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Violation::EmptySequence => write!(f, "empty sequence"),
            Violation::NonFiniteTimestamp { event } => {
                write!(f, "non-finite timestamp at event {event}")
            }
            Violation::NegativeTimestamp { event } => {
                write!(f, "negative timestamp at event {event}")
            }
            Violation::TiedTimestamps { event } => write!(f, "tied timestamps at event {event}"),
            Violation::NonMonotoneTimestamps { event } => {
                write!(f, "non-monotone timestamps at event {event}")
            }
            Violation::TypeOutOfRange {
                event,
                type_index,
                num_types,
            } => write!(
                f,
                "type index out of range at event {event}: {type_index} >= {num_types}"
            ),
            Violation::CovariateLengthMismatch {
                event,
                expected,
                found,
            } => write!(
                f,
                "covariate length mismatch at event {event}: expected {expected}, found {found}"
            ),
            Violation::NonFiniteCovariate { event } => {
                write!(f, "non-finite covariate at event {event}")
            }
        }
    }
}

/// Errors from dataset construction and splitting.
#[derive(Clone, Debug, PartialEq)]
pub enum DataError {
    EmptyDataset,
    InvalidSequence { sequence: usize, violation: Violation },
    RatioSum { sum: f64 },
    NonPositiveRatio,
}

impl core::fmt::Display for DataError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            DataError::EmptyDataset => write!(f, "dataset has no sequences"),
            DataError::InvalidSequence {
                sequence,
                violation,
            } => write!(f, "sequence {sequence}: {violation}"),
            DataError::RatioSum { sum } => {
                write!(f, "split ratios must sum to 1, got {sum}")
            }
            DataError::NonPositiveRatio => write!(f, "split ratios must be positive"),
        }
    }
}

impl core::error::Error for DataError {}

/// Per-sequence validation outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceCheck {
    pub index: usize,
    pub violation: Option<Violation>,
}

/// Validation report: one entry per sequence, first violation only.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<SequenceCheck>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.violation.is_none())
    }

    pub fn failures(&self) -> impl Iterator<Item = &SequenceCheck> {
        self.checks.iter().filter(|c| c.violation.is_some())
    }
}

/// An immutable collection of event sequences over a shared type vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    sequences: Vec<EventSequence>,
    num_types: usize,
    covariate_dim: usize,
    time_unit: String,
}

impl Dataset {
    /// Builds a dataset, checking every sequence invariant.
    pub fn new(
        sequences: Vec<EventSequence>,
        num_types: usize,
        covariate_dim: usize,
        time_unit: String,
    ) -> Result<Self, DataError> {
        let ds = Dataset::new_unchecked(sequences, num_types, covariate_dim, time_unit);
        if ds.sequences.is_empty() {
            return Err(DataError::EmptyDataset);
        }
        match ds.validate().failures().next() {
            None => Ok(ds),
            Some(check) => Err(DataError::InvalidSequence {
                sequence: check.index,
                violation: check.violation.clone().unwrap(),
            }),
        }
    }

    /// Builds without validation; used when invariants are guaranteed by the
    /// producer (e.g. the simulator) or when constructing data to validate.
    pub fn new_unchecked(
        sequences: Vec<EventSequence>,
        num_types: usize,
        covariate_dim: usize,
        time_unit: String,
    ) -> Self {
        Dataset {
            sequences,
            num_types,
            covariate_dim,
            time_unit,
        }
    }

    pub fn sequences(&self) -> &[EventSequence] {
        &self.sequences
    }

    pub fn num_types(&self) -> usize {
        self.num_types
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariate_dim
    }

    pub fn time_unit(&self) -> &str {
        &self.time_unit
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Per-sequence pass/fail with the first violated invariant.
    pub fn validate(&self) -> ValidationReport {
        let checks = self
            .sequences
            .iter()
            .enumerate()
            .map(|(index, seq)| SequenceCheck {
                index,
                violation: seq.check(self.num_types, self.covariate_dim).err(),
            })
            .collect();
        ValidationReport { checks }
    }

    /// Splits into (train, val, test) by whole sequences.
    ///
    /// Sizes are floor-allocated from the ratios with the remainder assigned
    /// to train; the same seed always yields the same partition.
    pub fn split(
        &self,
        ratios: (f64, f64, f64),
        seed: u64,
    ) -> Result<(Dataset, Dataset, Dataset), DataError> {
        let (rt, rv, rs) = ratios;
        if rt <= 0.0 || rv <= 0.0 || rs <= 0.0 {
            return Err(DataError::NonPositiveRatio);
        }
        let sum = rt + rv + rs;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DataError::RatioSum { sum });
        }
        if self.sequences.is_empty() {
            return Err(DataError::EmptyDataset);
        }

        let n = self.sequences.len();
        let mut n_train = (rt * n as f64) as usize;
        let n_val = (rv * n as f64) as usize;
        let n_test = (rs * n as f64) as usize;
        n_train += n - (n_train + n_val + n_test); // remainder to train

        let mut order: Vec<usize> = (0..n).collect();
        let mut stream = Stream::derived(seed, &[rng::tag::SPLIT]);
        stream.shuffle(&mut order);

        let pick = |idx: &[usize]| {
            Dataset::new_unchecked(
                idx.iter().map(|&i| self.sequences[i].clone()).collect(),
                self.num_types,
                self.covariate_dim,
                self.time_unit.clone(),
            )
        };
        let train = pick(&order[..n_train]);
        let val = pick(&order[n_train..n_train + n_val]);
        let test = pick(&order[n_train + n_val..]);
        Ok((train, val, test))
    }
}
