//! Per-checkpoint convergence records and their CSV form.
//!
//! CSV header: `iter,elapsed_ns,objective,suboptimality,grad_inf_norm`.
//! Unavailable values are written as empty fields.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One checkpoint. `iter` is the index `t` of the iterate `w_t`; the starting
/// point is `iter = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: u64,
    pub elapsed_ns: Option<u64>,
    pub objective: f64,
    pub suboptimality: Option<f64>,
    pub grad_inf_norm: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn push(&mut self, row: TraceRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.iter <= last.iter {
                return Err(Error::InvalidParameter(format!(
                    "trace iterations must increase ({} after {})",
                    row.iter, last.iter
                )));
            }
        }
        if !row.objective.is_finite() {
            return Err(Error::NonFinite("objective"));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Same rows with timing removed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Trace {
        Trace {
            rows: self
                .rows
                .iter()
                .map(|r| TraceRow {
                    elapsed_ns: None,
                    ..*r
                })
                .collect(),
        }
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.rows.is_empty() {
            w.write_record([
                "iter",
                "elapsed_ns",
                "objective",
                "suboptimality",
                "grad_inf_norm",
            ])?;
        }
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(input: impl Read) -> Result<Trace> {
        let mut r = csv::Reader::from_reader(input);
        let mut trace = Trace::default();
        for row in r.deserialize() {
            trace.push(row?)?;
        }
        Ok(trace)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Trace> {
        Trace::read_csv(File::open(path)?)
    }
}
