//! CSV formats for time records and FRF tables.
//!
//! Time records: `sample_index,time_s,value`.
//! FRF tables: `bin,freq_hz,re,im,mag_db,phase_rad,variance,valid_flag`, with
//! `NaN` for values that do not exist at a bin.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimators::{EtfeEstimate, FrfEstimate, SparseEstimate, SparseStatus};

pub const RECORD_HEADER: [&str; 3] = ["sample_index", "time_s", "value"];
pub const FRF_HEADER: [&str; 8] = ["bin", "freq_hz", "re", "im", "mag_db", "phase_rad", "variance", "valid_flag"];

pub fn write_record_csv<W: Write>(writer: W, record: &[f64], ts: f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RECORD_HEADER)?;
    for (i, x) in record.iter().enumerate() {
        w.write_record([i.to_string(), (i as f64 * ts).to_string(), x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `sample_index,time_s,value` file. Rows must be in index order
/// starting at 0. Returns the values and the sampling time implied by the
/// first two rows, if there are two.
pub fn read_record_csv<R: Read>(reader: R) -> Result<(Vec<f64>, Option<f64>)> {
    let mut r = csv::Reader::from_reader(reader);
    let mut values = Vec::new();
    let mut times = Vec::new();
    for (expected, row) in r.records().enumerate() {
        let row = row?;
        let field = |i: usize| -> Result<&str> {
            row.get(i)
                .ok_or_else(|| Error::InvalidGrid(format!("row {expected}: missing column {i}")))
        };
        let idx: usize = field(0)?
            .trim()
            .parse()
            .map_err(|_| Error::InvalidGrid(format!("row {expected}: bad sample_index")))?;
        if idx != expected {
            return Err(Error::InvalidGrid(format!(
                "sample_index {idx} out of order (expected {expected})"
            )));
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| Error::InvalidGrid(format!("row {expected}: bad {what}")))
        };
        times.push(parse(field(1)?, "time_s")?);
        values.push(parse(field(2)?, "value")?);
    }
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let ts = (times.len() > 1).then(|| times[1] - times[0]);
    Ok((values, ts))
}

/// One line of an FRF table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrfRow {
    pub bin: usize,
    pub freq_hz: f64,
    pub value: Complex64,
    pub variance: f64,
    pub valid: bool,
}

pub fn write_frf_csv<W: Write>(writer: W, rows: &[FrfRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(FRF_HEADER)?;
    for row in rows {
        let mag_db = 20.0 * row.value.norm().log10();
        w.write_record([
            row.bin.to_string(),
            row.freq_hz.to_string(),
            row.value.re.to_string(),
            row.value.im.to_string(),
            mag_db.to_string(),
            row.value.arg().to_string(),
            row.variance.to_string(),
            u8::from(row.valid).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

impl FrfEstimate {
    pub fn rows(&self) -> Vec<FrfRow> {
        (0..self.grid.n())
            .map(|k| FrfRow {
                bin: k,
                freq_hz: self.grid.hz(k),
                value: self.frf[k],
                variance: self.variance[k],
                valid: self.status[k].is_valid(),
            })
            .collect()
    }
}

impl EtfeEstimate {
    pub fn rows(&self) -> Vec<FrfRow> {
        (0..self.grid.n())
            .map(|k| FrfRow {
                bin: k,
                freq_hz: self.grid.hz(k),
                value: self.frf[k],
                variance: f64::NAN,
                valid: self.valid[k],
            })
            .collect()
    }
}

impl SparseEstimate {
    /// Rows for the estimated bins only; bins with interference are written
    /// with `valid_flag = 0`.
    pub fn rows(&self) -> Vec<FrfRow> {
        self.bins
            .iter()
            .map(|b| FrfRow {
                bin: b.bin,
                freq_hz: self.grid.hz(b.bin),
                value: b.frf,
                variance: f64::NAN,
                valid: b.status == SparseStatus::Valid,
            })
            .collect()
    }
}
