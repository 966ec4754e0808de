//! CSV schema for convergence scans.
//!
//! Row layout (header mandatory, UTF-8, LF line endings):
//!
//! ```text
//! tuple,k,H,S_estimate,S_interval_halfwidth,num_zero_terms,num_member_terms,T
//! ```
//!
//! The tuple column uses the "0,2,6" text format, so it is always quoted.
//! Floats are written in shortest round-trip form; parsing a file back
//! yields bit-identical values.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::averaging::AverageReport;
use crate::error::{Error, Result};
use crate::tuples::HTuple;

/// Column names, in order.
pub const SCAN_HEADER: [&str; 8] = [
    "tuple",
    "k",
    "H",
    "S_estimate",
    "S_interval_halfwidth",
    "num_zero_terms",
    "num_member_terms",
    "T",
];

/// One scan row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub tuple: String,
    pub k: usize,
    #[serde(rename = "H")]
    pub horizon: u64,
    #[serde(rename = "S_estimate")]
    pub s_estimate: f64,
    #[serde(rename = "S_interval_halfwidth")]
    pub s_interval_halfwidth: f64,
    pub num_zero_terms: u64,
    pub num_member_terms: u64,
    #[serde(rename = "T")]
    pub truncation: u64,
}

impl From<&AverageReport> for ScanRecord {
    fn from(r: &AverageReport) -> Self {
        ScanRecord {
            tuple: r.tuple.to_string(),
            k: r.tuple.k(),
            horizon: r.horizon,
            s_estimate: r.value.estimate(),
            s_interval_halfwidth: r.value.halfwidth(),
            num_zero_terms: r.num_zero_terms,
            num_member_terms: r.num_member_terms,
            truncation: r.value.truncation(),
        }
    }
}

impl ScanRecord {
    /// Parse the tuple column back into its canonical form.
    pub fn parse_tuple(&self) -> Result<HTuple> {
        self.tuple.parse()
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(format!("csv: {e}"))
    }
}

/// Write reports as schema CSV with the mandatory header.
pub fn write_scan_csv<W: Write>(reports: &[AverageReport], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for r in reports {
        w.serialize(ScanRecord::from(r))?;
    }
    w.flush().map_err(|e| Error::Parse(format!("csv: {e}")))?;
    Ok(())
}

/// Convenience wrapper returning the CSV as a string.
pub fn scan_csv_string(reports: &[AverageReport]) -> Result<String> {
    let mut buf = Vec::new();
    write_scan_csv(reports, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Parse(format!("csv output not utf-8: {e}")))
}

/// Parse schema CSV, validating the header row exactly.
pub fn parse_scan_csv<R: Read>(input: R) -> Result<Vec<ScanRecord>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().ne(SCAN_HEADER.iter().copied()) {
        return Err(Error::Parse(format!(
            "unexpected CSV header {:?}, expected {:?}",
            headers.iter().collect::<Vec<_>>(),
            SCAN_HEADER
        )));
    }
    let mut out = Vec::new();
    for row in reader.deserialize() {
        out.push(row?);
    }
    Ok(out)
}
