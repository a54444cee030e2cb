//! Run traces: newline-delimited JSON streams of per-step records.
//!
//! A trace file is a header line (the full experiment spec), one record
//! line per streamed step, and a footer line with summary metrics. The
//! file contains no timings, so identical runs produce identical bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::runner::ExperimentSpec;
use crate::error::{Error, Result};

pub const TRACE_FORMAT: &str = "elm-readout-trace";
pub const TRACE_VERSION: u32 = 1;

/// One streamed step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Update counter, starting at 1 for the first sample.
    pub k: u64,
    pub target: Vec<f64>,
    pub prediction: Vec<f64>,
    /// Euclidean norm of target minus prediction.
    pub error: f64,
}

/// Summary numbers for one finished run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub steps: u64,
    /// Window length used for `rms_final`, when one applied.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rms_window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rms_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rms_all: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub classification_error: Option<f64>,
    /// Relative Frobenius distance to the batch solution, when computed.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub oracle_rel_diff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub theta_min_diag: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub theta_offdiag_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub spec: ExperimentSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceFooter {
    pub metrics: RunMetrics,
}

/// Receives the pieces of a run in order: header, records, footer.
pub trait TraceSink {
    fn begin(&mut self, header: &TraceHeader) -> Result<()>;
    fn record(&mut self, record: &TraceRecord) -> Result<()>;
    fn finish(&mut self, footer: &TraceFooter) -> Result<()>;
}

/// Writes the trace to a file as it streams.
pub struct FileSink {
    path: String,
    writer: BufWriter<File>,
}

impl FileSink {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(FileSink {
            path: path.display().to_string(),
            writer: BufWriter::new(file),
        })
    }

    fn write_line<T: Serialize>(&mut self, value: &T) -> Result<()> {
        let line = serde_json::to_string(value).map_err(|e| Error::Snapshot(e.to_string()))?;
        self.writer
            .write_all(line.as_bytes())
            .and_then(|_| self.writer.write_all(b"\n"))
            .map_err(|e| Error::io(self.path.clone(), e))
    }
}

impl TraceSink for FileSink {
    fn begin(&mut self, header: &TraceHeader) -> Result<()> {
        self.write_line(header)
    }

    fn record(&mut self, record: &TraceRecord) -> Result<()> {
        self.write_line(record)
    }

    fn finish(&mut self, footer: &TraceFooter) -> Result<()> {
        self.write_line(footer)?;
        self.writer.flush().map_err(|e| Error::io(self.path.clone(), e))
    }
}

/// Keeps the whole trace in memory, for tests and metric extraction.
#[derive(Default)]
pub struct MemorySink {
    pub header: Option<TraceHeader>,
    pub records: Vec<TraceRecord>,
    pub footer: Option<TraceFooter>,
}

impl MemorySink {
    pub fn new() -> Self {
        MemorySink::default()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.error).collect()
    }
}

impl TraceSink for MemorySink {
    fn begin(&mut self, header: &TraceHeader) -> Result<()> {
        self.header = Some(header.clone());
        Ok(())
    }

    fn record(&mut self, record: &TraceRecord) -> Result<()> {
        self.records.push(record.clone());
        Ok(())
    }

    fn finish(&mut self, footer: &TraceFooter) -> Result<()> {
        self.footer = Some(footer.clone());
        Ok(())
    }
}

/// Counts records and otherwise discards everything.
#[derive(Default)]
pub struct NullSink {
    pub records_seen: u64,
}

impl NullSink {
    pub fn new() -> Self {
        NullSink::default()
    }
}

impl TraceSink for NullSink {
    fn begin(&mut self, _header: &TraceHeader) -> Result<()> {
        Ok(())
    }

    fn record(&mut self, _record: &TraceRecord) -> Result<()> {
        self.records_seen += 1;
        Ok(())
    }

    fn finish(&mut self, _footer: &TraceFooter) -> Result<()> {
        Ok(())
    }
}

/// Reads a trace file back into its three parts.
pub fn read_trace(path: &Path) -> Result<(TraceHeader, Vec<TraceRecord>, TraceFooter)> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = BufReader::new(file);
    let parse_err = |line_no: u64, message: String| Error::Parse {
        path: path.display().to_string(),
        unit: "line",
        position: line_no,
        message,
    };
    let mut header: Option<TraceHeader> = None;
    let mut records = Vec::new();
    let mut footer: Option<TraceFooter> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        if footer.is_some() {
            return Err(parse_err(line_no, "content after footer line".into()));
        }
        if header.is_none() {
            let h: TraceHeader =
                serde_json::from_str(&line).map_err(|e| parse_err(line_no, e.to_string()))?;
            if h.format != TRACE_FORMAT {
                return Err(parse_err(line_no, format!("unknown format {:?}", h.format)));
            }
            if h.version != TRACE_VERSION {
                return Err(parse_err(
                    line_no,
                    format!("unsupported version {}, expected {TRACE_VERSION}", h.version),
                ));
            }
            header = Some(h);
            continue;
        }
        if line.contains("\"metrics\"") {
            let f: TraceFooter =
                serde_json::from_str(&line).map_err(|e| parse_err(line_no, e.to_string()))?;
            footer = Some(f);
            continue;
        }
        let r: TraceRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(line_no, e.to_string()))?;
        records.push(r);
    }
    match (header, footer) {
        (Some(h), Some(f)) => Ok((h, records, f)),
        (None, _) => Err(parse_err(1, "missing header line".into())),
        (_, None) => Err(parse_err(
            records.len() as u64 + 2,
            "missing footer line".into(),
        )),
    }
}
