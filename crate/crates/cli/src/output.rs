use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Something that can be written as a JSON document or a CSV table.
pub trait Report: Serialize {
    fn header(&self) -> Vec<&'static str>;
    fn rows(&self) -> Vec<Vec<String>>;
}

pub fn num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn render<R: Report>(report: &R, format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Json => {
            let mut buf = serde_json::to_vec_pretty(report).map_err(|e| CliError::Failure(e.to_string()))?;
            buf.push(b'\n');
            Ok(buf)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| CliError::Failure(e.to_string());
            w.write_record(report.header()).map_err(io)?;
            for row in report.rows() {
                w.write_record(&row).map_err(io)?;
            }
            w.into_inner().map_err(|e| CliError::Failure(e.to_string()))
        }
    }
}

pub fn emit<R: Report>(report: &R, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let bytes = render(report, format)?;
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&bytes).and_then(|_| stdout.flush()).map_err(|e| CliError::Failure(e.to_string()))
        }
    }
}
