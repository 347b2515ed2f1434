//! The machine-readable output record and its JSON/CSV serializers.
//!
//! The JSON schema is versioned and key order is fixed by declaration
//! order, so a record round-trips byte-for-byte through parse → serialize.
//! Every number emitted is finite: bounds that do not exist (point-estimate
//! modes) or do not localize (an unbounded upper ε) are `null` in JSON and
//! empty fields in CSV, never 0, with a diagnostic explaining why.

use serde::{Deserialize, Serialize};

use crate::{param, CliError};
use crate::opts::FormatArg;

pub const SCHEMA_VERSION: &str = "1";

/// Echo of the resolved request. Fields that do not apply to the command
/// (`m` for sweeps, `eps` for inversions, …) are `null`; the key set is
/// identical for every command so consumers can parse one shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequestEcho {
    pub command: String,
    pub mechanism: String,
    pub m: Option<u64>,
    /// Subsampling probability; `null` when a non-constant schedule drives
    /// the sweep (see `p_rule`).
    pub p: Option<f64>,
    /// Noise multiplier as given; `null` when the shift was given as μ.
    pub sigma: Option<f64>,
    /// Effective shift μ (1/σ when σ was given).
    pub mu: f64,
    pub order: u32,
    pub mode: String,
    pub smoothing_eps: f64,
    pub seed: Option<u64>,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub m_grid: Option<String>,
    pub p_rule: Option<String>,
}

/// One evaluated point. δ rows come from the delta command, ε rows from
/// epsilon and curve; a curve point that failed keeps its `m` with null
/// values and a diagnostic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResultRow {
    Delta {
        m: u64,
        epsilon: f64,
        delta_lower: Option<f64>,
        delta_est: f64,
        delta_upper: Option<f64>,
    },
    Epsilon {
        m: u64,
        eps_lower: Option<f64>,
        eps_est: Option<f64>,
        eps_upper: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub schema_version: String,
    pub request: RequestEcho,
    pub results: Vec<ResultRow>,
    /// Wall-clock evaluation time; present only when --timing was given,
    /// so default invocations stay byte-reproducible.
    pub timing_ms: Option<u64>,
    pub diagnostics: Vec<String>,
}

/// Rendered output: the bytes for stdout (or --out) plus diagnostics that
/// have no place inside the payload (CSV keeps its fixed columns, so its
/// diagnostics go to stderr).
pub struct Emission {
    pub bytes: Vec<u8>,
    pub stderr: Vec<String>,
    pub out: Option<std::path::PathBuf>,
}

fn fmt_cell(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v}"),
        None => String::new(),
    }
}

pub fn to_json_bytes(record: &OutputRecord) -> Result<Vec<u8>, CliError> {
    let mut text = serde_json::to_string_pretty(record)
        .map_err(|e| param(format!("cannot serialize record: {e}")))?;
    text.push('\n');
    Ok(text.into_bytes())
}

pub fn to_csv_bytes(record: &OutputRecord) -> Result<Vec<u8>, CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| param(format!("cannot serialize record: {e}"));
    if record.request.command == "delta" {
        writer
            .write_record(["m", "epsilon", "delta_lower", "delta_est", "delta_upper"])
            .map_err(io_err)?;
    } else {
        writer
            .write_record(["m", "eps_lower", "eps_est", "eps_upper"])
            .map_err(io_err)?;
    }
    for row in &record.results {
        match *row {
            ResultRow::Delta {
                m,
                epsilon,
                delta_lower,
                delta_est,
                delta_upper,
            } => writer
                .write_record([
                    m.to_string(),
                    format!("{epsilon}"),
                    fmt_cell(delta_lower),
                    format!("{delta_est}"),
                    fmt_cell(delta_upper),
                ])
                .map_err(io_err)?,
            ResultRow::Epsilon {
                m,
                eps_lower,
                eps_est,
                eps_upper,
            } => writer
                .write_record([
                    m.to_string(),
                    fmt_cell(eps_lower),
                    fmt_cell(eps_est),
                    fmt_cell(eps_upper),
                ])
                .map_err(io_err)?,
        }
    }
    writer
        .into_inner()
        .map_err(|e| param(format!("cannot serialize record: {e}")))
}

/// Serialize the record in the requested format. CSV carries only the
/// results table; its diagnostics are routed to stderr.
pub fn render(
    record: OutputRecord,
    format: FormatArg,
    out: Option<std::path::PathBuf>,
) -> Result<Emission, CliError> {
    match format {
        FormatArg::Json => Ok(Emission {
            bytes: to_json_bytes(&record)?,
            stderr: Vec::new(),
            out,
        }),
        FormatArg::Csv => Ok(Emission {
            bytes: to_csv_bytes(&record)?,
            stderr: record.diagnostics,
            out,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_record() -> OutputRecord {
        OutputRecord {
            schema_version: SCHEMA_VERSION.into(),
            request: RequestEcho {
                command: "epsilon".into(),
                mechanism: "subsampled-gaussian".into(),
                m: Some(1000),
                p: Some(0.01),
                sigma: Some(0.8),
                mu: 1.25,
                order: 2,
                mode: "aea".into(),
                smoothing_eps: 0.1,
                seed: None,
                eps: None,
                delta: Some(0.015),
                m_grid: None,
                p_rule: None,
            },
            results: vec![ResultRow::Epsilon {
                m: 1000,
                eps_lower: None,
                eps_est: Some(1.1611077524042832),
                eps_upper: None,
            }],
            timing_ms: None,
            diagnostics: vec![],
        }
    }

    #[test]
    fn json_round_trips_byte_for_byte() {
        let record = sample_record();
        let bytes = to_json_bytes(&record).unwrap();
        let reparsed: OutputRecord = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(reparsed, record);
        assert_eq!(to_json_bytes(&reparsed).unwrap(), bytes);
    }

    #[test]
    fn csv_uses_empty_fields_for_missing_bounds() {
        let record = sample_record();
        let text = String::from_utf8(to_csv_bytes(&record).unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("m,eps_lower,eps_est,eps_upper"));
        assert_eq!(lines.next(), Some("1000,,1.1611077524042832,"));
        assert_eq!(lines.next(), None);
    }

    #[test]
    fn delta_rows_and_epsilon_rows_deserialize_distinctly() {
        let delta_row = ResultRow::Delta {
            m: 10,
            epsilon: 2.0,
            delta_lower: None,
            delta_est: 0.25,
            delta_upper: None,
        };
        let eps_row = ResultRow::Epsilon {
            m: 10,
            eps_lower: None,
            eps_est: None,
            eps_upper: None,
        };
        for row in [delta_row, eps_row] {
            let json = serde_json::to_string(&row).unwrap();
            let back: ResultRow = serde_json::from_str(&json).unwrap();
            assert_eq!(back, row);
        }
    }
}
