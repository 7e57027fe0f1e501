use std::io::Write;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Wrapper written around every JSON report.
#[derive(Debug, Serialize)]
pub struct ReportEnvelope<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub timestamp: String,
    pub payload: &'a T,
}

impl<'a, T: Serialize> ReportEnvelope<'a, T> {
    pub fn new(seed: Option<u64>, payload: &'a T) -> Self {
        ReportEnvelope {
            tool: "gstat",
            version: env!("CARGO_PKG_VERSION"),
            command: std::env::args().collect(),
            seed,
            timestamp: timestamp(),
            payload,
        }
    }
}

/// RFC 3339 time, taken from `SOURCE_DATE_EPOCH` when that is set.
fn timestamp() -> String {
    let fixed = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse::<i64>().ok())
        .and_then(|secs| DateTime::from_timestamp(secs, 0));
    fixed.unwrap_or_else(Utc::now).to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Writes the envelope to `path`, or to stdout for `-`.
pub fn write_report<T: Serialize>(path: &Path, seed: Option<u64>, payload: &T) -> CliResult<()> {
    let envelope = ReportEnvelope::new(seed, payload);
    let mut text = serde_json::to_string_pretty(&envelope)
        .map_err(|source| CliError::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    if path == Path::new("-") {
        std::io::stdout().lock().write_all(text.as_bytes()).map_err(io)
    } else {
        std::fs::write(path, text).map_err(io)
    }
}
