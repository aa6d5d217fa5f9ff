//! Deterministic file output.
//!
//! Traces go to CSV, summaries and specs to JSON. CSV floats are printed
//! with 17 significant digits so reruns are byte-comparable and values
//! round-trip losslessly; JSON uses serde_json's shortest-round-trip float
//! encoding, which is likewise lossless and byte-stable.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

/// 17-significant-digit float rendering for CSV cells.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating output directory {}", parent.display()))?;
    }
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("serializing JSON output")?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut content = String::with_capacity(header.len() + rows.len() * 64);
    content.push_str(header);
    content.push('\n');
    for row in rows {
        content.push_str(row);
        content.push('\n');
    }
    write_text(path, &content)
}
