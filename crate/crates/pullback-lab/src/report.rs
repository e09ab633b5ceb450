//! CSV and plain-text artifact emission.
//!
//! One dialect only: comma separators, '.' decimal point, a header row,
//! and 17 significant digits so every double round-trips losslessly.
//! Nothing here writes timestamps or hostnames — identical runs must
//! produce identical bytes.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Lossless float cell: 17 significant digits in scientific notation.
pub fn fnum(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write `content`, creating parent directories as needed.
pub fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

/// Write a CSV table. Every row must match the header width.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        assert_eq!(
            row.len(),
            header.len(),
            "row width {} != header width {}",
            row.len(),
            header.len()
        );
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}
