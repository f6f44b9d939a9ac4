use std::path::Path;

use mismatch_core::sd_bound::{export_trace, BoundResult};

use crate::error::CliError;

/// `v` with ten significant digits in positional notation.
pub fn sig10(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v:.9}");
    }
    let exp = v.abs().log10().floor() as i32;
    let decimals = (9 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

pub fn render(result: &BoundResult) -> String {
    let mut out = String::from("t,value_bits\n");
    for (t, v) in export_trace(result) {
        out.push_str(&format!("{t},{}\n", sig10(v)));
    }
    out
}

pub fn write(path: &Path, result: &BoundResult) -> Result<(), CliError> {
    std::fs::write(path, render(result)).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}
