//! Deterministic CSV and plain-text report emission, shared by the
//! integration tests and the command-line driver.
//!
//! Every writer serializes floats with 17 significant digits (enough to
//! round-trip an IEEE double bit-for-bit), writes LF line endings, and
//! lands atomically: the bytes go to a sibling temporary file first and
//! are renamed over the destination, so a crashed run never leaves a
//! half-written artifact behind.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::convex::SolverReport;
use crate::grid::{Grid, ScalarField};
use crate::multiplicity::ContinuationOutcome;
use crate::singular::SingularReport;

/// Errors from reading or writing solver artifacts.
#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed data in {path}: {detail}")]
    Format { path: String, detail: String },
}

/// Format one float with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write bytes atomically: temporary sibling file, then rename.
fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    fs::write(tmp, bytes)?;
    fs::rename(tmp, path)?;
    Ok(())
}

/// Write a nodal field as CSV with columns `x,u` (1D) or `x,y,u` (2D),
/// one row per grid node in node order.
pub fn write_field_csv(path: &Path, field: &ScalarField) -> Result<(), IoError> {
    let grid = field.grid();
    let mut out = String::new();
    match grid.dim() {
        1 => out.push_str("x,u\n"),
        _ => out.push_str("x,y,u\n"),
    }
    for i in 0..grid.node_count() {
        let coords = grid.node_coord(i);
        for c in coords.iter() {
            let _ = write!(out, "{},", fmt_float(*c));
        }
        let _ = writeln!(out, "{}", fmt_float(field.values()[i]));
    }
    atomic_write(path, out.as_bytes())
}

/// Read a nodal field back from the CSV layout written by
/// [`write_field_csv`], verifying the node count and coordinates
/// against `grid`.
pub fn read_field_csv(path: &Path, grid: &Arc<Grid>) -> Result<ScalarField, IoError> {
    let text = fs::read_to_string(path)?;
    let display = path.display().to_string();
    let format_err = |detail: String| IoError::Format { path: display.clone(), detail };

    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| format_err("empty file".into()))?
        .trim();
    let expected_header = if grid.dim() == 1 { "x,u" } else { "x,y,u" };
    if header != expected_header {
        return Err(format_err(format!(
            "expected header '{expected_header}', found '{header}'"
        )));
    }

    let mut values = Vec::with_capacity(grid.node_count());
    for (row, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != grid.dim() + 1 {
            return Err(format_err(format!(
                "row {}: expected {} columns, found {}",
                row + 2,
                grid.dim() + 1,
                fields.len()
            )));
        }
        let node = values.len();
        if node >= grid.node_count() {
            return Err(format_err(format!(
                "more rows than the {} grid nodes",
                grid.node_count()
            )));
        }
        let coords = grid.node_coord(node);
        for (d, (&want, text)) in coords.iter().zip(&fields).enumerate() {
            let got: f64 = text.trim().parse().map_err(|_| {
                format_err(format!("row {}: unparsable coordinate '{text}'", row + 2))
            })?;
            if (got - want).abs() > 1e-8 * (1.0 + want.abs()) {
                return Err(format_err(format!(
                    "row {}: coordinate {d} is {got}, grid expects {want}",
                    row + 2
                )));
            }
        }
        let u: f64 = fields[grid.dim()].trim().parse().map_err(|_| {
            format_err(format!(
                "row {}: unparsable value '{}'",
                row + 2,
                fields[grid.dim()]
            ))
        })?;
        values.push(u);
    }
    if values.len() != grid.node_count() {
        return Err(format_err(format!(
            "expected {} rows, found {}",
            grid.node_count(),
            values.len()
        )));
    }
    ScalarField::new(grid.clone(), values)
        .map_err(|e| format_err(format!("field rejected: {e}")))
}

/// Write the iteration log `iter,energy,grad_norm` from a solver
/// report's recorded histories.
pub fn write_log_csv(path: &Path, report: &SolverReport) -> Result<(), IoError> {
    let mut out = String::from("iter,energy,grad_norm\n");
    let rows = report.energy_history.len().max(report.grad_history.len());
    for i in 0..rows {
        let energy = report.energy_history.get(i).copied().unwrap_or(f64::NAN);
        let grad = report.grad_history.get(i).copied().unwrap_or(f64::NAN);
        let _ = writeln!(out, "{i},{},{}", fmt_float(energy), fmt_float(grad));
    }
    atomic_write(path, out.as_bytes())
}

/// Write the per-level singular continuation log
/// `n,inner_iters,outer_gap,interior_min,seminorm`.
pub fn write_singular_levels_csv(path: &Path, report: &SingularReport) -> Result<(), IoError> {
    let mut out = String::from("n,inner_iters,outer_gap,interior_min,seminorm\n");
    for level in &report.levels {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            level.n,
            level.inner_iterations,
            fmt_float(level.outer_gap),
            fmt_float(level.interior_min),
            fmt_float(level.seminorm)
        );
    }
    atomic_write(path, out.as_bytes())
}

/// Write the per-level two-solution log
/// `eps,I_nu,I_zeta,rho,seminorm_zeta,distinctness`.
pub fn write_multiplicity_csv(path: &Path, outcome: &ContinuationOutcome) -> Result<(), IoError> {
    let mut out = String::from("eps,I_nu,I_zeta,rho,seminorm_zeta,distinctness\n");
    for pair in &outcome.pairs {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_float(pair.epsilon),
            fmt_float(pair.i_nu),
            fmt_float(pair.i_zeta),
            fmt_float(outcome.constants.rho),
            fmt_float(pair.seminorm_zeta),
            fmt_float(pair.distinctness)
        );
    }
    atomic_write(path, out.as_bytes())
}

/// Write a plain-text report of `key = value` lines, in the order
/// given.
pub fn write_report_txt(path: &Path, entries: &[(String, String)]) -> Result<(), IoError> {
    let mut out = String::new();
    for (key, value) in entries {
        let _ = writeln!(out, "{key} = {value}");
    }
    atomic_write(path, out.as_bytes())
}
