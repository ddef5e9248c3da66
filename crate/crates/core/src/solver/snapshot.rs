//! Plain-text state snapshots: `r,u,v` CSV plus a JSON sidecar.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FieldState, RadialGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub d: usize,
    pub p: f64,
    pub h: f64,
    pub n: usize,
    pub t: f64,
}

/// Formats with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn write_snapshot(path: &Path, state: &FieldState, grid: &RadialGrid, p: f64) -> Result<()> {
    grid.check_len("snapshot", state.u.len())?;
    let mut out = String::with_capacity(64 * state.u.len());
    out.push_str("r,u,v\n");
    for ((r, u), v) in grid.centers().iter().zip(&state.u).zip(&state.v) {
        let _ = writeln!(out, "{},{},{}", fmt_f64(*r), fmt_f64(*u), fmt_f64(*v));
    }
    fs::write(path, out)?;
    let meta = SnapshotMeta {
        d: grid.dim(),
        p,
        h: grid.h(),
        n: grid.n(),
        t: state.t,
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotMeta, FieldState)> {
    let meta: SnapshotMeta = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some("r,u,v") {
        return Err(Error::Contract(format!("{}: missing `r,u,v` header", path.display())));
    }
    let mut u = Vec::with_capacity(meta.n);
    let mut v = Vec::with_capacity(meta.n);
    for (i, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|e| {
                Error::Contract(format!("{}: row {}: {e}", path.display(), i + 1))
            })
        };
        if cols.len() != 3 {
            return Err(Error::Contract(format!("{}: row {} has {} columns", path.display(), i + 1, cols.len())));
        }
        u.push(parse(cols[1])?);
        v.push(parse(cols[2])?);
    }
    if u.len() != meta.n {
        return Err(Error::Contract(format!(
            "{}: {} rows but sidecar says n = {}",
            path.display(),
            u.len(),
            meta.n
        )));
    }
    Ok((meta, FieldState { t: meta.t, u, v }))
}
