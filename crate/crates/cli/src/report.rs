//! `report`: recompute estimates from a run directory's stored traces.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::output::write_json;
use crate::simulate::{derive, derived_scalars, Derived, Traces};
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub derived: Derived,
    pub scalars: BTreeMap<String, f64>,
    /// Largest relative gap to the same scalar in `manifest.json`.
    pub max_manifest_gap: f64,
    pub compared: usize,
}

fn read(dir: &Path, name: &str) -> CliResult<String> {
    fs::read_to_string(dir.join(name))
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", dir.join(name).display())))
}

/// Loads `traces.json`, re-derives flux ledgers, the rediscover identity and
/// decay fits, writes `report.json` and compares with the manifest.
pub fn report(dir: &Path) -> CliResult<Report> {
    let traces: Traces = serde_json::from_str(&read(dir, "traces.json")?)
        .map_err(|e| CliError::Config(format!("traces.json: {e}")))?;
    let derived = derive(&traces)?;
    let mut scalars = BTreeMap::new();
    derived_scalars(&traces, &derived, &mut scalars);

    let manifest: serde_json::Value = serde_json::from_str(&read(dir, "manifest.json")?)
        .map_err(|e| CliError::Config(format!("manifest.json: {e}")))?;
    let stored = manifest.get("scalars").and_then(|s| s.as_object());
    let mut gap: f64 = 0.0;
    let mut compared = 0;
    for (k, v) in &scalars {
        if let Some(old) = stored.and_then(|s| s.get(k)).and_then(|x| x.as_f64()) {
            gap = gap.max((v - old).abs() / old.abs().max(1e-300));
            compared += 1;
        }
    }
    let rep = Report {
        derived,
        scalars,
        max_manifest_gap: gap,
        compared,
    };
    write_json(&dir.join("report.json"), &rep)?;
    Ok(rep)
}
