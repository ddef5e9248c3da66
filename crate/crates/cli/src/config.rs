//! JSON run configuration and its validation into a runnable plan.

use std::fs;
use std::path::{Path, PathBuf};

use inoutwave::estimates::WeightSpec;
use inoutwave::flux::Region;
use inoutwave::mathlib::ModelParams;
use inoutwave::solver::{InitialData, RadialGrid, SolverConfig, VelocityProfile};
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

pub const DEFAULT_CELLS: usize = 2048;
pub const DEFAULT_STRIDE: usize = 10;
pub const DEFAULT_T_FINAL: f64 = 20.0;

/// Extra room beyond the light-cone reach for auto-sized grids: a fixed
/// `AUTO_PAD` plus `AUTO_PAD_CELLS` cells for the scheme's precursor.
pub const AUTO_PAD: f64 = 4.0;
pub const AUTO_PAD_CELLS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub d: usize,
    pub p: f64,
    #[serde(default = "yes")]
    pub nonlinear: bool,
    #[serde(default)]
    pub exploratory: bool,
}

impl ModelSection {
    pub fn params(&self) -> inoutwave::Result<ModelParams> {
        if self.exploratory {
            ModelParams::exploratory(self.d, self.p)
        } else {
            ModelParams::new(self.d, self.p)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Auto {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RMax {
    Fixed(f64),
    Auto(Auto),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "auto")]
    pub r_max: RMax,
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default)]
    pub cfl: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            r_max: RMax::Auto(Auto::Auto),
            cells: DEFAULT_CELLS,
            cfl: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default = "default_stride")]
    pub diagnostic_stride: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            t_final: DEFAULT_T_FINAL,
            diagnostic_stride: DEFAULT_STRIDE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeSection {
    #[serde(default)]
    pub taus: Vec<f64>,
    #[serde(default)]
    pub ss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    #[serde(default = "yes")]
    pub energies: bool,
    #[serde(default)]
    pub cones: Option<ConeSection>,
    /// Each region is an ordered loop of `[r, t]` vertices.
    #[serde(default)]
    pub regions: Vec<Vec<[f64; 2]>>,
    #[serde(default, rename = "morawetz_R")]
    pub morawetz_r: Vec<f64>,
    #[serde(default)]
    pub weights: Vec<WeightSpec>,
    #[serde(default)]
    pub kappa_list: Vec<f64>,
    #[serde(default, rename = "scattering_T_list")]
    pub scattering_t_list: Vec<f64>,
    #[serde(default)]
    pub interior_c_list: Vec<f64>,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Self {
            energies: true,
            cones: None,
            regions: Vec::new(),
            morawetz_r: Vec::new(),
            weights: Vec::new(),
            kappa_list: Vec::new(),
            scattering_t_list: Vec::new(),
            interior_c_list: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default = "default_initial")]
    pub initial: InitialData,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub time: TimeSection,
    #[serde(default)]
    pub diagnostics: Diagnostics,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn yes() -> bool {
    true
}

fn auto() -> RMax {
    RMax::Auto(Auto::Auto)
}

fn default_cells() -> usize {
    DEFAULT_CELLS
}

fn default_t_final() -> f64 {
    DEFAULT_T_FINAL
}

fn default_stride() -> usize {
    DEFAULT_STRIDE
}

fn default_initial() -> InitialData {
    InitialData::compact_bump(0.5, 0.0, 2.0).expect("valid default data")
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("run")
}

/// Everything `simulate` needs, checked.
#[derive(Debug, Clone)]
pub struct Plan {
    pub params: ModelParams,
    pub initial: InitialData,
    pub grid: RadialGrid,
    pub solver: SolverConfig,
    pub stride: usize,
    pub energies: bool,
    pub cones: Option<ConeSection>,
    pub time_symmetric: bool,
    pub regions: Vec<Region>,
    pub morawetz_r: Vec<f64>,
    /// User weights followed by one power weight per entry of `kappa_list`.
    pub weights: Vec<WeightSpec>,
    pub kappa_list: Vec<f64>,
    pub scattering_t: Vec<f64>,
    pub interior_c: Vec<f64>,
}

impl RunConfig {
    pub fn minimal(d: usize, p: f64) -> Self {
        Self {
            model: ModelSection {
                d,
                p,
                nonlinear: true,
                exploratory: false,
            },
            initial: default_initial(),
            grid: GridSection::default(),
            time: TimeSection::default(),
            diagnostics: Diagnostics::default(),
            output_dir: default_output_dir(),
        }
    }

    /// Parses a run config, or the `config` entry of a manifest.
    pub fn from_json(text: &str) -> CliResult<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        let value = match value.get("config") {
            Some(inner) if value.get("code_version").is_some() => inner.clone(),
            _ => value,
        };
        serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Light-cone span the grid must cover: the run itself, and twice each
    /// scattering time for the linear pull-back.
    pub fn causal_span(&self) -> f64 {
        let t_max = self.diagnostics.scattering_t_list.iter().copied().fold(0.0, f64::max);
        self.time.t_final.max(2.0 * t_max)
    }

    pub fn resolve(&self) -> CliResult<Plan> {
        let mut errs = Errors::default();
        let params = errs.take("model", self.model.params());
        errs.take("initial", self.initial.validate());

        let t_final = self.time.t_final;
        if !(t_final >= 0.0) || !t_final.is_finite() {
            errs.push("time.t_final", format!("{t_final} must be finite and >= 0"));
        }
        if self.time.diagnostic_stride == 0 {
            errs.push("time.diagnostic_stride", "must be positive");
        }
        if let Some(c) = self.grid.cfl {
            if !(c > 0.0 && c <= 1.0) {
                errs.push("grid.cfl", format!("{c} must lie in (0, 1]"));
            }
        }

        let dg = &self.diagnostics;
        let mut scattering_t = dg.scattering_t_list.clone();
        scattering_t.sort_by(f64::total_cmp);
        for (i, &t) in scattering_t.iter().enumerate() {
            if !(t > 0.0 && t <= t_final) {
                errs.push(&format!("diagnostics.scattering_T_list[{i}]"), format!("{t} must lie in (0, t_final]"));
            }
        }
        if scattering_t.windows(2).any(|w| w[0] == w[1]) {
            errs.push("diagnostics.scattering_T_list", "duplicate times");
        }
        let step_multiple = match step_multiple(&scattering_t, t_final) {
            Ok(m) => m,
            Err(msg) => {
                errs.push("diagnostics.scattering_T_list", msg);
                1
            }
        };

        let span = self.causal_span();
        let support = self.initial.support_radius();
        let cells = self.grid.cells;
        let r_max = match self.grid.r_max {
            RMax::Auto(_) => {
                if cells <= 2 * AUTO_PAD_CELLS {
                    errs.push("grid.cells", format!("auto r_max needs more than {} cells", 2 * AUTO_PAD_CELLS));
                    None
                } else {
                    Some((support + span + AUTO_PAD) / (1.0 - AUTO_PAD_CELLS as f64 / cells as f64))
                }
            }
            RMax::Fixed(r) => {
                let need = support + span + 2.0 * r / cells.max(1) as f64;
                if !(r > 0.0) || !r.is_finite() {
                    errs.push("grid.r_max", format!("{r} must be positive"));
                    None
                } else if r < need {
                    errs.push(
                        "grid.r_max",
                        format!("{r} too small: support {support} + span {span} needs at least {need}"),
                    );
                    None
                } else {
                    Some(r)
                }
            }
        };
        let grid = match (params.as_ref(), r_max) {
            (Some(pm), Some(r)) => errs.take("grid", RadialGrid::new(pm.d, cells, r)),
            _ => None,
        };

        let solver = SolverConfig {
            cfl: self.grid.cfl,
            t_final,
            nonlinearity_on: self.model.nonlinear,
            step_multiple,
            steps: None,
        };
        if let Some(g) = &grid {
            if self.grid.cfl.is_some_and(|c| c > 0.0 && c <= 1.0) {
                errs.take("grid.cfl", solver.effective_cfl(g));
            }
        }

        let cones = dg.cones.clone();
        if let Some(c) = &cones {
            for (i, &tau) in c.taus.iter().enumerate() {
                if !tau.is_finite() {
                    errs.push(&format!("diagnostics.cones.taus[{i}]"), "must be finite");
                }
            }
            for (i, &s) in c.ss.iter().enumerate() {
                if !(s >= 0.0) || !s.is_finite() {
                    errs.push(&format!("diagnostics.cones.ss[{i}]"), format!("{s} must be finite and >= 0"));
                }
            }
        }

        let mut regions = Vec::new();
        for (i, verts) in dg.regions.iter().enumerate() {
            let pts: Vec<(f64, f64)> = verts.iter().map(|v| (v[0], v[1])).collect();
            let field = format!("diagnostics.regions[{i}]");
            if let Some(region) = errs.take(&field, Region::from_vertices(&pts)) {
                if let Some(g) = &grid {
                    errs.take(&field, region.check_within(g.r_max(), 0.0, t_final));
                }
                regions.push(region);
            }
        }

        for (i, &r) in dg.morawetz_r.iter().enumerate() {
            let upper = grid.as_ref().map_or(f64::INFINITY, |g| g.r_max());
            if !(r > 0.0 && r < upper) {
                errs.push(&format!("diagnostics.morawetz_R[{i}]"), format!("{r} must lie in (0, r_max)"));
            }
        }

        for (i, w) in dg.weights.iter().enumerate() {
            errs.take(&format!("diagnostics.weights[{i}]"), w.validate());
        }
        let mut weights = dg.weights.clone();
        for (i, &k) in dg.kappa_list.iter().enumerate() {
            if !(k > 0.0 && k < 1.0) {
                errs.push(&format!("diagnostics.kappa_list[{i}]"), format!("{k} must lie in (0, 1)"));
            } else {
                weights.push(WeightSpec::power(k));
            }
        }
        for (i, &c) in dg.interior_c_list.iter().enumerate() {
            if !(c > 0.0 && c < 1.0) {
                errs.push(&format!("diagnostics.interior_c_list[{i}]"), format!("{c} must lie in (0, 1)"));
            }
        }

        errs.finish()?;
        Ok(Plan {
            params: params.expect("checked"),
            initial: self.initial,
            grid: grid.expect("checked"),
            solver,
            stride: self.time.diagnostic_stride,
            energies: dg.energies,
            cones,
            time_symmetric: matches!(
                self.initial.velocity_profile,
                VelocityProfile::Zero | VelocityProfile::TimeSymmetric
            ),
            regions,
            morawetz_r: dg.morawetz_r.clone(),
            weights,
            kappa_list: dg.kappa_list.clone(),
            scattering_t,
            interior_c: dg.interior_c_list.clone(),
        })
    }
}

/// Smallest step-count multiple putting every time of `times` on the lattice
/// `k · t_final / n`.
pub fn step_multiple(times: &[f64], t_final: f64) -> Result<usize, String> {
    const MAX_DENOM: usize = 1 << 12;
    let mut m = 1usize;
    for &t in times {
        let x = t / t_final;
        let b = (1..=MAX_DENOM)
            .find(|&b| {
                let y = x * b as f64;
                (y - y.round()).abs() <= 1e-9 * b as f64
            })
            .ok_or_else(|| format!("T = {t} is not a simple fraction of t_final = {t_final}"))?;
        m = lcm(m, b);
        if m > MAX_DENOM {
            return Err(format!("step multiple {m} too large; choose commensurate times"));
        }
    }
    Ok(m)
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

#[derive(Default)]
struct Errors(Vec<String>);

impl Errors {
    fn push(&mut self, field: &str, msg: impl std::fmt::Display) {
        self.0.push(format!("{field}: {msg}"));
    }

    fn take<T>(&mut self, field: &str, r: inoutwave::Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.push(field, e);
                None
            }
        }
    }

    fn finish(self) -> CliResult<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(self.0.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_gets_defaults() {
        let cfg = RunConfig::from_json(r#"{"model": {"d": 3, "p": 3}}"#).unwrap();
        assert_eq!(cfg, RunConfig::minimal(3, 3.0));
        let plan = cfg.resolve().unwrap();
        assert_eq!(plan.grid.n(), DEFAULT_CELLS);
        assert_eq!(plan.stride, DEFAULT_STRIDE);
        assert!(plan.time_symmetric);
    }

    #[test]
    fn r_max_accepts_number_or_auto() {
        let cfg = RunConfig::from_json(r#"{"model": {"d": 3, "p": 3}, "grid": {"r_max": 30, "cells": 512}}"#).unwrap();
        assert_eq!(cfg.grid.r_max, RMax::Fixed(30.0));
        let cfg = RunConfig::from_json(r#"{"model": {"d": 3, "p": 3}, "grid": {"r_max": "auto"}}"#).unwrap();
        assert_eq!(cfg.grid.r_max, RMax::Auto(Auto::Auto));
        assert!(RunConfig::from_json(r#"{"model": {"d": 3, "p": 3}, "grid": {"r_max": "big"}}"#).is_err());
    }

    #[test]
    fn errors_name_their_fields() {
        let mut cfg = RunConfig::minimal(3, 3.0);
        cfg.grid.r_max = RMax::Fixed(10.0);
        cfg.diagnostics.kappa_list = vec![1.5];
        cfg.diagnostics.regions = vec![vec![[0.0, 0.0], [1.0, 0.0]]];
        let CliError::Config(msg) = cfg.resolve().unwrap_err() else { panic!() };
        assert!(msg.contains("grid.r_max"), "{msg}");
        assert!(msg.contains("diagnostics.kappa_list[0]"), "{msg}");
        assert!(msg.contains("diagnostics.regions[0]"), "{msg}");
    }

    #[test]
    fn step_multiples() {
        assert_eq!(step_multiple(&[10.0, 20.0, 40.0], 40.0).unwrap(), 4);
        assert_eq!(step_multiple(&[], 40.0).unwrap(), 1);
        assert_eq!(step_multiple(&[5.0], 15.0).unwrap(), 3);
        assert!(step_multiple(&[std::f64::consts::PI], 10.0).is_err());
    }

    #[test]
    fn manifest_wrapper_is_unwrapped() {
        let cfg = RunConfig::minimal(4, 2.5);
        let manifest = serde_json::json!({"code_version": "0.1.0", "config": cfg});
        assert_eq!(RunConfig::from_json(&manifest.to_string()).unwrap(), cfg);
    }
}
