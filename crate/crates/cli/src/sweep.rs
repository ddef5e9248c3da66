//! `sweep`: a cartesian product of run configs, executed in a worker pool.

use std::path::Path;

use inoutwave::mathlib::{critical_exponents, kappa_0};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::output::{header, num, opt_num, resolve_output_dir, write_csv};
use crate::simulate::{simulate, RunOutput};
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisName {
    D,
    P,
    Kappa,
    Amplitude,
}

/// A `p` value, absolute or relative to the critical exponents of the
/// point's dimension (`pc+0.1`, `pe-0.05`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxisValue {
    Num(f64),
    FromPc(f64),
    FromPe(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: AxisName,
    pub values: Vec<AxisValue>,
}

fn parse_value(name: AxisName, s: &str) -> CliResult<AxisValue> {
    let bad = || CliError::Config(format!("axis value `{s}` is not a number"));
    let offset = |rest: &str| -> CliResult<f64> {
        if rest.is_empty() {
            Ok(0.0)
        } else {
            rest.parse::<f64>().map_err(|_| bad())
        }
    };
    if name == AxisName::P {
        if let Some(rest) = s.strip_prefix("pc") {
            return Ok(AxisValue::FromPc(offset(rest)?));
        }
        if let Some(rest) = s.strip_prefix("pe") {
            return Ok(AxisValue::FromPe(offset(rest)?));
        }
    }
    s.parse::<f64>().map(AxisValue::Num).map_err(|_| bad())
}

/// Parses `name=v1,v2,...`.
pub fn parse_axis(spec: &str) -> CliResult<Axis> {
    let (name, list) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("axis `{spec}` must look like name=v1,v2")))?;
    let name = match name.trim() {
        "d" => AxisName::D,
        "p" => AxisName::P,
        "kappa" => AxisName::Kappa,
        "amplitude" => AxisName::Amplitude,
        other => return Err(CliError::Config(format!("unknown axis `{other}` (d, p, kappa, amplitude)"))),
    };
    let values = list
        .split(',')
        .map(|v| parse_value(name, v.trim()))
        .collect::<CliResult<Vec<_>>>()?;
    if values.is_empty() {
        return Err(CliError::Config(format!("axis `{spec}` has no values")));
    }
    Ok(Axis { name, values })
}

fn apply(cfg: &mut RunConfig, name: AxisName, v: AxisValue) -> CliResult<()> {
    let plain = match v {
        AxisValue::Num(x) => x,
        AxisValue::FromPc(_) | AxisValue::FromPe(_) => 0.0,
    };
    match name {
        AxisName::D => {
            if !(plain >= 0.0 && plain.fract() == 0.0) {
                return Err(CliError::Config(format!("d = {plain} must be a whole number")));
            }
            cfg.model.d = plain as usize;
        }
        AxisName::P => {
            let (pc, pe) = critical_exponents(cfg.model.d);
            cfg.model.p = match v {
                AxisValue::Num(x) => x,
                AxisValue::FromPc(o) => pc + o,
                AxisValue::FromPe(o) => pe + o,
            };
        }
        AxisName::Kappa => cfg.diagnostics.kappa_list = vec![plain],
        AxisName::Amplitude => cfg.initial.amplitude = plain,
    }
    Ok(())
}

/// Expands the axes into configs, in the order given. Relative `p` values
/// use the dimension already set, so `d` must come first.
pub fn expand(template: &RunConfig, axes: &[Axis]) -> CliResult<Vec<RunConfig>> {
    let p_axis = axes.iter().position(|a| a.name == AxisName::P);
    let d_axis = axes.iter().position(|a| a.name == AxisName::D);
    if let (Some(pi), Some(di)) = (p_axis, d_axis) {
        if di > pi {
            return Err(CliError::Config("give the d axis before the p axis".into()));
        }
    }
    let mut points = vec![template.clone()];
    for axis in axes {
        let mut next = Vec::with_capacity(points.len() * axis.values.len());
        for p in &points {
            for &v in &axis.values {
                let mut c = p.clone();
                apply(&mut c, axis.name, v)?;
                next.push(c);
            }
        }
        points = next;
    }
    Ok(points)
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub config: RunConfig,
    pub outcome: Result<RunOutput, String>,
}

pub const SWEEP_COLUMNS: [&str; 14] = [
    "point",
    "d",
    "p",
    "kappa",
    "amplitude",
    "status",
    "E",
    "E_minus_final",
    "decay_slope",
    "kappa_0",
    "defect",
    "morawetz_ratio_max",
    "balance_residual_max",
    "error",
];

impl SweepRow {
    fn scalar(&self, key: &str) -> Option<f64> {
        self.outcome.as_ref().ok().and_then(|o| o.scalars.get(key).copied())
    }

    fn first_with_prefix(&self, prefix: &str) -> Option<f64> {
        let o = self.outcome.as_ref().ok()?;
        o.scalars.iter().find(|(k, _)| k.starts_with(prefix)).map(|(_, v)| *v)
    }

    pub fn decay_slope(&self) -> Option<f64> {
        let k = self.config.diagnostics.kappa_list.first()?;
        self.scalar(&format!("decay_slope_k{k}"))
    }

    pub fn balance_residual_max(&self) -> Option<f64> {
        let o = self.outcome.as_ref().ok()?;
        o.scalars
            .iter()
            .filter(|(k, _)| k.ends_with("_rel_residual"))
            .map(|(_, v)| *v)
            .reduce(f64::max)
    }

    fn csv_row(&self, index: usize) -> Vec<String> {
        let m = &self.config.model;
        vec![
            index.to_string(),
            m.d.to_string(),
            num(m.p),
            opt_num(self.config.diagnostics.kappa_list.first().copied()),
            num(self.config.initial.amplitude),
            if self.outcome.is_ok() { "ok" } else { "failed" }.to_string(),
            opt_num(self.scalar("E")),
            opt_num(self.scalar("E_minus_final")),
            opt_num(self.decay_slope()),
            opt_num(kappa_0(m.d, m.p).ok()),
            opt_num(self.first_with_prefix("defect_")),
            opt_num(self.scalar("morawetz_ratio_max")),
            opt_num(self.balance_residual_max()),
            self.outcome.as_ref().err().cloned().unwrap_or_default(),
        ]
    }
}

/// Runs every point (failures are recorded, not fatal) and writes
/// `sweep.csv` plus one run directory per point.
pub fn sweep(template: &RunConfig, axes: &[Axis], jobs: Option<usize>, out: Option<&Path>) -> CliResult<Vec<SweepRow>> {
    let points = expand(template, axes)?;
    let dir = resolve_output_dir(out.unwrap_or(&template.output_dir));
    std::fs::create_dir_all(&dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        points
            .into_par_iter()
            .enumerate()
            .map(|(i, config)| {
                let outcome = simulate(&config, Some(&dir.join(format!("point_{i:03}")))).map_err(|e| e.to_string());
                SweepRow { config, outcome }
            })
            .collect()
    });
    let csv_rows: Vec<Vec<String>> = rows.iter().enumerate().map(|(i, r)| r.csv_row(i)).collect();
    write_csv(&dir.join("sweep.csv"), &header(&SWEEP_COLUMNS), &csv_rows)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes_parse() {
        let a = parse_axis("d=3,4,5").unwrap();
        assert_eq!(a.name, AxisName::D);
        assert_eq!(a.values.len(), 3);
        let p = parse_axis("p=pc+0.1,pe-0.05,2.5").unwrap();
        assert_eq!(
            p.values,
            vec![AxisValue::FromPc(0.1), AxisValue::FromPe(-0.05), AxisValue::Num(2.5)]
        );
        assert!(parse_axis("q=1").is_err());
        assert!(parse_axis("kappa=pc").is_err());
        assert!(parse_axis("d").is_err());
    }

    #[test]
    fn relative_p_follows_dimension() {
        let axes = [parse_axis("d=3,5").unwrap(), parse_axis("p=pc+0.1").unwrap()];
        let pts = expand(&RunConfig::minimal(3, 3.0), &axes).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].model.d, 3);
        assert!((pts[0].model.p - 3.1).abs() < 1e-12);
        assert!((pts[1].model.p - 2.1).abs() < 1e-12);
        let bad = [parse_axis("p=pc").unwrap(), parse_axis("d=3,5").unwrap()];
        assert!(expand(&RunConfig::minimal(3, 3.0), &bad).is_err());
    }
}
