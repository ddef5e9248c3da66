//! `simulate`: one run with every requested recorder, written out as CSV and
//! JSON reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use inoutwave::energy::{weighted_energy, EnergyRecorder, EnergyRow};
use inoutwave::estimates::{
    decay_fit, rediscover, weighted_tail_checks, DecayFit, MorawetzRecorder, Rediscover, WeightedMorawetzRecorder,
};
use inoutwave::flux::{all_ledgers, AxisRecorder, ConeFluxRecorder, ConeKind, FluxLedger, RegionRecorder, RegionTraces};
use inoutwave::mathlib::{kappa_0, Exponent};
use inoutwave::scattering::{
    extract_profile, interior_energy, profile_distance, s_dp_exponent, spacetime_norm, NormRecorder, SnapshotRecorder,
};
use inoutwave::solver::{evolve, Model, Recorder, RunReport};
use serde::{Deserialize, Serialize};

use crate::config::{Plan, RunConfig};
use crate::output::{header, num, resolve_output_dir, write_csv, write_json};
use crate::{CliError, CliResult, CODE_VERSION};

/// Decay fits take the sup of `t^κ E₋(t) / E_κ` from this time on.
pub const DECAY_SUP_FROM: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaEnergy {
    pub kappa: f64,
    #[serde(rename = "E_kappa")]
    pub e_kappa: f64,
}

/// Raw series kept on disk so `report` can recompute the estimates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Traces {
    pub d: usize,
    pub p: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    pub energy_rows: Vec<EnergyRow>,
    pub axis: AxisRecorder,
    pub regions: Vec<RegionTraces>,
    pub kappas: Vec<KappaEnergy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayEntry {
    pub kappa: f64,
    #[serde(rename = "E_kappa")]
    pub e_kappa: f64,
    pub fit: Option<DecayFit>,
    pub error: Option<String>,
}

/// Estimates that follow from [`Traces`] alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub ledgers: Vec<(usize, FluxLedger)>,
    pub rediscover: Option<Rediscover>,
    pub decay: Vec<DecayEntry>,
}

pub fn derive(traces: &Traces) -> CliResult<Derived> {
    let ledgers = all_ledgers(&traces.regions)?;
    let rediscover = rediscover(&traces.axis).ok();
    let t: Vec<f64> = traces.energy_rows.iter().map(|r| r.report.t).collect();
    let em: Vec<f64> = traces.energy_rows.iter().map(|r| r.report.e_minus).collect();
    let t_final = t.last().copied().unwrap_or(0.0);
    let sup_from = DECAY_SUP_FROM.min(0.5 * t_final);
    let decay = traces
        .kappas
        .iter()
        .map(|k| match decay_fit(&t, &em, k.kappa, k.e_kappa, sup_from) {
            Ok(fit) => DecayEntry {
                kappa: k.kappa,
                e_kappa: k.e_kappa,
                fit: Some(fit),
                error: None,
            },
            Err(e) => DecayEntry {
                kappa: k.kappa,
                e_kappa: k.e_kappa,
                fit: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(Derived {
        ledgers,
        rediscover,
        decay,
    })
}

/// Scalars that [`derive`] determines; `report` compares these against the
/// manifest.
pub fn derived_scalars(traces: &Traces, derived: &Derived, out: &mut BTreeMap<String, f64>) {
    for (i, l) in &derived.ledgers {
        let et = l.energy_type.label();
        out.insert(format!("region{i}_{et}_residual"), l.residual);
        let scale = l.morawetz_integral + 0.01 * traces.energy;
        out.insert(format!("region{i}_{et}_rel_residual"), l.residual.abs() / scale);
    }
    if let Some(r) = &derived.rediscover {
        out.insert("rediscover_defect".into(), r.defect);
        out.insert("c_mu".into(), r.c_mu);
        out.insert("morawetz_slab".into(), r.morawetz);
    }
    for e in &derived.decay {
        if let Some(f) = &e.fit {
            out.insert(format!("decay_slope_k{}", e.kappa), f.fitted_slope);
            out.insert(format!("decay_bound_k{}", e.kappa), f.bound_constant);
            out.insert(format!("decay_lnorm_k{}", e.kappa), f.truncated_l_power_norm);
        }
    }
    out.insert("E".into(), traces.energy);
}

#[derive(Debug, Clone, Serialize)]
struct GridInfo {
    n: usize,
    r_max: f64,
    h: f64,
    n_steps: usize,
    dt: f64,
    cfl: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    code_version: &'static str,
    config: &'a RunConfig,
    status: &'static str,
    failing_step: Option<usize>,
    error: Option<String>,
    grid: Option<GridInfo>,
    scalars: BTreeMap<String, f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub scalars: BTreeMap<String, f64>,
}

pub const REPORT_FILES: [&str; 10] = [
    "energies.csv",
    "cones.csv",
    "regions.csv",
    "morawetz.csv",
    "weighted.csv",
    "decay.json",
    "scattering.json",
    "traces.json",
    "manifest.json",
    "summary.txt",
];

struct Recorders {
    energy: EnergyRecorder,
    axis: AxisRecorder,
    cones: Option<ConeFluxRecorder>,
    regions: RegionRecorder,
    morawetz: MorawetzRecorder,
    weighted: WeightedMorawetzRecorder,
    snaps: SnapshotRecorder,
    norms: Option<NormRecorder>,
}

impl Recorders {
    fn new(plan: &Plan) -> CliResult<Self> {
        let scattering = !plan.scattering_t.is_empty();
        let s_exp = s_dp_exponent(plan.params.d, plan.params.p);
        Ok(Self {
            energy: EnergyRecorder::new(plan.stride).with_interior(&plan.interior_c),
            axis: AxisRecorder::new(),
            cones: plan
                .cones
                .as_ref()
                .map(|c| ConeFluxRecorder::new(&c.taus, &c.ss, plan.time_symmetric)),
            regions: RegionRecorder::new(plan.regions.clone()),
            morawetz: MorawetzRecorder::new(&plan.morawetz_r),
            weighted: WeightedMorawetzRecorder::new(plan.weights.clone())?,
            snaps: SnapshotRecorder::new(&plan.scattering_t),
            norms: if scattering && s_exp >= 1.0 {
                Some(NormRecorder::new(&[s_exp])?)
            } else {
                None
            },
        })
    }

    fn all(&mut self) -> Vec<&mut dyn Recorder> {
        let mut v: Vec<&mut dyn Recorder> = vec![&mut self.energy, &mut self.axis, &mut self.regions];
        if let Some(c) = self.cones.as_mut() {
            v.push(c);
        }
        v.push(&mut self.morawetz);
        v.push(&mut self.weighted);
        v.push(&mut self.snaps);
        if let Some(n) = self.norms.as_mut() {
            v.push(n);
        }
        v
    }
}

fn failing_step(e: &inoutwave::Error) -> Option<usize> {
    match e {
        inoutwave::Error::Unstable { step, .. } | inoutwave::Error::Recorder { step, .. } => Some(*step),
        _ => None,
    }
}

/// Validates `config`, runs it and writes the report directory. `out`
/// overrides `config.output_dir`.
pub fn simulate(config: &RunConfig, out: Option<&Path>) -> CliResult<RunOutput> {
    let plan = config.resolve()?;
    let dir = resolve_output_dir(out.unwrap_or(&config.output_dir));
    fs::create_dir_all(&dir)?;

    let mut recs = Recorders::new(&plan)?;
    let report = match evolve(&plan.initial, &plan.grid, &plan.params, &plan.solver, &mut recs.all()) {
        Ok(r) => r,
        Err(e) => {
            let manifest = Manifest {
                code_version: CODE_VERSION,
                config,
                status: "failed",
                failing_step: failing_step(&e),
                error: Some(e.to_string()),
                grid: None,
                scalars: BTreeMap::new(),
            };
            write_json(&dir.join("manifest.json"), &manifest)?;
            return Err(CliError::Runtime(e.to_string()));
        }
    };
    let scalars = write_reports(config, &plan, &recs, &report, &dir)?;
    Ok(RunOutput { dir, scalars })
}

fn write_reports(
    config: &RunConfig,
    plan: &Plan,
    recs: &Recorders,
    report: &RunReport,
    dir: &Path,
) -> CliResult<BTreeMap<String, f64>> {
    let grid = &plan.grid;
    let model = Model::new(plan.params, plan.solver.nonlinearity_on);
    let rows = &recs.energy.rows;
    let e0 = rows[0].report.e;
    let mut scalars = BTreeMap::new();

    // energies.csv
    let t0 = recs.axis.t.first().copied().unwrap_or(0.0);
    let mut cols = header(&["t", "E", "E_minus", "E_plus", "hardy_term", "potential_term"]);
    cols.extend(plan.interior_c.iter().map(|c| format!("interior_energy_c{c}")));
    cols.push("mu_cumulative".into());
    let energy_rows: Vec<Vec<String>> = if plan.energies {
        rows.iter()
            .map(|row| {
                let r = &row.report;
                let mut line = vec![
                    num(r.t),
                    num(r.e),
                    num(r.e_minus),
                    num(r.e_plus),
                    num(r.components.hardy),
                    num(r.components.potential),
                ];
                line.extend(row.interior.iter().map(|&x| num(x)));
                line.push(num(recs.axis.mu(t0, r.t).unwrap_or(0.0)));
                line
            })
            .collect()
    } else {
        Vec::new()
    };
    write_csv(&dir.join("energies.csv"), &cols, &energy_rows)?;
    let last = rows.last().expect("at least one energy row").report;
    scalars.insert("E_minus_final".into(), last.e_minus);
    scalars.insert("E_plus_final".into(), last.e_plus);
    let split = rows.iter().map(|r| (r.report.e_minus + r.report.e_plus - r.report.e).abs() / e0).fold(0.0, f64::max);
    let drift = rows.iter().map(|r| (r.report.e - e0).abs() / e0).fold(0.0, f64::max);
    scalars.insert("split_residual_max".into(), split);
    scalars.insert("energy_drift_max".into(), drift);
    if let Ok(k0) = kappa_0(plan.params.d, plan.params.p) {
        scalars.insert("kappa_0".into(), k0);
    }

    // cones.csv
    let cone_rows: Vec<Vec<String>> = recs
        .cones
        .as_ref()
        .map(|c| {
            c.fluxes()
                .iter()
                .map(|f| {
                    let kind = match f.kind {
                        ConeKind::Forward => "forward",
                        ConeKind::Backward => "backward",
                    };
                    vec![
                        kind.to_string(),
                        num(f.label),
                        num(f.q_minus),
                        num(f.q_plus),
                        num(f.q_minus + f.q_plus),
                        num(e0),
                    ]
                })
                .collect()
        })
        .unwrap_or_default();
    write_csv(
        &dir.join("cones.csv"),
        &header(&["cone_kind", "label", "Q_minus", "Q_plus", "Q_sum", "E"]),
        &cone_rows,
    )?;

    // traces + derived estimates
    let s0 = plan.initial.discretize(grid);
    let mut kappas = Vec::new();
    for &kappa in &plan.kappa_list {
        kappas.push(KappaEnergy {
            kappa,
            e_kappa: weighted_energy(&s0, grid, &model, kappa)?,
        });
    }
    let traces = Traces {
        d: plan.params.d,
        p: plan.params.p,
        energy: e0,
        energy_rows: rows.clone(),
        axis: recs.axis.clone(),
        regions: recs.regions.traces(),
        kappas,
    };
    let derived = derive(&traces)?;
    derived_scalars(&traces, &derived, &mut scalars);

    // regions.csv
    let max_seg = traces.regions.iter().map(|r| r.segments.len()).max().unwrap_or(0);
    let mut cols = header(&["region", "energy_type", "n_segments"]);
    for k in 0..max_seg {
        cols.push(format!("seg{k}_kind"));
        cols.push(format!("seg{k}_value"));
    }
    cols.extend(header(&["mu_term", "morawetz_integral", "residual"]));
    let region_rows: Vec<Vec<String>> = derived
        .ledgers
        .iter()
        .map(|(i, l)| {
            let mut line = vec![i.to_string(), l.energy_type.label().to_string(), l.per_segment.len().to_string()];
            for k in 0..max_seg {
                match l.per_segment.get(k) {
                    Some(s) => {
                        line.push(s.kind.label().to_string());
                        line.push(num(s.value));
                    }
                    None => line.extend([String::new(), String::new()]),
                }
            }
            line.extend([num(l.mu_term), num(l.morawetz_integral), num(l.residual)]);
            line
        })
        .collect();
    write_csv(&dir.join("regions.csv"), &cols, &region_rows)?;

    // morawetz.csv
    let mut horizons = vec![("truncated", false)];
    if plan.time_symmetric {
        horizons.push(("mirrored", true));
    }
    let mut m_rows = Vec::new();
    let mut m_ratio: f64 = 0.0;
    for (name, mirror) in horizons {
        for rep in recs.morawetz.reports(e0, mirror) {
            let ratio = rep.total / rep.bound;
            m_ratio = m_ratio.max(ratio);
            m_rows.push(vec![
                num(rep.radius),
                name.to_string(),
                num(rep.interior_term),
                num(rep.sphere_term),
                num(rep.exterior_term),
                num(rep.total),
                num(rep.bound),
                num(ratio),
            ]);
        }
    }
    if !plan.morawetz_r.is_empty() {
        scalars.insert("morawetz_ratio_max".into(), m_ratio);
    }
    write_csv(
        &dir.join("morawetz.csv"),
        &header(&["R", "horizon", "interior_term", "sphere_term", "exterior_term", "total", "bound", "ratio"]),
        &m_rows,
    )?;

    // weighted.csv
    let mut w_rows = Vec::new();
    for (i, spec) in recs.weighted.specs().iter().enumerate() {
        let w = recs.weighted.result(i)?;
        let e_kappa = match spec.kind {
            inoutwave::estimates::WeightKind::Power { kappa } if kappa > 0.0 => {
                num(weighted_energy(&s0, grid, &model, kappa)?)
            }
            _ => String::new(),
        };
        let ratio = if w.k1 > 0.0 { num((w.lhs + w.mu_weighted) / w.k1) } else { String::new() };
        w_rows.push(vec![
            spec.label(),
            num(spec.gamma),
            num(w.lhs),
            num(w.mu_weighted),
            num(w.k1),
            e_kappa,
            ratio,
        ]);
    }
    write_csv(
        &dir.join("weighted.csv"),
        &header(&["label", "gamma", "lhs", "mu_weighted", "K1", "E_kappa", "ratio"]),
        &w_rows,
    )?;

    // decay.json
    let offset = plan.weights.len() - plan.kappa_list.len();
    let mut tails = Vec::new();
    for (j, &kappa) in plan.kappa_list.iter().enumerate() {
        let checks = weighted_tail_checks(&recs.weighted, offset + j, &recs.axis)?;
        let worst = checks
            .iter()
            .filter(|c| c.rhs > 0.0)
            .map(|c| c.lhs / c.rhs)
            .fold(0.0, f64::max);
        tails.push(serde_json::json!({
            "kappa": kappa,
            "checked": checks.len(),
            "worst_lhs_over_rhs": worst,
        }));
        scalars.insert(format!("tail_ratio_k{kappa}"), worst);
    }
    write_json(
        &dir.join("decay.json"),
        &serde_json::json!({
            "sup_from": DECAY_SUP_FROM,
            "fits": derived.decay,
            "tail_checks": tails,
            "rediscover": derived.rediscover,
        }),
    )?;

    // scattering.json
    let params = &plan.params;
    let mut profiles = Vec::new();
    for &t in &plan.scattering_t {
        profiles.push(extract_profile(recs.snaps.get(t)?, grid, params, t, recs.snaps.dt())?);
    }
    let defects: Vec<serde_json::Value> = profiles
        .windows(2)
        .map(|w| {
            let d = profile_distance(&w[0], &w[1], grid, params);
            serde_json::json!({"t1": w[0].t, "t2": w[1].t, "defect": d})
        })
        .collect();
    for w in profiles.windows(2) {
        scalars.insert(format!("defect_{}_{}", w[0].t, w[1].t), profile_distance(&w[0], &w[1], grid, params));
    }
    let mut s_norms = Vec::new();
    if let Some(norms) = &recs.norms {
        let q = norms.rs()[0];
        for &t in &plan.scattering_t {
            let v = spacetime_norm(norms, Exponent::Finite(q), q, (0.0, t))?.value;
            s_norms.push(serde_json::json!({"T": t, "value": v}));
            scalars.insert(format!("S_norm_T{t}"), v);
        }
    }
    let mut interior = serde_json::Map::new();
    for &c in &plan.interior_c {
        let series = interior_energy(&recs.energy, c)?;
        if let Some(&(_, v)) = series.last() {
            scalars.insert(format!("interior_c{c}_final"), v);
        }
        interior.insert(c.to_string(), serde_json::to_value(series)?);
    }
    write_json(
        &dir.join("scattering.json"),
        &serde_json::json!({
            "T_list": plan.scattering_t,
            "defects": defects,
            "profile_energies": profiles.iter().map(|p| serde_json::json!({"T": p.t, "energy_norm": p.energy_norm})).collect::<Vec<_>>(),
            "energy_norm_bound": (2.0 * e0).sqrt(),
            "S_exponent": s_dp_exponent(params.d, params.p),
            "S_norm_truncations": s_norms,
            "interior_energy_series_ref": interior,
        }),
    )?;

    write_json(&dir.join("traces.json"), &traces)?;

    let manifest = Manifest {
        code_version: CODE_VERSION,
        config,
        status: "ok",
        failing_step: None,
        error: None,
        grid: Some(GridInfo {
            n: grid.n(),
            r_max: grid.r_max(),
            h: grid.h(),
            n_steps: report.n_steps,
            dt: report.dt,
            cfl: report.cfl,
        }),
        scalars: scalars.clone(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;

    let mut summary = String::new();
    for (k, v) in &scalars {
        summary.push_str(&format!("{k:<28} {}\n", num(*v)));
    }
    fs::write(dir.join("summary.txt"), summary)?;
    Ok(scalars)
}
