use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use inoutwave_cli::config::{ConeSection, RunConfig, AUTO_PAD};
use inoutwave_cli::report::report;
use inoutwave_cli::simulate::{simulate, REPORT_FILES};
use inoutwave_cli::sweep::{parse_axis, sweep};
use inoutwave_cli::CliError;
use proptest::prelude::*;
use serde_json::Value;

fn bin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inoutwave"))
        .args(args)
        .current_dir(dir)
        .env_remove("INOUTWAVE_OUTPUT_ROOT")
        .output()
        .unwrap()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn small(d: usize, p: f64) -> RunConfig {
    let mut cfg = RunConfig::minimal(d, p);
    cfg.grid.cells = 512;
    cfg.time.t_final = 8.0;
    cfg
}

#[test]
fn minimal_config_smoke() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"model": {"d": 3, "p": 3}}"#).unwrap();
    let out = bin(&["simulate", "--config", "c.json"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = tmp.path().join("run");
    assert!(!csv_rows(&run.join("energies.csv")).is_empty());
    for f in REPORT_FILES {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    assert_eq!(manifest(&run)["status"], "ok");
}

#[test]
fn regions_csv_has_two_rows_per_region() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(4, 2.5);
    cfg.diagnostics.regions = vec![
        vec![[1.0, 1.0], [2.0, 1.0], [2.0, 4.0], [1.0, 4.0]],
        vec![[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]],
        vec![[1.0, 1.0], [4.0, 1.0], [4.0, 4.0]],
    ];
    simulate(&cfg, Some(tmp.path())).unwrap();
    let rows = csv_rows(&tmp.path().join("regions.csv"));
    assert_eq!(rows.len(), 3 * 2);
    let types: Vec<&str> = rows.iter().map(|r| &r[1]).collect();
    assert_eq!(types.iter().filter(|&&t| t == "inward").count(), 3);
}

#[test]
fn auto_grid_pads_for_the_pull_back() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::minimal(3, 3.0);
    cfg.grid.cells = 1024;
    cfg.time.t_final = 40.0;
    cfg.diagnostics.scattering_t_list = vec![10.0, 20.0, 40.0];
    simulate(&cfg, Some(tmp.path())).unwrap();
    let m = manifest(tmp.path());
    let r_max = m["grid"]["r_max"].as_f64().unwrap();
    let support = cfg.initial.support_radius();
    assert!(r_max >= support + 80.0 + AUTO_PAD, "r_max = {r_max}");
    let n_steps = m["grid"]["n_steps"].as_u64().unwrap();
    assert_eq!(n_steps % 4, 0);
    let scat: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("scattering.json")).unwrap()).unwrap();
    assert_eq!(scat["defects"].as_array().unwrap().len(), 2);
}

#[test]
fn config_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.json"), r#"{"model": {"d": 5, "p": 3.0}}"#).unwrap();
    let out = bin(&["simulate", "--config", "bad.json"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model"));

    fs::write(tmp.path().join("typo.json"), r#"{"model": {"d": 3, "p": 3}, "tme": {}}"#).unwrap();
    assert_eq!(bin(&["simulate", "--config", "typo.json"], tmp.path()).status.code(), Some(2));
    assert_eq!(bin(&["simulate", "--config", "missing.json"], tmp.path()).status.code(), Some(2));

    fs::write(tmp.path().join("v.json"), r#"{"model": {"d": 8, "p": 2.4}}"#).unwrap();
    let out = bin(&["verify", "--config", "v.json", "--fast"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("verify/verify.csv").exists());
}

#[test]
fn report_rederives_the_manifest_scalars() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(3, 3.0);
    cfg.time.t_final = 16.0;
    cfg.time.diagnostic_stride = 2;
    cfg.diagnostics.regions = vec![vec![[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]]];
    cfg.diagnostics.kappa_list = vec![0.5];
    let run = simulate(&cfg, Some(tmp.path())).unwrap();
    let rep = report(tmp.path()).unwrap();
    assert!(rep.compared >= 6, "{}", rep.compared);
    assert!(rep.max_manifest_gap <= 1e-12, "{}", rep.max_manifest_gap);
    for (k, v) in &rep.scalars {
        let w = run.scalars[k];
        assert!((v - w).abs() <= 1e-12 * w.abs().max(1.0), "{k}: {v} vs {w}");
    }
    let out = bin(&["report", "--dir", tmp.path().to_str().unwrap()], tmp.path());
    assert!(out.status.success());
}

#[test]
fn output_root_env_relocates_relative_dirs() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("c.json"),
        r#"{"model": {"d": 3, "p": 3}, "grid": {"cells": 256}, "time": {"t_final": 2}, "output_dir": "rel"}"#,
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_inoutwave"))
        .args(["simulate", "--config", "c.json"])
        .current_dir(tmp.path())
        .env("INOUTWAVE_OUTPUT_ROOT", tmp.path().join("root"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("root/rel/energies.csv").is_file());
}

#[test]
fn fractional_snapshot_times_land_on_steps() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(3, 3.0);
    cfg.diagnostics.scattering_t_list = vec![8.0 / 3.0, 4.0];
    cfg.grid.cfl = Some(0.8);
    simulate(&cfg, Some(tmp.path())).unwrap();
    let m = manifest(tmp.path());
    assert_eq!(m["status"], "ok");
    assert_eq!(m["grid"]["n_steps"].as_u64().unwrap() % 3, 0);

    let mut bad = small(3, 3.0);
    bad.initial.amplitude = f64::NAN;
    assert!(matches!(simulate(&bad, Some(tmp.path())), Err(CliError::Config(_))));
}

#[test]
fn verify_with_nonlinearity_off_skips_nonlinear_checks() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("lin.json"),
        r#"{"model": {"d": 3, "p": 3, "nonlinear": false}, "fast": true, "output_dir": "lin"}"#,
    )
    .unwrap();
    bin(&["verify", "--config", "lin.json"], tmp.path());
    let rows = csv_rows(&tmp.path().join("lin/verify.csv"));
    assert_eq!(rows.len(), 15);
    let status = |name: &str| rows.iter().find(|r| &r[0] == name).unwrap()[1].to_string();
    for name in ["energy_conservation", "weighted_decay", "scattering_defect"] {
        assert_eq!(status(name), "skip", "{name}");
    }
    assert_eq!(status("solver_oracle"), "pass");
    assert_eq!(status("determinism"), "pass");
}

#[test]
fn kappa_sweep_decay_slopes() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::minimal(3, 3.0);
    cfg.grid.cells = 1024;
    cfg.time.t_final = 40.0;
    cfg.time.diagnostic_stride = 4;
    let rows = sweep(&cfg, &[parse_axis("kappa=0.3,0.5,0.7").unwrap()], Some(2), Some(tmp.path())).unwrap();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let k = r.config.diagnostics.kappa_list[0];
        let slope = r.decay_slope().unwrap();
        assert!(slope <= -k + 0.1, "kappa {k}: slope {slope}");
    }
    assert_eq!(csv_rows(&tmp.path().join("sweep.csv")).len(), 3);
}

#[test]
fn dimension_sweep_balances_fluxes() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::minimal(3, 3.0);
    cfg.time.t_final = 8.0;
    cfg.diagnostics.regions = vec![
        vec![[1.0, 1.0], [2.0, 1.0], [2.0, 4.0], [1.0, 4.0]],
        vec![[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]],
    ];
    let axes = [parse_axis("d=3,4,5").unwrap(), parse_axis("p=pc+0.1").unwrap()];
    let rows = sweep(&cfg, &axes, None, Some(tmp.path())).unwrap();
    for r in &rows {
        let worst = r.balance_residual_max().unwrap();
        assert!(worst < 0.01, "d={}: {worst}", r.config.model.d);
    }
}

#[test]
fn sweep_records_failing_points_and_continues() {
    let tmp = tempfile::tempdir().unwrap();
    let rows = sweep(&small(3, 3.0), &[parse_axis("p=3,6").unwrap()], Some(1), Some(tmp.path())).unwrap();
    assert!(rows[0].outcome.is_ok());
    assert!(rows[1].outcome.as_ref().unwrap_err().contains("model"));
    let csv = csv_rows(&tmp.path().join("sweep.csv"));
    assert_eq!(&csv[1][5], "failed");
}

#[test]
fn one_point_sweep_matches_simulate() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(5, 2.2);
    cfg.diagnostics.kappa_list = vec![0.5];
    let direct = simulate(&cfg, Some(&tmp.path().join("direct"))).unwrap();
    let rows = sweep(&cfg, &[parse_axis("d=5").unwrap()], Some(1), Some(&tmp.path().join("sw"))).unwrap();
    assert_eq!(rows[0].outcome.as_ref().unwrap().scalars, direct.scalars);
}

fn config_strategy() -> impl Strategy<Value = RunConfig> {
    (0usize..3, 0.05f64..0.95, 0.1f64..1.5, 1usize..4).prop_map(|(k, x, amp, stride)| {
        let d = 3 + k;
        let (pc, pe) = inoutwave::mathlib::critical_exponents(d);
        let hi = if d == 3 { 5.0 } else { pe };
        let mut cfg = RunConfig::minimal(d, pc + x * (hi - pc));
        cfg.initial.amplitude = amp;
        cfg.grid.cells = 256;
        cfg.time.t_final = 4.0;
        cfg.time.diagnostic_stride = stride;
        cfg.diagnostics.cones = Some(ConeSection {
            taus: vec![-1.0, 1.0],
            ss: vec![3.0],
        });
        cfg.diagnostics.regions = vec![vec![[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]]];
        cfg.diagnostics.morawetz_r = vec![1.0];
        cfg.diagnostics.kappa_list = vec![0.5];
        cfg.diagnostics.scattering_t_list = vec![1.0, 2.0];
        cfg.diagnostics.interior_c_list = vec![0.5];
        cfg
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn identical_configs_write_identical_files(cfg in config_strategy()) {
        let tmp = tempfile::tempdir().unwrap();
        let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
        simulate(&cfg, Some(&a)).unwrap();
        simulate(&cfg, Some(&b)).unwrap();
        for f in REPORT_FILES {
            prop_assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{}", f);
        }
    }

    #[test]
    fn manifest_reruns_reproduce_scalars(cfg in config_strategy()) {
        let tmp = tempfile::tempdir().unwrap();
        let first = simulate(&cfg, Some(&tmp.path().join("a"))).unwrap();
        let again = RunConfig::from_path(&tmp.path().join("a/manifest.json")).unwrap();
        prop_assert_eq!(&again, &cfg);
        let second = simulate(&again, Some(&tmp.path().join("b"))).unwrap();
        prop_assert_eq!(first.scalars.len(), second.scalars.len());
        for (k, v) in &first.scalars {
            let w = second.scalars[k];
            prop_assert!((v - w).abs() <= 1e-12 * v.abs().max(1e-300), "{}: {} vs {}", k, v, w);
        }
    }
}
