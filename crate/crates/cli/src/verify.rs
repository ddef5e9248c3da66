//! The acceptance suite: fifteen checks at desk resolution, each paired with
//! a refinement companion where an order is meaningful.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use inoutwave::energy::EnergyRecorder;
use inoutwave::estimates::{
    decay_fit, l_power_lemma_check, rediscover, weighted_tail_checks, MorawetzRecorder, WeightSpec,
    WeightedMorawetzRecorder,
};
use inoutwave::flux::{flux_balance, AxisRecorder, ConeFlux, ConeFluxRecorder, ConeKind, EnergyType, Region, RegionRecorder};
use inoutwave::mathlib::{critical_exponents, kappa_0, kappa_0_interpolated, kappa_0_rational, ModelParams};
use inoutwave::scattering::{check_interconstants, interior_energy, scatter_defect, SnapshotRecorder};
use inoutwave::solver::{evolve, InitialData, RadialGrid, Recorder, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConeSection, ModelSection, RunConfig};
use crate::output::{header, num, opt_num, resolve_output_dir, write_csv};
use crate::simulate::{simulate, REPORT_FILES};
use crate::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 0x1a2b_3c4d;

pub const CHECK_NAMES: [&str; 15] = [
    "solver_oracle",
    "energy_conservation",
    "split_identity",
    "monotonicity",
    "flux_balance",
    "morawetz_inequality",
    "rediscover_identity",
    "cone_fluxes",
    "weighted_decay",
    "l_power_lemma",
    "kappa0_formula",
    "interconstants",
    "scattering_defect",
    "travelling_speed",
    "determinism",
];

const DEFAULT_CASES: [(usize, f64); 3] = [(3, 3.0), (4, 2.5), (5, 2.2)];
const KAPPAS: [f64; 3] = [0.3, 0.5, 0.7];
const MORAWETZ_R: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
const CONE_TAUS: [f64; 8] = [-30.0, -20.0, -10.0, -2.0, 0.0, 2.0, 10.0, 20.0];
const CONE_SS: [f64; 5] = [2.0, 10.0, 20.0, 30.0, 40.0];
const SCATTER_T: [f64; 3] = [10.0, 20.0, 40.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skip => "skip",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: Status,
    pub measured: f64,
    pub tolerance: f64,
    pub refinement_order: Option<f64>,
    pub note: String,
    /// Wall time of the runs behind this check, when it has a budget.
    #[serde(skip)]
    pub elapsed: Option<Duration>,
    #[serde(skip)]
    pub budget: Option<Duration>,
}

impl CheckResult {
    fn new(name: &'static str, pass: bool, measured: f64, tolerance: f64) -> Self {
        Self {
            name,
            status: if pass { Status::Pass } else { Status::Fail },
            measured,
            tolerance,
            refinement_order: None,
            note: String::new(),
            elapsed: None,
            budget: None,
        }
    }

    fn skip(name: &'static str, why: &str) -> Self {
        Self {
            status: Status::Skip,
            note: why.to_string(),
            ..Self::new(name, true, f64::NAN, f64::NAN)
        }
    }

    fn error(name: &'static str, e: &CliError) -> Self {
        Self {
            note: e.to_string(),
            ..Self::new(name, false, f64::NAN, f64::NAN)
        }
    }

    fn order(mut self, order: f64) -> Self {
        self.refinement_order = Some(order);
        self
    }

    fn note(mut self, note: String) -> Self {
        self.note = note;
        self
    }

    fn timed(mut self, elapsed: Duration, budget: Option<Duration>) -> Self {
        self.elapsed = Some(elapsed);
        self.budget = budget;
        self
    }

    pub fn over_budget(&self) -> bool {
        matches!((self.elapsed, self.budget), (Some(e), Some(b)) if e > b)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationSummary {
    pub checks: Vec<CheckResult>,
}

impl VerificationSummary {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| c.status == Status::Fail).count()
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn write_csv(&self, path: &Path) -> CliResult<()> {
        let rows: Vec<Vec<String>> = self
            .checks
            .iter()
            .map(|c| {
                vec![
                    c.name.to_string(),
                    c.status.label().to_string(),
                    opt_num(c.measured.is_finite().then_some(c.measured)),
                    opt_num(c.tolerance.is_finite().then_some(c.tolerance)),
                    opt_num(c.refinement_order),
                    c.note.clone(),
                ]
            })
            .collect();
        write_csv(
            path,
            &header(&["name", "status", "measured", "tolerance", "refinement_order", "note"]),
            &rows,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// Replaces the default `(d, p)` cases of the dimension-sweeping checks.
    #[serde(default)]
    pub model: Option<ModelSection>,
    #[serde(default)]
    pub fast: bool,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_verify_dir")]
    pub output_dir: PathBuf,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_verify_dir() -> PathBuf {
    PathBuf::from("verify")
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            model: None,
            fast: false,
            seed: DEFAULT_SEED,
            output_dir: default_verify_dir(),
        }
    }
}

impl VerifyConfig {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Grid sizes of the suite.
#[derive(Debug, Clone, Copy)]
struct Resolution {
    oracle: [usize; 2],
    drift: [usize; 2],
    reference: usize,
    companion: usize,
    flux: [usize; 2],
    scattering: usize,
    determinism: usize,
}

const FULL: Resolution = Resolution {
    oracle: [4096, 8192],
    drift: [4096, 8192],
    reference: 8192,
    companion: 4096,
    flux: [4096, 8192],
    scattering: 4096,
    determinism: 512,
};

const FAST: Resolution = Resolution {
    oracle: [1024, 2048],
    drift: [1024, 2048],
    reference: 4096,
    companion: 2048,
    flux: [2048, 4096],
    scattering: 2048,
    determinism: 256,
};

#[derive(Debug, Clone)]
pub struct Suite {
    pub fast: bool,
    pub nonlinear: bool,
    pub cases: Vec<ModelParams>,
    pub seed: u64,
    /// Scratch space for the determinism check.
    pub work_dir: PathBuf,
}

impl Suite {
    /// Refuses params outside the theory's range.
    pub fn from_config(cfg: &VerifyConfig) -> CliResult<Self> {
        let (cases, nonlinear) = match &cfg.model {
            Some(m) => {
                if m.exploratory {
                    return Err(CliError::Config("model.exploratory: theory checks need validated (d, p)".into()));
                }
                let params = ModelParams::new(m.d, m.p).map_err(|e| CliError::Config(format!("model: {e}")))?;
                (vec![params], m.nonlinear)
            }
            None => (
                DEFAULT_CASES.iter().map(|&(d, p)| ModelParams::new(d, p).expect("default cases")).collect(),
                true,
            ),
        };
        Ok(Self {
            fast: cfg.fast,
            nonlinear,
            cases,
            seed: cfg.seed,
            work_dir: resolve_output_dir(&cfg.output_dir),
        })
    }

    fn res(&self) -> Resolution {
        if self.fast {
            FAST
        } else {
            FULL
        }
    }

    fn reference_params(&self) -> ModelParams {
        ModelParams::new(3, 3.0).expect("d=3, p=3 is in range")
    }

    pub fn run(&self) -> CliResult<VerificationSummary> {
        fs::create_dir_all(&self.work_dir)?;
        let res = self.res();
        let mut ref_cases = self.cases.clone();
        if !ref_cases.iter().any(|c| c.d == 3 && c.p == 3.0) {
            ref_cases.push(self.reference_params());
        }

        let (c1, (c2, (refs, (flux, (scat, det))))) = rayon::join(
            || timed(|| oracle_errors(res.oracle)),
            || {
                rayon::join(
                    || timed(|| drift_runs(res.drift, self.nonlinear)),
                    || {
                        rayon::join(
                            || {
                                ref_cases
                                    .par_iter()
                                    .map(|c| reference_run(c, res.reference, res.companion, self.nonlinear))
                                    .collect::<Vec<_>>()
                            },
                            || {
                                rayon::join(
                                    || timed(|| flux_runs(&self.cases, res.flux, self.nonlinear)),
                                    || {
                                        rayon::join(
                                            || timed(|| scattering_run(res.scattering, self.nonlinear)),
                                            || self.determinism(res.determinism),
                                        )
                                    },
                                )
                            },
                        )
                    },
                )
            },
        );
        let refs: Vec<(ModelParams, CliResult<Reference>)> = ref_cases.iter().copied().zip(refs).collect();

        let mut checks = Vec::with_capacity(CHECK_NAMES.len());
        checks.push(check_oracle(c1));
        checks.push(if self.nonlinear {
            check_drift(c2)
        } else {
            CheckResult::skip(CHECK_NAMES[1], "nonlinearity off")
        });
        let sweeping: Vec<&(ModelParams, CliResult<Reference>)> =
            refs.iter().filter(|(p, _)| self.cases.contains(p)).collect();
        checks.push(with_refs(CHECK_NAMES[2], &sweeping, check_split));
        checks.push(with_refs(CHECK_NAMES[3], &sweeping, check_monotonicity));
        checks.push(check_flux(flux));
        checks.push(with_refs(CHECK_NAMES[5], &sweeping, check_morawetz));
        let mut rediscover_cases: Vec<_> = sweeping.iter().copied().filter(|(p, _)| p.d == 3 || p.d == 5).collect();
        if rediscover_cases.is_empty() {
            rediscover_cases = sweeping.clone();
        }
        checks.push(with_refs(CHECK_NAMES[6], &rediscover_cases, check_rediscover));
        checks.push(with_refs(CHECK_NAMES[7], &sweeping, check_cones));
        let reference: Vec<&(ModelParams, CliResult<Reference>)> =
            refs.iter().filter(|(p, _)| p.d == 3 && p.p == 3.0).collect();
        checks.push(if self.nonlinear {
            with_refs(CHECK_NAMES[8], &reference, check_decay)
        } else {
            CheckResult::skip(CHECK_NAMES[8], "nonlinearity off")
        });
        checks.push(check_lemma(self.seed));
        checks.push(check_kappa0());
        checks.push(check_interconstant_grid());
        checks.push(if self.nonlinear {
            check_scattering(scat)
        } else {
            CheckResult::skip(CHECK_NAMES[12], "nonlinearity off")
        });
        checks.push(with_refs(CHECK_NAMES[13], &reference, check_travelling));
        checks.push(det);
        debug_assert!(checks.iter().map(|c| c.name).eq(CHECK_NAMES));

        for c in &mut checks {
            if self.fast {
                c.budget = None;
            } else if c.over_budget() && c.status == Status::Pass {
                c.status = Status::Fail;
                c.note.push_str("; over runtime budget");
            }
        }
        Ok(VerificationSummary { checks })
    }

    /// Runs a small fully-instrumented config twice and compares every
    /// report file byte for byte.
    fn determinism(&self, n: usize) -> CheckResult {
        let name = CHECK_NAMES[14];
        let mut cfg = RunConfig::minimal(3, 3.0);
        cfg.model.nonlinear = self.nonlinear;
        cfg.grid.cells = n;
        cfg.time.t_final = 8.0;
        cfg.time.diagnostic_stride = 4;
        cfg.diagnostics.cones = Some(ConeSection {
            taus: vec![-2.0, 0.0, 2.0],
            ss: vec![2.0, 6.0],
        });
        cfg.diagnostics.regions = vec![vec![[1.0, 1.0], [2.0, 1.0], [2.0, 4.0], [1.0, 4.0]]];
        cfg.diagnostics.morawetz_r = vec![1.0, 2.0];
        cfg.diagnostics.kappa_list = vec![0.5];
        cfg.diagnostics.scattering_t_list = vec![2.0, 4.0];
        cfg.diagnostics.interior_c_list = vec![0.5];
        let dirs = [self.work_dir.join("determinism_a"), self.work_dir.join("determinism_b")];
        let mut differing = Vec::new();
        for d in &dirs {
            if let Err(e) = simulate(&cfg, Some(d)) {
                return CheckResult::error(name, &e);
            }
        }
        for f in REPORT_FILES {
            match (fs::read(dirs[0].join(f)), fs::read(dirs[1].join(f))) {
                (Ok(a), Ok(b)) if a == b => {}
                _ => differing.push(f),
            }
        }
        CheckResult::new(name, differing.is_empty(), differing.len() as f64, 0.0)
            .note(format!("{} files compared; differing: {differing:?}", REPORT_FILES.len()))
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn case_label(p: &ModelParams) -> String {
    format!("d={} p={}", p.d, p.p)
}

fn with_refs(
    name: &'static str,
    refs: &[&(ModelParams, CliResult<Reference>)],
    f: impl Fn(&'static str, &[(&ModelParams, &Reference)]) -> CheckResult,
) -> CheckResult {
    let mut ok = Vec::new();
    for (p, r) in refs {
        match r {
            Ok(r) => ok.push((p, r)),
            Err(e) => return CheckResult::error(name, e).note(format!("{}: {e}", case_label(p))),
        }
    }
    if ok.is_empty() {
        return CheckResult::skip(name, "no reference runs");
    }
    f(name, &ok)
}

fn log2_ratio(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Radial d'Alembert solution for `u_0 = g` even, `u_1 = 0`, `d = 3`.
fn dalembert(g: impl Fn(f64) -> f64, r: f64, t: f64) -> f64 {
    ((r + t) * g(r + t) + (r - t) * g((r - t).abs())) / (2.0 * r)
}

fn oracle_errors(ns: [usize; 2]) -> CliResult<[f64; 2]> {
    let t_final = 10.0;
    let params = ModelParams::new(3, 3.0)?;
    let data = InitialData::gaussian(1.0, 0.0, 1.0)?;
    let mut out = [0.0; 2];
    for (k, &n) in ns.iter().enumerate() {
        let grid = RadialGrid::new(3, n, 18.0)?;
        let rep = evolve(&data, &grid, &params, &SolverConfig::new(t_final).linear(), &mut [])?;
        let (mut num, mut den) = (0.0, 0.0);
        for (j, &r) in grid.centers().iter().enumerate() {
            let exact = dalembert(|x| (-x * x).exp(), r, t_final);
            let w = r * r;
            num += w * (rep.final_state.u[j] - exact).powi(2);
            den += w * exact * exact;
        }
        out[k] = (num / den).sqrt();
    }
    Ok(out)
}

fn check_oracle((r, elapsed): (CliResult<[f64; 2]>, Duration)) -> CheckResult {
    let name = CHECK_NAMES[0];
    match r {
        Ok([coarse, fine]) => {
            let ratio = coarse / fine;
            CheckResult::new(name, coarse <= 1e-3 && (3.2..=4.8).contains(&ratio), coarse, 1e-3)
                .order(log2_ratio(coarse, fine))
                .note(format!("L2 rel error {coarse:.3e} -> {fine:.3e}, ratio {ratio:.3} (band [3.2, 4.8])"))
                .timed(elapsed, Some(Duration::from_secs(30)))
        }
        Err(e) => CheckResult::error(name, &e),
    }
}

fn drift_runs(ns: [usize; 2], nonlinear: bool) -> CliResult<[f64; 2]> {
    let params = ModelParams::new(3, 3.0)?;
    let data = InitialData::compact_bump(0.5, 0.0, 2.0)?;
    let mut out = [0.0; 2];
    for (k, &n) in ns.iter().enumerate() {
        let grid = RadialGrid::new(3, n, 24.0)?;
        let mut rec = EnergyRecorder::new(10);
        let mut cfg = SolverConfig::new(20.0);
        cfg.nonlinearity_on = nonlinear;
        evolve(&data, &grid, &params, &cfg, &mut [&mut rec])?;
        let e0 = rec.rows[0].report.e;
        out[k] = rec.rows.iter().map(|r| (r.report.e - e0).abs() / e0).fold(0.0, f64::max);
    }
    Ok(out)
}

fn check_drift((r, elapsed): (CliResult<[f64; 2]>, Duration)) -> CheckResult {
    let name = CHECK_NAMES[1];
    match r {
        Ok([coarse, fine]) => {
            let ratio = coarse / fine;
            CheckResult::new(name, coarse <= 1e-3 && (3.0..=5.0).contains(&ratio), coarse, 1e-3)
                .order(log2_ratio(coarse, fine))
                .note(format!("max drift {coarse:.3e} -> {fine:.3e}, ratio {ratio:.3} (band [3, 5])"))
                .timed(elapsed, None)
        }
        Err(e) => CheckResult::error(name, &e),
    }
}

/// Fully instrumented compact-data run at the desk resolution, plus an
/// energy-only companion at half the resolution.
struct Reference {
    energy: EnergyRecorder,
    companion: EnergyRecorder,
    axis: AxisRecorder,
    cones: Vec<ConeFlux>,
    morawetz: MorawetzRecorder,
    weighted: WeightedMorawetzRecorder,
    e_kappa: Vec<f64>,
}

const REF_T: f64 = 40.0;
const REF_R_MAX: f64 = 48.0;

fn reference_run(params: &ModelParams, n: usize, n_companion: usize, nonlinear: bool) -> CliResult<Reference> {
    let data = InitialData::compact_bump(0.5, 0.0, 2.0)?;
    let mut cfg = SolverConfig::new(REF_T);
    cfg.nonlinearity_on = nonlinear;
    let grid = RadialGrid::new(params.d, n, REF_R_MAX)?;
    let mut energy = EnergyRecorder::new(1).with_interior(&[0.5]);
    let mut axis = AxisRecorder::new();
    let mut cones = ConeFluxRecorder::new(&CONE_TAUS, &CONE_SS, true);
    let mut morawetz = MorawetzRecorder::new(&MORAWETZ_R);
    let mut weighted = WeightedMorawetzRecorder::new(KAPPAS.iter().map(|&k| WeightSpec::power(k)).collect())?;
    {
        let mut recs: [&mut dyn Recorder; 5] = [&mut energy, &mut axis, &mut cones, &mut morawetz, &mut weighted];
        evolve(&data, &grid, params, &cfg, &mut recs)?;
    }
    let s0 = data.discretize(&grid);
    let model = inoutwave::solver::Model::new(*params, nonlinear);
    let e_kappa = KAPPAS
        .iter()
        .map(|&k| inoutwave::energy::weighted_energy(&s0, &grid, &model, k))
        .collect::<inoutwave::Result<Vec<_>>>()?;

    let grid_c = RadialGrid::new(params.d, n_companion, REF_R_MAX)?;
    let mut companion = EnergyRecorder::new(1);
    evolve(&data, &grid_c, params, &cfg, &mut [&mut companion])?;
    Ok(Reference {
        energy,
        companion,
        axis,
        cones: cones.fluxes(),
        morawetz,
        weighted,
        e_kappa,
    })
}

impl Reference {
    fn e(&self) -> f64 {
        self.energy.rows[0].report.e
    }
}

fn worst_split(rec: &EnergyRecorder) -> f64 {
    let e0 = rec.rows[0].report.e;
    rec.rows
        .iter()
        .map(|r| (r.report.e_minus + r.report.e_plus - r.report.e).abs() / e0)
        .fold(0.0, f64::max)
}

/// Largest rise of `E₋` or fall of `E₊` between consecutive rows, over `E`.
fn worst_slack(rec: &EnergyRecorder) -> f64 {
    let e0 = rec.rows[0].report.e;
    rec.rows
        .windows(2)
        .map(|w| (w[1].report.e_minus - w[0].report.e_minus).max(w[0].report.e_plus - w[1].report.e_plus).max(0.0) / e0)
        .fold(0.0, f64::max)
}

fn check_split(name: &'static str, refs: &[(&ModelParams, &Reference)]) -> CheckResult {
    let mut worst: f64 = 0.0;
    let mut order = f64::INFINITY;
    let mut notes = Vec::new();
    for (p, r) in refs {
        let (fine, coarse) = (worst_split(&r.energy), worst_split(&r.companion));
        worst = worst.max(fine);
        order = order.min(log2_ratio(coarse, fine));
        notes.push(format!("{}: {fine:.3e}", case_label(p)));
    }
    CheckResult::new(name, worst <= 1e-4, worst, 1e-4).order(order).note(notes.join("; "))
}

fn check_monotonicity(name: &'static str, refs: &[(&ModelParams, &Reference)]) -> CheckResult {
    let mut worst: f64 = 0.0;
    let mut order = f64::INFINITY;
    let mut shrinks = true;
    let mut notes = Vec::new();
    for (p, r) in refs {
        let (fine, coarse) = (worst_slack(&r.energy), worst_slack(&r.companion));
        worst = worst.max(fine);
        shrinks &= fine == 0.0 || fine <= coarse / 3.0;
        if fine > 0.0 {
            order = order.min(log2_ratio(coarse, fine));
        }
        notes.push(format!("{}: {coarse:.3e} -> {fine:.3e}", case_label(p)));
    }
    let mut c = CheckResult::new(name, worst <= 1e-3 && shrinks, worst, 1e-3).note(notes.join("; "));
    if order.is_finite() {
        c = c.order(order);
    }
    c
}

#[derive(Debug, Clone, Copy)]
struct FluxCase {
    /// `|residual| / (∬M + 0.01E)` per region and energy type, coarse then fine.
    rel: [f64; 2],
    residual: [f64; 2],
}

fn flux_regions() -> CliResult<Vec<Region>> {
    Ok(vec![
        Region::rectangle(1.0, 2.0, 1.0, 4.0)?,
        Region::from_vertices(&[(0.0, 0.0), (3.0, 0.0), (0.0, 3.0)])?,
    ])
}

fn flux_runs(cases: &[ModelParams], ns: [usize; 2], nonlinear: bool) -> CliResult<Vec<(ModelParams, Vec<FluxCase>)>> {
    let jobs: Vec<(ModelParams, usize)> = cases.iter().flat_map(|&c| ns.iter().map(move |&n| (c, n))).collect();
    let ledgers: Vec<CliResult<Vec<(f64, f64)>>> = jobs
        .par_iter()
        .map(|&(params, n)| {
            let grid = RadialGrid::new(params.d, n, 16.0)?;
            let data = InitialData::compact_bump(1.0, 0.0, 2.0)?;
            let mut rr = RegionRecorder::new(flux_regions()?);
            let mut en = EnergyRecorder::new(1000);
            let mut cfg = SolverConfig::new(8.0);
            cfg.nonlinearity_on = nonlinear;
            evolve(&data, &grid, &params, &cfg, &mut [&mut rr, &mut en])?;
            let e = en.rows[0].report.e;
            let mut out = Vec::new();
            for tr in rr.traces() {
                for et in EnergyType::BOTH {
                    let l = flux_balance(&tr, et)?;
                    out.push((l.residual, l.morawetz_integral + 0.01 * e));
                }
            }
            Ok(out)
        })
        .collect();
    let mut out = Vec::new();
    for (i, &params) in cases.iter().enumerate() {
        let coarse = ledgers[2 * i].as_ref().map_err(|e| CliError::Runtime(e.to_string()))?;
        let fine = ledgers[2 * i + 1].as_ref().map_err(|e| CliError::Runtime(e.to_string()))?;
        let rows = coarse
            .iter()
            .zip(fine)
            .map(|(&(rc, sc), &(rf, sf))| FluxCase {
                rel: [rc.abs() / sc, rf.abs() / sf],
                residual: [rc, rf],
            })
            .collect();
        out.push((params, rows));
    }
    Ok(out)
}

fn check_flux((r, elapsed): (CliResult<Vec<(ModelParams, Vec<FluxCase>)>>, Duration)) -> CheckResult {
    let name = CHECK_NAMES[4];
    let cases = match r {
        Ok(c) => c,
        Err(e) => return CheckResult::error(name, &e),
    };
    let mut worst: f64 = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, rows) in &cases {
        for f in rows {
            worst = worst.max(f.rel[0]);
            let ratio = f.residual[1] / f.residual[0];
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    let pass = worst <= 0.01 && lo >= 0.15 && hi <= 0.45;
    CheckResult::new(name, pass, worst, 0.01)
        .order(-hi.log2())
        .note(format!(
            "{} regions x 2 ledgers x {} cases; residual ratios in [{lo:.3}, {hi:.3}] (band [0.15, 0.45])",
            cases.first().map_or(0, |c| c.1.len() / 2),
            cases.len()
        ))
        .timed(elapsed, Some(Duration::from_secs(120)))
}

fn check_morawetz(name: &'static str, refs: &[(&ModelParams, &Reference)]) -> CheckResult {
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for (p, r) in refs {
        let reps = r.morawetz.reports(r.e(), false);
        let m = reps.iter().map(|x| x.total / x.bound).fold(0.0, f64::max);
        worst = worst.max(m);
        notes.push(format!("{}: {m:.4}", case_label(p)));
    }
    CheckResult::new(name, worst <= 1.0, worst, 1.0).note(format!("max total/(2E) over R; {}", notes.join("; ")))
}

fn check_rediscover(name: &'static str, refs: &[(&ModelParams, &Reference)]) -> CheckResult {
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for (p, r) in refs {
        match rediscover(&r.axis) {
            Ok(x) => {
                let allowed = x.e_minus_t + 0.02 * r.e();
                let q = x.defect.abs() / allowed;
                worst = worst.max(q);
                notes.push(format!("{}: defect {:.3e}, allowed {allowed:.3e}", case_label(p), x.defect));
            }
            Err(e) => return CheckResult::error(name, &e.into()),
        }
    }
    CheckResult::new(name, worst <= 1.0, worst, 1.0).note(notes.join("; "))
}

fn check_cones(name: &'static str, refs: &[(&ModelParams, &Reference)]) -> CheckResult {
    let mut worst_sum: f64 = 0.0;
    let mut worst_tail: f64 = 0.0;
    let mut notes = Vec::new();
    for (p, r) in refs {
        let e = r.e();
        let sum = r.cones.iter().map(|c| (c.q_minus + c.q_plus) / e).fold(0.0, f64::max);
        let latest_s = r
            .cones
            .iter()
            .filter(|c| c.kind == ConeKind::Backward)
            .max_by(|a, b| a.label.total_cmp(&b.label));
        let earliest_tau = r
            .cones
            .iter()
            .filter(|c| c.kind == ConeKind::Forward)
            .min_by(|a, b| a.label.total_cmp(&b.label));
        let (Some(s), Some(tau)) = (latest_s, earliest_tau) else {
            return CheckResult::error(name, &CliError::Runtime("cone families missing".into()));
        };
        let tail = (s.q_minus / e).max(tau.q_plus / e);
        worst_sum = worst_sum.max(sum);
        worst_tail = worst_tail.max(tail);
        notes.push(format!(
            "{}: max Q/E {sum:.4}, Q-(s={})/E {:.2e}, Q+(tau={})/E {:.2e}",
            case_label(p),
            s.label,
            s.q_minus / e,
            tau.label,
            tau.q_plus / e
        ));
    }
    CheckResult::new(name, worst_sum <= 1.02 && worst_tail <= 0.05, worst_sum, 1.02).note(notes.join("; "))
}

fn check_decay(name: &'static str, refs: &[(&ModelParams, &Reference)]) -> CheckResult {
    let (_, r) = refs[0];
    let t = r.energy.times();
    let em = r.energy.e_minus();
    let half = t.partition_point(|&x| x <= 0.5 * REF_T + 1e-9) - 1;
    let mut worst_slope = f64::NEG_INFINITY;
    let mut pass = true;
    let mut notes = Vec::new();
    for (i, &kappa) in KAPPAS.iter().enumerate() {
        let fits = decay_fit(&t, &em, kappa, r.e_kappa[i], 5.0)
            .and_then(|full| decay_fit(&t[..=half], &em[..=half], kappa, r.e_kappa[i], 5.0).map(|h| (full, h)));
        let (full, short) = match fits {
            Ok(f) => f,
            Err(e) => return CheckResult::error(name, &e.into()),
        };
        let chain = match weighted_tail_checks(&r.weighted, i, &r.axis) {
            Ok(c) => c,
            Err(e) => return CheckResult::error(name, &e.into()),
        };
        let chain_ok = chain.iter().all(|c| c.lhs <= c.rhs * (1.0 + 1e-3) + 1e-12);
        let excess = full.fitted_slope + kappa;
        let growth = full.truncated_l_power_norm / short.truncated_l_power_norm - 1.0;
        worst_slope = worst_slope.max(excess);
        pass &= excess <= 0.1 && full.bound_constant <= 50.0 && growth <= 0.05 && chain_ok;
        notes.push(format!(
            "k={kappa}: slope {:.3}, sup {:.3e}, L-norm growth {growth:.3e}, tail chain {}",
            full.fitted_slope,
            full.bound_constant,
            if chain_ok { "holds" } else { "violated" }
        ));
    }
    CheckResult::new(name, pass, worst_slope, 0.1).note(format!("max (slope + kappa); {}", notes.join("; ")))
}

fn check_lemma(seed: u64) -> CheckResult {
    let name = CHECK_NAMES[9];
    let uniform = match l_power_lemma_check(&[0.0, 1.0], &[1.0, 1.0], 0.5) {
        Ok((f, mass)) => (f * f, mass),
        Err(e) => return CheckResult::error(name, &e.into()),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for _ in 0..200 {
        let n = rng.gen_range(2..12);
        let mut y = vec![0.0];
        let mut rho = vec![rng.gen_range(0.0..3.0)];
        for _ in 0..n {
            y.push(y.last().unwrap() + rng.gen_range(0.01..1.0));
            rho.push(rng.gen_range(0.0..3.0));
        }
        for k in 1..=9 {
            match l_power_lemma_check(&y, &rho, k as f64 / 10.0) {
                Ok((f, mass)) if mass > 0.0 => worst = worst.max(f / mass),
                Ok(_) => {}
                Err(e) => return CheckResult::error(name, &e.into()),
            }
            count += 1;
        }
    }
    let uniform_ok = (uniform.0 - 2.0 / 3.0).abs() <= 1e-3 && uniform.0 <= uniform.1;
    CheckResult::new(name, uniform_ok && worst <= 1.0 + 1e-9, worst, 1.0).note(format!(
        "uniform ||f||^2 = {:.6} (mass {}); {count} random cases, max f/mass {worst:.6}",
        uniform.0, uniform.1
    ))
}

fn check_kappa0() -> CheckResult {
    let name = CHECK_NAMES[10];
    let mut worst: f64 = 0.0;
    let mut run = || -> inoutwave::Result<()> {
        for d in 3..=9 {
            let (pc, pe) = critical_exponents(d);
            for k in 0..=40 {
                let p = pc + (pe - pc) * k as f64 / 40.0;
                let (a, b) = (kappa_0_rational(d, p)?, kappa_0_interpolated(d, p)?);
                worst = worst.max((a - b).abs());
            }
            worst = worst.max(kappa_0(d, pe)?.abs());
            worst = worst.max((kappa_0(d, pc)? - 1.0).abs());
        }
        let (pc, pe) = critical_exponents(3);
        for k in 0..=40 {
            let p = pc + (pe - pc) * k as f64 / 40.0;
            worst = worst.max((kappa_0(3, p)? - (5.0 - p) / 2.0).abs());
        }
        Ok(())
    };
    match run() {
        Ok(()) => CheckResult::new(name, worst <= 1e-12, worst, 1e-12)
            .note("forms agree on 41 p per d in 3..=9; endpoints; d=3 closed form".into()),
        Err(e) => CheckResult::error(name, &e.into()),
    }
}

fn check_interconstant_grid() -> CheckResult {
    let name = CHECK_NAMES[11];
    let mut count = 0;
    let mut failures = Vec::new();
    for d in 4..=8 {
        let (pc, pe) = critical_exponents(d);
        let hi = pe.min(1.0 + 3.0 / (d as f64 - 3.0));
        for k in 1..=20 {
            let p = pc + (hi - pc) * k as f64 / 21.0;
            count += 1;
            let ok = ModelParams::new(d, p).and_then(|m| check_interconstants(&m));
            if let Err(e) = ok {
                failures.push(format!("d={d} p={p}: {e}"));
            }
        }
    }
    CheckResult::new(name, failures.is_empty() && count == 100, failures.len() as f64, 0.0)
        .note(if failures.is_empty() {
            format!("{count} points")
        } else {
            format!("{count} points; {}", failures.join("; "))
        })
}

fn scattering_run(n: usize, nonlinear: bool) -> CliResult<(f64, f64, f64)> {
    let params = ModelParams::new(3, 3.0)?;
    let grid = RadialGrid::new(3, n, 88.0)?;
    let data = InitialData::compact_bump(0.5, 0.0, 2.0)?;
    let mut cfg = SolverConfig::new(40.0);
    cfg.nonlinearity_on = nonlinear;
    cfg.step_multiple = 4;
    let mut snaps = SnapshotRecorder::new(&SCATTER_T);
    let mut en = EnergyRecorder::new(1000);
    evolve(&data, &grid, &params, &cfg, &mut [&mut snaps, &mut en])?;
    let d1 = scatter_defect(&snaps, &grid, &params, 10.0, 20.0)?;
    let d2 = scatter_defect(&snaps, &grid, &params, 20.0, 40.0)?;
    Ok((d1, d2, en.rows[0].report.e))
}

fn check_scattering((r, elapsed): (CliResult<(f64, f64, f64)>, Duration)) -> CheckResult {
    let name = CHECK_NAMES[12];
    match r {
        Ok((d1, d2, e)) => {
            let bound = 0.1 * e.sqrt();
            CheckResult::new(name, d2 < d1 && d2 <= bound, d2, bound)
                .note(format!("defect(10,20) {d1:.3e}, defect(20,40) {d2:.3e}"))
                .timed(elapsed, Some(Duration::from_secs(120)))
        }
        Err(e) => CheckResult::error(name, &e),
    }
}

fn check_travelling(name: &'static str, refs: &[(&ModelParams, &Reference)]) -> CheckResult {
    let (_, r) = refs[0];
    match interior_energy(&r.energy, 0.5) {
        Ok(series) => {
            let (t, v) = *series.last().expect("non-empty");
            let q = v / r.e();
            CheckResult::new(name, q <= 0.05, q, 0.05).note(format!("energy in |x| < t/2 at t = {t} over E"))
        }
        Err(e) => CheckResult::error(name, &e.into()),
    }
}

/// Runs the suite, writes `verify.csv` into `out` and returns the summary.
pub fn verify(cfg: &VerifyConfig) -> CliResult<VerificationSummary> {
    let suite = Suite::from_config(cfg)?;
    let summary = suite.run()?;
    summary.write_csv(&suite.work_dir.join("verify.csv"))?;
    Ok(summary)
}

pub fn format_line(c: &CheckResult) -> String {
    let status = match c.status {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::Skip => "SKIP",
    };
    let mut line = format!("{status} {:<20} measured {} (tolerance {})", c.name, num(c.measured), num(c.tolerance));
    if let Some(o) = c.refinement_order {
        line.push_str(&format!(" order {o:.2}"));
    }
    if let Some(e) = c.elapsed {
        line.push_str(&format!(" [{:.1}s]", e.as_secs_f64()));
    }
    line
}
