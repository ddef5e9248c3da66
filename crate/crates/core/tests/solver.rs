use inoutwave::energy::EnergyRecorder;
use inoutwave::mathlib::ModelParams;
use inoutwave::solver::snapshot::{read_snapshot, write_snapshot};
use inoutwave::solver::*;
use inoutwave::Result;

/// Radial free wave in three dimensions with `u_1 = 0`: `r u` solves the 1-D
/// equation, so `u = [φ(r+t) + φ(r-t)] / 2r` with `φ(s) = s g(|s|)`.
fn free_wave_3d(g: impl Fn(f64) -> f64, r: f64, t: f64) -> f64 {
    let phi = |s: f64| s * g(s.abs());
    (phi(r + t) + phi(r - t)) / (2.0 * r)
}

fn oracle_error(n: usize) -> f64 {
    let params = ModelParams::new(3, 3.0).unwrap();
    let grid = RadialGrid::new(3, n, 18.0).unwrap();
    let data = InitialData::gaussian(1.0, 0.0, 1.0).unwrap();
    let report = evolve(&data, &grid, &params, &SolverConfig::new(10.0).linear(), &mut []).unwrap();
    let t = report.final_state.t;
    let (mut num, mut den) = (0.0, 0.0);
    for (j, &r) in grid.centers().iter().enumerate() {
        let exact = free_wave_3d(|x| (-x * x).exp(), r, t);
        let w = grid.weights()[j];
        num += w * (report.final_state.u[j] - exact).powi(2);
        den += w * exact * exact;
    }
    (num / den).sqrt()
}

#[test]
fn matches_free_wave_at_second_order() {
    let e1 = oracle_error(1024);
    let e2 = oracle_error(2048);
    assert!(e2 < 1e-3, "error {e2}");
    let ratio = e1 / e2;
    assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}");
}

struct SupportCheck {
    r0: f64,
    /// Largest `|u|` beyond `r0 + t + m h` for each margin `m`.
    margins: Vec<f64>,
    worst: Vec<f64>,
    /// Any nonzero value outside the stencil's reach `r0 + step h`.
    leaked: bool,
}

impl SupportCheck {
    fn new(r0: f64, margins: &[f64]) -> Self {
        Self {
            r0,
            margins: margins.to_vec(),
            worst: vec![0.0; margins.len()],
            leaked: false,
        }
    }
}

impl Recorder for SupportCheck {
    fn name(&self) -> &'static str {
        "support"
    }

    fn record(&mut self, frame: &Frame<'_>) -> Result<()> {
        let h = frame.grid.h();
        let reach = self.r0 + (frame.step + 1) as f64 * h;
        for (j, &r) in frame.grid.centers().iter().enumerate() {
            let u = frame.state.u[j].abs();
            if r > reach && u != 0.0 {
                self.leaked = true;
            }
            for (k, m) in self.margins.iter().enumerate() {
                if r > self.r0 + frame.t() + m * h {
                    self.worst[k] = self.worst[k].max(u);
                }
            }
        }
        Ok(())
    }
}

fn support_run(d: usize, p: f64, n: usize) -> SupportCheck {
    let params = ModelParams::new(d, p).unwrap();
    let grid = RadialGrid::new(d, n, 16.0).unwrap();
    let data = InitialData::compact_bump(1.0, 0.0, 2.0).unwrap();
    let mut check = SupportCheck::new(2.0, &[2.0, 32.0]);
    evolve(&data, &grid, &params, &SolverConfig::new(10.0), &mut [&mut check]).unwrap();
    check
}

#[test]
fn finite_speed_of_propagation() {
    for &(d, p) in &[(3, 3.0), (5, 2.2)] {
        let coarse = support_run(d, p, 1024);
        let fine = support_run(d, p, 2048);
        assert!(!coarse.leaked && !fine.leaked);
        // the scheme's dispersive precursor just ahead of the cone
        assert!(coarse.worst[0] < 1e-6, "d={d}: {}", coarse.worst[0]);
        assert!(coarse.worst[0] / fine.worst[0] > 3.0);
        assert!(fine.worst[1] <= 1e-10, "d={d}: {}", fine.worst[1]);
    }
}

#[test]
fn leapfrog_is_time_reversible() {
    for nonlinear in [false, true] {
        let params = ModelParams::new(3, 3.0).unwrap();
        let grid = RadialGrid::new(3, 512, 12.0).unwrap();
        let data = InitialData::compact_bump(1.5, 0.0, 2.0).unwrap();
        let start = data.discretize(&grid);
        let solver = Solver::new(&grid, Model::new(params, nonlinear), 0.8 * grid.h()).unwrap();
        let mut s = start.clone();
        for _ in 0..300 {
            solver.step(&mut s).unwrap();
        }
        s.v.iter_mut().for_each(|v| *v = -*v);
        for _ in 0..300 {
            solver.step(&mut s).unwrap();
        }
        let err = s.u.iter().zip(&start.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let verr = s.v.iter().zip(&start.v).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12 && verr < 1e-12, "nonlinear={nonlinear}: {err} {verr}");
    }
}

fn max_drift(n: usize) -> f64 {
    let params = ModelParams::new(3, 3.0).unwrap();
    let grid = RadialGrid::new(3, n, 12.0).unwrap();
    let data = InitialData::compact_bump(1.0, 0.0, 2.0).unwrap();
    let mut rec = EnergyRecorder::new(1);
    evolve(&data, &grid, &params, &SolverConfig::new(6.0), &mut [&mut rec]).unwrap();
    let e0 = rec.rows[0].report.e;
    rec.rows.iter().map(|r| (r.report.e - e0).abs() / e0).fold(0.0, f64::max)
}

#[test]
fn energy_drift_is_second_order() {
    let d1 = max_drift(512);
    let d2 = max_drift(1024);
    assert!(d1 < 1e-2);
    let ratio = d1 / d2;
    assert!((3.0..=5.0).contains(&ratio), "drift ratio {ratio}");
}

#[test]
fn large_defocusing_data_stays_bounded() {
    let params = ModelParams::new(3, 3.0).unwrap();
    let grid = RadialGrid::new(3, 1024, 24.0).unwrap();
    let data = InitialData::compact_bump(4.0, 0.0, 2.0).unwrap();
    struct Peak(f64);
    impl Recorder for Peak {
        fn name(&self) -> &'static str {
            "peak"
        }
        fn record(&mut self, frame: &Frame<'_>) -> Result<()> {
            self.0 = frame.state.u.iter().fold(self.0, |m, x| m.max(x.abs()));
            Ok(())
        }
    }
    let mut peak = Peak(0.0);
    evolve(&data, &grid, &params, &SolverConfig::new(20.0), &mut [&mut peak]).unwrap();
    assert!(peak.0.is_finite() && peak.0 < 40.0, "peak {}", peak.0);
}

#[test]
fn linear_evolve_round_trip() {
    let params = ModelParams::new(4, 2.5).unwrap();
    let grid = RadialGrid::new(4, 512, 20.0).unwrap();
    let data = InitialData::compact_bump(1.0, 0.0, 2.0).unwrap();
    let s0 = data.discretize(&grid);
    let fwd = linear_evolve(&s0, &grid, &params, 8.0, None).unwrap();
    let back = linear_evolve(&fwd, &grid, &params, 0.0, None).unwrap();
    let err = back.u.iter().zip(&s0.u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-12, "{err}");
    assert!(linear_evolve(&fwd, &grid, &params, 20.0, None).is_err());
}

#[test]
fn snapshot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.csv");
    let grid = RadialGrid::new(3, 64, 4.0).unwrap();
    let mut s = InitialData::gaussian(0.3, 0.0, 0.7).unwrap().discretize(&grid);
    s.t = 1.25;
    write_snapshot(&path, &s, &grid, 3.0).unwrap();
    let (meta, back) = read_snapshot(&path).unwrap();
    assert_eq!(meta.n, 64);
    assert_eq!(back.t, 1.25);
    assert_eq!(back.u, s.u);
    assert_eq!(back.v, s.v);
}
