//! Space-time norms, interior energy, free-profile extraction and the
//! interpolation constants used for energy-norm scattering.

use serde::{Deserialize, Serialize};

use crate::energy::EnergyRecorder;
use crate::error::{domain, precondition, Error, Result};
use crate::mathlib::{critical_exponents, kappa_0, radial_sum, Exponent, ModelParams, StrichartzPair};
use crate::solver::{discrete_energy, required_r_max, FieldState, Frame, Model, RadialGrid, Recorder, Solver};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeNorm {
    pub q: Exponent,
    pub r: f64,
    pub value: f64,
    pub span: (f64, f64),
}

/// `q = r = (d+1)(p-1)/2`.
pub fn s_dp_exponent(d: usize, p: f64) -> f64 {
    (d as f64 + 1.0) * (p - 1.0) / 2.0
}

/// `q = r = 2(d+1)/(d-1)`.
pub fn w_d_exponent(d: usize) -> f64 {
    2.0 * (d as f64 + 1.0) / (d as f64 - 1.0)
}

/// Records `‖u(t)‖_{L^r}` at every step for a fixed list of `r`.
#[derive(Debug, Clone, Default)]
pub struct NormRecorder {
    rs: Vec<f64>,
    pub t: Vec<f64>,
    /// `norms[k][i]` is `‖u(t_k)‖_{L^{r_i}}`.
    pub norms: Vec<Vec<f64>>,
}

impl NormRecorder {
    pub fn new(rs: &[f64]) -> Result<Self> {
        if let Some(r) = rs.iter().find(|r| !(**r >= 1.0) || !r.is_finite()) {
            return Err(domain(format!("space exponent r = {r} must be finite and >= 1")));
        }
        Ok(Self {
            rs: rs.to_vec(),
            ..Self::default()
        })
    }

    pub fn rs(&self) -> &[f64] {
        &self.rs
    }
}

impl Recorder for NormRecorder {
    fn name(&self) -> &'static str {
        "norms"
    }

    fn record(&mut self, frame: &Frame<'_>) -> Result<()> {
        let grid = frame.grid;
        let u = &frame.state.u;
        let row = self
            .rs
            .iter()
            .map(|&r| {
                let vals: Vec<f64> = u.iter().map(|x| x.abs().powf(r)).collect();
                radial_sum(&vals, grid).powf(1.0 / r)
            })
            .collect();
        self.t.push(frame.t());
        self.norms.push(row);
        Ok(())
    }
}

/// `(∫_span ‖u(t)‖_{L^r}^q dt)^{1/q}` by the trapezoid rule over the recorded
/// times, or the maximum when `q = ∞`.
pub fn spacetime_norm(rec: &NormRecorder, q: Exponent, r: f64, span: (f64, f64)) -> Result<SpaceTimeNorm> {
    if let Exponent::Finite(qv) = q {
        if !(qv >= 1.0) {
            return Err(domain(format!("time exponent q = {qv} must be >= 1")));
        }
    }
    if !(r >= 1.0) || !r.is_finite() {
        return Err(domain(format!("space exponent r = {r} must be finite and >= 1")));
    }
    let i = rec
        .rs
        .iter()
        .position(|&x| x == r)
        .ok_or_else(|| precondition(format!("L^{r} norms were not recorded")))?;
    let (Some(&t0), Some(&t1)) = (rec.t.first(), rec.t.last()) else {
        return Err(precondition("no recorded times"));
    };
    let tol = 1e-9 * t1.abs().max(1.0);
    if span.0 > span.1 || span.0 < t0 - tol || span.1 > t1 + tol {
        return Err(domain(format!("span {span:?} outside the run [{t0}, {t1}]")));
    }
    let inside: Vec<(f64, f64)> = rec
        .t
        .iter()
        .zip(&rec.norms)
        .filter(|(t, _)| **t >= span.0 - tol && **t <= span.1 + tol)
        .map(|(t, row)| (*t, row[i]))
        .collect();
    let value = match q {
        Exponent::Infinite(_) => inside.iter().map(|x| x.1).fold(0.0, f64::max),
        Exponent::Finite(qv) => {
            let s: f64 = inside
                .windows(2)
                .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1.powf(qv) + w[1].1.powf(qv)))
                .sum();
            s.powf(1.0 / qv)
        }
    };
    Ok(SpaceTimeNorm { q, r, value, span })
}

/// `(t, energy in |x| < c t)` for one of the recorder's configured `c`.
pub fn interior_energy(rec: &EnergyRecorder, c: f64) -> Result<Vec<(f64, f64)>> {
    if !(c > 0.0 && c < 1.0) {
        return Err(domain(format!("speed c = {c} outside (0, 1)")));
    }
    let i = rec
        .interior_c()
        .iter()
        .position(|&x| x == c)
        .ok_or_else(|| precondition(format!("interior energy for c = {c} was not recorded")))?;
    Ok(rec.rows.iter().map(|row| (row.report.t, row.interior[i])).collect())
}

/// Keeps copies of the state at the requested times, which must fall on the
/// time lattice of the run.
#[derive(Debug, Clone)]
pub struct SnapshotRecorder {
    times: Vec<f64>,
    pub snapshots: Vec<(f64, FieldState)>,
    dt: f64,
}

impl SnapshotRecorder {
    pub fn new(times: &[f64]) -> Self {
        Self {
            times: times.to_vec(),
            snapshots: Vec::new(),
            dt: 0.0,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn get(&self, t: f64) -> Result<&FieldState> {
        self.snapshots
            .iter()
            .find(|(s, _)| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
            .map(|(_, st)| st)
            .ok_or_else(|| precondition(format!("no snapshot at t = {t}")))
    }
}

impl Recorder for SnapshotRecorder {
    fn name(&self) -> &'static str {
        "snapshots"
    }

    fn record(&mut self, frame: &Frame<'_>) -> Result<()> {
        self.dt = frame.dt;
        let t = frame.t();
        for &want in &self.times {
            if (t - want).abs() <= 1e-9 * want.abs().max(1.0) && self.get(want).is_err() {
                self.snapshots.push((want, frame.state.clone()));
            }
        }
        if frame.is_last() {
            if let Some(miss) = self.times.iter().find(|&&w| self.get(w).is_err()) {
                return Err(precondition(format!(
                    "t = {miss} is not a step time of the run (dt = {}); adjust step_multiple",
                    frame.dt
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterProfile {
    #[serde(rename = "T")]
    pub t: f64,
    pub v0: Vec<f64>,
    pub v1: Vec<f64>,
    pub energy_norm: f64,
}

/// `‖(u, v)‖_{Ḣ¹×L²}` with face differences for `∂_r u`.
pub fn energy_norm(u: &[f64], v: &[f64], grid: &RadialGrid, params: &ModelParams) -> f64 {
    let s = FieldState {
        t: 0.0,
        u: u.to_vec(),
        v: v.to_vec(),
    };
    (2.0 * discrete_energy(&s, grid, &Model::new(*params, false))).sqrt()
}

/// Pulls the state at time `t` back to `0` with the linear scheme, using the
/// step `dt` of the run so a linear run is undone exactly.
pub fn extract_profile(
    state: &FieldState,
    grid: &RadialGrid,
    params: &ModelParams,
    t: f64,
    dt: f64,
) -> Result<ScatterProfile> {
    grid.check_len("extract_profile", state.u.len())?;
    if !(t >= 0.0) || !(dt > 0.0) {
        return Err(precondition(format!("need t >= 0 and dt > 0, got t = {t}, dt = {dt}")));
    }
    let support = state.support_radius(grid, 1e-12);
    let need = required_r_max(support, t, grid.h());
    if grid.r_max() < need - 1e-12 {
        return Err(domain(format!(
            "pull-back from t = {t} needs r_max >= {need} (support {support}); enlarge r_max"
        )));
    }
    let steps = (t / dt).round() as usize;
    if (steps as f64 * dt - t).abs() > 1e-9 * t.max(1.0) {
        return Err(precondition(format!("t = {t} is not a multiple of dt = {dt}")));
    }
    let solver = Solver::new(grid, Model::new(*params, false), dt)?;
    let mut work = state.clone();
    work.t = 0.0;
    work.v.iter_mut().for_each(|v| *v = -*v);
    solver.run(&mut work, steps, &mut [])?;
    work.v.iter_mut().for_each(|v| *v = -*v);
    let energy_norm = energy_norm(&work.u, &work.v, grid, params);
    Ok(ScatterProfile {
        t,
        v0: work.u,
        v1: work.v,
        energy_norm,
    })
}

pub fn profile_distance(a: &ScatterProfile, b: &ScatterProfile, grid: &RadialGrid, params: &ModelParams) -> f64 {
    let du: Vec<f64> = a.v0.iter().zip(&b.v0).map(|(x, y)| x - y).collect();
    let dv: Vec<f64> = a.v1.iter().zip(&b.v1).map(|(x, y)| x - y).collect();
    energy_norm(&du, &dv, grid, params)
}

/// `‖profile(t2) - profile(t1)‖_{Ḣ¹×L²}` from recorded snapshots.
pub fn scatter_defect(
    snaps: &SnapshotRecorder,
    grid: &RadialGrid,
    params: &ModelParams,
    t1: f64,
    t2: f64,
) -> Result<f64> {
    if !(t1 < t2) {
        return Err(precondition(format!("need t1 < t2, got {t1} and {t2}")));
    }
    let a = extract_profile(snaps.get(t1)?, grid, params, t1, snaps.dt())?;
    let b = extract_profile(snaps.get(t2)?, grid, params, t2, snaps.dt())?;
    Ok(profile_distance(&a, &b, grid, params))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterconstantSet {
    pub q1: Exponent,
    pub r1: f64,
    pub q2: f64,
    pub r2: f64,
    pub k1: f64,
    pub k2: f64,
}

const INTERCONSTANT_TOL: f64 = 1e-10;

/// Instantiates the exponents and powers used to interpolate the decay
/// estimate into scattering, and checks the constraints they must satisfy.
pub fn check_interconstants(params: &ModelParams) -> Result<InterconstantSet> {
    let d = params.d;
    let p = params.p;
    let (pc, pe) = critical_exponents(d);
    // p = p_e is the limit q1 = ∞
    if !(4..=8).contains(&d) || !(p > pc && p <= pe + 1e-12) {
        return Err(precondition(format!(
            "interpolation constants need 4 <= d <= 8 and p_c < p <= p_e, got d = {d}, p = {p}"
        )));
    }
    let df = d as f64;
    let k0 = kappa_0(d, p)?;
    let q1 = if k0 == 0.0 {
        Exponent::INFINITY
    } else {
        Exponent::Finite((p + 1.0) / k0)
    };
    let r1 = p + 1.0;
    let (q2, r2) = (2.0, 2.0 * df / (df - 3.0));
    let den = 2.0 * df / (p + 1.0) - (df - 3.0);
    let k1 = (4.0 * df / (df + 1.0) - (df - 3.0) * (p - 1.0)) / den;
    let k2 = (-4.0 * df / (df + 1.0) + 2.0 * df * (p - 1.0) / (p + 1.0)) / den;
    let target = 2.0 / (df + 1.0);
    let checks = [
        ("k1 + k2 = p - 1", k1 + k2, p - 1.0),
        ("k1/q1 + k2/q2", k1 * q1.reciprocal() + k2 / q2, target),
        ("k1/r1 + k2/r2", k1 / r1 + k2 / r2, target),
    ];
    for (name, got, want) in checks {
        if (got - want).abs() > INTERCONSTANT_TOL * want.abs().max(1.0) {
            return Err(Error::Consistency(format!("{name}: {got} != {want} at d = {d}, p = {p}")));
        }
    }
    if !(k1 > 0.0 && k2 > 0.0) {
        return Err(Error::Consistency(format!("k1 = {k1}, k2 = {k2} not both positive")));
    }
    if !crate::mathlib::is_admissible(&StrichartzPair::new(q2, r2, 1.0, 0.0), d) {
        return Err(Error::Consistency(format!("({q2}, {r2}) is not 1-admissible in d = {d}")));
    }
    Ok(InterconstantSet { q1, r1, q2, r2, k1, k2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn interconstants_examples() {
        let s = check_interconstants(&ModelParams::new(4, 2.5).unwrap()).unwrap();
        assert_relative_eq!(s.k1 + s.k2, 1.5, epsilon = 1e-12);
        let s = check_interconstants(&ModelParams::new(5, 2.2).unwrap()).unwrap();
        assert!(s.k1 > 0.0 && s.k2 > 0.0);
        assert!(check_interconstants(&ModelParams::new(3, 3.0).unwrap()).is_err());
    }

    #[test]
    fn energy_critical_limit() {
        let s = check_interconstants(&ModelParams::exploratory(4, 3.0).unwrap()).unwrap();
        assert!(s.q1.is_infinite());
        assert_relative_eq!(s.k2 / s.q2, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn exponent_shortcuts() {
        assert_relative_eq!(s_dp_exponent(3, 3.0), 4.0);
        assert_relative_eq!(w_d_exponent(3), 4.0);
        // at the conformal exponent the two coincide
        for d in 3..=9 {
            let pc = 1.0 + 4.0 / (d as f64 - 1.0);
            assert_relative_eq!(s_dp_exponent(d, pc), w_d_exponent(d), epsilon = 1e-12);
        }
    }

    #[test]
    fn norm_rejects_small_exponents() {
        assert!(NormRecorder::new(&[0.5]).is_err());
        let rec = NormRecorder::new(&[2.0]).unwrap();
        assert!(spacetime_norm(&rec, Exponent::Finite(0.5), 2.0, (0.0, 0.0)).is_err());
    }
}
