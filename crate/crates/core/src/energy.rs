//! Energy densities, the inward/outward split and the Hardy-type identities.
//!
//! `∂_r u` at cell centres is the centred difference with the even ghost
//! `u_{-1} = u_0` and a one-sided difference in the outermost cell.

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};
use crate::mathlib::{radial_integral, radial_integral_between, radial_sum};
use crate::solver::{discrete_energy, FieldState, Frame, Model, RadialGrid, Recorder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

pub fn centered_gradient(u: &[f64], h: f64) -> Vec<f64> {
    let n = u.len();
    let mut g = vec![0.0; n];
    if n < 2 {
        return g;
    }
    g[0] = (u[1] - u[0]) / (2.0 * h);
    for j in 1..n - 1 {
        g[j] = (u[j + 1] - u[j - 1]) / (2.0 * h);
    }
    g[n - 1] = (u[n - 1] - u[n - 2]) / h;
    g
}

/// `∂_r u + (d-1)/2 · u/r ± v` at the cell centres.
pub fn apply_l(state: &FieldState, grid: &RadialGrid, sign: Sign) -> Vec<f64> {
    let ur = centered_gradient(&state.u, grid.h());
    let k = (grid.dim() as f64 - 1.0) / 2.0;
    let s = sign.factor();
    grid.centers()
        .iter()
        .zip(&ur)
        .zip(state.u.iter().zip(&state.v))
        .map(|((r, g), (u, v))| g + k * u / r + s * v)
        .collect()
}

/// Every pointwise quantity the diagnostics need, at the cell centres.
#[derive(Debug, Clone)]
pub struct Profile {
    pub ur: Vec<f64>,
    pub l_plus: Vec<f64>,
    pub l_minus: Vec<f64>,
    /// `(λ/2) u²/r² + |u|^{p+1}/(p+1)`
    pub e_prime: Vec<f64>,
    /// `(λ/2) u²/r³ + (d-1)(p-1)/(4(p+1)) |u|^{p+1}/r`
    pub morawetz: Vec<f64>,
    /// `½ u_r² + ½ v² + |u|^{p+1}/(p+1)`
    pub energy: Vec<f64>,
    /// `¼ |L₊u|² + ½ e'`
    pub e_minus: Vec<f64>,
    /// `¼ |L₋u|² + ½ e'`
    pub e_plus: Vec<f64>,
}

impl Profile {
    pub fn compute(state: &FieldState, grid: &RadialGrid, model: &Model) -> Self {
        let n = grid.n();
        let ur = centered_gradient(&state.u, grid.h());
        let d = model.d() as f64;
        let k = (d - 1.0) / 2.0;
        let lambda = model.lambda();
        let p = model.p();
        let cm = (d - 1.0) * (p - 1.0) / (4.0 * (p + 1.0));
        let mut out = Self {
            ur: Vec::with_capacity(n),
            l_plus: Vec::with_capacity(n),
            l_minus: Vec::with_capacity(n),
            e_prime: Vec::with_capacity(n),
            morawetz: Vec::with_capacity(n),
            energy: Vec::with_capacity(n),
            e_minus: Vec::with_capacity(n),
            e_plus: Vec::with_capacity(n),
        };
        for j in 0..n {
            let r = grid.centers()[j];
            let (u, v, g) = (state.u[j], state.v[j], ur[j]);
            let pw = model.abs_pow_p1(u);
            let f = pw / (p + 1.0);
            let hardy = 0.5 * lambda * u * u / (r * r);
            let lp = g + k * u / r + v;
            let lm = g + k * u / r - v;
            let ep = hardy + f;
            out.l_plus.push(lp);
            out.l_minus.push(lm);
            out.e_prime.push(ep);
            out.morawetz.push(hardy / r + cm * pw / r);
            out.energy.push(0.5 * g * g + 0.5 * v * v + f);
            out.e_minus.push(0.25 * lp * lp + 0.5 * ep);
            out.e_plus.push(0.25 * lm * lm + 0.5 * ep);
        }
        out.ur = ur;
        out
    }
}

/// `u`, `∂_r u`, `∂_t u` at an arbitrary radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointValue {
    pub u: f64,
    pub ur: f64,
    pub v: f64,
}

/// Linear interpolation between cell centres; below the first centre, the
/// even parabola `a + b r²` through the two innermost cells.
pub fn sample_at(state: &FieldState, ur: &[f64], grid: &RadialGrid, r: f64) -> PointValue {
    let h = grid.h();
    let n = grid.n();
    let r0 = 0.5 * h;
    if r < r0 {
        let two_h2 = 2.0 * h * h;
        let bu = (state.u[1] - state.u[0]) / two_h2;
        let bv = (state.v[1] - state.v[0]) / two_h2;
        let au = state.u[0] - bu * r0 * r0;
        let av = state.v[0] - bv * r0 * r0;
        return PointValue {
            u: au + bu * r * r,
            ur: 2.0 * bu * r,
            v: av + bv * r * r,
        };
    }
    let x = r / h - 0.5;
    let j = x.floor() as usize;
    if j >= n - 1 {
        let k = n - 1;
        return PointValue {
            u: state.u[k],
            ur: ur[k],
            v: state.v[k],
        };
    }
    let w = x - j as f64;
    let lerp = |a: &[f64]| a[j] * (1.0 - w) + a[j + 1] * w;
    PointValue {
        u: lerp(&state.u),
        ur: lerp(ur),
        v: lerp(&state.v),
    }
}

/// Densities multiplied by `r^{d-1}`, written so that they stay finite as
/// `r -> 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WeightedDensities {
    pub l_plus_sq: f64,
    pub l_minus_sq: f64,
    pub e_prime: f64,
    pub morawetz: f64,
    pub energy: f64,
}

impl WeightedDensities {
    pub fn at(model: &Model, r: f64, pv: PointValue) -> Self {
        let di = model.d() as i32;
        let d = di as f64;
        let k = (d - 1.0) / 2.0;
        let lambda = model.lambda();
        let p = model.p();
        let q = r.powi(di - 3);
        let rd1 = r.powi(di - 1);
        let pw = model.abs_pow_p1(pv.u);
        let f = pw / (p + 1.0);
        let base = r * pv.ur + k * pv.u;
        let lp = base + r * pv.v;
        let lm = base - r * pv.v;
        let hardy = 0.5 * lambda * pv.u * pv.u;
        let m_hardy = if lambda == 0.0 { 0.0 } else { hardy * r.powi(di - 4) };
        let cm = (d - 1.0) * (p - 1.0) / (4.0 * (p + 1.0));
        Self {
            l_plus_sq: lp * lp * q,
            l_minus_sq: lm * lm * q,
            e_prime: hardy * q + f * rd1,
            morawetz: m_hardy + cm * pw * r.powi(di - 2),
            energy: (0.5 * pv.ur * pv.ur + 0.5 * pv.v * pv.v + f) * rd1,
        }
    }

    pub fn e_minus(&self) -> f64 {
        0.25 * self.l_plus_sq + 0.5 * self.e_prime
    }

    pub fn e_plus(&self) -> f64 {
        0.25 * self.l_minus_sq + 0.5 * self.e_prime
    }
}

pub fn total_energy(state: &FieldState, grid: &RadialGrid, model: &Model) -> Result<f64> {
    let prof = Profile::compute(state, grid, model);
    radial_integral(&prof.energy, grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyComponents {
    pub kinetic: f64,
    pub radial_gradient: f64,
    /// Always zero for radial solutions.
    pub angular_gradient: f64,
    pub potential: f64,
    /// `∫ λ_d u²/r²`
    pub hardy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "E_minus")]
    pub e_minus: f64,
    #[serde(rename = "E_plus")]
    pub e_plus: f64,
    pub components: EnergyComponents,
}

/// Radial interval `[a, b]`.
pub type Shell = (f64, f64);

fn integrate(values: &[f64], grid: &RadialGrid, region: Option<Shell>) -> f64 {
    match region {
        None => radial_sum(values, grid),
        Some((a, b)) => radial_integral_between(values, grid, a, b),
    }
}

pub fn split_energy_with(
    prof: &Profile,
    state: &FieldState,
    grid: &RadialGrid,
    model: &Model,
    region: Option<Shell>,
) -> EnergyReport {
    let n = grid.n();
    let mut kin = Vec::with_capacity(n);
    let mut grad = Vec::with_capacity(n);
    let mut pot = Vec::with_capacity(n);
    let mut hardy = Vec::with_capacity(n);
    let lambda = model.lambda();
    for j in 0..n {
        let r = grid.centers()[j];
        let u = state.u[j];
        kin.push(0.5 * state.v[j] * state.v[j]);
        grad.push(0.5 * prof.ur[j] * prof.ur[j]);
        pot.push(model.potential(u));
        hardy.push(lambda * u * u / (r * r));
    }
    EnergyReport {
        t: state.t,
        e: integrate(&prof.energy, grid, region),
        e_minus: integrate(&prof.e_minus, grid, region),
        e_plus: integrate(&prof.e_plus, grid, region),
        components: EnergyComponents {
            kinetic: integrate(&kin, grid, region),
            radial_gradient: integrate(&grad, grid, region),
            angular_gradient: 0.0,
            potential: integrate(&pot, grid, region),
            hardy: integrate(&hardy, grid, region),
        },
    }
}

/// `E`, `E₋`, `E₊` over all of space or over a shell.
pub fn split_energy(
    state: &FieldState,
    grid: &RadialGrid,
    model: &Model,
    region: Option<Shell>,
) -> Result<EnergyReport> {
    grid.check_len("split_energy", state.u.len())?;
    let prof = Profile::compute(state, grid, model);
    Ok(split_energy_with(&prof, state, grid, model, region))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyResidual {
    pub lhs: f64,
    pub rhs: f64,
    pub boundary_term: f64,
    pub residual: f64,
    /// For a finite radius: the identity on `|x| > R`.
    pub exterior: Option<(f64, f64, f64)>,
}

/// Residual of `∫ (|Lu|² + λ u²/r²) = ∫ |u_r|²` (plus the sphere term when a
/// radius `R` splits the space).
pub fn hardy_identity_residual(
    u: &[f64],
    grid: &RadialGrid,
    radius: Option<f64>,
) -> Result<HardyResidual> {
    grid.check_len("hardy_identity_residual", u.len())?;
    let n = grid.n();
    let peak = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tail = u[n.saturating_sub(4)..].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if tail > 1e-8 * peak.max(1.0) {
        return Err(precondition(format!(
            "u does not decay at the outer boundary (|u| = {tail:e})"
        )));
    }
    let d = grid.dim() as f64;
    let k = (d - 1.0) / 2.0;
    let lambda = crate::mathlib::lambda_d(grid.dim());
    let ur = centered_gradient(u, grid.h());
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for j in 0..n {
        let r = grid.centers()[j];
        let l = ur[j] + k * u[j] / r;
        left.push(l * l + lambda * u[j] * u[j] / (r * r));
        right.push(ur[j] * ur[j]);
    }
    match radius {
        None => {
            let lhs = integrate(&left, grid, None);
            let rhs = integrate(&right, grid, None);
            Ok(HardyResidual {
                lhs,
                rhs,
                boundary_term: 0.0,
                residual: lhs - rhs,
                exterior: None,
            })
        }
        Some(big_r) => {
            if !(big_r > 0.0) || big_r >= grid.r_max() {
                return Err(crate::error::domain(format!("radius {big_r} outside (0, r_max)")));
            }
            let zero = FieldState {
                t: 0.0,
                u: u.to_vec(),
                v: vec![0.0; n],
            };
            let pv = sample_at(&zero, &ur, grid, big_r);
            let boundary =
                (d - 1.0) / (2.0 * big_r) * grid.omega() * big_r.powi(grid.dim() as i32 - 1) * pv.u * pv.u;
            let lhs = radial_integral_between(&left, grid, 0.0, big_r);
            let rhs = radial_integral_between(&right, grid, 0.0, big_r);
            let lhs_ext = radial_integral_between(&left, grid, big_r, grid.r_max());
            let rhs_ext = radial_integral_between(&right, grid, big_r, grid.r_max());
            Ok(HardyResidual {
                lhs,
                rhs,
                boundary_term: boundary,
                residual: lhs - rhs - boundary,
                exterior: Some((lhs_ext, rhs_ext, lhs_ext - rhs_ext + boundary)),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensitySample {
    pub r: f64,
    pub e_prime: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub lplus_sq: f64,
    pub lminus_sq: f64,
}

pub fn densities(state: &FieldState, grid: &RadialGrid, model: &Model) -> Vec<DensitySample> {
    let prof = Profile::compute(state, grid, model);
    (0..grid.n())
        .map(|j| DensitySample {
            r: grid.centers()[j],
            e_prime: prof.e_prime[j],
            m: prof.morawetz[j],
            lplus_sq: prof.l_plus[j] * prof.l_plus[j],
            lminus_sq: prof.l_minus[j] * prof.l_minus[j],
        })
        .collect()
}

/// `E_κ = ∫ (1 + r^κ) [½|∂_r u_0|² + ½|u_1|² + |u_0|^{p+1}/(p+1)]`.
pub fn weighted_energy(state: &FieldState, grid: &RadialGrid, model: &Model, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    let prof = Profile::compute(state, grid, model);
    let w: Vec<f64> = grid
        .centers()
        .iter()
        .zip(&prof.energy)
        .map(|(r, e)| (1.0 + r.powf(kappa)) * e)
        .collect();
    radial_integral(&w, grid)
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(precondition(format!("kappa = {kappa} must lie in (0, 1]")));
    }
    Ok(())
}

/// Both sides of the weighted split inequality (`lhs <= rhs`).
pub fn kappa_weighted_split_bound(
    state: &FieldState,
    grid: &RadialGrid,
    model: &Model,
    kappa: f64,
) -> Result<(f64, f64)> {
    check_kappa(kappa)?;
    let prof = Profile::compute(state, grid, model);
    let lambda = model.lambda();
    let n = grid.n();
    let mut lhs = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    for j in 0..n {
        let r = grid.centers()[j];
        let w = r.powf(kappa);
        let u = state.u[j];
        let f = model.potential(u);
        let (lp, lm) = (prof.l_plus[j], prof.l_minus[j]);
        lhs.push(w * (0.25 * lp * lp + 0.25 * lm * lm + 0.5 * lambda * u * u / (r * r) + f));
        rhs.push(w * prof.energy[j]);
    }
    Ok((radial_integral(&lhs, grid)?, radial_integral(&rhs, grid)?))
}

/// One row of an [`EnergyRecorder`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub step: usize,
    pub report: EnergyReport,
    /// The quadratic energy the scheme conserves.
    pub scheme_energy: f64,
    /// Energy in `|x| < c t`, one entry per configured `c`.
    pub interior: Vec<f64>,
}

/// Records energies every `stride` steps and at the final step.
#[derive(Debug, Clone)]
pub struct EnergyRecorder {
    stride: usize,
    interior_c: Vec<f64>,
    pub rows: Vec<EnergyRow>,
}

impl EnergyRecorder {
    pub fn new(stride: usize) -> Self {
        Self {
            stride: stride.max(1),
            interior_c: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn with_interior(mut self, cs: &[f64]) -> Self {
        self.interior_c = cs.to_vec();
        self
    }

    pub fn interior_c(&self) -> &[f64] {
        &self.interior_c
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.report.t).collect()
    }

    pub fn e_minus(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.report.e_minus).collect()
    }
}

impl Recorder for EnergyRecorder {
    fn name(&self) -> &'static str {
        "energy"
    }

    fn record(&mut self, frame: &Frame<'_>) -> Result<()> {
        if frame.step % self.stride != 0 && !frame.is_last() {
            return Ok(());
        }
        let prof = frame.profile();
        let report = split_energy_with(prof, frame.state, frame.grid, frame.model, None);
        let t = frame.t();
        let interior = self
            .interior_c
            .iter()
            .map(|c| radial_integral_between(&prof.energy, frame.grid, 0.0, c * t))
            .collect();
        self.rows.push(EnergyRow {
            step: frame.step,
            report,
            scheme_energy: discrete_energy(frame.state, frame.grid, frame.model),
            interior,
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathlib::ModelParams;
    use crate::solver::InitialData;
    use approx::assert_relative_eq;

    fn model(d: usize, p: f64) -> Model {
        Model::new(ModelParams::new(d, p).unwrap(), true)
    }

    #[test]
    fn l_operator_basics() {
        let grid = RadialGrid::new(3, 32, 4.0).unwrap();
        let mut s = FieldState::zeros(32);
        assert!(apply_l(&s, &grid, Sign::Plus).iter().all(|&x| x == 0.0));
        s.v = (0..32).map(|j| j as f64).collect();
        assert_eq!(apply_l(&s, &grid, Sign::Minus), s.v.iter().map(|v| -v).collect::<Vec<_>>());
    }

    #[test]
    fn time_symmetric_split_is_even() {
        let grid = RadialGrid::new(4, 400, 8.0).unwrap();
        let s = InitialData::compact_bump(0.5, 0.0, 2.0).unwrap().discretize(&grid);
        let rep = split_energy(&s, &grid, &model(4, 2.5), None).unwrap();
        assert_eq!(rep.e_minus, rep.e_plus);
        assert!(((rep.e_minus + rep.e_plus) - rep.e).abs() < 1e-3 * rep.e);
    }

    #[test]
    fn density_ratio_at_d3() {
        let grid = RadialGrid::new(3, 64, 4.0).unwrap();
        let s = InitialData::gaussian(1.0, 0.0, 1.0).unwrap().discretize(&grid);
        for ds in densities(&s, &grid, &model(3, 3.0)) {
            if ds.e_prime > 1e-200 {
                assert_relative_eq!(ds.r * ds.m / ds.e_prime, 1.0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn density_ratio_at_conformal_exponent() {
        let grid = RadialGrid::new(4, 64, 4.0).unwrap();
        let s = InitialData::gaussian(1.0, 0.0, 1.0).unwrap().discretize(&grid);
        for ds in densities(&s, &grid, &model(4, 7.0 / 3.0)) {
            if ds.e_prime > 1e-200 {
                assert_relative_eq!(ds.r * ds.m, ds.e_prime, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn point_sampling_is_continuous_at_first_centre() {
        let grid = RadialGrid::new(3, 32, 4.0).unwrap();
        let s = InitialData::gaussian(1.0, 0.0, 1.0).unwrap().discretize(&grid);
        let ur = centered_gradient(&s.u, grid.h());
        let r0 = grid.centers()[0];
        let a = sample_at(&s, &ur, &grid, r0 - 1e-12);
        let b = sample_at(&s, &ur, &grid, r0 + 1e-12);
        assert!((a.u - b.u).abs() < 1e-10 && (a.ur - b.ur).abs() < 1e-9);
    }

    #[test]
    fn weighted_energy_limits() {
        let grid = RadialGrid::new(3, 400, 8.0).unwrap();
        let m = model(3, 3.0);
        let s = InitialData::compact_bump(1.0, 0.0, 2.0).unwrap().discretize(&grid);
        let e = total_energy(&s, &grid, &m).unwrap();
        let ek = weighted_energy(&s, &grid, &m, 0.5).unwrap();
        assert!(e <= ek && ek <= (1.0 + 2f64.sqrt()) * e);
        let small = weighted_energy(&s, &grid, &m, 1e-9).unwrap();
        assert_relative_eq!(small, 2.0 * e, max_relative = 1e-7);
        assert!(weighted_energy(&s, &grid, &m, 0.0).is_err());
    }

    #[test]
    fn hardy_rejects_non_decaying() {
        let grid = RadialGrid::new(3, 32, 4.0).unwrap();
        assert!(hardy_identity_residual(&[1.0; 32], &grid, None).is_err());
        let r = hardy_identity_residual(&[0.0; 32], &grid, None).unwrap();
        assert_eq!((r.lhs, r.rhs, r.boundary_term, r.residual), (0.0, 0.0, 0.0, 0.0));
    }
}
