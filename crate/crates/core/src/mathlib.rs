//! Closed-form constants, critical exponents, Strichartz admissibility and
//! radial quadrature.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::solver::RadialGrid;

/// Smallest and largest dimension the solver supports.
pub const MIN_DIM: usize = 3;
pub const MAX_DIM: usize = 9;

/// Dimension and exponent of the defocusing equation `u_tt - Δu = -|u|^{p-1} u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub p: f64,
    /// Set by [`ModelParams::exploratory`]; theory checks refuse such params.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub exploratory: bool,
}

impl ModelParams {
    /// Validates the technical assumption on `(d, p)`:
    /// `p_c(d) <= p < p_e(d)`, and additionally `p <= 1 + 3/(d-3)` for `7 <= d <= 9`.
    pub fn new(d: usize, p: f64) -> Result<Self> {
        check_assumption(d, p)?;
        Ok(Self {
            d,
            p,
            exploratory: false,
        })
    }

    /// Skips the `(d, p)` range check. Only the dimension bounds and `p > 1`
    /// are enforced.
    pub fn exploratory(d: usize, p: f64) -> Result<Self> {
        if !(MIN_DIM..=MAX_DIM).contains(&d) {
            return Err(domain(format!("dimension {d} outside {MIN_DIM}..={MAX_DIM}")));
        }
        if !(p > 1.0) || !p.is_finite() {
            return Err(domain(format!("exponent p = {p} must be finite and > 1")));
        }
        Ok(Self {
            d,
            p,
            exploratory: true,
        })
    }

    /// Re-checks a deserialized value.
    pub fn validated(self) -> Result<Self> {
        if self.exploratory {
            Self::exploratory(self.d, self.p)
        } else {
            Self::new(self.d, self.p)
        }
    }

    /// Errors unless the params satisfy the assumption (no bypass).
    pub fn require_theory(&self) -> Result<()> {
        if self.exploratory {
            return Err(Error::Config(format!(
                "(d, p) = ({}, {}) was built in exploratory mode; theory checks need the validated range",
                self.d, self.p
            )));
        }
        check_assumption(self.d, self.p)
    }

    pub fn lambda(&self) -> f64 {
        lambda_d(self.d)
    }

    /// `ω_{d-1}`, the area of the unit sphere in `R^d`.
    pub fn omega(&self) -> f64 {
        sphere_area(self.d).expect("dimension validated at construction")
    }

    pub fn c_d(&self) -> f64 {
        c_d(self.d)
    }

    /// Potential energy density `|u|^{p+1}/(p+1)`.
    #[inline]
    pub fn potential(&self, u: f64) -> f64 {
        u.abs().powf(self.p + 1.0) / (self.p + 1.0)
    }

    /// Defocusing nonlinearity `-|u|^{p-1} u`.
    #[inline]
    pub fn nonlinearity(&self, u: f64) -> f64 {
        -u.signum() * u.abs().powf(self.p)
    }
}

pub fn check_assumption(d: usize, p: f64) -> Result<()> {
    if !(MIN_DIM..=MAX_DIM).contains(&d) {
        return Err(domain(format!("dimension {d} outside {MIN_DIM}..={MAX_DIM}")));
    }
    let (pc, pe) = critical_exponents(d);
    if !p.is_finite() || p < pc || p >= pe {
        return Err(domain(format!(
            "p = {p} outside [p_c, p_e) = [{pc}, {pe}) for d = {d}"
        )));
    }
    if d >= 7 {
        let cap = 1.0 + 3.0 / (d as f64 - 3.0);
        if p > cap {
            return Err(domain(format!("p = {p} exceeds 1 + 3/(d-3) = {cap} for d = {d}")));
        }
    }
    Ok(())
}

/// Area of the unit sphere `S^{d-1}`.
///
/// Uses `ω_d = 2π/(d-2) · ω_{d-2}` seeded with `ω_2 = 2π`, `ω_3 = 4π`.
pub fn sphere_area(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(domain(format!("sphere area needs d >= 2, got {d}")));
    }
    let mut k = if d % 2 == 0 { 2 } else { 3 };
    let mut area = if k == 2 { 2.0 * PI } else { 4.0 * PI };
    while k < d {
        k += 2;
        area *= 2.0 * PI / (k as f64 - 2.0);
    }
    Ok(area)
}

/// `λ_d = (d-1)(d-3)/4`.
pub fn lambda_d(d: usize) -> f64 {
    let d = d as f64;
    (d - 1.0) * (d - 3.0) / 4.0
}

/// `c_d = (d-1)^2/16 · |S^{d-1}|`, the axis-measure weight in the flux identity.
pub fn c_d(d: usize) -> f64 {
    let df = d as f64;
    (df - 1.0).powi(2) / 16.0 * sphere_area(d).expect("d >= 3")
}

/// `(p_c, p_e) = (1 + 4/(d-1), 1 + 4/(d-2))`.
pub fn critical_exponents(d: usize) -> (f64, f64) {
    let d = d as f64;
    (1.0 + 4.0 / (d - 1.0), 1.0 + 4.0 / (d - 2.0))
}

/// Critical regularity `s_p = d/2 - 2/(p-1)`.
pub fn s_p(d: usize, p: f64) -> f64 {
    d as f64 / 2.0 - 2.0 / (p - 1.0)
}

/// Rational form of the minimal decay rate for energy scattering.
pub fn kappa_0_rational(d: usize, p: f64) -> Result<f64> {
    let d = d as f64;
    let num = (d + 2.0) * (d + 3.0) - (d + 3.0) * (d - 2.0) * p;
    let den = (d - 1.0) * (d + 3.0) - (d + 1.0) * (d - 3.0) * p;
    if den.abs() < 1e-300 {
        return Err(domain(format!("kappa_0 denominator vanishes at p = {p}")));
    }
    Ok(num / den)
}

/// Second form, written in terms of the distances to `p_e` and `p_c`.
pub fn kappa_0_interpolated(d: usize, p: f64) -> Result<f64> {
    let (pc, pe) = critical_exponents(d);
    let df = d as f64;
    let num = pe - p;
    let den = (pe - p) + 3.0 * (df - 1.0) / ((df - 2.0) * (df + 3.0)) * (p - pc);
    if den.abs() < 1e-300 {
        return Err(domain(format!("kappa_0 denominator vanishes at p = {p}")));
    }
    Ok(num / den)
}

/// `κ₀(d, p)`. Both algebraic forms are evaluated and must agree to `1e-12`
/// relative (absolute near zero).
pub fn kappa_0(d: usize, p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(domain(format!("kappa_0 needs p > 1, got {p}")));
    }
    let a = kappa_0_rational(d, p)?;
    let b = kappa_0_interpolated(d, p)?;
    let scale = a.abs().max(b.abs()).max(1.0);
    if (a - b).abs() > 1e-12 * scale {
        return Err(Error::Consistency(format!(
            "kappa_0 forms disagree at (d, p) = ({d}, {p}): {a} vs {b}"
        )));
    }
    Ok(a)
}

/// A Lebesgue exponent in `[1, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    Finite(f64),
    Infinite(InfinityTag),
}

/// Serialized as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InfinityTag {
    #[serde(rename = "inf")]
    Inf,
}

impl Exponent {
    pub const INFINITY: Exponent = Exponent::Infinite(InfinityTag::Inf);

    pub fn finite(value: f64) -> Self {
        if value.is_infinite() {
            Self::INFINITY
        } else {
            Exponent::Finite(value)
        }
    }

    /// `1/q`, zero for `q = ∞`.
    pub fn reciprocal(&self) -> f64 {
        match self {
            Exponent::Finite(q) => 1.0 / q,
            Exponent::Infinite(_) => 0.0,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Exponent::Infinite(_))
    }

    pub fn value(&self) -> f64 {
        match self {
            Exponent::Finite(q) => *q,
            Exponent::Infinite(_) => f64::INFINITY,
        }
    }
}

impl From<f64> for Exponent {
    fn from(value: f64) -> Self {
        Exponent::finite(value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrichartzPair {
    pub q: Exponent,
    pub r: f64,
    pub s: f64,
    pub rho: f64,
}

impl StrichartzPair {
    pub fn new(q: impl Into<Exponent>, r: f64, s: f64, rho: f64) -> Self {
        Self {
            q: q.into(),
            r,
            s,
            rho,
        }
    }
}

const ADMISSIBLE_EPS: f64 = 1e-12;

/// Checks the Strichartz conditions for one pair: `2 <= q <= ∞`, `2 <= r < ∞`,
/// the cone condition `2/q + (d-1)/r <= (d-1)/2`, the excluded endpoint
/// `(2, 2(d-1)/(d-3))`, and the scaling relation `1/q + d/r = d/2 + ρ - s`.
pub fn is_admissible(pair: &StrichartzPair, d: usize) -> bool {
    let df = d as f64;
    let inv_q = pair.q.reciprocal();
    if let Exponent::Finite(q) = pair.q {
        if !(q >= 2.0 - ADMISSIBLE_EPS) {
            return false;
        }
    }
    if !(pair.r >= 2.0 - ADMISSIBLE_EPS) || !pair.r.is_finite() {
        return false;
    }
    if 2.0 * inv_q + (df - 1.0) / pair.r > (df - 1.0) / 2.0 + ADMISSIBLE_EPS {
        return false;
    }
    if d > 3 {
        let forbidden_r = 2.0 * (df - 1.0) / (df - 3.0);
        if (inv_q - 0.5).abs() < ADMISSIBLE_EPS && (pair.r - forbidden_r).abs() < 1e-9 * forbidden_r {
            return false;
        }
    }
    let lhs = inv_q + df / pair.r;
    let rhs = df / 2.0 + pair.rho - pair.s;
    (lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0)
}

/// Midpoint quadrature `ω Σ f(r_j) r_j^{d-1} h` of a radial function sampled
/// at the cell centres.
pub fn radial_integral(values: &[f64], grid: &RadialGrid) -> Result<f64> {
    if values.len() != grid.n() {
        return Err(Error::Contract(format!(
            "radial_integral: {} samples for a grid of {} cells",
            values.len(),
            grid.n()
        )));
    }
    Ok(radial_sum(values, grid))
}

pub(crate) fn radial_sum(values: &[f64], grid: &RadialGrid) -> f64 {
    let sum: f64 = values.iter().zip(grid.weights()).map(|(f, w)| f * w).sum();
    grid.omega() * sum
}

/// Integral of a cell-centred radial function over the shell `a <= |x| <= b`.
///
/// With `G = f r^{d-1}`, whole cells contribute the midpoint value `G_j h`;
/// cells cut by `a` or `b` integrate the linear reconstruction
/// `G_j + G'_j (r - r_j)`, so the result is continuous in `a` and `b`.
pub fn radial_integral_between(values: &[f64], grid: &RadialGrid, a: f64, b: f64) -> f64 {
    debug_assert_eq!(values.len(), grid.n());
    let a = a.max(0.0);
    let b = b.min(grid.r_max());
    if !(b > a) {
        return 0.0;
    }
    let h = grid.h();
    let n = grid.n();
    let w = grid.weights();
    let g = |j: usize| values[j] * w[j] / h;
    let first = ((a / h).floor() as usize).min(n - 1);
    let last = (((b / h).ceil() as usize).max(1) - 1).min(n - 1);
    let mut sum = 0.0;
    for j in first..=last {
        let full_lo = j as f64 * h;
        let full_hi = (j + 1) as f64 * h;
        let lo = full_lo.max(a);
        let hi = full_hi.min(b);
        if hi <= lo {
            continue;
        }
        if lo <= full_lo && hi >= full_hi {
            sum += values[j] * w[j];
            continue;
        }
        let slope = if j == 0 {
            (g(1) - g(0)) / h
        } else if j == n - 1 {
            (g(j) - g(j - 1)) / h
        } else {
            (g(j + 1) - g(j - 1)) / (2.0 * h)
        };
        let c = grid.centers()[j];
        sum += g(j) * (hi - lo) + 0.5 * slope * ((hi - c).powi(2) - (lo - c).powi(2));
    }
    grid.omega() * sum
}

/// Linear interpolation in `xs` (sorted) clamped to the end values.
pub fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    if xs.is_empty() {
        return 0.0;
    }
    if x <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if x >= xs[last] {
        return ys[last];
    }
    let k = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[k - 1], xs[k]);
    let w = (x - x0) / (x1 - x0);
    ys[k - 1] * (1.0 - w) + ys[k] * w
}

/// Streaming trapezoid rule for samples `(t_k, f_k)` arriving in increasing
/// `t`, integrating the piecewise-linear interpolant over `[lo, hi]` only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClippedTrapezoid {
    lo: f64,
    hi: f64,
    prev: Option<(f64, f64)>,
    sum: f64,
    covered: Option<(f64, f64)>,
}

impl ClippedTrapezoid {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            prev: None,
            sum: 0.0,
            covered: None,
        }
    }

    /// Whether a sample at `t` can affect the integral, given sample spacing `dt`.
    pub fn wants(&self, t: f64, dt: f64) -> bool {
        let pad = dt * (1.0 + 1e-9);
        t >= self.lo - pad && t <= self.hi + pad
    }

    pub fn push(&mut self, t: f64, f: f64) {
        if let Some((t0, f0)) = self.prev {
            let a = t0.max(self.lo);
            let b = t.min(self.hi);
            if b > a && t > t0 {
                let at = |x: f64| f0 + (f - f0) * (x - t0) / (t - t0);
                self.sum += 0.5 * (b - a) * (at(a) + at(b));
                self.covered = Some(match self.covered {
                    None => (a, b),
                    Some((c0, _)) => (c0, b),
                });
            }
        }
        self.prev = Some((t, f));
    }

    pub fn value(&self) -> f64 {
        self.sum
    }

    /// Part of `[lo, hi]` actually integrated.
    pub fn covered(&self) -> Option<(f64, f64)> {
        self.covered
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(2).unwrap(), 2.0 * PI);
        assert_relative_eq!(sphere_area(3).unwrap(), 4.0 * PI);
        assert_relative_eq!(sphere_area(4).unwrap(), 2.0 * PI * PI, max_relative = 1e-15);
        assert!(sphere_area(1).is_err());
    }

    #[test]
    fn lambda_and_cd() {
        assert_eq!(lambda_d(3), 0.0);
        assert_eq!(lambda_d(4), 0.75);
        assert_eq!(lambda_d(5), 2.0);
        assert_relative_eq!(c_d(3), PI, max_relative = 1e-15);
        assert_relative_eq!(c_d(3) / sphere_area(3).unwrap(), 0.25);
        assert_relative_eq!(c_d(5), 8.0 * PI * PI / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn critical_values() {
        assert_eq!(critical_exponents(3), (3.0, 5.0));
        let (pc, pe) = critical_exponents(4);
        assert_relative_eq!(pc, 7.0 / 3.0);
        assert_relative_eq!(pe, 3.0);
        let (pc, pe) = critical_exponents(5);
        assert_relative_eq!(pc, 2.0);
        assert_relative_eq!(pe, 7.0 / 3.0);
        for d in 3..=9 {
            let (pc, pe) = critical_exponents(d);
            assert_relative_eq!(s_p(d, pe), 1.0, epsilon = 1e-13);
            assert_relative_eq!(s_p(d, pc), 0.5, epsilon = 1e-13);
        }
        assert_relative_eq!(s_p(3, 3.0), 0.5);
    }

    #[test]
    fn assumption_is_enforced() {
        assert!(ModelParams::new(3, 3.0).is_ok());
        assert!(ModelParams::new(3, 5.0).is_err());
        assert!(ModelParams::new(3, 2.9).is_err());
        assert!(ModelParams::new(2, 3.0).is_err());
        assert!(ModelParams::new(10, 1.5).is_err());
        // d = 7: p_c = 5/3, p_e = 1.8, cap 1.75
        assert!(ModelParams::new(7, 1.7).is_ok());
        assert!(ModelParams::new(7, 1.78).is_err());
        let ex = ModelParams::exploratory(7, 1.78).unwrap();
        assert!(ex.require_theory().is_err());
        assert!(ModelParams::new(7, 1.7).unwrap().require_theory().is_ok());
    }

    #[test]
    fn kappa_zero_special_values() {
        for d in 4..=8 {
            let (pc, pe) = critical_exponents(d);
            assert!(kappa_0(d, pe).unwrap().abs() < 1e-12);
            assert!((kappa_0(d, pc).unwrap() - 1.0).abs() < 1e-12);
        }
        for &p in &[3.0, 3.5, 4.0, 4.9] {
            assert!((kappa_0(3, p).unwrap() - (5.0 - p) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_pair_is_admissible() {
        for d in 3..=9 {
            let pair = StrichartzPair::new(Exponent::INFINITY, 2.0, 0.0, 0.0);
            assert!(is_admissible(&pair, d), "d = {d}");
        }
    }

    #[test]
    fn admissibility_examples() {
        for d in 3..=8 {
            let (pc, pe) = critical_exponents(d);
            for k in 0..=10 {
                let p = pc + (pe - pc) * k as f64 / 10.0;
                let q = (d as f64 + 1.0) * (p - 1.0) / 2.0;
                let pair = StrichartzPair::new(q, q, s_p(d, p), 0.0);
                assert!(is_admissible(&pair, d), "d = {d}, p = {p}");
            }
        }
        for d in 4..=9 {
            let df = d as f64;
            let endpoint = StrichartzPair::new(2.0, 2.0 * (df - 1.0) / (df - 3.0), 0.3, 0.0);
            assert!(!is_admissible(&endpoint, d));
            let pair = StrichartzPair::new(2.0, 2.0 * df / (df - 3.0), 1.0, 0.0);
            assert!(is_admissible(&pair, d), "d = {d}");
        }
        // r below 2
        assert!(!is_admissible(&StrichartzPair::new(4.0, 1.5, 0.0, 0.0), 3));
    }

    #[test]
    fn clipped_trapezoid_is_exact_on_linear() {
        let mut q = ClippedTrapezoid::new(0.25, 0.8);
        for k in 0..=10 {
            let t = k as f64 * 0.1;
            q.push(t, 3.0 * t + 1.0);
        }
        let exact = |t: f64| 1.5 * t * t + t;
        assert!((q.value() - (exact(0.8) - exact(0.25))).abs() < 1e-14);
        assert_eq!(q.covered(), Some((0.25, 0.8)));
    }

    #[test]
    fn interp_clamps() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [0.0, 10.0, 30.0];
        assert_eq!(interp_linear(&xs, &ys, -1.0), 0.0);
        assert_eq!(interp_linear(&xs, &ys, 1.5), 20.0);
        assert_eq!(interp_linear(&xs, &ys, 5.0), 30.0);
    }
}
