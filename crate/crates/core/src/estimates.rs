//! Morawetz-type space-time bounds, weighted Morawetz integrals, decay fits
//! of the inward energy and the `L^{1/κ}` lemma.

use serde::{Deserialize, Serialize};

use crate::energy::{sample_at, Profile};
use crate::error::{domain, precondition, Error, Result};
use crate::flux::{axis_density, AxisRecorder};
use crate::mathlib::{c_d, radial_integral_between, radial_sum, ClippedTrapezoid};
use crate::solver::{Frame, RadialGrid, Recorder};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorawetzReport {
    #[serde(rename = "R")]
    pub radius: f64,
    pub interior_term: f64,
    pub sphere_term: f64,
    pub exterior_term: f64,
    pub total: f64,
    pub bound: f64,
    /// Time span covered by the integrals.
    pub span: (f64, f64),
}

/// Three integrals of the corollary, scaled by `E`, `R E` and `R² E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalIntegrals {
    #[serde(rename = "R")]
    pub radius: f64,
    pub weighted_potential: f64,
    pub local_energy: f64,
    pub sphere: f64,
    pub ratio_weighted_potential: f64,
    pub ratio_local_energy: f64,
    pub ratio_sphere: f64,
}

#[derive(Debug, Clone)]
struct RadiusAcc {
    radius: f64,
    interior: ClippedTrapezoid,
    sphere: ClippedTrapezoid,
    exterior: ClippedTrapezoid,
    local_energy: ClippedTrapezoid,
    sphere_raw: ClippedTrapezoid,
}

/// Accumulates the Morawetz left-hand side for a list of radii, together
/// with the corollary integrals.
#[derive(Debug, Clone)]
pub struct MorawetzRecorder {
    radii: Vec<RadiusAcc>,
    weighted_potential: ClippedTrapezoid,
    span: Option<(f64, f64)>,
}

impl MorawetzRecorder {
    pub fn new(radii: &[f64]) -> Self {
        let q = || ClippedTrapezoid::new(f64::NEG_INFINITY, f64::INFINITY);
        Self {
            radii: radii
                .iter()
                .map(|&radius| RadiusAcc {
                    radius,
                    interior: q(),
                    sphere: q(),
                    exterior: q(),
                    local_energy: q(),
                    sphere_raw: q(),
                })
                .collect(),
            weighted_potential: q(),
            span: None,
        }
    }

    /// Reports with bound `2E`. With `mirror`, each integral is doubled: for
    /// data with `u_1 = 0` the solution is even in time, so this is the
    /// integral over `[-T, T]`.
    pub fn reports(&self, energy: f64, mirror: bool) -> Vec<MorawetzReport> {
        let k = if mirror { 2.0 } else { 1.0 };
        let span = self.span.unwrap_or((0.0, 0.0));
        let span = if mirror { (-span.1, span.1) } else { span };
        self.radii
            .iter()
            .map(|r| {
                let (i, s, e) = (k * r.interior.value(), k * r.sphere.value(), k * r.exterior.value());
                MorawetzReport {
                    radius: r.radius,
                    interior_term: i,
                    sphere_term: s,
                    exterior_term: e,
                    total: i + s + e,
                    bound: 2.0 * energy,
                    span,
                }
            })
            .collect()
    }

    pub fn global_integrals(&self, energy: f64) -> Vec<GlobalIntegrals> {
        let wp = self.weighted_potential.value();
        self.radii
            .iter()
            .map(|r| {
                let le = r.local_energy.value();
                let sp = r.sphere_raw.value();
                let ratio = |x: f64, s: f64| if energy > 0.0 { x / (s * energy) } else { 0.0 };
                GlobalIntegrals {
                    radius: r.radius,
                    weighted_potential: wp,
                    local_energy: le,
                    sphere: sp,
                    ratio_weighted_potential: ratio(wp, 1.0),
                    ratio_local_energy: ratio(le, r.radius),
                    ratio_sphere: ratio(sp, r.radius * r.radius),
                }
            })
            .collect()
    }
}

impl Recorder for MorawetzRecorder {
    fn name(&self) -> &'static str {
        "morawetz"
    }

    fn record(&mut self, frame: &Frame<'_>) -> Result<()> {
        let grid = frame.grid;
        let t = frame.t();
        if frame.is_first() {
            if let Some(r) = self.radii.iter().find(|r| !(r.radius > 0.0) || r.radius >= grid.r_max()) {
                return Err(domain(format!("Morawetz radius {} outside (0, r_max)", r.radius)));
            }
        }
        self.span = Some(match self.span {
            None => (t, t),
            Some((a, _)) => (a, t),
        });
        let prof = frame.profile();
        let model = frame.model;
        let d = model.d() as f64;
        let p = model.p();
        let lambda = model.lambda();
        let c_int = ((d - 1.0) * (p - 1.0) - 2.0) / (p + 1.0);
        let c_ext = (d - 1.0) * (p - 1.0) / (2.0 * (p + 1.0));
        let n = grid.n();
        let mut grad_kin = Vec::with_capacity(n);
        let mut pw = Vec::with_capacity(n);
        let mut ext = Vec::with_capacity(n);
        let mut weighted = Vec::with_capacity(n);
        for j in 0..n {
            let r = grid.centers()[j];
            let u = frame.state.u[j];
            let v = frame.state.v[j];
            let q = model.abs_pow_p1(u);
            let hardy = lambda * u * u / (r * r * r);
            grad_kin.push(prof.ur[j] * prof.ur[j] + v * v);
            pw.push(q);
            ext.push(hardy + c_ext * q / r);
            weighted.push(hardy + q / r);
        }
        self.weighted_potential.push(t, radial_sum(&weighted, grid));
        let omega = grid.omega();
        for acc in &mut self.radii {
            let big_r = acc.radius;
            let ball = radial_integral_between(&grad_kin, grid, 0.0, big_r);
            let ball_pw = radial_integral_between(&pw, grid, 0.0, big_r);
            let pv = sample_at(frame.state, &prof.ur, grid, big_r);
            let sphere = omega * big_r.powi(grid.dim() as i32 - 1) * pv.u * pv.u;
            acc.interior.push(t, (ball + c_int * ball_pw) / (2.0 * big_r));
            acc.sphere.push(t, (d - 1.0) / (4.0 * big_r * big_r) * sphere);
            acc.exterior.push(t, radial_integral_between(&ext, grid, big_r, grid.r_max()));
            acc.local_energy.push(t, ball + ball_pw);
            acc.sphere_raw.push(t, sphere);
        }
        Ok(())
    }
}

/// The three-term left side for one radius, read from a finished recorder.
pub fn morawetz_inequality(rec: &MorawetzRecorder, energy: f64, radius: f64) -> Result<MorawetzReport> {
    rec.reports(energy, false)
        .into_iter()
        .find(|r| r.radius == radius)
        .ok_or_else(|| domain(format!("radius {radius} was not recorded")))
}

pub fn unweighted_global_integrals(rec: &MorawetzRecorder, energy: f64) -> Vec<GlobalIntegrals> {
    rec.global_integrals(energy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightKind {
    /// `a(r) = r^κ`
    Power { kappa: f64 },
    /// Piecewise-linear `a` through `(r_i, a_i)`, constant past the last node.
    Table { r: Vec<f64>, a: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    #[serde(flatten)]
    pub kind: WeightKind,
    pub gamma: f64,
}

impl WeightSpec {
    pub fn power(kappa: f64) -> Self {
        Self {
            kind: WeightKind::Power { kappa },
            gamma: kappa,
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            WeightKind::Power { kappa } => format!("power:{kappa}"),
            WeightKind::Table { .. } => "table".to_string(),
        }
    }

    /// Checks `0 <= a' <= γ a / r` (on every sample interval for tables).
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(precondition(format!("gamma = {} outside (0, 1]", self.gamma)));
        }
        match &self.kind {
            WeightKind::Power { kappa } => {
                if !(*kappa >= 0.0) || *kappa > self.gamma + 1e-12 {
                    return Err(precondition(format!(
                        "r^{kappa} violates a' <= gamma a / r for gamma = {}",
                        self.gamma
                    )));
                }
            }
            WeightKind::Table { r, a } => {
                if r.len() != a.len() || r.len() < 2 {
                    return Err(precondition("weight table needs >= 2 matching (r, a) samples"));
                }
                if r[0] != 0.0 {
                    return Err(precondition("weight table must start at r = 0"));
                }
                for i in 0..r.len() - 1 {
                    let dr = r[i + 1] - r[i];
                    if !(dr > 0.0) {
                        return Err(precondition("weight table radii must increase"));
                    }
                    if a[i] < 0.0 || !a[i].is_finite() {
                        return Err(precondition(format!("weight a({}) = {} is negative", r[i], a[i])));
                    }
                    let slope = (a[i + 1] - a[i]) / dr;
                    if slope < -1e-12 {
                        return Err(precondition(format!("weight decreases on [{}, {}]", r[i], r[i + 1])));
                    }
                    if r[i] > 0.0 && slope > self.gamma * a[i] / r[i] * (1.0 + 1e-12) {
                        return Err(precondition(format!(
                            "weight slope {slope} exceeds gamma a/r on [{}, {}]",
                            r[i],
                            r[i + 1]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            WeightKind::Power { kappa } => {
                if *kappa == 0.0 {
                    1.0
                } else {
                    x.max(0.0).powf(*kappa)
                }
            }
            WeightKind::Table { r, a } => crate::mathlib::interp_linear(r, a, x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedMorawetz {
    pub lhs: f64,
    pub mu_weighted: f64,
    #[serde(rename = "K1")]
    pub k1: f64,
}

#[derive(Debug, Clone)]
struct WeightAcc {
    spec: WeightSpec,
    k1: Option<f64>,
    /// Running integrals at each step: `∬ a(r+t) (λu²/r³ + |u|^{p+1}/r)`
    /// (with `t/(r+t)` when `γ = 1`), `∫ a(t) dμ`, `∬ a(r+t) M`.
    lhs: Vec<f64>,
    mu: Vec<f64>,
    m: Vec<f64>,
    prev: Option<[f64; 3]>,
}

/// Weighted Morawetz integrals along the run, kept as running sums per step
/// so tails `∫_{t_0}^T` are available.
#[derive(Debug, Clone)]
pub struct WeightedMorawetzRecorder {
    weights: Vec<WeightAcc>,
    pub t: Vec<f64>,
    d: usize,
}

impl WeightedMorawetzRecorder {
    pub fn new(weights: Vec<WeightSpec>) -> Result<Self> {
        for w in &weights {
            w.validate()?;
        }
        Ok(Self {
            weights: weights
                .into_iter()
                .map(|spec| WeightAcc {
                    spec,
                    k1: None,
                    lhs: Vec::new(),
                    mu: Vec::new(),
                    m: Vec::new(),
                    prev: None,
                })
                .collect(),
            t: Vec::new(),
            d: 3,
        })
    }

    pub fn specs(&self) -> Vec<WeightSpec> {
        self.weights.iter().map(|w| w.spec.clone()).collect()
    }

    /// `(lhs, μ_a, K₁)` over the whole run for weight `index`.
    pub fn result(&self, index: usize) -> Result<WeightedMorawetz> {
        let w = self
            .weights
            .get(index)
            .ok_or_else(|| Error::Contract(format!("no weight #{index}")))?;
        Ok(WeightedMorawetz {
            lhs: w.lhs.last().copied().unwrap_or(0.0),
            mu_weighted: w.mu.last().copied().unwrap_or(0.0),
            k1: w.k1.unwrap_or(0.0),
        })
    }

    /// Tail sums from step `k` to the end: `(lhs, μ_a, ∬ a M)`.
    pub fn tail(&self, index: usize, k: usize) -> (f64, f64, f64) {
        let w = &self.weights[index];
        let last = w.lhs.len() - 1;
        (
            w.lhs[last] - w.lhs[k],
            w.mu[last] - w.mu[k],
            w.m[last] - w.m[k],
        )
    }

    pub fn dim(&self) -> usize {
        self.d
    }
}

impl Recorder for WeightedMorawetzRecorder {
    fn name(&self) -> &'static str {
        "weighted-morawetz"
    }

    fn record(&mut self, frame: &Frame<'_>) -> Result<()> {
        let grid = frame.grid;
        let model = frame.model;
        let prof = frame.profile();
        let t = frame.t();
        self.d = grid.dim();
        let n = grid.n();
        let lambda = model.lambda();
        let mut base = Vec::with_capacity(n);
        for j in 0..n {
            let r = grid.centers()[j];
            let u = frame.state.u[j];
            base.push(lambda * u * u / (r * r * r) + model.abs_pow_p1(u) / r);
        }
        let axis = axis_density(grid.dim(), &frame.state.u);
        let tp = self.t.last().copied();
        for w in &mut self.weights {
            if w.k1.is_none() {
                w.k1 = Some(k1_functional(frame, prof, &w.spec));
            }
            let gamma_one = w.spec.gamma >= 1.0;
            let mut lhs_w = Vec::with_capacity(n);
            let mut m_w = Vec::with_capacity(n);
            for j in 0..n {
                let r = grid.centers()[j];
                let mut a = w.spec.eval(r + t);
                m_w.push(a * prof.morawetz[j]);
                if gamma_one {
                    a *= t / (r + t);
                }
                lhs_w.push(a * base[j]);
            }
            let cur = [radial_sum(&lhs_w, grid), w.spec.eval(t) * axis, radial_sum(&m_w, grid)];
            match (w.prev, tp) {
                (Some(prev), Some(tp)) => {
                    let h = 0.5 * (t - tp);
                    let k = w.lhs.len() - 1;
                    let (l, mu, m) = (w.lhs[k], w.mu[k], w.m[k]);
                    w.lhs.push(l + h * (prev[0] + cur[0]));
                    w.mu.push(mu + h * (prev[1] + cur[1]));
                    w.m.push(m + h * (prev[2] + cur[2]));
                }
                _ => {
                    w.lhs.push(0.0);
                    w.mu.push(0.0);
                    w.m.push(0.0);
                }
            }
            w.prev = Some(cur);
        }
        self.t.push(t);
        Ok(())
    }
}

fn k1_functional(frame: &Frame<'_>, prof: &Profile, spec: &WeightSpec) -> f64 {
    let grid = frame.grid;
    let model = frame.model;
    let lambda = model.lambda();
    let vals: Vec<f64> = (0..grid.n())
        .map(|j| {
            let r = grid.centers()[j];
            let u = frame.state.u[j];
            let lp = prof.l_plus[j];
            spec.eval(r)
                * (0.25 * lp * lp + 0.25 * lambda * u * u / (r * r) + 0.5 * model.potential(u))
        })
        .collect();
    radial_sum(&vals, grid)
}

/// One `t_0` of the decay chain `t_0^κ E₋(t_0) <= c_d ∫_{t_0}^T t^κ dμ +
/// ∬_{t_0}^T (t+r)^κ M + t_0^κ E₋(T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub t0: f64,
    pub lhs: f64,
    pub rhs: f64,
}

/// Evaluates the decay chain at every step where `AxisRecorder` and the
/// weighted recorder both sampled. Requires a power weight.
pub fn weighted_tail_checks(
    weighted: &WeightedMorawetzRecorder,
    index: usize,
    axis: &AxisRecorder,
) -> Result<Vec<TailCheck>> {
    let spec = &weighted.weights[index].spec;
    let WeightKind::Power { kappa } = spec.kind else {
        return Err(precondition("tail check needs a power weight"));
    };
    if weighted.t.len() != axis.t.len() {
        return Err(Error::Contract("weighted and axis recorders saw different steps".into()));
    }
    let cd = c_d(weighted.dim());
    let last = axis.e_minus.len() - 1;
    let em_t = axis.e_minus[last];
    Ok((1..=last)
        .map(|k| {
            let t0 = weighted.t[k];
            let w = t0.powf(kappa);
            let (_, mu, m) = weighted.tail(index, k);
            TailCheck {
                t0,
                lhs: w * axis.e_minus[k],
                rhs: cd * mu + m + w * em_t,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub kappa_target: f64,
    pub fitted_slope: f64,
    pub fit_residual: f64,
    pub bound_constant: f64,
    pub truncated_l_power_norm: f64,
    /// Points dropped from the fit because `E₋ <= 0`.
    pub dropped: usize,
}

/// Fits `log E₋` against `log t` on `[t_final/8, t_final]`, takes
/// `sup E₋(t) t^κ / E_κ` over `t >= sup_from` and the truncated
/// `(∫ E₋^{1/κ} dt)^κ`.
pub fn decay_fit(t: &[f64], e_minus: &[f64], kappa: f64, e_kappa: f64, sup_from: f64) -> Result<DecayFit> {
    if t.len() != e_minus.len() || t.len() < 3 {
        return Err(Error::Contract("decay_fit needs matching series of length >= 3".into()));
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(precondition(format!("kappa = {kappa} outside (0, 1]")));
    }
    let t_final = *t.last().unwrap();
    let lo = t_final / 8.0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut dropped = 0;
    for (&ti, &e) in t.iter().zip(e_minus) {
        if ti < lo || ti <= 0.0 {
            continue;
        }
        if e > 0.0 {
            xs.push(ti.ln());
            ys.push(e.ln());
        } else {
            dropped += 1;
        }
    }
    if xs.len() < 2 {
        return Err(precondition("fewer than two positive samples in the fit window"));
    }
    let nf = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let resid = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - icpt - slope * x).powi(2))
        .sum::<f64>()
        / nf)
        .sqrt();
    let bound_constant = t
        .iter()
        .zip(e_minus)
        .filter(|(ti, _)| **ti >= sup_from)
        .map(|(ti, e)| e.max(0.0) * ti.powf(kappa) / e_kappa)
        .fold(0.0, f64::max);
    let q = 1.0 / kappa;
    let mut integral = 0.0;
    for k in 1..t.len() {
        let a = e_minus[k - 1].max(0.0).powf(q);
        let b = e_minus[k].max(0.0).powf(q);
        integral += 0.5 * (t[k] - t[k - 1]) * (a + b);
    }
    Ok(DecayFit {
        kappa_target: kappa,
        fitted_slope: slope,
        fit_residual: resid,
        bound_constant,
        truncated_l_power_norm: integral.powf(kappa),
        dropped,
    })
}

const GAUSS_NODES: [(f64, f64); 10] = [
    (-0.973_906_528_517_171_7, 0.066_671_344_308_688_14),
    (-0.865_063_366_688_984_5, 0.149_451_349_150_580_6),
    (-0.679_409_568_299_024_4, 0.219_086_362_515_982_04),
    (-0.433_395_394_129_247_2, 0.269_266_719_309_996_35),
    (-0.148_874_338_981_631_2, 0.295_524_224_714_752_87),
    (0.148_874_338_981_631_2, 0.295_524_224_714_752_87),
    (0.433_395_394_129_247_2, 0.269_266_719_309_996_35),
    (0.679_409_568_299_024_4, 0.219_086_362_515_982_04),
    (0.865_063_366_688_984_5, 0.149_451_349_150_580_6),
    (0.973_906_528_517_171_7, 0.066_671_344_308_688_14),
];

fn gauss<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    GAUSS_NODES.iter().map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
}

/// `f(x) = ∫_x^∞ y^{-κ} ρ(y) dy` for a piecewise-linear density `ρ` through
/// `(y_i, ρ_i)` (zero past the last node); returns `(‖f‖_{L^{1/κ}}, ∫ ρ)`.
pub fn l_power_lemma_check(y: &[f64], density: &[f64], kappa: f64) -> Result<(f64, f64)> {
    if y.len() != density.len() || y.len() < 2 {
        return Err(Error::Contract("density table needs >= 2 matching samples".into()));
    }
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(precondition(format!("kappa = {kappa} outside (0, 1)")));
    }
    if y[0] < 0.0 || y.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(precondition("density nodes must be increasing and >= 0"));
    }
    if let Some(bad) = density.iter().find(|&&r| r < 0.0 || !r.is_finite()) {
        return Err(precondition(format!("negative density {bad}")));
    }
    let m = y.len();
    let mass: f64 = (1..m).map(|i| 0.5 * (y[i] - y[i - 1]) * (density[i] + density[i - 1])).sum();
    // Antiderivative of y^{-κ}(α + β y) on interval i.
    let coef = |i: usize| {
        let beta = (density[i + 1] - density[i]) / (y[i + 1] - y[i]);
        (density[i] - beta * y[i], beta)
    };
    let prim = |i: usize, x: f64| {
        let (alpha, beta) = coef(i);
        alpha * x.powf(1.0 - kappa) / (1.0 - kappa) + beta * x.powf(2.0 - kappa) / (2.0 - kappa)
    };
    let mut f_at = vec![0.0; m];
    for i in (0..m - 1).rev() {
        f_at[i] = f_at[i + 1] + prim(i, y[i + 1]) - prim(i, y[i]);
    }
    let q = 1.0 / kappa;
    let f_in = |i: usize, x: f64| (f_at[i + 1] + prim(i, y[i + 1]) - prim(i, x)).max(0.0);
    let mut total = 0.0;
    if y[0] > 0.0 {
        total += y[0] * f_at[0].powf(q);
    }
    for i in 0..m - 1 {
        let (a, b) = (y[i], y[i + 1]);
        if a == 0.0 {
            // graded panels towards the y^{1-κ} behaviour at the origin
            let mut hi = b;
            for _ in 0..60 {
                let lo = 0.5 * hi;
                total += gauss(lo, hi, |x| f_in(i, x).powf(q));
                hi = lo;
            }
            total += hi * f_in(i, 0.0).powf(q);
        } else {
            let panels = 8;
            for k in 0..panels {
                let lo = a + (b - a) * k as f64 / panels as f64;
                let hi = a + (b - a) * (k + 1) as f64 / panels as f64;
                total += gauss(lo, hi, |x| f_in(i, x).powf(q));
            }
        }
    }
    Ok((total.powf(kappa), mass))
}

/// `E₋(0) - c_d μ([0,T]) - ∬_{[0,T]} M`, which should match `E₋(T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rediscover {
    pub e_minus_0: f64,
    pub c_mu: f64,
    pub morawetz: f64,
    pub e_minus_t: f64,
    pub defect: f64,
}

pub fn rediscover(axis: &AxisRecorder) -> Result<Rediscover> {
    let (Some(&t0), Some(&t1)) = (axis.t.first(), axis.t.last()) else {
        return Err(domain("axis recorder holds no samples"));
    };
    let c_mu = c_d(axis.dim()) * axis.mu(t0, t1)?;
    let morawetz = axis.slab_morawetz(t0, t1)?;
    let e_minus_0 = axis.e_minus[0];
    let e_minus_t = *axis.e_minus.last().unwrap();
    Ok(Rediscover {
        e_minus_0,
        c_mu,
        morawetz,
        e_minus_t,
        defect: e_minus_0 - c_mu - morawetz,
    })
}

/// Convenience for tests: `∫_{|x|<R}` of a cell array.
pub fn ball_integral(values: &[f64], grid: &RadialGrid, radius: f64) -> f64 {
    radial_integral_between(values, grid, 0.0, radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_density_example() {
        let (f, mass) = l_power_lemma_check(&[0.0, 1.0], &[1.0, 1.0], 0.5).unwrap();
        assert_relative_eq!(mass, 1.0);
        assert_relative_eq!(f * f, 2.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_density() {
        assert_eq!(l_power_lemma_check(&[0.0, 1.0], &[0.0, 0.0], 0.3).unwrap(), (0.0, 0.0));
        assert!(l_power_lemma_check(&[0.0, 1.0], &[0.0, -1.0], 0.3).is_err());
    }

    #[test]
    fn narrow_bump_approaches_the_bound() {
        let mut prev = 0.0;
        for &w in &[0.2, 0.05, 0.01] {
            let h = 1.0 / w;
            let (f, mass) = l_power_lemma_check(&[0.0, 1.0 - w, 1.0, 1.0 + w], &[0.0, 0.0, h, 0.0], 0.5).unwrap();
            assert_relative_eq!(mass, 1.0, epsilon = 1e-12);
            assert!(f < 1.0 && f > prev);
            prev = f;
        }
        assert!(prev > 0.98);
    }

    #[test]
    fn synthetic_power_law_fit() {
        let t: Vec<f64> = (1..=400).map(|k| k as f64 * 0.1).collect();
        let e: Vec<f64> = t.iter().map(|x| x.powf(-0.5)).collect();
        let fit = decay_fit(&t, &e, 0.5, 1.0, 5.0).unwrap();
        assert_relative_eq!(fit.fitted_slope, -0.5, epsilon = 1e-12);
        assert!(fit.fit_residual < 1e-12);
        assert_relative_eq!(fit.bound_constant, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn weight_validation() {
        assert!(WeightSpec::power(0.5).validate().is_ok());
        let bad = WeightSpec {
            kind: WeightKind::Power { kappa: 0.7 },
            gamma: 0.5,
        };
        assert!(bad.validate().is_err());
        let table = WeightSpec {
            kind: WeightKind::Table {
                r: vec![0.0, 1.0, 2.0],
                a: vec![1.0, 1.0, 1.2],
            },
            gamma: 0.5,
        };
        assert!(table.validate().is_ok());
        let steep = WeightSpec {
            kind: WeightKind::Table {
                r: vec![0.0, 1.0, 2.0],
                a: vec![1.0, 1.0, 3.0],
            },
            gamma: 0.5,
        };
        assert!(steep.validate().is_err());
    }
}
