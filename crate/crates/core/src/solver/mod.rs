//! Leapfrog evolution of radial solutions of `u_tt - u_rr - (d-1)/r u_r = -|u|^{p-1} u`.
//!
//! The spatial operator is the conservative flux form on a cell-centred grid:
//!
//! ```text
//! (Δu)_j = [R_{j+1}^{d-1} (u_{j+1} - u_j) - R_j^{d-1} (u_j - u_{j-1})] / (h V_j)
//! ```
//!
//! with `V_j` the exact shell volume over the sphere area. The face at `r = 0`
//! has zero area, which is the even reflection `u_{-1} = u_0`; the outer face
//! uses the odd ghost `u_n = -u_{n-1}` (homogeneous Dirichlet at `r_max`).
//! Time stepping is kick-drift-kick velocity Verlet, so the update is
//! symmetric and exactly reversible in exact arithmetic.

mod grid;
mod initial;
mod record;
pub mod snapshot;

use serde::{Deserialize, Serialize};

pub use grid::{GridSpec, RadialGrid};
pub use initial::{InitialData, ProfileKind, VelocityProfile, GAUSS_REACH};
pub use record::{Frame, Recorder};

use crate::error::{domain, Error, Result};
use crate::mathlib::{lambda_d, ModelParams};

/// Default Courant number.
pub const DEFAULT_CFL: f64 = 0.8;

/// `|u|^q`, with a fast path for small integer `q`.
#[inline]
pub fn abs_pow(u: f64, q: f64) -> f64 {
    let a = u.abs();
    if q == q.trunc() && (1.0..=16.0).contains(&q) {
        a.powi(q as i32)
    } else {
        a.powf(q)
    }
}

/// Model parameters plus the switch that turns the nonlinearity off.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub params: ModelParams,
    pub nonlinear: bool,
}

impl Model {
    pub fn new(params: ModelParams, nonlinear: bool) -> Self {
        Self { params, nonlinear }
    }

    pub fn d(&self) -> usize {
        self.params.d
    }

    pub fn p(&self) -> f64 {
        self.params.p
    }

    pub fn lambda(&self) -> f64 {
        lambda_d(self.params.d)
    }

    /// `|u|^{p+1}/(p+1)`, or zero for the linear equation.
    #[inline]
    pub fn potential(&self, u: f64) -> f64 {
        if self.nonlinear {
            abs_pow(u, self.params.p + 1.0) / (self.params.p + 1.0)
        } else {
            0.0
        }
    }

    /// `|u|^{p+1}`, or zero for the linear equation.
    #[inline]
    pub fn abs_pow_p1(&self, u: f64) -> f64 {
        if self.nonlinear {
            abs_pow(u, self.params.p + 1.0)
        } else {
            0.0
        }
    }

    /// `-|u|^{p-1} u`, or zero for the linear equation.
    #[inline]
    pub fn force(&self, u: f64) -> f64 {
        if self.nonlinear {
            -u.signum() * abs_pow(u, self.params.p)
        } else {
            0.0
        }
    }
}

/// Solution samples `(u, ∂_t u)` at the cell centres at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FieldState {
    pub fn zeros(n: usize) -> Self {
        Self {
            t: 0.0,
            u: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn is_finite(&self) -> bool {
        let s: f64 = self.u.iter().chain(&self.v).sum();
        s.is_finite()
    }

    /// Outer radius of the numerical support: the right face of the last cell
    /// where `|u|` or `|v|` exceeds `rel_tol` times the largest magnitude.
    pub fn support_radius(&self, grid: &RadialGrid, rel_tol: f64) -> f64 {
        let peak = self
            .u
            .iter()
            .chain(&self.v)
            .fold(0.0f64, |m, x| m.max(x.abs()));
        if peak == 0.0 {
            return 0.0;
        }
        let cut = rel_tol * peak;
        (0..self.u.len())
            .rev()
            .find(|&j| self.u[j].abs() > cut || self.v[j].abs() > cut)
            .map_or(0.0, |j| (j + 1) as f64 * grid.h())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// `dt / h`. `None` picks [`DEFAULT_CFL`], reduced when the grid's
    /// stability limit is lower.
    #[serde(default)]
    pub cfl: Option<f64>,
    pub t_final: f64,
    #[serde(default = "yes")]
    pub nonlinearity_on: bool,
    /// Round the step count up to a multiple of this.
    #[serde(default = "one")]
    pub step_multiple: usize,
    /// Fixed step count, overriding the CFL-derived one.
    #[serde(default)]
    pub steps: Option<usize>,
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl: None,
            t_final: 0.0,
            nonlinearity_on: true,
            step_multiple: 1,
            steps: None,
        }
    }
}

impl SolverConfig {
    pub fn new(t_final: f64) -> Self {
        Self {
            t_final,
            ..Self::default()
        }
    }

    pub fn linear(mut self) -> Self {
        self.nonlinearity_on = false;
        self
    }

    /// Courant number actually used on `grid`.
    pub fn effective_cfl(&self, grid: &RadialGrid) -> Result<f64> {
        let limit = grid.cfl_limit();
        match self.cfl {
            None => Ok(if DEFAULT_CFL <= limit { DEFAULT_CFL } else { 0.95 * limit }),
            Some(c) if !(c > 0.0) || c > 1.0 => {
                Err(Error::Config(format!("cfl = {c} must lie in (0, 1]")))
            }
            Some(c) if c > limit => Err(Error::Config(format!(
                "cfl = {c} exceeds the stability limit {limit:.4} of this grid (d = {})",
                grid.dim()
            ))),
            Some(c) => Ok(c),
        }
    }

    /// Number of steps and the step size `t_final / n_steps`.
    pub fn lattice(&self, grid: &RadialGrid) -> Result<(usize, f64)> {
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::Config(format!("t_final = {} must be >= 0", self.t_final)));
        }
        let cfl = self.effective_cfl(grid)?;
        if self.t_final == 0.0 {
            return Ok((0, cfl * grid.h()));
        }
        let mut n = match self.steps {
            Some(n) => {
                if n == 0 {
                    return Err(Error::Config("steps must be positive".into()));
                }
                let dt = self.t_final / n as f64;
                if dt > grid.cfl_limit() * grid.h() {
                    return Err(Error::Config(format!(
                        "{n} steps give dt = {dt}, above the stability limit"
                    )));
                }
                n
            }
            None => (self.t_final / (cfl * grid.h()) - 1e-9).ceil().max(1.0) as usize,
        };
        let m = self.step_multiple.max(1);
        n = n.div_ceil(m) * m;
        Ok((n, self.t_final / n as f64))
    }
}

/// Explicit integrator bound to one grid, model and step size.
pub struct Solver<'g> {
    grid: &'g RadialGrid,
    model: Model,
    dt: f64,
    right: Vec<f64>,
    left: Vec<f64>,
}

impl<'g> Solver<'g> {
    pub fn new(grid: &'g RadialGrid, model: Model, dt: f64) -> Result<Self> {
        if grid.dim() != model.d() {
            return Err(Error::Contract(format!(
                "grid dimension {} differs from model dimension {}",
                grid.dim(),
                model.d()
            )));
        }
        if !(dt > 0.0) || dt > grid.cfl_limit() * grid.h() {
            return Err(Error::Config(format!(
                "dt = {dt} outside (0, {}]",
                grid.cfl_limit() * grid.h()
            )));
        }
        let h = grid.h();
        let a = grid.face_areas();
        let vol = grid.volumes();
        let n = grid.n();
        let right = (0..n).map(|j| a[j + 1] / (h * vol[j])).collect();
        let left = (0..n).map(|j| a[j] / (h * vol[j])).collect();
        Ok(Self {
            grid,
            model,
            dt,
            right,
            left,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Discrete Laplacian of `u` into `out`.
    pub fn laplacian(&self, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        out[0] = self.right[0] * (u[1] - u[0]);
        for j in 1..n - 1 {
            out[j] = self.right[j] * (u[j + 1] - u[j]) - self.left[j] * (u[j] - u[j - 1]);
        }
        out[n - 1] = -2.0 * self.right[n - 1] * u[n - 1] - self.left[n - 1] * (u[n - 1] - u[n - 2]);
    }

    fn acceleration(&self, u: &[f64], out: &mut [f64]) {
        self.laplacian(u, out);
        if self.model.nonlinear {
            for (a, &x) in out.iter_mut().zip(u) {
                *a += self.model.force(x);
            }
        }
    }

    fn kdk(&self, state: &mut FieldState, acc: &mut [f64]) {
        let half = 0.5 * self.dt;
        for (v, a) in state.v.iter_mut().zip(acc.iter()) {
            *v += half * a;
        }
        for (u, v) in state.u.iter_mut().zip(&state.v) {
            *u += self.dt * v;
        }
        self.acceleration(&state.u, acc);
        for (v, a) in state.v.iter_mut().zip(acc.iter()) {
            *v += half * a;
        }
    }

    /// Advances `state` by one step.
    pub fn step(&self, state: &mut FieldState) -> Result<()> {
        self.grid.check_len("step", state.u.len())?;
        self.grid.check_len("step", state.v.len())?;
        let mut acc = vec![0.0; state.u.len()];
        self.acceleration(&state.u, &mut acc);
        self.kdk(state, &mut acc);
        state.t += self.dt;
        if !state.is_finite() {
            return Err(Error::Unstable { step: 1, t: state.t });
        }
        Ok(())
    }

    /// Takes `n_steps` steps from `state`, calling the recorders at the start
    /// and after every step.
    pub fn run(
        &self,
        state: &mut FieldState,
        n_steps: usize,
        recorders: &mut [&mut dyn Recorder],
    ) -> Result<()> {
        self.grid.check_len("run", state.u.len())?;
        self.grid.check_len("run", state.v.len())?;
        if !state.is_finite() {
            return Err(Error::Unstable { step: 0, t: state.t });
        }
        let t0 = state.t;
        let mut acc = vec![0.0; state.u.len()];
        self.acceleration(&state.u, &mut acc);
        self.notify(state, 0, n_steps, recorders)?;
        for k in 1..=n_steps {
            self.kdk(state, &mut acc);
            state.t = t0 + k as f64 * self.dt;
            if !state.is_finite() {
                return Err(Error::Unstable { step: k, t: state.t });
            }
            self.notify(state, k, n_steps, recorders)?;
        }
        Ok(())
    }

    fn notify(
        &self,
        state: &FieldState,
        step: usize,
        n_steps: usize,
        recorders: &mut [&mut dyn Recorder],
    ) -> Result<()> {
        if recorders.is_empty() {
            return Ok(());
        }
        let frame = Frame::new(step, n_steps, self.dt, state, self.grid, &self.model);
        for rec in recorders.iter_mut() {
            rec.record(&frame).map_err(|e| Error::Recorder {
                name: rec.name(),
                step,
                source: Box::new(e),
            })?;
        }
        Ok(())
    }
}

/// Result of [`evolve`]. Recorder outputs stay with the recorders.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub final_state: FieldState,
    pub n_steps: usize,
    pub dt: f64,
    pub cfl: f64,
}

/// Required `r_max` for data supported in `r <= support` evolved for `span`.
pub fn required_r_max(support: f64, span: f64, h: f64) -> f64 {
    support + span + 2.0 * h
}

/// Discretizes `initial`, steps to `config.t_final` and feeds every step to
/// the recorders.
pub fn evolve(
    initial: &InitialData,
    grid: &RadialGrid,
    params: &ModelParams,
    config: &SolverConfig,
    recorders: &mut [&mut dyn Recorder],
) -> Result<RunReport> {
    initial.validate()?;
    if grid.dim() != params.d {
        return Err(Error::Contract(format!(
            "grid dimension {} differs from d = {}",
            grid.dim(),
            params.d
        )));
    }
    let need = required_r_max(initial.support_radius(), config.t_final, grid.h());
    if grid.r_max() < need - 1e-12 {
        return Err(domain(format!(
            "r_max = {} too small: data support {} plus t_final {} needs at least {need}",
            grid.r_max(),
            initial.support_radius(),
            config.t_final
        )));
    }
    let (n_steps, dt) = config.lattice(grid)?;
    let model = Model::new(*params, config.nonlinearity_on);
    let mut state = initial.discretize(grid);
    let cfl = dt / grid.h();
    if n_steps == 0 {
        let solver_dt = config.effective_cfl(grid)? * grid.h();
        let solver = Solver::new(grid, model, solver_dt)?;
        solver.run(&mut state, 0, recorders)?;
    } else {
        let solver = Solver::new(grid, model, dt)?;
        solver.run(&mut state, n_steps, recorders)?;
    }
    Ok(RunReport {
        final_state: state,
        n_steps,
        dt,
        cfl,
    })
}

/// Linear propagation of `state` to time `t_target`, backwards if
/// `t_target < state.t` (via `v -> -v`).
pub fn linear_evolve(
    state: &FieldState,
    grid: &RadialGrid,
    params: &ModelParams,
    t_target: f64,
    cfl: Option<f64>,
) -> Result<FieldState> {
    grid.check_len("linear_evolve", state.u.len())?;
    let span = t_target - state.t;
    if span == 0.0 {
        return Ok(state.clone());
    }
    let support = state.support_radius(grid, 1e-12);
    let need = required_r_max(support, span.abs(), grid.h());
    if grid.r_max() < need - 1e-12 {
        return Err(domain(format!(
            "r_max = {} too small to propagate support {support} over {}: need at least {need}; enlarge r_max",
            grid.r_max(),
            span.abs()
        )));
    }
    let config = SolverConfig {
        cfl,
        t_final: span.abs(),
        nonlinearity_on: false,
        step_multiple: 1,
        steps: None,
    };
    let (n_steps, dt) = config.lattice(grid)?;
    let solver = Solver::new(grid, Model::new(*params, false), dt)?;
    let mut work = state.clone();
    work.t = 0.0;
    if span < 0.0 {
        work.v.iter_mut().for_each(|v| *v = -*v);
    }
    solver.run(&mut work, n_steps, &mut [])?;
    if span < 0.0 {
        work.v.iter_mut().for_each(|v| *v = -*v);
    }
    work.t = t_target;
    Ok(work)
}

/// Richardson order `log2(|O_h - O_{h/2}| / |O_{h/2} - O_{h/4}|)`.
pub fn convergence_order(observables: [f64; 3]) -> Result<f64> {
    let d1 = (observables[0] - observables[1]).abs();
    let d2 = (observables[1] - observables[2]).abs();
    if d2 < 1e-14 || d1 < 1e-14 {
        return Err(Error::IndeterminateOrder(d1.min(d2)));
    }
    Ok((d1 / d2).log2())
}

/// Evaluates `observable` at `n`, `2n` and `4n` cells and returns the
/// observed order.
pub fn refinement_order<F>(n: usize, mut observable: F) -> Result<f64>
where
    F: FnMut(usize) -> Result<f64>,
{
    let o = [observable(n)?, observable(2 * n)?, observable(4 * n)?];
    convergence_order(o)
}

/// Quadratic discrete energy conserved (to `O(dt^2)`) by the scheme:
/// face differences for the gradient, exact shell volumes for the rest.
pub fn discrete_energy(state: &FieldState, grid: &RadialGrid, model: &Model) -> f64 {
    let h = grid.h();
    let a = grid.face_areas();
    let vol = grid.volumes();
    let n = grid.n();
    let mut sum = 0.0;
    for j in 0..n {
        sum += vol[j] * (0.5 * state.v[j] * state.v[j] + model.potential(state.u[j]));
    }
    for f in 1..n {
        let du = state.u[f] - state.u[f - 1];
        sum += 0.5 * a[f] * du * du / h;
    }
    sum += a[n] * state.u[n - 1] * state.u[n - 1] / h;
    grid.omega() * sum
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params3() -> ModelParams {
        ModelParams::new(3, 3.0).unwrap()
    }

    #[test]
    fn zero_state_stays_zero() {
        let grid = RadialGrid::new(3, 64, 4.0).unwrap();
        let solver = Solver::new(&grid, Model::new(params3(), true), 0.05).unwrap();
        let mut s = FieldState::zeros(64);
        for _ in 0..10 {
            solver.step(&mut s).unwrap();
        }
        assert!(s.u.iter().chain(&s.v).all(|&x| x == 0.0));
    }

    #[test]
    fn laplacian_exact_on_even_quadratic() {
        for d in 3..=9 {
            let grid = RadialGrid::new(d, 32, 2.0).unwrap();
            let params = ModelParams::exploratory(d, 1.5).unwrap();
            let solver = Solver::new(&grid, Model::new(params, false), 0.01).unwrap();
            let u: Vec<f64> = grid.centers().iter().map(|r| 1.0 + 3.0 * r * r).collect();
            let mut out = vec![0.0; 32];
            solver.laplacian(&u, &mut out);
            for val in &out[..31] {
                assert!((val - 6.0 * d as f64).abs() < 1e-9, "d = {d}: {val}");
            }
        }
    }

    #[test]
    fn taylor_consistency() {
        let grid = RadialGrid::new(3, 128, 8.0).unwrap();
        let data = InitialData::gaussian(0.7, 0.0, 1.0).unwrap();
        let model = Model::new(params3(), true);
        let s0 = data.discretize(&grid);
        let mut lap = vec![0.0; 128];
        let mut errs = Vec::new();
        for &dt in &[1e-2, 5e-3] {
            let solver = Solver::new(&grid, model, dt).unwrap();
            solver.laplacian(&s0.u, &mut lap);
            let mut s = s0.clone();
            solver.step(&mut s).unwrap();
            let e: f64 = (0..128)
                .map(|j| (s.v[j] - s0.v[j] - dt * (lap[j] + model.force(s0.u[j]))).abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
    }

    #[test]
    fn lattice_rounding() {
        let grid = RadialGrid::new(3, 4096, 16.0).unwrap();
        let cfg = SolverConfig::new(8.0);
        let (n, dt) = cfg.lattice(&grid).unwrap();
        assert_eq!(n, 2560);
        assert!((dt - 8.0 / 2560.0).abs() < 1e-15);
        let cfg = SolverConfig {
            step_multiple: 7,
            ..cfg
        };
        assert_eq!(cfg.lattice(&grid).unwrap().0 % 7, 0);
        let bad = SolverConfig {
            cfl: Some(0.99),
            ..SolverConfig::new(1.0)
        };
        assert!(bad.lattice(&grid).is_err());
        let d7 = RadialGrid::new(7, 1024, 16.0).unwrap();
        let c = SolverConfig::new(1.0).effective_cfl(&d7).unwrap();
        assert!(c < 0.8 && c <= d7.cfl_limit());
    }

    #[test]
    fn causality_is_enforced() {
        let grid = RadialGrid::new(3, 64, 4.0).unwrap();
        let data = InitialData::compact_bump(1.0, 0.0, 1.0).unwrap();
        let err = evolve(&data, &grid, &params3(), &SolverConfig::new(3.5), &mut []);
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn convergence_order_cases() {
        assert!((convergence_order([1.0, 1.25, 1.3125]).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(
            convergence_order([2.0, 2.0, 2.0]),
            Err(Error::IndeterminateOrder(_))
        ));
    }

    #[test]
    fn instability_is_reported() {
        let grid = RadialGrid::new(3, 64, 4.0).unwrap();
        let model = Model::new(params3(), false);
        let mut solver = Solver::new(&grid, model, 0.05).unwrap();
        // force an unstable step size past the constructor check
        solver.dt = 5.0 * grid.h();
        let mut s = InitialData::gaussian(1.0, 0.0, 0.5).unwrap().discretize(&grid);
        let err = solver.run(&mut s, 2000, &mut []).unwrap_err();
        assert!(matches!(err, Error::Unstable { step, .. } if step > 0));
    }
}
