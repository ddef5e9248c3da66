//! Space-time regions in the `(r, t)` half-plane, boundary flux integrals,
//! the axis measure `μ`, light-cone fluxes and the flux balance.
//!
//! Segment integrals are stored for the reference orientation of each edge
//! (normal pointing up for horizontal and cone edges, towards larger `r` for
//! cylinders) and multiplied by the orientation sign on read-out.
//!
//! Balance identities checked by [`flux_balance`]:
//!
//! ```text
//! inward:  Σ_segments + c_d μ + ∬ M = 0
//! outward: Σ_segments - c_d μ - ∬ M = 0
//! ```
//!
//! The axis term is present only when the region has an edge on `r = 0`.

use serde::{Deserialize, Serialize};

use crate::energy::{sample_at, Profile, WeightedDensities};
use crate::error::{domain, Error, Result};
use crate::mathlib::{c_d, radial_integral_between, radial_sum, ClippedTrapezoid};
use crate::solver::{FieldState, Frame, Model, RadialGrid, Recorder};

const GEOM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentKind {
    HorizontalUp,
    HorizontalDown,
    CylinderOutward,
    CylinderInward,
    Axis,
    BackwardConeUp,
    BackwardConeDown,
    ForwardConeUp,
    ForwardConeDown,
}

impl SegmentKind {
    /// `+1` for the reference orientation, `-1` for its reverse.
    pub fn orientation(self) -> f64 {
        match self {
            SegmentKind::HorizontalDown
            | SegmentKind::CylinderInward
            | SegmentKind::BackwardConeDown
            | SegmentKind::ForwardConeDown => -1.0,
            _ => 1.0,
        }
    }

    pub fn flipped(self) -> Self {
        use SegmentKind::*;
        match self {
            HorizontalUp => HorizontalDown,
            HorizontalDown => HorizontalUp,
            CylinderOutward => CylinderInward,
            CylinderInward => CylinderOutward,
            Axis => Axis,
            BackwardConeUp => BackwardConeDown,
            BackwardConeDown => BackwardConeUp,
            ForwardConeUp => ForwardConeDown,
            ForwardConeDown => ForwardConeUp,
        }
    }

    pub fn label(self) -> &'static str {
        use SegmentKind::*;
        match self {
            HorizontalUp => "horizontal-up",
            HorizontalDown => "horizontal-down",
            CylinderOutward => "cylinder-outward",
            CylinderInward => "cylinder-inward",
            Axis => "axis",
            BackwardConeUp => "backward-cone-up",
            BackwardConeDown => "backward-cone-down",
            ForwardConeUp => "forward-cone-up",
            ForwardConeDown => "forward-cone-down",
        }
    }
}

/// A point `(r, t)`.
pub type Point = (f64, f64);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSegment {
    pub kind: SegmentKind,
    pub a: Point,
    pub b: Point,
}

impl SurfaceSegment {
    /// Builds a segment and checks that the endpoints fit the kind.
    pub fn new(kind: SegmentKind, a: Point, b: Point) -> Result<Self> {
        let seg = Self { kind, a, b };
        seg.validate()?;
        Ok(seg)
    }

    fn validate(&self) -> Result<()> {
        let (dr, dt) = (self.b.0 - self.a.0, self.b.1 - self.a.1);
        let scale = 1.0 + dr.abs().max(dt.abs());
        let tol = GEOM_TOL * scale;
        let ok = match self.kind {
            SegmentKind::HorizontalUp | SegmentKind::HorizontalDown => dt.abs() <= tol,
            SegmentKind::CylinderOutward | SegmentKind::CylinderInward => dr.abs() <= tol && self.a.0 > tol,
            SegmentKind::Axis => self.a.0.abs() <= tol && self.b.0.abs() <= tol,
            SegmentKind::BackwardConeUp | SegmentKind::BackwardConeDown => (dr + dt).abs() <= tol,
            SegmentKind::ForwardConeUp | SegmentKind::ForwardConeDown => (dr - dt).abs() <= tol,
        };
        let degenerate = dr.abs() <= tol && dt.abs() <= tol;
        if !ok || degenerate || self.a.0 < -tol || self.b.0 < -tol {
            return Err(Error::Contract(format!(
                "segment {:?} -> {:?} is not a valid {}",
                self.a,
                self.b,
                self.kind.label()
            )));
        }
        Ok(())
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.a.1.min(self.b.1), self.a.1.max(self.b.1))
    }

    pub fn r_range(&self) -> (f64, f64) {
        (self.a.0.min(self.b.0), self.a.0.max(self.b.0))
    }
}

/// Closed polygonal region, stored counter-clockwise in the `(r, t)` plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub vertices: Vec<Point>,
    pub segments: Vec<SurfaceSegment>,
}

fn classify(a: Point, b: Point) -> Result<SegmentKind> {
    let (dr, dt) = (b.0 - a.0, b.1 - a.1);
    let tol = GEOM_TOL * (1.0 + dr.abs().max(dt.abs()));
    // counter-clockwise traversal: the outward normal is (dt, -dr)
    let kind = if dt.abs() <= tol {
        if dr < 0.0 {
            SegmentKind::HorizontalUp
        } else {
            SegmentKind::HorizontalDown
        }
    } else if dr.abs() <= tol {
        if a.0.abs() <= tol {
            SegmentKind::Axis
        } else if dt > 0.0 {
            SegmentKind::CylinderOutward
        } else {
            SegmentKind::CylinderInward
        }
    } else if (dr + dt).abs() <= tol {
        if dt > 0.0 {
            SegmentKind::BackwardConeUp
        } else {
            SegmentKind::BackwardConeDown
        }
    } else if (dr - dt).abs() <= tol {
        if dt < 0.0 {
            SegmentKind::ForwardConeUp
        } else {
            SegmentKind::ForwardConeDown
        }
    } else {
        return Err(Error::Contract(format!(
            "edge {a:?} -> {b:?} is neither horizontal, vertical nor a light-cone line"
        )));
    };
    Ok(kind)
}

fn segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let orient = |a: Point, b: Point, c: Point| (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    let eps = 1e-12;
    ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps)) && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps))
}

impl Region {
    /// Builds a region from an ordered vertex loop (either orientation); edge
    /// kinds are inferred from the geometry.
    pub fn from_vertices(vertices: &[Point]) -> Result<Self> {
        let mut vs: Vec<Point> = vertices.to_vec();
        if vs.len() >= 2 && vs.first() == vs.last() {
            vs.pop();
        }
        if vs.len() < 3 {
            return Err(Error::Contract("a region needs at least 3 vertices".into()));
        }
        if vs.iter().any(|v| v.0 < -GEOM_TOL || !v.0.is_finite() || !v.1.is_finite()) {
            return Err(Error::Contract("region vertices must have finite r >= 0".into()));
        }
        let n = vs.len();
        let area2: f64 = (0..n)
            .map(|i| {
                let (a, b) = (vs[i], vs[(i + 1) % n]);
                a.0 * b.1 - b.0 * a.1
            })
            .sum();
        if area2.abs() < 1e-12 {
            return Err(Error::Contract("region has zero area".into()));
        }
        if area2 < 0.0 {
            vs.reverse();
        }
        for i in 0..n {
            for j in i + 1..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                if segments_cross(vs[i], vs[(i + 1) % n], vs[j], vs[(j + 1) % n]) {
                    return Err(Error::Contract(format!("region edges {i} and {j} cross")));
                }
            }
        }
        let segments = (0..n)
            .map(|i| {
                let (a, b) = (vs[i], vs[(i + 1) % n]);
                let kind = classify(a, b)?;
                SurfaceSegment::new(kind, a, b)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { vertices: vs, segments })
    }

    /// `[r1, r2] × [t1, t2]`.
    pub fn rectangle(r1: f64, r2: f64, t1: f64, t2: f64) -> Result<Self> {
        Self::from_vertices(&[(r1, t1), (r2, t1), (r2, t2), (r1, t2)])
    }

    pub fn t_range(&self) -> (f64, f64) {
        let lo = self.vertices.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        let hi = self.vertices.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    pub fn r_max(&self) -> f64 {
        self.vertices.iter().map(|v| v.0).fold(0.0, f64::max)
    }

    pub fn has_axis(&self) -> bool {
        self.segments.iter().any(|s| s.kind == SegmentKind::Axis)
    }

    /// Radial intervals of the horizontal slice at `t`.
    pub fn slice(&self, t: f64) -> Vec<(f64, f64)> {
        let mut xs = Vec::new();
        for s in &self.segments {
            let (a, b) = (s.a, s.b);
            if (a.1 <= t && t < b.1) || (b.1 <= t && t < a.1) {
                let w = (t - a.1) / (b.1 - a.1);
                xs.push(a.0 + w * (b.0 - a.0));
            }
        }
        xs.sort_by(|x, y| x.total_cmp(y));
        xs.chunks_exact(2).map(|c| (c[0].max(0.0), c[1])).collect()
    }

    /// Checks the region fits into `[0, r_max] × [t0, t1]`.
    pub fn check_within(&self, r_max: f64, t0: f64, t1: f64) -> Result<()> {
        let (lo, hi) = self.t_range();
        let tol = 1e-9 * (1.0 + t1.abs());
        if lo < t0 - tol || hi > t1 + tol {
            return Err(domain(format!(
                "region spans t in [{lo}, {hi}], outside the run [{t0}, {t1}]"
            )));
        }
        if self.r_max() > r_max {
            return Err(domain(format!("region reaches r = {} beyond r_max = {r_max}", self.r_max())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyType {
    Inward,
    Outward,
}

impl EnergyType {
    pub const BOTH: [EnergyType; 2] = [EnergyType::Inward, EnergyType::Outward];

    fn index(self) -> usize {
        match self {
            EnergyType::Inward => 0,
            EnergyType::Outward => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            EnergyType::Inward => "inward",
            EnergyType::Outward => "outward",
        }
    }
}

/// `ũ(0, t) = (9 u_0 - u_1)/8`, the even parabola through the two innermost
/// cells evaluated at the origin.
pub fn axis_value(u: &[f64]) -> f64 {
    (9.0 * u[0] - u[1]) / 8.0
}

/// Density of `μ` in `t`: `ũ(0,t)²` for `d = 3`. For `d >= 4` the flux
/// through a small cylinder around the axis vanishes with its radius, so
/// the density is zero.
pub fn axis_density(d: usize, u: &[f64]) -> f64 {
    if d == 3 {
        let a = axis_value(u);
        a * a
    } else {
        0.0
    }
}

fn integrand_pair(kind: SegmentKind, w: &WeightedDensities) -> [f64; 2] {
    use SegmentKind::*;
    match kind {
        CylinderOutward | CylinderInward => [
            -0.25 * w.l_plus_sq + 0.5 * w.e_prime,
            0.25 * w.l_minus_sq - 0.5 * w.e_prime,
        ],
        BackwardConeUp | BackwardConeDown => [w.e_prime, 0.5 * w.l_minus_sq],
        ForwardConeUp | ForwardConeDown => [0.5 * w.l_plus_sq, w.e_prime],
        HorizontalUp | HorizontalDown | Axis => [0.0, 0.0],
    }
}

/// Radius where a segment is crossed at time `t` (extended linearly past its
/// ends, reflected at `r = 0`).
fn crossing_radius(seg: &SurfaceSegment, t: f64) -> f64 {
    let r = match seg.kind {
        SegmentKind::CylinderInward | SegmentKind::CylinderOutward => seg.a.0,
        SegmentKind::BackwardConeUp | SegmentKind::BackwardConeDown => seg.a.0 + seg.a.1 - t,
        SegmentKind::ForwardConeUp | SegmentKind::ForwardConeDown => t - (seg.a.1 - seg.a.0),
        _ => 0.0,
    };
    r.abs()
}

#[derive(Debug, Clone)]
enum SegmentAcc {
    Horizontal {
        t: f64,
        prev: Option<(f64, [f64; 2])>,
        value: Option<[f64; 2]>,
    },
    Timed([ClippedTrapezoid; 2]),
    Axis(ClippedTrapezoid),
}

/// Integrated boundary data of one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentTrace {
    pub segment: SurfaceSegment,
    /// Integral for the reference orientation, `[inward, outward]`;
    /// `None` if the run never sampled the segment.
    pub reference: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionTraces {
    pub region: Region,
    pub segments: Vec<SegmentTrace>,
    /// `μ` over the axis edge (zero without one).
    pub mu: f64,
    pub morawetz: f64,
    pub d: usize,
}

struct RegionAcc {
    region: Region,
    segs: Vec<SegmentAcc>,
    morawetz: ClippedTrapezoid,
    t_lo: f64,
    t_hi: f64,
}

/// Accumulates every boundary integral and the Morawetz integral of a list
/// of regions during a run.
pub struct RegionRecorder {
    regions: Vec<RegionAcc>,
    d: usize,
}

impl RegionRecorder {
    pub fn new(regions: Vec<Region>) -> Self {
        let regions = regions
            .into_iter()
            .map(|region| {
                let segs = region
                    .segments
                    .iter()
                    .map(|s| match s.kind {
                        SegmentKind::HorizontalUp | SegmentKind::HorizontalDown => SegmentAcc::Horizontal {
                            t: s.a.1,
                            prev: None,
                            value: None,
                        },
                        SegmentKind::Axis => {
                            let (lo, hi) = s.t_range();
                            SegmentAcc::Axis(ClippedTrapezoid::new(lo, hi))
                        }
                        _ => {
                            let (lo, hi) = s.t_range();
                            SegmentAcc::Timed([ClippedTrapezoid::new(lo, hi); 2])
                        }
                    })
                    .collect();
                let (t_lo, t_hi) = region.t_range();
                RegionAcc {
                    segs,
                    morawetz: ClippedTrapezoid::new(t_lo, t_hi),
                    t_lo,
                    t_hi,
                    region,
                }
            })
            .collect();
        Self { regions, d: 0 }
    }

    pub fn traces(&self) -> Vec<RegionTraces> {
        self.regions
            .iter()
            .map(|acc| {
                let mut mu = 0.0;
                let segments = acc
                    .region
                    .segments
                    .iter()
                    .zip(&acc.segs)
                    .map(|(seg, s)| {
                        let reference = match s {
                            SegmentAcc::Horizontal { value, .. } => *value,
                            SegmentAcc::Timed(q) => covered_all(&q[0]).then(|| [q[0].value(), q[1].value()]),
                            SegmentAcc::Axis(q) => {
                                mu = q.value();
                                covered_all(q).then_some([0.0, 0.0])
                            }
                        };
                        SegmentTrace {
                            segment: *seg,
                            reference,
                        }
                    })
                    .collect();
                RegionTraces {
                    region: acc.region.clone(),
                    segments,
                    mu,
                    morawetz: acc.morawetz.value(),
                    d: self.d,
                }
            })
            .collect()
    }
}

fn covered_all(q: &ClippedTrapezoid) -> bool {
    let (lo, hi) = q.bounds();
    match q.covered() {
        Some((a, b)) => a <= lo + 1e-9 * (1.0 + lo.abs()) && b >= hi - 1e-9 * (1.0 + hi.abs()),
        None => false,
    }
}

/// Horizontal-segment integrals `[E₋, E₊]` over `[a, b]` at the frame time.
fn horizontal_pair(prof: &Profile, grid: &RadialGrid, seg: &SurfaceSegment) -> [f64; 2] {
    let (a, b) = seg.r_range();
    [
        radial_integral_between(&prof.e_minus, grid, a, b),
        radial_integral_between(&prof.e_plus, grid, a, b),
    ]
}

impl Recorder for RegionRecorder {
    fn name(&self) -> &'static str {
        "regions"
    }

    fn record(&mut self, frame: &Frame<'_>) -> Result<()> {
        let t = frame.t();
        let dt = frame.dt;
        let grid = frame.grid;
        let omega = grid.omega();
        self.d = grid.dim();
        if frame.is_first() {
            for acc in &self.regions {
                let span_end = frame.state.t + frame.n_steps as f64 * dt;
                acc.region.check_within(grid.r_max(), frame.state.t, span_end)?;
            }
        }
        for acc in &mut self.regions {
            if t < acc.t_lo - 1.5 * dt || t > acc.t_hi + 1.5 * dt {
                continue;
            }
            let prof = frame.profile();
            for (seg, s) in acc.region.segments.iter().zip(acc.segs.iter_mut()) {
                match s {
                    SegmentAcc::Horizontal { t: th, prev, value } => {
                        if value.is_some() || (t - *th).abs() > dt * (1.0 + 1e-9) {
                            continue;
                        }
                        let cur = horizontal_pair(prof, grid, seg);
                        if (t - *th).abs() <= 1e-9 * dt {
                            *value = Some(cur);
                        } else if let Some((tp, vp)) = *prev {
                            if tp < *th && t > *th {
                                let w = (*th - tp) / (t - tp);
                                *value = Some([
                                    vp[0] + w * (cur[0] - vp[0]),
                                    vp[1] + w * (cur[1] - vp[1]),
                                ]);
                            }
                        }
                        *prev = Some((t, cur));
                    }
                    SegmentAcc::Timed(q) => {
                        if !q[0].wants(t, dt) {
                            continue;
                        }
                        let r = crossing_radius(seg, t);
                        let pv = sample_at(frame.state, &prof.ur, grid, r);
                        let w = WeightedDensities::at(frame.model, r, pv);
                        let pair = integrand_pair(seg.kind, &w);
                        q[0].push(t, omega * pair[0]);
                        q[1].push(t, omega * pair[1]);
                    }
                    SegmentAcc::Axis(q) => {
                        if q.wants(t, dt) {
                            q.push(t, axis_density(grid.dim(), &frame.state.u));
                        }
                    }
                }
            }
            if acc.morawetz.wants(t, dt) {
                let eps = GEOM_TOL * (acc.t_hi - acc.t_lo);
                let tc = t.clamp(acc.t_lo + eps, acc.t_hi - eps);
                let m: f64 = acc
                    .region
                    .slice(tc)
                    .iter()
                    .map(|&(a, b)| radial_integral_between(&prof.morawetz, grid, a, b))
                    .sum();
                acc.morawetz.push(t, m);
            }
        }
        Ok(())
    }
}

/// Signed surface integral of one segment for the chosen energy type.
pub fn surface_integral(trace: &SegmentTrace, energy_type: EnergyType) -> Result<f64> {
    if trace.segment.kind == SegmentKind::Axis {
        return Ok(0.0);
    }
    let reference = trace.reference.ok_or_else(|| {
        Error::Contract(format!(
            "no trace data for {} segment {:?} -> {:?}",
            trace.segment.kind.label(),
            trace.segment.a,
            trace.segment.b
        ))
    })?;
    Ok(trace.segment.kind.orientation() * reference[energy_type.index()])
}

/// `∬_Ω M dx dt`.
pub fn morawetz_region_integral(traces: &RegionTraces) -> f64 {
    traces.morawetz
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFlux {
    pub index: usize,
    pub kind: SegmentKind,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxLedger {
    pub energy_type: EnergyType,
    pub per_segment: Vec<SegmentFlux>,
    /// `+c_d μ` for inward energy, `-c_d μ` for outward.
    pub mu_term: f64,
    pub morawetz_integral: f64,
    pub residual: f64,
}

impl FluxLedger {
    pub fn segment_sum(&self) -> f64 {
        self.per_segment.iter().map(|s| s.value).sum()
    }
}

pub fn flux_balance(traces: &RegionTraces, energy_type: EnergyType) -> Result<FluxLedger> {
    let per_segment = traces
        .segments
        .iter()
        .enumerate()
        .filter(|(_, s)| s.segment.kind != SegmentKind::Axis)
        .map(|(index, s)| {
            Ok(SegmentFlux {
                index,
                kind: s.segment.kind,
                value: surface_integral(s, energy_type)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let axis = traces.segments.iter().find(|s| s.segment.kind == SegmentKind::Axis);
    if let Some(a) = axis {
        if a.reference.is_none() {
            return Err(Error::Contract("axis segment not covered by the run".into()));
        }
    }
    let cmu = if axis.is_some() { c_d(traces.d) * traces.mu } else { 0.0 };
    let m = traces.morawetz;
    let sum: f64 = per_segment.iter().map(|s| s.value).sum();
    let (mu_term, residual) = match energy_type {
        EnergyType::Inward => (cmu, sum + cmu + m),
        EnergyType::Outward => (-cmu, sum - cmu - m),
    };
    Ok(FluxLedger {
        energy_type,
        per_segment,
        mu_term,
        morawetz_integral: m,
        residual,
    })
}

/// Per-step traces along the axis and over the whole slab: `ũ(0,t)`, the
/// spatial Morawetz integral and the inward energy, with running time
/// integrals.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AxisRecorder {
    d: usize,
    pub t: Vec<f64>,
    pub axis_u: Vec<f64>,
    pub axis_density: Vec<f64>,
    pub mu_cumulative: Vec<f64>,
    pub morawetz_slice: Vec<f64>,
    pub morawetz_cumulative: Vec<f64>,
    pub e_minus: Vec<f64>,
    pub e_plus: Vec<f64>,
}

impl AxisRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    fn span(&self) -> Result<(f64, f64)> {
        match (self.t.first(), self.t.last()) {
            (Some(a), Some(b)) => Ok((*a, *b)),
            _ => Err(domain("axis recorder holds no samples")),
        }
    }

    fn cumulative_at(&self, cum: &[f64], f: &[f64], t: f64) -> f64 {
        let k = self.t.partition_point(|&s| s <= t);
        if k == 0 {
            return 0.0;
        }
        let k = k - 1;
        if k + 1 >= self.t.len() {
            return cum[k];
        }
        let (t0, t1) = (self.t[k], self.t[k + 1]);
        let w = (t - t0) / (t1 - t0);
        let ft = f[k] + w * (f[k + 1] - f[k]);
        cum[k] + 0.5 * (t - t0) * (f[k] + ft)
    }

    fn check_interval(&self, t1: f64, t2: f64) -> Result<()> {
        let (a, b) = self.span()?;
        let tol = 1e-9 * (1.0 + b.abs());
        if t1 > t2 || t1 < a - tol || t2 > b + tol {
            return Err(domain(format!("interval [{t1}, {t2}] outside the run span [{a}, {b}]")));
        }
        Ok(())
    }

    /// `μ([t1, t2]) = ∫ ũ(0,t)² dt` (zero for `d >= 4`).
    pub fn mu(&self, t1: f64, t2: f64) -> Result<f64> {
        self.check_interval(t1, t2)?;
        Ok(self.cumulative_at(&self.mu_cumulative, &self.axis_density, t2)
            - self.cumulative_at(&self.mu_cumulative, &self.axis_density, t1))
    }

    /// `∬_{[0, r_max] × [t1, t2]} M`.
    pub fn slab_morawetz(&self, t1: f64, t2: f64) -> Result<f64> {
        self.check_interval(t1, t2)?;
        Ok(self.cumulative_at(&self.morawetz_cumulative, &self.morawetz_slice, t2)
            - self.cumulative_at(&self.morawetz_cumulative, &self.morawetz_slice, t1))
    }
}

/// `μ([t1, t2])`.
pub fn mu_accumulate(axis: &AxisRecorder, t1: f64, t2: f64) -> Result<f64> {
    axis.mu(t1, t2)
}

impl Recorder for AxisRecorder {
    fn name(&self) -> &'static str {
        "axis"
    }

    fn record(&mut self, frame: &Frame<'_>) -> Result<()> {
        self.d = frame.grid.dim();
        let prof = frame.profile();
        let t = frame.t();
        let u = &frame.state.u;
        let dens = axis_density(self.d, u);
        let m = radial_sum(&prof.morawetz, frame.grid);
        let (mu_c, m_c) = match self.t.last() {
            Some(&tp) => {
                let k = self.t.len() - 1;
                (
                    self.mu_cumulative[k] + 0.5 * (t - tp) * (self.axis_density[k] + dens),
                    self.morawetz_cumulative[k] + 0.5 * (t - tp) * (self.morawetz_slice[k] + m),
                )
            }
            None => (0.0, 0.0),
        };
        self.t.push(t);
        self.axis_u.push(axis_value(u));
        self.axis_density.push(dens);
        self.mu_cumulative.push(mu_c);
        self.morawetz_slice.push(m);
        self.morawetz_cumulative.push(m_c);
        self.e_minus.push(radial_sum(&prof.e_minus, frame.grid));
        self.e_plus.push(radial_sum(&prof.e_plus, frame.grid));
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConeKind {
    /// `C⁻(s) = {|x| + t = s}`
    Backward,
    /// `C⁺(τ) = {t - |x| = τ}`
    Forward,
}

/// One light cone's fluxes `Q_-` (inward) and `Q_+` (outward).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeFlux {
    pub kind: ConeKind,
    pub label: f64,
    pub q_minus: f64,
    pub q_plus: f64,
    /// Time range of the cone actually integrated, `None` if the cone misses
    /// the run.
    pub t_range: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeFluxSeries {
    pub cone_kind: ConeKind,
    pub labels: Vec<f64>,
    pub q_minus: Vec<f64>,
    pub q_plus: Vec<f64>,
    /// `true` where the cone never met the run.
    pub empty: Vec<bool>,
}

struct ConeAcc {
    kind: ConeKind,
    label: f64,
    direct: [ClippedTrapezoid; 2],
    /// For time-symmetric data: the `t < 0` half, read off the mirror cone.
    mirror: Option<[ClippedTrapezoid; 2]>,
}

/// Accumulates the light-cone fluxes `Q` along the families `C⁺(τ)` and
/// `C⁻(s)`, one sample per step (`dr = dt` along a null line).
pub struct ConeFluxRecorder {
    cones: Vec<ConeAcc>,
}

impl ConeFluxRecorder {
    /// `time_symmetric` declares `u_1 = 0`, so `u(t) = u(-t)` and the part of
    /// each cone below `t = 0` equals a mirror-cone integral over `t > 0`.
    pub fn new(taus: &[f64], ss: &[f64], time_symmetric: bool) -> Self {
        let mut cones = Vec::new();
        let inf = f64::INFINITY;
        for &tau in taus {
            cones.push(ConeAcc {
                kind: ConeKind::Forward,
                label: tau,
                direct: [ClippedTrapezoid::new(tau.max(0.0), inf); 2],
                // t in [tau, 0] mirrors to the backward cone s = -tau, t in [0, -tau]
                mirror: (time_symmetric && tau < 0.0).then(|| [ClippedTrapezoid::new(0.0, -tau); 2]),
            });
        }
        for &s in ss {
            cones.push(ConeAcc {
                kind: ConeKind::Backward,
                label: s,
                direct: [ClippedTrapezoid::new(0.0, s); 2],
                // t < 0 mirrors to the forward cone tau = -s, t in [0, inf)
                mirror: time_symmetric.then(|| [ClippedTrapezoid::new(0.0, inf); 2]),
            });
        }
        Self { cones }
    }

    pub fn fluxes(&self) -> Vec<ConeFlux> {
        self.cones
            .iter()
            .map(|c| {
                let mut q = [c.direct[0].value(), c.direct[1].value()];
                let mut range = c.direct[0].covered();
                if let Some(m) = &c.mirror {
                    q[0] += m[0].value();
                    q[1] += m[1].value();
                    if let Some((_, b)) = m[0].covered() {
                        let lo = -b;
                        range = Some(match range {
                            Some((_, hi)) => (lo, hi),
                            None => (lo, 0.0),
                        });
                    }
                }
                ConeFlux {
                    kind: c.kind,
                    label: c.label,
                    q_minus: q[0],
                    q_plus: q[1],
                    t_range: range,
                }
            })
            .collect()
    }

    pub fn series(&self, kind: ConeKind) -> ConeFluxSeries {
        let all: Vec<ConeFlux> = self.fluxes().into_iter().filter(|c| c.kind == kind).collect();
        ConeFluxSeries {
            cone_kind: kind,
            labels: all.iter().map(|c| c.label).collect(),
            q_minus: all.iter().map(|c| c.q_minus).collect(),
            q_plus: all.iter().map(|c| c.q_plus).collect(),
            empty: all.iter().map(|c| c.t_range.is_none()).collect(),
        }
    }
}

/// `[Q_-, Q_+]` integrands (times `r^{d-1}`, without `ω`) on a cone.
fn cone_integrands(kind: ConeKind, w: &WeightedDensities) -> [f64; 2] {
    match kind {
        ConeKind::Backward => [w.e_prime, 0.5 * w.l_minus_sq],
        ConeKind::Forward => [0.5 * w.l_plus_sq, w.e_prime],
    }
}

fn sample_weighted(frame: &Frame<'_>, r: f64) -> Option<WeightedDensities> {
    if r > frame.grid.r_max() {
        return None;
    }
    let prof = frame.profile();
    let pv = sample_at(frame.state, &prof.ur, frame.grid, r.abs());
    Some(WeightedDensities::at(frame.model, r.abs(), pv))
}

impl Recorder for ConeFluxRecorder {
    fn name(&self) -> &'static str {
        "cones"
    }

    fn record(&mut self, frame: &Frame<'_>) -> Result<()> {
        let t = frame.t();
        let dt = frame.dt;
        let omega = frame.grid.omega();
        for c in &mut self.cones {
            if c.direct[0].wants(t, dt) {
                let r = match c.kind {
                    ConeKind::Forward => t - c.label,
                    ConeKind::Backward => c.label - t,
                };
                if let Some(w) = sample_weighted(frame, r) {
                    let q = cone_integrands(c.kind, &w);
                    c.direct[0].push(t, omega * q[0]);
                    c.direct[1].push(t, omega * q[1]);
                }
            }
            if let Some(m) = &mut c.mirror {
                if !m[0].wants(t, dt) {
                    continue;
                }
                // (r, -t) on the original cone is (r, t) on the mirror cone;
                // v flips sign, which swaps L₊ and L₋.
                let r = match c.kind {
                    ConeKind::Forward => -c.label - t,
                    ConeKind::Backward => t + c.label,
                };
                if let Some(w) = sample_weighted(frame, r) {
                    let swapped = WeightedDensities {
                        l_plus_sq: w.l_minus_sq,
                        l_minus_sq: w.l_plus_sq,
                        ..w
                    };
                    let q = cone_integrands(c.kind, &swapped);
                    m[0].push(t, omega * q[0]);
                    m[1].push(t, omega * q[1]);
                }
            }
        }
        Ok(())
    }
}

/// Convenience: flux balance of every region for both energy types.
pub fn all_ledgers(traces: &[RegionTraces]) -> Result<Vec<(usize, FluxLedger)>> {
    let mut out = Vec::new();
    for (i, tr) in traces.iter().enumerate() {
        for et in EnergyType::BOTH {
            out.push((i, flux_balance(tr, et)?));
        }
    }
    Ok(out)
}

/// `E₋` or `E₊` integrated over a horizontal segment of a single state; used
/// to cross-check the recorder against the energy module.
pub fn horizontal_integral(
    state: &FieldState,
    grid: &RadialGrid,
    model: &Model,
    segment: &SurfaceSegment,
    energy_type: EnergyType,
) -> Result<f64> {
    if !matches!(segment.kind, SegmentKind::HorizontalUp | SegmentKind::HorizontalDown) {
        return Err(Error::Contract("horizontal_integral needs a horizontal segment".into()));
    }
    let prof = Profile::compute(state, grid, model);
    Ok(segment.kind.orientation() * horizontal_pair(&prof, grid, segment)[energy_type.index()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_edges_are_classified() {
        let r = Region::rectangle(1.0, 2.0, 0.0, 3.0).unwrap();
        let kinds: Vec<_> = r.segments.iter().map(|s| s.kind).collect();
        assert_eq!(
            kinds,
            vec![
                SegmentKind::HorizontalDown,
                SegmentKind::CylinderOutward,
                SegmentKind::HorizontalUp,
                SegmentKind::CylinderInward
            ]
        );
        let axis = Region::rectangle(0.0, 2.0, 1.0, 2.0).unwrap();
        assert!(axis.has_axis());
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let a = Region::from_vertices(&[(1.0, 0.0), (1.0, 3.0), (2.0, 3.0), (2.0, 0.0)]).unwrap();
        let b = Region::rectangle(1.0, 2.0, 0.0, 3.0).unwrap();
        let mut ka: Vec<_> = a.segments.iter().map(|s| s.kind).collect();
        let mut kb: Vec<_> = b.segments.iter().map(|s| s.kind).collect();
        ka.sort_by_key(|k| k.label());
        kb.sort_by_key(|k| k.label());
        assert_eq!(ka, kb);
    }

    #[test]
    fn cone_edges() {
        // backward light-cone triangle with apex on the axis at t = 2
        let tri = Region::from_vertices(&[(0.0, 0.0), (2.0, 0.0), (0.0, 2.0)]).unwrap();
        let kinds: Vec<_> = tri.segments.iter().map(|s| s.kind).collect();
        assert!(kinds.contains(&SegmentKind::BackwardConeUp));
        assert!(kinds.contains(&SegmentKind::Axis));
        // forward light-cone triangle: t - r = 0 bounding from above-left
        let tri = Region::from_vertices(&[(0.0, 0.0), (2.0, 2.0), (0.0, 2.0)]).unwrap();
        let kinds: Vec<_> = tri.segments.iter().map(|s| s.kind).collect();
        assert!(kinds.contains(&SegmentKind::ForwardConeDown));
        let tri = Region::from_vertices(&[(0.0, 0.0), (2.0, 0.0), (2.0, 2.0)]).unwrap();
        let kinds: Vec<_> = tri.segments.iter().map(|s| s.kind).collect();
        assert!(kinds.contains(&SegmentKind::ForwardConeUp));
    }

    #[test]
    fn bad_regions() {
        assert!(Region::from_vertices(&[(0.0, 0.0), (1.0, 0.0)]).is_err());
        assert!(Region::from_vertices(&[(0.0, 0.0), (2.0, 0.0), (1.0, 3.0)]).is_err());
        assert!(Region::from_vertices(&[(-1.0, 0.0), (2.0, 0.0), (2.0, 1.0), (-1.0, 1.0)]).is_err());
        // bow tie
        assert!(Region::from_vertices(&[(1.0, 0.0), (2.0, 1.0), (2.0, 0.0), (1.0, 1.0)]).is_err());
        assert!(SurfaceSegment::new(SegmentKind::Axis, (1.0, 0.0), (1.0, 1.0)).is_err());
    }

    #[test]
    fn slices() {
        let tri = Region::from_vertices(&[(0.0, 0.0), (2.0, 0.0), (0.0, 2.0)]).unwrap();
        let s = tri.slice(0.5);
        assert_eq!(s.len(), 1);
        assert!((s[0].0).abs() < 1e-15 && (s[0].1 - 1.5).abs() < 1e-15);
    }

    #[test]
    fn orientation_is_an_involution() {
        use SegmentKind::*;
        for k in [
            HorizontalUp,
            HorizontalDown,
            CylinderOutward,
            CylinderInward,
            BackwardConeUp,
            BackwardConeDown,
            ForwardConeUp,
            ForwardConeDown,
        ] {
            assert_eq!(k.flipped().flipped(), k);
            assert_eq!(k.flipped().orientation(), -k.orientation());
        }
    }
}
