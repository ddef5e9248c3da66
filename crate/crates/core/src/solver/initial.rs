use serde::{Deserialize, Serialize};

use super::{FieldState, RadialGrid};
use crate::error::{domain, Result};

/// Gaussian tails are treated as zero beyond `center + GAUSS_REACH * width`,
/// where `exp(-GAUSS_REACH^2) < 1e-16`.
pub const GAUSS_REACH: f64 = 6.07;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Gaussian,
    CompactBump,
    /// Gaussian shell `g(r - c) + g(r + c)`, even in `r`.
    Ring,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityProfile {
    Zero,
    TimeSymmetric,
    /// `u_1 = -∂_r u_0 - (d-1)/2 · u_0 / r`, which kills `L₊u` at `t = 0`.
    OutgoingBiased,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub kind: ProfileKind,
    pub amplitude: f64,
    #[serde(default)]
    pub center: f64,
    pub width: f64,
    #[serde(default = "default_velocity")]
    pub velocity_profile: VelocityProfile,
}

fn default_velocity() -> VelocityProfile {
    VelocityProfile::Zero
}

impl InitialData {
    pub fn new(kind: ProfileKind, amplitude: f64, center: f64, width: f64) -> Result<Self> {
        let data = Self {
            kind,
            amplitude,
            center,
            width,
            velocity_profile: VelocityProfile::Zero,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn compact_bump(amplitude: f64, center: f64, width: f64) -> Result<Self> {
        Self::new(ProfileKind::CompactBump, amplitude, center, width)
    }

    pub fn gaussian(amplitude: f64, center: f64, width: f64) -> Result<Self> {
        Self::new(ProfileKind::Gaussian, amplitude, center, width)
    }

    pub fn ring(amplitude: f64, center: f64, width: f64) -> Result<Self> {
        Self::new(ProfileKind::Ring, amplitude, center, width)
    }

    pub fn with_velocity(mut self, profile: VelocityProfile) -> Self {
        self.velocity_profile = profile;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() {
            return Err(domain("amplitude must be finite"));
        }
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(domain(format!("width = {} must be positive", self.width)));
        }
        if !(self.center >= 0.0) || !self.center.is_finite() {
            return Err(domain(format!("center = {} must be >= 0", self.center)));
        }
        // A bump straddling the origin would have a kink at r = 0.
        if self.kind == ProfileKind::CompactBump && self.center > 0.0 && self.center < self.width {
            return Err(domain(format!(
                "compact bump needs center == 0 or center >= width (got center {}, width {})",
                self.center, self.width
            )));
        }
        if self.kind == ProfileKind::Gaussian && self.center > 0.0 && self.center < GAUSS_REACH * self.width {
            return Err(domain(format!(
                "off-centre gaussian must vanish at the origin: center {} < {GAUSS_REACH} * width; use `ring`",
                self.center
            )));
        }
        Ok(())
    }

    /// Radius beyond which `u_0` and `u_1` vanish (numerically, for Gaussians).
    pub fn support_radius(&self) -> f64 {
        match self.kind {
            ProfileKind::CompactBump => self.center + self.width,
            ProfileKind::Gaussian | ProfileKind::Ring => self.center + GAUSS_REACH * self.width,
        }
    }

    /// `(u_0(r), ∂_r u_0(r))`.
    pub fn profile(&self, r: f64) -> (f64, f64) {
        let (a, c, w) = (self.amplitude, self.center, self.width);
        match self.kind {
            ProfileKind::CompactBump => {
                let x = (r - c) / w;
                if x.abs() >= 1.0 {
                    (0.0, 0.0)
                } else {
                    let s = 1.0 - x * x;
                    let s3 = s * s * s;
                    (a * s3 * s, a * 4.0 * s3 * (-2.0 * x / w))
                }
            }
            ProfileKind::Gaussian => {
                let x = (r - c) / w;
                let g = (-x * x).exp();
                (a * g, a * g * (-2.0 * x / w))
            }
            ProfileKind::Ring => {
                let x1 = (r - c) / w;
                let x2 = (r + c) / w;
                let g1 = (-x1 * x1).exp();
                let g2 = (-x2 * x2).exp();
                (a * (g1 + g2), a * (-2.0 * x1 / w * g1 - 2.0 * x2 / w * g2))
            }
        }
    }

    /// `(u_0(r), u_1(r))` for a space dimension `d`.
    pub fn sample(&self, r: f64, d: usize) -> (f64, f64) {
        let (u, ur) = self.profile(r);
        let v = match self.velocity_profile {
            VelocityProfile::Zero | VelocityProfile::TimeSymmetric => 0.0,
            VelocityProfile::OutgoingBiased => -ur - (d as f64 - 1.0) / 2.0 * u / r,
        };
        (u, v)
    }

    /// Cell-centre samples at `t = 0`.
    pub fn discretize(&self, grid: &RadialGrid) -> FieldState {
        let d = grid.dim();
        let (u, v): (Vec<f64>, Vec<f64>) = grid.centers().iter().map(|&r| self.sample(r, d)).unzip();
        FieldState { t: 0.0, u, v }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_is_compact_and_smooth() {
        let b = InitialData::compact_bump(2.0, 0.0, 1.5).unwrap();
        assert_eq!(b.profile(0.0), (2.0, 0.0));
        assert_eq!(b.profile(1.5), (0.0, 0.0));
        assert_eq!(b.profile(7.0), (0.0, 0.0));
        let (r, eps) = (0.7, 1e-6);
        let fd = (b.profile(r + eps).0 - b.profile(r - eps).0) / (2.0 * eps);
        assert!((fd - b.profile(r).1).abs() < 1e-8);
    }

    #[test]
    fn ring_derivative_matches() {
        let g = InitialData::ring(1.0, 3.0, 0.5).unwrap();
        let (r, eps) = (2.8, 1e-6);
        let fd = (g.profile(r + eps).0 - g.profile(r - eps).0) / (2.0 * eps);
        assert!((fd - g.profile(r).1).abs() < 1e-7);
        assert!(g.profile(0.0).1.abs() < 1e-14);
    }

    #[test]
    fn validation() {
        assert!(InitialData::compact_bump(1.0, 0.5, 1.0).is_err());
        assert!(InitialData::compact_bump(1.0, 3.0, 1.0).is_ok());
        assert!(InitialData::gaussian(1.0, 0.0, 0.0).is_err());
        assert!(InitialData::gaussian(1.0, 1.0, 1.0).is_err());
        assert!(InitialData::ring(1.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn outgoing_velocity() {
        let g = InitialData::gaussian(1.0, 0.0, 1.0)
            .unwrap()
            .with_velocity(VelocityProfile::OutgoingBiased);
        let r = 0.8;
        let (u, ur) = g.profile(r);
        let (_, v) = g.sample(r, 5);
        assert!((v + ur + 2.0 * u / r).abs() < 1e-15);
    }
}
