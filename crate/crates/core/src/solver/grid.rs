use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::mathlib::{sphere_area, MAX_DIM, MIN_DIM};

/// Cell-centred radial grid on `[0, r_max]` with `n` cells of width `h`.
///
/// Cell `j` covers `[j h, (j+1) h]` with centre `r_j = (j + 1/2) h`. Alongside
/// the centres the grid caches face areas `R_f^{d-1}`, exact shell volumes
/// `V_j = (R_{j+1}^d - R_j^d)/d` (without the sphere factor) used by the
/// scheme, and the midpoint quadrature weights `r_j^{d-1} h` used by the
/// diagnostics.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    d: usize,
    h: f64,
    n: usize,
    omega: f64,
    centers: Vec<f64>,
    face_areas: Vec<f64>,
    volumes: Vec<f64>,
    weights: Vec<f64>,
}

/// Serializable description of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub n: usize,
    pub r_max: f64,
}

impl RadialGrid {
    pub fn new(d: usize, n: usize, r_max: f64) -> Result<Self> {
        if !(MIN_DIM..=MAX_DIM).contains(&d) {
            return Err(domain(format!("dimension {d} outside {MIN_DIM}..={MAX_DIM}")));
        }
        if n < 4 {
            return Err(domain(format!("grid needs at least 4 cells, got {n}")));
        }
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(domain(format!("r_max = {r_max} must be positive and finite")));
        }
        let h = r_max / n as f64;
        let di = d as i32;
        let df = d as f64;
        let centers: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) * h).collect();
        let face_areas = (0..=n).map(|f| (f as f64 * h).powi(di - 1)).collect();
        let volumes = (0..n)
            .map(|j| (((j + 1) as f64 * h).powi(di) - (j as f64 * h).powi(di)) / df)
            .collect();
        let weights = centers.iter().map(|r| r.powi(di - 1) * h).collect();
        Ok(Self {
            d,
            h,
            n,
            omega: sphere_area(d)?,
            centers,
            face_areas,
            volumes,
            weights,
        })
    }

    pub fn from_spec(spec: GridSpec) -> Result<Self> {
        Self::new(spec.d, spec.n, spec.r_max)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            d: self.d,
            n: self.n,
            r_max: self.r_max(),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r_max(&self) -> f64 {
        self.h * self.n as f64
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// `R_f^{d-1}` for faces `f = 0..=n`.
    pub fn face_areas(&self) -> &[f64] {
        &self.face_areas
    }

    /// Shell volumes divided by the sphere area.
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Midpoint weights `r_j^{d-1} h` (without the sphere factor).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index of the cell containing `r` (clamped to the grid).
    pub fn cell_of(&self, r: f64) -> usize {
        ((r / self.h).floor().max(0.0) as usize).min(self.n - 1)
    }

    pub(crate) fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::Contract(format!(
                "{what}: {len} samples for a grid of {} cells",
                self.n
            )));
        }
        Ok(())
    }

    /// Upper bound on the spectral radius of the discrete Laplacian, from
    /// Gershgorin discs of its volume-symmetrized form.
    pub fn laplacian_bound(&self) -> f64 {
        let h = self.h;
        let a = &self.face_areas;
        let v = &self.volumes;
        let n = self.n;
        let mut worst = 0.0f64;
        for j in 0..n {
            let mut row;
            if j + 1 < n {
                row = a[j + 1] / (h * v[j]) + a[j + 1] / (h * (v[j] * v[j + 1]).sqrt());
            } else {
                row = 2.0 * a[n] / (h * v[j]);
            }
            if j > 0 {
                row += a[j] / (h * v[j]) + a[j] / (h * (v[j] * v[j - 1]).sqrt());
            }
            worst = worst.max(row);
        }
        worst
    }

    /// Largest `dt / h` for which leapfrog on this grid is guaranteed stable
    /// (linear part).
    pub fn cfl_limit(&self) -> f64 {
        2.0 / (self.h * self.laplacian_bound().sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn volumes_sum_to_ball() {
        for d in 3..=9 {
            let g = RadialGrid::new(d, 64, 2.0).unwrap();
            let total: f64 = g.volumes().iter().sum();
            assert_relative_eq!(total, 2f64.powi(d as i32) / d as f64, max_relative = 1e-13);
        }
    }

    #[test]
    fn cfl_limits_are_dimension_dependent() {
        let mut prev = f64::INFINITY;
        for d in 3..=9 {
            let lim = RadialGrid::new(d, 512, 8.0).unwrap().cfl_limit();
            assert!(lim < prev && lim > 0.6 && lim < 1.0, "d = {d}: {lim}");
            prev = lim;
        }
        assert!(RadialGrid::new(5, 512, 8.0).unwrap().cfl_limit() > 0.8);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(RadialGrid::new(2, 64, 1.0).is_err());
        assert!(RadialGrid::new(3, 2, 1.0).is_err());
        assert!(RadialGrid::new(3, 64, -1.0).is_err());
    }
}
