//! One-dimensional coefficient inverse problem by convexification.
//!
//! For each antenna the scattered trace `f(t)` of the 1-D impulse problem
//!
//! ```text
//! b(ρ) U_tt = U_ρρ,   U(ρ, 0) = 0,   U_t(ρ, 0) = δ(ρ)
//! ```
//!
//! is turned into a boundary value problem for a function `q(ξ, t)` on the
//! rectangle `R = (0, a) × (0, T1)` of travel-time coordinates
//! `ξ(ρ) = ∫₀^ρ √b`. The unknown potential is read off the `t = 0` row as
//! `r(ξ) = 4 q_ξ(ξ, 0)`, and `q` solves
//!
//! ```text
//! q_ξξ − 2 q_ξt + 4 q_ξ(ξ, 0) q = 0,   q(0, t) = s0(t),   q_ξ(0, t) = s1(t),   q_ξ(a, t) = 0.
//! ```
//!
//! The discrete problem is solved by minimizing the Carleman-weighted
//! Tikhonov functional in [`CarlemanFunctional`]. The weight
//! `φ = exp(−2λ(ξ + α t))` is what makes the functional convex on bounded
//! sets for large enough λ.
//!
//! Finally `b` is recovered from `r` through `S = b^{-1/4}`, which satisfies
//! `S'' = r S + 2 S'²/S` and `dρ/dξ = S²`.

mod descent;
mod functional;
mod invert;
mod profile;

pub use descent::{armijo_descent, DescentMetric, DescentOptions, DescentReport, Objective};
pub use functional::CarlemanFunctional;
pub use invert::{
    invert_one_antenna, invert_scaled, minimize, prepare_trace, results_csv, AntennaInversion, InversionSetup, StartKind,
};
pub use profile::{forward_map_b_to_r, reconstruct_b, reconstruct_b_scaled, ForwardMap, SlantWindow};

use crate::error::{Error, Result};
use crate::scene::{Profile1D, ProfileLabel};
use serde::{Deserialize, Serialize};

/// Parameters of the Carleman-weighted functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarlemanParams {
    /// Carleman parameter λ.
    pub lambda: f64,
    /// Weight slope α in `t`, in `(0, 1/2)`.
    pub alpha: f64,
    /// Tikhonov regularization γ.
    pub gamma: f64,
}

impl Default for CarlemanParams {
    fn default() -> Self {
        CarlemanParams {
            lambda: 2.0,
            alpha: 0.49,
            gamma: 1e-8,
        }
    }
}

impl CarlemanParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::param("lambda", "must be non-negative"));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::param("alpha", "must lie in (0, 1/2)"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::param("gamma", "must be non-negative"));
        }
        Ok(())
    }
}

/// `φ_λ(ξ, t) = exp(−2λ(ξ + α t))`.
pub fn carleman_weight(params: &CarlemanParams, xi: f64, t: f64) -> f64 {
    (-2.0 * params.lambda * (xi + params.alpha * t)).exp()
}

/// Extents and steps of the computational rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Number of ξ cells; `a = nx·Δξ`.
    pub nx: usize,
    /// Number of t cells; `T1 = nt·Δt`.
    pub nt: usize,
    pub d_xi: f64,
    pub d_t: f64,
}

impl GridSpec {
    /// Rectangle for an a-priori bound `b ≤ b̄`: `a = √b̄` and `T1 = 2√b̄`,
    /// both rounded up to whole cells.
    pub fn from_bound(b_bar: f64, d_xi: f64, d_t: f64) -> Result<Self> {
        if !(b_bar >= 1.0) {
            return Err(Error::param("b_bar", "must be at least 1"));
        }
        if !(d_xi > 0.0 && d_t > 0.0) {
            return Err(Error::param("d_xi", "grid steps must be positive"));
        }
        let root = b_bar.sqrt();
        let nx = (root / d_xi - 1e-9).ceil().max(2.0) as usize;
        let nt = (2.0 * root / d_t - 1e-9).ceil().max(2.0) as usize;
        Ok(GridSpec { nx, nt, d_xi, d_t })
    }

    pub fn a(&self) -> f64 {
        self.nx as f64 * self.d_xi
    }

    pub fn t1(&self) -> f64 {
        self.nt as f64 * self.d_t
    }
}

/// Lateral data of the q-problem on `t_j = j·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub dt: f64,
    /// `q(0, t)`.
    pub s0: Vec<f64>,
    /// `q_ξ(0, t)`.
    pub s1: Vec<f64>,
}

impl BoundaryData {
    pub fn len(&self) -> usize {
        self.s0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s0.is_empty()
    }

    pub fn t_grid(&self) -> Vec<f64> {
        (0..self.len()).map(|j| j as f64 * self.dt).collect()
    }
}

/// Second-order derivative of uniform samples, one-sided at the ends.
pub(crate) fn derivative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|j| {
            if j == 0 {
                (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
            } else if j == n - 1 {
                (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h)
            } else {
                (f[j + 1] - f[j - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Boundary data from the scattered trace `f` sampled on `t_j = j·dt`.
///
/// With `w = ∂_t` of the travel-time-shifted field, `q(0, t) = f'(t)` and
/// `q_ξ(0, t) = 2 f''(t)`; derivatives use central differences, one-sided
/// second-order at the ends.
pub fn build_boundary_data(f: &[f64], dt: f64) -> Result<BoundaryData> {
    if f.len() < 3 {
        return Err(Error::param("f", "need at least 3 samples"));
    }
    if !(dt > 0.0) {
        return Err(Error::param("dt", "must be positive"));
    }
    let s0 = derivative(f, dt);
    let s1: Vec<f64> = derivative(&s0, dt).into_iter().map(|v| 2.0 * v).collect();
    Ok(BoundaryData { dt, s0, s1 })
}

/// Nodal values of `q` on the rectangle, row `i` (ξ) major.
///
/// Row 0 carries the pinned data `s0`; `s1` is kept for the ghost row that
/// realizes `q_ξ(0, t) = s1`.
#[derive(Debug, Clone, PartialEq)]
pub struct QGrid {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub s1: Vec<f64>,
}

impl QGrid {
    /// Grid with row 0 pinned to `data.s0` and zero elsewhere.
    pub fn pinned(grid: GridSpec, data: &BoundaryData) -> Result<Self> {
        if data.len() != grid.nt + 1 {
            return Err(Error::ShapeMismatch(format!(
                "boundary data has {} samples, grid needs {}",
                data.len(),
                grid.nt + 1
            )));
        }
        let mut values = vec![0.0; (grid.nx + 1) * (grid.nt + 1)];
        values[..grid.nt + 1].copy_from_slice(&data.s0);
        Ok(QGrid {
            grid,
            values,
            s1: data.s1.clone(),
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * (self.grid.nt + 1) + j]
    }

    /// Free unknowns (rows 1..=nx), flattened.
    pub fn interior(&self) -> &[f64] {
        &self.values[self.grid.nt + 1..]
    }

    pub fn set_interior(&mut self, x: &[f64]) {
        let off = self.grid.nt + 1;
        self.values[off..].copy_from_slice(x);
    }

    /// Discrete L² norm `(ΔξΔt Σ q²)^{1/2}` over all nodes.
    pub fn norm(&self) -> f64 {
        (self.grid.d_xi * self.grid.d_t * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }
}

/// `r(ξ) = 4 q_ξ(ξ, 0)`: central differences inside, second-order one-sided
/// differences at `ξ = 0` and `ξ = a`.
pub fn extract_r(q: &QGrid) -> Profile1D {
    let row: Vec<f64> = (0..=q.grid.nx).map(|i| q.get(i, 0)).collect();
    let d = derivative(&row, q.grid.d_xi);
    Profile1D {
        start: 0.0,
        step: q.grid.d_xi,
        values: d.into_iter().map(|v| 4.0 * v).collect(),
        label: ProfileLabel::R,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_values() {
        let p = CarlemanParams::default();
        assert_eq!(carleman_weight(&p, 0.0, 0.0), 1.0);
        assert!((carleman_weight(&p, 1.0, 1.0) - (-5.96f64).exp()).abs() < 1e-15);
        assert!(carleman_weight(&p, 0.5, 0.2) > carleman_weight(&p, 0.6, 0.2));
        assert!(carleman_weight(&p, 0.5, 0.2) > carleman_weight(&p, 0.5, 0.3));
    }

    #[test]
    fn grid_from_bound() {
        let g = GridSpec::from_bound(10.0, 0.01, 0.02).unwrap();
        assert_eq!(g.nx, 317);
        assert_eq!(g.nt, 317);
        assert!(g.a() >= 10f64.sqrt() && g.t1() >= 2.0 * 10f64.sqrt());
    }

    #[test]
    fn boundary_data_zero_and_exponential() {
        let z = build_boundary_data(&[0.0; 10], 0.1).unwrap();
        assert!(z.s0.iter().chain(&z.s1).all(|v| *v == 0.0));
        assert!(build_boundary_data(&[1.0, 2.0], 0.1).is_err());
        let h = 1e-3;
        let f: Vec<f64> = (0..2001).map(|j| (j as f64 * h).exp()).collect();
        let d = build_boundary_data(&f, h).unwrap();
        for j in [5, 500, 1000, 1995] {
            let t = j as f64 * h;
            assert!((d.s1[j] - 2.0 * t.exp()).abs() < 10.0 * h * h * t.exp(), "{j}");
        }
    }

    #[test]
    fn extract_r_linear_and_constant_rows() {
        let g = GridSpec {
            nx: 10,
            nt: 4,
            d_xi: 0.1,
            d_t: 0.1,
        };
        let mut q = QGrid {
            grid: g,
            values: vec![0.0; 55],
            s1: vec![1.0; 5],
        };
        for i in 0..=10 {
            for j in 0..=4 {
                q.values[i * 5 + j] = i as f64 * 0.1;
            }
        }
        assert!(extract_r(&q).values.iter().all(|r| (r - 4.0).abs() < 1e-12));
        q.values.iter_mut().for_each(|v| *v = 3.0);
        assert!(extract_r(&q).values.iter().all(|r| r.abs() < 1e-12));
    }
}
