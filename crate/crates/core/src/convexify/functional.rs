//! Discrete Carleman-weighted Tikhonov functional
//!
//! ```text
//! J(q) = Σ_ij φ_λ(ξ_i, t_j) G_h(q)_ij² ΔξΔt + γ ΔξΔt Σ (derivatives of q up to order 2)²
//! ```
//!
//! `G_h` is evaluated at every node of the rectangle. The ξ-derivatives use
//! the ghost rows `q_{-1,j} = q_{1,j} − 2Δξ s1_j` and `q_{nx+1,j} = q_{nx−1,j}`;
//! `q_ξt` uses central differences in t with second-order one-sided stencils
//! on the rows `t = 0` and `t = T1`, which keeps the `t = 0` row coupled to
//! its neighbours. The coupling coefficient is `D_i = q_ξ(ξ_i, 0)` from the
//! same ghost convention, so `D_0 = s1_0` and `D_nx = 0`.

use super::{carleman_weight, BoundaryData, CarlemanParams, GridSpec, QGrid};
use crate::error::{Error, Result};
use crate::sparse::{weighted_gram, Cholesky, Csr, LowerCsc};
use std::sync::Mutex;

/// Assembled functional for fixed boundary data and parameters.
pub struct CarlemanFunctional {
    pub grid: GridSpec,
    pub params: CarlemanParams,
    /// Include the nonlinear term `4 q_ξ(ξ, 0) q`. Without it the functional
    /// is quadratic.
    pub coupling: bool,
    s0: Vec<f64>,
    s1: Vec<f64>,
    lin: Csr,
    lin_const: Vec<f64>,
    pen: Csr,
    pen_const: Vec<f64>,
    weights: Vec<f64>,
    pen_weights: Vec<f64>,
    symbolic: Mutex<Option<Cholesky>>,
}

struct Assembler<'a> {
    grid: &'a GridSpec,
    s0: &'a [f64],
    s1: &'a [f64],
}

impl Assembler<'_> {
    fn col(&self, i: usize, j: usize) -> usize {
        (i - 1) * (self.grid.nt + 1) + j
    }

    /// Adds `v·q[i][j]` to a row, resolving pinned and ghost nodes.
    fn add(&self, i: isize, j: usize, v: f64, row: &mut Vec<(usize, f64)>, cst: &mut f64) {
        let nx = self.grid.nx as isize;
        if i == 0 {
            *cst += v * self.s0[j];
        } else if i == -1 {
            self.add(1, j, v, row, cst);
            *cst -= 2.0 * self.grid.d_xi * self.s1[j] * v;
        } else if i == nx + 1 {
            self.add(nx - 1, j, v, row, cst);
        } else {
            row.push((self.col(i as usize, j), v));
        }
    }
}

/// t-difference stencil of `∂_t` at row `j` of `0..=nt`.
fn dt_stencil(j: usize, nt: usize, dt: f64) -> [(usize, f64); 3] {
    let h = 2.0 * dt;
    if j == 0 {
        [(0, -3.0 / h), (1, 4.0 / h), (2, -1.0 / h)]
    } else if j == nt {
        [(nt, 3.0 / h), (nt - 1, -4.0 / h), (nt - 2, 1.0 / h)]
    } else {
        [(j + 1, 1.0 / h), (j - 1, -1.0 / h), (j, 0.0)]
    }
}

impl CarlemanFunctional {
    pub fn new(grid: GridSpec, data: &BoundaryData, params: CarlemanParams, coupling: bool) -> Result<Self> {
        params.validate()?;
        if grid.nx < 2 || grid.nt < 2 {
            return Err(Error::param("grid", "need at least 2 cells per direction"));
        }
        if data.len() != grid.nt + 1 {
            return Err(Error::ShapeMismatch(format!(
                "boundary data has {} samples, grid needs {}",
                data.len(),
                grid.nt + 1
            )));
        }
        let (nx, nt) = (grid.nx, grid.nt);
        let (dxi, dt) = (grid.d_xi, grid.d_t);
        let nu = nx * (nt + 1);
        let asm = Assembler {
            grid: &grid,
            s0: &data.s0,
            s1: &data.s1,
        };
        let mut lin = Csr::new(nu);
        let mut lin_const = Vec::with_capacity((nx + 1) * (nt + 1));
        let mut weights = Vec::with_capacity((nx + 1) * (nt + 1));
        let mut row = Vec::new();
        for i in 0..=nx as isize {
            for j in 0..=nt {
                let mut c = 0.0;
                let h2 = 1.0 / (dxi * dxi);
                asm.add(i + 1, j, h2, &mut row, &mut c);
                asm.add(i, j, -2.0 * h2, &mut row, &mut c);
                asm.add(i - 1, j, h2, &mut row, &mut c);
                for (jj, w) in dt_stencil(j, nt, dt) {
                    if w != 0.0 {
                        asm.add(i + 1, jj, -2.0 * w / (2.0 * dxi), &mut row, &mut c);
                        asm.add(i - 1, jj, 2.0 * w / (2.0 * dxi), &mut row, &mut c);
                    }
                }
                if i == 0 {
                    c += 4.0 * data.s1[0] * data.s0[j];
                }
                lin.push_row(&mut row);
                lin_const.push(c);
                weights.push(carleman_weight(&params, i as f64 * dxi, j as f64 * dt) * dxi * dt);
            }
        }
        let mut pen = Csr::new(nu);
        let mut pen_const = Vec::new();
        let mut push = |terms: &[(isize, usize, f64)], pen: &mut Csr, row: &mut Vec<(usize, f64)>| {
            let mut c = 0.0;
            for &(i, j, v) in terms {
                asm.add(i, j, v, row, &mut c);
            }
            pen.push_row(row);
            pen_const.push(c);
        };
        for i in 0..=nx {
            let ii = i as isize;
            for j in 0..=nt {
                push(&[(ii, j, 1.0)], &mut pen, &mut row);
                if i < nx {
                    push(&[(ii + 1, j, 1.0 / dxi), (ii, j, -1.0 / dxi)], &mut pen, &mut row);
                }
                if j < nt {
                    push(&[(ii, j + 1, 1.0 / dt), (ii, j, -1.0 / dt)], &mut pen, &mut row);
                }
                if i > 0 && i < nx {
                    let h = 1.0 / (dxi * dxi);
                    push(&[(ii + 1, j, h), (ii, j, -2.0 * h), (ii - 1, j, h)], &mut pen, &mut row);
                }
                if j > 0 && j < nt {
                    let h = 1.0 / (dt * dt);
                    push(&[(ii, j + 1, h), (ii, j, -2.0 * h), (ii, j - 1, h)], &mut pen, &mut row);
                }
                if i < nx && j < nt {
                    let h = 1.0 / (dxi * dt);
                    push(
                        &[(ii + 1, j + 1, h), (ii + 1, j, -h), (ii, j + 1, -h), (ii, j, h)],
                        &mut pen,
                        &mut row,
                    );
                }
            }
        }
        let pen_weights = vec![params.gamma * dxi * dt; pen.nrows()];
        Ok(CarlemanFunctional {
            grid,
            params,
            coupling,
            s0: data.s0.clone(),
            s1: data.s1.clone(),
            lin,
            lin_const,
            pen,
            pen_const,
            weights,
            pen_weights,
            symbolic: Mutex::new(None),
        })
    }

    /// Number of free unknowns.
    pub fn dim(&self) -> usize {
        self.grid.nx * (self.grid.nt + 1)
    }

    fn q_at(&self, x: &[f64], i: usize, j: usize) -> f64 {
        if i == 0 {
            self.s0[j]
        } else {
            x[(i - 1) * (self.grid.nt + 1) + j]
        }
    }

    /// `D_i = q_ξ(ξ_i, 0)` for `i = 0..=nx`.
    fn coupling_coefficients(&self, x: &[f64]) -> Vec<f64> {
        let nx = self.grid.nx;
        (0..=nx)
            .map(|i| {
                if i == 0 {
                    self.s1[0]
                } else if i == nx {
                    0.0
                } else {
                    (self.q_at(x, i + 1, 0) - self.q_at(x, i - 1, 0)) / (2.0 * self.grid.d_xi)
                }
            })
            .collect()
    }

    /// Residual `G_h(q)` at every node.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.lin.matvec(x);
        g.iter_mut().zip(&self.lin_const).for_each(|(g, c)| *g += c);
        if self.coupling {
            let d = self.coupling_coefficients(x);
            let m = self.grid.nt + 1;
            for i in 1..self.grid.nx {
                for j in 0..m {
                    g[i * m + j] += 4.0 * d[i] * x[(i - 1) * m + j];
                }
            }
        }
        g
    }

    fn penalty_residual(&self, x: &[f64]) -> Vec<f64> {
        let mut h = self.pen.matvec(x);
        h.iter_mut().zip(&self.pen_const).for_each(|(h, c)| *h += c);
        h
    }

    /// Squared discrete H² norm `ΔξΔt Σ (q, q_ξ, q_t, q_ξξ, q_tt, q_ξt)²`.
    pub fn h2_norm_sq(&self, x: &[f64]) -> f64 {
        self.grid.d_xi * self.grid.d_t * self.penalty_residual(x).iter().map(|v| v * v).sum::<f64>()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let g = self.residual(x);
        let data: f64 = g.iter().zip(&self.weights).map(|(g, w)| w * g * g).sum();
        data + self.params.gamma * self.h2_norm_sq(x)
    }

    pub fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let g = self.residual(x);
        let wg: Vec<f64> = g.iter().zip(&self.weights).map(|(g, w)| w * g).collect();
        let h = self.penalty_residual(x);
        let value = wg.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
            + self.pen_weights[0] * h.iter().map(|v| v * v).sum::<f64>();
        let mut grad = self.lin.tmatvec(&wg);
        if self.coupling {
            let d = self.coupling_coefficients(x);
            let m = self.grid.nt + 1;
            let nx = self.grid.nx;
            let inv = 4.0 / (2.0 * self.grid.d_xi);
            for i in 1..nx {
                let mut s = 0.0;
                for j in 0..m {
                    let r = wg[i * m + j];
                    grad[(i - 1) * m + j] += 4.0 * d[i] * r;
                    s += x[(i - 1) * m + j] * r;
                }
                grad[i * m] += inv * s;
                if i >= 2 {
                    grad[(i - 2) * m] -= inv * s;
                }
            }
        }
        let hw: Vec<f64> = h.iter().zip(&self.pen_weights).map(|(h, w)| h * w).collect();
        let pg = self.pen.tmatvec(&hw);
        grad.iter_mut().zip(&pg).for_each(|(g, p)| *g = 2.0 * (*g + p));
        (value, grad)
    }

    /// Jacobian of the residual at `x`.
    pub fn jacobian(&self, x: &[f64]) -> Csr {
        if !self.coupling {
            return self.lin.clone();
        }
        let d = self.coupling_coefficients(x);
        let m = self.grid.nt + 1;
        let nx = self.grid.nx;
        let inv = 4.0 / (2.0 * self.grid.d_xi);
        let mut out = Csr::new(self.dim());
        let mut row = Vec::new();
        for i in 0..=nx {
            for j in 0..m {
                let r = i * m + j;
                let (cols, vals) = self.lin.row(r);
                row.extend(cols.iter().copied().zip(vals.iter().copied()));
                if i >= 1 && i < nx {
                    let qij = x[(i - 1) * m + j];
                    row.push(((i - 1) * m + j, 4.0 * d[i]));
                    row.push((i * m, inv * qij));
                    if i >= 2 {
                        row.push(((i - 2) * m, -inv * qij));
                    }
                }
                out.push_row(&mut row);
            }
        }
        out
    }

    /// Gauss-Newton metric `JᵀWJ + γΔξΔt BᵀB` at `x`.
    pub fn gauss_newton_matrix(&self, x: &[f64]) -> LowerCsc {
        let jac = self.jacobian(x);
        weighted_gram(&[(&jac, &self.weights), (&self.pen, &self.pen_weights)])
    }

    /// Solves `P d = rhs` with the Gauss-Newton metric at `x`.
    pub fn solve_metric(&self, x: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
        let p = self.gauss_newton_matrix(x);
        let mut cache = self.symbolic.lock().unwrap();
        let chol = Cholesky::factor(&p, cache.as_ref())?;
        let d = chol.solve(rhs);
        *cache = Some(chol);
        Ok(d)
    }

    /// Minimizer of the functional without the coupling term, which is a
    /// linear least-squares problem.
    pub fn linearized_start(&self) -> Result<Vec<f64>> {
        let lin_only = CarlemanFunctional {
            coupling: false,
            symbolic: Mutex::new(None),
            grid: self.grid,
            params: self.params,
            s0: self.s0.clone(),
            s1: self.s1.clone(),
            lin: self.lin.clone(),
            lin_const: self.lin_const.clone(),
            pen: self.pen.clone(),
            pen_const: self.pen_const.clone(),
            weights: self.weights.clone(),
            pen_weights: self.pen_weights.clone(),
        };
        let zero = vec![0.0; self.dim()];
        let (_, g) = lin_only.value_and_gradient(&zero);
        let rhs: Vec<f64> = g.iter().map(|v| -0.5 * v).collect();
        lin_only.solve_metric(&zero, &rhs)
    }

    /// Wraps free unknowns into a [`QGrid`].
    pub fn to_qgrid(&self, x: &[f64]) -> QGrid {
        let m = self.grid.nt + 1;
        let mut values = Vec::with_capacity((self.grid.nx + 1) * m);
        values.extend_from_slice(&self.s0);
        values.extend_from_slice(x);
        QGrid {
            grid: self.grid,
            values,
            s1: self.s1.clone(),
        }
    }
}
