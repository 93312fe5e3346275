//! Born-approximation baseline.
//!
//! Linearizing the volume integral equation around the incident field gives
//! a first-kind equation for the contrast `b = ε_r − 1`:
//!
//! ```text
//! A(b)(x, x0, k) = k² Σ_j vol · G_k(x, η_j) v0(η_j, x0, k) b_j = h(x, x0, k)
//! ```
//!
//! with `h = v − v0` at receivers `x` and transmitters `x0` on the antenna
//! track. It is solved in the Tikhonov sense with a discrete H¹ penalty by
//! conjugate gradients on the real normal equations.

use crate::error::{Error, Result};
use crate::forward::{green, incident_on, DiskQuadrature, ScatteredField, VoxelGrid};
use crate::linalg::{conjugate_gradient, golden_section, median, KrylovReport};
use crate::postprocess::SlantRangeImage;
use crate::scene::{dist, Point, Pulse, ScanGeometry};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt::Write as _;

type C = Complex64;

/// Discretized Born operator and its data.
#[derive(Debug, Clone)]
pub struct BornSystem {
    pub grid: VoxelGrid,
    pub points: Vec<Point>,
    pub wavenumbers: Vec<f64>,
    pub antennas: usize,
    /// `v0(η_j, x0_tx, k)` at `[(tx·n_k + ik)·n_vox + j]`.
    incident: Vec<C>,
    /// `k² vol G_k(x_rx, η_j)` at `[(rx·n_k + ik)·n_vox + j]`.
    kernel: Vec<C>,
    /// `h` at `[(tx·n_k + ik)·N + rx]`, the layout of [`ScatteredField`].
    pub data: Vec<C>,
}

/// Builds the operator on `grid` for the antennas and band of `field`,
/// whose scattered data become `h`. `radial × angular` is the dish rule.
pub fn assemble_born(
    field: &ScatteredField,
    geom: &ScanGeometry,
    pulse: &Pulse,
    grid: VoxelGrid,
    radial: usize,
    angular: usize,
) -> Result<BornSystem> {
    let n = field.count();
    let ks = field.band.wavenumbers();
    if field.data.len() != n * ks.len() * n {
        return Err(Error::ShapeMismatch("scattered field does not match its band".into()));
    }
    let antennas: Vec<Point> = field.positions.iter().map(|x| [*x, 0.0, 0.0]).collect();
    let points: Vec<Point> = (0..grid.len()).map(|i| grid.center(grid.unravel(i))).collect();
    for a in &antennas {
        if let Some(p) = points.iter().find(|p| dist(a, p) < geom.dish) {
            return Err(Error::QuadratureDegeneracy {
                distance: dist(a, p),
                minimum: geom.dish,
            });
        }
    }
    let nv = points.len();
    let nk = ks.len();
    let vol = grid.volume();
    let dishes: Vec<DiskQuadrature> = antennas.iter().map(|a| DiskQuadrature::new(geom, a, radial, angular)).collect();
    let blocks: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..nk).map(move |ik| (a, ik))).collect();
    let incident: Vec<C> = blocks
        .par_iter()
        .flat_map_iter(|&(tx, ik)| {
            let k = ks[ik];
            incident_on(&points, &dishes[tx], pulse.spectrum(k * geom.c0), k)
        })
        .collect();
    let kernel: Vec<C> = blocks
        .par_iter()
        .flat_map_iter(|&(rx, ik)| {
            let k = ks[ik];
            let a = antennas[rx];
            points.iter().map(move |p| green(k, dist(&a, p)) * (k * k * vol)).collect::<Vec<_>>()
        })
        .collect();
    debug_assert_eq!(incident.len(), n * nk * nv);
    Ok(BornSystem {
        grid,
        points,
        wavenumbers: ks,
        antennas: n,
        incident,
        kernel,
        data: field.data.clone(),
    })
}

impl BornSystem {
    pub fn voxels(&self) -> usize {
        self.points.len()
    }

    fn nk(&self) -> usize {
        self.wavenumbers.len()
    }

    /// `A(b)`, laid out like the data.
    pub fn apply(&self, b: &[f64]) -> Vec<C> {
        let (n, nk, nv) = (self.antennas, self.nk(), self.voxels());
        let mut out = vec![C::new(0.0, 0.0); n * nk * n];
        out.par_chunks_mut(n).enumerate().for_each(|(blk, row)| {
            let ik = blk % nk;
            let v0 = &self.incident[blk * nv..(blk + 1) * nv];
            let u: Vec<C> = v0.iter().zip(b).map(|(v, b)| v * *b).collect();
            for (rx, o) in row.iter_mut().enumerate() {
                let g = &self.kernel[(rx * nk + ik) * nv..(rx * nk + ik + 1) * nv];
                *o = g.iter().zip(&u).map(|(g, u)| g * u).sum();
            }
        });
        out
    }

    /// Exact adjoint `A* y` (conjugate transpose of the discrete rule).
    pub fn adjoint(&self, y: &[C]) -> Vec<C> {
        let (n, nk, nv) = (self.antennas, self.nk(), self.voxels());
        let partial: Vec<Vec<C>> = (0..n * nk)
            .into_par_iter()
            .map(|blk| {
                let ik = blk % nk;
                let v0 = &self.incident[blk * nv..(blk + 1) * nv];
                let mut w = vec![C::new(0.0, 0.0); nv];
                for rx in 0..n {
                    let yv = y[blk * n + rx];
                    let g = &self.kernel[(rx * nk + ik) * nv..(rx * nk + ik + 1) * nv];
                    w.iter_mut().zip(g).for_each(|(w, g)| *w += g.conj() * yv);
                }
                w.iter_mut().zip(v0).for_each(|(w, v)| *w *= v.conj());
                w
            })
            .collect();
        let mut out = vec![C::new(0.0, 0.0); nv];
        for p in partial {
            out.iter_mut().zip(&p).for_each(|(o, v)| *o += v);
        }
        out
    }

    /// `Σ b_j²` plus squared first differences along each axis.
    pub fn h1_apply(&self, b: &[f64], out: &mut [f64]) {
        let d = self.grid.dims;
        out.copy_from_slice(b);
        for idx in 0..b.len() {
            let c = self.grid.unravel(idx);
            for a in 0..3 {
                if c[a] + 1 < d[a] {
                    let mut n = c;
                    n[a] += 1;
                    let j = self.grid.index(n);
                    let diff = b[j] - b[idx];
                    out[j] += diff;
                    out[idx] -= diff;
                }
            }
        }
    }

    /// Mean diagonal of `Re(A*A)`, the natural scale of β.
    pub fn normal_scale(&self) -> f64 {
        let (n, nk, nv) = (self.antennas, self.nk(), self.voxels());
        let mut s = 0.0;
        for tx in 0..n {
            for ik in 0..nk {
                for rx in 0..n {
                    let v0 = &self.incident[(tx * nk + ik) * nv..(tx * nk + ik + 1) * nv];
                    let g = &self.kernel[(rx * nk + ik) * nv..(rx * nk + ik + 1) * nv];
                    s += v0.iter().zip(g).map(|(v, g)| (v * g).norm_sqr()).sum::<f64>();
                }
            }
        }
        s / nv as f64
    }

    /// The same system with data scaled by `c`.
    pub fn with_data_scaled(&self, c: f64) -> BornSystem {
        BornSystem {
            data: self.data.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }
}

/// Voxel contrast from [`solve_born`].
#[derive(Debug, Clone, PartialEq)]
pub struct BornSolution {
    pub b: Vec<f64>,
    pub beta: f64,
    pub report: KrylovReport,
}

/// Minimizes `‖A(b) − h‖² + β (‖b‖² + ‖∇_h b‖²)` over real `b` by CG on
/// `(Re A*A + β H) b = Re A* h`, relative tolerance 1e-8, at most 2000
/// iterations.
pub fn solve_born(system: &BornSystem, beta: f64) -> Result<BornSolution> {
    if !(beta > 0.0) {
        return Err(Error::param("beta", "must be positive"));
    }
    let rhs: Vec<f64> = system.adjoint(&system.data).iter().map(|z| z.re).collect();
    let mut b = vec![0.0; system.voxels()];
    let mut reg = vec![0.0; system.voxels()];
    let report = conjugate_gradient(
        |x, out| {
            let ata = system.adjoint(&system.apply(x));
            system.h1_apply(x, &mut reg);
            for ((o, a), r) in out.iter_mut().zip(&ata).zip(&reg) {
                *o = a.re + beta * r;
            }
        },
        &rhs,
        &mut b,
        1e-8,
        2000,
    )?;
    Ok(BornSolution { b, beta, report })
}

impl BornSolution {
    /// `ε̃ = 1 + b`.
    pub fn eps(&self) -> Vec<f64> {
        self.b.iter().map(|b| 1.0 + b).collect()
    }

    pub fn max_eps(&self) -> f64 {
        self.b.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0
    }

    /// Voxels of the largest 6-connected component with `ε̃ > 1 + floor`.
    pub fn target_voxels(&self, grid: &VoxelGrid, floor: f64) -> Vec<usize> {
        let above = |i: usize| self.b[i] > floor;
        let mut seen = vec![false; self.b.len()];
        let mut best: Vec<usize> = vec![];
        for s in 0..self.b.len() {
            if seen[s] || !above(s) {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![];
            let mut q = VecDeque::from([s]);
            while let Some(c) = q.pop_front() {
                comp.push(c);
                let g = grid.unravel(c);
                for a in 0..3 {
                    for up in [false, true] {
                        if (!up && g[a] == 0) || (up && g[a] + 1 >= grid.dims[a]) {
                            continue;
                        }
                        let mut nb = g;
                        if up {
                            nb[a] += 1;
                        } else {
                            nb[a] -= 1;
                        }
                        let j = grid.index(nb);
                        if !seen[j] && above(j) {
                            seen[j] = true;
                            q.push_back(j);
                        }
                    }
                }
            }
            if comp.len() > best.len() {
                best = comp;
            }
        }
        best
    }

    /// Median `ε̃` over [`BornSolution::target_voxels`].
    pub fn target_median(&self, grid: &VoxelGrid, floor: f64) -> Result<f64> {
        let cells = self.target_voxels(grid, floor);
        median(&cells.iter().map(|&i| 1.0 + self.b[i]).collect::<Vec<_>>())
            .ok_or_else(|| Error::EmptyRegion("no Born voxel above the floor".into()))
    }

    /// `x,y,z,eps` per voxel.
    pub fn to_csv(&self, points: &[Point]) -> String {
        let mut s = String::from("x,y,z,eps\n");
        for (p, b) in points.iter().zip(&self.b) {
            let _ = writeln!(s, "{:?},{:?},{:?},{:?}", p[0], p[1], p[2], 1.0 + b);
        }
        s
    }

    /// Slant-range rendering: each voxel lands at `(x, √(y² + z²))` on a
    /// grid of the voxel pitch, keeping the largest value per cell and 1 in
    /// empty cells.
    pub fn slant_image(&self, grid: &VoxelGrid, points: &[Point]) -> SlantRangeImage {
        let h = grid.pitch;
        let rho: Vec<f64> = points.iter().map(|p| p[1].hypot(p[2])).collect();
        let lo = rho.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let nr = ((hi - lo) / h).round() as usize + 1;
        let nx = grid.dims[0];
        let x_grid: Vec<f64> = (0..nx).map(|i| grid.origin[0] + i as f64 * h).collect();
        let rho_grid: Vec<f64> = (0..nr).map(|i| lo + i as f64 * h).collect();
        let mut values = vec![f64::NEG_INFINITY; nx * nr];
        for (idx, b) in self.b.iter().enumerate() {
            let i = (((rho[idx] - lo) / h).round() as usize).min(nr - 1);
            let j = grid.unravel(idx)[0];
            values[i * nx + j] = values[i * nx + j].max(1.0 + b);
        }
        values.iter_mut().filter(|v| v.is_infinite()).for_each(|v| *v = 1.0);
        SlantRangeImage {
            x_grid,
            rho_grid,
            values,
        }
    }
}

/// Outcome of [`calibrate_beta`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaCalibration {
    pub beta: f64,
    pub achieved_max: f64,
    pub target_max: f64,
}

/// Golden-section search on `log10 β` for the β at which the largest
/// reconstructed `ε̃` on the reference system equals `target_max` within
/// `tol`. `current` is tried first and kept if it already fits. The range
/// spans ten decades below to two above the mean diagonal of `Re A*A`.
pub fn calibrate_beta(reference: &BornSystem, target_max: f64, current: f64, tol: f64) -> Result<BetaCalibration> {
    let eval = |beta: f64| solve_born(reference, beta).map(|s| s.max_eps());
    if current > 0.0 {
        if let Ok(m) = eval(current) {
            if (m - target_max).abs() <= tol {
                return Ok(BetaCalibration {
                    beta: current,
                    achieved_max: m,
                    target_max,
                });
            }
        }
    }
    let centre = reference.normal_scale().max(f64::MIN_POSITIVE).log10();
    let (lo, hi) = (centre - 10.0, centre + 2.0);
    let mut best = (f64::NAN, f64::NAN, f64::INFINITY);
    golden_section(
        |lb| {
            let beta = 10f64.powf(lb);
            match eval(beta) {
                Ok(m) => {
                    let d = (m - target_max).abs();
                    if d < best.2 {
                        best = (beta, m, d);
                    }
                    d
                }
                Err(_) => f64::INFINITY,
            }
        },
        lo,
        hi,
        60,
        tol,
    );
    if !(best.2 <= tol) {
        return Err(Error::Bracket {
            target: target_max,
            lo: 10f64.powf(lo),
            hi: 10f64.powf(hi),
            best: best.1,
        });
    }
    Ok(BetaCalibration {
        beta: best.0,
        achieved_max: best.1,
        target_max,
    })
}
