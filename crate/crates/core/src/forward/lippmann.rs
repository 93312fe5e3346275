//! Volume integral equation
//! `v = v0 + k² ∫_Ω G_k(x, η) (ε_r(η) − 1) v(η) dη`
//! discretized by midpoint collocation on a voxel grid.
//!
//! Only voxels with nonzero contrast carry unknowns. The discrete
//! convolution with the Green function runs as a circular convolution on a
//! zero-padded box around them, and the system is solved with restarted
//! GMRES. The singular self-cell uses the integral of G over the ball of the
//! same volume, `(e^{ika}(1 − ika) − 1)/k²`.

use super::band::FrequencyBand;
use super::incident::{green, DiskQuadrature};
use crate::error::{Error, Result};
use crate::linalg::{gmres, KrylovReport};
use crate::scene::{dist, Phantom3D, Point, Pulse, ScanGeometry};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

type C = Complex64;

/// Uniform voxel grid; `origin` is the centre of voxel (0, 0, 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelGrid {
    pub origin: Point,
    pub pitch: f64,
    pub dims: [usize; 3],
}

impl VoxelGrid {
    /// Cube of side `side` centred at `center`, cut into cells of about
    /// `pitch` (the side is kept exact, the pitch adjusted down).
    pub fn covering(center: Point, side: f64, pitch: f64) -> Result<Self> {
        if !(pitch > 0.0 && side > 0.0) {
            return Err(Error::param("voxel_pitch", "pitch and side must be positive"));
        }
        let n = (side / pitch - 1e-9).ceil().max(1.0) as usize;
        let h = side / n as f64;
        let o = |c: f64| c - side / 2.0 + h / 2.0;
        Ok(VoxelGrid {
            origin: [o(center[0]), o(center[1]), o(center[2])],
            pitch: h,
            dims: [n, n, n],
        })
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn volume(&self) -> f64 {
        self.pitch.powi(3)
    }

    pub fn index(&self, i: [usize; 3]) -> usize {
        (i[0] * self.dims[1] + i[1]) * self.dims[2] + i[2]
    }

    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let l = idx % self.dims[2];
        let j = (idx / self.dims[2]) % self.dims[1];
        [idx / (self.dims[1] * self.dims[2]), j, l]
    }

    pub fn center(&self, i: [usize; 3]) -> Point {
        [
            self.origin[0] + i[0] as f64 * self.pitch,
            self.origin[1] + i[1] as f64 * self.pitch,
            self.origin[2] + i[2] as f64 * self.pitch,
        ]
    }
}

/// Voxels of nonzero contrast `ε − 1`.
#[derive(Debug, Clone)]
pub struct Scatterer {
    pub grid: VoxelGrid,
    /// Grid index triples of the support.
    pub cells: Vec<[usize; 3]>,
    pub contrast: Vec<f64>,
    pub points: Vec<Point>,
}

impl Scatterer {
    /// Samples `eps` at voxel centres; rejects `eps < 1`.
    pub fn from_fn(grid: VoxelGrid, eps: impl Fn(&Point) -> f64) -> Result<Self> {
        let mut s = Scatterer {
            grid,
            cells: vec![],
            contrast: vec![],
            points: vec![],
        };
        for idx in 0..grid.len() {
            let c = grid.unravel(idx);
            let x = grid.center(c);
            let e = eps(&x);
            if !(e >= 1.0) {
                return Err(Error::param("eps", format!("contrast must be non-negative, got eps = {e}")));
            }
            if e > 1.0 {
                s.cells.push(c);
                s.contrast.push(e - 1.0);
                s.points.push(x);
            }
        }
        Ok(s)
    }

    pub fn from_phantom(phantom: &Phantom3D, pitch: f64) -> Result<Self> {
        let grid = VoxelGrid::covering(phantom.domain_center, phantom.side, pitch)?;
        Scatterer::from_fn(grid, |x| phantom.eval_eps(x))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    fn bounding_box(&self) -> ([usize; 3], [usize; 3]) {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0; 3];
        for c in &self.cells {
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        (lo, [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1])
    }
}

/// In-place 3-D FFT on a row-major array.
struct Fft3 {
    dims: [usize; 3],
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    fn new(dims: [usize; 3]) -> Self {
        let mut p = FftPlanner::new();
        Fft3 {
            dims,
            fwd: dims.map(|n| p.plan_fft_forward(n)),
            inv: dims.map(|n| p.plan_fft_inverse(n)),
        }
    }

    fn run(&self, data: &mut [C], inverse: bool) {
        let [n0, n1, n2] = self.dims;
        let plans = if inverse { &self.inv } else { &self.fwd };
        plans[2].process(data);
        let mut line = vec![C::new(0.0, 0.0); n1.max(n0)];
        for i in 0..n0 {
            for l in 0..n2 {
                for j in 0..n1 {
                    line[j] = data[(i * n1 + j) * n2 + l];
                }
                plans[1].process(&mut line[..n1]);
                for j in 0..n1 {
                    data[(i * n1 + j) * n2 + l] = line[j];
                }
            }
        }
        for j in 0..n1 {
            for l in 0..n2 {
                for i in 0..n0 {
                    line[i] = data[(i * n1 + j) * n2 + l];
                }
                plans[0].process(&mut line[..n0]);
                for i in 0..n0 {
                    data[(i * n1 + j) * n2 + l] = line[i];
                }
            }
        }
    }
}

/// `(e^{ika}(1 − ika) − 1)/k²`: the integral of `G_k` over a ball of radius
/// `a` centred at the singularity.
pub fn self_cell_integral(k: f64, a: f64) -> C {
    let ika = C::new(0.0, k * a);
    (ika.exp() * (C::new(1.0, 0.0) - ika) - 1.0) / (k * k)
}

/// The discretized operator `v ↦ v − k² P_S K(c v)` at one wavenumber.
pub struct LsOperator<'a> {
    scat: &'a Scatterer,
    k: f64,
    lo: [usize; 3],
    padded: [usize; 3],
    fft: Fft3,
    kernel: Vec<C>,
    slots: Vec<usize>,
}

impl<'a> LsOperator<'a> {
    pub fn new(scat: &'a Scatterer, k: f64) -> Self {
        let (lo, size) = if scat.is_empty() {
            ([0; 3], [1; 3])
        } else {
            scat.bounding_box()
        };
        let padded = size.map(|n| 2 * n);
        let h = scat.grid.pitch;
        let vol = scat.grid.volume();
        let radius = (3.0 * vol / (4.0 * std::f64::consts::PI)).cbrt();
        let [p0, p1, p2] = padded;
        let mut kernel = vec![C::new(0.0, 0.0); p0 * p1 * p2];
        let wrap = |i: usize, p: usize| -> f64 {
            let d = if i <= p / 2 { i as f64 } else { i as f64 - p as f64 };
            d * h
        };
        for i in 0..p0 {
            for j in 0..p1 {
                for l in 0..p2 {
                    let r = (wrap(i, p0).powi(2) + wrap(j, p1).powi(2) + wrap(l, p2).powi(2)).sqrt();
                    kernel[(i * p1 + j) * p2 + l] = if r == 0.0 {
                        self_cell_integral(k, radius)
                    } else {
                        green(k, r) * vol
                    };
                }
            }
        }
        let fft = Fft3::new(padded);
        fft.run(&mut kernel, false);
        let norm = 1.0 / kernel.len() as f64;
        kernel.iter_mut().for_each(|v| *v *= norm);
        let slots = scat
            .cells
            .iter()
            .map(|c| ((c[0] - lo[0]) * p1 + (c[1] - lo[1])) * p2 + (c[2] - lo[2]))
            .collect();
        LsOperator {
            scat,
            k,
            lo,
            padded,
            fft,
            kernel,
            slots,
        }
    }

    /// `(K w)_i = Σ_j K_ij w_j` on the support, with `K_ij = vol·G(x_i − x_j)`
    /// off the diagonal and the ball integral on it.
    pub fn convolve(&self, w: &[C]) -> Vec<C> {
        let mut buf = vec![C::new(0.0, 0.0); self.kernel.len()];
        for (s, v) in self.slots.iter().zip(w) {
            buf[*s] = *v;
        }
        self.fft.run(&mut buf, false);
        buf.iter_mut().zip(&self.kernel).for_each(|(b, k)| *b *= k);
        self.fft.run(&mut buf, true);
        self.slots.iter().map(|s| buf[*s]).collect()
    }

    pub fn apply(&self, v: &[C], out: &mut [C]) {
        let w: Vec<C> = v.iter().zip(&self.scat.contrast).map(|(v, c)| v * c).collect();
        let kw = self.convolve(&w);
        let k2 = self.k * self.k;
        for i in 0..v.len() {
            out[i] = v[i] - kw[i] * k2;
        }
    }

    /// Total field on the support for incident field `v0` there.
    pub fn solve(&self, v0: &[C], tol: f64, max_iter: usize, restart: usize) -> Result<(Vec<C>, KrylovReport)> {
        let mut x = v0.to_vec();
        let rep = gmres(|v, out| self.apply(v, out), v0, &mut x, restart, tol, max_iter)?;
        Ok((x, rep))
    }

    /// Scattered field `k² Σ_j vol G(x − η_j) c_j v_j` at a point outside the
    /// support.
    pub fn scattered_at(&self, x: &Point, v: &[C]) -> C {
        let vol = self.scat.grid.volume();
        let s: C = self
            .scat
            .points
            .iter()
            .zip(&self.scat.contrast)
            .zip(v)
            .map(|((p, c), v)| green(self.k, dist(x, p)) * (c * vol) * v)
            .sum();
        s * (self.k * self.k)
    }

    /// Box origin index and padded FFT size, for diagnostics.
    pub fn layout(&self) -> ([usize; 3], [usize; 3]) {
        (self.lo, self.padded)
    }
}

/// Solver settings of the 3-D forward problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsOptions {
    pub voxel_pitch: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    /// Radial Gauss nodes per ring of the dish rule.
    pub radial: usize,
    pub angular: usize,
}

impl Default for LsOptions {
    fn default() -> Self {
        LsOptions {
            voxel_pitch: 0.05,
            tol: 1e-6,
            max_iter: 500,
            restart: 60,
            radial: 6,
            angular: 24,
        }
    }
}

/// Scattered field `v − v0` for every transmitter, wavenumber and receiver
/// (receivers at the antenna positions).
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteredField {
    pub band: FrequencyBand,
    pub positions: Vec<f64>,
    /// Indexed `[(tx·n_k + ik)·N + rx]`.
    pub data: Vec<C>,
    /// GMRES iterations per `(tx, ik)`.
    pub iterations: Vec<usize>,
}

impl ScatteredField {
    pub fn count(&self) -> usize {
        self.positions.len()
    }

    pub fn get(&self, tx: usize, ik: usize, rx: usize) -> C {
        self.data[(tx * self.band.n_k + ik) * self.count() + rx]
    }

    /// `v(x0_n, x0_n, k) − v0(x0_n, x0_n, k)` over the band, one row per
    /// antenna.
    pub fn monostatic(&self) -> Vec<Vec<C>> {
        (0..self.count())
            .map(|n| (0..self.band.n_k).map(|ik| self.get(n, ik, n)).collect())
            .collect()
    }

    pub fn subtract(&self, other: &ScatteredField) -> Result<ScatteredField> {
        if self.data.len() != other.data.len() || self.band != other.band {
            return Err(Error::ShapeMismatch("scattered fields differ in layout".into()));
        }
        Ok(ScatteredField {
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
            ..self.clone()
        })
    }
}

/// Incident fields `v0(η_j, x0_n, k)` on the support points.
pub fn incident_on(points: &[Point], dish: &DiskQuadrature, x_k: C, k: f64) -> Vec<C> {
    points
        .iter()
        .map(|p| {
            let s: C = dish.points.iter().zip(&dish.weights).map(|(q, w)| green(k, dist(p, q)) * *w).sum();
            s * x_k
        })
        .collect()
}

/// Solves the volume integral equation for every antenna (as transmitter)
/// and wavenumber and records the scattered field at every antenna.
/// Wavenumbers are processed in parallel.
pub fn solve_lippmann_schwinger(
    phantom: &Phantom3D,
    geom: &ScanGeometry,
    pulse: &Pulse,
    band: &FrequencyBand,
    opts: &LsOptions,
) -> Result<ScatteredField> {
    band.validate()?;
    let scat = Scatterer::from_phantom(phantom, opts.voxel_pitch)?;
    let n = geom.count;
    let antennas: Vec<Point> = geom.positions().iter().map(|x| [*x, 0.0, 0.0]).collect();
    for a in &antennas {
        for p in &scat.points {
            if dist(a, p) < geom.dish {
                return Err(Error::QuadratureDegeneracy {
                    distance: dist(a, p),
                    minimum: geom.dish,
                });
            }
        }
    }
    let dishes: Vec<DiskQuadrature> = antennas
        .iter()
        .map(|a| DiskQuadrature::new(geom, a, opts.radial, opts.angular))
        .collect();
    let ks = band.wavenumbers();
    let per_k: Vec<(Vec<C>, Vec<usize>)> = ks
        .par_iter()
        .map(|&k| -> Result<(Vec<C>, Vec<usize>)> {
            let mut out = vec![C::new(0.0, 0.0); n * n];
            let mut its = vec![0; n];
            if scat.is_empty() {
                return Ok((out, its));
            }
            let op = LsOperator::new(&scat, k);
            let x_k = pulse.spectrum(k * geom.c0);
            for tx in 0..n {
                let v0 = incident_on(&scat.points, &dishes[tx], x_k, k);
                let (v, rep) = op.solve(&v0, opts.tol, opts.max_iter, opts.restart)?;
                its[tx] = rep.iterations;
                for rx in 0..n {
                    out[tx * n + rx] = op.scattered_at(&antennas[rx], &v);
                }
            }
            Ok((out, its))
        })
        .collect::<Result<_>>()?;
    let mut data = vec![C::new(0.0, 0.0); n * band.n_k * n];
    let mut iterations = vec![0; n * band.n_k];
    for (ik, (block, its)) in per_k.iter().enumerate() {
        for tx in 0..n {
            iterations[tx * band.n_k + ik] = its[tx];
            for rx in 0..n {
                data[(tx * band.n_k + ik) * n + rx] = block[tx * n + rx];
            }
        }
    }
    Ok(ScatteredField {
        band: *band,
        positions: geom.positions(),
        data,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Body, Shape};

    fn cube(center: Point, side: f64, pitch: f64, eps: f64) -> Scatterer {
        let grid = VoxelGrid::covering(center, side, pitch).unwrap();
        Scatterer::from_fn(grid, |_| eps).unwrap()
    }

    #[test]
    fn convolution_matches_direct_sum() {
        let s = cube([0.3, 1.0, -0.2], 0.3, 0.1, 1.5);
        let k = 4.0;
        let op = LsOperator::new(&s, k);
        let w: Vec<C> = (0..s.len()).map(|i| C::new(i as f64 * 0.1, 1.0 - i as f64 * 0.05)).collect();
        let fast = op.convolve(&w);
        let vol = s.grid.volume();
        let a = (3.0 * vol / (4.0 * std::f64::consts::PI)).cbrt();
        for i in 0..s.len() {
            let mut d = C::new(0.0, 0.0);
            for j in 0..s.len() {
                d += w[j]
                    * if i == j {
                        self_cell_integral(k, a)
                    } else {
                        green(k, dist(&s.points[i], &s.points[j])) * vol
                    };
            }
            assert!((d - fast[i]).norm() < 1e-10 * d.norm().max(1.0));
        }
    }

    #[test]
    fn self_cell_small_ball() {
        // ∫_ball e^{ikr}/(4πr) dV → a²/2 as k → 0.
        let v = self_cell_integral(1e-3, 0.1);
        assert!((v.re - 0.005).abs() < 1e-8);
    }

    #[test]
    fn vacuum_scatters_nothing() {
        let g = ScanGeometry {
            count: 3,
            length: 1.0,
            ..ScanGeometry::standard()
        };
        let ph = Phantom3D::new([0.0, 6.0, 4.0], 0.5, None, vec![]).unwrap();
        let band = FrequencyBand::new(4.0, 8.0, 3).unwrap();
        let f = solve_lippmann_schwinger(&ph, &g, &Pulse::standard(), &band, &LsOptions::default()).unwrap();
        assert!(f.data.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn weak_voxel_matches_first_born() {
        let s = cube([0.0, 3.0, 2.0], 0.02, 0.02, 1.01);
        assert_eq!(s.len(), 1);
        let k = 6.0;
        let op = LsOperator::new(&s, k);
        let src = [0.5, 0.0, 0.0];
        let v0 = vec![green(k, dist(&src, &s.points[0]))];
        let (v, _) = op.solve(&v0, 1e-12, 50, 10).unwrap();
        let rx = [-0.4, 0.0, 0.0];
        let us = op.scattered_at(&rx, &v);
        let born = v0[0] * green(k, dist(&rx, &s.points[0])) * (k * k * 0.01 * s.grid.volume());
        assert!((us - born).norm() < 0.05 * born.norm());
    }

    #[test]
    fn reciprocity_of_point_sources() {
        let s = cube([0.0, 2.0, 1.0], 0.3, 0.05, 2.0);
        let k = 5.0;
        let op = LsOperator::new(&s, k);
        let a = [0.3, 0.0, 0.0];
        let b = [-0.6, 0.1, 0.0];
        let field = |from: &Point, to: &Point| {
            let v0: Vec<C> = s.points.iter().map(|p| green(k, dist(from, p))).collect();
            let (v, _) = op.solve(&v0, 1e-10, 500, 60).unwrap();
            op.scattered_at(to, &v)
        };
        let ab = field(&a, &b);
        let ba = field(&b, &a);
        assert!((ab - ba).norm() < 1e-7 * ab.norm(), "{ab} {ba}");
    }

    #[test]
    fn grid_refinement_changes_little() {
        let k = 5.0;
        let at = |pitch: f64| {
            let s = cube([0.0, 3.0, 2.0], 0.2, pitch, 1.5);
            let op = LsOperator::new(&s, k);
            let src = [0.0, 0.0, 0.0];
            let v0: Vec<C> = s.points.iter().map(|p| green(k, dist(&src, p))).collect();
            let (v, _) = op.solve(&v0, 1e-9, 500, 60).unwrap();
            op.scattered_at(&src, &v)
        };
        let coarse = at(0.025);
        let fine = at(0.0125);
        assert!((coarse - fine).norm() < 0.02 * fine.norm(), "{coarse} {fine}");
    }

    #[test]
    fn antenna_inside_dish_range_rejected() {
        let g = ScanGeometry {
            count: 1,
            ..ScanGeometry::standard()
        };
        let ph = Phantom3D::new(
            [0.0, 0.6, 0.6],
            0.5,
            None,
            vec![Body {
                shape: Shape::Ball {
                    center: [0.0, 0.6, 0.6],
                    diameter: 0.4,
                },
                eps: 2.0,
            }],
        );
        // The cube would meet the x-axis check first for smaller offsets.
        if let Ok(ph) = ph {
            let band = FrequencyBand::new(4.0, 8.0, 2).unwrap();
            let r = solve_lippmann_schwinger(&ph, &g, &Pulse::standard(), &band, &LsOptions::default());
            assert!(matches!(r, Err(Error::QuadratureDegeneracy { .. })));
        }
    }
}
