//! Per-antenna inversion: trace preparation, minimization and recovery.

use super::descent::{armijo_descent, DescentMetric, DescentOptions, DescentReport, Objective};
use super::functional::CarlemanFunctional;
use super::profile::{reconstruct_b, SlantWindow};
use super::{build_boundary_data, extract_r, CarlemanParams, GridSpec, QGrid};
use crate::error::{Error, Result};
use crate::scene::Profile1D;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Initial iterate of the minimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    /// Minimizer of the functional with the coupling term dropped.
    Linearized,
    /// Zero interior, pinned boundary row.
    Zero,
}

/// Everything one inversion needs besides the trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionSetup {
    pub grid: GridSpec,
    pub params: CarlemanParams,
    pub window: SlantWindow,
    /// Standard deviation, in scaled time, of the Gaussian used to resample
    /// the trace onto the t-grid. Zero selects linear interpolation.
    pub smoothing: f64,
    /// Level subtracted from the trace before inversion (the free-space
    /// response of the impulse problem is 1/2).
    pub baseline: f64,
    pub descent: DescentOptions,
    pub metric: DescentMetric,
    pub start: StartKind,
    /// Radius R0 of the admissible ball in the discrete L² norm.
    pub radius: f64,
}

impl InversionSetup {
    /// Defaults: b̄ = 10, Δξ = 0.01, Δt = 0.02, λ = 2, α = 0.49, γ = 1e-8.
    pub fn standard(window: SlantWindow) -> Self {
        let grid = GridSpec::from_bound(10.0, 0.01, 0.02).expect("valid defaults");
        InversionSetup {
            grid,
            params: CarlemanParams::default(),
            window,
            smoothing: 0.01,
            baseline: 0.0,
            descent: DescentOptions::default(),
            metric: DescentMetric::GaussNewton,
            start: StartKind::Linearized,
            radius: 1e3,
        }
    }
}

/// Resamples a trace recorded on `t0 + k·dt` (times as two-way path length
/// `c0 t`, meters) onto the scaled t-grid, subtracting `setup.baseline`.
/// Samples outside the record count as zero.
pub fn prepare_trace(values: &[f64], t0: f64, dt: f64, setup: &InversionSetup) -> Vec<f64> {
    let w = &setup.window;
    let sigma = setup.smoothing * w.length();
    let at = |k: isize| -> f64 {
        if k >= 0 && (k as usize) < values.len() {
            values[k as usize] - setup.baseline
        } else {
            0.0
        }
    };
    (0..=setup.grid.nt)
        .map(|j| {
            let p = w.path_of_scaled_time(j as f64 * setup.grid.d_t);
            let u = (p - t0) / dt;
            if sigma < 0.5 * dt {
                let k = u.floor();
                let f = u - k;
                let k = k as isize;
                return at(k) * (1.0 - f) + at(k + 1) * f;
            }
            let half = (4.0 * sigma / dt).ceil() as isize;
            let c = u.round() as isize;
            let (mut num, mut den) = (0.0, 0.0);
            for k in c - half..=c + half {
                let z = (k as f64 - u) * dt / sigma;
                let g = (-0.5 * z * z).exp();
                num += g * at(k);
                den += g;
            }
            num / den
        })
        .collect()
}

struct Problem<'a> {
    f: &'a CarlemanFunctional,
    metric: DescentMetric,
    radius: f64,
    pinned_sq: f64,
}

impl Objective for Problem<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.f.value(x)
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.f.value_and_gradient(x)
    }

    fn precondition(&self, x: &[f64], g: &[f64]) -> Option<Result<Vec<f64>>> {
        match self.metric {
            DescentMetric::Euclidean => None,
            DescentMetric::GaussNewton => {
                let half: Vec<f64> = g.iter().map(|v| 0.5 * v).collect();
                Some(self.f.solve_metric(x, &half))
            }
        }
    }

    fn project(&self, x: &mut [f64]) {
        let cell = self.f.grid.d_xi * self.f.grid.d_t;
        let free: f64 = x.iter().map(|v| v * v).sum();
        let budget = self.radius * self.radius / cell - self.pinned_sq;
        if cell * (free + self.pinned_sq) > self.radius * self.radius {
            let s = if budget > 0.0 { (budget / free).sqrt() } else { 0.0 };
            x.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// Minimizes `f` from `q0` by Armijo descent in the chosen metric, keeping
/// `q` in the ball of radius `radius`.
pub fn minimize(
    f: &CarlemanFunctional,
    q0: &QGrid,
    metric: DescentMetric,
    radius: f64,
    opts: &DescentOptions,
) -> Result<(QGrid, DescentReport)> {
    let m = f.grid.nt + 1;
    let pinned_sq = q0.values[..m].iter().map(|v| v * v).sum();
    let problem = Problem {
        f,
        metric,
        radius,
        pinned_sq,
    };
    let mut x = q0.interior().to_vec();
    let report = armijo_descent(&problem, &mut x, opts)?;
    Ok((f.to_qgrid(&x), report))
}

/// Result of one antenna's inversion.
#[derive(Debug, Clone)]
pub struct AntennaInversion {
    /// Trace samples on the scaled t-grid.
    pub data: Vec<f64>,
    pub q: QGrid,
    /// Potential on the scaled ξ-grid.
    pub r: Profile1D,
    pub report: DescentReport,
}

impl AntennaInversion {
    /// Coefficient `b` on the physical slant-range grid.
    pub fn b(&self, window: &SlantWindow) -> Result<Profile1D> {
        reconstruct_b(&self.r, window)
    }
}

/// Inverts samples already on the scaled t-grid.
pub fn invert_scaled(data: Vec<f64>, setup: &InversionSetup) -> Result<AntennaInversion> {
    if data.len() != setup.grid.nt + 1 {
        return Err(Error::ShapeMismatch(format!(
            "{} samples for a grid of {} time nodes",
            data.len(),
            setup.grid.nt + 1
        )));
    }
    let bd = build_boundary_data(&data, setup.grid.d_t)?;
    let f = CarlemanFunctional::new(setup.grid, &bd, setup.params, true)?;
    let q0 = match setup.start {
        StartKind::Zero => QGrid::pinned(setup.grid, &bd)?,
        StartKind::Linearized => f.to_qgrid(&f.linearized_start()?),
    };
    let (q, report) = minimize(&f, &q0, setup.metric, setup.radius, &setup.descent)?;
    let r = extract_r(&q);
    Ok(AntennaInversion { data, q, r, report })
}

/// Full inversion of one trace: resampling, boundary data, minimization from
/// the configured start, extraction of `r` and recovery of `b`.
///
/// The trace is sampled on `t0 + k·dt` with times as two-way path length.
pub fn invert_one_antenna(
    values: &[f64],
    t0: f64,
    dt: f64,
    setup: &InversionSetup,
) -> Result<(AntennaInversion, Profile1D)> {
    let data = prepare_trace(values, t0, dt, setup);
    let inv = invert_scaled(data, setup)?;
    let b = inv.b(&setup.window)?;
    Ok((inv, b))
}

/// CSV tables of per-antenna profiles (`antenna,quantity,x,value`) and
/// diagnostics (`antenna,initial_j,final_j,iterations,grad_norm`).
pub fn results_csv(results: &[(usize, &AntennaInversion, Option<&Profile1D>)]) -> (String, String) {
    let mut prof = String::from("antenna,quantity,x,value\n");
    let mut diag = String::from("antenna,initial_j,final_j,iterations,grad_norm\n");
    for (n, inv, b) in results {
        for k in 0..inv.r.len() {
            let _ = writeln!(prof, "{n},r,{},{}", inv.r.x(k), inv.r.values[k]);
        }
        if let Some(b) = b {
            for k in 0..b.len() {
                let _ = writeln!(prof, "{n},b,{},{}", b.x(k), b.values[k]);
            }
        }
        let rep = &inv.report;
        let _ = writeln!(
            diag,
            "{n},{},{},{},{}",
            rep.initial_value, rep.value, rep.iterations, rep.grad_norm
        );
    }
    (prof, diag)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resampling_linear_and_smoothed() {
        let mut setup = InversionSetup::standard(SlantWindow::unit());
        setup.smoothing = 0.0;
        let dt = 0.001;
        let values: Vec<f64> = (0..20000).map(|k| (k as f64 * dt).sin()).collect();
        let y = prepare_trace(&values, 0.0, dt, &setup);
        for (j, v) in y.iter().enumerate().take(200) {
            let p = setup.window.path_of_scaled_time(j as f64 * setup.grid.d_t);
            assert!((v - p.sin()).abs() < 1e-6);
        }
        setup.smoothing = 0.01;
        let ys = prepare_trace(&values, 0.0, dt, &setup);
        // Gaussian smoothing damps sin by exp(-σ²/2).
        let damp = (-0.5f64 * 0.01 * 0.01).exp();
        for j in 10..200 {
            let p = setup.window.path_of_scaled_time(j as f64 * setup.grid.d_t);
            assert!((ys[j] - damp * p.sin()).abs() < 1e-6);
        }
    }
}
