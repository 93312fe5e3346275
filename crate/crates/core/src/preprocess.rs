//! Delay-and-sum without matched filtering, clutter subtraction and the
//! search for the calibration factor that maps radar amplitudes onto the
//! 1-D impulse model.

use crate::error::{Error, Result};
use crate::forward::TraceSet;
use crate::linalg::golden_section;
use crate::scene::ScanGeometry;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Beam and propagation constants of the delay-and-sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaySumParams {
    /// Half beamwidth θ0 of the main lobe (rad).
    pub theta0: f64,
    pub c0: f64,
    /// Divide by the number of in-beam antennas instead of N.
    pub count_normalize: bool,
}

impl DelaySumParams {
    /// `θ0 = 1.02 l_min / D`.
    pub fn from_wavelength(l_min: f64, dish: f64, c0: f64) -> Result<Self> {
        if !(l_min > 0.0 && dish > 0.0) {
            return Err(Error::param("l_min", "wavelength and dish must be positive"));
        }
        Ok(DelaySumParams {
            theta0: 1.02 * l_min / dish,
            c0,
            count_normalize: false,
        })
    }

    /// l_min = 0.33 m with the geometry's dish and speed.
    pub fn standard(geom: &ScanGeometry) -> Self {
        DelaySumParams {
            theta0: 1.02 * 0.33 / geom.dish,
            c0: geom.c0,
            count_normalize: false,
        }
    }
}

/// `τ_d = t(√(1 + (2Δρ/(c0 t))²) − 1)`.
pub fn delay_time(delta_rho: f64, t: f64, c0: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::param("t", "delay time needs t > 0"));
    }
    let q = 2.0 * delta_rho / (c0 * t);
    // t(√(1+q²) − 1) without cancellation.
    Ok(t * q * q / ((1.0 + q * q).sqrt() + 1.0))
}

/// Beam indicator: 1 when the antenna at `xi` sees the point `x0n + c0 t k0/2`
/// within the half beamwidth of the antenna at `xn`.
pub fn indicator(xi: f64, xn: f64, t: f64, params: &DelaySumParams) -> bool {
    let lateral = (xi - xn).abs();
    if lateral == 0.0 {
        return true;
    }
    let range = params.c0 * t.max(0.0) / 2.0;
    lateral.atan2(range) < params.theta0
}

fn lerp(v: &[f64], u: f64) -> f64 {
    if !(u >= 0.0) {
        return 0.0;
    }
    let k = u.floor() as usize;
    if k + 1 >= v.len() {
        return if k + 1 == v.len() && u == k as f64 { v[k] } else { 0.0 };
    }
    let f = u - k as f64;
    v[k] * (1.0 - f) + v[k + 1] * f
}

/// `f̃_n(t) = (1/N) Σ_i I_{i,n}(t) F_i(t + τ_d(x0_i, x0_n, t))`, linear in
/// time, samples beyond the record counting as zero. Works on both parts of
/// complex traces. At `t ≤ 0` only the own trace contributes.
pub fn delay_and_sum(raw: &TraceSet, params: &DelaySumParams) -> TraceSet {
    let n = raw.count();
    let k = raw.samples();
    let pos = &raw.positions;
    let one = |parts: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        (0..n)
            .into_par_iter()
            .map(|a| {
                (0..k)
                    .map(|s| {
                        let t = raw.time(s);
                        let mut acc = 0.0;
                        let mut used = 0usize;
                        for i in 0..n {
                            if !indicator(pos[i], pos[a], t, params) {
                                continue;
                            }
                            let dr = (pos[i] - pos[a]).abs();
                            let tau = if t > 0.0 {
                                delay_time(dr, t, params.c0).expect("t > 0")
                            } else if dr == 0.0 {
                                0.0
                            } else {
                                continue;
                            };
                            // A zero delay is the sample itself; interpolating
                            // at a rounded index would blend in a neighbour.
                            acc += if tau == 0.0 {
                                parts[i][s]
                            } else {
                                lerp(&parts[i], (t + tau - raw.t0) / raw.dt)
                            };
                            used += 1;
                        }
                        let norm = if params.count_normalize { used.max(1) } else { n };
                        acc / norm as f64
                    })
                    .collect()
            })
            .collect()
    };
    TraceSet {
        re: one(&raw.re),
        im: raw.im.as_ref().map(one),
        ..raw.clone()
    }
}

/// Raw data minus the wall-only response.
pub fn subtract_wall(data: &TraceSet, wall_only: &TraceSet) -> Result<TraceSet> {
    data.subtract(wall_only)
}

/// Outcome of the calibration-factor search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub cf: f64,
    pub achieved_eps: f64,
    pub target_eps: f64,
    pub tolerance: f64,
    pub evaluations: usize,
}

/// Search range and effort of [`calibrate_cf`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// log10 CF range.
    pub log_lo: f64,
    pub log_hi: f64,
    pub iterations: usize,
    pub tol: f64,
    /// Points of a uniform log-scale scan run before the golden-section
    /// search, which then refines between the best point's neighbours.
    /// 0 or 1 disables the scan.
    pub scan: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            log_lo: 0.0,
            log_hi: 12.0,
            iterations: 40,
            tol: 0.05,
            scan: 0,
        }
    }
}

/// Golden-section search on `log10 CF` for the factor at which
/// `response(CF)` (the reconstructed reference value) hits `target`,
/// optionally preceded by a coarse scan when the response is not monotone.
/// Failing evaluations count as infinitely bad; the lower end is tried first
/// so that an already calibrated pipeline keeps CF = 10^log_lo.
pub fn calibrate_cf(
    mut response: impl FnMut(f64) -> Result<f64>,
    target: f64,
    opts: &CalibrationOptions,
) -> Result<CalibrationResult> {
    let mut evals = 0usize;
    let mut best = (f64::NAN, f64::NAN, f64::INFINITY);
    let mut misfit = |lc: f64| -> f64 {
        evals += 1;
        let cf = 10f64.powf(lc);
        match response(cf) {
            Ok(v) if v.is_finite() => {
                let m = (v - target).abs();
                if m < best.2 {
                    best = (cf, v, m);
                }
                m
            }
            _ => f64::INFINITY,
        }
    };
    let m0 = misfit(opts.log_lo);
    if m0 > opts.tol {
        let (mut lo, mut hi) = (opts.log_lo, opts.log_hi);
        let mut best_m = m0;
        if opts.scan > 1 {
            let h = (hi - lo) / (opts.scan - 1) as f64;
            let mut best_k = 0;
            for k in 1..opts.scan {
                let m = misfit(lo + h * k as f64);
                if m < best_m {
                    (best_k, best_m) = (k, m);
                }
            }
            let c = opts.log_lo + h * best_k as f64;
            (lo, hi) = ((c - h).max(opts.log_lo), (c + h).min(opts.log_hi));
        }
        if best_m > opts.tol {
            golden_section(&mut misfit, lo, hi, opts.iterations, opts.tol);
        }
    }
    if !(best.2 <= opts.tol) {
        return Err(Error::Bracket {
            target,
            lo: 10f64.powf(opts.log_lo),
            hi: 10f64.powf(opts.log_hi),
            best: best.1,
        });
    }
    Ok(CalibrationResult {
        cf: best.0,
        achieved_eps: best.1,
        target_eps: target,
        tolerance: opts.tol,
        evaluations: evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const C0: f64 = 3e8;

    fn params() -> DelaySumParams {
        DelaySumParams {
            theta0: 0.481,
            c0: C0,
            count_normalize: false,
        }
    }

    #[test]
    fn delay_spot_values() {
        assert_eq!(delay_time(0.0, 1e-7, C0).unwrap(), 0.0);
        let d = delay_time(15.0, 1e-7, C0).unwrap();
        assert!((d - 1e-7 * (2f64.sqrt() - 1.0)).abs() < 1e-20);
        // Small offsets: τ_d ≈ 2Δρ²/(c0² t).
        let (dr, t) = (0.1, 4e-8);
        let approx = 2.0 * dr * dr / (C0 * C0 * t);
        assert!((delay_time(dr, t, C0).unwrap() - approx).abs() < 0.01 * approx);
        assert!(delay_time(1.0, 0.0, C0).is_err());
    }

    #[test]
    fn indicator_cases() {
        let p = params();
        assert!(indicator(0.3, 0.3, 1e-9, &p));
        assert!(!indicator(1e6, 0.0, 1e-8, &p));
        // One metre of range and a neighbour 0.0917 m away.
        let t = 2.0 / C0;
        assert!(indicator(0.0917, 0.0, t, &p));
        assert!((1.02f64 * 0.33 / 0.7 - 0.481).abs() < 1e-3);
    }

    #[test]
    fn single_trace_is_identity() {
        let t = TraceSet::new(1e-10, 0.0, vec![0.0], vec![vec![1.0, -2.0, 3.5, 0.25]], None).unwrap();
        assert_eq!(delay_and_sum(&t, &params()), t);
        // Long records at an offset start, where t/dt is rarely an exact integer.
        let re: Vec<f64> = (0..300).map(|k| (k as f64 * 0.37).sin()).collect();
        let im: Vec<f64> = (0..300).map(|k| (k as f64 * 0.11).cos()).collect();
        let t = TraceSet::new(1.3e-10, 2.7e-9, vec![0.4], vec![re], Some(vec![im])).unwrap();
        assert_eq!(delay_and_sum(&t, &params()), t);
    }

    #[test]
    fn calibration_fixed_point_and_scaling() {
        let one = calibrate_cf(|cf| Ok(2.5 * cf), 2.5, &CalibrationOptions::default()).unwrap();
        assert_eq!(one.cf, 1.0);
        let opts = CalibrationOptions {
            tol: 1e-6,
            ..Default::default()
        };
        let a = calibrate_cf(|cf| Ok(1.0 + 1e-6 * cf), 2.5, &opts).unwrap();
        let b = calibrate_cf(|cf| Ok(1.0 + 2e-6 * cf), 2.5, &opts).unwrap();
        assert!((b.cf / a.cf - 0.5).abs() < 1e-4, "{} {}", a.cf, b.cf);
        assert!(calibrate_cf(|_| Ok(1.0), 2.5, &opts).is_err());
        // A bump the plain search cannot see from the ends.
        let bump = |cf: f64| Ok(1.0 + 3.0 * (-(cf.log10() - 7.3f64).powi(2)).exp());
        let scanned = CalibrationOptions { scan: 25, ..opts };
        let c = calibrate_cf(bump, 2.5, &scanned).unwrap();
        assert!((c.achieved_eps - 2.5).abs() <= 1e-6);
    }
}
