//! Gauss-object filter: turns a noisy potential `r(ξ)` into a slant-range
//! dielectric profile built from `N0` Gauss-like objects.
//!
//! Each object is fitted with the model
//!
//! ```text
//! f(ξ) = [ν1²ν2 − 4ν1²ν2²(ξ−ξp)²] · exp(−2ν2(ξ−ξp)²)
//! ```
//!
//! which is, to first order in ν1², the potential of `S = 1/m` with
//! `m = 1 + c·exp(−2ν2(ξ−ξp)²)`, because then `r = −m''/m`. Choosing
//! `c = ν1²/(4 − ν1²)` makes the peak of `−m''/m` equal the fitted peak
//! exactly. With `μ = m⁻²` (the analogue of `S²`) the profile is
//! `ε̃ = μ⁻² = m⁴`, placed on the slant-range grid through `dρ/dξ = μ`.
//!
//! The fitted amplitude only sees the core of the peak and underestimates
//! strong objects, so by default the peak value of each object comes from
//! integrating the profile ODE over its segment ([`Amplitude::Reconstructed`]);
//! the fit then supplies position and width.

use super::peaks::{find_peaks, maxk};
use crate::convexify::{reconstruct_b_scaled, SlantWindow};
use crate::error::{Error, Result};
use crate::scene::{Profile1D, ProfileLabel, Pulse, ScanGeometry};
use serde::{Deserialize, Serialize};

/// Weight sharpness in `w = exp(−W (ξ−ξp)²)`.
const FIT_WEIGHT: f64 = 1e3;
const MAX_LM_ITER: usize = 200;

/// One fitted Gauss-like object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussFit {
    /// Amplitude parameter.
    pub nu1: f64,
    /// Width parameter (1/ξ²).
    pub nu2: f64,
    pub center_index: usize,
    /// Set when the segment has no positive peak to fit.
    pub degenerate: bool,
}

impl GaussFit {
    pub fn model(&self, x: f64) -> f64 {
        let (a, b) = (self.nu1, self.nu2);
        a * a * (b - 4.0 * b * b * x * x) * (-2.0 * b * x * x).exp()
    }
}

fn model_and_jacobian(a: f64, b: f64, x: f64) -> (f64, f64, f64) {
    let x2 = x * x;
    let e = (-2.0 * b * x2).exp();
    let p = b - 4.0 * b * b * x2;
    (a * a * p * e, 2.0 * a * p * e, a * a * e * (1.0 - 10.0 * b * x2 + 8.0 * b * b * x2 * x2))
}

/// Weighted Levenberg-Marquardt fit of the Gauss-object model centred at
/// `xi[center]`. Starts from the peak height and half-width.
pub fn gauss_fit(xi: &[f64], y: &[f64], center: usize) -> Result<GaussFit> {
    if xi.len() != y.len() || center >= y.len() {
        return Err(Error::ShapeMismatch("gauss_fit: segment and centre disagree".into()));
    }
    let xp = xi[center];
    let peak = y[center];
    if !(peak > 0.0) {
        return Ok(GaussFit {
            nu1: 0.0,
            nu2: 1.0,
            center_index: center,
            degenerate: true,
        });
    }
    // Half width at half maximum of the model is √(0.09797/ν2).
    let crossing = |dir: isize| -> Option<f64> {
        let mut k = center as isize;
        loop {
            let next = k + dir;
            if next < 0 || next as usize >= y.len() {
                return None;
            }
            let (yk, yn) = (y[k as usize], y[next as usize]);
            if yn <= 0.5 * peak {
                let u = (yk - 0.5 * peak) / (yk - yn);
                let (xk, xn) = (xi[k as usize], xi[next as usize]);
                return Some((xk + u * (xn - xk) - xp).abs());
            }
            k = next;
        }
    };
    let hw = match (crossing(-1), crossing(1)) {
        (Some(l), Some(r)) => 0.5 * (l + r),
        (Some(h), None) | (None, Some(h)) => h,
        (None, None) => 0.5 * (xi[xi.len() - 1] - xi[0]).abs(),
    }
    .max(1e-9);
    let mut p = [0.0, 0.09797 / (hw * hw)];
    p[0] = (peak / p[1]).sqrt();

    let w: Vec<f64> = xi.iter().map(|x| (-FIT_WEIGHT * (x - xp) * (x - xp)).exp()).collect();
    let cost = |p: &[f64; 2]| -> f64 {
        xi.iter()
            .zip(y)
            .zip(&w)
            .map(|((x, yv), wv)| (wv * (model_and_jacobian(p[0], p[1], x - xp).0 - yv)).powi(2))
            .sum()
    };
    let scale: f64 = y.iter().zip(&w).map(|(v, wv)| (wv * v).powi(2)).sum::<f64>().max(f64::MIN_POSITIVE);
    let mut c = cost(&p);
    let mut damping = 1e-3;
    for _ in 0..MAX_LM_ITER {
        if c <= 1e-28 * scale {
            return Ok(fitted(p, center));
        }
        let (mut h11, mut h12, mut h22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for ((x, yv), wv) in xi.iter().zip(y).zip(&w) {
            let (f, ja, jb) = model_and_jacobian(p[0], p[1], x - xp);
            let (ja, jb, r) = (wv * ja, wv * jb, wv * (f - yv));
            h11 += ja * ja;
            h12 += ja * jb;
            h22 += jb * jb;
            g1 += ja * r;
            g2 += jb * r;
        }
        loop {
            let (a11, a22) = (h11 * (1.0 + damping), h22 * (1.0 + damping));
            let det = a11 * a22 - h12 * h12;
            let d = [-(a22 * g1 - h12 * g2) / det, -(a11 * g2 - h12 * g1) / det];
            let trial = [p[0] + d[0], p[1] + d[1]];
            let ct = if det > 0.0 && trial[1] > 0.0 { cost(&trial) } else { f64::INFINITY };
            if ct < c {
                let small = d[0].abs() <= 1e-13 * p[0].abs() && d[1].abs() <= 1e-13 * p[1].abs();
                p = trial;
                c = ct;
                damping = (damping / 3.0).max(1e-12);
                if small {
                    return Ok(fitted(p, center));
                }
                break;
            }
            damping *= 4.0;
            if damping > 1e16 {
                // No descent direction left: a stationary point.
                return Ok(fitted(p, center));
            }
        }
    }
    Err(Error::NonConvergence {
        solver: "gauss_fit",
        iterations: MAX_LM_ITER,
        residual: (c / scale).sqrt(),
    })
}

fn fitted(p: [f64; 2], center: usize) -> GaussFit {
    GaussFit {
        nu1: p[0].abs(),
        nu2: p[1],
        center_index: center,
        degenerate: false,
    }
}

/// Where an object's peak value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Amplitude {
    /// `c = ν1²/(4 − ν1²)` from the fit alone.
    Model,
    /// Peak of `S⁻⁴` with `S` integrated from the segment's `r`.
    Reconstructed,
}

/// Settings of the Gauss-object filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    /// Number of objects N0 per profile.
    pub n0: usize,
    /// Peaks closer than this (in scaled ξ) are merged.
    pub delta_rho: f64,
    /// Upper bound on the peak dielectric constant of one object; caps
    /// `ν1²` below its singular value 4.
    pub eps_cap: f64,
    pub amplitude: Amplitude,
    /// Only peaks with `xi_min ≤ ξ ≤ xi_max` are candidates, and fits and
    /// amplitudes only look at nodes in that gate. With a scaled window and
    /// background `b = 1`, `ξ = 1` is its far end; deeper values of `r` are
    /// left to the regularization and carry no data.
    pub xi_min: f64,
    pub xi_max: f64,
}

impl FilterParams {
    pub fn new(n0: usize, delta_rho: f64) -> Self {
        FilterParams {
            n0,
            delta_rho,
            eps_cap: 10.0,
            amplitude: Amplitude::Reconstructed,
            xi_min: 0.0,
            xi_max: f64::INFINITY,
        }
    }

    /// `Δρ = 2 c0 τ |cos θ| / ρ_max`.
    pub fn sr_resolution(pulse: &Pulse, geom: &ScanGeometry, rho_max: f64) -> f64 {
        2.0 * geom.c0 * pulse.tau * geom.theta.cos().abs() / rho_max
    }
}

/// Fitted objects and the resulting `m(ξ)` on the grid of `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussFilter {
    pub fits: Vec<GaussFit>,
    /// `(first, last)` node of each object's segment.
    pub segments: Vec<(usize, usize)>,
    pub m: Vec<f64>,
}

/// Peak selection, merging and fitting on `r(ξ)`.
///
/// Only positive local maxima are candidates; a profile without any gives
/// `m ≡ 1`. Of the `10·N0` strongest, each surviving candidate absorbs the
/// weaker ones closer than `Δρ`, and the absorbed hump is zeroed from the
/// half-way point towards the stronger peak to the half-way point towards
/// its next neighbour. The `N0` strongest survivors are fitted on segments
/// split half-way between them.
pub fn gauss_filter(r: &Profile1D, params: &FilterParams) -> Result<GaussFilter> {
    if params.n0 == 0 {
        return Err(Error::param("n0", "need at least one object"));
    }
    let n = r.len();
    let mut z = r.values.clone();
    let peaks = find_peaks(&z);
    let (pv, pi): (Vec<f64>, Vec<usize>) = peaks
        .values
        .iter()
        .zip(&peaks.indices)
        .filter(|(v, i)| **v > 0.0 && (params.xi_min..=params.xi_max).contains(&r.x(**i)))
        .map(|(v, i)| (*v, *i))
        .unzip();
    if pv.is_empty() {
        return Ok(GaussFilter {
            fits: vec![],
            segments: vec![],
            m: vec![1.0; n],
        });
    }
    let (_, order) = maxk(&pv, 10 * params.n0);
    // Candidates by position; `alive` follows the same order.
    let mut cand: Vec<(usize, f64)> = order.iter().map(|&k| (pi[k], pv[k])).collect();
    cand.sort_by_key(|c| c.0);
    let mut alive = vec![true; cand.len()];
    let mut by_strength: Vec<usize> = (0..cand.len()).collect();
    by_strength.sort_by(|&a, &b| cand[b].1.total_cmp(&cand[a].1).then(a.cmp(&b)));
    let xi = |i: usize| r.x(i);
    for &s in &by_strength {
        if !alive[s] {
            continue;
        }
        for j in 0..cand.len() {
            if j == s || !alive[j] || (xi(cand[j].0) - xi(cand[s].0)).abs() >= params.delta_rho {
                continue;
            }
            alive[j] = false;
            let (pj, ps) = (cand[j].0, cand[s].0);
            let near = (pj + ps) / 2;
            let far = if pj > ps {
                (j + 1..cand.len()).find(|&k| alive[k]).map_or(pj + (pj - near), |k| (pj + cand[k].0) / 2)
            } else {
                (0..j).rev().find(|&k| alive[k]).map_or(pj.saturating_sub(near - pj), |k| (pj + cand[k].0) / 2)
            };
            let (lo, hi) = if pj > ps { (near + 1, far) } else { (far, near.saturating_sub(1)) };
            for v in z.iter_mut().take(hi.min(n - 1) + 1).skip(lo) {
                *v = 0.0;
            }
        }
    }
    let mut kept: Vec<(usize, f64)> = cand.iter().zip(&alive).filter(|(_, a)| **a).map(|(c, _)| *c).collect();
    if kept.len() < params.n0 {
        return Err(Error::TooFewPeaks {
            expected: params.n0,
            found: kept.len(),
        });
    }
    kept.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    kept.truncate(params.n0);
    kept.sort_by_key(|c| c.0);

    let grid = r.grid();
    let c_max = params.eps_cap.max(1.0).powf(0.25) - 1.0;
    let mut m = vec![1.0; n];
    let mut fits = Vec::with_capacity(kept.len());
    let mut segments = Vec::with_capacity(kept.len());
    let gate_lo = grid.iter().position(|&x| x >= params.xi_min).unwrap_or(0);
    let gate_hi = grid.iter().rposition(|&x| x <= params.xi_max).unwrap_or(n - 1);
    for (k, &(center, _)) in kept.iter().enumerate() {
        let lo = if k == 0 { 0 } else { (kept[k - 1].0 + center) / 2 + 1 };
        let hi = if k + 1 == kept.len() { n - 1 } else { (center + kept[k + 1].0) / 2 };
        let (flo, fhi) = (lo.max(gate_lo), hi.min(gate_hi));
        let fit = gauss_fit(&grid[flo..=fhi], &z[flo..=fhi], center - flo)?;
        let fit = GaussFit {
            center_index: center,
            ..fit
        };
        if !fit.degenerate {
            let c = match params.amplitude {
                Amplitude::Model => {
                    let q = fit.nu1 * fit.nu1 / 4.0;
                    if q < 1.0 {
                        (q / (1.0 - q)).min(c_max)
                    } else {
                        c_max
                    }
                }
                Amplitude::Reconstructed => segment_peak(r, flo, fhi).map_or(c_max, |e| (e.powf(0.25) - 1.0).clamp(0.0, c_max)),
            };
            for i in lo..=hi {
                let x = grid[i] - grid[center];
                m[i] = 1.0 + c * (-2.0 * fit.nu2 * x * x).exp();
            }
        }
        fits.push(fit);
        segments.push((lo, hi));
    }
    Ok(GaussFilter { fits, segments, m })
}

/// Largest `S⁻⁴` along the segment's own ODE solution, `S(ξ_lo) = 1`.
fn segment_peak(r: &Profile1D, lo: usize, hi: usize) -> Option<f64> {
    let seg = Profile1D {
        start: r.x(lo),
        step: r.step,
        values: r.values[lo..=hi].to_vec(),
        label: r.label,
    };
    let (_, s, _) = reconstruct_b_scaled(&seg).ok()?;
    Some(s.iter().map(|v| v.powi(-4)).fold(1.0, f64::max))
}

/// Slant-range dielectric profile `ε̃ = μ⁻²` from `r(ξ)` by
/// [`gauss_filter`], on the same physical grid [`crate::convexify::reconstruct_b`]
/// produces: scaled `ρ̂ = ∫ μ dξ` with step `r.step`, mapped through `window`.
pub fn dielectric_from_r(r: &Profile1D, params: &FilterParams, window: &SlantWindow) -> Result<Profile1D> {
    let gf = gauss_filter(r, params)?;
    let mu: Vec<f64> = gf.m.iter().map(|m| m.powi(-2)).collect();
    let eps: Vec<f64> = gf.m.iter().map(|m| m.powi(4)).collect();
    let h = r.step;
    let mut rho = vec![0.0; mu.len()];
    for k in 1..mu.len() {
        rho[k] = rho[k - 1] + 0.5 * h * (mu[k] + mu[k - 1]);
    }
    let end = *rho.last().unwrap_or(&0.0);
    let n_out = (end / h + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(n_out);
    let mut seg = 0;
    for k in 0..n_out {
        let x = k as f64 * h;
        if rho.len() < 2 {
            out.push(eps.first().copied().unwrap_or(1.0));
            continue;
        }
        while seg + 2 < rho.len() && rho[seg + 1] < x {
            seg += 1;
        }
        let u = ((x - rho[seg]) / (rho[seg + 1] - rho[seg])).clamp(0.0, 1.0);
        out.push(eps[seg] * (1.0 - u) + eps[seg + 1] * u);
    }
    Ok(Profile1D {
        start: window.rho_min,
        step: h * window.length(),
        values: out,
        label: ProfileLabel::EpsTilde,
    })
}
