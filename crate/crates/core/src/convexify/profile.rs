//! Maps between the coefficient `b(ρ)` and the potential `r(ξ)`.

use crate::error::{Error, Result};
use crate::scene::{Profile1D, ProfileLabel};
use serde::{Deserialize, Serialize};

/// Slant-range interval `[ρ_min, ρ_max]` mapped onto the unit interval of the
/// scaled problem via `ρ = ρ_min + (ρ_max − ρ_min) ρ̂`. Times scale the same
/// way: `c0 t = 2ρ_min + (ρ_max − ρ_min) t̂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlantWindow {
    pub rho_min: f64,
    pub rho_max: f64,
}

impl SlantWindow {
    /// Identity scaling.
    pub fn unit() -> Self {
        SlantWindow {
            rho_min: 0.0,
            rho_max: 1.0,
        }
    }

    pub fn length(&self) -> f64 {
        self.rho_max - self.rho_min
    }

    pub fn to_physical(&self, rho_hat: f64) -> f64 {
        self.rho_min + self.length() * rho_hat
    }

    pub fn to_scaled(&self, rho: f64) -> f64 {
        (rho - self.rho_min) / self.length()
    }

    /// Two-way path length `c0 t` of scaled time `t̂`.
    pub fn path_of_scaled_time(&self, t_hat: f64) -> f64 {
        2.0 * self.rho_min + self.length() * t_hat
    }
}

/// Output of [`forward_map_b_to_r`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardMap {
    pub xi: Vec<f64>,
    pub r: Profile1D,
    pub s: Profile1D,
}

/// Computes `r(ξ)` of a coefficient `b(ρ)` sampled on a uniform grid.
///
/// `ξ(ρ) = ∫ √b` by the trapezoid rule from the first sample, inverted by
/// cubic Hermite interpolation (nodal slopes `√b`); `S = b^{-1/4}` on the
/// uniform ξ-grid of step `d_xi`, and `r = S''/S − 2(S'/S)²` by
/// fourth-order central differences, second order on the two nodes at each
/// end.
pub fn forward_map_b_to_r(b: &Profile1D, d_xi: f64) -> Result<ForwardMap> {
    let n = b.len();
    if n < 4 {
        return Err(Error::param("b", "need at least 4 samples"));
    }
    if !(d_xi > 0.0) {
        return Err(Error::param("d_xi", "must be positive"));
    }
    let h = b.step;
    let sb: Vec<f64> = b.values.iter().map(|v| v.max(0.0).sqrt()).collect();
    let mut xi_of = vec![0.0; n];
    for k in 1..n {
        xi_of[k] = xi_of[k - 1] + 0.5 * h * (sb[k] + sb[k - 1]);
        if !(xi_of[k] > xi_of[k - 1]) {
            return Err(Error::param("b", format!("travel time is not increasing at rho = {}", b.x(k))));
        }
    }
    let m = (xi_of[n - 1] / d_xi + 1e-9).floor() as usize;
    let xi: Vec<f64> = (0..=m).map(|k| k as f64 * d_xi).collect();
    let mut rho = Vec::with_capacity(m + 1);
    let mut seg = 0;
    for &target in &xi {
        while seg + 2 < n && xi_of[seg + 1] < target {
            seg += 1;
        }
        // Hermite cubic for ξ(ρ) on [ρ_seg, ρ_seg + h], solved by safeguarded Newton.
        let (y0, y1, m0, m1) = (xi_of[seg], xi_of[seg + 1], sb[seg] * h, sb[seg + 1] * h);
        let p = |u: f64| {
            let (u2, u3) = (u * u, u * u * u);
            (2.0 * u3 - 3.0 * u2 + 1.0) * y0 + (u3 - 2.0 * u2 + u) * m0 + (-2.0 * u3 + 3.0 * u2) * y1 + (u3 - u2) * m1
        };
        let dp = |u: f64| {
            let u2 = u * u;
            (6.0 * u2 - 6.0 * u) * y0 + (3.0 * u2 - 4.0 * u + 1.0) * m0 + (-6.0 * u2 + 6.0 * u) * y1 + (3.0 * u2 - 2.0 * u) * m1
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut u = ((target - y0) / (y1 - y0)).clamp(0.0, 1.0);
        for _ in 0..60 {
            let r = p(u) - target;
            if r.abs() < 1e-15 * (1.0 + target.abs()) {
                break;
            }
            if r > 0.0 {
                hi = u;
            } else {
                lo = u;
            }
            let d = dp(u);
            let next = if d > 0.0 { u - r / d } else { f64::NAN };
            u = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        }
        rho.push(b.x(seg) + u * h);
    }
    let s: Vec<f64> = rho.iter().map(|&r| b.sample_cubic(r, 1.0).powf(-0.25)).collect();
    let mm = s.len();
    if mm < 4 {
        return Err(Error::param("d_xi", "travel-time grid has fewer than 4 nodes"));
    }
    let r: Vec<f64> = (0..mm)
        .map(|k| {
            let (d1, d2) = if k == 0 {
                (
                    (-3.0 * s[0] + 4.0 * s[1] - s[2]) / (2.0 * d_xi),
                    (2.0 * s[0] - 5.0 * s[1] + 4.0 * s[2] - s[3]) / (d_xi * d_xi),
                )
            } else if k == mm - 1 {
                (
                    (3.0 * s[k] - 4.0 * s[k - 1] + s[k - 2]) / (2.0 * d_xi),
                    (2.0 * s[k] - 5.0 * s[k - 1] + 4.0 * s[k - 2] - s[k - 3]) / (d_xi * d_xi),
                )
            } else if k == 1 || k == mm - 2 {
                (
                    (s[k + 1] - s[k - 1]) / (2.0 * d_xi),
                    (s[k + 1] - 2.0 * s[k] + s[k - 1]) / (d_xi * d_xi),
                )
            } else {
                (
                    (-s[k + 2] + 8.0 * s[k + 1] - 8.0 * s[k - 1] + s[k - 2]) / (12.0 * d_xi),
                    (-s[k + 2] + 16.0 * s[k + 1] - 30.0 * s[k] + 16.0 * s[k - 1] - s[k - 2]) / (12.0 * d_xi * d_xi),
                )
            };
            d2 / s[k] - 2.0 * (d1 / s[k]).powi(2)
        })
        .collect();
    Ok(ForwardMap {
        xi,
        r: Profile1D {
            start: 0.0,
            step: d_xi,
            values: r,
            label: ProfileLabel::R,
        },
        s: Profile1D {
            start: 0.0,
            step: d_xi,
            values: s,
            label: ProfileLabel::S,
        },
    })
}

/// Integrates `S'' = r S + 2 S'²/S`, `ρ' = S²` from `ξ = r.start` with
/// `S = 1, S' = 0, ρ = 0` by classical RK4 (r between nodes by cubic
/// interpolation, 0 outside its grid).
///
/// Returns `(ρ(ξ_k), S(ξ_k), S'(ξ_k))` at the nodes of `r`.
pub fn reconstruct_b_scaled(r: &Profile1D) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let h = r.step;
    let f = |xi: f64, y: [f64; 3]| -> [f64; 3] {
        let rv = r.sample_cubic(xi, 0.0);
        [y[1], rv * y[0] + 2.0 * y[1] * y[1] / y[0], y[0] * y[0]]
    };
    let add = |y: [f64; 3], k: [f64; 3], s: f64| [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2]];
    let mut y = [1.0, 0.0, 0.0];
    let n = r.len();
    let (mut rho, mut s, mut ds) = (vec![0.0], vec![1.0], vec![0.0]);
    for k in 0..n.saturating_sub(1) {
        let xi = r.x(k);
        let k1 = f(xi, y);
        let k2 = f(xi + h / 2.0, add(y, k1, h / 2.0));
        let k3 = f(xi + h / 2.0, add(y, k2, h / 2.0));
        let k4 = f(xi + h, add(y, k3, h));
        for c in 0..3 {
            y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        if !(y[0] > 1e-6 && y[0].is_finite() && y[1].is_finite()) {
            return Err(Error::BlowUp { xi: xi + h, s: y[0] });
        }
        rho.push(y[2]);
        s.push(y[0]);
        ds.push(y[1]);
    }
    Ok((rho, s, ds))
}

/// Recovers `b = S^{-4}` from `r(ξ)` and returns it on a uniform physical
/// grid: scaled `ρ̂ ∈ [0, ρ̂(ξ_end)]` with step `r.step`, mapped through
/// `window`.
pub fn reconstruct_b(r: &Profile1D, window: &SlantWindow) -> Result<Profile1D> {
    let (rho, s, ds) = reconstruct_b_scaled(r)?;
    let b: Vec<f64> = s.iter().map(|s| s.powi(-4)).collect();
    // db/dρ = (db/dξ)/(dρ/dξ) = −4 S'/S⁵ / S².
    let db: Vec<f64> = s.iter().zip(&ds).map(|(s, d)| -4.0 * d / s.powi(7)).collect();
    let h = r.step;
    let n_out = (rho[rho.len() - 1] / h + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(n_out);
    let mut seg = 0;
    for k in 0..n_out {
        let x = k as f64 * h;
        while seg + 2 < rho.len() && rho[seg + 1] < x {
            seg += 1;
        }
        if rho.len() < 2 {
            out.push(b[0]);
            continue;
        }
        let w = rho[seg + 1] - rho[seg];
        let u = ((x - rho[seg]) / w).clamp(0.0, 1.0);
        let (u2, u3) = (u * u, u * u * u);
        out.push(
            (2.0 * u3 - 3.0 * u2 + 1.0) * b[seg]
                + (u3 - 2.0 * u2 + u) * w * db[seg]
                + (-2.0 * u3 + 3.0 * u2) * b[seg + 1]
                + (u3 - u2) * w * db[seg + 1],
        );
    }
    Ok(Profile1D {
        start: window.rho_min,
        step: h * window.length(),
        values: out,
        label: ProfileLabel::B,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneous_maps() {
        let b = Profile1D::from_fn(0.0, 0.01, 201, ProfileLabel::B, |_| 1.0);
        let fm = forward_map_b_to_r(&b, 0.01).unwrap();
        assert!((fm.xi[fm.xi.len() - 1] - 2.0).abs() < 1e-9);
        assert!(fm.s.values.iter().all(|s| (s - 1.0).abs() < 1e-14));
        assert!(fm.r.values.iter().all(|r| r.abs() < 1e-9));
        let zero = Profile1D::from_fn(0.0, 0.01, 101, ProfileLabel::R, |_| 0.0);
        let rb = reconstruct_b(&zero, &SlantWindow::unit()).unwrap();
        assert!(rb.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let (rho, _, _) = reconstruct_b_scaled(&zero).unwrap();
        assert!((rho[100] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_four_doubles_travel_time() {
        let b = Profile1D::from_fn(0.0, 0.001, 1001, ProfileLabel::B, |_| 4.0);
        let fm = forward_map_b_to_r(&b, 0.01).unwrap();
        assert!((fm.xi[fm.xi.len() - 1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn smooth_bump_round_trip() {
        let bump = |x: f64| 1.0 + 1.5 * (-((x - 1.0) / 0.2).powi(2)).exp();
        let b = Profile1D::from_fn(0.0, 0.001, 2501, ProfileLabel::B, bump);
        let fm = forward_map_b_to_r(&b, 0.005).unwrap();
        let rb = reconstruct_b(&fm.r, &SlantWindow::unit()).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..rb.len() {
            let x = rb.x(k);
            if x > 2.4 {
                break;
            }
            worst = worst.max((rb.values[k] - bump(x)).abs() / bump(x));
        }
        assert!(worst < 1e-3, "{worst}");
        let (_, peak) = rb.argmax_in(0.5, 1.5).unwrap();
        assert!((peak - 2.5).abs() / 2.5 < 5e-3);
    }

    #[test]
    fn inconsistent_r_blows_up() {
        let r = Profile1D::from_fn(0.0, 0.01, 400, ProfileLabel::R, |_| -50.0);
        assert!(matches!(reconstruct_b_scaled(&r), Err(Error::BlowUp { .. })));
    }
}
