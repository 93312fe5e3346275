//! Incident field of the dish antenna.

use crate::error::{Error, Result};
use crate::linalg::gauss_legendre;
use crate::scene::{dist, smoothstep_weight, Point, Pulse, ScanGeometry};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Outgoing Green function `exp(ik r)/(4π r)`.
pub fn green(k: f64, r: f64) -> Complex64 {
    Complex64::from_polar(1.0 / (4.0 * PI * r), k * r)
}

/// Quadrature on the dish `S(x0, θ, D)`: the disk of diameter D through
/// `x0` with normal k0, weighted by the aperture smoothing `m`.
#[derive(Debug, Clone)]
pub struct DiskQuadrature {
    pub center: Point,
    pub points: Vec<Point>,
    /// Area element times `m`.
    pub weights: Vec<f64>,
}

impl DiskQuadrature {
    /// Gauss-Legendre in the radius (separately on the flat part and on the
    /// smoothing rim) times the uniform rule in angle.
    pub fn new(geom: &ScanGeometry, x0: &Point, radial: usize, angular: usize) -> Self {
        let outer = geom.dish / 2.0;
        let inner = outer - geom.eta;
        let k0 = geom.k0();
        let e1 = [1.0, 0.0, 0.0];
        let e2 = [0.0, k0[2], -k0[1]];
        let (gx, gw) = gauss_legendre(radial.max(1));
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (a, b) in [(0.0, inner), (inner, outer)] {
            let half = 0.5 * (b - a);
            for (x, w) in gx.iter().zip(&gw) {
                let r = a + half * (x + 1.0);
                let m = smoothstep_weight(r, outer, geom.eta);
                let wr = w * half * r * m * 2.0 * PI / angular as f64;
                for j in 0..angular {
                    let phi = 2.0 * PI * (j as f64 + 0.5) / angular as f64;
                    let (s, c) = phi.sin_cos();
                    points.push([
                        x0[0] + r * (c * e1[0] + s * e2[0]),
                        x0[1] + r * (c * e1[1] + s * e2[1]),
                        x0[2] + r * (c * e1[2] + s * e2[2]),
                    ]);
                    weights.push(wr);
                }
            }
        }
        DiskQuadrature {
            center: *x0,
            points,
            weights,
        }
    }

    /// `∫ m dS`.
    pub fn effective_area(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `∫_S G_k(x, η) m dS(η)`; rejects points closer than `min_distance`
    /// to the dish centre, where the fixed rule degrades.
    pub fn integrate(&self, x: &Point, k: f64, min_distance: f64) -> Result<Complex64> {
        let d = dist(x, &self.center);
        if d < min_distance {
            return Err(Error::QuadratureDegeneracy {
                distance: d,
                minimum: min_distance,
            });
        }
        Ok(self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| green(k, dist(x, p)) * *w)
            .sum())
    }
}

/// `v0(x, x0, k) = X(k) ∫_S G_k(x, η) m dS(η)` with the default rule
/// (8 radial nodes per ring, 32 angles). Requires `|x − x0| ≥ D`.
pub fn incident_field_v0(geom: &ScanGeometry, pulse: &Pulse, x: &Point, x0: &Point, k: f64) -> Result<Complex64> {
    let q = DiskQuadrature::new(geom, x0, 8, 32);
    Ok(pulse.spectrum(k * geom.c0) * q.integrate(x, k, geom.dish)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn far_field_limit() {
        let g = ScanGeometry::standard();
        let p = Pulse::standard();
        let x0 = [0.0; 3];
        let q = DiskQuadrature::new(&g, &x0, 8, 32);
        // ∫ m dS over the quintic rim: π[(R−η)² + rim integral]; check it
        // against a fine rule instead of a closed form.
        let fine = DiskQuadrature::new(&g, &x0, 40, 8).effective_area();
        assert!((q.effective_area() - fine).abs() < 1e-10 * fine);
        let k = p.omega0 / g.c0;
        let r = 100.0 * g.dish;
        let k0 = g.k0();
        let x = [r * k0[0], r * k0[1], r * k0[2]];
        let v = incident_field_v0(&g, &p, &x, &x0, k).unwrap();
        let expect = p.spectrum(k * g.c0).norm() * fine / (4.0 * PI * r);
        assert!((v.norm() - expect).abs() < 0.01 * expect, "{} {}", v.norm(), expect);
    }

    #[test]
    fn too_close_is_rejected() {
        let g = ScanGeometry::standard();
        let p = Pulse::standard();
        let e = incident_field_v0(&g, &p, &[0.0, 0.3, 0.0], &[0.0; 3], 5.0);
        assert!(matches!(e, Err(Error::QuadratureDegeneracy { .. })));
    }

    #[test]
    fn spectrum_peaks_at_carrier() {
        let p = Pulse::standard();
        let at = |w: f64| p.spectrum(w).norm();
        let w0 = p.omega0;
        assert!(at(w0) > at(0.5 * w0) && at(w0) > at(2.0 * w0));
        assert!(at(w0) > 0.5 * p.tau);
    }
}
