//! Pulses, scan geometry, dielectric phantoms and one-dimensional profiles.
//!
//! The antenna moves along the x-axis `l0` and looks along the boresight
//! `k0 = (0, cos θ, sin θ)`. The transmitted signal is the linear chirp
//!
//! ```text
//! p(t) = χ_τ(t) · exp(-i α (t - τ/2)²) · exp(-i ω0 t)
//! ```
//!
//! where `χ_τ` is the indicator of `(0, τ)`. All lengths are meters, times
//! seconds and frequencies rad/s.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type Point = [f64; 3];

pub(crate) fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Linear frequency-modulated pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Pulse {
    /// Carrier frequency ω0 in rad/s.
    pub omega0: f64,
    /// Chirp rate α in rad/s².
    pub chirp_rate: f64,
    /// Pulse duration τ in seconds.
    pub tau: f64,
}

impl Pulse {
    pub fn new(omega0: f64, chirp_rate: f64, tau: f64) -> Result<Self> {
        if !(omega0 > 0.0 && omega0.is_finite()) {
            return Err(Error::param("omega0", "must be positive"));
        }
        if !(chirp_rate >= 0.0 && chirp_rate.is_finite()) {
            return Err(Error::param("chirp_rate", "must be non-negative"));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::param("tau", "must be positive"));
        }
        Ok(Pulse {
            omega0,
            chirp_rate,
            tau,
        })
    }

    /// The radar pulse used throughout the simulations: ω0 = 1.885e9 rad/s,
    /// α = 1.885e17 rad/s², τ = 5 ns.
    pub fn standard() -> Self {
        Pulse {
            omega0: 1.885e9,
            chirp_rate: 1.885e17,
            tau: 5e-9,
        }
    }

    /// Evaluates the chirp at time `t`.
    pub fn chirp(&self, t: f64) -> Complex64 {
        chirp(self, t)
    }

    /// Fourier transform `X(ω) = ∫ p(t) exp(iωt) dt`, by composite Simpson
    /// quadrature over the pulse support.
    pub fn spectrum(&self, omega: f64) -> Complex64 {
        let n = 4096;
        let h = self.tau / n as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..=n {
            let t = i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let c = self.tau / 2.0;
            let phase = -self.chirp_rate * (t - c) * (t - c) - self.omega0 * t + omega * t;
            acc += w * Complex64::from_polar(1.0, phase);
        }
        acc * (h / 3.0)
    }
}

/// `χ_τ(t)·exp(−iα(t−τ/2)²)·exp(−iω0 t)`, exactly zero outside `(0, τ)`.
pub fn chirp(pulse: &Pulse, t: f64) -> Complex64 {
    if !(t > 0.0 && t < pulse.tau) {
        return Complex64::new(0.0, 0.0);
    }
    let c = t - pulse.tau / 2.0;
    Complex64::from_polar(1.0, -pulse.chirp_rate * c * c - pulse.omega0 * t)
}

impl Default for Pulse {
    fn default() -> Self {
        Pulse::standard()
    }
}

/// Antenna track, dish and propagation constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanGeometry {
    /// Aperture length L (m).
    pub length: f64,
    /// Number of antenna positions N.
    pub count: usize,
    /// Elevation angle θ (rad).
    pub theta: f64,
    /// Dish diameter D (m).
    pub dish: f64,
    /// Rim smoothing margin η (m), `0 < η < D/2`.
    pub eta: f64,
    /// Wave speed c0 (m/s).
    pub c0: f64,
}

impl ScanGeometry {
    pub fn new(length: f64, count: usize, theta: f64, dish: f64, eta: f64, c0: f64) -> Result<Self> {
        let g = ScanGeometry {
            length,
            count,
            theta,
            dish,
            eta,
            c0,
        };
        g.validate()?;
        Ok(g)
    }

    /// 61 positions over 5.5 m, θ = π/6, a 0.7 m dish.
    pub fn standard() -> Self {
        ScanGeometry {
            length: 5.5,
            count: 61,
            theta: std::f64::consts::FRAC_PI_6,
            dish: 0.7,
            eta: 0.1,
            c0: 299_792_458.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::param("count", "need at least one antenna position"));
        }
        if !(self.length >= 0.0 && self.length.is_finite()) {
            return Err(Error::param("length", "must be non-negative"));
        }
        if !(self.dish > 0.0) {
            return Err(Error::param("dish", "must be positive"));
        }
        if !(self.eta > 0.0 && self.eta < self.dish / 2.0) {
            return Err(Error::param("eta", format!("must lie in (0, D/2) = (0, {})", self.dish / 2.0)));
        }
        if !(self.c0 > 0.0) {
            return Err(Error::param("c0", "must be positive"));
        }
        Ok(())
    }

    /// Unit boresight vector, orthogonal to the x-axis.
    pub fn k0(&self) -> Point {
        [0.0, self.theta.cos(), self.theta.sin()]
    }

    /// Antenna x-coordinates: equally spaced with spacing `L/(N−1)`, centered
    /// on the origin. A single antenna sits at the origin.
    pub fn positions(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![0.0];
        }
        let h = self.length / (self.count - 1) as f64;
        (0..self.count)
            .map(|n| -self.length / 2.0 + n as f64 * h)
            .collect()
    }

    pub fn antenna(&self, n: usize) -> Point {
        [self.positions()[n], 0.0, 0.0]
    }

    /// Theoretical cross-range resolution D/2.
    pub fn cross_range_resolution(&self) -> f64 {
        self.dish / 2.0
    }
}

impl Default for ScanGeometry {
    fn default() -> Self {
        ScanGeometry::standard()
    }
}

/// Quintic smoothstep profile of the dish aperture weight `m`.
///
/// Equal to 1 inside radius `D/2 − η`, 0 from radius `D/2` on, and
/// `1 − (6u⁵ − 15u⁴ + 10u³)` with `u = (|x − x0| − (D/2 − η))/η` in between.
pub fn smoothing_m(geom: &ScanGeometry, x: &Point, x0: &Point) -> Result<f64> {
    if !(geom.eta > 0.0 && geom.eta < geom.dish / 2.0) {
        return Err(Error::param("eta", "must lie in (0, D/2)"));
    }
    Ok(smoothstep_weight(dist(x, x0), geom.dish / 2.0, geom.eta))
}

pub(crate) fn smoothstep_weight(radius: f64, outer: f64, eta: f64) -> f64 {
    let inner = outer - eta;
    if radius <= inner {
        1.0
    } else if radius >= outer {
        0.0
    } else {
        let u = (radius - inner) / eta;
        1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
    }
}

/// Geometric primitive of a phantom body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Shape {
    Ball { center: Point, diameter: f64 },
    Prism { center: Point, sizes: Point },
}

impl Shape {
    pub fn contains(&self, x: &Point) -> bool {
        match self {
            Shape::Ball { center, diameter } => dist(x, center) <= diameter / 2.0,
            Shape::Prism { center, sizes } => (0..3).all(|a| (x[a] - center[a]).abs() <= sizes[a] / 2.0),
        }
    }

    /// Axis-aligned bounding box as (lower corner, upper corner).
    pub fn bounds(&self) -> (Point, Point) {
        match self {
            Shape::Ball { center, diameter } => {
                let r = diameter / 2.0;
                ([center[0] - r, center[1] - r, center[2] - r], [center[0] + r, center[1] + r, center[2] + r])
            }
            Shape::Prism { center, sizes } => (
                [0, 1, 2].map(|a| center[a] - sizes[a] / 2.0),
                [0, 1, 2].map(|a| center[a] + sizes[a] / 2.0),
            ),
        }
    }

    pub fn center(&self) -> Point {
        match self {
            Shape::Ball { center, .. } | Shape::Prism { center, .. } => *center,
        }
    }

    /// Extent along the x-axis (cross range).
    pub fn cross_range_size(&self) -> f64 {
        match self {
            Shape::Ball { diameter, .. } => *diameter,
            Shape::Prism { sizes, .. } => sizes[0],
        }
    }
}

/// Homogeneous body of a phantom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Body {
    #[serde(flatten)]
    pub shape: Shape,
    pub eps: f64,
}

/// Piecewise-constant dielectric scene inside the cube Ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phantom3D {
    pub domain_center: Point,
    /// Side length of Ω (m).
    pub side: f64,
    pub wall: Option<Body>,
    pub targets: Vec<Body>,
}

impl Phantom3D {
    pub fn new(domain_center: Point, side: f64, wall: Option<Body>, targets: Vec<Body>) -> Result<Self> {
        let p = Phantom3D {
            domain_center,
            side,
            wall,
            targets,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.side > 0.0) {
            return Err(Error::param("side", "must be positive"));
        }
        let h = self.side / 2.0;
        if self.domain_center[1].abs() < h && self.domain_center[2].abs() < h {
            return Err(Error::param("domain_center", "the domain cube intersects the antenna track"));
        }
        for b in self.bodies() {
            if !(b.eps >= 1.0 && b.eps.is_finite()) {
                return Err(Error::param("eps", format!("dielectric constant {} is below 1", b.eps)));
            }
        }
        Ok(())
    }

    pub fn bodies(&self) -> impl Iterator<Item = &Body> {
        self.wall.iter().chain(self.targets.iter())
    }

    pub fn in_domain(&self, x: &Point) -> bool {
        (0..3).all(|a| (x[a] - self.domain_center[a]).abs() <= self.side / 2.0)
    }

    /// Dielectric constant at `x`; overlapping bodies take the largest value.
    pub fn eval_eps(&self, x: &Point) -> f64 {
        if !self.in_domain(x) {
            return 1.0;
        }
        self.bodies()
            .filter(|b| b.shape.contains(x))
            .map(|b| b.eps)
            .fold(1.0, f64::max)
    }

    /// Slant distances from the antenna track to the nearest and farthest
    /// points of Ω.
    pub fn slant_range_bounds(&self) -> (f64, f64) {
        let h = self.side / 2.0;
        let (y0, y1) = (self.domain_center[1] - h, self.domain_center[1] + h);
        let (z0, z1) = (self.domain_center[2] - h, self.domain_center[2] + h);
        let near = |a: f64, b: f64| if a <= 0.0 && b >= 0.0 { 0.0 } else { a.abs().min(b.abs()) };
        let far = |a: f64, b: f64| a.abs().max(b.abs());
        (near(y0, y1).hypot(near(z0, z1)), far(y0, y1).hypot(far(z0, z1)))
    }

    /// Domain used by all reference models: side 3.2 m centred at (0, 6.6, 3.81).
    pub fn standard_domain() -> (Point, f64) {
        ([0.0, 6.6, 3.81], 3.2)
    }

    /// Wall slab 3.2 × 0.25 × 3.2 m with ε = 2.5.
    pub fn standard_wall() -> Body {
        Body {
            shape: Shape::Prism {
                center: [0.0, 5.125, 3.81],
                sizes: [3.2, 0.25, 3.2],
            },
            eps: 2.5,
        }
    }

    fn with_target(target: Body, wall: bool) -> Self {
        let (c, s) = Self::standard_domain();
        Phantom3D {
            domain_center: c,
            side: s,
            wall: wall.then(Self::standard_wall),
            targets: vec![target],
        }
    }

    /// Model A: ball of diameter 0.4 m at (0, 6.20, 4.06), ε = 2.5.
    pub fn model_a(wall: bool) -> Self {
        Self::with_target(
            Body {
                shape: Shape::Ball {
                    center: [0.0, 6.20, 4.06],
                    diameter: 0.4,
                },
                eps: 2.5,
            },
            wall,
        )
    }

    /// Model B: prism 0.9 × 0.4 × 0.4 m at (0, 6.0, 4.61).
    pub fn model_b(eps: f64, wall: bool) -> Self {
        Self::with_target(
            Body {
                shape: Shape::Prism {
                    center: [0.0, 6.0, 4.61],
                    sizes: [0.9, 0.4, 0.4],
                },
                eps,
            },
            wall,
        )
    }

    /// Model C: ball of diameter 0.4 m at (0, 6.0, 4.61).
    pub fn model_c(eps: f64, wall: bool) -> Self {
        Self::with_target(
            Body {
                shape: Shape::Ball {
                    center: [0.0, 6.0, 4.61],
                    diameter: 0.4,
                },
                eps,
            },
            wall,
        )
    }

    /// Wall alone, for clutter subtraction.
    pub fn wall_only() -> Self {
        let (c, s) = Self::standard_domain();
        Phantom3D {
            domain_center: c,
            side: s,
            wall: Some(Self::standard_wall()),
            targets: vec![],
        }
    }
}

/// Semantic role of a [`Profile1D`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileLabel {
    /// Coefficient b(ρ) of the 1-D wave equation.
    B,
    /// Potential r(ξ) in travel-time coordinates.
    R,
    /// S(ξ) = b^{-1/4}.
    S,
    /// Slant-range dielectric constant ε̃(ρ).
    EpsTilde,
}

/// Function of one variable sampled on the uniform grid `start + i·step`.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile1D {
    pub start: f64,
    pub step: f64,
    pub values: Vec<f64>,
    pub label: ProfileLabel,
}

impl Profile1D {
    pub fn new(start: f64, step: f64, values: Vec<f64>, label: ProfileLabel) -> Result<Self> {
        if !(step > 0.0 && step.is_finite() && start.is_finite()) {
            return Err(Error::param("step", "profile grid must be strictly increasing"));
        }
        Ok(Profile1D {
            start,
            step,
            values,
            label,
        })
    }

    pub fn from_fn(start: f64, step: f64, n: usize, label: ProfileLabel, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..n).map(|i| f(start + i as f64 * step)).collect();
        Profile1D {
            start,
            step,
            values,
            label,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.x(self.len().saturating_sub(1))
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    /// Linear interpolation; `fill` outside the grid.
    pub fn sample(&self, x: f64, fill: f64) -> f64 {
        let n = self.len();
        if n == 0 {
            return fill;
        }
        let u = (x - self.start) / self.step;
        if u < -1e-9 || u > (n - 1) as f64 + 1e-9 {
            return fill;
        }
        let u = u.clamp(0.0, (n - 1) as f64);
        let i = (u.floor() as usize).min(n.saturating_sub(2));
        if n == 1 {
            return self.values[0];
        }
        let w = u - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// Catmull-Rom cubic interpolation with clamped end stencils.
    pub fn sample_cubic(&self, x: f64, fill: f64) -> f64 {
        let n = self.len();
        if n < 4 {
            return self.sample(x, fill);
        }
        let u = (x - self.start) / self.step;
        if u < -1e-9 || u > (n - 1) as f64 + 1e-9 {
            return fill;
        }
        let u = u.clamp(0.0, (n - 1) as f64);
        let i = (u.floor() as usize).min(n - 2);
        let t = u - i as f64;
        let v = |k: isize| -> f64 {
            let k = k.clamp(0, n as isize - 1) as usize;
            self.values[k]
        };
        let i = i as isize;
        let (p0, p1, p2, p3) = if i == 0 {
            (3.0 * v(0) - 3.0 * v(1) + v(2), v(0), v(1), v(2))
        } else if i + 2 > n as isize - 1 {
            (v(i - 1), v(i), v(i + 1), 3.0 * v(i + 1) - 3.0 * v(i) + v(i - 1))
        } else {
            (v(i - 1), v(i), v(i + 1), v(i + 2))
        };
        0.5 * (2.0 * p1
            + (-p0 + p2) * t
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
            + (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t * t * t)
    }

    /// Position and value of the largest sample with abscissa in `[lo, hi]`.
    pub fn argmax_in(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        (0..self.len())
            .filter(|&i| self.x(i) >= lo && self.x(i) <= hi)
            .map(|i| (self.x(i), self.values[i]))
            .fold(None, |acc: Option<(f64, f64)>, c| match acc {
                Some(a) if a.1 >= c.1 => Some(a),
                _ => Some(c),
            })
    }
}

/// Two-bump reference coefficient
/// `b(ρ) = 1 + 1.5·g(ρ; 6.12, 0.29) + 4·g(ρ; 8.55, 0.46)` with
/// `g(ρ; c, w) = exp(−4 ln2 (ρ − c)²/w²)` (w is the full width at half maximum).
pub fn reference_b(rho: f64) -> f64 {
    let g = |c: f64, w: f64| (-4.0 * std::f64::consts::LN_2 * (rho - c).powi(2) / (w * w)).exp();
    1.0 + 1.5 * g(6.12, 0.29) + 4.0 * g(8.55, 0.46)
}

/// [`reference_b`] sampled on `start + i·step`, `i < n`.
pub fn reference_profile_b(start: f64, step: f64, n: usize) -> Profile1D {
    Profile1D::from_fn(start, step, n, ProfileLabel::B, reference_b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chirp_cutoff_and_center() {
        let p = Pulse::standard();
        assert_eq!(p.chirp(-1e-9), Complex64::new(0.0, 0.0));
        assert_eq!(p.chirp(p.tau), Complex64::new(0.0, 0.0));
        let c = p.chirp(p.tau / 2.0);
        let e = Complex64::from_polar(1.0, -p.omega0 * p.tau / 2.0);
        assert!((c - e).norm() < 1e-12);
    }

    #[test]
    fn chirp_spot_value() {
        let p = Pulse::standard();
        let t = 1e-9;
        // -α(t-τ/2)² - ω0 t = -1.885e17·(1.5e-9)² - 1.885e9·1e-9
        let phase: f64 = -0.424125 - 1.885;
        let c = p.chirp(t);
        assert!((c.re - phase.cos()).abs() < 1e-12);
        assert!((c.im - phase.sin()).abs() < 1e-12);
    }

    #[test]
    fn smoothing_endpoints() {
        let g = ScanGeometry::standard();
        let x0 = [0.0; 3];
        assert_eq!(smoothing_m(&g, &x0, &x0).unwrap(), 1.0);
        assert_eq!(smoothing_m(&g, &[g.dish / 2.0, 0.0, 0.0], &x0).unwrap(), 0.0);
        let mid = smoothing_m(&g, &[g.dish / 2.0 - g.eta / 2.0, 0.0, 0.0], &x0).unwrap();
        assert!(mid > 0.0 && mid < 1.0);
        let mut bad = g;
        bad.eta = g.dish;
        assert!(smoothing_m(&bad, &x0, &x0).is_err());
    }

    #[test]
    fn smoothing_is_c2_at_blend_ends() {
        let g = ScanGeometry::standard();
        let (outer, eta) = (g.dish / 2.0, g.eta);
        let m = |r: f64| smoothstep_weight(r, outer, eta);
        let h = 1e-4;
        for edge in [outer - eta, outer] {
            let left1 = m(edge) - m(edge - h);
            let right1 = m(edge + h) - m(edge);
            let left2 = m(edge) - 2.0 * m(edge - h) + m(edge - 2.0 * h);
            let right2 = m(edge + 2.0 * h) - 2.0 * m(edge + h) + m(edge);
            assert!((left1 - right1).abs() < 1e-6, "{left1} {right1}");
            assert!((left2 - right2).abs() < 1e-6, "{left2} {right2}");
        }
        let mut prev = 1.0;
        for i in 0..=1000 {
            let v = m(outer * i as f64 / 1000.0);
            assert!(v <= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn model_values() {
        let a = Phantom3D::model_a(true);
        assert_eq!(a.eval_eps(&[0.0, 6.20, 4.06]), 2.5);
        assert_eq!(a.eval_eps(&[0.0, 5.125, 3.81]), 2.5);
        assert_eq!(a.eval_eps(&[100.0, 0.0, 0.0]), 1.0);
        assert_eq!(a.eval_eps(&[0.0, 7.5, 3.0]), 1.0);
        let (lo, hi) = a.slant_range_bounds();
        assert!((lo - 5.47).abs() < 0.01, "{lo}");
        assert!((hi - 9.83).abs() < 0.01, "{hi}");
    }

    #[test]
    fn overlap_takes_max() {
        let (c, s) = Phantom3D::standard_domain();
        let ball = |eps| Body {
            shape: Shape::Ball {
                center: [0.0, 6.0, 4.0],
                diameter: 0.5,
            },
            eps,
        };
        let p = Phantom3D::new(c, s, None, vec![ball(2.0), ball(3.0)]).unwrap();
        assert_eq!(p.eval_eps(&[0.0, 6.0, 4.0]), 3.0);
    }

    #[test]
    fn validation() {
        assert!(Phantom3D::new([0.0, 0.5, 0.0], 2.0, None, vec![]).is_err());
        assert!(Pulse::new(-1.0, 0.0, 1.0).is_err());
        assert!(ScanGeometry::new(1.0, 0, 0.5, 0.7, 0.1, 3e8).is_err());
    }

    #[test]
    fn reference_profile_peaks() {
        assert!((reference_b(6.12) - 2.5).abs() < 1e-6);
        assert!((reference_b(8.55) - 5.0).abs() < 1e-6);
        assert!((reference_b(1e3) - 1.0).abs() < 1e-15);
        let p = reference_profile_b(5.0, 0.01, 500);
        assert_eq!(p.label, ProfileLabel::B);
        let (x, v) = p.argmax_in(7.5, 9.5).unwrap();
        assert!((x - 8.55).abs() < 1e-9 && (v - 5.0).abs() < 1e-6);
    }

    #[test]
    fn positions_spacing() {
        let g = ScanGeometry::standard();
        let x = g.positions();
        assert_eq!(x.len(), 61);
        assert!((x[1] - x[0] - 5.5 / 60.0).abs() < 1e-12);
        assert!(x[30].abs() < 1e-12);
        let k = g.k0();
        assert_eq!(k[0], 0.0);
        assert!((k[1] * k[1] + k[2] * k[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cubic_reproduces_quadratics() {
        let p = Profile1D::from_fn(0.0, 0.1, 30, ProfileLabel::R, |x| x * x - 2.0 * x);
        for x in [0.05, 0.77, 1.234, 2.85] {
            assert!((p.sample_cubic(x, 0.0) - (x * x - 2.0 * x)).abs() < 1e-12);
        }
        assert_eq!(p.sample(10.0, -7.0), -7.0);
    }
}
