//! Descent with Armijo backtracking.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A differentiable objective.
pub trait Objective {
    fn value(&self, x: &[f64]) -> f64;

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>);

    /// Returns `M⁻¹ g` for a positive definite descent metric `M` at `x`, or
    /// `None` for the Euclidean metric.
    fn precondition(&self, _x: &[f64], _g: &[f64]) -> Option<Result<Vec<f64>>> {
        None
    }

    /// Maps `x` back into the admissible set.
    fn project(&self, _x: &mut [f64]) {}
}

/// Metric in which the steepest-descent direction is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DescentMetric {
    /// Plain gradient.
    Euclidean,
    /// Gauss-Newton metric of the least-squares functional.
    GaussNewton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentOptions {
    pub max_iter: usize,
    /// Stop when the gradient norm falls below this value.
    pub tol: f64,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    /// Step reduction factor.
    pub shrink: f64,
    pub max_halvings: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            max_iter: 20,
            tol: 1e-12,
            armijo: 1e-4,
            shrink: 0.5,
            max_halvings: 60,
        }
    }
}

/// Trace of a descent run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DescentReport {
    pub iterations: usize,
    pub initial_value: f64,
    pub value: f64,
    pub grad_norm: f64,
    /// Objective value after each accepted step, starting with the initial one.
    pub history: Vec<f64>,
    /// True when a stopping test fired before `max_iter`.
    pub converged: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Minimizes `obj` from `x` by descent along `−M⁻¹∇J` with Armijo
/// backtracking.
///
/// The loop stops when `|∇J| < tol`, when the predicted decrease `−∇J·d`
/// is at the rounding level of `J`, or after `max_iter` steps. Accepted
/// steps decrease `J` monotonically.
pub fn armijo_descent<O: Objective + ?Sized>(obj: &O, x: &mut Vec<f64>, opts: &DescentOptions) -> Result<DescentReport> {
    obj.project(x);
    let (mut f, mut g) = obj.value_and_gradient(x);
    let mut report = DescentReport {
        initial_value: f,
        value: f,
        grad_norm: norm(&g),
        history: vec![f],
        ..Default::default()
    };
    let mut last_step: Option<f64> = None;
    for it in 0..opts.max_iter {
        let gn = norm(&g);
        report.grad_norm = gn;
        if gn < opts.tol {
            report.converged = true;
            return Ok(report);
        }
        let (mut d, metric) = match obj.precondition(x, &g) {
            Some(r) => (r?, true),
            None => (g.clone(), false),
        };
        d.iter_mut().for_each(|v| *v = -*v);
        let mut slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            d = g.iter().map(|v| -v).collect();
            slope = -gn * gn;
        }
        if -slope <= 64.0 * f64::EPSILON * f.abs() {
            report.converged = true;
            return Ok(report);
        }
        let mut step = if metric {
            1.0
        } else {
            last_step.map_or(1.0 / gn.max(1.0), |s| (2.0 * s).min(1e12))
        };
        let mut accepted = None;
        let mut trial = x.clone();
        for _ in 0..=opts.max_halvings {
            trial.iter_mut().zip(x.iter().zip(&d)).for_each(|(t, (x, d))| *t = x + step * d);
            obj.project(&mut trial);
            let ft = obj.value(&trial);
            if ft <= f + opts.armijo * step * slope {
                accepted = Some(ft);
                break;
            }
            step *= opts.shrink;
        }
        if accepted.is_none() {
            return Err(Error::LineSearch {
                iteration: it,
                halvings: opts.max_halvings,
                value: f,
                grad_norm: gn,
            });
        }
        last_step = Some(step);
        *x = trial;
        let (fv, gv) = obj.value_and_gradient(x);
        f = fv;
        g = gv;
        report.iterations = it + 1;
        report.value = f;
        report.history.push(f);
    }
    report.grad_norm = norm(&g);
    report.converged = report.grad_norm < opts.tol;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        diag: Vec<f64>,
        center: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn value(&self, x: &[f64]) -> f64 {
            x.iter().zip(&self.center).zip(&self.diag).map(|((x, c), d)| d * (x - c).powi(2)).sum()
        }
        fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
            let g = x.iter().zip(&self.center).zip(&self.diag).map(|((x, c), d)| 2.0 * d * (x - c)).collect();
            (self.value(x), g)
        }
    }

    #[test]
    fn stationary_start_returns_immediately() {
        let q = Quadratic {
            diag: vec![1.0, 3.0],
            center: vec![0.5, -1.0],
        };
        let mut x = q.center.clone();
        let r = armijo_descent(&q, &mut x, &DescentOptions::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert!(r.converged);
        assert_eq!(x, q.center);
    }

    #[test]
    fn converges_monotonically() {
        let q = Quadratic {
            diag: vec![1.0, 10.0, 0.3],
            center: vec![0.5, -1.0, 2.0],
        };
        let mut x = vec![0.0; 3];
        let opts = DescentOptions {
            max_iter: 5000,
            tol: 1e-9,
            ..Default::default()
        };
        let r = armijo_descent(&q, &mut x, &opts).unwrap();
        assert!(r.converged);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(x.iter().zip(&q.center).all(|(a, b)| (a - b).abs() < 1e-8));
    }
}
