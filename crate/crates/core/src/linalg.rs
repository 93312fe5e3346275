//! Small numerical kernels shared by the solvers: restarted GMRES, conjugate
//! gradients, golden-section search and Gauss-Legendre rules.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Iteration count and final relative residual of a Krylov solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovReport {
    pub iterations: usize,
    pub residual: f64,
}

fn cnorm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Restarted GMRES for `A x = b` with complex entries.
///
/// `apply(v, out)` writes `A v` into `out`. Stops once `|b − A x| ≤ tol·|b|`;
/// `x` holds the initial guess on entry and the solution on exit.
pub fn gmres(
    mut apply: impl FnMut(&[Complex64], &mut [Complex64]),
    b: &[Complex64],
    x: &mut [Complex64],
    restart: usize,
    tol: f64,
    max_iter: usize,
) -> Result<KrylovReport> {
    let n = b.len();
    let bnorm = cnorm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        return Ok(KrylovReport {
            iterations: 0,
            residual: 0.0,
        });
    }
    let m = restart.max(1);
    let zero = Complex64::new(0.0, 0.0);
    let mut total = 0;
    let mut w = vec![zero; n];
    loop {
        apply(x, &mut w);
        let r: Vec<Complex64> = b.iter().zip(&w).map(|(b, ax)| b - ax).collect();
        let beta = cnorm(&r);
        let mut rel = beta / bnorm;
        if rel <= tol {
            return Ok(KrylovReport {
                iterations: total,
                residual: rel,
            });
        }
        if total >= max_iter {
            return Err(Error::NonConvergence {
                solver: "GMRES",
                iterations: total,
                residual: rel,
            });
        }
        let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![zero; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![zero; m];
        let mut g = vec![zero; m + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k = 0;
        while k < m && total < max_iter {
            apply(&basis[k], &mut w);
            for (i, v) in basis.iter().enumerate() {
                let hik = cdot(v, &w);
                h[i][k] = hik;
                w.iter_mut().zip(v).for_each(|(wj, vj)| *wj -= hik * vj);
            }
            let hn = cnorm(&w);
            h[k + 1][k] = Complex64::new(hn, 0.0);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i].conj() * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let (a, bb) = (h[k][k], h[k + 1][k]);
            let den = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            if den == 0.0 {
                cs[k] = 1.0;
                sn[k] = zero;
            } else {
                cs[k] = a.norm() / den;
                let phase = if a.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { a / a.norm() };
                sn[k] = phase * bb.conj() / den;
            }
            h[k][k] = cs[k] * h[k][k] + sn[k] * h[k + 1][k];
            h[k + 1][k] = zero;
            g[k + 1] = -sn[k].conj() * g[k];
            g[k] *= cs[k];
            total += 1;
            k += 1;
            rel = g[k].norm() / bnorm;
            if rel <= tol || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut y = vec![zero; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            x.iter_mut().zip(&basis[j]).for_each(|(xi, vi)| *xi += yj * vi);
        }
    }
}

/// Conjugate gradients for a symmetric positive definite real operator.
///
/// Stops once `|b − A x| ≤ tol·|b|`. A non-positive curvature `pᵀAp` is
/// reported as a breakdown.
pub fn conjugate_gradient(
    mut apply: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<KrylovReport> {
    let n = b.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(KrylovReport {
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut ap = vec![0.0; n];
    apply(x, &mut ap);
    let mut r: Vec<f64> = b.iter().zip(&ap).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for it in 0..max_iter {
        let rel = rr.sqrt() / bnorm;
        if rel <= tol {
            return Ok(KrylovReport {
                iterations: it,
                residual: rel,
            });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NonConvergence {
                solver: "CG (breakdown)",
                iterations: it,
                residual: rel,
            });
        }
        let alpha = rr / pap;
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.iter_mut().zip(&ap).for_each(|(r, a)| *r -= alpha * a);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        p.iter_mut().zip(&r).for_each(|(p, r)| *p = r + beta * *p);
    }
    let rel = rr.sqrt() / bnorm;
    if rel <= tol {
        return Ok(KrylovReport {
            iterations: max_iter,
            residual: rel,
        });
    }
    Err(Error::NonConvergence {
        solver: "CG",
        iterations: max_iter,
        residual: rel,
    })
}

/// Outcome of [`golden_section`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenResult {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

/// Golden-section minimization of `f` on `[lo, hi]`.
///
/// Runs at most `iterations` interval reductions and stops early once `f`
/// drops to `f_stop` or below. Returns the best evaluated point, endpoints
/// included.
pub fn golden_section(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, iterations: usize, f_stop: f64) -> GoldenResult {
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut best = GoldenResult {
        x: a,
        value: f64::INFINITY,
        evaluations: 0,
    };
    let mut eval = |x: f64, best: &mut GoldenResult| {
        let v = f(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        best.evaluations += 1;
        if v < best.value {
            best.x = x;
            best.value = v;
        }
        v
    };
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let mut fc = eval(c, &mut best);
    if fc <= f_stop {
        return best;
    }
    let mut fd = eval(d, &mut best);
    for _ in 0..iterations {
        if best.value <= f_stop {
            return best;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = eval(c, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = eval(d, &mut best);
        }
    }
    best
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Median of a slice (mean of the two central values for even lengths).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((integral - 2.0 / 11.0).abs() < 1e-13);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let n = 30;
        let a = |i: usize, j: usize| -> Complex64 {
            if i == j {
                Complex64::new(4.0, 1.0)
            } else if j == i + 1 {
                Complex64::new(-1.0, 0.5)
            } else if i == j + 1 {
                Complex64::new(-0.3, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        };
        let xt: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let b: Vec<Complex64> = (0..n).map(|i| (0..n).map(|j| a(i, j) * xt[j]).sum()).collect();
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        let rep = gmres(
            |v, out| {
                for i in 0..n {
                    out[i] = (0..n).map(|j| a(i, j) * v[j]).sum();
                }
            },
            &b,
            &mut x,
            5,
            1e-12,
            500,
        )
        .unwrap();
        assert!(rep.residual <= 1e-12);
        let err: f64 = x.iter().zip(&xt).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn cg_solves_spd_system() {
        let n = 50;
        let apply = |v: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let l = if i > 0 { v[i - 1] } else { 0.0 };
                let r = if i + 1 < n { v[i + 1] } else { 0.0 };
                out[i] = 3.0 * v[i] - l - r;
            }
        };
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; n];
        conjugate_gradient(apply, &b, &mut x, 1e-12, 200).unwrap();
        let mut ax = vec![0.0; n];
        apply(&x, &mut ax);
        assert!(ax.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn golden_finds_parabola_minimum() {
        let r = golden_section(|x| (x - 1.234).powi(2), 0.0, 5.0, 60, -1.0);
        assert!((r.x - 1.234).abs() < 1e-7);
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
