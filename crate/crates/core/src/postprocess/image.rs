//! Slant-range images: assembly from per-antenna profiles, artifact
//! removal and file formats.

use crate::error::{Error, Result};
use crate::linalg::median;
use crate::scene::Profile1D;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt::Write as _;

/// `ε̃(x, ρ)` on a tensor grid; `values[i·nx + j]` is at `(x_grid[j], rho_grid[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlantRangeImage {
    pub x_grid: Vec<f64>,
    pub rho_grid: Vec<f64>,
    pub values: Vec<f64>,
}

/// Rectangle in the `(x, ρ)` plane, bounds inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x_lo: f64,
    pub x_hi: f64,
    pub rho_lo: f64,
    pub rho_hi: f64,
}

impl Region {
    pub fn contains(&self, x: f64, rho: f64) -> bool {
        x >= self.x_lo && x <= self.x_hi && rho >= self.rho_lo && rho <= self.rho_hi
    }
}

impl SlantRangeImage {
    pub fn new(x_grid: Vec<f64>, rho_grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != x_grid.len() * rho_grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {}x{} image",
                values.len(),
                rho_grid.len(),
                x_grid.len()
            )));
        }
        Ok(SlantRangeImage { x_grid, rho_grid, values })
    }

    pub fn nx(&self) -> usize {
        self.x_grid.len()
    }

    pub fn nrho(&self) -> usize {
        self.rho_grid.len()
    }

    pub fn get(&self, i_rho: usize, j_x: usize) -> f64 {
        self.values[i_rho * self.nx() + j_x]
    }

    /// Spacing of the x grid (0 for a single column).
    pub fn dx(&self) -> f64 {
        if self.nx() < 2 {
            0.0
        } else {
            (self.x_grid[self.nx() - 1] - self.x_grid[0]) / (self.nx() - 1) as f64
        }
    }

    /// 4-connected components of the cells above `1 + floor`, as flat
    /// indices, largest first (ties by first cell).
    pub fn components(&self, floor: f64) -> Vec<Vec<usize>> {
        let (nx, nr) = (self.nx(), self.nrho());
        let mut seen = vec![false; self.values.len()];
        let mut out = Vec::new();
        for start in 0..self.values.len() {
            if seen[start] || !(self.values[start] > 1.0 + floor) {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(c) = queue.pop_front() {
                comp.push(c);
                let (i, j) = (c / nx, c % nx);
                let mut push = |n: usize| {
                    if !seen[n] && self.values[n] > 1.0 + floor {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                };
                if i > 0 {
                    push(c - nx);
                }
                if i + 1 < nr {
                    push(c + nx);
                }
                if j > 0 {
                    push(c - 1);
                }
                if j + 1 < nx {
                    push(c + 1);
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        out
    }

    /// Cross-range extent of a set of cells: distinct columns times the x
    /// spacing.
    pub fn cross_range_extent(&self, cells: &[usize]) -> f64 {
        let mut cols: Vec<usize> = cells.iter().map(|c| c % self.nx()).collect();
        cols.sort_unstable();
        cols.dedup();
        cols.len() as f64 * self.dx()
    }

    /// CSV with axis headers: first row `rho\x,x_0,…`, then `rho_i,v_i0,…`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rho\\x");
        for x in &self.x_grid {
            let _ = write!(s, ",{x:?}");
        }
        s.push('\n');
        for (i, rho) in self.rho_grid.iter().enumerate() {
            let _ = write!(s, "{rho:?}");
            for j in 0..self.nx() {
                let _ = write!(s, ",{:?}", self.get(i, j));
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let parse = |line: usize, tok: &str| -> Result<f64> {
            tok.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: line + 1,
                message: format!("not a number: {tok:?}"),
            })
        };
        let (hl, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty image file".into(),
        })?;
        let mut cells = header.split(',');
        if cells.next().map(str::trim) != Some("rho\\x") {
            return Err(Error::Parse {
                line: hl + 1,
                message: "header must start with rho\\x".into(),
            });
        }
        let x_grid = cells.map(|t| parse(hl, t)).collect::<Result<Vec<_>>>()?;
        let mut rho_grid = Vec::new();
        let mut values = Vec::new();
        for (ln, line) in lines {
            let row = line.split(',').map(|t| parse(ln, t)).collect::<Result<Vec<_>>>()?;
            if row.len() != x_grid.len() + 1 {
                return Err(Error::Parse {
                    line: ln + 1,
                    message: format!("expected {} fields, found {}", x_grid.len() + 1, row.len()),
                });
            }
            rho_grid.push(row[0]);
            values.extend_from_slice(&row[1..]);
        }
        SlantRangeImage::new(x_grid, rho_grid, values)
    }

    /// 16-bit binary PGM, first row = smallest ρ, first column = smallest x.
    /// Gray level `g = round(65535 (v − lo)/(hi − lo))` with `lo`, `hi` the
    /// image minimum and maximum (`hi = lo + 1` for a flat image); the
    /// returned sidecar text records the mapping.
    pub fn to_pgm(&self) -> (Vec<u8>, String) {
        let lo = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if self.values.is_empty() { (0.0, 1.0) } else { (lo, if hi > lo { hi } else { lo + 1.0 }) };
        let mut out = format!("P5\n{} {}\n65535\n", self.nx(), self.nrho()).into_bytes();
        for v in &self.values {
            let g = (65535.0 * (v - lo) / (hi - lo)).round().clamp(0.0, 65535.0) as u16;
            out.extend_from_slice(&g.to_be_bytes());
        }
        let side = format!(
            "# gray = round(65535 * (value - lo) / (hi - lo))\nlo = {lo:?}\nhi = {hi:?}\nwidth = {}\nheight = {}\n",
            self.nx(),
            self.nrho()
        );
        (out, side)
    }
}

fn refine(grid: &[f64], factor: usize) -> Vec<f64> {
    if grid.len() < 2 {
        return grid.to_vec();
    }
    let mut out = Vec::with_capacity((grid.len() - 1) * factor + 1);
    for w in grid.windows(2) {
        for s in 0..factor {
            out.push(w[0] + (w[1] - w[0]) * s as f64 / factor as f64);
        }
    }
    out.push(grid[grid.len() - 1]);
    out
}

/// Stacks the profiles as columns at `xs` and interpolates bilinearly onto
/// a mesh `factor` times finer in both axes (factor 4 by default in the
/// pipeline).
pub fn assemble_image(profiles: &[Profile1D], xs: &[f64], factor: usize) -> Result<SlantRangeImage> {
    let first = profiles.first().ok_or_else(|| Error::ShapeMismatch("no profiles".into()))?;
    if xs.len() != profiles.len() {
        return Err(Error::ShapeMismatch(format!("{} positions for {} profiles", xs.len(), profiles.len())));
    }
    for p in profiles {
        let same = p.len() == first.len()
            && (p.start - first.start).abs() <= 1e-9 * (1.0 + first.start.abs())
            && (p.step - first.step).abs() <= 1e-12 * first.step;
        if !same {
            return Err(Error::ShapeMismatch("profiles do not share one slant-range grid".into()));
        }
    }
    let factor = factor.max(1);
    let x_grid = refine(xs, factor);
    let rho_grid = refine(&first.grid(), factor);
    let (nx, nr) = (x_grid.len(), rho_grid.len());
    let mut values = vec![0.0; nx * nr];
    let coarse = |fine: usize, n: usize| -> (usize, f64) {
        if n < 2 {
            return (0, 0.0);
        }
        let k = (fine / factor).min(n - 2);
        (k, (fine - k * factor) as f64 / factor as f64)
    };
    for i in 0..nr {
        let (ki, ui) = coarse(i, first.len());
        for j in 0..nx {
            let (kj, uj) = coarse(j, profiles.len());
            let at = |a: usize, b: usize| profiles[b.min(profiles.len() - 1)].values[a.min(first.len() - 1)];
            let v = if profiles.len() < 2 {
                at(ki, 0) * (1.0 - ui) + at(ki + 1, 0) * ui
            } else {
                (at(ki, kj) * (1.0 - ui) + at(ki + 1, kj) * ui) * (1.0 - uj)
                    + (at(ki, kj + 1) * (1.0 - ui) + at(ki + 1, kj + 1) * ui) * uj
            };
            values[i * nx + j] = if first.len() < 2 { at(0, kj) * (1.0 - uj) + at(0, kj + 1) * uj } else { v };
        }
    }
    SlantRangeImage::new(x_grid, rho_grid, values)
}

/// Value artifacts: each antenna with `x` in the region contributes the peak
/// of its profile over the region's ρ range. Antennas whose peak exceeds
/// `1 + floor` are active; an active antenna deviating from the median of
/// the active peaks by more than `sigma` (relative) is set to 1 over the
/// region. Repeated until nothing changes, so the result is a fixed point.
pub fn remove_value_artifacts(
    profiles: &[Profile1D],
    xs: &[f64],
    region: &Region,
    sigma: f64,
    floor: f64,
) -> Result<Vec<Profile1D>> {
    if xs.len() != profiles.len() {
        return Err(Error::ShapeMismatch(format!("{} positions for {} profiles", xs.len(), profiles.len())));
    }
    let mut out = profiles.to_vec();
    let in_x: Vec<usize> = (0..xs.len()).filter(|&n| xs[n] >= region.x_lo && xs[n] <= region.x_hi).collect();
    if in_x.is_empty() {
        return Err(Error::EmptyRegion("no antenna inside the region".into()));
    }
    let peak = |p: &Profile1D| -> f64 {
        (0..p.len())
            .filter(|&k| p.x(k) >= region.rho_lo && p.x(k) <= region.rho_hi)
            .map(|k| p.values[k])
            .fold(f64::NEG_INFINITY, f64::max)
    };
    loop {
        let active: Vec<(usize, f64)> = in_x
            .iter()
            .map(|&n| (n, peak(&out[n])))
            .filter(|(_, v)| *v > 1.0 + floor)
            .collect();
        let Some(med) = median(&active.iter().map(|a| a.1).collect::<Vec<_>>()) else {
            return Err(Error::EmptyRegion("no profile rises above the floor inside the region".into()));
        };
        let mut changed = false;
        for (n, v) in active {
            if (v - med).abs() / med > sigma {
                let p = &mut out[n];
                for k in 0..p.len() {
                    if p.x(k) >= region.rho_lo && p.x(k) <= region.rho_hi {
                        p.values[k] = 1.0;
                    }
                }
                changed = true;
            }
        }
        if !changed {
            return Ok(out);
        }
    }
}

/// Shape artifacts: connected above-floor regions narrower in cross range
/// than `min_extent` (D/2 in the pipeline) are set to 1. Single-column
/// images carry no cross-range information and are returned unchanged.
pub fn remove_shape_artifacts(image: &SlantRangeImage, min_extent: f64, floor: f64) -> SlantRangeImage {
    let mut out = image.clone();
    if image.nx() < 2 {
        return out;
    }
    for comp in image.components(floor) {
        if image.cross_range_extent(&comp) < min_extent * (1.0 - 1e-12) {
            for c in comp {
                out.values[c] = 1.0;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::ProfileLabel;

    fn flat(v: f64) -> Profile1D {
        Profile1D::from_fn(5.0, 0.1, 11, ProfileLabel::EpsTilde, |_| v)
    }

    #[test]
    fn constant_and_single_column() {
        let img = assemble_image(&[flat(2.0), flat(2.0), flat(2.0)], &[0.0, 0.1, 0.2], 4).unwrap();
        assert_eq!((img.nx(), img.nrho()), (9, 41));
        assert!(img.values.iter().all(|v| (v - 2.0).abs() < 1e-15));
        let ramp = Profile1D::from_fn(0.0, 1.0, 3, ProfileLabel::EpsTilde, |x| 1.0 + x);
        let one = assemble_image(&[ramp], &[0.0], 4).unwrap();
        assert_eq!(one.nx(), 1);
        assert!((one.get(2, 0) - 1.5).abs() < 1e-15);
        assert!(assemble_image(&[flat(1.0), ramp_like()], &[0.0, 1.0], 4).is_err());
    }

    fn ramp_like() -> Profile1D {
        Profile1D::from_fn(5.0, 0.2, 11, ProfileLabel::EpsTilde, |_| 1.0)
    }

    #[test]
    fn value_outlier_truncated() {
        let ps = vec![flat(2.0), flat(2.0), flat(4.0), flat(2.0)];
        let xs = [0.0, 0.1, 0.2, 0.3];
        let region = Region {
            x_lo: -1.0,
            x_hi: 1.0,
            rho_lo: 5.0,
            rho_hi: 6.0,
        };
        let out = remove_value_artifacts(&ps, &xs, &region, 0.15, 0.05).unwrap();
        assert!(out[2].values.iter().all(|v| *v == 1.0));
        assert_eq!(out[0], ps[0]);
        let again = remove_value_artifacts(&out, &xs, &region, 0.15, 0.05).unwrap();
        assert_eq!(again, out);
        let same = vec![flat(2.0); 4];
        assert_eq!(remove_value_artifacts(&same, &xs, &region, 0.15, 0.05).unwrap(), same);
    }

    #[test]
    fn shape_rule_is_inclusive() {
        // Columns 0.05 apart; a blob over 7 columns has extent 0.35.
        let xs: Vec<f64> = (0..20).map(|k| k as f64 * 0.05).collect();
        let rho = vec![1.0, 2.0, 3.0];
        let mut values = vec![1.0; 60];
        for j in 2..9 {
            values[20 + j] = 3.0;
        }
        values[20 + 15] = 3.0;
        let img = SlantRangeImage::new(xs, rho, values).unwrap();
        let out = remove_shape_artifacts(&img, 0.35, 0.05);
        assert_eq!(out.get(1, 15), 1.0);
        assert_eq!(out.get(1, 5), 3.0);
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let img = SlantRangeImage::new(vec![0.0, 0.5], vec![6.0, 6.1], vec![1.0, 2.0, 3.0, 1.25]).unwrap();
        assert_eq!(SlantRangeImage::from_csv(&img.to_csv()).unwrap(), img);
        let bad = "rho\\x,0,1\n6.0,1,2\n6.1,1,x\n";
        match SlantRangeImage::from_csv(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let (pgm, side) = img.to_pgm();
        assert!(pgm.starts_with(b"P5\n2 2\n65535\n"));
        assert_eq!(pgm.len(), 13 + 8);
        assert!(side.contains("hi = 3.0"));
    }
}
