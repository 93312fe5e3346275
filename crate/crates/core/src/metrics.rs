//! Target evaluation of slant-range images: median dielectric constant,
//! cross-range size, centre distance and their relative errors.

use crate::error::{Error, Result};
use crate::linalg::median;
use crate::postprocess::{Region, SlantRangeImage};
use crate::scene::Body;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// True target parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub eps: f64,
    /// Cross-range size (m).
    pub s_x: f64,
    /// Distance of the centre from the antenna track (m).
    pub rho_c: f64,
}

impl Truth {
    pub fn of_body(body: &Body) -> Self {
        let c = body.shape.center();
        Truth {
            eps: body.eps,
            s_x: body.shape.cross_range_size(),
            rho_c: c[1].hypot(c[2]),
        }
    }
}

/// Computed target values and relative errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetReport {
    pub eps_median: f64,
    pub s_x_comp: f64,
    pub rho_c_comp: f64,
    pub rel_err_eps: f64,
    pub rel_err_sx: f64,
    pub rel_err_rho: f64,
    /// `eps_median / 2.5`.
    pub contrast_nu: f64,
    pub cells: usize,
}

/// `|comp − true| / true`.
pub fn relative_error(comp: f64, truth: f64) -> f64 {
    (comp - truth).abs() / truth.abs()
}

/// `ν = ε_comp / ε_wall`.
pub fn contrast_nu(eps_comp: f64, eps_wall: f64) -> Result<f64> {
    if !(eps_wall > 0.0) {
        return Err(Error::param("eps_wall", "must be positive"));
    }
    Ok(eps_comp / eps_wall)
}

/// Evaluates the target in `image`. Without a region the target is the
/// largest 4-connected set of cells above `1 + floor`; with one, the
/// above-floor cells inside it. The centre distance is the
/// `(ε̃ − 1)`-weighted mean of ρ over the target cells.
pub fn evaluate_target(image: &SlantRangeImage, truth: &Truth, region: Option<&Region>, floor: f64) -> Result<TargetReport> {
    let nx = image.nx();
    let cells: Vec<usize> = match region {
        None => image.components(floor).into_iter().next().unwrap_or_default(),
        Some(r) => (0..image.values.len())
            .filter(|&c| r.contains(image.x_grid[c % nx], image.rho_grid[c / nx]) && image.values[c] > 1.0 + floor)
            .collect(),
    };
    if cells.is_empty() {
        return Err(Error::EmptyRegion("no image cell above the floor".into()));
    }
    let vals: Vec<f64> = cells.iter().map(|&c| image.values[c]).collect();
    let eps_median = median(&vals).expect("non-empty");
    let s_x_comp = image.cross_range_extent(&cells);
    let (num, den) = cells.iter().fold((0.0, 0.0), |(n, d), &c| {
        let w = image.values[c] - 1.0;
        (n + w * image.rho_grid[c / nx], d + w)
    });
    let rho_c_comp = num / den;
    Ok(TargetReport {
        eps_median,
        s_x_comp,
        rho_c_comp,
        rel_err_eps: relative_error(eps_median, truth.eps),
        rel_err_sx: relative_error(s_x_comp, truth.s_x),
        rel_err_rho: relative_error(rho_c_comp, truth.rho_c),
        contrast_nu: contrast_nu(eps_median, 2.5)?,
        cells: cells.len(),
    })
}

/// One row of the per-model table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    pub truth: Truth,
    pub report: TargetReport,
    /// Born baseline on the same data, when run.
    pub born: Option<BornRow>,
    /// False when artifact removal left no target and the report comes
    /// from the image before removal.
    #[serde(default = "yes")]
    pub cleaned: bool,
}

fn yes() -> bool {
    true
}

/// Born median and its error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BornRow {
    pub eps_median: f64,
    pub rel_err_eps: f64,
}

/// Fixed-width table: model, true and computed ε with error, size and
/// centre distance with errors, then the Born columns if present.
pub fn format_table(rows: &[ModelRow]) -> String {
    let born = rows.iter().any(|r| r.born.is_some());
    let mut s = format!(
        "{:<8} {:>6} {:>8} {:>7} {:>6} {:>8} {:>7} {:>6} {:>8} {:>7}",
        "model", "eps", "eps_comp", "d_eps", "s_x", "s_x_comp", "d_sx", "rho_c", "rho_comp", "d_rho"
    );
    if born {
        let _ = write!(s, " {:>8} {:>7}", "eps_born", "d_born");
    }
    s.push('\n');
    let pct = |v: f64| format!("{:.1}%", 100.0 * v);
    for r in rows {
        let (t, p) = (&r.truth, &r.report);
        let name = if r.cleaned { r.model.clone() } else { format!("{}†", r.model) };
        let _ = write!(
            s,
            "{:<8} {:>6.2} {:>8.2} {:>7} {:>6.2} {:>8.2} {:>7} {:>6.2} {:>8.2} {:>7}",
            name,
            t.eps,
            p.eps_median,
            pct(p.rel_err_eps),
            t.s_x,
            p.s_x_comp,
            pct(p.rel_err_sx),
            t.rho_c,
            p.rho_c_comp,
            pct(p.rel_err_rho)
        );
        if born {
            match &r.born {
                Some(b) => {
                    let _ = write!(s, " {:>8.2} {:>7}", b.eps_median, pct(b.rel_err_eps));
                }
                None => {
                    let _ = write!(s, " {:>8} {:>7}", "-", "-");
                }
            }
        }
        s.push('\n');
    }
    if rows.iter().any(|r| !r.cleaned) {
        s.push_str("† artifact removal left no target; evaluated before removal\n");
    }
    s
}

/// Same content as [`format_table`] as CSV.
pub fn table_csv(rows: &[ModelRow]) -> String {
    let mut s = String::from(
        "model,eps_true,eps_comp,rel_err_eps,sx_true,sx_comp,rel_err_sx,rho_true,rho_comp,rel_err_rho,contrast_nu,eps_born,rel_err_born,cleaned\n",
    );
    for r in rows {
        let (t, p) = (&r.truth, &r.report);
        let (eb, db) = r.born.map_or((String::new(), String::new()), |b| {
            (format!("{:?}", b.eps_median), format!("{:?}", b.rel_err_eps))
        });
        let _ = writeln!(
            s,
            "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{eb},{db},{}",
            r.model,
            t.eps,
            p.eps_median,
            p.rel_err_eps,
            t.s_x,
            p.s_x_comp,
            p.rel_err_sx,
            t.rho_c,
            p.rho_c_comp,
            p.rel_err_rho,
            p.contrast_nu,
            r.cleaned
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn painted_truth_has_zero_error() {
        // 0.4 m wide target, 0.05 m columns: 8 columns centred on x = 0.
        let x_grid: Vec<f64> = (0..20).map(|k| -0.475 + 0.05 * k as f64).collect();
        let rho_grid: Vec<f64> = (0..21).map(|k| 7.0 + 0.05 * k as f64).collect();
        let mut values = vec![1.0; 20 * 21];
        for i in 8..=12 {
            for j in 6..14 {
                values[i * 20 + j] = 4.0;
            }
        }
        let img = SlantRangeImage::new(x_grid, rho_grid, values).unwrap();
        let truth = Truth {
            eps: 4.0,
            s_x: 0.4,
            rho_c: 7.5,
        };
        let r = evaluate_target(&img, &truth, None, 0.05).unwrap();
        assert!(r.rel_err_eps == 0.0 && r.rel_err_sx < 1e-12 && r.rel_err_rho < 1e-12, "{r:?}");
        let boxed = Region {
            x_lo: -1.0,
            x_hi: 1.0,
            rho_lo: 7.0,
            rho_hi: 8.0,
        };
        assert_eq!(evaluate_target(&img, &truth, Some(&boxed), 0.05).unwrap(), r);
        let flat = SlantRangeImage::new(vec![0.0], vec![1.0], vec![1.0]).unwrap();
        assert!(evaluate_target(&flat, &truth, None, 0.05).is_err());
    }

    #[test]
    fn contrast_examples() {
        assert_eq!(contrast_nu(2.5, 2.5).unwrap(), 1.0);
        assert!((contrast_nu(17.9, 2.5).unwrap() - 7.16).abs() < 1e-12);
        assert!((contrast_nu(11.8, 2.5).unwrap() - 4.72).abs() < 1e-12);
        assert!(contrast_nu(1.0, 0.0).is_err());
        assert!((relative_error(4.34, 5.0) - 0.132).abs() < 1e-12);
    }
}
