//! Per-antenna time series and their text and binary file formats.
//!
//! Text layout:
//!
//! ```text
//! # traces n=<N> samples=<K> dt=<dt> t0=<t0> T=<K·dt> complex=<0|1>
//! # positions=<x_1>;<x_2>;...;<x_N>
//! <F_1(t_0)>,<F_2(t_0)>,...          (complex: re_1,im_1,re_2,im_2,...)
//! ```
//!
//! Binary layout (little endian): magic `CSXT`, `u32` version 1, `u64` N,
//! `u64` K, `u8` complex flag, `f64` dt, `f64` t0, N `f64` positions, then the
//! samples row by row in the same order as the text body.

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CSXT";

/// `N` traces sharing the sample times `t0 + k·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    pub dt: f64,
    pub t0: f64,
    /// Antenna x-coordinates.
    pub positions: Vec<f64>,
    pub re: Vec<Vec<f64>>,
    /// Imaginary parts, for complex traces.
    pub im: Option<Vec<Vec<f64>>>,
}

impl TraceSet {
    pub fn new(dt: f64, t0: f64, positions: Vec<f64>, re: Vec<Vec<f64>>, im: Option<Vec<Vec<f64>>>) -> Result<Self> {
        let t = TraceSet {
            dt,
            t0,
            positions,
            re,
            im,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::param("dt", "must be positive"));
        }
        if self.re.len() != self.positions.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} traces for {} positions",
                self.re.len(),
                self.positions.len()
            )));
        }
        let k = self.samples();
        if self.re.iter().any(|v| v.len() != k) {
            return Err(Error::ShapeMismatch("traces differ in length".into()));
        }
        if let Some(im) = &self.im {
            if im.len() != self.re.len() || im.iter().any(|v| v.len() != k) {
                return Err(Error::ShapeMismatch("imaginary part differs in shape".into()));
            }
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.re.len()
    }

    pub fn samples(&self) -> usize {
        self.re.first().map_or(0, Vec::len)
    }

    /// Record length `K·dt`.
    pub fn duration(&self) -> f64 {
        self.samples() as f64 * self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn is_complex(&self) -> bool {
        self.im.is_some()
    }

    /// Real part only.
    pub fn real_part(&self) -> TraceSet {
        TraceSet {
            im: None,
            ..self.clone()
        }
    }

    pub fn scaled(&self, c: f64) -> TraceSet {
        let sc = |v: &Vec<Vec<f64>>| v.iter().map(|t| t.iter().map(|x| c * x).collect()).collect();
        TraceSet {
            re: sc(&self.re),
            im: self.im.as_ref().map(sc),
            ..self.clone()
        }
    }

    fn same_layout(&self, other: &TraceSet) -> Result<()> {
        if self.count() != other.count()
            || self.samples() != other.samples()
            || self.dt != other.dt
            || self.t0 != other.t0
            || self.is_complex() != other.is_complex()
        {
            return Err(Error::ShapeMismatch(format!(
                "trace sets differ: {}x{} vs {}x{}",
                self.count(),
                self.samples(),
                other.count(),
                other.samples()
            )));
        }
        Ok(())
    }

    /// Elementwise `self − other`.
    pub fn subtract(&self, other: &TraceSet) -> Result<TraceSet> {
        self.same_layout(other)?;
        let diff = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect()
        };
        Ok(TraceSet {
            re: diff(&self.re, &other.re),
            im: match (&self.im, &other.im) {
                (Some(a), Some(b)) => Some(diff(a, b)),
                _ => None,
            },
            ..self.clone()
        })
    }

    fn row(&self, k: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.count());
        for n in 0..self.count() {
            out.push(self.re[n][k]);
            if let Some(im) = &self.im {
                out.push(im[n][k]);
            }
        }
        out
    }

    fn from_rows(dt: f64, t0: f64, positions: Vec<f64>, complex: bool, rows: &[Vec<f64>]) -> Result<TraceSet> {
        let n = positions.len();
        let mut re = vec![Vec::with_capacity(rows.len()); n];
        let mut im = complex.then(|| vec![Vec::with_capacity(rows.len()); n]);
        for row in rows {
            for a in 0..n {
                if complex {
                    re[a].push(row[2 * a]);
                    im.as_mut().unwrap()[a].push(row[2 * a + 1]);
                } else {
                    re[a].push(row[a]);
                }
            }
        }
        TraceSet::new(dt, t0, positions, re, im)
    }

    /// Text form; floats are written in shortest round-trip notation.
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# traces n={} samples={} dt={:?} t0={:?} T={:?} complex={}\n# positions={}\n",
            self.count(),
            self.samples(),
            self.dt,
            self.t0,
            self.duration(),
            u8::from(self.is_complex()),
            self.positions.iter().map(|p| format!("{p:?}")).collect::<Vec<_>>().join(";")
        );
        for k in 0..self.samples() {
            let row: Vec<String> = self.row(k).iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<TraceSet> {
        let mut lines = text.lines().enumerate();
        let bad = |line: usize, m: &str| Error::Parse {
            line: line + 1,
            message: m.to_string(),
        };
        let (l0, header) = lines.next().ok_or_else(|| bad(0, "empty file"))?;
        let header = header.strip_prefix("# traces").ok_or_else(|| bad(l0, "missing '# traces' header"))?;
        let mut kv = std::collections::HashMap::new();
        for tok in header.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| bad(l0, "expected key=value"))?;
            kv.insert(k, v);
        }
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| bad(l0, &format!("missing {k}")));
        let num = |k: &str| -> Result<f64> { get(k)?.parse::<f64>().map_err(|e| bad(l0, &format!("{k}: {e}"))) };
        let n: usize = get("n")?.parse().map_err(|_| bad(l0, "n: not an integer"))?;
        let samples: usize = get("samples")?.parse().map_err(|_| bad(l0, "samples: not an integer"))?;
        let complex = get("complex")? == "1";
        let (dt, t0) = (num("dt")?, num("t0")?);
        let (l1, pos) = lines.next().ok_or_else(|| bad(1, "missing positions line"))?;
        let pos = pos.strip_prefix("# positions=").ok_or_else(|| bad(l1, "missing '# positions='"))?;
        let positions: Vec<f64> = if pos.is_empty() {
            vec![]
        } else {
            pos.split(';')
                .map(|p| p.parse::<f64>().map_err(|e| bad(l1, &format!("position: {e}"))))
                .collect::<Result<_>>()?
        };
        if positions.len() != n {
            return Err(bad(l1, &format!("{} positions for n={n}", positions.len())));
        }
        let width = if complex { 2 * n } else { n };
        let mut rows = Vec::with_capacity(samples);
        for (l, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| bad(l, &format!("{e}: {v:?}"))))
                .collect::<Result<_>>()?;
            if row.len() != width {
                return Err(bad(l, &format!("expected {width} columns, found {}", row.len())));
            }
            rows.push(row);
        }
        if rows.len() != samples {
            return Err(bad(l1 + rows.len() + 1, &format!("expected {samples} rows, found {}", rows.len())));
        }
        TraceSet::from_rows(dt, t0, positions, complex, &rows)
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&1u32.to_le_bytes());
        out.extend_from_slice(&(self.count() as u64).to_le_bytes());
        out.extend_from_slice(&(self.samples() as u64).to_le_bytes());
        out.push(u8::from(self.is_complex()));
        out.extend_from_slice(&self.dt.to_le_bytes());
        out.extend_from_slice(&self.t0.to_le_bytes());
        for p in &self.positions {
            out.extend_from_slice(&p.to_le_bytes());
        }
        for k in 0..self.samples() {
            for v in self.row(k) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<TraceSet> {
        let mut at = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes.get(at..at + n).ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("binary trace file truncated at byte {at}"),
            })?;
            at += n;
            Ok(s)
        };
        if take(4)? != MAGIC {
            return Err(Error::Parse {
                line: 0,
                message: "not a binary trace file".into(),
            });
        }
        let _version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let k = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        let complex = take(1)?[0] == 1;
        let mut f = || -> Result<f64> { Ok(f64::from_le_bytes(take(8)?.try_into().unwrap())) };
        let dt = f()?;
        let t0 = f()?;
        let positions = (0..n).map(|_| f()).collect::<Result<Vec<_>>>()?;
        let width = if complex { 2 * n } else { n };
        let rows = (0..k)
            .map(|_| (0..width).map(|_| f()).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        TraceSet::from_rows(dt, t0, positions, complex, &rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(complex: bool) -> TraceSet {
        let re = vec![vec![0.1, -2.5e-9, 3.0], vec![1.0 / 3.0, 0.0, -7.25]];
        let im = complex.then(|| vec![vec![1e-300, 2.0, -0.0], vec![5.0, 6.0, f64::MIN_POSITIVE]]);
        TraceSet::new(1e-11, -3e-10, vec![-0.5, 0.5], re, im).unwrap()
    }

    #[test]
    fn csv_and_binary_round_trip_bit_exact() {
        for c in [false, true] {
            let t = sample(c);
            assert_eq!(TraceSet::from_csv(&t.to_csv()).unwrap(), t);
            assert_eq!(TraceSet::from_binary(&t.to_binary()).unwrap(), t);
        }
    }

    #[test]
    fn malformed_csv_reports_line() {
        let mut s = sample(false).to_csv();
        s = s.replacen("3.0", "x", 1);
        match TraceSet::from_csv(&s) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn subtract_self_is_zero() {
        let t = sample(true);
        let z = t.subtract(&t).unwrap();
        assert!(z.re.iter().flatten().all(|v| *v == 0.0));
        assert!(t.subtract(&sample(false)).is_err());
    }
}
