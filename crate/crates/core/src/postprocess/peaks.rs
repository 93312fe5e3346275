//! Local maxima and top-k selection.

/// Local maxima of a sampled signal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeakSet {
    pub values: Vec<f64>,
    /// Strictly increasing.
    pub indices: Vec<usize>,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Interior local maxima `y[i−1] < y[i] > y[i+1]`. A flat top
/// `y[i−1] < y[i] = … = y[j] > y[j+1]` counts once, at its leftmost index.
/// Shorter inputs than 3 samples have no peaks.
pub fn find_peaks(y: &[f64]) -> PeakSet {
    let mut out = PeakSet::default();
    let n = y.len();
    let mut i = 1;
    while i + 1 < n {
        if y[i] > y[i - 1] {
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] < y[i] {
                out.indices.push(i);
                out.values.push(y[i]);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// The `k` largest values with their indices, descending, ties broken by
/// the lower index. `k` is capped at the length.
pub fn maxk(values: &[f64], k: usize) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    // `+ 0.0` turns −0 into +0 so the two compare equal.
    idx.sort_by(|&a, &b| (values[b] + 0.0).total_cmp(&(values[a] + 0.0)).then(a.cmp(&b)));
    idx.truncate(k.min(values.len()));
    (idx.iter().map(|&i| values[i]).collect(), idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        assert!(find_peaks(&[1.0, 2.0, 3.0, 4.0]).is_empty());
        let p = find_peaks(&[0.0, 1.0, 0.0, 2.0, 0.0]);
        assert_eq!(p.indices, vec![1, 3]);
        assert_eq!(p.values, vec![1.0, 2.0]);
        assert_eq!(find_peaks(&[0.0, 2.0, 2.0, 2.0, 1.0]).indices, vec![1]);
        // A shoulder is not a peak.
        assert!(find_peaks(&[0.0, 2.0, 2.0, 3.0]).is_empty());
        assert_eq!(maxk(&[3.0, 1.0, 3.0], 2), (vec![3.0, 3.0], vec![0, 2]));
        assert_eq!(maxk(&[1.0, 5.0], 9).1, vec![1, 0]);
        assert_eq!(maxk(&[-0.0, 0.0], 2).1, vec![0, 1]);
    }
}
