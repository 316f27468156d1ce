use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Per-feature bin edges. A value `v` lands in bin `#{edges < v}`, so bin
/// `b` covers `(edges[b-1], edges[b]]` and the split "bin ≤ b" is the raw
/// comparison `v ≤ edges[b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMapper {
    pub edges: Vec<Vec<f64>>,
}

/// Column-major bin indices.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedMatrix {
    pub n_rows: usize,
    pub columns: Vec<Vec<u16>>,
}

/// Midpoint of `a < b` that still separates them.
fn separating_midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) * 0.5;
    if m >= a && m < b {
        m
    } else {
        a
    }
}

fn feature_edges(mut values: Vec<f64>, n_bins: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut distinct = values.clone();
    distinct.dedup();
    if distinct.len() <= n_bins {
        return distinct
            .windows(2)
            .map(|w| separating_midpoint(w[0], w[1]))
            .collect();
    }
    let n = values.len();
    let mut edges: Vec<f64> = Vec::with_capacity(n_bins - 1);
    for j in 1..n_bins {
        let idx = j * n / n_bins;
        if idx == 0 {
            continue;
        }
        let a = values[idx - 1];
        let above = values.partition_point(|v| *v <= a);
        if above == n {
            continue;
        }
        let edge = separating_midpoint(a, values[above]);
        if edges.last().is_none_or(|last| *last < edge) {
            edges.push(edge);
        }
    }
    edges
}

impl BinMapper {
    /// Quantile edges: at most `n_bins - 1` per feature. When a feature has
    /// no more than `n_bins` distinct values every gap between them gets an edge.
    pub fn fit(x: ArrayView2<f64>, n_bins: usize) -> Self {
        let edges = (0..x.ncols())
            .into_par_iter()
            .map(|f| feature_edges(x.column(f).to_vec(), n_bins))
            .collect();
        BinMapper { edges }
    }

    pub fn n_features(&self) -> usize {
        self.edges.len()
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.edges[feature].len() + 1
    }

    pub fn bin(&self, feature: usize, value: f64) -> u16 {
        self.edges[feature].partition_point(|e| *e < value) as u16
    }

    /// Raw threshold equivalent to "bin ≤ `bin`".
    pub fn threshold(&self, feature: usize, bin: usize) -> f64 {
        self.edges[feature][bin]
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> BinnedMatrix {
        let columns = (0..x.ncols())
            .into_par_iter()
            .map(|f| x.column(f).iter().map(|v| self.bin(f, *v)).collect())
            .collect();
        BinnedMatrix {
            n_rows: x.nrows(),
            columns,
        }
    }
}

pub fn quantize_features(x: ArrayView2<f64>, n_bins: usize) -> (BinMapper, BinnedMatrix) {
    let mapper = BinMapper::fit(x, n_bins);
    let binned = mapper.transform(x);
    (mapper, binned)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn two_bin_quantile() {
        let x = array![[1.0], [2.0], [3.0], [4.0]];
        let (m, b) = quantize_features(x.view(), 2);
        assert_eq!(m.edges[0], vec![2.5]);
        assert_eq!(b.columns[0], vec![0, 0, 1, 1]);
    }

    #[test]
    fn constant_feature_has_no_edges() {
        let x = Array2::from_elem((5, 1), 7.0);
        let (m, b) = quantize_features(x.view(), 16);
        assert!(m.edges[0].is_empty());
        assert_eq!(m.n_bins(0), 1);
        assert!(b.columns[0].iter().all(|&v| v == 0));
    }

    #[test]
    fn few_distinct_values_get_every_gap() {
        let x = array![[3.0], [1.0], [2.0], [1.0], [3.0]];
        let (m, b) = quantize_features(x.view(), 256);
        assert_eq!(m.edges[0], vec![1.5, 2.5]);
        assert_eq!(b.columns[0], vec![2, 0, 1, 0, 2]);
    }

    #[test]
    fn values_beyond_last_edge_use_last_bin() {
        let x = array![[1.0], [2.0], [3.0], [4.0]];
        let m = BinMapper::fit(x.view(), 2);
        assert_eq!(m.bin(0, 1e9), 1);
        assert_eq!(m.bin(0, -1e9), 0);
    }

    #[test]
    fn binning_is_deterministic_and_bounded() {
        let x = Array2::from_shape_fn((1000, 3), |(i, j)| ((i * 7919 + j * 31) % 997) as f64 * 0.37);
        let (m1, b1) = quantize_features(x.view(), 32);
        let (m2, b2) = quantize_features(x.view(), 32);
        assert_eq!(m1, m2);
        assert_eq!(b1, b2);
        for f in 0..3 {
            assert!(m1.edges[f].len() <= 31);
            assert!(m1.edges[f].windows(2).all(|w| w[0] < w[1]));
            assert!(b1.columns[f].iter().all(|&v| (v as usize) < m1.n_bins(f)));
        }
    }

    #[test]
    fn bin_matches_threshold_comparison() {
        let x = Array2::from_shape_fn((200, 1), |(i, _)| (i as f64).sin() * 10.0);
        let (m, b) = quantize_features(x.view(), 8);
        for (i, v) in x.column(0).iter().enumerate() {
            for bin in 0..m.edges[0].len() {
                assert_eq!(b.columns[0][i] as usize <= bin, *v <= m.threshold(0, bin));
            }
        }
    }
}
