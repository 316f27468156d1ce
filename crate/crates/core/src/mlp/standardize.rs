use ndarray::{Array2, ArrayView2, Axis};

/// Per-column z-score statistics fitted on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Columns listed in `passthrough` get mean 0 and deviation 1. Columns
    /// with zero or non-finite spread get deviation 1.
    pub fn fit(x: ArrayView2<f64>, passthrough: &[usize]) -> Self {
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut std = Vec::with_capacity(x.ncols());
        for (j, col) in x.axis_iter(Axis(1)).enumerate() {
            if passthrough.contains(&j) || x.nrows() == 0 {
                mean.push(0.0);
                std.push(1.0);
                continue;
            }
            let m = col.sum() / n;
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            let s = var.sqrt();
            mean.push(m);
            std.push(if s > 0.0 && s.is_finite() { s } else { 1.0 });
        }
        Standardizer { mean, std }
    }

    pub fn identity(n_features: usize) -> Self {
        Standardizer {
            mean: vec![0.0; n_features],
            std: vec![1.0; n_features],
        }
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    /// Caller guarantees `x` has `n_features()` columns.
    pub fn transform(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.mean[j], self.std[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        out
    }

    pub fn inverse(&self, z: ArrayView2<f64>) -> Array2<f64> {
        let mut out = z.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.mean[j], self.std[j]);
            col.mapv_inplace(|v| v * s + m);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    #[test]
    fn mean_maps_to_zero_and_constants_keep_unit_scale() {
        let x = arr2(&[[1.0, 7.0, 1.0], [3.0, 7.0, 0.0]]);
        let s = Standardizer::fit(x.view(), &[2]);
        assert_eq!(s.mean, vec![2.0, 7.0, 0.0]);
        assert_eq!(s.std, vec![1.0, 1.0, 1.0]);
        let z = s.transform(arr2(&[[2.0, 9.0, 1.0]]).view());
        assert_eq!(z, arr2(&[[0.0, 2.0, 1.0]]));
    }

    #[test]
    fn inverse_recovers_inputs() {
        let x = arr2(&[[0.015, 13267.0], [128.88, 32.0], [5.5, 1e-3]]);
        let s = Standardizer::fit(x.view(), &[]);
        let back = s.inverse(s.transform(x.view()).view());
        for (a, b) in back.iter().zip(x.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}
