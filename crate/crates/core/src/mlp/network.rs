use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::{Activation, Architecture, LayerSpec, MlpError};

/// Rows per task when a batch is split across threads. Fixed so results
/// never depend on the thread count.
pub(crate) const ROW_CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `units × fan_in`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn fan_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn units(&self) -> usize {
        self.weights.nrows()
    }

    fn apply(&self, input: ArrayView2<f64>) -> Array2<f64> {
        let mut z = input.dot(&self.weights.t());
        z += &self.bias;
        if self.activation == Activation::Relu {
            z.mapv_inplace(|v| v.max(0.0));
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseGrad {
    fn add_assign(&mut self, other: &DenseGrad) {
        self.weights += &other.weights;
        self.bias += &other.bias;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Dense>,
}

impl Network {
    pub fn zeros(arch: &Architecture) -> Result<Self, MlpError> {
        arch.validate()?;
        let mut fan_in = arch.input_dim;
        let layers = arch
            .layers
            .iter()
            .map(|spec| {
                let layer = Dense {
                    weights: Array2::zeros((spec.units, fan_in)),
                    bias: Array1::zeros(spec.units),
                    activation: spec.activation,
                };
                fan_in = spec.units;
                layer
            })
            .collect();
        Ok(Network { layers })
    }

    /// He initialization: weights drawn from N(0, 2/fan_in), biases zero.
    pub fn he_init<R: Rng>(arch: &Architecture, rng: &mut R) -> Result<Self, MlpError> {
        let mut net = Self::zeros(arch)?;
        for layer in &mut net.layers {
            let normal = Normal::new(0.0, (2.0 / layer.fan_in() as f64).sqrt())
                .expect("fan_in is positive");
            layer.weights.mapv_inplace(|_| normal.sample(rng));
        }
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            input_dim: self.input_dim(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerSpec {
                    units: l.units(),
                    activation: l.activation,
                })
                .collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn zero_grads(&self) -> Vec<DenseGrad> {
        self.layers
            .iter()
            .map(|l| DenseGrad {
                weights: Array2::zeros(l.weights.raw_dim()),
                bias: Array1::zeros(l.bias.raw_dim()),
            })
            .collect()
    }

    fn check_arity(&self, x: ArrayView2<f64>) -> Result<(), MlpError> {
        if x.ncols() != self.input_dim() {
            return Err(MlpError::ShapeMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    /// Outputs of every layer, input excluded.
    fn activations(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut outs: Vec<Array2<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let next = match outs.last() {
                Some(prev) => layer.apply(prev.view()),
                None => layer.apply(x),
            };
            outs.push(next);
        }
        outs
    }

    /// One prediction per row of already-standardized inputs.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Vec<f64>, MlpError> {
        self.check_arity(x)?;
        let views: Vec<_> = x.axis_chunks_iter(Axis(0), ROW_CHUNK).collect();
        let chunks: Vec<Vec<f64>> = views
            .into_par_iter()
            .map(|chunk| {
                let out = self.activations(chunk).pop().expect("at least one layer");
                out.column(0).to_vec()
            })
            .collect();
        Ok(chunks.concat())
    }

    /// Gradients of `L = (1/n)·Σ|pred - target|`, with `sign(0) = 0`.
    pub fn backward(&self, x: ArrayView2<f64>, targets: &[f64]) -> Result<Vec<DenseGrad>, MlpError> {
        self.check_arity(x)?;
        if x.nrows() != targets.len() {
            return Err(MlpError::TargetLength {
                rows: x.nrows(),
                targets: targets.len(),
            });
        }
        if targets.is_empty() {
            return Ok(self.zero_grads());
        }
        Ok(self.chunk_gradients(x, targets, 1.0 / targets.len() as f64).1)
    }

    /// Loss gradients over a minibatch, computed in fixed row chunks on the
    /// thread pool and summed in chunk order. Also returns `Σ|pred - target|`.
    pub(crate) fn batch_gradients(&self, x: ArrayView2<f64>, targets: &[f64]) -> (f64, Vec<DenseGrad>) {
        let scale = 1.0 / targets.len() as f64;
        let views: Vec<_> = x.axis_chunks_iter(Axis(0), ROW_CHUNK).collect();
        let parts: Vec<(f64, Vec<DenseGrad>)> = views
            .into_par_iter()
            .zip(targets.par_chunks(ROW_CHUNK))
            .map(|(xc, tc)| self.chunk_gradients(xc, tc, scale))
            .collect();
        let mut parts = parts.into_iter();
        let (mut abs_sum, mut grads) = parts.next().expect("non-empty batch");
        for (s, g) in parts {
            abs_sum += s;
            for (acc, part) in grads.iter_mut().zip(&g) {
                acc.add_assign(part);
            }
        }
        (abs_sum, grads)
    }

    /// `scale` multiplies each row's loss subgradient (1/n for a batch mean).
    fn chunk_gradients(&self, x: ArrayView2<f64>, targets: &[f64], scale: f64) -> (f64, Vec<DenseGrad>) {
        let outs = self.activations(x);
        let pred = outs.last().expect("at least one layer");
        let mut abs_sum = 0.0;
        let mut delta = Array2::from_shape_fn((targets.len(), 1), |(i, _)| {
            let err = pred[[i, 0]] - targets[i];
            abs_sum += err.abs();
            if err > 0.0 {
                scale
            } else if err < 0.0 {
                -scale
            } else {
                0.0
            }
        });
        let mut grads = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate().rev() {
            if layer.activation == Activation::Relu {
                delta.zip_mut_with(&outs[l], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            let input = if l == 0 { x } else { outs[l - 1].view() };
            grads.push(DenseGrad {
                weights: delta.t().dot(&input),
                bias: delta.sum_axis(Axis(0)),
            });
            if l > 0 {
                delta = delta.dot(&layer.weights);
            }
        }
        grads.reverse();
        (abs_sum, grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr2, Array};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mae(net: &Network, x: ArrayView2<f64>, t: &[f64]) -> f64 {
        let p = net.forward(x).unwrap();
        p.iter().zip(t).map(|(a, b)| (a - b).abs()).sum::<f64>() / t.len() as f64
    }

    #[test]
    fn zero_network_predicts_zero() {
        let net = Network::zeros(&Architecture::three_layer()).unwrap();
        let x = Array2::from_elem((3, 26), 4.2);
        assert_eq!(net.forward(x.view()).unwrap(), vec![0.0; 3]);
        assert_eq!(net.param_count(), 39_937);
        assert_eq!(net.architecture(), Architecture::three_layer());
    }

    #[test]
    fn relu_clips_negative_inputs() {
        let arch = Architecture {
            input_dim: 1,
            layers: vec![LayerSpec::relu(1), LayerSpec::linear(1)],
        };
        let mut net = Network::zeros(&arch).unwrap();
        net.layers[0].weights[[0, 0]] = 1.0;
        net.layers[1].weights[[0, 0]] = 1.0;
        let out = net.forward(arr2(&[[-5.0], [5.0]]).view()).unwrap();
        assert_eq!(out, vec![0.0, 5.0]);
    }

    #[test]
    fn arity_mismatch_is_an_error() {
        let net = Network::zeros(&Architecture::three_layer()).unwrap();
        let x = Array2::zeros((2, 25));
        assert_eq!(
            net.forward(x.view()),
            Err(MlpError::ShapeMismatch { expected: 26, got: 25 })
        );
        assert!(net.backward(x.view(), &[0.0, 0.0]).is_err());
    }

    #[test]
    fn exact_fit_has_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let arch = Architecture {
            input_dim: 3,
            layers: vec![LayerSpec::relu(4), LayerSpec::linear(1)],
        };
        let net = Network::he_init(&arch, &mut rng).unwrap();
        let x = Array::from_shape_fn((6, 3), |_| rng.random_range(-1.0..1.0));
        let t = net.forward(x.view()).unwrap();
        let grads = net.backward(x.view(), &t).unwrap();
        assert!(grads
            .iter()
            .all(|g| g.weights.iter().chain(g.bias.iter()).all(|&v| v == 0.0)));
    }

    #[test]
    fn linear_unit_gradient_is_input() {
        let arch = Architecture {
            input_dim: 1,
            layers: vec![LayerSpec::linear(1)],
        };
        let mut net = Network::zeros(&arch).unwrap();
        net.layers[0].weights[[0, 0]] = 2.0;
        let grads = net.backward(arr2(&[[3.0]]).view(), &[1.0]).unwrap();
        assert_eq!(grads[0].weights[[0, 0]], 3.0);
        assert_eq!(grads[0].bias[0], 1.0);
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let arch = Architecture {
            input_dim: 4,
            layers: vec![LayerSpec::relu(5), LayerSpec::relu(3), LayerSpec::linear(1)],
        };
        let net = Network::he_init(&arch, &mut rng).unwrap();
        let x = Array::from_shape_fn((8, 4), |_| rng.random_range(-2.0..2.0));
        let t: Vec<f64> = (0..8).map(|i| if i % 2 == 0 { 10.0 } else { -10.0 }).collect();
        let grads = net.backward(x.view(), &t).unwrap();
        let h = 1e-6;
        for l in 0..net.layers.len() {
            for idx in 0..net.layers[l].weights.len() {
                let (r, c) = (idx / net.layers[l].fan_in(), idx % net.layers[l].fan_in());
                let mut plus = net.clone();
                plus.layers[l].weights[[r, c]] += h;
                let mut minus = net.clone();
                minus.layers[l].weights[[r, c]] -= h;
                let fd = (mae(&plus, x.view(), &t) - mae(&minus, x.view(), &t)) / (2.0 * h);
                let an = grads[l].weights[[r, c]];
                assert!((fd - an).abs() <= 1e-6 * fd.abs().max(an.abs()).max(1e-3), "{fd} vs {an}");
            }
        }
    }

    #[test]
    fn chunked_gradients_match_single_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let arch = Architecture {
            input_dim: 3,
            layers: vec![LayerSpec::relu(6), LayerSpec::linear(1)],
        };
        let net = Network::he_init(&arch, &mut rng).unwrap();
        let n = 3 * ROW_CHUNK + 17;
        let x = Array::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let single = net.backward(x.view(), &t).unwrap();
        let (abs_sum, chunked) = net.batch_gradients(x.view(), &t);
        assert!((abs_sum / n as f64 - mae(&net, x.view(), &t)).abs() < 1e-12);
        for (a, b) in single.iter().zip(&chunked) {
            for (u, v) in a.weights.iter().zip(&b.weights) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }
}
