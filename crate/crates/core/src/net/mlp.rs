use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::Parameters;
use crate::error::{Error, Result};

/// Hidden widths used by the actor and critic networks.
pub const DEFAULT_HIDDEN: [usize; 4] = [256, 256, 256, 256];

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out × in`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Dense {
            weight: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }
}

/// Fully connected network: tanh on hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    pub layers: Vec<Dense>,
    generation: u64,
}

/// Activations saved by a forward pass; consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct MlpCache {
    generation: u64,
    /// Input of each layer: the network input, then every hidden output.
    activations: Vec<Array2<f64>>,
}

impl MlpCache {
    pub fn batch(&self) -> usize {
        self.activations[0].nrows()
    }
}

/// Shape-congruent gradient of an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            layers: net.layers.iter().map(|l| Dense::zeros(l.inputs(), l.outputs())).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().all(|&w| w == 0.0) && l.bias.iter().all(|&b| b == 0.0))
    }
}

impl Mlp {
    /// All-zero network with the given layer widths (input first, output last).
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 || widths.iter().any(|&w| w == 0) {
            return Err(Error::Shape(format!("invalid layer widths {widths:?}")));
        }
        Ok(Mlp {
            widths: widths.to_vec(),
            layers: widths.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            generation: 0,
        })
    }

    /// Glorot-uniform weights, zero biases. The output layer is scaled by
    /// `output_gain`; a gain of 0 gives a zero-initialized head.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], output_gain: f64, rng: &mut R) -> Result<Self> {
        let mut net = Mlp::zeros(widths)?;
        let last = net.layers.len() - 1;
        for (i, layer) in net.layers.iter_mut().enumerate() {
            let limit = (6.0 / (layer.inputs() + layer.outputs()) as f64).sqrt();
            let gain = if i == last { output_gain } else { 1.0 };
            layer.weight.mapv_inplace(|_| rng.gen_range(-limit..limit) * gain);
        }
        Ok(net)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("at least two widths")
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn parameter_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Batched forward pass; rows of `input` are samples.
    pub fn forward_batch(&self, input: ArrayView2<f64>) -> Result<(Array2<f64>, MlpCache)> {
        if input.ncols() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: input.ncols(),
            });
        }
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut x = input.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = x.dot(&layer.weight.t());
            z += &layer.bias;
            if i < last {
                z.mapv_inplace(f64::tanh);
            }
            activations.push(x);
            x = z;
        }
        Ok((
            x,
            MlpCache {
                generation: self.generation,
                activations,
            },
        ))
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, MlpCache)> {
        let view = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::Shape(e.to_string()))?;
        let (out, cache) = self.forward_batch(view)?;
        Ok((out.into_raw_vec_and_offset().0, cache))
    }

    /// Reverse pass: gradient of `sum(output ⊙ output_grad)` with respect
    /// to every weight and bias.
    pub fn backward(&self, cache: &MlpCache, output_grad: ArrayView2<f64>) -> Result<Gradients> {
        if cache.generation != self.generation || cache.activations.len() != self.layers.len() {
            return Err(Error::StaleCache {
                cache: cache.generation,
                net: self.generation,
            });
        }
        if output_grad.dim() != (cache.batch(), self.output_dim()) {
            return Err(Error::Shape(format!(
                "output gradient {:?}, expected {:?}",
                output_grad.dim(),
                (cache.batch(), self.output_dim())
            )));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut delta = output_grad.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.activations[i];
            let weight = delta.t().dot(input);
            let bias = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&layer.weight);
                // input is tanh output of the previous layer
                back.zip_mut_with(input, |g, &h| *g *= 1.0 - h * h);
                delta = back;
            }
            layers.push(Dense { weight, bias });
        }
        layers.reverse();
        Ok(Gradients { layers })
    }
}

fn dense_segments(layers: &[Dense]) -> Vec<&[f64]> {
    layers
        .iter()
        .flat_map(|l| {
            [
                l.weight.as_slice().expect("standard layout"),
                l.bias.as_slice().expect("standard layout"),
            ]
        })
        .collect()
}

fn dense_segments_mut(layers: &mut [Dense]) -> Vec<&mut [f64]> {
    layers
        .iter_mut()
        .flat_map(|l| {
            [
                l.weight.as_slice_mut().expect("standard layout"),
                l.bias.as_slice_mut().expect("standard layout"),
            ]
        })
        .collect()
}

impl Parameters for Mlp {
    fn segments(&self) -> Vec<&[f64]> {
        dense_segments(&self.layers)
    }

    fn segments_mut(&mut self) -> Vec<&mut [f64]> {
        dense_segments_mut(&mut self.layers)
    }

    fn mark_updated(&mut self) {
        self.generation += 1;
    }
}

impl Parameters for Gradients {
    fn segments(&self) -> Vec<&[f64]> {
        dense_segments(&self.layers)
    }

    fn segments_mut(&mut self) -> Vec<&mut [f64]> {
        dense_segments_mut(&mut self.layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::zeros(&[4, 8, 8, 3]).unwrap();
        let (y, _) = net.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap();
        assert_eq!(y, vec![0.0; 3]);
    }

    #[test]
    fn affine_single_layer() {
        let mut net = Mlp::zeros(&[1, 1]).unwrap();
        net.layers[0].weight[[0, 0]] = 2.0;
        net.layers[0].bias[0] = 1.0;
        let (y, cache) = net.forward(&[3.0]).unwrap();
        assert_eq!(y, vec![7.0]);
        let g = net.backward(&cache, array![[1.0]].view()).unwrap();
        assert_eq!(g.layers[0].weight[[0, 0]], 3.0);
        assert_eq!(g.layers[0].bias[0], 1.0);
    }

    #[test]
    fn tanh_saturates() {
        let mut net = Mlp::zeros(&[1, 1, 1]).unwrap();
        net.layers[0].weight[[0, 0]] = 1000.0;
        net.layers[1].weight[[0, 0]] = 1.0;
        let (y, cache) = net.forward(&[1.0]).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9);
        assert!((cache.activations[1][[0, 0]] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::new(&[3, 5, 2], 1.0, &mut rng).unwrap();
        let (_, cache) = net.forward(&[0.1, 0.2, 0.3]).unwrap();
        let g = net.backward(&cache, Array2::zeros((1, 2)).view()).unwrap();
        assert!(g.is_zero());
    }

    #[test]
    fn dimension_mismatch() {
        let net = Mlp::zeros(&[3, 2]).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Dimension { expected: 3, got: 1 })));
    }

    #[test]
    fn stale_cache_rejected() {
        let mut net = Mlp::zeros(&[2, 2]).unwrap();
        let (_, cache) = net.forward(&[1.0, 1.0]).unwrap();
        net.mark_updated();
        assert!(matches!(
            net.backward(&cache, Array2::ones((1, 2)).view()),
            Err(Error::StaleCache { .. })
        ));
    }

    #[test]
    fn parameter_count_matches_widths() {
        let net = Mlp::zeros(&[36, 256, 256, 256, 256, 6]).unwrap();
        let counted: usize = net.segments().iter().map(|s| s.len()).sum();
        assert_eq!(counted, net.parameter_count());
        assert_eq!(net.layers.len(), 5);
    }

    /// Central finite differences of `L = sum(y ⊙ w)` against the analytic
    /// reverse pass, parameter by parameter.
    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut net = Mlp::new(&[4, 6, 5, 3], 1.0, &mut rng).unwrap();
        let x = Array2::from_shape_fn((3, 4), |_| rng.gen_range(-1.0..1.0));
        let w = Array2::from_shape_fn((3, 3), |_| rng.gen_range(-1.0..1.0));
        let loss = |n: &Mlp| -> f64 {
            let (y, _) = n.forward_batch(x.view()).unwrap();
            (&y * &w).sum()
        };
        let (_, cache) = net.forward_batch(x.view()).unwrap();
        let grads = net.backward(&cache, w.view()).unwrap();
        let analytic: Vec<f64> = grads.segments().concat();
        let h = 1e-5;
        let mut k = 0;
        let n_seg = net.segments().len();
        for s in 0..n_seg {
            let len = net.segments()[s].len();
            for i in 0..len {
                let orig = net.segments()[s][i];
                net.segments_mut()[s][i] = orig + h;
                let up = loss(&net);
                net.segments_mut()[s][i] = orig - h;
                let down = loss(&net);
                net.segments_mut()[s][i] = orig;
                let fd = (up - down) / (2.0 * h);
                let a = analytic[k];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-3);
                assert!(rel < 1e-6, "segment {s} index {i}: analytic {a} fd {fd}");
                k += 1;
            }
        }
        assert_eq!(k, net.parameter_count());
    }
}
