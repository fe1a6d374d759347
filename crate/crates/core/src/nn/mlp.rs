use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Parameters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        if self == Activation::Tanh {
            z.mapv_inplace(f64::tanh);
        }
    }

    /// Derivative expressed through the activation's output.
    fn grad_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Dense layer `y = x W + b` with `W` stored `in x out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Multilayer perceptron with tanh hidden layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub layers: Vec<Layer>,
    pub output: Activation,
}

/// Activations saved by [`Mlp::forward_batch`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    pub acts: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("cache always holds the input")
    }
}

impl Mlp {
    /// Weights and biases drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output: Activation, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes, output)?;
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.w.nrows() as f64).sqrt();
            layer.w.mapv_inplace(|_| rng.random_range(-bound..bound));
            layer.b.mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize], output: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        let layers = sizes
            .windows(2)
            .map(|p| Layer {
                w: Array2::zeros((p[0], p[1])),
                b: Array1::zeros(p[1]),
            })
            .collect();
        Ok(Self {
            sizes: sizes.to_vec(),
            layers,
            output,
        })
    }

    /// Zero-valued network of the same shape, used as a gradient buffer.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.sizes, self.output).expect("shape already validated")
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two sizes")
    }

    /// Multiplies the last layer's parameters by `factor`.
    pub fn scale_output_layer(&mut self, factor: f64) {
        let last = self.layers.last_mut().expect("at least one layer");
        last.w *= factor;
        last.b *= factor;
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::Shape {
                what: "network input",
                expected: self.input_dim(),
                got: cols,
            });
        }
        Ok(())
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            Activation::Tanh
        }
    }

    /// Forward pass over a batch (one sample per row).
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<ForwardCache> {
        self.check_input(x.ncols())?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = acts[l].dot(&layer.w);
            z += &layer.b;
            self.activation(l).apply(&mut z);
            acts.push(z);
        }
        Ok(ForwardCache { acts })
    }

    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(x.ncols())?;
        let mut a = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.w);
            z += &layer.b;
            self.activation(l).apply(&mut z);
            a = z;
        }
        Ok(a)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row view");
        Ok(self.predict_batch(view)?.into_raw_vec_and_offset().0)
    }

    /// Reverse pass. `upstream` holds `dL/d output` per sample; the returned
    /// gradients are summed over the batch. Also returns `dL/d input`.
    pub fn backward(&self, cache: &ForwardCache, upstream: ArrayView2<f64>) -> Result<(Mlp, Array2<f64>)> {
        let out = cache.output();
        if upstream.dim() != out.dim() {
            return Err(Error::Shape {
                what: "upstream gradient",
                expected: out.len(),
                got: upstream.len(),
            });
        }
        let mut grads = self.zeros_like();
        let mut delta = upstream.to_owned();
        for l in (0..self.layers.len()).rev() {
            let act = self.activation(l);
            if act != Activation::Identity {
                delta.zip_mut_with(&cache.acts[l + 1], |d, &a| *d *= act.grad_from_output(a));
            }
            grads.layers[l].w.assign(&cache.acts[l].t().dot(&delta));
            grads.layers[l].b.assign(&delta.sum_axis(Axis(0)));
            delta = delta.dot(&self.layers[l].w.t());
        }
        Ok((grads, delta))
    }
}

impl Parameters for Mlp {
    fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.w.as_slice().expect("standard layout"),
                    l.b.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.w.as_slice_mut().expect("standard layout"),
                    l.b.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::zeros(&[3, 4, 2], Activation::Identity).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn one_dimensional_hand_check() {
        let mut net = Mlp::zeros(&[1, 1, 1], Activation::Identity).unwrap();
        net.layers[0].w[[0, 0]] = 1.0;
        net.layers[1].w[[0, 0]] = 2.0;
        net.layers[1].b[0] = 0.5;
        let y = net.forward(&[0.3]).unwrap();
        assert_relative_eq!(y[0], 2.0 * 0.3f64.tanh() + 0.5, epsilon = 1e-15);
    }

    #[test]
    fn forward_is_deterministic_and_batched() {
        let mut rng = rng_from_seed(1);
        let net = Mlp::new(&[3, 5, 2], Activation::Tanh, &mut rng).unwrap();
        let x = array![[0.1, 0.2, 0.3], [-1.0, 0.0, 2.0]];
        let batch = net.predict_batch(x.view()).unwrap();
        assert_eq!(net.forward(&[0.1, 0.2, 0.3]).unwrap(), batch.row(0).to_vec());
        assert_eq!(batch, net.forward_batch(x.view()).unwrap().output().clone());
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn backward_trivial_cases() {
        let mut rng = rng_from_seed(2);
        let net = Mlp::new(&[2, 3, 1], Activation::Identity, &mut rng).unwrap();
        let x = array![[0.5, -0.5]];
        let cache = net.forward_batch(x.view()).unwrap();
        let (g, dx) = net.backward(&cache, Array2::zeros((1, 1)).view()).unwrap();
        assert_eq!(g.l2_norm(), 0.0);
        assert!(dx.iter().all(|&v| v == 0.0));
        let (g, _) = net.backward(&cache, Array2::ones((1, 1)).view()).unwrap();
        assert_eq!(g.layers[1].b[0], 1.0);
    }

    #[test]
    fn parameter_helpers() {
        let mut rng = rng_from_seed(3);
        let a = Mlp::new(&[2, 2, 1], Activation::Identity, &mut rng).unwrap();
        let mut t = a.zeros_like();
        assert_eq!(t.n_params(), 2 * 2 + 2 + 2 + 1);
        t.soft_update(&a, 0.5);
        assert_relative_eq!(t.layers[0].w[[0, 1]], 0.5 * a.layers[0].w[[0, 1]]);
        t.fill(3.0);
        t.fill(0.0);
        t.layers[1].b[0] = 4.0;
        t.layers[1].w[[0, 0]] = 3.0;
        assert_eq!(t.clip_norm(1.0), 5.0);
        assert_relative_eq!(t.l2_norm(), 1.0, epsilon = 1e-15);
    }
}
