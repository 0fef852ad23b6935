//! Dense layers, a GRU cell, the normalized cross-entropy loss, ADAM and a
//! finite-difference gradient checker.
//!
//! Every forward pass that needs gradients returns a cache; the matching
//! `backward` takes the cache and the upstream gradient, accumulates
//! parameter gradients into a caller-owned buffer and returns the gradient
//! with respect to its input.

mod adam;
mod gru;
mod loss;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use thiserror::Error;

pub use adam::{AdamConfig, AdamState};
pub use gru::{gru_step, GruCache, GruCell};
pub use loss::{normalized_cross_entropy, PROB_CLAMP};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation output `y`.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Affine map `y = W x + b` with `W` stored as `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl DenseLayer {
    pub fn new(weights: Array2<f64>, biases: Array1<f64>) -> Result<Self, NnError> {
        if weights.nrows() != biases.len() {
            return Err(NnError::DimensionMismatch {
                context: "dense layer biases",
                expected: weights.nrows(),
                found: biases.len(),
            });
        }
        Ok(Self { weights, biases })
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weights: Array2::zeros((out_dim, in_dim)),
            biases: Array1::zeros(out_dim),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: rand::Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = Array2::from_shape_fn((out_dim, in_dim), |_| rng.random_range(-limit..limit));
        Self {
            weights,
            biases: Array1::zeros(out_dim),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    /// Row-batched affine map: each row of `x` is one input.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut y = x.dot(&self.weights.t());
        y += &self.biases;
        y
    }
}

/// Stack of dense layers, each followed by its own activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
    pub activations: Vec<Activation>,
}

/// Per-layer inputs and outputs of a batched [`Mlp`] forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Array2<f64>>,
    outputs: Vec<Array2<f64>>,
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>, activations: Vec<Activation>) -> Result<Self, NnError> {
        if layers.len() != activations.len() {
            return Err(NnError::DimensionMismatch {
                context: "activations per layer",
                expected: layers.len(),
                found: activations.len(),
            });
        }
        for w in layers.windows(2) {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(NnError::DimensionMismatch {
                    context: "layer chain",
                    expected: w[0].out_dim(),
                    found: w[1].in_dim(),
                });
            }
        }
        Ok(Self { layers, activations })
    }

    /// Glorot-initialized network with widths `dims[0] → … → dims[last]`,
    /// `hidden` on every layer except the last, which uses `output`.
    pub fn glorot<R: rand::Rng>(dims: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Self {
        let layers: Vec<DenseLayer> = dims.windows(2).map(|w| DenseLayer::glorot(w[0], w[1], rng)).collect();
        let mut activations = vec![hidden; layers.len()];
        *activations.last_mut().expect("at least one layer") = output;
        Self { layers, activations }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").out_dim()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(|l| DenseLayer::zeros(l.in_dim(), l.out_dim())).collect(),
            activations: self.activations.clone(),
        }
    }

    pub fn forward_batch(&self, x: ArrayView2<f64>) -> (Array2<f64>, MlpCache) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_owned();
        for (layer, &act) in self.layers.iter().zip(&self.activations) {
            let mut y = layer.forward_batch(cur.view());
            if act != Activation::Identity {
                y.mapv_inplace(|v| act.apply(v));
            }
            inputs.push(cur);
            outputs.push(y.clone());
            cur = y;
        }
        (cur, MlpCache { inputs, outputs })
    }

    /// Forward pass without a cache.
    pub fn predict_batch(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut cur = x.to_owned();
        for (layer, &act) in self.layers.iter().zip(&self.activations) {
            cur = layer.forward_batch(cur.view());
            if act != Activation::Identity {
                cur.mapv_inplace(|v| act.apply(v));
            }
        }
        cur
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to the batch input.
    pub fn backward(&self, cache: &MlpCache, d_out: Array2<f64>, grad: &mut Mlp) -> Array2<f64> {
        let mut d = d_out;
        for l in (0..self.layers.len()).rev() {
            let act = self.activations[l];
            if act != Activation::Identity {
                d.zip_mut_with(&cache.outputs[l], |g, &y| *g *= act.derivative_from_output(y));
            }
            let g = &mut grad.layers[l];
            ndarray::linalg::general_mat_mul(1.0, &d.t(), &cache.inputs[l], 1.0, &mut g.weights);
            g.biases += &d.sum_axis(Axis(0));
            d = d.dot(&self.layers[l].weights);
        }
        d
    }
}

/// Single-vector forward pass through `layers` with one activation per
/// layer.
pub fn mlp_forward(layers: &[DenseLayer], activations: &[Activation], x: &[f64]) -> Result<Vec<f64>, NnError> {
    if layers.len() != activations.len() {
        return Err(NnError::DimensionMismatch {
            context: "activations per layer",
            expected: layers.len(),
            found: activations.len(),
        });
    }
    let mut cur = x.to_vec();
    for (layer, &act) in layers.iter().zip(activations) {
        if layer.in_dim() != cur.len() {
            return Err(NnError::DimensionMismatch {
                context: "mlp input",
                expected: layer.in_dim(),
                found: cur.len(),
            });
        }
        cur = layer
            .weights
            .rows()
            .into_iter()
            .zip(&layer.biases)
            .map(|(row, b)| act.apply(row.iter().zip(&cur).map(|(w, x)| w * x).sum::<f64>() + b))
            .collect();
    }
    Ok(cur)
}

/// Largest relative error between `f`'s analytic gradient and central
/// differences with the given step, taken over every parameter.
///
/// The relative error of one parameter is
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_difference_check<F>(mut f: F, params: &[f64], step: f64) -> f64
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(params);
    assert_eq!(analytic.len(), params.len(), "gradient length must match parameters");
    let mut p = params.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + step;
        let (up, _) = f(&p);
        p[i] = orig - step;
        let (down, _) = f(&p);
        p[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use isingnn_core::rng::rng_from_seed;
    use ndarray::{array, Array};
    use rand::Rng as _;

    #[test]
    fn mlp_forward_examples() {
        let id = DenseLayer::new(Array2::eye(3), Array1::zeros(3)).unwrap();
        assert_eq!(mlp_forward(&[id], &[Activation::Identity], &[1.0, -2.0, 3.5]).unwrap(), vec![1.0, -2.0, 3.5]);
        let l = DenseLayer::new(array![[1.0]], array![-2.0]).unwrap();
        assert_eq!(mlp_forward(&[l], &[Activation::Relu], &[1.0]).unwrap(), vec![0.0]);
        let z = DenseLayer::zeros(4, 2);
        assert_eq!(mlp_forward(&[z], &[Activation::Sigmoid], &[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn mlp_forward_rejects_bad_shapes() {
        let l = DenseLayer::zeros(3, 2);
        assert!(matches!(
            mlp_forward(&[l.clone()], &[Activation::Relu], &[1.0]),
            Err(NnError::DimensionMismatch { expected: 3, found: 1, .. })
        ));
        assert!(mlp_forward(&[l], &[], &[1.0, 2.0, 3.0]).is_err());
        assert!(DenseLayer::new(Array2::zeros((2, 2)), Array1::zeros(3)).is_err());
        assert!(Mlp::new(vec![DenseLayer::zeros(2, 3), DenseLayer::zeros(4, 1)], vec![Activation::Relu; 2]).is_err());
    }

    #[test]
    fn batched_and_single_forward_agree() {
        let mut rng = rng_from_seed(1);
        let mlp = Mlp::glorot(&[4, 8, 3], Activation::Relu, Activation::Sigmoid, &mut rng);
        let x = Array::from_shape_fn((5, 4), |(i, j)| (i as f64 - 2.0) * 0.3 + j as f64 * 0.1);
        let (y, _) = mlp.forward_batch(x.view());
        for (row, yr) in x.rows().into_iter().zip(y.rows()) {
            let single = mlp_forward(&mlp.layers, &mlp.activations, row.as_slice().unwrap()).unwrap();
            for (a, b) in single.iter().zip(yr) {
                assert!((a - b).abs() < 1e-14);
            }
        }
        assert_eq!(mlp.predict_batch(x.view()), y);
    }

    #[test]
    fn sigmoid_gradient_closed_form() {
        // loss = σ(w x) at w = 0, x = 1
        let layer = DenseLayer::new(array![[0.0]], array![0.0]).unwrap();
        let mlp = Mlp::new(vec![layer], vec![Activation::Sigmoid]).unwrap();
        let x = array![[1.0]];
        let (_, cache) = mlp.forward_batch(x.view());
        let mut grad = mlp.zeros_like();
        mlp.backward(&cache, array![[1.0]], &mut grad);
        assert_eq!(grad.layers[0].weights[[0, 0]], 0.25);
    }

    #[test]
    fn shared_parameter_gradients_accumulate() {
        // loss = w x1 + w x2 as two rows through one shared layer
        let layer = DenseLayer::new(array![[0.7]], array![0.0]).unwrap();
        let mlp = Mlp::new(vec![layer], vec![Activation::Identity]).unwrap();
        let x = array![[2.0], [-0.5]];
        let (_, cache) = mlp.forward_batch(x.view());
        let mut grad = mlp.zeros_like();
        mlp.backward(&cache, array![[1.0], [1.0]], &mut grad);
        assert_eq!(grad.layers[0].weights[[0, 0]], 1.5);
    }

    fn flatten(m: &Mlp) -> Vec<f64> {
        m.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied().collect::<Vec<_>>())
            .collect()
    }

    fn unflatten(m: &mut Mlp, p: &[f64]) {
        let mut it = p.iter();
        for l in &mut m.layers {
            l.weights.iter_mut().chain(l.biases.iter_mut()).for_each(|v| *v = *it.next().unwrap());
        }
    }

    fn mlp_fd_error(act: Activation, seed: u64) -> f64 {
        let mut rng = rng_from_seed(seed);
        let base = Mlp::glorot(&[3, 4, 2], act, act, &mut rng);
        let x = Array::from_shape_fn((3, 3), |_| rng.random_range(-1.0..1.0));
        // weighted sum of outputs as a scalar loss
        let wout = Array::from_shape_fn((3, 2), |_| rng.random_range(-1.0..1.0));
        let f = |p: &[f64]| {
            let mut m = base.clone();
            unflatten(&mut m, p);
            let (y, cache) = m.forward_batch(x.view());
            let loss = (&y * &wout).sum();
            let mut g = m.zeros_like();
            m.backward(&cache, wout.clone(), &mut g);
            (loss, flatten(&g))
        };
        finite_difference_check(f, &flatten(&base), 1e-5)
    }

    #[test]
    fn activation_gradients_match_finite_differences() {
        for act in [Activation::Identity, Activation::Sigmoid, Activation::Tanh] {
            let e = mlp_fd_error(act, 3);
            assert!(e <= 1e-6, "{act:?}: {e}");
        }
        // ReLU: pick a seed whose pre-activations stay clear of the kink
        let e = mlp_fd_error(Activation::Relu, 5);
        assert!(e <= 1e-6, "relu: {e}");
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(8);
        let m = Mlp::glorot(&[3, 5, 2], Activation::Tanh, Activation::Sigmoid, &mut rng);
        let f = |p: &[f64]| {
            let x = Array2::from_shape_vec((1, 3), p.to_vec()).unwrap();
            let (y, cache) = m.forward_batch(x.view());
            let mut g = m.zeros_like();
            let dx = m.backward(&cache, Array2::ones((1, 2)), &mut g);
            (y.sum(), dx.iter().copied().collect())
        };
        assert!(finite_difference_check(f, &[0.3, -0.2, 0.9], 1e-5) <= 1e-6);
    }

    #[test]
    fn fd_checker_examples() {
        let quad = |p: &[f64]| (p[0] * p[0], vec![2.0 * p[0]]);
        assert!(finite_difference_check(quad, &[3.0], 1e-5) <= 1e-8);
        let constant = |p: &[f64]| (1.5, vec![0.0; p.len()]);
        assert_eq!(finite_difference_check(constant, &[1.0, 2.0], 1e-5), 0.0);
    }

    #[test]
    fn glorot_bounds() {
        let mut rng = rng_from_seed(0);
        let l = DenseLayer::glorot(10, 6, &mut rng);
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(l.weights.iter().all(|w| w.abs() <= limit));
        assert!(l.biases.iter().all(|&b| b == 0.0));
    }
}
