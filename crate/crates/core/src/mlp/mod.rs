//! From-scratch feedforward inverse estimator: dense / batch-norm / sigmoid
//! blocks, a ReLU + simplex-scale output head, explicit backpropagation,
//! Adam with learning-rate decay, and validation-based checkpointing.

mod gradcheck;
mod layers;
mod train;

pub use gradcheck::{grad_check, grad_deviation_sum};
pub use layers::{BatchNorm, Dense, Layer, LayerCache, LayerGrads, BN_EPS, BN_MOMENTUM};
pub use train::{
    shifted_equivalent, train, train_shallow_forward, DecaySchedule, EpochLog, Regenerator,
    TrainedModel, TrainingConfig,
};

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture of the inverse network. The hidden activation is sigmoid and
/// the output head is always ReLU followed by the simplex-scale layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub output_dim: usize,
    #[serde(default = "default_true")]
    pub use_batchnorm: bool,
}

fn default_true() -> bool {
    true
}

impl NetworkSpec {
    /// The standard double-layer stack with 4 x output_dim nodes per hidden
    /// layer.
    pub fn standard(input_dim: usize, output_dim: usize) -> Self {
        Self::with_width_factor(input_dim, output_dim, 4)
    }

    /// Double hidden layers of `factor * output_dim` nodes each.
    pub fn with_width_factor(input_dim: usize, output_dim: usize, factor: usize) -> Self {
        NetworkSpec {
            input_dim,
            hidden_widths: vec![factor * output_dim; 2],
            output_dim,
            use_batchnorm: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::domain("network dims must be positive"));
        }
        if self.hidden_widths.iter().any(|&w| w == 0) {
            return Err(Error::domain("hidden widths must be positive"));
        }
        Ok(())
    }
}

/// The layer stack plus everything needed to run and snapshot it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub layers: Vec<Layer>,
}

/// Parameters initialized uniformly in +-sqrt(6 / (fan_in + fan_out)),
/// biases zero, batch-norm scale one / shift zero; deterministic per seed.
pub fn build_network<R: Rng>(spec: &NetworkSpec, rng: &mut R) -> Result<NetworkModel> {
    spec.validate()?;
    let mut layers = Vec::new();
    let mut in_dim = spec.input_dim;
    for &width in &spec.hidden_widths {
        layers.push(Layer::Dense(init_dense(in_dim, width, rng)));
        if spec.use_batchnorm {
            layers.push(Layer::Batchnorm(BatchNorm::new(width)));
        }
        layers.push(Layer::Sigmoid);
        in_dim = width;
    }
    // The output head is the one place a bias is not cancelled by batch
    // norm. Starting it positive keeps every ReLU unit initially alive;
    // with a zero bias, a unit whose column weight-sum is negative is dead
    // on most inputs from the first step and its composition component can
    // never leave zero.
    let mut out_dense = init_dense(in_dim, spec.output_dim, rng);
    out_dense.b.fill(0.5);
    layers.push(Layer::Dense(out_dense));
    layers.push(Layer::Relu);
    layers.push(Layer::SimplexScale);
    Ok(NetworkModel { layers })
}

fn init_dense<R: Rng>(fan_in: usize, fan_out: usize, rng: &mut R) -> Dense {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut w = Array2::zeros((fan_in, fan_out));
    for v in w.iter_mut() {
        *v = rng.gen_range(-limit..limit);
    }
    Dense {
        w,
        b: Array1::zeros(fan_out),
    }
}

impl NetworkModel {
    pub fn from_layers(layers: Vec<Layer>) -> Self {
        NetworkModel { layers }
    }

    pub fn num_trainable_params(&self) -> usize {
        self.layers.iter().map(Layer::num_trainable_params).sum()
    }

    pub fn input_dim(&self) -> usize {
        match self.layers.first() {
            Some(Layer::Dense(d)) => d.w.nrows(),
            _ => 0,
        }
    }

    pub fn output_dim(&self) -> usize {
        let mut dim = self.input_dim();
        for layer in &self.layers {
            dim = layer.output_dim(dim);
        }
        dim
    }

    /// Deterministic evaluation-mode forward (running batch-norm stats; rows
    /// are independent).
    pub fn forward_eval(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut h = x.clone();
        for layer in &self.layers {
            h = layer.forward_eval(&h);
        }
        h
    }

    /// Training-mode forward. Batch-norm layers consume batch statistics and
    /// update their running statistics.
    pub fn forward_train(&mut self, x: &Array2<f64>) -> (Array2<f64>, Vec<LayerCache>) {
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &mut self.layers {
            let (out, cache) = layer.forward_train(&h);
            caches.push(cache);
            h = out;
        }
        (h, caches)
    }

    /// Backpropagates the output gradient through the cached forward pass.
    pub fn backward(&self, caches: &[LayerCache], grad_out: Array2<f64>) -> Vec<LayerGrads> {
        let mut grads = vec![LayerGrads::None; self.layers.len()];
        let mut g = grad_out;
        for (i, (layer, cache)) in self.layers.iter().zip(caches).enumerate().rev() {
            let (pg, gin) = layer.backward(cache, &g);
            grads[i] = pg;
            g = gin;
        }
        grads
    }

    /// Mean over batch and components of the squared difference.
    pub fn loss_mse(pred: &Array2<f64>, target: &Array2<f64>) -> f64 {
        debug_assert_eq!(pred.dim(), target.dim());
        let n = (pred.nrows() * pred.ncols()) as f64;
        pred.iter()
            .zip(target.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n
    }

    /// Gradient of [`Self::loss_mse`] with respect to the prediction.
    pub fn loss_mse_grad(pred: &Array2<f64>, target: &Array2<f64>) -> Array2<f64> {
        let n = (pred.nrows() * pred.ncols()) as f64;
        (pred - target) * (2.0 / n)
    }

    /// Serializes the layer list (shapes and full-precision parameters).
    pub fn save_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use crate::simplex::is_on_simplex;
    use approx::assert_abs_diff_eq;

    #[test]
    fn parameter_count_matches_shapes() {
        let spec = NetworkSpec {
            input_dim: 5,
            hidden_widths: vec![12, 12],
            output_dim: 3,
            use_batchnorm: true,
        };
        let model = build_network(&spec, &mut substream(1, "init")).unwrap();
        let dense = 5 * 12 + 12 + 12 * 12 + 12 + 12 * 3 + 3;
        let bn = 2 * (12 + 12);
        assert_eq!(model.num_trainable_params(), dense + bn);
        assert_eq!(model.input_dim(), 5);
        assert_eq!(model.output_dim(), 3);
    }

    #[test]
    fn same_seed_same_init() {
        let spec = NetworkSpec::standard(5, 3);
        let a = build_network(&spec, &mut substream(2, "init")).unwrap();
        let b = build_network(&spec, &mut substream(2, "init")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn forward_rows_are_on_simplex() {
        let spec = NetworkSpec::standard(5, 3);
        let mut model = build_network(&spec, &mut substream(3, "init")).unwrap();
        let x = Array2::from_shape_fn((16, 5), |(i, j)| ((i * 7 + j) as f64).sin());
        let out_eval = model.forward_eval(&x);
        let (out_train, _) = model.forward_train(&x);
        for out in [&out_eval, &out_train] {
            for row in out.rows() {
                assert!(is_on_simplex(row, 1e-9));
                assert!(row.iter().all(|v| v.is_finite()));
            }
        }
    }

    #[test]
    fn dead_output_head_falls_back_to_uniform() {
        // Zero weights and a negative bias kill the ReLU; the scale layer
        // then emits the centroid.
        let layers = vec![
            Layer::Dense(Dense {
                w: Array2::zeros((4, 3)),
                b: Array1::from_elem(3, -1.0),
            }),
            Layer::Relu,
            Layer::SimplexScale,
        ];
        let model = NetworkModel::from_layers(layers);
        let out = model.forward_eval(&Array2::ones((2, 4)));
        for row in out.rows() {
            for &v in row {
                assert_abs_diff_eq!(v, 1.0 / 3.0);
            }
        }
    }

    #[test]
    fn eval_forward_is_batch_independent() {
        let spec = NetworkSpec::standard(6, 4);
        let model = build_network(&spec, &mut substream(4, "init")).unwrap();
        let x = Array2::from_shape_fn((8, 6), |(i, j)| ((i + 2 * j) as f64).cos());
        let batched = model.forward_eval(&x);
        for (i, row) in x.rows().into_iter().enumerate() {
            let single = model.forward_eval(&row.insert_axis(ndarray::Axis(0)).to_owned());
            for (a, b) in batched.row(i).iter().zip(single.row(0).iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn loss_examples() {
        let a = Array2::from_elem((4, 3), 0.5);
        assert_eq!(NetworkModel::loss_mse(&a, &a), 0.0);
        let b = a.mapv(|v| v + 0.1);
        assert_abs_diff_eq!(NetworkModel::loss_mse(&a, &b), 0.01, epsilon = 1e-15);
    }

    #[test]
    fn loss_matches_two_loop_reference() {
        let mut rng = substream(5, "loss");
        use rand::Rng;
        let p = Array2::from_shape_fn((7, 4), |_| rng.gen::<f64>());
        let t = Array2::from_shape_fn((7, 4), |_| rng.gen::<f64>());
        let mut acc = 0.0;
        for i in 0..7 {
            for j in 0..4 {
                let d = p[(i, j)] - t[(i, j)];
                acc += d * d;
            }
        }
        acc /= 28.0;
        assert_abs_diff_eq!(NetworkModel::loss_mse(&p, &t), acc, epsilon = 1e-14);
    }

    #[test]
    fn checkpoint_round_trip() {
        let spec = NetworkSpec::standard(5, 3);
        let mut model = build_network(&spec, &mut substream(6, "init")).unwrap();
        // Touch the running stats so they are not at init.
        let x = Array2::from_shape_fn((32, 5), |(i, j)| ((i + j) as f64).sin());
        let _ = model.forward_train(&x);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save_json(&path).unwrap();
        let back = NetworkModel::load_json(&path).unwrap();
        assert_eq!(model, back);
    }
}
