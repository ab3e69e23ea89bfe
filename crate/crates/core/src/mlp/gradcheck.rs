//! Central finite-difference verification of the hand-written backward pass.

use ndarray::Array2;

use super::layers::{Layer, LayerGrads};
use super::NetworkModel;
use crate::error::{Error, Result};

/// Denominator floor of the relative deviation; parameters with exactly zero
/// gradient (e.g. a bias feeding batch norm) otherwise divide finite-
/// difference noise by itself.
const REL_FLOOR: f64 = 1e-6;

/// Compares analytic gradients against central finite differences for every
/// trainable parameter and returns the worst relative deviation
/// |g - g_fd| / max(|g| + |g_fd|, 1e-6).
///
/// The model is cloned per probe so train-mode batch-norm statistics see
/// exactly the same state on every evaluation.
pub fn grad_check(
    model: &NetworkModel,
    batch: &Array2<f64>,
    targets: &Array2<f64>,
    eps: f64,
) -> Result<f64> {
    if batch.nrows() == 0 || batch.nrows() > 8 {
        return Err(Error::domain("gradient check expects 1..=8 rows"));
    }
    if !(eps > 0.0) {
        return Err(Error::domain("eps must be positive"));
    }

    let loss_at = |m: &NetworkModel| -> f64 {
        let mut probe = m.clone();
        let (pred, _) = probe.forward_train(batch);
        NetworkModel::loss_mse(&pred, targets)
    };

    let mut analytic = model.clone();
    let (pred, caches) = analytic.forward_train(batch);
    let grads = analytic.backward(&caches, NetworkModel::loss_mse_grad(&pred, targets));

    let mut worst = 0.0f64;
    let mut check = |layer_idx: usize, param_idx: usize, analytic_grad: f64| -> Result<()> {
        let mut plus = model.clone();
        nudge(&mut plus.layers[layer_idx], param_idx, eps);
        let mut minus = model.clone();
        nudge(&mut minus.layers[layer_idx], param_idx, -eps);
        let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * eps);
        let rel = (analytic_grad - numeric).abs()
            / (analytic_grad.abs() + numeric.abs()).max(REL_FLOOR);
        if rel > worst {
            worst = rel;
        }
        Ok(())
    };

    for (li, grad) in grads.iter().enumerate() {
        match grad {
            LayerGrads::Dense { w, b } => {
                for (pi, &g) in w.iter().chain(b.iter()).enumerate() {
                    check(li, pi, g)?;
                }
            }
            LayerGrads::Batchnorm { gamma, beta } => {
                for (pi, &g) in gamma.iter().chain(beta.iter()).enumerate() {
                    check(li, pi, g)?;
                }
            }
            LayerGrads::None => {}
        }
    }
    Ok(worst)
}

/// Sum over trainables of |analytic - finite difference| (used to observe the
/// O(eps^2) truncation scaling on smooth stacks).
pub fn grad_deviation_sum(
    model: &NetworkModel,
    batch: &Array2<f64>,
    targets: &Array2<f64>,
    eps: f64,
) -> Result<f64> {
    let loss_at = |m: &NetworkModel| -> f64 {
        let mut probe = m.clone();
        let (pred, _) = probe.forward_train(batch);
        NetworkModel::loss_mse(&pred, targets)
    };
    let mut analytic = model.clone();
    let (pred, caches) = analytic.forward_train(batch);
    let grads = analytic.backward(&caches, NetworkModel::loss_mse_grad(&pred, targets));

    let mut total = 0.0;
    for (li, grad) in grads.iter().enumerate() {
        let flat: Vec<f64> = match grad {
            LayerGrads::Dense { w, b } => w.iter().chain(b.iter()).copied().collect(),
            LayerGrads::Batchnorm { gamma, beta } => {
                gamma.iter().chain(beta.iter()).copied().collect()
            }
            LayerGrads::None => continue,
        };
        for (pi, g) in flat.into_iter().enumerate() {
            let mut plus = model.clone();
            nudge(&mut plus.layers[li], pi, eps);
            let mut minus = model.clone();
            nudge(&mut minus.layers[li], pi, -eps);
            let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * eps);
            total += (g - numeric).abs();
        }
    }
    Ok(total)
}

/// Adds `delta` to the `flat_idx`-th trainable parameter of the layer
/// (weights first, then biases / scale then shift).
fn nudge(layer: &mut Layer, flat_idx: usize, delta: f64) {
    match layer {
        Layer::Dense(d) => {
            let nw = d.w.len();
            if flat_idx < nw {
                let cols = d.w.ncols();
                d.w[(flat_idx / cols, flat_idx % cols)] += delta;
            } else {
                d.b[flat_idx - nw] += delta;
            }
        }
        Layer::Batchnorm(bn) => {
            let ng = bn.gamma.len();
            if flat_idx < ng {
                bn.gamma[flat_idx] += delta;
            } else {
                bn.beta[flat_idx - ng] += delta;
            }
        }
        _ => unreachable!("layer has no trainable parameters"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::layers::Dense;
    use crate::mlp::{build_network, NetworkSpec};
    use crate::rng::substream;
    use crate::simplex::sample_uniform_simplex;
    use ndarray::{Array1, Array2};

    fn batch(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        use rand::Rng;
        let mut rng = substream(seed, "gc-batch");
        Array2::from_shape_fn((rows, cols), |_| rng.gen::<f64>() * 2.0 - 1.0)
    }

    #[test]
    fn full_stack_gradients_match_finite_differences() {
        let spec = NetworkSpec {
            input_dim: 5,
            hidden_widths: vec![8, 8],
            output_dim: 3,
            use_batchnorm: true,
        };
        let model = build_network(&spec, &mut substream(1, "init")).unwrap();
        let x = batch(6, 5, 1);
        let t = sample_uniform_simplex(3, 6, &mut substream(1, "t")).unwrap();
        let worst = grad_check(&model, &x, &t, 1e-5).unwrap();
        assert!(worst < 1e-4, "worst deviation {worst}");
    }

    #[test]
    fn deviation_shrinks_quadratically_on_smooth_stack() {
        // Sigmoid-only head: no ReLU kinks, so the central-difference error
        // is pure O(eps^2) truncation.
        let layers = vec![
            Layer::Dense(Dense {
                w: Array2::from_shape_fn((4, 6), |(i, j)| ((i * 3 + j) as f64 * 0.37).sin()),
                b: Array1::from_shape_fn(6, |i| (i as f64 * 0.21).cos() * 0.1),
            }),
            Layer::Sigmoid,
            Layer::Dense(Dense {
                w: Array2::from_shape_fn((6, 2), |(i, j)| ((i + 2 * j) as f64 * 0.53).cos()),
                b: Array1::zeros(2),
            }),
            Layer::Sigmoid,
        ];
        let model = NetworkModel::from_layers(layers);
        let x = batch(4, 4, 2);
        let t = Array2::from_elem((4, 2), 0.3);
        let coarse = grad_deviation_sum(&model, &x, &t, 1e-3).unwrap();
        let fine = grad_deviation_sum(&model, &x, &t, 1e-5).unwrap();
        assert!(
            coarse > 50.0 * fine,
            "expected ~1e4 contraction, got {coarse} -> {fine}"
        );
    }

    #[test]
    fn zero_output_weights_give_zero_gradient_below() {
        // With the output dense zeroed and a dead ReLU head, nothing behind
        // it receives gradient; analytic and numeric agree on exactly zero.
        let layers = vec![
            Layer::Dense(Dense {
                w: Array2::from_shape_fn((3, 4), |(i, j)| 0.1 * (i as f64 - j as f64)),
                b: Array1::zeros(4),
            }),
            Layer::Sigmoid,
            Layer::Dense(Dense {
                w: Array2::zeros((4, 2)),
                b: Array1::from_elem(2, -0.5),
            }),
            Layer::Relu,
            Layer::SimplexScale,
        ];
        let mut model = NetworkModel::from_layers(layers);
        let x = batch(4, 3, 3);
        let t = Array2::from_elem((4, 2), 0.5);
        let (pred, caches) = model.forward_train(&x);
        let grads = model.backward(&caches, NetworkModel::loss_mse_grad(&pred, &t));
        match &grads[0] {
            LayerGrads::Dense { w, b } => {
                assert!(w.iter().all(|&g| g == 0.0));
                assert!(b.iter().all(|&g| g == 0.0));
            }
            _ => panic!("expected dense grads"),
        }
        let worst = grad_check(&model, &x, &t, 1e-5).unwrap();
        assert!(worst < 1e-4, "worst deviation {worst}");
    }
}
