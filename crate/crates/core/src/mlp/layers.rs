//! Layer primitives with explicit forward and backward passes.
//!
//! The stack is small by design: dense, batch normalization, sigmoid, ReLU,
//! and the final simplex-scale layer that divides each row by its sum so the
//! network output lives on the simplex without post-processing.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

/// Batch-norm variance stabilizer.
pub const BN_EPS: f64 = 1e-5;
/// Momentum of the running-statistics update.
pub const BN_MOMENTUM: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// in x out.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm {
    pub fn new(dim: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
            running_mean: Array1::zeros(dim),
            running_var: Array1::ones(dim),
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Layer {
    Dense(Dense),
    Batchnorm(BatchNorm),
    Sigmoid,
    Relu,
    SimplexScale,
}

impl Layer {
    pub fn num_trainable_params(&self) -> usize {
        match self {
            Layer::Dense(d) => d.w.len() + d.b.len(),
            Layer::Batchnorm(bn) => bn.gamma.len() + bn.beta.len(),
            _ => 0,
        }
    }

    pub fn output_dim(&self, input_dim: usize) -> usize {
        match self {
            Layer::Dense(d) => d.w.ncols(),
            _ => input_dim,
        }
    }
}

/// Intermediate values needed by the backward pass.
pub enum LayerCache {
    Dense {
        input: Array2<f64>,
    },
    Batchnorm {
        centered: Array2<f64>,
        var: Array1<f64>,
        x_hat: Array2<f64>,
    },
    Sigmoid {
        output: Array2<f64>,
    },
    Relu {
        mask: Array2<f64>,
    },
    SimplexScale {
        output: Array2<f64>,
        sums: Array1<f64>,
    },
}

/// Parameter gradients, shaped like the layer's trainables.
#[derive(Debug, Clone)]
pub enum LayerGrads {
    Dense { w: Array2<f64>, b: Array1<f64> },
    Batchnorm { gamma: Array1<f64>, beta: Array1<f64> },
    None,
}

impl Layer {
    /// Evaluation-mode forward (running statistics, no caches).
    pub fn forward_eval(&self, x: &Array2<f64>) -> Array2<f64> {
        match self {
            Layer::Dense(d) => x.dot(&d.w) + &d.b,
            Layer::Batchnorm(bn) => {
                let mut out = x.clone();
                for mut row in out.rows_mut() {
                    for (j, v) in row.iter_mut().enumerate() {
                        let x_hat = (*v - bn.running_mean[j]) / (bn.running_var[j] + bn.eps).sqrt();
                        *v = bn.gamma[j] * x_hat + bn.beta[j];
                    }
                }
                out
            }
            Layer::Sigmoid => x.mapv(sigmoid),
            Layer::Relu => x.mapv(|v| v.max(0.0)),
            Layer::SimplexScale => {
                let mut out = x.clone();
                scale_rows(&mut out);
                out
            }
        }
    }

    /// Training-mode forward; batch-norm uses batch statistics and updates
    /// its running statistics.
    pub fn forward_train(&mut self, x: &Array2<f64>) -> (Array2<f64>, LayerCache) {
        match self {
            Layer::Dense(d) => {
                let out = x.dot(&d.w) + &d.b;
                (out, LayerCache::Dense { input: x.clone() })
            }
            Layer::Batchnorm(bn) => {
                let b = x.nrows() as f64;
                let mean = x.mean_axis(ndarray::Axis(0)).expect("non-empty batch");
                let mut centered = x.clone();
                for mut row in centered.rows_mut() {
                    row -= &mean;
                }
                let var = centered.mapv(|v| v * v).sum_axis(ndarray::Axis(0)) / b;
                let inv_std = var.mapv(|v| 1.0 / (v + bn.eps).sqrt());
                let mut x_hat = centered.clone();
                for mut row in x_hat.rows_mut() {
                    row *= &inv_std;
                }
                let mut out = x_hat.clone();
                for mut row in out.rows_mut() {
                    row *= &bn.gamma;
                    row += &bn.beta;
                }
                let m = bn.momentum;
                bn.running_mean = m * &bn.running_mean + (1.0 - m) * &mean;
                bn.running_var = m * &bn.running_var + (1.0 - m) * &var;
                (out, LayerCache::Batchnorm { centered, var, x_hat })
            }
            Layer::Sigmoid => {
                let out = x.mapv(sigmoid);
                (out.clone(), LayerCache::Sigmoid { output: out })
            }
            Layer::Relu => {
                let mask = x.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                (x * &mask, LayerCache::Relu { mask })
            }
            Layer::SimplexScale => {
                let mut out = x.clone();
                let sums = scale_rows(&mut out);
                (out.clone(), LayerCache::SimplexScale { output: out, sums })
            }
        }
    }

    /// Backward pass: upstream gradient to (parameter grads, input grad).
    pub fn backward(&self, cache: &LayerCache, grad_out: &Array2<f64>) -> (LayerGrads, Array2<f64>) {
        match (self, cache) {
            (Layer::Dense(d), LayerCache::Dense { input }) => {
                let gw = input.t().dot(grad_out);
                let gb = grad_out.sum_axis(ndarray::Axis(0));
                let gin = grad_out.dot(&d.w.t());
                (LayerGrads::Dense { w: gw, b: gb }, gin)
            }
            (Layer::Batchnorm(bn), LayerCache::Batchnorm { centered, var, x_hat }) => {
                let b = centered.nrows() as f64;
                let inv_std = var.mapv(|v| 1.0 / (v + bn.eps).sqrt());
                let g_gamma = (grad_out * x_hat).sum_axis(ndarray::Axis(0));
                let g_beta = grad_out.sum_axis(ndarray::Axis(0));
                // d x_hat.
                let mut dxh = grad_out.clone();
                for mut row in dxh.rows_mut() {
                    row *= &bn.gamma;
                }
                // d var and d mean.
                let dvar = (&dxh * centered).sum_axis(ndarray::Axis(0))
                    * var.mapv(|v| -0.5 * (v + bn.eps).powf(-1.5));
                let dmean = {
                    let a = (&dxh).sum_axis(ndarray::Axis(0)) * inv_std.mapv(|v| -v);
                    let c = centered.sum_axis(ndarray::Axis(0)) * (-2.0 / b);
                    a + &(&dvar * &c)
                };
                let mut gin = dxh;
                for mut row in gin.rows_mut() {
                    row *= &inv_std;
                }
                for (mut row, c_row) in gin.rows_mut().into_iter().zip(centered.rows()) {
                    for ((g, &c), (&dv, &dm)) in row
                        .iter_mut()
                        .zip(c_row.iter())
                        .zip(dvar.iter().zip(dmean.iter()))
                    {
                        *g += dv * 2.0 * c / b + dm / b;
                    }
                }
                (
                    LayerGrads::Batchnorm {
                        gamma: g_gamma,
                        beta: g_beta,
                    },
                    gin,
                )
            }
            (Layer::Sigmoid, LayerCache::Sigmoid { output }) => {
                let gin = grad_out * &output.mapv(|s| s * (1.0 - s));
                (LayerGrads::None, gin)
            }
            (Layer::Relu, LayerCache::Relu { mask }) => (LayerGrads::None, grad_out * mask),
            (Layer::SimplexScale, LayerCache::SimplexScale { output, sums }) => {
                let mut gin = grad_out.clone();
                for ((mut row, y_row), &s) in gin
                    .rows_mut()
                    .into_iter()
                    .zip(output.rows())
                    .zip(sums.iter())
                {
                    if s > 0.0 {
                        let inner: f64 = row.iter().zip(y_row.iter()).map(|(g, y)| g * y).sum();
                        for g in row.iter_mut() {
                            *g = (*g - inner) / s;
                        }
                    } else {
                        // Degenerate fallback row: constant output, zero grad.
                        row.fill(0.0);
                    }
                }
                (LayerGrads::None, gin)
            }
            _ => unreachable!("cache kind does not match layer kind"),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Divides each row by its sum; all-zero rows become uniform. Returns the
/// row sums (zero marks the degenerate fallback).
fn scale_rows(x: &mut Array2<f64>) -> Array1<f64> {
    let m = x.ncols() as f64;
    let mut sums = Array1::zeros(x.nrows());
    for (mut row, s) in x.rows_mut().into_iter().zip(sums.iter_mut()) {
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            row.mapv_inplace(|v| v / sum);
            *s = sum;
        } else {
            row.fill(1.0 / m);
            *s = 0.0;
        }
    }
    sums
}
