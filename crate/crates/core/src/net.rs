//! Small dense reconstruction network with exact MSE backpropagation.
//!
//! Layers compute `act(X·W + b)` on row-batches; the final layer is always
//! linear. `forward` returns the per-layer inputs alongside the outputs —
//! the input actually multiplied into each weight matrix is exactly what
//! the basis capture later streams (transposed to d × N).

use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, invalid, Result};
use crate::matrix::Matrix;
use crate::rng::{chacha, gaussian};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Linear,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation's own output value.
    #[inline]
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub weights: Matrix,
    /// One bias per output column; empty when the net runs bias-free.
    pub bias: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct DenseNet {
    pub layers: Vec<DenseLayer>,
}

/// Outputs plus the captured per-layer inputs (`layer_inputs[0]` is the
/// batch itself; `layer_inputs[l]` is what layer l's weights multiply).
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub layer_inputs: Vec<Matrix>,
    pub outputs: Matrix,
}

/// Exact MSE gradients for every weight matrix and bias vector.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub loss: f64,
}

impl DenseNet {
    /// Xavier-initialized network over the given dimension chain; hidden
    /// layers use `hidden_activation`, the final layer is linear.
    pub fn new(dims: &[usize], hidden_activation: Activation, use_bias: bool, seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(invalid("DenseNet::new", "need at least input and output dims"));
        }
        if dims.contains(&0) {
            return Err(invalid("DenseNet::new", "zero-width layer"));
        }
        let mut rng = chacha(seed);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (d1, d2) = (w[0], w[1]);
            let scale = (2.0 / (d1 + d2) as f64).sqrt();
            let weights = Matrix::from_fn(d1, d2, |_, _| gaussian(&mut rng) * scale)?;
            let bias = if use_bias { vec![0.0; d2] } else { Vec::new() };
            layers.push(DenseLayer {
                weights,
                bias,
                activation: hidden_activation,
            });
        }
        layers.last_mut().expect("nonempty").activation = Activation::Linear;
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").weights.cols()
    }

    /// Forward pass over a row-batch, capturing each layer's input.
    pub fn forward(&self, batch: &Matrix) -> Result<ForwardTrace> {
        if batch.cols() != self.input_dim() {
            return Err(dim_mismatch(
                "forward",
                format!("{} input columns", self.input_dim()),
                format!("{}", batch.cols()),
            ));
        }
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut current = batch.clone();
        for layer in &self.layers {
            layer_inputs.push(current.clone());
            let mut z = current.matmul(&layer.weights)?;
            if !layer.bias.is_empty() {
                let cols = z.cols();
                let data = z.data_mut();
                for (idx, v) in data.iter_mut().enumerate() {
                    *v += layer.bias[idx % cols];
                }
            }
            let data = z.data_mut();
            for v in data.iter_mut() {
                *v = layer.activation.apply(*v);
            }
            current = z;
        }
        Ok(ForwardTrace {
            layer_inputs,
            outputs: current,
        })
    }

    /// Jitter every parameter; used only by tests that need a generic
    /// (non-initialized) parameter point.
    pub fn perturb(&mut self, scale: f64, seed: u64) {
        let mut rng = chacha(seed);
        for layer in &mut self.layers {
            let data = layer.weights.data_mut();
            for v in data.iter_mut() {
                *v += gaussian(&mut rng) * scale;
            }
            for b in &mut layer.bias {
                *b += gaussian(&mut rng) * scale;
            }
        }
    }
}

/// Mean-over-samples squared reconstruction error, summed over output
/// coordinates: `(1/N) Σₙ ‖oₙ − yₙ‖²`.
pub fn mse_loss(outputs: &Matrix, targets: &Matrix) -> Result<f64> {
    if outputs.rows() != targets.rows() || outputs.cols() != targets.cols() {
        return Err(dim_mismatch(
            "mse_loss",
            format!("{}x{}", outputs.rows(), outputs.cols()),
            format!("{}x{}", targets.rows(), targets.cols()),
        ));
    }
    let n = outputs.rows().max(1) as f64;
    Ok(outputs.sub(targets)?.frobenius_norm_sq() / n)
}

/// Backpropagate the MSE loss; returns exact gradients for every weight and
/// bias plus the loss value itself.
pub fn backward(net: &DenseNet, batch: &Matrix, targets: &Matrix) -> Result<Gradients> {
    let trace = net.forward(batch)?;
    if targets.rows() != trace.outputs.rows() || targets.cols() != trace.outputs.cols() {
        return Err(dim_mismatch(
            "backward",
            format!("{}x{}", trace.outputs.rows(), trace.outputs.cols()),
            format!("{}x{}", targets.rows(), targets.cols()),
        ));
    }
    let loss = mse_loss(&trace.outputs, targets)?;
    let n = batch.rows().max(1) as f64;

    let l_count = net.layers.len();
    let mut weight_grads = vec![Matrix::zeros(0, 0); l_count];
    let mut bias_grads = vec![Vec::new(); l_count];

    // dL/dZ of the (linear) output layer.
    let mut delta = trace.outputs.sub(targets)?.scale(2.0 / n);

    for l in (0..l_count).rev() {
        let x = &trace.layer_inputs[l];
        weight_grads[l] = x.transpose().matmul(&delta)?;
        if !net.layers[l].bias.is_empty() {
            let mut sums = vec![0.0; delta.cols()];
            for i in 0..delta.rows() {
                for (j, s) in sums.iter_mut().enumerate() {
                    *s += delta[(i, j)];
                }
            }
            bias_grads[l] = sums;
        }
        if l > 0 {
            let mut back = delta.matmul(&net.layers[l].weights.transpose())?;
            let act = net.layers[l - 1].activation;
            // layer_inputs[l] is the activation output of layer l−1.
            let a = &trace.layer_inputs[l];
            let cols = back.cols();
            let data = back.data_mut();
            for (idx, v) in data.iter_mut().enumerate() {
                let row = idx / cols;
                let col = idx % cols;
                *v *= act.derivative_from_output(a[(row, col)]);
            }
            delta = back;
        }
    }

    Ok(Gradients {
        weights: weight_grads,
        biases: bias_grads,
        loss,
    })
}

/// Random batch helper shared by tests and the harness.
pub fn random_batch(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = chacha(seed);
    Matrix::from_fn(rows, cols, |_, _| gaussian(&mut rng)).expect("finite")
}
