//! Forward pass, loss and analytic gradients for the three classifier kinds.

use super::lstm::{self, axpy, dot, DirectionTrace};
use super::params::{DenseLayout, ModelParams};
use super::{ClassifierKind, Prediction};
use crate::embed::EmbeddingMatrix;
use crate::{Error, Result};

/// Probabilities below this are floored before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Activations of one LSTM direction at one time index.
#[derive(Debug, Clone, PartialEq)]
pub struct GateStep {
    pub layer: usize,
    /// 0 forward, 1 backward.
    pub direction: usize,
    pub time: usize,
    pub input: Vec<f64>,
    pub forget: Vec<f64>,
    pub cell: Vec<f64>,
    pub output: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

struct LayerTrace {
    inputs: Vec<f64>,
    dirs: Vec<DirectionTrace>,
}

enum Trace {
    Recurrent { layers: Vec<LayerTrace> },
    Linear { mean: Vec<f64>, hidden: Vec<f64> },
}

struct Pass {
    trace: Trace,
    features: Vec<f64>,
    logits: Vec<f64>,
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn dense(params: &[f64], layer: &DenseLayout, x: &[f64]) -> Vec<f64> {
    (0..layer.output)
        .map(|r| {
            params[layer.bias + r]
                + dot(&params[layer.weight + r * layer.input..layer.weight + (r + 1) * layer.input], x)
        })
        .collect()
}

/// Adds `dy ⊗ x` and `dy` to the layer's gradients; returns `Wᵀ dy`.
fn dense_backward(params: &[f64], layer: &DenseLayout, x: &[f64], dy: &[f64], grad: &mut [f64]) -> Vec<f64> {
    let mut dx = vec![0.0; layer.input];
    for (r, &d) in dy.iter().enumerate() {
        let row = layer.weight + r * layer.input..layer.weight + (r + 1) * layer.input;
        axpy(d, x, &mut grad[row.clone()]);
        grad[layer.bias + r] += d;
        axpy(d, &params[row], &mut dx);
    }
    dx
}

impl ModelParams {
    fn check_input(&self, x: &EmbeddingMatrix) -> Result<()> {
        if x.dim() != self.spec().input_dim {
            return Err(Error::Shape {
                expected: self.spec().input_dim,
                actual: x.dim(),
            });
        }
        Ok(())
    }

    fn run(&self, x: &EmbeddingMatrix) -> Result<Pass> {
        self.check_input(x)?;
        let p = self.values();
        let layout = self.layout();
        let steps = x.valid_rows();
        let xs: Vec<f64> = x.as_slice().iter().map(|&v| v as f64).collect();
        let (trace, features) = match self.spec().kind {
            ClassifierKind::Linear => {
                let dim = x.dim();
                let mut mean = vec![0.0; dim];
                for row in xs.chunks_exact(dim) {
                    axpy(1.0, row, &mut mean);
                }
                if steps > 0 {
                    mean.iter_mut().for_each(|m| *m /= steps as f64);
                }
                let dense1 = layout.hidden_dense.as_ref().expect("linear model has a hidden layer");
                let hidden: Vec<f64> = dense(p, dense1, &mean).into_iter().map(f64::tanh).collect();
                let features = hidden.clone();
                (Trace::Linear { mean, hidden }, features)
            }
            ClassifierKind::Lstm | ClassifierKind::BiLstm => {
                let h = self.spec().hidden_size;
                let mut layers = Vec::with_capacity(layout.cells.len());
                let mut inputs = xs;
                for per_dir in &layout.cells {
                    let dirs: Vec<DirectionTrace> = per_dir
                        .iter()
                        .enumerate()
                        .map(|(d, cell)| lstm::forward(p, cell, &inputs, d == 1))
                        .collect();
                    let width = dirs.len() * h;
                    let mut out = vec![0.0; steps * width];
                    for t in 0..steps {
                        for (d, dir) in dirs.iter().enumerate() {
                            out[t * width + d * h..t * width + (d + 1) * h].copy_from_slice(dir.h_at(t));
                        }
                    }
                    layers.push(LayerTrace { inputs, dirs });
                    inputs = out;
                }
                let top = layers.last().expect("at least one layer");
                let mut features = vec![0.0; top.dirs.len() * h];
                if steps > 0 {
                    for (d, dir) in top.dirs.iter().enumerate() {
                        features[d * h..(d + 1) * h].copy_from_slice(dir.final_h());
                    }
                }
                (Trace::Recurrent { layers }, features)
            }
        };
        let logits = dense(p, &layout.head, &features);
        Ok(Pass {
            trace,
            features,
            logits,
        })
    }

    /// Class probabilities for one embedded report.
    pub fn forward(&self, x: &EmbeddingMatrix) -> Result<Prediction> {
        let pass = self.run(x)?;
        Ok(Prediction::from_probabilities(softmax(&pass.logits)))
    }

    /// Pre-softmax class scores.
    pub fn logits(&self, x: &EmbeddingMatrix) -> Result<Vec<f64>> {
        Ok(self.run(x)?.logits)
    }

    /// The representation fed to the output layer: concatenated final
    /// forward/backward states for the Bi-LSTM, the final state for the
    /// LSTM, the hidden activations for the linear model.
    pub fn encode(&self, x: &EmbeddingMatrix) -> Result<Vec<f64>> {
        Ok(self.run(x)?.features)
    }

    /// Gate activations of every recurrent step, ordered by layer,
    /// direction, then time. Empty for the linear model.
    pub fn gate_activations(&self, x: &EmbeddingMatrix) -> Result<Vec<GateStep>> {
        let pass = self.run(x)?;
        let Trace::Recurrent { layers } = pass.trace else {
            return Ok(Vec::new());
        };
        let h = self.spec().hidden_size;
        let mut steps = Vec::new();
        for (l, layer) in layers.iter().enumerate() {
            for (d, dir) in layer.dirs.iter().enumerate() {
                for t in 0..dir.steps {
                    let s = dir.step_of(t);
                    let g = &dir.gates[s * 4 * h..(s + 1) * 4 * h];
                    steps.push(GateStep {
                        layer: l,
                        direction: d,
                        time: t,
                        input: g[..h].to_vec(),
                        forget: g[h..2 * h].to_vec(),
                        cell: g[2 * h..3 * h].to_vec(),
                        output: g[3 * h..].to_vec(),
                        c: dir.c[s * h..(s + 1) * h].to_vec(),
                        h: dir.h[s * h..(s + 1) * h].to_vec(),
                    });
                }
            }
        }
        Ok(steps)
    }

    fn check_batch(&self, batch: &[(&EmbeddingMatrix, usize)]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Validation("empty batch".into()));
        }
        let k = self.spec().num_classes;
        if let Some((_, label)) = batch.iter().find(|(_, l)| *l >= k) {
            return Err(Error::Validation(format!("label {label} outside 0..{k}")));
        }
        Ok(())
    }

    /// Mean negative log-likelihood of the true classes.
    pub fn loss(&self, batch: &[(&EmbeddingMatrix, usize)]) -> Result<f64> {
        self.check_batch(batch)?;
        let mut total = 0.0;
        for &(x, label) in batch {
            let probs = softmax(&self.run(x)?.logits);
            total -= probs[label].max(PROB_FLOOR).ln();
        }
        Ok(total / batch.len() as f64)
    }

    /// Loss and its gradient with respect to every parameter (same layout as
    /// [`ModelParams::values`]).
    pub fn gradient(&self, batch: &[(&EmbeddingMatrix, usize)]) -> Result<(f64, Vec<f64>)> {
        self.check_batch(batch)?;
        let mut grad = vec![0.0; self.len()];
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for &(x, label) in batch {
            total += self.accumulate(x, label, scale, &mut grad)?;
        }
        Ok((total * scale, grad))
    }

    /// Adds `scale * d(-ln p_label)/dθ` into `grad`; returns the unscaled loss.
    pub(crate) fn accumulate(&self, x: &EmbeddingMatrix, label: usize, scale: f64, grad: &mut [f64]) -> Result<f64> {
        let pass = self.run(x)?;
        let probs = softmax(&pass.logits);
        let loss = -probs[label].max(PROB_FLOOR).ln();
        if probs[label] < PROB_FLOOR {
            return Ok(loss);
        }
        let dlogits: Vec<f64> = probs
            .iter()
            .enumerate()
            .map(|(c, &p)| scale * (p - if c == label { 1.0 } else { 0.0 }))
            .collect();
        let p = self.values();
        let layout = self.layout();
        let dfeatures = dense_backward(p, &layout.head, &pass.features, &dlogits, grad);
        match pass.trace {
            Trace::Linear { mean, hidden } => {
                let dense1 = layout.hidden_dense.as_ref().expect("linear model has a hidden layer");
                let dz: Vec<f64> = dfeatures
                    .iter()
                    .zip(&hidden)
                    .map(|(d, a)| d * (1.0 - a * a))
                    .collect();
                dense_backward(p, dense1, &mean, &dz, grad);
            }
            Trace::Recurrent { layers } => {
                let h = self.spec().hidden_size;
                let steps = x.valid_rows();
                if steps == 0 {
                    return Ok(loss);
                }
                let n_dirs = layers[0].dirs.len();
                // dh[d]: gradient w.r.t. direction d's emitted states, time order.
                let mut dh: Vec<Vec<f64>> = vec![vec![0.0; steps * h]; n_dirs];
                let last_time = [steps - 1, 0];
                for d in 0..n_dirs {
                    let t = last_time[d];
                    dh[d][t * h..(t + 1) * h].copy_from_slice(&dfeatures[d * h..(d + 1) * h]);
                }
                for (l, layer) in layers.iter().enumerate().rev() {
                    let cells = &layout.cells[l];
                    let mut dx = if l > 0 {
                        Some(vec![0.0; layer.inputs.len()])
                    } else {
                        None
                    };
                    for (d, dir) in layer.dirs.iter().enumerate() {
                        lstm::backward(p, &cells[d], &layer.inputs, dir, &dh[d], grad, dx.as_deref_mut());
                    }
                    if let Some(dx) = dx {
                        let width = cells[0].input;
                        for d in 0..n_dirs {
                            for t in 0..steps {
                                dh[d][t * h..(t + 1) * h]
                                    .copy_from_slice(&dx[t * width + d * h..t * width + (d + 1) * h]);
                            }
                        }
                    }
                }
            }
        }
        Ok(loss)
    }
}
