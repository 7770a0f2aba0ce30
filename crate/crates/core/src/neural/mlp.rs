//! Fully connected feed-forward network with ReLU hidden layers, trained by
//! mini-batch gradient descent.

use crate::models::{require_two_classes, softmax_rows, Hyperparams, ModelError, Target};
use crate::seed;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `inputs × outputs`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    /// `None` for regression.
    pub n_classes: Option<usize>,
    /// Regression targets are standardised during training and mapped back
    /// on prediction.
    pub y_mean: f64,
    pub y_std: f64,
    /// Mean training loss after each epoch.
    pub loss_trace: Vec<f64>,
}

/// Training targets in network units.
pub enum MlpTarget<'a> {
    Classes(&'a [usize]),
    /// Already standardised.
    Values(&'a [f64]),
}

impl MlpModel {
    /// Xavier-uniform initialised network with the given layer widths
    /// (inputs first, outputs last).
    pub fn init(widths: &[usize], n_classes: Option<usize>, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let layers = widths
            .windows(2)
            .map(|w| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                Layer {
                    weights: Array2::from_shape_simple_fn((w[0], w[1]), || rng.random_range(-limit..=limit)),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Self { layers, n_classes, y_mean: 0.0, y_std: 1.0, loss_trace: Vec::new() }
    }

    /// Activations of every layer; the last entry is the raw output.
    fn forward(&self, x: ArrayView2<'_, f64>) -> Vec<Array2<f64>> {
        let mut acts = vec![x.to_owned()];
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = acts[i].dot(&layer.weights) + &layer.bias;
            if i + 1 < self.layers.len() {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    /// Mean loss over the rows and its gradient with respect to every
    /// parameter, flattened in [`MlpModel::flat_params`] order.
    /// Classification uses softmax cross-entropy, regression half the mean
    /// squared error.
    pub fn loss_and_gradient(&self, x: ArrayView2<'_, f64>, target: &MlpTarget<'_>) -> (f64, Vec<f64>) {
        let n = x.nrows() as f64;
        let acts = self.forward(x);
        let mut out = acts.last().expect("output layer").clone();
        let loss;
        match target {
            MlpTarget::Classes(labels) => {
                softmax_rows(&mut out);
                loss = -labels.iter().enumerate().map(|(i, &c)| out[[i, c]].max(f64::MIN_POSITIVE).ln()).sum::<f64>() / n;
                for (i, &c) in labels.iter().enumerate() {
                    out[[i, c]] -= 1.0;
                }
            }
            MlpTarget::Values(y) => {
                for (i, &v) in y.iter().enumerate() {
                    out[[i, 0]] -= v;
                }
                loss = 0.5 * out.iter().map(|d| d * d).sum::<f64>() / n;
            }
        }
        let mut delta = out / n;
        let mut grads: Vec<(Array2<f64>, Array1<f64>)> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let gw = acts[i].t().dot(&delta);
            let gb = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weights.t());
                back.zip_mut_with(&acts[i], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        let flat = grads.into_iter().flat_map(|(w, b)| w.into_iter().chain(b)).collect();
        (loss, flat)
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied()).collect()
    }

    pub fn set_flat_params(&mut self, params: &[f64]) {
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v = it.next().expect("parameter count"));
        }
    }

    pub(crate) fn scores(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = self.forward(x).pop().expect("output layer");
        match self.n_classes {
            Some(_) => softmax_rows(&mut out),
            None => out.mapv_inplace(|v| v * self.y_std + self.y_mean),
        }
        out
    }
}

pub(crate) fn fit_mlp(x: ArrayView2<'_, f64>, target: &Target, hp: &Hyperparams, seed: u64) -> Result<MlpModel, ModelError> {
    let n = x.nrows();
    if n < 2 {
        return Err(ModelError::TooFewRows { needed: 2, found: n });
    }
    let hidden_layers = hp.usize_or("hidden_layers", 1);
    let hidden_units = hp.usize_or("hidden_units", 32);
    let lr = hp.f64_or("learning_rate", 0.01);
    let epochs = hp.usize_or("epochs", 200);
    let batch = hp.usize_or("batch_size", 32).max(1);

    let outputs = match target {
        Target::Classes { labels, n_classes } => {
            require_two_classes(labels)?;
            *n_classes
        }
        Target::Values(_) => 1,
    };
    let mut widths = vec![x.ncols()];
    widths.extend(std::iter::repeat_n(hidden_units, hidden_layers));
    widths.push(outputs);
    let mut model = MlpModel::init(&widths, target.n_classes(), seed);

    let standardized: Vec<f64>;
    let full_target = match target {
        Target::Classes { labels, .. } => MlpTarget::Classes(labels),
        Target::Values(y) => {
            let (mean, std) = crate::preprocess::mean_std(y);
            model.y_mean = mean;
            model.y_std = if std > 0.0 { std } else { 1.0 };
            standardized = y.iter().map(|v| (v - model.y_mean) / model.y_std).collect();
            MlpTarget::Values(&standardized)
        }
    };

    let mut rng = seed::rng(seed::derive(seed, 1));
    let mut order: Vec<usize> = (0..n).collect();
    let mut params = model.flat_params();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let xb = x.select(Axis(0), chunk);
            let (_, grad) = match &full_target {
                MlpTarget::Classes(l) => {
                    let lb: Vec<usize> = chunk.iter().map(|&i| l[i]).collect();
                    model.loss_and_gradient(xb.view(), &MlpTarget::Classes(&lb))
                }
                MlpTarget::Values(v) => {
                    let vb: Vec<f64> = chunk.iter().map(|&i| v[i]).collect();
                    model.loss_and_gradient(xb.view(), &MlpTarget::Values(&vb))
                }
            };
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= lr * g;
            }
            model.set_flat_params(&params);
        }
        let (loss, _) = model.loss_and_gradient(x, &full_target);
        model.loss_trace.push(loss);
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{fit, Algorithm, ModelSpec, Task};
    use ndarray::array;

    #[test]
    fn gradient_check_classification() {
        let x = array![[0.5, -1.0, 0.3], [1.2, 0.4, -0.7], [-0.3, 0.8, 1.1], [0.9, -0.2, 0.0], [-1.5, 0.6, 0.2]];
        let labels = [0, 2, 1, 1, 0];
        let mut m = MlpModel::init(&[3, 4, 3], Some(3), 11);
        for l in &mut m.layers {
            l.bias.mapv_inplace(|_| 0.1);
        }
        let t = MlpTarget::Classes(&labels);
        let (_, grad) = m.loss_and_gradient(x.view(), &t);
        let base = m.flat_params();
        for j in 0..base.len() {
            let h = 1e-6;
            let mut p = base.clone();
            p[j] += h;
            m.set_flat_params(&p);
            let up = m.loss_and_gradient(x.view(), &t).0;
            p[j] -= 2.0 * h;
            m.set_flat_params(&p);
            let down = m.loss_and_gradient(x.view(), &t).0;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grad[j]).abs() <= 1e-4 * fd.abs().max(grad[j].abs()).max(1e-6), "param {j}: {fd} vs {}", grad[j]);
        }
        m.set_flat_params(&base);
    }

    #[test]
    fn no_hidden_layer_is_multinomial_logistic() {
        let x = array![[1.0, 2.0], [-1.0, 0.5]];
        let mut m = MlpModel::init(&[2, 3], Some(3), 0);
        m.set_flat_params(&[0.1, -0.2, 0.3, 0.4, 0.0, -0.1, 0.05, 0.0, -0.05]);
        let (loss, _) = m.loss_and_gradient(x.view(), &MlpTarget::Classes(&[2, 0]));
        let w = [[0.1, -0.2, 0.3], [0.4, 0.0, -0.1]];
        let b = [0.05, 0.0, -0.05];
        let mut expected = 0.0;
        for (i, &c) in [2usize, 0].iter().enumerate() {
            let z: Vec<f64> = (0..3).map(|k| x[[i, 0]] * w[0][k] + x[[i, 1]] * w[1][k] + b[k]).collect();
            let lse = z.iter().map(|v| v.exp()).sum::<f64>().ln();
            expected += lse - z[c];
        }
        assert!((loss - expected / 2.0).abs() < 1e-12);
    }

    #[test]
    fn training_reduces_loss_on_blobs() {
        let mut x = Array2::zeros((40, 2));
        let mut y = Vec::new();
        for i in 0..40 {
            let c = if i % 2 == 0 { -2.0 } else { 2.0 };
            x[[i, 0]] = c + (i % 7) as f64 * 0.1;
            x[[i, 1]] = c - (i % 5) as f64 * 0.1;
            y.push(i % 2);
        }
        let spec = ModelSpec::new(Algorithm::Mlp, Task::Classification, 40, 2, 5);
        let m = fit(&spec, x.view(), &Target::classes(y.clone(), 2), &["a".into(), "b".into()]).unwrap();
        let trace = m.loss_trace().unwrap();
        assert_eq!(trace.len(), 200);
        assert!(trace[199] <= trace[0]);
        assert_eq!(m.predict_classes(x.view()).unwrap(), y);
    }

    #[test]
    fn regression_rescales_output() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let y = vec![100.0, 102.0, 104.0, 106.0];
        let spec = ModelSpec::new(Algorithm::Mlp, Task::Regression, 4, 1, 2).with_param("epochs", 500.0);
        let m = fit(&spec, x.view(), &Target::Values(y.clone()), &["x".into()]).unwrap();
        let p = m.predict(x.view()).unwrap();
        for (a, b) in p.iter().zip(&y) {
            assert!((a - b).abs() < 1.0);
        }
    }
}
