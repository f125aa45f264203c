use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::engine::matrix_rms;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
        }
    }
}

/// Two bias-free layers: `logits = W2 σ(W1 x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    w1: Array2<f64>,
    w2: Array2<f64>,
    activation: Activation,
    rms: [f64; 2],
}

impl MlpModel {
    pub fn new(w1: Array2<f64>, w2: Array2<f64>, activation: Activation) -> Result<Self> {
        if w2.ncols() != w1.nrows() {
            return Err(Error::param(
                "w2",
                format!(
                    "{} columns but the hidden layer has {}",
                    w2.ncols(),
                    w1.nrows()
                ),
            ));
        }
        if w1.iter().chain(w2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::param("weights", "non-finite entries"));
        }
        let rms = [rms_of(&w1), rms_of(&w2)];
        Ok(MlpModel {
            w1,
            w2,
            activation,
            rms,
        })
    }

    /// He-normal initialization, deterministic in `seed`.
    pub fn init(inputs: usize, hidden: usize, outputs: usize, seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let mut draw = |rows: usize, cols: usize, std: f64| {
            Array2::from_shape_simple_fn((rows, cols), || {
                std * rng.sample::<f64, _>(StandardNormal)
            })
        };
        let w1 = draw(hidden, inputs, (2.0 / inputs as f64).sqrt());
        let w2 = draw(outputs, hidden, (1.0 / hidden as f64).sqrt());
        MlpModel::new(w1, w2, Activation::Relu).expect("freshly initialized weights are finite")
    }

    pub fn w1(&self) -> &Array2<f64> {
        &self.w1
    }

    pub fn w2(&self) -> &Array2<f64> {
        &self.w2
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Cached `||W1||_RMS`, `||W2||_RMS`.
    pub fn rms(&self) -> [f64; 2] {
        self.rms
    }

    pub fn inputs(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.w2.nrows()
    }

    pub(crate) fn weights_mut(&mut self) -> (&mut Array2<f64>, &mut Array2<f64>) {
        (&mut self.w1, &mut self.w2)
    }

    pub(crate) fn refresh_rms(&mut self) {
        self.rms = [rms_of(&self.w1), rms_of(&self.w2)];
    }

    /// Noiseless digital forward pass.
    pub fn forward(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let hidden = self.w1.dot(&x).mapv(|v| self.activation.apply(v));
        self.w2.dot(&hidden)
    }

    /// Rows of `x` are examples.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let hidden = x.dot(&self.w1.t()).mapv(|v| self.activation.apply(v));
        hidden.dot(&self.w2.t())
    }

    pub fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Vec<usize> {
        self.forward_batch(x)
            .axis_iter(Axis(0))
            .map(|row| argmax(row.as_slice().expect("row-major logits")))
            .collect()
    }

    /// Digital test accuracy, evaluated in chunks.
    pub fn accuracy(&self, data: &Dataset) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let mut correct = 0usize;
        for (chunk, labels) in data
            .images
            .axis_chunks_iter(Axis(0), 1000)
            .zip(data.labels.chunks(1000))
        {
            correct += self
                .predict_batch(chunk)
                .iter()
                .zip(labels)
                .filter(|(p, &l)| **p == l as usize)
                .count();
        }
        correct as f64 / data.len() as f64
    }
}

fn rms_of(m: &Array2<f64>) -> f64 {
    match m.as_slice() {
        Some(s) => matrix_rms(s),
        None => matrix_rms(&m.iter().copied().collect::<Vec<_>>()),
    }
}

/// Index of the largest entry; ties resolve to the first.
pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0
}
