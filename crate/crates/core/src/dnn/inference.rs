//! Noisy inference through the optical channel. Each layer input is
//! l2-normalized, so every inner product of layer `l` carries Gaussian noise
//! of standard deviation `||W_l||_RMS / F`.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{argmax, MlpModel};
use super::pack::PackedLayer;
use crate::data::Dataset;
use crate::engine::{physical_scaling, ProtocolParams};
use crate::error::{Error, Result};
use crate::gaussian::{ComplexVec, Gain};
use crate::rng;

/// Gain recorded for sweeps that are parameterized by `F` alone.
pub const REFERENCE_GAIN: f64 = 3.0;

/// Images per parallel work unit.
const CHUNK: usize = 250;

/// A model with both layers in packed form.
#[derive(Clone, Debug)]
pub struct SecureNetwork<'a> {
    model: &'a MlpModel,
    layers: [PackedLayer; 2],
}

/// Intermediate values of one secure inference.
#[derive(Clone, Debug, PartialEq)]
pub struct InferenceTrace {
    /// Noisy first-layer inner products before the activation.
    pub hidden_pre: Vec<f64>,
    pub logits: Vec<f64>,
}

impl<'a> SecureNetwork<'a> {
    pub fn new(model: &'a MlpModel) -> Self {
        SecureNetwork {
            model,
            layers: [
                PackedLayer::new(model.w1().view()),
                PackedLayer::new(model.w2().view()),
            ],
        }
    }

    fn noisy_layer<R: Rng + ?Sized>(
        &self,
        layer: usize,
        x: &[f64],
        f: f64,
        rng: &mut R,
    ) -> Vec<f64> {
        let xc = pack_normalized(x);
        let std = self.model.rms()[layer] / f;
        self.layers[layer]
            .real_matvec(&xc)
            .into_iter()
            .map(|v| v + std * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    /// Returns the noisy pre-activations and the (scale-free) logits.
    pub fn infer_traced<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        params: &ProtocolParams,
        rng: &mut R,
    ) -> Result<InferenceTrace> {
        let f = checked_scaling(params)?;
        if x.len() != self.model.inputs() {
            return Err(Error::param(
                "x",
                format!("expected {} inputs", self.model.inputs()),
            ));
        }
        if norm(x) == 0.0 {
            return Err(Error::Degenerate("input vector is zero".into()));
        }
        let hidden_pre = self.noisy_layer(0, x, f, rng);
        let act = self.model.activation();
        let hidden: Vec<f64> = hidden_pre.iter().map(|&v| act.apply(v)).collect();
        let logits = if norm(&hidden) == 0.0 {
            // nothing reaches the second layer; draw its noise anyway so the
            // stream position does not depend on the data
            for _ in 0..self.model.outputs() {
                let _: f64 = rng.sample(StandardNormal);
            }
            vec![0.0; self.model.outputs()]
        } else {
            self.noisy_layer(1, &hidden, f, rng)
        };
        Ok(InferenceTrace { hidden_pre, logits })
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn pack_normalized(x: &[f64]) -> ComplexVec {
    let n = norm(x);
    let scaled: Vec<f64> = x.iter().map(|v| v / n).collect();
    super::pack::pack_vector(&scaled)
}

fn checked_scaling(params: &ProtocolParams) -> Result<f64> {
    params.validate()?;
    let f = params.physical_scaling();
    if f.is_nan() || f <= 0.0 {
        return Err(Error::NoSignal);
    }
    Ok(f)
}

/// Logits of one noisy inference; deterministic in `seed`.
pub fn secure_inference(
    model: &MlpModel,
    x: &[f64],
    params: &ProtocolParams,
    seed: u64,
) -> Result<Vec<f64>> {
    let net = SecureNetwork::new(model);
    Ok(net.infer_traced(x, params, &mut rng::seeded(seed))?.logits)
}

/// One accuracy measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyPoint {
    pub mu: f64,
    pub gain: Gain,
    pub f: f64,
    pub accuracy: f64,
    pub n_test: usize,
    pub seed: u64,
}

/// Sweep axis: either `F` directly (recorded at the reference gain) or
/// explicit `(mu, G)` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepGrid {
    Scaling(Vec<f64>),
    MuGain(Vec<(f64, Gain)>),
}

impl SweepGrid {
    fn points(&self) -> Result<Vec<(f64, Gain, f64)>> {
        let pts: Vec<(f64, Gain, f64)> = match self {
            SweepGrid::Scaling(fs) => {
                let g = Gain::Finite(REFERENCE_GAIN);
                fs.iter().map(|&f| (f * f / g.snr_factor(), g, f)).collect()
            }
            SweepGrid::MuGain(pairs) => pairs
                .iter()
                .map(|&(mu, g)| (mu, g, physical_scaling(mu, g)))
                .collect(),
        };
        if pts.is_empty() {
            return Err(Error::param("grid", "must not be empty"));
        }
        for &(mu, g, f) in &pts {
            ProtocolParams::new(mu, g).validate()?;
            if f.is_nan() || f <= 0.0 {
                return Err(Error::NoSignal);
            }
        }
        Ok(pts)
    }
}

/// Accuracy under secure inference with the image-`i` noise drawn from
/// substream `(seed, i)`.
pub fn evaluate_accuracy(
    model: &MlpModel,
    params: &ProtocolParams,
    data: &Dataset,
    seed: u64,
) -> Result<AccuracyPoint> {
    let f = checked_scaling(params)?;
    let acc = sweep_scalings(model, &[f], data, seed)?[0];
    Ok(AccuracyPoint {
        mu: params.mu,
        gain: params.gain,
        f,
        accuracy: acc,
        n_test: data.len(),
        seed,
    })
}

/// One accuracy per grid entry. Every entry sees the same noise draws, so
/// differences between points are not masked by sampling noise.
pub fn accuracy_sweep(
    model: &MlpModel,
    grid: &SweepGrid,
    data: &Dataset,
    seed: u64,
) -> Result<Vec<AccuracyPoint>> {
    let pts = grid.points()?;
    let fs: Vec<f64> = pts.iter().map(|p| p.2).collect();
    let accs = sweep_scalings(model, &fs, data, seed)?;
    Ok(pts
        .iter()
        .zip(accs)
        .map(|(&(mu, gain, f), accuracy)| AccuracyPoint {
            mu,
            gain,
            f,
            accuracy,
            n_test: data.len(),
            seed,
        })
        .collect())
}

/// Batched equivalent of [`SecureNetwork::infer_traced`] for many `F` at once.
/// The real product `W x` equals `Re(Wc xc)` of the packed form.
fn sweep_scalings(model: &MlpModel, fs: &[f64], data: &Dataset, seed: u64) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::Dataset("test set is empty".into()));
    }
    if data.images.ncols() != model.inputs() {
        return Err(Error::param("data", "image width does not match the model"));
    }
    let [r1, r2] = model.rms();
    let act = model.activation();
    let (w1, w2) = (model.w1(), model.w2());
    let starts: Vec<usize> = (0..data.len()).step_by(CHUNK).collect();
    let counts = starts
        .par_iter()
        .map(|&start| -> Result<Vec<usize>> {
            let end = (start + CHUNK).min(data.len());
            let mut x: Array2<f64> = data.images.slice(ndarray::s![start..end, ..]).to_owned();
            for (i, mut row) in x.axis_iter_mut(Axis(0)).enumerate() {
                let n = row.dot(&row).sqrt();
                if n == 0.0 {
                    return Err(Error::Degenerate(format!("image {} is zero", start + i)));
                }
                row /= n;
            }
            let pre = x.dot(&w1.t());
            let mut counts = vec![0usize; fs.len()];
            let mut hidden = Array1::<f64>::zeros(model.hidden());
            for (i, pre_row) in pre.axis_iter(Axis(0)).enumerate() {
                let idx = start + i;
                let mut rng = rng::substream(seed, idx as u64);
                let z1: Vec<f64> = (0..model.hidden())
                    .map(|_| rng.sample(StandardNormal))
                    .collect();
                let z2: Vec<f64> = (0..model.outputs())
                    .map(|_| rng.sample(StandardNormal))
                    .collect();
                let label = data.labels[idx] as usize;
                for (k, &f) in fs.iter().enumerate() {
                    let logits = noisy_logits(
                        w2.view(),
                        pre_row,
                        &z1,
                        &z2,
                        r1 / f,
                        r2 / f,
                        act,
                        &mut hidden,
                    );
                    if argmax(&logits) == label {
                        counts[k] += 1;
                    }
                }
            }
            Ok(counts)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = data.len() as f64;
    Ok((0..fs.len())
        .map(|k| counts.iter().map(|c| c[k]).sum::<usize>() as f64 / total)
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn noisy_logits(
    w2: ndarray::ArrayView2<'_, f64>,
    pre: ArrayView1<'_, f64>,
    z1: &[f64],
    z2: &[f64],
    s1: f64,
    s2: f64,
    act: super::model::Activation,
    hidden: &mut Array1<f64>,
) -> Vec<f64> {
    for ((h, &p), &z) in hidden.iter_mut().zip(pre.iter()).zip(z1) {
        *h = act.apply(p + s1 * z);
    }
    let n = hidden.dot(hidden).sqrt();
    if n == 0.0 {
        return vec![0.0; z2.len()];
    }
    let out = w2.dot(hidden);
    out.iter().zip(z2).map(|(v, z)| v / n + s2 * z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;

    fn tiny_data(model: &MlpModel, n: usize) -> Dataset {
        let images =
            Array2::from_shape_fn((n, model.inputs()), |(i, j)| ((i * 7 + j * 3) as f64).sin());
        let labels = (0..n)
            .map(|i| argmax(model.forward(images.row(i)).as_slice().unwrap()) as u8)
            .collect();
        Dataset {
            images,
            labels,
            split: Split::Test,
        }
    }

    #[test]
    fn noiseless_limit_matches_digital_pass() {
        let m = MlpModel::init(20, 16, 4, 3);
        let x: Vec<f64> = (0..20).map(|i| (i as f64).cos()).collect();
        let params = ProtocolParams::new(f64::INFINITY, Gain::Finite(3.0));
        let logits = secure_inference(&m, &x, &params, 1).unwrap();
        let digital = m.forward(Array1::from(x.clone()).view());
        // the secure pass is the digital pass up to a positive scale
        let scale = logits[0] / digital[0];
        assert!(scale > 0.0);
        for (a, b) in logits.iter().zip(digital.iter()) {
            assert!((a - scale * b).abs() < 1e-9);
        }
    }

    #[test]
    fn batched_path_matches_single_inference() {
        let m = MlpModel::init(20, 16, 4, 3);
        let data = tiny_data(&m, 7);
        let params = ProtocolParams::new(0.5, Gain::Finite(3.0));
        let f = params.physical_scaling();
        let net = SecureNetwork::new(&m);
        let mut correct = 0;
        for i in 0..data.len() {
            let x = data.images.row(i).to_vec();
            let t = net
                .infer_traced(&x, &params, &mut rng::substream(11, i as u64))
                .unwrap();
            correct += (argmax(&t.logits) == data.labels[i] as usize) as usize;
        }
        let batched = sweep_scalings(&m, &[f], &data, 11).unwrap()[0];
        assert_eq!(batched, correct as f64 / data.len() as f64);
    }

    #[test]
    fn seeds_are_reproducible() {
        let m = MlpModel::init(20, 16, 4, 3);
        let x: Vec<f64> = (0..20).map(|i| i as f64 - 9.5).collect();
        let p = ProtocolParams::default();
        assert_eq!(
            secure_inference(&m, &x, &p, 5).unwrap(),
            secure_inference(&m, &x, &p, 5).unwrap()
        );
        assert_ne!(
            secure_inference(&m, &x, &p, 5).unwrap(),
            secure_inference(&m, &x, &p, 6).unwrap()
        );
    }

    #[test]
    fn rejects_zero_input_and_no_signal() {
        let m = MlpModel::init(4, 4, 2, 3);
        assert!(secure_inference(&m, &[0.0; 4], &ProtocolParams::default(), 1).is_err());
        let dark = ProtocolParams::new(4.0, Gain::Finite(1.0));
        assert!(matches!(
            secure_inference(&m, &[1.0; 4], &dark, 1),
            Err(Error::NoSignal)
        ));
    }

    #[test]
    fn f_grid_records_reference_gain() {
        let m = MlpModel::init(20, 16, 4, 3);
        let data = tiny_data(&m, 5);
        let pts = accuracy_sweep(&m, &SweepGrid::Scaling(vec![0.5, 2.0]), &data, 1).unwrap();
        for p in pts {
            assert!((physical_scaling(p.mu, p.gain) - p.f).abs() < 1e-12);
        }
        assert!(accuracy_sweep(&m, &SweepGrid::Scaling(vec![]), &data, 1).is_err());
    }
}
