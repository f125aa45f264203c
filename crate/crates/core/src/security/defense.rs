//! Multi-query defense: re-randomize the hidden-unit basis between queries so
//! repeated leakage about one weight matrix does not accumulate.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::dnn::{Activation, MlpModel};
use crate::error::{Error, Result};
use crate::rng;

/// Default range of the random positive hidden-unit scales.
pub const DEFAULT_SCALE_RANGE: (f64, f64) = (0.1, 10.0);

/// `(tau D W1, W2 D^-1 tau^-1)` for a uniform permutation `tau` and, when
/// `allow_scaling` is set, a log-uniform positive diagonal `D`.
pub fn permute_defense(model: &MlpModel, seed: u64, allow_scaling: bool) -> Result<MlpModel> {
    permute_defense_with(model, seed, allow_scaling.then_some(DEFAULT_SCALE_RANGE))
}

pub fn permute_defense_with(
    model: &MlpModel,
    seed: u64,
    scale_range: Option<(f64, f64)>,
) -> Result<MlpModel> {
    let hidden = model.hidden();
    let mut rng = rng::seeded(seed);
    let mut perm: Vec<usize> = (0..hidden).collect();
    perm.shuffle(&mut rng);
    let scales: Vec<f64> = match scale_range {
        None => vec![1.0; hidden],
        Some((lo, hi)) => {
            if model.activation() != Activation::Relu {
                return Err(Error::UnsupportedInvariance(format!(
                    "positive scaling commutes only with ReLU, model uses {:?}",
                    model.activation()
                )));
            }
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::param("scale_range", format!("invalid ({lo}, {hi})")));
            }
            let (a, b) = (lo.ln(), hi.ln());
            (0..hidden)
                .map(|_| {
                    if a == b {
                        lo
                    } else {
                        rng.random_range(a..b).exp()
                    }
                })
                .collect()
        }
    };
    Ok(apply_hidden_transform(model, &perm, &scales))
}

/// New hidden unit `r` is old unit `perm[r]` scaled by `scales[r]`.
pub fn apply_hidden_transform(model: &MlpModel, perm: &[usize], scales: &[f64]) -> MlpModel {
    let (w1, w2) = (model.w1(), model.w2());
    let new_w1 = Array2::from_shape_fn(w1.dim(), |(r, c)| scales[r] * w1[(perm[r], c)]);
    let new_w2 = Array2::from_shape_fn(w2.dim(), |(o, r)| w2[(o, perm[r])] / scales[r]);
    MlpModel::new(new_w1, new_w2, model.activation()).expect("transform of a valid model")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    #[test]
    fn identity_transform_is_noop() {
        let m = MlpModel::init(12, 8, 3, 5);
        let id: Vec<usize> = (0..8).collect();
        assert_eq!(apply_hidden_transform(&m, &id, &[1.0; 8]), m);
    }

    #[test]
    fn permutation_and_scaling_preserve_function() {
        let m = MlpModel::init(12, 8, 3, 5);
        let t = permute_defense(&m, 9, true).unwrap();
        assert_ne!(t.w1(), m.w1());
        let x = Array1::from_iter((0..12).map(|i| (i as f64 * 0.37).sin()));
        let (a, b) = (m.forward(x.view()), t.forward(x.view()));
        for (u, v) in a.iter().zip(b.iter()) {
            assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0));
        }
    }

    #[test]
    fn scaling_needs_relu() {
        let m = MlpModel::init(4, 3, 2, 1);
        let tanh = MlpModel::new(m.w1().clone(), m.w2().clone(), Activation::Tanh).unwrap();
        assert!(permute_defense(&tanh, 1, false).is_ok());
        assert!(matches!(
            permute_defense(&tanh, 1, true),
            Err(Error::UnsupportedInvariance(_))
        ));
    }
}
