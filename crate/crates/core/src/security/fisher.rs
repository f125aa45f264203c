//! Estimation-theoretic bounds on what the server learns about one normalized
//! data symbol `x` from the excess noise of the verification state. A single
//! verification-mode quadrature is `R ~ N(w, sigma^2)` with
//! `sigma^2 = 1 + kappa x^2` and `kappa = 2 - 2/G`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::Gain;
use crate::rng;

/// Per-measurement variance `1 + kappa x^2`.
pub fn measurement_variance(x: f64, gain: Gain) -> f64 {
    1.0 + gain.excess_noise_factor() * x * x
}

/// `I(x) = 2 kappa^2 x^2 / sigma^4` for one measurement.
pub fn fisher_information(x: f64, gain: Gain) -> f64 {
    let kappa = gain.excess_noise_factor();
    let s2 = measurement_variance(x, gain);
    2.0 * kappa * kappa * x * x / (s2 * s2)
}

/// Quantum Fisher information of the verification state: exactly twice the
/// homodyne value.
pub fn quantum_fisher_information(x: f64, gain: Gain) -> f64 {
    2.0 * fisher_information(x, gain)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Adversary {
    Classical,
    #[default]
    Quantum,
}

impl Adversary {
    /// The multiplier `k` on the Fisher information.
    pub fn k(self) -> u32 {
        match self {
            Adversary::Classical => 1,
            Adversary::Quantum => 2,
        }
    }
}

impl std::fmt::Display for Adversary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Adversary::Classical => "classical",
            Adversary::Quantum => "quantum",
        })
    }
}

impl std::str::FromStr for Adversary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(Adversary::Classical),
            "quantum" => Ok(Adversary::Quantum),
            other => Err(Error::param("adversary", format!("unknown `{other}`"))),
        }
    }
}

/// Bits leaked about `x` after `m` measurements:
/// `1/2 log2(1 + k 8 M (G-1)^2 x^4 / (G^2 sigma^4))`.
pub fn data_leakage(x: f64, gain: Gain, measurements: u64, k: u32) -> Result<f64> {
    if k != 1 && k != 2 {
        return Err(Error::param("k", format!("must be 1 or 2, got {k}")));
    }
    if measurements == 0 {
        return Err(Error::param("measurements", "must be at least 1"));
    }
    let s2 = measurement_variance(x, gain);
    let frac = match gain {
        Gain::Finite(g) => (1.0 - 1.0 / g).powi(2),
        Gain::FeedForward => 1.0,
    };
    let snr = k as f64 * 8.0 * measurements as f64 * frac * x.powi(4) / (s2 * s2);
    Ok(0.5 * snr.ln_1p() / std::f64::consts::LN_2)
}

/// `1 / (M I(x))`.
pub fn cramer_rao_bound(x: f64, gain: Gain, measurements: u64) -> Result<f64> {
    let info = fisher_information(x, gain);
    if info == 0.0 {
        return Err(Error::NonIdentifiable(format!(
            "Fisher information vanishes at x = {x}, G = {gain}"
        )));
    }
    Ok(1.0 / (measurements as f64 * info))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleOracle {
    pub empirical_variance: f64,
    pub cramer_rao_bound: f64,
    pub mean_estimate: f64,
    pub trials: usize,
}

impl MleOracle {
    pub fn ratio(&self) -> f64 {
        self.empirical_variance / self.cramer_rao_bound
    }
}

pub const MIN_MLE_MEASUREMENTS: u64 = 100;
pub const MIN_MLE_TRIALS: usize = 1000;

/// Monte Carlo estimator variance of the maximum-likelihood estimate of `|x|`
/// from `m` readings with known mean. The estimate is
/// `sqrt(max(0, (s^2 - 1)/kappa))` with `s^2` the mean squared deviation.
pub fn mle_variance_oracle(
    x_true: f64,
    gain: Gain,
    measurements: u64,
    trials: usize,
    seed: u64,
) -> Result<MleOracle> {
    if measurements < MIN_MLE_MEASUREMENTS {
        return Err(Error::param(
            "measurements",
            format!("need at least {MIN_MLE_MEASUREMENTS}"),
        ));
    }
    if trials < MIN_MLE_TRIALS {
        return Err(Error::param(
            "trials",
            format!("need at least {MIN_MLE_TRIALS}"),
        ));
    }
    let crb = cramer_rao_bound(x_true, gain, measurements)?;
    let kappa = gain.excess_noise_factor();
    let sigma = measurement_variance(x_true, gain).sqrt();
    let estimates: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::substream(seed, t as u64);
            let mut ss = 0.0;
            for _ in 0..measurements {
                let d: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
                ss += d * d;
            }
            let s2 = ss / measurements as f64;
            ((s2 - 1.0) / kappa).max(0.0).sqrt()
        })
        .collect();
    let mean = estimates.iter().sum::<f64>() / trials as f64;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (trials as f64 - 1.0);
    Ok(MleOracle {
        empirical_variance: var,
        cramer_rao_bound: crb,
        mean_estimate: mean,
        trials,
    })
}
