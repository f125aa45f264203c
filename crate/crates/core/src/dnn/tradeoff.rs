//! Accuracy against weight and data leakage over a `(mu, G)` grid.

use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::fit::LogisticFit;
use crate::data::Dataset;
use crate::engine::{physical_scaling, ProtocolParams};
use crate::error::{Error, Result};
use crate::gaussian::Gain;
use crate::security::{leakage_report, Formulation};

/// Which `|x_hat_i|^2` feeds the excess noise and the data leakage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "policy")]
pub enum EtaPolicy {
    /// Every mode carries `1/modes` of the power.
    Uniform { modes: usize },
    /// Dataset-average power per mode; the largest mode is reported.
    Empirical { mode_powers: Vec<f64> },
}

impl EtaPolicy {
    pub fn empirical(data: &Dataset) -> Result<Self> {
        Ok(EtaPolicy::Empirical {
            mode_powers: empirical_mode_powers(data)?,
        })
    }

    pub fn modes(&self) -> usize {
        match self {
            EtaPolicy::Uniform { modes } => *modes,
            EtaPolicy::Empirical { mode_powers } => mode_powers.len(),
        }
    }

    /// Power of the symbol whose leakage is reported.
    pub fn symbol_power(&self) -> Result<f64> {
        match self {
            EtaPolicy::Uniform { modes } if *modes > 0 => Ok(1.0 / *modes as f64),
            EtaPolicy::Empirical { mode_powers } if !mode_powers.is_empty() => {
                Ok(mode_powers.iter().copied().fold(0.0, f64::max))
            }
            _ => Err(Error::param("eta_policy", "no modes")),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EtaPolicy::Uniform { .. } => "uniform",
            EtaPolicy::Empirical { .. } => "empirical",
        }
    }
}

/// Mean of `|xc_k|^2` over the dataset, where `xc` is the complex packing of
/// the normalized image. Sums to one.
pub fn empirical_mode_powers(data: &Dataset) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::Dataset("empty dataset".into()));
    }
    let cols = data.images.ncols();
    let mut acc = vec![0.0; cols.div_ceil(2)];
    for row in data.images.axis_iter(Axis(0)) {
        let n2 = row.dot(&row);
        if n2 == 0.0 {
            return Err(Error::Degenerate("zero image".into()));
        }
        for (j, v) in row.iter().enumerate() {
            acc[j / 2] += v * v / n2;
        }
    }
    let n = data.len() as f64;
    Ok(acc.into_iter().map(|v| v / n).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub mu: f64,
    pub gain: Gain,
    pub f: f64,
    pub eta: f64,
    /// Holevo bound, bits per weight symbol.
    pub i_w: f64,
    /// Quantum-adversary data leakage, bits per normalized data symbol.
    pub i_x: f64,
    pub accuracy: f64,
}

fn row(
    mu: f64,
    gain: Gain,
    policy: &EtaPolicy,
    measurements: u64,
    formulation: Formulation,
    accuracy: f64,
) -> Result<TradeoffRow> {
    let params = ProtocolParams {
        modes: policy.modes(),
        ..ProtocolParams::new(mu, gain)
    };
    let r = leakage_report(&params, policy.symbol_power()?, measurements, formulation)?;
    Ok(TradeoffRow {
        mu,
        gain,
        f: physical_scaling(mu, gain),
        eta: r.eta,
        i_w: r.weight_bits_per_symbol,
        i_x: r.data_bits_per_symbol_quantum,
        accuracy,
    })
}

/// One row per `(mu, G)`; `accuracy_at` maps `F` to accuracy, e.g. a logistic
/// fit or a direct evaluation.
pub fn tradeoff_map(
    grid: &[(f64, Gain)],
    policy: &EtaPolicy,
    measurements: u64,
    formulation: Formulation,
    accuracy_at: impl Fn(f64) -> Result<f64>,
) -> Result<Vec<TradeoffRow>> {
    grid.iter()
        .map(|&(mu, g)| {
            let acc = accuracy_at(physical_scaling(mu, g))?;
            row(mu, g, policy, measurements, formulation, acc)
        })
        .collect()
}

/// Smallest `mu` reaching `target` accuracy for each gain, via the fit.
pub fn accuracy_contour(
    fit: &LogisticFit,
    target: f64,
    gains: &[Gain],
    policy: &EtaPolicy,
    measurements: u64,
    formulation: Formulation,
) -> Result<Vec<TradeoffRow>> {
    let f_star = fit.inverse(target).ok_or_else(|| Error::Fit {
        reason: format!("fitted curve never reaches {target}"),
        best: Some(*fit),
    })?;
    gains
        .iter()
        .map(|&g| {
            if g.is_unity() {
                return Err(Error::NoSignal);
            }
            let mu = f_star * f_star / g.snr_factor();
            row(mu, g, policy, measurements, formulation, fit.eval(f_star))
        })
        .collect()
}
