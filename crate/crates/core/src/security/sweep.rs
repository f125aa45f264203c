//! Leakage reports and the loss, width and multiparty sweeps built on them.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::fisher::data_leakage;
use super::holevo::{holevo_weight_leakage, Formulation, HolevoInputs};
use crate::engine::ProtocolParams;
use crate::error::{Error, Result};
use crate::gaussian::Gain;

/// Weight and data leakage at one operating point. Data leakage is per
/// normalized data symbol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub weight_bits_per_symbol: f64,
    pub data_bits_per_symbol_classical: f64,
    pub data_bits_per_symbol_quantum: f64,
    pub params: ProtocolParams,
    /// `|x_hat_i|^2` of the symbol under attack.
    pub symbol_power: f64,
    pub eta: f64,
    pub measurement_count: u64,
    pub formulation: Formulation,
}

impl LeakageReport {
    pub fn physical_scaling(&self) -> f64 {
        self.params.physical_scaling()
    }
}

/// Evaluates both bounds for a data symbol of power `symbol_power`. The
/// Holevo bound sees the round-trip transmittance of `params`.
pub fn leakage_report(
    params: &ProtocolParams,
    symbol_power: f64,
    measurements: u64,
    formulation: Formulation,
) -> Result<LeakageReport> {
    params.validate()?;
    if !(0.0..=1.0).contains(&symbol_power) {
        return Err(Error::param(
            "symbol_power",
            format!("{symbol_power} not in [0, 1]"),
        ));
    }
    let eta = params.gain.excess_noise_factor() * symbol_power;
    let weight = holevo_weight_leakage(&HolevoInputs {
        mu: params.mu,
        eta,
        transmittance: params.roundtrip_transmittance,
        extra_excess: 0.0,
        formulation,
    })?;
    let x = symbol_power.sqrt();
    Ok(LeakageReport {
        weight_bits_per_symbol: weight,
        data_bits_per_symbol_classical: data_leakage(x, params.gain, measurements, 1)?,
        data_bits_per_symbol_quantum: data_leakage(x, params.gain, measurements, 2)?,
        params: *params,
        symbol_power,
        eta,
        measurement_count: measurements,
        formulation,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub loss_db: f64,
    pub report: LeakageReport,
    /// The target `F` needed more than `mu_max` photons; `mu` was capped.
    pub saturated: bool,
}

/// Round-trip loss sweep at fixed physical scaling `target_f`. The forward
/// path carries half the loss in dB; `mu` is raised so that the received
/// photon number keeps `F` constant.
#[allow(clippy::too_many_arguments)]
pub fn loss_sweep(
    losses_db: &[f64],
    base: &ProtocolParams,
    target_f: f64,
    symbol_power: f64,
    measurements: u64,
    formulation: Formulation,
    mu_max: f64,
) -> Result<Vec<LossPoint>> {
    if !(target_f > 0.0) || !target_f.is_finite() {
        return Err(Error::param("target_f", "must be positive and finite"));
    }
    losses_db
        .iter()
        .map(|&loss_db| {
            if !(loss_db >= 0.0) || !loss_db.is_finite() {
                return Err(Error::param(
                    "loss_db",
                    format!("must be >= 0, got {loss_db}"),
                ));
            }
            let t = 10f64.powf(-loss_db / 10.0);
            let t_f = t.sqrt();
            let needed = target_f * target_f / (base.gain.snr_factor() * t_f);
            let saturated = !(needed <= mu_max);
            let params = ProtocolParams {
                mu: if saturated { mu_max } else { needed },
                forward_transmittance: t_f,
                roundtrip_transmittance: t,
                ..*base
            };
            Ok(LossPoint {
                loss_db,
                report: leakage_report(&params, symbol_power, measurements, formulation)?,
                saturated,
            })
        })
        .collect()
}

/// Uniform-data width sweep: `|x_hat_i|^2 = 1/N`, `eta = kappa/N` and one
/// measurement per row of an `N x N` layer.
pub fn width_sweep(
    widths: &[usize],
    params: &ProtocolParams,
    formulation: Formulation,
) -> Result<Vec<LeakageReport>> {
    widths
        .iter()
        .map(|&n| {
            if n < 2 {
                return Err(Error::param("N", format!("must be >= 2, got {n}")));
            }
            let p = ProtocolParams {
                modes: n,
                ..*params
            };
            leakage_report(&p, 1.0 / n as f64, n as u64, formulation)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// All clients share one pass of the light.
    Symmetric,
    /// Clients act in sequence; scales are for the first client.
    Asymmetric,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultipartyScaling {
    pub snr_scale: f64,
    pub eta_scale: f64,
}

/// SNR and excess-noise scaling with several clients. Per-client data
/// leakage is unchanged.
pub fn multiparty_adjust(n_clients: usize, topology: Topology) -> Result<MultipartyScaling> {
    if n_clients == 0 {
        return Err(Error::param("n_clients", "must be at least 1"));
    }
    let n = n_clients as f64;
    Ok(match topology {
        Topology::Symmetric => MultipartyScaling {
            snr_scale: 1.0 / n,
            eta_scale: n,
        },
        Topology::Asymmetric => MultipartyScaling {
            snr_scale: 1.0,
            eta_scale: n,
        },
    })
}

/// One CSV line of any sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub loss_db: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub mu: f64,
    #[serde(rename = "G")]
    pub gain: Gain,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "I_w_bits")]
    pub i_w_bits: f64,
    #[serde(rename = "I_x_bits_k1")]
    pub i_x_bits_k1: f64,
    #[serde(rename = "I_x_bits_k2")]
    pub i_x_bits_k2: f64,
    pub accuracy: Option<f64>,
}

pub const SWEEP_CSV_HEADER: &str = "loss_db,N,mu,G,F,I_w_bits,I_x_bits_k1,I_x_bits_k2,accuracy";

impl SweepRow {
    pub fn from_report(loss_db: f64, report: &LeakageReport, accuracy: Option<f64>) -> Self {
        SweepRow {
            loss_db,
            n: report.params.modes,
            mu: report.params.mu,
            gain: report.params.gain,
            f: report.physical_scaling(),
            i_w_bits: report.weight_bits_per_symbol,
            i_x_bits_k1: report.data_bits_per_symbol_classical,
            i_x_bits_k2: report.data_bits_per_symbol_quantum,
            accuracy,
        }
    }
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(SWEEP_CSV_HEADER.split(','))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}
