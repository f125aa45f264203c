use std::path::PathBuf;

use clap::Args;
use qsmc_core::security::Adversary;
use qsmc_core::{Formulation, Gain, PixelMap, ProtocolParams};
use serde::Serialize;

/// Version of every JSON and CSV artifact written by the tool.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EtaPolicyKind {
    Uniform,
    Empirical,
}

#[derive(Clone, Debug, Args)]
pub struct CommonArgs {
    /// Mean photon number per weight symbol.
    #[arg(long, default_value_t = 4.0, allow_negative_numbers = true)]
    pub mu: f64,
    /// Amplifier gain `G >= 1`, or `inf` for measure-and-feedforward.
    #[arg(long, default_value = "3")]
    pub gain: Gain,
    /// Round-trip channel loss in dB; the forward path carries half.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub loss_db: f64,
    /// Optical modes per data vector.
    #[arg(long, default_value_t = 392)]
    pub modes: usize,
    /// Verification measurements per data symbol.
    #[arg(long, default_value_t = 784)]
    pub measurements: u64,
    #[arg(long, default_value = "methods")]
    pub formulation: Formulation,
    #[arg(long, value_enum, default_value_t = EtaPolicyKind::Uniform)]
    pub eta_policy: EtaPolicyKind,
    #[arg(long, default_value = "quantum")]
    pub adversary: Adversary,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory with the MNIST IDX files.
    #[arg(long, env = "QSMC_MNIST_DIR", default_value = "data/mnist")]
    pub data: PathBuf,
    /// Model file written by `train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "centered")]
    pub pixel_map: PixelMap,
}

impl CommonArgs {
    /// Forward and round-trip transmittance from `loss_db`.
    pub fn params(&self) -> ProtocolParams {
        let t = 10f64.powf(-self.loss_db / 10.0);
        ProtocolParams {
            mu: self.mu,
            gain: self.gain,
            forward_transmittance: t.sqrt(),
            roundtrip_transmittance: t,
            modes: self.modes,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Paths {
    pub data: PathBuf,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Fully resolved invocation, echoed into every artifact.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub paths: Paths,
    pub params: ProtocolParams,
    pub loss_db: f64,
    pub measurements: u64,
    pub formulation: Formulation,
    pub eta_policy: EtaPolicyKind,
    pub adversary: Adversary,
    pub seed: u64,
    pub pixel_map: PixelMap,
    /// Command-specific settings such as sweep grids.
    pub extra: serde_json::Value,
}

impl RunConfig {
    pub fn new(command: &str, common: &CommonArgs, extra: serde_json::Value) -> Self {
        RunConfig {
            command: command.to_string(),
            paths: Paths {
                data: common.data.clone(),
                model: common.model.clone(),
                out: common.out.clone(),
            },
            params: common.params(),
            loss_db: common.loss_db,
            measurements: common.measurements,
            formulation: common.formulation,
            eta_policy: common.eta_policy,
            adversary: common.adversary,
            seed: common.seed,
            pixel_map: common.pixel_map,
            extra,
        }
    }
}

/// JSON wrapper shared by all commands.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub schema_version: u32,
    pub config: &'a RunConfig,
    #[serde(flatten)]
    pub body: T,
}

pub fn envelope<'a, T: Serialize>(config: &'a RunConfig, body: T) -> Envelope<'a, T> {
    Envelope {
        schema_version: SCHEMA_VERSION,
        config,
        body,
    }
}
