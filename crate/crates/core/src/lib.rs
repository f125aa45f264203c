//! Simulation and security analysis of an optical protocol for secure
//! inner products between a server's weights and a client's data.
//!
//! - [`gaussian`]: Gaussian-state algebra (unitaries, covariances, symplectic
//!   spectra, bosonic entropy).
//! - [`engine`]: the inner-product channel, analytic and Monte Carlo.
//! - [`security`]: weight and data leakage bounds and their sweeps.
//! - [`dnn`]: MLP training, noisy inference, accuracy sweeps and fits.
//! - [`data`]: IDX parsing and MNIST preprocessing.
//! - [`persist`]: model and dataset files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod dnn;
pub mod engine;
pub mod error;
pub mod gaussian;
pub mod persist;
pub mod rng;
pub mod security;
pub mod stats;

pub use data::{load_mnist, load_mnist_with, Dataset, PixelMap, Split};
pub use dnn::{AccuracyPoint, LogisticFit, MlpModel};
pub use engine::{ProtocolParams, VerificationStats};
pub use error::{Error, Result};
pub use gaussian::{ComplexVec, Gain, QuadratureCovariance, SymplecticSpectrum, UnitaryMatrix};
pub use security::{Formulation, HolevoInputs, LeakageReport};
