//! Two-layer perceptron, its training, and noisy inference through the
//! optical inner-product channel.

mod fit;
mod inference;
mod model;
mod pack;
mod tradeoff;
mod train;

pub use fit::{logistic_fit, LogisticFit, MIN_FIT_POINTS};
pub use inference::{
    accuracy_sweep, evaluate_accuracy, secure_inference, AccuracyPoint, InferenceTrace,
    SecureNetwork, SweepGrid, REFERENCE_GAIN,
};
pub use model::{argmax, Activation, MlpModel};
pub use pack::{complex_pack, pack_vector, PackedLayer};
pub use tradeoff::{accuracy_contour, empirical_mode_powers, tradeoff_map, EtaPolicy, TradeoffRow};
pub use train::{train_mlp, train_mlp_with, EpochStats, TrainConfig, TRAIN_CONFIG_VERSION};
