//! Leakage bounds for the weights (Holevo) and the data (Cramer-Rao).

mod defense;
mod fisher;
mod holevo;
mod sweep;

pub use defense::{
    apply_hidden_transform, permute_defense, permute_defense_with, DEFAULT_SCALE_RANGE,
};
pub use fisher::{
    cramer_rao_bound, data_leakage, fisher_information, measurement_variance, mle_variance_oracle,
    quantum_fisher_information, Adversary, MleOracle, MIN_MLE_MEASUREMENTS, MIN_MLE_TRIALS,
};
pub use holevo::{
    holevo_terms, holevo_weight_leakage, holevo_weight_leakage_matrix, Formulation, HolevoInputs,
    HolevoTerms,
};
pub use sweep::{
    leakage_report, loss_sweep, multiparty_adjust, read_sweep_csv, width_sweep, write_sweep_csv,
    LeakageReport, LossPoint, MultipartyScaling, SweepRow, Topology, SWEEP_CSV_HEADER,
};
