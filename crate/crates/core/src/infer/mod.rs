//! Inverse problem: learned regressors and a Monte-Carlo oracle.

pub mod mlp;
pub mod oracle;
pub mod train;

pub use mlp::{finite_difference_grad, Adam, Gradients, Mlp, Workspace};
pub use oracle::{invert_readings, mc_oracle, McEstimate};
pub use train::{
    evaluate, predict, row_split, train_regressor, BandResult, ErrorMap, ErrorMapEntry,
    Evaluation, LossPoint, Prediction, Regressor, RegressorSpec, Split, TargetKind, OMEGA_CAP,
};
