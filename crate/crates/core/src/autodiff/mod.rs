//! Reverse-mode differentiation for the handful of layers the summarizers
//! use, plus SGD and a finite-difference gradient checker.

pub mod gradcheck;
pub mod layers;
pub mod params;
pub mod sgd;
pub mod tape;

pub use gradcheck::{check_gradients, GradCheckConfig, GradCheckReport};
pub use layers::{
    bilstm_forward, lstm_step, mlp_forward, Activation, BiLstmParams, BiLstmVars, DenseLayerParams,
    LstmCellParams, Mlp, MlpVars,
};
pub use params::ParamSet;
pub use sgd::{sgd_update, SgdConfig, SgdState};
pub use tape::{backprop, GradientBundle, Tape, Var};
