pub mod adapt;
pub mod autodiff;
pub mod data;
pub mod dpp;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod models;
pub mod temporal;

pub use error::{Error, Result};
