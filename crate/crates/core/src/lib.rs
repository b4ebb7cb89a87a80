// NaN-rejecting bounds checks read better negated
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod envs;
pub mod error;
pub mod experiments;
pub mod optimize;
pub mod paths;
pub mod sigdp;
pub mod sigkernel;
pub mod sigmpc;
pub mod tensor;

pub use error::{Error, Result};
pub use paths::PiecewisePath;
pub use tensor::TruncatedTensor;
