//! Behavioral simulator and model toolchain for memristor-based Bayesian
//! machines, in both the logarithmic (saturating integer adder) and the
//! stochastic (AND-gate bitstream) flavours.

// `!(a < b)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod logprob;
pub mod machine;
pub mod modelkit;
pub mod seed;
pub mod stochastic;
pub mod tasks;
pub mod width;

pub use error::{Error, Result};
pub use logprob::LogCode;
pub use machine::{MachineConfig, MemoryImage, Mode};
pub use stochastic::LinearCode;
pub use width::BitWidth;
