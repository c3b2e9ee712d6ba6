//! Toy diffusion laboratory for time-dependent early exiting of score
//! network blocks: forward process and losses, an early-exit score network,
//! exit schedules with a cost model, early-exit fine-tuning with an EMA
//! teacher, four reverse-process solvers, and an evaluation harness.

pub mod cli;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod model;
pub mod net;
pub mod sampler;
pub mod schedule;
pub mod train;

pub use error::{Error, Result};
