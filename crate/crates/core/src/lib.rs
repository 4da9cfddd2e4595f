//! Permutation trellis coded multi-level FSK links under primary-user
//! interference: coding, channel, decoding, analytical BER bounds, exhaustive
//! references and Monte Carlo experiments.

pub mod analysis;
pub mod cli;
pub mod channel;
pub mod codebook;
pub mod convolutional;
pub mod decoder;
pub mod error;
pub mod oracle;
pub mod rng;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};
