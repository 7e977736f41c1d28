//! Beamforming toolkit for line-of-sight MIMO links built from one-bit
//! transceivers: transmit codebook design, maximum-likelihood receive
//! detection, achievable-rate and capacity computation, and end-to-end
//! coded Monte Carlo simulation.

pub mod bicm;
pub mod codebook;
pub mod detector;
pub mod error;
pub mod info;
pub mod ldpc;
pub mod logq;
pub mod model;

pub use error::{Error, Result};
