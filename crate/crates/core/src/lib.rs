//! Structural equation models with latent diffusion processes, estimated from
//! high-frequency observations.
//!
//! The pipeline is: [`simulate`] latent Ornstein–Uhlenbeck (or general drift)
//! factors and build the observed series, compute the realized covariance,
//! fit the LISREL covariance structure by minimum contrast in [`estimate`],
//! and run the quasi-likelihood-ratio goodness-of-fit test. [`montecarlo`]
//! repeats the whole pipeline for simulation studies.

pub mod error;
pub mod estimate;
pub mod lisrel;
pub mod matstat;
pub mod montecarlo;
pub mod reference;
pub mod simulate;

pub use error::{Error, Result};
