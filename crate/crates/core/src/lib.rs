//! Spectral Galerkin simulation of semilinear stochastic reaction–diffusion
//! equations and maximum-likelihood-type estimation of the diffusivity `θ`.

pub mod config;
pub mod error;
pub mod estimate;
pub mod fields;
pub mod mc;
pub mod output;
pub mod simulate;
pub mod spectrum;
pub mod theory;

pub use error::{Error, Result};
