//! Stability of pure states of finite spin chains against weak classical
//! noise and local projective measurements.
//!
//! The crate works with exactly represented states of `N` spin-1/2 sites on
//! a periodic ring. It measures how anomalously additive observables
//! fluctuate ([`fluctuation`]), how far apart local correlations extend
//! ([`cluster`]), how fast an ensemble of noisy trajectories loses purity
//! ([`decoherence`]), and how strongly a local measurement at one site
//! conditions the statistics at another ([`localmeas`]).

pub mod cluster;
pub mod correlations;
pub mod decoherence;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod fluctuation;
pub mod localmeas;
pub mod models;
pub mod seed;
pub mod state;
pub mod table;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use state::{AdditiveOperator, SiteOperator, SpinState};
