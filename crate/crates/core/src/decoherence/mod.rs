//! Decoherence under weak classical noise: the predicted rate, noisy
//! trajectory ensembles, and the rate measured from their purity decay.

pub mod dynamics;
pub mod noise;
pub mod purity;
pub mod rate;

pub use dynamics::{
    ensemble_expectation, evolve_trajectory, run_ensemble, Ensemble, EnsembleSpec, Hamiltonian,
    Trajectory,
};
pub use noise::{
    sample_noise_field, NoiseField, NoiseModel, SpatialKernel, SpectralIntensity,
    TemporalCorrelation,
};
pub use purity::{ensemble_purity, gamma_measured, GammaFit, PurityCurve};
pub use rate::{fragility_scan, gamma_formula, gamma_formula_resolved, FragilityScan};
