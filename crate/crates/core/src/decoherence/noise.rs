//! Classical Gaussian noise fields `f(x, t)` on the ring.
//!
//! Covariance: `E[f(x,t) f(x',t')] = G(x−x') T(t−t')`. With
//! `C(r, t) = Σ_k ∫dω/2π g(k,ω) e^{ikr − iωt}` the spectral intensity is
//! `g(k, ω) = Ĝ(k) T̂(ω) / V`, where `Ĝ(k) = Σ_r G(r) e^{−ikr}`, so
//! `Σ_k g(k, ω) = G(0) T̂(ω)` does not depend on the volume.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::SiteOperator;

const PSD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SpatialKernel {
    /// `G(r) = δ_{r,0}`
    White,
    /// `G(r) = 1`
    Uniform,
    /// `G(r) = (−1)^r`; needs even `N`.
    Staggered,
    /// `G(r) = values[d]` at ring distance `d`, zero beyond the list.
    Custom { values: Vec<f64> },
}

impl SpatialKernel {
    /// `G(r)` for `r = 0..N`.
    pub fn on_ring(&self, n: usize) -> Result<Vec<f64>> {
        Ok(match self {
            Self::White => (0..n).map(|r| if r == 0 { 1.0 } else { 0.0 }).collect(),
            Self::Uniform => vec![1.0; n],
            Self::Staggered => {
                if n % 2 != 0 {
                    return Err(Error::OddSites("staggered kernel"));
                }
                (0..n).map(|r| if r % 2 == 0 { 1.0 } else { -1.0 }).collect()
            }
            Self::Custom { values } => {
                if values.is_empty() {
                    return Err(Error::InvalidArgument("empty custom kernel".into()));
                }
                (0..n)
                    .map(|r| values.get(r.min(n - r)).copied().unwrap_or(0.0))
                    .collect()
            }
        })
    }

    /// Eigenvalues `Ĝ(k_m)` of the circulant covariance, `m = 0..N`.
    pub fn eigenvalues(&self, n: usize) -> Result<Vec<f64>> {
        let g = self.on_ring(n)?;
        let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
        let mut buf: Vec<Complex64> = g.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.process(&mut buf);
        let eig: Vec<f64> = buf.iter().map(|c| c.re).collect();
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -PSD_TOL {
            return Err(Error::KernelNotPsd { min_g: min });
        }
        Ok(eig)
    }

    pub fn at_origin(&self) -> f64 {
        match self {
            Self::Custom { values } => values.first().copied().unwrap_or(0.0),
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TemporalCorrelation {
    /// `T(t) = intensity · δ(t)`
    White { intensity: f64 },
    /// Ornstein–Uhlenbeck: `T(t) = variance · e^{−|t|/tau_c}`.
    Ou { variance: f64, tau_c: f64 },
}

impl TemporalCorrelation {
    /// `T̂(0) = ∫ T(t) dt`.
    pub fn intensity(&self) -> f64 {
        match *self {
            Self::White { intensity } => intensity,
            Self::Ou { variance, tau_c } => 2.0 * variance * tau_c,
        }
    }

    /// `T̂(ω)`.
    pub fn spectrum(&self, omega: f64) -> f64 {
        match *self {
            Self::White { intensity } => intensity,
            Self::Ou { variance, tau_c } => 2.0 * variance * tau_c / (1.0 + (omega * tau_c).powi(2)),
        }
    }

    pub fn correlation_time(&self) -> f64 {
        match *self {
            Self::White { .. } => 0.0,
            Self::Ou { tau_c, .. } => tau_c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub lambda: f64,
    pub coupling_op: SiteOperator,
    pub spatial: SpatialKernel,
    pub temporal: TemporalCorrelation,
}

impl NoiseModel {
    pub fn new(
        lambda: f64,
        coupling_op: SiteOperator,
        spatial: SpatialKernel,
        temporal: TemporalCorrelation,
    ) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
        }
        coupling_op.ensure_hermitian()?;
        match temporal {
            TemporalCorrelation::White { intensity } if !(intensity > 0.0) => {
                return Err(Error::InvalidArgument("white-noise intensity must be positive".into()))
            }
            TemporalCorrelation::Ou { variance, tau_c } if !(variance > 0.0 && tau_c > 0.0) => {
                return Err(Error::InvalidArgument(
                    "OU noise needs positive variance and tau_c".into(),
                ))
            }
            _ => {}
        }
        if let SpatialKernel::Custom { values } = &spatial {
            if values.is_empty() || !values.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidArgument("custom kernel needs finite values".into()));
            }
        }
        Ok(Self {
            lambda,
            coupling_op,
            spatial,
            temporal,
        })
    }

    /// Rejects kernels that are not positive semidefinite on an `n`-site ring.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        self.spatial.eigenvalues(n).map(|_| ())
    }

    pub fn spectral_intensity(&self, n: usize) -> Result<SpectralIntensity> {
        SpectralIntensity::new(&self.spatial, &self.temporal, n)
    }
}

/// `g(k)` at zero frequency on the grid `k_m = 2πm/N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralIntensity {
    pub n_sites: usize,
    pub g_of_k: Vec<f64>,
    /// `Ĝ(k_m)/V`; multiply by `T̂(ω)` for the frequency-resolved intensity.
    spatial_weight: Vec<f64>,
}

impl SpectralIntensity {
    pub fn new(spatial: &SpatialKernel, temporal: &TemporalCorrelation, n: usize) -> Result<Self> {
        let eig = spatial.eigenvalues(n)?;
        let spatial_weight: Vec<f64> = eig.iter().map(|&e| e.max(0.0) / n as f64).collect();
        let t0 = temporal.intensity();
        Ok(Self {
            n_sites: n,
            g_of_k: spatial_weight.iter().map(|w| w * t0).collect(),
            spatial_weight,
        })
    }

    pub fn total(&self) -> f64 {
        self.g_of_k.iter().sum()
    }

    /// `g(k_m, ω)`.
    pub fn at_frequency(&self, m: usize, temporal: &TemporalCorrelation, omega: f64) -> f64 {
        self.spatial_weight[m] * temporal.spectrum(omega)
    }
}

/// One realization `f(x, t_j)`, constant over `[t_j, t_j + dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseField {
    pub n_sites: usize,
    pub dt: f64,
    pub n_steps: usize,
    /// Row-major `n_steps × n_sites`.
    pub values: Vec<f64>,
}

impl NoiseField {
    pub fn step(&self, j: usize) -> &[f64] {
        &self.values[j * self.n_sites..(j + 1) * self.n_sites]
    }

    pub fn site_series(&self, x: usize) -> Vec<f64> {
        (0..self.n_steps).map(|j| self.values[j * self.n_sites + x]).collect()
    }
}

/// Draws spatially correlated unit-variance Gaussian vectors by filtering
/// white noise with `√Ĝ(k)` in Fourier space.
struct SpatialFilter {
    n: usize,
    sqrt_eig: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
}

impl SpatialFilter {
    fn new(kernel: &SpatialKernel, n: usize) -> Result<Self> {
        let eig = kernel.eigenvalues(n)?;
        let mut planner = FftPlanner::new();
        // drop FFT round-off so that null modes stay exactly null
        let floor = 1e-12 * eig.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        Ok(Self {
            n,
            sqrt_eig: eig.iter().map(|&e| if e > floor { e.sqrt() } else { 0.0 }).collect(),
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            buf: vec![Complex64::new(0.0, 0.0); n],
        })
    }

    fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        for b in self.buf.iter_mut() {
            *b = Complex64::new(rng.sample(StandardNormal), 0.0);
        }
        self.fwd.process(&mut self.buf);
        for (b, s) in self.buf.iter_mut().zip(&self.sqrt_eig) {
            *b *= *s;
        }
        self.inv.process(&mut self.buf);
        let scale = 1.0 / self.n as f64;
        for (o, b) in out.iter_mut().zip(&self.buf) {
            *o = b.re * scale;
        }
    }
}

/// Samples one realization of the noise field from a seed.
///
/// White temporal noise is piecewise constant with per-step variance
/// `intensity·G(0)/dt`; OU noise uses the exact AR(1) update and requires
/// `dt ≤ tau_c / 10`. Ensembles must pass distinct seeds per trajectory
/// (see [`crate::seed::derive_seed`]).
pub fn sample_noise_field(
    noise: &NoiseModel,
    n_sites: usize,
    dt: f64,
    n_steps: usize,
    seed: u64,
) -> Result<NoiseField> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    sample_noise_field_with(noise, n_sites, dt, n_steps, &mut rng)
}

pub fn sample_noise_field_with<R: Rng + ?Sized>(
    noise: &NoiseModel,
    n_sites: usize,
    dt: f64,
    n_steps: usize,
    rng: &mut R,
) -> Result<NoiseField> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let mut filter = SpatialFilter::new(&noise.spatial, n_sites)?;
    let mut values = vec![0.0; n_steps * n_sites];
    match noise.temporal {
        TemporalCorrelation::White { intensity } => {
            let amp = (intensity / dt).sqrt();
            for row in values.chunks_exact_mut(n_sites) {
                filter.draw(rng, row);
                row.iter_mut().for_each(|v| *v *= amp);
            }
        }
        TemporalCorrelation::Ou { variance, tau_c } => {
            if dt > tau_c / 10.0 {
                return Err(Error::InvalidArgument(format!(
                    "OU noise needs dt ≪ tau_c (dt = {dt}, tau_c = {tau_c})"
                )));
            }
            let a = (-dt / tau_c).exp();
            let sd = variance.sqrt();
            let kick = sd * (1.0 - a * a).sqrt();
            let mut eta = vec![0.0; n_sites];
            for j in 0..n_steps {
                filter.draw(rng, &mut eta);
                if j == 0 {
                    for (v, e) in values[..n_sites].iter_mut().zip(&eta) {
                        *v = sd * e;
                    }
                } else {
                    let (prev, cur) = values.split_at_mut(j * n_sites);
                    let prev = &prev[(j - 1) * n_sites..];
                    for x in 0..n_sites {
                        cur[x] = a * prev[x] + kick * eta[x];
                    }
                }
            }
        }
    }
    Ok(NoiseField {
        n_sites,
        dt,
        n_steps,
        values,
    })
}
