//! Predicted decoherence rate `Γ = λ² Σ_k g(k) ⟨δÂ_k† δÂ_k⟩` and its
//! volume scaling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::noise::NoiseModel;
use crate::error::{Error, Result};
use crate::fit::power_law_fit;
use crate::models::{build_state, ModelFamily, ModelSpec};
use crate::state::{additive_fluctuation, apply_site_into, inner, AdditiveOperator, SpinState};
use crate::table::{fmt_float, Table};

/// Fragility threshold on `δ` in `Γ ∝ V^{1+δ}`.
pub const FRAGILE_DELTA: f64 = 0.2;

/// Rate from the zero-frequency intensity `g(k)`. Exact for states that do
/// not evolve under `Ĥ` driven by temporally white noise.
pub fn gamma_formula(state: &SpinState, noise: &NoiseModel) -> Result<f64> {
    let n = state.n_sites();
    let g = noise.spectral_intensity(n)?;
    let terms: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|m| {
            if g.g_of_k[m] <= 0.0 {
                return Ok(0.0);
            }
            let a = AdditiveOperator::from_index(noise.coupling_op.clone(), m, n);
            Ok(g.g_of_k[m] * additive_fluctuation(state, &a)?)
        })
        .collect::<Result<_>>()?;
    Ok(noise.lambda.powi(2) * terms.iter().sum::<f64>())
}

/// Frequency-resolved rate `λ² Σ_{k,n} g(k, ⟨H⟩ − ω_n) |⟨n|δÂ_k|Ψ⟩|²`
/// for a Hamiltonian diagonal in the z basis with entries `h_diag`.
pub fn gamma_formula_resolved(state: &SpinState, noise: &NoiseModel, h_diag: &[f64]) -> Result<f64> {
    let n = state.n_sites();
    if h_diag.len() != state.dim() {
        return Err(Error::LengthMismatch {
            expected: state.dim(),
            got: h_diag.len(),
        });
    }
    let g = noise.spectral_intensity(n)?;
    let psi = state.amplitudes();
    let e_mean: f64 = psi.iter().zip(h_diag).map(|(a, e)| a.norm_sqr() * e).sum();
    let mut total = 0.0;
    let mut buf = vec![num_complex::Complex64::new(0.0, 0.0); psi.len()];
    for m in 0..n {
        let a = AdditiveOperator::from_index(noise.coupling_op.clone(), m, n);
        let mut phi = vec![num_complex::Complex64::new(0.0, 0.0); psi.len()];
        for x in 0..n {
            apply_site_into(psi, &mut buf, &a.base.matrix, x);
            let ph = a.phase(x);
            phi.iter_mut().zip(&buf).for_each(|(p, v)| *p += v * ph);
        }
        let mean = inner(psi, &phi);
        phi.iter_mut().zip(psi).for_each(|(p, s)| *p -= mean * s);
        total += phi
            .iter()
            .zip(h_diag)
            .map(|(c, &w)| g.at_frequency(m, &noise.temporal, e_mean - w) * c.norm_sqr())
            .sum::<f64>();
    }
    Ok(noise.lambda.powi(2) * total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragilityScan {
    pub family: ModelFamily,
    /// `(V, Γ, Σ_k g(k))`
    pub rows: Vec<(usize, f64, f64)>,
    /// Fitted exponent `1 + δ` (0 when every Γ vanishes).
    pub exponent: f64,
    pub r_squared: f64,
    pub fragile: bool,
}

impl FragilityScan {
    pub fn delta(&self) -> f64 {
        self.exponent - 1.0
    }

    pub const COLUMNS: [&'static str; 6] = ["V", "gamma_formula", "sum_g", "exponent", "delta", "fragile"];

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&Self::COLUMNS);
        for &(v, g, sg) in &self.rows {
            t.push(vec![
                v.to_string(),
                fmt_float(g),
                fmt_float(sg),
                fmt_float(self.exponent),
                fmt_float(self.delta()),
                self.fragile.to_string(),
            ]);
        }
        t
    }
}

/// `Γ(V)` for one state family and the fitted volume exponent.
pub fn fragility_scan(
    family: ModelFamily,
    seed: Option<u64>,
    noise: &NoiseModel,
    volumes: &[usize],
) -> Result<FragilityScan> {
    let mut vols = volumes.to_vec();
    vols.sort_unstable();
    vols.dedup();
    if vols.len() < 3 || vols.len() != volumes.len() {
        return Err(Error::InsufficientData(
            "fragility scan needs at least 3 distinct volumes".into(),
        ));
    }
    let rows: Vec<(usize, f64, f64)> = volumes
        .iter()
        .map(|&v| {
            let mut spec = ModelSpec::new(family, v);
            spec.seed = seed;
            let state = build_state(&spec)?;
            let sum_g = noise.spectral_intensity(v)?.total();
            Ok((v, gamma_formula(&state, noise)?, sum_g))
        })
        .collect::<Result<_>>()?;
    let nz: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.1 > 0.0)
        .map(|r| (r.0 as f64, r.1))
        .collect();
    let (exponent, r_squared) = if nz.is_empty() {
        (0.0, 1.0)
    } else if nz.len() < 3 {
        return Err(Error::InsufficientData(
            "fewer than 3 volumes with non-zero rate".into(),
        ));
    } else {
        let (v, g): (Vec<f64>, Vec<f64>) = nz.into_iter().unzip();
        let fit = power_law_fit(&v, &g)?;
        (fit.slope, fit.r_squared)
    };
    Ok(FragilityScan {
        family,
        rows,
        exponent,
        r_squared,
        fragile: exponent - 1.0 > FRAGILE_DELTA,
    })
}
