//! Worst-case additive-operator fluctuations and NFS/AFS classification.
//!
//! For a site-uniform Hermitian local observable `â = c·σ` (real unit `c`)
//! the fluctuation of `Â_k` is the quadratic form `cᵀ Re C(k) c`, where
//! `C(k)` is the Gram matrix of the vectors `δΣ_μ(k)|Ψ⟩`. The supremum over
//! the traceless single-site observables is therefore the top eigenvalue of
//! `Re C(k)`.

use nalgebra::{Matrix3, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlations::Correlations;
use crate::error::{Error, Result};
use crate::fit::power_law_fit;
use crate::state::{grid_phase, wavevector, AdditiveOperator, SiteOperator, SpinState};
use crate::table::{fmt_float, Table};

/// Default tolerance on the fitted exponent for the NFS/AFS decision.
pub const DEFAULT_CLASS_TOL: f64 = 0.2;

/// `C_μν(k) = ⟨Ψ|δΣ_μ(k)† δΣ_ν(k)|Ψ⟩` for `μ, ν ∈ {x, y, z}`.
pub fn correlation_gram(state: &SpinState, k: f64) -> Result<Matrix3<Complex64>> {
    let grid = AdditiveOperator::new(SiteOperator::sigma_z(), k, state.n_sites())?;
    let corr = Correlations::compute(state);
    Ok(gram_from_correlations(&corr, grid.grid_index()))
}

/// Gram matrix at grid index `m` (wavevector `2πm/N`).
pub fn gram_from_correlations(corr: &Correlations, m: usize) -> Matrix3<Complex64> {
    let n = corr.n_sites();
    let mut c = Matrix3::<Complex64>::zeros();
    for x in 0..n {
        let r = corr.bloch(x);
        // on-site: σ_μσ_ν = δ_μν + i ε_μνλ σ_λ
        for a in 0..3 {
            for b in 0..3 {
                let mut v = Complex64::new(if a == b { 1.0 } else { 0.0 } - r[a] * r[b], 0.0);
                if a != b {
                    let l = 3 - a - b;
                    let sign = if (a + 1) % 3 == b { 1.0 } else { -1.0 };
                    v += Complex64::new(0.0, sign * r[l]);
                }
                c[(a, b)] += v;
            }
        }
        for y in (0..n).filter(|&y| y != x) {
            let ph = grid_phase(m * ((x + n - y) % n), n);
            let mc = corr.connected(x, y);
            for a in 0..3 {
                for b in 0..3 {
                    c[(a, b)] += ph * mc[a][b];
                }
            }
        }
    }
    c
}

/// Largest eigenpair of `Re C`; the eigenvector's largest component is made positive.
fn top_real_eigen(c: &Matrix3<Complex64>) -> (f64, [f64; 3]) {
    let re = c.map(|z| z.re);
    let sym = (re + re.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let (imax, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let v = eig.eigenvectors.column(imax);
    let mut vec = [v[0], v[1], v[2]];
    let pivot = vec
        .iter()
        .copied()
        .fold(0.0f64, |acc, a| if a.abs() > acc.abs() + 1e-12 { a } else { acc });
    if pivot < 0.0 {
        vec.iter_mut().for_each(|a| *a = -*a);
    }
    (eig.eigenvalues[imax].max(0.0), vec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KFluctuation {
    pub grid_index: usize,
    pub k: f64,
    pub max_fluct: f64,
    /// Coefficients of the worst-case observable on `(σ_x, σ_y, σ_z)`.
    pub argmax_op: [Complex64; 3],
}

impl KFluctuation {
    pub fn operator(&self) -> SiteOperator {
        SiteOperator::pauli_combination(self.argmax_op, "argmax")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationSpectrum {
    pub n_sites: usize,
    pub per_k: Vec<KFluctuation>,
}

impl FluctuationSpectrum {
    /// Entry with the largest fluctuation; ties go to the smallest grid index.
    pub fn peak(&self) -> &KFluctuation {
        self.per_k
            .iter()
            .fold(&self.per_k[0], |best, e| if e.max_fluct > best.max_fluct { e } else { best })
    }

    pub fn max_fluct(&self) -> f64 {
        self.peak().max_fluct
    }

    pub const COLUMNS: [&'static str; 8] = [
        "k", "max_fluct", "op_cx_re", "op_cx_im", "op_cy_re", "op_cy_im", "op_cz_re", "op_cz_im",
    ];

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&Self::COLUMNS);
        for e in &self.per_k {
            let mut row = vec![fmt_float(e.k), fmt_float(e.max_fluct)];
            for c in e.argmax_op {
                row.push(fmt_float(c.re));
                row.push(fmt_float(c.im));
            }
            t.push(row);
        }
        t
    }
}

pub fn spectrum_from_correlations(corr: &Correlations) -> FluctuationSpectrum {
    let n = corr.n_sites();
    let per_k = (0..n)
        .into_par_iter()
        .map(|m| {
            let (val, vec) = top_real_eigen(&gram_from_correlations(corr, m));
            KFluctuation {
                grid_index: m,
                k: wavevector(m, n),
                max_fluct: val,
                argmax_op: vec.map(|v| Complex64::new(v, 0.0)),
            }
        })
        .collect();
    FluctuationSpectrum { n_sites: n, per_k }
}

/// For each grid `k`, the largest fluctuation over unit single-site observables.
pub fn max_fluctuation(state: &SpinState) -> FluctuationSpectrum {
    spectrum_from_correlations(&Correlations::compute(state))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FluctuationClass {
    Nfs,
    Afs,
    Intermediate,
}

impl FluctuationClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Nfs => "NFS",
            Self::Afs => "AFS",
            Self::Intermediate => "INTERMEDIATE",
        }
    }

    pub fn from_exponent(p: f64, tol: f64) -> Self {
        if p <= 1.0 + tol {
            Self::Nfs
        } else if p >= 2.0 - tol {
            Self::Afs
        } else {
            Self::Intermediate
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingVerdict {
    pub exponent: f64,
    pub r_squared: f64,
    pub class: FluctuationClass,
}

pub fn classify_scaling(series: &[(usize, f64)]) -> Result<ScalingVerdict> {
    classify_scaling_with_tol(series, DEFAULT_CLASS_TOL)
}

/// Log-log fit of worst-case fluctuation against volume. Zero entries are
/// dropped; an all-zero series is an eigenstate family (`p = 0`, NFS).
pub fn classify_scaling_with_tol(series: &[(usize, f64)], tol: f64) -> Result<ScalingVerdict> {
    let mut vols: Vec<usize> = series.iter().map(|p| p.0).collect();
    vols.sort_unstable();
    vols.dedup();
    if vols.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "scaling fit needs at least 3 distinct volumes, got {}",
            vols.len()
        )));
    }
    if series.iter().any(|p| !(p.1 >= 0.0)) {
        return Err(Error::InvalidArgument("fluctuations must be non-negative".into()));
    }
    let usable: Vec<(f64, f64)> = series
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|p| (p.0 as f64, p.1))
        .collect();
    if usable.is_empty() {
        return Ok(ScalingVerdict {
            exponent: 0.0,
            r_squared: 1.0,
            class: FluctuationClass::Nfs,
        });
    }
    if usable.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} non-zero points in scaling series",
            usable.len()
        )));
    }
    let (v, f): (Vec<f64>, Vec<f64>) = usable.into_iter().unzip();
    let fit = power_law_fit(&v, &f)?;
    Ok(ScalingVerdict {
        exponent: fit.slope,
        r_squared: fit.r_squared,
        class: FluctuationClass::from_exponent(fit.slope, tol),
    })
}
