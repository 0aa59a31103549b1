//! Purity of a trajectory ensemble and the decoherence rate fitted from it.
//!
//! For `M` pure trajectories the empirical mixture `ρ̂ = (1/M) Σ_i |ψ_i⟩⟨ψ_i|`
//! has `Tr ρ̂² = (1/M²)(M + Σ_{i≠j} |⟨ψ_i|ψ_j⟩|²)`. The off-diagonal sum is
//! computed from pairwise overlaps when the Hilbert space is larger than the
//! ensemble, and from `ρ̂` itself otherwise.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::weighted_line_fit;
use crate::state::{inner, SpinState};
use crate::table::{fmt_float, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurityCurve {
    pub times: Vec<f64>,
    /// Purity of the empirical mixture, `(M + Σ_{i≠j} w_ij)/M²`.
    pub purity: Vec<f64>,
    /// Jackknife standard error of `purity`.
    pub stderr: Vec<f64>,
    /// Pair-only U-statistic `Σ_{i≠j} w_ij / (M(M−1))`.
    pub pairwise: Vec<f64>,
    pub n_trajectories: usize,
    /// Leave-one-out purities, `replicates[t][i]`; empty for synthetic curves.
    #[serde(skip)]
    pub replicates: Vec<Vec<f64>>,
}

impl PurityCurve {
    /// A curve without resampling information, e.g. from a closed form.
    pub fn synthetic(times: Vec<f64>, purity: Vec<f64>) -> Self {
        let n = times.len();
        Self {
            times,
            pairwise: purity.clone(),
            purity,
            stderr: vec![0.0; n],
            n_trajectories: 0,
            replicates: Vec::new(),
        }
    }

    pub const COLUMNS: [&'static str; 5] = ["t", "purity", "stderr", "pairwise", "minus_half_ln_purity"];

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&Self::COLUMNS);
        for i in 0..self.times.len() {
            t.push(vec![
                fmt_float(self.times[i]),
                fmt_float(self.purity[i]),
                fmt_float(self.stderr[i]),
                fmt_float(self.pairwise[i]),
                fmt_float(-0.5 * self.purity[i].ln()),
            ]);
        }
        t
    }
}

/// Row sums `r_i = Σ_{j≠i} |⟨ψ_i|ψ_j⟩|²` and diagonal weights `‖ψ_i‖⁴`.
fn overlap_row_sums(states: &[&SpinState]) -> (Vec<f64>, Vec<f64>) {
    let m = states.len();
    let dim = states[0].dim();
    let diag: Vec<f64> = states.iter().map(|s| s.norm_sqr().powi(2)).collect();
    let rows: Vec<f64> = if dim >= m {
        (0..m)
            .into_par_iter()
            .map(|i| {
                let a = states[i].amplitudes();
                (0..m)
                    .filter(|&j| j != i)
                    .map(|j| inner(a, states[j].amplitudes()).norm_sqr())
                    .sum()
            })
            .collect()
    } else {
        // ρ = Σ_i |ψ_i⟩⟨ψ_i|, row-major; r_i = ⟨ψ_i|ρ|ψ_i⟩ − ‖ψ_i‖⁴
        let rho: Vec<Vec<Complex64>> = (0..dim)
            .into_par_iter()
            .map(|r| {
                let mut row = vec![Complex64::new(0.0, 0.0); dim];
                for s in states {
                    let a = s.amplitudes();
                    let ar = a[r];
                    if ar.norm_sqr() == 0.0 {
                        continue;
                    }
                    row.iter_mut().zip(a).for_each(|(o, b)| *o += ar * b.conj());
                }
                row
            })
            .collect();
        (0..m)
            .into_par_iter()
            .map(|i| {
                let a = states[i].amplitudes();
                let q: Complex64 = rho
                    .iter()
                    .zip(a)
                    .map(|(row, ar)| ar.conj() * row.iter().zip(a).map(|(p, b)| p * b).sum::<Complex64>())
                    .sum();
                q.re - diag[i]
            })
            .collect()
    };
    (rows, diag)
}

/// Purity curve of an ensemble given as `trajectories[i][t]`.
pub fn ensemble_purity(times: &[f64], trajectories: &[Vec<SpinState>]) -> Result<PurityCurve> {
    let m = trajectories.len();
    if m < 2 {
        return Err(Error::InsufficientData(format!(
            "ensemble purity needs at least 2 trajectories, got {m}"
        )));
    }
    if trajectories.iter().any(|t| t.len() != times.len()) {
        return Err(Error::InvalidArgument("trajectories have unequal lengths".into()));
    }
    let mf = m as f64;
    let mut purity = Vec::with_capacity(times.len());
    let mut stderr = Vec::with_capacity(times.len());
    let mut pairwise = Vec::with_capacity(times.len());
    let mut replicates = Vec::with_capacity(times.len());
    for t in 0..times.len() {
        let states: Vec<&SpinState> = trajectories.iter().map(|tr| &tr[t]).collect();
        let (rows, diag) = overlap_row_sums(&states);
        let s: f64 = rows.iter().sum();
        let d: f64 = diag.iter().sum();
        purity.push((d + s) / (mf * mf));
        pairwise.push(s / (mf * (mf - 1.0)));
        let loo: Vec<f64> = (0..m)
            .map(|i| (d - diag[i] + s - 2.0 * rows[i]) / ((mf - 1.0) * (mf - 1.0)))
            .collect();
        stderr.push(jackknife_se(&loo));
        replicates.push(loo);
    }
    Ok(PurityCurve {
        times: times.to_vec(),
        purity,
        stderr,
        pairwise,
        n_trajectories: m,
        replicates,
    })
}

fn jackknife_se(loo: &[f64]) -> f64 {
    let m = loo.len() as f64;
    let mean = loo.iter().sum::<f64>() / m;
    let ss: f64 = loo.iter().map(|v| (v - mean).powi(2)).sum();
    ((m - 1.0) / m * ss).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    pub gamma: f64,
    pub stderr: f64,
    pub n_points: usize,
    /// Smallest purity inside the window; fits are meant for purity ≥ 0.7.
    pub min_purity: f64,
}

/// Slope of `−½ ln Tr ρ²` against `t` over `[t_lo, t_hi]`.
///
/// Points are weighted by their inverse variance when every point carries a
/// positive standard error. The error on the slope is a jackknife over
/// trajectories when leave-one-out replicates are available.
pub fn gamma_measured(curve: &PurityCurve, window: (f64, f64)) -> Result<GammaFit> {
    let (lo, hi) = window;
    let slack = 1e-12 * hi.abs().max(1.0);
    let idx: Vec<usize> = (0..curve.times.len())
        .filter(|&i| curve.times[i] >= lo - slack && curve.times[i] <= hi + slack)
        .collect();
    if idx.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "fit window [{lo}, {hi}] holds {} points",
            idx.len()
        )));
    }
    if idx.iter().any(|&i| !(curve.purity[i] > 0.0)) {
        return Err(Error::InvalidArgument("purity must be positive in the fit window".into()));
    }
    let t: Vec<f64> = idx.iter().map(|&i| curve.times[i]).collect();
    let y_of = |p: &dyn Fn(usize) -> f64| -> Vec<f64> { idx.iter().map(|&i| -0.5 * p(i).ln()).collect() };
    let y = y_of(&|i| curve.purity[i]);
    let weighted = idx.iter().all(|&i| curve.stderr[i] > 0.0);
    let w: Vec<f64> = if weighted {
        idx.iter()
            .map(|&i| {
                let sy = 0.5 * curve.stderr[i] / curve.purity[i];
                1.0 / (sy * sy)
            })
            .collect()
    } else {
        vec![1.0; idx.len()]
    };
    let fit = weighted_line_fit(&t, &y, &w)?;
    let stderr = if curve.replicates.is_empty() {
        fit.slope_stderr
    } else {
        let m = curve.replicates[0].len();
        let slopes: Vec<f64> = (0..m)
            .map(|r| {
                let yr = y_of(&|i| curve.replicates[i][r]);
                weighted_line_fit(&t, &yr, &w).map(|f| f.slope)
            })
            .collect::<Result<_>>()?;
        jackknife_se(&slopes)
    };
    let min_purity = idx.iter().map(|&i| curve.purity[i]).fold(f64::INFINITY, f64::min);
    Ok(GammaFit {
        gamma: fit.slope,
        stderr,
        n_points: idx.len(),
        min_purity,
    })
}
