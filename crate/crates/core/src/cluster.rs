//! Finite-volume cluster property: `Ω(ε, x)`, `Ω(ε)` and a CP verdict.

use nalgebra::{Matrix3, SymmetricEigen, SVD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlations::Correlations;
use crate::error::{Error, Result};
use crate::fit::line_fit;
use crate::state::SpinState;
use crate::table::{fmt_float, Table};

/// Local covariance eigenvalues below this are zero-variance directions.
pub const VARIANCE_FLOOR: f64 = 1e-10;
const CS_SLACK: f64 = 1e-9;

pub const DEFAULT_EPSILONS: [f64; 4] = [0.5, 0.25, 0.1, 0.05];

fn to_matrix(a: [[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| a[r][c])
}

/// Pseudo-inverse square root on the positive-variance subspace.
fn whitener(cov: [[f64; 3]; 3]) -> Option<Matrix3<f64>> {
    let eig = SymmetricEigen::new(to_matrix(cov));
    let mut w = Matrix3::zeros();
    let mut any = false;
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > VARIANCE_FLOOR {
            let u = eig.eigenvectors.column(i);
            w += (u * u.transpose()) / lam.sqrt();
            any = true;
        }
    }
    any.then_some(w)
}

/// Worst-case normalized connected correlation between sites `x` and `y`
/// over Hermitian single-site observables.
pub fn normalized_correlation_from(corr: &Correlations, x: usize, y: usize) -> f64 {
    let (Some(wx), Some(wy)) = (
        whitener(corr.local_covariance(x)),
        whitener(corr.local_covariance(y)),
    ) else {
        return 0.0;
    };
    let k = wx * to_matrix(corr.connected(x, y)) * wy;
    let svd = SVD::new(k, false, false);
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    top.clamp(0.0, 1.0 + CS_SLACK)
}

pub fn normalized_correlation(state: &SpinState, x: usize, y: usize) -> Result<f64> {
    state.check_site(x)?;
    state.check_site(y)?;
    if x == y {
        return Err(Error::InvalidArgument(
            "normalized correlation needs distinct sites".into(),
        ));
    }
    Ok(normalized_correlation_from(&Correlations::compute(state), x, y))
}

/// Symmetric `N×N` table of normalized correlations (diagonal is 0).
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    n_sites: usize,
    values: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn compute(state: &SpinState) -> Self {
        Self::from_correlations(&Correlations::compute(state))
    }

    pub fn from_correlations(corr: &Correlations) -> Self {
        let n = corr.n_sites();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|x| ((x + 1)..n).map(move |y| (x, y)))
            .collect();
        let upper: Vec<f64> = pairs
            .par_iter()
            .map(|&(x, y)| normalized_correlation_from(corr, x, y))
            .collect();
        let mut values = vec![0.0; n * n];
        for (&(x, y), v) in pairs.iter().zip(upper) {
            values[x * n + y] = v;
            values[y * n + x] = v;
        }
        Self { n_sites: n, values }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[x * self.n_sites + y]
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Sites `y ≠ x` whose correlation with `x` exceeds `epsilon`.
    pub fn omega_region(&self, x: usize, epsilon: f64) -> usize {
        (0..self.n_sites)
            .filter(|&y| y != x && self.get(x, y) > epsilon)
            .count()
    }

    pub fn report(&self, epsilon: f64) -> Result<ClusterReport> {
        check_epsilon(epsilon)?;
        let per_x: Vec<(usize, usize)> = (0..self.n_sites)
            .map(|x| (x, self.omega_region(x, epsilon)))
            .collect();
        let omega = per_x.iter().map(|p| p.1).max().unwrap_or(0);
        Ok(ClusterReport {
            n_sites: self.n_sites,
            epsilon,
            per_x,
            omega,
        })
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, 1], got {epsilon}"
        )));
    }
    Ok(())
}

/// Ring distance `min(|x−y|, N−|x−y|)`.
pub fn ring_distance(x: usize, y: usize, n: usize) -> usize {
    let d = x.abs_diff(y);
    d.min(n - d)
}

/// Size of the region around `x` where correlations exceed `epsilon`.
pub fn omega_region(state: &SpinState, x: usize, epsilon: f64) -> Result<usize> {
    state.check_site(x)?;
    check_epsilon(epsilon)?;
    Ok(CorrelationMatrix::compute(state).omega_region(x, epsilon))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub n_sites: usize,
    pub epsilon: f64,
    pub per_x: Vec<(usize, usize)>,
    pub omega: usize,
}

impl ClusterReport {
    pub fn compute(state: &SpinState, epsilon: f64) -> Result<Self> {
        CorrelationMatrix::compute(state).report(epsilon)
    }

    pub const COLUMNS: [&'static str; 3] = ["epsilon", "x", "omega_x"];

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&Self::COLUMNS);
        for &(x, o) in &self.per_x {
            t.push(vec![fmt_float(self.epsilon), x.to_string(), o.to_string()]);
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CpClass {
    HasCp,
    NoCp,
}

impl CpClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::HasCp => "HAS_CP",
            Self::NoCp => "NO_CP",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpVerdict {
    pub class: CpClass,
    /// Least-squares slope of Ω against V over the whole series.
    pub slope: f64,
    /// Set when Ω neither settles nor grows with slope above 0.5.
    pub ambiguous: bool,
}

/// Slope above which Ω counts as growing with the volume.
pub const GROWTH_SLOPE: f64 = 0.5;

/// HAS_CP when Ω is the same at the three largest volumes; NO_CP when
/// the fitted slope exceeds [`GROWTH_SLOPE`]; otherwise NO_CP, flagged.
pub fn cp_verdict(series: &[(usize, usize)]) -> Result<CpVerdict> {
    let mut pts: Vec<(usize, usize)> = series.to_vec();
    pts.sort_unstable();
    pts.dedup_by_key(|p| p.0);
    if pts.len() != series.len() || pts.len() < 3 {
        return Err(Error::InsufficientData(
            "CP verdict needs at least 3 distinct volumes".into(),
        ));
    }
    let v: Vec<f64> = pts.iter().map(|p| p.0 as f64).collect();
    let o: Vec<f64> = pts.iter().map(|p| p.1 as f64).collect();
    let slope = line_fit(&v, &o)?.slope;
    let tail = &pts[pts.len() - 3..];
    let settled = tail.iter().all(|p| p.1 == tail[0].1);
    let (class, ambiguous) = if settled {
        (CpClass::HasCp, false)
    } else if slope > GROWTH_SLOPE {
        (CpClass::NoCp, false)
    } else {
        (CpClass::NoCp, true)
    };
    Ok(CpVerdict {
        class,
        slope,
        ambiguous,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_examples() {
        let v = cp_verdict(&[(4, 0), (6, 0), (8, 0)]).unwrap();
        assert_eq!(v.class, CpClass::HasCp);
        let v = cp_verdict(&[(4, 3), (6, 5), (8, 7)]).unwrap();
        assert_eq!(v.class, CpClass::NoCp);
        assert!(!v.ambiguous);
        assert!((v.slope - 1.0).abs() < 1e-12);
        let v = cp_verdict(&[(4, 1), (6, 1), (8, 1)]).unwrap();
        assert_eq!(v.class, CpClass::HasCp);
    }

    #[test]
    fn verdict_ambiguous_and_errors() {
        let v = cp_verdict(&[(4, 1), (6, 2), (8, 1), (10, 2)]).unwrap();
        assert_eq!(v.class, CpClass::NoCp);
        assert!(v.ambiguous);
        assert!(cp_verdict(&[(4, 1), (6, 1)]).is_err());
        assert!(cp_verdict(&[(4, 1), (4, 1), (6, 1)]).is_err());
    }

    #[test]
    fn ring_distances() {
        assert_eq!(ring_distance(0, 7, 8), 1);
        assert_eq!(ring_distance(2, 5, 8), 3);
        assert_eq!(ring_distance(0, 4, 8), 4);
    }

    #[test]
    fn epsilon_range() {
        let s = SpinState::basis(3, 0).unwrap();
        assert!(omega_region(&s, 0, 0.0).is_err());
        assert!(omega_region(&s, 0, 1.5).is_err());
        assert_eq!(omega_region(&s, 0, 1.0).unwrap(), 0);
    }
}
