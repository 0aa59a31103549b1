//! Reduced density matrices and Pauli one- and two-point functions.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::state::{SiteOperator, SpinState};

pub type Rdm1 = [[Complex64; 2]; 2];
/// Two-site reduced density matrix, index `2·b_x + b_y`.
pub type Rdm2 = [[Complex64; 4]; 4];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub fn single_site_rdm(state: &SpinState, x: usize) -> Result<Rdm1> {
    state.check_site(x)?;
    let psi = state.amplitudes();
    let mask = 1usize << x;
    let mut rho = [[ZERO; 2]; 2];
    for i0 in (0..psi.len()).filter(|i| i & mask == 0) {
        let (u, d) = (psi[i0], psi[i0 | mask]);
        rho[0][0] += u * u.conj();
        rho[0][1] += u * d.conj();
        rho[1][1] += d * d.conj();
    }
    rho[1][0] = rho[0][1].conj();
    Ok(rho)
}

pub fn two_site_rdm(state: &SpinState, x: usize, y: usize) -> Result<Rdm2> {
    state.check_site(x)?;
    state.check_site(y)?;
    if x == y {
        return Err(Error::InvalidArgument(
            "two-site reduced state needs distinct sites".into(),
        ));
    }
    let psi = state.amplitudes();
    let (mx, my) = (1usize << x, 1usize << y);
    let mut rho = [[ZERO; 4]; 4];
    for base in (0..psi.len()).filter(|i| i & (mx | my) == 0) {
        let v = [psi[base], psi[base | my], psi[base | mx], psi[base | mx | my]];
        for r in 0..4 {
            for c in r..4 {
                rho[r][c] += v[r] * v[c].conj();
            }
        }
    }
    for r in 0..4 {
        for c in 0..r {
            rho[r][c] = rho[c][r].conj();
        }
    }
    Ok(rho)
}

/// `Tr[ρ (A ⊗ B)]` for a two-site reduced state.
pub fn rdm2_expectation(rho: &Rdm2, a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> Complex64 {
    let mut acc = ZERO;
    for r in 0..4 {
        for c in 0..4 {
            let op = a[c >> 1][r >> 1] * b[c & 1][r & 1];
            acc += rho[r][c] * op;
        }
    }
    acc
}

pub fn rdm1_expectation(rho: &Rdm1, a: &[[Complex64; 2]; 2]) -> Complex64 {
    let mut acc = ZERO;
    for r in 0..2 {
        for c in 0..2 {
            acc += rho[r][c] * a[c][r];
        }
    }
    acc
}

pub(crate) fn paulis() -> [SiteOperator; 3] {
    [
        SiteOperator::sigma_x(),
        SiteOperator::sigma_y(),
        SiteOperator::sigma_z(),
    ]
}

/// Bloch vectors `⟨σ_μ(x)⟩` and two-point functions `⟨σ_μ(x)σ_ν(y)⟩`, x ≠ y.
#[derive(Debug, Clone)]
pub struct Correlations {
    n_sites: usize,
    bloch: Vec<[f64; 3]>,
    two_point: Vec<[[f64; 3]; 3]>,
}

impl Correlations {
    pub fn compute(state: &SpinState) -> Self {
        let n = state.n_sites();
        let p = paulis();
        let bloch: Vec<[f64; 3]> = (0..n)
            .into_par_iter()
            .map(|x| {
                let rho = single_site_rdm(state, x).expect("site in range");
                [0, 1, 2].map(|m| rdm1_expectation(&rho, &p[m].matrix).re)
            })
            .collect();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|x| ((x + 1)..n).map(move |y| (x, y)))
            .collect();
        let upper: Vec<[[f64; 3]; 3]> = pairs
            .par_iter()
            .map(|&(x, y)| {
                let rho = two_site_rdm(state, x, y).expect("distinct sites");
                let mut t = [[0.0; 3]; 3];
                for (m, row) in t.iter_mut().enumerate() {
                    for (v, out) in row.iter_mut().enumerate() {
                        *out = rdm2_expectation(&rho, &p[m].matrix, &p[v].matrix).re;
                    }
                }
                t
            })
            .collect();
        let mut two_point = vec![[[0.0; 3]; 3]; n * n];
        for (&(x, y), t) in pairs.iter().zip(upper) {
            two_point[x * n + y] = t;
            let mut tt = [[0.0; 3]; 3];
            for m in 0..3 {
                for v in 0..3 {
                    tt[v][m] = t[m][v];
                }
            }
            two_point[y * n + x] = tt;
        }
        Self {
            n_sites: n,
            bloch,
            two_point,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn bloch(&self, x: usize) -> [f64; 3] {
        self.bloch[x]
    }

    /// `⟨σ_μ(x)σ_ν(y)⟩` for `x ≠ y`.
    pub fn two_point(&self, x: usize, y: usize) -> [[f64; 3]; 3] {
        debug_assert_ne!(x, y);
        self.two_point[x * self.n_sites + y]
    }

    /// `⟨δσ_μ(x) δσ_ν(y)⟩` for `x ≠ y`.
    pub fn connected(&self, x: usize, y: usize) -> [[f64; 3]; 3] {
        let t = self.two_point(x, y);
        let (rx, ry) = (self.bloch[x], self.bloch[y]);
        let mut m = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] = t[a][b] - rx[a] * ry[b];
            }
        }
        m
    }

    /// Real local covariance `½⟨{δσ_μ, δσ_ν}⟩ = δ_μν − r_μ r_ν` at site `x`.
    pub fn local_covariance(&self, x: usize) -> [[f64; 3]; 3] {
        let r = self.bloch[x];
        let mut g = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                g[a][b] = if a == b { 1.0 } else { 0.0 } - r[a] * r[b];
            }
        }
        g
    }
}
