//! Dense brute-force references shared by the integration tests.
//!
//! Operators are embedded with explicit Kronecker products; nothing here
//! calls into the library's contraction code.

#![allow(dead_code)]

use macrostab::models::{build_state, ModelFamily, ModelSpec};
use macrostab::{Complex64, SiteOperator, SpinState};
use nalgebra::{DMatrix, DVector};

pub type C = Complex64;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn two_by_two(op: &SiteOperator) -> DMatrix<C> {
    DMatrix::from_fn(2, 2, |r, s| op.matrix[r][s])
}

/// `1 ⊗ … ⊗ op ⊗ … ⊗ 1` with site `x` on bit `x` of the basis index
/// (bit 0 least significant, so site 0 is the rightmost factor).
pub fn embed(op: &SiteOperator, x: usize, n: usize) -> DMatrix<C> {
    let mut m = DMatrix::from_element(1, 1, c(1.0, 0.0));
    for site in (0..n).rev() {
        let f = if site == x {
            two_by_two(op)
        } else {
            DMatrix::identity(2, 2)
        };
        m = m.kronecker(&f);
    }
    m
}

pub fn ket(state: &SpinState) -> DVector<C> {
    DVector::from_column_slice(state.amplitudes())
}

pub fn expect(psi: &DVector<C>, m: &DMatrix<C>) -> C {
    (psi.adjoint() * m * psi)[(0, 0)]
}

/// `Σ_x e^{−ikx} op(x)`
pub fn additive(op: &SiteOperator, k: f64, n: usize) -> DMatrix<C> {
    let d = 1 << n;
    let mut m = DMatrix::zeros(d, d);
    for x in 0..n {
        m += embed(op, x, n) * C::from_polar(1.0, -k * x as f64);
    }
    m
}

pub fn fluctuation(psi: &DVector<C>, a: &DMatrix<C>) -> f64 {
    let mean = expect(psi, a);
    (expect(psi, &(a.adjoint() * a)) - mean.conj() * mean).re
}

pub fn paulis() -> [SiteOperator; 3] {
    [SiteOperator::sigma_x(), SiteOperator::sigma_y(), SiteOperator::sigma_z()]
}

/// `Re⟨δA_a† δA_b⟩` for the three Pauli additive operators at wavevector `k`.
pub fn dense_fluct_matrix(state: &SpinState, k: f64) -> nalgebra::Matrix3<f64> {
    let n = state.n_sites();
    let psi = ket(state);
    let ops: Vec<DMatrix<C>> = paulis().iter().map(|p| additive(p, k, n)).collect();
    let means: Vec<C> = ops.iter().map(|a| expect(&psi, a)).collect();
    nalgebra::Matrix3::from_fn(|a, b| {
        (expect(&psi, &(ops[a].adjoint() * &ops[b])) - means[a].conj() * means[b]).re
    })
}

pub fn state(family: ModelFamily, n: usize, seed: u64) -> SpinState {
    build_state(&ModelSpec::new(family, n).with_seed(seed)).unwrap()
}

pub fn density(psi: &DVector<C>) -> DMatrix<C> {
    psi * psi.adjoint()
}

/// Noise-averaged generator for temporally white noise of intensity
/// `c_tilde` and spatial kernel `g_of_r` (indexed by `x − x'` mod N):
/// `L(ρ) = −i[H, ρ] − (λ² c̃ / 2) Σ_{x,x'} G(x−x') [A_x, [A_x', ρ]]`.
pub struct Lindblad {
    pub h: DMatrix<C>,
    pub ops: Vec<DMatrix<C>>,
    pub g_of_r: Vec<f64>,
    pub rate: f64,
}

impl Lindblad {
    pub fn new(h: DMatrix<C>, coupling: &SiteOperator, n: usize, g_of_r: Vec<f64>, lambda: f64, c_tilde: f64) -> Self {
        Self {
            h,
            ops: (0..n).map(|x| embed(coupling, x, n)).collect(),
            g_of_r,
            rate: lambda * lambda * c_tilde,
        }
    }

    pub fn apply(&self, rho: &DMatrix<C>) -> DMatrix<C> {
        let n = self.ops.len();
        let comm = |a: &DMatrix<C>, b: &DMatrix<C>| a * b - b * a;
        let mut out = comm(&self.h, rho) * c(0.0, -1.0);
        for x in 0..n {
            for y in 0..n {
                let g = self.g_of_r[(x + n - y) % n];
                if g == 0.0 {
                    continue;
                }
                out -= comm(&self.ops[x], &comm(&self.ops[y], rho)) * c(0.5 * self.rate * g, 0.0);
            }
        }
        out
    }

    pub fn rk4(&self, rho: &DMatrix<C>, dt: f64, steps: usize) -> DMatrix<C> {
        let mut r = rho.clone();
        let h = c(dt, 0.0);
        for _ in 0..steps {
            let k1 = self.apply(&r);
            let k2 = self.apply(&(&r + &k1 * (h * 0.5)));
            let k3 = self.apply(&(&r + &k2 * (h * 0.5)));
            let k4 = self.apply(&(&r + &k3 * h));
            r += (k1 + k2 * c(2.0, 0.0) + k3 * c(2.0, 0.0) + k4) * (h / 6.0);
        }
        r
    }
}

pub fn purity(rho: &DMatrix<C>) -> f64 {
    (rho * rho).trace().re
}

/// Diagonal Ising Hamiltonian `J Σ_x σ_z(x) σ_z(x+1)` on the ring, built densely.
pub fn dense_ising(n: usize, j: f64) -> DMatrix<C> {
    let d = 1 << n;
    let mut h = DMatrix::zeros(d, d);
    let z = SiteOperator::sigma_z();
    for x in 0..n {
        h += embed(&z, x, n) * embed(&z, (x + 1) % n, n) * c(j, 0.0);
    }
    h
}
