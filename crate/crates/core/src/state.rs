//! Dense pure states of a spin-1/2 ring and single-site operators.
//!
//! Basis convention: amplitude index `i` encodes the configuration with bit
//! `x` of `i` set when site `x` is spin-down. `σ_z` has eigenvalue `+1` on
//! spin-up, so `|↑↑…↑⟩` is index 0.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest chain length accepted by the constructors.
pub const MAX_SITES: usize = 20;

const NORM_TOL: f64 = 1e-12;
const HERMITIAN_TOL: f64 = 1e-12;

// Fixed chunk length for parallel reductions; partial sums are combined in
// chunk order so results do not depend on the thread count.
const REDUCE_CHUNK: usize = 1 << 12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// `⟨a|b⟩` with a thread-count independent summation order.
pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= REDUCE_CHUNK {
        return a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    }
    let partial: Vec<Complex64> = a
        .par_chunks(REDUCE_CHUNK)
        .zip(b.par_chunks(REDUCE_CHUNK))
        .map(|(ca, cb)| ca.iter().zip(cb).map(|(x, y)| x.conj() * y).sum())
        .collect();
    partial.into_iter().sum()
}

pub(crate) fn norm_sqr(a: &[Complex64]) -> f64 {
    if a.len() <= REDUCE_CHUNK {
        return a.iter().map(|x| x.norm_sqr()).sum();
    }
    let partial: Vec<f64> = a
        .par_chunks(REDUCE_CHUNK)
        .map(|c| c.iter().map(|x| x.norm_sqr()).sum())
        .collect();
    partial.into_iter().sum()
}

/// Writes `op(site)·src` into `dst`.
pub(crate) fn apply_site_into(
    src: &[Complex64],
    dst: &mut [Complex64],
    m: &[[Complex64; 2]; 2],
    site: usize,
) {
    let mask = 1usize << site;
    for i0 in 0..src.len() {
        if i0 & mask != 0 {
            continue;
        }
        let i1 = i0 | mask;
        let (u, d) = (src[i0], src[i1]);
        dst[i0] = m[0][0] * u + m[0][1] * d;
        dst[i1] = m[1][0] * u + m[1][1] * d;
    }
}

/// A 2×2 complex matrix acting on one site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteOperator {
    /// Row-major entries in the (↑, ↓) basis.
    pub matrix: [[Complex64; 2]; 2],
    pub label: String,
}

impl SiteOperator {
    pub fn new(matrix: [[Complex64; 2]; 2], label: impl Into<String>) -> Self {
        Self {
            matrix,
            label: label.into(),
        }
    }

    pub fn identity() -> Self {
        Self::new([[ONE, ZERO], [ZERO, ONE]], "id")
    }

    pub fn sigma_x() -> Self {
        Self::new([[ZERO, ONE], [ONE, ZERO]], "sx")
    }

    pub fn sigma_y() -> Self {
        Self::new([[ZERO, -I], [I, ZERO]], "sy")
    }

    pub fn sigma_z() -> Self {
        Self::new([[ONE, ZERO], [ZERO, -ONE]], "sz")
    }

    /// `c_x σ_x + c_y σ_y + c_z σ_z`.
    pub fn pauli_combination(c: [Complex64; 3], label: impl Into<String>) -> Self {
        let [cx, cy, cz] = c;
        Self::new(
            [[cz, cx - I * cy], [cx + I * cy, -cz]],
            label.into(),
        )
    }

    /// Spin component `n·σ` along a real direction (normalized internally).
    pub fn spin_along(n: [f64; 3]) -> Self {
        let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        let c = n.map(|v| Complex64::new(v / len, 0.0));
        Self::pauli_combination(c, "axis")
    }

    /// Looks up a named Pauli operator (`sx`, `sy`, `sz`, `id`).
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "sx" => Ok(Self::sigma_x()),
            "sy" => Ok(Self::sigma_y()),
            "sz" => Ok(Self::sigma_z()),
            "id" => Ok(Self::identity()),
            other => Err(Error::InvalidArgument(format!(
                "unknown site operator '{other}'"
            ))),
        }
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.matrix;
        Self::new(
            [
                [m[0][0].conj(), m[1][0].conj()],
                [m[0][1].conj(), m[1][1].conj()],
            ],
            format!("{}^dag", self.label),
        )
    }

    pub fn is_hermitian(&self) -> bool {
        let m = &self.matrix;
        (m[0][0].im).abs() <= HERMITIAN_TOL
            && (m[1][1].im).abs() <= HERMITIAN_TOL
            && (m[0][1] - m[1][0].conj()).norm() <= HERMITIAN_TOL
    }

    pub fn ensure_hermitian(&self) -> Result<()> {
        if self.is_hermitian() {
            Ok(())
        } else {
            Err(Error::NotHermitian(self.label.clone()))
        }
    }

    pub fn is_diagonal(&self) -> bool {
        self.matrix[0][1] == ZERO && self.matrix[1][0] == ZERO
    }

    /// Coefficients `(c_0, c_x, c_y, c_z)` in the Pauli basis.
    pub fn pauli_coefficients(&self) -> [Complex64; 4] {
        let m = &self.matrix;
        [
            (m[0][0] + m[1][1]) * 0.5,
            (m[0][1] + m[1][0]) * 0.5,
            (m[1][0] - m[0][1]) * (-I * 0.5),
            (m[0][0] - m[1][1]) * 0.5,
        ]
    }
}

/// Normalized pure state of `n_sites` spin-1/2 sites.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinState {
    n_sites: usize,
    amplitudes: Vec<Complex64>,
}

/// `op(site)|Ψ⟩` together with its norm; not normalized in general.
#[derive(Debug, Clone)]
pub struct AppliedState {
    pub n_sites: usize,
    pub amplitudes: Vec<Complex64>,
    pub norm: f64,
}

impl AppliedState {
    pub fn normalized(self) -> Result<SpinState> {
        SpinState::from_unnormalized(self.n_sites, self.amplitudes)
    }
}

fn check_size(n_sites: usize) -> Result<()> {
    if n_sites == 0 || n_sites > MAX_SITES {
        return Err(Error::InvalidSize(n_sites));
    }
    Ok(())
}

impl SpinState {
    /// Accepts an amplitude vector that is already normalized to 1e-12.
    pub fn from_amplitudes(n_sites: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        check_size(n_sites)?;
        if amplitudes.len() != 1 << n_sites {
            return Err(Error::LengthMismatch {
                expected: 1 << n_sites,
                got: amplitudes.len(),
            });
        }
        let nsq = norm_sqr(&amplitudes);
        if (nsq - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(nsq));
        }
        Ok(Self {
            n_sites,
            amplitudes,
        })
    }

    pub fn from_unnormalized(n_sites: usize, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        check_size(n_sites)?;
        if amplitudes.len() != 1 << n_sites {
            return Err(Error::LengthMismatch {
                expected: 1 << n_sites,
                got: amplitudes.len(),
            });
        }
        let nsq = norm_sqr(&amplitudes);
        if !(nsq > 1e-300) || !nsq.is_finite() {
            return Err(Error::NotNormalized(nsq));
        }
        let scale = 1.0 / nsq.sqrt();
        amplitudes.iter_mut().for_each(|a| *a *= scale);
        Ok(Self {
            n_sites,
            amplitudes,
        })
    }

    /// Used by code paths that preserve the norm by construction (unitary steps).
    pub(crate) fn from_raw(n_sites: usize, amplitudes: Vec<Complex64>) -> Self {
        debug_assert_eq!(amplitudes.len(), 1 << n_sites);
        Self {
            n_sites,
            amplitudes,
        }
    }

    /// Computational basis state with the given bit pattern (bit x set = ↓ at x).
    pub fn basis(n_sites: usize, index: usize) -> Result<Self> {
        check_size(n_sites)?;
        if index >= 1 << n_sites {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for {n_sites} sites"
            )));
        }
        let mut amps = vec![ZERO; 1 << n_sites];
        amps[index] = ONE;
        Ok(Self::from_raw(n_sites, amps))
    }

    /// Tensor product of single-site spinors `(up, down)`; each is normalized.
    pub fn product(sites: &[[Complex64; 2]]) -> Result<Self> {
        let n = sites.len();
        check_size(n)?;
        let spinors: Vec<[Complex64; 2]> = sites
            .iter()
            .map(|s| {
                let nrm = (s[0].norm_sqr() + s[1].norm_sqr()).sqrt();
                if nrm > 0.0 {
                    Ok([s[0] / nrm, s[1] / nrm])
                } else {
                    Err(Error::InvalidArgument("zero spinor".into()))
                }
            })
            .collect::<Result<_>>()?;
        let amps = (0..1usize << n)
            .map(|i| {
                spinors
                    .iter()
                    .enumerate()
                    .fold(ONE, |acc, (x, s)| acc * s[(i >> x) & 1])
            })
            .collect();
        Ok(Self::from_raw(n, amps))
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Volume of the ring; lattice spacing is 1 so this equals `n_sites`.
    pub fn volume(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }

    pub fn inner(&self, other: &SpinState) -> Complex64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    pub fn fidelity(&self, other: &SpinState) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub(crate) fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n_sites {
            return Err(Error::SiteOutOfRange {
                site,
                n_sites: self.n_sites,
            });
        }
        Ok(())
    }

    /// Applies the same single-site unitary at every site.
    pub fn rotate_all(&self, u: &SiteOperator) -> SpinState {
        let mut cur = self.amplitudes.clone();
        let mut buf = vec![ZERO; cur.len()];
        for x in 0..self.n_sites {
            apply_site_into(&cur, &mut buf, &u.matrix, x);
            std::mem::swap(&mut cur, &mut buf);
        }
        SpinState::from_raw(self.n_sites, cur)
    }

    /// Little-endian binary form: `u64` site count, then interleaved re/im `f64`s.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 16 * self.dim());
        out.extend_from_slice(&(self.n_sites as u64).to_le_bytes());
        for a in &self.amplitudes {
            out.extend_from_slice(&a.re.to_le_bytes());
            out.extend_from_slice(&a.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::Malformed("missing header".into()));
        }
        let n = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")) as usize;
        check_size(n)?;
        let body = &bytes[8..];
        if body.len() != 16 << n {
            return Err(Error::Malformed(format!(
                "expected {} payload bytes, found {}",
                16usize << n,
                body.len()
            )));
        }
        let amps = body
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                Complex64::new(re, im)
            })
            .collect();
        Self::from_amplitudes(n, amps)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&SerializedState::from(self)).expect("state serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: SerializedState =
            serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        s.try_into()
    }
}

/// JSON form: `{"n_sites": N, "amplitudes": [re0, im0, re1, im1, ...]}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SerializedState {
    pub n_sites: usize,
    pub amplitudes: Vec<f64>,
}

impl From<&SpinState> for SerializedState {
    fn from(s: &SpinState) -> Self {
        Self {
            n_sites: s.n_sites,
            amplitudes: s.amplitudes.iter().flat_map(|a| [a.re, a.im]).collect(),
        }
    }
}

impl TryFrom<SerializedState> for SpinState {
    type Error = Error;

    fn try_from(s: SerializedState) -> Result<Self> {
        if s.amplitudes.len() % 2 != 0 {
            return Err(Error::Malformed("odd number of floats".into()));
        }
        let amps = s
            .amplitudes
            .chunks_exact(2)
            .map(|c| Complex64::new(c[0], c[1]))
            .collect();
        SpinState::from_amplitudes(s.n_sites, amps)
    }
}

/// `Â_k = Σ_x â(x) e^{-ikx}` with `k = 2πm/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveOperator {
    pub base: SiteOperator,
    index: usize,
    n_sites: usize,
}

impl AdditiveOperator {
    pub fn from_index(base: SiteOperator, index: usize, n_sites: usize) -> Self {
        Self {
            base,
            index: index % n_sites,
            n_sites,
        }
    }

    /// Snaps `k` to the grid `2πm/N`, rejecting values more than 1e-9 away.
    pub fn new(base: SiteOperator, k: f64, n_sites: usize) -> Result<Self> {
        check_size(n_sites)?;
        let m = k * n_sites as f64 / (2.0 * PI);
        let mr = m.round();
        if (m - mr).abs() > 1e-9 {
            return Err(Error::OffGrid { k, n_sites });
        }
        let idx = (mr as i64).rem_euclid(n_sites as i64) as usize;
        Ok(Self::from_index(base, idx, n_sites))
    }

    /// Staggered magnetization `M_π = Σ_x (-1)^x σ_z(x)`; needs even `N`.
    pub fn staggered_magnetization(n_sites: usize) -> Result<Self> {
        if n_sites % 2 != 0 {
            return Err(Error::OddSites("staggered magnetization"));
        }
        Ok(Self::from_index(SiteOperator::sigma_z(), n_sites / 2, n_sites))
    }

    pub fn grid_index(&self) -> usize {
        self.index
    }

    pub fn wavevector(&self) -> f64 {
        wavevector(self.index, self.n_sites)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// `e^{-ikx}`, exact at the real points of the grid.
    pub fn phase(&self, x: usize) -> Complex64 {
        grid_phase(self.index * x, self.n_sites).conj()
    }
}

pub fn wavevector(index: usize, n_sites: usize) -> f64 {
    2.0 * PI * index as f64 / n_sites as f64
}

/// `e^{2πi·j/N}`, with the multiples of quarter turns returned exactly.
pub(crate) fn grid_phase(j: usize, n: usize) -> Complex64 {
    let j = j % n;
    if (4 * j) % n == 0 {
        return match 4 * j / n {
            0 => ONE,
            1 => I,
            2 => -ONE,
            _ => -I,
        };
    }
    let t = 2.0 * PI * j as f64 / n as f64;
    Complex64::new(t.cos(), t.sin())
}

/// `op(site)|Ψ⟩` and its norm.
pub fn apply_site_operator(state: &SpinState, op: &SiteOperator, site: usize) -> Result<AppliedState> {
    state.check_site(site)?;
    let mut out = vec![ZERO; state.dim()];
    apply_site_into(&state.amplitudes, &mut out, &op.matrix, site);
    let norm = norm_sqr(&out).sqrt();
    Ok(AppliedState {
        n_sites: state.n_sites,
        amplitudes: out,
        norm,
    })
}

/// `⟨Ψ| op_1(s_1) op_2(s_2) … op_n(s_n) |Ψ⟩`; the last listed operator acts first.
pub fn expectation(state: &SpinState, ops: &[(SiteOperator, usize)]) -> Result<Complex64> {
    for (_, s) in ops {
        state.check_site(*s)?;
    }
    let mut cur = state.amplitudes.clone();
    let mut buf = vec![ZERO; cur.len()];
    for (op, site) in ops.iter().rev() {
        apply_site_into(&cur, &mut buf, &op.matrix, *site);
        std::mem::swap(&mut cur, &mut buf);
    }
    Ok(inner(&state.amplitudes, &cur))
}

/// `⟨â(x) b̂(y)⟩ − ⟨â(x)⟩⟨b̂(y)⟩`.
pub fn connected_correlator(
    state: &SpinState,
    a: &SiteOperator,
    x: usize,
    b: &SiteOperator,
    y: usize,
) -> Result<Complex64> {
    if x == y {
        return Err(Error::InvalidArgument(
            "connected correlator needs distinct sites".into(),
        ));
    }
    let ab = expectation(state, &[(a.clone(), x), (b.clone(), y)])?;
    let ea = expectation(state, &[(a.clone(), x)])?;
    let eb = expectation(state, &[(b.clone(), y)])?;
    Ok(ab - ea * eb)
}

/// `⟨Ψ|δÂ_k† δÂ_k|Ψ⟩` evaluated from the vector `Â_k|Ψ⟩`.
pub fn additive_fluctuation(state: &SpinState, addop: &AdditiveOperator) -> Result<f64> {
    if addop.n_sites != state.n_sites {
        return Err(Error::InvalidArgument(format!(
            "operator built for {} sites applied to {} sites",
            addop.n_sites, state.n_sites
        )));
    }
    let n = state.n_sites;
    let terms: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut v = vec![ZERO; state.dim()];
            apply_site_into(&state.amplitudes, &mut v, &addop.base.matrix, x);
            let ph = addop.phase(x);
            v.iter_mut().for_each(|a| *a *= ph);
            v
        })
        .collect();
    let mut phi = vec![ZERO; state.dim()];
    for t in &terms {
        phi.iter_mut().zip(t).for_each(|(p, v)| *p += v);
    }
    let mean = inner(&state.amplitudes, &phi);
    Ok((norm_sqr(&phi) - mean.norm_sqr()).max(0.0))
}
