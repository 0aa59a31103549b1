//! Unitary evolution of one noise realization and seeded trajectory ensembles.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::noise::{sample_noise_field_with, NoiseField, NoiseModel};
use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::state::{apply_site_into, SiteOperator, SpinState};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest `dt·‖K‖` accepted by the Taylor step.
const TAYLOR_MAX_ARG: f64 = 4.0;
const TAYLOR_MAX_TERMS: usize = 80;
const TAYLOR_TOL: f64 = 1e-16;

/// Largest chain for which a dense Hamiltonian is accepted.
pub const DENSE_MAX_SITES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum Hamiltonian {
    /// Diagonal in the z basis.
    Diagonal(Vec<f64>),
    Dense { n_sites: usize, matrix: DMatrix<Complex64> },
}

impl Hamiltonian {
    pub fn zero(n_sites: usize) -> Self {
        Self::Diagonal(vec![0.0; 1 << n_sites])
    }

    pub fn dense(n_sites: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        if n_sites > DENSE_MAX_SITES {
            return Err(Error::InvalidArgument(format!(
                "dense Hamiltonians are limited to {DENSE_MAX_SITES} sites"
            )));
        }
        let d = 1usize << n_sites;
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::LengthMismatch {
                expected: d,
                got: matrix.nrows(),
            });
        }
        let herm_err = (&matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm_err > 1e-12 {
            return Err(Error::NotHermitian("hamiltonian".into()));
        }
        Ok(Self::Dense { n_sites, matrix })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Diagonal(d) => d.len(),
            Self::Dense { matrix, .. } => matrix.nrows(),
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Self::Diagonal(d) if d.iter().all(|&e| e == 0.0))
    }

    /// Bound on the operator norm (max row sum).
    fn norm_bound(&self) -> f64 {
        match self {
            Self::Diagonal(d) => d.iter().fold(0.0, |m, e| m.max(e.abs())),
            Self::Dense { matrix, .. } => matrix
                .row_iter()
                .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
                .fold(0.0, f64::max),
        }
    }

    fn apply(&self, src: &[Complex64], dst: &mut [Complex64]) {
        match self {
            Self::Diagonal(d) => {
                for ((o, s), e) in dst.iter_mut().zip(src).zip(d) {
                    *o = s * e;
                }
            }
            Self::Dense { matrix, .. } => {
                for (r, o) in dst.iter_mut().enumerate() {
                    *o = matrix.row(r).iter().zip(src).map(|(a, b)| a * b).sum();
                }
            }
        }
    }

    pub fn energy(&self, state: &SpinState) -> f64 {
        let psi = state.amplitudes();
        let mut hpsi = vec![ZERO; psi.len()];
        self.apply(psi, &mut hpsi);
        crate::state::inner(psi, &hpsi).re
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMethod {
    /// H and the coupling are both diagonal: per-amplitude phases.
    DiagonalPhase,
    /// H = 0: product of exact single-site exponentials.
    SiteProduct,
    /// General case: Taylor series of the step propagator applied to the state.
    Taylor,
}

pub fn step_method(h: &Hamiltonian, coupling: &SiteOperator) -> StepMethod {
    match h {
        Hamiltonian::Diagonal(_) if coupling.is_diagonal() => StepMethod::DiagonalPhase,
        _ if h.is_zero() => StepMethod::SiteProduct,
        _ => StepMethod::Taylor,
    }
}

/// `exp(−iθ â)` for Hermitian `â = c₀ + c·σ`.
pub fn site_exponential(op: &SiteOperator, theta: f64) -> [[Complex64; 2]; 2] {
    let p = op.pauli_coefficients();
    let c0 = p[0].re;
    let c = [p[1].re, p[2].re, p[3].re];
    let len = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    let global = Complex64::from_polar(1.0, -theta * c0);
    let (cs, sn) = ((theta * len).cos(), (theta * len).sin());
    let n = if len > 0.0 { c.map(|v| v / len) } else { [0.0; 3] };
    let mi = Complex64::new(0.0, -sn);
    [
        [
            global * (Complex64::new(cs, 0.0) + mi * n[2]),
            global * mi * Complex64::new(n[0], -n[1]),
        ],
        [
            global * mi * Complex64::new(n[0], n[1]),
            global * (Complex64::new(cs, 0.0) - mi * n[2]),
        ],
    ]
}

fn op_norm(op: &SiteOperator) -> f64 {
    let p = op.pauli_coefficients();
    p[0].norm() + (p[1].norm_sqr() + p[2].norm_sqr() + p[3].norm_sqr()).sqrt()
}

struct Stepper<'a> {
    n_sites: usize,
    h: &'a Hamiltonian,
    coupling: &'a SiteOperator,
    lambda: f64,
    method: StepMethod,
    scratch: Vec<Complex64>,
    term: Vec<Complex64>,
    next: Vec<Complex64>,
}

impl<'a> Stepper<'a> {
    fn new(n_sites: usize, h: &'a Hamiltonian, noise: &'a NoiseModel) -> Self {
        let d = 1usize << n_sites;
        Self {
            n_sites,
            h,
            coupling: &noise.coupling_op,
            lambda: noise.lambda,
            method: step_method(h, &noise.coupling_op),
            scratch: vec![ZERO; d],
            term: vec![ZERO; d],
            next: vec![ZERO; d],
        }
    }

    /// `K v` with `K = H + λ Σ_x f_x â(x)`.
    fn generator(&mut self, f: &[f64], src: &[Complex64], dst: &mut [Complex64]) {
        self.h.apply(src, dst);
        for (x, &fx) in f.iter().enumerate() {
            if fx == 0.0 {
                continue;
            }
            apply_site_into(src, &mut self.scratch, &self.coupling.matrix, x);
            let s = self.lambda * fx;
            dst.iter_mut().zip(&self.scratch).for_each(|(o, v)| *o += v * s);
        }
    }

    fn step(&mut self, psi: &mut Vec<Complex64>, f: &[f64], dt: f64) -> Result<()> {
        match self.method {
            StepMethod::DiagonalPhase => {
                let Hamiltonian::Diagonal(diag) = self.h else { unreachable!() };
                let d0 = self.coupling.matrix[0][0].re;
                let d1 = self.coupling.matrix[1][1].re;
                let base: f64 = f.iter().sum::<f64>() * d0;
                for (i, a) in psi.iter_mut().enumerate() {
                    let mut e = base;
                    for (x, &fx) in f.iter().enumerate() {
                        if (i >> x) & 1 == 1 {
                            e += fx * (d1 - d0);
                        }
                    }
                    let phase = -(diag[i] + self.lambda * e) * dt;
                    *a *= Complex64::from_polar(1.0, phase);
                }
            }
            StepMethod::SiteProduct => {
                for (x, &fx) in f.iter().enumerate() {
                    let u = site_exponential(self.coupling, self.lambda * fx * dt);
                    apply_site_into(psi, &mut self.scratch, &u, x);
                    std::mem::swap(psi, &mut self.scratch);
                }
            }
            StepMethod::Taylor => {
                let bound = self.h.norm_bound()
                    + self.lambda * op_norm(self.coupling) * f.iter().map(|v| v.abs()).sum::<f64>();
                if dt * bound > TAYLOR_MAX_ARG {
                    return Err(Error::NonConvergent {
                        suggested_dt: 0.5 * TAYLOR_MAX_ARG / bound,
                    });
                }
                self.term.copy_from_slice(psi);
                let mut converged = false;
                for n in 1..=TAYLOR_MAX_TERMS {
                    let mut next = std::mem::take(&mut self.next);
                    let term = std::mem::take(&mut self.term);
                    self.generator(f, &term, &mut next);
                    let scale = Complex64::new(0.0, -dt / n as f64);
                    next.iter_mut().for_each(|v| *v *= scale);
                    psi.iter_mut().zip(&next).for_each(|(p, t)| *p += t);
                    let tn = crate::state::norm_sqr(&next).sqrt();
                    self.term = next;
                    self.next = term;
                    if tn < TAYLOR_TOL {
                        converged = true;
                        break;
                    }
                }
                if !converged {
                    return Err(Error::NonConvergent {
                        suggested_dt: 0.5 * dt,
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpinState>,
}

/// Evolves `state` through one noise realization, recording the initial
/// state and every `record_every`-th step.
pub fn evolve_trajectory(
    state: &SpinState,
    hamiltonian: &Hamiltonian,
    noise: &NoiseModel,
    field: &NoiseField,
    record_every: usize,
) -> Result<Trajectory> {
    let n = state.n_sites();
    if field.n_sites != n || hamiltonian.dim() != state.dim() {
        return Err(Error::InvalidArgument(
            "state, Hamiltonian and noise field sizes differ".into(),
        ));
    }
    let stride = record_every.max(1);
    let mut stepper = Stepper::new(n, hamiltonian, noise);
    let mut psi = state.amplitudes().to_vec();
    let mut times = vec![0.0];
    let mut states = vec![state.clone()];
    for j in 0..field.n_steps {
        stepper.step(&mut psi, field.step(j), field.dt)?;
        if (j + 1) % stride == 0 {
            times.push((j + 1) as f64 * field.dt);
            states.push(SpinState::from_raw(stepper.n_sites, psi.clone()));
        }
    }
    Ok(Trajectory { times, states })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub dt: f64,
    pub n_steps: usize,
    pub record_every: usize,
    pub n_trajectories: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub times: Vec<f64>,
    /// `trajectories[i][t]`
    pub trajectories: Vec<Vec<SpinState>>,
}

/// Runs independent trajectories; trajectory `i` uses seed
/// `derive_seed(master_seed, i)`, so output is independent of thread count.
pub fn run_ensemble(
    state: &SpinState,
    hamiltonian: &Hamiltonian,
    noise: &NoiseModel,
    spec: &EnsembleSpec,
) -> Result<Ensemble> {
    noise.validate_for(state.n_sites())?;
    let runs: Vec<Result<Trajectory>> = (0..spec.n_trajectories)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(spec.master_seed, i as u64);
            let field =
                sample_noise_field_with(noise, state.n_sites(), spec.dt, spec.n_steps, &mut rng)?;
            evolve_trajectory(state, hamiltonian, noise, &field, spec.record_every)
        })
        .collect();
    let mut times = Vec::new();
    let mut trajectories = Vec::with_capacity(runs.len());
    for r in runs {
        let t = r?;
        times = t.times;
        trajectories.push(t.states);
    }
    Ok(Ensemble {
        times,
        trajectories,
    })
}

/// Ensemble mean and standard error of `Re⟨op(site)⟩` at every recorded time.
pub fn ensemble_expectation(ens: &Ensemble, op: &SiteOperator, site: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = ens.trajectories.len();
    if m < 2 {
        return Err(Error::InsufficientData("need at least 2 trajectories".into()));
    }
    let per_traj: Vec<Vec<f64>> = ens
        .trajectories
        .par_iter()
        .map(|traj| {
            traj.iter()
                .map(|s| {
                    crate::state::expectation(s, &[(op.clone(), site)]).map(|v| v.re)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let nt = ens.times.len();
    let mut mean = vec![0.0; nt];
    let mut se = vec![0.0; nt];
    for t in 0..nt {
        let mu = per_traj.iter().map(|v| v[t]).sum::<f64>() / m as f64;
        let var = per_traj.iter().map(|v| (v[t] - mu).powi(2)).sum::<f64>() / (m as f64 - 1.0);
        mean[t] = mu;
        se[t] = (var / m as f64).sqrt();
    }
    Ok((mean, se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoherence::noise::{SpatialKernel, TemporalCorrelation};

    #[test]
    fn site_exponential_is_unitary_and_matches_series() {
        let op = SiteOperator::spin_along([0.3, -0.4, 0.8]);
        let u = site_exponential(&op, 0.37);
        // U U† = 1
        for r in 0..2 {
            for c in 0..2 {
                let v: Complex64 = (0..2).map(|k| u[r][k] * u[c][k].conj()).sum();
                let e = if r == c { 1.0 } else { 0.0 };
                assert!((v - Complex64::new(e, 0.0)).norm() < 1e-14);
            }
        }
        // compare against a long Taylor series of exp(−iθA)
        let a = op.matrix;
        let mut term = [[Complex64::new(1.0, 0.0), ZERO], [ZERO, Complex64::new(1.0, 0.0)]];
        let mut sum = term;
        for n in 1..40 {
            let mut nt = [[ZERO; 2]; 2];
            for r in 0..2 {
                for c in 0..2 {
                    nt[r][c] = (0..2).map(|k| term[r][k] * a[k][c]).sum::<Complex64>()
                        * Complex64::new(0.0, -0.37 / n as f64);
                }
            }
            term = nt;
            for r in 0..2 {
                for c in 0..2 {
                    sum[r][c] += term[r][c];
                }
            }
        }
        for r in 0..2 {
            for c in 0..2 {
                assert!((sum[r][c] - u[r][c]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn method_selection() {
        let z = SiteOperator::sigma_z();
        let x = SiteOperator::sigma_x();
        let h = Hamiltonian::Diagonal(vec![1.0, -1.0, -1.0, 1.0]);
        assert_eq!(step_method(&h, &z), StepMethod::DiagonalPhase);
        assert_eq!(step_method(&h, &x), StepMethod::Taylor);
        assert_eq!(step_method(&Hamiltonian::zero(2), &x), StepMethod::SiteProduct);
    }

    #[test]
    fn large_steps_report_suggested_dt() {
        let noise = NoiseModel::new(
            1.0,
            SiteOperator::sigma_x(),
            SpatialKernel::White,
            TemporalCorrelation::White { intensity: 1.0 },
        )
        .unwrap();
        let h = Hamiltonian::Diagonal(crate::models::ising_afm_hamiltonian(4, 1.0).unwrap());
        let field = NoiseField {
            n_sites: 4,
            dt: 2.0,
            n_steps: 1,
            values: vec![1.0; 4],
        };
        let s = SpinState::basis(4, 0).unwrap();
        match evolve_trajectory(&s, &h, &noise, &field, 1) {
            Err(Error::NonConvergent { suggested_dt }) => assert!(suggested_dt < 2.0),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn dense_hamiltonian_checks() {
        let m = DMatrix::from_element(4, 4, Complex64::new(0.0, 1.0));
        assert!(Hamiltonian::dense(2, m).is_err());
        let m = DMatrix::from_element(4, 4, Complex64::new(1.0, 0.0));
        assert!(Hamiltonian::dense(2, m.clone()).is_ok());
        assert!(Hamiltonian::dense(3, m).is_err());
    }
}
