//! Library results against dense Kronecker-product references.

mod common;

use common::*;
use macrostab::cluster::normalized_correlation;
use macrostab::correlations::{single_site_rdm, two_site_rdm, Correlations};
use macrostab::decoherence::{
    ensemble_purity, gamma_formula, run_ensemble, EnsembleSpec, Hamiltonian, NoiseModel, SpatialKernel,
    TemporalCorrelation,
};
use macrostab::fluctuation::{correlation_gram, max_fluctuation};
use macrostab::models::{ising_afm_hamiltonian, ModelFamily};
use macrostab::state::{additive_fluctuation, connected_correlator, expectation, wavevector};
use macrostab::{AdditiveOperator, SiteOperator, SpinState};
use nalgebra::{DMatrix, SymmetricEigen};
use std::f64::consts::PI;

fn suite(n: usize) -> Vec<SpinState> {
    let mut v = vec![
        state(ModelFamily::ProductZ, n, 0),
        state(ModelFamily::ProductX, n, 0),
        state(ModelFamily::SingletPairProduct, n, 0),
        state(ModelFamily::RandomProduct, n, 3),
        state(ModelFamily::RandomState, n, 4),
        state(ModelFamily::RandomState, n, 5),
    ];
    if n % 2 == 0 {
        v.push(state(ModelFamily::Cat, n, 0));
        v.push(state(ModelFamily::NeelPlus, n, 0));
    }
    v
}

fn mixed_op() -> SiteOperator {
    SiteOperator::pauli_combination([c(0.3, 0.0), c(-0.7, 0.2), c(0.1, -0.4)], "mixed")
}

#[test]
fn expectation_and_correlator_match_dense() {
    for n in [2, 3, 4, 5] {
        for s in suite(n) {
            let psi = ket(&s);
            let a = mixed_op();
            let b = SiteOperator::sigma_y();
            for x in 0..n {
                let dense = expect(&psi, &embed(&a, x, n));
                let lib = expectation(&s, &[(a.clone(), x)]).unwrap();
                assert!((dense - lib).norm() < 1e-12);
                for y in 0..n {
                    let ab = embed(&a, x, n) * embed(&b, y, n);
                    let lib = expectation(&s, &[(a.clone(), x), (b.clone(), y)]).unwrap();
                    assert!((expect(&psi, &ab) - lib).norm() < 1e-12, "n={n} x={x} y={y}");
                    if x != y {
                        let conn = expect(&psi, &ab) - expect(&psi, &embed(&a, x, n)) * expect(&psi, &embed(&b, y, n));
                        let lib = connected_correlator(&s, &a, x, &b, y).unwrap();
                        assert!((conn - lib).norm() < 1e-12);
                    }
                }
            }
        }
    }
}

#[test]
fn reduced_density_matrices_match_dense_expectations() {
    let n = 4;
    for s in suite(n) {
        let psi = ket(&s);
        let corr = Correlations::compute(&s);
        for x in 0..n {
            let r1 = single_site_rdm(&s, x).unwrap();
            let p = paulis();
            for (a, op) in p.iter().enumerate() {
                let dense = expect(&psi, &embed(op, x, n)).re;
                let tr: C = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| r1[i][j] * op.matrix[j][i]).sum();
                assert!((tr.re - dense).abs() < 1e-12);
                assert!((corr.bloch(x)[a] - dense).abs() < 1e-12);
            }
            for y in 0..n {
                if y == x {
                    continue;
                }
                assert!(two_site_rdm(&s, x, y).is_ok());
                let tp = corr.two_point(x, y);
                for a in 0..3 {
                    for b in 0..3 {
                        let dense = expect(&psi, &(embed(&p[a], x, n) * embed(&p[b], y, n))).re;
                        assert!((tp[a][b] - dense).abs() < 1e-12);
                    }
                }
            }
        }
    }
}

#[test]
fn additive_fluctuation_matches_dense() {
    for n in [3, 4, 6] {
        for s in suite(n) {
            let psi = ket(&s);
            for m in 0..n {
                let k = wavevector(m, n);
                for op in [mixed_op(), SiteOperator::sigma_z()] {
                    let lib = additive_fluctuation(&s, &AdditiveOperator::from_index(op.clone(), m, n)).unwrap();
                    let dense = fluctuation(&psi, &additive(&op, k, n));
                    assert!((lib - dense).abs() < 1e-10 * dense.abs().max(1.0), "n={n} m={m}: {lib} vs {dense}");
                }
            }
        }
    }
}

#[test]
fn gram_matches_dense_and_maximizer_attains_it() {
    for n in [3, 4, 6] {
        for s in suite(n) {
            let spec = max_fluctuation(&s);
            for (m, kf) in spec.per_k.iter().enumerate() {
                let k = wavevector(m, n);
                let dense = dense_fluct_matrix(&s, k);
                let gram = correlation_gram(&s, k).unwrap();
                for a in 0..3 {
                    for b in 0..3 {
                        assert!((gram[(a, b)].re - dense[(a, b)]).abs() < 1e-10);
                    }
                }
                let top = SymmetricEigen::new(dense).eigenvalues.max();
                assert!((kf.max_fluct - top).abs() < 1e-9 * top.max(1.0), "n={n} m={m}");
                // the reported operator really has that fluctuation
                let op = kf.operator();
                let attained = fluctuation(&ket(&s), &additive(&op, k, n));
                assert!((attained - kf.max_fluct).abs() < 1e-9 * top.max(1.0));
            }
        }
    }
}

#[test]
fn maximum_beats_sampled_directions() {
    // direct search over Hermitian single-site operators on a direction grid
    let n = 4;
    let golden = PI * (3.0 - 5f64.sqrt());
    for s in suite(n) {
        let psi = ket(&s);
        let best = max_fluctuation(&s).max_fluct();
        let mut sampled: f64 = 0.0;
        for m in 0..n {
            let k = wavevector(m, n);
            let ops: Vec<DMatrix<C>> = paulis().iter().map(|p| additive(p, k, n)).collect();
            for i in 0..400 {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / 400.0;
                let r = (1.0 - z * z).sqrt();
                let u = [r * (golden * i as f64).cos(), r * (golden * i as f64).sin(), z];
                let a = &ops[0] * c(u[0], 0.0) + &ops[1] * c(u[1], 0.0) + &ops[2] * c(u[2], 0.0);
                sampled = sampled.max(fluctuation(&psi, &a));
            }
        }
        assert!(sampled <= best + 1e-9, "sampled {sampled} > {best}");
        assert!(sampled >= 0.97 * best - 1e-9, "grid far below maximum: {sampled} vs {best}");
    }
}

#[test]
fn normalized_correlation_matches_direction_search() {
    // sup over unit u, v of |uᵀ M v| / sqrt(uᵀ C_x u · vᵀ C_y v), brute-forced on
    // a direction grid from dense expectations
    let n = 4;
    let p = paulis();
    let golden = PI * (3.0 - 5f64.sqrt());
    let dirs: Vec<[f64; 3]> = (0..300)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / 300.0;
            let r = (1.0 - z * z).sqrt();
            [r * (golden * i as f64).cos(), r * (golden * i as f64).sin(), z]
        })
        .collect();
    for s in [
        state(ModelFamily::RandomState, n, 11),
        state(ModelFamily::RandomState, n, 12),
        state(ModelFamily::SingletPairProduct, n, 0),
    ] {
        let psi = ket(&s);
        let mean = |x: usize| -> [f64; 3] { [0, 1, 2].map(|a| expect(&psi, &embed(&p[a], x, n)).re) };
        for (x, y) in [(0, 1), (0, 2), (1, 3)] {
            let (mx, my) = (mean(x), mean(y));
            let m: [[f64; 3]; 3] = [0, 1, 2].map(|a| {
                [0, 1, 2].map(|b| expect(&psi, &(embed(&p[a], x, n) * embed(&p[b], y, n))).re - mx[a] * my[b])
            });
            let var = |r: &[f64; 3], u: &[f64; 3]| {
                let d = u[0] * r[0] + u[1] * r[1] + u[2] * r[2];
                1.0 - d * d
            };
            let mut best: f64 = 0.0;
            for u in &dirs {
                let vu = var(&mx, u);
                if vu < 1e-8 {
                    continue;
                }
                for v in &dirs {
                    let vv = var(&my, v);
                    if vv < 1e-8 {
                        continue;
                    }
                    let mut cov = 0.0;
                    for a in 0..3 {
                        for b in 0..3 {
                            cov += u[a] * m[a][b] * v[b];
                        }
                    }
                    best = best.max(cov.abs() / (vu * vv).sqrt());
                }
            }
            let lib = normalized_correlation(&s, x, y).unwrap();
            assert!(best <= lib + 1e-9, "({x},{y}) sampled {best} above {lib}");
            assert!(best >= lib - 0.05, "({x},{y}) sampled {best} far below {lib}");
        }
    }
}

fn kernel_on_ring(kernel: &SpatialKernel, n: usize) -> Vec<f64> {
    (0..n)
        .map(|r| {
            let d = r.min(n - r);
            match kernel {
                SpatialKernel::White => (d == 0) as u8 as f64,
                SpatialKernel::Uniform => 1.0,
                SpatialKernel::Staggered => if r % 2 == 0 { 1.0 } else { -1.0 },
                SpatialKernel::Custom { values } => values.get(d).copied().unwrap_or(0.0),
            }
        })
        .collect()
}

#[test]
fn gamma_formula_equals_initial_purity_loss_rate() {
    // −½ d/dt ln Tr ρ² at t = 0 equals −Tr(ρ L ρ) for pure ρ
    let kernels = [
        SpatialKernel::White,
        SpatialKernel::Uniform,
        SpatialKernel::Staggered,
        SpatialKernel::Custom { values: vec![1.0, 0.4] },
    ];
    let temporal = [
        TemporalCorrelation::White { intensity: 0.7 },
        TemporalCorrelation::Ou { variance: 2.0, tau_c: 0.3 },
    ];
    for n in [2, 4] {
        for s in suite(n) {
            let rho = density(&ket(&s));
            for kernel in &kernels {
                for t in &temporal {
                    for op in [SiteOperator::sigma_z(), mixed_op().hermitian_part()] {
                        let noise = NoiseModel::new(0.3, op.clone(), kernel.clone(), t.clone()).unwrap();
                        let lind = Lindblad::new(
                            dense_ising(n, 1.0),
                            &op,
                            n,
                            kernel_on_ring(kernel, n),
                            0.3,
                            t.intensity(),
                        );
                        let oracle = -(&rho * lind.apply(&rho)).trace().re;
                        let lib = gamma_formula(&s, &noise).unwrap();
                        assert!((lib - oracle).abs() < 1e-10, "n={n} {kernel:?} {t:?}: {lib} vs {oracle}");
                    }
                }
            }
        }
    }
}

trait HermitianPart {
    fn hermitian_part(&self) -> SiteOperator;
}

impl HermitianPart for SiteOperator {
    fn hermitian_part(&self) -> SiteOperator {
        let m = self.matrix;
        let h = [0, 1].map(|r| [0, 1].map(|s| (m[r][s] + m[s][r].conj()) * 0.5));
        SiteOperator::new(h, "herm")
    }
}

#[test]
fn dense_ising_matches_library_diagonal() {
    for n in [2, 3, 5] {
        let lib = ising_afm_hamiltonian(n, 0.8).unwrap();
        let dense = dense_ising(n, 0.8);
        for (i, e) in lib.iter().enumerate() {
            assert!((dense[(i, i)].re - e).abs() < 1e-12);
        }
    }
}

/// Trajectory ensembles against the noise-averaged master equation.
fn compare_with_master_equation(
    s: &SpinState,
    h: Hamiltonian,
    dense_h: DMatrix<C>,
    noise: NoiseModel,
    dt: f64,
    n_steps: usize,
    m: usize,
    slack: f64,
) {
    let n = s.n_sites();
    let ens = run_ensemble(
        s,
        &h,
        &noise,
        &EnsembleSpec {
            dt,
            n_steps,
            record_every: n_steps / 4,
            n_trajectories: m,
            master_seed: 99,
        },
    )
    .unwrap();
    let curve = ensemble_purity(&ens.times, &ens.trajectories).unwrap();
    let lind = Lindblad::new(
        dense_h,
        &noise.coupling_op,
        n,
        kernel_on_ring(&noise.spatial, n),
        noise.lambda,
        noise.temporal.intensity(),
    );
    let mut rho = density(&ket(s));
    let mut last = 0.0;
    for (i, &t) in curve.times.iter().enumerate() {
        let steps = ((t - last) / 1e-3).round() as usize;
        rho = lind.rk4(&rho, (t - last) / steps.max(1) as f64, steps);
        last = t;
        let exact = purity(&rho);
        // finite-M bias of the empirical mixture is (1 − P)/M
        let expected = exact + (1.0 - exact) / m as f64;
        let tol = 4.0 * curve.stderr[i] + slack;
        assert!(
            (curve.purity[i] - expected).abs() <= tol,
            "t={t}: ensemble {} vs master equation {expected} (tol {tol})",
            curve.purity[i]
        );
    }
}

#[test]
fn dephasing_ensemble_matches_master_equation() {
    let s = state(ModelFamily::Cat, 4, 0);
    let noise = NoiseModel::new(
        0.15,
        SiteOperator::sigma_z(),
        SpatialKernel::Staggered,
        TemporalCorrelation::White { intensity: 1.0 },
    )
    .unwrap();
    let h = Hamiltonian::Diagonal(ising_afm_hamiltonian(4, 1.0).unwrap());
    compare_with_master_equation(&s, h, dense_ising(4, 1.0), noise, 0.01, 200, 800, 1e-3);
}

#[test]
fn noncommuting_ensemble_matches_master_equation() {
    let s = state(ModelFamily::RandomProduct, 3, 21);
    let noise = NoiseModel::new(
        0.3,
        SiteOperator::sigma_x(),
        SpatialKernel::Custom { values: vec![1.0, 0.3] },
        TemporalCorrelation::White { intensity: 1.0 },
    )
    .unwrap();
    let h = Hamiltonian::Diagonal(ising_afm_hamiltonian(3, 1.0).unwrap());
    // piecewise-constant noise converges to the white limit at O(dt)
    compare_with_master_equation(&s, h, dense_ising(3, 1.0), noise, 0.002, 400, 600, 0.01);
}

#[test]
fn dense_hamiltonian_path_agrees_with_diagonal_path() {
    let n = 3;
    let s = state(ModelFamily::RandomState, n, 8);
    let noise = NoiseModel::new(
        0.2,
        SiteOperator::sigma_y(),
        SpatialKernel::White,
        TemporalCorrelation::White { intensity: 1.0 },
    )
    .unwrap();
    let spec = EnsembleSpec {
        dt: 0.01,
        n_steps: 50,
        record_every: 10,
        n_trajectories: 4,
        master_seed: 5,
    };
    let diag = run_ensemble(&s, &Hamiltonian::Diagonal(ising_afm_hamiltonian(n, 1.0).unwrap()), &noise, &spec).unwrap();
    let dense = run_ensemble(&s, &Hamiltonian::dense(n, dense_ising(n, 1.0)).unwrap(), &noise, &spec).unwrap();
    for (a, b) in diag.trajectories.iter().zip(&dense.trajectories) {
        for (x, y) in a.iter().zip(b) {
            assert!(x.fidelity(y) > 1.0 - 1e-12);
        }
    }
}
