//! Projective local measurements, conditional outcome statistics and
//! stability against local measurements.
//!
//! Only the simultaneous limit is modelled: the second measurement follows
//! the first with no dynamics in between, so the two projectors commute.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cluster::normalized_correlation_from;
use crate::correlations::{rdm1_expectation, rdm2_expectation, single_site_rdm, two_site_rdm, Correlations, Rdm2};
use crate::error::{Error, Result};
use crate::fluctuation::max_fluctuation;
use crate::state::{apply_site_into, SiteOperator, SpinState};
use crate::table::{fmt_float, Table};

/// Eigenvalues closer than this share one projector.
pub const DEGENERACY_GAP: f64 = 1e-9;
/// Outcomes below this probability cannot be conditioned on.
pub const NULL_PROBABILITY: f64 = 1e-14;
/// Default number of extra grid directions besides the three Pauli axes.
pub const DEFAULT_GRID_DIRECTIONS: usize = 26;
/// Cascade stops once the worst fluctuation is at most this multiple of V.
pub const DEFAULT_CASCADE_THRESHOLD: f64 = 2.0;

type M2 = [[Complex64; 2]; 2];

const ID: M2 = [
    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
    [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralProjector {
    pub eigenvalue: f64,
    pub projector: M2,
}

/// Spectral decomposition of a Hermitian site operator, largest eigenvalue first.
pub fn spectral_decomposition(obs: &SiteOperator) -> Result<Vec<SpectralProjector>> {
    obs.ensure_hermitian()?;
    let p = obs.pauli_coefficients();
    let c0 = p[0].re;
    let c = [p[1].re, p[2].re, p[3].re];
    let len = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    if 2.0 * len < DEGENERACY_GAP {
        return Ok(vec![SpectralProjector {
            eigenvalue: c0,
            projector: ID,
        }]);
    }
    let n = c.map(|v| v / len);
    let half = |s: f64| -> M2 {
        [
            [Complex64::new(0.5 * (1.0 + s * n[2]), 0.0), Complex64::new(0.5 * s * n[0], -0.5 * s * n[1])],
            [Complex64::new(0.5 * s * n[0], 0.5 * s * n[1]), Complex64::new(0.5 * (1.0 - s * n[2]), 0.0)],
        ]
    };
    Ok(vec![
        SpectralProjector {
            eigenvalue: c0 + len,
            projector: half(1.0),
        },
        SpectralProjector {
            eigenvalue: c0 - len,
            projector: half(-1.0),
        },
    ])
}

fn find_projector(spec: &[SpectralProjector], value: f64) -> Result<&SpectralProjector> {
    spec.iter()
        .find(|p| (p.eigenvalue - value).abs() <= DEGENERACY_GAP)
        .ok_or_else(|| Error::InvalidArgument(format!("{value} is not an eigenvalue of the observable")))
}

pub enum OutcomeSelector<'a> {
    /// Condition on this eigenvalue.
    Eigenvalue(f64),
    /// Draw an outcome with Born weights.
    Born(&'a mut dyn RngCore),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOutcome {
    pub eigenvalue: f64,
    pub probability: f64,
    pub posterior: SpinState,
}

/// Ideal projective measurement of `obs` at `site`.
pub fn measure_local(
    state: &SpinState,
    obs: &SiteOperator,
    site: usize,
    selector: OutcomeSelector<'_>,
) -> Result<MeasurementOutcome> {
    state.check_site(site)?;
    let spec = spectral_decomposition(obs)?;
    let rho = single_site_rdm(state, site)?;
    let probs: Vec<f64> = spec
        .iter()
        .map(|p| rdm1_expectation(&rho, &p.projector).re.max(0.0))
        .collect();
    let chosen = match selector {
        OutcomeSelector::Eigenvalue(v) => {
            let target = find_projector(&spec, v)?.eigenvalue;
            spec.iter().position(|p| p.eigenvalue == target).expect("found above")
        }
        OutcomeSelector::Born(rng) => {
            let total: f64 = probs.iter().sum();
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = probs.len() - 1;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        }
    };
    let p = probs[chosen];
    if p < NULL_PROBABILITY {
        return Err(Error::NullEvent(p));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); state.dim()];
    apply_site_into(state.amplitudes(), &mut out, &spec[chosen].projector, site);
    Ok(MeasurementOutcome {
        eigenvalue: spec[chosen].eigenvalue,
        probability: p,
        posterior: SpinState::from_unnormalized(state.n_sites(), out)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalProbabilities {
    pub p_a: f64,
    pub p_b: f64,
    pub joint: f64,
    /// `P(b;a)`
    pub p_b_given_a: f64,
    /// `P(a;b)`, or NaN when `P(b)` is a null event.
    pub p_a_given_b: f64,
}

fn marginals(rho: &Rdm2, pa: &M2, pb: &M2) -> (f64, f64, f64) {
    (
        rdm2_expectation(rho, pa, &ID).re,
        rdm2_expectation(rho, &ID, pb).re,
        rdm2_expectation(rho, pa, pb).re,
    )
}

/// Outcome `a` of `a_obs` at `x`, then outcome `b` of `b_obs` at `y`.
pub fn conditional_probability(
    state: &SpinState,
    a_obs: &SiteOperator,
    x: usize,
    a: f64,
    b_obs: &SiteOperator,
    y: usize,
    b: f64,
) -> Result<ConditionalProbabilities> {
    let rho = two_site_rdm(state, x, y)?;
    let sa = spectral_decomposition(a_obs)?;
    let sb = spectral_decomposition(b_obs)?;
    let pa = find_projector(&sa, a)?;
    let pb = find_projector(&sb, b)?;
    let (p_a, p_b, joint) = marginals(&rho, &pa.projector, &pb.projector);
    if p_a < NULL_PROBABILITY {
        return Err(Error::NullEvent(p_a));
    }
    Ok(ConditionalProbabilities {
        p_a,
        p_b,
        joint,
        p_b_given_a: joint / p_a,
        p_a_given_b: if p_b < NULL_PROBABILITY { f64::NAN } else { joint / p_b },
    })
}

/// Single-site observables searched when probing measurement stability.
#[derive(Debug, Clone)]
pub struct ObservableGrid {
    pub observables: Vec<SiteOperator>,
}

impl Default for ObservableGrid {
    fn default() -> Self {
        Self::with_directions(DEFAULT_GRID_DIRECTIONS)
    }
}

impl ObservableGrid {
    /// Pauli axes plus `n` spin directions spread over the sphere
    /// (Fibonacci lattice).
    pub fn with_directions(n: usize) -> Self {
        let mut observables = vec![
            SiteOperator::sigma_x(),
            SiteOperator::sigma_y(),
            SiteOperator::sigma_z(),
        ];
        let golden = PI * (3.0 - 5f64.sqrt());
        for i in 0..n {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            observables.push(SiteOperator::spin_along([r * phi.cos(), r * phi.sin(), z]));
        }
        Self { observables }
    }

    pub fn from_observables(observables: Vec<SiteOperator>) -> Result<Self> {
        for o in &observables {
            o.ensure_hermitian()?;
        }
        Ok(Self { observables })
    }

    fn spectra(&self) -> Vec<Vec<SpectralProjector>> {
        self.observables
            .iter()
            .map(|o| spectral_decomposition(o).expect("grid observables are Hermitian"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LMStabilityReport {
    pub x: usize,
    pub y: usize,
    /// Probability floor on `P(a)`.
    pub epsilon: f64,
    /// `max |P(b;a) − P(b)|` over the grid.
    pub deviation: f64,
    /// Grid indices and eigenvalues attaining the maximum.
    pub argmax: Option<(usize, f64, usize, f64)>,
}

fn deviation_from_rdm(
    rho: &Rdm2,
    spectra: &[Vec<SpectralProjector>],
    epsilon: f64,
) -> (f64, Option<(usize, f64, usize, f64)>) {
    let mut best = 0.0;
    let mut arg = None;
    for (ia, sa) in spectra.iter().enumerate() {
        for pa in sa {
            let p_a = rdm2_expectation(rho, &pa.projector, &ID).re;
            if p_a < epsilon || p_a < NULL_PROBABILITY {
                continue;
            }
            for (ib, sb) in spectra.iter().enumerate() {
                for pb in sb {
                    let (_, p_b, joint) = marginals(rho, &pa.projector, &pb.projector);
                    let dev = (joint / p_a - p_b).abs();
                    if dev > best {
                        best = dev;
                        arg = Some((ia, pa.eigenvalue, ib, pb.eigenvalue));
                    }
                }
            }
        }
    }
    (best.min(1.0), arg)
}

pub fn lm_stability_deviation(
    state: &SpinState,
    x: usize,
    y: usize,
    epsilon: f64,
    grid: &ObservableGrid,
) -> Result<LMStabilityReport> {
    let rho = two_site_rdm(state, x, y)?;
    let (deviation, argmax) = deviation_from_rdm(&rho, &grid.spectra(), epsilon);
    Ok(LMStabilityReport {
        x,
        y,
        epsilon,
        deviation,
        argmax,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BoundStatus {
    Holds,
    Violated,
    /// The pair's normalized correlation exceeds epsilon.
    Skipped,
}

impl BoundStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Holds => "HOLDS",
            Self::Violated => "VIOLATED",
            Self::Skipped => "SKIPPED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub correlation: f64,
    /// Worst `|P(b;a) − P(b)|` with `P(a) ≥ ε`.
    pub lhs: f64,
    /// `√ε`
    pub rhs: f64,
    pub status: BoundStatus,
}

const BOUND_SLACK: f64 = 1e-9;

/// When the normalized correlation of `(x, y)` is at most `ε`, every grid
/// projector pair with `P(a) ≥ ε` must satisfy `|P(b;a) − P(b)| ≤ √ε`.
pub fn theorem_bound_check(
    state: &SpinState,
    x: usize,
    y: usize,
    epsilon: f64,
    grid: &ObservableGrid,
) -> Result<BoundCheck> {
    let corr = Correlations::compute(state);
    bound_check_from(&corr, state, x, y, epsilon, grid)
}

pub(crate) fn bound_check_from(
    corr: &Correlations,
    state: &SpinState,
    x: usize,
    y: usize,
    epsilon: f64,
    grid: &ObservableGrid,
) -> Result<BoundCheck> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    state.check_site(x)?;
    state.check_site(y)?;
    let correlation = normalized_correlation_from(corr, x, y);
    let lhs = lm_stability_deviation(state, x, y, epsilon, grid)?.deviation;
    let rhs = epsilon.sqrt();
    let status = if correlation > epsilon {
        BoundStatus::Skipped
    } else if lhs <= rhs + BOUND_SLACK {
        BoundStatus::Holds
    } else {
        BoundStatus::Violated
    };
    Ok(BoundCheck {
        correlation,
        lhs,
        rhs,
        status,
    })
}

/// Correlation bounded by measurement deviation: `c ≤ K·δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationBound {
    /// Largest normalized correlation over grid observable pairs.
    pub grid_correlation: f64,
    /// LM deviation with probability floor ½.
    pub deviation: f64,
    /// `Δa·Δb/√(Var a · Var b)` for the maximizing pair (eigenvalue gaps Δ).
    pub k_constant: f64,
}

impl DeviationBound {
    pub fn holds(&self) -> bool {
        self.grid_correlation <= self.k_constant * self.deviation + BOUND_SLACK
    }
}

/// For two-outcome observables `Cov(a, b) = Δa Δb Cov(P_a, P_b)` and
/// `|Cov(P_a, P_b)| ≤ P(a)|P(b;a) − P(b)|` with `P(a) ≥ ½` for one of the
/// two outcomes, which gives the constant `K` reported here.
pub fn correlation_from_deviation(
    state: &SpinState,
    x: usize,
    y: usize,
    grid: &ObservableGrid,
) -> Result<DeviationBound> {
    let rho = two_site_rdm(state, x, y)?;
    let spectra = grid.spectra();
    let (deviation, _) = deviation_from_rdm(&rho, &spectra, 0.5);
    let mut best = 0.0;
    let mut k_best = 0.0;
    for (oa, sa) in grid.observables.iter().zip(&spectra) {
        if sa.len() != 2 {
            continue;
        }
        let ea = rdm2_expectation(&rho, &oa.matrix, &ID).re;
        let va = rdm2_expectation(&rho, &mul(&oa.matrix, &oa.matrix), &ID).re - ea * ea;
        for (ob, sb) in grid.observables.iter().zip(&spectra) {
            if sb.len() != 2 {
                continue;
            }
            let eb = rdm2_expectation(&rho, &ID, &ob.matrix).re;
            let vb = rdm2_expectation(&rho, &ID, &mul(&ob.matrix, &ob.matrix)).re - eb * eb;
            if va < crate::cluster::VARIANCE_FLOOR || vb < crate::cluster::VARIANCE_FLOOR {
                continue;
            }
            let cov = rdm2_expectation(&rho, &oa.matrix, &ob.matrix).re - ea * eb;
            let c = cov.abs() / (va * vb).sqrt();
            if c > best {
                best = c;
                let gap_a = sa[0].eigenvalue - sa[1].eigenvalue;
                let gap_b = sb[0].eigenvalue - sb[1].eigenvalue;
                k_best = gap_a * gap_b / (va * vb).sqrt();
            }
        }
    }
    Ok(DeviationBound {
        grid_correlation: best,
        deviation,
        k_constant: k_best,
    })
}

fn mul(a: &M2, b: &M2) -> M2 {
    let mut o = [[Complex64::new(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            o[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    o
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CascadePolicy {
    RandomSiteRandomAxis,
    RandomSiteZ,
    SequentialZ,
}

impl CascadePolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::RandomSiteRandomAxis => "RANDOM_SITE_RANDOM_AXIS",
            Self::RandomSiteZ => "RANDOM_SITE_Z",
            Self::SequentialZ => "SEQUENTIAL_Z",
        }
    }
}

impl std::str::FromStr for CascadePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::RandomSiteRandomAxis, Self::RandomSiteZ, Self::SequentialZ]
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown cascade policy '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeStep {
    pub step: usize,
    pub site: usize,
    pub axis_theta: f64,
    pub axis_phi: f64,
    pub outcome: f64,
    /// Worst additive fluctuation after this measurement.
    pub max_fluct: f64,
}

#[derive(Debug, Clone)]
pub struct CascadeTrace {
    pub initial_max_fluct: f64,
    pub steps: Vec<CascadeStep>,
    /// Measurements performed before the fluctuation fell below threshold.
    pub count: usize,
    pub converged: bool,
    pub final_state: SpinState,
}

impl CascadeTrace {
    pub const COLUMNS: [&'static str; 6] = ["step", "site", "axis_theta", "axis_phi", "outcome", "max_fluct"];

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&Self::COLUMNS);
        for s in &self.steps {
            t.push(vec![
                s.step.to_string(),
                s.site.to_string(),
                fmt_float(s.axis_theta),
                fmt_float(s.axis_phi),
                fmt_float(s.outcome),
                fmt_float(s.max_fluct),
            ]);
        }
        t
    }
}

fn axis_vector(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

/// Repeats local measurements until the worst additive fluctuation is at
/// most `stop_threshold·V`, giving up after `N²` measurements.
pub fn measurement_cascade(
    state: &SpinState,
    policy: CascadePolicy,
    seed: u64,
    stop_threshold: f64,
) -> Result<CascadeTrace> {
    let n = state.n_sites();
    let limit = stop_threshold * n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cur = state.clone();
    let initial_max_fluct = max_fluctuation(&cur).max_fluct();
    let mut fluct = initial_max_fluct;
    let mut steps = Vec::new();
    while fluct > limit && steps.len() < n * n {
        let step = steps.len();
        let (site, theta, phi) = match policy {
            CascadePolicy::SequentialZ => (step % n, 0.0, 0.0),
            CascadePolicy::RandomSiteZ => (rng.random_range(0..n), 0.0, 0.0),
            CascadePolicy::RandomSiteRandomAxis => {
                let site = rng.random_range(0..n);
                let cos_t: f64 = 1.0 - 2.0 * rng.random::<f64>();
                let phi = 2.0 * PI * rng.random::<f64>();
                (site, cos_t.clamp(-1.0, 1.0).acos(), phi)
            }
        };
        let obs = SiteOperator::spin_along(axis_vector(theta, phi));
        let out = measure_local(&cur, &obs, site, OutcomeSelector::Born(&mut rng))?;
        cur = out.posterior;
        fluct = max_fluctuation(&cur).max_fluct();
        steps.push(CascadeStep {
            step: step + 1,
            site,
            axis_theta: theta,
            axis_phi: phi,
            outcome: out.eigenvalue,
            max_fluct: fluct,
        });
    }
    Ok(CascadeTrace {
        initial_max_fluct,
        count: steps.len(),
        converged: fluct <= limit,
        steps,
        final_state: cur,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decomposition_of_paulis() {
        let s = spectral_decomposition(&SiteOperator::sigma_z()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].eigenvalue, 1.0);
        assert_eq!(s[0].projector[0][0].re, 1.0);
        assert_eq!(s[1].projector[1][1].re, 1.0);
        let id = spectral_decomposition(&SiteOperator::identity()).unwrap();
        assert_eq!(id.len(), 1);
        assert!(spectral_decomposition(&SiteOperator::pauli_combination(
            [Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)],
            "bad"
        ))
        .is_err());
    }

    #[test]
    fn null_outcome_is_an_error() {
        let up = SpinState::basis(3, 0).unwrap();
        let r = measure_local(&up, &SiteOperator::sigma_z(), 1, OutcomeSelector::Eigenvalue(-1.0));
        assert!(matches!(r, Err(Error::NullEvent(_))));
        let r = measure_local(&up, &SiteOperator::sigma_z(), 1, OutcomeSelector::Eigenvalue(0.5));
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn grid_has_unit_directions() {
        let g = ObservableGrid::default();
        assert_eq!(g.observables.len(), 29);
        for o in &g.observables {
            let s = spectral_decomposition(o).unwrap();
            assert!((s[0].eigenvalue - 1.0).abs() < 1e-12);
            assert!((s[1].eigenvalue + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn policy_names() {
        for p in [CascadePolicy::RandomSiteRandomAxis, CascadePolicy::RandomSiteZ, CascadePolicy::SequentialZ] {
            assert_eq!(p.as_str().parse::<CascadePolicy>().unwrap(), p);
        }
    }
}
