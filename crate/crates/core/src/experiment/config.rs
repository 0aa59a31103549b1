//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExpError;
use crate::cluster::DEFAULT_EPSILONS;
use crate::decoherence::{NoiseModel, SpatialKernel, TemporalCorrelation};
use crate::localmeas::{CascadePolicy, DEFAULT_CASCADE_THRESHOLD, DEFAULT_GRID_DIRECTIONS};
use crate::models::{ModelFamily, ModelSpec};
use crate::state::{SiteOperator, MAX_SITES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Scaling,
    Cluster,
    Gamma,
    Lm,
    Cascade,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [Self::Scaling, Self::Cluster, Self::Gamma, Self::Lm, Self::Cascade];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Scaling => "scaling",
            Self::Cluster => "cluster",
            Self::Gamma => "gamma",
            Self::Lm => "lm",
            Self::Cascade => "cascade",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown experiment '{s}'"))
    }
}

/// Coupling operator: a name (`sx`, `sy`, `sz`) or real Pauli coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CouplingSpec {
    Named(String),
    Pauli([f64; 3]),
}

impl CouplingSpec {
    pub fn operator(&self) -> crate::Result<SiteOperator> {
        match self {
            Self::Named(name) => SiteOperator::by_name(name),
            Self::Pauli(c) => Ok(SiteOperator::pauli_combination(
                c.map(|v| num_complex::Complex64::new(v, 0.0)),
                "custom",
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: ModelFamily,
    #[serde(default = "default_n_sites")]
    pub n_sites: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_n_sites() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_coupling")]
    pub coupling: CouplingSpec,
    #[serde(default = "default_spatial")]
    pub spatial: SpatialKernel,
    #[serde(default = "default_temporal")]
    pub temporal: TemporalCorrelation,
}

fn default_lambda() -> f64 {
    0.1
}
fn default_coupling() -> CouplingSpec {
    CouplingSpec::Named("sz".into())
}
fn default_spatial() -> SpatialKernel {
    SpatialKernel::White
}
fn default_temporal() -> TemporalCorrelation {
    TemporalCorrelation::White { intensity: 1.0 }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            lambda: default_lambda(),
            coupling: default_coupling(),
            spatial: default_spatial(),
            temporal: default_temporal(),
        }
    }
}

impl NoiseConfig {
    pub fn model(&self) -> crate::Result<NoiseModel> {
        NoiseModel::new(self.lambda, self.coupling.operator()?, self.spatial.clone(), self.temporal.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
}

fn default_epsilons() -> Vec<f64> {
    DEFAULT_EPSILONS.to_vec()
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            epsilons: default_epsilons(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    /// Number of trajectories `M`; 0 skips the simulation.
    #[serde(default)]
    pub count: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_n_steps")]
    pub n_steps: usize,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// `[t_lo, t_hi]` for the purity fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[f64; 2]>,
}

fn default_dt() -> f64 {
    0.01
}
fn default_n_steps() -> usize {
    100
}
fn default_record_every() -> usize {
    1
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            count: 0,
            dt: default_dt(),
            n_steps: default_n_steps(),
            record_every: default_record_every(),
            fit_window: None,
        }
    }
}

impl TrajectoryConfig {
    pub fn t_end(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    /// Explicit window, or `[2·dt, t_end]`.
    pub fn window(&self) -> (f64, f64) {
        match self.fit_window {
            Some([lo, hi]) => (lo, hi),
            None => (2.0 * self.dt, self.t_end()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HamiltonianKind {
    None,
    IsingAfm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianConfig {
    #[serde(default = "default_h_kind")]
    pub kind: HamiltonianKind,
    #[serde(default = "default_j")]
    pub j: f64,
}

fn default_h_kind() -> HamiltonianKind {
    HamiltonianKind::IsingAfm
}
fn default_j() -> f64 {
    1.0
}

impl Default for HamiltonianConfig {
    fn default() -> Self {
        Self {
            kind: default_h_kind(),
            j: default_j(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmConfig {
    /// Probability floor on the first outcome.
    #[serde(default = "default_lm_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_grid_directions")]
    pub grid_directions: usize,
}

fn default_lm_epsilon() -> f64 {
    0.04
}
fn default_grid_directions() -> usize {
    DEFAULT_GRID_DIRECTIONS
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            epsilon: default_lm_epsilon(),
            grid_directions: default_grid_directions(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeConfig {
    #[serde(default = "default_policy")]
    pub policy: CascadePolicy,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_threshold")]
    pub stop_threshold: f64,
}

fn default_policy() -> CascadePolicy {
    CascadePolicy::RandomSiteRandomAxis
}
fn default_runs() -> usize {
    100
}
fn default_threshold() -> f64 {
    DEFAULT_CASCADE_THRESHOLD
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            policy: default_policy(),
            runs: default_runs(),
            stop_threshold: default_threshold(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    #[serde(default)]
    pub master_seed: u64,
    /// Chain lengths for the volume scans.
    #[serde(default = "default_volumes")]
    pub volumes: Vec<usize>,
    pub model: ModelConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub cluster: ClusterConfig,
    #[serde(default)]
    pub trajectories: TrajectoryConfig,
    #[serde(default)]
    pub hamiltonian: HamiltonianConfig,
    #[serde(default)]
    pub lm: LmConfig,
    #[serde(default)]
    pub cascade: CascadeConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_volumes() -> Vec<usize> {
    vec![4, 6, 8, 10]
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> ExpError {
    ExpError::Validation(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ExpError> {
        toml::from_str(text).map_err(|e| ExpError::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, ExpError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExpError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Random families fall back to `master_seed` when `model.seed` is unset.
    pub fn model_spec(&self, n_sites: usize) -> ModelSpec {
        ModelSpec {
            family: self.model.family,
            n_sites,
            seed: Some(self.model.seed.unwrap_or(self.master_seed)),
        }
    }

    /// Checks every field the chosen experiment reads; the error names the field.
    pub fn validate(&self, kind: ExperimentKind) -> Result<(), ExpError> {
        if let Some(k) = self.experiment {
            if k != kind {
                return Err(invalid("experiment", format!("config is for '{}', not '{}'", k.as_str(), kind.as_str())));
            }
        }
        let check_n = |field: &str, n: usize| -> Result<(), ExpError> {
            self.model_spec(n).validate().map_err(|e| invalid(field, e))
        };
        let check_volumes = || -> Result<(), ExpError> {
            let mut v = self.volumes.clone();
            v.sort_unstable();
            v.dedup();
            if v.len() < 3 || v.len() != self.volumes.len() {
                return Err(invalid("volumes", "need at least 3 distinct chain lengths"));
            }
            for &n in &self.volumes {
                check_n("volumes", n)?;
            }
            Ok(())
        };
        match kind {
            ExperimentKind::Scaling => check_volumes()?,
            ExperimentKind::Cluster => {
                check_volumes()?;
                if self.cluster.epsilons.is_empty() || !self.cluster.epsilons.iter().all(|&e| e > 0.0 && e <= 1.0) {
                    return Err(invalid("cluster.epsilons", "values must lie in (0, 1]"));
                }
            }
            ExperimentKind::Gamma => {
                check_volumes()?;
                let noise = self.noise.model().map_err(|e| invalid("noise", e))?;
                for &n in &self.volumes {
                    noise.validate_for(n).map_err(|e| invalid("noise.spatial", e))?;
                }
                if self.trajectories.count > 0 {
                    self.validate_trajectories(&noise)?;
                }
            }
            ExperimentKind::Lm => {
                check_n("model.n_sites", self.model.n_sites)?;
                if self.model.n_sites < 2 {
                    return Err(invalid("model.n_sites", "need at least 2 sites"));
                }
                if !(self.lm.epsilon > 0.0 && self.lm.epsilon <= 1.0) {
                    return Err(invalid("lm.epsilon", "must lie in (0, 1]"));
                }
            }
            ExperimentKind::Cascade => {
                check_n("model.n_sites", self.model.n_sites)?;
                if self.cascade.runs == 0 {
                    return Err(invalid("cascade.runs", "must be positive"));
                }
                if !(self.cascade.stop_threshold > 0.0) {
                    return Err(invalid("cascade.stop_threshold", "must be positive"));
                }
            }
        }
        Ok(())
    }

    fn validate_trajectories(&self, noise: &NoiseModel) -> Result<(), ExpError> {
        let t = &self.trajectories;
        check_n_sites(self)?;
        noise
            .validate_for(self.model.n_sites)
            .map_err(|e| invalid("noise.spatial", e))?;
        if t.count < 2 {
            return Err(invalid("trajectories.count", "need at least 2 trajectories"));
        }
        if !(t.dt > 0.0) {
            return Err(invalid("trajectories.dt", "must be positive"));
        }
        if t.n_steps == 0 || t.record_every == 0 {
            return Err(invalid("trajectories.n_steps", "n_steps and record_every must be positive"));
        }
        let (lo, hi) = t.window();
        if !(lo < hi) {
            return Err(invalid("trajectories.fit_window", "t_lo must be below t_hi"));
        }
        if hi > t.t_end() * (1.0 + 1e-12) {
            return Err(invalid("trajectories.fit_window", "t_hi exceeds n_steps·dt"));
        }
        let tau = noise.temporal.correlation_time();
        if tau > 0.0 {
            if lo < 5.0 * tau {
                return Err(invalid("trajectories.fit_window", "t_lo must be at least 5·tau_c"));
            }
            if t.dt > tau / 10.0 {
                return Err(invalid("trajectories.dt", "OU noise needs dt ≤ tau_c/10"));
            }
        } else if lo < 2.0 * t.dt * (1.0 - 1e-12) {
            return Err(invalid("trajectories.fit_window", "t_lo must be at least 2·dt"));
        }
        if self.hamiltonian.kind == HamiltonianKind::IsingAfm && !(self.hamiltonian.j > 0.0) {
            return Err(invalid("hamiltonian.j", "must be positive"));
        }
        Ok(())
    }
}

fn check_n_sites(cfg: &ExperimentConfig) -> Result<(), ExpError> {
    let n = cfg.model.n_sites;
    if n == 0 || n > MAX_SITES {
        return Err(invalid("model.n_sites", format!("must lie in 1..={MAX_SITES}")));
    }
    cfg.model_spec(n).validate().map_err(|e| invalid("model.n_sites", e))
}
