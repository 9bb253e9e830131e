//! Declarative benchmark configuration, read from TOML.

use std::path::Path;

use etcd_core::data::ExperimentConfig;
use etcd_core::ets::{AgentParams, NeighborStateSource, TriggerParams, TriggerRule};
use etcd_core::lmi::blocks::{ErrorWeight, OmegaBVariant, QOptions};
use etcd_core::lmi::theorems::{GainPattern, LmiSettings};
use etcd_core::network::{self, Graph, NetworkSystem, PendulumConstants, Subsystem};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::BenchError;

pub const PENDULUM_BW_SCALE: f64 = 0.01;

/// Row-major matrix as written in the config file.
pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub system: SystemSpec,
    pub experiment: ExperimentSpec,
    pub ets: EtsSpec,
    pub design: DesignSpec,
    pub variant: Variant,
    pub simulation: SimulationSpec,
    pub sweep: SweepSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    Pendulum(PendulumSpec),
    Explicit(ExplicitSpec),
}

impl Default for SystemSpec {
    fn default() -> Self {
        Self::Pendulum(PendulumSpec::default())
    }
}

/// Coupled inverted pendulums, discretized with a zero-order hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PendulumSpec {
    /// Number of pendulums on a chain; ignored when `adjacency` is given.
    pub agents: usize,
    pub adjacency: Option<Vec<Vec<u8>>>,
    pub gravity: f64,
    pub mass: f64,
    pub length: f64,
    pub spring: f64,
    /// Discretization step in seconds.
    pub sample_time: f64,
}

impl Default for PendulumSpec {
    fn default() -> Self {
        let c = PendulumConstants::default();
        Self { agents: 3, adjacency: None, gravity: c.gravity, mass: c.mass, length: c.length, spring: c.spring, sample_time: 0.01 }
    }
}

/// Subsystem matrices given directly. They are taken as discrete-time unless
/// `sample_time` is set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplicitSpec {
    pub adjacency: Vec<Vec<u8>>,
    pub subsystems: Vec<SubsystemSpec>,
    pub sample_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubsystemSpec {
    pub a: Rows,
    pub b: Rows,
    /// Defaults to the identity when empty.
    pub bw: Rows,
    pub couplings: Vec<CouplingSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub neighbor: usize,
    pub a: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Number of samples `ρ`.
    pub horizon: usize,
    pub u_max: f64,
    pub w_max: f64,
    pub seed: u64,
    /// Replaces every `B_wi` with `bw_scale·I`. Pendulum networks default to
    /// [`PENDULUM_BW_SCALE`].
    pub bw_scale: Option<f64>,
    pub x0: Option<Vec<f64>>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        Self { horizon: e.horizon, u_max: e.u_max, w_max: e.w_max, seed: e.seed, bw_scale: None, x0: None }
    }
}

/// `σ₂` as one value on every edge or as a full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sigma2Spec {
    Uniform(f64),
    Matrix(Rows),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborSource {
    #[default]
    LastTransmitted,
    SynchronousSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EtsSpec {
    /// Sampling interval in steps.
    pub h: usize,
    pub sigma1: f64,
    pub sigma2: Sigma2Spec,
    pub theta: f64,
    pub lambda: f64,
    pub eta0: f64,
    pub neighbor_source: NeighborSource,
}

impl Default for EtsSpec {
    fn default() -> Self {
        Self {
            h: 2,
            sigma1: 0.02,
            sigma2: Sigma2Spec::Uniform(0.01),
            theta: 2.0,
            lambda: 0.2,
            eta0: 0.0,
            neighbor_source: NeighborSource::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignMode {
    Theorem2Model,
    #[default]
    Theorem3Data,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    #[default]
    Distributed,
    Decentralized,
}

impl From<Pattern> for GainPattern {
    fn from(p: Pattern) -> Self {
        match p {
            Pattern::Distributed => GainPattern::Distributed,
            Pattern::Decentralized => GainPattern::Decentralized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorWeightSpec {
    #[default]
    Omega,
    SigmaOmega,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaBSpec {
    #[default]
    Symmetric,
    Printed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSpec {
    pub mode: DesignMode,
    pub pattern: Pattern,
    /// Sampling-interval range for the LMI vertices; both default to `ets.h`.
    pub h_lo: Option<f64>,
    pub h_hi: Option<f64>,
    pub error_weight: ErrorWeightSpec,
    pub omega_b: OmegaBSpec,
    /// Required eigenvalue margin relative to the constant terms.
    pub margin_factor: f64,
    /// Euclidean bound on the decision vector.
    pub radius: f64,
}

impl Default for DesignSpec {
    fn default() -> Self {
        let opts = etcd_core::lmi::solver::SolveOptions::default();
        Self {
            mode: DesignMode::default(),
            pattern: Pattern::default(),
            h_lo: None,
            h_hi: None,
            error_weight: ErrorWeightSpec::default(),
            omega_b: OmegaBSpec::default(),
            margin_factor: opts.margin_factor,
            radius: opts.radius,
        }
    }
}

/// Triggering-rule variant applied on top of `[ets]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// The configured dynamic rule.
    #[default]
    Dynamic,
    /// `σ₂ = 0`: own state and error only.
    Decentralized,
    /// `σ₁ = 0`: relative neighbor states only.
    Distributed,
    /// `σ₁ = σ₂ = 0`, transmit at every sampling instant.
    Periodic,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Dynamic, Variant::Distributed, Variant::Decentralized, Variant::Periodic];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Dynamic => "dynamic",
            Variant::Decentralized => "decentralized",
            Variant::Distributed => "distributed",
            Variant::Periodic => "periodic",
        }
    }

    pub fn apply(self, params: &TriggerParams) -> TriggerParams {
        let mut out = params.clone();
        match self {
            Variant::Dynamic => {}
            Variant::Decentralized => out.sigma2.fill(0.0),
            Variant::Distributed => out.agents.iter_mut().for_each(|a| a.sigma1 = 0.0),
            Variant::Periodic => {
                out.sigma2.fill(0.0);
                out.agents.iter_mut().for_each(|a| a.sigma1 = 0.0);
                out.rule = TriggerRule::Periodic;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub x0: Vec<f64>,
    pub horizon: usize,
    /// `‖x‖∞` threshold, relative to `‖x(0)‖∞`, used for the settling time.
    pub settling_fraction: f64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self { x0: vec![0.1, -0.1, 0.2, -0.2, 0.1, -0.2], horizon: 300, settling_fraction: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub thetas: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { thetas: vec![2.0, 3.0, 10.0, 100.0, 200.0, 300.0, 1000.0, 2000.0, 1e4] }
    }
}

fn matrix(rows: &Rows, what: &str) -> Result<DMatrix<f64>, BenchError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(BenchError::Config(format!("{what}: rows have different lengths")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Manifests nest the effective configuration under `[config]`; both forms load.
#[derive(Deserialize)]
struct ManifestView {
    config: BenchmarkConfig,
}

impl BenchmarkConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        match toml::from_str::<ManifestView>(text) {
            Ok(m) => Ok(m.config),
            Err(_) => toml::from_str(text).map_err(|e| BenchError::Config(e.to_string())),
        }
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// The discrete-time network.
    pub fn network(&self) -> Result<NetworkSystem, BenchError> {
        let sys = match &self.system {
            SystemSpec::Pendulum(p) => {
                let graph = match &p.adjacency {
                    Some(adj) => Graph::new(adj)?,
                    None => Graph::chain(p.agents),
                };
                let c = PendulumConstants { gravity: p.gravity, mass: p.mass, length: p.length, spring: p.spring };
                let bw_scale = self.experiment.bw_scale.unwrap_or(PENDULUM_BW_SCALE);
                let cont = network::pendulum_network(&c, graph, bw_scale)?;
                return Ok(network::discretize(&cont, p.sample_time)?);
            }
            SystemSpec::Explicit(e) => {
                let graph = Graph::new(&e.adjacency)?;
                let subsystems = e
                    .subsystems
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let a = matrix(&s.a, &format!("subsystem {i} a"))?;
                        let bw = if s.bw.is_empty() { DMatrix::identity(a.nrows(), a.nrows()) } else { matrix(&s.bw, &format!("subsystem {i} bw"))? };
                        let couplings = s
                            .couplings
                            .iter()
                            .map(|c| Ok((c.neighbor, matrix(&c.a, &format!("coupling {i}-{}", c.neighbor))?)))
                            .collect::<Result<_, BenchError>>()?;
                        Ok(Subsystem { a, b: matrix(&s.b, &format!("subsystem {i} b"))?, couplings, bw })
                    })
                    .collect::<Result<Vec<_>, BenchError>>()?;
                let sys = network::assemble_global(graph, subsystems)?;
                match e.sample_time {
                    Some(step) => network::discretize(&sys, step)?,
                    None => sys,
                }
            }
        };
        Ok(match self.experiment.bw_scale {
            Some(scale) => sys.with_disturbance_scale(scale)?,
            None => sys,
        })
    }

    pub fn experiment_config(&self, system: &NetworkSystem) -> Result<ExperimentConfig, BenchError> {
        let e = &self.experiment;
        let x0 = match &e.x0 {
            Some(v) if v.len() != system.n_states() => {
                return Err(BenchError::Config(format!("experiment.x0 has {} entries, system has {} states", v.len(), system.n_states())))
            }
            Some(v) => Some(DVector::from_vec(v.clone())),
            None => None,
        };
        Ok(ExperimentConfig { horizon: e.horizon, u_max: e.u_max, w_max: e.w_max, seed: e.seed, x0 })
    }

    /// `[ets]` parameters before the variant is applied.
    pub fn base_params(&self, system: &NetworkSystem) -> Result<TriggerParams, BenchError> {
        let e = &self.ets;
        let agent = AgentParams { sigma1: e.sigma1, theta: e.theta, lambda: e.lambda, eta0: e.eta0 };
        let mut params = TriggerParams::uniform(system, e.h, agent, 0.0);
        params.sigma2 = match &e.sigma2 {
            Sigma2Spec::Uniform(s) => TriggerParams::uniform(system, e.h, agent, *s).sigma2,
            Sigma2Spec::Matrix(rows) => matrix(rows, "ets.sigma2")?,
        };
        Ok(params)
    }

    /// Parameters of `variant`, checked for admissibility.
    pub fn params(&self, system: &NetworkSystem, variant: Variant) -> Result<TriggerParams, BenchError> {
        let params = variant.apply(&self.base_params(system)?);
        params.validate(system)?;
        Ok(params)
    }

    pub fn neighbor_source(&self) -> NeighborStateSource {
        match self.ets.neighbor_source {
            NeighborSource::LastTransmitted => NeighborStateSource::LastTransmitted,
            NeighborSource::SynchronousSample => NeighborStateSource::SynchronousSample,
        }
    }

    pub fn lmi_settings(&self) -> LmiSettings {
        let h = self.ets.h as f64;
        let q = QOptions {
            error_weight: match self.design.error_weight {
                ErrorWeightSpec::Omega => ErrorWeight::Omega,
                ErrorWeightSpec::SigmaOmega => ErrorWeight::SigmaOmega,
            },
            omega_b: match self.design.omega_b {
                OmegaBSpec::Symmetric => OmegaBVariant::Symmetric,
                OmegaBSpec::Printed => OmegaBVariant::Printed,
            },
        };
        LmiSettings { h_lo: self.design.h_lo.unwrap_or(h), h_hi: self.design.h_hi.unwrap_or(h), q }
    }

    pub fn solve_options(&self) -> etcd_core::lmi::solver::SolveOptions {
        etcd_core::lmi::solver::SolveOptions { margin_factor: self.design.margin_factor, radius: self.design.radius }
    }

    pub fn simulation_x0(&self, system: &NetworkSystem) -> Result<DVector<f64>, BenchError> {
        let x0 = &self.simulation.x0;
        if x0.len() != system.n_states() {
            return Err(BenchError::Config(format!("simulation.x0 has {} entries, system has {} states", x0.len(), system.n_states())));
        }
        Ok(DVector::from_vec(x0.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = BenchmarkConfig::from_toml("").unwrap();
        assert_eq!(cfg, BenchmarkConfig::default());
        let sys = cfg.network().unwrap();
        assert_eq!(sys.n_states(), 6);
        assert_eq!(sys.bw, DMatrix::identity(6, 6) * 0.01);
    }

    #[test]
    fn round_trip_through_toml() {
        let mut cfg = BenchmarkConfig::default();
        cfg.variant = Variant::Distributed;
        cfg.ets.sigma2 = Sigma2Spec::Matrix(vec![vec![0.0, 0.1, 0.0], vec![0.1, 0.0, 0.2], vec![0.0, 0.2, 0.0]]);
        assert_eq!(BenchmarkConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn manifest_form_loads() {
        let text = "command = \"design\"\n[config.ets]\ntheta = 5.0\n";
        assert_eq!(BenchmarkConfig::from_toml(text).unwrap().ets.theta, 5.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(BenchmarkConfig::from_toml("[ets]\nthetta = 2.0\n"), Err(BenchError::Config(_))));
    }

    #[test]
    fn variants_override_before_validation() {
        let cfg = BenchmarkConfig::default();
        let sys = cfg.network().unwrap();
        let p = cfg.params(&sys, Variant::Distributed).unwrap();
        assert!(p.agents.iter().all(|a| a.sigma1 == 0.0));
        assert_eq!(p.sigma2[(0, 1)], 0.01);
        let p = cfg.params(&sys, Variant::Decentralized).unwrap();
        assert!(p.sigma2.iter().all(|&s| s == 0.0));
        assert_eq!(cfg.params(&sys, Variant::Periodic).unwrap().rule, TriggerRule::Periodic);
    }

    #[test]
    fn inadmissible_theta_rejected() {
        let mut cfg = BenchmarkConfig::default();
        cfg.ets.theta = 1.0;
        cfg.ets.lambda = 0.5;
        let sys = cfg.network().unwrap();
        assert!(matches!(cfg.params(&sys, Variant::Dynamic), Err(BenchError::Ets(_))));
    }

    #[test]
    fn explicit_system() {
        let text = r#"
[system]
kind = "explicit"
adjacency = [[0, 1], [1, 0]]
[[system.subsystems]]
a = [[0.5]]
b = [[1.0]]
couplings = [{ neighbor = 1, a = [[0.1]] }]
[[system.subsystems]]
a = [[0.9]]
b = [[1.0]]
couplings = [{ neighbor = 0, a = [[0.2]] }]
[experiment]
bw_scale = 0.1
"#;
        let cfg = BenchmarkConfig::from_toml(text).unwrap();
        let sys = cfg.network().unwrap();
        assert_eq!(sys.a, DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.2, 0.9]));
        assert_eq!(sys.bw, DMatrix::identity(2, 2) * 0.1);
    }
}
