//! Distributed dynamic periodic event-triggered transmission.
//!
//! Every agent samples its state on the common grid `τ_v = v·h`. At each
//! sampling instant it evaluates the threshold function `ρ_i`, transmits when
//! `η_i + θ_i ρ_i < 0`, and advances its dynamic variable
//! `η_i ← (1 − λ_i) η_i + ρ_i`. Between transmissions the controllers hold the
//! last received states.

use std::fmt::Write as _;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::EtsError;
use crate::linalg;
use crate::network::NetworkSystem;

/// Norm guard for closed-loop runs.
pub const OVERFLOW_LIMIT: f64 = 1e12;
/// Below this state norm the Lyapunov diagnostic is not evaluated.
pub const CONVERGENCE_FLOOR: f64 = 1e-9;

/// Per-agent trigger parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentParams {
    pub sigma1: f64,
    pub theta: f64,
    pub lambda: f64,
    pub eta0: f64,
}

impl AgentParams {
    /// `1 − λ − 1/θ`, which must be non-negative.
    pub fn admissibility_margin(&self) -> f64 {
        1.0 - self.lambda - 1.0 / self.theta
    }
}

/// When a sampled state is sent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TriggerRule {
    /// `η + θρ < 0`.
    #[default]
    Dynamic,
    /// Every sampling instant.
    Periodic,
}

/// Which copy of a neighbor's state controller `i` uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NeighborStateSource {
    /// Neighbor `j`'s own last transmission, `x_j(t_{k'}^j)`.
    #[default]
    LastTransmitted,
    /// The neighbor sample `x_j(τ_v)` delivered together with agent `i`'s
    /// own transmission.
    SynchronousSample,
}

/// Triggering parameters shared by analysis, design and simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct TriggerParams {
    /// Sampling interval in discrete steps.
    pub h: usize,
    pub agents: Vec<AgentParams>,
    /// `σ₂^{ij}`; zero off the graph.
    pub sigma2: DMatrix<f64>,
    pub rule: TriggerRule,
}

impl TriggerParams {
    /// Same parameters for every agent; `sigma2` is placed on graph edges.
    pub fn uniform(system: &NetworkSystem, h: usize, agent: AgentParams, sigma2: f64) -> Self {
        let n = system.n_agents();
        let sigma2 = DMatrix::from_fn(n, n, |i, j| if system.graph.is_adjacent(i, j) { sigma2 } else { 0.0 });
        Self { h, agents: vec![agent; n], sigma2, rule: TriggerRule::Dynamic }
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    /// Checks `h ≥ 1`, sign constraints, `1 − λ − 1/θ ≥ 0`, and the graph pattern of `σ₂`.
    pub fn validate(&self, system: &NetworkSystem) -> Result<(), EtsError> {
        let n = system.n_agents();
        if self.h == 0 {
            return Err(EtsError::InvalidParameter("sampling interval h must be at least 1".into()));
        }
        if self.agents.len() != n || self.sigma2.shape() != (n, n) {
            return Err(EtsError::Dimension(format!("parameters for {} agents, network has {n}", self.agents.len())));
        }
        for (i, a) in self.agents.iter().enumerate() {
            if !(a.sigma1 >= 0.0) || !(a.theta > 0.0) || !(a.lambda > 0.0) || !(a.eta0 >= 0.0) {
                return Err(EtsError::InvalidParameter(format!(
                    "agent {i}: need sigma1 >= 0, theta > 0, lambda > 0, eta0 >= 0, got {a:?}"
                )));
            }
            let margin = a.admissibility_margin();
            if margin < 0.0 {
                return Err(EtsError::Inadmissible { agent: i, value: margin });
            }
        }
        for i in 0..n {
            for j in 0..n {
                let s = self.sigma2[(i, j)];
                if !(s >= 0.0) {
                    return Err(EtsError::InvalidParameter(format!("sigma2[{i}][{j}] = {s}")));
                }
                if s != 0.0 && (i == j || !system.graph.is_adjacent(i, j)) {
                    return Err(EtsError::SigmaOffGraph(i, j));
                }
            }
        }
        Ok(())
    }
}

/// Trigger parameters plus the weighting matrices `Ω_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtsConfig {
    pub params: TriggerParams,
    pub omegas: Vec<DMatrix<f64>>,
    pub neighbor_source: NeighborStateSource,
    ranges: Vec<Range<usize>>,
}

impl EtsConfig {
    pub fn new(
        system: &NetworkSystem,
        params: TriggerParams,
        omegas: Vec<DMatrix<f64>>,
        neighbor_source: NeighborStateSource,
    ) -> Result<Self, EtsError> {
        params.validate(system)?;
        if omegas.len() != system.n_agents() {
            return Err(EtsError::Dimension(format!("{} Omega matrices for {} agents", omegas.len(), system.n_agents())));
        }
        for (i, om) in omegas.iter().enumerate() {
            let ni = system.state_range(i).len();
            if om.shape() != (ni, ni) {
                return Err(EtsError::Dimension(format!("Omega_{i} is {:?}, expected {ni}x{ni}", om.shape())));
            }
            if !linalg::is_positive_definite(om) {
                return Err(EtsError::OmegaNotPositive(i));
            }
        }
        let ranges = (0..system.n_agents()).map(|i| system.state_range(i)).collect();
        Ok(Self { params, omegas, neighbor_source, ranges })
    }

    /// Same configuration with every `θ_i` replaced.
    pub fn with_theta(&self, theta: f64) -> Self {
        let mut out = self.clone();
        out.params.agents.iter_mut().for_each(|a| a.theta = theta);
        out
    }

    pub fn state_range(&self, i: usize) -> Range<usize> {
        self.ranges[i].clone()
    }
}

/// Threshold function of agent `i` at a sampling instant:
/// `σ₁ xᵢᵀΩᵢxᵢ − eᵢᵀΩᵢeᵢ + Σ_{j≠i} σ₂^{ij} (xᵢ−xⱼ)ᵀΩᵢ(xᵢ−xⱼ)`, with
/// `eᵢ = xᵢ(τ) − xᵢ(t_k)` and every `x` sampled at the same instant `τ`.
///
/// `x` is the global sampled state and `held` stacks each agent's last
/// transmitted state.
pub fn rho(i: usize, x: &DVector<f64>, held: &DVector<f64>, cfg: &EtsConfig) -> f64 {
    let ri = cfg.state_range(i);
    let om = &cfg.omegas[i];
    let xi = x.rows(ri.start, ri.len()).into_owned();
    let ei = &xi - held.rows(ri.start, ri.len());
    let mut value = cfg.params.agents[i].sigma1 * linalg::quad_form(&xi, om) - linalg::quad_form(&ei, om);
    for j in 0..cfg.params.n_agents() {
        let s = cfg.params.sigma2[(i, j)];
        if j != i && s != 0.0 {
            let rj = cfg.state_range(j);
            let d = &xi - x.rows(rj.start, rj.len());
            value += s * linalg::quad_form(&d, om);
        }
    }
    value
}

/// `η(τ_{v+1}) = (1 − λ) η(τ_v) + ρ(τ_v)`.
pub fn eta_step(eta: f64, rho: f64, lambda: f64) -> f64 {
    eta - lambda * eta + rho
}

/// Transmit iff `η + θρ < 0`.
pub fn trigger_decision(eta: f64, rho: f64, theta: f64) -> bool {
    eta + theta * rho < 0.0
}

/// One evaluation of the trigger at a sampling instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerCheck {
    pub t: usize,
    /// `η` before the update at this instant.
    pub eta: f64,
    /// `ρ` with the error accumulated since the previous transmission.
    pub rho: f64,
    pub fired: bool,
}

/// Complete record of a closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationLog {
    pub h: usize,
    /// `x(0), …, x(horizon)`.
    pub states: Vec<DVector<f64>>,
    /// `u(0), …, u(horizon − 1)`.
    pub control_inputs: Vec<DVector<f64>>,
    /// Event times per agent, starting with the forced event at `t = 0`.
    pub events: Vec<Vec<usize>>,
    /// `(τ_v, η_i(τ_v))` per agent, including the instant after the last sample.
    pub etas: Vec<Vec<(usize, f64)>>,
    pub checks: Vec<Vec<TriggerCheck>>,
}

impl SimulationLog {
    pub fn horizon(&self) -> usize {
        self.control_inputs.len()
    }

    pub fn transmission_counts(&self) -> Vec<usize> {
        self.events.iter().map(Vec::len).collect()
    }

    pub fn total_transmissions(&self) -> usize {
        self.events.iter().map(Vec::len).sum()
    }

    /// First `t` after which `‖x‖∞ < fraction·‖x(0)‖∞` for the rest of the run;
    /// `None` if the state never settles. A zero initial state settles at 0.
    pub fn settling_time(&self, fraction: f64) -> Option<usize> {
        let x0 = linalg::inf_norm(&self.states[0]);
        if x0 == 0.0 {
            return self.states.iter().all(|x| linalg::inf_norm(x) == 0.0).then_some(0);
        }
        let threshold = fraction * x0;
        let last_bad = self.states.iter().rposition(|x| linalg::inf_norm(x) >= threshold);
        match last_bad {
            None => Some(0),
            Some(t) if t + 1 < self.states.len() => Some(t + 1),
            Some(_) => None,
        }
    }

    pub fn min_eta(&self) -> f64 {
        self.etas.iter().flatten().map(|&(_, e)| e).fold(f64::INFINITY, f64::min)
    }

    /// `states.csv`: `t,x0,…`.
    pub fn states_csv(&self) -> String {
        let n = self.states.first().map_or(0, |x| x.len());
        let mut out = String::from("t");
        for k in 0..n {
            let _ = write!(out, ",x{k}");
        }
        out.push('\n');
        for (t, x) in self.states.iter().enumerate() {
            let _ = write!(out, "{t}");
            for v in x.iter() {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
        out
    }

    /// `events.csv`: `agent,t`.
    pub fn events_csv(&self) -> String {
        let mut out = String::from("agent,t\n");
        for (i, ev) in self.events.iter().enumerate() {
            for t in ev {
                let _ = writeln!(out, "{i},{t}");
            }
        }
        out
    }

    /// `eta.csv`: `agent,t,eta`.
    pub fn eta_csv(&self) -> String {
        let mut out = String::from("agent,t,eta\n");
        for (i, etas) in self.etas.iter().enumerate() {
            for (t, e) in etas {
                let _ = writeln!(out, "{i},{t},{e:?}");
            }
        }
        out
    }
}

fn check_gain_pattern(system: &NetworkSystem, k: &DMatrix<f64>) -> Result<(), EtsError> {
    if k.shape() != (system.n_inputs(), system.n_states()) {
        return Err(EtsError::Dimension(format!(
            "gain is {:?}, expected {}x{}",
            k.shape(),
            system.n_inputs(),
            system.n_states()
        )));
    }
    for i in 0..system.n_agents() {
        for j in 0..system.n_agents() {
            if i == j || system.graph.is_adjacent(i, j) {
                continue;
            }
            let (ri, rj) = (system.input_range(i), system.state_range(j));
            if k.view((ri.start, rj.start), (ri.len(), rj.len())).iter().any(|&v| v != 0.0) {
                return Err(EtsError::GainPattern(i, j));
            }
        }
    }
    Ok(())
}

/// Runs `x(t+1) = A x(t) + B K x_k(t)` for `horizon` steps under the
/// triggering scheme of `cfg`. Every agent transmits at `t = 0`.
pub fn simulate_closed_loop(
    system: &NetworkSystem,
    k: &DMatrix<f64>,
    cfg: &EtsConfig,
    x0: &DVector<f64>,
    horizon: usize,
) -> Result<SimulationLog, EtsError> {
    check_gain_pattern(system, k)?;
    let n_agents = system.n_agents();
    let n = system.n_states();
    if x0.len() != n {
        return Err(EtsError::Dimension(format!("x0 has {} entries, expected {n}", x0.len())));
    }
    let h = cfg.params.h;
    let talks = |i: usize, j: usize| i == j || system.graph.is_adjacent(i, j);

    let mut x = x0.clone();
    let mut held = x0.clone();
    // views[i] is controller i's copy of the global state; only blocks it
    // uses are ever read.
    let mut views: Vec<DVector<f64>> = vec![x0.clone(); n_agents];
    let mut eta: Vec<f64> = cfg.params.agents.iter().map(|a| a.eta0).collect();

    let mut log = SimulationLog {
        h,
        states: vec![x.clone()],
        control_inputs: Vec::with_capacity(horizon),
        events: vec![Vec::new(); n_agents],
        etas: vec![Vec::new(); n_agents],
        checks: vec![Vec::new(); n_agents],
    };

    for t in 0..horizon {
        if t % h == 0 {
            let mut fired = vec![false; n_agents];
            let mut next_eta = eta.clone();
            for i in 0..n_agents {
                let agent = cfg.params.agents[i];
                let r = rho(i, &x, &held, cfg);
                let fire = t == 0
                    || match cfg.params.rule {
                        TriggerRule::Periodic => true,
                        TriggerRule::Dynamic => trigger_decision(eta[i], r, agent.theta),
                    };
                log.checks[i].push(TriggerCheck { t, eta: eta[i], rho: r, fired: fire });
                log.etas[i].push((t, eta[i]));
                let r_after = if fire {
                    fired[i] = true;
                    log.events[i].push(t);
                    let ri = system.state_range(i);
                    held.rows_mut(ri.start, ri.len()).copy_from(&x.rows(ri.start, ri.len()));
                    rho(i, &x, &held, cfg)
                } else {
                    r
                };
                next_eta[i] = eta_step(eta[i], r_after, agent.lambda);
            }
            for i in 0..n_agents {
                for j in 0..n_agents {
                    if !talks(i, j) {
                        continue;
                    }
                    let refresh = match cfg.neighbor_source {
                        NeighborStateSource::LastTransmitted => fired[j],
                        NeighborStateSource::SynchronousSample => fired[i] || (i == j && fired[j]),
                    };
                    if refresh {
                        let rj = system.state_range(j);
                        views[i].rows_mut(rj.start, rj.len()).copy_from(&x.rows(rj.start, rj.len()));
                    }
                }
            }
            eta = next_eta;
        }

        let mut u = DVector::zeros(system.n_inputs());
        for i in 0..n_agents {
            let ri = system.input_range(i);
            for j in 0..n_agents {
                if !talks(i, j) {
                    continue;
                }
                let rj = system.state_range(j);
                let kij = k.view((ri.start, rj.start), (ri.len(), rj.len()));
                let contrib = kij * views[i].rows(rj.start, rj.len());
                let mut ui = u.rows_mut(ri.start, ri.len());
                ui += contrib;
            }
        }
        let next = &system.a * &x + &system.b * &u;
        if !next.iter().all(|v| v.is_finite()) || next.norm() > OVERFLOW_LIMIT {
            return Err(EtsError::Overflow { step: t + 1, limit: OVERFLOW_LIMIT });
        }
        log.control_inputs.push(u);
        x = next;
        log.states.push(x.clone());
    }
    if horizon % h == 0 {
        for i in 0..n_agents {
            log.etas[i].push((horizon, eta[i]));
        }
    }
    Ok(log)
}

/// Re-runs only the trigger logic along a recorded state trajectory and
/// returns the event times per agent. The trajectory is not affected by the
/// replayed decisions.
pub fn replay_decisions(states: &[DVector<f64>], cfg: &EtsConfig) -> Vec<Vec<usize>> {
    let n_agents = cfg.params.n_agents();
    let h = cfg.params.h;
    let Some(first) = states.first() else {
        return vec![Vec::new(); n_agents];
    };
    let mut held = first.clone();
    let mut eta: Vec<f64> = cfg.params.agents.iter().map(|a| a.eta0).collect();
    let mut events = vec![Vec::new(); n_agents];
    // Same sampling grid as the simulator: instants strictly before the final state.
    for (t, x) in states.iter().enumerate().take(states.len() - 1).step_by(h) {
        for i in 0..n_agents {
            let agent = cfg.params.agents[i];
            let r = rho(i, x, &held, cfg);
            let fire = t == 0
                || match cfg.params.rule {
                    TriggerRule::Periodic => true,
                    TriggerRule::Dynamic => trigger_decision(eta[i], r, agent.theta),
                };
            let r_after = if fire {
                events[i].push(t);
                let ri = cfg.state_range(i);
                held.rows_mut(ri.start, ri.len()).copy_from(&x.rows(ri.start, ri.len()));
                rho(i, x, &held, cfg)
            } else {
                r
            };
            eta[i] = eta_step(eta[i], r_after, agent.lambda);
        }
    }
    events
}

/// One step of the sampled Lyapunov statistic `V = xᵀPx + (h−1)Σᵢηᵢ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecreaseStep {
    /// Sampling instant `τ_v` the step starts from.
    pub t: usize,
    /// `V(τ_{v+1}) − V(τ_v)`.
    pub delta: f64,
    /// `‖x(τ_v)‖₂`.
    pub state_norm: f64,
}

/// Differences of `xᵀPx + (h−1)Σᵢηᵢ` between consecutive sampling instants.
pub fn lyapunov_decrease_report(log: &SimulationLog, p: &DMatrix<f64>) -> Vec<DecreaseStep> {
    let h = log.h;
    let instants: Vec<usize> = log.etas.first().map(|e| e.iter().map(|&(t, _)| t).collect()).unwrap_or_default();
    let value = |v: usize| {
        let t = instants[v];
        let eta_sum: f64 = log.etas.iter().map(|e| e[v].1).sum();
        linalg::quad_form(&log.states[t], p) + (h as f64 - 1.0) * eta_sum
    };
    (0..instants.len().saturating_sub(1))
        .map(|v| DecreaseStep {
            t: instants[v],
            delta: value(v + 1) - value(v),
            state_norm: log.states[instants[v]].norm(),
        })
        .collect()
}

/// Steps above the convergence floor whose `delta` is not negative.
pub fn decrease_violations(report: &[DecreaseStep], floor: f64) -> Vec<DecreaseStep> {
    report.iter().copied().filter(|s| s.state_norm > floor && s.delta >= 0.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{assemble_global, Graph, Subsystem};
    use std::collections::BTreeMap;

    fn scalar_network(n_agents: usize, a: f64, graph: Graph) -> NetworkSystem {
        let subs = (0..n_agents)
            .map(|i| Subsystem {
                a: DMatrix::from_element(1, 1, a),
                b: DMatrix::from_element(1, 1, 1.0),
                couplings: graph.neighbors(i).map(|j| (j, DMatrix::zeros(1, 1))).collect::<BTreeMap<_, _>>(),
                bw: DMatrix::identity(1, 1),
            })
            .collect();
        assemble_global(graph, subs).unwrap()
    }

    fn agent(sigma1: f64) -> AgentParams {
        AgentParams { sigma1, theta: 2.0, lambda: 0.2, eta0: 0.0 }
    }

    fn config(net: &NetworkSystem, sigma1: f64, sigma2: f64, h: usize) -> EtsConfig {
        let params = TriggerParams::uniform(net, h, agent(sigma1), sigma2);
        let omegas = vec![DMatrix::identity(1, 1); net.n_agents()];
        EtsConfig::new(net, params, omegas, NeighborStateSource::LastTransmitted).unwrap()
    }

    #[test]
    fn rho_hand_example() {
        let net = scalar_network(2, 0.5, Graph::chain(2));
        let cfg = config(&net, 0.02, 0.01, 1);
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let held = DVector::from_vec(vec![0.5, 2.0]);
        assert!((rho(0, &x, &held, &cfg) - (-0.22)).abs() < 1e-15);
    }

    #[test]
    fn rho_special_cases() {
        let net = scalar_network(2, 0.5, Graph::chain(2));
        let x = DVector::from_vec(vec![1.5, 1.5]);
        let cfg = config(&net, 0.02, 0.0, 1);
        assert!((rho(0, &x, &x, &cfg) - 0.02 * 2.25).abs() < 1e-15);
        let cfg = config(&net, 0.0, 0.01, 1);
        assert_eq!(rho(0, &x, &x, &cfg), 0.0);
    }

    #[test]
    fn eta_and_trigger_examples() {
        assert!((eta_step(1.0, -0.1, 0.2) - 0.7).abs() < 1e-15);
        assert_eq!(eta_step(0.0, 0.0, 0.2), 0.0);
        assert!(!trigger_decision(0.7, -0.22, 2.0));
        assert!(!trigger_decision(0.0, 0.0, 2.0));
        assert!(!trigger_decision(3.0, 0.5, 1e9));
        assert!(trigger_decision(1.0, -1e-8, 1e9));
        assert!(!trigger_decision(1.0, -1e-8, 2.0));
    }

    #[test]
    fn inadmissible_parameters_rejected() {
        let net = scalar_network(1, 0.5, Graph::empty(1));
        let mut params = TriggerParams::uniform(&net, 1, agent(0.1), 0.0);
        params.agents[0].theta = 1.0;
        params.agents[0].lambda = 0.5;
        assert!(matches!(params.validate(&net), Err(EtsError::Inadmissible { agent: 0, .. })));
    }

    #[test]
    fn sigma2_off_graph_rejected() {
        let net = scalar_network(3, 0.5, Graph::chain(3));
        let mut params = TriggerParams::uniform(&net, 1, agent(0.1), 0.01);
        params.sigma2[(0, 2)] = 0.01;
        assert_eq!(params.validate(&net), Err(EtsError::SigmaOffGraph(0, 2)));
    }

    #[test]
    fn non_positive_omega_rejected() {
        let net = scalar_network(1, 0.5, Graph::empty(1));
        let params = TriggerParams::uniform(&net, 1, agent(0.1), 0.0);
        let err = EtsConfig::new(&net, params, vec![DMatrix::zeros(1, 1)], Default::default()).unwrap_err();
        assert_eq!(err, EtsError::OmegaNotPositive(0));
    }

    #[test]
    fn gain_pattern_violation_rejected() {
        let net = scalar_network(3, 0.5, Graph::chain(3));
        let cfg = config(&net, 0.1, 0.0, 1);
        let mut k = DMatrix::zeros(3, 3);
        k[(0, 2)] = 1.0;
        let err = simulate_closed_loop(&net, &k, &cfg, &DVector::from_element(3, 1.0), 5).unwrap_err();
        assert_eq!(err, EtsError::GainPattern(0, 2));
    }

    #[test]
    fn stable_open_loop_decays_with_only_forced_events() {
        let net = scalar_network(2, 0.5, Graph::chain(2));
        let cfg = config(&net, 0.1, 0.0, 2);
        let log = simulate_closed_loop(&net, &DMatrix::zeros(2, 2), &cfg, &DVector::from_vec(vec![1.0, -1.0]), 40).unwrap();
        assert!(log.states[40].norm() < 1e-10);
        assert_eq!(log.events[0][0], 0);
        for c in log.checks.iter().flatten().filter(|c| !c.fired) {
            assert!(c.eta + 2.0 * c.rho >= 0.0);
        }
    }

    #[test]
    fn threshold_free_rule_never_fires_without_error() {
        // K = 0 and a = 1 freeze the state, so the error stays zero.
        let net = scalar_network(2, 1.0, Graph::chain(2));
        let cfg = config(&net, 0.0, 0.0, 1);
        let log = simulate_closed_loop(&net, &DMatrix::zeros(2, 2), &cfg, &DVector::from_vec(vec![1.0, 2.0]), 20).unwrap();
        assert_eq!(log.events, vec![vec![0], vec![0]]);
    }

    #[test]
    fn periodic_rule_fires_every_sample() {
        let net = scalar_network(2, 0.9, Graph::chain(2));
        let mut cfg = config(&net, 0.0, 0.0, 2);
        cfg.params.rule = TriggerRule::Periodic;
        let k = DMatrix::from_row_slice(2, 2, &[-0.5, 0.1, 0.1, -0.5]);
        let log = simulate_closed_loop(&net, &k, &cfg, &DVector::from_vec(vec![1.0, 2.0]), 30).unwrap();
        assert_eq!(log.transmission_counts(), vec![15, 15]);
    }

    #[test]
    fn zero_state_stays_zero() {
        let net = scalar_network(2, 1.5, Graph::chain(2));
        let cfg = config(&net, 0.1, 0.01, 2);
        let k = DMatrix::from_row_slice(2, 2, &[-1.0, 0.1, 0.1, -1.0]);
        let log = simulate_closed_loop(&net, &k, &cfg, &DVector::zeros(2), 20).unwrap();
        assert_eq!(log.settling_time(1e-3), Some(0));
        assert_eq!(log.events, vec![vec![0], vec![0]]);
        let report = lyapunov_decrease_report(&log, &DMatrix::identity(2, 2));
        assert!(report.iter().all(|s| s.delta == 0.0));
    }

    #[test]
    fn diverging_trajectory_shows_positive_residuals() {
        let net = scalar_network(1, 1.1, Graph::empty(1));
        let cfg = config(&net, 0.1, 0.0, 1);
        let log = simulate_closed_loop(&net, &DMatrix::zeros(1, 1), &cfg, &DVector::from_element(1, 1.0), 10).unwrap();
        let report = lyapunov_decrease_report(&log, &DMatrix::identity(1, 1));
        assert!(report.iter().all(|s| s.delta > 0.0));
        assert_eq!(log.settling_time(1e-3), None);
    }

    #[test]
    fn overflow_is_reported() {
        let net = scalar_network(1, 1e4, Graph::empty(1));
        let cfg = config(&net, 0.1, 0.0, 1);
        let err = simulate_closed_loop(&net, &DMatrix::zeros(1, 1), &cfg, &DVector::from_element(1, 1.0), 10);
        assert!(matches!(err, Err(EtsError::Overflow { .. })));
    }

    #[test]
    fn replay_matches_simulation() {
        let net = scalar_network(2, 1.02, Graph::chain(2));
        let cfg = config(&net, 0.05, 0.01, 2);
        let k = DMatrix::from_row_slice(2, 2, &[-0.3, 0.05, 0.05, -0.3]);
        let log = simulate_closed_loop(&net, &k, &cfg, &DVector::from_vec(vec![1.0, -0.5]), 60).unwrap();
        assert_eq!(replay_decisions(&log.states, &cfg), log.events);
    }
}
