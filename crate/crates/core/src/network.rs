//! Interconnection graph, subsystem dynamics, and the assembled network.
//!
//! Agents are indexed from zero. Every agent `i` owns a state block of size
//! `n_i`, an input block of size `m_i` and a disturbance block of size
//! `n_wi`; the global vectors stack those blocks in agent order and
//! [`NetworkSystem::state_range`] and friends give the index ranges.

use std::collections::BTreeMap;
use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::ModelError;
use crate::linalg;

/// Relative singular-value tolerance for the `B_w` full-column-rank check.
pub const RANK_TOL: f64 = 1e-10;

/// Undirected communication / interconnection graph without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<bool>>,
}

impl Graph {
    /// Builds a graph from a 0/1 adjacency matrix.
    pub fn new(adjacency: &[Vec<u8>]) -> Result<Self, ModelError> {
        let n = adjacency.len();
        if n == 0 {
            return Err(ModelError::InvalidGraph("graph has no agents".into()));
        }
        let mut adj = vec![vec![false; n]; n];
        for (i, row) in adjacency.iter().enumerate() {
            if row.len() != n {
                return Err(ModelError::InvalidGraph(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            for (j, &c) in row.iter().enumerate() {
                match c {
                    0 => {}
                    1 => adj[i][j] = true,
                    other => return Err(ModelError::InvalidGraph(format!("entry ({i},{j}) = {other}"))),
                }
            }
        }
        for i in 0..n {
            if adj[i][i] {
                return Err(ModelError::InvalidGraph(format!("self-loop at agent {i}")));
            }
            for j in 0..i {
                if adj[i][j] != adj[j][i] {
                    return Err(ModelError::InvalidGraph(format!("asymmetric pair ({i},{j})")));
                }
            }
        }
        Ok(Self { adjacency: adj })
    }

    /// Path graph `0 - 1 - ... - (n-1)`.
    pub fn chain(n: usize) -> Self {
        let mut adj = vec![vec![0u8; n]; n];
        for i in 1..n {
            adj[i][i - 1] = 1;
            adj[i - 1][i] = 1;
        }
        Self::new(&adj).expect("chain adjacency is valid")
    }

    /// Graph without any edges.
    pub fn empty(n: usize) -> Self {
        Self::new(&vec![vec![0u8; n]; n]).expect("empty adjacency is valid")
    }

    pub fn n_agents(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i][j]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i].iter().enumerate().filter(|(_, &a)| a).map(|(j, _)| j)
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).count()
    }

    pub fn adjacency_matrix(&self) -> Vec<Vec<u8>> {
        self.adjacency.iter().map(|r| r.iter().map(|&a| u8::from(a)).collect()).collect()
    }

    /// Graph Laplacian `L = D - C`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.n_agents();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.degree(i) as f64
            } else if self.adjacency[i][j] {
                -1.0
            } else {
                0.0
            }
        })
    }
}

/// One agent's local model `x_i⁺ = A_i x_i + Σ_j A_ij x_j + B_i u_i + B_wi w_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Coupling blocks `A_ij`, keyed by the neighbor index `j`.
    pub couplings: BTreeMap<usize, DMatrix<f64>>,
    pub bw: DMatrix<f64>,
}

impl Subsystem {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_disturbances(&self) -> usize {
        self.bw.ncols()
    }
}

/// The assembled network together with its per-agent block layout.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSystem {
    pub graph: Graph,
    pub subsystems: Vec<Subsystem>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub bw: DMatrix<f64>,
    state_offsets: Vec<Range<usize>>,
    input_offsets: Vec<Range<usize>>,
    disturbance_offsets: Vec<Range<usize>>,
}

fn offsets(sizes: impl Iterator<Item = usize>) -> Vec<Range<usize>> {
    let mut start = 0;
    sizes
        .map(|s| {
            let r = start..start + s;
            start += s;
            r
        })
        .collect()
}

/// Lays the subsystems out into global `(A, B, B_w)`.
///
/// Fails on a subsystem count or block dimension mismatch, a coupling
/// supplied for a non-adjacent pair, or a rank-deficient `B_wi`.
pub fn assemble_global(graph: Graph, subsystems: Vec<Subsystem>) -> Result<NetworkSystem, ModelError> {
    let n_agents = graph.n_agents();
    if subsystems.len() != n_agents {
        return Err(ModelError::Dimension(format!(
            "{} subsystems for a graph with {n_agents} agents",
            subsystems.len()
        )));
    }
    for (i, s) in subsystems.iter().enumerate() {
        if !s.a.is_square() {
            return Err(ModelError::Dimension(format!("A_{i} is {}x{}", s.a.nrows(), s.a.ncols())));
        }
        if s.b.nrows() != s.n_states() || s.bw.nrows() != s.n_states() {
            return Err(ModelError::Dimension(format!("B_{i} or B_w{i} row count differs from n_{i}")));
        }
        for (&j, aij) in &s.couplings {
            if j >= n_agents || !graph.is_adjacent(i, j) {
                return Err(ModelError::CouplingWithoutEdge(i, j));
            }
            if aij.nrows() != s.n_states() || aij.ncols() != subsystems[j].n_states() {
                return Err(ModelError::Dimension(format!(
                    "A_{i}{j} is {}x{}, expected {}x{}",
                    aij.nrows(),
                    aij.ncols(),
                    s.n_states(),
                    subsystems[j].n_states()
                )));
            }
        }
        if !linalg::has_full_column_rank(&s.bw, RANK_TOL) {
            return Err(ModelError::RankDeficient(i));
        }
    }

    let state_offsets = offsets(subsystems.iter().map(Subsystem::n_states));
    let input_offsets = offsets(subsystems.iter().map(Subsystem::n_inputs));
    let disturbance_offsets = offsets(subsystems.iter().map(Subsystem::n_disturbances));
    let n = state_offsets.last().map_or(0, |r| r.end);
    let m = input_offsets.last().map_or(0, |r| r.end);
    let nw = disturbance_offsets.last().map_or(0, |r| r.end);

    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, m);
    let mut bw = DMatrix::zeros(n, nw);
    for (i, s) in subsystems.iter().enumerate() {
        let ri = &state_offsets[i];
        a.view_mut((ri.start, ri.start), (ri.len(), ri.len())).copy_from(&s.a);
        for (&j, aij) in &s.couplings {
            let rj = &state_offsets[j];
            a.view_mut((ri.start, rj.start), (ri.len(), rj.len())).copy_from(aij);
        }
        let ci = &input_offsets[i];
        b.view_mut((ri.start, ci.start), (ri.len(), ci.len())).copy_from(&s.b);
        let wi = &disturbance_offsets[i];
        bw.view_mut((ri.start, wi.start), (ri.len(), wi.len())).copy_from(&s.bw);
    }
    Ok(NetworkSystem { graph, subsystems, a, b, bw, state_offsets, input_offsets, disturbance_offsets })
}

impl NetworkSystem {
    /// Rebuilds the per-agent view from global matrices with the same layout as
    /// `self`. Blocks between non-adjacent agents stay in the global matrices
    /// only.
    fn with_global(&self, a: DMatrix<f64>, b: DMatrix<f64>) -> Self {
        let subsystems = (0..self.n_agents())
            .map(|i| {
                let ri = &self.state_offsets[i];
                let ci = &self.input_offsets[i];
                let couplings = self
                    .graph
                    .neighbors(i)
                    .map(|j| {
                        let rj = &self.state_offsets[j];
                        (j, a.view((ri.start, rj.start), (ri.len(), rj.len())).into_owned())
                    })
                    .collect();
                Subsystem {
                    a: a.view((ri.start, ri.start), (ri.len(), ri.len())).into_owned(),
                    b: b.view((ri.start, ci.start), (ri.len(), ci.len())).into_owned(),
                    couplings,
                    bw: self.subsystems[i].bw.clone(),
                }
            })
            .collect();
        Self {
            graph: self.graph.clone(),
            subsystems,
            a,
            b,
            bw: self.bw.clone(),
            state_offsets: self.state_offsets.clone(),
            input_offsets: self.input_offsets.clone(),
            disturbance_offsets: self.disturbance_offsets.clone(),
        }
    }

    /// Same network with a different disturbance input `B_w = scale·I`
    /// per agent (square, one disturbance channel per state).
    pub fn with_disturbance_scale(&self, scale: f64) -> Result<Self, ModelError> {
        let subsystems = self
            .subsystems
            .iter()
            .map(|s| Subsystem { bw: DMatrix::identity(s.n_states(), s.n_states()) * scale, ..s.clone() })
            .collect();
        let layout = assemble_global(self.graph.clone(), subsystems)?;
        Ok(layout.with_global(self.a.clone(), self.b.clone()))
    }

    pub fn n_agents(&self) -> usize {
        self.graph.n_agents()
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_disturbances(&self) -> usize {
        self.bw.ncols()
    }

    pub fn state_range(&self, i: usize) -> Range<usize> {
        self.state_offsets[i].clone()
    }

    pub fn input_range(&self, i: usize) -> Range<usize> {
        self.input_offsets[i].clone()
    }

    pub fn disturbance_range(&self, i: usize) -> Range<usize> {
        self.disturbance_offsets[i].clone()
    }

    pub fn state_sizes(&self) -> Vec<usize> {
        self.state_offsets.iter().map(Range::len).collect()
    }

    pub fn input_sizes(&self) -> Vec<usize> {
        self.input_offsets.iter().map(Range::len).collect()
    }

    /// Block `(i, j)` of the global state matrix.
    pub fn a_block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let (ri, rj) = (&self.state_offsets[i], &self.state_offsets[j]);
        self.a.view((ri.start, rj.start), (ri.len(), rj.len())).into_owned()
    }

    /// Structural pattern of an `m × n` distributed gain: block `(i, j)` may be
    /// nonzero iff `i == j` or (unless `decentralized`) agents `i`, `j` are adjacent.
    pub fn gain_mask(&self, decentralized: bool) -> DMatrix<bool> {
        let mut mask = DMatrix::from_element(self.n_inputs(), self.n_states(), false);
        for i in 0..self.n_agents() {
            for j in 0..self.n_agents() {
                if i == j || (!decentralized && self.graph.is_adjacent(i, j)) {
                    for r in self.input_range(i) {
                        for c in self.state_range(j) {
                            mask[(r, c)] = true;
                        }
                    }
                }
            }
        }
        mask
    }

    /// Block-diagonal mask for `n × n` matrices with one block per agent.
    pub fn block_diagonal_mask(&self) -> DMatrix<bool> {
        let n = self.n_states();
        let mut mask = DMatrix::from_element(n, n, false);
        for r in &self.state_offsets {
            for i in r.clone() {
                for j in r.clone() {
                    mask[(i, j)] = true;
                }
            }
        }
        mask
    }
}

/// Physical constants of the coupled inverted-pendulum benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumConstants {
    /// Gravitational acceleration.
    pub gravity: f64,
    pub mass: f64,
    pub length: f64,
    /// Spring constant of the coupling springs.
    pub spring: f64,
}

impl Default for PendulumConstants {
    fn default() -> Self {
        Self { gravity: 10.0, mass: 1.0, length: 2.0, spring: 5.0 }
    }
}

/// Continuous-time matrices of one pendulum with `neighbors` springs attached.
#[derive(Debug, Clone, PartialEq)]
pub struct PendulumBlocks {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Coupling template for `c_ij = 1`.
    pub coupling: DMatrix<f64>,
}

pub fn pendulum_subsystem(c: &PendulumConstants, neighbors: usize) -> Result<PendulumBlocks, ModelError> {
    if !(c.mass > 0.0) {
        return Err(ModelError::InvalidConstant(format!("mass must be positive, got {}", c.mass)));
    }
    if !(c.length > 0.0) {
        return Err(ModelError::InvalidConstant(format!("length must be positive, got {}", c.length)));
    }
    let md2 = c.mass * c.length * c.length;
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, c.gravity / c.length - neighbors as f64 * c.spring / md2, 0.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0 / md2]);
    let coupling = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, c.spring / md2, 0.0]);
    Ok(PendulumBlocks { a, b, coupling })
}

/// Continuous-time pendulum network on `graph` with `B_wi = bw_scale·I₂`.
pub fn pendulum_network(c: &PendulumConstants, graph: Graph, bw_scale: f64) -> Result<NetworkSystem, ModelError> {
    let subsystems = (0..graph.n_agents())
        .map(|i| {
            let blocks = pendulum_subsystem(c, graph.degree(i))?;
            let couplings = graph.neighbors(i).map(|j| (j, blocks.coupling.clone())).collect();
            Ok(Subsystem { a: blocks.a, b: blocks.b, couplings, bw: DMatrix::identity(2, 2) * bw_scale })
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    assemble_global(graph, subsystems)
}

/// Exact zero-order-hold discretization of the global `(A, B)` with step
/// `step` seconds: `A_d = e^{A T}`, `B_d = ∫₀ᵀ e^{As} ds B`.
///
/// Both come from one exponential of the augmented matrix `[[A, B], [0, 0]]·T`.
/// The per-agent view is re-extracted from the result; fill-in between
/// non-adjacent agents is kept in the global matrices only. `B_w` is copied
/// unchanged since it already describes the discrete-time experiment.
pub fn discretize(system: &NetworkSystem, step: f64) -> Result<NetworkSystem, ModelError> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(ModelError::InvalidConstant(format!("discretization step must be positive, got {step}")));
    }
    if system.a.iter().chain(system.b.iter()).any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite);
    }
    let (n, m) = (system.n_states(), system.n_inputs());
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&system.a * step));
    aug.view_mut((0, n), (n, m)).copy_from(&(&system.b * step));
    let e = aug.exp();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite);
    }
    let ad = e.view((0, 0), (n, n)).into_owned();
    let bd = e.view((0, n), (n, m)).into_owned();
    Ok(system.with_global(ad, bd))
}
