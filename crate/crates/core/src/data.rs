//! Open-loop data collection and the quadratic-matrix-inequality description
//! of every `[A B]` consistent with the data.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::DataError;
use crate::linalg;
use crate::network::NetworkSystem;

/// State-norm guard for open-loop experiments.
pub const OVERFLOW_LIMIT: f64 = 1e12;
/// Name of the generator recorded with every dataset.
pub const RNG_NAME: &str = "ChaCha8Rng";
/// Redraws allowed when a realized noise sequence leaves its declared bound.
const MAX_NOISE_REDRAWS: usize = 64;

/// Open-loop excitation experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Number of input samples `ρ`.
    pub horizon: usize,
    /// Inputs are i.i.d. uniform on `[-u_max, u_max]` per channel.
    pub u_max: f64,
    /// Disturbances are i.i.d. uniform on `[-w_max, w_max]` per channel.
    pub w_max: f64,
    pub seed: u64,
    /// Initial state; `None` starts from the origin.
    pub x0: Option<DVector<f64>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { horizon: 200, u_max: 1.0, w_max: 0.001, seed: 1, x0: None }
    }
}

impl ExperimentConfig {
    /// `ρ ≥ n + m` is needed for the data to be informative; returns a warning
    /// message otherwise.
    pub fn informativity_warning(&self, system: &NetworkSystem) -> Option<String> {
        let need = system.n_states() + system.n_inputs();
        (self.horizon < need).then(|| format!("horizon {} is shorter than n + m = {need}", self.horizon))
    }
}

/// Stacked experiment data. Column `t` of `x_plus` is the state at `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrices {
    pub x: DMatrix<f64>,
    pub x_plus: DMatrix<f64>,
    pub u: DMatrix<f64>,
    /// Realized disturbance; kept for checks only, never used by a design.
    pub w_true: DMatrix<f64>,
    pub seed: u64,
}

impl DataMatrices {
    pub fn horizon(&self) -> usize {
        self.x.ncols()
    }

    /// `X⁺ − A X − B U − B_w W` for a candidate generating system.
    pub fn residual(&self, a: &DMatrix<f64>, b: &DMatrix<f64>, bw: &DMatrix<f64>) -> DMatrix<f64> {
        &self.x_plus - a * &self.x - b * &self.u - bw * &self.w_true
    }
}

/// Noise set `{W : [Wᵀ; I]ᵀ [[Q_d, S_d], [S_dᵀ, R_d]] [Wᵀ; I] ⪰ 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBound {
    pub q: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl NoiseBound {
    /// `W Q_d Wᵀ + W S_d + S_dᵀ Wᵀ + R_d`, which must be PSD for members.
    pub fn quadratic_form(&self, w: &DMatrix<f64>) -> DMatrix<f64> {
        let ws = w * &self.s;
        linalg::symmetrize(&(w * &self.q * w.transpose() + &ws + ws.transpose() + &self.r))
    }

    pub fn contains(&self, w: &DMatrix<f64>) -> bool {
        linalg::lambda_min(&self.quadratic_form(w)) >= -1e-12 * (1.0 + linalg::max_abs(&self.r))
    }

    pub fn q_is_negative_definite(&self) -> bool {
        linalg::is_positive_definite(&-&self.q)
    }
}

/// Energy bound for box noise: `Q_d = −I_ρ`, `S_d = 0`, `R_d = w_max² ρ I`.
pub fn box_noise_bound(w_max: f64, horizon: usize, n_disturbances: usize) -> NoiseBound {
    NoiseBound {
        q: -DMatrix::identity(horizon, horizon),
        s: DMatrix::zeros(horizon, n_disturbances),
        r: DMatrix::identity(n_disturbances, n_disturbances) * (w_max * w_max * horizon as f64),
    }
}

/// Simulates `x(T+1) = A x(T) + B u(T) + B_w w(T)` for `T = 0..ρ−1`.
///
/// The realized noise is checked against the box bound of `cfg` and redrawn
/// (continuing the same stream) if it falls outside.
pub fn run_experiment(system: &NetworkSystem, cfg: &ExperimentConfig) -> Result<DataMatrices, DataError> {
    let (n, m, nw, rho) = (system.n_states(), system.n_inputs(), system.n_disturbances(), cfg.horizon);
    if rho == 0 {
        return Err(DataError::Dimension("horizon must be at least 1".into()));
    }
    let x0 = cfg.x0.clone().unwrap_or_else(|| DVector::zeros(n));
    if x0.len() != n {
        return Err(DataError::Dimension(format!("x0 has {} entries, expected {n}", x0.len())));
    }
    let bound = box_noise_bound(cfg.w_max, rho, nw);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let draw = |rng: &mut ChaCha8Rng, rows: usize, amp: f64| {
        DMatrix::from_fn(rows, rho, |_, _| if amp > 0.0 { rng.random_range(-amp..=amp) } else { 0.0 })
    };
    // Column-major fill order is part of the replay contract.
    let u = draw(&mut rng, m, cfg.u_max);
    let mut w = draw(&mut rng, nw, cfg.w_max);
    let mut attempts = 1;
    while !bound.contains(&w) {
        if attempts >= MAX_NOISE_REDRAWS {
            return Err(DataError::NoiseBoundViolated { attempts });
        }
        w = draw(&mut rng, nw, cfg.w_max);
        attempts += 1;
    }

    let mut x = DMatrix::zeros(n, rho);
    let mut x_plus = DMatrix::zeros(n, rho);
    let mut state = x0;
    for t in 0..rho {
        x.set_column(t, &state);
        let next = &system.a * &state + &system.b * u.column(t) + &system.bw * w.column(t);
        if !next.iter().all(|v| v.is_finite()) || next.norm() > OVERFLOW_LIMIT {
            return Err(DataError::Overflow { step: t + 1, limit: OVERFLOW_LIMIT });
        }
        x_plus.set_column(t, &next);
        state = next;
    }
    Ok(DataMatrices { x, x_plus, u, w_true: w, seed: cfg.seed })
}

/// `Θ_AB` together with the dimensions it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaAB {
    pub theta: DMatrix<f64>,
    pub n: usize,
    pub m: usize,
    pub n_w: usize,
    /// `Θ_AB = L · middle · Lᵀ` when built from data.
    pub factors: Option<ThetaFactors>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaFactors {
    pub l: DMatrix<f64>,
    pub middle: DMatrix<f64>,
}

/// `Θ_AB` in block-diagonal form: with `T = [[I, 0], [Ŝ, I]]`,
/// `T Θ_AB Tᵀ = blkdiag(Θ₁₁, N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoupledTheta {
    /// Upper-left `(n+m) × (n+m)` block.
    pub theta11: DMatrix<f64>,
    /// `Ŝ = −(Θ₁₁⁻¹Θ₁₂)ᵀ`, the least-squares estimate of `[A B]` for the
    /// default noise bound.
    pub estimate: DMatrix<f64>,
    /// Schur complement `Θ₂₂ − Θ₂₁Θ₁₁⁻¹Θ₁₂`.
    pub schur: DMatrix<f64>,
}

impl ThetaAB {
    /// Wraps a given matrix without data factors.
    pub fn from_matrix(theta: DMatrix<f64>, n: usize, m: usize, n_w: usize) -> Self {
        Self { theta, n, m, n_w, factors: None }
    }

    pub fn norm(&self) -> f64 {
        self.theta.norm()
    }

    /// Block-diagonal form; `None` unless `Θ₁₁` is negative definite. The
    /// Schur complement is evaluated from the data factors when available,
    /// which avoids forming it as a difference of large terms.
    pub fn decoupled(&self) -> Option<DecoupledTheta> {
        let k = self.n + self.m;
        if self.theta.shape() != (k + self.n, k + self.n) {
            return None;
        }
        let theta11 = self.theta.view((0, 0), (k, k)).into_owned();
        let theta12 = self.theta.view((0, k), (k, self.n)).into_owned();
        let chol = (-&theta11).cholesky()?;
        let estimate = chol.solve(&theta12).transpose();
        let schur = match &self.factors {
            Some(f) => {
                let mut reduced = f.l.rows(k, self.n).into_owned();
                reduced += &estimate * f.l.rows(0, k);
                linalg::symmetrize(&(&reduced * &f.middle * reduced.transpose()))
            }
            None => {
                let theta22 = self.theta.view((k, k), (self.n, self.n));
                linalg::symmetrize(&(theta22 + theta12.transpose() * estimate.transpose()))
            }
        };
        Some(DecoupledTheta { theta11, estimate, schur })
    }
}

/// `Θ_AB = L [[Q_d, S_d], [S_dᵀ, R_d]] Lᵀ` with `L = [[−X, 0], [−U, 0], [X⁺, B_w]]`.
pub fn build_theta(data: &DataMatrices, bound: &NoiseBound, bw: &DMatrix<f64>) -> Result<ThetaAB, DataError> {
    let (n, rho) = data.x.shape();
    let m = data.u.nrows();
    let nw = bw.ncols();
    let dims_ok = data.x_plus.shape() == (n, rho)
        && data.u.ncols() == rho
        && bw.nrows() == n
        && bound.q.shape() == (rho, rho)
        && bound.s.shape() == (rho, nw)
        && bound.r.shape() == (nw, nw);
    if !dims_ok {
        return Err(DataError::Dimension(format!(
            "data {n}x{rho}, inputs {m}, B_w {}x{nw}, bound Q {:?} S {:?} R {:?}",
            bw.nrows(),
            bound.q.shape(),
            bound.s.shape(),
            bound.r.shape()
        )));
    }
    let mut l = DMatrix::zeros(2 * n + m, rho + nw);
    l.view_mut((0, 0), (n, rho)).copy_from(&(-&data.x));
    l.view_mut((n, 0), (m, rho)).copy_from(&(-&data.u));
    l.view_mut((n + m, 0), (n, rho)).copy_from(&data.x_plus);
    l.view_mut((n + m, rho), (n, nw)).copy_from(bw);
    let mut mid = DMatrix::zeros(rho + nw, rho + nw);
    mid.view_mut((0, 0), (rho, rho)).copy_from(&bound.q);
    mid.view_mut((0, rho), (rho, nw)).copy_from(&bound.s);
    mid.view_mut((rho, 0), (nw, rho)).copy_from(&bound.s.transpose());
    mid.view_mut((rho, rho), (nw, nw)).copy_from(&bound.r);
    let theta = linalg::symmetrize(&(&l * &mid * l.transpose()));
    Ok(ThetaAB { theta, n, m, n_w: nw, factors: Some(ThetaFactors { l, middle: mid }) })
}

/// Outcome of a data-consistency test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub member: bool,
    pub lambda_min: f64,
    pub tolerance: f64,
}

/// Tests `[[A B]ᵀ; I]ᵀ Θ_AB [[A B]ᵀ; I] ⪰ −tol·I` with `tol = 1e−8·(1 + ‖Θ‖)`.
pub fn membership(a: &DMatrix<f64>, b: &DMatrix<f64>, theta: &ThetaAB) -> Result<Membership, DataError> {
    let (n, m) = (theta.n, theta.m);
    if a.shape() != (n, n) || b.shape() != (n, m) {
        return Err(DataError::Dimension(format!("A {:?}, B {:?} for Θ with n={n}, m={m}", a.shape(), b.shape())));
    }
    let mut z = DMatrix::zeros(2 * n + m, n);
    z.view_mut((0, 0), (n, n)).copy_from(&a.transpose());
    z.view_mut((n, 0), (m, n)).copy_from(&b.transpose());
    z.view_mut((n + m, 0), (n, n)).fill_with_identity();
    let quad = linalg::symmetrize(&(z.transpose() * &theta.theta * &z));
    let lambda_min = linalg::lambda_min(&quad);
    let tolerance = 1e-8 * (1.0 + theta.norm());
    Ok(Membership { member: lambda_min >= -tolerance, lambda_min, tolerance })
}

/// Serializes a dataset as CSV: one `#` header line with the dimensions,
/// horizon, seed and generator, a column header, then one row per signal
/// channel (`x*`, `xp*`, `u*`, `w*`) with one column per time step.
pub fn to_csv(data: &DataMatrices) -> String {
    let (n, rho) = data.x.shape();
    let m = data.u.nrows();
    let nw = data.w_true.nrows();
    let mut out = String::new();
    let _ = writeln!(out, "# n={n} m={m} nw={nw} rho={rho} seed={} rng={RNG_NAME}", data.seed);
    out.push_str("signal");
    for t in 0..rho {
        let _ = write!(out, ",t{t}");
    }
    out.push('\n');
    for (prefix, mat) in [("x", &data.x), ("xp", &data.x_plus), ("u", &data.u), ("w", &data.w_true)] {
        for r in 0..mat.nrows() {
            let _ = write!(out, "{prefix}{r}");
            for t in 0..rho {
                let _ = write!(out, ",{:?}", mat[(r, t)]);
            }
            out.push('\n');
        }
    }
    out
}

/// Parses the format written by [`to_csv`].
pub fn from_csv(text: &str) -> Result<DataMatrices, DataError> {
    let bad = |msg: &str| DataError::Parse(msg.to_string());
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file"))?;
    let field = |key: &str| -> Result<&str, DataError> {
        header
            .trim_start_matches('#')
            .split_whitespace()
            .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| DataError::Parse(format!("missing `{key}` in header")))
    };
    let num = |key: &str| -> Result<usize, DataError> {
        field(key)?.parse().map_err(|_| DataError::Parse(format!("bad `{key}`")))
    };
    let (n, m, nw, rho) = (num("n")?, num("m")?, num("nw")?, num("rho")?);
    let seed: u64 = field("seed")?.parse().map_err(|_| bad("bad `seed`"))?;
    lines.next().ok_or_else(|| bad("missing column header"))?;
    let mut read_block = |prefix: &str, rows: usize| -> Result<DMatrix<f64>, DataError> {
        let mut mat = DMatrix::zeros(rows, rho);
        for r in 0..rows {
            let line = lines.next().ok_or_else(|| DataError::Parse(format!("missing row {prefix}{r}")))?;
            let mut cells = line.split(',');
            if cells.next() != Some(format!("{prefix}{r}").as_str()) {
                return Err(DataError::Parse(format!("expected row {prefix}{r}")));
            }
            for t in 0..rho {
                let cell = cells.next().ok_or_else(|| DataError::Parse(format!("row {prefix}{r} is short")))?;
                mat[(r, t)] = cell.trim().parse().map_err(|_| DataError::Parse(format!("bad number `{cell}`")))?;
            }
        }
        Ok(mat)
    };
    let x = read_block("x", n)?;
    let x_plus = read_block("xp", n)?;
    let u = read_block("u", m)?;
    let w_true = read_block("w", nw)?;
    Ok(DataMatrices { x, x_plus, u, w_true, seed })
}
