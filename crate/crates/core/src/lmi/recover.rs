//! Controller gain and triggering matrices from a co-design solution.

use nalgebra::DMatrix;

use super::solver::{solve, verify, DesignResult, SdpBackend, SolveOptions};
use super::theorems::LmiProblem;
use crate::error::LmiError;
use crate::linalg;

/// `G_i` with a larger condition number are regularized.
pub const CONDITION_LIMIT: f64 = 1e10;
/// Regularization `G ← G + δI` with `δ = REGULARIZATION·‖G‖`.
pub const REGULARIZATION: f64 = 1e-8;

/// Recovered controller and triggering matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    /// `K = K_c G⁻¹`, `m × n`.
    pub k: DMatrix<f64>,
    /// `Ω_i = G_i⁻ᵀ Ω_i^z G_i⁻¹`.
    pub omegas: Vec<DMatrix<f64>>,
    /// Block-diagonal `G`.
    pub g: DMatrix<f64>,
    /// `G⁻ᵀ P G⁻¹`, the quadratic Lyapunov weight in the original coordinates.
    pub p_x: DMatrix<f64>,
    /// Agents whose `G_i` had to be regularized.
    pub regularized: Vec<usize>,
}

fn offsets(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .scan(0, |acc, &s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect()
}

fn invert(block: usize, g: &DMatrix<f64>) -> Result<DMatrix<f64>, LmiError> {
    let cond = linalg::condition_number(g);
    if !(cond <= CONDITION_LIMIT) {
        return Err(LmiError::IllConditioned { block, cond });
    }
    g.clone().try_inverse().ok_or(LmiError::IllConditioned { block, cond: f64::INFINITY })
}

/// Per-block recovery `K_ij = K_c,ij G_j⁻¹` and `Ω_i = G_i⁻ᵀ Ω_i^z G_i⁻¹`.
/// Zero blocks of `K_c` stay exactly zero.
pub fn recover_from_blocks(
    g_blocks: &[DMatrix<f64>],
    kc: &DMatrix<f64>,
    omega_z: &[DMatrix<f64>],
    input_sizes: &[usize],
) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>), LmiError> {
    let state_sizes: Vec<usize> = g_blocks.iter().map(|g| g.nrows()).collect();
    let (n, m) = (state_sizes.iter().sum::<usize>(), input_sizes.iter().sum::<usize>());
    if kc.shape() != (m, n) || omega_z.len() != g_blocks.len() || input_sizes.len() != g_blocks.len() {
        return Err(LmiError::Dimension(format!(
            "K_c is {:?}, {} G blocks, {} Omega blocks, {} input blocks",
            kc.shape(),
            g_blocks.len(),
            omega_z.len(),
            input_sizes.len()
        )));
    }
    let inverses = g_blocks.iter().enumerate().map(|(i, g)| invert(i, g)).collect::<Result<Vec<_>, _>>()?;
    let (so, io) = (offsets(&state_sizes), offsets(input_sizes));
    let mut k = DMatrix::zeros(m, n);
    for i in 0..g_blocks.len() {
        for j in 0..g_blocks.len() {
            let blk = kc.view((io[i], so[j]), (input_sizes[i], state_sizes[j]));
            if blk.iter().all(|&v| v == 0.0) {
                continue;
            }
            k.view_mut((io[i], so[j]), (input_sizes[i], state_sizes[j])).copy_from(&(blk * &inverses[j]));
        }
    }
    let mut omegas = Vec::with_capacity(omega_z.len());
    for (i, (oz, ginv)) in omega_z.iter().zip(&inverses).enumerate() {
        let om = linalg::symmetrize(&(ginv.transpose() * oz * ginv));
        if !linalg::is_positive_definite(&om) {
            return Err(LmiError::OmegaNotPositive(i));
        }
        omegas.push(om);
    }
    Ok((k, omegas))
}

/// Recovers `(K, Ω)` from a feasible Theorem 2 or Theorem 3 solution. An
/// ill-conditioned `G_i` is replaced by `G_i + δI` and the perturbed point is
/// re-verified against every constraint.
pub fn recover_design(problem: &LmiProblem, result: &DesignResult, opts: SolveOptions) -> Result<Design, LmiError> {
    let kc_id = problem.handles.kc.ok_or_else(|| LmiError::UnknownVariable("Kc".into()))?;
    if problem.handles.g.is_empty() {
        return Err(LmiError::UnknownVariable("G".into()));
    }
    let mut values = result.values.clone();
    let mut regularized = Vec::new();
    for (i, &gid) in problem.handles.g.iter().enumerate() {
        let g = problem.vars.value(gid, &values);
        if linalg::condition_number(&g) > CONDITION_LIMIT {
            let delta = REGULARIZATION * g.norm();
            let shifted = &g + DMatrix::identity(g.nrows(), g.ncols()) * delta;
            problem.vars.set_value(gid, &shifted, &mut values);
            regularized.push(i);
        }
    }
    if !regularized.is_empty() {
        if let Some(bad) = verify(problem, &values, opts.margin_factor).into_iter().find(|r| !r.verified()) {
            return Err(LmiError::Reverification { constraint: bad.name, lambda_max: bad.lambda_max });
        }
    }
    let g_blocks: Vec<DMatrix<f64>> = problem.handles.g.iter().map(|&id| problem.vars.value(id, &values)).collect();
    let kc = problem.vars.value(kc_id, &values);
    let omega_z: Vec<DMatrix<f64>> = problem.handles.omegas.iter().map(|&id| problem.vars.value(id, &values)).collect();
    let (k, omegas) = recover_from_blocks(&g_blocks, &kc, &omega_z, &problem.input_sizes)?;
    let g = linalg::block_diag(&g_blocks);
    let g_inv = linalg::block_diag(&g_blocks.iter().map(|b| b.clone().try_inverse().expect("checked invertible")).collect::<Vec<_>>());
    let p = problem.vars.value(problem.handles.p, &values);
    let p_x = linalg::symmetrize(&(g_inv.transpose() * p * &g_inv));
    Ok(Design { k, omegas, g, p_x, regularized })
}

/// Solves a co-design problem and recovers the design in one call.
pub fn codesign(
    problem: &LmiProblem,
    backend: &dyn SdpBackend,
    opts: SolveOptions,
) -> Result<(DesignResult, Design), LmiError> {
    let result = solve(problem, backend, opts)?.require_feasible()?;
    let design = recover_design(problem, &result, opts)?;
    Ok((result, design))
}
