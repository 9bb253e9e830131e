//! Semidefinite programming backends and independent certificate checks.

use std::fmt::Write as _;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use nalgebra::DMatrix;

use super::expr::AffineMatrix;
use super::theorems::LmiProblem;
use crate::error::LmiError;
use crate::linalg;

/// Relative strictness gap for every constraint.
pub const DEFAULT_MARGIN_FACTOR: f64 = 1e-7;

/// `A_k x ⪯ b_k`-style block in vectorized form: the slack
/// `svec(b) − Σ x_i svec(A_i)` must lie in the PSD cone of order `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeBlock {
    pub dim: usize,
    /// `(row, variable, value)` triplets of the vectorized coefficient matrix.
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
}

/// Vectorized problem handed to a backend: minimize `objective · x` subject
/// to every cone block and, when `ball` is `Some((r, k))`, `‖x[..k]‖₂ ≤ r`.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpInstance {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub blocks: Vec<ConeBlock>,
    pub ball: Option<(f64, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendStatus {
    Solved,
    /// Converged to reduced accuracy or stopped early; the iterate may still
    /// pass re-verification.
    Inaccurate,
    Infeasible,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendOutput {
    pub status: BackendStatus,
    pub detail: String,
    pub x: Vec<f64>,
    pub iterations: u32,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub solve_time: f64,
}

/// A conic solver for [`SdpInstance`]s. Implementations hold no shared mutable
/// state, so one backend may serve several threads.
pub trait SdpBackend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, instance: &SdpInstance) -> Result<BackendOutput, LmiError>;
}

/// Interior-point backend built on Clarabel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClarabelBackend {
    pub max_iter: u32,
    pub verbose: bool,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        Self { max_iter: 200, verbose: false }
    }
}

impl SdpBackend for ClarabelBackend {
    fn name(&self) -> &str {
        "clarabel"
    }

    fn solve(&self, instance: &SdpInstance) -> Result<BackendOutput, LmiError> {
        let nv = instance.n_vars;
        let (mut rows, mut cols, mut vals) = (Vec::new(), Vec::new(), Vec::new());
        let mut b = Vec::new();
        let mut cones = Vec::new();
        for blk in &instance.blocks {
            let r0 = b.len();
            for &(r, c, v) in &blk.a {
                rows.push(r0 + r);
                cols.push(c);
                vals.push(v);
            }
            b.extend_from_slice(&blk.b);
            cones.push(if blk.dim == 1 {
                SupportedConeT::NonnegativeConeT(1)
            } else {
                SupportedConeT::PSDTriangleConeT(blk.dim)
            });
        }
        if let Some((radius, k)) = instance.ball {
            let r0 = b.len();
            b.push(radius);
            for v in 0..k {
                rows.push(r0 + 1 + v);
                cols.push(v);
                vals.push(-1.0);
                b.push(0.0);
            }
            cones.push(SupportedConeT::SecondOrderConeT(k + 1));
        }
        if b.is_empty() {
            return Ok(BackendOutput {
                status: BackendStatus::Solved,
                detail: "no constraints".into(),
                x: vec![0.0; nv],
                iterations: 0,
                primal_residual: 0.0,
                dual_residual: 0.0,
                solve_time: 0.0,
            });
        }
        let a = CscMatrix::new_from_triplets(b.len(), nv, rows, cols, vals);
        let p = CscMatrix::zeros((nv, nv));
        let q = instance.objective.clone();
        let settings = DefaultSettingsBuilder::default()
            .verbose(self.verbose)
            .max_iter(self.max_iter)
            .direct_solve_method("faer".to_owned())
            .build()
            .map_err(|e| LmiError::Solver(e.to_string()))?;
        let mut solver =
            DefaultSolver::new(&p, &q, &a, &b, &cones, settings).map_err(|e| LmiError::Solver(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => BackendStatus::Solved,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => BackendStatus::Infeasible,
            SolverStatus::MaxIterations | SolverStatus::MaxTime
            | SolverStatus::InsufficientProgress | SolverStatus::NumericalError => BackendStatus::Inaccurate,
            _ => BackendStatus::Failed,
        };
        Ok(BackendOutput {
            status,
            detail: format!("{:?}", sol.status),
            x: sol.x.clone(),
            iterations: sol.iterations,
            primal_residual: sol.r_prim,
            dual_residual: sol.r_dual,
            solve_time: sol.solve_time,
        })
    }
}

/// Upper-triangular, column-major, `√2`-scaled vectorization index.
fn svec_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

/// Strictness gap for one constraint: `factor · (1 + max |constant entry|)`.
pub fn constraint_margin(expr: &AffineMatrix, factor: f64) -> f64 {
    factor * (1.0 + linalg::max_abs(&expr.constant_part()))
}

/// Vectorizes `expr(x) − t·I ⪯ −margin·I` as
/// `svec(−E₀ − margin·I) − Σ xᵢ svec(Eᵢ) + t·svec(I) ⪰ 0`; without `t_var`
/// the `t` term is dropped.
pub fn vectorize(expr: &AffineMatrix, margin: f64, t_var: Option<usize>) -> ConeBlock {
    let dim = expr.nrows();
    let len = dim * (dim + 1) / 2;
    let mut b = vec![0.0; len];
    let mut a = Vec::new();
    let sqrt2 = std::f64::consts::SQRT_2;
    for (i, j, e) in expr.entries() {
        if i > j {
            continue;
        }
        let row = svec_index(i, j);
        let w = if i == j { 1.0 } else { sqrt2 };
        b[row] = -w * e.constant - if i == j { margin } else { 0.0 };
        for &(var, coef) in &e.terms {
            a.push((row, var, w * coef));
        }
        if let (Some(t), true) = (t_var, i == j) {
            a.push((row, t, -1.0));
        }
    }
    ConeBlock { dim, a, b }
}

/// Bound on `‖x‖₂` during the solve.
pub const DEFAULT_RADIUS: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub margin_factor: f64,
    /// Feasibility radius: the decision vector is searched in `‖x‖₂ ≤ radius`.
    pub radius: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { margin_factor: DEFAULT_MARGIN_FACTOR, radius: DEFAULT_RADIUS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignStatus {
    Feasible,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintReport {
    pub name: String,
    pub dim: usize,
    /// Largest eigenvalue after substituting the solution.
    pub lambda_max: f64,
    /// Imposed gap; re-verification requires `lambda_max ≤ −margin/2`.
    pub margin: f64,
}

impl ConstraintReport {
    pub fn verified(&self) -> bool {
        self.lambda_max <= -self.margin / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverDiagnostics {
    pub backend: String,
    pub detail: String,
    pub iterations: u32,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub solve_time: f64,
}

#[derive(Debug, Clone)]
pub struct DesignResult {
    pub status: DesignStatus,
    /// Scalar decision vector; see [`LmiProblem::vars`] for the layout.
    pub values: Vec<f64>,
    pub reports: Vec<ConstraintReport>,
    /// Largest `λ_max` over all constraints; negative when every LMI holds.
    pub certificate_margin: f64,
    pub diagnostics: SolverDiagnostics,
}

impl DesignResult {
    pub fn is_feasible(&self) -> bool {
        self.status == DesignStatus::Feasible
    }

    /// The result when feasible, otherwise an [`LmiError::Infeasible`] naming
    /// the most violated constraint.
    pub fn require_feasible(self) -> Result<Self, LmiError> {
        if self.is_feasible() {
            return Ok(self);
        }
        let worst = self
            .reports
            .iter()
            .max_by(|a, b| a.lambda_max.total_cmp(&b.lambda_max))
            .map_or_else(|| "none".to_string(), |r| r.name.clone());
        Err(LmiError::Infeasible { constraint: worst })
    }

    /// Value of a named decision variable.
    pub fn value(&self, problem: &LmiProblem, name: &str) -> Result<DMatrix<f64>, LmiError> {
        let id = problem.vars.find(name).ok_or_else(|| LmiError::UnknownVariable(name.to_string()))?;
        Ok(problem.vars.value(id, &self.values))
    }

    /// Plain-text audit record: variable sizes, per-constraint `λ_max` and margins.
    pub fn manifest(&self, problem: &LmiProblem) -> String {
        let mut out = String::new();
        let d = &self.diagnostics;
        let _ = writeln!(out, "kind = {:?}", problem.kind);
        let _ = writeln!(out, "status = {:?}", self.status);
        let _ = writeln!(out, "backend = {} ({})", d.backend, d.detail);
        let _ = writeln!(out, "iterations = {}", d.iterations);
        let _ = writeln!(out, "primal_residual = {:e}", d.primal_residual);
        let _ = writeln!(out, "dual_residual = {:e}", d.dual_residual);
        let _ = writeln!(out, "certificate_margin = {:e}", self.certificate_margin);
        let _ = writeln!(out, "vertices = {:?}", problem.vertices);
        let _ = writeln!(out, "scalar_unknowns = {}", problem.vars.n_scalars());
        out.push_str("\n[variables]\n");
        for decl in problem.vars.decls() {
            let _ = writeln!(out, "{} = {}x{} ({:?}, {} free)", decl.name, decl.rows, decl.cols, structure_tag(decl), decl.len());
        }
        out.push_str("\n[constraints]\n");
        for r in &self.reports {
            let _ = writeln!(out, "\"{}\" dim={} lambda_max={:e} margin={:e}", r.name, r.dim, r.lambda_max, r.margin);
        }
        out
    }
}

fn structure_tag(decl: &super::vars::VarDecl) -> &'static str {
    match decl.structure {
        super::vars::Structure::Symmetric => "symmetric",
        super::vars::Structure::Full => "full",
        super::vars::Structure::Masked(_) => "masked",
    }
}

/// Substitutes `x` into every constraint and reports its largest eigenvalue.
pub fn verify(problem: &LmiProblem, x: &[f64], margin_factor: f64) -> Vec<ConstraintReport> {
    problem
        .constraints
        .iter()
        .map(|c| ConstraintReport {
            name: c.name.clone(),
            dim: c.expr.nrows(),
            lambda_max: linalg::lambda_max(&linalg::symmetrize(&c.expr.eval(x))),
            margin: constraint_margin(&c.expr, margin_factor),
        })
        .collect()
}

/// Solves `min t` subject to `E_k(x) − t·I ⪯ −margin_k·I` for every
/// constraint and `‖x‖₂ ≤ radius`, then re-verifies the returned point by
/// eigenvalue computation. The LMIs are feasible when the optimal `t` is
/// non-positive.

pub fn solve(problem: &LmiProblem, backend: &dyn SdpBackend, opts: SolveOptions) -> Result<DesignResult, LmiError> {
    let nv = problem.vars.n_scalars();
    if problem.constraints.is_empty() {
        return Ok(DesignResult {
            status: DesignStatus::Feasible,
            values: vec![0.0; nv],
            reports: Vec::new(),
            certificate_margin: f64::NEG_INFINITY,
            diagnostics: SolverDiagnostics {
                backend: backend.name().to_string(),
                detail: "no constraints".into(),
                iterations: 0,
                primal_residual: 0.0,
                dual_residual: 0.0,
                solve_time: 0.0,
            },
        });
    }
    let mut objective = vec![0.0; nv + 1];
    objective[nv] = 1.0;
    let instance = SdpInstance {
        n_vars: nv + 1,
        objective,
        blocks: problem
            .constraints
            .iter()
            .map(|c| vectorize(c.solver_expr(), constraint_margin(c.solver_expr(), opts.margin_factor), Some(nv)))
            .collect(),
        ball: Some((opts.radius, nv)),
    };
    let out = backend.solve(&instance)?;
    let values = out.x[..nv.min(out.x.len())].to_vec();
    let reports = verify(problem, &values, opts.margin_factor);
    let all_verified = reports.iter().all(ConstraintReport::verified);
    let t = out.x.get(nv).copied().unwrap_or(f64::NAN);
    let certificate_margin = reports.iter().map(|r| r.lambda_max).fold(f64::NEG_INFINITY, f64::max);
    let diagnostics = SolverDiagnostics {
        backend: backend.name().to_string(),
        detail: format!("{} (t = {t:e})", out.detail),
        iterations: out.iterations,
        primal_residual: out.primal_residual,
        dual_residual: out.dual_residual,
        solve_time: out.solve_time,
    };
    let status = match out.status {
        _ if all_verified => DesignStatus::Feasible,
        BackendStatus::Solved if t <= 0.0 => {
            let worst = reports
                .iter()
                .filter(|r| !r.verified())
                .max_by(|a, b| a.lambda_max.total_cmp(&b.lambda_max))
                .expect("an unverified constraint exists");
            return Err(LmiError::Reverification { constraint: worst.name.clone(), lambda_max: worst.lambda_max });
        }
        BackendStatus::Solved | BackendStatus::Infeasible => DesignStatus::Infeasible,
        BackendStatus::Inaccurate | BackendStatus::Failed => {
            return Err(LmiError::Solver(format!(
                "{} stopped with {} after {} iterations (t = {t:e}, largest eigenvalue {certificate_margin:e})",
                backend.name(),
                out.detail,
                out.iterations
            )))
        }
    };
    Ok(DesignResult { status, values, reports, certificate_margin, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lmi::theorems::{Constraint, Handles, ProblemKind};
    use crate::lmi::vars::VarRegistry;

    fn problem_with(vars: VarRegistry, constraints: Vec<Constraint>) -> LmiProblem {
        let dummy = super::super::vars::VarId(0);
        LmiProblem {
            kind: ProblemKind::Analysis,
            vars,
            constraints,
            handles: Handles {
                p: dummy,
                r1: dummy,
                r2: dummy,
                s: dummy,
                m1: dummy,
                m2: dummy,
                f: None,
                g: Vec::new(),
                kc: None,
                omegas: Vec::new(),
                epsilon: None,
            },
            state_sizes: Vec::new(),
            input_sizes: Vec::new(),
            vertices: Vec::new(),
        }
    }

    #[test]
    fn svec_layout() {
        assert_eq!(svec_index(0, 0), 0);
        assert_eq!(svec_index(0, 1), 1);
        assert_eq!(svec_index(1, 1), 2);
        assert_eq!(svec_index(2, 0), 3);
        let blk = vectorize(&AffineMatrix::constant(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0])), 0.5, None);
        let s = std::f64::consts::SQRT_2;
        assert_eq!(blk.b, vec![-1.5, -2.0 * s, -3.5]);
    }

    #[test]
    fn empty_problem_is_feasible() {
        let r = solve(&problem_with(VarRegistry::new(), Vec::new()), &ClarabelBackend::default(), SolveOptions::default())
            .unwrap();
        assert!(r.is_feasible());
    }

    #[test]
    fn positive_definite_variable() {
        let mut vars = VarRegistry::new();
        let p = vars.symmetric("P", 3);
        let expr = -&vars.matrix(p);
        let prob = problem_with(vars, vec![Constraint::new("P > 0", expr)]);
        let r = solve(&prob, &ClarabelBackend::default(), SolveOptions::default()).unwrap();
        assert!(r.is_feasible());
        assert!(linalg::is_positive_definite(&r.value(&prob, "P").unwrap()));
        assert!(r.certificate_margin < 0.0);
    }

    #[test]
    fn contradictory_constraints_are_infeasible() {
        let mut vars = VarRegistry::new();
        let p = vars.symmetric("P", 2);
        let m = vars.matrix(p);
        let prob = problem_with(
            vars,
            vec![
                Constraint::new("P > 0", -&m),
                Constraint::new("P < 0", m.clone()),
            ],
        );
        let r = solve(&prob, &ClarabelBackend::default(), SolveOptions::default()).unwrap();
        assert_eq!(r.status, DesignStatus::Infeasible);
        assert!(matches!(r.require_feasible(), Err(LmiError::Infeasible { .. })));
    }
}
