//! Assembly of the analysis and co-design LMI programs.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::blocks::{assemble_common_blocks, assemble_q_block, build_selectors, CommonBlocks, CommonVars, QOptions, Selectors};
use super::expr::{sum, AffineMatrix};
use super::vars::{VarId, VarRegistry};
use crate::data::ThetaAB;
use crate::error::LmiError;
use crate::ets::TriggerParams;
use crate::linalg;
use crate::network::NetworkSystem;

/// One strict inequality `expr ≺ 0`.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub expr: AffineMatrix,
    /// Congruent form handed to the conic solver in place of `expr`. It has
    /// the same inertia but better numerical scaling; verification always
    /// uses `expr`.
    pub solve_form: Option<AffineMatrix>,
}

impl Constraint {
    pub fn new(name: impl Into<String>, expr: AffineMatrix) -> Self {
        Self { name: name.into(), expr, solve_form: None }
    }

    /// The matrix the solver works with.
    pub fn solver_expr(&self) -> &AffineMatrix {
        self.solve_form.as_ref().unwrap_or(&self.expr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Analysis,
    ModelBased,
    DataDriven,
}

/// Communication pattern imposed on the gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum GainPattern {
    /// Own state and neighbor states.
    #[default]
    Distributed,
    /// Own state only.
    Decentralized,
}

/// Handles of the decision variables a design recovery needs.
#[derive(Debug, Clone, PartialEq)]
pub struct Handles {
    pub p: VarId,
    pub r1: VarId,
    pub r2: VarId,
    pub s: VarId,
    pub m1: VarId,
    pub m2: VarId,
    /// Theorem 1 multiplier.
    pub f: Option<VarId>,
    /// Per-agent `G_i`.
    pub g: Vec<VarId>,
    pub kc: Option<VarId>,
    /// Per-agent `Ω_i` (or `Ω_i^z`); empty when the weights are fixed.
    pub omegas: Vec<VarId>,
    pub epsilon: Option<VarId>,
}

#[derive(Debug, Clone)]
pub struct LmiProblem {
    pub kind: ProblemKind,
    pub vars: VarRegistry,
    pub constraints: Vec<Constraint>,
    pub handles: Handles,
    pub state_sizes: Vec<usize>,
    pub input_sizes: Vec<usize>,
    /// Distinct sampling-interval vertices the constraints were built for.
    pub vertices: Vec<f64>,
}

impl LmiProblem {
    /// Largest deviation from exact affinity over `points` random
    /// interpolations: `E(αx₁ + (1−α)x₂) − αE(x₁) − (1−α)E(x₂)`.
    pub fn affinity_defect(&self, seed: u64, points: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nv = self.vars.n_scalars();
        let mut worst: f64 = 0.0;
        for _ in 0..points {
            let x1: Vec<f64> = (0..nv).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x2: Vec<f64> = (0..nv).map(|_| rng.random_range(-1.0..1.0)).collect();
            let alpha: f64 = rng.random_range(-0.5..1.5);
            let xa: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
            for c in &self.constraints {
                let lhs = c.expr.eval(&xa);
                let rhs = c.expr.eval(&x1) * alpha + c.expr.eval(&x2) * (1.0 - alpha);
                let scale = 1.0 + lhs.amax().max(rhs.amax());
                worst = worst.max((lhs - rhs).amax() / scale);
            }
        }
        worst
    }

    pub fn constraint(&self, name: &str) -> Option<&Constraint> {
        self.constraints.iter().find(|c| c.name == name)
    }
}

/// Sampling-interval range and 𝒬 layout options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmiSettings {
    pub h_lo: f64,
    pub h_hi: f64,
    pub q: QOptions,
}

impl LmiSettings {
    pub fn fixed(h: f64) -> Self {
        Self { h_lo: h, h_hi: h, q: QOptions::default() }
    }

    fn vertices(&self) -> Result<Vec<f64>, LmiError> {
        if !(self.h_lo > 0.0) || !(self.h_hi >= self.h_lo) || !self.h_hi.is_finite() {
            return Err(LmiError::Dimension(format!("invalid interval [{}, {}]", self.h_lo, self.h_hi)));
        }
        Ok(if self.h_lo == self.h_hi { vec![self.h_lo] } else { vec![self.h_lo, self.h_hi] })
    }
}

/// Triggering weights in the analysis problem.
#[derive(Debug, Clone, PartialEq)]
pub enum OmegaSpec {
    /// Per-agent symmetric decision variables.
    Free,
    /// Given matrices, e.g. from a previous design.
    Fixed(Vec<DMatrix<f64>>),
}

struct Skeleton {
    vars: VarRegistry,
    sel: Selectors,
    common: CommonBlocks,
    handles: Handles,
    pd: Vec<Constraint>,
}

fn skeleton(n: usize) -> Result<Skeleton, LmiError> {
    let sel = build_selectors(n)?;
    let mut vars = VarRegistry::new();
    let p = vars.symmetric("P", n);
    let r1 = vars.symmetric("R1", n);
    let r2 = vars.symmetric("R2", n);
    let s = vars.full("S", 4 * n, 4 * n);
    let m1 = vars.full("M1", 7 * n, 2 * n);
    let m2 = vars.full("M2", 7 * n, 2 * n);
    let cv = CommonVars {
        p: vars.matrix(p),
        r1: vars.matrix(r1),
        r2: vars.matrix(r2),
        s: vars.matrix(s),
        m1: vars.matrix(m1),
        m2: vars.matrix(m2),
    };
    let common = assemble_common_blocks(&sel, &cv)?;
    let pd = [("P", &cv.p), ("R1", &cv.r1), ("R2", &cv.r2)]
        .into_iter()
        .map(|(name, m)| Constraint::new(format!("{name} > 0"), -m))
        .collect();
    let handles = Handles { p, r1, r2, s, m1, m2, f: None, g: Vec::new(), kc: None, omegas: Vec::new(), epsilon: None };
    Ok(Skeleton { vars, sel, common, handles, pd })
}

fn declare_omegas(sk: &mut Skeleton, sizes: &[usize], prefix: &str) -> Vec<AffineMatrix> {
    let mut out = Vec::with_capacity(sizes.len());
    for (i, &ni) in sizes.iter().enumerate() {
        let id = sk.vars.symmetric(&format!("{prefix}{}", i + 1), ni);
        let m = sk.vars.matrix(id);
        sk.pd.push(Constraint::new(format!("{prefix}{} > 0", i + 1), -&m));
        sk.handles.omegas.push(id);
        out.push(m);
    }
    out
}

fn declare_g_and_kc(sk: &mut Skeleton, system: &NetworkSystem, pattern: GainPattern) -> (AffineMatrix, AffineMatrix) {
    let mut blocks = Vec::new();
    for (i, ni) in system.state_sizes().into_iter().enumerate() {
        let id = sk.vars.full(&format!("G{}", i + 1), ni, ni);
        sk.handles.g.push(id);
        blocks.push(sk.vars.matrix(id));
    }
    let kc = sk.vars.masked("Kc", system.gain_mask(pattern == GainPattern::Decentralized));
    sk.handles.kc = Some(kc);
    (AffineMatrix::block_diag(&blocks), sk.vars.matrix(kc))
}

/// `[[Ξ₀ + hΞ + Ψ + 𝒬, hM], [∗, −h𝓡]]` for both twins at vertex `h`.
fn vertex_pair(common: &CommonBlocks, psi_q: &AffineMatrix, h: f64) -> [(String, AffineMatrix); 2] {
    let build = |xi: &AffineMatrix, m: &AffineMatrix, r: &AffineMatrix| {
        let top = sum(&[&common.xi0, &xi.scale(h), psi_q]);
        let hm = m.scale(h);
        let hmt = hm.transpose();
        let hr = r.scale(-h);
        AffineMatrix::from_blocks(&[vec![Some(&top), Some(&hm)], vec![Some(&hmt), Some(&hr)]])
    };
    [
        (format!("h={h} (a)"), build(&common.xi_a, &common.m1, &common.r1_cal)),
        (format!("h={h} (b)"), build(&common.xi_b, &common.m2, &common.r2_cal)),
    ]
}

fn finish(
    sk: Skeleton,
    kind: ProblemKind,
    system: &NetworkSystem,
    vertices: Vec<f64>,
    mut main: Vec<Constraint>,
) -> LmiProblem {
    main.extend(sk.pd);
    for c in &mut main {
        c.expr = c.expr.symmetrized();
        c.solve_form = c.solve_form.take().map(|e| e.symmetrized());
    }
    LmiProblem {
        kind,
        vars: sk.vars,
        constraints: main,
        handles: sk.handles,
        state_sizes: system.state_sizes(),
        input_sizes: system.input_sizes(),
        vertices,
    }
}

fn check_params(system: &NetworkSystem, params: &TriggerParams) -> Result<(), LmiError> {
    params.validate(system).map_err(|e| match e {
        crate::error::EtsError::SigmaOffGraph(i, j) => LmiError::SigmaOffGraph(i, j),
        other => LmiError::Dimension(other.to_string()),
    })
}

/// Stability analysis for a given gain `k`.
pub fn assemble_theorem1(
    system: &NetworkSystem,
    k: &DMatrix<f64>,
    params: &TriggerParams,
    omegas: OmegaSpec,
    settings: &LmiSettings,
) -> Result<LmiProblem, LmiError> {
    check_params(system, params)?;
    let vertices = settings.vertices()?;
    let n = system.n_states();
    if k.shape() != (system.n_inputs(), n) {
        return Err(LmiError::Dimension(format!("K is {:?}, expected {}x{n}", k.shape(), system.n_inputs())));
    }
    let mut sk = skeleton(n)?;
    let omega_mats = match omegas {
        OmegaSpec::Free => declare_omegas(&mut sk, &system.state_sizes(), "Omega"),
        OmegaSpec::Fixed(list) => {
            let sizes = system.state_sizes();
            if list.len() != sizes.len() || list.iter().zip(&sizes).any(|(m, &s)| m.shape() != (s, s)) {
                return Err(LmiError::Dimension("fixed Omega list does not match the agents".into()));
            }
            list.iter().map(AffineMatrix::constant).collect()
        }
    };
    let q = assemble_q_block(&sk.sel, &omega_mats, params, &system.graph, settings.q)?;
    let f = sk.vars.full("F", 7 * n, n);
    sk.handles.f = Some(f);
    let closed = &system.a * sk.sel.h(1) + &system.b * k * sk.sel.h(7) - sk.sel.h(2);
    let psi = sk.vars.matrix(f).rmul(&closed).sym();
    let psi_q = &psi + &q;
    let main = vertices
        .iter()
        .flat_map(|&h| vertex_pair(&sk.common, &psi_q, h))
        .map(|(name, expr)| Constraint::new(name, expr))
        .collect();
    Ok(finish(sk, ProblemKind::Analysis, system, vertices, main))
}

/// `𝒟 = (H_1 + 2H_2)ᵀ`.
fn multiplier(sel: &Selectors) -> DMatrix<f64> {
    (sel.h(1) + sel.h(2) * 2.0).transpose()
}

/// Model-based co-design of the gain and the triggering matrices.
pub fn assemble_theorem2(
    system: &NetworkSystem,
    params: &TriggerParams,
    settings: &LmiSettings,
    pattern: GainPattern,
) -> Result<LmiProblem, LmiError> {
    check_params(system, params)?;
    let vertices = settings.vertices()?;
    let mut sk = skeleton(system.n_states())?;
    let (g, kc) = declare_g_and_kc(&mut sk, system, pattern);
    let omega_z = declare_omegas(&mut sk, &system.state_sizes(), "Omega_z");
    let q = assemble_q_block(&sk.sel, &omega_z, params, &system.graph, settings.q)?;
    let sel = &sk.sel;
    let inner = sum(&[
        &g.lmul(&system.a).rmul(sel.h(1)),
        &kc.lmul(&system.b).rmul(sel.h(7)),
        &-&g.rmul(sel.h(2)),
    ]);
    let psi = inner.lmul(&multiplier(sel)).sym();
    let psi_q = &psi + &q;
    let main = vertices
        .iter()
        .flat_map(|&h| vertex_pair(&sk.common, &psi_q, h))
        .map(|(name, expr)| Constraint::new(name, expr))
        .collect();
    Ok(finish(sk, ProblemKind::ModelBased, system, vertices, main))
}

/// Data-driven co-design robust over every `[A B]` consistent with `theta`.
/// Only the graph and the block sizes of `system` are read; its `A` and `B`
/// are not used.
pub fn assemble_theorem3(
    theta: &ThetaAB,
    system: &NetworkSystem,
    params: &TriggerParams,
    settings: &LmiSettings,
    pattern: GainPattern,
) -> Result<LmiProblem, LmiError> {
    check_params(system, params)?;
    let vertices = settings.vertices()?;
    let (n, m) = (system.n_states(), system.n_inputs());
    if theta.n != n || theta.m != m || theta.theta.shape() != (2 * n + m, 2 * n + m) {
        return Err(LmiError::Dimension(format!(
            "Theta is {:?} for n={}, m={}; network has n={n}, m={m}",
            theta.theta.shape(),
            theta.n,
            theta.m
        )));
    }
    let mut sk = skeleton(n)?;
    let (g, kc) = declare_g_and_kc(&mut sk, system, pattern);
    let omega_z = declare_omegas(&mut sk, &system.state_sizes(), "Omega_z");
    let eps_id = sk.vars.scalar("epsilon");
    sk.handles.epsilon = Some(eps_id);
    let eps = sk.vars.scalar_expr(eps_id);
    sk.pd.push(Constraint::new("epsilon > 0", AffineMatrix::scaled_constant(&eps, &DMatrix::from_element(1, 1, -1.0))));

    let q = assemble_q_block(&sk.sel, &omega_z, params, &system.graph, settings.q)?;
    let sel = &sk.sel;
    let d = multiplier(sel);
    let psi_bar = g.rmul(sel.h(2)).lmul(&d).scale(-1.0).sym();

    let g_h1 = g.rmul(sel.h(1));
    let kc_h7 = kc.rmul(sel.h(7));
    let f = AffineMatrix::from_blocks(&[vec![Some(&g_h1)], vec![Some(&kc_h7)]]);

    let mut v1 = DMatrix::zeros(n + m, 2 * n + m);
    v1.view_mut((0, 0), (n + m, n + m)).fill_with_identity();
    let mut v2 = DMatrix::zeros(7 * n, 2 * n + m);
    v2.view_mut((0, n + m), (7 * n, n)).copy_from(&d);
    let th = &theta.theta;
    let t1 = AffineMatrix::scaled_constant(&eps, &linalg::symmetrize(&(&v1 * th * v1.transpose())));
    let t2 = AffineMatrix::scaled_constant(&eps, &(&v1 * th * v2.transpose()));
    let t3 = AffineMatrix::scaled_constant(&eps, &linalg::symmetrize(&(&v2 * th * v2.transpose())));

    let f_t2 = &f + &t2;
    let f_t2_t = f_t2.transpose();
    let base = sum(&[&psi_bar, &q, &t3]);
    let decoupled = theta.decoupled().map(|dc| {
        let t1 = AffineMatrix::scaled_constant(&eps, &dc.theta11);
        let ft = f.transpose();
        let cross = f.lmul(&(&d * &dc.estimate)).sym();
        let noise = AffineMatrix::scaled_constant(&eps, &linalg::symmetrize(&(&d * &dc.schur * d.transpose())));
        (t1, ft, sum(&[&psi_bar, &q, &cross, &noise]))
    });
    let mut main = Vec::new();
    for &h in &vertices {
        for (tag, xi, mm, r) in [
            ("a", &sk.common.xi_a, &sk.common.m1, &sk.common.r1_cal),
            ("b", &sk.common.xi_b, &sk.common.m2, &sk.common.r2_cal),
        ] {
            let mid = sum(&[&sk.common.xi0, &xi.scale(h), &base]);
            let hm = mm.scale(h);
            let hmt = hm.transpose();
            let hr = r.scale(-h);
            let expr = AffineMatrix::from_blocks(&[
                vec![Some(&t1), Some(&f_t2), None],
                vec![Some(&f_t2_t), Some(&mid), Some(&hm)],
                vec![None, Some(&hmt), Some(&hr)],
            ]);
            let solve_form = decoupled.as_ref().map(|(t1, ft, base)| {
                let mid = sum(&[&sk.common.xi0, &xi.scale(h), base]);
                AffineMatrix::from_blocks(&[
                    vec![Some(t1), Some(&f), None],
                    vec![Some(ft), Some(&mid), Some(&hm)],
                    vec![None, Some(&hmt), Some(&hr)],
                ])
            });
            main.push(Constraint { solve_form, ..Constraint::new(format!("h={h} ({tag})"), expr) });
        }
    }
    Ok(finish(sk, ProblemKind::DataDriven, system, vertices, main))
}
