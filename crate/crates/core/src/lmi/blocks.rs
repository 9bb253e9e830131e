//! Selectors, the Π matrices and the shared blocks Ξ₀, Ξₐ, Ξ_b and 𝒬.
//!
//! The augmented vector is
//! `ξ = [x(t); x(t+1); x(τ_v); x(τ_{v+1}); ν₁; ν₂; x(t_k)]`, seven blocks of
//! `n`, and `H_ι` picks block `ι`.

use nalgebra::DMatrix;

use super::expr::{sum, AffineMatrix};
use crate::error::LmiError;
use crate::ets::TriggerParams;
use crate::network::Graph;

/// `H_0 = 0` and `H_1, …, H_7`.
#[derive(Debug, Clone, PartialEq)]
pub struct Selectors {
    n: usize,
    h: Vec<DMatrix<f64>>,
}

impl Selectors {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `H_ι` for `ι ∈ 0..=7`.
    pub fn h(&self, iota: usize) -> &DMatrix<f64> {
        &self.h[iota]
    }

    /// Stacks `Σ_k c_k H_{ι_k}` row blocks; each row block is given as a list
    /// of `(coefficient, ι)` pairs.
    pub fn stack(&self, rows: &[&[(f64, usize)]]) -> DMatrix<f64> {
        let n = self.n;
        let mut out = DMatrix::zeros(rows.len() * n, 7 * n);
        for (r, combo) in rows.iter().enumerate() {
            let mut block = out.rows_mut(r * n, n);
            for &(c, iota) in combo.iter() {
                block += &self.h[iota] * c;
            }
        }
        out
    }
}

pub fn build_selectors(n: usize) -> Result<Selectors, LmiError> {
    if n == 0 {
        return Err(LmiError::Dimension("selectors need n >= 1".into()));
    }
    let mut h = vec![DMatrix::zeros(n, 7 * n)];
    for iota in 1..=7 {
        let mut m = DMatrix::zeros(n, 7 * n);
        m.view_mut((0, (iota - 1) * n), (n, n)).fill_with_identity();
        h.push(m);
    }
    Ok(Selectors { n, h })
}

/// `Π_1, …, Π_10` (index 0 is unused and empty).
pub fn pi_matrices(sel: &Selectors) -> Vec<DMatrix<f64>> {
    let p = |rows: &[&[(f64, usize)]]| sel.stack(rows);
    vec![
        DMatrix::zeros(0, 7 * sel.n()),
        p(&[&[(1.0, 3)], &[(1.0, 4)], &[(1.0, 2), (-1.0, 3)], &[(1.0, 5), (1.0, 2), (-1.0, 3)]]),
        p(&[&[(-1.0, 3)], &[(-1.0, 4)], &[(1.0, 4), (-1.0, 2)], &[(1.0, 6), (-1.0, 1), (-1.0, 4)]]),
        p(&[&[], &[], &[(1.0, 1), (-1.0, 3)], &[(1.0, 5), (-1.0, 3)]]),
        p(&[&[], &[], &[(1.0, 4), (-1.0, 1)], &[(1.0, 6), (-1.0, 4)]]),
        p(&[&[(1.0, 3)], &[(1.0, 4)], &[], &[(1.0, 5)]]),
        p(&[&[(-1.0, 3)], &[(-1.0, 4)], &[(1.0, 1), (-1.0, 2)], &[(-1.0, 1)]]),
        p(&[&[(1.0, 3)], &[(1.0, 4)], &[(1.0, 2), (-1.0, 1)], &[(1.0, 2)]]),
        p(&[&[(1.0, 3)], &[(1.0, 4)], &[], &[(1.0, 6)]]),
        p(&[&[(1.0, 1), (-1.0, 3)], &[(1.0, 1), (1.0, 3), (-2.0, 5)]]),
        p(&[&[(1.0, 4), (-1.0, 1)], &[(1.0, 4), (1.0, 1), (-2.0, 6)]]),
    ]
}

/// Decision-variable matrices entering the shared blocks.
#[derive(Debug, Clone)]
pub struct CommonVars {
    pub p: AffineMatrix,
    pub r1: AffineMatrix,
    pub r2: AffineMatrix,
    pub s: AffineMatrix,
    pub m1: AffineMatrix,
    pub m2: AffineMatrix,
}

#[derive(Debug, Clone)]
pub struct CommonBlocks {
    pub xi0: AffineMatrix,
    pub xi_a: AffineMatrix,
    pub xi_b: AffineMatrix,
    /// `blkdiag(R_1, 3R_1)`.
    pub r1_cal: AffineMatrix,
    /// `blkdiag(R_2, 3R_2)`.
    pub r2_cal: AffineMatrix,
    pub m1: AffineMatrix,
    pub m2: AffineMatrix,
}

fn expect_shape(name: &str, m: &AffineMatrix, shape: (usize, usize)) -> Result<(), LmiError> {
    if m.shape() != shape {
        return Err(LmiError::Dimension(format!("{name} is {:?}, expected {shape:?}", m.shape())));
    }
    Ok(())
}

pub fn assemble_common_blocks(sel: &Selectors, v: &CommonVars) -> Result<CommonBlocks, LmiError> {
    let n = sel.n();
    expect_shape("P", &v.p, (n, n))?;
    expect_shape("R1", &v.r1, (n, n))?;
    expect_shape("R2", &v.r2, (n, n))?;
    expect_shape("S", &v.s, (4 * n, 4 * n))?;
    expect_shape("M1", &v.m1, (7 * n, 2 * n))?;
    expect_shape("M2", &v.m2, (7 * n, 2 * n))?;

    let pi = pi_matrices(sel);
    let spq = |a: usize, b: usize| v.s.lmul(&pi[a].transpose()).rmul(&pi[b]);
    let d21 = sel.h(2) - sel.h(1);

    let inner = sum(&[&spq(1, 2), &-&spq(3, 4), &v.m1.rmul(&pi[9]), &v.m2.rmul(&pi[10])]);
    let xi0 = sum(&[
        &inner.sym(),
        &(&v.r2 - &v.r1).congruence(&d21),
        &v.p.congruence(sel.h(2)),
        &-&v.p.congruence(sel.h(1)),
    ]);
    let xi_a = &spq(5, 6).sym() + &v.r2.congruence(&d21);
    let xi_b = &spq(7, 8).sym() + &v.r1.congruence(&d21);
    let r1_cal = AffineMatrix::block_diag(&[v.r1.clone(), v.r1.scale(3.0)]);
    let r2_cal = AffineMatrix::block_diag(&[v.r2.clone(), v.r2.scale(3.0)]);
    Ok(CommonBlocks { xi0, xi_a, xi_b, r1_cal, r2_cal, m1: v.m1.clone(), m2: v.m2.clone() })
}

/// Weight on the transmission error in 𝒬.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorWeight {
    /// `blkdiag(Ω_1, …, Ω_N)`, matching `−eᵢᵀΩᵢeᵢ` in the threshold function.
    #[default]
    Omega,
    /// `Ω_a = blkdiag(σ₁ⁱΩᵢ)`.
    SigmaOmega,
}

/// Layout of the neighbor-coupling matrix Ω_b.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OmegaBVariant {
    /// `(i,i)` block `Σ_j (σ₂ⁱʲΩᵢ + σ₂ʲⁱΩⱼ)` for every agent.
    #[default]
    Symmetric,
    /// Same, except the last diagonal block uses `Ω_1` in its first term.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct QOptions {
    pub error_weight: ErrorWeight,
    pub omega_b: OmegaBVariant,
}

fn place_blocks(sizes: &[usize], blocks: &[Vec<Option<AffineMatrix>>]) -> AffineMatrix {
    let n_agents = sizes.len();
    let zero: Vec<AffineMatrix> = sizes.iter().map(|&s| AffineMatrix::zeros(s, s)).collect();
    let layout: Vec<Vec<Option<&AffineMatrix>>> = (0..n_agents)
        .map(|i| {
            (0..n_agents)
                .map(|j| match &blocks[i][j] {
                    Some(b) => Some(b),
                    None if i == j => Some(&zero[i]),
                    None => None,
                })
                .collect()
        })
        .collect();
    AffineMatrix::from_blocks(&layout)
}

/// `(Ω_a, Ω_b, Ω_e)` for per-agent weights `omegas`.
pub fn omega_blocks(
    omegas: &[AffineMatrix],
    params: &TriggerParams,
    graph: &Graph,
    opts: QOptions,
) -> Result<(AffineMatrix, AffineMatrix, AffineMatrix), LmiError> {
    let na = graph.n_agents();
    if omegas.len() != na || params.n_agents() != na || params.sigma2.shape() != (na, na) {
        return Err(LmiError::Dimension(format!(
            "{} Omega blocks and {} parameter sets for {na} agents",
            omegas.len(),
            params.n_agents()
        )));
    }
    for i in 0..na {
        for j in 0..na {
            if params.sigma2[(i, j)] != 0.0 && (i == j || !graph.is_adjacent(i, j)) {
                return Err(LmiError::SigmaOffGraph(i, j));
            }
        }
    }
    let sizes: Vec<usize> = omegas.iter().map(AffineMatrix::nrows).collect();
    let s2 = &params.sigma2;

    let omega_a = AffineMatrix::block_diag(
        &omegas.iter().zip(&params.agents).map(|(om, a)| om.scale(a.sigma1)).collect::<Vec<_>>(),
    );
    let mut b: Vec<Vec<Option<AffineMatrix>>> = vec![vec![None; na]; na];
    for i in 0..na {
        let first = match opts.omega_b {
            OmegaBVariant::Printed if i + 1 == na && na > 1 => 0,
            _ => i,
        };
        let mut diag = AffineMatrix::zeros(sizes[i], sizes[i]);
        for j in 0..na {
            if j == i || (s2[(i, j)] == 0.0 && s2[(j, i)] == 0.0) {
                continue;
            }
            if omegas[first].shape() != omegas[j].shape() {
                return Err(LmiError::Dimension(format!(
                    "agents {i} and {j} have different state sizes; neighbor weights need equal sizes"
                )));
            }
            let term = &omegas[first].scale(s2[(i, j)]) + &omegas[j].scale(s2[(j, i)]);
            diag = &diag + &term;
            let off = &omegas[i].scale(-s2[(i, j)]) - &omegas[j].scale(s2[(j, i)]);
            b[i][j] = Some(off);
        }
        b[i][i] = Some(diag);
    }
    let omega_b = place_blocks(&sizes, &b);
    let omega_e = match opts.error_weight {
        ErrorWeight::Omega => AffineMatrix::block_diag(omegas),
        ErrorWeight::SigmaOmega => omega_a.clone(),
    };
    Ok((omega_a, omega_b, omega_e))
}

/// `𝒬 = H_3ᵀ(Ω_a + Ω_b)H_3 − (H_3 − H_7)ᵀ Ω_e (H_3 − H_7)`.
pub fn assemble_q_block(
    sel: &Selectors,
    omegas: &[AffineMatrix],
    params: &TriggerParams,
    graph: &Graph,
    opts: QOptions,
) -> Result<AffineMatrix, LmiError> {
    let (omega_a, omega_b, omega_e) = omega_blocks(omegas, params, graph, opts)?;
    if omega_a.nrows() != sel.n() {
        return Err(LmiError::Dimension(format!(
            "Omega blocks cover {} states, selectors {}",
            omega_a.nrows(),
            sel.n()
        )));
    }
    let d37 = sel.h(3) - sel.h(7);
    Ok(&(&omega_a + &omega_b).congruence(sel.h(3)) - &omega_e.congruence(&d37))
}
