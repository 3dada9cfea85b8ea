//! Effective bianisotropic matrices `Ã*(p)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::medium::{build_tilde_a, check_laplace_point, Block, DispersiveMedium};
use crate::corrector::{assemble_homogenized, HomogenizationConfig, HomogenizationMeta, HomogenizedTensor};
use crate::error::{Error, Result};
use crate::medium::{DiffeomorphismSpec, Transposed};

pub type Matrix3c = [[Complex64; 3]; 3];

/// Standard errors of the four blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockErrors {
    pub eps: [[f64; 3]; 3],
    pub xi: [[f64; 3]; 3],
    pub zeta: [[f64; 3]; 3],
    pub mu: [[f64; 3]; 3],
}

/// `Ã*(p) = [[ε̃*, ξ̃*], [ζ̃*, μ̃*]]` at one Laplace point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BianisotropicMatrix {
    pub p: Complex64,
    pub eps_star: Matrix3c,
    pub xi_star: Matrix3c,
    pub zeta_star: Matrix3c,
    pub mu_star: Matrix3c,
    pub stderr: BlockErrors,
    /// Largest entrywise gap between the direct and the transpose route.
    pub route_discrepancy: f64,
    /// `max |ζ̃* − ξ̃*ᵀ|`, reported as a diagnostic only.
    pub zeta_xi_transpose_gap: f64,
    /// Smallest Hermitian-part eigenvalue of the 6×6 `Ã*`.
    pub dissipativity: f64,
    /// Smallest Hermitian-part eigenvalue of `Ã(y,p)` over the sample grid.
    pub medium_dissipativity: f64,
    pub meta: HomogenizationMeta,
}

fn block_of<T: Copy>(values: &[T], block: Block) -> [[T; 3]; 3] {
    let (r0, c0) = block.offsets();
    std::array::from_fn(|r| std::array::from_fn(|c| values[(r0 + r) * 6 + c0 + c]))
}

impl BianisotropicMatrix {
    fn from_tensor(
        p: Complex64,
        tensor: &HomogenizedTensor,
        route_discrepancy: f64,
        medium_dissipativity: f64,
    ) -> Self {
        let zeta = block_of(&tensor.values, Block::Zeta);
        let xi = block_of(&tensor.values, Block::Xi);
        let mut gap = 0.0_f64;
        for r in 0..3 {
            for c in 0..3 {
                gap = gap.max((zeta[r][c] - xi[c][r]).norm());
            }
        }
        Self {
            p,
            eps_star: block_of(&tensor.values, Block::Eps),
            xi_star: xi,
            zeta_star: zeta,
            mu_star: block_of(&tensor.values, Block::Mu),
            stderr: BlockErrors {
                eps: block_of(&tensor.stderr, Block::Eps),
                xi: block_of(&tensor.stderr, Block::Xi),
                zeta: block_of(&tensor.stderr, Block::Zeta),
                mu: block_of(&tensor.stderr, Block::Mu),
            },
            route_discrepancy,
            zeta_xi_transpose_gap: gap,
            dissipativity: tensor.ellipticity(),
            medium_dissipativity,
            meta: tensor.meta.clone(),
        }
    }

    pub fn block(&self, block: Block) -> &Matrix3c {
        match block {
            Block::Eps => &self.eps_star,
            Block::Xi => &self.xi_star,
            Block::Zeta => &self.zeta_star,
            Block::Mu => &self.mu_star,
        }
    }

    pub fn block_stderr(&self, block: Block) -> &[[f64; 3]; 3] {
        match block {
            Block::Eps => &self.stderr.eps,
            Block::Xi => &self.stderr.xi,
            Block::Zeta => &self.stderr.zeta,
            Block::Mu => &self.stderr.mu,
        }
    }

    /// The assembled 6×6 matrix.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(6, 6);
        for block in Block::ALL {
            let (r0, c0) = block.offsets();
            let b = self.block(block);
            for r in 0..3 {
                for c in 0..3 {
                    m[(r0 + r, c0 + c)] = b[r][c];
                }
            }
        }
        m
    }

    /// Frobenius norm of one block.
    pub fn block_norm(&self, block: Block) -> f64 {
        self.block(block).iter().flatten().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_stderr(&self, block: Block) -> f64 {
        self.block_stderr(block).iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    /// Headers of the wide CSV: `p`, then Re and Im of the 36 entries, then
    /// their standard errors.
    pub fn csv_header() -> String {
        let mut cols = vec!["p_re".to_string(), "p_im".to_string()];
        for part in ["re", "im", "stderr"] {
            for block in Block::ALL {
                for r in 1..=3 {
                    for c in 1..=3 {
                        cols.push(format!("{part}_{}_{r}{c}", block.name()));
                    }
                }
            }
        }
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols = vec![format!("{:.17e}", self.p.re), format!("{:.17e}", self.p.im)];
        for part in [|v: &Complex64| v.re, |v: &Complex64| v.im] {
            for block in Block::ALL {
                cols.extend(self.block(block).iter().flatten().map(|v| format!("{:.17e}", part(v))));
            }
        }
        for block in Block::ALL {
            cols.extend(self.block_stderr(block).iter().flatten().map(|v| format!("{v:.17e}")));
        }
        cols.join(",")
    }
}

/// Wide CSV table of a sweep, one row per Laplace point.
pub fn sweep_table(results: &[BianisotropicMatrix]) -> String {
    let mut out = BianisotropicMatrix::csv_header();
    out.push('\n');
    for r in results {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Both routes at one Laplace point.
#[derive(Debug, Clone)]
pub struct RoutePair {
    /// Correctors of `Ã` (the `u^j`, `v^j` systems), blocks read off directly.
    pub direct: HomogenizedTensor,
    /// Correctors of `Ãᵀ`, effective matrix transposed back.
    pub transpose: HomogenizedTensor,
    pub medium_dissipativity: f64,
}

/// Computes `Ã*(p)` by both routes with the same realizations.
///
/// With the flux layout `(block, axis) ↦ 3·block + axis`, the corrector for
/// direction `e_j` of the electric block is `u^j` and that of the magnetic
/// block is `v^j`; the mean fluxes give the columns of `Ã*`.
pub fn effective_routes(
    medium: &DispersiveMedium,
    spec: &DiffeomorphismSpec,
    p: Complex64,
    cfg: &HomogenizationConfig,
) -> Result<RoutePair> {
    check_laplace_point(p)?;
    if spec.dim != 3 {
        return Err(Error::Dimension(format!(
            "Maxwell media live in three dimensions, diffeomorphism has dimension {}",
            spec.dim
        )));
    }
    let field = build_tilde_a(medium, p)?;
    let (direct, transpose) = rayon::join(
        || assemble_homogenized(&field, spec, cfg),
        || assemble_homogenized(&Transposed(&field), spec, cfg).map(|t| t.transpose()),
    );
    Ok(RoutePair {
        direct: direct?,
        transpose: transpose?,
        medium_dissipativity: field.dissipativity(),
    })
}

/// `Ã*(p)` from the direct route, with the transpose-route discrepancy and
/// fallbacks of both routes recorded.
pub fn effective_constitutive(
    medium: &DispersiveMedium,
    spec: &DiffeomorphismSpec,
    p: Complex64,
    cfg: &HomogenizationConfig,
) -> Result<BianisotropicMatrix> {
    let pair = effective_routes(medium, spec, p, cfg)?;
    let gap = pair.direct.max_abs_diff(&pair.transpose);
    let mut out = BianisotropicMatrix::from_tensor(p, &pair.direct, gap, pair.medium_dissipativity);
    let other = &pair.transpose.meta;
    out.meta.max_iterations = out.meta.max_iterations.max(other.max_iterations);
    out.meta.max_residual = out.meta.max_residual.max(other.max_residual);
    out.meta.fallbacks.extend(other.fallbacks.iter().cloned());
    Ok(out)
}

/// `Ã*(p)` at every point of `points`, all with the same realizations.
pub fn p_sweep(
    medium: &DispersiveMedium,
    spec: &DiffeomorphismSpec,
    points: &[Complex64],
    cfg: &HomogenizationConfig,
) -> Result<Vec<BianisotropicMatrix>> {
    for p in points {
        check_laplace_point(*p)?;
    }
    points
        .par_iter()
        .map(|&p| effective_constitutive(medium, spec, p, cfg))
        .collect()
}
