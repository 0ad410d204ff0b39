use nalgebra::DMatrix;

use super::svd::thin_svd;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::patch_ops::GroupedPatchMatrix;

/// Compact SVD factors of one block: `U_k` (`n^2 x r_k`), `V_k` (`group_size x r_k`).
#[derive(Clone, Debug, PartialEq)]
pub struct BlockFactors {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub sigma: Vec<f64>,
}

impl BlockFactors {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }
}

/// Tangent space at a block-diagonal matrix `U Sigma V^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentSpace {
    blocks: Vec<BlockFactors>,
    block_shape: (usize, usize),
}

const ORTHO_TOL: f64 = 1e-10;

impl TangentSpace {
    /// Validates orthonormal columns and positive, nonincreasing singular values.
    pub fn new(blocks: Vec<BlockFactors>, block_shape: (usize, usize)) -> Result<Self> {
        for (k, b) in blocks.iter().enumerate() {
            let r = b.sigma.len();
            if b.u.shape() != (block_shape.0, r) || b.v.shape() != (block_shape.1, r) {
                return Err(Error::ShapeMismatch(format!(
                    "block {k}: U is {:?}, V is {:?}, rank {r}, block {block_shape:?}",
                    b.u.shape(),
                    b.v.shape()
                )));
            }
            let eye = DMatrix::<f64>::identity(r, r);
            if (b.u.tr_mul(&b.u) - &eye).amax() > ORTHO_TOL
                || (b.v.tr_mul(&b.v) - &eye).amax() > ORTHO_TOL
            {
                return Err(Error::invalid(format!("block {k}: factors are not orthonormal")));
            }
            if b.sigma.iter().any(|&s| !(s > 0.0)) || b.sigma.windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::invalid(format!(
                    "block {k}: singular values must be positive and nonincreasing"
                )));
            }
        }
        Ok(Self {
            blocks,
            block_shape,
        })
    }

    /// Truncated SVD of every block, keeping singular values above
    /// `tol_sigma * sigma_max(block)`.
    pub fn from_matrix(m: &GroupedPatchMatrix, tol_sigma: f64) -> Result<Self> {
        let shape = m
            .blocks
            .first()
            .map(|b| b.shape())
            .ok_or_else(|| Error::invalid("matrix has no blocks"))?;
        let mut blocks = Vec::with_capacity(m.blocks.len());
        for b in &m.blocks {
            let svd = thin_svd(b)?;
            let (u, v_t) = (&svd.u, &svd.v_t);
            let mut order: Vec<usize> = (0..svd.sigma.len()).collect();
            order.sort_by(|&a, &b| svd.sigma[b].total_cmp(&svd.sigma[a]));
            let smax = order.first().map_or(0.0, |&i| svd.sigma[i]);
            let kept: Vec<usize> = order
                .into_iter()
                .filter(|&i| smax > 0.0 && svd.sigma[i] > tol_sigma * smax)
                .collect();
            let r = kept.len();
            let mut uk = DMatrix::zeros(shape.0, r);
            let mut vk = DMatrix::zeros(shape.1, r);
            for (c, &i) in kept.iter().enumerate() {
                uk.set_column(c, &u.column(i));
                vk.set_column(c, &v_t.row(i).transpose());
            }
            blocks.push(BlockFactors {
                u: uk,
                v: vk,
                sigma: kept.iter().map(|&i| svd.sigma[i]).collect(),
            });
        }
        Self::new(blocks, shape)
    }

    pub fn blocks(&self) -> &[BlockFactors] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_shape(&self) -> (usize, usize) {
        self.block_shape
    }

    /// Total rank `r = sum r_k`.
    pub fn rank(&self) -> usize {
        self.blocks.iter().map(BlockFactors::rank).sum()
    }

    /// `dim T = sum_k r_k (n^2 + group_size - r_k)`.
    pub fn dimension(&self) -> usize {
        let (a, b) = self.block_shape;
        self.blocks.iter().map(|f| f.rank() * (a + b - f.rank())).sum()
    }

    /// `U V^T`, the sign matrix of the underlying low-rank matrix.
    pub fn sign_matrix(&self) -> GroupedPatchMatrix {
        GroupedPatchMatrix::from_blocks(self.blocks.iter().map(|f| &f.u * f.v.transpose()).collect())
    }

    /// `P_T(M) = U U^T M + M V V^T - U U^T M V V^T`, blockwise.
    pub fn project(&self, m: &GroupedPatchMatrix) -> Result<GroupedPatchMatrix> {
        self.check(m)?;
        Ok(GroupedPatchMatrix::from_blocks(
            self.blocks
                .iter()
                .zip(&m.blocks)
                .map(|(f, b)| project_block(f, b))
                .collect(),
        ))
    }

    /// `P_T_perp(M) = M - P_T(M)`.
    pub fn project_complement(&self, m: &GroupedPatchMatrix) -> Result<GroupedPatchMatrix> {
        Ok(m - &self.project(m)?)
    }

    fn check(&self, m: &GroupedPatchMatrix) -> Result<()> {
        if m.blocks.len() != self.blocks.len()
            || m.blocks.iter().any(|b| b.shape() != self.block_shape)
        {
            return Err(Error::ShapeMismatch(format!(
                "tangent space has {} blocks of {:?}",
                self.blocks.len(),
                self.block_shape
            )));
        }
        Ok(())
    }
}

pub(crate) fn project_block(f: &BlockFactors, m: &DMatrix<f64>) -> DMatrix<f64> {
    if f.rank() == 0 {
        return DMatrix::zeros(m.nrows(), m.ncols());
    }
    let left = &f.u * f.u.tr_mul(m);
    let rest = m - &left;
    left + (&rest * &f.v) * f.v.transpose()
}

pub fn tangent_project(m: &GroupedPatchMatrix, t: &TangentSpace) -> Result<GroupedPatchMatrix> {
    t.project(m)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Incoherence {
    pub nu: f64,
    pub r: usize,
    pub nu_left: f64,
    pub nu_right: f64,
}

/// Leverage-score incoherence of the block-diagonal factors:
/// `nu_left = (K n^2 / r) max_i ||U^T e_i||^2`, likewise on the right with
/// `K group_size`.
pub fn incoherence(t: &TangentSpace) -> Result<Incoherence> {
    let r = t.rank();
    if r == 0 {
        return Err(Error::UndefinedIncoherence);
    }
    let k = t.num_blocks() as f64;
    let (n1, n2) = t.block_shape();
    let max_row = |m: &DMatrix<f64>| {
        m.row_iter()
            .map(|row| row.norm_squared())
            .fold(0.0, f64::max)
    };
    let lmax = t.blocks().iter().map(|f| max_row(&f.u)).fold(0.0, f64::max);
    let rmax = t.blocks().iter().map(|f| max_row(&f.v)).fold(0.0, f64::max);
    let nu_left = k * n1 as f64 / r as f64 * lmax;
    let nu_right = k * n2 as f64 / r as f64 * rmax;
    Ok(Incoherence {
        nu: nu_left.max(nu_right),
        r,
        nu_left,
        nu_right,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockRanks {
    pub per_block: Vec<usize>,
    pub total: usize,
}

/// Numerical ranks: singular values above `tol_sigma * sigma_max` per block.
pub fn block_ranks(m: &GroupedPatchMatrix, tol_sigma: f64) -> BlockRanks {
    let per_block: Vec<usize> = m
        .blocks
        .iter()
        .map(|b| {
            if b.is_empty() {
                return 0;
            }
            let s = b.clone().singular_values();
            let smax = s.max();
            if smax <= 0.0 {
                0
            } else {
                s.iter().filter(|&&v| v > tol_sigma * smax).count()
            }
        })
        .collect();
    BlockRanks {
        total: per_block.iter().sum(),
        per_block,
    }
}
