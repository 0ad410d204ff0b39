//! Grouped nuclear-norm minimization by ADMM, singular-value thresholding,
//! and the tangent-space utilities (projection, incoherence, block ranks).

mod admm;
mod svd;
mod svt;
mod tangent;

pub use admm::{admm_inpaint, admm_inpaint_from, AdmmConfig, SolveReport};
pub use svt::{svt, svt_with_shrunk};
pub use tangent::{
    block_ranks, incoherence, tangent_project, BlockFactors, BlockRanks, Incoherence,
    TangentSpace,
};
