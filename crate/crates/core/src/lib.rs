//! Patch-based low-rank image inpainting.
//!
//! Images are lifted to block-diagonal matrices of grouped patches; missing
//! pixels are recovered by minimizing the sum of the blocks' nuclear norms
//! under the observed-pixel constraint. The [`theory_lab`] module holds
//! numerical checks of the recovery theory (sampling basis, incoherence,
//! concentration, dual certificates, phase transitions).

pub mod error;
pub mod grouping;
pub mod image;
pub mod patch_ops;
pub mod pgm;
pub mod sampling;
pub mod solver;
pub mod theory_lab;

pub use error::{Error, Result};
pub use image::{psnr, Image, Psnr, PSNR_PEAK};
pub use patch_ops::{
    adjoint_lift, audit_assumptions, lift, occurrence_counts, sampling_basis, AuditReport,
    Boundary, Coord, GroupedPatchMatrix, OccurrenceCounts, PatchConfig, PatchGroups, PatchLayout,
    SamplingBasis, SamplingBasisElement,
};
pub use pgm::{read_pgm, write_pgm, PgmEncoding};
pub use sampling::{apply_mask, sample_uniform, RngSeed, SampleSet};
pub use solver::{admm_inpaint, admm_inpaint_from, AdmmConfig, SolveReport, TangentSpace};
pub use grouping::{build_groups, reference_image, GroupingConfig, ReferenceConfig};
