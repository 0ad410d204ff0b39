//! Numerical checks of the recovery theory at desk scale: synthetic
//! exactly-low-rank images, concentration of the sampled operator on the
//! tangent space, golfing-scheme dual certificates, the per-pixel
//! incoherence bounds, and phase-transition experiments.

mod concentration;
mod golfing;
mod lemma;
mod phase;
mod synthetic;

pub use concentration::{
    concentration_probe, ConcentrationReport, TangentBasis, MAX_TANGENT_DIMENSION,
};
pub use golfing::{golfing_batches, golfing_certificate, CertificateReport};
pub use lemma::{verify_lemma_bounds, LemmaReport};
pub use phase::{phase_to_csv, phase_transition, spearman, PhaseConfig, PhasePoint};
pub use synthetic::{
    generate_synthetic, generate_synthetic_components, render_sinusoids, Sinusoid, SyntheticSpec,
};

use crate::error::Result;
use crate::image::Image;
use crate::patch_ops::{lift, PatchLayout};
use crate::solver::TangentSpace;

/// Relative singular-value cutoff used to read off the tangent space of a
/// ground-truth image.
pub const TANGENT_RANK_TOL: f64 = 1e-8;

/// Tangent space at `G(z)`.
pub fn tangent_space_of(z: &Image, layout: &PatchLayout) -> Result<TangentSpace> {
    TangentSpace::from_matrix(&lift(z, layout)?, TANGENT_RANK_TOL)
}
