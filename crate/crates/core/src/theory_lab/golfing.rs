use serde::Serialize;

use super::tangent_space_of;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::patch_ops::{GroupedPatchMatrix, PatchLayout, SamplingBasis};
use crate::sampling::{sample_uniform, RngSeed, SampleSet};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateReport {
    /// `||(B - B'_Lambda)(Y)||_F`; zero by construction.
    pub cond1_residual: f64,
    /// `||P_T_perp(Y)||`, largest block spectral norm.
    pub cond2_norm: f64,
    /// `||U V^T - P_T(Y)||_F`.
    pub cond3_error: f64,
    /// `||U V^T - P_T(Y) - P_T(F_L)||_F`; zero up to rounding.
    pub telescoping_residual: f64,
    /// `||F_i||_F` for `i = 0..=L`.
    pub decay: Vec<f64>,
    pub l: usize,
    /// Per-batch `q_i = |Lambda_i| / N^2`.
    pub q: Vec<f64>,
    pub y_norm: f64,
    pub rank: usize,
}

impl CertificateReport {
    /// Geometric-mean factor `(||F_L|| / ||F_0||)^(1/L)`, or `None` when `F_0 = 0`.
    pub fn mean_decay_factor(&self) -> Option<f64> {
        let (first, last) = (self.decay[0], self.decay[self.l]);
        (first > 0.0).then(|| (last / first).powf(1.0 / self.l as f64))
    }

    /// Median of the per-step ratios `||F_i|| / ||F_{i-1}||`.
    pub fn median_decay_factor(&self) -> Option<f64> {
        let mut ratios: Vec<f64> = self
            .decay
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect();
        if ratios.is_empty() {
            return None;
        }
        ratios.sort_by(f64::total_cmp);
        let n = ratios.len();
        Some(if n % 2 == 1 {
            ratios[n / 2]
        } else {
            0.5 * (ratios[n / 2 - 1] + ratios[n / 2])
        })
    }
}

/// Number of golfing batches, `ceil(4 ln N)` and at least 1.
pub fn golfing_batches(n_side: usize) -> usize {
    ((4.0 * (n_side as f64).ln()).ceil() as usize).max(1)
}

/// Builds the approximate dual certificate from `m` uniform draws split into
/// `L` consecutive batches:
/// `F_0 = U V^T`, `F_i = P_T (B - B_{Lambda_i} / q_i) P_T F_{i-1}`,
/// `Y = sum_i (B_{Lambda_i} / q_i + B_perp) F_{i-1}`.
pub fn golfing_certificate(
    z: &Image,
    layout: &PatchLayout,
    m: usize,
    seed: RngSeed,
) -> Result<CertificateReport> {
    let side = layout.n_side();
    let l = golfing_batches(side);
    if m < l {
        return Err(Error::invalid(format!(
            "m = {m} draws cannot fill L = {l} batches"
        )));
    }
    let t = tangent_space_of(z, layout)?;
    let basis = SamplingBasis::new(layout)?;
    let all = sample_uniform(side, m, seed)?;
    let n2 = (side * side) as f64;

    let mut f = t.sign_matrix();
    let mut y = GroupedPatchMatrix::zeros(layout);
    let mut decay = vec![f.frobenius()];
    let mut q = Vec::with_capacity(l);
    let mut start = 0;
    for i in 0..l {
        let size = m / l + usize::from(i < m % l);
        let batch = SampleSet::new(side, all.draws()[start..start + size].to_vec())?;
        start += size;
        let qi = size as f64 / n2;
        q.push(qi);

        let sampled = basis.sampled(&f, &batch).scale(1.0 / qi);
        y = &(&y + &sampled) + &basis.complement(&f);
        let pf = t.project(&f)?;
        let step = &basis.project(&pf) - &basis.sampled(&pf, &batch).scale(1.0 / qi);
        f = t.project(&step)?;
        decay.push(f.frobenius());
    }

    let residual = &basis.project(&y) - &basis.sampled_distinct(&y, &all);
    let py = t.project(&y)?;
    let gap = &t.sign_matrix() - &py;
    let telescoping = &gap - &t.project(&f)?;
    Ok(CertificateReport {
        cond1_residual: residual.frobenius(),
        cond2_norm: t.project_complement(&y)?.op_norm(),
        cond3_error: gap.frobenius(),
        telescoping_residual: telescoping.frobenius(),
        decay,
        l,
        q,
        y_norm: y.frobenius(),
        rank: t.rank(),
    })
}
