use rayon::prelude::*;
use serde::Serialize;

use super::tangent_space_of;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::patch_ops::{occurrence_counts, PatchLayout, SamplingBasis};
use crate::solver::incoherence;

/// Per-pixel tangent-space incoherence bounds
/// `||P_T B_w||_F^2 <= mu r / N^2` and `||P_T(B_w / b_w)||_B^2 <= 16 M mu r / N^2`
/// with `mu = 8 c_s^-2 M K^-1 nu`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaReport {
    pub c_s: f64,
    /// Occurrence-count ratio `max c / min c`.
    pub m_ratio: f64,
    pub k_groups: usize,
    pub rank: usize,
    /// `None` when the rank is zero.
    pub nu: Option<f64>,
    pub mu: f64,
    pub frobenius_bound: f64,
    pub b_norm_bound: f64,
    pub max_frobenius_lhs: f64,
    pub max_b_norm_lhs: f64,
    /// `max lhs / bound`; at most 1 when the inequality holds.
    pub frobenius_slack: f64,
    pub b_norm_slack: f64,
    pub frobenius_holds: bool,
    pub b_norm_holds: bool,
}

impl LemmaReport {
    pub fn holds(&self) -> bool {
        self.frobenius_holds && self.b_norm_holds
    }
}

fn ratio(lhs: f64, bound: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else {
        lhs / bound
    }
}

pub fn verify_lemma_bounds(z: &Image, layout: &PatchLayout) -> Result<LemmaReport> {
    let t = tangent_space_of(z, layout)?;
    let basis = SamplingBasis::new(layout)?;
    let counts = occurrence_counts(layout)?;
    let side = layout.n_side();
    let n2 = (side * side) as f64;
    let (rows, cols) = layout.block_shape();
    let c_s = (rows as f64 / n2).min(cols as f64 / n2);
    let k = layout.num_blocks();
    let r = t.rank();
    let nu = match incoherence(&t) {
        Ok(inc) => Some(inc.nu),
        Err(Error::UndefinedIncoherence) => None,
        Err(e) => return Err(e),
    };
    let mu = 8.0 / (c_s * c_s) * counts.m_ratio / k as f64 * nu.unwrap_or(0.0);
    let frobenius_bound = mu * r as f64 / n2;
    let b_norm_bound = 16.0 * counts.m_ratio * frobenius_bound;

    let lhs: Vec<(f64, f64)> = basis
        .elements()
        .par_iter()
        .map(|e| {
            let p = t.project(&e.to_matrix(layout))?;
            let f = p.frobenius().powi(2);
            let b = basis.b_norm(&p.scale(1.0 / e.b_omega)).powi(2);
            Ok((f, b))
        })
        .collect::<Result<_>>()?;
    let max_f = lhs.iter().map(|v| v.0).fold(0.0, f64::max);
    let max_b = lhs.iter().map(|v| v.1).fold(0.0, f64::max);
    Ok(LemmaReport {
        c_s,
        m_ratio: counts.m_ratio,
        k_groups: k,
        rank: r,
        nu,
        mu,
        frobenius_bound,
        b_norm_bound,
        max_frobenius_lhs: max_f,
        max_b_norm_lhs: max_b,
        frobenius_slack: ratio(max_f, frobenius_bound),
        b_norm_slack: ratio(max_b, b_norm_bound),
        frobenius_holds: max_f <= frobenius_bound,
        b_norm_holds: max_b <= b_norm_bound,
    })
}
