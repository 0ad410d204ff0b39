use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::svt::svt_with_shrunk;
use super::tangent::{block_ranks, BlockRanks};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::patch_ops::{adjoint_lift, lift_slice, GroupedPatchMatrix, PatchLayout};
use crate::sampling::SampleSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmmConfig {
    /// Augmented-Lagrangian penalty, in units of the RMS observed intensity.
    pub rho: f64,
    pub max_iters: usize,
    /// Relative primal residual `||W - G(z)|| / max(||W||, ||G(z)||)`.
    pub tol_primal: f64,
    /// Relative dual residual `||G(z_t - z_{t-1})|| / ||G(z_t)||`.
    pub tol_dual: f64,
    /// Noise level; `0` enforces the samples exactly, otherwise the sampled
    /// residual is kept within an l2 ball of radius `sqrt(m) * delta`.
    pub delta: f64,
    /// Relative singular-value cutoff for the reported block ranks.
    pub rank_tol: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iters: 500,
            tol_primal: 1e-6,
            tol_dual: 1e-6,
            delta: 0.0,
            rank_tol: 1e-8,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            bad.push(format!("rho must be positive (got {})", self.rho));
        }
        if self.max_iters == 0 {
            bad.push("max_iters must be >= 1".to_string());
        }
        if !(self.tol_primal > 0.0) {
            bad.push(format!("tol_primal must be positive (got {})", self.tol_primal));
        }
        if !(self.tol_dual > 0.0) {
            bad.push(format!("tol_dual must be positive (got {})", self.tol_dual));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            bad.push(format!("delta must be finite and >= 0 (got {})", self.delta));
        }
        if !(self.rank_tol >= 0.0) {
            bad.push(format!("rank_tol must be >= 0 (got {})", self.rank_tol));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(bad.join("; ")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    pub final_primal_residual: f64,
    pub final_dual_residual: f64,
    pub primal_residuals: Vec<f64>,
    pub dual_residuals: Vec<f64>,
    /// `sum_k ||W_k||_*` after each W-update.
    pub objective: Vec<f64>,
    /// Ranks of the blocks of `G(z)` for the returned image.
    pub block_ranks: BlockRanks,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl SolveReport {
    /// One row per iteration: `iteration,primal,dual,objective`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,primal_residual,dual_residual,objective\n");
        for i in 0..self.iterations {
            s.push_str(&format!(
                "{},{:e},{:e},{:e}\n",
                i + 1,
                self.primal_residuals[i],
                self.dual_residuals[i],
                self.objective[i]
            ));
        }
        s
    }
}

/// Solves `min sum_k ||G(z)|_k||_*` subject to the data constraint, starting
/// from the observed pixels with missing ones set to the observed mean.
pub fn admm_inpaint(
    y: &Image,
    s: &SampleSet,
    layout: &PatchLayout,
    cfg: &AdmmConfig,
) -> Result<(Image, SolveReport)> {
    let mean = observed_mean(y, s);
    let mut init = Image::filled(y.side(), mean);
    for &(r, c) in s.distinct() {
        let i = y.index(r, c);
        init.pixels_mut()[i] = y.pixels()[i];
    }
    admm_inpaint_from(y, s, layout, cfg, &init)
}

fn observed_mean(y: &Image, s: &SampleSet) -> f64 {
    let d = s.distinct();
    d.iter().map(|&(r, c)| y.get(r, c)).sum::<f64>() / d.len().max(1) as f64
}

/// [`admm_inpaint`] with an explicit starting image (e.g. a reference image).
///
/// Splitting: `W_k = G(z)|_k` with scaled dual `Y / rho`.
/// * `W_k <- svt(G(z)|_k - Y_k / rho, 1 / rho)`
/// * `z <- G*(W + Y / rho) / c`, then projected onto the data constraint
/// * `Y_k <- Y_k + rho (W_k - G(z)|_k)`
///
/// Intensities are rescaled by the RMS of the observed values while iterating
/// so that `rho` does not depend on the dynamic range of the image.
pub fn admm_inpaint_from(
    y: &Image,
    s: &SampleSet,
    layout: &PatchLayout,
    cfg: &AdmmConfig,
    init: &Image,
) -> Result<(Image, SolveReport)> {
    cfg.validate()?;
    layout.require_coverage()?;
    let side = layout.n_side();
    if y.side() != side || s.side() != side || init.side() != side {
        return Err(Error::invalid(format!(
            "image, samples and initial guess must all be {side}x{side}"
        )));
    }
    if s.is_empty() {
        return Err(Error::invalid("sample set is empty"));
    }

    let observed: Vec<usize> = s.distinct().iter().map(|&(r, c)| r * side + c).collect();
    let rms = (observed.iter().map(|&i| y.pixels()[i].powi(2)).sum::<f64>()
        / observed.len() as f64)
        .sqrt();
    let scale = if rms > 0.0 { rms } else { 1.0 };
    let y_obs: Vec<f64> = observed.iter().map(|&i| y.pixels()[i] / scale).collect();
    let radius = (s.len() as f64).sqrt() * cfg.delta / scale;
    let counts: Vec<f64> = layout.raw_counts().iter().map(|&c| c as f64).collect();

    let project_data = |z: &mut [f64]| {
        if cfg.delta == 0.0 {
            for (&i, &v) in observed.iter().zip(&y_obs) {
                z[i] = v;
            }
        } else {
            let norm = observed
                .iter()
                .zip(&y_obs)
                .map(|(&i, &v)| (z[i] - v).powi(2))
                .sum::<f64>()
                .sqrt();
            if norm > radius {
                let shrink = radius / norm;
                for (&i, &v) in observed.iter().zip(&y_obs) {
                    z[i] = v + (z[i] - v) * shrink;
                }
            }
        }
    };
    let lifted_norm = |z: &[f64]| {
        z.iter()
            .zip(&counts)
            .map(|(v, c)| c * v * v)
            .sum::<f64>()
            .sqrt()
    };

    let mut z: Vec<f64> = init.pixels().iter().map(|v| v / scale).collect();
    project_data(&mut z);
    let mut gz = lift_slice(&z, layout);
    let mut dual = GroupedPatchMatrix::zeros(layout);
    let tau = 1.0 / cfg.rho;

    let mut primal_hist = Vec::new();
    let mut dual_hist = Vec::new();
    let mut objective = Vec::new();
    let mut converged = false;

    for _ in 0..cfg.max_iters {
        // W-update, independent per block
        let updates: Vec<_> = gz
            .blocks
            .par_iter()
            .zip(dual.blocks.par_iter())
            .map(|(g, yk)| svt_with_shrunk(&(g - yk * tau), tau))
            .collect::<Result<_>>()?;
        let mut obj = 0.0;
        let w = GroupedPatchMatrix::from_blocks(
            updates
                .into_iter()
                .map(|(wk, sv)| {
                    obj += sv.iter().sum::<f64>();
                    wk
                })
                .collect(),
        );

        // z-update: G*G = diag(c)
        let mut target = w.clone();
        target.axpy(tau, &dual);
        let back = adjoint_lift(&target, layout);
        let mut z_new: Vec<f64> = back
            .pixels()
            .iter()
            .zip(&counts)
            .map(|(v, c)| v / c)
            .collect();
        project_data(&mut z_new);
        let gz_new = lift_slice(&z_new, layout);

        let diff = &w - &gz_new;
        dual.axpy(cfg.rho, &diff);

        let primal_res = diff.frobenius() / w.frobenius().max(gz_new.frobenius()).max(f64::MIN_POSITIVE);
        let dz: Vec<f64> = z_new.iter().zip(&z).map(|(a, b)| a - b).collect();
        let dual_res = lifted_norm(&dz) / lifted_norm(&z_new).max(f64::MIN_POSITIVE);
        if !primal_res.is_finite() || !dual_res.is_finite() {
            return Err(Error::Numerical("ADMM residuals became non-finite".into()));
        }
        primal_hist.push(primal_res);
        dual_hist.push(dual_res);
        objective.push(obj * scale);

        z = z_new;
        gz = gz_new;
        if primal_res < cfg.tol_primal && dual_res < cfg.tol_dual {
            converged = true;
            break;
        }
    }

    // undo the normalization and repeat the data projection in original units
    // so that the constraint holds exactly rather than up to rounding
    let mut out: Vec<f64> = z.iter().map(|v| v * scale).collect();
    if cfg.delta == 0.0 {
        for &i in &observed {
            out[i] = y.pixels()[i];
        }
    } else {
        let limit = (s.len() as f64).sqrt() * cfg.delta;
        let norm = observed
            .iter()
            .map(|&i| (out[i] - y.pixels()[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        if norm > limit {
            for &i in &observed {
                out[i] = y.pixels()[i] + (out[i] - y.pixels()[i]) * (limit / norm);
            }
        }
    }
    let image = Image::from_raw(side, out);
    let ranks = block_ranks(&gz, cfg.rank_tol);
    let iterations = primal_hist.len();
    let report = SolveReport {
        iterations,
        converged,
        final_primal_residual: *primal_hist.last().expect("at least one iteration"),
        final_dual_residual: *dual_hist.last().expect("at least one iteration"),
        primal_residuals: primal_hist,
        dual_residuals: dual_hist,
        objective,
        block_ranks: ranks,
        warning: (!converged).then(|| {
            format!("ADMM stopped at max_iters={} before reaching tolerance", cfg.max_iters)
        }),
    };
    Ok((image, report))
}
