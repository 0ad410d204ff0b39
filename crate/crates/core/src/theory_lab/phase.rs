use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::synthetic::{generate_synthetic, SyntheticSpec};
use crate::error::{Error, Result};
use crate::patch_ops::PatchLayout;
use crate::sampling::{apply_mask, sample_uniform, RngSeed};
use crate::solver::{admm_inpaint, AdmmConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseConfig {
    /// Sample counts to sweep.
    pub m_grid: Vec<usize>,
    pub trials: usize,
    /// Success iff `||z - z*|| / ||z*|| <= success_tol`.
    pub success_tol: f64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            // ceil(0.1 N^2 10^(i/7)) for N = 32: log-spaced from 0.1 N^2 to N^2
            m_grid: vec![103, 143, 198, 275, 382, 531, 737, 1024],
            trials: 20,
            success_tol: 1e-3,
        }
    }
}

impl PhaseConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.m_grid.is_empty() || self.m_grid.contains(&0) {
            bad.push("m_grid must be a nonempty list of positive counts".to_string());
        }
        if self.trials == 0 {
            bad.push("trials must be >= 1".to_string());
        }
        if !(self.success_tol > 0.0) {
            bad.push(format!("success_tol must be positive (got {})", self.success_tol));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(bad.join("; ")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhasePoint {
    pub m: usize,
    pub trials: usize,
    pub successes: usize,
    /// Mean relative error over the trials whose solve returned.
    pub mean_rel_error: f64,
    /// Trials whose solve failed with an error (counted as failures).
    pub errors: usize,
}

/// `m,trials,successes,mean_rel_error` with one row per grid point.
pub fn phase_to_csv(points: &[PhasePoint]) -> String {
    let mut s = String::from("m,trials,successes,mean_rel_error\n");
    for p in points {
        s.push_str(&format!("{},{},{},{:e}\n", p.m, p.trials, p.successes, p.mean_rel_error));
    }
    s
}

/// Recovery success rate as a function of the sample count, on one synthetic
/// ground truth. Trial `t` at grid point `i` samples with `seed.derive(i).derive(t)`.
pub fn phase_transition(
    spec: &SyntheticSpec,
    layout: &PatchLayout,
    pcfg: &PhaseConfig,
    acfg: &AdmmConfig,
    seed: RngSeed,
) -> Result<Vec<PhasePoint>> {
    pcfg.validate()?;
    if acfg.delta != 0.0 {
        return Err(Error::invalid("phase transitions use exact data (delta = 0)"));
    }
    if layout.n_side() != spec.n_side {
        return Err(Error::ShapeMismatch(format!(
            "synthetic image is {0}x{0} but the layout is {1}x{1}",
            spec.n_side,
            layout.n_side()
        )));
    }
    layout.require_coverage()?;
    let truth = generate_synthetic(spec)?;
    let jobs: Vec<(usize, usize)> = (0..pcfg.m_grid.len())
        .flat_map(|i| (0..pcfg.trials).map(move |t| (i, t)))
        .collect();
    let outcomes: Vec<Option<f64>> = jobs
        .par_iter()
        .map(|&(i, t)| {
            let run = || -> Result<f64> {
                let s = sample_uniform(spec.n_side, pcfg.m_grid[i], seed.derive(i as u64).derive(t as u64))?;
                let y = apply_mask(&truth, &s)?;
                let (z, _) = admm_inpaint(&y, &s, layout, acfg)?;
                Ok(z.relative_error(&truth))
            };
            run().ok()
        })
        .collect();
    Ok(pcfg
        .m_grid
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let chunk = &outcomes[i * pcfg.trials..(i + 1) * pcfg.trials];
            let errs: Vec<f64> = chunk.iter().flatten().copied().collect();
            PhasePoint {
                m,
                trials: pcfg.trials,
                successes: errs.iter().filter(|&&e| e <= pcfg.success_tol).count(),
                mean_rel_error: errs.iter().sum::<f64>() / errs.len() as f64,
                errors: chunk.len() - errs.len(),
            }
        })
        .collect())
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties; `None` if either
/// series is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}
