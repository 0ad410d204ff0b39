//! Reference image by Laplacian-regularized projected gradient descent, and
//! patch grouping by block matching on that reference.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::patch_ops::{Coord, PatchConfig, PatchGroups};
use crate::sampling::SampleSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceConfig {
    pub max_iters: usize,
    /// Stop once `||z_{t+1} - z_t|| <= tol * ||z_t||`.
    pub tol: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol: 1e-7,
        }
    }
}

impl ReferenceConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.max_iters == 0 {
            bad.push("max_iters must be >= 1".to_string());
        }
        if !(self.tol > 0.0) {
            bad.push(format!("tol must be positive (got {})", self.tol));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(bad.join("; ")))
        }
    }
}

/// `Gamma z = L z + z L` for the path Laplacian `L` (diagonal `1, 2, ..., 2, 1`),
/// i.e. the 4-neighbour graph Laplacian of the pixel grid.
pub fn apply_laplacian(side: usize, z: &[f64], out: &mut [f64]) {
    for r in 0..side {
        for c in 0..side {
            let i = r * side + c;
            let v = z[i];
            let mut acc = 0.0;
            if r > 0 {
                acc += v - z[i - side];
            }
            if r + 1 < side {
                acc += v - z[i + side];
            }
            if c > 0 {
                acc += v - z[i - 1];
            }
            if c + 1 < side {
                acc += v - z[i + 1];
            }
            out[i] = acc;
        }
    }
}

/// `1/2 ||Gamma z||^2`.
pub fn laplacian_energy(z: &Image) -> f64 {
    let mut g = vec![0.0; z.len()];
    apply_laplacian(z.side(), z.pixels(), &mut g);
    0.5 * g.iter().map(|v| v * v).sum::<f64>()
}

const POWER_ITERS: usize = 50;
const STEP_SAFETY: f64 = 0.95;

/// Largest eigenvalue of `Gamma^T Gamma` by power iteration.
fn gamma_sq_norm(side: usize) -> f64 {
    let n = side * side;
    // deterministic start with components along every eigenvector
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
    let mut t = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERS {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= norm);
        apply_laplacian(side, &x, &mut t);
        apply_laplacian(side, &t, &mut y);
        lambda = y.iter().zip(&x).map(|(a, b)| a * b).sum();
        std::mem::swap(&mut x, &mut y);
    }
    lambda
}

/// Iteration record of [`reference_image_traced`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReferenceTrace {
    pub iterations: usize,
    pub converged: bool,
    pub step: f64,
    /// `1/2 ||Gamma z||^2` at the start and after every iteration.
    pub energy: Vec<f64>,
}

/// Solves `min 1/2 ||Gamma z||^2` subject to `z = y` on the observed pixels.
pub fn reference_image(y: &Image, s: &SampleSet, cfg: &ReferenceConfig) -> Result<Image> {
    reference_image_traced(y, s, cfg).map(|(z, _)| z)
}

pub fn reference_image_traced(
    y: &Image,
    s: &SampleSet,
    cfg: &ReferenceConfig,
) -> Result<(Image, ReferenceTrace)> {
    cfg.validate()?;
    if s.is_empty() {
        return Err(Error::invalid("sample set is empty"));
    }
    let side = y.side();
    if s.side() != side {
        return Err(Error::ShapeMismatch(format!(
            "image is {side}x{side} but samples are on a {0}x{0} grid",
            s.side()
        )));
    }
    let observed: Vec<usize> = s.distinct().iter().map(|&(r, c)| r * side + c).collect();
    let mean = observed.iter().map(|&i| y.pixels()[i]).sum::<f64>() / observed.len() as f64;
    let mut is_observed = vec![false; side * side];
    for &i in &observed {
        is_observed[i] = true;
    }
    let mut z = vec![mean; side * side];
    let project = |z: &mut [f64]| {
        for &i in &observed {
            z[i] = y.pixels()[i];
        }
    };
    project(&mut z);

    let lambda = gamma_sq_norm(side);
    let step = if lambda > 0.0 { STEP_SAFETY / lambda } else { 0.0 };
    let mut gz = vec![0.0; z.len()];
    let mut grad = vec![0.0; z.len()];
    let energy_of = |gz: &[f64]| 0.5 * gz.iter().map(|v| v * v).sum::<f64>();
    apply_laplacian(side, &z, &mut gz);
    let mut energy = vec![energy_of(&gz)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        apply_laplacian(side, &gz, &mut grad);
        // observed pixels would be reset by the projection, so only free
        // pixels move
        let mut change = 0.0;
        for ((v, g), &fixed) in z.iter_mut().zip(&grad).zip(&is_observed) {
            if !fixed {
                let d = step * g;
                change += d * d;
                *v -= d;
            }
        }
        apply_laplacian(side, &z, &mut gz);
        energy.push(energy_of(&gz));
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if change.sqrt() <= cfg.tol * norm.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    Ok((
        Image::from_raw(side, z),
        ReferenceTrace {
            iterations,
            converged,
            step,
            energy,
        },
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroupingConfig {
    /// Number of groups `K`.
    pub k_groups: usize,
    /// Patches per group, reference included.
    pub group_size: usize,
    /// Half-width of the square anchor window searched around each reference.
    pub search_radius: usize,
}

impl Default for GroupingConfig {
    fn default() -> Self {
        Self {
            k_groups: 256,
            group_size: 40,
            search_radius: 12,
        }
    }
}

impl GroupingConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.k_groups == 0 {
            bad.push("k_groups must be >= 1".to_string());
        }
        if self.group_size == 0 {
            bad.push("group_size must be >= 1".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(bad.join("; ")))
        }
    }
}

/// Reference anchors on an even `ceil(sqrt K) x ceil(sqrt K)` lattice over the
/// anchor range; the first `K` lattice points in raster order.
pub fn reference_anchors(k_groups: usize, pcfg: &PatchConfig) -> Result<Vec<Coord>> {
    let extent = pcfg.anchor_extent();
    let g = (k_groups as f64).sqrt().ceil() as usize;
    let g = if g * g < k_groups { g + 1 } else { g };
    if g > extent {
        return Err(Error::invalid(format!(
            "cannot place {k_groups} distinct reference anchors on a {g}x{g} lattice \
             over {extent}x{extent} anchor positions"
        )));
    }
    let axis: Vec<usize> = if g == 1 {
        vec![(extent - 1) / 2]
    } else {
        (0..g)
            .map(|i| ((i * (extent - 1)) as f64 / (g - 1) as f64).round() as usize)
            .collect()
    };
    Ok(axis
        .iter()
        .flat_map(|&r| axis.iter().map(move |&c| (r, c)))
        .take(k_groups)
        .collect())
}

fn patch_vector(z: &Image, pcfg: &PatchConfig, anchor: Coord, out: &mut Vec<f64>) {
    out.clear();
    for k1 in 0..pcfg.patch_n {
        for k2 in 0..pcfg.patch_n {
            let (r, c) = pcfg.pixel_for(anchor, (k1, k2));
            out.push(z.get(r, c));
        }
    }
}

/// Squared Euclidean distance between the vectorized patches at `a` and `b`.
pub fn patch_distance(z: &Image, pcfg: &PatchConfig, a: Coord, b: Coord) -> f64 {
    let (mut pa, mut pb) = (Vec::new(), Vec::new());
    patch_vector(z, pcfg, a, &mut pa);
    patch_vector(z, pcfg, b, &mut pb);
    pa.iter().zip(&pb).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Forms `K` groups: each reference anchor followed by its `group_size - 1`
/// nearest in-window anchors (squared patch distance, ties by raster order).
pub fn build_groups(
    reference: &Image,
    gcfg: &GroupingConfig,
    pcfg: &PatchConfig,
) -> Result<PatchGroups> {
    gcfg.validate()?;
    if reference.side() != pcfg.n_side {
        return Err(Error::ShapeMismatch(format!(
            "reference is {0}x{0} but the patch configuration expects {1}x{1}",
            reference.side(),
            pcfg.n_side
        )));
    }
    let anchors = reference_anchors(gcfg.k_groups, pcfg)?;
    let extent = pcfg.anchor_extent();
    let radius = gcfg.search_radius;
    let groups = anchors
        .par_iter()
        .map(|&(r0, c0)| {
            let rows = r0.saturating_sub(radius)..(r0 + radius + 1).min(extent);
            let cols = c0.saturating_sub(radius)..(c0 + radius + 1).min(extent);
            let window = rows.len() * cols.len();
            if window < gcfg.group_size {
                return Err(Error::invalid(format!(
                    "search window around anchor ({r0}, {c0}) holds {window} anchors, \
                     fewer than group_size = {}",
                    gcfg.group_size
                )));
            }
            let mut center = Vec::new();
            let mut buf = Vec::new();
            patch_vector(reference, pcfg, (r0, c0), &mut center);
            let mut scored: Vec<(f64, Coord)> = Vec::with_capacity(window - 1);
            for r in rows {
                for c in cols.clone() {
                    if (r, c) == (r0, c0) {
                        continue;
                    }
                    patch_vector(reference, pcfg, (r, c), &mut buf);
                    let d = center.iter().zip(&buf).map(|(x, y)| (x - y).powi(2)).sum();
                    scored.push((d, (r, c)));
                }
            }
            scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut group = Vec::with_capacity(gcfg.group_size);
            group.push((r0, c0));
            group.extend(scored.iter().take(gcfg.group_size - 1).map(|s| s.1));
            Ok(group)
        })
        .collect::<Result<Vec<_>>>()?;
    PatchGroups::new(groups)
}
