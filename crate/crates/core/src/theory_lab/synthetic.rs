use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::patch_ops::{lift, Boundary, PatchConfig, PatchGroups, PatchLayout};
use crate::sampling::RngSeed;
use crate::solver::block_ranks;

/// `a cos(2 pi (f k1 + g k2) + phase)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub f: f64,
    pub g: f64,
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub n_side: usize,
    /// Number of real sinusoids `r`.
    pub components: usize,
    pub seed: RngSeed,
    /// Amplitudes are drawn uniformly from this range.
    pub amplitude: (f64, f64),
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_side: 32,
            components: 3,
            seed: RngSeed(0),
            amplitude: (10.0, 50.0),
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.n_side < 2 {
            bad.push(format!("n_side must be >= 2 (got {})", self.n_side));
        }
        if self.components == 0 {
            bad.push("components must be >= 1".to_string());
        }
        let (lo, hi) = self.amplitude;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            bad.push(format!("amplitude range must satisfy 0 < lo <= hi (got ({lo}, {hi}))"));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(bad.join("; ")))
        }
    }
}

pub fn render_sinusoids(n_side: usize, components: &[Sinusoid]) -> Image {
    Image::from_fn(n_side, |k1, k2| {
        components
            .iter()
            .map(|s| s.amplitude * (2.0 * PI * (s.f * k1 as f64 + s.g * k2 as f64) + s.phase).cos())
            .sum()
    })
}

fn torus_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Frequencies closer than `1/N` (up to the `(f, g) ~ (-f, -g)` alias of a
/// real sinusoid) are numerically indistinguishable on an `N x N` grid.
fn well_separated(components: &[Sinusoid], n_side: usize) -> bool {
    let min_gap = 1.0 / n_side as f64;
    for (i, a) in components.iter().enumerate() {
        for b in &components[i + 1..] {
            let same = torus_gap(a.f, b.f).max(torus_gap(a.g, b.g));
            let mirrored = torus_gap(a.f, -b.f).max(torus_gap(a.g, -b.g));
            if same.min(mirrored) < min_gap {
                return false;
            }
        }
    }
    true
}

const MAX_RETRIES: usize = 100;
const RANK_TOL: f64 = 1e-8;

pub fn generate_synthetic_components(spec: &SyntheticSpec) -> Result<Vec<Sinusoid>> {
    spec.validate()?;
    let mut rng = spec.seed.rng();
    let (lo, hi) = spec.amplitude;
    for _ in 0..MAX_RETRIES {
        let comps: Vec<Sinusoid> = (0..spec.components)
            .map(|_| Sinusoid {
                amplitude: if hi > lo { rng.random_range(lo..hi) } else { lo },
                f: rng.random_range(0.0..1.0),
                g: rng.random_range(0.0..1.0),
                phase: rng.random_range(0.0..2.0 * PI),
            })
            .collect();
        if well_separated(&comps, spec.n_side) {
            return Ok(comps);
        }
    }
    Err(Error::invalid(format!(
        "could not draw {} well-separated frequencies on a {}-pixel grid in {MAX_RETRIES} attempts",
        spec.components, spec.n_side
    )))
}

/// Smallest patch size whose full lift has both dimensions above `2r`.
fn rank_check_patch(n_side: usize, r: usize) -> Option<usize> {
    (1..=n_side).find(|&n| n * n > 2 * r && (n_side - n + 1).pow(2) > 2 * r)
}

/// Sum of `r` random real 2-D sinusoids; its Hankel lifts have rank at most `2r`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Image> {
    let comps = generate_synthetic_components(spec)?;
    let z = render_sinusoids(spec.n_side, &comps);
    if let Some(n) = rank_check_patch(spec.n_side, spec.components) {
        let cfg = PatchConfig::new(spec.n_side, n, Boundary::Valid)?;
        let layout = PatchLayout::new(cfg, PatchGroups::single_full(&cfg))?;
        let rank = block_ranks(&lift(&z, &layout)?, RANK_TOL).total;
        if rank > 2 * spec.components {
            return Err(Error::Numerical(format!(
                "synthetic image has Hankel rank {rank}, expected at most {}",
                2 * spec.components
            )));
        }
    }
    Ok(z)
}
