use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use super::tangent_space_of;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::patch_ops::{GroupedPatchMatrix, PatchLayout, SamplingBasis};
use crate::sampling::{sample_uniform, RngSeed, SampleSet};
use crate::solver::TangentSpace;

/// Largest tangent-space dimension for which operators are assembled densely.
pub const MAX_TANGENT_DIMENSION: usize = 2000;

struct BasisBlock {
    u: DMatrix<f64>,
    u_perp: DMatrix<f64>,
    v: DMatrix<f64>,
    offset: usize,
}

/// Orthonormal basis of `T`. Per block: `u_a e_b^T` for every left factor and
/// every column, then `u_perp_c v_a^T` with `u_perp` completing `U` to a basis.
///
/// Holds the coordinates `t_w` of every sampling-basis element `B_w`, so that
/// `P_T B_Lambda P_T` restricted to `T` is `sum_w mult_w t_w t_w^T`.
pub struct TangentBasis {
    blocks: Vec<BasisBlock>,
    block_shape: (usize, usize),
    dimension: usize,
    /// `dimension x N^2`, column `w` is `t_w`.
    coords: DMatrix<f64>,
}

fn orthogonal_complement(u: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, r) = u.shape();
    let mut basis: Vec<DVector<f64>> = (0..r).map(|j| u.column(j).into_owned()).collect();
    let mut extra = Vec::with_capacity(rows - r);
    for e in 0..rows {
        if extra.len() == rows - r {
            break;
        }
        let mut x = DVector::zeros(rows);
        x[e] = 1.0;
        // two passes of Gram-Schmidt
        for _ in 0..2 {
            for b in &basis {
                let d = b.dot(&x);
                x.axpy(-d, b, 1.0);
            }
        }
        let norm = x.norm();
        if norm > 1e-6 {
            x /= norm;
            basis.push(x.clone());
            extra.push(x);
        }
    }
    let mut out = DMatrix::zeros(rows, rows - r);
    for (j, x) in extra.iter().enumerate() {
        out.set_column(j, x);
    }
    out
}

impl TangentBasis {
    pub fn new(t: &TangentSpace, layout: &PatchLayout) -> Result<Self> {
        let dimension = t.dimension();
        if dimension > MAX_TANGENT_DIMENSION {
            return Err(Error::InstanceTooLarge {
                dim: dimension,
                limit: MAX_TANGENT_DIMENSION,
            });
        }
        if t.num_blocks() != layout.num_blocks() || t.block_shape() != layout.block_shape() {
            return Err(Error::ShapeMismatch(
                "tangent space does not match the patch layout".into(),
            ));
        }
        let (a, g) = t.block_shape();
        let mut offset = 0;
        let blocks: Vec<BasisBlock> = t
            .blocks()
            .iter()
            .map(|f| {
                let b = BasisBlock {
                    u: f.u.clone(),
                    u_perp: orthogonal_complement(&f.u),
                    v: f.v.clone(),
                    offset,
                };
                offset += f.rank() * (a + g - f.rank());
                b
            })
            .collect();

        let basis = SamplingBasis::new(layout)?;
        let mut coords = DMatrix::zeros(dimension, basis.elements().len());
        for (w, e) in basis.elements().iter().enumerate() {
            let val = e.entry();
            let mut col = coords.column_mut(w);
            for &(k, i, j) in &e.support {
                let b = &blocks[k];
                let r = b.u.ncols();
                for p in 0..r {
                    col[b.offset + p * g + j] += val * b.u[(i, p)];
                }
                let base = b.offset + r * g;
                for c in 0..b.u_perp.ncols() {
                    let up = b.u_perp[(i, c)];
                    for p in 0..r {
                        col[base + c * r + p] += val * up * b.v[(j, p)];
                    }
                }
            }
        }
        Ok(Self {
            blocks,
            block_shape: (a, g),
            dimension,
            coords,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// The `idx`-th basis matrix.
    pub fn element(&self, idx: usize) -> GroupedPatchMatrix {
        let (a, g) = self.block_shape;
        let mut blocks = vec![DMatrix::zeros(a, g); self.blocks.len()];
        for (k, b) in self.blocks.iter().enumerate() {
            let r = b.u.ncols();
            let size = r * (a + g - r);
            if idx < b.offset || idx >= b.offset + size {
                continue;
            }
            let local = idx - b.offset;
            if local < r * g {
                let (p, j) = (local / g, local % g);
                blocks[k].set_column(j, &b.u.column(p));
            } else {
                let (c, p) = ((local - r * g) / r, (local - r * g) % r);
                blocks[k] = b.u_perp.column(c) * b.v.column(p).transpose();
            }
        }
        GroupedPatchMatrix::from_blocks(blocks)
    }

    /// `t_w`, the coordinates of `P_T(B_w)`, one column per pixel.
    pub fn sampling_coordinates(&self) -> &DMatrix<f64> {
        &self.coords
    }

    /// `sum_w weight_w t_w t_w^T`, i.e. `P_T (sum_w weight_w <., B_w> B_w) P_T` on `T`.
    pub fn weighted_operator(&self, weights: &[f64]) -> DMatrix<f64> {
        let mut scaled = self.coords.clone();
        for (mut col, &w) in scaled.column_iter_mut().zip(weights) {
            col *= w;
        }
        scaled * self.coords.transpose()
    }

    /// `||(N^2/m) P_T B_Lambda P_T - P_T B P_T||` for the draws of `s`.
    pub fn deviation(&self, s: &SampleSet) -> f64 {
        let n2 = self.coords.ncols() as f64;
        let scale = n2 / s.len() as f64;
        let w: Vec<f64> = s
            .multiplicities()
            .into_iter()
            .map(|c| scale * c as f64 - 1.0)
            .collect();
        spectral_norm_sym(self.weighted_operator(&w))
    }
}

fn spectral_norm_sym(m: DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub dimension: usize,
    pub m: usize,
    pub trials: usize,
    /// Per-trial `||(N^2/m) P_T B_Lambda P_T - P_T B P_T||`.
    pub deviations: Vec<f64>,
    /// Deviation of the trial-averaged operator from `P_T B P_T`.
    pub mean_operator_deviation: f64,
    /// `rms(deviations) / sqrt(trials)`.
    pub monte_carlo_scale: f64,
}

impl ConcentrationReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("trial,deviation\n");
        for (i, d) in self.deviations.iter().enumerate() {
            s.push_str(&format!("{i},{d:e}\n"));
        }
        s
    }
}

/// Samples `trials` independent sets of `m` uniform draws and measures how far
/// the rescaled sampled operator is from its mean on the tangent space of `G(z)`.
pub fn concentration_probe(
    z: &Image,
    layout: &PatchLayout,
    m: usize,
    trials: usize,
    seed: RngSeed,
) -> Result<ConcentrationReport> {
    if m == 0 || trials == 0 {
        return Err(Error::invalid("m and trials must be positive"));
    }
    let t = tangent_space_of(z, layout)?;
    let basis = TangentBasis::new(&t, layout)?;
    let side = layout.n_side();
    let results: Vec<(f64, Vec<u32>)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let s = sample_uniform(side, m, seed.derive(i as u64))?;
            Ok((basis.deviation(&s), s.multiplicities()))
        })
        .collect::<Result<_>>()?;

    let n2 = (side * side) as f64;
    let mut mean_w = vec![0.0; side * side];
    for (_, mult) in &results {
        for (acc, &c) in mean_w.iter_mut().zip(mult) {
            *acc += c as f64;
        }
    }
    let scale = n2 / (m as f64 * trials as f64);
    mean_w.iter_mut().for_each(|v| *v = *v * scale - 1.0);
    let mean_operator_deviation = spectral_norm_sym(basis.weighted_operator(&mean_w));

    let deviations: Vec<f64> = results.into_iter().map(|r| r.0).collect();
    let rms = (deviations.iter().map(|d| d * d).sum::<f64>() / trials as f64).sqrt();
    Ok(ConcentrationReport {
        dimension: basis.dimension(),
        m,
        trials,
        monte_carlo_scale: rms / (trials as f64).sqrt(),
        mean_operator_deviation,
        deviations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patch_ops::{Boundary, PatchConfig, PatchGroups};
    use crate::theory_lab::{generate_synthetic, SyntheticSpec};

    fn instance() -> (Image, PatchLayout) {
        let spec = SyntheticSpec {
            n_side: 8,
            components: 1,
            ..Default::default()
        };
        let z = generate_synthetic(&spec).unwrap();
        let cfg = PatchConfig::new(8, 3, Boundary::Valid).unwrap();
        (z, PatchLayout::new(cfg, PatchGroups::single_full(&cfg)).unwrap())
    }

    #[test]
    fn basis_is_orthonormal_and_in_t() {
        let (z, layout) = instance();
        let t = tangent_space_of(&z, &layout).unwrap();
        let basis = TangentBasis::new(&t, &layout).unwrap();
        let elems: Vec<_> = (0..basis.dimension()).map(|i| basis.element(i)).collect();
        for (i, a) in elems.iter().enumerate() {
            let pa = t.project(a).unwrap();
            assert!((&pa - a).frobenius() < 1e-10);
            for (j, b) in elems.iter().enumerate().take(i + 1) {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((a.dot(b) - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn coordinates_match_projected_basis() {
        let (z, layout) = instance();
        let t = tangent_space_of(&z, &layout).unwrap();
        let basis = TangentBasis::new(&t, &layout).unwrap();
        let sb = SamplingBasis::new(&layout).unwrap();
        for w in [0, 9, 27, 63] {
            let bw = sb.elements()[w].to_matrix(&layout);
            let p = t.project(&bw).unwrap();
            let c = basis.sampling_coordinates().column(w);
            assert!((c.norm() - p.frobenius()).abs() < 1e-10);
        }
    }

    #[test]
    fn full_design_has_zero_deviation() {
        let (_, layout) = instance();
        let (z, _) = instance();
        let t = tangent_space_of(&z, &layout).unwrap();
        let basis = TangentBasis::new(&t, &layout).unwrap();
        assert_eq!(basis.deviation(&SampleSet::full(8)), 0.0);
    }

    #[test]
    fn dimension_guard() {
        let z = Image::from_fn(40, |r, c| ((r * 13 + c * 7) % 11) as f64);
        let cfg = PatchConfig::new(40, 6, Boundary::Valid).unwrap();
        let layout = PatchLayout::new(cfg, PatchGroups::single_full(&cfg)).unwrap();
        let err = concentration_probe(&z, &layout, 100, 1, RngSeed(0)).unwrap_err();
        assert!(matches!(err, Error::InstanceTooLarge { .. }));
    }
}
