//! Patch matrices, the grouped block-diagonal lift and its adjoint, pixel
//! occurrence counts, and the normalized sampling basis `B_w`.
//!
//! A group is a list of patch anchors. Block `k` of the lift is the
//! `n^2 x group_size` matrix whose column `j` is the patch anchored at
//! `groups[k][j]`, vectorized in raster order over the in-patch offset
//! (row index `k1 * n + k2`). The full lifted matrix is block diagonal and is
//! never materialized.

use std::collections::HashMap;
use std::ops::{Add, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::sampling::SampleSet;

pub type Coord = (usize, usize);

/// How patches that would cross the image border are handled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Only patches fully inside the image; `(N - n + 1)^2` anchors.
    #[default]
    Valid,
    /// Wrap around; `N^2` anchors.
    Periodic,
    /// Half-sample symmetric reflection past the bottom/right edge; `N^2` anchors.
    Symmetric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchConfig {
    pub n_side: usize,
    pub patch_n: usize,
    pub boundary: Boundary,
}

impl PatchConfig {
    pub fn new(n_side: usize, patch_n: usize, boundary: Boundary) -> Result<Self> {
        if patch_n == 0 || patch_n > n_side {
            return Err(Error::invalid(format!(
                "patch size must satisfy 1 <= n <= N (n={patch_n}, N={n_side})"
            )));
        }
        Ok(Self {
            n_side,
            patch_n,
            boundary,
        })
    }

    /// Number of anchor positions along one axis.
    pub fn anchor_extent(&self) -> usize {
        match self.boundary {
            Boundary::Valid => self.n_side - self.patch_n + 1,
            Boundary::Periodic | Boundary::Symmetric => self.n_side,
        }
    }

    pub fn anchor_count(&self) -> usize {
        self.anchor_extent().pow(2)
    }

    pub fn patch_len(&self) -> usize {
        self.patch_n * self.patch_n
    }

    pub fn is_valid_anchor(&self, (r, c): Coord) -> bool {
        let e = self.anchor_extent();
        r < e && c < e
    }

    /// Every anchor in raster order.
    pub fn all_anchors(&self) -> Vec<Coord> {
        let e = self.anchor_extent();
        (0..e).flat_map(|r| (0..e).map(move |c| (r, c))).collect()
    }

    #[inline]
    fn source(&self, anchor: usize, offset: usize) -> usize {
        let i = anchor + offset;
        let n = self.n_side;
        match self.boundary {
            Boundary::Valid => i,
            Boundary::Periodic => i % n,
            Boundary::Symmetric => {
                if i < n {
                    i
                } else {
                    2 * n - 1 - i
                }
            }
        }
    }

    /// Pixel read by in-patch offset `offset` of the patch anchored at `anchor`.
    pub fn pixel_for(&self, anchor: Coord, offset: Coord) -> Coord {
        (self.source(anchor.0, offset.0), self.source(anchor.1, offset.1))
    }
}

/// `K` groups of patch anchors, all of the same size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatchGroups {
    groups: Vec<Vec<Coord>>,
    group_size: usize,
}

impl PatchGroups {
    pub fn new(groups: Vec<Vec<Coord>>) -> Result<Self> {
        let group_size = groups
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("at least one group is required"))?;
        if group_size == 0 {
            return Err(Error::invalid("groups must be nonempty"));
        }
        if let Some(k) = groups.iter().position(|g| g.len() != group_size) {
            return Err(Error::invalid(format!(
                "group {k} has {} members, expected {group_size}",
                groups[k].len()
            )));
        }
        Ok(Self { groups, group_size })
    }

    /// One group holding every anchor of `cfg` in raster order.
    pub fn single_full(cfg: &PatchConfig) -> Self {
        Self::new(vec![cfg.all_anchors()]).expect("anchor set is nonempty")
    }

    pub fn groups(&self) -> &[Vec<Coord>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn to_json(&self, cfg: &PatchConfig) -> String {
        serde_json::to_string_pretty(&GroupsFile {
            patch_n: cfg.patch_n,
            boundary: cfg.boundary,
            groups: self.groups.iter().map(|g| g.iter().map(|&(r, c)| [r, c]).collect()).collect(),
        })
        .expect("groups serialize")
    }

    /// Parses the groups JSON schema; the image side is supplied by the caller.
    pub fn from_json(text: &str, n_side: usize) -> Result<(PatchConfig, PatchGroups)> {
        let file: GroupsFile = serde_json::from_str(text).map_err(|e| {
            Error::format(0, format!("groups JSON (line {}, column {}): {e}", e.line(), e.column()))
        })?;
        let cfg = PatchConfig::new(n_side, file.patch_n, file.boundary)?;
        let groups = file
            .groups
            .into_iter()
            .map(|g| g.into_iter().map(|[r, c]| (r, c)).collect())
            .collect();
        Ok((cfg, PatchGroups::new(groups)?))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupsFile {
    patch_n: usize,
    boundary: Boundary,
    groups: Vec<Vec<[usize; 2]>>,
}

/// Precomputed index tables for a validated `(PatchConfig, PatchGroups)` pair.
#[derive(Clone, Debug)]
pub struct PatchLayout {
    cfg: PatchConfig,
    groups: PatchGroups,
    // per block, column-major n^2 x group_size: flat pixel index read at each position
    table: Vec<Vec<u32>>,
    counts: Vec<usize>,
}

impl PatchLayout {
    pub fn new(cfg: PatchConfig, groups: PatchGroups) -> Result<Self> {
        let n = cfg.patch_n;
        let side = cfg.n_side;
        let mut counts = vec![0usize; side * side];
        let mut table = Vec::with_capacity(groups.len());
        for (k, group) in groups.groups().iter().enumerate() {
            let mut block = Vec::with_capacity(n * n * group.len());
            for &anchor in group {
                if !cfg.is_valid_anchor(anchor) {
                    return Err(Error::invalid(format!(
                        "anchor ({}, {}) in group {k} is out of range for {:?} boundary \
                         (N={side}, n={n})",
                        anchor.0, anchor.1, cfg.boundary
                    )));
                }
                for k1 in 0..n {
                    for k2 in 0..n {
                        let (r, c) = cfg.pixel_for(anchor, (k1, k2));
                        let p = r * side + c;
                        counts[p] += 1;
                        block.push(p as u32);
                    }
                }
            }
            table.push(block);
        }
        Ok(Self {
            cfg,
            groups,
            table,
            counts,
        })
    }

    pub fn config(&self) -> &PatchConfig {
        &self.cfg
    }

    pub fn groups(&self) -> &PatchGroups {
        &self.groups
    }

    pub fn n_side(&self) -> usize {
        self.cfg.n_side
    }

    pub fn num_blocks(&self) -> usize {
        self.groups.len()
    }

    /// `(n^2, group_size)`.
    pub fn block_shape(&self) -> (usize, usize) {
        (self.cfg.patch_len(), self.groups.group_size())
    }

    /// `(N1, N2) = (K n^2, K group_size)`.
    pub fn lifted_shape(&self) -> (usize, usize) {
        let (r, c) = self.block_shape();
        (self.num_blocks() * r, self.num_blocks() * c)
    }

    /// Flat pixel index read at each position of block `k`, column-major.
    pub fn block_table(&self, k: usize) -> &[u32] {
        &self.table[k]
    }

    /// Raw occurrence counts `c_w`, row-major; may contain zeros.
    pub fn raw_counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn require_coverage(&self) -> Result<()> {
        match self.counts.iter().position(|&c| c == 0) {
            Some(p) => Err(Error::Coverage {
                row: p / self.cfg.n_side,
                col: p % self.cfg.n_side,
            }),
            None => Ok(()),
        }
    }

    pub fn occurrence_counts(&self) -> Result<OccurrenceCounts> {
        self.require_coverage()?;
        let max = *self.counts.iter().max().expect("nonempty");
        let min = *self.counts.iter().min().expect("nonempty");
        Ok(OccurrenceCounts {
            counts: self.counts.clone(),
            m_ratio: max as f64 / min as f64,
            total: self.counts.iter().sum(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OccurrenceCounts {
    /// `c_w` per pixel, row-major.
    pub counts: Vec<usize>,
    /// `max c_w / min c_w`.
    pub m_ratio: f64,
    /// `sum c_w = K n^2 group_size`.
    pub total: usize,
}

pub fn occurrence_counts(layout: &PatchLayout) -> Result<OccurrenceCounts> {
    layout.occurrence_counts()
}

/// An element of the lifted space: `K` dense `n^2 x group_size` blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupedPatchMatrix {
    pub blocks: Vec<DMatrix<f64>>,
}

impl GroupedPatchMatrix {
    pub fn zeros(layout: &PatchLayout) -> Self {
        let (r, c) = layout.block_shape();
        Self {
            blocks: vec![DMatrix::zeros(r, c); layout.num_blocks()],
        }
    }

    pub fn from_blocks(blocks: Vec<DMatrix<f64>>) -> Self {
        Self { blocks }
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn check_layout(&self, layout: &PatchLayout) -> Result<()> {
        let (r, c) = layout.block_shape();
        if self.blocks.len() != layout.num_blocks()
            || self.blocks.iter().any(|b| b.shape() != (r, c))
        {
            return Err(Error::ShapeMismatch(format!(
                "expected {} blocks of {r}x{c}",
                layout.num_blocks()
            )));
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.blocks.len() != other.blocks.len()
            || self
                .blocks
                .iter()
                .zip(&other.blocks)
                .any(|(a, b)| a.shape() != b.shape())
        {
            return Err(Error::ShapeMismatch("block structures differ".into()));
        }
        Ok(())
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.dot(b)).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Spectral norm of the block-diagonal matrix: the largest block norm.
    pub fn op_norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                if b.is_empty() {
                    0.0
                } else {
                    b.clone().singular_values().max()
                }
            })
            .fold(0.0, f64::max)
    }

    /// Sum of the blocks' nuclear norms.
    pub fn nuclear_norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.clone().singular_values().sum())
            .sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            blocks: self.blocks.iter().map(|b| b * s).collect(),
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &Self) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            *a += b * s;
        }
    }

    pub fn map_blocks(&self, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> Self {
        Self {
            blocks: self.blocks.iter().map(f).collect(),
        }
    }
}

impl Add for &GroupedPatchMatrix {
    type Output = GroupedPatchMatrix;
    fn add(self, rhs: Self) -> GroupedPatchMatrix {
        GroupedPatchMatrix {
            blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &GroupedPatchMatrix {
    type Output = GroupedPatchMatrix;
    fn sub(self, rhs: Self) -> GroupedPatchMatrix {
        GroupedPatchMatrix {
            blocks: self.blocks.iter().zip(&rhs.blocks).map(|(a, b)| a - b).collect(),
        }
    }
}

/// The lift `G(z)`: block `k` is `H(z)` restricted to the anchors of group `k`.
pub fn lift(z: &Image, layout: &PatchLayout) -> Result<GroupedPatchMatrix> {
    if z.side() != layout.n_side() {
        return Err(Error::invalid(format!(
            "image is {0}x{0} but the patch layout expects {1}x{1}",
            z.side(),
            layout.n_side()
        )));
    }
    Ok(lift_slice(z.pixels(), layout))
}

pub(crate) fn lift_slice(px: &[f64], layout: &PatchLayout) -> GroupedPatchMatrix {
    let (r, c) = layout.block_shape();
    GroupedPatchMatrix {
        blocks: layout
            .table
            .iter()
            .map(|t| DMatrix::from_iterator(r, c, t.iter().map(|&p| px[p as usize])))
            .collect(),
    }
}

/// The adjoint `G*(M)`: each pixel receives the sum of every entry that reads it.
///
/// Accumulation runs block by block in column-major order, so the result is
/// independent of any parallelism elsewhere.
pub fn adjoint_lift(m: &GroupedPatchMatrix, layout: &PatchLayout) -> Image {
    m.check_layout(layout).expect("matrix does not match layout");
    let side = layout.n_side();
    let mut out = vec![0.0; side * side];
    for (t, b) in layout.table.iter().zip(&m.blocks) {
        for (&p, &v) in t.iter().zip(b.as_slice()) {
            out[p as usize] += v;
        }
    }
    Image::from_raw(side, out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    /// Max over pixels and blocks of the nonzeros in one row of `H(e_w)|_k`.
    pub max_row_nnz: usize,
    /// Max over pixels and blocks of the nonzeros in one column of `H(e_w)|_k`.
    pub max_col_nnz: usize,
    /// `max c_w / min c_w`; infinite if some pixel is uncovered.
    pub m_ratio: f64,
    /// Both nonzero counts are within the bound of 4.
    pub nnz_within_bound: bool,
}

pub const NNZ_BOUND: usize = 4;

pub fn audit_assumptions(layout: &PatchLayout) -> AuditReport {
    let (rows, cols) = layout.block_shape();
    let mut max_row = 0;
    let mut max_col = 0;
    let mut tally: HashMap<u32, usize> = HashMap::new();
    for t in &layout.table {
        for j in 0..cols {
            tally.clear();
            for &p in &t[j * rows..(j + 1) * rows] {
                *tally.entry(p).or_default() += 1;
            }
            max_col = max_col.max(tally.values().copied().max().unwrap_or(0));
        }
        for i in 0..rows {
            tally.clear();
            for j in 0..cols {
                *tally.entry(t[j * rows + i]).or_default() += 1;
            }
            max_row = max_row.max(tally.values().copied().max().unwrap_or(0));
        }
    }
    let max = *layout.counts.iter().max().expect("nonempty");
    let min = *layout.counts.iter().min().expect("nonempty");
    let m_ratio = if min == 0 {
        f64::INFINITY
    } else {
        max as f64 / min as f64
    };
    AuditReport {
        max_row_nnz: max_row,
        max_col_nnz: max_col,
        m_ratio,
        nnz_within_bound: max_row <= NNZ_BOUND && max_col <= NNZ_BOUND,
    }
}

/// `B_w = c_w^{-1/2} G(e_w)` described by its support.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplingBasisElement {
    pub pixel: Coord,
    /// `(block, row, col)` positions where `B_w` is nonzero.
    pub support: Vec<(usize, usize, usize)>,
    pub c_omega: usize,
    /// Operator norm of `B_w`.
    pub b_omega: f64,
}

impl SamplingBasisElement {
    /// Value of every nonzero entry, `c_w^{-1/2}`.
    pub fn entry(&self) -> f64 {
        1.0 / (self.c_omega as f64).sqrt()
    }

    pub fn to_matrix(&self, layout: &PatchLayout) -> GroupedPatchMatrix {
        let mut m = GroupedPatchMatrix::zeros(layout);
        let v = self.entry();
        for &(k, i, j) in &self.support {
            m.blocks[k][(i, j)] = v;
        }
        m
    }
}

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 100_000;

/// Largest singular value of a 0/1 pattern given by `(row, col)` positions.
fn pattern_spectral_norm(positions: &[(usize, usize)]) -> f64 {
    if positions.is_empty() {
        return 0.0;
    }
    let mut rows: Vec<usize> = positions.iter().map(|p| p.0).collect();
    let mut cols: Vec<usize> = positions.iter().map(|p| p.1).collect();
    rows.sort_unstable();
    rows.dedup();
    cols.sort_unstable();
    cols.dedup();
    let entries: Vec<(usize, usize)> = positions
        .iter()
        .map(|&(r, c)| {
            (
                rows.binary_search(&r).unwrap(),
                cols.binary_search(&c).unwrap(),
            )
        })
        .collect();
    // power iteration on P^T P from the all-ones vector (Perron direction)
    let mut x = vec![1.0 / (cols.len() as f64).sqrt(); cols.len()];
    let mut px = vec![0.0; rows.len()];
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        px.iter_mut().for_each(|v| *v = 0.0);
        for &(r, c) in &entries {
            px[r] += x[c];
        }
        let mut y = vec![0.0; cols.len()];
        for &(r, c) in &entries {
            y[c] += px[r];
        }
        let new_lambda: f64 = y.iter().zip(&x).map(|(a, b)| a * b).sum();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = y.into_iter().map(|v| v / norm).collect();
        let done = (new_lambda - lambda).abs() <= POWER_TOL * new_lambda;
        lambda = new_lambda;
        if done {
            break;
        }
    }
    lambda.sqrt()
}

fn element_from_support(
    pixel: Coord,
    support: Vec<(usize, usize, usize)>,
    num_blocks: usize,
) -> SamplingBasisElement {
    let c = support.len();
    let mut per_block: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_blocks];
    for &(k, i, j) in &support {
        per_block[k].push((i, j));
    }
    // blocks occupy disjoint rows and columns of the lifted matrix
    let sigma = per_block
        .iter()
        .map(|p| pattern_spectral_norm(p))
        .fold(0.0, f64::max);
    SamplingBasisElement {
        pixel,
        support,
        c_omega: c,
        b_omega: sigma / (c as f64).sqrt(),
    }
}

fn supports(layout: &PatchLayout) -> Vec<Vec<(usize, usize, usize)>> {
    let (rows, _) = layout.block_shape();
    let side = layout.n_side();
    let mut out: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); side * side];
    for (k, t) in layout.table.iter().enumerate() {
        for (idx, &p) in t.iter().enumerate() {
            out[p as usize].push((k, idx % rows, idx / rows));
        }
    }
    out
}

pub fn sampling_basis(pixel: Coord, layout: &PatchLayout) -> Result<SamplingBasisElement> {
    let side = layout.n_side();
    if pixel.0 >= side || pixel.1 >= side {
        return Err(Error::invalid(format!(
            "pixel ({}, {}) lies outside the {side}x{side} grid",
            pixel.0, pixel.1
        )));
    }
    let target = (pixel.0 * side + pixel.1) as u32;
    let (rows, _) = layout.block_shape();
    let mut support = Vec::new();
    for (k, t) in layout.table.iter().enumerate() {
        for (idx, &p) in t.iter().enumerate() {
            if p == target {
                support.push((k, idx % rows, idx / rows));
            }
        }
    }
    if support.is_empty() {
        return Err(Error::Coverage {
            row: pixel.0,
            col: pixel.1,
        });
    }
    Ok(element_from_support(pixel, support, layout.num_blocks()))
}

/// The full sampling basis `{B_w}` together with the operators built from it:
/// `B` (orthogonal projector onto `range(G)`), `B_Lambda`, `B'_Lambda` and
/// `B_perp`, plus the `B`-norms.
///
/// Uses `<M, B_w> = G*(M)(w) / sqrt(c_w)`, so none of the `B_w` are formed.
#[derive(Clone, Debug)]
pub struct SamplingBasis<'a> {
    layout: &'a PatchLayout,
    elements: Vec<SamplingBasisElement>,
}

impl<'a> SamplingBasis<'a> {
    pub fn new(layout: &'a PatchLayout) -> Result<Self> {
        layout.require_coverage()?;
        let side = layout.n_side();
        let elements = supports(layout)
            .into_iter()
            .enumerate()
            .map(|(p, s)| element_from_support((p / side, p % side), s, layout.num_blocks()))
            .collect();
        Ok(Self { layout, elements })
    }

    pub fn layout(&self) -> &'a PatchLayout {
        self.layout
    }

    pub fn elements(&self) -> &[SamplingBasisElement] {
        &self.elements
    }

    pub fn element(&self, pixel: Coord) -> &SamplingBasisElement {
        &self.elements[pixel.0 * self.layout.n_side() + pixel.1]
    }

    pub fn b_values(&self) -> Vec<f64> {
        self.elements.iter().map(|e| e.b_omega).collect()
    }

    /// `<M, B_w>` for every pixel, row-major.
    pub fn coefficients(&self, m: &GroupedPatchMatrix) -> Vec<f64> {
        let g = adjoint_lift(m, self.layout);
        g.pixels()
            .iter()
            .zip(&self.elements)
            .map(|(v, e)| v / (e.c_omega as f64).sqrt())
            .collect()
    }

    /// `||M||_B = (sum_w b_w^2 <M, B_w>^2)^{1/2}`.
    pub fn b_norm(&self, m: &GroupedPatchMatrix) -> f64 {
        self.coefficients(m)
            .iter()
            .zip(&self.elements)
            .map(|(a, e)| (e.b_omega * a).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `||M||_{B,inf} = max_w b_w |<M, B_w>|`.
    pub fn b_inf_norm(&self, m: &GroupedPatchMatrix) -> f64 {
        self.coefficients(m)
            .iter()
            .zip(&self.elements)
            .map(|(a, e)| (e.b_omega * a).abs())
            .fold(0.0, f64::max)
    }

    /// `sum_w weight_w <M, B_w> B_w`.
    pub fn weighted(&self, m: &GroupedPatchMatrix, weights: &[f64]) -> GroupedPatchMatrix {
        let g = adjoint_lift(m, self.layout);
        let px: Vec<f64> = g
            .pixels()
            .iter()
            .zip(&self.elements)
            .zip(weights)
            .map(|((v, e), w)| w * v / e.c_omega as f64)
            .collect();
        lift_slice(&px, self.layout)
    }

    /// `B(M)`, the orthogonal projection onto `range(G)`.
    pub fn project(&self, m: &GroupedPatchMatrix) -> GroupedPatchMatrix {
        self.weighted(m, &vec![1.0; self.elements.len()])
    }

    /// `B_perp(M) = M - B(M)`.
    pub fn complement(&self, m: &GroupedPatchMatrix) -> GroupedPatchMatrix {
        m - &self.project(m)
    }

    /// `B_Lambda(M)`: sum over draws, collisions counted.
    pub fn sampled(&self, m: &GroupedPatchMatrix, s: &SampleSet) -> GroupedPatchMatrix {
        let w: Vec<f64> = s.multiplicities().into_iter().map(f64::from).collect();
        self.weighted(m, &w)
    }

    /// `B'_Lambda(M)`: sum over the distinct support only (a projector).
    pub fn sampled_distinct(&self, m: &GroupedPatchMatrix, s: &SampleSet) -> GroupedPatchMatrix {
        let w: Vec<f64> = s
            .indicator()
            .into_iter()
            .map(|b| if b { 1.0 } else { 0.0 })
            .collect();
        self.weighted(m, &w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_by_three() -> (Image, PatchLayout) {
        let z = Image::from_fn(3, |r, c| (r * 3 + c + 1) as f64);
        let cfg = PatchConfig::new(3, 2, Boundary::Valid).unwrap();
        let layout = PatchLayout::new(cfg, PatchGroups::single_full(&cfg)).unwrap();
        (z, layout)
    }

    #[test]
    fn lift_enumerates_patches() {
        let (z, layout) = three_by_three();
        let m = lift(&z, &layout).unwrap();
        let b = &m.blocks[0];
        assert_eq!(b.shape(), (4, 4));
        assert_eq!(b.column(0).as_slice(), &[1.0, 2.0, 4.0, 5.0]);
        assert_eq!(b.column(3).as_slice(), &[5.0, 6.0, 8.0, 9.0]);
    }

    #[test]
    fn unit_patches_are_pixels() {
        let z = Image::from_fn(4, |r, c| (r * 10 + c) as f64);
        let cfg = PatchConfig::new(4, 1, Boundary::Valid).unwrap();
        let layout = PatchLayout::new(cfg, PatchGroups::single_full(&cfg)).unwrap();
        let m = lift(&z, &layout).unwrap();
        assert_eq!(m.blocks[0].shape(), (1, 16));
        assert_eq!(m.blocks[0].as_slice(), z.pixels());
    }

    #[test]
    fn constant_image_lifts_to_constant_blocks() {
        for boundary in [Boundary::Valid, Boundary::Periodic, Boundary::Symmetric] {
            let cfg = PatchConfig::new(5, 3, boundary).unwrap();
            let layout = PatchLayout::new(cfg, PatchGroups::single_full(&cfg)).unwrap();
            let m = lift(&Image::filled(5, 7.5), &layout).unwrap();
            assert!(m.blocks[0].iter().all(|&v| v == 7.5));
        }
    }

    #[test]
    fn rejects_out_of_range_anchor() {
        let cfg = PatchConfig::new(4, 2, Boundary::Valid).unwrap();
        let groups = PatchGroups::new(vec![vec![(3, 0)]]).unwrap();
        assert!(matches!(PatchLayout::new(cfg, groups), Err(Error::InvalidArgument(_))));
        assert!(PatchConfig::new(3, 4, Boundary::Valid).is_err());
        assert!(PatchConfig::new(3, 0, Boundary::Valid).is_err());
        assert!(PatchGroups::new(vec![vec![(0, 0)], vec![]]).is_err());
    }

    #[test]
    fn counts_on_three_by_three() {
        let (_, layout) = three_by_three();
        let oc = layout.occurrence_counts().unwrap();
        assert_eq!(oc.counts, vec![1, 2, 1, 2, 4, 2, 1, 2, 1]);
        assert_eq!(oc.m_ratio, 4.0);
        assert_eq!(oc.total, 16);
    }

    #[test]
    fn periodic_counts_are_flat() {
        let cfg = PatchConfig::new(6, 3, Boundary::Periodic).unwrap();
        let layout = PatchLayout::new(cfg, PatchGroups::single_full(&cfg)).unwrap();
        let oc = layout.occurrence_counts().unwrap();
        assert!(oc.counts.iter().all(|&c| c == 9));
        assert_eq!(oc.m_ratio, 1.0);
    }

    #[test]
    fn duplicated_group_doubles_counts() {
        let (_, single) = three_by_three();
        let cfg = *single.config();
        let all = cfg.all_anchors();
        let double = PatchLayout::new(cfg, PatchGroups::new(vec![all.clone(), all]).unwrap()).unwrap();
        let a = single.occurrence_counts().unwrap();
        let b = double.occurrence_counts().unwrap();
        assert!(a.counts.iter().zip(&b.counts).all(|(x, y)| 2 * x == *y));
        assert_eq!(a.m_ratio, b.m_ratio);
    }

    #[test]
    fn uncovered_pixel_is_named() {
        let cfg = PatchConfig::new(4, 2, Boundary::Valid).unwrap();
        let layout = PatchLayout::new(cfg, PatchGroups::new(vec![vec![(0, 0)]]).unwrap()).unwrap();
        match layout.occurrence_counts() {
            Err(Error::Coverage { row: 0, col: 2 }) => {}
            other => panic!("{other:?}"),
        }
        assert!(audit_assumptions(&layout).m_ratio.is_infinite());
    }

    #[test]
    fn audit_by_boundary() {
        let mk = |b| {
            let cfg = PatchConfig::new(6, 3, b).unwrap();
            audit_assumptions(&PatchLayout::new(cfg, PatchGroups::single_full(&cfg)).unwrap())
        };
        let valid = mk(Boundary::Valid);
        assert_eq!((valid.max_row_nnz, valid.max_col_nnz), (1, 1));
        let periodic = mk(Boundary::Periodic);
        assert_eq!((periodic.max_row_nnz, periodic.max_col_nnz), (1, 1));
        assert_eq!(periodic.m_ratio, 1.0);
        let symmetric = mk(Boundary::Symmetric);
        assert!(symmetric.max_row_nnz <= 4 && symmetric.max_col_nnz <= 4);
        assert!(symmetric.max_row_nnz > 1);
        assert!(valid.nnz_within_bound && periodic.nnz_within_bound && symmetric.nnz_within_bound);
    }

    #[test]
    fn corner_and_center_basis_elements() {
        let (_, layout) = three_by_three();
        let corner = sampling_basis((0, 0), &layout).unwrap();
        assert_eq!(corner.c_omega, 1);
        assert_eq!(corner.support, vec![(0, 0, 0)]);
        assert!((corner.b_omega - 1.0).abs() < 1e-12);

        let center = sampling_basis((1, 1), &layout).unwrap();
        assert_eq!(center.c_omega, 4);
        assert!((center.entry() - 0.5).abs() < 1e-15);
        let rows: std::collections::BTreeSet<_> = center.support.iter().map(|s| s.1).collect();
        let cols: std::collections::BTreeSet<_> = center.support.iter().map(|s| s.2).collect();
        assert_eq!((rows.len(), cols.len()), (4, 4));
        assert!((center.b_omega - 0.5).abs() < 1e-12);
    }

    #[test]
    fn basis_elements_have_unit_frobenius_norm() {
        let cfg = PatchConfig::new(5, 2, Boundary::Symmetric).unwrap();
        let layout = PatchLayout::new(cfg, PatchGroups::single_full(&cfg)).unwrap();
        let basis = SamplingBasis::new(&layout).unwrap();
        for e in basis.elements() {
            assert!((e.to_matrix(&layout).frobenius() - 1.0).abs() < 1e-12);
            assert_eq!(e, &sampling_basis(e.pixel, &layout).unwrap());
        }
    }

    #[test]
    fn b_norms_vanish_off_range() {
        let (_, layout) = three_by_three();
        let basis = SamplingBasis::new(&layout).unwrap();
        // positions (1,0) and (0,1) of block 0 both read pixel (0,1)
        let mut m = GroupedPatchMatrix::zeros(&layout);
        m.blocks[0][(1, 0)] = 1.0;
        m.blocks[0][(0, 1)] = -1.0;
        assert_eq!(basis.b_norm(&m), 0.0);
        assert_eq!(basis.b_inf_norm(&m), 0.0);
        assert!(basis.project(&m).frobenius() < 1e-15);
    }

    #[test]
    fn b_norms_of_a_basis_element() {
        let (_, layout) = three_by_three();
        let basis = SamplingBasis::new(&layout).unwrap();
        for e in basis.elements() {
            let m = e.to_matrix(&layout);
            assert!((basis.b_norm(&m) - e.b_omega).abs() < 1e-12);
            assert!((basis.b_inf_norm(&m) - e.b_omega).abs() < 1e-12);
        }
    }

    #[test]
    fn gram_of_lift_is_diagonal_counts() {
        let cfg = PatchConfig::new(7, 3, Boundary::Periodic).unwrap();
        let layout = PatchLayout::new(cfg, PatchGroups::single_full(&cfg)).unwrap();
        let z = Image::from_fn(7, |r, c| (r as f64 * 1.3 - c as f64 * 0.7).sin());
        let back = adjoint_lift(&lift(&z, &layout).unwrap(), &layout);
        for (i, (&v, &c)) in back.pixels().iter().zip(layout.raw_counts()).enumerate() {
            assert!((v - c as f64 * z.pixels()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn groups_json_round_trip() {
        let cfg = PatchConfig::new(5, 2, Boundary::Symmetric).unwrap();
        let groups = PatchGroups::new(vec![vec![(0, 0), (4, 1)], vec![(2, 2), (3, 3)]]).unwrap();
        let text = groups.to_json(&cfg);
        assert!(text.contains("\"boundary\": \"symmetric\""));
        let (cfg2, groups2) = PatchGroups::from_json(&text, 5).unwrap();
        assert_eq!((cfg2, groups2), (cfg, groups));
        assert!(PatchGroups::from_json(r#"{"patch_n":2,"boundary":"valid","groups":[],"x":1}"#, 5).is_err());
    }
}
