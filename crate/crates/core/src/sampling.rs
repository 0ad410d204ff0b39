//! Uniform i.i.d. pixel sampling and the masking operator.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

/// Seed for every random draw in the crate. The same seed and call sequence
/// always produce the same output.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent child seed for the `index`-th sub-task (trial, batch, ...).
    pub fn derive(self, index: u64) -> RngSeed {
        // splitmix64 finalizer
        let mut z = self
            .0
            .wrapping_add(0x9E37_79B9_7F4A_7C15_u64.wrapping_mul(index.wrapping_add(1)));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }
}

/// A multiset of observed pixel coordinates plus its distinct support.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleSet {
    side: usize,
    draws: Vec<(usize, usize)>,
    distinct: BTreeSet<(usize, usize)>,
}

impl SampleSet {
    pub fn new(side: usize, draws: Vec<(usize, usize)>) -> Result<Self> {
        if side == 0 {
            return Err(Error::invalid("grid side must be positive"));
        }
        if let Some(&(r, c)) = draws.iter().find(|&&(r, c)| r >= side || c >= side) {
            return Err(Error::invalid(format!(
                "sample ({r}, {c}) lies outside the {side}x{side} grid"
            )));
        }
        let distinct = draws.iter().copied().collect();
        Ok(Self {
            side,
            draws,
            distinct,
        })
    }

    /// Every pixel exactly once, in raster order.
    pub fn full(side: usize) -> Self {
        let draws = (0..side)
            .flat_map(|r| (0..side).map(move |c| (r, c)))
            .collect();
        Self::new(side, draws).expect("full grid is valid")
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Number of draws `m`, collisions included.
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn draws(&self) -> &[(usize, usize)] {
        &self.draws
    }

    pub fn distinct(&self) -> &BTreeSet<(usize, usize)> {
        &self.distinct
    }

    /// How many times each pixel was drawn, row-major.
    pub fn multiplicities(&self) -> Vec<u32> {
        let mut m = vec![0u32; self.side * self.side];
        for &(r, c) in &self.draws {
            m[r * self.side + c] += 1;
        }
        m
    }

    /// Row-major 0/1 indicator of the distinct support.
    pub fn indicator(&self) -> Vec<bool> {
        let mut m = vec![false; self.side * self.side];
        for &(r, c) in &self.distinct {
            m[r * self.side + c] = true;
        }
        m
    }

    /// Mask file format: one `row col` pair per line, 0-indexed, in draw order.
    pub fn to_mask_text(&self) -> String {
        let mut s = String::with_capacity(self.draws.len() * 8);
        for (r, c) in &self.draws {
            let _ = writeln!(s, "{r} {c}");
        }
        s
    }

    pub fn parse_mask_text(side: usize, text: &str) -> Result<Self> {
        let mut draws = Vec::new();
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            let trimmed = line.trim();
            if !trimmed.is_empty() && !trimmed.starts_with('#') {
                let fields: Vec<&str> = trimmed.split_whitespace().collect();
                let parsed = match fields.as_slice() {
                    [r, c] => r.parse::<usize>().ok().zip(c.parse::<usize>().ok()),
                    _ => None,
                };
                match parsed {
                    Some(rc) => draws.push(rc),
                    None => {
                        return Err(Error::format(
                            offset,
                            format!("expected `row col`, found {trimmed:?}"),
                        ))
                    }
                }
            }
            offset += line.len();
        }
        if draws.is_empty() {
            return Err(Error::invalid("mask contains no samples"));
        }
        Self::new(side, draws)
    }

    pub fn read_mask(side: usize, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_mask_text(side, &text)
    }

    pub fn write_mask(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_mask_text()).map_err(|e| Error::io(path, e))
    }
}

/// Draws `m` pixel coordinates i.i.d. uniformly from the `n_side x n_side`
/// grid. Collisions are kept.
pub fn sample_uniform(n_side: usize, m: usize, seed: RngSeed) -> Result<SampleSet> {
    if n_side == 0 || m == 0 {
        return Err(Error::invalid(format!(
            "sample_uniform needs n_side >= 1 and m >= 1 (got n_side={n_side}, m={m})"
        )));
    }
    let mut rng = seed.rng();
    let draws = (0..m)
        .map(|_| (rng.random_range(0..n_side), rng.random_range(0..n_side)))
        .collect();
    SampleSet::new(n_side, draws)
}

/// `z` on the distinct support of `s`, zero elsewhere.
pub fn apply_mask(z: &Image, s: &SampleSet) -> Result<Image> {
    if z.side() != s.side() {
        return Err(Error::invalid(format!(
            "sample grid {0}x{0} does not match image {1}x{1}",
            s.side(),
            z.side()
        )));
    }
    let mut out = Image::zeros(z.side());
    let px = out.pixels_mut();
    for &(r, c) in s.distinct() {
        let i = r * z.side() + c;
        px[i] = z.pixels()[i];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pixel_grid() {
        let s = sample_uniform(1, 3, RngSeed(9)).unwrap();
        assert_eq!(s.draws(), &[(0, 0); 3]);
        assert_eq!(s.distinct().len(), 1);
    }

    #[test]
    fn twenty_percent_subsample() {
        let s = sample_uniform(64, 819, RngSeed(1)).unwrap();
        assert_eq!(s.len(), 819);
        assert!(s.draws().iter().all(|&(r, c)| r < 64 && c < 64));
        assert!(s.distinct().len() <= 819);
    }

    #[test]
    fn rejects_degenerate_arguments() {
        assert!(sample_uniform(0, 3, RngSeed(0)).is_err());
        assert!(sample_uniform(3, 0, RngSeed(0)).is_err());
        assert!(SampleSet::new(2, vec![(0, 2)]).is_err());
    }

    #[test]
    fn empirical_frequencies_are_uniform() {
        let m = 100_000;
        let s = sample_uniform(4, m, RngSeed(2024)).unwrap();
        let p = 1.0 / 16.0;
        let sigma = (m as f64 * p * (1.0 - p)).sqrt();
        let mult = s.multiplicities();
        for &k in &mult {
            assert!((k as f64 - m as f64 * p).abs() <= 3.0 * sigma, "count {k}");
        }
        // chi-square with 15 dof; the 99.9% quantile is 37.7
        let expected = m as f64 * p;
        let chi2: f64 = mult
            .iter()
            .map(|&k| (k as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 37.7, "chi2 = {chi2}");
    }

    #[test]
    fn mask_on_two_by_two() {
        let z = Image::new(2, vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        let s = SampleSet::new(2, vec![(0, 0)]).unwrap();
        assert_eq!(apply_mask(&z, &s).unwrap().pixels(), &[5.0, 0.0, 0.0, 0.0]);
        assert_eq!(apply_mask(&z, &SampleSet::full(2)).unwrap(), z);
    }

    #[test]
    fn mask_text_round_trip_keeps_collisions() {
        let s = SampleSet::new(4, vec![(1, 2), (3, 0), (1, 2)]).unwrap();
        let text = s.to_mask_text();
        assert_eq!(text, "1 2\n3 0\n1 2\n");
        assert_eq!(SampleSet::parse_mask_text(4, &text).unwrap(), s);
        let with_comments = "# header\n\n1 2\n3 0\n1 2\n";
        assert_eq!(SampleSet::parse_mask_text(4, with_comments).unwrap(), s);
        let err = SampleSet::parse_mask_text(4, "1 2\n1 x\n").unwrap_err();
        assert!(matches!(err, Error::Format { offset: 4, .. }));
    }

    #[test]
    fn derived_seeds_differ() {
        let base = RngSeed(7);
        assert_ne!(base.derive(0), base.derive(1));
        assert_eq!(base.derive(5), RngSeed(7).derive(5));
    }
}
