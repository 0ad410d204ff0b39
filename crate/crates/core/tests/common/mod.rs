//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use nalgebra::DMatrix;
use patchfill::{Boundary, Image, PatchConfig, PatchGroups, PatchLayout};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One-sided Jacobi SVD: returns `(U, sigma, V)` with `A = U diag(sigma) V^T`
/// for `rows >= cols` inputs.
pub fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    assert!(m >= n);
    let mut u = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = u.column(p).norm_squared();
                let beta: f64 = u.column(q).norm_squared();
                let gamma: f64 = u.column(p).dot(&u.column(q));
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (u[(i, p)], u[(i, q)]);
                    u[(i, p)] = c * x - s * y;
                    u[(i, q)] = s * x + c * y;
                }
                for i in 0..n {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * x - s * y;
                    v[(i, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<f64> = (0..n).map(|j| u.column(j).norm()).collect();
    for (j, &s) in sigma.iter().enumerate() {
        if s > 0.0 {
            let col = u.column(j) / s;
            u.set_column(j, &col);
        }
    }
    (u, sigma, v)
}

/// Singular-value shrinkage through [`jacobi_svd`].
pub fn svt_oracle(a: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    if a.nrows() < a.ncols() {
        return svt_oracle(&a.transpose(), tau).transpose();
    }
    let (u, sigma, v) = jacobi_svd(a);
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for (j, &s) in sigma.iter().enumerate() {
        if s > tau {
            out += (s - tau) * u.column(j) * v.column(j).transpose();
        }
    }
    out
}

pub fn nuclear_norm(a: &DMatrix<f64>) -> f64 {
    let t = if a.nrows() >= a.ncols() { a.clone() } else { a.transpose() };
    jacobi_svd(&t).1.iter().sum()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-2.0..2.0))
}

pub fn random_image(rng: &mut ChaCha8Rng, side: usize) -> Image {
    Image::from_fn(side, |_, _| rng.random_range(0.0..255.0))
}

/// Pixel `anchor + offset` computed straight from the boundary definitions.
pub fn boundary_pixel(side: usize, b: Boundary, anchor: (usize, usize), off: (usize, usize)) -> (usize, usize) {
    let map = |i: usize| match b {
        Boundary::Valid => {
            assert!(i < side);
            i
        }
        Boundary::Periodic => i % side,
        Boundary::Symmetric => {
            // half-sample reflection: ..., 1, 0 | 0, 1, ..., N-1 | N-1, N-2, ...
            let period = 2 * side;
            let j = i % period;
            if j < side {
                j
            } else {
                period - 1 - j
            }
        }
    };
    (map(anchor.0 + off.0), map(anchor.1 + off.1))
}

/// `G(z)` assembled entry by entry: block `k`, row `k1 * n + k2`, column = position of
/// the anchor in group `k`.
pub fn naive_lift(z: &Image, cfg: &PatchConfig, groups: &PatchGroups) -> Vec<DMatrix<f64>> {
    let n = cfg.patch_n;
    groups
        .groups()
        .iter()
        .map(|g| {
            DMatrix::from_fn(n * n, g.len(), |row, col| {
                let (r, c) = boundary_pixel(cfg.n_side, cfg.boundary, g[col], (row / n, row % n));
                z.get(r, c)
            })
        })
        .collect()
}

/// `K` equal-size groups of distinct anchors that together contain every anchor.
pub fn random_covering_groups(rng: &mut ChaCha8Rng, cfg: &PatchConfig, k: usize) -> PatchGroups {
    let mut anchors = cfg.all_anchors();
    anchors.shuffle(rng);
    let size = anchors.len().div_ceil(k);
    let mut groups: Vec<Vec<(usize, usize)>> = anchors.chunks(size).map(<[_]>::to_vec).collect();
    while groups.len() < k {
        groups.push(Vec::new());
    }
    for g in groups.iter_mut() {
        while g.len() < size {
            let a = anchors[rng.random_range(0..anchors.len())];
            if !g.contains(&a) {
                g.push(a);
            }
        }
    }
    PatchGroups::new(groups).unwrap()
}

/// Random layout: groups drawn uniformly from the anchors (coverage not guaranteed).
pub fn random_groups(rng: &mut ChaCha8Rng, cfg: &PatchConfig, k: usize, size: usize) -> PatchGroups {
    let anchors = cfg.all_anchors();
    let groups = (0..k)
        .map(|_| (0..size).map(|_| anchors[rng.random_range(0..anchors.len())]).collect())
        .collect();
    PatchGroups::new(groups).unwrap()
}

pub fn single_layout(side: usize, n: usize, b: Boundary) -> PatchLayout {
    let cfg = PatchConfig::new(side, n, b).unwrap();
    PatchLayout::new(cfg, PatchGroups::single_full(&cfg)).unwrap()
}
