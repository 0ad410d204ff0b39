//! Thin SVD with a residual check.
//!
//! nalgebra's bidiagonal SVD occasionally returns U and V that do not
//! reproduce the input, mostly on rank-deficient blocks (relative error from
//! 1e-8 up to 1, at any convergence threshold). Every result is checked and
//! failures are recomputed by one-sided Jacobi, which is slower but reliable.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};

/// Backward error accepted from the fast path; a stable SVD lands near 1e-15.
const CHECK_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 60;

pub(crate) struct ThinSvd {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

impl ThinSvd {
    fn residual(&self, m: &DMatrix<f64>) -> f64 {
        let mut us = self.u.clone();
        for (mut col, &s) in us.column_iter_mut().zip(self.sigma.iter()) {
            col *= s;
        }
        (us * &self.v_t - m).norm() / m.norm().max(f64::MIN_POSITIVE)
    }
}

fn orthonormality_gap(q: &DMatrix<f64>) -> f64 {
    let k = q.ncols();
    (q.tr_mul(q) - DMatrix::identity(k, k)).norm()
}

pub(crate) fn thin_svd(m: &DMatrix<f64>) -> Result<ThinSvd> {
    if let Some(svd) = SVD::try_new(m.clone(), true, true, f64::EPSILON, 0) {
        if let (Some(u), Some(v_t)) = (svd.u, svd.v_t) {
            let out = ThinSvd {
                u,
                sigma: svd.singular_values,
                v_t,
            };
            let ortho = orthonormality_gap(&out.u).max(orthonormality_gap(&out.v_t.transpose()));
            if ortho <= CHECK_TOL && out.residual(m) <= CHECK_TOL {
                return Ok(out);
            }
        }
    }
    let out = if m.nrows() >= m.ncols() {
        jacobi(m)
    } else {
        let t = jacobi(&m.transpose());
        ThinSvd {
            u: t.v_t.transpose(),
            sigma: t.sigma,
            v_t: t.u.transpose(),
        }
    };
    let residual = out.residual(m);
    if residual <= CHECK_TOL {
        Ok(out)
    } else {
        Err(Error::Numerical(format!(
            "SVD of a {}x{} block failed its self-check (relative error {residual:.1e})",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// One-sided (Hestenes) Jacobi for `rows >= cols`: rotates column pairs of
/// `A V` until they are mutually orthogonal. Columns that are numerically
/// zero are left alone and come back with zero singular value.
fn jacobi(a: &DMatrix<f64>) -> ThinSvd {
    let (rows, cols) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(cols, cols);
    let floor = (f64::EPSILON * a.norm()).powi(2);
    let tol = f64::EPSILON * rows as f64;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if alpha <= floor || beta <= floor || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta == 0.0 {
                    1.0
                } else {
                    zeta.signum() / (zeta.abs() + zeta.hypot(1.0))
                };
                let c = 1.0 / t.hypot(1.0);
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma = DVector::from_iterator(cols, w.column_iter().map(|c| c.norm()));
    for (mut col, &s) in w.column_iter_mut().zip(sigma.iter()) {
        if s > 0.0 {
            col /= s;
        }
    }
    ThinSvd {
        u: w,
        sigma,
        v_t: v.transpose(),
    }
}

fn rotate(m: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let (x, y) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = c * x - s * y;
        m[(i, q)] = s * x + c * y;
    }
}
