use nalgebra::DMatrix;

use super::svd::thin_svd;

use crate::error::{Error, Result};

/// Singular-value thresholding: `U max(S - tau, 0) V^T`, the proximal map of
/// `tau ||.||_*`.
pub fn svt(m: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    svt_with_shrunk(m, tau).map(|(x, _)| x)
}

/// Like [`svt`], also returning the thresholded singular values (nonzero ones
/// only, nonincreasing).
pub fn svt_with_shrunk(m: &DMatrix<f64>, tau: f64) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::invalid(format!("threshold must be finite and >= 0, got {tau}")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok((m.clone(), Vec::new()));
    }
    // shrinking the triangular factor of a thin QR is cheaper for elongated
    // blocks: svt(Q R) = Q svt(R)
    if rows >= 2 * cols {
        let qr = m.clone().qr();
        let (x, s) = shrink(qr.r(), tau)?;
        return Ok((qr.q() * x, s));
    }
    if cols >= 2 * rows {
        let qr = m.transpose().qr();
        let (x, s) = shrink(qr.r(), tau)?;
        return Ok(((qr.q() * x).transpose(), s));
    }
    shrink(m.clone(), tau)
}

fn shrink(m: DMatrix<f64>, tau: f64) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let (rows, cols) = m.shape();
    let svd = thin_svd(&m)?;
    let (u, v_t) = (&svd.u, &svd.v_t);

    let mut keep: Vec<(usize, f64)> = svd
        .sigma
        .iter()
        .enumerate()
        .filter_map(|(i, &s)| (s > tau).then_some((i, s - tau)))
        .collect();
    keep.sort_by(|a, b| b.1.total_cmp(&a.1));

    let mut out = DMatrix::zeros(rows, cols);
    for &(i, s) in &keep {
        out.ger(s, &u.column(i), &v_t.row(i).transpose(), 1.0);
    }
    Ok((out, keep.into_iter().map(|(_, s)| s).collect()))
}
