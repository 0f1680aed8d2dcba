//! Projection of a window onto a learned subspace.
//!
//! Three routes are provided:
//! * [`simple_projection`]: orthogonal least squares, `â = Uᵀx`.
//! * [`robust_projection`]: rank the rows by the simple-projection residual,
//!   drop the `n_s` largest, and solve least squares on the rest. Under
//!   incoherence of `U` and a sparse corruption this returns the exact
//!   uncorrupted coefficients in closed form.
//! * [`l1_projection_oracle`]: an iterative `min ‖x − U a‖₁` solver kept as
//!   an independent reference for the closed form.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::trajectory::Window;

/// Pivot magnitude below which a kept-row submatrix counts as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct RobustProjectionResult {
    pub a_hat: DVector<f64>,
    /// Rows judged uncorrupted, ascending.
    pub kept_rows: Vec<usize>,
    /// `x − U â` over the whole window.
    pub residual: DVector<f64>,
    /// `|x − U Uᵀ x|`, used to rank the rows.
    pub prelim_residual: DVector<f64>,
}

impl RobustProjectionResult {
    /// Rows dropped from the fit, ascending.
    pub fn dropped_rows(&self) -> Vec<usize> {
        let mut kept = self.kept_rows.iter().peekable();
        (0..self.residual.len())
            .filter(|i| {
                if kept.peek() == Some(&i) {
                    kept.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    }
}

fn check_dims(u: &DMatrix<f64>, x: &DVector<f64>) -> Result<()> {
    if u.nrows() != x.len() {
        return Err(Error::DimensionMismatch { expected: u.nrows(), got: x.len() });
    }
    Ok(())
}

pub fn simple_projection(u: &DMatrix<f64>, x: &Window) -> Result<(DVector<f64>, DVector<f64>)> {
    let x = x.as_vector();
    check_dims(u, x)?;
    let a_hat = u.tr_mul(x);
    let residual = x - u * &a_hat;
    Ok((a_hat, residual))
}

/// Least squares `min ‖A a − b‖₂` through a thin QR of `A`.
pub(crate) fn lstsq_qr(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let r = a.ncols();
    let qr = a.qr();
    let r_mat = qr.r();
    let min_pivot = (0..r).map(|i| r_mat[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if !(min_pivot > RANK_TOL) {
        return Err(Error::RankDeficient { min_pivot });
    }
    let rhs = qr.q().tr_mul(b);
    r_mat
        .solve_upper_triangular(&rhs)
        .ok_or(Error::RankDeficient { min_pivot })
}

pub fn robust_projection(u: &DMatrix<f64>, x: &Window, n_s: usize) -> Result<RobustProjectionResult> {
    let xv = x.as_vector();
    check_dims(u, xv)?;
    let (m1, r) = u.shape();
    if n_s + r > m1 {
        return Err(Error::BadBudget { n_s, rank: r, window: m1 });
    }

    let coarse = u.tr_mul(xv);
    let prelim_residual = (xv - u * &coarse).abs();

    if n_s == 0 {
        // all rows kept: least squares on an orthonormal U is exactly Uᵀx
        let residual = xv - u * &coarse;
        return Ok(RobustProjectionResult {
            a_hat: coarse,
            kept_rows: (0..m1).collect(),
            residual,
            prelim_residual,
        });
    }

    let mut order: Vec<usize> = (0..m1).collect();
    order.sort_by(|&a, &b| prelim_residual[a].total_cmp(&prelim_residual[b]).then(a.cmp(&b)));
    let mut kept_rows = order[..m1 - n_s].to_vec();
    kept_rows.sort_unstable();

    let u_kept = u.select_rows(&kept_rows);
    let x_kept = xv.select_rows(&kept_rows);
    let a_hat = lstsq_qr(u_kept, &x_kept)?;
    let residual = xv - u * &a_hat;

    Ok(RobustProjectionResult { a_hat, kept_rows, residual, prelim_residual })
}

/// Smoothing floor on `|residual|` in the reweighting.
pub const IRLS_EPS: f64 = 1e-8;

/// `argmin_a ‖x − U a‖₁` by iteratively reweighted least squares with weights
/// `1 / max(|res_i|, ε)`. Stops when the largest coefficient change drops
/// below `tol`; otherwise returns [`Error::DidNotConverge`] with the last
/// iterate. Starts from `Uᵀx`.
pub fn l1_projection_oracle(u: &DMatrix<f64>, x: &Window, max_iter: usize, tol: f64) -> Result<DVector<f64>> {
    let xv = x.as_vector();
    check_dims(u, xv)?;
    let mut a = u.tr_mul(xv);
    for _ in 0..max_iter {
        let res = xv - u * &a;
        let sqrt_w = res.map(|e| 1.0 / e.abs().max(IRLS_EPS).sqrt());
        let mut uw = u.clone();
        for (mut row, w) in uw.row_iter_mut().zip(sqrt_w.iter()) {
            row *= *w;
        }
        let xw = xv.component_mul(&sqrt_w);
        let next = lstsq_qr(uw, &xw)?;
        let change = (&next - &a).amax();
        a = next;
        if change < tol {
            return Ok(a);
        }
    }
    Err(Error::DidNotConverge { last_iterate: a.iter().copied().collect(), iterations: max_iter })
}

/// Residual of the current stamp: `v − âᵀ u₋₁` with `u₋₁` the last row of `U`.
pub fn residual_of_last(u: &DMatrix<f64>, a_hat: &DVector<f64>, v: f64) -> f64 {
    v - predicted_last(u, a_hat)
}

/// Fitted value of the current stamp, `âᵀ u₋₁`.
pub fn predicted_last(u: &DMatrix<f64>, a_hat: &DVector<f64>) -> f64 {
    u.row(u.nrows() - 1).transpose().dot(a_hat)
}
