//! Incoherence metrics of an orthonormal basis `U ∈ R^{M1×r}`.
//!
//! * `μ²(U) = max_i ‖row_i(U)‖² / r`, in `[1/M1, 1]`.
//! * `γ(U) = 1 / min_{‖h‖=1} ‖U h‖₁`.
//! * `κ(U) = μ(U) · γ(U)`.
//!
//! `μ²` is exact. `γ` needs a minimum of a convex function over the unit
//! sphere, which is nonconvex, so it is estimated by multi-start projected
//! subgradient descent followed by a vertex polish (see [`gamma_estimate`]).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orthonormality tolerance on `‖UᵀU − I‖_∞`.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

pub const DEFAULT_STARTS: usize = 64;

const DESCENT_STEPS: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub mu_squared: f64,
    pub gamma_estimate: f64,
    pub kappa_estimate: f64,
    pub gamma_is_exact: bool,
}

/// Max absolute entry of `UᵀU − I`.
pub fn orthonormality_error(u: &DMatrix<f64>) -> f64 {
    let gram = u.transpose() * u;
    let r = gram.nrows();
    (gram - DMatrix::<f64>::identity(r, r)).amax()
}

pub fn check_orthonormal(u: &DMatrix<f64>) -> Result<()> {
    let deviation = orthonormality_error(u);
    if u.ncols() == 0 || u.ncols() > u.nrows() || !(deviation < ORTHONORMAL_TOL) {
        return Err(Error::NotOrthonormal { deviation });
    }
    Ok(())
}

pub fn mu_squared(u: &DMatrix<f64>) -> Result<f64> {
    check_orthonormal(u)?;
    let r = u.ncols() as f64;
    Ok(u.row_iter().map(|row| row.norm_squared()).fold(0.0, f64::max) / r)
}

fn l1_image(u: &DMatrix<f64>, h: &DVector<f64>) -> f64 {
    (u * h).lp_norm(1)
}

/// Unit vector orthogonal to the given rows of `U`, if they span an
/// `(r−1)`-dimensional space.
fn null_direction(u: &DMatrix<f64>, rows: &[usize]) -> Option<DVector<f64>> {
    let r = u.ncols();
    // pad with zero rows to r×r so the SVD returns a full right basis
    let square = DMatrix::from_fn(r, r, |i, j| if i < rows.len() { u[(rows[i], j)] } else { 0.0 });
    let svd = square.svd(false, true);
    let s = &svd.singular_values;
    if s[0] == 0.0 || s[r - 2] < 1e-9 * s[0] {
        return None;
    }
    Some(svd.v_t?.row(r - 1).transpose().normalize())
}

/// Snap `h` to nearby vertices of the piecewise-linear objective: points where
/// `r − 1` rows of `U h` vanish. The sphere minimum is attained at such a point.
fn polish(u: &DMatrix<f64>, h: &DVector<f64>) -> (f64, DVector<f64>) {
    let r = u.ncols();
    let image = u * h;
    let mut order: Vec<usize> = (0..u.nrows()).collect();
    order.sort_by(|&a, &b| image[a].abs().total_cmp(&image[b].abs()));
    let pool: Vec<usize> = order.into_iter().take((r + 1).min(u.nrows())).collect();

    let mut best = (l1_image(u, h), h.clone());
    let need = r - 1;
    // all (r-1)-subsets of the pool
    let mut combo: Vec<usize> = (0..need).collect();
    loop {
        let rows: Vec<usize> = combo.iter().map(|&c| pool[c]).collect();
        if let Some(v) = null_direction(u, &rows) {
            let f = l1_image(u, &v);
            if f < best.0 {
                best = (f, v);
            }
        }
        // next combination
        let mut i = need;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if combo[i] < pool.len() - need + i {
                combo[i] += 1;
                for j in i + 1..need {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn descend(u: &DMatrix<f64>, start: DVector<f64>) -> (f64, DVector<f64>) {
    let mut h = start.normalize();
    let mut best = (l1_image(u, &h), h.clone());
    for k in 0..DESCENT_STEPS {
        let signs = (u * &h).map(f64::signum);
        let g = u.transpose() * signs;
        let tangent = &g - &h * g.dot(&h);
        let norm = tangent.norm();
        if norm < 1e-14 {
            break;
        }
        let step = 0.2 / ((k + 1) as f64).sqrt();
        h = (&h - tangent * (step / norm)).normalize();
        let f = l1_image(u, &h);
        if f < best.0 {
            best = (f, h.clone());
        }
    }
    let polished = polish(u, &best.1);
    if polished.0 < best.0 {
        polished
    } else {
        best
    }
}

/// Smallest `‖U h‖₁` found over the unit sphere.
fn min_l1_on_sphere(u: &DMatrix<f64>, n_starts: usize, seed: u64) -> f64 {
    let r = u.ncols();
    if r == 1 {
        return u.column(0).lp_norm(1);
    }
    (0..n_starts.max(1))
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let start = DVector::from_fn(r, |_, _| StandardNormal.sample(&mut rng));
            descend(u, start).0
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Estimate of `γ(U)`. Exact for `r = 1`; otherwise `1 / m̂` where `m̂` is the
/// best sphere point found, so it can only under-estimate the true value.
pub fn gamma_estimate(u: &DMatrix<f64>, n_starts: usize, seed: u64) -> Result<f64> {
    check_orthonormal(u)?;
    Ok(1.0 / min_l1_on_sphere(u, n_starts, seed))
}

pub fn kappa_estimate(u: &DMatrix<f64>, n_starts: usize, seed: u64) -> Result<f64> {
    Ok(coherence_report(u, n_starts, seed)?.kappa_estimate)
}

pub fn coherence_report(u: &DMatrix<f64>, n_starts: usize, seed: u64) -> Result<CoherenceReport> {
    let mu_squared = mu_squared(u)?;
    let gamma = gamma_estimate(u, n_starts, seed)?;
    Ok(CoherenceReport {
        mu_squared,
        gamma_estimate: gamma,
        kappa_estimate: mu_squared.sqrt() * gamma,
        gamma_is_exact: u.ncols() == 1,
    })
}
