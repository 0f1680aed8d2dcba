//! Robust estimation of the background trajectory subspace.
//!
//! Every estimator cleans the training series or its trajectory matrix
//! before taking the dominant left singular vectors, so that a handful of
//! large anomalies cannot rotate the learned basis:
//!
//! * [`estimate_simple`] replaces the largest-magnitude samples by the median.
//! * [`estimate_elementwise`] additionally re-fills the matrix entries that
//!   fit the first-pass subspace worst with their projected values.
//! * [`estimate_columnwise`] drops the trajectory columns that fit a
//!   median-cleaned subspace worst.
//!
//! Rank is chosen by counting singular values above `ratio · s₁`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::coherence::check_orthonormal;
use crate::error::{Error, Result};
use crate::stats::{median, top_k_indices};
use crate::trajectory::trajectory_of;

pub const MODEL_VERSION: u32 = 1;

/// Rank selection rule: count singular values `> ratio · s₁`, clamped to `[1, cap]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankRule {
    pub ratio: f64,
    pub cap: usize,
}

impl Default for RankRule {
    fn default() -> Self {
        Self { ratio: 0.01, cap: 10 }
    }
}

/// Learned normal-pattern model: an orthonormal `M1 × r` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceModel {
    u: DMatrix<f64>,
    singular_values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    version: u32,
    #[serde(rename = "M1")]
    m1: usize,
    r: usize,
    #[serde(rename = "U")]
    u: Vec<Vec<f64>>,
    singular_values: Vec<f64>,
}

impl SubspaceModel {
    pub fn new(u: DMatrix<f64>, singular_values: Vec<f64>) -> Result<Self> {
        check_orthonormal(&u)?;
        Ok(Self { u, singular_values })
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn window_size(&self) -> usize {
        self.u.nrows()
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    fn doc(&self) -> ModelDoc {
        ModelDoc {
            version: MODEL_VERSION,
            m1: self.window_size(),
            r: self.rank(),
            u: self.u.row_iter().map(|row| row.iter().copied().collect()).collect(),
            singular_values: self.singular_values.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.doc())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        if doc.version != MODEL_VERSION {
            return Err(Error::UnsupportedVersion(doc.version));
        }
        if doc.u.len() != doc.m1 {
            return Err(Error::DimensionMismatch { expected: doc.m1, got: doc.u.len() });
        }
        if let Some(row) = doc.u.iter().find(|row| row.len() != doc.r) {
            return Err(Error::DimensionMismatch { expected: doc.r, got: row.len() });
        }
        let u = DMatrix::from_fn(doc.m1, doc.r, |i, j| doc.u[i][j]);
        Self::new(u, doc.singular_values)
    }
}

impl Serialize for SubspaceModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.doc().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SubspaceModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = ModelDoc::deserialize(d)?;
        let text = serde_json::to_string(&doc).map_err(serde::de::Error::custom)?;
        Self::from_json(&text).map_err(serde::de::Error::custom)
    }
}

pub fn select_rank(singular_values: &[f64], ratio: f64, cap: usize) -> Result<usize> {
    let first = singular_values.first().copied().unwrap_or(0.0);
    if !(first > 0.0) {
        return Err(Error::AllZeroSpectrum);
    }
    let count = singular_values.iter().filter(|&&s| s > ratio * first).count();
    Ok(count.clamp(1, cap.max(1)))
}

/// Thin SVD returning descending singular values and the left singular
/// vectors, each column sign-fixed so its largest-magnitude entry is positive.
pub fn left_singular(x: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let svd = x.clone().svd(true, false);
    let mut u = svd.u.expect("left singular vectors requested");
    for mut col in u.column_iter_mut() {
        let pivot = col.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if pivot < 0.0 {
            col.neg_mut();
        }
    }
    (svd.singular_values.iter().copied().collect(), u)
}

fn top_columns(u: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    u.columns(0, r).into_owned()
}

fn check_length(len: usize, window: usize) -> Result<()> {
    if window == 0 {
        return Err(Error::ZeroWindow);
    }
    if len < 2 * window {
        return Err(Error::SeriesTooShort { len, required: 2 * window });
    }
    Ok(())
}

fn percent_count(percent: f64, total: usize) -> usize {
    ((percent / 100.0) * total as f64).ceil().max(0.0) as usize
}

/// Replace the `⌈percent·n⌉` largest-magnitude samples with the series median.
pub fn median_clean(values: &[f64], percent: f64) -> Vec<f64> {
    let med = median(values);
    let mut cleaned = values.to_vec();
    let magnitudes: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    for i in top_k_indices(&magnitudes, percent_count(percent, values.len()).min(values.len())) {
        cleaned[i] = med;
    }
    cleaned
}

fn fit(x: &DMatrix<f64>, rule: RankRule) -> Result<SubspaceModel> {
    let (sv, u) = left_singular(x);
    let r = select_rank(&sv, rule.ratio, rule.cap.min(x.nrows()))?;
    SubspaceModel::new(top_columns(&u, r), sv)
}

/// Median-replacement estimator: clean the series, then truncated SVD of its
/// trajectory matrix.
pub fn estimate_simple(t: &[f64], window: usize, beta_percent: f64, rule: RankRule) -> Result<SubspaceModel> {
    check_length(t.len(), window)?;
    let cleaned = median_clean(t, beta_percent);
    fit(trajectory_of(&cleaned, window)?.data(), rule)
}

/// Element-wise estimator. `alpha_percent` counts samples of the series for the
/// median pass and entries of the trajectory matrix for the re-fill pass. The
/// rank picked on the median-cleaned matrix is kept for the final SVD.
pub fn estimate_elementwise(t: &[f64], window: usize, alpha_percent: f64, rule: RankRule) -> Result<SubspaceModel> {
    check_length(t.len(), window)?;
    let mut x = trajectory_of(t, window)?.into_inner();
    let q = trajectory_of(&median_clean(t, alpha_percent), window)?.into_inner();

    let (sv_q, u_q) = left_singular(&q);
    let r = select_rank(&sv_q, rule.ratio, rule.cap.min(window))?;
    let u0 = top_columns(&u_q, r);

    let fit_x = &u0 * u0.tr_mul(&x);
    let fit_q = &u0 * u0.tr_mul(&q);
    let errors: Vec<f64> = (&x - &fit_x).iter().map(|e| e.abs()).collect();
    let count = percent_count(alpha_percent, errors.len()).min(errors.len());
    for idx in top_k_indices(&errors, count) {
        // column-major linear index
        x[idx] = fit_q[idx];
    }

    let (sv, u) = left_singular(&x);
    SubspaceModel::new(top_columns(&u, r), sv)
}

/// Column-wise estimator. Each trajectory column is scored by the fraction of
/// its energy outside a median-cleaned rank-`r` subspace; the `drop_percent`
/// worst columns are discarded and the basis is refit on the remainder.
pub fn estimate_columnwise(t: &[f64], window: usize, drop_percent: f64, rule: RankRule) -> Result<SubspaceModel> {
    let dropped = columnwise_dropped(t, window, drop_percent, rule)?;
    let x = trajectory_of(t, window)?.into_inner();
    let keep: Vec<usize> = (0..x.ncols()).filter(|j| dropped.binary_search(j).is_err()).collect();
    fit(&x.select_columns(&keep), rule)
}

/// Columns the column-wise estimator discards, ascending.
pub fn columnwise_dropped(t: &[f64], window: usize, drop_percent: f64, rule: RankRule) -> Result<Vec<usize>> {
    check_length(t.len(), window)?;
    if drop_percent >= 100.0 {
        return Err(Error::AllColumnsDropped);
    }
    let scores = column_outlier_scores(t, window, rule)?;
    let drop = percent_count(drop_percent, scores.len());
    if drop >= scores.len() {
        return Err(Error::AllColumnsDropped);
    }
    let mut dropped = top_k_indices(&scores, drop);
    dropped.sort_unstable();
    Ok(dropped)
}

/// Per-column score `1 − ‖Vᵀx_j‖² / ‖x_j‖²` against the basis `V` learned from
/// the 1%-median-cleaned series. Zero columns score 0.
pub fn column_outlier_scores(t: &[f64], window: usize, rule: RankRule) -> Result<Vec<f64>> {
    let x = trajectory_of(t, window)?.into_inner();
    let reference = fit(trajectory_of(&median_clean(t, 1.0), window)?.data(), rule)?;
    let v = reference.basis();
    Ok(x
        .column_iter()
        .map(|col| {
            let total = col.norm_squared();
            if total == 0.0 {
                0.0
            } else {
                (1.0 - v.tr_mul(&col).norm_squared() / total).max(0.0)
            }
        })
        .collect())
}

/// Largest principal angle, in degrees, between the column spaces of two
/// orthonormal bases.
pub fn principal_angle_degrees(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let (small, large) = if a.ncols() <= b.ncols() { (a, b) } else { (b, a) };
    let cross = small.tr_mul(large);
    let s = cross.singular_values();
    let smallest = s.iter().copied().fold(f64::INFINITY, f64::min).clamp(0.0, 1.0);
    smallest.acos().to_degrees()
}

/// `‖(I − UUᵀ) X‖_F / ‖X‖_F`.
pub fn relative_residual(u: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    let fit = u * u.tr_mul(x);
    (x - fit).norm() / x.norm()
}
