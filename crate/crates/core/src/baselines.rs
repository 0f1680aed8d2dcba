//! Comparison detectors sharing the [`StreamingDetector`] interface.
//!
//! * SPE: the detector pipeline with the plain orthogonal projection.
//! * IID: Gaussian two-sided p-value against the last 100 observations.
//! * AR: least-squares autoregression on the previous 30 samples, refit on
//!   the same schedule as the subspace detector.

use std::collections::VecDeque;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::detector::{DetectorConfig, DetectorState, ProjectionMode, ScoreRecord, StreamingDetector};
use crate::error::{Error, Result};
use crate::projection::lstsq_qr;

pub const IID_MEMORY: usize = 100;
pub const AR_ORDER: usize = 30;
pub const RIDGE_DAMPING: f64 = 1e-8;

/// Train the simple-projection variant of the detector. Everything except the
/// projection (memory, replacement, retraining) is shared with the robust one.
pub fn spe_train(t_train: &[f64], config: DetectorConfig) -> Result<DetectorState> {
    DetectorState::train(t_train, DetectorConfig { projection: ProjectionMode::Simple, ..config })
}

pub fn spe_step(state: &mut DetectorState, v: f64) -> Result<ScoreRecord> {
    state.step(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IidState {
    buffer: VecDeque<f64>,
    capacity: usize,
}

impl IidState {
    pub fn new(capacity: usize) -> Self {
        Self { buffer: VecDeque::with_capacity(capacity), capacity }
    }

    /// Seed the buffer with the last `IID_MEMORY` training samples.
    pub fn from_training(t_train: &[f64]) -> Self {
        let mut s = Self::new(IID_MEMORY);
        t_train.iter().for_each(|&v| s.push(v));
        s
    }

    fn push(&mut self, v: f64) {
        self.buffer.push_back(v);
        while self.buffer.len() > self.capacity {
            self.buffer.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    /// Buffer mean and sample variance (population variance for a single value).
    pub fn moments(&self) -> (f64, f64) {
        let n = self.buffer.len() as f64;
        let mean = self.buffer.iter().sum::<f64>() / n;
        let ss: f64 = self.buffer.iter().map(|v| (v - mean).powi(2)).sum();
        let var = if self.buffer.len() > 1 { ss / (n - 1.0) } else { 0.0 };
        (mean, var)
    }

    /// `1 − p` for the two-sided Gaussian p-value of `v`; then `v` enters the buffer.
    pub fn step(&mut self, v: f64) -> Result<f64> {
        if self.buffer.is_empty() {
            return Err(Error::NotTrained);
        }
        let (mean, var) = self.moments();
        let score = if var > 0.0 {
            let z = (v - mean).abs() / var.sqrt();
            // p = 2(1 − Φ(z)) = erfc(z/√2)
            1.0 - erfc(z / std::f64::consts::SQRT_2)
        } else if v != mean {
            1.0
        } else {
            0.0
        };
        self.push(v);
        Ok(score)
    }
}

pub fn iid_step(state: &mut IidState, v: f64) -> Result<f64> {
    state.step(v)
}

impl StreamingDetector for IidState {
    fn name(&self) -> &'static str {
        "iid"
    }

    fn score_next(&mut self, v: f64) -> Result<f64> {
        self.step(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArConfig {
    pub order: usize,
    pub retrain_every: usize,
    pub t_max: usize,
    pub retrain_stop_len: usize,
}

impl Default for ArConfig {
    fn default() -> Self {
        Self { order: AR_ORDER, retrain_every: 100, t_max: 300, retrain_stop_len: 300 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArState {
    config: ArConfig,
    weights: DVector<f64>,
    history: Vec<f64>,
    counter: usize,
    used_ridge: bool,
}

/// Weights predicting `t[k]` from `t[k-order..k]` (oldest first), no intercept.
/// Falls back to ridge-damped normal equations when the design is rank deficient.
pub fn fit_ar(t: &[f64], order: usize) -> Result<(DVector<f64>, bool)> {
    if t.len() < 2 * order {
        return Err(Error::SeriesTooShort { len: t.len(), required: 2 * order });
    }
    let rows = t.len() - order;
    let design = DMatrix::from_fn(rows, order, |i, j| t[i + j]);
    let target = DVector::from_fn(rows, |i, _| t[i + order]);
    let scale = design.amax().max(1.0);
    let full_rank = {
        let r = design.clone().qr().r();
        let pivots = (0..order).map(|i| r[(i, i)].abs());
        pivots.fold(f64::INFINITY, f64::min) > 1e-9 * scale * (rows as f64).sqrt()
    };
    if full_rank {
        if let Ok(w) = lstsq_qr(design.clone(), &target) {
            return Ok((w, false));
        }
    }
    let normal = design.tr_mul(&design) + DMatrix::identity(order, order) * RIDGE_DAMPING;
    let rhs = design.tr_mul(&target);
    let w = normal
        .cholesky()
        .map(|c| c.solve(&rhs))
        .ok_or(Error::RankDeficient { min_pivot: 0.0 })?;
    Ok((w, true))
}

impl ArState {
    pub fn train(t_train: &[f64], config: ArConfig) -> Result<Self> {
        if config.order == 0 || config.retrain_every == 0 {
            return Err(Error::InvalidConfig("AR order and retrain_every must be positive".into()));
        }
        let start = t_train.len().saturating_sub(config.t_max);
        let history = t_train[start..].to_vec();
        let (weights, used_ridge) = fit_ar(&history, config.order)?;
        Ok(Self { config, weights, history, counter: 0, used_ridge })
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Whether the last fit needed the ridge fallback.
    pub fn used_ridge(&self) -> bool {
        self.used_ridge
    }

    /// `v − wᵀx` with `x` the previous `order` samples.
    pub fn step(&mut self, v: f64) -> Result<f64> {
        let p = self.config.order;
        let past = &self.history[self.history.len() - p..];
        let predicted: f64 = past.iter().zip(self.weights.iter()).map(|(x, w)| x * w).sum();
        let residual = v - predicted;
        self.history.push(v);
        self.counter += 1;
        if self.counter % self.config.retrain_every == 0 && self.history.len() < self.config.retrain_stop_len {
            let excess = self.history.len().saturating_sub(self.config.t_max);
            self.history.drain(..excess);
            (self.weights, self.used_ridge) = fit_ar(&self.history, p)?;
        }
        let keep = self.config.t_max.max(self.config.retrain_stop_len);
        if self.history.len() > keep {
            let excess = self.history.len() - keep;
            self.history.drain(..excess);
        }
        Ok(residual)
    }
}

pub fn ar_train(t_train: &[f64]) -> Result<ArState> {
    ArState::train(t_train, ArConfig::default())
}

pub fn ar_step(state: &mut ArState, v: f64) -> Result<f64> {
    state.step(v)
}

impl StreamingDetector for ArState {
    fn name(&self) -> &'static str {
        "ar"
    }

    fn score_next(&mut self, v: f64) -> Result<f64> {
        Ok(self.step(v)?.abs())
    }
}

/// Detector selector used by the benchmark harness and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rpe,
    Spe,
    Iid,
    Ar,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Rpe, Method::Spe, Method::Iid, Method::Ar];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Rpe => "rpe",
            Method::Spe => "spe",
            Method::Iid => "iid",
            Method::Ar => "ar",
        }
    }

    /// Train this method on `t_train`. RPE and SPE use `config`; AR reuses its
    /// retraining schedule.
    pub fn train(&self, t_train: &[f64], config: &DetectorConfig) -> Result<Box<dyn StreamingDetector>> {
        Ok(match self {
            Method::Rpe => Box::new(DetectorState::train(
                t_train,
                DetectorConfig { projection: ProjectionMode::Robust, ..config.clone() },
            )?),
            Method::Spe => Box::new(spe_train(t_train, config.clone())?),
            Method::Iid => Box::new(IidState::from_training(t_train)),
            Method::Ar => Box::new(ArState::train(
                t_train,
                ArConfig {
                    retrain_every: config.retrain_every,
                    t_max: config.t_max,
                    retrain_stop_len: config.retrain_stop(),
                    ..Default::default()
                },
            )?),
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rpe" => Ok(Method::Rpe),
            "spe" => Ok(Method::Spe),
            "iid" => Ok(Method::Iid),
            "ar" => Ok(Method::Ar),
            other => Err(Error::InvalidConfig(format!("unknown method {other:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
