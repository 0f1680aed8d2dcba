//! The online robust-projection detector.
//!
//! Training fits a subspace to the (truncated) training series and seeds a
//! memory of absolute residuals by replaying every complete training window.
//! Each new sample is then scored by the residual of the robust projection of
//! its window, converted to an empirical-CDF score against the memory. Samples
//! whose score exceeds the threshold can be replaced in the history by their
//! fitted value so they never reach later windows or retraining. The subspace
//! is refit every `retrain_every` samples until the history is long enough.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::{predicted_last, robust_projection, simple_projection};
use crate::subspace::{estimate_columnwise, estimate_elementwise, estimate_simple, RankRule, SubspaceModel};
use crate::trajectory::{last_window_of, TimeSeries};

/// Subspace estimator used at (re)training time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    Simple { beta_percent: f64 },
    Elementwise { alpha_percent: f64 },
    Columnwise { drop_percent: f64 },
}

impl Default for Estimator {
    fn default() -> Self {
        Estimator::Simple { beta_percent: 1.0 }
    }
}

impl Estimator {
    pub fn fit(&self, t: &[f64], window: usize, rule: RankRule) -> Result<SubspaceModel> {
        match *self {
            Estimator::Simple { beta_percent } => estimate_simple(t, window, beta_percent, rule),
            Estimator::Elementwise { alpha_percent } => estimate_elementwise(t, window, alpha_percent, rule),
            Estimator::Columnwise { drop_percent } => estimate_columnwise(t, window, drop_percent, rule),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    #[default]
    Robust,
    /// Plain orthogonal projection; `n_s` is ignored.
    Simple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    #[serde(rename = "M1", alias = "window_size")]
    pub window_size: usize,
    pub n_s: usize,
    pub cdf_threshold: f64,
    pub retrain_every: usize,
    pub t_max: usize,
    /// Retraining stops once the history reaches this length; `None` means `10·M1`.
    pub retrain_stop_len: Option<usize>,
    pub estimator: Estimator,
    pub replace_anomalous_values: bool,
    /// Bound on the residual memory (oldest evicted first); unbounded when `None`.
    pub memory_cap: Option<usize>,
    pub rank_ratio: f64,
    pub rank_cap: usize,
    pub projection: ProjectionMode,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            window_size: 30,
            n_s: 5,
            cdf_threshold: 0.95,
            retrain_every: 100,
            t_max: 300,
            retrain_stop_len: None,
            estimator: Estimator::default(),
            replace_anomalous_values: true,
            memory_cap: None,
            rank_ratio: 0.01,
            rank_cap: 10,
            projection: ProjectionMode::Robust,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.window_size == 0 {
            return Err(Error::ZeroWindow);
        }
        if self.projection == ProjectionMode::Robust && self.n_s >= self.window_size {
            return bad(format!("n_s = {} leaves no rows in a window of {}", self.n_s, self.window_size));
        }
        if !(self.cdf_threshold > 0.0 && self.cdf_threshold < 1.0) {
            return bad(format!("cdf_threshold {} not in (0, 1)", self.cdf_threshold));
        }
        if self.retrain_every == 0 {
            return bad("retrain_every must be positive".into());
        }
        if self.t_max < 2 * self.window_size {
            return bad(format!("t_max {} is below 2·M1", self.t_max));
        }
        if self.rank_cap == 0 {
            return bad("rank_cap must be positive".into());
        }
        if self.memory_cap == Some(0) {
            return bad("memory_cap must be positive".into());
        }
        Ok(())
    }

    pub fn retrain_stop(&self) -> usize {
        self.retrain_stop_len.unwrap_or(10 * self.window_size)
    }

    /// Rank rule with the cap tightened so that `n_s + r ≤ M1` always holds.
    pub fn rank_rule(&self) -> RankRule {
        let room = match self.projection {
            ProjectionMode::Robust => self.window_size - self.n_s,
            ProjectionMode::Simple => self.window_size,
        };
        RankRule { ratio: self.rank_ratio, cap: self.rank_cap.min(room).max(1) }
    }
}

/// Multiset of past absolute residuals with empirical-CDF lookup.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResidualMemory {
    sorted: Vec<f64>,
    arrival: VecDeque<f64>,
    cap: Option<usize>,
}

impl ResidualMemory {
    pub fn new(cap: Option<usize>) -> Self {
        Self { sorted: Vec::new(), arrival: VecDeque::new(), cap }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of stored values strictly below `value`; 0 when empty.
    pub fn empirical_cdf(&self, value: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&m| m < value) as f64 / self.sorted.len() as f64
    }

    pub fn insert(&mut self, value: f64) {
        let pos = self.sorted.partition_point(|&m| m < value);
        self.sorted.insert(pos, value);
        self.arrival.push_back(value);
        if let Some(cap) = self.cap {
            while self.arrival.len() > cap {
                let old = self.arrival.pop_front().expect("non-empty");
                let at = self.sorted.partition_point(|&m| m < old);
                self.sorted.remove(at);
            }
        }
    }

    /// Values in arrival order.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.arrival.iter().copied()
    }
}

/// Outcome of scoring one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub index: usize,
    pub value: f64,
    pub residual: f64,
    pub abs_residual: f64,
    pub cdf_score: f64,
    pub flagged: bool,
    pub replaced_value: Option<f64>,
}

/// A trained single-stream detector.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorState {
    config: DetectorConfig,
    history: Vec<f64>,
    model: SubspaceModel,
    memory: ResidualMemory,
    counter: usize,
    next_index: usize,
}

/// Fitted value `âᵀu₋₁` of the newest sample in `history`.
fn project_last(config: &DetectorConfig, model: &SubspaceModel, history: &[f64]) -> Result<f64> {
    let window = last_window_of(history, config.window_size)?;
    let u = model.basis();
    let a_hat = match config.projection {
        ProjectionMode::Robust => robust_projection(u, &window, config.n_s)?.a_hat,
        ProjectionMode::Simple => simple_projection(u, &window)?.0,
    };
    Ok(predicted_last(u, &a_hat))
}

pub fn train(t_train: &TimeSeries, config: DetectorConfig) -> Result<DetectorState> {
    DetectorState::train(t_train.values(), config)
}

impl DetectorState {
    pub fn train(t_train: &[f64], config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        let m1 = config.window_size;
        if t_train.len() < 2 * m1 {
            return Err(Error::SeriesTooShort { len: t_train.len(), required: 2 * m1 });
        }
        if let Some((index, &value)) = t_train.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        let start = t_train.len().saturating_sub(config.t_max);
        let history = t_train[start..].to_vec();
        let model = config.estimator.fit(&history, m1, config.rank_rule())?;

        let mut memory = ResidualMemory::new(config.memory_cap);
        for end in m1..=history.len() {
            let predicted = project_last(&config, &model, &history[..end])?;
            memory.insert((history[end - 1] - predicted).abs());
        }

        Ok(Self { config, history, model, memory, counter: 0, next_index: t_train.len() })
    }

    /// Rebuild a state from its parts, e.g. after deserializing a snapshot.
    pub fn from_parts(
        config: DetectorConfig,
        history: Vec<f64>,
        model: SubspaceModel,
        memory: Vec<f64>,
        counter: usize,
        next_index: usize,
    ) -> Result<Self> {
        config.validate()?;
        if model.window_size() != config.window_size {
            return Err(Error::DimensionMismatch { expected: config.window_size, got: model.window_size() });
        }
        if history.len() < config.window_size {
            return Err(Error::NotTrained);
        }
        let mut mem = ResidualMemory::new(config.memory_cap);
        memory.into_iter().for_each(|v| mem.insert(v));
        Ok(Self { config, history, model, memory: mem, counter, next_index })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn model(&self) -> &SubspaceModel {
        &self.model
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn memory(&self) -> &ResidualMemory {
        &self.memory
    }

    pub fn counter(&self) -> usize {
        self.counter
    }

    pub fn next_index(&self) -> usize {
        self.next_index
    }

    fn retrain(&mut self) -> Result<()> {
        let excess = self.history.len().saturating_sub(self.config.t_max);
        self.history.drain(..excess);
        self.model = self.config.estimator.fit(&self.history, self.config.window_size, self.config.rank_rule())?;
        Ok(())
    }

    pub fn step(&mut self, v: f64) -> Result<ScoreRecord> {
        if !v.is_finite() {
            return Err(Error::NonFinite { index: self.next_index, value: v });
        }
        self.history.push(v);
        self.counter += 1;

        let predicted = project_last(&self.config, &self.model, &self.history)?;
        let residual = v - predicted;
        let abs_residual = residual.abs();
        let cdf_score = self.memory.empirical_cdf(abs_residual);
        self.memory.insert(abs_residual);

        let flagged = cdf_score > self.config.cdf_threshold;
        let replaced_value = if flagged && self.config.replace_anomalous_values {
            *self.history.last_mut().expect("just pushed") = predicted;
            Some(predicted)
        } else {
            None
        };

        let stop = self.config.retrain_stop();
        if self.counter % self.config.retrain_every == 0 && self.history.len() < stop {
            self.retrain()?;
        }
        let keep = self.config.t_max.max(stop);
        if self.history.len() > keep {
            let excess = self.history.len() - keep;
            self.history.drain(..excess);
        }

        let record = ScoreRecord {
            index: self.next_index,
            value: v,
            residual,
            abs_residual,
            cdf_score,
            flagged,
            replaced_value,
        };
        self.next_index += 1;
        Ok(record)
    }

    pub fn score_series(&mut self, t: &[f64]) -> Result<Vec<ScoreRecord>> {
        t.iter().map(|&v| self.step(v)).collect()
    }
}

/// Common step-wise interface of every detector, scored on a
/// bigger-is-more-anomalous axis.
pub trait StreamingDetector: Send {
    fn name(&self) -> &'static str;

    fn score_next(&mut self, v: f64) -> Result<f64>;
}

impl StreamingDetector for DetectorState {
    fn name(&self) -> &'static str {
        match self.config.projection {
            ProjectionMode::Robust => "rpe",
            ProjectionMode::Simple => "spe",
        }
    }

    fn score_next(&mut self, v: f64) -> Result<f64> {
        Ok(self.step(v)?.abs_residual)
    }
}

/// Serializable snapshot of a trained detector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorSnapshot {
    pub version: u32,
    pub config: DetectorConfig,
    pub model: SubspaceModel,
    pub history: Vec<f64>,
    pub memory: Vec<f64>,
    pub counter: usize,
    pub next_index: usize,
}

impl From<&DetectorState> for DetectorSnapshot {
    fn from(s: &DetectorState) -> Self {
        Self {
            version: crate::subspace::MODEL_VERSION,
            config: s.config.clone(),
            model: s.model.clone(),
            history: s.history.clone(),
            memory: s.memory.values().collect(),
            counter: s.counter,
            next_index: s.next_index,
        }
    }
}

impl TryFrom<DetectorSnapshot> for DetectorState {
    type Error = Error;

    fn try_from(s: DetectorSnapshot) -> Result<Self> {
        if s.version != crate::subspace::MODEL_VERSION {
            return Err(Error::UnsupportedVersion(s.version));
        }
        DetectorState::from_parts(s.config, s.history, s.model, s.memory, s.counter, s.next_index)
    }
}
