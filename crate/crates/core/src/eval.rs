//! Max-F1 scoring and the seeded multi-run benchmark harness.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::Method;
use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::synth::{generate_clean, inject_anomalies, Amplitude, AnomalySpec, SynthSpec};
use crate::trajectory::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrCurvePoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Counts at one threshold. F1 is compared exactly as `2tp / (2tp + fp + fn)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Counts {
    tp: u64,
    fp: u64,
    fn_: u64,
}

impl Counts {
    fn f1_parts(&self) -> (u64, u64) {
        (2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    /// `self` beats `other`: higher F1, then higher precision.
    fn beats(&self, other: &Counts) -> bool {
        let (a, b) = self.f1_parts();
        let (c, d) = other.f1_parts();
        let lhs = a as u128 * d.max(1) as u128;
        let rhs = c as u128 * b.max(1) as u128;
        if lhs != rhs {
            return lhs > rhs;
        }
        let p_self = self.tp as u128 * (other.tp + other.fp).max(1) as u128;
        let p_other = other.tp as u128 * (self.tp + self.fp).max(1) as u128;
        p_self > p_other
    }

    fn point(&self, threshold: f64) -> PrCurvePoint {
        let ratio = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let (num, den) = self.f1_parts();
        PrCurvePoint {
            threshold,
            precision: ratio(self.tp, self.tp + self.fp),
            recall: ratio(self.tp, self.tp + self.fn_),
            f1: ratio(num, den),
        }
    }
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<usize> {
    if scores.len() != labels.len() {
        return Err(Error::LabelLength { values: scores.len(), labels: labels.len() });
    }
    if let Some((index, &value)) = scores.iter().enumerate().find(|(_, s)| s.is_nan()) {
        return Err(Error::NonFinite { index, value });
    }
    let positives = labels.iter().filter(|l| **l).count();
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    Ok(positives)
}

/// Counts at every distinct score, highest threshold first.
fn sweep(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, Counts)>> {
    let positives = check_inputs(scores, labels)? as u64;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push((threshold, Counts { tp, fp, fn_: positives - tp }));
    }
    Ok(out)
}

/// Precision/recall/F1 at each distinct score value (predict positive when
/// `score ≥ threshold`), ordered from the highest threshold down.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<PrCurvePoint>> {
    Ok(sweep(scores, labels)?.into_iter().map(|(t, c)| c.point(t)).collect())
}

/// Best point of the sweep; ties go to the higher precision, then the higher threshold.
pub fn max_f1(scores: &[f64], labels: &[bool]) -> Result<PrCurvePoint> {
    let swept = sweep(scores, labels)?;
    let mut best = swept[0];
    for cand in &swept[1..] {
        if cand.1.beats(&best.1) {
            best = *cand;
        }
    }
    Ok(best.1.point(best.0))
}

/// Max-F1 where a prediction is a hit if a labeled stamp lies within `±k`
/// of it, and a labeled stamp is recalled if a prediction lies within `±k`.
/// `k = 0` is [`max_f1`].
pub fn max_f1_with_tolerance(scores: &[f64], labels: &[bool], k: usize) -> Result<PrCurvePoint> {
    if k == 0 {
        return max_f1(scores, labels);
    }
    let positives = check_inputs(scores, labels)?;
    let n = scores.len();
    let near = |flags: &[bool], i: usize| flags[i.saturating_sub(k)..(i + k + 1).min(n)].iter().any(|f| *f);
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    let mut best: Option<PrCurvePoint> = None;
    for &th in &thresholds {
        let predicted: Vec<bool> = scores.iter().map(|s| *s >= th).collect();
        let n_pred = predicted.iter().filter(|p| **p).count();
        let hits = (0..n).filter(|&i| predicted[i] && near(labels, i)).count();
        let recalled = (0..n).filter(|&i| labels[i] && near(&predicted, i)).count();
        let precision = hits as f64 / n_pred as f64;
        let recall = recalled as f64 / positives as f64;
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        let cand = PrCurvePoint { threshold: th, precision, recall, f1 };
        let better = best.is_none_or(|b| f1 > b.f1 || (f1 == b.f1 && precision > b.precision));
        if better {
            best = Some(cand);
        }
    }
    Ok(best.expect("at least one threshold"))
}

/// Train `method` on `values[..train_len]` and score the rest, one stamp at a time.
pub fn score_method(method: Method, values: &[f64], train_len: usize, config: &DetectorConfig) -> Result<Vec<f64>> {
    if train_len >= values.len() {
        return Err(Error::SeriesTooShort { len: values.len(), required: train_len + 1 });
    }
    let mut det = method.train(&values[..train_len], config)?;
    values[train_len..].iter().map(|&v| det.score_next(v)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub name: String,
    pub synth: SynthSpec,
    pub anomaly: AnomalySpec,
    pub methods: Vec<Method>,
    pub n_runs: usize,
    pub train_len: usize,
    pub base_seed: u64,
    pub detector: DetectorConfig,
    /// Stamp tolerance for matching; 0 is exact.
    pub tolerance: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            synth: SynthSpec::default(),
            anomaly: AnomalySpec::default(),
            methods: Method::ALL.to_vec(),
            n_runs: 20,
            train_len: 100,
            base_seed: 0,
            detector: DetectorConfig::default(),
            tolerance: 0,
        }
    }
}

impl Scenario {
    fn preset(name: &str, amplitude: f64, run_length: usize) -> Self {
        Self {
            name: name.into(),
            anomaly: AnomalySpec { amplitude: Amplitude::TimesF(amplitude), run_length, ..Default::default() },
            ..Default::default()
        }
    }

    /// Point anomalies of amplitude `f`.
    pub fn table1() -> Self {
        Self::preset("table1", 1.0, 1)
    }

    /// Point anomalies of amplitude `f/2`.
    pub fn table2() -> Self {
        Self::preset("table2", 0.5, 1)
    }

    /// Runs of 2 stamps, amplitude `f/1.5`.
    pub fn table3() -> Self {
        Self::preset("table3", 1.0 / 1.5, 2)
    }

    /// Runs of 4 stamps, amplitude `f/1.5`.
    pub fn table4() -> Self {
        Self::preset("table4", 1.0 / 1.5, 4)
    }

    /// The run-length-2 scenario with RPE only at window `m1`.
    pub fn window_sweep(m1: usize) -> Self {
        let mut s = Self::table3();
        s.name = format!("window{m1}");
        s.methods = vec![Method::Rpe];
        s.detector.window_size = m1;
        s
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "table1" => Some(Self::table1()),
            "table2" => Some(Self::table2()),
            "table3" => Some(Self::table3()),
            "table4" => Some(Self::table4()),
            _ => None,
        }
    }

    /// (series seed, anomaly seed) for run `i`.
    pub fn run_seeds(&self, i: usize) -> (u64, u64) {
        let mix = |x: u64| {
            // splitmix64 finalizer
            let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^ (z >> 31)
        };
        let base = mix(self.base_seed ^ mix(i as u64));
        (base, mix(base))
    }

    /// Labeled series for run `i`.
    pub fn series(&self, i: usize) -> Result<TimeSeries> {
        let (s_seed, a_seed) = self.run_seeds(i);
        let clean = generate_clean(&SynthSpec { seed: s_seed, ..self.synth.clone() })?;
        inject_anomalies(&clean, &AnomalySpec { seed: a_seed, ..self.anomaly.clone() })
    }

    fn validate(&self) -> Result<()> {
        if self.n_runs == 0 || self.methods.is_empty() {
            return Err(Error::InvalidConfig("scenario needs at least one run and one method".into()));
        }
        if self.synth.length <= self.train_len + self.detector.window_size {
            return Err(Error::InvalidConfig(format!(
                "length {} must exceed train_len + M1 = {}",
                self.synth.length,
                self.train_len + self.detector.window_size
            )));
        }
        self.detector.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: Method,
    pub best: PrCurvePoint,
    #[serde(skip)]
    pub curve: Vec<PrCurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub series_seed: u64,
    pub anomaly_seed: u64,
    pub methods: Vec<MethodRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_f1: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
}

/// Mean max-F1 and the precision/recall at each run's maximizer. The mean F1
/// is not in general the harmonic mean of the mean precision and recall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub descriptor: String,
    pub scenario: Option<Scenario>,
    pub n_runs: usize,
    pub summary: Vec<MethodSummary>,
    pub runs: Vec<RunResult>,
}

impl BenchmarkReport {
    pub fn summary_for(&self, method: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }

    pub fn mean_f1(&self, method: Method) -> Option<f64> {
        self.summary_for(method).map(|s| s.mean_f1)
    }

    fn from_runs(descriptor: String, scenario: Option<Scenario>, methods: &[Method], runs: Vec<RunResult>) -> Self {
        let n = runs.len() as f64;
        let summary = methods
            .iter()
            .enumerate()
            .map(|(k, &method)| {
                let sum = |f: fn(&PrCurvePoint) -> f64| runs.iter().map(|r| f(&r.methods[k].best)).sum::<f64>() / n;
                MethodSummary {
                    method,
                    mean_f1: sum(|p| p.f1),
                    mean_precision: sum(|p| p.precision),
                    mean_recall: sum(|p| p.recall),
                }
            })
            .collect();
        Self { descriptor, scenario, n_runs: runs.len(), summary, runs }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn evaluate_methods(
    series: &TimeSeries,
    methods: &[Method],
    train_len: usize,
    config: &DetectorConfig,
    tolerance: usize,
    keep_curve: bool,
) -> Result<Vec<MethodRun>> {
    let labels = series.labels().ok_or(Error::NoPositives)?;
    let test_labels = &labels[train_len.min(labels.len())..];
    methods
        .iter()
        .map(|&method| {
            let scores = score_method(method, series.values(), train_len, config)?;
            let best = max_f1_with_tolerance(&scores, test_labels, tolerance)?;
            let curve = if keep_curve { pr_curve(&scores, test_labels)? } else { Vec::new() };
            Ok(MethodRun { method, best, curve })
        })
        .collect()
}

/// Run every seeded repetition of `scenario` in parallel and average.
pub fn run_scenario(scenario: &Scenario) -> Result<BenchmarkReport> {
    run_scenario_inner(scenario, false)
}

/// As [`run_scenario`], also keeping the full PR curve of each run and method.
pub fn run_scenario_with_curves(scenario: &Scenario) -> Result<BenchmarkReport> {
    run_scenario_inner(scenario, true)
}

fn run_scenario_inner(scenario: &Scenario, keep_curves: bool) -> Result<BenchmarkReport> {
    scenario.validate()?;
    let runs: Vec<RunResult> = (0..scenario.n_runs)
        .into_par_iter()
        .map(|i| {
            let series = scenario.series(i)?;
            let (series_seed, anomaly_seed) = scenario.run_seeds(i);
            let methods = evaluate_methods(
                &series,
                &scenario.methods,
                scenario.train_len,
                &scenario.detector,
                scenario.tolerance,
                keep_curves,
            )?;
            Ok(RunResult { run: i, series_seed, anomaly_seed, methods })
        })
        .collect::<Result<_>>()?;
    Ok(BenchmarkReport::from_runs(scenario.name.clone(), Some(scenario.clone()), &scenario.methods, runs))
}

/// Single-run report for a user-supplied labeled series.
pub fn evaluate_series(
    descriptor: &str,
    series: &TimeSeries,
    methods: &[Method],
    train_len: usize,
    config: &DetectorConfig,
    tolerance: usize,
    keep_curves: bool,
) -> Result<BenchmarkReport> {
    config.validate()?;
    if series.labels().is_none() {
        return Err(Error::InvalidConfig("bench input needs a label column".into()));
    }
    let methods_run = evaluate_methods(series, methods, train_len, config, tolerance, keep_curves)?;
    let run = RunResult { run: 0, series_seed: 0, anomaly_seed: 0, methods: methods_run };
    Ok(BenchmarkReport::from_runs(descriptor.to_string(), None, methods, vec![run]))
}

/// Write a PR curve as `threshold,precision,recall,f1` rows.
pub fn write_curve_csv<W: Write>(writer: W, curve: &[PrCurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["threshold", "precision", "recall", "f1"])?;
    for p in curve {
        w.write_record([p.threshold, p.precision, p.recall, p.f1].map(|x| format!("{x:?}")))?;
    }
    w.flush()?;
    Ok(())
}
