//! Synthetic benchmark series: a sum of four cosines with randomized periods
//! and phases plus Gaussian noise, and injection of point or range anomalies
//! whose amplitude is a multiple of the clean series' 10–90% quantile spread.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::quantile;
use crate::trajectory::TimeSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub weights: Vec<f64>,
    /// Open intervals the periods `1/ω_k` are drawn from.
    pub period_ranges: Vec<(f64, f64)>,
    /// Fixed periods; overrides the sampled ones when present.
    pub periods: Option<Vec<f64>>,
    pub noise_sigma: f64,
    pub length: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            weights: vec![2.0, 1.6, 1.2, 0.8],
            period_ranges: vec![(40.0, 70.0), (20.0, 40.0), (10.0, 20.0), (2.0, 6.0)],
            periods: None,
            noise_sigma: 0.1,
            length: 300,
            seed: 0,
        }
    }
}

/// Realized parameters of one generated series.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub periods: Vec<f64>,
    pub phases: Vec<f64>,
}

fn open_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    loop {
        let v = rng.random_range(lo..hi);
        if v > lo {
            return v;
        }
    }
}

/// Generate the clean series and report the periods and phases drawn.
/// Draw order: (period, phase) per component, then the noise samples.
pub fn generate(spec: &SynthSpec) -> Result<(TimeSeries, Components)> {
    if spec.length == 0 {
        return Err(Error::EmptySeries);
    }
    if spec.weights.len() != spec.period_ranges.len() {
        return Err(Error::InvalidConfig("weights and period_ranges differ in length".into()));
    }
    if let Some(p) = &spec.periods {
        if p.len() != spec.weights.len() {
            return Err(Error::InvalidConfig("periods and weights differ in length".into()));
        }
    }
    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| Error::InvalidConfig(format!("noise_sigma: {e}")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut periods = Vec::with_capacity(spec.weights.len());
    let mut phases = Vec::with_capacity(spec.weights.len());
    for (k, &(lo, hi)) in spec.period_ranges.iter().enumerate() {
        let sampled = open_uniform(&mut rng, lo, hi);
        periods.push(spec.periods.as_ref().map_or(sampled, |p| p[k]));
        phases.push(rng.random_range(0.0..std::f64::consts::TAU));
    }

    let values = (0..spec.length)
        .map(|j| {
            let signal: f64 = spec
                .weights
                .iter()
                .zip(periods.iter().zip(&phases))
                .map(|(z, (p, psi))| z * (std::f64::consts::TAU * j as f64 / p + psi).cos())
                .sum();
            signal + noise.sample(&mut rng)
        })
        .collect();
    let series = TimeSeries::with_labels(values, vec![false; spec.length])?;
    Ok((series, Components { periods, phases }))
}

pub fn generate_clean(spec: &SynthSpec) -> Result<TimeSeries> {
    Ok(generate(spec)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Amplitude {
    /// `c · f` with `f = q0.9 − q0.1` of the clean input.
    TimesF(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnomalySpec {
    /// Fraction of all stamps that end up anomalous.
    pub fraction: f64,
    pub amplitude: Amplitude,
    /// Consecutive stamps per anomaly; 1 for point anomalies.
    pub run_length: usize,
    /// Leading stamps kept anomaly-free (the training prefix).
    pub protected_prefix: usize,
    /// Share of runs injected with `statistical_scale · f` instead of the
    /// configured amplitude. Zero by default.
    pub statistical_fraction: f64,
    pub statistical_scale: f64,
    pub seed: u64,
}

impl Default for AnomalySpec {
    fn default() -> Self {
        Self {
            fraction: 0.04,
            amplitude: Amplitude::TimesF(1.0),
            run_length: 1,
            protected_prefix: 100,
            statistical_fraction: 0.0,
            statistical_scale: 3.0,
            seed: 0,
        }
    }
}

/// The 10–90% quantile spread used as the anomaly amplitude unit.
pub fn spread(values: &[f64]) -> f64 {
    quantile(values, 0.9) - quantile(values, 0.1)
}

/// Add `signs[i] · amplitudes[i]` to each stamp of the run starting at
/// `starts[i]` and label those stamps.
pub fn inject_runs(
    t: &TimeSeries,
    starts: &[usize],
    run_length: usize,
    amplitudes: &[f64],
    signs: &[f64],
) -> Result<TimeSeries> {
    let n = t.len();
    let mut values = t.values().to_vec();
    let mut labels = t.labels().map(<[bool]>::to_vec).unwrap_or_else(|| vec![false; n]);
    for ((&start, &amp), &sign) in starts.iter().zip(amplitudes).zip(signs) {
        if start + run_length > n {
            return Err(Error::CannotPlace { runs: starts.len(), run_length, available: n });
        }
        for k in start..start + run_length {
            values[k] += sign * amp;
            labels[k] = true;
        }
    }
    TimeSeries::with_labels(values, labels)
}

/// Number of runs for a spec on a series of length `n`.
pub fn run_count(spec: &AnomalySpec, n: usize) -> usize {
    let stamps = (spec.fraction * n as f64).round() as usize;
    ((stamps as f64 / spec.run_length.max(1) as f64).round() as usize).max(1)
}

pub fn inject_anomalies(t: &TimeSeries, spec: &AnomalySpec) -> Result<TimeSeries> {
    let n = t.len();
    if spec.run_length == 0 {
        return Err(Error::InvalidConfig("run_length must be at least 1".into()));
    }
    if !(spec.fraction * n as f64 >= 1.0) {
        return Err(Error::InvalidConfig(format!("fraction {} gives no anomalies on {n} stamps", spec.fraction)));
    }
    let runs = run_count(spec, n);
    let len = spec.run_length;
    let available = n.saturating_sub(spec.protected_prefix);

    // Uniform placement of `runs` blocks separated by at least one clean stamp:
    // choose sorted slots from a reduced range, then spread them back out.
    let slots = (available + 1).checked_sub(runs * len).filter(|&s| s >= runs);
    let Some(slots) = slots else {
        return Err(Error::CannotPlace { runs, run_length: len, available });
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut picks = sample(&mut rng, slots, runs).into_vec();
    picks.sort_unstable();
    let starts: Vec<usize> = picks.iter().enumerate().map(|(i, p)| spec.protected_prefix + p + i * len).collect();

    let f = spread(t.values());
    let Amplitude::TimesF(c) = spec.amplitude;
    let n_statistical = (spec.statistical_fraction * runs as f64).round() as usize;
    let statistical: Vec<usize> = sample(&mut rng, runs, n_statistical.min(runs)).into_vec();
    let amplitudes: Vec<f64> = (0..runs)
        .map(|i| if statistical.contains(&i) { spec.statistical_scale * f } else { c * f })
        .collect();
    let signs: Vec<f64> = (0..runs).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();

    inject_runs(t, &starts, len, &amplitudes, &signs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, sigma: f64, seed: u64) -> SynthSpec {
        SynthSpec { length: n, noise_sigma: sigma, seed, ..Default::default() }
    }

    #[test]
    fn noiseless_bound() {
        for seed in 0..20 {
            let t = generate_clean(&spec(300, 0.0, seed)).unwrap();
            assert!(t.values().iter().all(|v| v.abs() <= 5.6 + 1e-12));
            assert!(t.labels().unwrap().iter().all(|l| !l));
        }
    }

    #[test]
    fn seeded() {
        assert_eq!(generate_clean(&spec(100, 0.1, 7)).unwrap(), generate_clean(&spec(100, 0.1, 7)).unwrap());
        assert_ne!(generate_clean(&spec(100, 0.1, 7)).unwrap(), generate_clean(&spec(100, 0.1, 8)).unwrap());
    }

    #[test]
    fn periods_in_range() {
        for seed in 0..50 {
            let (_, c) = generate(&spec(10, 0.1, seed)).unwrap();
            let ranges = SynthSpec::default().period_ranges;
            for (p, (lo, hi)) in c.periods.iter().zip(ranges) {
                assert!(*p > lo && *p < hi);
            }
            assert!(c.phases.iter().all(|ph| (0.0..std::f64::consts::TAU).contains(ph)));
        }
    }

    #[test]
    fn single_point_anomaly() {
        let t = generate_clean(&spec(50, 0.1, 1)).unwrap();
        let a = AnomalySpec { fraction: 0.02, protected_prefix: 0, ..Default::default() };
        let out = inject_anomalies(&t, &a).unwrap();
        let labelled: Vec<usize> = out.labels().unwrap().iter().enumerate().filter(|(_, l)| **l).map(|(i, _)| i).collect();
        assert_eq!(labelled.len(), 1);
        for (i, (x, y)) in out.values().iter().zip(t.values()).enumerate() {
            assert_eq!(x != y, labelled.contains(&i));
        }
    }

    #[test]
    fn range_runs_count() {
        let t = generate_clean(&spec(200, 0.1, 2)).unwrap();
        let a = AnomalySpec { run_length: 2, seed: 5, ..Default::default() };
        let out = inject_anomalies(&t, &a).unwrap();
        let labels = out.labels().unwrap();
        assert_eq!(labels.iter().filter(|l| **l).count(), 8);
        let run_starts = (0..200).filter(|&i| labels[i] && (i == 0 || !labels[i - 1])).count();
        assert_eq!(run_starts, 4);
        assert!(labels[..100].iter().all(|l| !l));
    }

    #[test]
    fn amplitude_is_f() {
        let t = generate_clean(&spec(300, 0.1, 3)).unwrap();
        let f = spread(t.values());
        let out = inject_anomalies(&t, &AnomalySpec { seed: 9, ..Default::default() }).unwrap();
        for ((x, y), l) in out.values().iter().zip(t.values()).zip(out.labels().unwrap()) {
            if *l {
                assert!(((x - y).abs() - f).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cannot_place() {
        let t = generate_clean(&spec(110, 0.1, 3)).unwrap();
        let a = AnomalySpec { fraction: 0.2, run_length: 4, ..Default::default() };
        assert!(matches!(inject_anomalies(&t, &a), Err(Error::CannotPlace { .. })));
    }

    #[test]
    fn no_anomalies_requested() {
        let t = generate_clean(&spec(10, 0.1, 3)).unwrap();
        let a = AnomalySpec { fraction: 0.04, protected_prefix: 0, ..Default::default() };
        assert!(matches!(inject_anomalies(&t, &a), Err(Error::InvalidConfig(_))));
    }
}
