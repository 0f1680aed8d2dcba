use rpe::subspace::{left_singular, select_rank};
use rpe::synth::{generate_clean, inject_anomalies, spread, AnomalySpec, SynthSpec};
use rpe::trajectory::trajectory_of;

/// Sort-based type-7 quantile, written independently of the library routine.
fn quantile_by_sort(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

#[test]
fn fixed_periods_give_rank_eight() {
    let spec = SynthSpec {
        length: 300,
        noise_sigma: 0.0,
        periods: Some(vec![60.0, 30.0, 15.0, 4.0]),
        ..Default::default()
    };
    let t = generate_clean(&spec).unwrap();
    let (sv, _) = left_singular(trajectory_of(t.values(), 30).unwrap().data());
    assert_eq!(select_rank(&sv, 0.01, 30).unwrap(), 8);
}

#[test]
fn spread_matches_independent_quantile() {
    for seed in 0..10 {
        let t = generate_clean(&SynthSpec { seed, ..Default::default() }).unwrap();
        let f = quantile_by_sort(t.values(), 0.9) - quantile_by_sort(t.values(), 0.1);
        assert!((spread(t.values()) - f).abs() < 1e-12);
    }
}

#[test]
fn labels_mark_exactly_the_changed_stamps() {
    for seed in 0..20 {
        let t = generate_clean(&SynthSpec { seed, ..Default::default() }).unwrap();
        for run_length in [1, 2, 4] {
            let spec = AnomalySpec { run_length, seed, ..Default::default() };
            let out = inject_anomalies(&t, &spec).unwrap();
            let labels = out.labels().unwrap();
            for (i, (a, b)) in out.values().iter().zip(t.values()).enumerate() {
                assert_eq!(a != b, labels[i]);
            }
            assert_eq!(labels.iter().filter(|l| **l).count(), 12);
            assert!(labels[..100].iter().all(|l| !l));
            // runs are separated by at least one clean stamp
            let starts = (1..300).filter(|&i| labels[i] && !labels[i - 1]).count();
            assert_eq!(starts * run_length, 12);
        }
    }
}

#[test]
fn seeded_end_to_end() {
    let make = || {
        let t = generate_clean(&SynthSpec { seed: 42, ..Default::default() }).unwrap();
        inject_anomalies(&t, &AnomalySpec { seed: 43, run_length: 2, ..Default::default() }).unwrap()
    };
    assert_eq!(make(), make());
}
