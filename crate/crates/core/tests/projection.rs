mod common;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpe::coherence::mu_squared;
use rpe::projection::{l1_projection_oracle, residual_of_last, robust_projection, simple_projection};
use rpe::trajectory::Window;

use common::{dct_basis, random_vector};

struct Trial {
    u: DMatrix<f64>,
    a: DVector<f64>,
    x: DVector<f64>,
    corrupted: Vec<usize>,
    m: usize,
}

fn trial(rng: &mut ChaCha8Rng, magnitude: f64) -> Trial {
    let m1 = 30;
    let r = [2usize, 3, 5][rng.random_range(0..3)];
    let mut cols = sample(rng, m1, r).into_vec();
    cols.sort_unstable();
    let u = dct_basis(m1, &cols);
    let a = random_vector(r, rng);
    let clean = &u * &a;
    let m = rng.random_range(1..=2);
    let corrupted = sample(rng, m1, m).into_vec();
    let mut x = clean.clone();
    let scale = clean.amax();
    for &i in &corrupted {
        x[i] += if rng.random_bool(0.5) { 1.0 } else { -1.0 } * magnitude * scale;
    }
    Trial { u, a, x, corrupted, m }
}

#[test]
fn exact_recovery_small_run() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut gated = 0;
    for k in 0..200 {
        let t = trial(&mut rng, [10.0, 100.0, 1000.0][k % 3]);
        let r = t.u.ncols();
        if mu_squared(&t.u).unwrap() > 1.0 / (2.0 * r as f64 * t.m as f64) {
            continue;
        }
        gated += 1;
        let res = robust_projection(&t.u, &Window::new(t.x.as_slice()), 2).unwrap();
        assert!((&res.a_hat - &t.a).amax() < 1e-6);
        for i in &t.corrupted {
            assert!(!res.kept_rows.contains(i));
        }
    }
    assert!(gated > 50);
}

#[test]
fn magnitude_independence() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let t = trial(&mut rng, 10.0);
        let base = robust_projection(&t.u, &Window::new(t.x.as_slice()), 2).unwrap();
        if (&base.a_hat - &t.a).amax() > 1e-6 {
            continue;
        }
        let clean = &t.u * &t.a;
        let scaled = &clean + (&t.x - &clean) * 10.0;
        let big = robust_projection(&t.u, &Window::new(scaled.as_slice()), 2).unwrap();
        assert!((&big.a_hat - &base.a_hat).amax() < 1e-8);
    }
}

#[test]
fn spike_on_last_element() {
    let u = dct_basis(30, &[1, 3, 8]);
    let a = DVector::from_vec(vec![0.3, -1.2, 0.8]);
    let clean = &u * &a;
    let tau = 37.5;
    let mut x = clean.clone();
    x[29] += tau;
    let res = robust_projection(&u, &Window::new(x.as_slice()), 2).unwrap();
    assert!((residual_of_last(&u, &res.a_hat, x[29]) - tau).abs() < 1e-8);
    let zero = robust_projection(&u, &Window::new(clean.as_slice()), 0).unwrap();
    assert!(residual_of_last(&u, &zero.a_hat, clean[29]).abs() < 1e-10);
}

#[test]
fn simple_projection_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let u = common::random_orthonormal(20, 4, &mut rng);
        let x = random_vector(20, &mut rng);
        let (a, _) = simple_projection(&u, &Window::new(x.as_slice())).unwrap();
        let y = &u * &a;
        let (b, res) = simple_projection(&u, &Window::new(y.as_slice())).unwrap();
        assert!((&a - &b).amax() < 1e-12);
        assert!(res.amax() < 1e-12);
    }
}

#[test]
fn oracle_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut agree = 0;
    let mut total = 0;
    for k in 0..100 {
        let t = trial(&mut rng, [10.0, 100.0, 1000.0][k % 3]);
        if mu_squared(&t.u).unwrap() > 1.0 / (2.0 * t.u.ncols() as f64 * t.m as f64) {
            continue;
        }
        total += 1;
        let w = Window::new(t.x.as_slice());
        let closed = robust_projection(&t.u, &w, 2).unwrap().a_hat;
        if let Ok(l1) = l1_projection_oracle(&t.u, &w, 500, 1e-12) {
            if (&l1 - &closed).amax() < 1e-5 {
                agree += 1;
            }
        }
    }
    assert!(agree as f64 >= 0.99 * total as f64, "{agree}/{total}");
}
