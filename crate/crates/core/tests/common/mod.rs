#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rpe::synth::{generate_clean, inject_runs, spread, SynthSpec};
use rpe::trajectory::TimeSeries;

/// Orthonormal DCT-II basis vectors `cols` of length `m1`.
pub fn dct_basis(m1: usize, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m1, cols.len(), |i, j| {
        let k = cols[j];
        let scale = if k == 0 { (1.0 / m1 as f64).sqrt() } else { (2.0 / m1 as f64).sqrt() };
        scale * (std::f64::consts::PI * (i as f64 + 0.5) * k as f64 / m1 as f64).cos()
    })
}

/// Haar-distributed orthonormal `m1 × r` via QR of a Gaussian matrix.
pub fn random_orthonormal<R: Rng>(m1: usize, r: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(m1, r, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let rm = qr.r();
    for j in 0..r {
        if rm[(j, j)] < 0.0 {
            let mut c = q.column_mut(j);
            c *= -1.0;
        }
    }
    q
}

pub fn random_vector<R: Rng>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Synthetic series with two point anomalies of amplitude `f` at stamps 151 and 156.
pub fn two_anomaly_series(seed: u64) -> (TimeSeries, TimeSeries) {
    let clean = generate_clean(&SynthSpec { length: 300, seed, ..Default::default() }).unwrap();
    let f = spread(clean.values());
    let dirty = inject_runs(&clean, &[151, 156], 1, &[f, f], &[1.0, -1.0]).unwrap();
    (clean, dirty)
}

/// Every index of `labels` that is true.
pub fn positives(labels: &[bool]) -> Vec<usize> {
    labels.iter().enumerate().filter(|(_, l)| **l).map(|(i, _)| i).collect()
}

/// Exact γ for small r: the largest ‖h‖₂ over the vertices of {h : ‖Uh‖₁ ≤ 1}.
/// Each vertex is cut out by r − 1 independent rows with u_iᵀh = 0.
pub fn gamma_by_vertices(u: &DMatrix<f64>) -> f64 {
    let (m, r) = u.shape();
    let mut best = 0.0f64;
    let mut consider = |h: DVector<f64>| {
        let l1 = (u * &h).lp_norm(1);
        if l1 > 1e-12 {
            best = best.max(h.norm() / l1);
        }
    };
    match r {
        1 => consider(DVector::from_element(1, 1.0)),
        2 => {
            for i in 0..m {
                consider(DVector::from_vec(vec![-u[(i, 1)], u[(i, 0)]]));
            }
        }
        3 => {
            for i in 0..m {
                for j in i + 1..m {
                    let a = u.row(i).transpose();
                    let b = u.row(j).transpose();
                    let h = a.cross(&b);
                    if h.norm() > 1e-10 {
                        consider(h);
                    }
                }
            }
        }
        _ => panic!("vertex oracle supports r ≤ 3"),
    }
    best
}
