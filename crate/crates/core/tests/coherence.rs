mod common;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rpe::coherence::{coherence_report, gamma_estimate, kappa_estimate, mu_squared, DEFAULT_STARTS};

use common::{dct_basis, random_orthonormal};

/// min ‖Uh‖₁ over a 0.5° latitude/longitude grid of the 2-sphere.
fn grid_min_l1(u: &DMatrix<f64>) -> f64 {
    let step = 0.5f64.to_radians();
    let mut best = f64::INFINITY;
    let n_theta = (std::f64::consts::PI / step).round() as usize;
    let n_phi = (std::f64::consts::TAU / step).round() as usize;
    for i in 0..=n_theta {
        let theta = i as f64 * step;
        for j in 0..n_phi {
            let phi = j as f64 * step;
            let h = DVector::from_vec(vec![theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]);
            best = best.min((u * h).lp_norm(1));
        }
    }
    best
}

#[test]
fn dct_gamma_matches_grid_oracle() {
    let u = dct_basis(30, &[0, 1, 2]);
    let oracle = 1.0 / grid_min_l1(&u);
    let est = gamma_estimate(&u, DEFAULT_STARTS, 0).unwrap();
    assert!((est - oracle).abs() / oracle < 0.02, "estimate {est} oracle {oracle}");
    let kappa = kappa_estimate(&u, DEFAULT_STARTS, 0).unwrap();
    assert!((kappa - mu_squared(&u).unwrap().sqrt() * est).abs() < 1e-12);
}

#[test]
fn dct_other_columns_match_grid() {
    for cols in [[1usize, 5, 9], [3, 4, 17]] {
        let u = dct_basis(30, &cols);
        let oracle = 1.0 / grid_min_l1(&u);
        let est = gamma_estimate(&u, DEFAULT_STARTS, 1).unwrap();
        assert!((est - oracle).abs() / oracle < 0.02, "{cols:?}: {est} vs {oracle}");
    }
}

#[test]
fn rotation_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let u = random_orthonormal(25, 3, &mut rng);
        let q = random_orthonormal(3, 3, &mut rng);
        let uq = &u * &q;
        assert!((mu_squared(&u).unwrap() - mu_squared(&uq).unwrap()).abs() < 1e-10);
        let g1 = gamma_estimate(&u, DEFAULT_STARTS, 5).unwrap();
        let g2 = gamma_estimate(&uq, DEFAULT_STARTS, 9).unwrap();
        assert!((g1 - g2).abs() / g1 < 0.02, "{g1} vs {g2}");
    }
}

#[test]
fn appending_basis_column_to_incoherent_u() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let u = random_orthonormal(30, 3, &mut rng);
        // Gram-Schmidt e_k against U, then append
        let k = 7;
        let mut e = DVector::zeros(30);
        e[k] = 1.0;
        let v = &e - &u * u.tr_mul(&e);
        let v = &v / v.norm();
        let mut wider = u.clone().insert_column(3, 0.0);
        wider.set_column(3, &v);
        assert!(mu_squared(&wider).unwrap() >= mu_squared(&u).unwrap());
    }
}

#[test]
fn appending_basis_column_can_lower_coherent_mu() {
    // U = e1 has μ² = 1; [e1 e2] has μ² = 1/2
    let u = DMatrix::identity(4, 1);
    let wider = DMatrix::identity(4, 2);
    assert!(mu_squared(&wider).unwrap() < mu_squared(&u).unwrap());
}

#[test]
fn random_subspaces_are_incoherent() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let u = random_orthonormal(200, 5, &mut rng);
        assert!(mu_squared(&u).unwrap() < 0.15);
    }
}

#[test]
fn report_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for r in 1..5 {
        let u = random_orthonormal(12, r, &mut rng);
        let rep = coherence_report(&u, DEFAULT_STARTS, 0).unwrap();
        assert!(rep.mu_squared >= 1.0 / 12.0 - 1e-12 && rep.mu_squared <= 1.0 + 1e-12);
        assert!((rep.kappa_estimate - rep.mu_squared.sqrt() * rep.gamma_estimate).abs() < 1e-12);
        assert_eq!(rep.gamma_is_exact, r == 1);
        assert_eq!(rep, coherence_report(&u, DEFAULT_STARTS, 0).unwrap());
    }
}
