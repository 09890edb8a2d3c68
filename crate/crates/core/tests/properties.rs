//! Cross-module properties checked against independent computations.

use john_extract::cube::{dual_norm, ell_norm, omega, rademacher_average, rademacher_mc};
use john_extract::decomposition::{equal_norm_split, random_tight_frame, split, tighten};
use john_extract::john::{john_decomposition, mvee};
use john_extract::linalg::{
    hs_identity_check, op_norm, orthonormal_basis, psd_sqrt, svd, system_certificate, thin_svd,
};
use john_extract::matrix::{dot, norm2, unit_vector};
use john_extract::rng::{gaussian_vector, substream, unit_sphere};
use john_extract::{DecompositionFile, DenseMatrix, PolytopeSpace, SplitPlan};
use proptest::prelude::*;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = substream(seed, 11);
    DenseMatrix::from_rows(&(0..rows).map(|_| gaussian_vector(&mut rng, cols)).collect::<Vec<_>>()).unwrap()
}

fn rotation(n: usize, seed: u64) -> DenseMatrix {
    let mut rng = substream(seed, 12);
    let raw: Vec<Vec<f64>> = (0..n).map(|_| gaussian_vector(&mut rng, n)).collect();
    DenseMatrix::from_columns(&orthonormal_basis(&raw, 1e-12)).unwrap()
}

#[test]
fn op_norm_dominates_random_directions() {
    for seed in 0..5 {
        let a = random_matrix(6, 9, seed);
        let s = op_norm(&a);
        let mut rng = substream(seed, 13);
        let mut best: f64 = 0.0;
        for _ in 0..1000 {
            let x = unit_sphere(&mut rng, 9);
            let r = norm2(&a.matvec(&x).unwrap());
            assert!(r <= s * (1.0 + 1e-12));
            best = best.max(r);
        }
        // random directions get within a modest factor of the top singular value
        assert!(best >= 0.5 * s);
        // and the top right singular vector attains it exactly
        let top = svd(&a).singular_values[0];
        assert!((top - s).abs() < 1e-12 * s);
    }
}

#[test]
fn certificate_is_rotation_invariant() {
    for seed in 0..10 {
        let n = 5;
        let mut rng = substream(seed, 14);
        let vs: Vec<Vec<f64>> = (0..4).map(|_| gaussian_vector(&mut rng, n)).collect();
        let q = rotation(n, seed);
        let rotated: Vec<Vec<f64>> = vs.iter().map(|v| q.matvec(v).unwrap()).collect();
        let a = system_certificate(&vs).unwrap();
        let b = system_certificate(&rotated).unwrap();
        assert!((a.hilbertian_k - b.hilbertian_k).abs() < 1e-10 * a.hilbertian_k);
        assert!((a.besselian_k - b.besselian_k).abs() < 1e-8 * a.besselian_k);
        assert!((a.equivalence_k - b.equivalence_k).abs() < 1e-8 * a.equivalence_k);
        assert!(a.equivalence_k >= 1.0 - 1e-12);
    }
}

#[test]
fn orthonormal_systems_are_one_equivalent() {
    let q = rotation(7, 3);
    let c = system_certificate(&q.columns()[..4]).unwrap();
    assert!((c.equivalence_k - 1.0).abs() < 1e-12);
    assert!((c.hilbertian_k - 1.0).abs() < 1e-12 && (c.besselian_k - 1.0).abs() < 1e-12);
}

#[test]
fn hs_identity_on_tight_frames() {
    for seed in 0..20 {
        let d = random_tight_frame(6, 13, seed).unwrap();
        let t = random_matrix(4, 6, seed + 100);
        let (lhs, rhs) = hs_identity_check(&d, &t).unwrap();
        assert!((lhs - rhs).abs() <= 1e-9 * lhs.max(1.0));
        // direct: Σ‖T x_j‖² summed by hand
        let direct: f64 = d.vectors().iter().map(|x| norm2(&t.matvec(x).unwrap()).powi(2)).sum();
        assert!((direct - t.frobenius_norm().powi(2)).abs() < 1e-9 * direct);
    }
}

#[test]
fn splitting_then_tightening_round_trip() {
    let d = random_tight_frame(4, 9, 7).unwrap();
    let s = split(
        &d,
        &SplitPlan {
            counts: vec![1, 2, 3, 1, 1, 4, 1, 2, 1],
        },
    )
    .unwrap();
    assert_eq!(s.len(), 16);
    assert!(s.residual() < 1e-12);
    for (c, v) in s.vectors().iter().enumerate() {
        let parent = &d.vectors()[s.parent_of(c)];
        // a child is a positive multiple of its parent
        let cos = dot(v, parent) / (norm2(v) * norm2(parent));
        assert!((cos - 1.0).abs() < 1e-12);
    }
    let e = equal_norm_split(&d, 27).unwrap();
    let norms: Vec<f64> = e.vectors().iter().map(|v| dot(v, v)).collect();
    let mean = 4.0 / e.len() as f64;
    assert!(norms
        .iter()
        .all(|w| (0.81 * mean * (1.0 - 1e-12)..=1.21 * mean * (1.0 + 1e-12)).contains(w)));

    let t = tighten(&random_matrix(10, 4, 5).to_rows()).unwrap();
    assert!(t.residual() < 1e-10);
}

#[test]
fn decomposition_file_round_trip() {
    let d = random_tight_frame(3, 7, 2).unwrap();
    let text = serde_json::to_string(&DecompositionFile::from(&d)).unwrap();
    let back: DecompositionFile = serde_json::from_str(&text).unwrap();
    let d2 = back.into_decomposition(1e-8).unwrap();
    assert_eq!(d.vectors(), d2.vectors());

    let mut bad: DecompositionFile = serde_json::from_str(&text).unwrap();
    bad.vectors[0][0] += 0.1;
    assert!(bad.into_decomposition(1e-8).is_err());
}

#[test]
fn john_residual_and_contact_norms() {
    for seed in 0..10 {
        let n = 3 + (seed as usize % 3);
        let mut rng = substream(seed, 15);
        let pts: Vec<Vec<f64>> = (0..3 * n).map(|_| gaussian_vector(&mut rng, n)).collect();
        let john = john_decomposition(&pts, 1e-7).unwrap();
        assert!(john.residual <= 1e-6);
        for u in john.space.directions() {
            assert!((norm2(u) - 1.0).abs() < 1e-10);
            assert!((john.space.norm(u).unwrap() - 1.0).abs() < 1e-6);
        }
        // every transformed input point sits inside the unit ball of the space's dual
        // picture: ‖M^{1/2} p‖₂ ≤ 1
        for p in &pts {
            assert!(norm2(&john.transform.matvec(p).unwrap()) <= 1.0 + 1e-6);
        }
    }
}

#[test]
fn mvee_of_a_rotated_cross_is_the_ball() {
    let q = rotation(4, 8);
    let pts = q.columns();
    let r = mvee(&pts, 1e-9, 100_000).unwrap();
    assert!(r.ellipsoid.shape.sub(&DenseMatrix::identity(4)).unwrap().max_abs() < 1e-6);
}

#[test]
fn psd_sqrt_squares_back() {
    let a = random_matrix(5, 5, 4);
    let s = a.transpose().matmul(&a).unwrap();
    let r = psd_sqrt(&s).unwrap();
    assert!(r.matmul(&r).unwrap().sub(&s).unwrap().max_abs() < 1e-9 * s.max_abs());
}

#[test]
fn rademacher_mc_tracks_enumeration() {
    let sp = PolytopeSpace::from_unnormalized(&random_matrix(9, 4, 6).to_rows()).unwrap();
    for seed in 0..5 {
        let mut rng = substream(seed, 16);
        let vs: Vec<Vec<f64>> = (0..10).map(|_| gaussian_vector(&mut rng, 4)).collect();
        let exact = rademacher_average(&vs, &sp, 100, seed).unwrap();
        let mc = rademacher_mc(&vs, &sp, 3000, seed).unwrap();
        assert!((exact.mean - mc.mean).abs() <= 4.0 * mc.stderr);
        // M ≤ ω by the triangle inequality
        assert!(exact.mean <= omega(&vs, &sp).unwrap() + 1e-12);
    }
}

#[test]
fn ell_norm_ideal_property() {
    let sp = PolytopeSpace::from_unnormalized(&random_matrix(12, 5, 1).to_rows()).unwrap();
    for seed in 0..10 {
        let a = random_matrix(5, 5, 200 + seed);
        let b = random_matrix(5, 5, 300 + seed);
        let ab = a.matmul(&b).unwrap();
        let la = ell_norm(&a, &sp, 4000, seed).unwrap();
        let lab = ell_norm(&ab, &sp, 4000, seed + 1000).unwrap();
        let nb = op_norm(&b);
        let se = (lab.stderr.powi(2) + (nb * la.stderr).powi(2)).sqrt();
        assert!(lab.mean <= nb * la.mean + 3.0 * se);
    }
}

#[test]
fn ell_of_identity_on_linf_is_gaussian_max() {
    // E max|g_i|² over 2 coordinates: 1 + 2/π exactly
    let e = ell_norm(&DenseMatrix::identity(2), &PolytopeSpace::linf(2), 40_000, 3).unwrap();
    let exact = (1.0 + 2.0 / std::f64::consts::PI).sqrt();
    assert!((e.mean - exact).abs() <= 4.0 * e.stderr);
}

/// Every vertex of `B_X` solves `⟨u_i, x⟩ = ±1` on some `n` directions; the
/// dual norm is the best of them.
fn dual_norm_by_vertices(sp: &PolytopeSpace, w: &[f64]) -> f64 {
    let dirs = sp.directions();
    let n = sp.dim();
    let mut best: f64 = 0.0;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let sub = DenseMatrix::from_rows(&idx.iter().map(|&i| dirs[i].clone()).collect::<Vec<_>>()).unwrap();
        if svd(&sub).rank == n {
            for signs in 0..(1u32 << n) {
                let rhs: Vec<f64> = (0..n).map(|b| if signs >> b & 1 == 1 { 1.0 } else { -1.0 }).collect();
                let x = thin_svd(&sub).solve_min_norm(&rhs, 1e-12);
                if sp.norm(&x).unwrap() <= 1.0 + 1e-9 {
                    best = best.max(dot(w, &x));
                }
            }
        }
        // next n-subset
        let mut i = n;
        while i > 0 && idx[i - 1] == dirs.len() - n + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return best;
        }
        idx[i - 1] += 1;
        for j in i..n {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[test]
fn dual_norm_matches_vertex_enumeration() {
    for seed in 0..12 {
        let n = 2 + (seed as usize % 3);
        let sp = PolytopeSpace::from_unnormalized(&random_matrix(2 * n + 1, n, 40 + seed).to_rows()).unwrap();
        let w = gaussian_vector(&mut substream(seed, 19), n);
        let lp = dual_norm(&sp, &w).unwrap();
        let brute = dual_norm_by_vertices(&sp, &w);
        assert!((lp - brute).abs() <= 1e-8 * brute, "{lp} vs {brute}");
        // ‖w‖_* ≥ ‖w‖₂ since B_X contains the Euclidean ball
        assert!(lp >= norm2(&w) - 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig {
            rng_seed: proptest::test_runner::RngSeed::Fixed(0x6a6f686e),
            failure_persistence: None,
            ..ProptestConfig::with_cases(24)
        })]

    #[test]
    fn omega_bounded_by_euclidean_norms(seed in 0u64..1000, m in 1usize..8) {
        let sp = PolytopeSpace::from_unnormalized(&random_matrix(7, 3, seed).to_rows()).unwrap();
        let mut rng = substream(seed, 17);
        let vs: Vec<Vec<f64>> = (0..m).map(|_| gaussian_vector(&mut rng, 3)).collect();
        let bound = m as f64 * vs.iter().map(|v| norm2(v)).fold(0.0, f64::max);
        prop_assert!(omega(&vs, &sp).unwrap() <= bound + 1e-12);
    }

    #[test]
    fn polytope_norm_is_below_euclidean(seed in 0u64..1000) {
        let sp = PolytopeSpace::from_unnormalized(&random_matrix(6, 4, seed).to_rows()).unwrap();
        let x = gaussian_vector(&mut substream(seed, 18), 4);
        prop_assert!(sp.norm(&x).unwrap() <= norm2(&x) + 1e-12);
        let e = unit_vector(4, (seed % 4) as usize);
        prop_assert!(sp.norm(&e).unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn random_tight_frames_are_tight(n in 1usize..7, extra in 0usize..8, seed in 0u64..500) {
        let d = random_tight_frame(n, n + extra, seed).unwrap();
        prop_assert!(d.residual() < 1e-9);
        prop_assert!((d.squared_norm_sum() - n as f64).abs() < 1e-9);
    }
}
