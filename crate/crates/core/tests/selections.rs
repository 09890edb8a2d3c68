//! End-to-end selections on seeded random instances.

use john_extract::cube::{complementation_check, gt_embedding, talagrand_select};
use john_extract::decomposition::random_tight_frame;
use john_extract::dvoretzky_rogers::{contact_select, dr_classical, dr_select, duality_checks, selfadjoint_variant};
use john_extract::extraction::{
    extract_count, extract_main, extract_trace, greedy_oracle, near_orthogonal_select, normalize_operator,
    restricted_invertibility, tau_filter, OracleMode,
};
use john_extract::john::john_decomposition;
use john_extract::linalg::{orthonormal_basis, projector_onto, system_certificate};
use john_extract::matrix::norm2;
use john_extract::rng::{gaussian_vector, substream};
use john_extract::{Decomposition, DenseMatrix, ExtractionParams, GtParams, JohnResult, TalagrandParams};

fn contraction(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = substream(seed, 21);
    let raw = DenseMatrix::from_rows(&(0..rows).map(|_| gaussian_vector(&mut rng, cols)).collect::<Vec<_>>()).unwrap();
    normalize_operator(&raw).unwrap().0
}

fn random_john(n: usize, points: usize, seed: u64) -> JohnResult {
    let mut rng = substream(seed, 22);
    let pts: Vec<Vec<f64>> = (0..points).map(|_| gaussian_vector(&mut rng, n)).collect();
    john_decomposition(&pts, 1e-7).unwrap()
}

fn random_projection(n: usize, k: usize, seed: u64) -> (DenseMatrix, Vec<Vec<f64>>) {
    let mut rng = substream(seed, 23);
    let raw: Vec<Vec<f64>> = (0..k).map(|_| gaussian_vector(&mut rng, n)).collect();
    let basis = orthonormal_basis(&raw, 1e-10);
    (projector_onto(&basis, n), basis)
}

fn check_selection(d: &Decomposition, t: &DenseMatrix, cert: &john_extract::SelectionCertificate) {
    let n = d.dim() as f64;
    let h = t.frobenius_norm().powi(2);
    let tau = tau_filter(d, t, cert.delta).unwrap();
    for &j in &cert.sigma {
        assert!(tau.mask[j], "selected index outside the filter");
        let x = &d.vectors()[j];
        let tx = t.matvec(x).unwrap();
        assert!(norm2(&tx) >= 0.9 * cert.delta.sqrt() * (h / n).sqrt() * norm2(x) * (1.0 - 1e-12));
    }
    let mut sorted = cert.sigma.clone();
    sorted.dedup();
    assert_eq!(sorted.len(), cert.sigma.len());
    // the stored constant matches an independent recomputation
    let ys: Vec<Vec<f64>> = cert.sigma.iter().map(|&j| t.matvec(&d.vectors()[j]).unwrap()).collect();
    if !ys.is_empty() {
        let k = system_certificate(&ys).unwrap().equivalence_k;
        assert!((k - cert.achieved_equivalence_k).abs() <= 1e-8 * k);
    }
}

#[test]
fn extract_main_on_rectangular_contractions() {
    for seed in 0..6 {
        let d = random_tight_frame(7, 15, seed).unwrap();
        let t = contraction(5, 7, seed);
        let params = ExtractionParams::new(0.5, seed);
        let cert = extract_main(&d, &t, &params).unwrap();
        assert!(cert.sigma.len() >= cert.target_size);
        assert!(cert.filter_holds);
        assert!(cert.achieved_equivalence_k <= cert.loop_equivalence_k + 1e-9);
        check_selection(&d, &t, &cert);
    }
}

#[test]
fn size_grows_as_epsilon_shrinks() {
    let d = random_tight_frame(8, 20, 3).unwrap();
    let t = DenseMatrix::identity(8);
    let sizes: Vec<usize> = [0.8, 0.5, 0.2]
        .iter()
        .map(|&e| extract_main(&d, &t, &ExtractionParams::new(e, 0)).unwrap().sigma.len())
        .collect();
    assert!(sizes.windows(2).all(|w| w[0] <= w[1]), "{sizes:?}");
    assert!(sizes[2] >= 7);
}

#[test]
fn extract_count_hits_kappa() {
    for seed in 0..5 {
        let d = random_tight_frame(6, 14, seed).unwrap();
        let t = contraction(6, 6, seed + 10);
        let h = t.frobenius_norm().powi(2);
        let kappa = (h.ceil() as usize).saturating_sub(1).max(1);
        let cert = extract_count(&d, &t, kappa, &ExtractionParams::new(0.5, seed)).unwrap();
        assert_eq!(cert.sigma.len(), kappa);
        assert!(cert.fitted_c.unwrap() > 0.0);
        check_selection(&d, &t, &cert);
    }
}

#[test]
fn trace_filter_holds() {
    for seed in 0..5 {
        let d = random_tight_frame(6, 12, seed).unwrap();
        let mut t = contraction(6, 6, seed + 20);
        // symmetrize so the trace carries information
        t = t.add(&t.transpose()).unwrap().scaled(0.5);
        let cert = extract_trace(&d, &t, &ExtractionParams::new(0.5, seed)).unwrap();
        let report = cert.trace.unwrap();
        assert!(report.holds);
        for &j in &cert.sigma {
            let x = &d.vectors()[j];
            let r = john_extract::matrix::dot(x, &t.matvec(x).unwrap()).abs() / john_extract::matrix::dot(x, x);
            assert!(r >= report.floor * (1.0 - 1e-12));
        }
    }
}

#[test]
fn restricted_invertibility_on_columns() {
    let t = contraction(6, 10, 4);
    let cert = restricted_invertibility(&t, 0.5, &ExtractionParams::new(0.5, 4)).unwrap();
    let cols = t.select_columns(&cert.sigma).columns();
    let c = system_certificate(&cols).unwrap();
    assert!(c.is_independent());
    assert!(cert.sigma.len() >= cert.target_size);
}

#[test]
fn extraction_close_to_oracle() {
    for seed in 0..6 {
        let d = random_tight_frame(5, 10, seed).unwrap();
        let t = DenseMatrix::identity(5);
        let cert = extract_main(&d, &t, &ExtractionParams::new(0.5, seed)).unwrap();
        let best = greedy_oracle(d.vectors(), cert.sigma.len(), OracleMode::MinimizeCond, 1_000_000).unwrap();
        assert!(best.exhaustive);
        assert!(cert.achieved_equivalence_k <= 2.0 * best.certificate.equivalence_k);
    }
}

#[test]
fn near_orthogonal_defect_below_epsilon() {
    for seed in 0..10 {
        let d = random_tight_frame(6, 12, seed).unwrap();
        let units: Vec<Vec<f64>> = d
            .vectors()
            .iter()
            .map(|v| john_extract::matrix::scale(v, 1.0 / norm2(v)))
            .collect();
        let r = near_orthogonal_select(&units, 0.3, 4, seed).unwrap();
        assert!(r.gram_defect < 0.3);
        assert!(!r.sigma.is_empty());
    }
}

#[test]
fn dr_pipeline_on_random_pairs() {
    for seed in 0..6 {
        let john = random_john(6, 18, seed);
        let (p, basis) = random_projection(6, 4, seed);
        for d in duality_checks(&john, &p).unwrap() {
            assert!(d.x_norm >= d.euclidean_sq - 1e-10);
        }
        let r = dr_select(&john, &p, 2, &ExtractionParams::new(0.5, seed)).unwrap();
        assert_eq!(r.z_vectors.len(), 2);
        assert!(r.checks_hold);
        let c = dr_classical(&john, &basis, 4).unwrap();
        assert!(c.floors_hold && c.gram_defect < 1e-10);
    }
}

#[test]
fn contact_and_selfadjoint_selections() {
    let john = random_john(7, 21, 5);
    let c = contact_select(&john, 0.3, &ExtractionParams::new(0.3, 5)).unwrap();
    assert!(c.norms_agree);
    assert!(c.contact_indices.len() as f64 > 0.7 * 7.0);

    let t = contraction(7, 7, 6);
    let r = selfadjoint_variant(&john, &t, 2, &ExtractionParams::new(0.5, 6)).unwrap();
    assert!(r.chain.as_ref().unwrap().iter().all(|c| c.holds));
}

#[test]
fn talagrand_on_normalized_contacts() {
    let john = random_john(8, 24, 7);
    let sp = &john.space;
    let vs: Vec<Vec<f64>> = sp.directions().to_vec();
    let r = talagrand_select(&vs, sp, &TalagrandParams::new(7)).unwrap();
    assert!(r.domination_margin <= 0.5);
    assert_eq!(r.lower_violations, 0);
    assert!(r.lower_ratio >= 0.5 - 1e-9);
}

#[test]
fn gt_embedding_with_projection() {
    let john = random_john(10, 40, 8);
    let (p, _) = random_projection(10, 6, 8);
    let r = gt_embedding(&john, &p, &GtParams::new(8)).unwrap();
    assert!(r.m_dim >= 1 && r.m_dim <= 3);
    assert!(r.domination_margin <= 0.5 + 1e-9);
    assert!(r.iso_constant >= 1.0 && r.iso_constant <= r.iso_upper * (1.0 + 1e-9));
    assert_eq!(r.first_violations + r.second_violations, 0);
    let c = complementation_check(&r, &john.space, 100, 8).unwrap();
    assert!(c.norm >= 1.0 - 1e-9 && c.sampled <= c.norm + 1e-9);
    assert!(c.ratio_to_benchmark.is_finite());
}
