//! Contact-point selections of Dvoretzky–Rogers type, and the two Walsh-matrix
//! examples showing which bounds cannot be improved.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::extraction::{extract_count, extract_with_target, ExtractionParams, SelectionCertificate};
use crate::john::JohnResult;
use crate::linalg::{finite_or_null, op_norm, projection_rank, psd_sqrt, system_certificate};
use crate::matrix::{dot, norm2, norm_inf, scale, DenseMatrix};

/// Per-contact check of `‖P u‖_X ≥ ‖P u‖₂²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityCheck {
    pub x_norm: f64,
    pub euclidean_sq: f64,
    pub holds: bool,
}

/// Per-contact check of `‖|T| u‖_X ≥ ‖|T|^{1/2} u‖₂² ≥ ‖T u‖₂²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainCheck {
    pub x_norm: f64,
    pub root_sq: f64,
    pub image_sq: f64,
    pub holds: bool,
}

/// A Dvoretzky–Rogers selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrResult {
    /// Positions in `john.space.directions()`.
    pub contact_indices: Vec<usize>,
    /// Indices into the John decomposition.
    pub decomposition_indices: Vec<usize>,
    /// `z_j = P u_j / ‖P u_j‖₂` (or `|T| u_j / ‖T u_j‖₂`).
    pub z_vectors: Vec<Vec<f64>>,
    pub z_x_norms: Vec<f64>,
    /// `‖P u_j‖₂` (or `‖T u_j‖₂`).
    pub image_norms: Vec<f64>,
    #[serde(with = "finite_or_null")]
    pub equivalence_k: f64,
    pub x_norm_floor: f64,
    /// `x_norm_floor / √((h - κ)/n)`.
    pub fitted_c: f64,
    pub kappa: usize,
    pub h: f64,
    pub duality: Vec<DualityCheck>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub chain: Option<Vec<ChainCheck>>,
    pub checks_hold: bool,
    pub certificate: SelectionCertificate,
}

/// `‖P u_j‖_X` against `‖P u_j‖₂²` for every contact of `john`.
pub fn duality_checks(john: &JohnResult, p: &DenseMatrix) -> Result<Vec<DualityCheck>> {
    john.space
        .directions()
        .iter()
        .map(|u| {
            let pu = p.matvec(u)?;
            let x_norm = john.space.norm(&pu)?;
            let euclidean_sq = dot(&pu, &pu);
            Ok(DualityCheck {
                x_norm,
                euclidean_sq,
                holds: x_norm >= euclidean_sq - 1e-10,
            })
        })
        .collect()
}

fn assemble(
    john: &JohnResult,
    op: &DenseMatrix,
    cert: SelectionCertificate,
    kappa: usize,
    h: f64,
) -> Result<(DrResult, Vec<Vec<f64>>)> {
    let n = john.dim();
    let decomposition_indices = cert.sigma.clone();
    let contact_indices: Vec<usize> = decomposition_indices.iter().map(|&j| john.support[j]).collect();
    let units: Vec<Vec<f64>> = contact_indices
        .iter()
        .map(|&c| john.space.directions()[c].clone())
        .collect();
    let images = units.iter().map(|u| op.matvec(u)).collect::<Result<Vec<_>>>()?;
    let image_norms: Vec<f64> = images.iter().map(|v| norm2(v)).collect();
    let z_vectors: Vec<Vec<f64>> = images
        .iter()
        .zip(&image_norms)
        .map(|(v, &r)| scale(v, 1.0 / r))
        .collect();
    let z_x_norms = z_vectors
        .iter()
        .map(|z| john.space.norm(z))
        .collect::<Result<Vec<_>>>()?;
    let equivalence_k = if z_vectors.is_empty() {
        1.0
    } else {
        system_certificate(&z_vectors)?.equivalence_k
    };
    let x_norm_floor = z_x_norms.iter().cloned().fold(f64::INFINITY, f64::min);
    let fitted_c = x_norm_floor / ((h - kappa as f64) / n as f64).sqrt();
    Ok((
        DrResult {
            contact_indices,
            decomposition_indices,
            z_vectors,
            z_x_norms,
            image_norms,
            equivalence_k,
            x_norm_floor,
            fitted_c,
            kappa,
            h,
            duality: Vec::new(),
            chain: None,
            checks_hold: true,
            certificate: cert,
        },
        units,
    ))
}

/// `κ < rank P` contacts whose normalized projections `z_j` are well conditioned
/// and satisfy `‖z_j‖_X ≥ ‖P u_j‖₂`.
///
/// This is [`extract_count`] with `T = P` on the John decomposition; the lower
/// bound on `‖z_j‖_X` comes from `‖P u_j‖_X ≥ ⟨P u_j, u_j⟩ = ‖P u_j‖₂²`.
pub fn dr_select(john: &JohnResult, p: &DenseMatrix, kappa: usize, params: &ExtractionParams) -> Result<DrResult> {
    let rank = projection_rank(p, 1e-9)?;
    if kappa == 0 || kappa >= rank {
        return Err(Error::Validation(format!(
            "need 0 < kappa < rank P = {rank}, got {kappa}"
        )));
    }
    let cert = extract_count(john.decomposition(), p, kappa, params)?;
    let (mut r, units) = assemble(john, p, cert, kappa, rank as f64)?;
    r.duality = units
        .iter()
        .zip(&r.image_norms)
        .zip(&r.z_x_norms)
        .map(|((u, &pn), &zx)| {
            let pu = p.matvec(u).expect("square");
            let x_norm = john.space.norm(&pu).expect("dimension");
            DualityCheck {
                x_norm,
                euclidean_sq: pn * pn,
                holds: x_norm >= pn * pn - 1e-10 && zx >= pn - 1e-10,
            }
        })
        .collect();
    r.checks_hold = r.duality.iter().all(|d| d.holds);
    Ok(r)
}

/// Orthonormal `z_1, ..., z_κ` from the inductive argument: in the current
/// subspace `Z` (dimension `d`), `d = Σ c_j ‖P_Z u_j‖²` forces some contact
/// with `‖P_Z u_j‖ ≥ √(d/n)`; take `z = P_Z u_j / ‖P_Z u_j‖`, then shrink `Z` to
/// `Z ⊖ z`.
///
/// The dual John decomposition used here is John's own: for a norm given by
/// contact directions, `B(X*) = conv(±u_j)` and its minimal-volume ellipsoid is
/// the same ball with the same contacts and weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalDr {
    pub z_vectors: Vec<Vec<f64>>,
    /// Positions in `john.space.directions()`.
    pub contact_indices: Vec<usize>,
    pub z_x_norms: Vec<f64>,
    /// `√((k - j + 1)/n)` for step `j = 1, ..., κ`.
    pub floors: Vec<f64>,
    pub floors_hold: bool,
    /// `‖Z_outᵀ Z_out - id‖_max`.
    pub gram_defect: f64,
}

pub fn dr_classical(john: &JohnResult, subspace_basis: &[Vec<f64>], kappa: usize) -> Result<ClassicalDr> {
    let n = john.dim();
    let k = subspace_basis.len();
    for (a, u) in subspace_basis.iter().enumerate() {
        if u.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: u.len(),
            });
        }
        for (b, v) in subspace_basis.iter().enumerate() {
            let target = if a == b { 1.0 } else { 0.0 };
            if (dot(u, v) - target).abs() > 1e-9 {
                return Err(Error::Validation("subspace basis is not orthonormal".into()));
            }
        }
    }
    if kappa > k {
        return Err(invalid(format!("kappa = {kappa} exceeds the subspace dimension {k}")));
    }

    let mut basis: Vec<Vec<f64>> = subspace_basis.to_vec();
    let mut zs: Vec<Vec<f64>> = Vec::new();
    let mut contact_indices = Vec::new();
    let mut z_x_norms = Vec::new();
    let mut floors = Vec::new();
    for step in 0..kappa {
        let project = |u: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; n];
            for b in &basis {
                let c = dot(b, u);
                for (o, bi) in out.iter_mut().zip(b) {
                    *o += c * bi;
                }
            }
            out
        };
        let (pos, pu) = john
            .support
            .iter()
            .map(|&c| (c, project(&john.space.directions()[c])))
            .max_by(|a, b| dot(&a.1, &a.1).total_cmp(&dot(&b.1, &b.1)).then(b.0.cmp(&a.0)))
            .ok_or(Error::Empty("contacts"))?;
        let mut z = scale(&pu, 1.0 / norm2(&pu));
        for prev in &zs {
            let c = dot(&z, prev);
            for (zi, pi) in z.iter_mut().zip(prev) {
                *zi -= c * pi;
            }
        }
        let r = norm2(&z);
        z = scale(&z, 1.0 / r);

        // Z ← Z ⊖ z, keeping an orthonormal basis of dimension one less.
        let coords: Vec<f64> = basis.iter().map(|b| dot(b, &z)).collect();
        let mut next: Vec<Vec<f64>> = Vec::new();
        for (i, b) in basis.iter().enumerate() {
            let mut w = b.clone();
            let c = coords[i];
            for (wi, zi) in w.iter_mut().zip(&z) {
                *wi -= c * zi;
            }
            for q in &next {
                let c = dot(&w, q);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
            let r = norm2(&w);
            if r > 1e-8 && next.len() < basis.len() - 1 {
                next.push(scale(&w, 1.0 / r));
            }
        }
        basis = next;

        z_x_norms.push(john.space.norm(&z)?);
        floors.push(((k - step) as f64 / n as f64).sqrt());
        contact_indices.push(pos);
        zs.push(z);
    }

    let mut gram_defect: f64 = 0.0;
    for (a, u) in zs.iter().enumerate() {
        for (b, v) in zs.iter().enumerate() {
            let target = if a == b { 1.0 } else { 0.0 };
            gram_defect = gram_defect.max((dot(u, v) - target).abs());
        }
    }
    let floors_hold = z_x_norms.iter().zip(&floors).all(|(x, f)| *x >= f - 1e-9);
    Ok(ClassicalDr {
        z_vectors: zs,
        contact_indices,
        z_x_norms,
        floors,
        floors_hold,
        gram_defect,
    })
}

/// Selected contacts for `T = id` with `|σ| > (1 - ε) n`, together with the
/// check that each has `‖u‖₂ = ‖u‖_X = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactSelection {
    /// Positions in `john.space.directions()`.
    pub contact_indices: Vec<usize>,
    pub euclidean_norms: Vec<f64>,
    pub x_norms: Vec<f64>,
    pub norms_agree: bool,
    pub certificate: SelectionCertificate,
}

pub fn contact_select(john: &JohnResult, epsilon: f64, params: &ExtractionParams) -> Result<ContactSelection> {
    let n = john.dim();
    let mut p = params.clone();
    p.epsilon = epsilon;
    let target = (((1.0 - epsilon) * n as f64 + 1e-9).floor() as usize + 1).min(n);
    let cert = extract_with_target(john.decomposition(), &DenseMatrix::identity(n), &p, target)?;
    let contact_indices: Vec<usize> = cert.sigma.iter().map(|&j| john.support[j]).collect();
    let units: Vec<&Vec<f64>> = contact_indices.iter().map(|&c| &john.space.directions()[c]).collect();
    let euclidean_norms: Vec<f64> = units.iter().map(|u| norm2(u)).collect();
    let x_norms = units.iter().map(|u| john.space.norm(u)).collect::<Result<Vec<_>>>()?;
    let norms_agree = euclidean_norms.iter().chain(&x_norms).all(|v| (v - 1.0).abs() <= 1e-9);
    Ok(ContactSelection {
        contact_indices,
        euclidean_norms,
        x_norms,
        norms_agree,
        certificate: cert,
    })
}

/// The polar-decomposition variant: works with `|T| = (TᵀT)^{1/2}` and
/// `z_j = |T| u_j / ‖T u_j‖₂`, checking
/// `‖|T| u_j‖_X ≥ ‖|T|^{1/2} u_j‖₂² ≥ ‖T u_j‖₂²` per selected contact.
pub fn selfadjoint_variant(
    john: &JohnResult,
    t: &DenseMatrix,
    kappa: usize,
    params: &ExtractionParams,
) -> Result<DrResult> {
    let n = john.dim();
    if t.cols() != n || t.rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: t.cols(),
        });
    }
    let norm = op_norm(t);
    if norm > 1.0 + 1e-9 {
        return Err(Error::OperatorNorm { norm });
    }
    let abs_t = psd_sqrt(&t.transpose().matmul(t)?)?;
    let root = psd_sqrt(&abs_t)?;
    let h = t.frobenius_norm().powi(2);
    let cert = extract_count(john.decomposition(), &abs_t, kappa, params)?;
    let (mut r, units) = assemble(john, &abs_t, cert, kappa, h)?;
    let chain: Vec<ChainCheck> = units
        .iter()
        .map(|u| {
            let a = abs_t.matvec(u).expect("square");
            let x_norm = john.space.norm(&a).expect("dimension");
            let ru = root.matvec(u).expect("square");
            let tu = t.matvec(u).expect("square");
            let root_sq = dot(&ru, &ru);
            let image_sq = dot(&tu, &tu);
            ChainCheck {
                x_norm,
                root_sq,
                image_sq,
                holds: x_norm >= root_sq - 1e-10 && root_sq >= image_sq - 1e-10,
            }
        })
        .collect();
    r.checks_hold = chain.iter().all(|c| c.holds);
    r.chain = Some(chain);
    Ok(r)
}

/// Sylvester–Hadamard (Walsh) matrix of order `2^m`.
pub fn walsh(m: u32) -> Result<DenseMatrix> {
    if m > 16 {
        return Err(invalid("Walsh order too large"));
    }
    let n = 1usize << m;
    let mut w = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            w[(i, j)] = if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        }
    }
    Ok(w)
}

/// `T = n^{-1/2} W` on `l_∞^n`: every `‖z_j‖_X` equals `n^{-1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalshReport {
    pub m: u32,
    pub n: usize,
    pub z_x_norms: Vec<f64>,
    pub expected: f64,
    pub max_deviation: f64,
    /// `‖WᵀW - n id‖_max`.
    pub orthogonality_defect: f64,
    /// The DR lower bound `√((h - κ)/n)` at `κ = n/2` that fails here.
    pub dr_bound_half: f64,
}

pub fn walsh_counterexample(m: u32) -> Result<WalshReport> {
    if m > 10 {
        return Err(Error::Validation(format!("Walsh exponent must be at most 10, got {m}")));
    }
    let w = walsh(m)?;
    let n = w.rows();
    let t = w.scaled(1.0 / (n as f64).sqrt());
    // X = l_∞^n: contacts are the coordinate vectors, so z_j = T e_j / ‖T e_j‖₂.
    let z_x_norms: Vec<f64> = (0..n)
        .map(|j| {
            let col = t.column(j);
            norm_inf(&scale(&col, 1.0 / norm2(&col)))
        })
        .collect();
    let expected = 1.0 / (n as f64).sqrt();
    let max_deviation = z_x_norms.iter().map(|v| (v - expected).abs()).fold(0.0, f64::max);
    let orthogonality_defect = w
        .transpose()
        .matmul(&w)?
        .sub(&DenseMatrix::identity(n).scaled(n as f64))?
        .max_abs();
    Ok(WalshReport {
        m,
        n,
        z_x_norms,
        expected,
        max_deviation,
        orthogonality_defect,
        dr_bound_half: ((n - n / 2) as f64 / n as f64).sqrt(),
    })
}

/// `P = n^{-1} Σ_{r<k} w_r w_rᵀ` over the first `k` Walsh rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessReport {
    pub n: usize,
    pub k: usize,
    pub column_norms: Vec<f64>,
    pub expected_norm: f64,
    pub max_inf_norm: f64,
    pub inf_bound: f64,
    /// `max(‖P² - P‖_max, ‖P - Pᵀ‖_max)`.
    pub projector_defect: f64,
    pub projection: DenseMatrix,
}

pub fn sharpness_projection(n: usize, k: usize) -> Result<SharpnessReport> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Validation(format!("n must be a power of two, got {n}")));
    }
    if k == 0 || k > n {
        return Err(Error::Validation(format!("need 1 <= k <= n, got k = {k}")));
    }
    let w = walsh(n.trailing_zeros())?;
    let mut p = DenseMatrix::zeros(n, n);
    for r in 0..k {
        p.add_outer(1.0 / n as f64, w.row(r));
    }
    let cols = p.columns();
    let column_norms: Vec<f64> = cols.iter().map(|c| norm2(c)).collect();
    let max_inf_norm = cols.iter().map(|c| norm_inf(c)).fold(0.0, f64::max);
    let projector_defect = p.matmul(&p)?.sub(&p)?.max_abs().max(p.asymmetry());
    Ok(SharpnessReport {
        n,
        k,
        column_norms,
        expected_norm: (k as f64 / n as f64).sqrt(),
        max_inf_norm,
        inf_bound: k as f64 / n as f64,
        projector_defect,
        projection: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::john::{john_decomposition, john_from_unit_contacts};
    use crate::linalg::orthonormal_basis;
    use crate::matrix::unit_vector;
    use crate::rng::{gaussian_vector, substream};
    use crate::ExtractionParams;

    fn linf_john(n: usize) -> JohnResult {
        john_from_unit_contacts((0..n).map(|i| unit_vector(n, i)).collect(), 1e-10).unwrap()
    }

    fn random_john(n: usize, seed: u64) -> JohnResult {
        let mut rng = substream(seed, 7);
        let pts: Vec<Vec<f64>> = (0..3 * n).map(|_| gaussian_vector(&mut rng, n)).collect();
        john_decomposition(&pts, 1e-7).unwrap()
    }

    fn random_projection(n: usize, k: usize, seed: u64) -> (DenseMatrix, Vec<Vec<f64>>) {
        let mut rng = substream(seed, 8);
        let raw: Vec<Vec<f64>> = (0..k).map(|_| gaussian_vector(&mut rng, n)).collect();
        let basis = orthonormal_basis(&raw, 1e-10);
        (crate::linalg::projector_onto(&basis, n), basis)
    }

    fn coordinate_projection(n: usize, k: usize) -> DenseMatrix {
        DenseMatrix::from_diagonal(&(0..n).map(|i| if i < k { 1.0 } else { 0.0 }).collect::<Vec<_>>())
    }

    #[test]
    fn dr_on_linf_coordinate_projection() {
        let (n, k, kappa) = (8, 4, 2);
        let r = dr_select(
            &linf_john(n),
            &coordinate_projection(n, k),
            kappa,
            &ExtractionParams::new(0.5, 0),
        )
        .unwrap();
        assert_eq!(r.z_vectors.len(), kappa);
        for (z, &c) in r.z_vectors.iter().zip(&r.contact_indices) {
            assert!(c < k);
            assert!(z.iter().zip(unit_vector(n, c)).all(|(a, b)| (a - b).abs() < 1e-12));
        }
        assert!(r.z_x_norms.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(r.x_norm_floor >= ((k - kappa) as f64 / n as f64).sqrt());
        assert!(r.checks_hold);
        assert!(dr_select(
            &linf_john(n),
            &coordinate_projection(n, k),
            k,
            &ExtractionParams::new(0.5, 0)
        )
        .is_err());
    }

    #[test]
    fn dr_on_random_polytope() {
        let john = random_john(6, 3);
        let (p, _) = random_projection(6, 3, 3);
        let r = dr_select(&john, &p, 2, &ExtractionParams::new(0.5, 1)).unwrap();
        assert!(r.fitted_c > 0.0);
        assert!(r.checks_hold);
        for (zx, pn) in r.z_x_norms.iter().zip(&r.image_norms) {
            assert!(zx + 1e-10 >= *pn);
        }
        for d in duality_checks(&john, &p).unwrap() {
            assert!(d.holds);
        }
    }

    #[test]
    fn dr_with_identity_matches_contact_selection() {
        let john = random_john(6, 5);
        let r = dr_select(&john, &DenseMatrix::identity(6), 3, &ExtractionParams::new(0.5, 2)).unwrap();
        // with P = id, z_j = u_j and ‖z_j‖_X = 1
        assert!(r.z_x_norms.iter().all(|&v| (v - 1.0).abs() < 1e-9));
        let c = contact_select(&john, 0.5, &ExtractionParams::new(0.5, 2)).unwrap();
        assert!(c.norms_agree);
        assert!(c.contact_indices.len() >= r.contact_indices.len());
    }

    #[test]
    fn dual_john_decomposition_is_johns_own() {
        let john = random_john(4, 9);
        let again = john_decomposition(john.space.directions(), 1e-7).unwrap();
        assert!(again.ellipsoid.shape.sub(&DenseMatrix::identity(4)).unwrap().max_abs() < 1e-5);
    }

    #[test]
    fn classical_examples() {
        let n = 6;
        let basis: Vec<Vec<f64>> = (0..3).map(|i| unit_vector(n, i)).collect();
        let r = dr_classical(&linf_john(n), &basis, 3).unwrap();
        assert!(r.z_x_norms.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(r.floors_hold && r.gram_defect < 1e-12);

        // contacts = a rotated orthonormal basis, Z = everything
        let rot = orthonormal_basis(
            &(0..n)
                .map(|i| gaussian_vector(&mut substream(i as u64, 1), n))
                .collect::<Vec<_>>(),
            1e-10,
        );
        let john = john_from_unit_contacts(rot, 1e-9).unwrap();
        let full: Vec<Vec<f64>> = (0..n).map(|i| unit_vector(n, i)).collect();
        let r = dr_classical(&john, &full, n).unwrap();
        for (j, (x, f)) in r.z_x_norms.iter().zip(&r.floors).enumerate() {
            assert!((f - ((n - j) as f64 / n as f64).sqrt()).abs() < 1e-15);
            assert!(*x >= f - 1e-9);
        }

        let r = dr_classical(&random_john(5, 1), &random_projection(5, 2, 1).1, 1).unwrap();
        assert!(r.z_x_norms[0] >= (2.0f64 / 5.0).sqrt() - 1e-9);
    }

    #[test]
    fn contact_select_examples() {
        let r = contact_select(&linf_john(5), 0.5, &ExtractionParams::new(0.5, 0)).unwrap();
        assert!(r.contact_indices.len() >= 3);
        assert!((r.certificate.achieved_equivalence_k - 1.0).abs() < 1e-9);

        let square = john_decomposition(&[vec![1.0, 1.0], vec![1.0, -1.0]], 1e-8).unwrap();
        let r = contact_select(&square, 0.4, &ExtractionParams::new(0.4, 0)).unwrap();
        // (1 - 0.4)·2 = 1.2, so both contacts; they are orthogonal in John position
        assert_eq!(r.contact_indices.len(), 2);
        assert!((r.certificate.achieved_equivalence_k - 1.0).abs() < 1e-6);

        let r = contact_select(&random_john(8, 2), 0.5, &ExtractionParams::new(0.5, 3)).unwrap();
        assert!(r.contact_indices.len() >= 5 && r.norms_agree);
    }

    #[test]
    fn selfadjoint_examples() {
        let john = random_john(5, 4);
        // symmetric PSD contraction: |T| = T
        let (p, _) = random_projection(5, 4, 2);
        let t = p.scaled(0.9);
        let r = selfadjoint_variant(&john, &t, 2, &ExtractionParams::new(0.5, 0)).unwrap();
        assert!(r.checks_hold);

        // orthogonal T: |T| = id and z_j = u_j
        let q = DenseMatrix::from_columns(&orthonormal_basis(
            &(0..5)
                .map(|i| gaussian_vector(&mut substream(i, 2), 5))
                .collect::<Vec<_>>(),
            1e-10,
        ))
        .unwrap();
        let r = selfadjoint_variant(&john, &q, 3, &ExtractionParams::new(0.5, 0)).unwrap();
        for (z, &c) in r.z_vectors.iter().zip(&r.contact_indices) {
            let u = &john.space.directions()[c];
            assert!(z.iter().zip(u).all(|(a, b)| (a - b).abs() < 1e-9));
        }

        let mut rng = substream(12, 0);
        let raw = DenseMatrix::from_rows(&(0..5).map(|_| gaussian_vector(&mut rng, 5)).collect::<Vec<_>>()).unwrap();
        let t = crate::extraction::normalize_operator(&raw).unwrap().0;
        let r = selfadjoint_variant(&john, &t, 1, &ExtractionParams::new(0.5, 0)).unwrap();
        assert!(r.checks_hold);
    }

    #[test]
    fn walsh_examples() {
        let r = walsh_counterexample(1).unwrap();
        assert!(r
            .z_x_norms
            .iter()
            .all(|&v| (v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12));
        let r = walsh_counterexample(3).unwrap();
        assert_eq!(r.z_x_norms.len(), 8);
        assert!(r.max_deviation < 1e-12);
        assert!((r.expected - 1.0 / 8f64.sqrt()).abs() < 1e-15);
        for m in 0..=6 {
            assert!(walsh_counterexample(m).unwrap().orthogonality_defect < 1e-12);
        }
        assert!(walsh_counterexample(11).is_err());
    }

    #[test]
    fn sharpness_examples() {
        let r = sharpness_projection(8, 8).unwrap();
        assert!(r.projection.sub(&DenseMatrix::identity(8)).unwrap().max_abs() < 1e-12);
        assert!((r.max_inf_norm - 1.0).abs() < 1e-12);

        // explicit Walsh submatrix: P_ii = k/n and every column has norm √(k/n)
        let r = sharpness_projection(8, 4).unwrap();
        for &c in &r.column_norms {
            assert!((c - 0.5f64.sqrt()).abs() < 1e-12);
        }
        assert!(r.max_inf_norm <= 0.5 + 1e-12);
        for i in 0..8 {
            assert!((r.projection[(i, i)] - 0.5).abs() < 1e-15);
        }
        for (n, k) in [(2, 1), (4, 3), (16, 5), (32, 32)] {
            assert!(sharpness_projection(n, k).unwrap().projector_defect < 1e-10);
        }
        assert!(sharpness_projection(6, 2).is_err());
        assert!(sharpness_projection(8, 9).is_err());
    }
}
