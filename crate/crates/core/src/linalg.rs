//! Symmetric eigensolver, SVD and the spectral certificates (Hilbertian,
//! Besselian and equivalence constants) consumed by every other module.
//!
//! Both factorizations are Jacobi methods: cyclic two-sided rotations for
//! symmetric matrices and one-sided (Hestenes) rotations for the SVD. The
//! one-sided variant diagonalizes `mᵀm` implicitly, so the singular values are
//! the square roots of its eigenvalues, but small singular values keep their
//! relative accuracy instead of drowning in the rounding of the Gram matrix.

use serde::{Deserialize, Serialize};

use crate::decomposition::Decomposition;
use crate::error::{Error, Result};
use crate::matrix::{dot, norm2, DenseMatrix};

/// Default relative rank tolerance: singular values below `1e-9 * σ_max` count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

const MAX_SWEEPS: usize = 100;

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order and
/// eigenvectors stored as the matching columns of `vectors`.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

impl SymmetricEigen {
    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i)
    }

    /// Rebuilds `V f(Λ) Vᵀ`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let n = self.values.len();
        let mut out = DenseMatrix::zeros(n, n);
        for (k, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            if w != 0.0 {
                out.add_outer(w, &self.vectors.column(k));
            }
        }
        out
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// `tol` bounds the accepted asymmetry `max |m_ij - m_ji|` relative to
/// `max(1, max |m_ij|)`; the symmetric part is what gets diagonalized.
pub fn sym_eig(m: &DenseMatrix, tol: f64) -> Result<SymmetricEigen> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let asym = m.asymmetry();
    if asym > tol * m.max_abs().max(1.0) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let n = m.rows();
    let mut a = m.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = avg;
            a[(j, i)] = avg;
        }
    }
    let mut v = DenseMatrix::identity(n);
    let scale = a.frobenius_norm();

    if scale > 0.0 {
        for _ in 0..MAX_SWEEPS {
            let off: f64 = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum::<f64>()
                .sqrt();
            if off <= 1e-15 * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq.abs() <= 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    a[(p, p)] -= t * apq;
                    a[(q, q)] += t * apq;
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    for k in 0..n {
                        if k != p && k != q {
                            let akp = a[(k, p)];
                            let akq = a[(k, q)];
                            let new_p = c * akp - s * akq;
                            let new_q = s * akp + c * akq;
                            a[(k, p)] = new_p;
                            a[(p, k)] = new_p;
                            a[(k, q)] = new_q;
                            a[(q, k)] = new_q;
                        }
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = v.select_columns(&order);
    Ok(SymmetricEigen { values, vectors })
}

/// Thin singular value decomposition `m = U diag(s) Vᵀ` with `r = min(rows, cols)`
/// columns in `u` and `v`; singular values descending.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub v: DenseMatrix,
}

impl ThinSvd {
    pub fn rank(&self, rel_tol: f64) -> usize {
        let cutoff = rel_tol * self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values.iter().filter(|&&s| s > cutoff).count()
    }

    /// Orthonormal basis of the column space (left singular vectors above the cutoff).
    pub fn range_basis(&self, rel_tol: f64) -> Vec<Vec<f64>> {
        (0..self.rank(rel_tol)).map(|k| self.u.column(k)).collect()
    }

    /// Minimum-norm least-squares solution of `m x = b`.
    pub fn solve_min_norm(&self, b: &[f64], rel_tol: f64) -> Vec<f64> {
        let r = self.rank(rel_tol);
        let mut x = vec![0.0; self.v.rows()];
        for k in 0..r {
            let coef = dot(&self.u.column(k), b) / self.singular_values[k];
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += coef * self.v[(i, k)];
            }
        }
        x
    }
}

/// One-sided Jacobi SVD.
pub fn thin_svd(m: &DenseMatrix) -> ThinSvd {
    if m.rows() < m.cols() {
        let t = thin_svd(&m.transpose());
        return ThinSvd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
    }
    let (rows, cols) = (m.rows(), m.cols());
    // Work on columns stored contiguously.
    let mut w: Vec<Vec<f64>> = m.columns();
    let mut v: Vec<Vec<f64>> = (0..cols).map(|j| crate::matrix::unit_vector(cols, j)).collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut w, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = w.iter().map(|c| norm2(c)).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let mut u = DenseMatrix::zeros(rows, cols);
    let mut vm = DenseMatrix::zeros(cols, cols);
    let mut singular_values = Vec::with_capacity(cols);
    for (k, &j) in order.iter().enumerate() {
        let s = norms[j];
        singular_values.push(s);
        if s > 0.0 {
            for i in 0..rows {
                u[(i, k)] = w[j][i] / s;
            }
        }
        for i in 0..cols {
            vm[(i, k)] = v[j][i];
        }
    }
    ThinSvd {
        u,
        singular_values,
        v: vm,
    }
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        let x = *a;
        let y = *b;
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Singular values with the derived operator and Hilbert–Schmidt norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub singular_values: Vec<f64>,
    pub op_norm: f64,
    pub hs_norm: f64,
    pub rank_tol: f64,
    pub rank: usize,
}

pub fn svd(m: &DenseMatrix) -> SpectralSummary {
    svd_with_tol(m, DEFAULT_RANK_TOL)
}

/// As [`svd`], with a configurable relative rank tolerance.
pub fn svd_with_tol(m: &DenseMatrix, rel_tol: f64) -> SpectralSummary {
    let f = thin_svd(m);
    let op_norm = f.singular_values.first().copied().unwrap_or(0.0);
    let hs_norm = f.singular_values.iter().map(|s| s * s).sum::<f64>().sqrt();
    let rank_tol = rel_tol * op_norm;
    let rank = f.rank(rel_tol);
    SpectralSummary {
        singular_values: f.singular_values,
        op_norm,
        hs_norm,
        rank_tol,
        rank,
    }
}

pub fn op_norm(m: &DenseMatrix) -> f64 {
    svd(m).op_norm
}

/// Spectral constants of a finite system of vectors viewed as the columns of
/// its synthesis matrix `S`.
///
/// `equivalence_k` is the condition number of the column-normalized system,
/// i.e. the diagonal scaling `scaling[j] = 1 / ‖x_j‖` is the witness. That
/// witness is within a factor `√m` of the best diagonal scaling (van der
/// Sluis) but is not claimed to be optimal; `unscaled_condition` is reported
/// alongside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemCertificate {
    pub hilbertian_k: f64,
    #[serde(with = "finite_or_null")]
    pub besselian_k: f64,
    #[serde(with = "finite_or_null")]
    pub equivalence_k: f64,
    #[serde(with = "finite_or_null")]
    pub unscaled_condition: f64,
    #[serde(with = "finite_or_null_vec")]
    pub scaling: Vec<f64>,
}

impl SystemCertificate {
    pub fn is_independent(&self) -> bool {
        self.besselian_k.is_finite()
    }
}

pub fn system_certificate(vectors: &[Vec<f64>]) -> Result<SystemCertificate> {
    if vectors.is_empty() {
        return Err(Error::Empty("system"));
    }
    let s = DenseMatrix::from_columns(vectors)?;
    let norms: Vec<f64> = vectors.iter().map(|v| norm2(v)).collect();
    let scaling: Vec<f64> = norms
        .iter()
        .map(|&r| if r > 0.0 { 1.0 / r } else { f64::INFINITY })
        .collect();

    let spec = svd(&s);
    let hilbertian_k = spec.op_norm;
    let besselian_k = inverse_smallest(&spec, vectors.len());
    let unscaled_condition = hilbertian_k * besselian_k;

    let equivalence_k = if norms.contains(&0.0) {
        f64::INFINITY
    } else {
        let normalized: Vec<Vec<f64>> = vectors
            .iter()
            .zip(&scaling)
            .map(|(v, &c)| v.iter().map(|x| x * c).collect())
            .collect();
        let ns = svd(&DenseMatrix::from_columns(&normalized)?);
        ns.op_norm * inverse_smallest(&ns, vectors.len())
    };

    Ok(SystemCertificate {
        hilbertian_k,
        besselian_k,
        equivalence_k,
        unscaled_condition: if unscaled_condition.is_nan() {
            f64::INFINITY
        } else {
            unscaled_condition
        },
        scaling,
    })
}

/// `1/σ_min` over all `count` columns, or `+∞` for a dependent system.
fn inverse_smallest(spec: &SpectralSummary, count: usize) -> f64 {
    if spec.singular_values.len() < count || spec.op_norm == 0.0 {
        return f64::INFINITY;
    }
    let smallest = *spec.singular_values.last().expect("nonempty");
    if smallest <= spec.rank_tol {
        f64::INFINITY
    } else {
        1.0 / smallest
    }
}

/// Both sides of `‖T‖²_HS = Σ ‖T x_j‖²`, computed independently.
pub fn hs_identity_check(decomp: &Decomposition, t: &DenseMatrix) -> Result<(f64, f64)> {
    let n = decomp.dim();
    if t.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: t.cols(),
        });
    }
    let lhs = t.frobenius_norm().powi(2);
    let mut rhs = 0.0;
    for x in decomp.vectors() {
        let tx = t.matvec(x)?;
        rhs += dot(&tx, &tx);
    }
    Ok((lhs, rhs))
}

/// Principal square root of a symmetric positive semidefinite matrix;
/// eigenvalues below `1e-12 * λ_max` are clamped to zero.
pub fn psd_sqrt(m: &DenseMatrix) -> Result<DenseMatrix> {
    let eig = sym_eig(m, 1e-9)?;
    let cutoff = 1e-12 * eig.values.first().copied().unwrap_or(0.0).max(0.0);
    Ok(eig.map_spectrum(|l| if l > cutoff { l.sqrt() } else { 0.0 }))
}

/// Inverse square root of a symmetric positive definite matrix.
pub fn spd_inv_sqrt(m: &DenseMatrix) -> Result<DenseMatrix> {
    let eig = sym_eig(m, 1e-9)?;
    let top = eig.values.first().copied().unwrap_or(0.0);
    let smallest = eig.values.last().copied().unwrap_or(0.0);
    if top <= 0.0 || smallest <= 1e-12 * top {
        return Err(Error::Singular);
    }
    Ok(eig.map_spectrum(|l| 1.0 / l.sqrt()))
}

/// Inverse of a symmetric positive definite matrix through its Cholesky factor.
pub fn spd_inverse(m: &DenseMatrix) -> Result<DenseMatrix> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    let n = m.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::Singular);
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    // Invert L column by column, then form L⁻ᵀ L⁻¹.
    let mut linv = DenseMatrix::zeros(n, n);
    for c in 0..n {
        for i in c..n {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in c..i {
                s -= l[(i, k)] * linv[(k, c)];
            }
            linv[(i, c)] = s / l[(i, i)];
        }
    }
    let mut inv = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s: f64 = (j..n).map(|k| linv[(k, i)] * linv[(k, j)]).sum();
            inv[(i, j)] = s;
            inv[(j, i)] = s;
        }
    }
    Ok(inv)
}

/// Orthonormal basis of `span(vectors)` by twice-iterated modified Gram–Schmidt.
/// Vectors whose residual falls below `rel_tol` times their norm are skipped.
pub fn orthonormal_basis(vectors: &[Vec<f64>], rel_tol: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let original = norm2(v);
        if original == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let r = norm2(&w);
        if r > rel_tol * original {
            basis.push(w.into_iter().map(|x| x / r).collect());
        }
    }
    basis
}

/// Orthogonal projection onto `span(basis)` for an orthonormal `basis` in `R^n`.
pub fn projector_onto(basis: &[Vec<f64>], n: usize) -> DenseMatrix {
    let mut p = DenseMatrix::zeros(n, n);
    for b in basis {
        p.add_outer(1.0, b);
    }
    p
}

/// Orthogonal projection onto the orthogonal complement of `span(vectors)`.
pub fn complement_projector(vectors: &[Vec<f64>], n: usize) -> DenseMatrix {
    let basis = orthonormal_basis(vectors, 1e-10);
    DenseMatrix::identity(n)
        .sub(&projector_onto(&basis, n))
        .expect("same shape")
}

/// Checks `p² = p = pᵀ` within `tol` (max-entry norm) and returns the rank.
pub fn projection_rank(p: &DenseMatrix, tol: f64) -> Result<usize> {
    if !p.is_square() {
        return Err(Error::NotSquare {
            rows: p.rows(),
            cols: p.cols(),
        });
    }
    let asym = p.asymmetry();
    let idem = p.matmul(p)?.sub(p)?.max_abs();
    if asym > tol || idem > tol {
        return Err(Error::Validation(format!(
            "not an orthogonal projection (asymmetry {asym:.2e}, idempotency defect {idem:.2e})"
        )));
    }
    Ok(p.trace().round().max(0.0) as usize)
}

/// Serde helpers writing `+∞` as JSON `null` and reading `null` back as `+∞`.
pub mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

pub mod finite_or_null_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let opt: Vec<Option<f64>> = v.iter().map(|x| x.is_finite().then_some(*x)).collect();
        opt.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Option<f64>>::deserialize(d)?
            .into_iter()
            .map(|x| x.unwrap_or(f64::INFINITY))
            .collect())
    }
}
