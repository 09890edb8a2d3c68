//! Minimal-volume enclosing ellipsoids of symmetric point sets, their contact
//! points, and the John decompositions they carry.
//!
//! The MVEE of `conv(±p_i)` is the polar of the maximal-volume ellipsoid inside
//! the polytope `{x : |⟨x, p_i⟩| ≤ 1}`. After the change of variables
//! `y = M^{1/2} p` the MVEE becomes the Euclidean ball, the contacts are the
//! unit vectors `u_j = y_j`, and `‖x‖_X = max_j |⟨x, u_j⟩|` is a norm whose
//! John ellipsoid is that same ball.

use serde::{Deserialize, Serialize};

use crate::decomposition::{validate, Decomposition};
use crate::error::{invalid, Error, Result};
use crate::linalg::{psd_sqrt, spd_inverse, svd, thin_svd};
use crate::matrix::{dot, norm2, scale, DenseMatrix};

/// `{x : xᵀ M x ≤ 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub shape: DenseMatrix,
}

impl Ellipsoid {
    pub fn dim(&self) -> usize {
        self.shape.rows()
    }

    /// `xᵀ M x`.
    pub fn quadratic(&self, x: &[f64]) -> f64 {
        let mx = self.shape.matvec(x).expect("dimension checked by caller");
        dot(x, &mx)
    }

    /// Gauge `√(xᵀ M x)`.
    pub fn gauge(&self, x: &[f64]) -> f64 {
        self.quadratic(x).max(0.0).sqrt()
    }
}

/// Outcome of the Frank–Wolfe iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MveeResult {
    pub ellipsoid: Ellipsoid,
    /// Barycentric weights `u_i` with `M = (Σ u_i p_i p_iᵀ)⁻¹ / n`.
    pub dual_weights: Vec<f64>,
    /// `max_i p_iᵀ M p_i - 1`.
    pub gap: f64,
    /// `1 - min_{u_i > 0} p_iᵀ M p_i`.
    pub away_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let n = points.first().ok_or(Error::Empty("point set"))?.len();
    if n == 0 {
        return Err(Error::Validation("points have dimension 0".into()));
    }
    for p in points {
        if p.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: p.len(),
            });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("non-finite point coordinate".into()));
        }
    }
    let rank = svd(&DenseMatrix::from_columns(points)?).rank;
    if rank < n {
        return Err(Error::RankDeficient { dim: n, rank });
    }
    Ok(n)
}

fn barycentric_inverse(points: &[Vec<f64>], u: &[f64], n: usize) -> Result<DenseMatrix> {
    let mut x = DenseMatrix::zeros(n, n);
    for (p, &w) in points.iter().zip(u) {
        if w > 0.0 {
            x.add_outer(w, p);
        }
    }
    spd_inverse(&x)
}

/// MVEE of `conv(±points)` by Frank–Wolfe with away steps.
///
/// Stops once both `max_i g_i/n - 1 ≤ tol` and `1 - min_{u_i>0} g_i/n ≤ tol`,
/// where `g_i = p_iᵀ X⁻¹ p_i`. Hitting `max_iter` returns the current iterate
/// with `converged = false`.
pub fn mvee(points: &[Vec<f64>], tol: f64, max_iter: usize) -> Result<MveeResult> {
    if !(tol > 0.0) {
        return Err(invalid("mvee tolerance must be positive"));
    }
    let n = check_points(points)?;
    let m = points.len();
    let nf = n as f64;
    let mut u = vec![1.0 / m as f64; m];
    let mut xinv = barycentric_inverse(points, &u, n)?;
    let mut g: Vec<f64> = points.iter().map(|p| dot(p, &xinv.matvec(p).unwrap())).collect();

    let mut iterations = 0;
    let (mut gap, mut away_gap);
    loop {
        let (j_up, &k_up) = g
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        let (j_down, &k_down) = g
            .iter()
            .enumerate()
            .filter(|(i, _)| u[*i] > 0.0)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("some weight is positive");
        gap = k_up / nf - 1.0;
        away_gap = 1.0 - k_down / nf;
        if (gap <= tol && away_gap <= tol) || iterations >= max_iter {
            break;
        }
        iterations += 1;

        let (j, kappa, step) = if gap >= away_gap {
            (j_up, k_up, (k_up / nf - 1.0) / (k_up - 1.0))
        } else {
            let uj = u[j_down];
            let bound = if uj < 1.0 { -uj / (1.0 - uj) } else { f64::NEG_INFINITY };
            let free = if k_down > 1.0 {
                (k_down / nf - 1.0) / (k_down - 1.0)
            } else {
                f64::NEG_INFINITY
            };
            (j_down, k_down, free.max(bound))
        };
        if !step.is_finite() || step == 0.0 {
            break;
        }

        for (i, w) in u.iter_mut().enumerate() {
            *w *= 1.0 - step;
            if i == j {
                *w += step;
            }
            if *w < 1e-300 {
                *w = 0.0;
            }
        }

        if iterations % 256 == 0 {
            xinv = barycentric_inverse(points, &u, n)?;
            for (gi, p) in g.iter_mut().zip(points) {
                *gi = dot(p, &xinv.matvec(p)?);
            }
            continue;
        }
        // X' = (1-τ) X + τ p pᵀ, updated by Sherman–Morrison.
        let w = xinv.matvec(&points[j])?;
        let denom = (1.0 - step) + step * kappa;
        let inv_scale = 1.0 / (1.0 - step);
        for (gi, p) in g.iter_mut().zip(points) {
            let pw = dot(p, &w);
            *gi = inv_scale * (*gi - step * pw * pw / denom);
        }
        let mut next = xinv.clone();
        next.add_outer(-step / denom, &w);
        xinv = next.scaled(inv_scale);
    }

    xinv = barycentric_inverse(points, &u, n)?;
    let shape = xinv.scaled(1.0 / nf);
    let ellipsoid = Ellipsoid { shape };
    let qs: Vec<f64> = points.iter().map(|p| ellipsoid.quadratic(p)).collect();
    gap = qs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - 1.0;
    away_gap = 1.0
        - qs.iter()
            .zip(&u)
            .filter(|(_, &w)| w > 0.0)
            .map(|(q, _)| *q)
            .fold(f64::INFINITY, f64::min);
    Ok(MveeResult {
        ellipsoid,
        dual_weights: u,
        gap,
        away_gap,
        iterations,
        converged: gap <= tol && away_gap <= tol,
    })
}

/// A normed space `‖x‖_X = max_j |⟨x, u_j⟩|` given by unit directions `u_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolytopeSpace {
    dim: usize,
    directions: Vec<Vec<f64>>,
}

impl PolytopeSpace {
    /// Requires unit directions (within `1e-10`) spanning `R^n`.
    pub fn new(directions: Vec<Vec<f64>>) -> Result<Self> {
        let n = check_points(&directions)?;
        if let Some(j) = directions.iter().position(|u| (norm2(u) - 1.0).abs() > 1e-10) {
            return Err(Error::Validation(format!("direction {j} is not a unit vector")));
        }
        Ok(Self { dim: n, directions })
    }

    /// Normalizes every (nonzero) direction first.
    pub fn from_unnormalized(directions: &[Vec<f64>]) -> Result<Self> {
        let unit = directions
            .iter()
            .map(|u| {
                let r = norm2(u);
                if r == 0.0 {
                    Err(Error::Validation("zero direction".into()))
                } else {
                    Ok(scale(u, 1.0 / r))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(unit)
    }

    /// `l_∞^n`: directions `e_1, ..., e_n`.
    pub fn linf(n: usize) -> Self {
        Self {
            dim: n,
            directions: (0..n).map(|i| crate::matrix::unit_vector(n, i)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    /// `‖x‖_X`.
    pub fn norm(&self, x: &[f64]) -> Result<f64> {
        polytope_norm(self, x)
    }

    /// A norming functional `±u_i` for `x`: the direction attaining the max,
    /// lowest index on ties, with the sign making `⟨x, ±u_i⟩ ≥ 0`.
    pub fn norming_functional(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        self.check(x)?;
        let mut best = (0, f64::NEG_INFINITY);
        for (i, u) in self.directions.iter().enumerate() {
            let v = dot(x, u).abs();
            if v > best.1 {
                best = (i, v);
            }
        }
        let u = &self.directions[best.0];
        let sign = if dot(x, u) < 0.0 { -1.0 } else { 1.0 };
        Ok((best.0, scale(u, sign)))
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// `max_j |⟨x, u_j⟩|`.
pub fn polytope_norm(space: &PolytopeSpace, x: &[f64]) -> Result<f64> {
    space.check(x)?;
    Ok(space.directions.iter().map(|u| dot(x, u).abs()).fold(0.0, f64::max))
}

/// Tolerances for [`john_decomposition_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JohnOptions {
    /// Bound on `‖Σ c_j u_j u_jᵀ - id‖_F`.
    pub tol: f64,
    /// Optimality tolerance handed to the MVEE solver.
    pub mvee_tol: f64,
    pub max_iter: usize,
}

impl JohnOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            mvee_tol: (tol * 1e-2).clamp(1e-12, 1e-6),
            max_iter: 200_000,
        }
    }
}

/// The John decomposition carried by the MVEE of a symmetric point set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JohnResult {
    pub ellipsoid: Ellipsoid,
    /// `M^{1/2}`: maps the ellipsoid onto the Euclidean unit ball.
    pub transform: DenseMatrix,
    /// Input indices classified as contacts (`pᵀ M p ≥ 1 - 10·mvee_tol`).
    pub contact_indices: Vec<usize>,
    /// The space `X` defined by the transformed, normalized contacts, in the
    /// same order as `contact_indices`.
    pub space: PolytopeSpace,
    /// Positions into `contact_indices` with positive weight.
    pub support: Vec<usize>,
    /// Positive weights `c_j` on `support`; they sum to `n`.
    pub weights: Vec<f64>,
    /// `x_j = √c_j u_j` over `support`.
    #[serde(skip)]
    pub decomposition: Option<Decomposition>,
    pub residual: f64,
    pub mvee_gap: f64,
    pub mvee_iterations: usize,
    pub converged: bool,
}

impl JohnResult {
    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn decomposition(&self) -> &Decomposition {
        self.decomposition.as_ref().expect("constructed with a decomposition")
    }

    /// The unit contact `u` behind decomposition vector `j`.
    pub fn contact_of(&self, j: usize) -> &[f64] {
        &self.space.directions()[self.support[j]]
    }
}

/// Lawson–Hanson nonnegative least squares `min ‖A c - b‖, c ≥ 0`, with `A` given
/// by columns.
pub fn nnls(columns: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let k = columns.len();
    let mut c = vec![0.0; k];
    let mut passive = vec![false; k];
    let residual = |c: &[f64]| -> Vec<f64> {
        let mut r = b.to_vec();
        for (col, &cj) in columns.iter().zip(c) {
            if cj != 0.0 {
                for (ri, ai) in r.iter_mut().zip(col) {
                    *ri -= cj * ai;
                }
            }
        }
        r
    };
    let solve_passive = |passive: &[bool]| -> Vec<f64> {
        let idx: Vec<usize> = (0..k).filter(|&j| passive[j]).collect();
        let mut z = vec![0.0; k];
        if idx.is_empty() {
            return z;
        }
        let sub: Vec<Vec<f64>> = idx.iter().map(|&j| columns[j].clone()).collect();
        let a = DenseMatrix::from_columns(&sub).expect("common length");
        let sol = thin_svd(&a).solve_min_norm(b, 1e-12);
        for (&j, s) in idx.iter().zip(sol) {
            z[j] = s;
        }
        z
    };

    for _ in 0..(3 * k + 10) {
        let r = residual(&c);
        let w: Vec<f64> = columns.iter().map(|col| dot(col, &r)).collect();
        let scale_w = columns.iter().map(|c| norm2(c)).fold(0.0, f64::max) * norm2(b).max(1.0);
        let next = (0..k)
            .filter(|&j| !passive[j] && w[j] > 1e-13 * scale_w)
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(t) = next else { break };
        passive[t] = true;
        loop {
            let z = solve_passive(&passive);
            if (0..k).filter(|&j| passive[j]).all(|j| z[j] > 0.0) {
                c = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for j in (0..k).filter(|&j| passive[j] && z[j] <= 0.0) {
                let a = c[j] / (c[j] - z[j]);
                if a < alpha {
                    alpha = a;
                }
            }
            for j in 0..k {
                c[j] += alpha * (z[j] - c[j]);
                if passive[j] && c[j] <= 1e-15 {
                    passive[j] = false;
                    c[j] = 0.0;
                }
            }
        }
    }
    c
}

/// Coordinates of `u uᵀ` in the orthonormal basis of symmetric matrices, so that
/// Euclidean distances are Frobenius distances.
fn sym_coords(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        out.push(u[i] * u[i]);
        for j in (i + 1)..n {
            out.push(std::f64::consts::SQRT_2 * u[i] * u[j]);
        }
    }
    out
}

/// Weights `c ≥ 0` with `Σ c_j u_j u_jᵀ ≈ id`: the minimum-norm least-squares
/// solution when it is (almost) nonnegative, otherwise NNLS. Returns the
/// weights and the Frobenius residual.
pub fn identity_weights(units: &[Vec<f64>], tol: f64) -> Result<(Vec<f64>, f64)> {
    let n = units.first().ok_or(Error::Empty("contacts"))?.len();
    let columns: Vec<Vec<f64>> = units.iter().map(|u| sym_coords(u)).collect();
    let target = sym_coords(&vec![0.0; n]);
    let mut target = target;
    let mut pos = 0;
    for i in 0..n {
        target[pos] = 1.0;
        pos += n - i;
    }
    let frob = |c: &[f64]| {
        let mut s = DenseMatrix::zeros(n, n);
        for (u, &cj) in units.iter().zip(c) {
            s.add_outer(cj, u);
        }
        s.sub(&DenseMatrix::identity(n)).expect("square").frobenius_norm()
    };

    let a = DenseMatrix::from_columns(&columns)?;
    let mut c = thin_svd(&a).solve_min_norm(&target, 1e-12);
    if c.iter().any(|&x| x < -tol) {
        c = nnls(&columns, &target);
    }
    for x in c.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let residual = frob(&c);
    Ok((c, residual))
}

/// [`john_decomposition_with`] with default solver options.
pub fn john_decomposition(points: &[Vec<f64>], tol: f64) -> Result<JohnResult> {
    john_decomposition_with(points, JohnOptions::new(tol))
}

/// MVEE, contact classification, John weights, and the resulting decomposition
/// `id = Σ c_j u_j ⊗ u_j` in the coordinates where the ellipsoid is the ball.
pub fn john_decomposition_with(points: &[Vec<f64>], opts: JohnOptions) -> Result<JohnResult> {
    if !(opts.tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let run = mvee(points, opts.mvee_tol, opts.max_iter)?;
    let n = run.ellipsoid.dim();
    let transform = psd_sqrt(&run.ellipsoid.shape)?;

    let threshold = 1.0 - 10.0 * opts.mvee_tol.max(run.away_gap.max(0.0));
    let contact_indices: Vec<usize> = (0..points.len())
        .filter(|&i| run.ellipsoid.quadratic(&points[i]) >= threshold)
        .collect();
    let units: Vec<Vec<f64>> = contact_indices
        .iter()
        .map(|&i| {
            let y = transform.matvec(&points[i]).expect("square");
            let r = norm2(&y);
            scale(&y, 1.0 / r)
        })
        .collect();
    if contact_indices.is_empty() {
        return Err(Error::DegenerateContacts {
            residual: (n as f64).sqrt(),
        });
    }

    let (c, residual) = identity_weights(&units, opts.tol)?;
    if !(residual <= opts.tol) {
        return Err(Error::DegenerateContacts { residual });
    }
    let support: Vec<usize> = (0..c.len()).filter(|&j| c[j] > 0.0).collect();
    let weights: Vec<f64> = support.iter().map(|&j| c[j]).collect();
    let vectors: Vec<Vec<f64>> = support.iter().map(|&j| scale(&units[j], c[j].sqrt())).collect();
    let decomposition = validate(vectors, opts.tol)?;
    let space = PolytopeSpace::new(units)?;

    Ok(JohnResult {
        ellipsoid: run.ellipsoid,
        transform,
        contact_indices,
        space,
        support,
        weights,
        decomposition: Some(decomposition),
        residual,
        mvee_gap: run.gap,
        mvee_iterations: run.iterations,
        converged: run.converged,
    })
}

/// John system whose contacts are given directly as unit vectors already in
/// John position (for example `±e_j` for `l_∞^n`).
pub fn john_from_unit_contacts(units: Vec<Vec<f64>>, tol: f64) -> Result<JohnResult> {
    let space = PolytopeSpace::new(units)?;
    let n = space.dim();
    let units = space.directions().to_vec();
    let (c, residual) = identity_weights(&units, tol)?;
    if !(residual <= tol) {
        return Err(Error::DegenerateContacts { residual });
    }
    let support: Vec<usize> = (0..c.len()).filter(|&j| c[j] > 0.0).collect();
    let weights: Vec<f64> = support.iter().map(|&j| c[j]).collect();
    let vectors = support.iter().map(|&j| scale(&units[j], c[j].sqrt())).collect();
    let decomposition = validate(vectors, tol)?;
    Ok(JohnResult {
        ellipsoid: Ellipsoid {
            shape: DenseMatrix::identity(n),
        },
        transform: DenseMatrix::identity(n),
        contact_indices: (0..units.len()).collect(),
        space,
        support,
        weights,
        decomposition: Some(decomposition),
        residual,
        mvee_gap: 0.0,
        mvee_iterations: 0,
        converged: true,
    })
}

/// On-disk point set `{"dim": n, "points": [[...], ...]}`, one representative per
/// `±` pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointSetFile {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
}

impl PointSetFile {
    pub fn validated(self) -> Result<Vec<Vec<f64>>> {
        if let Some(p) = self.points.iter().find(|p| p.len() != self.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: p.len(),
            });
        }
        check_points(&self.points)?;
        Ok(self.points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::unit_vector;
    use crate::rng::{gaussian_vector, substream};
    use proptest::prelude::*;

    fn random_points(seed: u64, n: usize, m: usize) -> Vec<Vec<f64>> {
        let mut rng = substream(seed, 99);
        (0..m).map(|_| gaussian_vector(&mut rng, n)).collect()
    }

    #[test]
    fn mvee_of_coordinate_vectors_is_the_ball() {
        let pts: Vec<Vec<f64>> = (0..4).map(|i| unit_vector(4, i)).collect();
        let r = mvee(&pts, 1e-9, 1000).unwrap();
        assert!(r.converged);
        assert!(r.ellipsoid.shape.sub(&DenseMatrix::identity(4)).unwrap().max_abs() < 1e-7);
    }

    #[test]
    fn mvee_of_square_vertices() {
        let pts = vec![vec![1.0, 1.0], vec![1.0, -1.0]];
        let r = mvee(&pts, 1e-9, 1000).unwrap();
        let half = DenseMatrix::identity(2).scaled(0.5);
        assert!(r.ellipsoid.shape.sub(&half).unwrap().max_abs() < 1e-6);
    }

    #[test]
    fn mvee_rejects_non_spanning() {
        let pts = vec![vec![1.0, 0.0], vec![2.0, 0.0]];
        assert!(matches!(
            mvee(&pts, 1e-6, 100),
            Err(Error::RankDeficient { rank: 1, .. })
        ));
    }

    #[test]
    fn mvee_random_points_contained_with_contacts() {
        let pts = random_points(3, 3, 20);
        let r = mvee(&pts, 1e-9, 100_000).unwrap();
        assert!(r.converged);
        let q: Vec<f64> = pts.iter().map(|p| r.ellipsoid.quadratic(p)).collect();
        assert!(q.iter().all(|&v| v <= 1.0 + 1e-9));
        assert!(q.iter().filter(|&&v| v >= 1.0 - 1e-7).count() >= 3);
    }

    #[test]
    fn mvee_matches_closed_form_for_axis_box() {
        // oracle: the MVEE of an axis-aligned box with half-sides a_i is
        // diag(1 / (n a_i²)) by symmetry
        let a = [1.0, 2.0, 0.5];
        let pts: Vec<Vec<f64>> = [[1.0, 1.0, 1.0], [1.0, -1.0, 1.0], [1.0, 1.0, -1.0], [1.0, -1.0, -1.0]]
            .iter()
            .map(|s| s.iter().zip(&a).map(|(x, y)| x * y).collect())
            .collect();
        let r = mvee(&pts, 1e-10, 100_000).unwrap();
        for i in 0..3 {
            assert!((r.ellipsoid.shape[(i, i)] - 1.0 / (3.0 * a[i] * a[i])).abs() < 1e-7);
        }
    }

    #[test]
    fn john_of_cross_polytope() {
        let pts: Vec<Vec<f64>> = (0..3).map(|i| unit_vector(3, i)).collect();
        let j = john_decomposition(&pts, 1e-8).unwrap();
        assert_eq!(j.contact_indices, vec![0, 1, 2]);
        for w in &j.weights {
            assert!((w - 1.0).abs() < 1e-8);
        }
        for (x, e) in j.decomposition().vectors().iter().zip(&pts) {
            assert!(x.iter().zip(e).all(|(a, b)| (a - b).abs() < 1e-8));
        }
    }

    #[test]
    fn john_of_square_vertices() {
        let pts = vec![vec![1.0, 1.0], vec![1.0, -1.0]];
        let j = john_decomposition(&pts, 1e-8).unwrap();
        assert_eq!(j.support.len(), 2);
        // splitting each representative into its ± pair gives x_v = v/2
        let d = crate::decomposition::split(j.decomposition(), &crate::SplitPlan { counts: vec![2, 2] }).unwrap();
        for (x, v) in d.vectors().iter().zip([&pts[0], &pts[0], &pts[1], &pts[1]]) {
            let half = scale(v, 0.5);
            let same = x.iter().zip(&half).all(|(a, b)| (a - b).abs() < 1e-8);
            let opposite = x.iter().zip(&half).all(|(a, b)| (a + b).abs() < 1e-8);
            assert!(same || opposite);
        }
        // hand summation: Σ over the four signed vertices of v vᵀ = 4 id
        let mut s = DenseMatrix::zeros(2, 2);
        for v in &pts {
            s.add_outer(2.0, v);
        }
        assert!(s.sub(&DenseMatrix::identity(2).scaled(4.0)).unwrap().max_abs() < 1e-15);
        assert!((j.weights.iter().sum::<f64>() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn nnls_handles_negative_least_squares() {
        // oracle: min ‖c1 (1,0) + c2 (1,1) - (0,1)‖ over c ≥ 0 is c = (0, 1/2)
        let c = nnls(&[vec![1.0, 0.0], vec![1.0, 1.0]], &[0.0, 1.0]);
        assert!(c[0].abs() < 1e-12 && (c[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn polytope_norm_examples() {
        let linf = PolytopeSpace::linf(2);
        assert_eq!(polytope_norm(&linf, &[3.0, -1.0]).unwrap(), 3.0);
        assert!(polytope_norm(&linf, &[1.0]).is_err());
        let (i, f) = linf.norming_functional(&[1.0, -1.0]).unwrap();
        assert_eq!(i, 0);
        assert_eq!(f, vec![1.0, 0.0]);
        let (i, f) = linf.norming_functional(&[0.5, -2.0]).unwrap();
        assert_eq!((i, f), (1, vec![0.0, -1.0]));
    }

    #[test]
    fn degenerate_contacts_reported() {
        // Three unit vectors in R^3 clustered near e1 cannot resolve the identity.
        let units = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.6, 0.8, 0.0],
            vec![0.0, 0.6, 0.8],
        ];
        let err = john_from_unit_contacts(units, 1e-8).unwrap_err();
        assert!(matches!(err, Error::DegenerateContacts { .. }));
    }

    proptest! {
        #![proptest_config(ProptestConfig {
            rng_seed: proptest::test_runner::RngSeed::Fixed(0x6a6f686e),
            failure_persistence: None,
            ..ProptestConfig::with_cases(16)
        })]

        #[test]
        fn john_systems_validate_and_sandwich(seed in 0u64..10_000, n in 3usize..6) {
            let pts = random_points(seed, n, 3 * n);
            let j = john_decomposition(&pts, 1e-6).unwrap();
            prop_assert!(j.residual <= 1e-6);
            prop_assert!((j.weights.iter().sum::<f64>() - n as f64).abs() < 1e-5);
            for &i in &j.contact_indices {
                prop_assert!((j.ellipsoid.quadratic(&pts[i]) - 1.0).abs() < 1e-6);
            }
            for p in &pts {
                prop_assert!(j.ellipsoid.quadratic(p) <= 1.0 + 1e-8);
            }
            let mut rng = substream(seed, 5);
            for _ in 0..20 {
                let x = gaussian_vector(&mut rng, n);
                let xn = j.space.norm(&x).unwrap();
                let e = norm2(&x);
                prop_assert!(xn <= e + 1e-12);
                prop_assert!(e <= (n as f64).sqrt() * xn * (1.0 + 1e-6));
            }
            for u in j.space.directions() {
                prop_assert!((j.space.norm(u).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }
}
