//! Decompositions of the identity `id = Σ x_j ⊗ x_j` (equivalently, tight
//! frames), splitting, and tightening of general frames.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{spd_inv_sqrt, sym_eig};
use crate::matrix::{dot, norm2, scale, unit_vector, DenseMatrix};
use crate::rng::{gaussian_vector, streams, substream};

/// Relative band `[0.9, 1.1]` for child norms after an equal-norm split.
pub const SPLIT_BAND: (f64, f64) = (0.9, 1.1);

/// Default validation tolerance `1e-8 · √n`.
pub fn default_tolerance(n: usize) -> f64 {
    1e-8 * (n as f64).sqrt()
}

/// A validated system with `‖Σ x_j x_jᵀ - id‖_F` within tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    dim: usize,
    vectors: Vec<Vec<f64>>,
    parent_map: Option<Vec<usize>>,
    residual: f64,
}

impl Decomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Child index -> original index, present after splitting.
    pub fn parent_map(&self) -> Option<&[usize]> {
        self.parent_map.as_deref()
    }

    pub fn parent_of(&self, child: usize) -> usize {
        self.parent_map.as_ref().map_or(child, |p| p[child])
    }

    /// `‖Σ x_j x_jᵀ - id‖_F` measured at construction.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn squared_norm_sum(&self) -> f64 {
        self.vectors.iter().map(|x| dot(x, x)).sum()
    }

    pub fn frame_operator(&self) -> DenseMatrix {
        frame_operator(&self.vectors, self.dim)
    }

    /// The coordinate decomposition `id = Σ e_j ⊗ e_j`.
    pub fn coordinate(n: usize) -> Self {
        Self {
            dim: n,
            vectors: (0..n).map(|i| unit_vector(n, i)).collect(),
            parent_map: None,
            residual: 0.0,
        }
    }
}

/// `Σ x_j x_jᵀ`.
pub fn frame_operator(vectors: &[Vec<f64>], n: usize) -> DenseMatrix {
    let mut s = DenseMatrix::zeros(n, n);
    for x in vectors {
        s.add_outer(1.0, x);
    }
    s
}

pub fn identity_residual(vectors: &[Vec<f64>], n: usize) -> f64 {
    frame_operator(vectors, n)
        .sub(&DenseMatrix::identity(n))
        .expect("square")
        .frobenius_norm()
}

fn common_dim(vectors: &[Vec<f64>]) -> Result<usize> {
    let n = vectors.first().ok_or(Error::Empty("vector system"))?.len();
    if n == 0 {
        return Err(Error::Validation("vectors have dimension 0".into()));
    }
    for v in vectors {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("non-finite vector entry".into()));
        }
    }
    Ok(n)
}

/// Accepts `vectors` as a decomposition of the identity iff
/// `‖Σ x_j x_jᵀ - id‖_F ≤ tol`.
pub fn validate(vectors: Vec<Vec<f64>>, tol: f64) -> Result<Decomposition> {
    let n = common_dim(&vectors)?;
    if let Some(j) = vectors.iter().position(|v| norm2(v) == 0.0) {
        return Err(Error::Validation(format!("vector {j} is zero")));
    }
    let residual = identity_residual(&vectors, n);
    if !(residual <= tol) {
        return Err(Error::NotDecomposition { residual, tol });
    }
    Ok(Decomposition {
        dim: n,
        vectors,
        parent_map: None,
        residual,
    })
}

/// Per-vector multiplicities of a split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub counts: Vec<usize>,
}

impl SplitPlan {
    pub fn identity(m: usize) -> Self {
        Self { counts: vec![1; m] }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Replaces each `x_j` by `counts[j]` copies of `x_j / √counts[j]`, returning the
/// children and their parent indices.
pub fn split_system(vectors: &[Vec<f64>], plan: &SplitPlan) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    if plan.counts.len() != vectors.len() {
        return Err(Error::DimensionMismatch {
            expected: vectors.len(),
            got: plan.counts.len(),
        });
    }
    if let Some(j) = plan.counts.iter().position(|&c| c == 0) {
        return Err(invalid(format!("split count for vector {j} is zero")));
    }
    let mut children = Vec::with_capacity(plan.total());
    let mut parents = Vec::with_capacity(plan.total());
    for (j, (x, &c)) in vectors.iter().zip(&plan.counts).enumerate() {
        let child = scale(x, 1.0 / (c as f64).sqrt());
        for _ in 0..c {
            children.push(child.clone());
            parents.push(j);
        }
    }
    Ok((children, parents))
}

/// Splits a decomposition; the parent map always points at the original
/// (pre-split) indices, composing with any earlier split.
pub fn split(decomp: &Decomposition, plan: &SplitPlan) -> Result<Decomposition> {
    let (vectors, parents) = split_system(&decomp.vectors, plan)?;
    let parent_map = parents.into_iter().map(|j| decomp.parent_of(j)).collect();
    let residual = identity_residual(&vectors, decomp.dim);
    Ok(Decomposition {
        dim: decomp.dim,
        vectors,
        parent_map: Some(parent_map),
        residual,
    })
}

/// Whether every child norm² `w_j / c_j` lies in `[0.81, 1.21] · h / M`.
pub fn plan_in_band(weights: &[f64], plan: &SplitPlan) -> bool {
    plan_in_band_with(weights, plan, SPLIT_BAND)
}

/// [`plan_in_band`] for a custom norm band `(low, high)`.
pub fn plan_in_band_with(weights: &[f64], plan: &SplitPlan, band: (f64, f64)) -> bool {
    let h: f64 = weights.iter().sum();
    let total = plan.total() as f64;
    let (lo, hi) = (band.0 * band.0, band.1 * band.1);
    weights.iter().zip(&plan.counts).all(|(&w, &c)| {
        let child = w / c as f64;
        child >= lo * h / total * (1.0 - 1e-12) && child <= hi * h / total * (1.0 + 1e-12)
    })
}

/// Split plan making child squared norms nearly equal, for positive `weights`
/// (the squared norms of the parents).
///
/// Counts start at `round(M' w_j / h)` clamped to at least one; a child above
/// the band has its count incremented (largest first). When no plan with
/// `target_m` children lands in the band, `M'` is raised to the smallest value
/// for which this rule does.
pub fn equal_norm_plan(weights: &[f64], target_m: usize) -> Result<SplitPlan> {
    equal_norm_plan_with(weights, target_m, SPLIT_BAND)
}

/// [`equal_norm_plan`] for a custom norm band `(low, high)` with `0 < low < 1 < high`.
pub fn equal_norm_plan_with(weights: &[f64], target_m: usize, band: (f64, f64)) -> Result<SplitPlan> {
    if !(band.0 > 0.0 && band.0 < 1.0 && band.1 > 1.0 && band.1.is_finite()) {
        return Err(invalid("split band must satisfy 0 < low < 1 < high"));
    }
    if weights.is_empty() {
        return Err(Error::Empty("split weights"));
    }
    if let Some(j) = weights.iter().position(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(invalid(format!("split weight {j} must be positive")));
    }
    let m = weights.len();
    let h: f64 = weights.iter().sum();
    let w_min = weights.iter().cloned().fold(f64::INFINITY, f64::min);
    let lo = band.0 * band.0;
    let hi = band.1 * band.1;
    // A count-one child needs w_min ≥ 0.81 h / M, so nothing below this can work.
    let floor = (lo * h / w_min).ceil() as usize;
    let mut m_prime = target_m.max(m).max(floor.min(usize::MAX / 4));

    loop {
        let mut counts: Vec<usize> = weights
            .iter()
            .map(|&w| ((m_prime as f64 * w / h).round() as usize).max(1))
            .collect();
        for _ in 0..(4 * m + 16) {
            let total: usize = counts.iter().sum();
            let (j, child) = weights
                .iter()
                .zip(&counts)
                .map(|(&w, &c)| w / c as f64)
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("nonempty");
            if child > hi * h / total as f64 {
                counts[j] += 1;
            } else {
                break;
            }
        }
        let plan = SplitPlan { counts };
        // rounding can land below the requested size
        if plan.total() >= target_m && plan_in_band_with(weights, &plan, band) {
            return Ok(plan);
        }
        m_prime += 1;
    }
}

/// Splits so that all child norms lie within `[0.9, 1.1] · √(h / M)`.
pub fn equal_norm_split(decomp: &Decomposition, target_m: usize) -> Result<Decomposition> {
    let weights: Vec<f64> = decomp.vectors.iter().map(|x| dot(x, x)).collect();
    let plan = equal_norm_plan(&weights, target_m)?;
    split(decomp, &plan)
}

/// Frame bounds `(A, B)`: the extreme eigenvalues of the frame operator.
pub fn frame_bounds(vectors: &[Vec<f64>]) -> Result<(f64, f64)> {
    let n = common_dim(vectors)?;
    let eig = sym_eig(&frame_operator(vectors, n), 1e-9)?;
    Ok((*eig.values.last().expect("n > 0"), eig.values[0]))
}

/// The map `S^{-1/2}` sending a spanning system to a tight frame, with its
/// condition number `√(B/A)`.
pub fn tightening_map(vectors: &[Vec<f64>]) -> Result<(DenseMatrix, f64)> {
    let n = common_dim(vectors)?;
    let s = frame_operator(vectors, n);
    let (a, b) = frame_bounds(vectors)?;
    if !(a > 1e-12 * b) {
        let rank = crate::linalg::svd(&DenseMatrix::from_columns(vectors)?).rank;
        return Err(Error::RankDeficient { dim: n, rank });
    }
    Ok((spd_inv_sqrt(&s)?, (b / a).sqrt()))
}

/// Applies `S^{-1/2}` to every vector, producing a tight frame.
pub fn tighten(vectors: &[Vec<f64>]) -> Result<Decomposition> {
    let n = common_dim(vectors)?;
    let (map, _) = tightening_map(vectors)?;
    let tight = vectors.iter().map(|x| map.matvec(x)).collect::<Result<Vec<_>>>()?;
    validate(tight, default_tolerance(n))
}

/// Gaussian `n × m` system, tightened. Deterministic in `seed`.
pub fn random_tight_frame(n: usize, m: usize, seed: u64) -> Result<Decomposition> {
    if n == 0 {
        return Err(invalid("dimension must be positive"));
    }
    if m < n {
        return Err(invalid(format!("need m >= n, got m = {m}, n = {n}")));
    }
    let mut rng = substream(seed, streams::FRAME);
    let raw: Vec<Vec<f64>> = (0..m).map(|_| gaussian_vector(&mut rng, n)).collect();
    tighten(&raw)
}

/// On-disk format `{"dim": n, "vectors": [[...], ...], "parent_map": [...]}`.
/// Unknown fields (such as provenance written by the CLI) are ignored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompositionFile {
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_map: Option<Vec<usize>>,
}

impl From<&Decomposition> for DecompositionFile {
    fn from(d: &Decomposition) -> Self {
        Self {
            dim: d.dim,
            vectors: d.vectors.clone(),
            parent_map: d.parent_map.clone(),
        }
    }
}

impl DecompositionFile {
    pub fn into_decomposition(self, tol: f64) -> Result<Decomposition> {
        if let Some(v) = self.vectors.iter().find(|v| v.len() != self.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        let m = self.vectors.len();
        let mut d = validate(self.vectors, tol)?;
        if let Some(pm) = self.parent_map {
            if pm.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: pm.len(),
                });
            }
            d.parent_map = Some(pm);
        }
        Ok(d)
    }
}
