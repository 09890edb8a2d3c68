//! Subset selection subroutines: the restriction step (small Hilbertian
//! constant), the invertibility step (small Besselian constant), the
//! near-orthogonal selection, and a brute-force/greedy oracle.
//!
//! The existence theorems behind the first two carry non-explicit constants,
//! so both are searches that report what they achieve.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{finite_or_null, sym_eig, system_certificate, thin_svd, SystemCertificate};
use crate::matrix::{dot, norm2, scale, DenseMatrix};
use crate::rng::{permutation, streams, substream};

fn common_dim(system: &[Vec<f64>]) -> Result<usize> {
    let n = system.first().ok_or(Error::Empty("system"))?.len();
    for v in system {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }
    Ok(n)
}

/// Smallest eigenvalue of `[[diag(λ), w], [wᵀ, c]]` (`λ` from the eigenbasis of
/// the current Gram matrix, `w = Qᵀ b`), by bisection on the secular equation.
fn bordered_min(lambda: &[f64], w: &[f64], c: f64) -> f64 {
    let Some(&lmin) = lambda.iter().min_by(|a, b| a.total_cmp(b)) else {
        return c;
    };
    let wn = norm2(w);
    let mut lo = lmin.min(c) - wn - 1e-300;
    let mut hi = lmin;
    let f = |mu: f64| c - mu - lambda.iter().zip(w).map(|(l, wi)| wi * wi / (l - mu)).sum::<f64>();
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest eigenvalue of the same bordered matrix.
fn bordered_max(lambda: &[f64], w: &[f64], c: f64) -> f64 {
    let Some(&lmax) = lambda.iter().max_by(|a, b| a.total_cmp(b)) else {
        return c;
    };
    let wn = norm2(w);
    let mut lo = lmax;
    let mut hi = lmax.max(c) + wn + 1e-300;
    let f = |mu: f64| c - mu + lambda.iter().zip(w).map(|(l, wi)| wi * wi / (mu - l)).sum::<f64>();
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Gram matrix of a growing selection, kept in eigen-form so that the extreme
/// eigenvalues after adding one more vector cost `O(k n + k²)`.
pub(crate) struct GramTracker<'a> {
    system: &'a [Vec<f64>],
    selected: Vec<usize>,
    values: Vec<f64>,
    q: DenseMatrix,
}

impl<'a> GramTracker<'a> {
    pub(crate) fn new(system: &'a [Vec<f64>]) -> Self {
        Self {
            system,
            selected: Vec::new(),
            values: Vec::new(),
            q: DenseMatrix::zeros(0, 0),
        }
    }

    pub(crate) fn selected(&self) -> &[usize] {
        &self.selected
    }

    /// `(λ_min, λ_max)` of the Gram matrix of the current selection plus `j`.
    pub(crate) fn extremes_with(&self, j: usize) -> (f64, f64) {
        let v = &self.system[j];
        let c = dot(v, v);
        let k = self.selected.len();
        let b: Vec<f64> = self.selected.iter().map(|&i| dot(&self.system[i], v)).collect();
        let w: Vec<f64> = (0..k)
            .map(|col| (0..k).map(|r| self.q[(r, col)] * b[r]).sum())
            .collect();
        (bordered_min(&self.values, &w, c), bordered_max(&self.values, &w, c))
    }

    pub(crate) fn extremes(&self) -> (f64, f64) {
        match (self.values.last(), self.values.first()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => (0.0, 0.0),
        }
    }

    pub(crate) fn push(&mut self, j: usize) {
        self.selected.push(j);
        let k = self.selected.len();
        let mut g = DenseMatrix::zeros(k, k);
        for a in 0..k {
            for b in a..k {
                let v = dot(&self.system[self.selected[a]], &self.system[self.selected[b]]);
                g[(a, b)] = v;
                g[(b, a)] = v;
            }
        }
        let eig = sym_eig(&g, 1e-9).expect("Gram matrices are symmetric");
        self.values = eig.values;
        self.q = eig.vectors;
    }
}

// ---------------------------------------------------------------------------
// Restriction step

/// Outcome of [`kt_select`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KtSelection {
    pub nu: Vec<usize>,
    pub lambda: f64,
    /// `K = (√λ + √(h/m))⁻¹` with `h = Σ ‖x_j‖²`.
    pub k_scale: f64,
    /// `⌈λ m / 4⌉`.
    pub target_size: usize,
    /// Hilbertian constant of `(K x_j)_{j ∈ ν}`.
    pub achieved_hilbertian: f64,
    /// 0 for the greedy-removal candidate, `a ≥ 1` for random attempt `a`.
    pub best_attempt: usize,
}

fn frame_top(system: &[Vec<f64>], idx: &[usize], n: usize) -> f64 {
    let mut s = DenseMatrix::zeros(n, n);
    for &j in idx {
        s.add_outer(1.0, &system[j]);
    }
    sym_eig(&s, 1e-9).expect("symmetric").values[0].max(0.0)
}

/// Chooses `ν` with `|ν| ≥ λm/4` keeping `σ_max(x_ν)` small.
///
/// Candidates are one greedy removal pass (repeatedly dropping the vector most
/// aligned with the current top eigenvector) and `attempts` random subsets of
/// the target size; the best achieved constant wins.
pub fn kt_select(system: &[Vec<f64>], lambda: f64, attempts: usize, seed: u64) -> Result<KtSelection> {
    let n = common_dim(system)?;
    let m = system.len();
    let all: Vec<usize> = (0..m).collect();
    let top = frame_top(system, &all, n).sqrt();
    if top > 1.0 + 1e-9 {
        return Err(Error::Validation(format!(
            "system is not 1-Hilbertian (largest singular value {top:.9})"
        )));
    }
    let mf = m as f64;
    if !(lambda >= 1.0 / mf - 1e-12 && lambda <= 1.0 + 1e-12) {
        return Err(invalid(format!("lambda must lie in [1/m, 1], got {lambda}")));
    }
    let h: f64 = system.iter().map(|x| dot(x, x)).sum();
    let k_scale = 1.0 / (lambda.sqrt() + (h / mf).sqrt());
    let target_size = ((lambda * mf / 4.0 - 1e-9).ceil() as usize).clamp(1, m);

    // greedy removal
    let mut s = DenseMatrix::zeros(n, n);
    for x in system {
        s.add_outer(1.0, x);
    }
    let mut active = vec![true; m];
    let mut remaining = m;
    let mut v = sym_eig(&s, 1e-9)?.vector(0);
    while remaining > target_size {
        let j = (0..m)
            .filter(|&j| active[j])
            .max_by(|&a, &b| {
                let (da, db) = (dot(&system[a], &v).powi(2), dot(&system[b], &v).powi(2));
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("nonempty");
        active[j] = false;
        remaining -= 1;
        s.add_outer(-1.0, &system[j]);
        for _ in 0..30 {
            let w = s.matvec(&v)?;
            let r = norm2(&w);
            if r <= 1e-300 {
                break;
            }
            v = scale(&w, 1.0 / r);
        }
    }
    let greedy: Vec<usize> = (0..m).filter(|&j| active[j]).collect();
    let mut best = (frame_top(system, &greedy, n), greedy, 0usize);

    for a in 1..=attempts {
        let mut rng = substream(seed, streams::KT + a as u64);
        let mut idx: Vec<usize> = permutation(&mut rng, m).into_iter().take(target_size).collect();
        idx.sort_unstable();
        let t = frame_top(system, &idx, n);
        if t < best.0 {
            best = (t, idx, a);
        }
    }

    Ok(KtSelection {
        nu: best.1,
        lambda,
        k_scale,
        target_size,
        achieved_hilbertian: k_scale * best.0.sqrt(),
        best_attempt: best.2,
    })
}

// ---------------------------------------------------------------------------
// Invertibility step

/// Knobs for [`bt_select`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BtOptions {
    /// Besselian budget is `c1 / α`.
    pub c1: f64,
    /// Size target is `c_bt (α / H)² m`.
    pub c_bt: f64,
    pub attempts: usize,
    pub seed: u64,
    pub max_size: Option<usize>,
}

impl Default for BtOptions {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c_bt: 0.05,
            attempts: 4,
            seed: 0,
            max_size: None,
        }
    }
}

/// Outcome of [`bt_select`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtSelection {
    pub rho: Vec<usize>,
    pub alpha: f64,
    /// Hilbertian constant `H` of the whole input system.
    pub hilbertian: f64,
    #[serde(with = "finite_or_null")]
    pub besselian: f64,
    pub besselian_bound: f64,
    pub target_size: usize,
    /// `|ρ|` reached `target_size` (or `max_size`, when that is smaller).
    pub size_met: bool,
}

/// Greedily grows `ρ`, always adding the vector that keeps `σ_min` of the
/// selection largest, while the Besselian constant stays within `c1 / α`.
/// Restarts differ in the first vector chosen.
pub fn bt_select(system: &[Vec<f64>], alpha: f64, opts: BtOptions) -> Result<BtSelection> {
    let n = common_dim(system)?;
    let m = system.len();
    if !(alpha > 0.0) || !(opts.c1 > 0.0) {
        return Err(invalid("alpha and c1 must be positive"));
    }
    if let Some(j) = system.iter().position(|x| norm2(x) < alpha * (1.0 - 1e-12)) {
        return Err(Error::Validation(format!("vector {j} has norm below alpha = {alpha}")));
    }
    let all: Vec<usize> = (0..m).collect();
    let hilbertian = frame_top(system, &all, n).sqrt();
    let target_size = ((opts.c_bt * (alpha / hilbertian).powi(2) * m as f64).ceil() as usize).min(m);
    let cap = opts.max_size.unwrap_or(m).min(m);
    let floor = (alpha / opts.c1).powi(2);

    let mut best: Option<(Vec<usize>, f64)> = None;
    for a in 0..opts.attempts.max(1) {
        if cap == 0 {
            best = Some((Vec::new(), 0.0));
            break;
        }
        let first = if a == 0 {
            (0..m)
                .max_by(|&i, &j| norm2(&system[i]).total_cmp(&norm2(&system[j])).then(j.cmp(&i)))
                .expect("nonempty")
        } else {
            permutation(&mut substream(opts.seed, streams::BT + a as u64), m)[0]
        };
        let mut tracker = GramTracker::new(system);
        let mut used = vec![false; m];
        tracker.push(first);
        used[first] = true;
        while tracker.selected().len() < cap {
            let pick = (0..m)
                .filter(|&j| !used[j])
                .map(|j| (j, tracker.extremes_with(j).0))
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
            match pick {
                Some((j, lmin)) if lmin >= floor => {
                    tracker.push(j);
                    used[j] = true;
                }
                _ => break,
            }
        }
        let lmin = tracker.extremes().0;
        let sel = tracker.selected().to_vec();
        let better = match &best {
            None => true,
            Some((b, bl)) => sel.len() > b.len() || (sel.len() == b.len() && lmin > *bl),
        };
        if better {
            best = Some((sel, lmin));
        }
    }

    let (mut rho, _) = best.expect("at least one attempt");
    rho.sort_unstable();
    let besselian = if rho.is_empty() {
        0.0
    } else {
        let sel: Vec<Vec<f64>> = rho.iter().map(|&j| system[j].clone()).collect();
        system_certificate(&sel)?.besselian_k
    };
    Ok(BtSelection {
        size_met: rho.len() >= target_size.min(cap),
        rho,
        alpha,
        hilbertian,
        besselian,
        besselian_bound: opts.c1 / alpha,
        target_size,
    })
}

// ---------------------------------------------------------------------------
// Near-orthogonal selection

/// Outcome of [`near_orthogonal_select`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearOrthogonal {
    pub sigma: Vec<usize>,
    /// `‖G_σ - id‖_op`, recomputed from scratch.
    pub gram_defect: f64,
    pub epsilon: f64,
}

/// `‖G - id‖_op` for the Gram matrix of `vectors`.
pub fn gram_defect(vectors: &[Vec<f64>]) -> Result<f64> {
    let k = vectors.len();
    let mut g = DenseMatrix::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            g[(a, b)] = dot(&vectors[a], &vectors[b]);
        }
    }
    let eig = sym_eig(&g, 1e-9)?;
    Ok(eig.values.iter().map(|l| (l - 1.0).abs()).fold(0.0, f64::max))
}

/// Greedy selection of unit vectors with `‖G_σ - id‖ < ε`: each step adds the
/// index giving the smallest defect. Restarts begin from different indices.
pub fn near_orthogonal_select(system: &[Vec<f64>], epsilon: f64, attempts: usize, seed: u64) -> Result<NearOrthogonal> {
    common_dim(system)?;
    let m = system.len();
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon must be positive"));
    }
    if let Some(j) = system.iter().position(|x| (norm2(x) - 1.0).abs() > 1e-9) {
        return Err(Error::Validation(format!("vector {j} is not unit norm")));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for a in 0..attempts.max(1) {
        let first = if a == 0 {
            0
        } else {
            permutation(&mut substream(seed, streams::NEAR_ORTHO + a as u64), m)[0]
        };
        let mut tracker = GramTracker::new(system);
        let mut used = vec![false; m];
        tracker.push(first);
        used[first] = true;
        let mut defect = 0.0;
        loop {
            let pick = (0..m)
                .filter(|&j| !used[j])
                .map(|j| {
                    let (lo, hi) = tracker.extremes_with(j);
                    (j, (hi - 1.0).max(1.0 - lo))
                })
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            match pick {
                // keep a margin so the recomputed defect stays strictly below ε
                Some((j, d)) if d < epsilon * (1.0 - 1e-9) => {
                    tracker.push(j);
                    used[j] = true;
                    defect = d;
                }
                _ => break,
            }
        }
        let sel = tracker.selected().to_vec();
        let better = match &best {
            None => true,
            Some((b, bd)) => sel.len() > b.len() || (sel.len() == b.len() && defect < *bd),
        };
        if better {
            best = Some((sel, defect));
        }
    }
    let (mut sigma, _) = best.expect("at least one attempt");
    sigma.sort_unstable();
    let chosen: Vec<Vec<f64>> = sigma.iter().map(|&j| system[j].clone()).collect();
    Ok(NearOrthogonal {
        gram_defect: gram_defect(&chosen)?,
        sigma,
        epsilon,
    })
}

// ---------------------------------------------------------------------------
// Oracle

/// Objective for [`greedy_oracle`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMode {
    /// Largest smallest singular value of the raw columns.
    MaximizeSigmaMin,
    /// Smallest condition number of the column-normalized system.
    MinimizeCond,
}

pub const DEFAULT_EXHAUSTIVE_LIMIT: usize = 200_000;

/// Outcome of [`greedy_oracle`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub subset: Vec<usize>,
    /// `σ_min` or the condition number, depending on the mode.
    #[serde(with = "finite_or_null")]
    pub objective: f64,
    pub exhaustive: bool,
    pub evaluated: usize,
    pub certificate: SystemCertificate,
}

pub(crate) fn binomial(m: usize, k: usize) -> u128 {
    let k = k.min(m - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (m - i) as u128 / (i + 1) as u128;
        if c > u64::MAX as u128 {
            return c;
        }
    }
    c
}

fn subset_objective(system: &[Vec<f64>], idx: &[usize], mode: OracleMode) -> f64 {
    let cols: Vec<Vec<f64>> = idx.iter().map(|&j| system[j].clone()).collect();
    let n = cols[0].len();
    if cols.len() > n {
        return match mode {
            OracleMode::MaximizeSigmaMin => 0.0,
            OracleMode::MinimizeCond => f64::INFINITY,
        };
    }
    let s = thin_svd(&DenseMatrix::from_columns(&cols).expect("common length")).singular_values;
    let (hi, lo) = (s[0], *s.last().expect("nonempty"));
    match mode {
        OracleMode::MaximizeSigmaMin => lo,
        OracleMode::MinimizeCond => {
            if lo <= 1e-9 * hi {
                f64::INFINITY
            } else {
                hi / lo
            }
        }
    }
}

fn better(mode: OracleMode, a: f64, b: f64) -> bool {
    match mode {
        OracleMode::MaximizeSigmaMin => a > b,
        OracleMode::MinimizeCond => a < b,
    }
}

/// Best `k`-subset for `mode`: exhaustive (lexicographic order, first optimum
/// kept) when `C(m, k) ≤ exhaustive_limit`, greedy forward selection otherwise.
pub fn greedy_oracle(system: &[Vec<f64>], k: usize, mode: OracleMode, exhaustive_limit: usize) -> Result<OracleResult> {
    common_dim(system)?;
    let m = system.len();
    if k == 0 || k > m {
        return Err(invalid(format!("need 1 <= k <= m = {m}, got {k}")));
    }
    let work: Vec<Vec<f64>> = match mode {
        OracleMode::MaximizeSigmaMin => system.to_vec(),
        OracleMode::MinimizeCond => system
            .iter()
            .map(|x| {
                let r = norm2(x);
                if r > 0.0 {
                    scale(x, 1.0 / r)
                } else {
                    x.clone()
                }
            })
            .collect(),
    };

    let exhaustive = binomial(m, k) <= exhaustive_limit as u128;
    let mut evaluated = 0;
    let (subset, objective) = if exhaustive {
        let mut idx: Vec<usize> = (0..k).collect();
        let mut best = (idx.clone(), subset_objective(&work, &idx, mode));
        evaluated += 1;
        loop {
            // next combination in lexicographic order
            let mut i = k;
            while i > 0 && idx[i - 1] == m - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for t in i..k {
                idx[t] = idx[t - 1] + 1;
            }
            let v = subset_objective(&work, &idx, mode);
            evaluated += 1;
            if better(mode, v, best.1) {
                best = (idx.clone(), v);
            }
        }
        best
    } else {
        let mut tracker = GramTracker::new(&work);
        let mut used = vec![false; m];
        for _ in 0..k {
            let pick = (0..m)
                .filter(|&j| !used[j])
                .map(|j| {
                    evaluated += 1;
                    let (lo, hi) = tracker.extremes_with(j);
                    let key = match mode {
                        OracleMode::MaximizeSigmaMin => -lo,
                        OracleMode::MinimizeCond => {
                            if lo > 1e-18 * hi.max(1e-300) {
                                (hi / lo).sqrt()
                            } else {
                                f64::INFINITY
                            }
                        }
                    };
                    (j, key, -lo)
                })
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.2.total_cmp(&b.2)).then(a.0.cmp(&b.0)))
                .expect("k <= m");
            tracker.push(pick.0);
            used[pick.0] = true;
        }
        let mut idx = tracker.selected().to_vec();
        idx.sort_unstable();
        let v = subset_objective(&work, &idx, mode);
        (idx, v)
    };

    let chosen: Vec<Vec<f64>> = subset.iter().map(|&j| system[j].clone()).collect();
    Ok(OracleResult {
        certificate: system_certificate(&chosen)?,
        subset,
        objective,
        exhaustive,
        evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{equal_norm_split, random_tight_frame};
    use crate::matrix::unit_vector;
    use crate::rng::{gaussian_vector, unit_sphere};
    use proptest::prelude::*;

    fn onb(n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| unit_vector(n, i)).collect()
    }

    #[test]
    fn bordered_eigenvalues_match_direct_solve() {
        let mut rng = substream(4, 0);
        let sys: Vec<Vec<f64>> = (0..6).map(|_| gaussian_vector(&mut rng, 5)).collect();
        let mut t = GramTracker::new(&sys);
        for j in 0..4 {
            t.push(j);
        }
        let (lo, hi) = t.extremes_with(4);
        let sel: Vec<Vec<f64>> = sys[..5].to_vec();
        let s = thin_svd(&DenseMatrix::from_columns(&sel).unwrap()).singular_values;
        assert!((lo - s[4] * s[4]).abs() < 1e-10);
        assert!((hi - s[0] * s[0]).abs() < 1e-10);
    }

    #[test]
    fn kt_examples() {
        let n = 5;
        let r = kt_select(&onb(n), 4.0 / n as f64, 4, 1).unwrap();
        assert_eq!(r.nu.len(), 1);
        assert!(r.achieved_hilbertian <= r.k_scale + 1e-12);

        let err = kt_select(&[vec![2.0, 0.0]], 1.0, 1, 0).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(kt_select(&onb(3), 0.1, 1, 0).is_err());
    }

    #[test]
    fn kt_duplicated_vector_matches_brute_force() {
        for m in 8..=12 {
            let sys: Vec<Vec<f64>> = (0..m).map(|_| vec![1.0 / (m as f64).sqrt()]).collect();
            let r = kt_select(&sys, 0.5, 8, 3).unwrap();
            let size = (m as f64 / 8.0).ceil() as usize;
            assert_eq!(r.nu.len(), size);
            // brute force over subsets of that size: σ_max is √(|ν|/m) for all
            let mut best = f64::INFINITY;
            for mask in 0u32..(1 << m) {
                if mask.count_ones() as usize == size {
                    best = best.min((size as f64 / m as f64).sqrt());
                }
            }
            assert!((r.achieved_hilbertian - r.k_scale * best).abs() < 1e-12);
        }
    }

    #[test]
    fn kt_on_split_tight_frames_is_bounded() {
        let mut good = 0;
        let trials = 40;
        for seed in 0..trials {
            let d = random_tight_frame(6, 12, seed).unwrap();
            let s = equal_norm_split(&d, 48).unwrap();
            let lambda = 4.0 * 6.0 / s.len() as f64;
            let r = kt_select(s.vectors(), lambda, 8, seed).unwrap();
            assert!(r.nu.len() >= r.target_size);
            if r.achieved_hilbertian <= 8.0 {
                good += 1;
            }
        }
        assert!(good as f64 >= 0.95 * trials as f64);
    }

    #[test]
    fn bt_examples() {
        let r = bt_select(&onb(4), 1.0, BtOptions::default()).unwrap();
        assert_eq!(r.rho, vec![0, 1, 2, 3]);
        assert!((r.besselian - 1.0).abs() < 1e-12);

        let sys = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let r = bt_select(&sys, 1.0, BtOptions::default()).unwrap();
        assert!(r.rho == vec![0, 2] || r.rho == vec![1, 2]);
        assert!((r.besselian - 1.0).abs() < 1e-12);
        // exhaustive over 2^3 subsets: the largest with Besselian ≤ 1 has size 2
        let mut best = 0;
        for mask in 1u32..8 {
            let sel: Vec<Vec<f64>> = (0..3).filter(|i| mask >> i & 1 == 1).map(|i| sys[i].clone()).collect();
            if system_certificate(&sel).unwrap().besselian_k <= 1.0 + 1e-12 {
                best = best.max(sel.len());
            }
        }
        assert_eq!(best, r.rho.len());

        assert!(bt_select(&[vec![0.1, 0.0]], 0.5, BtOptions::default()).is_err());
    }

    #[test]
    fn bt_greedy_tracks_exhaustive_at_small_n() {
        for n in 3..=5 {
            for seed in 0..5 {
                let mut rng = substream(seed, 77);
                let sys: Vec<Vec<f64>> = (0..2 * n).map(|_| unit_sphere(&mut rng, n)).collect();
                let alpha = 1.0;
                let opts = BtOptions {
                    c1: 2.0,
                    ..Default::default()
                };
                let r = bt_select(&sys, alpha, opts).unwrap();
                assert!(r.besselian <= opts.c1 / alpha + 1e-9);
                assert!(r.rho.len() as f64 >= opts.c_bt * (alpha / r.hilbertian).powi(2) * (2 * n) as f64);
                let mut best = 0;
                for mask in 1u32..(1 << (2 * n)) {
                    let sel: Vec<Vec<f64>> = (0..2 * n)
                        .filter(|i| mask >> i & 1 == 1)
                        .map(|i| sys[i].clone())
                        .collect();
                    if sel.len() > best && system_certificate(&sel).unwrap().besselian_k <= opts.c1 / alpha {
                        best = sel.len();
                    }
                }
                assert!(2 * r.rho.len() >= best, "greedy {} vs exhaustive {best}", r.rho.len());
            }
        }
    }

    #[test]
    fn near_orthogonal_examples() {
        let r = near_orthogonal_select(&onb(4), 0.1, 1, 0).unwrap();
        assert_eq!(r.sigma.len(), 4);
        assert_eq!(r.gram_defect, 0.0);

        for n in 2..=4 {
            let mut sys = Vec::new();
            for i in 0..n {
                sys.push(unit_vector(n, i));
                sys.push(unit_vector(n, i));
            }
            let r = near_orthogonal_select(&sys, 0.3, 4, 9).unwrap();
            assert_eq!(r.sigma.len(), n);
            assert!(r.gram_defect < 1e-15);
            let mut dirs: Vec<usize> = r.sigma.iter().map(|j| j / 2).collect();
            dirs.dedup();
            assert_eq!(dirs.len(), n);
        }
        assert!(near_orthogonal_select(&[vec![2.0]], 0.1, 1, 0).is_err());
    }

    #[test]
    fn oracle_examples() {
        let r = greedy_oracle(&onb(4), 4, OracleMode::MinimizeCond, DEFAULT_EXHAUSTIVE_LIMIT).unwrap();
        assert_eq!(r.subset, vec![0, 1, 2, 3]);
        let sys = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let r = greedy_oracle(&sys, 2, OracleMode::MaximizeSigmaMin, DEFAULT_EXHAUSTIVE_LIMIT).unwrap();
        assert_eq!(r.subset, vec![0, 2]);
        assert!(r.exhaustive);
        assert!(greedy_oracle(&sys, 4, OracleMode::MinimizeCond, 10).is_err());
    }

    #[test]
    fn oracle_greedy_within_factor_two() {
        let mut worst: f64 = 1.0;
        for seed in 0..5 {
            let mut rng = substream(seed, 3);
            let sys: Vec<Vec<f64>> = (0..12).map(|_| gaussian_vector(&mut rng, 6)).collect();
            let ex = greedy_oracle(&sys, 6, OracleMode::MaximizeSigmaMin, DEFAULT_EXHAUSTIVE_LIMIT).unwrap();
            assert!(ex.exhaustive);
            assert_eq!(ex.evaluated, 924);
            let gr = greedy_oracle(&sys, 6, OracleMode::MaximizeSigmaMin, 0).unwrap();
            assert!(!gr.exhaustive);
            assert!(gr.objective <= ex.objective + 1e-12);
            worst = worst.max(ex.objective / gr.objective);
        }
        assert!(worst <= 2.0, "greedy/exhaustive ratio {worst}");
    }

    proptest! {
        #![proptest_config(ProptestConfig {
            rng_seed: proptest::test_runner::RngSeed::Fixed(0x6a6f686e),
            failure_persistence: None,
            ..ProptestConfig::with_cases(32)
        })]

        #[test]
        fn near_orthogonal_defect_is_below_epsilon(seed in 0u64..10_000, eps in 0.05f64..0.6) {
            let mut rng = substream(seed, 11);
            let sys: Vec<Vec<f64>> = (0..16).map(|_| unit_sphere(&mut rng, 6)).collect();
            let r = near_orthogonal_select(&sys, eps, 3, seed).unwrap();
            prop_assert!(!r.sigma.is_empty());
            let chosen: Vec<Vec<f64>> = r.sigma.iter().map(|&j| sys[j].clone()).collect();
            let s = thin_svd(&DenseMatrix::from_columns(&chosen).unwrap()).singular_values;
            let defect = (s[0] * s[0] - 1.0).max(1.0 - s.last().unwrap().powi(2));
            prop_assert!(defect < eps);
        }
    }
}
