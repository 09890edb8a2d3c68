//! l∞-cube structure inside polytope spaces: Rademacher and Gaussian averages,
//! Talagrand-type selection with the 1/2-domination certificate, and the
//! contact-point embedding of `l_∞^m` into a projection of the space.

use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dvoretzky_rogers::dr_select;
use crate::error::{invalid, Error, Result};
use crate::extraction::ExtractionParams;
use crate::john::{JohnResult, PolytopeSpace};
use crate::linalg::{orthonormal_basis, projection_rank, projector_onto, thin_svd};
use crate::matrix::{dot, norm_inf, unit_vector, DenseMatrix};
use crate::rng::{gaussian_vector, permutation, streams, substream};

/// Exact enumeration is used up to this many vectors.
pub const EXACT_SIGN_LIMIT: usize = 20;

/// A Monte Carlo (or exact) estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    /// Number of samples, or of sign patterns when `exact`.
    pub samples: usize,
    pub exact: bool,
}

fn directions_matrix(space: &PolytopeSpace) -> DenseMatrix {
    DenseMatrix::from_rows(space.directions()).expect("directions share a dimension")
}

/// Columns `(⟨u_i, x_j⟩)_i`, one per vector.
fn projections(space: &PolytopeSpace, vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = directions_matrix(space);
    vectors.iter().map(|x| d.matvec(x)).collect()
}

fn sample_stats(values: &[f64]) -> (f64, f64) {
    let t = values.len() as f64;
    let mean = values.iter().sum::<f64>() / t;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1.0);
    (mean, (var / t).sqrt())
}

/// Sum and maximum of `max_i |Σ_j ε_j cols[j][i]|` over all sign patterns
/// with `ε_0 = +1` (the other half is symmetric). Patterns are walked in Gray
/// order inside fixed-prefix chunks, so the result does not depend on the
/// number of worker threads.
fn sign_sweep(cols: &[Vec<f64>], rows: usize) -> (f64, f64, usize) {
    let m = cols.len();
    if m == 0 {
        return (0.0, 0.0, 1);
    }
    let free = m - 1;
    let fixed = free.min(6);
    let low = free - fixed;
    let chunk = |prefix: usize| -> (f64, f64) {
        let mut signs = vec![1.0; m];
        for b in 0..fixed {
            if prefix >> b & 1 == 1 {
                signs[1 + b] = -1.0;
            }
        }
        let mut s = vec![0.0; rows];
        for (c, &e) in cols.iter().zip(&signs) {
            for (si, ci) in s.iter_mut().zip(c) {
                *si += e * ci;
            }
        }
        let mut sum = norm_inf(&s);
        let mut max = sum;
        for t in 1..(1usize << low) {
            let j = 1 + fixed + t.trailing_zeros() as usize;
            signs[j] = -signs[j];
            let f = 2.0 * signs[j];
            for (si, ci) in s.iter_mut().zip(&cols[j]) {
                *si += f * ci;
            }
            let v = norm_inf(&s);
            sum += v;
            max = max.max(v);
        }
        (sum, max)
    };
    let parts: Vec<(f64, f64)> = (0..1usize << fixed).into_par_iter().map(chunk).collect();
    let sum = parts.iter().map(|p| p.0).sum();
    let max = parts.iter().map(|p| p.1).fold(0.0, f64::max);
    (sum, max, 1 << free)
}

/// `E ‖Σ ε_j x_j‖_X`: exact by sign enumeration when there are at most
/// [`EXACT_SIGN_LIMIT`] vectors, Monte Carlo otherwise.
pub fn rademacher_average(vectors: &[Vec<f64>], space: &PolytopeSpace, trials: usize, seed: u64) -> Result<Estimate> {
    if vectors.len() <= EXACT_SIGN_LIMIT {
        let cols = projections(space, vectors)?;
        let (sum, _, count) = sign_sweep(&cols, space.directions().len());
        return Ok(Estimate {
            mean: sum / count as f64,
            stderr: 0.0,
            samples: count,
            exact: true,
        });
    }
    rademacher_mc(vectors, space, trials, seed)
}

/// Monte Carlo estimate of `E ‖Σ ε_j x_j‖_X`; trial `t` draws its signs from
/// its own substream.
pub fn rademacher_mc(vectors: &[Vec<f64>], space: &PolytopeSpace, trials: usize, seed: u64) -> Result<Estimate> {
    if trials < 100 {
        return Err(invalid(format!("need at least 100 trials, got {trials}")));
    }
    let cols = projections(space, vectors)?;
    let rows = space.directions().len();
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, streams::RADEMACHER + t as u64);
            let mut s = vec![0.0; rows];
            for c in &cols {
                let e = if rng.random::<bool>() { 1.0 } else { -1.0 };
                for (si, ci) in s.iter_mut().zip(c) {
                    *si += e * ci;
                }
            }
            norm_inf(&s)
        })
        .collect();
    let (mean, stderr) = sample_stats(&values);
    Ok(Estimate {
        mean,
        stderr,
        samples: trials,
        exact: false,
    })
}

/// `sup { Σ_j |x*(x_j)| : x* ∈ B(X*) }`, attained at one of the `±u_i`.
pub fn omega(vectors: &[Vec<f64>], space: &PolytopeSpace) -> Result<f64> {
    let cols = projections(space, vectors)?;
    Ok((0..space.directions().len())
        .map(|i| cols.iter().map(|c| c[i].abs()).sum::<f64>())
        .fold(0.0, f64::max))
}

/// `ℓ(u) = (E ‖u g‖_X²)^{1/2}` for standard Gaussian `g`; the standard error of
/// the root comes from the delta method.
pub fn ell_norm(u: &DenseMatrix, space: &PolytopeSpace, trials: usize, seed: u64) -> Result<Estimate> {
    if trials < 1000 {
        return Err(invalid(format!("need at least 1000 trials, got {trials}")));
    }
    if u.rows() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            got: u.rows(),
        });
    }
    let du = directions_matrix(space).matmul(u)?;
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, streams::GAUSSIAN_NORM + t as u64);
            let g = gaussian_vector(&mut rng, u.cols());
            norm_inf(&du.matvec(&g).expect("shape")).powi(2)
        })
        .collect();
    let (mean, se) = sample_stats(&values);
    let ell = mean.sqrt();
    Ok(Estimate {
        mean: ell,
        stderr: if ell > 0.0 { se / (2.0 * ell) } else { 0.0 },
        samples: trials,
        exact: false,
    })
}

/// Knobs of [`talagrand_select`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TalagrandParams {
    /// Size target `c_tal m / ω`, monitored only.
    pub c_tal: f64,
    /// Random-order greedy passes on top of the cost-ordered one.
    pub restarts: usize,
    /// Gaussian coefficient vectors (and random sign vertices, when the
    /// vertices are too many to list) used by the certificate.
    pub samples: usize,
    /// Monte Carlo trials for `M` when enumeration is too large.
    pub trials: usize,
    pub seed: u64,
}

impl TalagrandParams {
    pub fn new(seed: u64) -> Self {
        Self {
            c_tal: 0.25,
            restarts: 8,
            samples: 1000,
            trials: 2000,
            seed,
        }
    }
}

/// A dominated subset and the inequalities checked on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TalagrandResult {
    pub sigma: Vec<usize>,
    /// The functional `x_j*` used for each input vector.
    pub functionals: Vec<Vec<f64>>,
    /// `max_{i∈σ} Σ_{j∈σ∖{i}} |x_i*(x_j)|`.
    pub domination_margin: f64,
    /// `M = E ‖Σ_j ε_j x_j‖_X` over the whole input family.
    pub m_estimate: Estimate,
    pub omega: f64,
    pub target_size: f64,
    pub size_met: bool,
    pub vertices_checked: usize,
    pub vertices_exhaustive: bool,
    pub gaussian_checked: usize,
    /// Smallest `‖Σ a_j x_j‖_X / max|a_j|` seen.
    pub lower_ratio: f64,
    pub lower_violations: usize,
    /// Largest `‖Σ a_j x_j‖_X / max|a_j|` seen, against `4M`.
    pub upper_ratio: f64,
    pub upper_bound: f64,
    pub upper_violations: usize,
}

fn dominated_greedy(a: &[Vec<f64>], order: Option<&[usize]>) -> Vec<usize> {
    let m = a.len();
    let mut sigma: Vec<usize> = Vec::new();
    let mut load: Vec<f64> = vec![0.0; m];
    let mut used = vec![false; m];
    let fits = |c: usize, sigma: &[usize], load: &[f64]| -> Option<f64> {
        let own: f64 = sigma.iter().map(|&j| a[c][j]).sum();
        if own > 0.5 {
            return None;
        }
        let mut worst = own;
        for &i in sigma {
            let l = load[i] + a[i][c];
            if l > 0.5 {
                return None;
            }
            worst = worst.max(l);
        }
        Some(worst)
    };
    loop {
        let pick = match order {
            Some(ord) => ord
                .iter()
                .copied()
                .find(|&c| !used[c] && fits(c, &sigma, &load).is_some()),
            None => (0..m)
                .filter(|&c| !used[c])
                .filter_map(|c| fits(c, &sigma, &load).map(|w| (c, w)))
                .min_by(|x, y| {
                    let cx: f64 = (0..m).map(|j| a[x.0][j] + a[j][x.0]).sum();
                    let cy: f64 = (0..m).map(|j| a[y.0][j] + a[j][y.0]).sum();
                    x.1.total_cmp(&y.1).then(cx.total_cmp(&cy)).then(x.0.cmp(&y.0))
                })
                .map(|p| p.0),
        };
        let Some(c) = pick else { break };
        for &i in &sigma {
            load[i] += a[i][c];
        }
        load[c] = sigma.iter().map(|&j| a[c][j]).sum();
        used[c] = true;
        sigma.push(c);
    }
    sigma.sort_unstable();
    sigma
}

fn margin_of(a: &[Vec<f64>], sigma: &[usize]) -> f64 {
    sigma
        .iter()
        .map(|&i| sigma.iter().filter(|&&j| j != i).map(|&j| a[i][j]).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Talagrand-type selection with the norming functionals `x_j* = ±u_i`
/// attaining `‖x_j‖_X` (lowest index on ties).
pub fn talagrand_select(
    vectors: &[Vec<f64>],
    space: &PolytopeSpace,
    params: &TalagrandParams,
) -> Result<TalagrandResult> {
    let functionals = vectors
        .iter()
        .map(|x| space.norming_functional(x).map(|f| f.1))
        .collect::<Result<Vec<_>>>()?;
    talagrand_select_with(vectors, &functionals, space, params)
}

/// As [`talagrand_select`], with given functionals. Each must be one of the
/// `±u_i` (so it has dual norm 1) and satisfy `x_j*(x_j) ≥ 1`.
pub fn talagrand_select_with(
    vectors: &[Vec<f64>],
    functionals: &[Vec<f64>],
    space: &PolytopeSpace,
    params: &TalagrandParams,
) -> Result<TalagrandResult> {
    let m = vectors.len();
    if m == 0 {
        return Err(Error::Empty("vectors"));
    }
    if functionals.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: functionals.len(),
        });
    }
    let n = space.dim();
    for (j, (x, f)) in vectors.iter().zip(functionals).enumerate() {
        if x.len() != n || f.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len().min(f.len()),
            });
        }
        let on_ball = space.directions().iter().any(|u| {
            u.iter().zip(f).all(|(a, b)| (a - b).abs() <= 1e-9) || u.iter().zip(f).all(|(a, b)| (a + b).abs() <= 1e-9)
        });
        if !on_ball {
            return Err(Error::Validation(format!(
                "functional {j} is not an extreme point of the dual ball"
            )));
        }
        if dot(f, x) < 1.0 - 1e-9 {
            return Err(Error::Validation(format!(
                "functional {j} takes value {} < 1 on its vector",
                dot(f, x)
            )));
        }
    }

    let a: Vec<Vec<f64>> = functionals
        .iter()
        .map(|f| vectors.iter().map(|x| dot(f, x).abs()).collect())
        .collect();
    let mut best = dominated_greedy(&a, None);
    for r in 0..params.restarts {
        let mut rng = substream(params.seed, streams::TALAGRAND + r as u64);
        let order = permutation(&mut rng, m);
        let cand = dominated_greedy(&a, Some(&order));
        if cand.len() > best.len() || (cand.len() == best.len() && margin_of(&a, &cand) < margin_of(&a, &best)) {
            best = cand;
        }
    }
    let sigma = best;
    let domination_margin = margin_of(&a, &sigma);

    let m_estimate = rademacher_average(vectors, space, params.trials, params.seed)?;
    let om = omega(vectors, space)?;
    let target_size = if om > 0.0 { params.c_tal * m as f64 / om } else { 0.0 };

    // certificate on the selected vectors
    let cols = projections(space, &sigma.iter().map(|&j| vectors[j].clone()).collect::<Vec<_>>())?;
    let rows = space.directions().len();
    let upper_bound = 4.0 * m_estimate.mean;
    let s = sigma.len();
    let mut lower_ratio = f64::INFINITY;
    let mut upper_ratio: f64 = 0.0;
    let mut lower_violations = 0;
    let mut upper_violations = 0;
    let mut check = |coef: &[f64]| {
        let amax = norm_inf(coef);
        let mut v = vec![0.0; rows];
        for (c, &w) in cols.iter().zip(coef) {
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi += w * ci;
            }
        }
        let x = norm_inf(&v);
        lower_ratio = lower_ratio.min(x / amax);
        upper_ratio = upper_ratio.max(x / amax);
        if x < 0.5 * amax - 1e-9 {
            lower_violations += 1;
        }
        if x > upper_bound * amax + 1e-9 {
            upper_violations += 1;
        }
    };
    let vertices_exhaustive = s <= 12;
    let mut vertices_checked = 0;
    let mut rng = substream(params.seed, streams::CERT_SAMPLES);
    if vertices_exhaustive {
        for mask in 0..1usize << (s - 1) {
            let coef: Vec<f64> = (0..s)
                .map(|j| if j > 0 && mask >> (j - 1) & 1 == 1 { -1.0 } else { 1.0 })
                .collect();
            check(&coef);
            vertices_checked += 1;
        }
    } else {
        for _ in 0..params.samples {
            let coef: Vec<f64> = (0..s).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            check(&coef);
            vertices_checked += 1;
        }
    }
    for _ in 0..params.samples {
        let g = gaussian_vector(&mut rng, s);
        let amax = norm_inf(&g);
        if amax > 0.0 {
            check(&g.iter().map(|x| x / amax).collect::<Vec<_>>());
        }
    }

    Ok(TalagrandResult {
        size_met: sigma.len() as f64 >= target_size,
        sigma,
        functionals: functionals.to_vec(),
        domination_margin,
        m_estimate,
        omega: om,
        target_size,
        vertices_checked,
        vertices_exhaustive,
        gaussian_checked: params.samples,
        lower_ratio,
        lower_violations,
        upper_ratio,
        upper_bound,
        upper_violations,
    })
}

/// Knobs of [`gt_embedding`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtParams {
    pub extraction: ExtractionParams,
    pub talagrand: TalagrandParams,
    /// Gaussian trials for `ℓ(P)`.
    pub ell_trials: usize,
    /// Random points of `Z` used to re-check both inequalities, and sign
    /// vertices sampled when `|σ|` is too large to enumerate.
    pub samples: usize,
}

impl GtParams {
    pub fn new(seed: u64) -> Self {
        Self {
            extraction: ExtractionParams::new(0.5, seed),
            talagrand: TalagrandParams::new(seed),
            ell_trials: 4000,
            samples: 1000,
        }
    }
}

/// Contacts whose projections span a copy of `l_∞^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeEmbeddingResult {
    /// Positions in `john.space.directions()`.
    pub sigma: Vec<usize>,
    pub m_dim: usize,
    pub n: usize,
    /// `rank P`.
    pub k: usize,
    /// Contacts handed on by the Dvoretzky–Rogers step.
    pub dr_contacts: Vec<usize>,
    /// `α` making `⟨u_j, z_j⟩ ≥ 1` on every DR contact.
    pub alpha: f64,
    /// `min_j ‖P u_j‖₂ / √(k/n)` over the DR contacts.
    pub fitted_norm_c: f64,
    /// Contacts `u_j`, `j ∈ σ`.
    pub contacts: Vec<Vec<f64>>,
    /// `z_j = α √(n/k) P u_j / ‖P u_j‖₂`, `j ∈ σ`.
    pub z_vectors: Vec<Vec<f64>>,
    /// `sup ‖x‖_X / max_{j∈σ} |⟨x, u_j⟩|` over `x ∈ span(z_j)`.
    pub iso_constant: f64,
    /// The supremum was taken over every vertex, so `iso_constant` is exact.
    pub iso_exact: bool,
    /// `2 ω(z_σ)`, an a priori bound for `iso_constant`.
    pub iso_upper: f64,
    pub m_estimate: Estimate,
    /// `ω` of the DR family.
    pub omega: f64,
    pub ell_p: Estimate,
    /// `√(n/k) ℓ(P)`.
    pub benchmark: f64,
    /// `iso_constant / benchmark`.
    pub fitted_iso_c: f64,
    /// `m_dim √n / k`.
    pub fitted_size_c: f64,
    /// `max_{i∈σ} Σ_{j∈σ∖{i}} |⟨u_i, z_j⟩|`.
    pub domination_margin: f64,
    pub samples: usize,
    /// Points of `Z` with `max_j |⟨x,u_j⟩| > ‖x‖_X`.
    pub first_violations: usize,
    /// Points of `Z` with `‖x‖_X > iso · max_j |⟨x,u_j⟩|`.
    pub second_violations: usize,
    pub talagrand: TalagrandResult,
}

/// Contact-point embedding of `l_∞^m` into `P X`.
pub fn gt_embedding(john: &JohnResult, p: &DenseMatrix, params: &GtParams) -> Result<CubeEmbeddingResult> {
    let n = john.dim();
    let k = projection_rank(p, 1e-9)?;
    let kappa = k.div_ceil(2).min(k.saturating_sub(1));
    if kappa == 0 {
        return Err(Error::Validation(format!("projection rank {k} is too small")));
    }
    let dr = dr_select(john, p, kappa, &params.extraction)?;
    let min_image = dr.image_norms.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = (n as f64 / k as f64).sqrt();
    let alpha = 1.0 / (scale * min_image);
    let zs: Vec<Vec<f64>> = dr
        .z_vectors
        .iter()
        .map(|z| z.iter().map(|v| alpha * scale * v).collect())
        .collect();
    let units: Vec<Vec<f64>> = dr
        .contact_indices
        .iter()
        .map(|&c| john.space.directions()[c].clone())
        .collect();

    let tal = talagrand_select_with(&zs, &units, &john.space, &params.talagrand)?;
    let sigma: Vec<usize> = tal.sigma.iter().map(|&j| dr.contact_indices[j]).collect();
    let z_sel: Vec<Vec<f64>> = tal.sigma.iter().map(|&j| zs[j].clone()).collect();
    let u_sel: Vec<Vec<f64>> = tal.sigma.iter().map(|&j| units[j].clone()).collect();
    let s = z_sel.len();

    // b_j = ⟨x, u_j⟩ parametrizes Z; x = W b with W = Z G^{-1}, G_{ji} = ⟨u_j, z_i⟩.
    let g = DenseMatrix::from_rows(&u_sel)?.matmul(&DenseMatrix::from_columns(&z_sel)?)?;
    let svd = thin_svd(&g);
    let g_inv_cols: Vec<Vec<f64>> = (0..s).map(|i| svd.solve_min_norm(&unit_vector(s, i), 1e-12)).collect();
    let w = DenseMatrix::from_columns(&z_sel)?.matmul(&DenseMatrix::from_columns(&g_inv_cols)?)?;
    let w_cols = w.columns();
    let d = directions_matrix(&john.space);
    let v_cols = projections(&john.space, &w_cols)?;
    let rows = d.rows();

    // ‖W b‖_X is convex in b, so its max over the cube max|b| ≤ 1 sits at a vertex.
    let iso_exact = s <= EXACT_SIGN_LIMIT;
    let mut iso: f64 = 1.0;
    let mut rng = substream(params.talagrand.seed, streams::COMPLEMENT);
    if iso_exact {
        iso = iso.max(sign_sweep(&v_cols, rows).1);
    } else {
        for _ in 0..params.samples {
            let b: Vec<f64> = (0..s).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            iso = iso.max(norm_inf(&d.matvec(&w.matvec(&b)?)?));
        }
    }
    let ut = DenseMatrix::from_rows(&u_sel)?;
    let z_mat = DenseMatrix::from_columns(&z_sel)?;
    let samples: Vec<(f64, f64)> = (0..params.samples)
        .map(|_| {
            let a = gaussian_vector(&mut rng, s);
            let x = z_mat.matvec(&a).expect("shape");
            (
                norm_inf(&ut.matvec(&x).expect("shape")),
                norm_inf(&d.matvec(&x).expect("shape")),
            )
        })
        .collect();
    if !iso_exact {
        iso = samples.iter().map(|(b, x)| x / b).fold(iso, f64::max);
    }
    let first_violations = samples.iter().filter(|(b, x)| *b > x * (1.0 + 1e-12) + 1e-12).count();
    let second_violations = samples
        .iter()
        .filter(|(b, x)| *x > iso * b * (1.0 + 1e-9) + 1e-12)
        .count();

    let ell_p = ell_norm(p, &john.space, params.ell_trials, params.talagrand.seed)?;
    let benchmark = scale * ell_p.mean;
    Ok(CubeEmbeddingResult {
        m_dim: s,
        n,
        k,
        dr_contacts: dr.contact_indices.clone(),
        alpha,
        fitted_norm_c: min_image * scale,
        contacts: u_sel,
        iso_constant: iso,
        iso_exact,
        iso_upper: 2.0 * omega(&z_sel, &john.space)?,
        m_estimate: tal.m_estimate,
        omega: tal.omega,
        ell_p,
        benchmark,
        fitted_iso_c: iso / benchmark,
        fitted_size_c: s as f64 * (n as f64).sqrt() / k as f64,
        domination_margin: tal.domination_margin,
        samples: params.samples,
        first_violations,
        second_violations,
        sigma,
        z_vectors: z_sel,
        talagrand: tal,
    })
}

/// `‖w‖_{X*} = max { ⟨w, x⟩ : |⟨u_i, x⟩| ≤ 1 for all i }`, by linear programming.
pub fn dual_norm(space: &PolytopeSpace, w: &[f64]) -> Result<f64> {
    let n = space.dim();
    if w.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: w.len(),
        });
    }
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<Variable> = w
        .iter()
        .map(|&c| lp.add_var(c, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    for u in space.directions() {
        let terms: Vec<(Variable, f64)> = vars.iter().copied().zip(u.iter().copied()).collect();
        lp.add_constraint(terms.as_slice(), ComparisonOp::Le, 1.0);
        lp.add_constraint(terms.as_slice(), ComparisonOp::Ge, -1.0);
    }
    let sol = lp
        .solve()
        .map_err(|e| Error::Validation(format!("dual norm LP failed: {e}")))?;
    Ok(sol.objective().max(0.0))
}

/// Norm of the orthogonal projection onto `Z = span(z_j)_{j∈σ}` as an
/// operator on `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplementationReport {
    /// `‖P_Z‖_{X→X} = max_i ‖P_Z u_i‖_{X*}` (exact, `P_Z` being symmetric).
    pub norm: f64,
    /// Largest `‖P_Z x‖_X / ‖x‖_X` over the sampled candidates; never above `norm`.
    pub sampled: f64,
    pub candidates: usize,
    pub benchmark: f64,
    pub ratio_to_benchmark: f64,
    pub iso_constant: f64,
    pub within_iso: bool,
    /// `max_j ‖P_Z u_j - u_j‖₂` over the selected contacts. When this is
    /// zero the contacts lie in `Z` and `‖P_Z‖ ≤ iso` follows directly.
    pub contact_offset: f64,
}

/// Computes `‖P_Z‖_{X→X}` exactly and, as a cross-check, samples it from
/// random points, random sign vectors, the contact directions and points
/// solving `⟨x, u_i⟩ = ±1` on random sets of `n` directions (the vertices of
/// `B_X` are among them).
pub fn complementation_check(
    result: &CubeEmbeddingResult,
    space: &PolytopeSpace,
    trials: usize,
    seed: u64,
) -> Result<ComplementationReport> {
    let n = space.dim();
    let basis = orthonormal_basis(&result.z_vectors, 1e-10);
    let pz = projector_onto(&basis, n);
    let d = directions_matrix(space);

    // ‖P_Z x‖_X = max_i |⟨P_Z u_i, x⟩|, so the operator norm is the largest dual norm.
    let norm = space
        .directions()
        .iter()
        .map(|u| dual_norm(space, &pz.matvec(u)?))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let ratio = |x: &[f64]| -> f64 {
        let den = norm_inf(&d.matvec(x).expect("shape"));
        if den <= 1e-300 {
            return 0.0;
        }
        norm_inf(&d.matvec(&pz.matvec(x).expect("shape")).expect("shape")) / den
    };
    let mut rng = substream(seed, streams::COMPLEMENT + 1);
    let mut cands: Vec<Vec<f64>> = space.directions().to_vec();
    for _ in 0..trials {
        cands.push(gaussian_vector(&mut rng, n));
        cands.push((0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect());
        let dirs = permutation(&mut rng, space.directions().len());
        if dirs.len() >= n {
            let sub = DenseMatrix::from_rows(
                &dirs[..n]
                    .iter()
                    .map(|&i| space.directions()[i].clone())
                    .collect::<Vec<_>>(),
            )?;
            let svd = thin_svd(&sub);
            if svd.rank(1e-10) == n {
                let rhs: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
                cands.push(svd.solve_min_norm(&rhs, 1e-10));
            }
        }
    }
    let candidates = cands.len();
    let sampled = cands.iter().map(|x| ratio(x)).fold(0.0, f64::max);

    let contact_offset = result
        .contacts
        .iter()
        .map(|u| {
            let pu = pz.matvec(u).expect("shape");
            crate::matrix::norm2(&pu.iter().zip(u).map(|(a, b)| a - b).collect::<Vec<_>>())
        })
        .fold(0.0, f64::max);
    Ok(ComplementationReport {
        norm,
        sampled,
        candidates,
        benchmark: result.benchmark,
        ratio_to_benchmark: norm / result.benchmark,
        iso_constant: result.iso_constant,
        within_iso: norm <= result.iso_constant * (1.0 + 1e-9),
        contact_offset,
    })
}
