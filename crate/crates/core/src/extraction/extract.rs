//! The filter, the iterative σ-growth loop, and its variants.

use super::select::{bt_select, kt_select, BtOptions, GramTracker};
use super::{ExtractionParams, RoundLog, SelectionCertificate, TraceReport};
use crate::decomposition::{equal_norm_plan, equal_norm_plan_with, Decomposition};
use crate::error::{invalid, Error, Result};
use crate::linalg::{complement_projector, op_norm, system_certificate, thin_svd};
use crate::matrix::{dot, norm2, scale, DenseMatrix};

/// Result of [`tau_filter`].
#[derive(Debug, Clone, PartialEq)]
pub struct TauFilter {
    pub indices: Vec<usize>,
    pub mask: Vec<bool>,
    /// `0.9 √δ √(h/n)`: `j ∈ τ` iff `‖T x_j‖ ≥ factor · ‖x_j‖`.
    pub factor: f64,
    /// Whether `‖T x_j‖ ∈ [0.9, 1.1] √(h/m)` already holds for the given system.
    pub in_band: bool,
    /// Children of the equal-norm split of `(T x_j)` (zero images left out).
    pub child_count: usize,
    pub child_in_tau: usize,
    /// `child_in_tau ≥ (1 - δ) child_count`.
    pub counting_bound_holds: bool,
}

fn check_operator(decomp: &Decomposition, t: &DenseMatrix) -> Result<()> {
    if t.cols() != decomp.dim() {
        return Err(Error::DimensionMismatch {
            expected: decomp.dim(),
            got: t.cols(),
        });
    }
    Ok(())
}

fn images(decomp: &Decomposition, t: &DenseMatrix) -> Result<Vec<Vec<f64>>> {
    decomp.vectors().iter().map(|x| t.matvec(x)).collect()
}

/// `τ = {j : ‖T x_j‖ ≥ 0.9 √δ √(h/n) ‖x_j‖}` with `h = ‖T‖²_HS`.
///
/// The ratio `‖T x_j‖ / ‖x_j‖` is invariant under splitting, so the filter is
/// evaluated on the given system; the counting bound `|τ| ≥ (1 - δ) M` is
/// checked on the equal-norm split of the images, where it is guaranteed.
pub fn tau_filter(decomp: &Decomposition, t: &DenseMatrix, delta: f64) -> Result<TauFilter> {
    check_operator(decomp, t)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let ys = images(decomp, t)?;
    let n = decomp.dim() as f64;
    let m = ys.len() as f64;
    let h: f64 = ys.iter().map(|y| dot(y, y)).sum();
    let factor = 0.9 * delta.sqrt() * (h / n).sqrt();
    let mask: Vec<bool> = ys
        .iter()
        .zip(decomp.vectors())
        .map(|(y, x)| norm2(y) >= factor * norm2(x) * (1.0 - 1e-12))
        .collect();
    let indices = (0..mask.len()).filter(|&j| mask[j]).collect();

    let unit = (h / m).sqrt();
    let in_band = ys.iter().all(|y| {
        let r = norm2(y);
        r >= 0.9 * unit * (1.0 - 1e-12) && r <= 1.1 * unit * (1.0 + 1e-12)
    });

    let ymax = ys.iter().map(|y| norm2(y)).fold(0.0, f64::max);
    let nonzero: Vec<usize> = (0..ys.len()).filter(|&j| norm2(&ys[j]) > 1e-9 * ymax).collect();
    let (child_count, child_in_tau) = if nonzero.is_empty() {
        (0, 0)
    } else {
        let w: Vec<f64> = nonzero.iter().map(|&j| dot(&ys[j], &ys[j])).collect();
        let plan = equal_norm_plan(&w, nonzero.len())?;
        let inside = nonzero
            .iter()
            .zip(&plan.counts)
            .filter(|(&j, _)| mask[j])
            .map(|(_, &c)| c)
            .sum();
        (plan.total(), inside)
    };
    Ok(TauFilter {
        indices,
        mask,
        factor,
        in_band,
        child_count,
        child_in_tau,
        counting_bound_holds: child_in_tau as f64 >= (1.0 - delta) * child_count as f64 - 1e-9,
    })
}

/// [`tau_filter`] that rejects systems whose images are not yet split into the
/// `[0.9, 1.1] √(h/m)` band.
pub fn tau_filter_strict(decomp: &Decomposition, t: &DenseMatrix, delta: f64) -> Result<TauFilter> {
    let tau = tau_filter(decomp, t, delta)?;
    if !tau.in_band {
        return Err(Error::Validation(
            "images are not split to the [0.9, 1.1] norm band".into(),
        ));
    }
    Ok(tau)
}

/// `t / ‖t‖` together with `‖t‖`.
pub fn normalize_operator(t: &DenseMatrix) -> Result<(DenseMatrix, f64)> {
    let norm = op_norm(t);
    if norm == 0.0 {
        return Err(Error::Validation("cannot normalize the zero operator".into()));
    }
    Ok((t.scaled(1.0 / norm), norm))
}

fn unit_or_zero(y: &[f64]) -> Vec<f64> {
    let r = norm2(y);
    if r > 0.0 {
        scale(y, 1.0 / r)
    } else {
        y.to_vec()
    }
}

/// Condition number of the normalized columns `units[idx]`.
fn normalized_cond(units: &[Vec<f64>], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    let cols: Vec<Vec<f64>> = idx.iter().map(|&j| units[j].clone()).collect();
    if cols.len() > cols[0].len() {
        return f64::INFINITY;
    }
    let s = thin_svd(&DenseMatrix::from_columns(&cols).expect("common length")).singular_values;
    let lo = *s.last().expect("nonempty");
    if lo <= 1e-9 * s[0] {
        f64::INFINITY
    } else {
        s[0] / lo
    }
}

struct LoopOutcome {
    sigma: Vec<usize>,
    rounds: Vec<RoundLog>,
    fallback: bool,
    fallback_added: usize,
    loop_equivalence: f64,
    polish_swaps: usize,
}

fn round_seed(seed: u64, round: usize) -> u64 {
    seed ^ (round as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// The iterative growth of σ inside `allowed`, then top-up and polish.
fn grow(ys: &[Vec<f64>], h: f64, target: usize, allowed: &[bool], params: &ExtractionParams) -> Result<LoopOutcome> {
    let m = ys.len();
    let rows = ys.first().map_or(0, |y| y.len());
    let alpha = 0.9 * params.delta().sqrt();
    let ymax = ys.iter().map(|y| norm2(y)).fold(0.0, f64::max);
    let usable: Vec<bool> = ys.iter().map(|y| norm2(y) > 1e-9 * ymax).collect();
    let units: Vec<Vec<f64>> = ys.iter().map(|y| unit_or_zero(y)).collect();

    let mut sigma: Vec<usize> = Vec::new();
    let mut in_sigma = vec![false; m];
    let mut rounds = Vec::new();

    for round in 0..params.max_rounds {
        if sigma.len() >= target {
            break;
        }
        let selected: Vec<Vec<f64>> = sigma.iter().map(|&j| ys[j].clone()).collect();
        let p = complement_projector(&selected, rows);
        let projector_defect = selected
            .iter()
            .map(|y| norm2(&p.matvec(y).expect("square")))
            .fold(0.0, f64::max);

        let mut cands: Vec<(usize, Vec<f64>, f64)> = (0..m)
            .filter(|&j| allowed[j] && usable[j] && !in_sigma[j])
            .filter_map(|j| {
                let py = p.matvec(&ys[j]).expect("square");
                let w = dot(&py, &py);
                (w > (1e-9 * norm2(&ys[j])).powi(2)).then_some((j, py, w))
            })
            .collect();
        if cands.is_empty() {
            break;
        }
        // Candidates far below the mean weight would blow up the split size.
        let mean = cands.iter().map(|c| c.2).sum::<f64>() / cands.len() as f64;
        cands.retain(|c| c.2 >= 0.05 * mean);
        let weights: Vec<f64> = cands.iter().map(|c| c.2).collect();
        let h0: f64 = weights.iter().sum();
        let want = cands.len().max((4.0 * h).ceil() as usize);
        let plan = equal_norm_plan_with(&weights, want, params.split_band)?;

        let mut child_parent = Vec::new();
        let mut children = Vec::new();
        let mut projected = Vec::new();
        for ((j, py, _), &c) in cands.iter().zip(&plan.counts) {
            let s = 1.0 / (c as f64).sqrt();
            for _ in 0..c {
                child_parent.push(*j);
                children.push(scale(&ys[*j], s));
                projected.push(scale(py, s));
            }
        }
        let big_m = children.len() as f64;
        let lambda = (4.0 * h / big_m).clamp(1.0 / big_m, 1.0);
        let seed = round_seed(params.seed, round);
        let kt = kt_select(&children, lambda, params.kt_attempts, seed)?;

        let lift = (big_m / h).sqrt();
        let kept: Vec<usize> = kt
            .nu
            .iter()
            .copied()
            .filter(|&c| norm2(&projected[c]) * lift >= alpha)
            .collect();
        if kept.is_empty() {
            break;
        }
        let zs: Vec<Vec<f64>> = kept.iter().map(|&c| scale(&projected[c], lift)).collect();
        let bt = bt_select(
            &zs,
            alpha,
            BtOptions {
                c1: params.c1,
                c_bt: params.c_bt,
                attempts: params.bt_attempts,
                seed,
                max_size: Some(target - sigma.len()),
            },
        )?;

        let mut rho = Vec::new();
        for &r in &bt.rho {
            let j = child_parent[kept[r]];
            if !in_sigma[j] {
                in_sigma[j] = true;
                rho.push(j);
            }
        }
        if rho.is_empty() {
            break;
        }
        sigma.extend(&rho);
        rounds.push(RoundLog {
            round,
            sigma_size: sigma.len(),
            remainder: h - sigma.len() as f64,
            h0,
            candidates: cands.len(),
            split_size: children.len(),
            lambda,
            nu_size: kt.nu.len(),
            kt_hilbertian: kt.achieved_hilbertian,
            bt_alpha: alpha,
            rho_size: rho.len(),
            bt_besselian: bt.besselian,
            projector_defect,
        });
    }

    // Top-up: allowed indices first, then anything with a nonzero image.
    let mut fallback_added = 0;
    if sigma.len() < target {
        let mut tracker = GramTracker::new(&units);
        for &j in &sigma {
            tracker.push(j);
        }
        for stage in 0..2 {
            while sigma.len() < target {
                let pick = (0..m)
                    .filter(|&j| usable[j] && !in_sigma[j] && (stage == 1 || allowed[j]))
                    .filter_map(|j| {
                        let (lo, hi) = tracker.extremes_with(j);
                        (lo > 1e-12 * hi).then(|| (j, hi / lo))
                    })
                    .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                let Some((j, _)) = pick else { break };
                tracker.push(j);
                in_sigma[j] = true;
                sigma.push(j);
                fallback_added += 1;
            }
        }
    }
    let loop_equivalence = normalized_cond(&units, &sigma);

    let mut polish_swaps = 0;
    let mut current = loop_equivalence;
    if params.polish && !sigma.is_empty() && current.is_finite() {
        let k = sigma.len();
        let budget = (3e8 / (6.0 * rows as f64 * (k * k) as f64 + 1.0)).max(64.0) as usize;
        let pool: Vec<usize> = (0..m).filter(|&j| allowed[j] && usable[j]).collect();
        let mut evals = 0;
        'passes: loop {
            let mut improved = false;
            for pos in 0..k {
                for &j in &pool {
                    if in_sigma[j] {
                        continue;
                    }
                    if evals >= budget {
                        break 'passes;
                    }
                    let old = sigma[pos];
                    sigma[pos] = j;
                    let c = normalized_cond(&units, &sigma);
                    evals += 1;
                    if c < current * (1.0 - 1e-9) {
                        in_sigma[old] = false;
                        in_sigma[j] = true;
                        current = c;
                        polish_swaps += 1;
                        improved = true;
                    } else {
                        sigma[pos] = old;
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }

    Ok(LoopOutcome {
        sigma,
        rounds,
        fallback: fallback_added > 0,
        fallback_added,
        loop_equivalence,
        polish_swaps,
    })
}

fn target_size(h: f64, epsilon: f64) -> usize {
    ((1.0 - epsilon) * h - 1e-9).ceil().max(0.0) as usize
}

struct Prepared {
    ys: Vec<Vec<f64>>,
    h: f64,
    tau: TauFilter,
}

fn prepare(decomp: &Decomposition, t: &DenseMatrix, params: &ExtractionParams) -> Result<Prepared> {
    params.check()?;
    check_operator(decomp, t)?;
    let norm = op_norm(t);
    if norm > 1.0 + 1e-9 {
        return Err(Error::OperatorNorm { norm });
    }
    let ys = images(decomp, t)?;
    let h = t.frobenius_norm().powi(2);
    let tau = tau_filter(decomp, t, params.delta())?;
    Ok(Prepared { ys, h, tau })
}

fn certify(
    decomp: &Decomposition,
    prep: &Prepared,
    params: &ExtractionParams,
    target: usize,
    outcome: LoopOutcome,
) -> Result<SelectionCertificate> {
    let mut sigma = outcome.sigma;
    sigma.sort_unstable();
    let n = decomp.dim();
    let eps = params.epsilon;
    let chosen: Vec<Vec<f64>> = sigma.iter().map(|&j| prep.ys[j].clone()).collect();
    let (hilbertian_k, besselian_k, achieved) = if chosen.is_empty() {
        (0.0, 0.0, 1.0)
    } else {
        let c = system_certificate(&chosen)?;
        (c.hilbertian_k, c.besselian_k, c.equivalence_k)
    };
    let scale_ratio = (eps * prep.h / n as f64).sqrt();
    let per_vector_norm_ratio = sigma
        .iter()
        .map(|&j| norm2(&prep.ys[j]) / (scale_ratio * norm2(&decomp.vectors()[j])))
        .fold(f64::INFINITY, f64::min);
    let tau = &prep.tau;
    Ok(SelectionCertificate {
        filter_holds: sigma.iter().all(|&j| tau.mask[j]),
        sigma,
        dim: n,
        h: prep.h,
        epsilon: eps,
        delta: params.delta(),
        size_bound: (1.0 - eps) * prep.h,
        target_size: target,
        tau_size: tau.indices.len(),
        tau_child_fraction: if tau.child_count == 0 {
            1.0
        } else {
            tau.child_in_tau as f64 / tau.child_count as f64
        },
        tau_counting_bound_holds: tau.counting_bound_holds,
        hilbertian_k,
        besselian_k,
        achieved_equivalence_k: achieved,
        loop_equivalence_k: outcome.loop_equivalence,
        per_vector_norm_ratio: if per_vector_norm_ratio.is_finite() {
            per_vector_norm_ratio
        } else {
            0.0
        },
        rounds: outcome.rounds,
        fallback: outcome.fallback,
        fallback_added: outcome.fallback_added,
        polish_swaps: outcome.polish_swaps,
        kappa: None,
        fitted_c: None,
        trace: None,
    })
}

/// Selects `σ` with `|σ| ≥ ⌈(1 - ε) ‖T‖²_HS⌉` such that `(T x_j)_{j∈σ}` is
/// well conditioned and every `j ∈ σ` passes the norm filter.
///
/// Each round projects onto the orthogonal complement of the images already
/// chosen, splits the remaining filtered images to nearly equal projected
/// norms, restricts to a subset with small Hilbertian constant, then extracts
/// a Besselian subset from the projected, rescaled vectors and maps the
/// children back to their parents. If the rounds stall before the target size,
/// a greedy top-up finishes the job and the certificate says so.
pub fn extract_main(
    decomp: &Decomposition,
    t: &DenseMatrix,
    params: &ExtractionParams,
) -> Result<SelectionCertificate> {
    let h = t.frobenius_norm().powi(2);
    extract_with_target(decomp, t, params, target_size(h, params.epsilon))
}

/// [`extract_main`] with an explicit size target.
pub(crate) fn extract_with_target(
    decomp: &Decomposition,
    t: &DenseMatrix,
    params: &ExtractionParams,
    target: usize,
) -> Result<SelectionCertificate> {
    let prep = prepare(decomp, t, params)?;
    let outcome = grow(&prep.ys, prep.h, target, &prep.tau.mask, params)?;
    certify(decomp, &prep, params, target, outcome)
}

/// Exactly `κ` indices with `‖T x_j‖ ≥ c √((h - κ)/n) ‖x_j‖`, for integer `κ < h`.
///
/// Runs [`extract_main`] with `ε = 1 - κ/h` and trims the result back to `κ`
/// by repeatedly dropping the index whose removal leaves the best-conditioned
/// system. The constant `c` actually achieved is reported as `fitted_c`.
pub fn extract_count(
    decomp: &Decomposition,
    t: &DenseMatrix,
    kappa: usize,
    params: &ExtractionParams,
) -> Result<SelectionCertificate> {
    check_operator(decomp, t)?;
    let h = t.frobenius_norm().powi(2);
    if kappa == 0 {
        return Err(invalid("kappa must be positive"));
    }
    if kappa as f64 >= h - 1e-12 {
        return Err(Error::Validation(format!("kappa = {kappa} must be below h = {h:.6}")));
    }
    let mut p = params.clone();
    p.epsilon = 1.0 - kappa as f64 / h;
    p.delta = None;
    let prep = prepare(decomp, t, &p)?;
    let mut outcome = grow(&prep.ys, prep.h, kappa, &prep.tau.mask, &p)?;

    let units: Vec<Vec<f64>> = prep.ys.iter().map(|y| unit_or_zero(y)).collect();
    while outcome.sigma.len() > kappa {
        let drop = (0..outcome.sigma.len())
            .map(|pos| {
                let rest: Vec<usize> = outcome
                    .sigma
                    .iter()
                    .enumerate()
                    .filter(|&(q, _)| q != pos)
                    .map(|(_, &j)| j)
                    .collect();
                (pos, normalized_cond(&units, &rest))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("nonempty")
            .0;
        outcome.sigma.remove(drop);
    }

    let mut cert = certify(decomp, &prep, &p, kappa, outcome)?;
    let floor = ((h - kappa as f64) / decomp.dim() as f64).sqrt();
    cert.fitted_c = Some(
        cert.sigma
            .iter()
            .map(|&j| norm2(&prep.ys[j]) / (floor * norm2(&decomp.vectors()[j])))
            .fold(f64::INFINITY, f64::min),
    );
    cert.kappa = Some(kappa);
    Ok(cert)
}

/// [`extract_main`] with the scalar filter
/// `|⟨x_j, T x_j⟩| ≥ (ε/5) (|trace T| / n) ‖x_j‖²` in place of the norm filter.
/// A vanishing trace makes that filter vacuous; the norm filter is then used
/// and the report is flagged.
pub fn extract_trace(
    decomp: &Decomposition,
    t: &DenseMatrix,
    params: &ExtractionParams,
) -> Result<SelectionCertificate> {
    let prep = prepare(decomp, t, params)?;
    if !t.is_square() {
        return Err(Error::NotSquare {
            rows: t.rows(),
            cols: t.cols(),
        });
    }
    let n = decomp.dim() as f64;
    let trace = t.trace();
    let xs = decomp.vectors();
    let ratio = |j: usize| dot(&xs[j], &prep.ys[j]).abs() / dot(&xs[j], &xs[j]);
    let target = target_size(prep.h, params.epsilon);

    let vacuous = trace.abs() <= 1e-12 * prep.h.sqrt().max(1.0) * n;
    let floor = params.epsilon / 5.0 * trace.abs() / n;
    let allowed: Vec<bool> = if vacuous {
        prep.tau.mask.clone()
    } else {
        (0..xs.len()).map(|j| ratio(j) >= floor * (1.0 - 1e-12)).collect()
    };
    let outcome = grow(&prep.ys, prep.h, target, &allowed, params)?;
    let mut cert = certify(decomp, &prep, params, target, outcome)?;
    let min_ratio = cert.sigma.iter().map(|&j| ratio(j)).fold(f64::INFINITY, f64::min);
    let min_ratio = if min_ratio.is_finite() { min_ratio } else { 0.0 };
    cert.trace = Some(TraceReport {
        trace,
        floor: if vacuous { 0.0 } else { floor },
        min_ratio,
        holds: vacuous || min_ratio >= floor * (1.0 - 1e-12),
        vacuous,
    });
    Ok(cert)
}

/// [`extract_main`] on the coordinate decomposition: columns `T e_j`.
pub fn restricted_invertibility(
    t: &DenseMatrix,
    epsilon: f64,
    params: &ExtractionParams,
) -> Result<SelectionCertificate> {
    let mut p = params.clone();
    p.epsilon = epsilon;
    extract_main(&Decomposition::coordinate(t.cols()), t, &p)
}
