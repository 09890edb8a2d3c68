//! Extraction of large, well-conditioned subsystems `(T x_j)_{j ∈ σ}` from a
//! decomposition of the identity.

mod extract;
mod select;

pub(crate) use extract::extract_with_target;
pub use extract::{
    extract_count, extract_main, extract_trace, normalize_operator, restricted_invertibility, tau_filter,
    tau_filter_strict, TauFilter,
};
pub use select::{
    bt_select, gram_defect, greedy_oracle, kt_select, near_orthogonal_select, BtOptions, BtSelection, KtSelection,
    NearOrthogonal, OracleMode, OracleResult, DEFAULT_EXHAUSTIVE_LIMIT,
};

use serde::{Deserialize, Serialize};

use crate::decomposition::SPLIT_BAND;
use crate::error::{invalid, Result};
use crate::linalg::finite_or_null;

/// Parameters of the iterative extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionParams {
    pub epsilon: f64,
    /// Filter parameter; `ε / 3` when absent.
    pub delta: Option<f64>,
    pub split_band: (f64, f64),
    pub kt_attempts: usize,
    pub bt_attempts: usize,
    pub seed: u64,
    pub max_rounds: usize,
    /// Besselian budget `c1 / α` in the invertibility step.
    pub c1: f64,
    pub c_bt: f64,
    /// Swap search inside the filtered set after the loop, lowering the
    /// equivalence constant at fixed size.
    pub polish: bool,
}

impl ExtractionParams {
    pub fn new(epsilon: f64, seed: u64) -> Self {
        Self {
            epsilon,
            delta: None,
            split_band: SPLIT_BAND,
            kt_attempts: 8,
            bt_attempts: 4,
            seed,
            max_rounds: 256,
            c1: 1.0,
            c_bt: 0.05,
            polish: true,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(self.epsilon / 3.0)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        let d = self.delta();
        if !(d > 0.0 && d < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {d}")));
        }
        if !(self.split_band.0 < self.split_band.1) {
            return Err(invalid("split band must have low < high"));
        }
        if !(self.c1 > 0.0 && self.c_bt > 0.0) {
            return Err(invalid("c1 and c_bt must be positive"));
        }
        Ok(())
    }
}

/// One productive round of the loop (rounds adding nothing are not logged).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub sigma_size: usize,
    /// `h - |σ|` after the round.
    pub remainder: f64,
    /// `Σ_{τ∖σ} ‖P y_j‖²` over the candidates entering the split.
    pub h0: f64,
    pub candidates: usize,
    pub split_size: usize,
    pub lambda: f64,
    pub nu_size: usize,
    pub kt_hilbertian: f64,
    pub bt_alpha: f64,
    pub rho_size: usize,
    #[serde(with = "finite_or_null")]
    pub bt_besselian: f64,
    /// `max_{j ∈ σ} ‖P y_j‖` before the round: the projection kills the
    /// vectors already selected.
    pub projector_defect: f64,
}

/// Scalar-filter report for [`extract_trace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub trace: f64,
    /// `(ε/5) |trace T| / n`.
    pub floor: f64,
    /// `min_{j ∈ σ} |⟨x_j, T x_j⟩| / ‖x_j‖²`.
    pub min_ratio: f64,
    pub holds: bool,
    /// Trace vanished, so the norm filter was used instead.
    pub vacuous: bool,
}

/// A selected index set with everything measured about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionCertificate {
    /// Indices into the original (unsplit) system, ascending.
    pub sigma: Vec<usize>,
    pub dim: usize,
    /// `h = ‖T‖²_HS`.
    pub h: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// `(1 - ε) h`.
    pub size_bound: f64,
    pub target_size: usize,
    pub tau_size: usize,
    /// Fraction of the equal-norm split children passing the filter.
    pub tau_child_fraction: f64,
    pub tau_counting_bound_holds: bool,
    pub hilbertian_k: f64,
    #[serde(with = "finite_or_null")]
    pub besselian_k: f64,
    #[serde(with = "finite_or_null")]
    pub achieved_equivalence_k: f64,
    /// Equivalence constant when the loop (and any top-up) finished, before polishing.
    #[serde(with = "finite_or_null")]
    pub loop_equivalence_k: f64,
    /// `min_{j∈σ} ‖T x_j‖ / (√ε ‖T‖_HS ‖x_j‖ / √n)`.
    pub per_vector_norm_ratio: f64,
    /// Every `j ∈ σ` passes the filter `‖T x_j‖ ≥ 0.9 √δ √(h/n) ‖x_j‖`.
    pub filter_holds: bool,
    pub rounds: Vec<RoundLog>,
    pub fallback: bool,
    pub fallback_added: usize,
    pub polish_swaps: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kappa: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fitted_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<TraceReport>,
}

impl SelectionCertificate {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }
}
