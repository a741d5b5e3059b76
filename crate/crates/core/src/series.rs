//! Gap series and the trailing-window verdict engine.
//!
//! A limit statement `gap(n) -> 0` has no finite proof; the artifact's
//! surrogate is a thresholded decision over the last `window` indices with a
//! dead band: gaps all `<= epsilon` means vanishing, all `>= 10 * epsilon`
//! means not vanishing, anything else is inconclusive. The dead band keeps
//! verdicts from flapping near the threshold.

use serde::{Deserialize, Serialize};

/// Default comparison threshold for verdicts.
pub const DEFAULT_EPSILON: f64 = 1e-6;
/// Default trailing-window length for verdicts.
pub const DEFAULT_WINDOW: usize = 3;

/// Verdict on a gap series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Vanishing,
    NotVanishing,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Vanishing => write!(f, "vanishing"),
            Verdict::NotVanishing => write!(f, "not_vanishing"),
            Verdict::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

/// Which continuity statement a series measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionLabel {
    /// Test-function gap, uniform over S2-sets.
    A,
    /// One-sided open-set gap (WTV-continuity).
    B,
    /// One-sided closed-set gap.
    C,
    /// Two-sided continuity-set gap.
    D,
    /// One-sided gap for nonnegative lower semi-continuous functions.
    E,
    /// Total variation of the S2 marginals.
    TvMarginal,
    /// Total variation of the full joints.
    TvFull,
    /// Kantorovich-Rubinshtein (weak) gap.
    Weak,
    /// Countable-base equicontinuity gap.
    AssKern,
}

impl std::fmt::Display for ConditionLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ConditionLabel::A => "a",
            ConditionLabel::B => "b",
            ConditionLabel::C => "c",
            ConditionLabel::D => "d",
            ConditionLabel::E => "e",
            ConditionLabel::TvMarginal => "tv_marginal",
            ConditionLabel::TvFull => "tv_full",
            ConditionLabel::Weak => "weak",
            ConditionLabel::AssKern => "asskern",
        };
        write!(f, "{s}")
    }
}

/// Threshold and window for judging a series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictParams {
    pub epsilon: f64,
    pub window: usize,
}

impl Default for VerdictParams {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            window: DEFAULT_WINDOW,
        }
    }
}

impl VerdictParams {
    pub fn new(epsilon: f64, window: usize) -> Self {
        Self { epsilon, window }
    }
}

/// Applies the verdict rule to raw gaps. Returns a diagnostic when the
/// series is shorter than the window.
pub fn assess(gaps: &[f64], params: VerdictParams) -> (Verdict, Option<String>) {
    let n = gaps.len();
    if n < params.window {
        return (
            Verdict::Inconclusive,
            Some(format!(
                "series length {n} is below the window {}",
                params.window
            )),
        );
    }
    let tail = &gaps[n - params.window..];
    if tail.iter().all(|&g| g <= params.epsilon) {
        (Verdict::Vanishing, None)
    } else if tail.iter().all(|&g| g >= 10.0 * params.epsilon) {
        (Verdict::NotVanishing, None)
    } else {
        (Verdict::Inconclusive, None)
    }
}

/// Per-index nonnegative gaps for one continuity condition, with the verdict
/// and the parameters it was judged under. Index `n` runs 1..N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSeries {
    pub label: ConditionLabel,
    pub gaps: Vec<f64>,
    pub verdict: Verdict,
    pub epsilon: f64,
    pub window: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl GapSeries {
    /// Judges the gaps under `params`. Gaps must be nonnegative; tiny
    /// negative rounding noise is clamped to zero.
    pub fn new(label: ConditionLabel, mut gaps: Vec<f64>, params: VerdictParams) -> Self {
        for g in &mut gaps {
            debug_assert!(*g >= -1e-12, "gap must be nonnegative, got {g}");
            if *g < 0.0 {
                *g = 0.0;
            }
        }
        let (verdict, note) = assess(&gaps, params);
        Self {
            label,
            gaps,
            verdict,
            epsilon: params.epsilon,
            window: params.window,
            note,
        }
    }

    /// Re-judges the same gaps under different parameters.
    pub fn rejudged(&self, params: VerdictParams) -> Self {
        Self::new(self.label, self.gaps.clone(), params)
    }

    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }

    /// Gap at 1-based index n.
    pub fn gap_at(&self, n: usize) -> f64 {
        self.gaps[n - 1]
    }
}
