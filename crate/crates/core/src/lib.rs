//! Continuity diagnostics for stochastic kernels on finite metric spaces.
//!
//! A stochastic kernel here is a table assigning a joint probability measure
//! on `S1 x S2` to every point of a parameter space `S3`. Along a declared
//! convergent sequence `s3^(n) -> s3` the kernel produces a family of joints
//! `P_n -> P`, and the question is *how* the family converges: in full total
//! variation, uniformly over `S2`-sets but only weakly in `S1` (semi-uniform
//! Feller), or one-sidedly on open sets (WTV-continuity).
//!
//! Everything is exact at desk scale: spaces are finite point sets with a
//! validated metric, "for every Borel set" becomes a closed-form positive /
//! negative part computation (with an exhaustive subset enumeration kept as
//! an independent oracle), and "for every sequence" becomes "for every
//! declared [`ConvergentSequence`]". Limit statements are replaced by
//! [`GapSeries`]: per-index nonnegative gaps plus a thresholded
//! trailing-window [`Verdict`].
//!
//! Module map:
//!
//! - [`space`]: finite metric spaces, convergent sequences, set declarations.
//! - [`measure`]: measures, signed vectors, Jordan decomposition, exact
//!   extrema over all subsets, total-variation distance.
//! - [`kr`]: the Kantorovich-Rubinshtein (bounded-Lipschitz) metric as a
//!   certified linear program, plus Lipschitz function families.
//! - [`regularize`]: the inf-convolution operator and the regularized
//!   families it generates.
//! - [`kernel`]: joint measures, kernel families, marginalization,
//!   integration against mixing measures, and the pushforward of function
//!   families through a kernel.
//! - [`analysis`]: the continuity conditions as gap functionals, the
//!   countable-base checker, and the verdict engine.
//! - [`harness`]: seeded instance generators and executable theorem suites.
//! - [`document`] / [`report`]: the on-disk instance and report formats used
//!   by the `sufeller` CLI.
//!
//! With the `parallel` feature (on by default) suite trials and batched gap
//! evaluations fan out over a rayon pool; the sequential fallback produces
//! bit-identical results because every trial derives its own RNG seed.

pub mod analysis;
pub mod document;
pub mod exec;
pub mod harness;
pub mod kernel;
pub mod kr;
pub mod measure;
pub mod regularize;
pub mod report;
pub mod series;
pub mod space;

mod simplex;

pub use analysis::{
    analyze, asskern_gap, closed_gap, contset_gap, full_tv_gap, lsc_gap, marginal_tv_gap, suf_gap,
    wtv_gap, AnalysisReport, AnalyzeConfig, BaseFamily, Condition, SufVerdict, WitnessSet,
};
pub use kernel::{
    family_from_param, hat_family, integrate_kernel, marginal_s1, marginal_s2, push_family,
    JointMeasure, KernelFamily, MeasureKernel, ParamKernel,
};
pub use kr::{
    kr_distance, uniform_family_gap, weak_gap_series, FunctionFamily, KrCertificate, KrOutcome,
    RealFunction,
};
pub use measure::{extreme_over_sets, jordan, tv_distance, Measure, SetExtremes, SignedVector};
pub use regularize::{inf_convolve, inf_convolve_param, regularized_family, ParamFunction};
pub use series::{ConditionLabel, GapSeries, Verdict, VerdictParams};
pub use space::{
    boundary_consistency, product_space, sequence_tail_distance, validate_space,
    ConvergentSequence, FiniteMetricSpace, SetRole, SpaceRef, TestSet,
};

/// Absolute tolerance for metric and normalization validation.
pub const VALIDATION_TOL: f64 = 1e-12;

/// Comparison tolerance used throughout double-precision arithmetic.
pub const CMP_TOL: f64 = 1e-12;

/// Maximum duality gap accepted from the Kantorovich-Rubinshtein solver.
pub const LP_CERT_TOL: f64 = 1e-9;

/// Errors surfaced by the library.
///
/// Structural diagnostics (metric axiom violations, document schema issues)
/// are reported as value-level lists, not as this type; `Error` covers the
/// cases where an operation cannot produce a result at all.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("spaces do not match: {0}")]
    SpaceMismatch(String),
    #[error("empty sequence")]
    EmptySequence,
    #[error("unknown point id {0:?}")]
    UnknownPoint(String),
    #[error("point index {index} out of range for space of {len} points")]
    PointOutOfRange { index: usize, len: usize },
    #[error("{0}")]
    InvalidValue(String),
    #[error(
        "negative function value {value} at index {index}; a nonnegative function is required"
    )]
    NegativeFunction { index: usize, value: f64 },
    #[error("linear program failed to certify: {0}")]
    SolverCertification(String),
    #[error("base family invalid: {0}")]
    InvalidBase(String),
    #[error("subset oracle refused: |S2| = {0} exceeds 16")]
    OracleTooLarge(usize),
    #[error("oracle disagreement: closed form {closed} vs enumeration {enumerated} (condition {label}, witness {witness}, n = {n})")]
    OracleMismatch {
        label: String,
        witness: String,
        n: usize,
        closed: f64,
        enumerated: f64,
    },
    #[error("missing table entry for parameter point {0:?}")]
    MissingTableEntry(String),
    #[error("kernel family has no parameter provenance; cannot resolve a per-limit base")]
    NoProvenance,
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
