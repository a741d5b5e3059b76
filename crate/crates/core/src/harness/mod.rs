//! Instance generators and executable theorem suites.
//!
//! Generators work in integer mass units over a power-of-two denominator,
//! so every weight is a dyadic rational and every downstream sum or
//! difference is exact in f64. That is what makes "the marginal gap is
//! exactly zero" and "closed-form and enumerated gaps agree to the last
//! bit" checkable statements rather than tolerances.
//!
//! Suites derive one RNG seed per trial with a documented split rule
//! ([`trial_seed`]), so parallel and sequential runs produce bit-identical
//! reports.

mod gen;
mod suites;

pub use gen::{
    gen_equivalence_instance, gen_instance, indicator_example_fixture, Amplitude, Construction,
    GeneratedInstance, IndicatorFixture, InstanceRecipe, JOINT_DENOM,
};
pub use suites::{
    asskern_suite, equicontinuity_suite, equivalence_suite, equivalence_trial, integration_suite,
    run_all_suites, summary_table, SuiteConfig, SuiteReport, TrialFailure, TrialOutcome,
};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Split rule for per-trial seeds: the suite seed XOR a splitmix64 hash of
/// the (1-based) trial index. Trials are independent of execution order.
pub fn trial_seed(suite_seed: u64, trial: usize) -> u64 {
    suite_seed ^ splitmix64(trial as u64 + 1)
}
