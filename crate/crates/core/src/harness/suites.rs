//! Executable theorem suites.
//!
//! Each suite generates seeded instances whose gap behavior is known
//! exactly from the integer construction, runs the condition checkers, and
//! asserts the theorem-level relations: verdict agreement across conditions
//! (a)-(e), countable-base verdict equal to the semi-uniform Feller
//! conclusion, preservation of gap series under mixing integration, and
//! preservation of bounds and lower semi-equicontinuity under the kernel
//! pushforward.
//!
//! The theorems are proved; a suite failure means an implementation bug, so
//! every failure dumps a self-contained instance document re-runnable via
//! the CLI.

use serde::Serialize;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{
    analyze, asskern_sets_gap, default_witnesses, AnalyzeConfig, Condition, SufVerdict,
};
use crate::document;
use crate::exec;
use crate::kernel::{
    family_from_param, hat_family, push_family, JointMeasure, MeasureKernel, ParamKernel,
};
use crate::kr::{kr_distance, lsec_gap_series};
use crate::measure::{tv_distance, Measure};
use crate::regularize::ParamFunction;
use crate::series::{assess, Verdict, VerdictParams};
use crate::space::{ConvergentSequence, FiniteMetricSpace, SetRole, SpaceRef, TestSet};

use super::gen::{
    gen_instance, indicator_example_fixture, Amplitude, Construction, GeneratedInstance,
    InstanceRecipe,
};
use super::trial_seed;

/// Suite parameters. The verdict threshold defaults to the coarse
/// equivalence-suite setting (1e-3 over a window of 3).
#[derive(Debug, Clone, Copy)]
pub struct SuiteConfig {
    pub trials: usize,
    pub seed: u64,
    pub params: VerdictParams,
    pub n_steps: usize,
}

impl SuiteConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            params: VerdictParams::new(1e-3, 3),
            n_steps: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub reason: String,
    /// Self-contained instance document, re-runnable via the CLI.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub artifact: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub trials: usize,
    pub passed: usize,
    /// Trials whose construction deliberately violates the theorem
    /// hypothesis; flagged, never counted as disagreement.
    pub hypothesis_violations: usize,
    pub failures: Vec<TrialFailure>,
    pub notes: Vec<String>,
}

impl SuiteReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Aligned text table over suite reports.
pub fn summary_table(reports: &[SuiteReport]) -> String {
    let mut out = format!(
        "{:<16} {:>7} {:>7} {:>7} {:>12}\n",
        "suite", "trials", "passed", "failed", "hyp-violations"
    );
    for r in reports {
        out.push_str(&format!(
            "{:<16} {:>7} {:>7} {:>7} {:>12}\n",
            r.suite,
            r.trials,
            r.passed,
            r.failures.len(),
            r.hypothesis_violations
        ));
    }
    out
}

/// Outcome of a single suite trial; public so benchmarks can drive the
/// per-trial workload directly.
pub struct TrialOutcome {
    pub ok: bool,
    pub hypothesis_violation: bool,
    pub reason: Option<String>,
    pub artifact: Option<String>,
}

impl TrialOutcome {
    fn pass() -> Self {
        Self {
            ok: true,
            hypothesis_violation: false,
            reason: None,
            artifact: None,
        }
    }

    fn hypothesis() -> Self {
        Self {
            ok: true,
            hypothesis_violation: true,
            reason: None,
            artifact: None,
        }
    }

    fn fail(reason: String, inst: Option<&GeneratedInstance>) -> Self {
        Self {
            ok: false,
            hypothesis_violation: false,
            reason: Some(reason),
            artifact: inst.map(|i| document::instance_document(i).to_json()),
        }
    }
}

fn finish(
    suite: &str,
    trials: usize,
    outcomes: Vec<TrialOutcome>,
    mut notes: Vec<String>,
) -> SuiteReport {
    let mut passed = 0;
    let mut hypothesis_violations = 0;
    let mut failures = Vec::new();
    for (trial, o) in outcomes.into_iter().enumerate() {
        if o.ok {
            passed += 1;
        } else {
            failures.push(TrialFailure {
                trial,
                reason: o.reason.unwrap_or_else(|| "unspecified".into()),
                artifact: o.artifact,
            });
        }
        if o.hypothesis_violation {
            hypothesis_violations += 1;
        }
    }
    if hypothesis_violations > 0 {
        notes.push(format!(
            "{hypothesis_violations} trials ran the hypothesis-violating construction; \
             agreement is not asserted there"
        ));
    }
    SuiteReport {
        suite: suite.to_string(),
        trials,
        passed,
        hypothesis_violations,
        failures,
        notes,
    }
}

/// Amplitude ladder covering clearly-failing, dead-zone, and clearly-
/// vanishing regimes at the suite threshold.
fn amplitude_for(trial: usize) -> Amplitude {
    match trial % 5 {
        0 => Amplitude::new(1, 1),
        1 => Amplitude::new(1, 8),
        2 => Amplitude::new(1, 128),
        3 => Amplitude::new(1, 2048),
        _ => Amplitude::new(1, 32768),
    }
}

fn mixture_recipe(config: &SuiteConfig, trial: usize, max_side: usize) -> InstanceRecipe {
    let seed = trial_seed(config.seed, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s1 = rng.random_range(2..=max_side);
    let s2 = rng.random_range(2..=max_side);
    InstanceRecipe::new(
        seed,
        s1,
        s2,
        config.n_steps,
        Construction::TvConvergingMixture,
    )
    .with_amplitude(amplitude_for(trial))
}

/// One equivalence-suite trial; public so benchmarks can drive the exact
/// workload the suite runs.
pub fn equivalence_trial(config: &SuiteConfig, trial: usize) -> TrialOutcome {
    // every 8th trial violates the marginal-TV hypothesis on purpose
    if trial % 8 == 7 {
        return marginal_tv_only_trial(config, trial);
    }
    let inst = gen_instance(mixture_recipe(config, trial, 8));
    let witnesses = default_witnesses(inst.family.s1_space());
    let analyze_config = AnalyzeConfig {
        params: config.params,
        ..AnalyzeConfig::default()
    };
    let report = match analyze(&inst.family, &witnesses, &analyze_config) {
        Ok(r) => r,
        Err(e) => return TrialOutcome::fail(format!("analyze failed: {e}"), Some(&inst)),
    };

    // construction-exact checks
    if report.marginal_tv.gaps.iter().any(|&g| g != 0.0) {
        return TrialOutcome::fail("marginal TV gap is not exactly zero".into(), Some(&inst));
    }
    if let Some(expected) = &inst.expected_full_tv {
        if &report.full_tv.gaps != expected {
            return TrialOutcome::fail(
                "full TV gaps differ from the integer construction".into(),
                Some(&inst),
            );
        }
    }

    // identity: condition (a) with f = 1 is the marginal TV gap, entrywise
    let whole_name = {
        let s1 = inst.family.s1_space();
        let ids: Vec<&str> = (0..s1.len()).map(|i| s1.id(i)).collect();
        format!("ind{{{}}}", ids.join("+"))
    };
    let suf_one = report
        .series
        .iter()
        .find(|e| e.condition == crate::series::ConditionLabel::A && e.witness == whole_name);
    match suf_one {
        Some(e) => {
            if e.series.gaps != report.marginal_tv.gaps {
                return TrialOutcome::fail(
                    "suf_gap(1) differs from marginal_tv_gap".into(),
                    Some(&inst),
                );
            }
        }
        None => {
            return TrialOutcome::fail("whole-space indicator witness missing".into(), Some(&inst))
        }
    }

    // identity: condition (e) on an indicator equals condition (b) on the
    // indicated set, entrywise and bitwise
    for b_entry in report
        .series
        .iter()
        .filter(|e| e.condition == crate::series::ConditionLabel::B)
    {
        let e_name = format!("ind{}", b_entry.witness);
        let Some(e_entry) = report
            .series
            .iter()
            .find(|e| e.condition == crate::series::ConditionLabel::E && e.witness == e_name)
        else {
            continue;
        };
        if e_entry.series.gaps != b_entry.series.gaps {
            return TrialOutcome::fail(
                format!(
                    "lsc_gap(indicator {}) differs from wtv_gap",
                    b_entry.witness
                ),
                Some(&inst),
            );
        }
    }

    // the theorem: verdicts of (a)-(e) agree on every instance
    let verdicts: Vec<Verdict> = Condition::ALL
        .iter()
        .filter_map(|c| report.condition_verdicts.get(&c.to_string()).copied())
        .collect();
    if verdicts.len() != 5 {
        return TrialOutcome::fail("a condition produced no verdict".into(), Some(&inst));
    }
    if verdicts.windows(2).any(|w| w[0] != w[1]) {
        return TrialOutcome::fail(format!("conditions disagree: {verdicts:?}"), Some(&inst));
    }
    TrialOutcome::pass()
}

fn marginal_tv_only_trial(config: &SuiteConfig, trial: usize) -> TrialOutcome {
    let seed = trial_seed(config.seed, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s1 = rng.random_range(2..=8usize);
    let s2 = rng.random_range(2..=8usize);
    let inst = gen_instance(InstanceRecipe::new(
        seed,
        s1,
        s2,
        config.n_steps,
        Construction::MarginalTvOnly,
    ));
    let witnesses = default_witnesses(inst.family.s1_space());
    let analyze_config = AnalyzeConfig {
        params: config.params,
        ..AnalyzeConfig::default()
    };
    let report = match analyze(&inst.family, &witnesses, &analyze_config) {
        Ok(r) => r,
        Err(e) => return TrialOutcome::fail(format!("analyze failed: {e}"), Some(&inst)),
    };
    if report.marginal_tv.verdict != Verdict::NotVanishing {
        return TrialOutcome::fail(
            "hypothesis-violating construction lost its marginal gap".into(),
            Some(&inst),
        );
    }
    if report.semi_uniform_feller != Some(SufVerdict::False) {
        return TrialOutcome::fail(
            "persistent marginal gap must force a negative conclusion".into(),
            Some(&inst),
        );
    }
    // without the hypothesis, (b) can hold where (c) fails: the row gaining
    // mass has a one-sided gap only
    let one_sided_split = report.series.iter().any(|b_entry| {
        b_entry.condition == crate::series::ConditionLabel::B
            && b_entry.series.verdict == Verdict::Vanishing
            && report.series.iter().any(|c_entry| {
                c_entry.condition == crate::series::ConditionLabel::C
                    && c_entry.witness == b_entry.witness
                    && c_entry.series.verdict == Verdict::NotVanishing
            })
    });
    if !one_sided_split {
        return TrialOutcome::fail(
            "expected an open set where (b) holds and (c) fails".into(),
            Some(&inst),
        );
    }
    TrialOutcome::hypothesis()
}

/// Equivalence theorem suite: on mixture instances with exactly-zero
/// marginal gaps the per-condition verdicts must agree, with the
/// cross-condition identities holding bitwise.
pub fn equivalence_suite(config: &SuiteConfig) -> SuiteReport {
    let outcomes = exec::map_indices(config.trials, |t| equivalence_trial(config, t));
    finish("equivalence", config.trials, outcomes, Vec::new())
}

fn suf_to_verdict(s: SufVerdict) -> Verdict {
    match s {
        SufVerdict::True => Verdict::Vanishing,
        SufVerdict::False => Verdict::NotVanishing,
        SufVerdict::Inconclusive => Verdict::Inconclusive,
    }
}

fn asskern_trial(config: &SuiteConfig, trial: usize) -> TrialOutcome {
    let inst = gen_instance(mixture_recipe(config, trial, 6));
    let s1 = inst.family.s1_space().clone();
    // base = every subset of S1 (already closed under intersection)
    let sets: Vec<TestSet> = (0u32..(1u32 << s1.len()))
        .map(|mask| {
            let members = (0..s1.len()).filter(|i| mask & (1 << i) != 0).collect();
            TestSet::new(s1.clone(), members, SetRole::Open, None).unwrap()
        })
        .collect();
    let detail = match asskern_sets_gap(&inst.family, &sets, None, config.params) {
        Ok(d) => d,
        Err(e) => return TrialOutcome::fail(format!("asskern failed: {e}"), Some(&inst)),
    };
    let witnesses = default_witnesses(&s1);
    let analyze_config = AnalyzeConfig {
        params: config.params,
        ..AnalyzeConfig::default()
    };
    let report = match analyze(&inst.family, &witnesses, &analyze_config) {
        Ok(r) => r,
        Err(e) => return TrialOutcome::fail(format!("analyze failed: {e}"), Some(&inst)),
    };
    let Some(suf) = report.semi_uniform_feller else {
        return TrialOutcome::fail("no conclusion".into(), Some(&inst));
    };
    if detail.combined.verdict != suf_to_verdict(suf) {
        return TrialOutcome::fail(
            format!(
                "countable-base verdict {} disagrees with conclusion {}",
                detail.combined.verdict, suf
            ),
            Some(&inst),
        );
    }
    TrialOutcome::pass()
}

/// Countable-base theorem suite: the base verdict must equal the
/// semi-uniform Feller conclusion on every instance, and the indicator
/// fixture must reproduce the per-point base dependence: an avoiding base
/// vanishes from n = 3 on, a base with the limit on a set boundary pins the
/// gap at 1 while the kernel itself stays semi-uniform Feller.
pub fn asskern_suite(config: &SuiteConfig) -> SuiteReport {
    let mut outcomes = exec::map_indices(config.trials, |t| asskern_trial(config, t));
    let mut notes = Vec::new();

    let fixture = indicator_example_fixture(config.n_steps);
    let fixture_doc = document::indicator_fixture_document(&fixture).to_json();
    let fixture_fail = |reason: String| TrialOutcome {
        ok: false,
        hypothesis_violation: false,
        reason: Some(reason),
        artifact: Some(fixture_doc.clone()),
    };

    let avoiding = asskern_sets_gap(&fixture.family, &fixture.avoiding_base, None, config.params);
    let boundary = asskern_sets_gap(&fixture.family, &fixture.boundary_base, None, config.params);
    let fixture_outcome = (|| {
        let avoiding = match avoiding {
            Ok(d) => d,
            Err(e) => return fixture_fail(format!("fixture asskern failed: {e}")),
        };
        for (i, &g) in avoiding.combined.gaps.iter().enumerate() {
            let expect = if i + 1 >= 3 { 0.0 } else { 1.0 };
            if g != expect {
                return fixture_fail(format!(
                    "avoiding base gap at n = {} is {g}, expected {expect}",
                    i + 1
                ));
            }
        }
        if avoiding.combined.verdict != Verdict::Vanishing {
            return fixture_fail("avoiding base must vanish".into());
        }
        let boundary = match boundary {
            Ok(d) => d,
            Err(e) => return fixture_fail(format!("fixture asskern failed: {e}")),
        };
        if boundary.combined.gaps.iter().any(|&g| g != 1.0) {
            return fixture_fail("boundary base gap must be identically 1".into());
        }
        if boundary.combined.verdict != Verdict::NotVanishing {
            return fixture_fail("boundary base must fail".into());
        }
        TrialOutcome::pass()
    })();
    if fixture_outcome.ok {
        notes.push(
            "indicator fixture: boundary base fails while the kernel stays semi-uniform Feller \
             via the avoiding base (the base must depend on the limit point)"
                .into(),
        );
    }
    outcomes.push(fixture_outcome);
    finish("asskern", config.trials + 1, outcomes, notes)
}

/// Geometric grid `{2^-1, ..., 2^-(n-1), 0}` with ids `u1.. , lim`; the
/// returned sequence walks down the grid and parks at `closest` (the last
/// non-limit point) or at the limit, depending on `reach_limit`.
fn geometric_space(
    n_points: usize,
    len: usize,
    reach_limit: bool,
) -> (SpaceRef, ConvergentSequence) {
    assert!(n_points >= 2);
    let mut ids: Vec<String> = (1..n_points).map(|i| format!("u{i}")).collect();
    ids.push("lim".into());
    let mut positions: Vec<f64> = (1..n_points).map(|i| 0.5f64.powi(i as i32)).collect();
    positions.push(0.0);
    let space = FiniteMetricSpace::line(ids, &positions).expect("geometric grid is valid");
    let entries: Vec<usize> = (0..len)
        .map(|n| {
            if n + 1 < n_points {
                n
            } else if reach_limit {
                n_points - 1 // the limit point itself
            } else {
                n_points - 2 // park at the closest non-limit point
            }
        })
        .collect();
    let seq = ConvergentSequence::new(space.clone(), entries, n_points - 1)
        .expect("geometric walk is a sequence");
    (space, seq)
}

const XI_DENOM: i64 = 1 << 24;
const MIX_DENOM: i64 = 1 << 16;

fn apportion_units(rng: &mut ChaCha8Rng, cells: usize, total: i64) -> Vec<i64> {
    // largest-remainder apportionment of random raw weights
    let raw: Vec<u64> = (0..cells).map(|_| rng.random_range(1..=1000u64)).collect();
    let sum: u128 = raw.iter().map(|&r| r as u128).sum();
    let mut out = Vec::with_capacity(cells);
    let mut rem: Vec<(u128, usize)> = Vec::with_capacity(cells);
    let mut assigned = 0i64;
    for (i, &r) in raw.iter().enumerate() {
        let exact = r as u128 * total as u128;
        let floor = (exact / sum) as i64;
        out.push(floor);
        assigned += floor;
        rem.push((exact % sum, i));
    }
    rem.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut left = total - assigned;
    let mut k = 0;
    while left > 0 {
        out[rem[k % rem.len()].1] += 1;
        left -= 1;
        k += 1;
    }
    out
}

fn int_transfer(base: &[i64], target: &[i64], num: i64, den: i64) -> Vec<i64> {
    let mut w: Vec<i64> = base
        .iter()
        .zip(target)
        .map(|(&b, &t)| (t - b) * num / den)
        .collect();
    let mut imbalance: i64 = w.iter().sum();
    while imbalance != 0 {
        if imbalance > 0 {
            let i = (0..w.len())
                .filter(|&i| base[i] + w[i] >= 1)
                .max_by_key(|&i| base[i] + w[i])
                .unwrap();
            w[i] -= 1;
            imbalance -= 1;
        } else {
            let i = (0..w.len()).max_by_key(|&i| base[i] + w[i]).unwrap();
            w[i] += 1;
            imbalance += 1;
        }
    }
    w
}

struct XiInstance {
    kernel: std::sync::Arc<ParamKernel>,
    s3_seq: ConvergentSequence,
    s4_seq: Option<ConvergentSequence>,
    s3_space: SpaceRef,
    s4_space: Option<SpaceRef>,
}

/// A kernel over S3 (x S4) whose table is `P + (t/T) * (Q - P)` with the
/// integer level `t` proportional to the distance from the limit pair, so
/// continuity along the sequence is exact by construction. `persistent`
/// keeps `t` at full scale off the limit, producing a discontinuity at it.
fn build_xi(rng: &mut ChaCha8Rng, with_s4: bool, len: usize, persistent: bool) -> XiInstance {
    let s1_len = rng.random_range(2..=4usize);
    let s2_len = rng.random_range(2..=4usize);
    let s3_points = rng.random_range(3..=5usize);
    let (s3_space, s3_seq) = geometric_space(s3_points, len, !persistent);
    let (s4_space, s4_seq) = if with_s4 {
        let (sp, seq) = geometric_space(rng.random_range(2..=3usize), len, !persistent);
        (Some(sp), Some(seq))
    } else {
        (None, None)
    };

    let s1 = crate::space::FiniteMetricSpace::line_anon(
        &(0..s1_len).map(|i| i as f64 / 8.0).collect::<Vec<_>>(),
    )
    .unwrap();
    let s2 = crate::space::FiniteMetricSpace::line_anon(
        &(0..s2_len).map(|i| i as f64 / 8.0).collect::<Vec<_>>(),
    )
    .unwrap();

    let p = apportion_units(rng, s1_len * s2_len, XI_DENOM);
    let q = apportion_units(rng, s1_len * s2_len, XI_DENOM);

    let s4_len = s4_space.as_ref().map_or(1, |s| s.len());
    // level budget: distance-proportional in 64ths of the full transfer
    let scale = 64i64;
    let level = |space: &SpaceRef, idx: usize, limit: usize| -> i64 {
        if persistent {
            return if idx == limit { 0 } else { scale };
        }
        let d = space.distance(idx, limit);
        let diam = space.distance(0, limit);
        if diam == 0.0 {
            0
        } else {
            (scale as f64 * d / diam).round() as i64
        }
    };
    let mut table = Vec::with_capacity(s3_space.len() * s4_len);
    for i3 in 0..s3_space.len() {
        for i4 in 0..s4_len {
            let mut t = level(&s3_space, i3, s3_space.len() - 1);
            if let Some(s4) = &s4_space {
                t = (t + level(s4, i4, s4.len() - 1)) / 2;
            }
            let w = int_transfer(&p, &q, t, 2 * scale);
            let ints: Vec<i64> = p.iter().zip(&w).map(|(&b, &x)| b + x).collect();
            let mass: Vec<Vec<f64>> = ints
                .chunks(s2_len)
                .map(|row| row.iter().map(|&v| v as f64 / XI_DENOM as f64).collect())
                .collect();
            table.push(JointMeasure::new(s1.clone(), s2.clone(), mass).unwrap());
        }
    }
    let kernel = std::sync::Arc::new(
        ParamKernel::new(s1, s2, s3_space.clone(), s4_space.clone(), table).unwrap(),
    );
    XiInstance {
        kernel,
        s3_seq,
        s4_seq,
        s3_space,
        s4_space,
    }
}

fn integration_trial(config: &SuiteConfig, trial: usize) -> TrialOutcome {
    let seed = trial_seed(config.seed, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = 16usize;
    let persistent = trial % 10 == 9;
    let xi = build_xi(&mut rng, trial.is_multiple_of(2), len, persistent);

    let fail = |reason: String| TrialOutcome::fail(reason, None);

    // --- sufficiency device: point-mass mixing reproduces the table family
    let via_param = match family_from_param(&xi.kernel, &xi.s3_seq, xi.s4_seq.as_ref()) {
        Ok(f) => f,
        Err(e) => return fail(format!("family_from_param: {e}")),
    };
    let point_masses: Vec<Measure> = xi
        .s3_seq
        .entries()
        .iter()
        .map(|&e| Measure::dirac(xi.s3_space.clone(), e).unwrap())
        .collect();
    let limit_mass = Measure::dirac(xi.s3_space.clone(), xi.s3_seq.limit()).unwrap();
    let hat = match hat_family(
        &xi.kernel,
        &point_masses,
        &limit_mass,
        xi.s4_seq.as_ref(),
        config.params,
    ) {
        Ok(h) => h,
        Err(e) => return fail(format!("hat_family: {e}")),
    };
    for (a, b) in hat.family.joints().iter().zip(via_param.joints()) {
        if a.mass() != b.mass() {
            return fail("point-mass mixing must reproduce the table family exactly".into());
        }
    }
    if hat.family.limit().mass() != via_param.limit().mass() {
        return fail("point-mass limit differs".into());
    }

    let xi_full = crate::analysis::full_tv_gap(&via_param, config.params);

    if persistent {
        // the discontinuous kernel: gaps sit at a fixed positive level and
        // the point-mass family inherits the failure verbatim
        let level = xi_full.gaps[xi_full.gaps.len() - 1];
        if level <= 0.0 {
            return fail("persistent construction lost its gap".into());
        }
        let eps = level / 20.0;
        let (v, _) = assess(&xi_full.gaps, VerdictParams::new(eps, config.params.window));
        if v != Verdict::NotVanishing {
            return fail("persistent kernel family must not vanish".into());
        }
        let hat_full = crate::analysis::full_tv_gap(&hat.family, config.params);
        let (hv, _) = assess(
            &hat_full.gaps,
            VerdictParams::new(eps, config.params.window),
        );
        if hv != Verdict::NotVanishing {
            return fail("non-vanishing gaps must survive point-mass integration".into());
        }
        return TrialOutcome::pass();
    }

    // --- rate-1/n weak mixing stays within the computed mixture bound
    let mu_base = apportion_units(&mut rng, xi.s3_space.len(), MIX_DENOM);
    let mu_target = apportion_units(&mut rng, xi.s3_space.len(), MIX_DENOM);
    let to_measure = |ints: &[i64]| -> Measure {
        Measure::probability(
            xi.s3_space.clone(),
            ints.iter().map(|&v| v as f64 / MIX_DENOM as f64).collect(),
        )
        .unwrap()
    };
    let mu_limit = to_measure(&mu_base);
    let mus: Vec<Measure> = (1..=len)
        .map(|n| {
            let w = int_transfer(&mu_base, &mu_target, 1, n as i64);
            let ints: Vec<i64> = mu_base.iter().zip(&w).map(|(&b, &x)| b + x).collect();
            to_measure(&ints)
        })
        .collect();
    let hat_mixed = match hat_family(
        &xi.kernel,
        &mus,
        &mu_limit,
        xi.s4_seq.as_ref(),
        config.params,
    ) {
        Ok(h) => h,
        Err(e) => return fail(format!("hat_family (mixing): {e}")),
    };
    // the weak hypothesis holds at the constructed rate: kr <= 2 tv exactly
    for (n, &g) in hat_mixed.weak_hypothesis.gaps.iter().enumerate() {
        let tv = tv_distance(&mus[n], &mu_limit).unwrap();
        if g > 2.0 * tv + 1e-9 {
            return fail(format!(
                "weak gap {g} exceeds twice the constructed TV rate {tv} at n = {}",
                n + 1
            ));
        }
    }

    // bound(n) = max_s3 tv(Xi[s3, s4_n], Xi[s3, s4_lim]) + tv(mu_n, mu)
    let s4_len = xi.s4_space.as_ref().map_or(1, |s| s.len());
    let _ = s4_len;
    let hat_full = crate::analysis::full_tv_gap(&hat_mixed.family, config.params);
    let mut bound = Vec::with_capacity(len);
    #[allow(clippy::needless_range_loop)] // n indexes sequences and measures together
    for n in 0..len {
        let s4_n = xi.s4_seq.as_ref().map(|s| s.entries()[n]);
        let s4_lim = xi.s4_seq.as_ref().map(|s| s.limit());
        let mut kernel_step: f64 = 0.0;
        for s3 in 0..xi.s3_space.len() {
            let a = xi.kernel.at(s3, s4_n).unwrap();
            let b = xi.kernel.at(s3, s4_lim).unwrap();
            kernel_step = kernel_step.max(crate::measure::tv_of_slices(&a.flat(), &b.flat()));
        }
        let mix_step = tv_distance(&mus[n], &mu_limit).unwrap();
        bound.push(kernel_step + mix_step);
    }
    for (n, (&g, &b)) in hat_full.gaps.iter().zip(&bound).enumerate() {
        if g > b + 1e-12 {
            return fail(format!(
                "mixed gap {g} exceeds the mixture bound {b} at n = {}",
                n + 1
            ));
        }
    }
    // the bound vanishes along the window, and so must the verdict
    let eps = bound[len - config.params.window..]
        .iter()
        .fold(0.0f64, |a, &b| a.max(b))
        .max(1e-12);
    let (v, _) = assess(
        &hat_full.gaps,
        VerdictParams::new(eps, config.params.window),
    );
    if v != Verdict::Vanishing {
        return fail("mixed family must vanish within the mixture bound".into());
    }
    TrialOutcome::pass()
}

/// Integration-preservation suite: point-mass mixing reproduces the kernel
/// family exactly in both the vanishing and non-vanishing regimes, and
/// rate-1/n weak mixing keeps gaps under the computed mixture bound.
pub fn integration_suite(config: &SuiteConfig) -> SuiteReport {
    let outcomes = exec::map_indices(config.trials, |t| integration_trial(config, t));
    let notes = vec![
        "kernel constant in the parameter: mixing is the identity (checked in unit tests)".into(),
    ];
    finish("integration", config.trials, outcomes, notes)
}

fn dyadic_values(rng: &mut ChaCha8Rng, n: usize, denom: i64) -> Vec<f64> {
    (0..n)
        .map(|_| rng.random_range(-denom..=denom) as f64 / denom as f64)
        .collect()
}

/// L-Lipschitz projection of raw values in both variables via double
/// inf-convolution; preserves bounds and dyadic exactness (integer L,
/// dyadic grid distances).
fn project_lipschitz(raw: Vec<Vec<f64>>, s1: &SpaceRef, s2: &SpaceRef, l: u32) -> Vec<Vec<f64>> {
    let conv = |values: &[f64], space: &SpaceRef| -> Vec<f64> {
        (0..values.len())
            .map(|s| {
                values
                    .iter()
                    .enumerate()
                    .map(|(sp, &v)| v + f64::from(l) * space.distance(s, sp))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    };
    let mut rows: Vec<Vec<f64>> = raw.iter().map(|row| conv(row, s2)).collect();
    for j in 0..s2.len() {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        for (i, v) in conv(&col, s1).into_iter().enumerate() {
            rows[i][j] = v;
        }
    }
    rows
}

fn equicontinuity_trial(config: &SuiteConfig, trial: usize) -> TrialOutcome {
    let seed = trial_seed(config.seed, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fail = |reason: String| TrialOutcome::fail(reason, None);

    let len = 8usize;
    let (s1_space, s1_seq) = geometric_space(9, len, true);
    let (s3_space, s3_seq) = geometric_space(rng.random_range(3..=5usize), len, true);
    let s2_space = crate::space::FiniteMetricSpace::line_anon(
        &(0..rng.random_range(3..=5usize))
            .map(|i| i as f64 / 8.0)
            .collect::<Vec<_>>(),
    )
    .unwrap();

    let l: u32 = [1, 2, 4][trial % 3];
    let members: Vec<ParamFunction> = (0..3)
        .map(|_| {
            let raw: Vec<Vec<f64>> = (0..s1_space.len())
                .map(|_| dyadic_values(&mut rng, s2_space.len(), 1 << 10))
                .collect();
            let projected = project_lipschitz(raw, &s1_space, &s2_space, l);
            ParamFunction::new(s1_space.clone(), s2_space.clone(), projected)
                .unwrap()
                .with_bound(1.0)
                .unwrap()
        })
        .collect();

    // Q rows converge along the s3 walk at an exactly-known rate
    let constant_q = trial % 4 == 3;
    let q_base = apportion_units(&mut rng, s2_space.len(), MIX_DENOM);
    let q_target = apportion_units(&mut rng, s2_space.len(), MIX_DENOM);
    let rows: Vec<Measure> = (0..s3_space.len())
        .map(|i| {
            let d = s3_space.distance(i, s3_space.len() - 1);
            let diam = s3_space.distance(0, s3_space.len() - 1);
            let level = if constant_q || diam == 0.0 {
                0
            } else {
                (64.0 * d / diam).round() as i64
            };
            let w = int_transfer(&q_base, &q_target, level, 64);
            Measure::probability(
                s2_space.clone(),
                q_base
                    .iter()
                    .zip(&w)
                    .map(|(&b, &x)| (b + x) as f64 / MIX_DENOM as f64)
                    .collect(),
            )
            .unwrap()
        })
        .collect();
    let q = MeasureKernel::new(s2_space.clone(), s3_space.clone(), rows).unwrap();

    let pushed = match push_family(&members, &q) {
        Ok(p) => p,
        Err(e) => return fail(format!("push_family: {e}")),
    };
    // bound preservation must be exact: dyadic values times dyadic masses
    if pushed.family.uniform_bound() > 1.0 {
        return fail(format!(
            "pushed bound {} exceeds the input bound 1",
            pushed.family.uniform_bound()
        ));
    }
    for g in pushed.family.members() {
        if g.bound() > 1.0 {
            return fail("a pushed member exceeds the shared bound".into());
        }
    }

    let prod_seq = match ConvergentSequence::product(&s1_seq, &s3_seq) {
        Ok(s) => s,
        Err(e) => return fail(format!("product sequence: {e}")),
    };
    let gaps = match lsec_gap_series(&pushed.family, &prod_seq, config.params) {
        Ok(g) => g,
        Err(e) => return fail(format!("lsec gaps: {e}")),
    };

    // explicit bound: L * rho1(s1_n, s1) + min(2M tv, max(M, L) kr)(Q_n, Q)
    let m_bound = 1.0f64;
    let mut bound = Vec::with_capacity(len);
    for n in 0..len {
        let s1_step = f64::from(l) * s1_seq.distance_at(n);
        let qn = q.row(s3_seq.entries()[n]);
        let qlim = q.row(s3_seq.limit());
        let tv = tv_distance(qn, qlim).unwrap();
        let kr = match kr_distance(qn, qlim) {
            Ok(o) => o.value,
            Err(e) => return fail(format!("kr certificate: {e}")),
        };
        let q_step = (2.0 * m_bound * tv).min(m_bound.max(f64::from(l)) * kr);
        bound.push(s1_step + q_step);
    }
    for (n, (&g, &b)) in gaps.gaps.iter().zip(&bound).enumerate() {
        if g > b + 1e-12 {
            return fail(format!(
                "lsec gap {g} exceeds the bound {b} at n = {}",
                n + 1
            ));
        }
    }
    let eps = bound[len - config.params.window..]
        .iter()
        .fold(0.0f64, |a, &b| a.max(b))
        .max(1e-12);
    let (v, _) = assess(&gaps.gaps, VerdictParams::new(eps, config.params.window));
    if v != Verdict::Vanishing {
        return fail("pushed family must be lower semi-equicontinuous".into());
    }

    if constant_q {
        // with Q constant in the parameter, the pushed gap is the family's
        // own gap in the first variable
        let direct: Vec<f64> = (0..len)
            .map(|n| {
                let e1 = s1_seq.entries()[n];
                let inf = members
                    .iter()
                    .map(|f| {
                        let h = |s1: usize| -> f64 {
                            f.values()[s1]
                                .iter()
                                .zip(q.row(0).weights())
                                .map(|(a, b)| a * b)
                                .sum()
                        };
                        h(e1) - h(s1_seq.limit())
                    })
                    .fold(f64::INFINITY, f64::min);
                (-inf).max(0.0)
            })
            .collect();
        if gaps.gaps != direct {
            return fail("constant kernel must reduce to the first-variable gap".into());
        }
    }
    TrialOutcome::pass()
}

/// Equicontinuity-preservation suite: the pushforward of a shared-Lipschitz
/// bounded family through a weakly continuous kernel keeps the bound
/// exactly and is lower semi-equicontinuous within an explicit bound.
pub fn equicontinuity_suite(config: &SuiteConfig) -> SuiteReport {
    let outcomes = exec::map_indices(config.trials, |t| equicontinuity_trial(config, t));
    finish("equicontinuity", config.trials, outcomes, Vec::new())
}

/// Runs every suite with the same trial count and seed.
pub fn run_all_suites(trials: usize, seed: u64) -> Vec<SuiteReport> {
    let config = SuiteConfig::new(trials, seed);
    vec![
        equivalence_suite(&config),
        asskern_suite(&config),
        integration_suite(&config),
        equicontinuity_suite(&config),
    ]
}
