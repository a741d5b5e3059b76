//! Continuity conditions as exact gap functionals, the countable-base
//! checker, and the convergence verdict engine.
//!
//! Every condition on a [`KernelFamily`] reduces to the same shape: build a
//! per-`s2` slice aggregate `d(s2)` from the difference matrix `P_n - P`,
//! then take a one- or two-sided extremum over all `S2`-subsets:
//!
//! - condition (a): `d(s2) = sum_s1 f(s1) (P_n - P)(s1, s2)`, two-sided;
//! - condition (b): rows restricted to an open set, negative part only;
//! - condition (c): rows restricted to a closed set, positive part only;
//! - condition (d): rows restricted to a continuity set (boundary must be
//!   null under the limit), two-sided;
//! - condition (e): like (a) for nonnegative functions, negative part only.
//!
//! The extremum is the closed-form Jordan reduction; `--oracle` mode
//! recomputes it by exhaustive subset enumeration and insists on agreement.
//!
//! [`analyze`] runs everything over supplied witness families, aggregates
//! per-condition verdicts (any failing witness fails its condition), and
//! emits the corollary-structured conclusion: semi-uniform Feller iff the
//! S2-marginal kernel is continuous in total variation and one of (b)-(e)
//! holds.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::exec;
use crate::kernel::KernelFamily;
use crate::kr::RealFunction;
use crate::measure::{enumerated_extremes_of, extremes_of, tv_of_slices};
use crate::series::{ConditionLabel, GapSeries, Verdict, VerdictParams};
use crate::space::{FiniteMetricSpace, SetRole, SpaceRef, TestSet};
use crate::{Error, Result, VALIDATION_TOL};

/// One of the five equivalent continuity conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    A,
    B,
    C,
    D,
    E,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::A,
        Condition::B,
        Condition::C,
        Condition::D,
        Condition::E,
    ];

    pub fn label(self) -> ConditionLabel {
        match self {
            Condition::A => ConditionLabel::A,
            Condition::B => ConditionLabel::B,
            Condition::C => ConditionLabel::C,
            Condition::D => ConditionLabel::D,
            Condition::E => ConditionLabel::E,
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl std::str::FromStr for Condition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "a" => Ok(Condition::A),
            "b" => Ok(Condition::B),
            "c" => Ok(Condition::C),
            "d" => Ok(Condition::D),
            "e" => Ok(Condition::E),
            other => Err(Error::InvalidValue(format!("unknown condition {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Pos,
    Neg,
    Abs,
}

/// Precomputed difference matrices `P_n - P`, shared across witnesses.
pub(crate) struct FamilyDeltas {
    deltas: Vec<Vec<Vec<f64>>>,
    cols: usize,
}

impl FamilyDeltas {
    pub(crate) fn new(family: &KernelFamily) -> Self {
        let deltas = (0..family.len()).map(|n| family.delta(n)).collect();
        Self {
            deltas,
            cols: family.s2_space().len(),
        }
    }

    fn len(&self) -> usize {
        self.deltas.len()
    }

    /// `d(s2) = sum over the given rows of delta(s1, s2)`.
    fn slice_from_rows(&self, n: usize, rows: &BTreeSet<usize>) -> Vec<f64> {
        let mut d = vec![0.0; self.cols];
        for &i in rows {
            for (j, &v) in self.deltas[n][i].iter().enumerate() {
                d[j] += v;
            }
        }
        d
    }

    /// `d(s2) = sum_s1 f(s1) delta(s1, s2)`. Zero weights contribute
    /// nothing, so an indicator takes the exact same float path as its
    /// member set and the identity `lsc_gap(1_O) = wtv_gap(O)` holds
    /// bitwise.
    fn slice_from_weights(&self, n: usize, weights: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; self.cols];
        for (i, row) in self.deltas[n].iter().enumerate() {
            let w = weights[i];
            if w == 0.0 {
                continue;
            }
            for (j, &v) in row.iter().enumerate() {
                d[j] += w * v;
            }
        }
        d
    }

    fn reduce(d: &[f64], side: Side, enumerated: bool) -> Result<f64> {
        let e = if enumerated {
            enumerated_extremes_of(d)?
        } else {
            extremes_of(d)
        };
        Ok(match side {
            Side::Pos => e.sup,
            Side::Neg => -e.inf,
            Side::Abs => e.sup_abs,
        })
    }

    fn row_gaps(&self, rows: &BTreeSet<usize>, side: Side, enumerated: bool) -> Result<Vec<f64>> {
        (0..self.len())
            .map(|n| Self::reduce(&self.slice_from_rows(n, rows), side, enumerated))
            .collect()
    }

    fn weight_gaps(&self, weights: &[f64], side: Side, enumerated: bool) -> Result<Vec<f64>> {
        (0..self.len())
            .map(|n| Self::reduce(&self.slice_from_weights(n, weights), side, enumerated))
            .collect()
    }
}

fn check_family_space(family: &KernelFamily, space: &SpaceRef, what: &str) -> Result<()> {
    if !FiniteMetricSpace::same(family.s1_space(), space) {
        return Err(Error::SpaceMismatch(what.into()));
    }
    Ok(())
}

/// Condition (a) gap for one bounded test function `f` on S1:
/// `gap(n) = sup over S2-sets B of |integral f d(P_n - P)(. x B)|`.
pub fn suf_gap(
    family: &KernelFamily,
    f: &RealFunction,
    params: VerdictParams,
) -> Result<GapSeries> {
    check_family_space(family, f.space(), "suf_gap function")?;
    let deltas = FamilyDeltas::new(family);
    let gaps = deltas.weight_gaps(f.values(), Side::Abs, false)?;
    Ok(GapSeries::new(ConditionLabel::A, gaps, params))
}

/// Condition (b) gap for one open set: the one-sided (negative-part) gap
/// whose vanishing for every open set is WTV-continuity.
pub fn wtv_gap(family: &KernelFamily, open: &TestSet, params: VerdictParams) -> Result<GapSeries> {
    check_family_space(family, open.space(), "wtv_gap set")?;
    if open.role() != SetRole::Open {
        return Err(Error::InvalidValue(format!(
            "wtv_gap expects an open-role set, got {}",
            open.role()
        )));
    }
    let deltas = FamilyDeltas::new(family);
    let gaps = deltas.row_gaps(open.members(), Side::Neg, false)?;
    Ok(GapSeries::new(ConditionLabel::B, gaps, params))
}

/// Condition (c) gap for one closed set: the positive-part gap.
pub fn closed_gap(
    family: &KernelFamily,
    closed: &TestSet,
    params: VerdictParams,
) -> Result<GapSeries> {
    check_family_space(family, closed.space(), "closed_gap set")?;
    if closed.role() != SetRole::Closed {
        return Err(Error::InvalidValue(format!(
            "closed_gap expects a closed-role set, got {}",
            closed.role()
        )));
    }
    let deltas = FamilyDeltas::new(family);
    let gaps = deltas.row_gaps(closed.members(), Side::Pos, false)?;
    Ok(GapSeries::new(ConditionLabel::C, gaps, params))
}

/// Outcome of the condition (d) check: either the two-sided gap series, or a
/// rejection because the declared boundary carries limit mass. Rejection
/// marks the set as outside the condition's hypothesis, not the kernel as
/// discontinuous.
#[derive(Debug, Clone)]
pub enum ContsetOutcome {
    Series(GapSeries),
    Rejected { boundary_mass: f64 },
}

/// Mass the limit joint puts on `boundary x S2`.
pub fn boundary_mass(family: &KernelFamily, set: &TestSet) -> f64 {
    set.boundary()
        .iter()
        .map(|&i| family.limit().mass()[i].iter().sum::<f64>())
        .sum()
}

/// Condition (d) gap for one continuity set.
pub fn contset_gap(
    family: &KernelFamily,
    set: &TestSet,
    params: VerdictParams,
) -> Result<ContsetOutcome> {
    check_family_space(family, set.space(), "contset_gap set")?;
    if set.role() != SetRole::Continuity {
        return Err(Error::InvalidValue(format!(
            "contset_gap expects a continuity-role set, got {}",
            set.role()
        )));
    }
    let mass = boundary_mass(family, set);
    if mass > VALIDATION_TOL {
        return Ok(ContsetOutcome::Rejected {
            boundary_mass: mass,
        });
    }
    let deltas = FamilyDeltas::new(family);
    let gaps = deltas.row_gaps(set.members(), Side::Abs, false)?;
    Ok(ContsetOutcome::Series(GapSeries::new(
        ConditionLabel::D,
        gaps,
        params,
    )))
}

/// Condition (e) gap for one nonnegative bounded function: the one-sided
/// (negative-part) gap. For an indicator this equals [`wtv_gap`] of the
/// indicated set entrywise.
pub fn lsc_gap(
    family: &KernelFamily,
    f: &RealFunction,
    params: VerdictParams,
) -> Result<GapSeries> {
    check_family_space(family, f.space(), "lsc_gap function")?;
    if let Some((i, &v)) = f.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeFunction { index: i, value: v });
    }
    let deltas = FamilyDeltas::new(family);
    let gaps = deltas.weight_gaps(f.values(), Side::Neg, false)?;
    Ok(GapSeries::new(ConditionLabel::E, gaps, params))
}

/// Total-variation gaps of the S2 marginals: the hypothesis under which
/// conditions (a)-(e) are equivalent.
pub fn marginal_tv_gap(family: &KernelFamily, params: VerdictParams) -> GapSeries {
    let limit = crate::kernel::marginal_s2(family.limit());
    let gaps = (0..family.len())
        .map(|n| {
            let m = crate::kernel::marginal_s2(family.joint(n));
            tv_of_slices(m.weights(), limit.weights())
        })
        .collect();
    GapSeries::new(ConditionLabel::TvMarginal, gaps, params)
}

/// Total-variation gaps of the full joints; dominates every other condition
/// and demonstrates that semi-uniform Feller is strictly weaker than TV.
pub fn full_tv_gap(family: &KernelFamily, params: VerdictParams) -> GapSeries {
    let limit = family.limit().flat();
    let gaps = (0..family.len())
        .map(|n| tv_of_slices(&family.joint(n).flat(), &limit))
        .collect();
    GapSeries::new(ConditionLabel::TvFull, gaps, params)
}

/// A per-limit-point family of declared open base sets; each list must
/// contain the whole space.
#[derive(Debug, Clone)]
pub struct BaseFamily {
    s1_space: SpaceRef,
    per_limit: BTreeMap<usize, Vec<TestSet>>,
}

impl BaseFamily {
    pub fn new(s1_space: SpaceRef, per_limit: BTreeMap<usize, Vec<TestSet>>) -> Result<Self> {
        for (limit, sets) in &per_limit {
            let mut has_whole = false;
            for s in sets {
                if !FiniteMetricSpace::same(s.space(), &s1_space) {
                    return Err(Error::SpaceMismatch("base family sets".into()));
                }
                if s.role() != SetRole::Open {
                    return Err(Error::InvalidBase(format!(
                        "base set for limit {limit} has role {}, expected open",
                        s.role()
                    )));
                }
                if s.members().len() == s1_space.len() {
                    has_whole = true;
                }
            }
            if !has_whole {
                return Err(Error::InvalidBase(format!(
                    "base for limit point {limit} must contain the whole space"
                )));
            }
        }
        Ok(Self {
            s1_space,
            per_limit,
        })
    }

    pub fn s1_space(&self) -> &SpaceRef {
        &self.s1_space
    }

    pub fn sets_for(&self, limit: usize) -> Option<&[TestSet]> {
        self.per_limit.get(&limit).map(|v| v.as_slice())
    }

    pub fn per_limit(&self) -> &BTreeMap<usize, Vec<TestSet>> {
        &self.per_limit
    }
}

/// Closure of the base member sets under intersection, up to `k_max` factors
/// (full closure when `None`). Returns deduplicated member sets.
fn intersection_closure(sets: &[TestSet], k_max: Option<usize>) -> Vec<BTreeSet<usize>> {
    let base: Vec<BTreeSet<usize>> = sets.iter().map(|s| s.members().clone()).collect();
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut frontier: Vec<BTreeSet<usize>> = Vec::new();
    let mut out: Vec<BTreeSet<usize>> = Vec::new();
    for b in &base {
        let key: Vec<usize> = b.iter().copied().collect();
        if seen.insert(key) {
            frontier.push(b.clone());
            out.push(b.clone());
        }
    }
    let mut depth = 1usize;
    while !frontier.is_empty() {
        if let Some(k) = k_max {
            if depth >= k {
                break;
            }
        }
        let mut next = Vec::new();
        for f in &frontier {
            for b in &base {
                let inter: BTreeSet<usize> = f.intersection(b).copied().collect();
                let key: Vec<usize> = inter.iter().copied().collect();
                if seen.insert(key) {
                    next.push(inter.clone());
                    out.push(inter);
                }
            }
        }
        frontier = next;
        depth += 1;
    }
    out
}

/// Per-set detail of the countable-base check.
#[derive(Debug, Clone)]
pub struct AsskernDetail {
    /// Pointwise max over all closure sets.
    pub combined: GapSeries,
    /// `(canonical set name, gap series)` for every set in the closure.
    pub per_set: Vec<(String, GapSeries)>,
}

fn set_name(space: &SpaceRef, members: &BTreeSet<usize>) -> String {
    let ids: Vec<&str> = members.iter().map(|&i| space.id(i)).collect();
    format!("{{{}}}", ids.join("+"))
}

/// Countable-base equicontinuity gaps against explicit base sets: for every
/// finite intersection `O` of base sets, the two-sided gap of `O` must
/// vanish. `gap(n)` is the max over the intersection closure.
pub fn asskern_sets_gap(
    family: &KernelFamily,
    sets: &[TestSet],
    k_max: Option<usize>,
    params: VerdictParams,
) -> Result<AsskernDetail> {
    let s1 = family.s1_space();
    let mut has_whole = false;
    for s in sets {
        check_family_space(family, s.space(), "asskern base set")?;
        if s.role() != SetRole::Open {
            return Err(Error::InvalidBase(format!(
                "base sets must have role open, got {}",
                s.role()
            )));
        }
        has_whole |= s.members().len() == s1.len();
    }
    if !has_whole {
        return Err(Error::InvalidBase(
            "base must contain the whole space".into(),
        ));
    }
    let closure = intersection_closure(sets, k_max);
    let deltas = FamilyDeltas::new(family);
    let mut per_set = Vec::with_capacity(closure.len());
    let mut combined = vec![0.0f64; family.len()];
    for members in &closure {
        let gaps = deltas.row_gaps(members, Side::Abs, false)?;
        for (c, g) in combined.iter_mut().zip(&gaps) {
            *c = c.max(*g);
        }
        per_set.push((
            set_name(s1, members),
            GapSeries::new(ConditionLabel::AssKern, gaps, params),
        ));
    }
    Ok(AsskernDetail {
        combined: GapSeries::new(ConditionLabel::AssKern, combined, params),
        per_set,
    })
}

/// Countable-base gap against a [`BaseFamily`], resolved at the limit point
/// of the family's parameter provenance.
pub fn asskern_gap(
    family: &KernelFamily,
    base: &BaseFamily,
    k_max: Option<usize>,
    params: VerdictParams,
) -> Result<GapSeries> {
    let provenance = family.provenance().ok_or(Error::NoProvenance)?;
    let limit = provenance.param_seq.limit();
    let sets = base.sets_for(limit).ok_or_else(|| {
        Error::InvalidBase(format!(
            "no base declared for limit point {:?}",
            provenance.param_seq.space().id(limit)
        ))
    })?;
    Ok(asskern_sets_gap(family, sets, k_max, params)?.combined)
}

/// Named witnesses for each condition. Conditions quantify over these
/// supplied families; nothing is inferred beyond them.
#[derive(Debug, Clone, Default)]
pub struct WitnessSet {
    /// Bounded test functions for condition (a).
    pub functions: Vec<(String, RealFunction)>,
    /// Nonnegative functions for condition (e).
    pub lsc_functions: Vec<(String, RealFunction)>,
    /// Open-role sets for condition (b).
    pub open_sets: Vec<(String, TestSet)>,
    /// Closed-role sets for condition (c).
    pub closed_sets: Vec<(String, TestSet)>,
    /// Continuity-role sets for condition (d).
    pub continuity_sets: Vec<(String, TestSet)>,
    /// Base sets for the countable-base check, already resolved to the
    /// relevant limit point.
    pub base_sets: Option<Vec<TestSet>>,
}

/// Default witness generation: inf-convolutions of every single-point
/// indicator at m in {1, 2, 4, 8}, coordinate functions when coordinates
/// exist, and all subsets of S1 (as indicators and in every set role) when
/// `|S1| <= 8`.
pub fn default_witnesses(s1_space: &SpaceRef) -> WitnessSet {
    let mut w = WitnessSet::default();
    for p in 0..s1_space.len() {
        let indicator =
            RealFunction::indicator(s1_space.clone(), [p]).expect("point indicator is well-formed");
        for m in [1u32, 2, 4, 8] {
            let conv = crate::regularize::inf_convolve(&indicator, m);
            let name = format!("conv_m{m}[{}]", s1_space.id(p));
            w.functions.push((name.clone(), conv.clone()));
            w.lsc_functions.push((name, conv));
        }
    }
    if let Some(coords) = s1_space.coords() {
        let dims = coords.first().map(|c| c.len()).unwrap_or(0);
        for d in 0..dims {
            if let Ok(f) = RealFunction::coordinate(s1_space.clone(), d) {
                if f.min_value() >= 0.0 {
                    w.lsc_functions.push((format!("coord{d}"), f.clone()));
                }
                w.functions.push((format!("coord{d}"), f));
            }
        }
    }
    if s1_space.len() <= 8 {
        let n = s1_space.len();
        for mask in 0u32..(1u32 << n) {
            let members: BTreeSet<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let name = set_name(s1_space, &members);
            let ind = RealFunction::indicator(s1_space.clone(), members.iter().copied())
                .expect("subset indicator is well-formed");
            w.functions.push((format!("ind{name}"), ind.clone()));
            w.lsc_functions.push((format!("ind{name}"), ind));
            let open =
                TestSet::new(s1_space.clone(), members.clone(), SetRole::Open, None).unwrap();
            let closed =
                TestSet::new(s1_space.clone(), members.clone(), SetRole::Closed, None).unwrap();
            let cont = TestSet::new(
                s1_space.clone(),
                members,
                SetRole::Continuity,
                Some(BTreeSet::new()),
            )
            .unwrap();
            w.open_sets.push((name.clone(), open));
            w.closed_sets.push((name.clone(), closed));
            w.continuity_sets.push((name, cont));
        }
    } else {
        w.open_sets.push((
            "{*}".into(),
            TestSet::whole(s1_space.clone(), SetRole::Open),
        ));
        w.closed_sets.push((
            "{*}".into(),
            TestSet::whole(s1_space.clone(), SetRole::Closed),
        ));
        w.continuity_sets.push((
            "{*}".into(),
            TestSet::whole(s1_space.clone(), SetRole::Continuity),
        ));
    }
    w
}

/// Analysis configuration: verdict parameters, which conditions to run, and
/// whether to cross-check every extremum against subset enumeration.
#[derive(Debug, Clone)]
pub struct AnalyzeConfig {
    pub params: VerdictParams,
    pub conditions: BTreeSet<Condition>,
    pub oracle: bool,
    /// Intersection depth for the countable-base check (full closure when
    /// `None`).
    pub asskern_depth: Option<usize>,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            params: VerdictParams::default(),
            conditions: Condition::ALL.into_iter().collect(),
            oracle: false,
            asskern_depth: None,
        }
    }
}

/// Three-valued corollary conclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SufVerdict {
    True,
    False,
    Inconclusive,
}

impl std::fmt::Display for SufVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SufVerdict::True => write!(f, "true"),
            SufVerdict::False => write!(f, "false"),
            SufVerdict::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

/// One witness series in a report.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesEntry {
    pub condition: ConditionLabel,
    pub witness: String,
    pub series: GapSeries,
}

/// A condition (d) set rejected because its declared boundary carries limit
/// mass.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryRejection {
    pub witness: String,
    pub boundary_mass: f64,
}

/// Full analysis output; deterministic given the family, witnesses, and
/// configuration.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub epsilon: f64,
    pub window: usize,
    pub family_len: usize,
    pub conditions: Vec<Condition>,
    pub marginal_tv: GapSeries,
    pub full_tv: GapSeries,
    pub series: Vec<SeriesEntry>,
    pub condition_verdicts: BTreeMap<String, Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asskern: Option<GapSeries>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub asskern_sets: Vec<SeriesEntry>,
    /// Corollary conclusion; present only when all of (b)-(e) were run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub semi_uniform_feller: Option<SufVerdict>,
    pub rejections: Vec<BoundaryRejection>,
    pub warnings: Vec<String>,
}

/// "Any witness fails => the condition fails" lattice; `None` for an empty
/// witness list.
fn combine_verdicts(verdicts: impl IntoIterator<Item = Verdict>) -> Option<Verdict> {
    let mut out = None;
    for v in verdicts {
        out = Some(match (out, v) {
            (Some(Verdict::NotVanishing), _) | (_, Verdict::NotVanishing) => Verdict::NotVanishing,
            (Some(Verdict::Inconclusive), _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Vanishing,
        });
    }
    out
}

/// Runs every applicable gap operation over the supplied witnesses, applies
/// verdicts, and assembles the corollary-structured conclusion.
pub fn analyze(
    family: &KernelFamily,
    witnesses: &WitnessSet,
    config: &AnalyzeConfig,
) -> Result<AnalysisReport> {
    let params = config.params;
    if config.oracle && family.s2_space().len() > 16 {
        return Err(Error::OracleTooLarge(family.s2_space().len()));
    }
    let deltas = FamilyDeltas::new(family);
    let marginal = marginal_tv_gap(family, params);
    let full = full_tv_gap(family, params);
    let mut warnings = Vec::new();
    let mut rejections = Vec::new();

    if let Some(p) = family.provenance() {
        if !p.param_seq.is_monotone() {
            warnings.push(
                "parameter sequence witness is not monotone; verdicts read the trailing window"
                    .to_string(),
            );
        }
    }

    let mut series: Vec<SeriesEntry> = Vec::new();
    for &condition in &Condition::ALL {
        if !config.conditions.contains(&condition) {
            continue;
        }
        match condition {
            Condition::A => {
                if witnesses.functions.is_empty() {
                    warnings.push("condition a requested but no function witnesses".into());
                }
                series.extend(exec::try_map_indices(witnesses.functions.len(), |i| {
                    let (name, f) = &witnesses.functions[i];
                    check_family_space(family, f.space(), "suf_gap function")?;
                    let gaps = deltas.weight_gaps(f.values(), Side::Abs, config.oracle)?;
                    Ok::<_, Error>(SeriesEntry {
                        condition: ConditionLabel::A,
                        witness: name.clone(),
                        series: GapSeries::new(ConditionLabel::A, gaps, params),
                    })
                })?);
            }
            Condition::B => {
                if witnesses.open_sets.is_empty() {
                    warnings.push("condition b requested but no open-set witnesses".into());
                }
                series.extend(exec::try_map_indices(witnesses.open_sets.len(), |i| {
                    let (name, set) = &witnesses.open_sets[i];
                    check_family_space(family, set.space(), "wtv_gap set")?;
                    let gaps = deltas.row_gaps(set.members(), Side::Neg, config.oracle)?;
                    Ok::<_, Error>(SeriesEntry {
                        condition: ConditionLabel::B,
                        witness: name.clone(),
                        series: GapSeries::new(ConditionLabel::B, gaps, params),
                    })
                })?);
            }
            Condition::C => {
                if witnesses.closed_sets.is_empty() {
                    warnings.push("condition c requested but no closed-set witnesses".into());
                }
                series.extend(exec::try_map_indices(witnesses.closed_sets.len(), |i| {
                    let (name, set) = &witnesses.closed_sets[i];
                    check_family_space(family, set.space(), "closed_gap set")?;
                    let gaps = deltas.row_gaps(set.members(), Side::Pos, config.oracle)?;
                    Ok::<_, Error>(SeriesEntry {
                        condition: ConditionLabel::C,
                        witness: name.clone(),
                        series: GapSeries::new(ConditionLabel::C, gaps, params),
                    })
                })?);
            }
            Condition::D => {
                if witnesses.continuity_sets.is_empty() {
                    warnings.push("condition d requested but no continuity-set witnesses".into());
                }
                for (name, set) in &witnesses.continuity_sets {
                    check_family_space(family, set.space(), "contset_gap set")?;
                    let mass = boundary_mass(family, set);
                    if mass > VALIDATION_TOL {
                        rejections.push(BoundaryRejection {
                            witness: name.clone(),
                            boundary_mass: mass,
                        });
                        continue;
                    }
                    let gaps = deltas.row_gaps(set.members(), Side::Abs, config.oracle)?;
                    series.push(SeriesEntry {
                        condition: ConditionLabel::D,
                        witness: name.clone(),
                        series: GapSeries::new(ConditionLabel::D, gaps, params),
                    });
                }
            }
            Condition::E => {
                if witnesses.lsc_functions.is_empty() {
                    warnings
                        .push("condition e requested but no nonnegative function witnesses".into());
                }
                series.extend(exec::try_map_indices(witnesses.lsc_functions.len(), |i| {
                    let (name, f) = &witnesses.lsc_functions[i];
                    check_family_space(family, f.space(), "lsc_gap function")?;
                    if let Some((idx, &v)) = f.values().iter().enumerate().find(|(_, v)| **v < 0.0)
                    {
                        return Err(Error::NegativeFunction {
                            index: idx,
                            value: v,
                        });
                    }
                    let gaps = deltas.weight_gaps(f.values(), Side::Neg, config.oracle)?;
                    Ok::<_, Error>(SeriesEntry {
                        condition: ConditionLabel::E,
                        witness: name.clone(),
                        series: GapSeries::new(ConditionLabel::E, gaps, params),
                    })
                })?);
            }
        }
    }

    if config.oracle {
        // The closed-form gaps were already replaced by enumerated ones
        // above; recompute the closed forms here and insist on agreement.
        for entry in &series {
            let fast = match entry.condition {
                ConditionLabel::A => deltas.weight_gaps(
                    witnesses
                        .functions
                        .iter()
                        .find(|(n, _)| *n == entry.witness)
                        .unwrap()
                        .1
                        .values(),
                    Side::Abs,
                    false,
                )?,
                ConditionLabel::E => deltas.weight_gaps(
                    witnesses
                        .lsc_functions
                        .iter()
                        .find(|(n, _)| *n == entry.witness)
                        .unwrap()
                        .1
                        .values(),
                    Side::Neg,
                    false,
                )?,
                ConditionLabel::B => deltas.row_gaps(
                    witnesses
                        .open_sets
                        .iter()
                        .find(|(n, _)| *n == entry.witness)
                        .unwrap()
                        .1
                        .members(),
                    Side::Neg,
                    false,
                )?,
                ConditionLabel::C => deltas.row_gaps(
                    witnesses
                        .closed_sets
                        .iter()
                        .find(|(n, _)| *n == entry.witness)
                        .unwrap()
                        .1
                        .members(),
                    Side::Pos,
                    false,
                )?,
                ConditionLabel::D => deltas.row_gaps(
                    witnesses
                        .continuity_sets
                        .iter()
                        .find(|(n, _)| *n == entry.witness)
                        .unwrap()
                        .1
                        .members(),
                    Side::Abs,
                    false,
                )?,
                _ => continue,
            };
            for (n, (closed_form, enumerated)) in fast.iter().zip(&entry.series.gaps).enumerate() {
                if (closed_form - enumerated).abs() > 1e-12 {
                    return Err(Error::OracleMismatch {
                        label: entry.condition.to_string(),
                        witness: entry.witness.clone(),
                        n: n + 1,
                        closed: *closed_form,
                        enumerated: *enumerated,
                    });
                }
            }
        }
    }

    series.sort_by(|a, b| (a.condition, &a.witness).cmp(&(b.condition, &b.witness)));

    let mut condition_verdicts = BTreeMap::new();
    for &condition in &Condition::ALL {
        if !config.conditions.contains(&condition) {
            continue;
        }
        let label = condition.label();
        if let Some(v) = combine_verdicts(
            series
                .iter()
                .filter(|e| e.condition == label)
                .map(|e| e.series.verdict),
        ) {
            condition_verdicts.insert(condition.to_string(), v);
        }
    }

    let (asskern, asskern_sets) = match &witnesses.base_sets {
        Some(sets) => {
            let detail = asskern_sets_gap(family, sets, config.asskern_depth, params)?;
            let entries = detail
                .per_set
                .into_iter()
                .map(|(name, series)| SeriesEntry {
                    condition: ConditionLabel::AssKern,
                    witness: name,
                    series,
                })
                .collect();
            (Some(detail.combined), entries)
        }
        None => (None, Vec::new()),
    };

    // Corollary conclusion: marginal TV continuity plus any one of (b)-(e).
    let bcde = [Condition::B, Condition::C, Condition::D, Condition::E];
    let semi_uniform_feller = if bcde.iter().all(|c| config.conditions.contains(c)) {
        let verdicts: Vec<Verdict> = bcde
            .iter()
            .filter_map(|c| condition_verdicts.get(&c.to_string()).copied())
            .collect();
        if verdicts.is_empty() {
            warnings.push("no (b)-(e) witnesses produced verdicts; conclusion withheld".into());
            None
        } else {
            let any_vanishing = verdicts.contains(&Verdict::Vanishing);
            let any_failing = verdicts.contains(&Verdict::NotVanishing);
            Some(match marginal.verdict {
                Verdict::Vanishing if any_vanishing => SufVerdict::True,
                Verdict::NotVanishing => SufVerdict::False,
                _ if any_failing => SufVerdict::False,
                _ => SufVerdict::Inconclusive,
            })
        }
    } else {
        None
    };

    Ok(AnalysisReport {
        epsilon: params.epsilon,
        window: params.window,
        family_len: family.len(),
        conditions: config.conditions.iter().copied().collect(),
        marginal_tv: marginal,
        full_tv: full,
        series,
        condition_verdicts,
        asskern,
        asskern_sets,
        semi_uniform_feller,
        rejections,
        warnings,
    })
}
