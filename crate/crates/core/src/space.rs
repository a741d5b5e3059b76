//! Finite metric spaces, declared convergent sequences, and set declarations.
//!
//! The infinite Polish spaces of the underlying theory are modeled as finite
//! point sets plus explicit witnesses: a [`ConvergentSequence`] stands in for
//! "a sequence converging to s", and a [`TestSet`] declares the intended
//! topological role of a subset (open / closed / continuity set) in the
//! modeled infinite space. On the finite model every subset is representable
//! in any role, so roles are sampling devices for the condition checkers,
//! not correctness assumptions.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::{Error, Result, VALIDATION_TOL};

/// Shared handle to an immutable space. All downstream values hold one of
/// these; spaces are compared structurally, so re-parsing a document yields
/// interchangeable handles.
pub type SpaceRef = Arc<FiniteMetricSpace>;

/// A finite point set with a validated metric.
///
/// `coords` are optional display/generation coordinates; when present and the
/// space is declared euclidean, the metric must agree with pairwise Euclidean
/// distances within [`VALIDATION_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    point_ids: Vec<String>,
    coords: Option<Vec<Vec<f64>>>,
    metric: Vec<Vec<f64>>,
    euclidean: bool,
}

/// One metric-axiom violation, naming the axiom and the offending indices.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricViolation {
    /// Off-diagonal entry is zero or negative: distinct points must be apart.
    IdentityOfIndiscernibles { i: usize, j: usize, value: f64 },
    /// `d(i,j) != d(j,i)` beyond tolerance.
    Asymmetry { i: usize, j: usize, delta: f64 },
    /// Diagonal entry is not exactly zero.
    NonzeroDiagonal { i: usize, value: f64 },
    /// `d(i,k) > d(i,j) + d(j,k)` beyond tolerance.
    Triangle {
        i: usize,
        j: usize,
        k: usize,
        excess: f64,
    },
    /// Declared euclidean but the metric disagrees with the coordinates.
    EuclideanMismatch { i: usize, j: usize, delta: f64 },
    /// Entry is NaN or infinite.
    NonFinite { i: usize, j: usize },
}

impl std::fmt::Display for MetricViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetricViolation::IdentityOfIndiscernibles { i, j, value } => {
                write!(
                    f,
                    "identity of indiscernibles: d({i},{j}) = {value} must be > 0"
                )
            }
            MetricViolation::Asymmetry { i, j, delta } => {
                write!(f, "asymmetry: |d({i},{j}) - d({j},{i})| = {delta}")
            }
            MetricViolation::NonzeroDiagonal { i, value } => {
                write!(f, "nonzero diagonal: d({i},{i}) = {value}")
            }
            MetricViolation::Triangle { i, j, k, excess } => {
                write!(f, "triangle violation ({i},{j},{k}): d({i},{k}) exceeds d({i},{j}) + d({j},{k}) by {excess}")
            }
            MetricViolation::EuclideanMismatch { i, j, delta } => {
                write!(f, "euclidean mismatch at ({i},{j}): off by {delta}")
            }
            MetricViolation::NonFinite { i, j } => write!(f, "non-finite entry at ({i},{j})"),
        }
    }
}

impl FiniteMetricSpace {
    /// Builds a space from explicit parts. Shape errors (ragged matrix,
    /// length mismatches, duplicate ids) are hard errors; metric *axiom*
    /// violations are not checked here; see [`validate_space`].
    pub fn new(
        point_ids: Vec<String>,
        coords: Option<Vec<Vec<f64>>>,
        metric: Vec<Vec<f64>>,
        euclidean: bool,
    ) -> Result<Self> {
        let n = point_ids.len();
        if n == 0 {
            return Err(Error::InvalidValue(
                "space must have at least one point".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for id in &point_ids {
            if !seen.insert(id.clone()) {
                return Err(Error::InvalidValue(format!("duplicate point id {id:?}")));
            }
        }
        if metric.len() != n || metric.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidValue(format!(
                "metric must be a {n}x{n} matrix"
            )));
        }
        if let Some(c) = &coords {
            if c.len() != n {
                return Err(Error::InvalidValue(
                    "one coordinate vector per point required".into(),
                ));
            }
            let dim = c.first().map(|v| v.len()).unwrap_or(0);
            if c.iter().any(|v| v.len() != dim) {
                return Err(Error::InvalidValue(
                    "coordinate vectors must share a dimension".into(),
                ));
            }
        } else if euclidean {
            return Err(Error::InvalidValue(
                "euclidean metric declaration requires coordinates".into(),
            ));
        }
        Ok(Self {
            point_ids,
            coords,
            metric,
            euclidean,
        })
    }

    /// Space on a line: one coordinate per point, euclidean metric.
    pub fn line(ids: Vec<String>, positions: &[f64]) -> Result<SpaceRef> {
        let coords: Vec<Vec<f64>> = positions.iter().map(|&x| vec![x]).collect();
        let metric = euclidean_metric(&coords);
        let space = Self::new(ids, Some(coords), metric, true)?;
        let violations = space.validate();
        if !violations.is_empty() {
            return Err(Error::InvalidValue(format!(
                "line space invalid: {}",
                violations[0]
            )));
        }
        Ok(Arc::new(space))
    }

    /// Anonymous line space with ids `p0..p{n-1}`.
    pub fn line_anon(positions: &[f64]) -> Result<SpaceRef> {
        let ids = (0..positions.len()).map(|i| format!("p{i}")).collect();
        Self::line(ids, positions)
    }

    /// A single-point space (used for trivial observation spaces).
    pub fn singleton(id: &str) -> SpaceRef {
        Arc::new(
            Self::new(
                vec![id.to_string()],
                Some(vec![vec![0.0]]),
                vec![vec![0.0]],
                true,
            )
            .expect("singleton space is well-formed"),
        )
    }

    /// Space from coordinates under the L1 (taxicab) metric. Distances of
    /// dyadic-rational coordinates stay exactly representable, which the
    /// harness relies on.
    pub fn taxicab(ids: Vec<String>, coords: Vec<Vec<f64>>) -> Result<SpaceRef> {
        let n = coords.len();
        let mut metric = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                metric[i][j] = coords[i]
                    .iter()
                    .zip(&coords[j])
                    .map(|(a, b)| (a - b).abs())
                    .sum();
            }
        }
        let space = Self::new(ids, Some(coords), metric, false)?;
        let violations = space.validate();
        if !violations.is_empty() {
            return Err(Error::InvalidValue(format!(
                "taxicab space invalid: {}",
                violations[0]
            )));
        }
        Ok(Arc::new(space))
    }

    pub fn len(&self) -> usize {
        self.point_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_ids.is_empty()
    }

    pub fn point_ids(&self) -> &[String] {
        &self.point_ids
    }

    pub fn id(&self, index: usize) -> &str {
        &self.point_ids[index]
    }

    pub fn coords(&self) -> Option<&Vec<Vec<f64>>> {
        self.coords.as_ref()
    }

    pub fn is_euclidean(&self) -> bool {
        self.euclidean
    }

    pub fn metric(&self) -> &Vec<Vec<f64>> {
        &self.metric
    }

    /// Distance between points by index.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.metric[i][j]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.point_ids.iter().position(|p| p == id)
    }

    pub fn resolve(&self, id: &str) -> Result<usize> {
        self.index_of(id)
            .ok_or_else(|| Error::UnknownPoint(id.to_string()))
    }

    /// Checks every metric axiom and returns all violations found.
    #[allow(clippy::needless_range_loop)] // matrix indices mirror the axioms
    pub fn validate(&self) -> Vec<MetricViolation> {
        let n = self.len();
        let m = &self.metric;
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if !m[i][j].is_finite() {
                    out.push(MetricViolation::NonFinite { i, j });
                }
            }
        }
        if !out.is_empty() {
            return out; // remaining checks are meaningless on non-finite data
        }
        for i in 0..n {
            if m[i][i] != 0.0 {
                out.push(MetricViolation::NonzeroDiagonal { i, value: m[i][i] });
            }
            for j in (i + 1)..n {
                let delta = (m[i][j] - m[j][i]).abs();
                if delta > VALIDATION_TOL {
                    out.push(MetricViolation::Asymmetry { i, j, delta });
                }
                if m[i][j] <= 0.0 {
                    out.push(MetricViolation::IdentityOfIndiscernibles {
                        i,
                        j,
                        value: m[i][j],
                    });
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if i == j || j == k || i == k {
                        continue;
                    }
                    let excess = m[i][k] - (m[i][j] + m[j][k]);
                    if excess > VALIDATION_TOL {
                        out.push(MetricViolation::Triangle { i, j, k, excess });
                    }
                }
            }
        }
        if self.euclidean {
            if let Some(coords) = &self.coords {
                for i in 0..n {
                    for j in (i + 1)..n {
                        let d: f64 = coords[i]
                            .iter()
                            .zip(&coords[j])
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt();
                        let delta = (d - m[i][j]).abs();
                        if delta > VALIDATION_TOL {
                            out.push(MetricViolation::EuclideanMismatch { i, j, delta });
                        }
                    }
                }
            }
        }
        out
    }

    /// Structural equality of two space handles (pointer fast path).
    pub fn same(a: &SpaceRef, b: &SpaceRef) -> bool {
        Arc::ptr_eq(a, b) || **a == **b
    }
}

/// Pairwise Euclidean distance matrix for a coordinate list.
#[allow(clippy::needless_range_loop)]
pub fn euclidean_metric(coords: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = coords.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = coords[i]
                .iter()
                .zip(&coords[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
        }
    }
    m
}

/// Diagnostics for a whole space: empty iff all invariants hold.
pub fn validate_space(space: &FiniteMetricSpace) -> Vec<MetricViolation> {
    space.validate()
}

/// Product of two spaces under the max metric, ids joined as `"a|b"`.
/// Point order is a-major: index = ia * |B| + ib.
pub fn product_space(a: &SpaceRef, b: &SpaceRef) -> SpaceRef {
    let mut ids = Vec::with_capacity(a.len() * b.len());
    for ia in a.point_ids() {
        for ib in b.point_ids() {
            ids.push(format!("{ia}|{ib}"));
        }
    }
    let n = ids.len();
    let mut metric = vec![vec![0.0; n]; n];
    for ia in 0..a.len() {
        for ib in 0..b.len() {
            for ja in 0..a.len() {
                for jb in 0..b.len() {
                    let d = a.distance(ia, ja).max(b.distance(ib, jb));
                    metric[ia * b.len() + ib][ja * b.len() + jb] = d;
                }
            }
        }
    }
    Arc::new(
        FiniteMetricSpace::new(ids, None, metric, false)
            .expect("product of well-formed spaces is well-formed"),
    )
}

/// A finite witness of `s^(n) -> s`: ordered entries plus the limit point.
///
/// Distances to the limit are expected to be nonincreasing; non-monotone
/// witnesses are accepted but flagged, never silently.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergentSequence {
    space: SpaceRef,
    entries: Vec<usize>,
    limit: usize,
    monotone: bool,
}

impl ConvergentSequence {
    pub fn new(space: SpaceRef, entries: Vec<usize>, limit: usize) -> Result<Self> {
        let len = space.len();
        for &e in entries.iter().chain(std::iter::once(&limit)) {
            if e >= len {
                return Err(Error::PointOutOfRange { index: e, len });
            }
        }
        let monotone = entries
            .windows(2)
            .all(|w| space.distance(w[1], limit) <= space.distance(w[0], limit) + VALIDATION_TOL);
        Ok(Self {
            space,
            entries,
            limit,
            monotone,
        })
    }

    pub fn from_ids(space: SpaceRef, entry_ids: &[&str], limit_id: &str) -> Result<Self> {
        let entries = entry_ids
            .iter()
            .map(|id| space.resolve(id))
            .collect::<Result<Vec<_>>>()?;
        let limit = space.resolve(limit_id)?;
        Self::new(space, entries, limit)
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    /// Entry indices, n = 1..N in order.
    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Whether distances to the limit are nonincreasing along the witness.
    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    /// Distance from the n-th entry (0-based) to the limit.
    pub fn distance_at(&self, n: usize) -> f64 {
        self.space.distance(self.entries[n], self.limit)
    }

    /// `rho(entry_N, limit)`: how far the finite witness has converged.
    pub fn tail_distance(&self) -> Result<f64> {
        let last = self.entries.last().ok_or(Error::EmptySequence)?;
        Ok(self.space.distance(*last, self.limit))
    }

    /// Pairs two sequences of equal length into a sequence on the product
    /// space of their carriers.
    pub fn product(a: &ConvergentSequence, b: &ConvergentSequence) -> Result<ConvergentSequence> {
        if a.len() != b.len() {
            return Err(Error::InvalidValue(
                "product sequence requires equal lengths".into(),
            ));
        }
        let prod = product_space(&a.space, &b.space);
        let entries = a
            .entries
            .iter()
            .zip(&b.entries)
            .map(|(&ia, &ib)| ia * b.space.len() + ib)
            .collect();
        let limit = a.limit * b.space.len() + b.limit;
        ConvergentSequence::new(prod, entries, limit)
    }
}

/// See [`ConvergentSequence::tail_distance`].
pub fn sequence_tail_distance(seq: &ConvergentSequence) -> Result<f64> {
    seq.tail_distance()
}

/// Declared topological role of a [`TestSet`] in the modeled infinite space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SetRole {
    Open,
    Closed,
    /// Continuity set: requires a declared boundary.
    Continuity,
}

impl std::fmt::Display for SetRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SetRole::Open => write!(f, "open"),
            SetRole::Closed => write!(f, "closed"),
            SetRole::Continuity => write!(f, "continuity"),
        }
    }
}

/// A subset of a space with a declared role. The boundary is required iff
/// the role is `Continuity`; it may intersect the members (the set need not
/// be open).
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    space: SpaceRef,
    members: BTreeSet<usize>,
    role: SetRole,
    boundary: BTreeSet<usize>,
}

impl TestSet {
    pub fn new(
        space: SpaceRef,
        members: BTreeSet<usize>,
        role: SetRole,
        boundary: Option<BTreeSet<usize>>,
    ) -> Result<Self> {
        let len = space.len();
        if let Some(&m) = members.iter().find(|&&m| m >= len) {
            return Err(Error::PointOutOfRange { index: m, len });
        }
        let boundary = match (role, boundary) {
            (SetRole::Continuity, Some(b)) => b,
            (SetRole::Continuity, None) => {
                return Err(Error::InvalidValue(
                    "continuity role requires a declared boundary".into(),
                ))
            }
            (_, Some(b)) => b,
            (_, None) => BTreeSet::new(),
        };
        if let Some(&b) = boundary.iter().find(|&&b| b >= len) {
            return Err(Error::PointOutOfRange { index: b, len });
        }
        Ok(Self {
            space,
            members,
            role,
            boundary,
        })
    }

    pub fn from_ids(
        space: SpaceRef,
        member_ids: &[&str],
        role: SetRole,
        boundary_ids: Option<&[&str]>,
    ) -> Result<Self> {
        let members = member_ids
            .iter()
            .map(|id| space.resolve(id))
            .collect::<Result<BTreeSet<_>>>()?;
        let boundary = boundary_ids
            .map(|ids| {
                ids.iter()
                    .map(|id| space.resolve(id))
                    .collect::<Result<BTreeSet<_>>>()
            })
            .transpose()?;
        Self::new(space, members, role, boundary)
    }

    /// The whole space in the given role (boundary empty).
    pub fn whole(space: SpaceRef, role: SetRole) -> Self {
        let members = (0..space.len()).collect();
        Self::new(space, members, role, Some(BTreeSet::new())).expect("whole space is a valid set")
    }

    /// Empty set in the given role.
    pub fn empty(space: SpaceRef, role: SetRole) -> Self {
        Self::new(space, BTreeSet::new(), role, Some(BTreeSet::new()))
            .expect("empty set is a valid set")
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    pub fn members(&self) -> &BTreeSet<usize> {
        &self.members
    }

    pub fn role(&self) -> SetRole {
        self.role
    }

    pub fn boundary(&self) -> &BTreeSet<usize> {
        &self.boundary
    }

    pub fn contains(&self, index: usize) -> bool {
        self.members.contains(&index)
    }

    /// Complement with a new role; the declared boundary carries over
    /// (a set and its complement share the boundary).
    pub fn complement(&self, role: SetRole) -> Self {
        let members = (0..self.space.len())
            .filter(|i| !self.members.contains(i))
            .collect();
        Self::new(
            self.space.clone(),
            members,
            role,
            Some(self.boundary.clone()),
        )
        .expect("complement of a valid set is valid")
    }

    /// Intersection of two sets on the same space.
    pub fn intersect(&self, other: &TestSet, role: SetRole) -> Result<Self> {
        if !FiniteMetricSpace::same(&self.space, &other.space) {
            return Err(Error::SpaceMismatch("test-set intersection".into()));
        }
        let members = self.members.intersection(&other.members).copied().collect();
        let boundary = self.boundary.union(&other.boundary).copied().collect();
        Self::new(self.space.clone(), members, role, Some(boundary))
    }
}

/// Tail status of a sequence relative to a member set.
fn eventual_membership(set: &TestSet, seq: &ConvergentSequence) -> Option<bool> {
    // Walk backwards from the tail: the longest constant-membership suffix
    // decides eventual membership; an empty sequence decides nothing.
    let last = *seq.entries().last()?;
    Some(set.contains(last))
}

/// Whether the declared boundary is consistent with the sequence witness:
/// whenever the entries are eventually inside `members` while the limit is
/// outside (or vice versa), the limit must belong to the declared boundary.
pub fn boundary_consistency(set: &TestSet, seq: &ConvergentSequence) -> bool {
    let Some(tail_in) = eventual_membership(set, seq) else {
        return true; // nothing to witness
    };
    let limit_in = set.contains(seq.limit());
    if tail_in != limit_in {
        return set.boundary().contains(&seq.limit());
    }
    true
}
