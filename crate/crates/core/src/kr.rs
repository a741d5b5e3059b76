//! The Kantorovich-Rubinshtein (bounded-Lipschitz) metric and Lipschitz
//! function families.
//!
//! `kr_distance(mu, nu)` maximizes `integral f d(mu - nu)` over functions
//! with `|f| <= 1` that are 1-Lipschitz for the space's metric. On a finite
//! space this is a small dense linear program; the solver must certify
//! optimality (duality gap at most [`crate::LP_CERT_TOL`]) or the call
//! fails, never returning a silent approximate answer.
//!
//! Equicontinuity of a [`FunctionFamily`] on a finite metric space is
//! operationalized as a finite shared Lipschitz constant: on finite spaces
//! the epsilon-delta definition is equivalent to a modulus, and Lipschitz
//! moduli are what the inf-convolution construction produces.

use crate::exec;
use crate::measure::Measure;
use crate::series::{ConditionLabel, GapSeries, VerdictParams};
use crate::simplex::solve_bounded_lipschitz;
use crate::space::{ConvergentSequence, FiniteMetricSpace, SpaceRef};
use crate::{Error, Result, LP_CERT_TOL, VALIDATION_TOL};

/// A real-valued function on a space with bound and Lipschitz-constant
/// metadata, recomputed from the values at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RealFunction {
    space: SpaceRef,
    values: Vec<f64>,
    bound: f64,
    lip_const: f64,
}

impl RealFunction {
    pub fn new(space: SpaceRef, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::InvalidValue(format!(
                "function has {} values on a space of {} points",
                values.len(),
                space.len()
            )));
        }
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "non-finite value {v} at index {i}"
            )));
        }
        let bound = values.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
        let mut lip_const = 0.0f64;
        for i in 0..values.len() {
            for j in (i + 1)..values.len() {
                let rho = space.distance(i, j);
                if rho > 0.0 {
                    lip_const = lip_const.max((values[i] - values[j]).abs() / rho);
                }
            }
        }
        Ok(Self {
            space,
            values,
            bound,
            lip_const,
        })
    }

    /// Constant function.
    pub fn constant(space: SpaceRef, value: f64) -> Self {
        let values = vec![value; space.len()];
        Self::new(space, values).expect("constant function is well-formed")
    }

    /// Indicator of a member set (given by indices).
    pub fn indicator(space: SpaceRef, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut values = vec![0.0; space.len()];
        for m in members {
            if m >= values.len() {
                return Err(Error::PointOutOfRange {
                    index: m,
                    len: values.len(),
                });
            }
            values[m] = 1.0;
        }
        Self::new(space, values)
    }

    /// The coordinate projection `s -> coords[s][dim]`, when coordinates exist.
    pub fn coordinate(space: SpaceRef, dim: usize) -> Result<Self> {
        let coords = space
            .coords()
            .ok_or_else(|| Error::InvalidValue("space has no coordinates".into()))?;
        let values = coords
            .iter()
            .map(|c| {
                c.get(dim)
                    .copied()
                    .ok_or_else(|| Error::InvalidValue(format!("coordinate dim {dim} missing")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(space.clone(), values)
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    /// `max |f|`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// `max over pairs of |f_i - f_j| / rho(i, j)`.
    pub fn lip_const(&self) -> f64 {
        self.lip_const
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `integral f dmu`.
    pub fn integrate(&self, mu: &Measure) -> Result<f64> {
        if !FiniteMetricSpace::same(&self.space, mu.space()) {
            return Err(Error::SpaceMismatch("function integration".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(mu.weights())
            .map(|(f, w)| f * w)
            .sum())
    }

    /// Pointwise scale by a positive factor.
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        Self::new(
            self.space.clone(),
            self.values.iter().map(|v| alpha * v).collect(),
        )
    }
}

/// A list of functions on a shared space with a common uniform bound.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionFamily {
    space: SpaceRef,
    members: Vec<RealFunction>,
    uniform_bound: f64,
}

impl FunctionFamily {
    /// Family with the uniform bound computed as the max member bound.
    pub fn new(space: SpaceRef, members: Vec<RealFunction>) -> Result<Self> {
        let mut bound = 0.0f64;
        for m in &members {
            if !FiniteMetricSpace::same(&space, m.space()) {
                return Err(Error::SpaceMismatch("function family".into()));
            }
            bound = bound.max(m.bound());
        }
        Ok(Self {
            space,
            members,
            uniform_bound: bound,
        })
    }

    /// Family with an explicitly declared uniform bound (must dominate every
    /// member).
    pub fn with_bound(space: SpaceRef, members: Vec<RealFunction>, bound: f64) -> Result<Self> {
        let fam = Self::new(space, members)?;
        if !bound.is_finite() || fam.uniform_bound > bound + VALIDATION_TOL {
            return Err(Error::InvalidValue(format!(
                "declared bound {bound} is below the member bound {}",
                fam.uniform_bound
            )));
        }
        Ok(Self {
            uniform_bound: bound,
            ..fam
        })
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    pub fn members(&self) -> &[RealFunction] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn uniform_bound(&self) -> f64 {
        self.uniform_bound
    }

    /// Shared Lipschitz constant (max over members); the finite-space form
    /// of equicontinuity.
    pub fn shared_lip(&self) -> f64 {
        self.members
            .iter()
            .fold(0.0f64, |acc, m| acc.max(m.lip_const()))
    }
}

/// Optimality certificate reported with every solved instance.
#[derive(Debug, Clone)]
pub struct KrCertificate {
    pub primal_value: f64,
    pub dual_bound: f64,
    pub duality_gap: f64,
    pub max_primal_violation: f64,
    pub max_dual_violation: f64,
    pub iterations: usize,
}

/// Value, attaining witness, and certificate of one distance computation.
#[derive(Debug, Clone)]
pub struct KrOutcome {
    pub value: f64,
    pub witness: RealFunction,
    pub certificate: KrCertificate,
}

/// Kantorovich-Rubinshtein distance between probability measures on the
/// same space. Fails rather than return an uncertified value.
pub fn kr_distance(mu: &Measure, nu: &Measure) -> Result<KrOutcome> {
    if !FiniteMetricSpace::same(mu.space(), nu.space()) {
        return Err(Error::SpaceMismatch("kr_distance".into()));
    }
    let space = mu.space().clone();
    let c: Vec<f64> = mu
        .weights()
        .iter()
        .zip(nu.weights())
        .map(|(a, b)| a - b)
        .collect();
    let sol = solve_bounded_lipschitz(&c, space.metric())?;
    if sol.duality_gap > LP_CERT_TOL
        || sol.max_primal_violation > LP_CERT_TOL
        || sol.max_dual_violation > LP_CERT_TOL
    {
        return Err(Error::SolverCertification(format!(
            "duality gap {:.3e}, primal violation {:.3e}, dual violation {:.3e}",
            sol.duality_gap, sol.max_primal_violation, sol.max_dual_violation
        )));
    }
    let witness = RealFunction::new(space, sol.f.clone())?;
    Ok(KrOutcome {
        value: sol.primal_value.max(0.0),
        witness,
        certificate: KrCertificate {
            primal_value: sol.primal_value,
            dual_bound: sol.dual_value,
            duality_gap: sol.duality_gap,
            max_primal_violation: sol.max_primal_violation,
            max_dual_violation: sol.max_dual_violation,
            iterations: sol.iterations,
        },
    })
}

/// KR gaps of a measure family against its limit; metrizes weak convergence.
pub fn weak_gap_series(
    mus: &[Measure],
    mu_limit: &Measure,
    params: VerdictParams,
) -> Result<GapSeries> {
    let gaps = exec::try_map_indices(mus.len(), |n| Ok(kr_distance(&mus[n], mu_limit)?.value))?;
    Ok(GapSeries::new(ConditionLabel::Weak, gaps, params))
}

/// `gap(n) = sup over f in D of |integral f d(mu_n - mu)|`: the uniform
/// integration gap over an equicontinuous uniformly bounded family.
pub fn uniform_family_gap(
    family: &FunctionFamily,
    mus: &[Measure],
    mu_limit: &Measure,
    params: VerdictParams,
) -> Result<GapSeries> {
    if family.is_empty() {
        return Err(Error::InvalidValue(
            "uniform_family_gap needs a nonempty family".into(),
        ));
    }
    for m in mus.iter().chain(std::iter::once(mu_limit)) {
        if !FiniteMetricSpace::same(family.space(), m.space()) {
            return Err(Error::SpaceMismatch("uniform_family_gap".into()));
        }
    }
    let gaps = mus
        .iter()
        .map(|mu_n| {
            family
                .members()
                .iter()
                .map(|f| {
                    let d: f64 = f
                        .values()
                        .iter()
                        .zip(mu_n.weights().iter().zip(mu_limit.weights()))
                        .map(|(fv, (a, b))| fv * (a - b))
                        .sum();
                    d.abs()
                })
                .fold(0.0f64, f64::max)
        })
        .collect();
    Ok(GapSeries::new(ConditionLabel::Weak, gaps, params))
}

/// Lower semi-equicontinuity gap of a function family along a sequence on
/// its own space: `gap(n) = max(0, -inf_f (f(s^(n)) - f(s)))`.
pub fn lsec_gap_series(
    family: &FunctionFamily,
    seq: &ConvergentSequence,
    params: VerdictParams,
) -> Result<GapSeries> {
    if !FiniteMetricSpace::same(family.space(), seq.space()) {
        return Err(Error::SpaceMismatch("lsec_gap_series".into()));
    }
    if family.is_empty() {
        return Err(Error::InvalidValue(
            "lsec_gap_series needs a nonempty family".into(),
        ));
    }
    let limit = seq.limit();
    let gaps = seq
        .entries()
        .iter()
        .map(|&e| {
            let inf = family
                .members()
                .iter()
                .map(|f| f.value(e) - f.value(limit))
                .fold(f64::INFINITY, f64::min);
            (-inf).max(0.0)
        })
        .collect();
    Ok(GapSeries::new(ConditionLabel::Weak, gaps, params))
}
