//! Joint measures on `S1 x S2`, kernel families along sequences,
//! marginalization, integration against mixing measures, and the
//! pushforward of function families through a kernel.

use std::sync::Arc;

use crate::kr::{weak_gap_series, FunctionFamily, RealFunction};
use crate::measure::Measure;
use crate::regularize::ParamFunction;
use crate::series::{GapSeries, VerdictParams};
use crate::space::{product_space, ConvergentSequence, FiniteMetricSpace, SpaceRef};
use crate::{Error, Result, VALIDATION_TOL};

/// A probability measure on a product space, stored as an s1-major mass
/// matrix: `mass[s1][s2]`, nonnegative, total 1 within [`VALIDATION_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct JointMeasure {
    s1_space: SpaceRef,
    s2_space: SpaceRef,
    mass: Vec<Vec<f64>>,
}

impl JointMeasure {
    pub fn new(s1_space: SpaceRef, s2_space: SpaceRef, mass: Vec<Vec<f64>>) -> Result<Self> {
        if mass.len() != s1_space.len() || mass.iter().any(|r| r.len() != s2_space.len()) {
            return Err(Error::InvalidValue(format!(
                "mass must be a {}x{} matrix",
                s1_space.len(),
                s2_space.len()
            )));
        }
        let mut total = 0.0;
        for row in &mass {
            for &v in row {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidValue(format!(
                        "mass entries must be finite and nonnegative, got {v}"
                    )));
                }
                total += v;
            }
        }
        if (total - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::InvalidValue(format!(
                "mass totals {total}, expected 1"
            )));
        }
        Ok(Self {
            s1_space,
            s2_space,
            mass,
        })
    }

    /// Point mass at `(s1, s2)`.
    pub fn dirac(s1_space: SpaceRef, s2_space: SpaceRef, s1: usize, s2: usize) -> Result<Self> {
        let mut mass = vec![vec![0.0; s2_space.len()]; s1_space.len()];
        if s1 >= s1_space.len() {
            return Err(Error::PointOutOfRange {
                index: s1,
                len: s1_space.len(),
            });
        }
        if s2 >= s2_space.len() {
            return Err(Error::PointOutOfRange {
                index: s2,
                len: s2_space.len(),
            });
        }
        mass[s1][s2] = 1.0;
        Self::new(s1_space, s2_space, mass)
    }

    /// Product measure `mu (x) nu`.
    pub fn product(mu: &Measure, nu: &Measure) -> Result<Self> {
        let mass = mu
            .weights()
            .iter()
            .map(|&a| nu.weights().iter().map(|&b| a * b).collect())
            .collect();
        Self::new(mu.space().clone(), nu.space().clone(), mass)
    }

    pub fn s1_space(&self) -> &SpaceRef {
        &self.s1_space
    }

    pub fn s2_space(&self) -> &SpaceRef {
        &self.s2_space
    }

    pub fn mass(&self) -> &Vec<Vec<f64>> {
        &self.mass
    }

    pub fn value(&self, s1: usize, s2: usize) -> f64 {
        self.mass[s1][s2]
    }

    /// Flattened s1-major view of the mass matrix.
    pub fn flat(&self) -> Vec<f64> {
        self.mass.iter().flatten().copied().collect()
    }

    fn same_shape(&self, other: &JointMeasure) -> bool {
        FiniteMetricSpace::same(&self.s1_space, &other.s1_space)
            && FiniteMetricSpace::same(&self.s2_space, &other.s2_space)
    }
}

/// S1-marginal: row sums of the mass matrix.
pub fn marginal_s1(p: &JointMeasure) -> Measure {
    let weights = p.mass().iter().map(|row| row.iter().sum()).collect();
    Measure::new(p.s1_space().clone(), weights).expect("marginal of a joint measure is a measure")
}

/// S2-marginal: column sums of the mass matrix.
pub fn marginal_s2(p: &JointMeasure) -> Measure {
    let cols = p.s2_space().len();
    let mut weights = vec![0.0; cols];
    for row in p.mass() {
        for (j, &v) in row.iter().enumerate() {
            weights[j] += v;
        }
    }
    Measure::new(p.s2_space().clone(), weights).expect("marginal of a joint measure is a measure")
}

/// Where a family came from, when it was built from a parameterized kernel
/// along a declared sequence.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub kernel: Arc<ParamKernel>,
    pub param_seq: ConvergentSequence,
    pub s4_seq: Option<ConvergentSequence>,
}

/// An indexed family `P_n -> P` of joints on shared spaces: the object every
/// continuity condition quantifies over.
#[derive(Debug, Clone)]
pub struct KernelFamily {
    joints: Vec<JointMeasure>,
    limit: JointMeasure,
    provenance: Option<Provenance>,
}

impl KernelFamily {
    pub fn new(joints: Vec<JointMeasure>, limit: JointMeasure) -> Result<Self> {
        for j in &joints {
            if !j.same_shape(&limit) {
                return Err(Error::SpaceMismatch("kernel family".into()));
            }
        }
        Ok(Self {
            joints,
            limit,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn joints(&self) -> &[JointMeasure] {
        &self.joints
    }

    pub fn joint(&self, n: usize) -> &JointMeasure {
        &self.joints[n]
    }

    pub fn limit(&self) -> &JointMeasure {
        &self.limit
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn s1_space(&self) -> &SpaceRef {
        self.limit.s1_space()
    }

    pub fn s2_space(&self) -> &SpaceRef {
        self.limit.s2_space()
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    /// Difference matrix `P_n - P` for index n (0-based).
    pub fn delta(&self, n: usize) -> Vec<Vec<f64>> {
        self.joints[n]
            .mass()
            .iter()
            .zip(self.limit.mass())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect()
    }
}

/// A stochastic kernel as a finite table: one joint measure per parameter
/// point (or per pair of parameter points when an auxiliary space is present).
#[derive(Debug, Clone)]
pub struct ParamKernel {
    s1_space: SpaceRef,
    s2_space: SpaceRef,
    param_space: SpaceRef,
    s4_space: Option<SpaceRef>,
    /// Row-major over (param, s4); s4 extent 1 when absent.
    table: Vec<JointMeasure>,
}

impl ParamKernel {
    pub fn new(
        s1_space: SpaceRef,
        s2_space: SpaceRef,
        param_space: SpaceRef,
        s4_space: Option<SpaceRef>,
        table: Vec<JointMeasure>,
    ) -> Result<Self> {
        let s4_len = s4_space.as_ref().map_or(1, |s| s.len());
        let expected = param_space.len() * s4_len;
        if table.len() != expected {
            return Err(Error::InvalidValue(format!(
                "kernel table has {} entries, expected {expected}",
                table.len()
            )));
        }
        for j in &table {
            if !FiniteMetricSpace::same(j.s1_space(), &s1_space)
                || !FiniteMetricSpace::same(j.s2_space(), &s2_space)
            {
                return Err(Error::SpaceMismatch("kernel table".into()));
            }
        }
        Ok(Self {
            s1_space,
            s2_space,
            param_space,
            s4_space,
            table,
        })
    }

    pub fn s1_space(&self) -> &SpaceRef {
        &self.s1_space
    }

    pub fn s2_space(&self) -> &SpaceRef {
        &self.s2_space
    }

    pub fn param_space(&self) -> &SpaceRef {
        &self.param_space
    }

    pub fn s4_space(&self) -> Option<&SpaceRef> {
        self.s4_space.as_ref()
    }

    pub fn table(&self) -> &[JointMeasure] {
        &self.table
    }

    /// The joint at a parameter point (and auxiliary point when present).
    pub fn at(&self, param: usize, s4: Option<usize>) -> Result<&JointMeasure> {
        let s4_len = self.s4_space.as_ref().map_or(1, |s| s.len());
        if param >= self.param_space.len() {
            return Err(Error::MissingTableEntry(format!("param index {param}")));
        }
        let s4_idx = match (&self.s4_space, s4) {
            (Some(s4_space), Some(idx)) => {
                if idx >= s4_space.len() {
                    return Err(Error::MissingTableEntry(format!("s4 index {idx}")));
                }
                idx
            }
            (Some(_), None) => {
                return Err(Error::InvalidValue(
                    "kernel has an auxiliary space; an s4 point is required".into(),
                ))
            }
            (None, Some(_)) => {
                return Err(Error::InvalidValue("kernel has no auxiliary space".into()))
            }
            (None, None) => 0,
        };
        Ok(&self.table[param * s4_len + s4_idx])
    }
}

/// Builds the family `P_n = K(seq_n)`, `P = K(limit)` along a declared
/// sequence on the parameter space (paired with an auxiliary sequence when
/// the kernel has one).
pub fn family_from_param(
    kernel: &Arc<ParamKernel>,
    seq: &ConvergentSequence,
    s4_seq: Option<&ConvergentSequence>,
) -> Result<KernelFamily> {
    if !FiniteMetricSpace::same(seq.space(), kernel.param_space()) {
        return Err(Error::SpaceMismatch("family_from_param sequence".into()));
    }
    match (kernel.s4_space(), s4_seq) {
        (Some(s4_space), Some(s4)) => {
            if !FiniteMetricSpace::same(s4.space(), s4_space) {
                return Err(Error::SpaceMismatch(
                    "family_from_param auxiliary sequence".into(),
                ));
            }
            if s4.len() != seq.len() {
                return Err(Error::InvalidValue(
                    "parameter and auxiliary sequences must have equal length".into(),
                ));
            }
        }
        (Some(_), None) => {
            return Err(Error::InvalidValue(
                "kernel has an auxiliary space; an auxiliary sequence is required".into(),
            ))
        }
        (None, Some(_)) => return Err(Error::InvalidValue("kernel has no auxiliary space".into())),
        (None, None) => {}
    }
    let joints = seq
        .entries()
        .iter()
        .enumerate()
        .map(|(n, &p)| {
            let s4 = s4_seq.map(|s| s.entries()[n]);
            kernel.at(p, s4).cloned()
        })
        .collect::<Result<Vec<_>>>()?;
    let limit = kernel.at(seq.limit(), s4_seq.map(|s| s.limit()))?.clone();
    Ok(
        KernelFamily::new(joints, limit)?.with_provenance(Provenance {
            kernel: kernel.clone(),
            param_seq: seq.clone(),
            s4_seq: s4_seq.cloned(),
        }),
    )
}

/// Mixes the kernel table against a measure on the parameter space:
/// entrywise `sum_s3 mu(s3) * Xi[(s3, s4)]`.
pub fn integrate_kernel(xi: &ParamKernel, mu: &Measure, s4: Option<usize>) -> Result<JointMeasure> {
    if !FiniteMetricSpace::same(mu.space(), xi.param_space()) {
        return Err(Error::SpaceMismatch(
            "integrate_kernel mixing measure".into(),
        ));
    }
    let rows = xi.s1_space().len();
    let cols = xi.s2_space().len();
    let mut mass = vec![vec![0.0; cols]; rows];
    for (s3, &w) in mu.weights().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let joint = xi.at(s3, s4)?;
        for (i, row) in joint.mass().iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                mass[i][j] += w * v;
            }
        }
    }
    JointMeasure::new(xi.s1_space().clone(), xi.s2_space().clone(), mass)
}

/// Output of [`hat_family`]: the mixed family plus the weak-convergence
/// hypothesis check on the mixing measures (reported, not enforced, so
/// behavior under failed hypotheses stays observable).
#[derive(Debug, Clone)]
pub struct HatFamily {
    pub family: KernelFamily,
    pub weak_hypothesis: GapSeries,
}

/// Builds the integrated family `n -> integrate(Xi, mu_n, s4_n)` with limit
/// `integrate(Xi, mu, s4)`.
pub fn hat_family(
    xi: &Arc<ParamKernel>,
    mus: &[Measure],
    mu_limit: &Measure,
    s4_seq: Option<&ConvergentSequence>,
    params: VerdictParams,
) -> Result<HatFamily> {
    if let Some(s4) = s4_seq {
        if s4.len() != mus.len() {
            return Err(Error::InvalidValue(
                "auxiliary sequence length must match the mixing list".into(),
            ));
        }
    }
    let weak_hypothesis = weak_gap_series(mus, mu_limit, params)?;
    let joints = mus
        .iter()
        .enumerate()
        .map(|(n, mu)| integrate_kernel(xi, mu, s4_seq.map(|s| s.entries()[n])))
        .collect::<Result<Vec<_>>>()?;
    let limit = integrate_kernel(xi, mu_limit, s4_seq.map(|s| s.limit()))?;
    Ok(HatFamily {
        family: KernelFamily::new(joints, limit)?,
        weak_hypothesis,
    })
}

/// A kernel assigning a plain measure to each parameter point
/// (`s3 -> Q(.|s3)` on a value space); the integrating side of
/// [`push_family`].
#[derive(Debug, Clone)]
pub struct MeasureKernel {
    value_space: SpaceRef,
    param_space: SpaceRef,
    rows: Vec<Measure>,
}

impl MeasureKernel {
    pub fn new(value_space: SpaceRef, param_space: SpaceRef, rows: Vec<Measure>) -> Result<Self> {
        if rows.len() != param_space.len() {
            return Err(Error::InvalidValue(format!(
                "kernel needs one measure per parameter point ({} != {})",
                rows.len(),
                param_space.len()
            )));
        }
        for r in &rows {
            if !FiniteMetricSpace::same(r.space(), &value_space) {
                return Err(Error::SpaceMismatch("measure kernel rows".into()));
            }
            if !r.is_probability() {
                return Err(Error::InvalidValue(
                    "kernel rows must be probability measures".into(),
                ));
            }
        }
        Ok(Self {
            value_space,
            param_space,
            rows,
        })
    }

    pub fn value_space(&self) -> &SpaceRef {
        &self.value_space
    }

    pub fn param_space(&self) -> &SpaceRef {
        &self.param_space
    }

    pub fn row(&self, param: usize) -> &Measure {
        &self.rows[param]
    }

    pub fn rows(&self) -> &[Measure] {
        &self.rows
    }
}

/// Pushforward of a family through a kernel.
#[derive(Debug, Clone)]
pub struct PushedFamily {
    /// `{ (s1, s3) -> sum_s2 f(s1, s2) Q(s2|s3) : f in A }` on the product
    /// space `S1 x S3` (a-major ordering).
    pub family: FunctionFamily,
    pub product_space: SpaceRef,
}

/// Integrates out the second variable of each member against `Q`:
/// `g_f(s1, s3) = sum_s2 f(s1, s2) Q(s2|s3)`. The output family is bounded
/// by the input's shared bound.
pub fn push_family(funcs: &[ParamFunction], q: &MeasureKernel) -> Result<PushedFamily> {
    let first = funcs
        .first()
        .ok_or_else(|| Error::InvalidValue("push_family needs a nonempty family".into()))?;
    let s1_space = first.s1_space().clone();
    let s2_space = first.s2_space().clone();
    if !FiniteMetricSpace::same(&s2_space, q.value_space()) {
        return Err(Error::SpaceMismatch("push_family kernel values".into()));
    }
    let s3_space = q.param_space().clone();
    let prod = product_space(&s1_space, &s3_space);
    let mut shared_bound = 0.0f64;
    let mut members = Vec::with_capacity(funcs.len());
    for f in funcs {
        if !FiniteMetricSpace::same(f.s1_space(), &s1_space)
            || !FiniteMetricSpace::same(f.s2_space(), &s2_space)
        {
            return Err(Error::SpaceMismatch("push_family members".into()));
        }
        shared_bound = shared_bound.max(f.uniform_bound());
        let mut values = Vec::with_capacity(prod.len());
        for s1 in 0..s1_space.len() {
            for s3 in 0..s3_space.len() {
                let g: f64 = f.values()[s1]
                    .iter()
                    .zip(q.row(s3).weights())
                    .map(|(fv, w)| fv * w)
                    .sum();
                values.push(g);
            }
        }
        members.push(RealFunction::new(prod.clone(), values)?);
    }
    let family = FunctionFamily::with_bound(prod.clone(), members, shared_bound)?;
    Ok(PushedFamily {
        family,
        product_space: prod,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spaces(n1: usize, n2: usize) -> (SpaceRef, SpaceRef) {
        let p1: Vec<f64> = (0..n1).map(|i| i as f64).collect();
        let p2: Vec<f64> = (0..n2).map(|i| i as f64).collect();
        (
            FiniteMetricSpace::line_anon(&p1).unwrap(),
            FiniteMetricSpace::line_anon(&p2).unwrap(),
        )
    }

    #[test]
    fn marginal_examples() {
        let (s1, s2) = spaces(2, 2);
        let p = JointMeasure::new(s1, s2, vec![vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        let m1 = marginal_s1(&p);
        let m2 = marginal_s2(&p);
        assert!((m1.weights()[0] - 0.3).abs() < 1e-15);
        assert!((m1.weights()[1] - 0.7).abs() < 1e-15);
        assert!((m2.weights()[0] - 0.4).abs() < 1e-15);
        assert!((m2.weights()[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn product_measure_marginals() {
        let (s1, s2) = spaces(3, 2);
        let mu = Measure::probability(s1.clone(), vec![0.5, 0.25, 0.25]).unwrap();
        let nu = Measure::probability(s2.clone(), vec![0.125, 0.875]).unwrap();
        let p = JointMeasure::product(&mu, &nu).unwrap();
        assert_eq!(marginal_s1(&p).weights(), mu.weights());
        assert_eq!(marginal_s2(&p).weights(), nu.weights());
    }

    fn simple_kernel(
        s1: &SpaceRef,
        s2: &SpaceRef,
        param: &SpaceRef,
        joints: Vec<JointMeasure>,
    ) -> Arc<ParamKernel> {
        Arc::new(ParamKernel::new(s1.clone(), s2.clone(), param.clone(), None, joints).unwrap())
    }

    #[test]
    fn family_from_param_constant_sequence() {
        let (s1, s2) = spaces(2, 2);
        let param = FiniteMetricSpace::line_anon(&[0.0, 1.0]).unwrap();
        let j0 = JointMeasure::dirac(s1.clone(), s2.clone(), 0, 0).unwrap();
        let j1 = JointMeasure::dirac(s1.clone(), s2.clone(), 1, 1).unwrap();
        let k = simple_kernel(&s1, &s2, &param, vec![j0.clone(), j1]);
        let seq = ConvergentSequence::new(param, vec![0, 0, 0], 0).unwrap();
        let fam = family_from_param(&k, &seq, None).unwrap();
        assert_eq!(fam.len(), 3);
        for j in fam.joints() {
            assert_eq!(j, &j0);
        }
        assert_eq!(fam.limit(), &j0);
        assert!(fam.provenance().is_some());
    }

    #[test]
    fn family_from_param_indicator_grid() {
        // indicator kernel on the grid {0} u {1/k}: table[s3] = dirac((s3, .))
        let grid = FiniteMetricSpace::line_anon(&[0.0, 0.25, 0.5, 1.0]).unwrap();
        let s2 = FiniteMetricSpace::singleton("o");
        let joints: Vec<JointMeasure> = (0..grid.len())
            .map(|i| JointMeasure::dirac(grid.clone(), s2.clone(), i, 0).unwrap())
            .collect();
        let k = simple_kernel(&grid, &s2, &grid, joints);
        let seq = ConvergentSequence::new(grid.clone(), vec![3, 2, 1], 0).unwrap();
        let fam = family_from_param(&k, &seq, None).unwrap();
        assert_eq!(fam.len(), 3);
        for (n, &entry) in seq.entries().iter().enumerate() {
            assert_eq!(fam.joint(n).value(entry, 0), 1.0);
        }
        assert_eq!(fam.limit().value(0, 0), 1.0);
    }

    #[test]
    fn integrate_examples() {
        let (s1, s2) = spaces(2, 2);
        let param = FiniteMetricSpace::line_anon(&[0.0, 1.0]).unwrap();
        let m1 = JointMeasure::new(s1.clone(), s2.clone(), vec![vec![0.5, 0.0], vec![0.5, 0.0]])
            .unwrap();
        let m2 = JointMeasure::new(s1.clone(), s2.clone(), vec![vec![0.0, 0.5], vec![0.0, 0.5]])
            .unwrap();
        let xi = simple_kernel(&s1, &s2, &param, vec![m1.clone(), m2.clone()]);

        // point-mass mixing returns the table entry exactly
        let dirac = Measure::dirac(param.clone(), 1).unwrap();
        assert_eq!(integrate_kernel(&xi, &dirac, None).unwrap(), m2);

        // half-half mixing is the entrywise average
        let mix = Measure::probability(param.clone(), vec![0.5, 0.5]).unwrap();
        let out = integrate_kernel(&xi, &mix, None).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = 0.5 * m1.value(i, j) + 0.5 * m2.value(i, j);
                assert!((out.value(i, j) - expect).abs() < 1e-15);
            }
        }

        // a table constant in the parameter ignores the mixing measure
        let xi_const = simple_kernel(&s1, &s2, &param, vec![m1.clone(), m1.clone()]);
        let out1 = integrate_kernel(&xi_const, &dirac, None).unwrap();
        let out2 = integrate_kernel(&xi_const, &mix, None).unwrap();
        assert_eq!(out1, out2);
    }

    #[test]
    fn integrate_is_affine_and_commutes_with_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let (s1, s2) = spaces(3, 3);
        let param = FiniteMetricSpace::line_anon(&[0.0, 1.0, 2.0]).unwrap();
        let random_joint = |rng: &mut ChaCha8Rng| {
            let mut mass: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..3).map(|_| rng.random_range(0.01..1.0)).collect())
                .collect();
            let t: f64 = mass.iter().flatten().sum();
            for row in &mut mass {
                for v in row {
                    *v /= t;
                }
            }
            JointMeasure::new(s1.clone(), s2.clone(), mass).unwrap()
        };
        let joints: Vec<JointMeasure> = (0..3).map(|_| random_joint(&mut rng)).collect();
        let xi = simple_kernel(&s1, &s2, &param, joints.clone());

        let draw = |rng: &mut ChaCha8Rng| {
            let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..1.0)).collect();
            let t: f64 = raw.iter().sum();
            Measure::probability(param.clone(), raw.iter().map(|x| x / t).collect()).unwrap()
        };
        for _ in 0..10 {
            let mu = draw(&mut rng);
            let nu = draw(&mut rng);
            let alpha = rng.random_range(0.0..1.0);
            let blend = Measure::probability(
                param.clone(),
                mu.weights()
                    .iter()
                    .zip(nu.weights())
                    .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
                    .collect(),
            )
            .unwrap();
            let lhs = integrate_kernel(&xi, &blend, None).unwrap();
            let ia = integrate_kernel(&xi, &mu, None).unwrap();
            let ib = integrate_kernel(&xi, &nu, None).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let expect = alpha * ia.value(i, j) + (1.0 - alpha) * ib.value(i, j);
                    assert!((lhs.value(i, j) - expect).abs() < 1e-12);
                }
            }
            // marginalization commutes with mixing
            let m = marginal_s1(&lhs);
            for i in 0..3 {
                let expect: f64 = mu
                    .weights()
                    .iter()
                    .zip(&joints)
                    .map(|(w, j)| alpha * w * marginal_s1(j).weights()[i])
                    .sum::<f64>()
                    + nu.weights()
                        .iter()
                        .zip(&joints)
                        .map(|(w, j)| (1.0 - alpha) * w * marginal_s1(j).weights()[i])
                        .sum::<f64>();
                assert!((m.weights()[i] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hat_family_constant_mixing_is_constant() {
        let (s1, s2) = spaces(2, 2);
        let param = FiniteMetricSpace::line_anon(&[0.0, 1.0]).unwrap();
        let joints = vec![
            JointMeasure::dirac(s1.clone(), s2.clone(), 0, 0).unwrap(),
            JointMeasure::dirac(s1.clone(), s2.clone(), 1, 1).unwrap(),
        ];
        let xi = simple_kernel(&s1, &s2, &param, joints);
        let mu = Measure::probability(param.clone(), vec![0.25, 0.75]).unwrap();
        let mus = vec![mu.clone(), mu.clone(), mu.clone()];
        let hat = hat_family(&xi, &mus, &mu, None, VerdictParams::default()).unwrap();
        for j in hat.family.joints() {
            assert_eq!(j, hat.family.limit());
        }
        assert!(hat.weak_hypothesis.gaps.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn hat_family_point_mass_reduces_to_param_family() {
        let (s1, s2) = spaces(2, 2);
        let param = FiniteMetricSpace::line_anon(&[0.0, 0.5, 1.0]).unwrap();
        let joints: Vec<JointMeasure> = (0..3)
            .map(|i| JointMeasure::dirac(s1.clone(), s2.clone(), i % 2, (i + 1) % 2).unwrap())
            .collect();
        let xi = simple_kernel(&s1, &s2, &param, joints);
        let seq = ConvergentSequence::new(param.clone(), vec![2, 1], 0).unwrap();
        let via_param = family_from_param(&xi, &seq, None).unwrap();

        let mus: Vec<Measure> = seq
            .entries()
            .iter()
            .map(|&e| Measure::dirac(param.clone(), e).unwrap())
            .collect();
        let limit = Measure::dirac(param.clone(), seq.limit()).unwrap();
        let hat = hat_family(&xi, &mus, &limit, None, VerdictParams::default()).unwrap();
        assert_eq!(hat.family.joints(), via_param.joints());
        assert_eq!(hat.family.limit(), via_param.limit());
    }

    #[test]
    fn push_family_examples() {
        let s1 = FiniteMetricSpace::line_anon(&[0.0, 1.0]).unwrap();
        let s2 = FiniteMetricSpace::line_anon(&[0.0, 1.0]).unwrap();
        let s3 = FiniteMetricSpace::line_anon(&[0.0, 1.0]).unwrap();

        // f(s1, s2) = s1 * s2 pushed through the fair-coin kernel gives
        // g(s1, .) = 0.5 * s1
        let f = ParamFunction::new(s1.clone(), s2.clone(), vec![vec![0.0, 0.0], vec![0.0, 1.0]])
            .unwrap();
        let q = MeasureKernel::new(
            s2.clone(),
            s3.clone(),
            vec![
                Measure::probability(s2.clone(), vec![0.5, 0.5]).unwrap(),
                Measure::probability(s2.clone(), vec![0.5, 0.5]).unwrap(),
            ],
        )
        .unwrap();
        let pushed = push_family(&[f], &q).unwrap();
        let g = &pushed.family.members()[0];
        // product index = s1 * |S3| + s3
        assert_eq!(g.value(0), 0.0);
        assert_eq!(g.value(1), 0.0);
        assert_eq!(g.value(2), 0.5);
        assert_eq!(g.value(3), 0.5);

        // f independent of s2 passes through unchanged
        let f_ind = ParamFunction::new(
            s1.clone(),
            s2.clone(),
            vec![vec![0.3, 0.3], vec![-0.7, -0.7]],
        )
        .unwrap();
        let pushed = push_family(&[f_ind], &q).unwrap();
        let g = &pushed.family.members()[0];
        assert!((g.value(0) - 0.3).abs() < 1e-15);
        assert!((g.value(2) + 0.7).abs() < 1e-15);

        // Q independent of s3 makes the output constant in s3
        let q_skew = MeasureKernel::new(
            s2.clone(),
            s3.clone(),
            vec![
                Measure::probability(s2.clone(), vec![0.25, 0.75]).unwrap(),
                Measure::probability(s2.clone(), vec![0.25, 0.75]).unwrap(),
            ],
        )
        .unwrap();
        let f2 = ParamFunction::new(s1.clone(), s2.clone(), vec![vec![1.0, 0.0], vec![0.0, 1.0]])
            .unwrap();
        let pushed = push_family(&[f2], &q_skew).unwrap();
        let g = &pushed.family.members()[0];
        assert_eq!(g.value(0), g.value(1));
        assert_eq!(g.value(2), g.value(3));
    }

    #[test]
    fn push_family_bound_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let s1 = FiniteMetricSpace::line_anon(&[0.0, 1.0, 2.0]).unwrap();
            let s2 = FiniteMetricSpace::line_anon(&[0.0, 1.0, 2.0]).unwrap();
            let s3 = FiniteMetricSpace::line_anon(&[0.0, 1.0]).unwrap();
            let funcs: Vec<ParamFunction> = (0..3)
                .map(|_| {
                    let vals: Vec<Vec<f64>> = (0..3)
                        .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
                        .collect();
                    ParamFunction::new(s1.clone(), s2.clone(), vals).unwrap()
                })
                .collect();
            let rows: Vec<Measure> = (0..2)
                .map(|_| {
                    let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.01..1.0)).collect();
                    let t: f64 = raw.iter().sum();
                    Measure::probability(s2.clone(), raw.iter().map(|x| x / t).collect()).unwrap()
                })
                .collect();
            let q = MeasureKernel::new(s2.clone(), s3.clone(), rows).unwrap();
            let shared: f64 = funcs.iter().map(|f| f.uniform_bound()).fold(0.0, f64::max);
            let pushed = push_family(&funcs, &q).unwrap();
            assert!(pushed.family.uniform_bound() <= shared);
            for g in pushed.family.members() {
                assert!(g.bound() <= shared + 1e-12);
            }
        }
    }

    #[test]
    fn kernel_with_auxiliary_space_indexes_correctly() {
        let (s1, s2) = spaces(2, 2);
        let param = FiniteMetricSpace::line_anon(&[0.0, 1.0]).unwrap();
        let s4 = FiniteMetricSpace::line_anon(&[0.0, 1.0, 2.0]).unwrap();
        let mut table = Vec::new();
        for p in 0..2 {
            for a in 0..3 {
                table.push(JointMeasure::dirac(s1.clone(), s2.clone(), p, a % 2).unwrap());
            }
        }
        let k = ParamKernel::new(s1, s2, param.clone(), Some(s4.clone()), table).unwrap();
        assert_eq!(k.at(1, Some(2)).unwrap().value(1, 0), 1.0);
        assert!(k.at(0, None).is_err());
    }
}
