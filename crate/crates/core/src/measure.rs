//! Measures and signed vectors on finite spaces.
//!
//! The computational core behind every "sup over Borel sets" in the
//! continuity conditions: for a signed vector `d` on a finite space, the
//! extrema of `B -> sum_{i in B} d_i` over all subsets `B` are attained at
//! the positive / negative support, so a Jordan decomposition gives closed
//! forms in O(|S|). Exhaustive enumeration over all `2^|S|` subsets survives
//! as the independent oracle (`--oracle` mode and the acceptance suite).

use crate::space::{FiniteMetricSpace, SpaceRef};
use crate::{Error, Result, VALIDATION_TOL};

/// A nonnegative mass vector on a space; the probability variant sums to 1
/// within [`VALIDATION_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    space: SpaceRef,
    weights: Vec<f64>,
}

impl Measure {
    /// Nonnegative measure; no normalization requirement.
    pub fn new(space: SpaceRef, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.len() {
            return Err(Error::InvalidValue(format!(
                "weight vector length {} does not match space size {}",
                weights.len(),
                space.len()
            )));
        }
        if let Some((i, &w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidValue(format!(
                "weight {w} at index {i} must be finite and nonnegative"
            )));
        }
        Ok(Self { space, weights })
    }

    /// Probability measure: nonnegative and summing to 1 within tolerance.
    pub fn probability(space: SpaceRef, weights: Vec<f64>) -> Result<Self> {
        let m = Self::new(space, weights)?;
        let total: f64 = m.weights.iter().sum();
        if (total - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::InvalidValue(format!(
                "probability weights sum to {total}, expected 1"
            )));
        }
        Ok(m)
    }

    /// Point mass at the given index.
    pub fn dirac(space: SpaceRef, index: usize) -> Result<Self> {
        if index >= space.len() {
            return Err(Error::PointOutOfRange {
                index,
                len: space.len(),
            });
        }
        let mut weights = vec![0.0; space.len()];
        weights[index] = 1.0;
        Ok(Self { space, weights })
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_probability(&self) -> bool {
        (self.total() - 1.0).abs() <= VALIDATION_TOL
    }

    /// Signed difference `self - other`.
    pub fn difference(&self, other: &Measure) -> Result<SignedVector> {
        if !FiniteMetricSpace::same(&self.space, &other.space) {
            return Err(Error::SpaceMismatch("measure difference".into()));
        }
        let values = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| a - b)
            .collect();
        SignedVector::new(self.space.clone(), values)
    }
}

/// A real-valued vector on a space; houses measure differences and the
/// per-`s2` slice aggregates the gap functionals reduce to.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedVector {
    space: SpaceRef,
    values: Vec<f64>,
}

impl SignedVector {
    pub fn new(space: SpaceRef, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::InvalidValue(format!(
                "value vector length {} does not match space size {}",
                values.len(),
                space.len()
            )));
        }
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "non-finite value {v} at index {i}"
            )));
        }
        Ok(Self { space, values })
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Jordan decomposition sums: `(sum of positive parts, sum of negative parts)`.
pub fn jordan(d: &SignedVector) -> (f64, f64) {
    jordan_of(d.values())
}

pub(crate) fn jordan_of(values: &[f64]) -> (f64, f64) {
    let mut pos = 0.0;
    let mut neg = 0.0;
    for &v in values {
        if v > 0.0 {
            pos += v;
        } else {
            neg -= v;
        }
    }
    (pos, neg)
}

/// Extrema of `B -> sum_{i in B} d_i` over all subsets `B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetExtremes {
    /// Maximum subset sum (= positive part sum).
    pub sup: f64,
    /// Minimum subset sum (= minus the negative part sum).
    pub inf: f64,
    /// Largest absolute subset sum.
    pub sup_abs: f64,
}

/// Closed-form subset extrema via the Jordan decomposition.
pub fn extreme_over_sets(d: &SignedVector) -> SetExtremes {
    extremes_of(d.values())
}

pub(crate) fn extremes_of(values: &[f64]) -> SetExtremes {
    let (pos, neg) = jordan_of(values);
    SetExtremes {
        sup: pos,
        inf: -neg,
        sup_abs: pos.max(neg),
    }
}

/// Exhaustive enumeration over all `2^|S|` subsets. Independent oracle for
/// [`extreme_over_sets`]; also backs the CLI's `--oracle` mode. Refuses
/// spaces beyond 2^16 subsets.
pub fn extreme_over_sets_enumerated(d: &SignedVector) -> Result<SetExtremes> {
    enumerated_extremes_of(d.values())
}

pub(crate) fn enumerated_extremes_of(values: &[f64]) -> Result<SetExtremes> {
    let n = values.len();
    if n > 16 {
        return Err(Error::OracleTooLarge(n));
    }
    let mut sup = f64::NEG_INFINITY;
    let mut inf = f64::INFINITY;
    for mask in 0u32..(1u32 << n) {
        let mut total = 0.0;
        for (i, &v) in values.iter().enumerate() {
            if mask & (1 << i) != 0 {
                total += v;
            }
        }
        sup = sup.max(total);
        inf = inf.min(total);
    }
    Ok(SetExtremes {
        sup,
        inf,
        sup_abs: sup.max(-inf),
    })
}

/// Total-variation distance between two probability measures: the supremum
/// over all subsets of the measure difference, computed in closed form.
/// Equals half the L1 distance for probability measures.
pub fn tv_distance(mu: &Measure, nu: &Measure) -> Result<f64> {
    let d = mu.difference(nu)?;
    let (pos, neg) = jordan(&d);
    Ok(pos.max(neg))
}

/// TV distance of raw weight slices (no space bookkeeping); used on
/// flattened joints.
pub(crate) fn tv_of_slices(a: &[f64], b: &[f64]) -> f64 {
    let mut pos = 0.0;
    let mut neg = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        if d > 0.0 {
            pos += d;
        } else {
            neg -= d;
        }
    }
    pos.max(neg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::FiniteMetricSpace;
    use proptest::prelude::*;

    fn anon_space(n: usize) -> SpaceRef {
        let positions: Vec<f64> = (0..n).map(|i| i as f64).collect();
        FiniteMetricSpace::line_anon(&positions).unwrap()
    }

    fn signed(values: Vec<f64>) -> SignedVector {
        SignedVector::new(anon_space(values.len()), values).unwrap()
    }

    #[test]
    fn jordan_examples() {
        // brute force over all 8 subsets of (0.3, -0.1, -0.2): sup 0.3, -inf 0.3
        let d = signed(vec![0.3, -0.1, -0.2]);
        let oracle = extreme_over_sets_enumerated(&d).unwrap();
        assert!((oracle.sup - 0.3).abs() < 1e-15);
        assert!((oracle.inf + 0.3).abs() < 1e-15);
        let (pos, neg) = jordan(&d);
        assert!((pos - 0.3).abs() < 1e-15);
        assert!((neg - 0.3).abs() < 1e-15);

        assert_eq!(jordan(&signed(vec![0.0, 0.0, 0.0])), (0.0, 0.0));
        assert_eq!(jordan(&signed(vec![1.0, -1.0])), (1.0, 1.0));
    }

    #[test]
    fn extreme_examples() {
        let e = extreme_over_sets(&signed(vec![0.3, -0.1, -0.2]));
        assert!((e.sup - 0.3).abs() < 1e-15);
        assert!((e.inf + 0.3).abs() < 1e-15);
        assert!((e.sup_abs - 0.3).abs() < 1e-15);

        let z = extreme_over_sets(&signed(vec![0.0, 0.0]));
        assert_eq!((z.sup, z.inf, z.sup_abs), (0.0, 0.0, 0.0));

        // max at the full set, min at the empty set
        let p = extreme_over_sets(&signed(vec![0.2, 0.5]));
        assert!((p.sup - 0.7).abs() < 1e-15);
        assert_eq!(p.inf, 0.0);
        assert!((p.sup_abs - 0.7).abs() < 1e-15);
    }

    #[test]
    fn tv_examples() {
        let s = anon_space(2);
        let mu = Measure::probability(s.clone(), vec![0.5, 0.5]).unwrap();
        let nu = Measure::probability(s.clone(), vec![1.0, 0.0]).unwrap();
        assert!((tv_distance(&mu, &nu).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(tv_distance(&mu, &mu).unwrap(), 0.0);

        let s3 = anon_space(3);
        let a = Measure::probability(s3.clone(), vec![0.2, 0.3, 0.5]).unwrap();
        let b = Measure::probability(s3, vec![0.5, 0.3, 0.2]).unwrap();
        assert!((tv_distance(&a, &b).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn tv_dirac_distance() {
        let s = anon_space(3);
        let dx = Measure::dirac(s.clone(), 0).unwrap();
        let dy = Measure::dirac(s, 2).unwrap();
        assert_eq!(tv_distance(&dx, &dy).unwrap(), 1.0);
        assert_eq!(tv_distance(&dx, &dx).unwrap(), 0.0);
    }

    #[test]
    fn tv_space_mismatch_errors() {
        let a = Measure::probability(anon_space(2), vec![0.5, 0.5]).unwrap();
        let b = Measure::probability(anon_space(3), vec![0.5, 0.25, 0.25]).unwrap();
        assert!(matches!(tv_distance(&a, &b), Err(Error::SpaceMismatch(_))));
    }

    proptest! {
        #[test]
        fn closed_form_matches_enumeration(values in proptest::collection::vec(-1.0f64..1.0, 1..=10)) {
            let d = signed(values);
            let fast = extreme_over_sets(&d);
            let slow = extreme_over_sets_enumerated(&d).unwrap();
            prop_assert!((fast.sup - slow.sup).abs() <= 1e-12);
            prop_assert!((fast.inf - slow.inf).abs() <= 1e-12);
            prop_assert!((fast.sup_abs - slow.sup_abs).abs() <= 1e-12);
        }

        #[test]
        fn jordan_positively_homogeneous(
            values in proptest::collection::vec(-1.0f64..1.0, 1..=8),
            c in 0.01f64..100.0,
        ) {
            let d = signed(values.clone());
            let scaled = signed(values.iter().map(|v| c * v).collect());
            let (p, n) = jordan(&d);
            let (ps, ns) = jordan(&scaled);
            prop_assert!((ps - c * p).abs() <= 1e-9 * (1.0 + ps.abs()));
            prop_assert!((ns - c * n).abs() <= 1e-9 * (1.0 + ns.abs()));
        }

        #[test]
        fn tv_is_a_metric(
            raw in proptest::collection::vec(0.01f64..1.0, 3 * 4..=3 * 4),
        ) {
            // three random probability vectors on a 4-point space
            let s = anon_space(4);
            let normalize = |chunk: &[f64]| {
                let t: f64 = chunk.iter().sum();
                Measure::probability(s.clone(), chunk.iter().map(|x| x / t).collect()).unwrap()
            };
            let a = normalize(&raw[0..4]);
            let b = normalize(&raw[4..8]);
            let c = normalize(&raw[8..12]);
            let ab = tv_distance(&a, &b).unwrap();
            let ba = tv_distance(&b, &a).unwrap();
            let ac = tv_distance(&a, &c).unwrap();
            let cb = tv_distance(&c, &b).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12);
            prop_assert!(tv_distance(&a, &a).unwrap() <= 1e-12);
            prop_assert!(ab <= ac + cb + 1e-12);
            // half-L1 identity for probability measures
            let l1: f64 = a.weights().iter().zip(b.weights()).map(|(x, y)| (x - y).abs()).sum();
            prop_assert!((ab - 0.5 * l1).abs() <= 1e-12);
        }

        #[test]
        fn jordan_difference_is_total(values in proptest::collection::vec(-1.0f64..1.0, 1..=12)) {
            let d = signed(values.clone());
            let (pos, neg) = jordan(&d);
            let total: f64 = values.iter().sum();
            prop_assert!((pos - neg - total).abs() <= 1e-12);
        }
    }
}
