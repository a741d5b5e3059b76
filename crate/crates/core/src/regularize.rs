//! Inf-convolution regularization and the families it generates.
//!
//! `inf_convolve(f, m)` computes `s -> min over s' of [f(s') + m * rho(s, s')]`,
//! the m-Lipschitz lower approximation of `f`. On a finite space recovery is
//! exact at finite m: once `m >= ceil(lip(f))` the minimum is attained at
//! `s' = s` and the operator returns `f` unchanged, which turns the
//! asymptotic statement "`r^(m) increases to f`" into an equality check.

use crate::kr::{FunctionFamily, RealFunction};
use crate::space::{FiniteMetricSpace, SpaceRef};
use crate::{Error, Result, VALIDATION_TOL};

/// A real function of two variables `f(s1, s2)` with `s1` in the parameter
/// role, stored s1-major, with a uniform bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamFunction {
    s1_space: SpaceRef,
    s2_space: SpaceRef,
    values: Vec<Vec<f64>>,
    uniform_bound: f64,
}

impl ParamFunction {
    pub fn new(s1_space: SpaceRef, s2_space: SpaceRef, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != s1_space.len() || values.iter().any(|row| row.len() != s2_space.len()) {
            return Err(Error::InvalidValue(format!(
                "parameterized function must be a {}x{} value matrix",
                s1_space.len(),
                s2_space.len()
            )));
        }
        let mut bound = 0.0f64;
        for row in &values {
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::InvalidValue("non-finite function value".into()));
                }
                bound = bound.max(v.abs());
            }
        }
        Ok(Self {
            s1_space,
            s2_space,
            values,
            uniform_bound: bound,
        })
    }

    /// Declares a uniform bound larger than the computed one (for families
    /// sharing a bound).
    pub fn with_bound(self, bound: f64) -> Result<Self> {
        if !bound.is_finite() || self.uniform_bound > bound + VALIDATION_TOL {
            return Err(Error::InvalidValue(format!(
                "declared bound {bound} is below max |f| = {}",
                self.uniform_bound
            )));
        }
        Ok(Self {
            uniform_bound: bound,
            ..self
        })
    }

    pub fn s1_space(&self) -> &SpaceRef {
        &self.s1_space
    }

    pub fn s2_space(&self) -> &SpaceRef {
        &self.s2_space
    }

    pub fn values(&self) -> &Vec<Vec<f64>> {
        &self.values
    }

    pub fn value(&self, s1: usize, s2: usize) -> f64 {
        self.values[s1][s2]
    }

    pub fn uniform_bound(&self) -> f64 {
        self.uniform_bound
    }

    /// The section `s2 -> f(s1, s2)`.
    pub fn section(&self, s1: usize) -> Result<RealFunction> {
        if s1 >= self.s1_space.len() {
            return Err(Error::PointOutOfRange {
                index: s1,
                len: self.s1_space.len(),
            });
        }
        RealFunction::new(self.s2_space.clone(), self.values[s1].clone())
    }

    /// Largest Lipschitz constant of any s2-section.
    pub fn section_lip(&self) -> f64 {
        let mut lip = 0.0f64;
        let n = self.s2_space.len();
        for row in &self.values {
            for i in 0..n {
                for j in (i + 1)..n {
                    let rho = self.s2_space.distance(i, j);
                    if rho > 0.0 {
                        lip = lip.max((row[i] - row[j]).abs() / rho);
                    }
                }
            }
        }
        lip
    }
}

fn convolve_values(values: &[f64], space: &FiniteMetricSpace, m: u32) -> Vec<f64> {
    let mf = f64::from(m);
    (0..values.len())
        .map(|s| {
            values
                .iter()
                .enumerate()
                .map(|(sp, &v)| v + mf * space.distance(s, sp))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// The m-Lipschitz lower regularization of `f`. The result has Lipschitz
/// constant at most `m` and the same bound as `f`.
pub fn inf_convolve(f: &RealFunction, m: u32) -> RealFunction {
    assert!(m >= 1, "inf-convolution index m must be a positive integer");
    let values = convolve_values(f.values(), f.space(), m);
    RealFunction::new(f.space().clone(), values).expect("regularized values are finite")
}

/// The s2-section regularization `r^(m)_{f(s1, .)}` of a parameterized
/// function at a fixed `s1`.
pub fn inf_convolve_param(f: &ParamFunction, s1: usize, m: u32) -> Result<RealFunction> {
    assert!(m >= 1, "inf-convolution index m must be a positive integer");
    if s1 >= f.s1_space().len() {
        return Err(Error::PointOutOfRange {
            index: s1,
            len: f.s1_space().len(),
        });
    }
    let values = convolve_values(&f.values()[s1], f.s2_space(), m);
    RealFunction::new(f.s2_space().clone(), values)
}

/// The regularized family: `{ s2 -> r^(m)_{f(s1, .)}(s2) : f in A, s1 in S1 }`.
/// Uniformly bounded by the shared bound of `A` and m-Lipschitz.
pub fn regularized_family(fams: &[ParamFunction], m: u32) -> Result<FunctionFamily> {
    let first = fams
        .first()
        .ok_or_else(|| Error::InvalidValue("regularized_family needs a nonempty input".into()))?;
    let s1_space = first.s1_space().clone();
    let s2_space = first.s2_space().clone();
    let mut shared_bound = 0.0f64;
    for f in fams {
        if !FiniteMetricSpace::same(f.s1_space(), &s1_space)
            || !FiniteMetricSpace::same(f.s2_space(), &s2_space)
        {
            return Err(Error::SpaceMismatch("regularized_family".into()));
        }
        shared_bound = shared_bound.max(f.uniform_bound());
    }
    let mut members = Vec::with_capacity(fams.len() * s1_space.len());
    for f in fams {
        for s1 in 0..s1_space.len() {
            members.push(inf_convolve_param(f, s1, m)?);
        }
    }
    FunctionFamily::with_bound(s2_space, members, shared_bound)
}
