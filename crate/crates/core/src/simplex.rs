//! Dense simplex solver for the bounded-Lipschitz linear program.
//!
//! The program being solved, for a cost vector `c` (a difference of
//! probability weights) and a metric `rho` on k points:
//!
//! ```text
//!   maximize  c . f
//!   subject to  f_i - f_j <= rho_ij   for all ordered pairs i != j
//!               -1 <= f_i <= 1
//! ```
//!
//! Rather than pivoting on the k^2-row primal, the solver runs the revised
//! simplex on the equality-form dual, which has only k rows:
//!
//! ```text
//!   minimize  sum rho_ij y_ij + sum (p_i + q_i)
//!   subject to  sum_j (y_ij - y_ji) + p_i - q_i = c_i,   y, p, q >= 0
//! ```
//!
//! This is a transport problem: move the positive part of `c` to the
//! negative part along metric edges, or create/destroy mass at unit cost.
//! The all-pickup/drop basis (`p_i = c_i+`, `q_i = c_i-`) is feasible, so no
//! phase-1 is needed, and the simplex multipliers at optimality are exactly
//! the witness function `f`. Bland's rule guarantees termination.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

const PIVOT_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    /// Flow from i to j at cost rho_ij; basis column e_i - e_j.
    Edge(usize, usize),
    /// Mass created at i at unit cost; basis column +e_i.
    Pickup(usize),
    /// Mass destroyed at i at unit cost; basis column -e_i.
    Drop(usize),
}

/// Solution with the ingredients of a feasibility + optimality certificate.
#[derive(Debug, Clone)]
pub struct LpSolution {
    /// Optimal witness function (the primal variables).
    pub f: Vec<f64>,
    /// Primal objective `c . f`.
    pub primal_value: f64,
    /// Dual objective (the transport cost); equal to the primal at optimum.
    pub dual_value: f64,
    /// `|primal - dual|`.
    pub duality_gap: f64,
    /// Largest violation of `|f| <= 1` and the pairwise Lipschitz bounds.
    pub max_primal_violation: f64,
    /// Largest violation of dual feasibility (negative flow or residual of
    /// the balance equations).
    pub max_dual_violation: f64,
    pub iterations: usize,
}

/// Solves the bounded-Lipschitz program for cost vector `c` over `metric`.
pub fn solve_bounded_lipschitz(c: &[f64], metric: &[Vec<f64>]) -> Result<LpSolution> {
    let k = c.len();
    if k == 0 || metric.len() != k || metric.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidValue(
            "cost vector and metric sizes disagree".into(),
        ));
    }

    let mut columns = Vec::with_capacity(k * k + k);
    for i in 0..k {
        for j in 0..k {
            if i != j {
                columns.push(Column::Edge(i, j));
            }
        }
    }
    for i in 0..k {
        columns.push(Column::Pickup(i));
    }
    for i in 0..k {
        columns.push(Column::Drop(i));
    }

    let weight = |col: Column| -> f64 {
        match col {
            Column::Edge(i, j) => metric[i][j],
            Column::Pickup(_) | Column::Drop(_) => 1.0,
        }
    };

    // Feasible starting basis: pick up positive imbalance, drop negative.
    let mut basis: Vec<usize> = (0..k)
        .map(|i| {
            let want = if c[i] >= 0.0 {
                Column::Pickup(i)
            } else {
                Column::Drop(i)
            };
            columns
                .iter()
                .position(|&col| col == want)
                .expect("pickup/drop columns exist")
        })
        .collect();

    let basis_matrix = |basis: &[usize]| -> DMatrix<f64> {
        let mut b = DMatrix::zeros(k, k);
        for (t, &ci) in basis.iter().enumerate() {
            match columns[ci] {
                Column::Edge(i, j) => {
                    b[(i, t)] = 1.0;
                    b[(j, t)] = -1.0;
                }
                Column::Pickup(i) => b[(i, t)] = 1.0,
                Column::Drop(i) => b[(i, t)] = -1.0,
            }
        }
        b
    };

    let c_vec = DVector::from_column_slice(c);
    let mut iterations = 0usize;
    let (x_basic, multipliers) = loop {
        iterations += 1;
        if iterations > MAX_ITERATIONS {
            return Err(Error::SolverCertification(format!(
                "simplex exceeded {MAX_ITERATIONS} iterations"
            )));
        }

        let b = basis_matrix(&basis);
        let lu = b.clone().lu();
        let x = lu
            .solve(&c_vec)
            .ok_or_else(|| Error::SolverCertification("singular basis".into()))?;
        let w_basic = DVector::from_iterator(k, basis.iter().map(|&ci| weight(columns[ci])));
        let pi = b
            .transpose()
            .lu()
            .solve(&w_basic)
            .ok_or_else(|| Error::SolverCertification("singular basis transpose".into()))?;

        // Bland: first column with a negative reduced cost enters.
        let mut entering = None;
        for (ci, &col) in columns.iter().enumerate() {
            if basis.contains(&ci) {
                continue;
            }
            let reduced = match col {
                Column::Edge(i, j) => weight(col) - (pi[i] - pi[j]),
                Column::Pickup(i) => 1.0 - pi[i],
                Column::Drop(i) => 1.0 + pi[i],
            };
            if reduced < -PIVOT_TOL {
                entering = Some(ci);
                break;
            }
        }
        let Some(entering) = entering else {
            break (x, pi);
        };

        let mut col_vec = DVector::zeros(k);
        match columns[entering] {
            Column::Edge(i, j) => {
                col_vec[i] = 1.0;
                col_vec[j] = -1.0;
            }
            Column::Pickup(i) => col_vec[i] = 1.0,
            Column::Drop(i) => col_vec[i] = -1.0,
        }
        let direction = lu
            .solve(&col_vec)
            .ok_or_else(|| Error::SolverCertification("singular basis".into()))?;

        // Ratio test with Bland tie-breaking on the leaving column index.
        let mut leaving: Option<(usize, f64)> = None;
        for t in 0..k {
            if direction[t] > PIVOT_TOL {
                let ratio = (x[t].max(0.0)) / direction[t];
                match leaving {
                    None => leaving = Some((t, ratio)),
                    Some((bt, br)) => {
                        if ratio < br - PIVOT_TOL
                            || ((ratio - br).abs() <= PIVOT_TOL && basis[t] < basis[bt])
                        {
                            leaving = Some((t, ratio));
                        }
                    }
                }
            }
        }
        let Some((leave_pos, _)) = leaving else {
            // Cannot happen for this program (the primal has feasible f = 0),
            // but surface it honestly instead of looping.
            return Err(Error::SolverCertification(
                "unbounded dual direction".into(),
            ));
        };
        basis[leave_pos] = entering;
    };

    // Assemble the certificate from scratch; nothing below trusts the
    // iteration bookkeeping.
    let f: Vec<f64> = (0..k).map(|i| multipliers[i]).collect();
    let primal_value: f64 = c.iter().zip(&f).map(|(a, b)| a * b).sum();

    let mut dual_value = 0.0;
    let mut residual = vec![0.0; k];
    for (t, &ci) in basis.iter().enumerate() {
        let z = x_basic[t];
        dual_value += weight(columns[ci]) * z;
        match columns[ci] {
            Column::Edge(i, j) => {
                residual[i] += z;
                residual[j] -= z;
            }
            Column::Pickup(i) => residual[i] += z,
            Column::Drop(i) => residual[i] -= z,
        }
    }
    let mut max_dual_violation: f64 = 0.0;
    for t in 0..k {
        max_dual_violation = max_dual_violation.max(-x_basic[t]);
        max_dual_violation = max_dual_violation.max((residual[t] - c[t]).abs());
    }

    let mut max_primal_violation: f64 = 0.0;
    for i in 0..k {
        max_primal_violation = max_primal_violation.max(f[i].abs() - 1.0);
        for j in 0..k {
            if i != j {
                max_primal_violation = max_primal_violation.max(f[i] - f[j] - metric[i][j]);
            }
        }
    }

    Ok(LpSolution {
        duality_gap: (primal_value - dual_value).abs(),
        f,
        primal_value,
        dual_value,
        max_primal_violation: max_primal_violation.max(0.0),
        max_dual_violation: max_dual_violation.max(0.0),
        iterations,
    })
}
