//! Cross-module invariants that tie several operations together.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sufeller::analysis::{boundary_mass, closed_gap, contset_gap, wtv_gap, ContsetOutcome};
use sufeller::kernel::{JointMeasure, KernelFamily};
use sufeller::series::VerdictParams;
use sufeller::space::{FiniteMetricSpace, SetRole, TestSet};
use sufeller::SpaceRef;

fn line(n: usize) -> SpaceRef {
    let positions: Vec<f64> = (0..n).map(|i| i as f64).collect();
    FiniteMetricSpace::line_anon(&positions).unwrap()
}

/// A dyadic family whose limit puts zero mass on one designated s1-row, so
/// sets containing that row in their closure-but-not-interior stay inside
/// the continuity-set hypothesis.
fn family_with_null_row(
    rng: &mut ChaCha8Rng,
    s1_len: usize,
    s2_len: usize,
    null_row: usize,
    n_steps: usize,
) -> KernelFamily {
    const DENOM: i64 = 1 << 20;
    let s1 = line(s1_len);
    let s2 = line(s2_len);
    // limit: random integer masses, the null row forced to zero
    let mut limit_ints = vec![vec![0i64; s2_len]; s1_len];
    let mut total = 0i64;
    for (i, row) in limit_ints.iter_mut().enumerate() {
        if i == null_row {
            continue;
        }
        for v in row.iter_mut() {
            *v = rng.random_range(1..=1000);
            total += *v;
        }
    }
    // scale to the common denominator by largest remainder
    let mut scaled = vec![vec![0i64; s2_len]; s1_len];
    let mut assigned = 0i64;
    let mut rem: Vec<(i64, (usize, usize))> = Vec::new();
    for i in 0..s1_len {
        for j in 0..s2_len {
            let exact = limit_ints[i][j] * DENOM;
            scaled[i][j] = exact / total;
            assigned += scaled[i][j];
            rem.push((exact % total, (i, j)));
        }
    }
    rem.sort_by_key(|r| std::cmp::Reverse(r.0));
    let mut left = DENOM - assigned;
    let mut k = 0;
    while left > 0 {
        let (i, j) = rem[k % rem.len()].1;
        if i != null_row {
            scaled[i][j] += 1;
            left -= 1;
        }
        k += 1;
    }

    let to_joint = |ints: &Vec<Vec<i64>>| {
        let mass: Vec<Vec<f64>> = ints
            .iter()
            .map(|r| r.iter().map(|&v| v as f64 / DENOM as f64).collect())
            .collect();
        JointMeasure::new(s1.clone(), s2.clone(), mass).unwrap()
    };
    let limit = to_joint(&scaled);

    // P_n leaks integer mass into the null row at rate ~1/n from the
    // heaviest cell
    let (src_i, src_j) = {
        let mut best = (0, 0);
        for i in 0..s1_len {
            for j in 0..s2_len {
                if scaled[i][j] > scaled[best.0][best.1] {
                    best = (i, j);
                }
            }
        }
        best
    };
    let joints: Vec<JointMeasure> = (1..=n_steps)
        .map(|n| {
            let mut ints = scaled.clone();
            let leak = scaled[src_i][src_j] / (2 * n as i64);
            ints[src_i][src_j] -= leak;
            ints[null_row][src_j % s2_len] += leak;
            to_joint(&ints)
        })
        .collect();
    KernelFamily::new(joints, limit).unwrap()
}

/// Sandwich inequality behind the closed-set => continuity-set implication:
/// for interior <= A <= closure with a null-mass rim, the two-sided gap of A
/// is within max(one-sided gap of the interior, one-sided gap of the
/// closure) plus the rim mass.
#[test]
fn sandwich_bounds_continuity_gap() {
    let mut rng = ChaCha8Rng::seed_from_u64(5150);
    let params = VerdictParams::default();
    for _ in 0..40 {
        let s1_len = rng.random_range(3..=6usize);
        let s2_len = rng.random_range(2..=5usize);
        let null_row = rng.random_range(0..s1_len);
        let family = family_with_null_row(&mut rng, s1_len, s2_len, null_row, 8);
        let s1 = family.s1_space().clone();

        // interior: random rows avoiding the null row; closure adds it
        let mut interior: BTreeSet<usize> = (0..s1_len)
            .filter(|&i| i != null_row && rng.random_range(0..2u8) == 1)
            .collect();
        if interior.is_empty() {
            interior.insert((null_row + 1) % s1_len);
        }
        let mut closure = interior.clone();
        closure.insert(null_row);

        // A sits anywhere between: put the null row in with probability 1/2
        let mut middle = interior.clone();
        if rng.random_range(0..2u8) == 1 {
            middle.insert(null_row);
        }

        let open = TestSet::new(s1.clone(), interior.clone(), SetRole::Open, None).unwrap();
        let closed = TestSet::new(s1.clone(), closure.clone(), SetRole::Closed, None).unwrap();
        let cont = TestSet::new(
            s1.clone(),
            middle,
            SetRole::Continuity,
            Some(closure.difference(&interior).copied().collect()),
        )
        .unwrap();

        let rim_mass = boundary_mass(&family, &cont);
        assert!(
            rim_mass <= 1e-12,
            "the rim row carries no limit mass by construction"
        );
        let a_series = match contset_gap(&family, &cont, params).unwrap() {
            ContsetOutcome::Series(s) => s,
            ContsetOutcome::Rejected { boundary_mass } => {
                panic!("null rim must be accepted, got mass {boundary_mass}")
            }
        };
        let lower = wtv_gap(&family, &open, params).unwrap();
        let upper = closed_gap(&family, &closed, params).unwrap();
        for n in 0..family.len() {
            let bound = lower.gaps[n].max(upper.gaps[n]) + rim_mass;
            assert!(
                a_series.gaps[n] <= bound + 1e-12,
                "contset gap {} exceeds sandwich bound {} at n = {}",
                a_series.gaps[n],
                bound,
                n + 1
            );
        }
    }
}

/// The boundary-rejection path engages exactly when the declared rim
/// carries limit mass.
#[test]
fn rejection_tracks_declared_boundary_mass() {
    let mut rng = ChaCha8Rng::seed_from_u64(5151);
    let family = family_with_null_row(&mut rng, 4, 3, 2, 6);
    let s1 = family.s1_space().clone();
    let params = VerdictParams::default();

    // declaring a loaded row as boundary is rejected with that row's mass
    let loaded_row = 0usize;
    let expect: f64 = family.limit().mass()[loaded_row].iter().sum();
    assert!(expect > 0.0);
    let set = TestSet::new(
        s1,
        [1usize].into_iter().collect(),
        SetRole::Continuity,
        Some([loaded_row].into_iter().collect()),
    )
    .unwrap();
    match contset_gap(&family, &set, params).unwrap() {
        ContsetOutcome::Rejected { boundary_mass } => {
            assert!((boundary_mass - expect).abs() <= 1e-15)
        }
        ContsetOutcome::Series(_) => panic!("loaded boundary must be rejected"),
    }
}
