//! Integer-exact instance construction.
//!
//! Masses are integers summing to [`JOINT_DENOM`]; converted to f64 by a
//! power-of-two division they become exact dyadic rationals. Mixtures
//! `P_n = (1 - 1/n) P + (1/n) Q` are realized as integer transfers that
//! preserve column sums exactly, so the s2-marginal gap of a generated
//! family is zero to the last bit while the joints differ at a known rate.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kernel::{family_from_param, JointMeasure, KernelFamily, ParamKernel};
use crate::space::{ConvergentSequence, FiniteMetricSpace, SetRole, SpaceRef, TestSet};
use crate::{Error, Result};

/// Joint masses are integers over this denominator (2^30).
pub const JOINT_DENOM: i64 = 1 << 30;

/// Rational perturbation amplitude `num/den <= 1` applied between the base
/// joint and its perturbation target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Amplitude {
    pub num: i64,
    pub den: i64,
}

impl Amplitude {
    pub const FULL: Amplitude = Amplitude { num: 1, den: 1 };

    pub fn new(num: i64, den: i64) -> Self {
        assert!(
            num >= 0 && den > 0 && num <= den,
            "amplitude must lie in [0, 1]"
        );
        Self { num, den }
    }
}

/// Which family shape to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Construction {
    /// `P_n = (1 - 1/n) P + (1/n) Q` with `Q` sharing the s2-marginal of
    /// `P`: the marginal TV gap is exactly zero while the joints differ.
    TvConvergingMixture,
    /// A constant off-limit shift that moves mass across s2-columns: the
    /// marginal TV gap stays at a fixed positive level (the equivalence
    /// hypothesis fails by design).
    MarginalTvOnly,
    /// The indicator kernel on the grid `{0} u {1/k}`: point masses
    /// converging weakly but not in total variation.
    IndicatorExample,
    /// Product measures `mu_n (x) nu_n` with both factors mixing at rate
    /// 1/n: full TV vanishes, marginal TV vanishes but is not exactly zero.
    ProductMixture,
}

impl Construction {
    pub fn name(self) -> &'static str {
        match self {
            Construction::TvConvergingMixture => "tv_converging_mixture",
            Construction::MarginalTvOnly => "marginal_tv_only",
            Construction::IndicatorExample => "indicator_example",
            Construction::ProductMixture => "product_mixture",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "tv_converging_mixture" => Ok(Construction::TvConvergingMixture),
            "marginal_tv_only" => Ok(Construction::MarginalTvOnly),
            "indicator_example" => Ok(Construction::IndicatorExample),
            "product_mixture" => Ok(Construction::ProductMixture),
            other => Err(Error::InvalidValue(format!("unknown recipe {other:?}"))),
        }
    }
}

/// Everything needed to rebuild one instance deterministically.
#[derive(Debug, Clone, Copy)]
pub struct InstanceRecipe {
    pub seed: u64,
    pub s1_len: usize,
    pub s2_len: usize,
    pub n_steps: usize,
    pub construction: Construction,
    pub amplitude: Amplitude,
}

impl InstanceRecipe {
    pub fn new(seed: u64, s1_len: usize, s2_len: usize, n_steps: usize, c: Construction) -> Self {
        assert!(
            s1_len >= 1 && s2_len >= 1 && n_steps >= 1,
            "sizes must be at least 1"
        );
        Self {
            seed,
            s1_len,
            s2_len,
            n_steps,
            construction: c,
            amplitude: Amplitude::FULL,
        }
    }

    pub fn with_amplitude(mut self, amplitude: Amplitude) -> Self {
        self.amplitude = amplitude;
        self
    }
}

/// A generated instance: the kernel table over a step grid, the declared
/// sequence along it, the resolved family, and construction-exact
/// expectations where the recipe provides them.
#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub recipe: InstanceRecipe,
    pub s1_space: SpaceRef,
    pub s2_space: SpaceRef,
    pub param_space: SpaceRef,
    pub kernel: Arc<ParamKernel>,
    pub sequence: ConvergentSequence,
    pub family: KernelFamily,
    /// Exact full-TV gap per index, when the construction knows it.
    pub expected_full_tv: Option<Vec<f64>>,
    /// Exact marginal-TV gap per index, when the construction knows it.
    pub expected_marginal_tv: Option<Vec<f64>>,
}

/// Largest-remainder apportionment of `total` units proportional to `raw`.
fn apportion(raw: &[u64], total: i64) -> Vec<i64> {
    let sum: u128 = raw.iter().map(|&r| r as u128).sum();
    assert!(sum > 0, "apportionment needs positive raw weights");
    let mut out: Vec<i64> = Vec::with_capacity(raw.len());
    let mut remainders: Vec<(u128, usize)> = Vec::with_capacity(raw.len());
    let mut assigned: i64 = 0;
    for (i, &r) in raw.iter().enumerate() {
        let exact = (r as u128) * (total as u128);
        let floor = (exact / sum) as i64;
        out.push(floor);
        assigned += floor;
        remainders.push((exact % sum, i));
    }
    let mut leftover = total - assigned;
    // ties broken by index for determinism
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut k = 0;
    while leftover > 0 {
        out[remainders[k % remainders.len()].1] += 1;
        leftover -= 1;
        k += 1;
    }
    out
}

/// Integer transfer `w ~ (target - base) * num / den` with `sum(w) = 0` and
/// `base + w >= 0`. Truncation imbalance is settled against entries with
/// room, deterministically.
fn transfer_toward(base: &[i64], target: &[i64], num: i64, den: i64) -> Vec<i64> {
    debug_assert_eq!(base.iter().sum::<i64>(), target.iter().sum::<i64>());
    let mut w: Vec<i64> = base
        .iter()
        .zip(target)
        .map(|(&b, &t)| (t - b) * num / den) // truncation toward zero keeps |b + w| within [min, max]
        .collect();
    let mut imbalance: i64 = w.iter().sum();
    let mut guard = 0;
    while imbalance != 0 {
        guard += 1;
        assert!(guard < 1_000_000, "transfer balancing failed to settle");
        if imbalance > 0 {
            // take one unit back from the entry with the most room
            let i = (0..w.len())
                .filter(|&i| base[i] + w[i] >= 1)
                .max_by_key(|&i| base[i] + w[i])
                .expect("positive mass exists while imbalance is positive");
            w[i] -= 1;
            imbalance -= 1;
        } else {
            let i = (0..w.len()).max_by_key(|&i| base[i] + w[i]).unwrap();
            w[i] += 1;
            imbalance += 1;
        }
    }
    debug_assert!(base.iter().zip(&w).all(|(&b, &x)| b + x >= 0));
    w
}

fn int_matrix_to_joint(
    s1: &SpaceRef,
    s2: &SpaceRef,
    ints: &[Vec<i64>],
    denom: i64,
) -> JointMeasure {
    let mass: Vec<Vec<f64>> = ints
        .iter()
        .map(|row| row.iter().map(|&v| v as f64 / denom as f64).collect())
        .collect();
    JointMeasure::new(s1.clone(), s2.clone(), mass).expect("generated joint is normalized")
}

/// Dyadic-coordinate line space with `n` points at i/8, i/16, ... chosen to
/// stay within [0, 1].
fn unit_line_space(n: usize, prefix: &str) -> SpaceRef {
    let denom = (n.next_power_of_two().max(8)) as f64;
    let ids: Vec<String> = (0..n).map(|i| format!("{prefix}{i}")).collect();
    let positions: Vec<f64> = (0..n).map(|i| i as f64 / denom).collect();
    FiniteMetricSpace::line(ids, &positions).expect("unit line space is valid")
}

/// Step grid for the parameter space: points t1..tN at coordinates 1/n plus
/// the limit at 0, so distances to the limit decrease monotonically.
fn step_space(n_steps: usize) -> (SpaceRef, ConvergentSequence) {
    let mut ids: Vec<String> = (1..=n_steps).map(|n| format!("t{n}")).collect();
    ids.push("lim".into());
    let mut positions: Vec<f64> = (1..=n_steps).map(|n| 1.0 / n as f64).collect();
    positions.push(0.0);
    let space = FiniteMetricSpace::line(ids, &positions).expect("step space is valid");
    let entries: Vec<usize> = (0..n_steps).collect();
    let seq = ConvergentSequence::new(space.clone(), entries, n_steps)
        .expect("step sequence is well-formed");
    (space, seq)
}

fn random_int_joint(rng: &mut ChaCha8Rng, rows: usize, cols: usize, total: i64) -> Vec<Vec<i64>> {
    let raw: Vec<u64> = (0..rows * cols)
        .map(|_| rng.random_range(1..=1000u64))
        .collect();
    let flat = apportion(&raw, total);
    flat.chunks(cols).map(|c| c.to_vec()).collect()
}

fn columns_of(m: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let cols = m[0].len();
    (0..cols)
        .map(|j| m.iter().map(|row| row[j]).collect())
        .collect()
}

fn from_columns(cols: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let rows = cols[0].len();
    (0..rows)
        .map(|i| cols.iter().map(|c| c[i]).collect())
        .collect()
}

fn abs_sum(m: &[Vec<i64>]) -> i64 {
    m.iter().flatten().map(|v| v.abs()).sum()
}

fn build_instance(
    recipe: InstanceRecipe,
    s1: SpaceRef,
    s2: SpaceRef,
    joints: Vec<JointMeasure>,
    limit: JointMeasure,
    expected_full_tv: Option<Vec<f64>>,
    expected_marginal_tv: Option<Vec<f64>>,
) -> GeneratedInstance {
    let (param_space, sequence) = step_space(recipe.n_steps);
    let mut table = joints;
    table.push(limit);
    let kernel = Arc::new(
        ParamKernel::new(s1.clone(), s2.clone(), param_space.clone(), None, table)
            .expect("generated kernel table is total"),
    );
    let family =
        family_from_param(&kernel, &sequence, None).expect("sequence lives on the step grid");
    GeneratedInstance {
        recipe,
        s1_space: s1,
        s2_space: s2,
        param_space,
        kernel,
        sequence,
        family,
        expected_full_tv,
        expected_marginal_tv,
    }
}

fn gen_mixture(recipe: InstanceRecipe, rng: &mut ChaCha8Rng) -> GeneratedInstance {
    let s1 = unit_line_space(recipe.s1_len, "a");
    let s2 = unit_line_space(recipe.s2_len, "b");
    let p = random_int_joint(rng, recipe.s1_len, recipe.s2_len, JOINT_DENOM);
    let p_cols = columns_of(&p);

    // Q shares every column sum of P exactly, then is pulled toward P by
    // the amplitude, column by column.
    let q_cols: Vec<Vec<i64>> = p_cols
        .iter()
        .map(|col| {
            let total: i64 = col.iter().sum();
            if total == 0 {
                return col.clone();
            }
            let raw: Vec<u64> = (0..col.len())
                .map(|_| rng.random_range(1..=1000u64))
                .collect();
            apportion(&raw, total)
        })
        .collect();
    let q_scaled_cols: Vec<Vec<i64>> = p_cols
        .iter()
        .zip(&q_cols)
        .map(|(pc, qc)| {
            let w = transfer_toward(pc, qc, recipe.amplitude.num, recipe.amplitude.den);
            pc.iter().zip(&w).map(|(&b, &x)| b + x).collect()
        })
        .collect();

    let mut joints = Vec::with_capacity(recipe.n_steps);
    let mut expected_full = Vec::with_capacity(recipe.n_steps);
    for n in 1..=recipe.n_steps {
        let cols: Vec<Vec<i64>> = p_cols
            .iter()
            .zip(&q_scaled_cols)
            .map(|(pc, qc)| {
                let w = transfer_toward(pc, qc, 1, n as i64);
                pc.iter().zip(&w).map(|(&b, &x)| b + x).collect()
            })
            .collect();
        let m = from_columns(&cols);
        let diff: Vec<Vec<i64>> = m
            .iter()
            .zip(&p)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        expected_full.push(abs_sum(&diff) as f64 / (2 * JOINT_DENOM) as f64);
        joints.push(int_matrix_to_joint(&s1, &s2, &m, JOINT_DENOM));
    }
    let limit = int_matrix_to_joint(&s1, &s2, &p, JOINT_DENOM);
    let zeros = vec![0.0; recipe.n_steps];
    build_instance(
        recipe,
        s1,
        s2,
        joints,
        limit,
        Some(expected_full),
        Some(zeros),
    )
}

fn gen_marginal_tv_only(recipe: InstanceRecipe, rng: &mut ChaCha8Rng) -> GeneratedInstance {
    assert!(
        recipe.s1_len >= 2 && recipe.s2_len >= 2,
        "marginal_tv_only needs at least a 2x2 joint"
    );
    let s1 = unit_line_space(recipe.s1_len, "a");
    let s2 = unit_line_space(recipe.s2_len, "b");
    let p = random_int_joint(rng, recipe.s1_len, recipe.s2_len, JOINT_DENOM);

    // Move a fixed lump across both coordinates; the s2-marginal shifts by
    // exactly lump / JOINT_DENOM at every index. The source is the largest
    // cell (at least 1/(|S1||S2|) of the mass, comfortably above the
    // verdict dead band) and the destination sits on a different row and
    // column, so the receiving row sees a purely one-sided gap.
    let src = {
        let mut best = (0, 0);
        for (i, row) in p.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v > p[best.0][best.1] {
                    best = (i, j);
                }
            }
        }
        best
    };
    let mut dst = (
        rng.random_range(0..recipe.s1_len),
        rng.random_range(0..recipe.s2_len),
    );
    while dst.1 == src.1 {
        dst.1 = rng.random_range(0..recipe.s2_len);
    }
    while dst.0 == src.0 {
        dst.0 = rng.random_range(0..recipe.s1_len);
    }
    let lump = (p[src.0][src.1]).clamp(1, JOINT_DENOM * 3 / 10);
    let mut shifted = p.clone();
    shifted[src.0][src.1] -= lump;
    shifted[dst.0][dst.1] += lump;

    let joints: Vec<JointMeasure> = (0..recipe.n_steps)
        .map(|_| int_matrix_to_joint(&s1, &s2, &shifted, JOINT_DENOM))
        .collect();
    let limit = int_matrix_to_joint(&s1, &s2, &p, JOINT_DENOM);
    let level = lump as f64 / JOINT_DENOM as f64;
    let expected = vec![level; recipe.n_steps];
    build_instance(
        recipe,
        s1,
        s2,
        joints,
        limit,
        Some(expected.clone()),
        Some(expected),
    )
}

fn gen_product_mixture(recipe: InstanceRecipe, rng: &mut ChaCha8Rng) -> GeneratedInstance {
    // factor masses over 2^20 so products are exact dyadics over 2^40
    const FACTOR_DENOM: i64 = 1 << 20;
    let s1 = unit_line_space(recipe.s1_len, "a");
    let s2 = unit_line_space(recipe.s2_len, "b");
    let draw = |rng: &mut ChaCha8Rng, n: usize| -> Vec<i64> {
        let raw: Vec<u64> = (0..n).map(|_| rng.random_range(1..=1000u64)).collect();
        apportion(&raw, FACTOR_DENOM)
    };
    let mu = draw(rng, recipe.s1_len);
    let mu_target = draw(rng, recipe.s1_len);
    let nu = draw(rng, recipe.s2_len);
    let nu_target = draw(rng, recipe.s2_len);

    let outer = |a: &[i64], b: &[i64]| -> Vec<Vec<f64>> {
        a.iter()
            .map(|&x| {
                b.iter()
                    .map(|&y| (x * y) as f64 / (FACTOR_DENOM as f64 * FACTOR_DENOM as f64))
                    .collect()
            })
            .collect()
    };

    let mut joints = Vec::with_capacity(recipe.n_steps);
    let mut expected_marginal = Vec::with_capacity(recipe.n_steps);
    for n in 1..=recipe.n_steps {
        let wm = transfer_toward(&mu, &mu_target, 1, n as i64);
        let wn = transfer_toward(&nu, &nu_target, 1, n as i64);
        let mu_n: Vec<i64> = mu.iter().zip(&wm).map(|(&a, &w)| a + w).collect();
        let nu_n: Vec<i64> = nu.iter().zip(&wn).map(|(&a, &w)| a + w).collect();
        expected_marginal
            .push(wn.iter().map(|w| w.abs()).sum::<i64>() as f64 / (2 * FACTOR_DENOM) as f64);
        let mass = outer(&mu_n, &nu_n);
        joints
            .push(JointMeasure::new(s1.clone(), s2.clone(), mass).expect("product is normalized"));
    }
    let limit = JointMeasure::new(s1.clone(), s2.clone(), outer(&mu, &nu))
        .expect("product limit is normalized");
    build_instance(recipe, s1, s2, joints, limit, None, Some(expected_marginal))
}

/// The indicator-kernel fixture plus the bases that demonstrate the
/// per-point dependence of the countable-base construction.
#[derive(Debug, Clone)]
pub struct IndicatorFixture {
    pub grid: SpaceRef,
    pub s2_space: SpaceRef,
    pub kernel: Arc<ParamKernel>,
    pub sequence: ConvergentSequence,
    pub family: KernelFamily,
    /// Open intervals whose endpoints avoid every grid point and whose
    /// interiors decide the limit: gaps vanish from n = 3 on.
    pub avoiding_base: Vec<TestSet>,
    /// A base containing `(0, 1.5)`: the limit sits on its boundary and the
    /// two-sided gap is identically 1.
    pub boundary_base: Vec<TestSet>,
}

fn interval_set(grid: &SpaceRef, lo: f64, hi: f64, role: SetRole) -> TestSet {
    let members: BTreeSet<usize> = grid
        .coords()
        .expect("grid has coordinates")
        .iter()
        .enumerate()
        .filter(|(_, c)| c[0] > lo && c[0] < hi)
        .map(|(i, _)| i)
        .collect();
    TestSet::new(grid.clone(), members, role, Some(BTreeSet::new()))
        .expect("interval set is well-formed")
}

/// Builds the indicator kernel on the grid `{0} u {1/k : k <= n_steps}` with
/// a singleton observation space: `table[s3] = dirac((s3, o))`, sequence
/// `1/n -> 0`.
pub fn indicator_example_fixture(n_steps: usize) -> IndicatorFixture {
    assert!(n_steps >= 1);
    let mut ids = vec!["g0".to_string()];
    let mut positions = vec![0.0];
    for k in (1..=n_steps).rev() {
        ids.push(format!("g1_{k}"));
        positions.push(1.0 / k as f64);
    }
    let grid = FiniteMetricSpace::line(ids, &positions).expect("indicator grid is valid");
    let s2 = FiniteMetricSpace::singleton("o");
    let table: Vec<JointMeasure> = (0..grid.len())
        .map(|i| JointMeasure::dirac(grid.clone(), s2.clone(), i, 0).expect("grid point"))
        .collect();
    let kernel = Arc::new(
        ParamKernel::new(grid.clone(), s2.clone(), grid.clone(), None, table)
            .expect("indicator table is total"),
    );
    let entries: Vec<usize> = (1..=n_steps)
        .map(|n| {
            grid.coords()
                .unwrap()
                .iter()
                .position(|c| c[0] == 1.0 / n as f64)
                .expect("1/n is on the grid")
        })
        .collect();
    let sequence = ConvergentSequence::new(grid.clone(), entries, 0).expect("sequence on the grid");
    let family = family_from_param(&kernel, &sequence, None).expect("family from the fixture");

    let whole = TestSet::whole(grid.clone(), SetRole::Open);
    let avoiding_base = vec![
        whole.clone(),
        interval_set(&grid, -0.35, 0.35, SetRole::Open),
        interval_set(&grid, 0.45, 1.5, SetRole::Open),
    ];
    let boundary_base = vec![whole, interval_set(&grid, 0.0, 1.5, SetRole::Open)];

    IndicatorFixture {
        grid,
        s2_space: s2,
        kernel,
        sequence,
        family,
        avoiding_base,
        boundary_base,
    }
}

/// Generates an instance from a recipe; identical recipes yield bit-identical
/// instances.
pub fn gen_instance(recipe: InstanceRecipe) -> GeneratedInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
    match recipe.construction {
        Construction::TvConvergingMixture => gen_mixture(recipe, &mut rng),
        Construction::MarginalTvOnly => gen_marginal_tv_only(recipe, &mut rng),
        Construction::ProductMixture => gen_product_mixture(recipe, &mut rng),
        Construction::IndicatorExample => {
            let fixture = indicator_example_fixture(recipe.n_steps);
            GeneratedInstance {
                recipe,
                s1_space: fixture.grid.clone(),
                s2_space: fixture.s2_space.clone(),
                param_space: fixture.grid.clone(),
                kernel: fixture.kernel,
                sequence: fixture.sequence,
                family: fixture.family,
                expected_full_tv: Some(vec![1.0; recipe.n_steps]),
                expected_marginal_tv: Some(vec![0.0; recipe.n_steps]),
            }
        }
    }
}

/// Convenience wrapper for the equivalence-theorem construction.
pub fn gen_equivalence_instance(
    seed: u64,
    s1_len: usize,
    s2_len: usize,
    n_steps: usize,
    amplitude: Amplitude,
) -> GeneratedInstance {
    gen_instance(
        InstanceRecipe::new(
            seed,
            s1_len,
            s2_len,
            n_steps,
            Construction::TvConvergingMixture,
        )
        .with_amplitude(amplitude),
    )
}
