//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured evidence. Tolerances are pinned in the
//! assertions, not configurable.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sufeller::analysis::{
    analyze, asskern_sets_gap, default_witnesses, suf_gap, AnalyzeConfig, SufVerdict,
};
use sufeller::harness::{
    asskern_suite, equicontinuity_suite, equivalence_suite, gen_equivalence_instance,
    indicator_example_fixture, integration_suite, Amplitude, SuiteConfig,
};
use sufeller::kr::{kr_distance, RealFunction};
use sufeller::measure::{
    extreme_over_sets, extreme_over_sets_enumerated, tv_distance, Measure, SignedVector,
};
use sufeller::regularize::inf_convolve;
use sufeller::series::{Verdict, VerdictParams};
use sufeller::space::FiniteMetricSpace;
use sufeller::SpaceRef;

fn line_space(n: usize) -> SpaceRef {
    let positions: Vec<f64> = (0..n).map(|i| i as f64).collect();
    FiniteMetricSpace::line_anon(&positions).unwrap()
}

/// Distinct dyadic positions, so downstream arithmetic is exact.
fn dyadic_line(rng: &mut ChaCha8Rng, max_points: usize) -> SpaceRef {
    let n = rng.random_range(2..=max_points);
    let mut grid: Vec<i64> = Vec::new();
    while grid.len() < n {
        let c = rng.random_range(0..4096i64);
        if !grid.contains(&c) {
            grid.push(c);
        }
    }
    grid.sort_unstable();
    let positions: Vec<f64> = grid.iter().map(|&c| c as f64 / 256.0).collect();
    FiniteMetricSpace::line_anon(&positions).unwrap()
}

fn random_probability(rng: &mut ChaCha8Rng, space: &SpaceRef) -> Measure {
    let raw: Vec<f64> = (0..space.len())
        .map(|_| rng.random_range(0.01..1.0))
        .collect();
    let total: f64 = raw.iter().sum();
    Measure::probability(space.clone(), raw.iter().map(|x| x / total).collect()).unwrap()
}

#[test]
fn criterion_01_subset_extremum_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);

    // raw extrema on 1000 random signed vectors, |S| <= 8
    for _ in 0..1000 {
        let n = rng.random_range(1..=8usize);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d = SignedVector::new(line_space(n), values).unwrap();
        let fast = extreme_over_sets(&d);
        let slow = extreme_over_sets_enumerated(&d).unwrap();
        assert!((fast.sup - slow.sup).abs() <= 1e-12);
        assert!((fast.inf - slow.inf).abs() <= 1e-12);
        assert!((fast.sup_abs - slow.sup_abs).abs() <= 1e-12);
    }

    // every gap functional against enumeration: analyze in oracle mode
    // recomputes each series over all 2^|S2| subsets and fails on any
    // deviation above 1e-12
    for trial in 0..60 {
        let inst = gen_equivalence_instance(
            2000 + trial,
            2 + (trial as usize % 5),
            2 + (trial as usize % 5),
            6,
            Amplitude::FULL,
        );
        let witnesses = default_witnesses(inst.family.s1_space());
        let config = AnalyzeConfig {
            oracle: true,
            ..AnalyzeConfig::default()
        };
        analyze(&inst.family, &witnesses, &config).expect("oracle agreement");
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "criterion 1 took {elapsed:?}");
    println!(
        "criterion 01 PASS: closed-form extrema and all gap functionals match subset \
         enumeration to 1e-12 on 1000 + 60 instances in {elapsed:.2?}"
    );
}

#[test]
fn criterion_02_tv_closed_form() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    for _ in 0..1000 {
        let n = rng.random_range(1..=8usize);
        let space = line_space(n);
        let mu = random_probability(&mut rng, &space);
        let nu = random_probability(&mut rng, &space);
        let tv = tv_distance(&mu, &nu).unwrap();
        let l1: f64 = mu
            .weights()
            .iter()
            .zip(nu.weights())
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!((tv - 0.5 * l1).abs() <= 1e-12);
        let d = mu.difference(&nu).unwrap();
        let sup = extreme_over_sets_enumerated(&d).unwrap().sup_abs;
        assert!((tv - sup).abs() <= 1e-12);
    }
    println!(
        "criterion 02 PASS: tv = L1/2 = enumerated subset supremum on 1000 pairs in {:.2?}",
        start.elapsed()
    );
}

#[test]
fn criterion_03_kr_metric() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1003);

    // two-point analytic formula on 500 instances
    for _ in 0..500 {
        let rho = rng.random_range(0.05..4.0);
        let space = FiniteMetricSpace::line_anon(&[0.0, rho]).unwrap();
        let p = rng.random_range(0.0..1.0);
        let q = rng.random_range(0.0..1.0);
        let mu = Measure::probability(space.clone(), vec![p, 1.0 - p]).unwrap();
        let nu = Measure::probability(space.clone(), vec![q, 1.0 - q]).unwrap();
        let out = kr_distance(&mu, &nu).unwrap();
        let expect = (p - q).abs() * rho.min(2.0);
        assert!(
            (out.value - expect).abs() <= 1e-9,
            "value {} expected {expect}",
            out.value
        );
        assert!(out.certificate.duality_gap <= 1e-9);
        assert!(out.certificate.max_primal_violation <= 1e-9);
        assert!(out.certificate.max_dual_violation <= 1e-9);
    }

    // kr <= 2 tv with certificates on larger random spaces
    for _ in 0..200 {
        let n = rng.random_range(2..=10usize);
        let space = dyadic_line(&mut rng, n.max(2));
        let mu = random_probability(&mut rng, &space);
        let nu = random_probability(&mut rng, &space);
        let out = kr_distance(&mu, &nu).unwrap();
        assert!(out.certificate.duality_gap <= 1e-9);
        let tv = tv_distance(&mu, &nu).unwrap();
        assert!(out.value <= 2.0 * tv + 1e-9);
    }
    println!(
        "criterion 03 PASS: two-point formula within 1e-9 on 500 instances, every solve \
         certified (gap <= 1e-9), kr <= 2 tv on 200 pairs in {:.2?}",
        start.elapsed()
    );
}

#[test]
fn criterion_04_inf_convolution_lemma() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    for _ in 0..500 {
        let space = dyadic_line(&mut rng, 20);
        let values: Vec<f64> = (0..space.len())
            .map(|_| rng.random_range(-1024..=1024i64) as f64 / 1024.0)
            .collect();
        let f = RealFunction::new(space.clone(), values).unwrap();
        let m1 = rng.random_range(1..=6u32);
        let m2 = m1 + rng.random_range(1..=6u32);
        let r1 = inf_convolve(&f, m1);
        let r2 = inf_convolve(&f, m2);
        // bound preservation, exact
        assert!(r1.bound() <= f.bound());
        assert!(r2.bound() <= f.bound());
        // Lipschitz constant at most m over all pairs
        assert!(r1.lip_const() <= f64::from(m1) + 1e-12);
        assert!(r2.lip_const() <= f64::from(m2) + 1e-12);
        // monotone in m and below f, pointwise
        for ((a, b), v) in r1.values().iter().zip(r2.values()).zip(f.values()) {
            assert!(a <= b);
            assert!(b <= v);
        }
        // exact recovery at m >= ceil(lip)
        let m_star = f.lip_const().ceil().max(1.0) as u32;
        assert_eq!(inf_convolve(&f, m_star).values(), f.values());
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "criterion 4 took {elapsed:?}");
    println!(
        "criterion 04 PASS: bound/Lipschitz/monotonicity/recovery on 500 random functions \
         (<= 20 points) in {elapsed:.2?}"
    );
}

#[test]
fn criterion_05_equivalence_theorem_suite() {
    let start = Instant::now();
    // 200 seeded instances, |S1|,|S2| <= 8, N = 20, epsilon = 1e-3,
    // window = 3; the identities suf(1) = marginal and lsc(1_O) = wtv(O)
    // are asserted bitwise inside each trial.
    let config = SuiteConfig::new(200, 42);
    assert!((config.params.epsilon - 1e-3).abs() < 1e-18);
    assert_eq!(config.params.window, 3);
    assert_eq!(config.n_steps, 20);
    let report = equivalence_suite(&config);
    assert!(report.ok(), "failures: {:?}", report.failures);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "criterion 5 took {elapsed:?}");
    println!(
        "criterion 05 PASS: (a)-(e) verdicts agree on {} instances ({} hypothesis-violating \
         trials flagged separately) in {elapsed:.2?}",
        report.trials, report.hypothesis_violations
    );
}

#[test]
fn criterion_06_assumption_theorem_suite() {
    let start = Instant::now();
    let report = asskern_suite(&SuiteConfig::new(200, 42));
    assert!(report.ok(), "failures: {:?}", report.failures);

    // the fixture dichotomy, asserted here as well as inside the suite
    let fixture = indicator_example_fixture(20);
    let params = VerdictParams::new(1e-3, 3);
    let avoiding = asskern_sets_gap(&fixture.family, &fixture.avoiding_base, None, params).unwrap();
    for (i, &g) in avoiding.combined.gaps.iter().enumerate() {
        assert_eq!(g, if i + 1 >= 3 { 0.0 } else { 1.0 });
    }
    assert_eq!(avoiding.combined.verdict, Verdict::Vanishing);
    let boundary = asskern_sets_gap(&fixture.family, &fixture.boundary_base, None, params).unwrap();
    assert!(boundary.combined.gaps.iter().all(|&g| g == 1.0));
    assert_eq!(boundary.combined.verdict, Verdict::NotVanishing);

    println!(
        "criterion 06 PASS: countable-base verdict equals the semi-uniform Feller conclusion \
         on {} instances; fixture dichotomy reproduced (avoiding base -> 0 from n = 3, \
         boundary base -> 1) in {:.2?}",
        report.trials,
        start.elapsed()
    );
}

#[test]
fn criterion_07_indicator_fixture() {
    let start = Instant::now();
    let fixture = indicator_example_fixture(20);
    let params = VerdictParams::new(0.1, 3);

    let full = sufeller::analysis::full_tv_gap(&fixture.family, params);
    assert!(
        full.gaps.iter().all(|&g| g == 1.0),
        "full TV must be exactly 1"
    );
    let marginal = sufeller::analysis::marginal_tv_gap(&fixture.family, params);
    assert!(
        marginal.gaps.iter().all(|&g| g == 0.0),
        "marginal TV must be exactly 0"
    );

    // every Lipschitz witness obeys gap(n) <= Lip(f) / n
    let coord = RealFunction::coordinate(fixture.grid.clone(), 0).unwrap();
    let mut witnesses: Vec<RealFunction> = vec![coord.clone(), coord.scaled(3.0).unwrap()];
    for p in 0..fixture.grid.len() {
        let ind = RealFunction::indicator(fixture.grid.clone(), [p]).unwrap();
        for m in [1u32, 2, 4, 8] {
            witnesses.push(inf_convolve(&ind, m));
        }
    }
    for f in &witnesses {
        let series = suf_gap(&fixture.family, f, params).unwrap();
        for (i, &g) in series.gaps.iter().enumerate() {
            let bound = f.lip_const() * fixture.sequence.distance_at(i);
            assert!(
                g <= bound + 1e-12,
                "gap {g} exceeds Lip/n = {bound} at n = {}",
                i + 1
            );
        }
    }

    // analyze concludes semi-uniform Feller from the interval witnesses
    let doc = sufeller::document::indicator_fixture_document(&fixture);
    let resolved = sufeller::document::resolve(&doc).unwrap();
    let target = sufeller::document::analysis_target(&doc, &resolved).unwrap();
    let config = AnalyzeConfig {
        params,
        ..AnalyzeConfig::default()
    };
    let report = analyze(&target.family, &target.witnesses, &config).unwrap();
    assert_eq!(report.semi_uniform_feller, Some(SufVerdict::True));
    assert_eq!(report.full_tv.verdict, Verdict::NotVanishing);

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "criterion 7 took {elapsed:?}");
    println!(
        "criterion 07 PASS: full TV = 1 and marginal TV = 0 exactly, suf gaps within Lip/n \
         for {} witnesses, conclusion semi-uniform Feller in {elapsed:.2?}",
        witnesses.len()
    );
}

#[test]
fn criterion_08_integration_theorem_suite() {
    let start = Instant::now();
    let report = integration_suite(&SuiteConfig::new(100, 42));
    assert!(report.ok(), "failures: {:?}", report.failures);
    println!(
        "criterion 08 PASS: point-mass mixing reproduces kernel families exactly and \
         rate-1/n mixing stays within the computed bound on {} instances in {:.2?}",
        report.trials,
        start.elapsed()
    );
}

#[test]
fn criterion_09_equicontinuity_preservation_suite() {
    let start = Instant::now();
    let report = equicontinuity_suite(&SuiteConfig::new(100, 42));
    assert!(report.ok(), "failures: {:?}", report.failures);
    println!(
        "criterion 09 PASS: pushforward keeps the shared bound exactly and stays lower \
         semi-equicontinuous within the explicit bound on {} instances in {:.2?}",
        report.trials,
        start.elapsed()
    );
}

/// Shared-fixture sanity for the acceptance document: the suites and the
/// analyzer must see the same instance after a round trip through JSON.
#[test]
fn round_trip_analysis_is_bit_identical() {
    let inst = gen_equivalence_instance(4242, 4, 4, 12, Amplitude::new(1, 4));
    let witnesses = default_witnesses(inst.family.s1_space());
    let config = AnalyzeConfig::default();
    let direct = analyze(&inst.family, &witnesses, &config).unwrap();

    let doc = sufeller::document::instance_document(&inst);
    let json = doc.to_json();
    let parsed = sufeller::document::parse(&json).unwrap();
    let resolved = sufeller::document::resolve(&parsed).unwrap();
    let target = sufeller::document::analysis_target(&parsed, &resolved).unwrap();
    let via_doc = analyze(&target.family, &target.witnesses, &config).unwrap();

    assert_eq!(
        sufeller::report::report_json(&direct),
        sufeller::report::report_json(&via_doc),
        "in-memory and document-round-trip analyses must be bit-identical"
    );
    println!("round-trip PASS: document round trip reproduces the analysis bit-for-bit");
}

/// Permutation invariance: relabeling the points of S1 and S2 leaves every
/// derived quantity unchanged (exactly, on dyadic instances).
#[test]
fn relabeling_points_is_invariant() {
    let inst = gen_equivalence_instance(777, 4, 3, 8, Amplitude::FULL);
    let family = &inst.family;
    let s1 = family.s1_space();
    let s2 = family.s2_space();

    // reverse both coordinate orders
    let perm1: Vec<usize> = (0..s1.len()).rev().collect();
    let perm2: Vec<usize> = (0..s2.len()).rev().collect();
    let ids1: Vec<String> = perm1.iter().map(|&i| s1.id(i).to_string()).collect();
    let ids2: Vec<String> = perm2.iter().map(|&i| s2.id(i).to_string()).collect();
    let metric1: Vec<Vec<f64>> = perm1
        .iter()
        .map(|&i| perm1.iter().map(|&j| s1.distance(i, j)).collect())
        .collect();
    let metric2: Vec<Vec<f64>> = perm2
        .iter()
        .map(|&i| perm2.iter().map(|&j| s2.distance(i, j)).collect())
        .collect();
    let p1 = std::sync::Arc::new(FiniteMetricSpace::new(ids1, None, metric1, false).unwrap());
    let p2 = std::sync::Arc::new(FiniteMetricSpace::new(ids2, None, metric2, false).unwrap());
    let permute = |j: &sufeller::kernel::JointMeasure| {
        let mass: Vec<Vec<f64>> = perm1
            .iter()
            .map(|&i| perm2.iter().map(|&k| j.mass()[i][k]).collect())
            .collect();
        sufeller::kernel::JointMeasure::new(p1.clone(), p2.clone(), mass).unwrap()
    };
    let permuted = sufeller::kernel::KernelFamily::new(
        family.joints().iter().map(permute).collect(),
        permute(family.limit()),
    )
    .unwrap();

    let params = VerdictParams::default();
    let a = sufeller::analysis::full_tv_gap(family, params);
    let b = sufeller::analysis::full_tv_gap(&permuted, params);
    assert_eq!(a.gaps, b.gaps);
    let a = sufeller::analysis::marginal_tv_gap(family, params);
    let b = sufeller::analysis::marginal_tv_gap(&permuted, params);
    assert_eq!(a.gaps, b.gaps);

    // set gaps transported through the permutation
    let members: BTreeSet<usize> = [0usize, 2].into_iter().collect();
    let set = sufeller::space::TestSet::new(
        s1.clone(),
        members.clone(),
        sufeller::space::SetRole::Open,
        None,
    )
    .unwrap();
    let inverse1: BTreeSet<usize> = members
        .iter()
        .map(|&m| perm1.iter().position(|&p| p == m).unwrap())
        .collect();
    let set_p =
        sufeller::space::TestSet::new(p1.clone(), inverse1, sufeller::space::SetRole::Open, None)
            .unwrap();
    let g = sufeller::analysis::wtv_gap(family, &set, params).unwrap();
    let gp = sufeller::analysis::wtv_gap(&permuted, &set_p, params).unwrap();
    assert_eq!(g.gaps, gp.gaps);
    println!("relabeling PASS: permuted instances produce identical gap series");
}
