use proptest::prelude::*;

use super::*;

fn rep(category: Outcome) -> OutcomeReport {
    let subtype = match category {
        Outcome::CompileError => ErrorSubtype::Syntax,
        Outcome::RuntimeError => ErrorSubtype::DivByZero,
        Outcome::FailedTest => ErrorSubtype::WrongAnswer,
        Outcome::PassedTest => ErrorSubtype::None,
    };
    OutcomeReport {
        category,
        subtype,
        per_test: Vec::new(),
    }
}

fn prog(hidden: bool, example: bool, ll: f64, score: f64) -> ProgramRecord {
    let o = |b| if b { Outcome::PassedTest } else { Outcome::FailedTest };
    ProgramRecord {
        hidden: rep(o(hidden)),
        example: rep(o(example)),
        mean_log_prob: ll,
        score: Some(score),
    }
}

fn record(id: &str, tier: u8, programs: Vec<ProgramRecord>) -> EvalRecord {
    EvalRecord {
        problem_id: id.into(),
        tier,
        programs,
    }
}

fn flags(solved: &[bool]) -> Vec<EvalRecord> {
    solved
        .iter()
        .enumerate()
        .map(|(i, &s)| record(&format!("p{i}"), 1, vec![prog(s, s, -1.0, 0.5)]))
        .collect()
}

/// Fraction of k-subsets of n items, c of them good, containing a good one.
fn enumerate_subsets(n: usize, c: usize, k: usize) -> f64 {
    let (mut hit, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        total += 1;
        if (0..c).any(|i| mask & (1 << i) != 0) {
            hit += 1;
        }
    }
    hit as f64 / total as f64
}

#[test]
fn raw_counts_solved_problems() {
    assert_eq!(
        pass_at_k(&flags(&[true, false, true, false]), 1, PassMode::Raw),
        Ok(0.5)
    );
}

#[test]
fn unbiased_worked_example() {
    let r = vec![record(
        "p",
        1,
        vec![
            prog(true, true, -1.0, 0.5),
            prog(false, true, -1.0, 0.5),
            prog(true, true, -1.0, 0.5),
            prog(false, true, -1.0, 0.5),
        ],
    )];
    let v = pass_at_k(&r, 2, PassMode::Unbiased).unwrap();
    assert!((v - 5.0 / 6.0).abs() < 1e-12);
}

#[test]
fn unbiased_matches_enumeration() {
    for n in 1..=10 {
        for c in 0..=n {
            for k in 1..=n {
                let a = unbiased_estimate(n, c, k);
                let b = enumerate_subsets(n, c, k);
                assert!((a - b).abs() < 1e-12, "n={n} c={c} k={k}: {a} vs {b}");
            }
        }
    }
    assert_eq!(unbiased_estimate(20, 0, 5), 0.0);
    assert_eq!(unbiased_estimate(20, 20, 5), 1.0);
    let big = unbiased_estimate(100_000, 3, 50_000);
    assert!(big.is_finite() && (0.0..=1.0).contains(&big));
}

#[test]
fn argument_errors() {
    let r = flags(&[true]);
    assert!(matches!(
        pass_at_k(&r, 2, PassMode::Unbiased),
        Err(EvalError::NotEnoughPrograms { .. })
    ));
    assert!(matches!(
        pass_at_k(&r, 2, PassMode::Raw),
        Err(EvalError::NotEnoughPrograms { .. })
    ));
    assert_eq!(pass_at_k(&r, 0, PassMode::Raw), Err(EvalError::ZeroK));
    assert_eq!(n_at_k(&r, 2, 1), Err(EvalError::NExceedsK { n: 2, k: 1 }));
    assert_eq!(pass_at_k(&[], 1, PassMode::Raw), Err(EvalError::Empty));
}

#[test]
fn n_at_k_selection() {
    // the example-test passer with the best likelihood also passes hidden
    let r = record(
        "p",
        1,
        vec![
            prog(false, true, -2.0, 0.9),
            prog(true, true, -0.5, 0.1),
            prog(false, false, -0.1, 0.99),
        ],
    );
    assert_eq!(select_candidates(&r, 1, 3), vec![1]);
    assert_eq!(n_at_k(std::slice::from_ref(&r), 1, 3), Ok(1.0));
    assert_eq!(select_candidates(&r, 3, 3), vec![1, 0, 2]);
    // nobody passes example tests: fill by score
    let r = record(
        "q",
        1,
        vec![prog(false, false, -1.0, 0.2), prog(false, false, -3.0, 0.7)],
    );
    assert_eq!(select_candidates(&r, 1, 2), vec![1]);
    assert_eq!(n_at_k(&[r], 2, 2), Ok(0.0));
}

#[test]
fn histogram_counts() {
    let mut programs: Vec<ProgramRecord> = (0..3).map(|_| prog(true, true, -1.0, 0.5)).collect();
    programs[0].hidden = rep(Outcome::CompileError);
    let h = outcome_histogram(&[record("p", 2, programs)], TestSet::Hidden);
    assert!((h.overall.categories[&Outcome::CompileError] - 100.0 / 3.0).abs() < 1e-9);
    assert!((h.overall.subtypes[&ErrorSubtype::Syntax] - 100.0 / 3.0).abs() < 1e-9);
    let four = vec![
        prog(true, true, -1.0, 0.5),
        prog(true, true, -1.0, 0.5),
        prog(true, true, -1.0, 0.5),
        ProgramRecord {
            hidden: rep(Outcome::CompileError),
            ..prog(true, true, -1.0, 0.5)
        },
    ];
    let h = outcome_histogram(&[record("p", 1, four)], TestSet::Hidden);
    assert_eq!(h.overall.categories[&Outcome::CompileError], 25.0);
    let all = outcome_histogram(&flags(&[true, true]), TestSet::Example);
    assert_eq!(all.overall.categories[&Outcome::PassedTest], 100.0);
    assert!(all.overall.subtypes.is_empty());
    assert_eq!(all.per_tier[&1].problems, 2);
}

#[test]
fn csv_layout() {
    let r = vec![record(
        "p",
        1,
        vec![prog(true, true, -1.0, 0.5), prog(false, false, -1.0, 0.5)],
    )];
    let spec = ReportSpec {
        ks: vec![1, 2, 3],
        n_at_k: vec![(1, 2)],
        unbiased: true,
    };
    let rows = metric_table(&r, &spec);
    let csv = to_csv(&rows);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("metric,k,n,tier,value"));
    assert_eq!(lines.next(), Some("pass@k,1,,all,1.000000"));
    assert!(csv.contains("pass@k_unbiased,1,,all,0.500000\n"));
    assert!(csv.contains("n@k,2,1,all,1.000000\n"));
    assert!(csv.contains("hidden_pct/FailedTest,,,1,50.000000\n"));
    assert!(!csv.contains("pass@k,3,"));
    assert_eq!(csv, to_csv(&metric_table(&r, &spec)));
    let parsed: Vec<MetricRow> = serde_json::from_str(&to_json(&rows)).unwrap();
    assert_eq!(parsed, rows);
}

fn arb_records() -> impl Strategy<Value = Vec<EvalRecord>> {
    let program = (any::<bool>(), any::<bool>(), -5.0..0.0f64, 0.0..1.0f64).prop_map(|(h, e, ll, s)| prog(h, e, ll, s));
    (1usize..8).prop_flat_map(move |n| {
        prop::collection::vec((prop::collection::vec(program.clone(), n), 1u8..4), 1..6).prop_map(|ps| {
            ps.into_iter()
                .enumerate()
                .map(|(i, (programs, tier))| record(&format!("p{i}"), tier, programs))
                .collect()
        })
    })
}

proptest! {
    #[test]
    fn metric_algebra(records in arb_records()) {
        let n = records[0].programs.len();
        let mut last = 0.0;
        for k in 1..=n {
            let raw = pass_at_k(&records, k, PassMode::Raw).unwrap();
            prop_assert!(raw >= last);
            last = raw;
            for m in 1..=k {
                prop_assert!(n_at_k(&records, m, k).unwrap() <= raw);
            }
            prop_assert_eq!(n_at_k(&records, k, k).unwrap(), raw);
        }
        let raw = pass_at_k(&records, n, PassMode::Raw).unwrap();
        let unbiased = pass_at_k(&records, n, PassMode::Unbiased).unwrap();
        prop_assert!((raw - unbiased).abs() < 1e-12);
        for test_set in [TestSet::Example, TestSet::Hidden] {
            let h = outcome_histogram(&records, test_set).overall;
            let total: f64 = h.categories.values().sum();
            prop_assert!((total - 100.0).abs() < 1e-9);
            let errors: f64 = h.subtypes.values().sum();
            prop_assert!((errors + h.categories[&Outcome::PassedTest] - 100.0).abs() < 1e-9);
        }
    }
}
