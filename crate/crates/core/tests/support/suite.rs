use std::collections::BTreeSet;

use coderl::minilang::{evaluate_with_budget, ErrorSubtype, TestCase, DEFAULT_STEP_BUDGET};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grammar::{oracle_subtype, recognizes};
use super::oracle::oracle_run;
use super::programs::{corrupt, random_inputs, random_program};

/// Runs `programs` random programs (a quarter corrupted) on random tests
/// through `evaluate_with_budget` and the oracle. Returns the subtypes seen,
/// or a description of the first disagreement.
pub fn outcome_suite(programs: usize, seed: u64) -> Result<BTreeSet<ErrorSubtype>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    for case in 0..programs {
        let mut program = random_program(&mut rng);
        if rng.random_bool(0.25) {
            program = corrupt(&mut rng, &program);
        }
        let valid = recognizes(&program);
        let budget = if case % 5 == 0 {
            1 + case as u64 % 40
        } else {
            DEFAULT_STEP_BUDGET
        };
        let tests: Vec<TestCase> = (0..rng.random_range(1..=3))
            .map(|_| {
                let inputs = random_inputs(&mut rng);
                // mostly the true answer, sometimes off by one
                let truth = if valid {
                    oracle_run(&program, inputs, budget).unwrap_or(0)
                } else {
                    0
                };
                TestCase::new(
                    inputs,
                    if rng.random_bool(0.3) {
                        truth.wrapping_add(1)
                    } else {
                        truth
                    },
                )
            })
            .collect();
        let got = evaluate_with_budget(&program, &tests, budget);
        let want = oracle_subtype(&program, &tests, budget);
        if got.subtype != want || got.category != want.category() {
            return Err(format!(
                "case {case}: {program:?} gave {:?}, oracle {want:?}",
                got.subtype
            ));
        }
        seen.insert(want);
    }
    Ok(seen)
}
