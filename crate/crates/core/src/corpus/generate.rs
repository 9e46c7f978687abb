use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, Dataset, ProblemSpec, Split};
use crate::minilang::{
    evaluate_program, execute, lex, parse, render, DslToken, Keyword, Operator, Punct, TestCase, Variable,
    DEFAULT_STEP_BUDGET,
};

pub const EXAMPLE_TESTS: usize = 2;
pub const MIN_HIDDEN_TESTS: usize = 5;
pub const MAX_HIDDEN_TESTS: usize = 10;
const MAX_REDRAWS: usize = 100;
const INPUT_RANGE: std::ops::RangeInclusive<i64> = -9..=9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Node {
    Leaf(DslToken),
    Bin(Operator, usize, usize),
}

/// Random arithmetic expression over `a`, `b`, `c` and small literals with
/// exactly `ops` operators from `+ - *`, rendered with minimal parentheses.
fn random_expression<R: Rng>(rng: &mut R, ops: usize) -> Vec<DslToken> {
    fn build<R: Rng>(rng: &mut R, ops: usize, nodes: &mut Vec<Node>) -> usize {
        if ops == 0 {
            let leaf = if rng.random_bool(0.8) {
                DslToken::Var(Variable::INPUTS[rng.random_range(0..3)])
            } else {
                DslToken::Int(rng.random_range(1..=9))
            };
            nodes.push(Node::Leaf(leaf));
            return nodes.len() - 1;
        }
        let op = [Operator::Plus, Operator::Minus, Operator::Star][rng.random_range(0..3)];
        let left_ops = rng.random_range(0..ops);
        let l = build(rng, left_ops, nodes);
        let r = build(rng, ops - 1 - left_ops, nodes);
        nodes.push(Node::Bin(op, l, r));
        nodes.len() - 1
    }
    fn prec(op: Operator) -> u8 {
        if op == Operator::Star {
            2
        } else {
            1
        }
    }
    fn emit(nodes: &[Node], i: usize, out: &mut Vec<DslToken>) {
        match nodes[i] {
            Node::Leaf(t) => out.push(t),
            Node::Bin(op, l, r) => {
                let wrap_l = matches!(nodes[l], Node::Bin(lop, _, _) if prec(lop) < prec(op));
                let wrap_r = matches!(nodes[r], Node::Bin(rop, _, _) if prec(rop) <= prec(op));
                emit_wrapped(nodes, l, wrap_l, out);
                out.push(DslToken::Op(op));
                emit_wrapped(nodes, r, wrap_r, out);
            }
        }
    }
    fn emit_wrapped(nodes: &[Node], i: usize, wrap: bool, out: &mut Vec<DslToken>) {
        if wrap {
            out.push(DslToken::Punct(Punct::LParen));
        }
        emit(nodes, i, out);
        if wrap {
            out.push(DslToken::Punct(Punct::RParen));
        }
    }
    let mut nodes = Vec::new();
    let root = build(rng, ops, &mut nodes);
    let mut out = Vec::new();
    emit(&nodes, root, &mut out);
    out
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn strings(tokens: &[DslToken]) -> Vec<String> {
    tokens.iter().map(DslToken::to_string).collect()
}

fn program(text: &str) -> Vec<DslToken> {
    lex(text).expect("generator emits valid tokens")
}

/// Draws the description and ground truth for one problem of `tier`.
fn draw_task<R: Rng>(rng: &mut R, tier: u8) -> (Vec<String>, Vec<DslToken>) {
    match tier {
        1 => {
            let ops = rng.random_range(1..=4);
            let expr = random_expression(rng, ops);
            let mut desc = words("given inputs a , b , c compute");
            desc.extend(strings(&expr));
            let mut gt = program("return");
            gt.extend(expr);
            (desc, gt)
        }
        2 => {
            let ops1 = rng.random_range(1..=4);
            let e1 = random_expression(rng, ops1);
            let ops2 = rng.random_range(1..=4);
            let e2 = random_expression(rng, ops2);
            let var = DslToken::Var(Variable::INPUTS[rng.random_range(0..3)]);
            let cmp = DslToken::Op([Operator::Less, Operator::Greater, Operator::EqEq][rng.random_range(0..3)]);
            let lit = DslToken::Int(rng.random_range(0..=9));
            let mut desc = words("compute");
            desc.extend(strings(&e1));
            desc.extend(strings(&[DslToken::Keyword(Keyword::If), var, cmp, lit]));
            desc.push("otherwise".into());
            desc.extend(strings(&e2));
            let mut gt = vec![DslToken::Keyword(Keyword::If), var, cmp, lit];
            gt.extend(program("{ return"));
            gt.extend(e1);
            gt.extend(program("} else { return"));
            gt.extend(e2);
            gt.push(DslToken::Punct(Punct::RBrace));
            (desc, gt)
        }
        _ => {
            let ops = rng.random_range(1..=4);
            let expr = random_expression(rng, ops);
            let mut desc = words("starting from 0 repeat c times add");
            desc.extend(strings(&expr));
            let mut gt = program("x = 0 ; loop c { x = x +");
            gt.extend(expr);
            gt.extend(program("} ; return x"));
            (desc, gt)
        }
    }
}

fn draw_inputs<R: Rng>(rng: &mut R, tier: u8) -> [i64; 3] {
    let a = rng.random_range(INPUT_RANGE);
    let b = rng.random_range(INPUT_RANGE);
    let c = if tier == 3 {
        rng.random_range(0..=9)
    } else {
        rng.random_range(INPUT_RANGE)
    };
    [a, b, c]
}

/// Generates one problem of the given tier. Tests are redrawn on input
/// collisions and when `return 0` would pass every hidden test; after 100
/// redraws the draw fails.
pub fn generate_problem<R: Rng>(tier: u8, rng: &mut R) -> Result<ProblemSpec, CorpusError> {
    if !(1..=3).contains(&tier) {
        return Err(CorpusError::InvalidTier(tier));
    }
    let (description, ground_truth) = draw_task(rng, tier);
    let ast = parse(&ground_truth).expect("generator emits parseable programs");
    let hidden_count = rng.random_range(MIN_HIDDEN_TESTS..=MAX_HIDDEN_TESTS);
    let total = EXAMPLE_TESTS + hidden_count;
    let trivial = program("return 0");

    for _ in 0..MAX_REDRAWS {
        let mut triples: Vec<[i64; 3]> = Vec::with_capacity(total);
        let mut collided = false;
        for _ in 0..total {
            let t = draw_inputs(rng, tier);
            if triples.contains(&t) {
                collided = true;
                break;
            }
            triples.push(t);
        }
        if collided {
            continue;
        }
        let tests: Vec<TestCase> = triples
            .iter()
            .map(|&t| {
                let probe = TestCase::new(t, 0);
                let v = execute(&ast, &probe, DEFAULT_STEP_BUDGET).expect("ground truth runs cleanly");
                TestCase::new(t, v)
            })
            .collect();
        let (example_tests, hidden_tests) = tests.split_at(EXAMPLE_TESTS);
        if evaluate_program(&trivial, hidden_tests).passed() {
            continue;
        }
        return Ok(ProblemSpec {
            id: String::new(),
            tier,
            description,
            example_tests: example_tests.to_vec(),
            hidden_tests: hidden_tests.to_vec(),
            ground_truth,
        });
    }
    Err(CorpusError::GenerationFailed {
        tier,
        program: render(&ground_truth),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetConfig {
    pub split: Split,
    pub problems: usize,
    pub seed: u64,
    /// Fractions of tiers 1, 2, 3.
    pub tier_mix: [f64; 3],
}

impl DatasetConfig {
    pub fn new(split: Split, problems: usize, seed: u64) -> Self {
        Self {
            split,
            problems,
            seed,
            tier_mix: [0.6, 0.3, 0.1],
        }
    }

    fn tier_counts(&self) -> [usize; 3] {
        let c2 = (self.tier_mix[1] * self.problems as f64).round() as usize;
        let c3 = (self.tier_mix[2] * self.problems as f64).round() as usize;
        let c3 = c3.min(self.problems);
        let c2 = c2.min(self.problems - c3);
        [self.problems - c2 - c3, c2, c3]
    }
}

/// Generates a dataset from a single seeded stream. Tier quotas follow
/// `tier_mix` exactly (rounded); tiers are shuffled into generation order.
pub fn generate_dataset(config: &DatasetConfig) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let counts = config.tier_counts();
    let mut tiers: Vec<u8> = (0..3)
        .flat_map(|t| std::iter::repeat_n(t as u8 + 1, counts[t]))
        .collect();
    tiers.shuffle(&mut rng);
    let prefix = config.split.name();
    let problems = tiers
        .into_iter()
        .enumerate()
        .map(|(i, tier)| loop {
            if let Ok(mut p) = generate_problem(tier, &mut rng) {
                p.id = format!("{prefix}-{i:04}");
                p.check().expect("generated problem satisfies its invariants");
                break p;
            }
        })
        .collect();
    Dataset {
        problems,
        split: config.split,
        generator_seed: config.seed,
    }
}
