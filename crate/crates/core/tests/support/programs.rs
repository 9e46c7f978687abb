//! Random grammar-valid programs biased toward every runtime failure mode.

#![allow(dead_code)]

use coderl::minilang::{DslToken, Keyword, Operator, Punct, Variable};
use rand::Rng;

pub fn random_program<R: Rng>(rng: &mut R) -> Vec<DslToken> {
    let mut out = Vec::new();
    let n = rng.random_range(1..=4);
    statements(rng, &mut out, n, 0);
    out
}

fn statements<R: Rng>(rng: &mut R, out: &mut Vec<DslToken>, n: usize, depth: usize) {
    for i in 0..n {
        if i > 0 {
            out.push(DslToken::Punct(Punct::Semi));
        }
        statement(rng, out, depth, i + 1 == n);
    }
}

fn statement<R: Rng>(rng: &mut R, out: &mut Vec<DslToken>, depth: usize, last: bool) {
    let roll = rng.random_range(0..100);
    let nested_ok = depth < 2;
    if nested_ok && roll < 15 {
        out.push(DslToken::Keyword(Keyword::If));
        expr(rng, out, 0);
        let cmp = [Operator::Less, Operator::Greater, Operator::EqEq][rng.random_range(0..3)];
        out.push(DslToken::Op(cmp));
        expr(rng, out, 0);
        block(rng, out, depth + 1);
        out.push(DslToken::Keyword(Keyword::Else));
        block(rng, out, depth + 1);
    } else if nested_ok && roll < 30 {
        out.push(DslToken::Keyword(Keyword::Loop));
        if rng.random_bool(0.3) {
            out.push(DslToken::Int(100));
        } else {
            expr(rng, out, 1);
        }
        block(rng, out, depth + 1);
    } else if roll < 55 || (last && roll < 85) {
        out.push(DslToken::Keyword(Keyword::Return));
        expr(rng, out, 0);
    } else {
        out.push(DslToken::Var(pick_var(rng, true)));
        out.push(DslToken::Punct(Punct::Assign));
        expr(rng, out, 0);
    }
}

fn block<R: Rng>(rng: &mut R, out: &mut Vec<DslToken>, depth: usize) {
    out.push(DslToken::Punct(Punct::LBrace));
    let n = rng.random_range(1..=3);
    statements(rng, out, n, depth);
    out.push(DslToken::Punct(Punct::RBrace));
}

fn pick_var<R: Rng>(rng: &mut R, scratch_heavy: bool) -> Variable {
    if scratch_heavy && rng.random_bool(0.6) {
        Variable::ALL[rng.random_range(3..6)]
    } else {
        Variable::ALL[rng.random_range(0..6)]
    }
}

fn expr<R: Rng>(rng: &mut R, out: &mut Vec<DslToken>, depth: usize) {
    term(rng, out, depth);
    while rng.random_bool(0.35) {
        let op = if rng.random_bool(0.5) {
            Operator::Plus
        } else {
            Operator::Minus
        };
        out.push(DslToken::Op(op));
        term(rng, out, depth);
    }
}

fn term<R: Rng>(rng: &mut R, out: &mut Vec<DslToken>, depth: usize) {
    factor(rng, out, depth);
    while rng.random_bool(0.3) {
        let op = [Operator::Star, Operator::Slash, Operator::Percent][rng.random_range(0..3)];
        out.push(DslToken::Op(op));
        factor(rng, out, depth);
    }
}

fn factor<R: Rng>(rng: &mut R, out: &mut Vec<DslToken>, depth: usize) {
    let roll = rng.random_range(0..100);
    if depth < 3 && roll < 15 {
        out.push(DslToken::Punct(Punct::LParen));
        expr(rng, out, depth + 1);
        out.push(DslToken::Punct(Punct::RParen));
    } else if roll < 55 {
        out.push(DslToken::Var(pick_var(rng, false)));
    } else if roll < 62 {
        out.push(DslToken::Int(rng.random_range(0..=999_999_999)));
    } else {
        out.push(DslToken::Int(rng.random_range(0..=12)));
    }
}

/// Random input triple: mostly small, occasionally extreme to exercise
/// wrapping arithmetic.
pub fn random_inputs<R: Rng>(rng: &mut R) -> [i64; 3] {
    let mut draw = || {
        if rng.random_bool(0.1) {
            [i64::MIN, i64::MAX, -1, 0][rng.random_range(0..4)]
        } else {
            rng.random_range(-9..=9)
        }
    };
    [draw(), draw(), draw()]
}

/// Deletes, duplicates or swaps a random token; usually breaks the syntax.
pub fn corrupt<R: Rng>(rng: &mut R, tokens: &[DslToken]) -> Vec<DslToken> {
    let mut t = tokens.to_vec();
    let i = rng.random_range(0..t.len());
    match rng.random_range(0..3) {
        0 => {
            t.remove(i);
        }
        1 => t.insert(i, t[i]),
        _ => t.insert(i, DslToken::Punct(Punct::LBrace)),
    }
    t
}
