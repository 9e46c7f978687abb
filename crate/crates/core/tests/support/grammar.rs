//! Span-based grammar recognizer: decides membership by trying every split
//! point of every production, memoized over (nonterminal, start, end).

use std::collections::HashMap;

use coderl::minilang::{DslToken, ErrorSubtype, Keyword, Operator, Punct, TestCase};

use super::oracle::{oracle_run, OracleError};

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Nt {
    Program,
    Stmt,
    Expr,
    Term,
    Factor,
}

struct Recognizer<'a> {
    t: &'a [DslToken],
    memo: HashMap<(Nt, usize, usize), bool>,
}

fn punct(t: DslToken, p: Punct) -> bool {
    t == DslToken::Punct(p)
}

fn keyword(t: DslToken, k: Keyword) -> bool {
    t == DslToken::Keyword(k)
}

impl Recognizer<'_> {
    fn is(&mut self, nt: Nt, i: usize, j: usize) -> bool {
        if i >= j {
            return false;
        }
        if let Some(&v) = self.memo.get(&(nt, i, j)) {
            return v;
        }
        let v = match nt {
            Nt::Program => {
                self.is(Nt::Stmt, i, j)
                    || (i + 1..j).any(|k| {
                        punct(self.t[k], Punct::Semi) && self.is(Nt::Program, i, k) && self.is(Nt::Stmt, k + 1, j)
                    })
            }
            Nt::Stmt => self.stmt(i, j),
            Nt::Expr => {
                self.is(Nt::Term, i, j)
                    || (i + 1..j).any(|k| {
                        matches!(self.t[k], DslToken::Op(Operator::Plus | Operator::Minus))
                            && self.is(Nt::Expr, i, k)
                            && self.is(Nt::Term, k + 1, j)
                    })
            }
            Nt::Term => {
                self.is(Nt::Factor, i, j)
                    || (i + 1..j).any(|k| {
                        matches!(
                            self.t[k],
                            DslToken::Op(Operator::Star | Operator::Slash | Operator::Percent)
                        ) && self.is(Nt::Term, i, k)
                            && self.is(Nt::Factor, k + 1, j)
                    })
            }
            Nt::Factor => {
                (j == i + 1 && matches!(self.t[i], DslToken::Var(_) | DslToken::Int(_)))
                    || (j >= i + 3
                        && punct(self.t[i], Punct::LParen)
                        && punct(self.t[j - 1], Punct::RParen)
                        && self.is(Nt::Expr, i + 1, j - 1))
            }
        };
        self.memo.insert((nt, i, j), v);
        v
    }

    /// `'{' program '}'` spanning exactly `i..j`.
    fn block(&mut self, i: usize, j: usize) -> bool {
        j >= i + 3
            && punct(self.t[i], Punct::LBrace)
            && punct(self.t[j - 1], Punct::RBrace)
            && self.is(Nt::Program, i + 1, j - 1)
    }

    fn stmt(&mut self, i: usize, j: usize) -> bool {
        let t = self.t;
        match t[i] {
            DslToken::Var(_) => j >= i + 3 && punct(t[i + 1], Punct::Assign) && self.is(Nt::Expr, i + 2, j),
            DslToken::Keyword(Keyword::Return) => self.is(Nt::Expr, i + 1, j),
            DslToken::Keyword(Keyword::Loop) => (i + 2..j).any(|k| self.is(Nt::Expr, i + 1, k) && self.block(k, j)),
            DslToken::Keyword(Keyword::If) => (i + 2..j).any(|c| {
                matches!(t[c], DslToken::Op(Operator::Less | Operator::Greater | Operator::EqEq))
                    && self.is(Nt::Expr, i + 1, c)
                    && (c + 2..j).any(|b| {
                        self.is(Nt::Expr, c + 1, b)
                            && (b + 3..j)
                                .any(|e| keyword(t[e], Keyword::Else) && self.block(b, e) && self.block(e + 1, j))
                    })
            }),
            _ => false,
        }
    }
}

pub fn recognizes(tokens: &[DslToken]) -> bool {
    Recognizer {
        t: tokens,
        memo: HashMap::new(),
    }
    .is(Nt::Program, 0, tokens.len())
}

/// Expected subtype of running `tokens` on `tests`: syntax, else the first
/// runtime error, else a wrong answer, else none.
pub fn oracle_subtype(tokens: &[DslToken], tests: &[TestCase], budget: u64) -> ErrorSubtype {
    if !recognizes(tokens) {
        return ErrorSubtype::Syntax;
    }
    let mut wrong = false;
    for t in tests {
        match oracle_run(tokens, [t.inputs.a, t.inputs.b, t.inputs.c], budget) {
            Ok(v) => wrong |= v != t.expected,
            Err(OracleError::Undefined) => return ErrorSubtype::UndefinedVar,
            Err(OracleError::DivZero) => return ErrorSubtype::DivByZero,
            Err(OracleError::NoReturn) => return ErrorSubtype::NoReturn,
            Err(OracleError::Steps) => return ErrorSubtype::StepLimit,
        }
    }
    if wrong {
        ErrorSubtype::WrongAnswer
    } else {
        ErrorSubtype::None
    }
}
