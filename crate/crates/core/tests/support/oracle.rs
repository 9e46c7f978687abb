//! Reference evaluator that runs programs straight off the token stream,
//! without building a tree. Written from the grammar and the cost model only:
//! one step per executed statement and per expression node, nodes counted in
//! pre-order, loop counts clamped to [0, 100].

#![allow(dead_code)]

use coderl::minilang::{DslToken, Keyword, Operator, Punct, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleError {
    Undefined,
    DivZero,
    NoReturn,
    Steps,
}

pub fn oracle_run(tokens: &[DslToken], inputs: [i64; 3], budget: u64) -> Result<i64, OracleError> {
    let mut o = Oracle {
        t: tokens,
        vars: [Some(inputs[0]), Some(inputs[1]), Some(inputs[2]), None, None, None],
        steps: 0,
        budget,
    };
    match o.statements(0)? {
        (_, Some(v)) => Ok(v),
        (_, None) => Err(OracleError::NoReturn),
    }
}

struct Oracle<'a> {
    t: &'a [DslToken],
    vars: [Option<i64>; 6],
    steps: u64,
    budget: u64,
}

fn var_slot(v: Variable) -> usize {
    match v {
        Variable::A => 0,
        Variable::B => 1,
        Variable::C => 2,
        Variable::X => 3,
        Variable::Y => 4,
        Variable::Z => 5,
    }
}

fn is_additive(t: DslToken) -> bool {
    matches!(t, DslToken::Op(Operator::Plus) | DslToken::Op(Operator::Minus))
}

fn is_multiplicative(t: DslToken) -> bool {
    matches!(
        t,
        DslToken::Op(Operator::Star) | DslToken::Op(Operator::Slash) | DslToken::Op(Operator::Percent)
    )
}

fn is_expr_token(t: DslToken) -> bool {
    matches!(t, DslToken::Var(_) | DslToken::Int(_)) || is_additive(t) || is_multiplicative(t)
}

impl Oracle<'_> {
    fn tick(&mut self) -> Result<(), OracleError> {
        self.steps += 1;
        if self.steps > self.budget {
            Err(OracleError::Steps)
        } else {
            Ok(())
        }
    }

    /// Number of operators at paren depth zero, starting at `pos`, that
    /// satisfy `counted`, stopping at `stop` or at the end of the expression.
    fn count_level(&self, mut pos: usize, counted: fn(DslToken) -> bool, stop: fn(DslToken) -> bool) -> u64 {
        let mut depth = 0usize;
        let mut n = 0;
        while let Some(&tok) = self.t.get(pos) {
            match tok {
                DslToken::Punct(Punct::LParen) => depth += 1,
                DslToken::Punct(Punct::RParen) => {
                    if depth == 0 {
                        break;
                    }
                    depth -= 1;
                }
                t if depth == 0 && stop(t) => break,
                t if depth == 0 && counted(t) => n += 1,
                t if !is_expr_token(t) && depth == 0 => break,
                _ => {}
            }
            pos += 1;
        }
        n
    }

    /// Evaluates an expression at `pos`; returns (next position, value).
    fn expr(&mut self, pos: usize) -> Result<(usize, i64), OracleError> {
        let nodes = self.count_level(pos, is_additive, |_| false);
        for _ in 0..nodes {
            self.tick()?;
        }
        let (mut pos, mut acc) = self.term(pos)?;
        while let Some(&tok) = self.t.get(pos) {
            if !is_additive(tok) {
                break;
            }
            let (next, rhs) = self.term(pos + 1)?;
            acc = if tok == DslToken::Op(Operator::Plus) {
                acc.wrapping_add(rhs)
            } else {
                acc.wrapping_sub(rhs)
            };
            pos = next;
        }
        Ok((pos, acc))
    }

    fn term(&mut self, pos: usize) -> Result<(usize, i64), OracleError> {
        let nodes = self.count_level(pos, is_multiplicative, is_additive);
        for _ in 0..nodes {
            self.tick()?;
        }
        let (mut pos, mut acc) = self.factor(pos)?;
        while let Some(&tok) = self.t.get(pos) {
            if !is_multiplicative(tok) {
                break;
            }
            let (next, rhs) = self.factor(pos + 1)?;
            acc = match tok {
                DslToken::Op(Operator::Star) => acc.wrapping_mul(rhs),
                _ if rhs == 0 => return Err(OracleError::DivZero),
                DslToken::Op(Operator::Slash) => acc.wrapping_div(rhs),
                _ => acc.wrapping_rem(rhs),
            };
            pos = next;
        }
        Ok((pos, acc))
    }

    fn factor(&mut self, pos: usize) -> Result<(usize, i64), OracleError> {
        match self.t[pos] {
            DslToken::Punct(Punct::LParen) => {
                let (next, v) = self.expr(pos + 1)?;
                Ok((next + 1, v))
            }
            DslToken::Int(n) => {
                self.tick()?;
                Ok((pos + 1, i64::from(n)))
            }
            DslToken::Var(v) => {
                self.tick()?;
                let value = self.vars[var_slot(v)].ok_or(OracleError::Undefined)?;
                Ok((pos + 1, value))
            }
            other => panic!("oracle given invalid program at {pos}: {other}"),
        }
    }

    /// Position just past the block whose '{' is at `pos`.
    fn skip_block(&self, pos: usize) -> usize {
        let mut depth = 0usize;
        let mut p = pos;
        loop {
            match self.t[p] {
                DslToken::Punct(Punct::LBrace) => depth += 1,
                DslToken::Punct(Punct::RBrace) => {
                    depth -= 1;
                    if depth == 0 {
                        return p + 1;
                    }
                }
                _ => {}
            }
            p += 1;
        }
    }

    /// Runs `stmt (; stmt)*` starting at `pos`. Returns the position of the
    /// terminating token and the returned value, if any.
    fn statements(&mut self, mut pos: usize) -> Result<(usize, Option<i64>), OracleError> {
        loop {
            let (next, ret) = self.statement(pos)?;
            if ret.is_some() {
                return Ok((next, ret));
            }
            pos = next;
            if self.t.get(pos) == Some(&DslToken::Punct(Punct::Semi)) {
                pos += 1;
            } else {
                return Ok((pos, None));
            }
        }
    }

    fn statement(&mut self, pos: usize) -> Result<(usize, Option<i64>), OracleError> {
        self.tick()?;
        match self.t[pos] {
            DslToken::Var(v) => {
                let (next, value) = self.expr(pos + 2)?;
                self.vars[var_slot(v)] = Some(value);
                Ok((next, None))
            }
            DslToken::Keyword(Keyword::Return) => {
                let (next, value) = self.expr(pos + 1)?;
                Ok((next, Some(value)))
            }
            DslToken::Keyword(Keyword::If) => {
                let (p, lhs) = self.expr(pos + 1)?;
                let cmp = self.t[p];
                let (then_start, rhs) = self.expr(p + 1)?;
                let taken = match cmp {
                    DslToken::Op(Operator::Less) => lhs < rhs,
                    DslToken::Op(Operator::Greater) => lhs > rhs,
                    _ => lhs == rhs,
                };
                let else_kw = self.skip_block(then_start);
                let after = self.skip_block(else_kw + 1);
                let body = if taken { then_start } else { else_kw + 1 };
                let (_, ret) = self.statements(body + 1)?;
                Ok((after, ret))
            }
            DslToken::Keyword(Keyword::Loop) => {
                let (body, count) = self.expr(pos + 1)?;
                let after = self.skip_block(body);
                for _ in 0..count.clamp(0, 100) {
                    let (_, ret) = self.statements(body + 1)?;
                    if ret.is_some() {
                        return Ok((after, ret));
                    }
                }
                Ok((after, None))
            }
            other => panic!("oracle given invalid statement at {pos}: {other}"),
        }
    }
}
