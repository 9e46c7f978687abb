//! LL(1) recursive-descent parser.
//!
//! ```text
//! program := stmt (';' stmt)*
//! stmt    := var '=' expr | 'return' expr
//!          | 'if' expr cmp expr '{' program '}' 'else' '{' program '}'
//!          | 'loop' expr '{' program '}'
//! expr    := term (('+'|'-') term)*
//! term    := factor (('*'|'/'|'%') factor)*
//! factor  := var | int | '(' expr ')'
//! cmp     := '<' | '>' | '=='
//! ```

use super::ast::{Ast, BinOp, CmpOp, Condition, Expr, Stmt};
use super::token::{DslToken, Keyword, Operator, Punct};
use super::SyntaxError;

pub fn parse(tokens: &[DslToken]) -> Result<Ast, SyntaxError> {
    let mut p = Parser { tokens, pos: 0 };
    let body = p.program()?;
    if p.pos != tokens.len() {
        return Err(p.error("trailing tokens after program"));
    }
    Ok(Ast { body })
}

struct Parser<'a> {
    tokens: &'a [DslToken],
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<DslToken> {
        self.tokens.get(self.pos).copied()
    }

    fn error(&self, message: &'static str) -> SyntaxError {
        SyntaxError {
            offset: self.pos,
            message,
        }
    }

    fn expect_punct(&mut self, punct: Punct, message: &'static str) -> Result<(), SyntaxError> {
        if self.peek() == Some(DslToken::Punct(punct)) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(message))
        }
    }

    fn program(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        let mut stmts = vec![self.stmt()?];
        while self.peek() == Some(DslToken::Punct(Punct::Semi)) {
            self.pos += 1;
            stmts.push(self.stmt()?);
        }
        Ok(stmts)
    }

    fn block(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        self.expect_punct(Punct::LBrace, "expected '{'")?;
        let body = self.program()?;
        self.expect_punct(Punct::RBrace, "expected '}'")?;
        Ok(body)
    }

    fn stmt(&mut self) -> Result<Stmt, SyntaxError> {
        match self.peek() {
            Some(DslToken::Var(v)) => {
                self.pos += 1;
                self.expect_punct(Punct::Assign, "expected '=' after variable")?;
                Ok(Stmt::Assign(v, self.expr()?))
            }
            Some(DslToken::Keyword(Keyword::Return)) => {
                self.pos += 1;
                Ok(Stmt::Return(self.expr()?))
            }
            Some(DslToken::Keyword(Keyword::If)) => {
                self.pos += 1;
                let lhs = self.expr()?;
                let op = match self.peek() {
                    Some(DslToken::Op(Operator::Less)) => CmpOp::Lt,
                    Some(DslToken::Op(Operator::Greater)) => CmpOp::Gt,
                    Some(DslToken::Op(Operator::EqEq)) => CmpOp::Eq,
                    _ => return Err(self.error("expected comparison operator")),
                };
                self.pos += 1;
                let rhs = self.expr()?;
                let then_block = self.block()?;
                if self.peek() != Some(DslToken::Keyword(Keyword::Else)) {
                    return Err(self.error("expected 'else'"));
                }
                self.pos += 1;
                let else_block = self.block()?;
                Ok(Stmt::If {
                    cond: Condition { lhs, op, rhs },
                    then_block,
                    else_block,
                })
            }
            Some(DslToken::Keyword(Keyword::Loop)) => {
                self.pos += 1;
                let count = self.expr()?;
                let body = self.block()?;
                Ok(Stmt::Loop { count, body })
            }
            _ => Err(self.error("expected statement")),
        }
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(DslToken::Op(Operator::Plus)) => BinOp::Add,
                Some(DslToken::Op(Operator::Minus)) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(DslToken::Op(Operator::Star)) => BinOp::Mul,
                Some(DslToken::Op(Operator::Slash)) => BinOp::Div,
                Some(DslToken::Op(Operator::Percent)) => BinOp::Rem,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr, SyntaxError> {
        match self.peek() {
            Some(DslToken::Var(v)) => {
                self.pos += 1;
                Ok(Expr::Var(v))
            }
            Some(DslToken::Int(n)) => {
                self.pos += 1;
                Ok(Expr::Int(i64::from(n)))
            }
            Some(DslToken::Punct(Punct::LParen)) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_punct(Punct::RParen, "expected ')'")?;
                Ok(inner)
            }
            _ => Err(self.error("expected variable, literal or '('")),
        }
    }
}
