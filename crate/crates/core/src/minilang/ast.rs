use super::token::Variable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Gt,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Var(Variable),
    Int(i64),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Condition {
    pub lhs: Expr,
    pub op: CmpOp,
    pub rhs: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Assign(Variable, Expr),
    Return(Expr),
    If {
        cond: Condition,
        then_block: Vec<Stmt>,
        else_block: Vec<Stmt>,
    },
    Loop {
        count: Expr,
        body: Vec<Stmt>,
    },
}

/// A parsed program: a non-empty statement list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ast {
    pub body: Vec<Stmt>,
}

impl Ast {
    pub fn loop_count(&self) -> usize {
        fn walk(stmts: &[Stmt]) -> usize {
            stmts
                .iter()
                .map(|s| match s {
                    Stmt::Loop { body, .. } => 1 + walk(body),
                    Stmt::If {
                        then_block, else_block, ..
                    } => walk(then_block) + walk(else_block),
                    _ => 0,
                })
                .sum()
        }
        walk(&self.body)
    }
}
