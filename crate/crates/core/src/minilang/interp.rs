use super::ast::{Ast, BinOp, CmpOp, Expr, Stmt};
use super::token::Variable;
use super::{RuntimeError, TestCase};

pub const DEFAULT_STEP_BUDGET: u64 = 10_000;
pub const MAX_LOOP_ITERATIONS: i64 = 100;

/// Runs `ast` on one test case.
///
/// Cost model: every statement executed and every expression node evaluated
/// (variable, literal, binary operation) costs one step. Parentheses are not
/// nodes. The run fails with `StepLimit` as soon as the count exceeds
/// `step_budget`.
pub fn execute(ast: &Ast, test: &TestCase, step_budget: u64) -> Result<i64, RuntimeError> {
    let mut machine = Machine {
        vars: [None; 6],
        steps: 0,
        budget: step_budget,
    };
    for v in Variable::INPUTS {
        machine.vars[v.index()] = Some(test.input(v));
    }
    match machine.block(&ast.body)? {
        Flow::Return(v) => Ok(v),
        Flow::Continue => Err(RuntimeError::NoReturn),
    }
}

enum Flow {
    Continue,
    Return(i64),
}

struct Machine {
    vars: [Option<i64>; 6],
    steps: u64,
    budget: u64,
}

impl Machine {
    fn tick(&mut self) -> Result<(), RuntimeError> {
        self.steps += 1;
        if self.steps > self.budget {
            Err(RuntimeError::StepLimit)
        } else {
            Ok(())
        }
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<Flow, RuntimeError> {
        for stmt in stmts {
            if let Flow::Return(v) = self.stmt(stmt)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Continue)
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<Flow, RuntimeError> {
        self.tick()?;
        match stmt {
            Stmt::Assign(var, expr) => {
                let value = self.expr(expr)?;
                self.vars[var.index()] = Some(value);
                Ok(Flow::Continue)
            }
            Stmt::Return(expr) => Ok(Flow::Return(self.expr(expr)?)),
            Stmt::If {
                cond,
                then_block,
                else_block,
            } => {
                let lhs = self.expr(&cond.lhs)?;
                let rhs = self.expr(&cond.rhs)?;
                let taken = match cond.op {
                    CmpOp::Lt => lhs < rhs,
                    CmpOp::Gt => lhs > rhs,
                    CmpOp::Eq => lhs == rhs,
                };
                self.block(if taken { then_block } else { else_block })
            }
            Stmt::Loop { count, body } => {
                let n = self.expr(count)?.clamp(0, MAX_LOOP_ITERATIONS);
                for _ in 0..n {
                    if let Flow::Return(v) = self.block(body)? {
                        return Ok(Flow::Return(v));
                    }
                }
                Ok(Flow::Continue)
            }
        }
    }

    fn expr(&mut self, expr: &Expr) -> Result<i64, RuntimeError> {
        self.tick()?;
        match expr {
            Expr::Int(n) => Ok(*n),
            Expr::Var(v) => self.vars[v.index()].ok_or(RuntimeError::UndefinedVar(*v)),
            Expr::Binary(op, lhs, rhs) => {
                let l = self.expr(lhs)?;
                let r = self.expr(rhs)?;
                match op {
                    BinOp::Add => Ok(l.wrapping_add(r)),
                    BinOp::Sub => Ok(l.wrapping_sub(r)),
                    BinOp::Mul => Ok(l.wrapping_mul(r)),
                    BinOp::Div if r == 0 => Err(RuntimeError::DivByZero),
                    BinOp::Rem if r == 0 => Err(RuntimeError::DivByZero),
                    BinOp::Div => Ok(l.wrapping_div(r)),
                    BinOp::Rem => Ok(l.wrapping_rem(r)),
                }
            }
        }
    }
}
