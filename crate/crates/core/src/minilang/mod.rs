//! The miniature language used as the synthesis target: lexer, parser,
//! interpreter, and the mapping from execution results to test outcomes.

mod ast;
mod interp;
mod parser;
mod token;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::{Ast, BinOp, CmpOp, Condition, Expr, Stmt};
pub use interp::{execute, DEFAULT_STEP_BUDGET, MAX_LOOP_ITERATIONS};
pub use parser::parse;
pub use token::{lex, render, DslToken, Keyword, Operator, Punct, Variable, MAX_LITERAL};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("unknown word {word:?} at byte {offset}")]
    UnknownWord { offset: usize, word: String },
    #[error("integer literal {literal:?} at byte {offset} exceeds nine digits")]
    LiteralTooLong { offset: usize, literal: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at token {offset}: {message}")]
pub struct SyntaxError {
    pub offset: usize,
    pub message: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("read of unbound variable {}", .0.as_str())]
    UndefinedVar(Variable),
    #[error("division by zero")]
    DivByZero,
    #[error("program ended without return")]
    NoReturn,
    #[error("step budget exhausted")]
    StepLimit,
}

impl RuntimeError {
    pub fn subtype(self) -> ErrorSubtype {
        match self {
            RuntimeError::UndefinedVar(_) => ErrorSubtype::UndefinedVar,
            RuntimeError::DivByZero => ErrorSubtype::DivByZero,
            RuntimeError::NoReturn => ErrorSubtype::NoReturn,
            RuntimeError::StepLimit => ErrorSubtype::StepLimit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Inputs {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

/// One unit test: bindings for `a`, `b`, `c` and the expected return value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TestCase {
    pub inputs: Inputs,
    pub expected: i64,
}

impl TestCase {
    pub fn new([a, b, c]: [i64; 3], expected: i64) -> Self {
        Self {
            inputs: Inputs { a, b, c },
            expected,
        }
    }

    pub fn input(&self, var: Variable) -> i64 {
        match var {
            Variable::A => self.inputs.a,
            Variable::B => self.inputs.b,
            Variable::C => self.inputs.c,
            _ => 0,
        }
    }

    pub fn triple(&self) -> [i64; 3] {
        [self.inputs.a, self.inputs.b, self.inputs.c]
    }
}

/// The four aggregate unit-test outcomes, in severity order. The
/// discriminant is the class index used by the critic heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    CompileError = 0,
    RuntimeError = 1,
    FailedTest = 2,
    PassedTest = 3,
}

impl Outcome {
    pub const ALL: [Outcome; 4] = [
        Outcome::CompileError,
        Outcome::RuntimeError,
        Outcome::FailedTest,
        Outcome::PassedTest,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Outcome::CompileError => "CompileError",
            Outcome::RuntimeError => "RuntimeError",
            Outcome::FailedTest => "FailedTest",
            Outcome::PassedTest => "PassedTest",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorSubtype {
    Syntax,
    UndefinedVar,
    DivByZero,
    NoReturn,
    StepLimit,
    WrongAnswer,
    None,
}

impl ErrorSubtype {
    pub const ALL: [ErrorSubtype; 7] = [
        ErrorSubtype::Syntax,
        ErrorSubtype::UndefinedVar,
        ErrorSubtype::DivByZero,
        ErrorSubtype::NoReturn,
        ErrorSubtype::StepLimit,
        ErrorSubtype::WrongAnswer,
        ErrorSubtype::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorSubtype::Syntax => "syntax",
            ErrorSubtype::UndefinedVar => "undefined_var",
            ErrorSubtype::DivByZero => "div_by_zero",
            ErrorSubtype::NoReturn => "no_return",
            ErrorSubtype::StepLimit => "step_limit",
            ErrorSubtype::WrongAnswer => "wrong_answer",
            ErrorSubtype::None => "none",
        }
    }

    pub fn category(self) -> Outcome {
        match self {
            ErrorSubtype::Syntax => Outcome::CompileError,
            ErrorSubtype::WrongAnswer => Outcome::FailedTest,
            ErrorSubtype::None => Outcome::PassedTest,
            _ => Outcome::RuntimeError,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestResult {
    Value(i64),
    Error(ErrorSubtype),
}

/// Aggregated result of running one program against a list of tests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeReport {
    pub category: Outcome,
    pub subtype: ErrorSubtype,
    pub per_test: Vec<TestResult>,
}

impl OutcomeReport {
    pub fn passed(&self) -> bool {
        self.category == Outcome::PassedTest
    }
}

/// Parses and runs `tokens` against every test. Precedence when tests
/// disagree is compile error, then the first runtime error, then any wrong
/// answer.
pub fn evaluate_program(tokens: &[DslToken], tests: &[TestCase]) -> OutcomeReport {
    evaluate_with_budget(tokens, tests, DEFAULT_STEP_BUDGET)
}

pub fn evaluate_with_budget(tokens: &[DslToken], tests: &[TestCase], step_budget: u64) -> OutcomeReport {
    let Ok(ast) = parse(tokens) else {
        return OutcomeReport {
            category: Outcome::CompileError,
            subtype: ErrorSubtype::Syntax,
            per_test: Vec::new(),
        };
    };
    let per_test: Vec<TestResult> = tests
        .iter()
        .map(|t| match execute(&ast, t, step_budget) {
            Ok(v) => TestResult::Value(v),
            Err(e) => TestResult::Error(e.subtype()),
        })
        .collect();
    let first_error = per_test.iter().find_map(|r| match r {
        TestResult::Error(s) => Some(*s),
        TestResult::Value(_) => None,
    });
    let subtype = if let Some(s) = first_error {
        s
    } else if per_test
        .iter()
        .zip(tests)
        .any(|(r, t)| *r != TestResult::Value(t.expected))
    {
        ErrorSubtype::WrongAnswer
    } else {
        ErrorSubtype::None
    };
    OutcomeReport {
        category: subtype.category(),
        subtype,
        per_test,
    }
}
