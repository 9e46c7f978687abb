use std::fmt;

use super::LexError;

/// The six variable names of the language. `a`, `b`, `c` are inputs;
/// `x`, `y`, `z` are scratch registers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variable {
    A,
    B,
    C,
    X,
    Y,
    Z,
}

impl Variable {
    pub const ALL: [Variable; 6] = [
        Variable::A,
        Variable::B,
        Variable::C,
        Variable::X,
        Variable::Y,
        Variable::Z,
    ];
    pub const INPUTS: [Variable; 3] = [Variable::A, Variable::B, Variable::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variable::A => "a",
            Variable::B => "b",
            Variable::C => "c",
            Variable::X => "x",
            Variable::Y => "y",
            Variable::Z => "z",
        }
    }

    fn from_str(s: &str) -> Option<Self> {
        Variable::ALL.into_iter().find(|v| v.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operator {
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Less,
    Greater,
    EqEq,
}

impl Operator {
    pub const ALL: [Operator; 8] = [
        Operator::Plus,
        Operator::Minus,
        Operator::Star,
        Operator::Slash,
        Operator::Percent,
        Operator::Less,
        Operator::Greater,
        Operator::EqEq,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Operator::Plus => "+",
            Operator::Minus => "-",
            Operator::Star => "*",
            Operator::Slash => "/",
            Operator::Percent => "%",
            Operator::Less => "<",
            Operator::Greater => ">",
            Operator::EqEq => "==",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Punct {
    LParen,
    RParen,
    LBrace,
    RBrace,
    Assign,
    Semi,
}

impl Punct {
    pub const ALL: [Punct; 6] = [
        Punct::LParen,
        Punct::RParen,
        Punct::LBrace,
        Punct::RBrace,
        Punct::Assign,
        Punct::Semi,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Punct::LParen => "(",
            Punct::RParen => ")",
            Punct::LBrace => "{",
            Punct::RBrace => "}",
            Punct::Assign => "=",
            Punct::Semi => ";",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    Return,
    If,
    Else,
    Loop,
}

impl Keyword {
    pub const ALL: [Keyword; 4] = [Keyword::Return, Keyword::If, Keyword::Else, Keyword::Loop];

    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Return => "return",
            Keyword::If => "if",
            Keyword::Else => "else",
            Keyword::Loop => "loop",
        }
    }
}

/// Largest integer literal the lexer accepts (nine decimal digits).
pub const MAX_LITERAL: u32 = 999_999_999;

/// One lexical token of the language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DslToken {
    Var(Variable),
    Int(u32),
    Op(Operator),
    Punct(Punct),
    Keyword(Keyword),
}

impl DslToken {
    /// Parses a single whitespace-free word.
    pub fn from_word(word: &str) -> Option<Self> {
        if let Some(v) = Variable::from_str(word) {
            return Some(DslToken::Var(v));
        }
        if let Some(op) = Operator::ALL.into_iter().find(|o| o.as_str() == word) {
            return Some(DslToken::Op(op));
        }
        if let Some(p) = Punct::ALL.into_iter().find(|p| p.as_str() == word) {
            return Some(DslToken::Punct(p));
        }
        if let Some(k) = Keyword::ALL.into_iter().find(|k| k.as_str() == word) {
            return Some(DslToken::Keyword(k));
        }
        if !word.is_empty() && word.len() <= 9 && word.bytes().all(|b| b.is_ascii_digit()) {
            return word.parse().ok().map(DslToken::Int);
        }
        None
    }
}

impl fmt::Display for DslToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DslToken::Var(v) => f.write_str(v.as_str()),
            DslToken::Int(n) => write!(f, "{n}"),
            DslToken::Op(o) => f.write_str(o.as_str()),
            DslToken::Punct(p) => f.write_str(p.as_str()),
            DslToken::Keyword(k) => f.write_str(k.as_str()),
        }
    }
}

/// Splits program text into tokens. Tokens may be separated by whitespace or
/// written adjacently (`(a+b)`); `==` is matched greedily before `=`.
pub fn lex(text: &str) -> Result<Vec<DslToken>, LexError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if b.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let word = &text[start..i];
            let tok = DslToken::from_word(word).ok_or_else(|| LexError::LiteralTooLong {
                offset: start,
                literal: word.to_string(),
            })?;
            tokens.push(tok);
        } else if b.is_ascii_alphabetic() {
            while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                i += 1;
            }
            let word = &text[start..i];
            let tok = DslToken::from_word(word).ok_or_else(|| LexError::UnknownWord {
                offset: start,
                word: word.to_string(),
            })?;
            tokens.push(tok);
        } else if text[i..].starts_with("==") {
            tokens.push(DslToken::Op(Operator::EqEq));
            i += 2;
        } else {
            let ch = text[i..].chars().next().unwrap_or('?');
            let word = &text[i..i + ch.len_utf8()];
            let tok = DslToken::from_word(word).ok_or_else(|| LexError::UnknownWord {
                offset: start,
                word: word.to_string(),
            })?;
            tokens.push(tok);
            i += ch.len_utf8();
        }
    }
    Ok(tokens)
}

/// Canonical text form: tokens joined by single spaces.
pub fn render(tokens: &[DslToken]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.to_string());
    }
    out
}
