use std::collections::HashMap;
use std::sync::OnceLock;

use crate::minilang::{DslToken, ErrorSubtype, Keyword, Operator, Outcome, Punct, Variable};

pub type TokenId = usize;

pub const PAD: &str = "<pad>";
pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
pub const SEP: &str = "<sep>";

/// Largest integer literal that has its own vocabulary entry. Programs with
/// larger literals lex and run, but cannot be encoded.
pub const MAX_VOCAB_LITERAL: u32 = 9;

/// Template words used in problem descriptions, besides DSL surface forms.
pub const DESCRIPTION_WORDS: [&str; 30] = [
    "given",
    "inputs",
    ",",
    "compute",
    "otherwise",
    "starting",
    "from",
    "repeat",
    "times",
    "add",
    "result",
    "value",
    "sum",
    "product",
    "difference",
    "of",
    "and",
    "the",
    "is",
    "than",
    "less",
    "greater",
    "equal",
    "to",
    "then",
    "output",
    "each",
    "step",
    "number",
    "total",
];

fn outcome_surface(o: Outcome) -> &'static str {
    match o {
        Outcome::CompileError => "U_COMPILE",
        Outcome::RuntimeError => "U_RUNTIME",
        Outcome::FailedTest => "U_FAIL",
        Outcome::PassedTest => "U_PASS",
    }
}

fn subtype_surface(s: ErrorSubtype) -> &'static str {
    match s {
        ErrorSubtype::Syntax => "C_SYNTAX",
        ErrorSubtype::UndefinedVar => "C_UNDEF",
        ErrorSubtype::DivByZero => "C_DIVZERO",
        ErrorSubtype::NoReturn => "C_NORETURN",
        ErrorSubtype::StepLimit => "C_STEPLIMIT",
        ErrorSubtype::WrongAnswer => "C_WRONG",
        ErrorSubtype::None => "C_NONE",
    }
}

/// The shared token/id bijection. Built from a fixed static list, so ids
/// never depend on data.
#[derive(Debug)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, TokenId>,
    dsl: Vec<Option<DslToken>>,
}

impl Vocabulary {
    pub fn standard() -> &'static Vocabulary {
        static VOCAB: OnceLock<Vocabulary> = OnceLock::new();
        VOCAB.get_or_init(Vocabulary::build)
    }

    fn build() -> Self {
        let mut surfaces: Vec<String> = [PAD, BOS, EOS, SEP].iter().map(|s| s.to_string()).collect();
        let mut dsl_forms: Vec<DslToken> = Vec::new();
        dsl_forms.extend(Variable::ALL.map(DslToken::Var));
        dsl_forms.extend((0..=MAX_VOCAB_LITERAL).map(DslToken::Int));
        dsl_forms.extend(Operator::ALL.map(DslToken::Op));
        dsl_forms.extend(Punct::ALL.map(DslToken::Punct));
        dsl_forms.extend(Keyword::ALL.map(DslToken::Keyword));
        surfaces.extend(dsl_forms.iter().map(|t| t.to_string()));
        surfaces.extend(DESCRIPTION_WORDS.iter().map(|s| s.to_string()));
        surfaces.extend(Outcome::ALL.map(|o| outcome_surface(o).to_string()));
        surfaces.extend(ErrorSubtype::ALL.map(|s| subtype_surface(s).to_string()));

        let mut ids = HashMap::new();
        for (i, s) in surfaces.iter().enumerate() {
            let prev = ids.insert(s.clone(), i);
            assert!(prev.is_none(), "duplicate vocabulary entry {s}");
        }
        let dsl = surfaces.iter().map(|s| DslToken::from_word(s)).collect();
        Self {
            tokens: surfaces,
            ids,
            dsl,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, surface: &str) -> Option<TokenId> {
        self.ids.get(surface).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn pad(&self) -> TokenId {
        0
    }

    pub fn bos(&self) -> TokenId {
        1
    }

    pub fn eos(&self) -> TokenId {
        2
    }

    pub fn sep(&self) -> TokenId {
        3
    }

    pub fn dsl_id(&self, token: DslToken) -> Option<TokenId> {
        self.id(&token.to_string())
    }

    /// The DSL token behind `id`, if it is one.
    pub fn dsl_token(&self, id: TokenId) -> Option<DslToken> {
        self.dsl.get(id).copied().flatten()
    }

    pub fn outcome_id(&self, outcome: Outcome) -> TokenId {
        self.ids[outcome_surface(outcome)]
    }

    pub fn subtype_id(&self, subtype: ErrorSubtype) -> TokenId {
        self.ids[subtype_surface(subtype)]
    }

    /// Program tokens for an id sequence; ids that are not DSL tokens
    /// (specials, words, tags) are dropped.
    pub fn program_tokens(&self, ids: &[TokenId]) -> Vec<DslToken> {
        ids.iter().filter_map(|&id| self.dsl_token(id)).collect()
    }
}
