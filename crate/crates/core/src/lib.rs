pub mod corpus;
pub mod diffkit;
pub mod eval;
pub mod inference;
pub mod minilang;
pub mod models;
pub mod seeding;
pub mod training;
