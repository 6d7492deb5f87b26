//! MiniLang: a small deterministic imperative language.
//!
//! Programs are sets of functions over 64-bit wrapping integers, booleans and
//! one-dimensional int arrays, plus optional globals and an `entry` function
//! for whole-system runs. The grammar is documented in `docs/minilang.md`.

mod ast;
mod lexer;
mod parser;
pub mod pretty;
mod validate;

use thiserror::Error;

pub use ast::*;
pub use parser::parse_unchecked;
pub use pretty::pretty;
pub use validate::{validate, TypeInfo, BUILTINS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: u32, col: u32, msg: String },
    #[error("type error at {line}:{col}: {msg}")]
    Type { line: u32, col: u32, msg: String },
}

/// Parses and validates MiniLang source.
pub fn parse(text: &str) -> Result<SourceUnit, FrontendError> {
    let unit = parse_unchecked(text)?;
    validate(&unit)?;
    Ok(unit)
}
