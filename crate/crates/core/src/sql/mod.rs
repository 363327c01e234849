//! The SQL subset models write in their responses: a single `SELECT` with
//! optional `DISTINCT`, column or aggregate projections, and a `WHERE`
//! predicate, evaluated over the one table that belongs to the instance.
//!
//! The `FROM` name is parsed but ignored. Clauses beyond that (`GROUP BY`,
//! `ORDER BY`, `LIMIT`, joins) are rejected rather than half-supported.

mod ast;
mod exec;
mod lexer;
mod parser;

use alloc::string::String;

use thiserror::Error;

pub use ast::{Aggregate, AggregateArg, CmpOp, Literal, Pred, ProjItem, ProjKind, SqlQuery};
pub use exec::{execute, format_result, like_match, ResultTable};
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse_select;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SqlError {
    #[error("unterminated string literal starting at byte {0}")]
    UnterminatedString(usize),
    #[error("unterminated quoted identifier starting at byte {0}")]
    UnterminatedBacktick(usize),
    #[error("unexpected character {ch:?} at byte {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("aggregates cannot be mixed with plain columns")]
    AggregateMixedWithColumns,
}

impl SqlError {
    /// True for errors raised before execution (lexing or parsing).
    pub fn is_parse_error(&self) -> bool {
        !matches!(self, SqlError::UnknownColumn(_) | SqlError::AggregateMixedWithColumns)
    }
}

/// Tokenizes and parses one statement.
pub fn parse_query(text: &str) -> Result<SqlQuery, SqlError> {
    parse_select(&tokenize(text)?)
}
