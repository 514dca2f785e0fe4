//! Boolean metadata filters over photo time and address.
//!
//! Expressions are parsed by a closed grammar (no code execution) and
//! evaluated per photo. Address matching goes through an alias table and,
//! when nothing in the corpus matches, an optional geocoder.

mod alias;
mod ast;
mod eval;
mod parser;

pub use alias::{AliasError, AliasTable};
pub use ast::{CmpOp, FilterExpr, Operand, TimeAttr, ValueKind};
pub use eval::{filter_scope, match_address, FilterContext};
pub use parser::{parse, SyntaxError};
