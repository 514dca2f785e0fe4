//! Tokenizer and recursive-descent parser for filter expressions.
//!
//! Grammar (loosest to tightest):
//!
//! ```text
//! expr    := and ("or" and)*
//! and     := unary ("and" unary)*
//! unary   := "not" unary | atom
//! atom    := "(" expr ")"
//!          | "match_address" "(" "address" "," STRING ")"
//!          | operand CMP operand
//! operand := INT | STRING | "time" "." ATTR
//! ```
//!
//! As in Python, `not a < b` reads as `not (a < b)`. Chained comparisons
//! are rejected, and both sides of a comparison must have the same kind.

use thiserror::Error;

use super::ast::{CmpOp, FilterExpr, Operand, TimeAttr};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at byte {offset}: {message}")]
pub struct SyntaxError {
    pub offset: usize,
    pub message: String,
}

fn err<T>(offset: usize, message: impl Into<String>) -> Result<T, SyntaxError> {
    Err(SyntaxError {
        offset,
        message: message.into(),
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Int(i64),
    Str(String),
    Ident(String),
    Dot,
    Comma,
    LParen,
    RParen,
    Cmp(CmpOp),
    And,
    Or,
    Not,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Int(v) => format!("integer {v}"),
            Tok::Str(_) => "string literal".into(),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Dot => "`.`".into(),
            Tok::Comma => "`,`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Cmp(op) => format!("`{}`", op.symbol()),
            Tok::And => "`and`".into(),
            Tok::Or => "`or`".into(),
            Tok::Not => "`not`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, SyntaxError> {
    let mut toks = Vec::new();
    let mut chars = src.char_indices().peekable();
    while let Some(&(pos, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let next_is = |chars: &mut std::iter::Peekable<std::str::CharIndices<'_>>, want: char| {
            let mut look = chars.clone();
            look.next();
            matches!(look.peek(), Some(&(_, n)) if n == want)
        };
        let tok = match c {
            '.' => {
                chars.next();
                Tok::Dot
            }
            ',' => {
                chars.next();
                Tok::Comma
            }
            '(' => {
                chars.next();
                Tok::LParen
            }
            ')' => {
                chars.next();
                Tok::RParen
            }
            '=' | '!' | '<' | '>' => {
                let eq_follows = next_is(&mut chars, '=');
                chars.next();
                if eq_follows {
                    chars.next();
                }
                match (c, eq_follows) {
                    ('=', true) => Tok::Cmp(CmpOp::Eq),
                    ('!', true) => Tok::Cmp(CmpOp::Ne),
                    ('<', true) => Tok::Cmp(CmpOp::Le),
                    ('>', true) => Tok::Cmp(CmpOp::Ge),
                    ('<', false) => Tok::Cmp(CmpOp::Lt),
                    ('>', false) => Tok::Cmp(CmpOp::Gt),
                    ('=', false) => return err(pos, "single `=` is not a comparison; use `==`"),
                    _ => return err(pos, "`!` must be followed by `=`; use `not` for negation"),
                }
            }
            '"' | '\'' => Tok::Str(lex_string(&mut chars, pos, c)?),
            '-' | '0'..='9' => {
                chars.next();
                let mut digits = String::from(c);
                while let Some(&(_, d)) = chars.peek() {
                    if d.is_ascii_digit() {
                        digits.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                if digits == "-" {
                    return err(pos, "`-` must start an integer literal");
                }
                if let Some(&(p, d)) = chars.peek() {
                    if d.is_alphanumeric() || d == '_' {
                        return err(p, "invalid character in integer literal");
                    }
                }
                match digits.parse::<i64>() {
                    Ok(v) => Tok::Int(v),
                    Err(_) => return err(pos, "integer literal out of range"),
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut ident = String::new();
                while let Some(&(_, d)) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        ident.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                match ident.as_str() {
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "not" => Tok::Not,
                    _ => Tok::Ident(ident),
                }
            }
            other => return err(pos, format!("unexpected character {other:?}")),
        };
        toks.push((tok, pos));
    }
    toks.push((Tok::Eof, src.len()));
    Ok(toks)
}

fn lex_string(
    chars: &mut std::iter::Peekable<std::str::CharIndices<'_>>,
    start: usize,
    quote: char,
) -> Result<String, SyntaxError> {
    chars.next();
    let mut out = String::new();
    loop {
        let Some((_, c)) = chars.next() else {
            return err(start, "unterminated string literal");
        };
        match c {
            c if c == quote => return Ok(out),
            '\\' => {
                let Some((epos, e)) = chars.next() else {
                    return err(start, "unterminated string literal");
                };
                match e {
                    '\\' | '"' | '\'' | '/' => out.push(e),
                    'n' => out.push('\n'),
                    't' => out.push('\t'),
                    'r' => out.push('\r'),
                    'u' => {
                        let mut code = 0u32;
                        for _ in 0..4 {
                            let Some((_, h)) = chars.next() else {
                                return err(epos, "truncated \\u escape");
                            };
                            let Some(d) = h.to_digit(16) else {
                                return err(epos, "invalid \\u escape");
                            };
                            code = code * 16 + d;
                        }
                        let Some(ch) = char::from_u32(code) else {
                            return err(epos, "invalid \\u code point");
                        };
                        out.push(ch);
                    }
                    _ => return err(epos, format!("unknown escape `\\{e}`")),
                }
            }
            _ => out.push(c),
        }
    }
}

/// Nesting bound for parentheses and `not` chains.
const MAX_DEPTH: usize = 128;

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<usize, SyntaxError> {
        if *self.peek() == want {
            Ok(self.bump().1)
        } else {
            err(
                self.offset(),
                format!("expected {what}, found {}", self.peek().describe()),
            )
        }
    }

    fn parse_or(&mut self) -> Result<FilterExpr, SyntaxError> {
        let mut lhs = self.parse_and()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let rhs = self.parse_and()?;
            lhs = FilterExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_and(&mut self) -> Result<FilterExpr, SyntaxError> {
        let mut lhs = self.parse_unary()?;
        while *self.peek() == Tok::And {
            self.bump();
            let rhs = self.parse_unary()?;
            lhs = FilterExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn descend(&mut self) -> Result<(), SyntaxError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return err(self.offset(), "expression nested too deeply");
        }
        Ok(())
    }

    fn parse_unary(&mut self) -> Result<FilterExpr, SyntaxError> {
        if *self.peek() == Tok::Not {
            self.bump();
            self.descend()?;
            let inner = self.parse_unary()?;
            self.depth -= 1;
            return Ok(FilterExpr::Not(Box::new(inner)));
        }
        self.parse_atom()
    }

    fn parse_atom(&mut self) -> Result<FilterExpr, SyntaxError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                self.descend()?;
                let inner = self.parse_or()?;
                self.expect(Tok::RParen, "`)`")?;
                self.depth -= 1;
                Ok(inner)
            }
            Tok::Ident(name) if name == "match_address" => self.parse_match_address(),
            Tok::Eof => err(self.offset(), "unexpected end of input, expected an expression"),
            _ => self.parse_comparison(),
        }
    }

    fn parse_match_address(&mut self) -> Result<FilterExpr, SyntaxError> {
        self.bump();
        self.expect(Tok::LParen, "`(` after match_address")?;
        let at = self.offset();
        match self.bump().0 {
            Tok::Ident(ref a) if a == "address" => {}
            other => {
                return err(
                    at,
                    format!(
                        "match_address expects `address` as its first argument, found {}",
                        other.describe()
                    ),
                )
            }
        }
        self.expect(Tok::Comma, "`,`")?;
        let at = self.offset();
        let query = match self.bump().0 {
            Tok::Str(s) => s,
            other => {
                return err(
                    at,
                    format!(
                        "match_address expects a string literal query, found {}",
                        other.describe()
                    ),
                )
            }
        };
        if query.trim().is_empty() {
            return err(at, "match_address query must be non-empty");
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(FilterExpr::MatchAddress(query))
    }

    fn parse_operand(&mut self) -> Result<Operand, SyntaxError> {
        let at = self.offset();
        match self.bump().0 {
            Tok::Int(v) => Ok(Operand::Int(v)),
            Tok::Str(s) => Ok(Operand::Str(s)),
            Tok::Ident(name) if name == "time" => {
                self.expect(Tok::Dot, "`.` after `time`")?;
                let attr_at = self.offset();
                match self.bump().0 {
                    Tok::Ident(attr) => TimeAttr::from_name(&attr).map(Operand::Time).ok_or_else(|| {
                        SyntaxError {
                            offset: attr_at,
                            message: format!(
                                "unknown identifier `time.{attr}`; available: year, month, day, hour, minute, weekday, date, iso"
                            ),
                        }
                    }),
                    other => err(attr_at, format!("expected a time attribute, found {}", other.describe())),
                }
            }
            Tok::Ident(name) if name == "address" => {
                err(at, "`address` can only be used as match_address(address, \"...\")")
            }
            Tok::Ident(name) => err(at, format!("unknown identifier `{name}`")),
            other => err(at, format!("expected an operand, found {}", other.describe())),
        }
    }

    fn parse_comparison(&mut self) -> Result<FilterExpr, SyntaxError> {
        let lhs = self.parse_operand()?;
        let op_at = self.offset();
        let op = match self.peek() {
            Tok::Cmp(op) => *op,
            other => {
                return err(
                    op_at,
                    format!(
                        "expected a comparison operator after operand, found {}",
                        other.describe()
                    ),
                )
            }
        };
        self.bump();
        let rhs = self.parse_operand()?;
        if let Tok::Cmp(_) = self.peek() {
            return err(
                self.offset(),
                "chained comparisons are not supported; combine with `and`",
            );
        }
        if lhs.kind() != rhs.kind() {
            return err(
                op_at,
                format!("cannot compare {lhs} ({:?}) with {rhs} ({:?})", lhs.kind(), rhs.kind()),
            );
        }
        Ok(FilterExpr::Compare { op, lhs, rhs })
    }
}

/// Parse a filter expression into its syntax tree.
pub fn parse(text: &str) -> Result<FilterExpr, SyntaxError> {
    let toks = tokenize(text)?;
    let mut p = Parser { toks, pos: 0, depth: 0 };
    let expr = p.parse_or()?;
    if *p.peek() != Tok::Eof {
        return err(
            p.offset(),
            format!("unexpected {} after complete expression", p.peek().describe()),
        );
    }
    Ok(expr)
}
