use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            Self::Eq => "==",
            Self::Ne => "!=",
            Self::Lt => "<",
            Self::Le => "<=",
            Self::Gt => ">",
            Self::Ge => ">=",
        }
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            Self::Eq => ord == Equal,
            Self::Ne => ord != Equal,
            Self::Lt => ord == Less,
            Self::Le => ord != Greater,
            Self::Gt => ord == Greater,
            Self::Ge => ord != Less,
        }
    }
}

/// Attributes of a photo's timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TimeAttr {
    Year,
    Month,
    Day,
    Hour,
    Minute,
    /// 0 = Monday .. 6 = Sunday
    Weekday,
    /// `YYYY-MM-DD`
    Date,
    /// Full ISO-8601 rendering
    Iso,
}

impl TimeAttr {
    pub const ALL: [TimeAttr; 8] = [
        Self::Year,
        Self::Month,
        Self::Day,
        Self::Hour,
        Self::Minute,
        Self::Weekday,
        Self::Date,
        Self::Iso,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Year => "year",
            Self::Month => "month",
            Self::Day => "day",
            Self::Hour => "hour",
            Self::Minute => "minute",
            Self::Weekday => "weekday",
            Self::Date => "date",
            Self::Iso => "iso",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    pub fn kind(self) -> ValueKind {
        match self {
            Self::Date | Self::Iso => ValueKind::Str,
            _ => ValueKind::Int,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ValueKind {
    Int,
    Str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Operand {
    Int(i64),
    Str(String),
    Time(TimeAttr),
}

impl Operand {
    pub fn kind(&self) -> ValueKind {
        match self {
            Self::Int(_) => ValueKind::Int,
            Self::Str(_) => ValueKind::Str,
            Self::Time(a) => a.kind(),
        }
    }
}

/// Parsed filter expression.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum FilterExpr {
    Or(Box<FilterExpr>, Box<FilterExpr>),
    And(Box<FilterExpr>, Box<FilterExpr>),
    Not(Box<FilterExpr>),
    Compare {
        op: CmpOp,
        lhs: Operand,
        rhs: Operand,
    },
    /// `match_address(address, "<query>")`
    MatchAddress(String),
}

impl FilterExpr {
    /// Every `match_address` query string, in source order.
    pub fn address_queries(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_queries(&mut out);
        out
    }

    fn collect_queries<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Self::Or(a, b) | Self::And(a, b) => {
                a.collect_queries(out);
                b.collect_queries(out);
            }
            Self::Not(e) => e.collect_queries(out),
            Self::MatchAddress(q) => out.push(q),
            Self::Compare { .. } => {}
        }
    }
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Int(v) => write!(f, "{v}"),
            Self::Str(s) => f.write_str(&quote(s)),
            Self::Time(a) => write!(f, "time.{}", a.name()),
        }
    }
}

/// Fully parenthesized rendering that parses back to the same tree.
impl fmt::Display for FilterExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Or(a, b) => write!(f, "({a} or {b})"),
            Self::And(a, b) => write!(f, "({a} and {b})"),
            Self::Not(e) => write!(f, "not {e}"),
            Self::Compare { op, lhs, rhs } => write!(f, "({lhs} {} {rhs})", op.symbol()),
            Self::MatchAddress(q) => write!(f, "match_address(address, {})", quote(q)),
        }
    }
}
