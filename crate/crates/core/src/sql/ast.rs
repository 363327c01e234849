use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::text::format_number;

#[derive(Debug, Clone, PartialEq)]
pub struct SqlQuery {
    pub distinct: bool,
    pub projections: Vec<ProjItem>,
    /// Name written after `FROM`; carried for printing only.
    pub source: String,
    pub predicate: Option<Pred>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjItem {
    pub kind: ProjKind,
    pub alias: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProjKind {
    Star,
    Column(String),
    Aggregate(Aggregate, AggregateArg),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregate {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl Aggregate {
    pub fn name(self) -> &'static str {
        match self {
            Aggregate::Count => "COUNT",
            Aggregate::Sum => "SUM",
            Aggregate::Avg => "AVG",
            Aggregate::Min => "MIN",
            Aggregate::Max => "MAX",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [Aggregate::Count, Aggregate::Sum, Aggregate::Avg, Aggregate::Min, Aggregate::Max]
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AggregateArg {
    Star,
    Column(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::NotEq => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Str(String),
    Number(f64),
}

impl Literal {
    /// Text form used for string comparison.
    pub fn text(&self) -> String {
        match self {
            Literal::Str(s) => s.clone(),
            Literal::Number(n) => format_number(*n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Pred {
    Cmp(String, CmpOp, Literal),
    Like(String, String),
    In(String, Vec<Literal>),
    And(Box<Pred>, Box<Pred>),
    Or(Box<Pred>, Box<Pred>),
    Not(Box<Pred>),
}

impl Pred {
    pub fn columns<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Pred::Cmp(c, _, _) | Pred::Like(c, _) | Pred::In(c, _) => out.push(c),
            Pred::And(a, b) | Pred::Or(a, b) => {
                a.columns(out);
                b.columns(out);
            }
            Pred::Not(p) => p.columns(out),
        }
    }
}

impl SqlQuery {
    /// Every column name the query mentions, in source order.
    pub fn columns(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for p in &self.projections {
            match &p.kind {
                ProjKind::Column(c) | ProjKind::Aggregate(_, AggregateArg::Column(c)) => out.push(c.as_str()),
                _ => {}
            }
        }
        if let Some(p) = &self.predicate {
            p.columns(&mut out);
        }
        out
    }
}

struct Ident<'a>(&'a str);

impl fmt::Display for Ident<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}`", self.0.replace('`', "``"))
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Str(s) => write!(f, "'{}'", s.replace('\'', "''")),
            Literal::Number(n) => f.write_str(&format_number(*n)),
        }
    }
}

impl fmt::Display for ProjItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ProjKind::Star => f.write_str("*")?,
            ProjKind::Column(c) => write!(f, "{}", Ident(c))?,
            ProjKind::Aggregate(agg, AggregateArg::Star) => write!(f, "{}(*)", agg.name())?,
            ProjKind::Aggregate(agg, AggregateArg::Column(c)) => write!(f, "{}({})", agg.name(), Ident(c))?,
        }
        if let Some(alias) = &self.alias {
            write!(f, " AS {}", Ident(alias))?;
        }
        Ok(())
    }
}

impl fmt::Display for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pred::Cmp(c, op, lit) => write!(f, "{} {} {}", Ident(c), op.symbol(), lit),
            Pred::Like(c, pat) => write!(f, "{} LIKE {}", Ident(c), Literal::Str(pat.clone())),
            Pred::In(c, lits) => {
                write!(f, "{} IN (", Ident(c))?;
                for (i, l) in lits.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{l}")?;
                }
                f.write_str(")")
            }
            Pred::And(a, b) => write!(f, "({a} AND {b})"),
            Pred::Or(a, b) => write!(f, "({a} OR {b})"),
            Pred::Not(p) => write!(f, "NOT ({p})"),
        }
    }
}

impl fmt::Display for SqlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        if self.distinct {
            f.write_str("DISTINCT ")?;
        }
        for (i, p) in self.projections.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, " FROM {}", Ident(&self.source))?;
        if let Some(pred) = &self.predicate {
            write!(f, " WHERE {pred}")?;
        }
        Ok(())
    }
}
