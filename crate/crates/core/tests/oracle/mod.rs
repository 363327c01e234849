//! Random (table, query) cases for the SQL subset and a naive row-scan
//! evaluator that shares no code with the engine. Queries are generated as
//! SQL text with varied identifier casing and quoting, so parsing is
//! exercised along with execution.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;
use tabreason_core::{Cell, ResultTable, Table};

const HEADERS: [&str; 8] = ["Name", "Score", "Left office", "Team", "Year", "Note", "Total", "Points"];
const CELLS: [&str; 20] = [
    "0", "1", "2", "3", "5", "8", "12", "-3", "2.5", "50%", "alpha", "Alpha", "BETA", "beta", "gamma delta",
    "w 12 - 10", "", "-", "lp field", "Kenya",
];
const STR_LITS: [&str; 10] = ["alpha", "ALPHA", "beta", "gamma delta", "w 12 - 10", "kenya", "5", "2.5", "", "zzz"];
const NUM_LITS: [&str; 7] = ["0", "1", "3", "5", "-3", "2.5", "12"];
const PATTERNS: [&str; 12] = ["a%", "%A", "%ta%", "b_ta", "%", "_", "w 12%", "%- 10", "1%", "%5", "gamma%", "ALPHA"];
const ALIASES: [&str; 3] = ["Losses", "total_count", "v"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lit {
    Str(String),
    Num(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum P {
    Cmp(usize, Op, Lit),
    Like(usize, String),
    In(usize, Vec<Lit>),
    And(Box<P>, Box<P>),
    Or(Box<P>, Box<P>),
    Not(Box<P>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Agg {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Proj {
    Star,
    Cols(Vec<(usize, Option<String>)>),
    /// Column `None` means `*`, only used with COUNT.
    Aggs(Vec<(Agg, Option<usize>, Option<String>)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub distinct: bool,
    pub proj: Proj,
    pub pred: Option<P>,
    /// Per-mention spelling choice: (uppercase, backticks).
    pub spelling: Vec<(bool, bool)>,
    pub sql: String,
}

impl Case {
    pub fn table(&self) -> Table {
        let rows = self.rows.iter().map(|r| r.iter().map(|c| Cell::new(c)).collect()).collect();
        Table::new(self.headers.clone(), rows).expect("generated tables are rectangular")
    }
}

fn op_strategy() -> impl Strategy<Value = Op> {
    prop_oneof![Just(Op::Eq), Just(Op::Ne), Just(Op::Lt), Just(Op::Le), Just(Op::Gt), Just(Op::Ge)]
}

fn lit_strategy() -> impl Strategy<Value = Lit> {
    prop_oneof![
        prop::sample::select(&STR_LITS[..]).prop_map(|s| Lit::Str(s.to_string())),
        prop::sample::select(&NUM_LITS[..]).prop_map(|s| Lit::Num(s.to_string())),
    ]
}

fn pred_strategy(ncols: usize) -> impl Strategy<Value = P> {
    let leaf = prop_oneof![
        (0..ncols, op_strategy(), lit_strategy()).prop_map(|(c, o, l)| P::Cmp(c, o, l)),
        (0..ncols, prop::sample::select(&PATTERNS[..])).prop_map(|(c, p)| P::Like(c, p.to_string())),
        (0..ncols, prop::collection::vec(lit_strategy(), 1..4)).prop_map(|(c, l)| P::In(c, l)),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| P::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| P::Or(Box::new(a), Box::new(b))),
            inner.prop_map(|p| P::Not(Box::new(p))),
        ]
    })
}

fn alias_strategy() -> impl Strategy<Value = Option<String>> {
    prop::option::weighted(0.25, prop::sample::select(&ALIASES[..]).prop_map(String::from))
}

fn agg_strategy() -> impl Strategy<Value = Agg> {
    prop_oneof![Just(Agg::Count), Just(Agg::Sum), Just(Agg::Avg), Just(Agg::Min), Just(Agg::Max)]
}

fn proj_strategy(ncols: usize) -> impl Strategy<Value = Proj> {
    prop_oneof![
        1 => Just(Proj::Star),
        4 => prop::collection::vec((0..ncols, alias_strategy()), 1..4).prop_map(Proj::Cols),
        3 => prop::collection::vec((agg_strategy(), prop::option::weighted(0.8, 0..ncols), alias_strategy()), 1..3)
            .prop_map(|items| Proj::Aggs(
                items
                    .into_iter()
                    // SUM/AVG/MIN/MAX need a column.
                    .map(|(a, c, al)| (a, if a == Agg::Count { c } else { Some(c.unwrap_or(0)) }, al))
                    .collect()
            )),
    ]
}

/// Tables of 1 to 8 columns and 0 to 20 rows, with a query over them.
pub fn case_strategy() -> impl Strategy<Value = Case> {
    (1usize..=8, 0usize..=20)
        .prop_flat_map(|(ncols, nrows)| {
            (
                prop::collection::vec(prop::collection::vec(prop::sample::select(&CELLS[..]), ncols), nrows),
                any::<bool>(),
                proj_strategy(ncols),
                prop::option::weighted(0.8, pred_strategy(ncols)),
                prop::collection::vec(any::<(bool, bool)>(), 32),
                Just(ncols),
            )
        })
        .prop_map(|(rows, distinct, proj, pred, spelling, ncols)| {
            let headers: Vec<String> = HEADERS[..ncols].iter().map(|h| h.to_string()).collect();
            let rows = rows.into_iter().map(|r| r.into_iter().map(String::from).collect()).collect();
            let mut case = Case { headers, rows, distinct, proj, pred, spelling, sql: String::new() };
            case.sql = render(&case);
            case
        })
}

/// `n` cases drawn from a fixed seed.
pub fn deterministic_cases(n: usize) -> Vec<Case> {
    let mut runner = TestRunner::deterministic();
    let strategy = case_strategy();
    (0..n).map(|_| strategy.new_tree(&mut runner).expect("strategy never rejects").current()).collect()
}

fn render(case: &Case) -> String {
    let mut mention = 0usize;
    let mut col = |i: usize| {
        let (upper, ticks) = case.spelling[mention % case.spelling.len()];
        mention += 1;
        let name = &case.headers[i];
        let name = if upper { name.to_uppercase() } else { name.clone() };
        if ticks || name.contains(' ') {
            format!("`{name}`")
        } else {
            name
        }
    };
    let mut sql = String::from("SELECT ");
    if case.distinct {
        sql.push_str("DISTINCT ");
    }
    let alias = |a: &Option<String>| a.as_ref().map(|a| format!(" AS {a}")).unwrap_or_default();
    let items: Vec<String> = match &case.proj {
        Proj::Star => vec!["*".into()],
        Proj::Cols(cols) => cols.iter().map(|(c, a)| format!("{}{}", col(*c), alias(a))).collect(),
        Proj::Aggs(aggs) => aggs
            .iter()
            .map(|(g, c, a)| {
                let arg = c.map_or_else(|| "*".to_string(), &mut col);
                format!("{}({arg}){}", agg_name(*g).to_lowercase(), alias(a))
            })
            .collect(),
    };
    sql.push_str(&items.join(", "));
    sql.push_str(" FROM w");
    if let Some(p) = &case.pred {
        sql.push_str(" WHERE ");
        sql.push_str(&render_pred(p, &mut col));
    }
    sql
}

fn render_lit(l: &Lit) -> String {
    match l {
        Lit::Str(s) => format!("'{s}'"),
        Lit::Num(n) => n.clone(),
    }
}

fn render_pred(p: &P, col: &mut dyn FnMut(usize) -> String) -> String {
    match p {
        P::Cmp(c, op, l) => {
            let sym = match op {
                Op::Eq => "=",
                Op::Ne => "<>",
                Op::Lt => "<",
                Op::Le => "<=",
                Op::Gt => ">",
                Op::Ge => ">=",
            };
            format!("{} {sym} {}", col(*c), render_lit(l))
        }
        P::Like(c, pat) => format!("{} like '{pat}'", col(*c)),
        P::In(c, lits) => {
            let items: Vec<String> = lits.iter().map(render_lit).collect();
            format!("{} IN ({})", col(*c), items.join(", "))
        }
        P::And(a, b) => format!("({} AND {})", render_pred(a, col), render_pred(b, col)),
        P::Or(a, b) => format!("({} or {})", render_pred(a, col), render_pred(b, col)),
        P::Not(a) => format!("NOT ({})", render_pred(a, col)),
    }
}

fn agg_name(a: Agg) -> &'static str {
    match a {
        Agg::Count => "COUNT",
        Agg::Sum => "SUM",
        Agg::Avg => "AVG",
        Agg::Min => "MIN",
        Agg::Max => "MAX",
    }
}

/// Plain decimal, optional sign, commas only between digits, optional `%`.
fn number(text: &str) -> Option<f64> {
    let t = text.trim();
    let (t, scale) = match t.strip_suffix('%') {
        Some(rest) => (rest.trim_end(), 0.01),
        None => (t, 1.0),
    };
    let ok = !t.is_empty()
        && t.chars().enumerate().all(|(i, ch)| ch.is_ascii_digit() || ch == '.' || (i == 0 && (ch == '-' || ch == '+')))
        && t.chars().any(|ch| ch.is_ascii_digit())
        && t.matches('.').count() <= 1;
    if !ok {
        return None;
    }
    t.parse::<f64>().ok().map(|v| v * scale)
}

fn lit_text(l: &Lit) -> &str {
    match l {
        Lit::Str(s) | Lit::Num(s) => s,
    }
}

fn cmp(cell: &str, lit: &Lit) -> std::cmp::Ordering {
    match (number(cell), number(lit_text(lit))) {
        (Some(a), Some(b)) => a.partial_cmp(&b).unwrap(),
        _ => cell.trim().to_lowercase().cmp(&lit_text(lit).trim().to_lowercase()),
    }
}

fn like(value: &[char], pattern: &[char]) -> bool {
    match pattern.split_first() {
        None => value.is_empty(),
        Some(('%', rest)) => (0..=value.len()).any(|k| like(&value[k..], rest)),
        Some((&p, rest)) => match value.split_first() {
            Some((&v, vrest)) => (p == '_' || p == v) && like(vrest, rest),
            None => false,
        },
    }
}

fn eval(p: &P, row: &[String]) -> bool {
    use std::cmp::Ordering::*;
    match p {
        P::Cmp(c, op, l) => {
            let o = cmp(&row[*c], l);
            match op {
                Op::Eq => o == Equal,
                Op::Ne => o != Equal,
                Op::Lt => o == Less,
                Op::Le => o != Greater,
                Op::Gt => o == Greater,
                Op::Ge => o != Less,
            }
        }
        P::Like(c, pat) => {
            let v: Vec<char> = row[*c].to_lowercase().chars().collect();
            let p: Vec<char> = pat.to_lowercase().chars().collect();
            like(&v, &p)
        }
        P::In(c, lits) => lits.iter().any(|l| cmp(&row[*c], l) == Equal),
        P::And(a, b) => eval(a, row) && eval(b, row),
        P::Or(a, b) => eval(a, row) || eval(b, row),
        P::Not(a) => !eval(a, row),
    }
}

/// Expected output cell: exact text, or a number compared with tolerance.
#[derive(Debug, Clone, PartialEq)]
pub enum Expected {
    Text(String),
    Number(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Expected>>,
}

/// Brute-force evaluation of `case`.
pub fn oracle(case: &Case) -> OracleResult {
    let selected: Vec<&Vec<String>> =
        case.rows.iter().filter(|r| case.pred.as_ref().is_none_or(|p| eval(p, r))).collect();
    match &case.proj {
        Proj::Star | Proj::Cols(_) => {
            let cols: Vec<(usize, String)> = match &case.proj {
                Proj::Star => case.headers.iter().cloned().enumerate().collect(),
                Proj::Cols(cols) => {
                    cols.iter().map(|(c, a)| (*c, a.clone().unwrap_or_else(|| case.headers[*c].clone()))).collect()
                }
                Proj::Aggs(_) => unreachable!(),
            };
            let mut rows: Vec<Vec<String>> = Vec::new();
            for r in selected {
                let out: Vec<String> = cols.iter().map(|(c, _)| r[*c].clone()).collect();
                if !case.distinct || !rows.contains(&out) {
                    rows.push(out);
                }
            }
            OracleResult {
                headers: cols.into_iter().map(|(_, h)| h).collect(),
                rows: rows.into_iter().map(|r| r.into_iter().map(Expected::Text).collect()).collect(),
            }
        }
        Proj::Aggs(aggs) => {
            let mut headers = Vec::new();
            let mut row = Vec::new();
            for (g, c, a) in aggs {
                let arg = c.map_or_else(|| "*".to_string(), |c| case.headers[c].clone());
                headers.push(a.clone().unwrap_or_else(|| format!("{}({arg})", agg_name(*g))));
                if *g == Agg::Count {
                    row.push(Expected::Number(selected.len() as f64));
                    continue;
                }
                let c = c.expect("non-count aggregates take a column");
                let nums: Vec<f64> = selected.iter().filter_map(|r| number(&r[c])).collect();
                if nums.is_empty() {
                    row.push(Expected::Text(String::new()));
                    continue;
                }
                let v = match g {
                    Agg::Sum => nums.iter().sum(),
                    Agg::Avg => nums.iter().sum::<f64>() / nums.len() as f64,
                    Agg::Min => nums.iter().cloned().fold(f64::MAX, f64::min),
                    Agg::Max => nums.iter().cloned().fold(f64::MIN, f64::max),
                    Agg::Count => unreachable!(),
                };
                row.push(Expected::Number(v));
            }
            // DISTINCT over a single row changes nothing.
            OracleResult { headers, rows: vec![row] }
        }
    }
}

/// Compares an engine result with the oracle, describing the first
/// difference.
pub fn agrees(actual: &ResultTable, expected: &OracleResult) -> Result<(), String> {
    if actual.headers != expected.headers {
        return Err(format!("headers {:?} != {:?}", actual.headers, expected.headers));
    }
    if actual.rows.len() != expected.rows.len() {
        return Err(format!("{} rows != {} rows", actual.rows.len(), expected.rows.len()));
    }
    for (i, (a, e)) in actual.rows.iter().zip(&expected.rows).enumerate() {
        for (j, (cell, exp)) in a.iter().zip(e).enumerate() {
            let ok = match exp {
                Expected::Text(t) => cell.raw() == t,
                Expected::Number(v) => cell.as_number().is_some_and(|x| (x - v).abs() <= 1e-9 * v.abs().max(1.0)),
            };
            if !ok {
                return Err(format!("row {i} col {j}: {:?} != {exp:?}", cell.raw()));
            }
        }
    }
    Ok(())
}
