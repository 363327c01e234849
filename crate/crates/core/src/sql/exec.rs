use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::ast::{Aggregate, AggregateArg, CmpOp, Literal, Pred, ProjKind, SqlQuery};
use super::SqlError;
use crate::table::{cell_as_number, Cell, Table};
use crate::text::format_number;

/// Rectangular query output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

enum Column {
    Plain { index: usize, header: String },
    Agg { agg: Aggregate, index: Option<usize>, header: String },
}

fn resolve(table: &Table, name: &str) -> Result<usize, SqlError> {
    table
        .column_index(name)
        .ok_or_else(|| SqlError::UnknownColumn(name.to_string()))
}

/// Three-way comparison of a cell against a literal: numeric when both
/// sides read as numbers, case-insensitive text otherwise.
fn compare(cell: &Cell, lit: &Literal) -> Ordering {
    let lit_num = match lit {
        Literal::Number(n) => Some(*n),
        Literal::Str(s) => cell_as_number(s),
    };
    if let (Some(a), Some(b)) = (cell.as_number(), lit_num) {
        return a.partial_cmp(&b).unwrap_or(Ordering::Equal);
    }
    let a = cell.raw().trim().to_lowercase();
    let b = lit.text().trim().to_lowercase();
    a.cmp(&b)
}

fn matches(pred: &Pred, table: &Table, row: &[Cell]) -> bool {
    // Columns are validated before the scan.
    let cell = |name: &str| &row[table.column_index(name).unwrap_or(0)];
    match pred {
        Pred::Cmp(col, op, lit) => {
            let ord = compare(cell(col), lit);
            match op {
                CmpOp::Eq => ord == Ordering::Equal,
                CmpOp::NotEq => ord != Ordering::Equal,
                CmpOp::Lt => ord == Ordering::Less,
                CmpOp::Le => ord != Ordering::Greater,
                CmpOp::Gt => ord == Ordering::Greater,
                CmpOp::Ge => ord != Ordering::Less,
            }
        }
        Pred::Like(col, pattern) => like_match(cell(col).raw(), pattern),
        Pred::In(col, lits) => lits.iter().any(|l| compare(cell(col), l) == Ordering::Equal),
        Pred::And(a, b) => matches(a, table, row) && matches(b, table, row),
        Pred::Or(a, b) => matches(a, table, row) || matches(b, table, row),
        Pred::Not(p) => !matches(p, table, row),
    }
}

/// Case-insensitive SQL `LIKE`: `%` matches any run, `_` one character, and
/// the pattern must cover the whole value.
pub fn like_match(value: &str, pattern: &str) -> bool {
    let v: Vec<char> = value.to_lowercase().chars().collect();
    let p: Vec<char> = pattern.to_lowercase().chars().collect();
    // Greedy two-pointer match with backtracking to the last `%`.
    let (mut vi, mut pi) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while vi < v.len() {
        if pi < p.len() && (p[pi] == '_' || (p[pi] != '%' && p[pi] == v[vi])) {
            vi += 1;
            pi += 1;
        } else if pi < p.len() && p[pi] == '%' {
            star = Some((pi, vi));
            pi += 1;
        } else if let Some((sp, sv)) = star {
            pi = sp + 1;
            vi = sv + 1;
            star = Some((sp, sv + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '%')
}

fn aggregate(agg: Aggregate, index: Option<usize>, rows: &[&Vec<Cell>]) -> Cell {
    if agg == Aggregate::Count {
        return Cell::new(&rows.len().to_string());
    }
    let Some(index) = index else {
        return Cell::default();
    };
    let values: Vec<f64> = rows.iter().filter_map(|r| r[index].as_number()).collect();
    if values.is_empty() {
        return Cell::default();
    }
    let value = match agg {
        Aggregate::Sum => values.iter().sum(),
        Aggregate::Avg => values.iter().sum::<f64>() / values.len() as f64,
        Aggregate::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
        Aggregate::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Aggregate::Count => unreachable!(),
    };
    Cell::new(&format_number(value))
}

/// Runs `query` against `table`. Non-aggregate queries keep the table's row
/// order; aggregate queries return exactly one row.
pub fn execute(query: &SqlQuery, table: &Table) -> Result<ResultTable, SqlError> {
    for name in query.columns() {
        resolve(table, name)?;
    }
    let has_agg = query
        .projections
        .iter()
        .any(|p| matches!(p.kind, ProjKind::Aggregate(..)));
    let has_plain = query
        .projections
        .iter()
        .any(|p| matches!(p.kind, ProjKind::Column(_) | ProjKind::Star));
    if has_agg && has_plain {
        return Err(SqlError::AggregateMixedWithColumns);
    }

    let mut columns = Vec::new();
    for item in &query.projections {
        match &item.kind {
            ProjKind::Star => {
                for (index, h) in table.headers().iter().enumerate() {
                    columns.push(Column::Plain { index, header: h.clone() });
                }
            }
            ProjKind::Column(name) => {
                let index = resolve(table, name)?;
                let header = item.alias.clone().unwrap_or_else(|| table.headers()[index].clone());
                columns.push(Column::Plain { index, header });
            }
            ProjKind::Aggregate(agg, arg) => {
                let (index, default_header) = match arg {
                    AggregateArg::Star => (None, alloc::format!("{}(*)", agg.name())),
                    AggregateArg::Column(name) => {
                        let i = resolve(table, name)?;
                        (Some(i), alloc::format!("{}({})", agg.name(), table.headers()[i]))
                    }
                };
                let header = item.alias.clone().unwrap_or(default_header);
                columns.push(Column::Agg { agg: *agg, index, header });
            }
        }
    }

    let selected: Vec<&Vec<Cell>> = table
        .rows()
        .iter()
        .filter(|row| query.predicate.as_ref().is_none_or(|p| matches(p, table, row)))
        .collect();

    let headers = columns
        .iter()
        .map(|c| match c {
            Column::Plain { header, .. } | Column::Agg { header, .. } => header.clone(),
        })
        .collect();

    let mut rows: Vec<Vec<Cell>> = if has_agg {
        let row = columns
            .iter()
            .map(|c| match c {
                Column::Agg { agg, index, .. } => aggregate(*agg, *index, &selected),
                Column::Plain { .. } => unreachable!(),
            })
            .collect();
        alloc::vec![row]
    } else {
        selected
            .iter()
            .map(|row| {
                columns
                    .iter()
                    .map(|c| match c {
                        Column::Plain { index, .. } => row[*index].clone(),
                        Column::Agg { .. } => unreachable!(),
                    })
                    .collect()
            })
            .collect()
    };
    if query.distinct {
        let mut seen: Vec<Vec<Cell>> = Vec::new();
        rows.retain(|r| {
            if seen.contains(r) {
                false
            } else {
                seen.push(r.clone());
                true
            }
        });
    }
    Ok(ResultTable { headers, rows })
}

/// Renders a result the way responses show executed results: header first,
/// one pipe line per row, each line newline-terminated. Empty results show
/// `(no rows)` under the header.
pub fn format_result(result: &ResultTable) -> String {
    let mut out = String::new();
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        out.push('|');
        for c in cells {
            out.push(' ');
            out.push_str(c);
            out.push_str(" |");
        }
        out.push('\n');
    };
    line(&mut result.headers.iter().map(String::as_str));
    for row in &result.rows {
        line(&mut row.iter().map(Cell::raw));
    }
    if result.rows.is_empty() {
        out.push_str("(no rows)\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::parse_query;
    use super::*;
    use crate::table::parse_pipe_table;

    const GOODWILL: &str = "| Rank | Name              | Nationality    | Time    |
| 1    | Brahim Boulami    | Morocco        | 8:17.73 |
| 2    | Reuben Kosgei     | Kenya          | 8:18.63 |
| 3    | Stephen Cherono   | Kenya          | 8:19.98 |
| 4    | Bouabdellah Tahri | France         | 8:20.25 |
| 5    | Tim Broe          | United States  | 8:20.75 |
| 6    | Luis Miguel Martín| Spain          | 8:24.03 |
| 7    | Raymond Yator     | Kenya          | 8:27.19 |
| 8    | Thomas Chorny     | United States  | 9:24.26 |";

    fn run(sql: &str, table: &Table) -> Result<ResultTable, SqlError> {
        execute(&parse_query(sql).unwrap(), table)
    }

    fn texts(r: &ResultTable) -> Vec<Vec<&str>> {
        r.rows.iter().map(|row| row.iter().map(Cell::raw).collect()).collect()
    }

    #[test]
    fn top_three_by_rank() {
        let t = parse_pipe_table(GOODWILL).unwrap();
        let r = run("SELECT Name, Nationality FROM Table WHERE Rank <= 3", &t).unwrap();
        // Brute-force scan of the eight rows: ranks 1, 2 and 3 qualify.
        assert_eq!(
            texts(&r),
            vec![
                vec!["Brahim Boulami", "Morocco"],
                vec!["Reuben Kosgei", "Kenya"],
                vec!["Stephen Cherono", "Kenya"],
            ]
        );
        assert_eq!(r.headers, ["Name", "Nationality"]);
    }

    #[test]
    fn count_with_alias() {
        let t = parse_pipe_table("| Week | Result |\n| 1 | L 7-21 |\n| 2 | W 14-3 |\n| 3 | l 0-10 |").unwrap();
        let r = run("SELECT COUNT(*) as Losses FROM w WHERE Result LIKE 'L%'", &t).unwrap();
        assert_eq!(r.headers, ["Losses"]);
        // rows 1 and 3 start with l/L
        assert_eq!(texts(&r), vec![vec!["2"]]);
        assert_eq!(format_result(&r), "| Losses |\n| 2 |\n");
    }

    #[test]
    fn aggregates_skip_non_numeric_cells() {
        let t = parse_pipe_table("| v |\n| 1,000 |\n| - |\n| 50% |\n| abc |").unwrap();
        let r = run("SELECT SUM(v), AVG(v), MIN(v), MAX(v), COUNT(v) FROM w", &t).unwrap();
        assert_eq!(texts(&r), vec![vec!["1000.5", "500.25", "0.5", "1000", "4"]]);
        let r = run("SELECT SUM(v) FROM w WHERE v = 'abc'", &t).unwrap();
        assert_eq!(texts(&r), vec![vec![""]]);
    }

    #[test]
    fn unknown_and_mixed() {
        let t = parse_pipe_table("| a |\n| 1 |").unwrap();
        assert_eq!(
            run("SELECT column0 FROM w WHERE column0 = 'Georgia Southern'", &t),
            Err(SqlError::UnknownColumn("column0".into()))
        );
        assert_eq!(run("SELECT a, COUNT(*) FROM w", &t), Err(SqlError::AggregateMixedWithColumns));
        let empty = parse_pipe_table("| a |").unwrap();
        assert!(matches!(run("SELECT b FROM w", &empty), Err(SqlError::UnknownColumn(_))));
    }

    #[test]
    fn string_equality_is_case_insensitive() {
        let t = parse_pipe_table("Name | Eliminated\nDamaris Phillips | Winner\nRodney Henry | Second Place").unwrap();
        let r = run("SELECT `name` FROM w WHERE `Eliminated` = 'winner'", &t).unwrap();
        assert_eq!(texts(&r), vec![vec!["Damaris Phillips"]]);
        assert_eq!(r.headers, ["Name"]);
    }

    #[test]
    fn distinct_keeps_first_occurrence() {
        let t = parse_pipe_table("| c |\n| Kenya |\n| Spain |\n| Kenya |").unwrap();
        let r = run("SELECT DISTINCT c FROM w", &t).unwrap();
        assert_eq!(texts(&r), vec![vec!["Kenya"], vec!["Spain"]]);
    }

    #[test]
    fn empty_result_rendering() {
        let t = parse_pipe_table("| a |\n| 1 |").unwrap();
        let r = run("SELECT a FROM w WHERE a > 5", &t).unwrap();
        assert_eq!(format_result(&r), "| a |\n(no rows)\n");
    }

    #[test]
    fn like_semantics() {
        assert!(like_match("Loss", "l%"));
        assert!(like_match("abc", "a_c"));
        assert!(like_match("abc", "%"));
        assert!(!like_match("abc", "b%"));
        assert!(like_match("xaybz", "%a%b_"));
        assert!(!like_match("", "_"));
        assert!(like_match("", "%%"));
    }

    #[test]
    fn duplicate_headers_resolve_to_first() {
        let t = parse_pipe_table("| a | A |\n| 1 | 2 |").unwrap();
        let r = run("SELECT a FROM w", &t).unwrap();
        assert_eq!(texts(&r), vec![vec!["1"]]);
    }

    #[test]
    fn execute_does_not_touch_input() {
        let t = parse_pipe_table(GOODWILL).unwrap();
        let before = t.clone();
        let q = parse_query("SELECT * FROM w WHERE Nationality = 'Kenya'").unwrap();
        let a = execute(&q, &t).unwrap();
        let b = execute(&q, &t).unwrap();
        assert_eq!(a, b);
        assert_eq!(t, before);
        assert_eq!(a.rows.len(), 3);
    }
}
