use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ast::{Aggregate, AggregateArg, CmpOp, Literal, Pred, ProjItem, ProjKind, SqlQuery};
use super::lexer::{Token, TokenKind};
use super::SqlError;

/// Clause keywords outside the supported subset.
const UNSUPPORTED: &[&str] = &["GROUP", "ORDER", "LIMIT", "HAVING", "JOIN", "INNER", "LEFT", "RIGHT", "OUTER", "UNION", "OFFSET"];

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t TokenKind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, offset: usize) -> Option<&'t TokenKind> {
        self.tokens.get(self.pos + offset).map(|t| &t.kind)
    }

    fn offset(&self) -> usize {
        match self.tokens.get(self.pos) {
            Some(t) => t.span.0,
            None => self.tokens.last().map_or(0, |t| t.span.1),
        }
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, SqlError> {
        Err(SqlError::Syntax {
            pos: self.offset(),
            message: message.into(),
        })
    }

    fn bump(&mut self) -> Option<&'t TokenKind> {
        let t = self.peek();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.peek() == Some(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, kw: &'static str) -> bool {
        self.eat(&TokenKind::Keyword(kw))
    }

    fn expect(&mut self, kind: &TokenKind, what: &str) -> Result<(), SqlError> {
        if self.eat(kind) {
            Ok(())
        } else {
            self.error(alloc::format!("expected {what}"))
        }
    }

    fn check_unsupported(&self) -> Result<(), SqlError> {
        if let Some(TokenKind::Keyword(k)) = self.peek() {
            if UNSUPPORTED.contains(k) {
                return self.error(alloc::format!("unsupported clause {k}"));
            }
        }
        Ok(())
    }

    fn column(&mut self) -> Result<String, SqlError> {
        match self.peek() {
            Some(TokenKind::Ident(name) | TokenKind::Quoted(name)) => {
                self.pos += 1;
                // `w.col` qualifies against the single table
                if self.peek() == Some(&TokenKind::Dot) {
                    if let Some(TokenKind::Ident(inner) | TokenKind::Quoted(inner)) = self.peek_at(1) {
                        self.pos += 2;
                        return Ok(inner.clone());
                    }
                }
                Ok(name.clone())
            }
            _ => self.error("expected column name"),
        }
    }

    fn projection(&mut self) -> Result<ProjItem, SqlError> {
        let kind = match (self.peek(), self.peek_at(1)) {
            (Some(TokenKind::Star), _) => {
                self.pos += 1;
                ProjKind::Star
            }
            (Some(TokenKind::Ident(name)), Some(TokenKind::LParen)) => {
                let Some(agg) = Aggregate::from_name(name) else {
                    return self.error(alloc::format!("unsupported function {name}"));
                };
                self.pos += 2;
                let arg = if self.eat(&TokenKind::Star) {
                    if agg != Aggregate::Count {
                        return self.error(alloc::format!("{}(*) is not allowed", agg.name()));
                    }
                    AggregateArg::Star
                } else {
                    if self.eat_keyword("DISTINCT") {
                        return self.error("DISTINCT inside aggregates is unsupported");
                    }
                    AggregateArg::Column(self.column()?)
                };
                self.expect(&TokenKind::RParen, "`)`")?;
                ProjKind::Aggregate(agg, arg)
            }
            (Some(TokenKind::Ident(_) | TokenKind::Quoted(_)), _) => ProjKind::Column(self.column()?),
            _ => return self.error("expected projection"),
        };
        let alias = if self.eat_keyword("AS") {
            Some(self.column().or_else(|_| self.error("expected alias"))?)
        } else if let Some(TokenKind::Ident(name) | TokenKind::Quoted(name)) = self.peek() {
            self.pos += 1;
            Some(name.clone())
        } else {
            None
        };
        if kind == ProjKind::Star && alias.is_some() {
            return self.error("`*` cannot be aliased");
        }
        Ok(ProjItem { kind, alias })
    }

    fn literal(&mut self) -> Result<Literal, SqlError> {
        let negative = match self.peek() {
            Some(TokenKind::Minus) => {
                self.pos += 1;
                true
            }
            Some(TokenKind::Plus) => {
                self.pos += 1;
                false
            }
            _ => false,
        };
        let lit = match self.peek() {
            Some(TokenKind::Number(n)) => Literal::Number(if negative { -*n } else { *n }),
            Some(TokenKind::Str(s) | TokenKind::Quoted(s)) if !negative => Literal::Str(s.clone()),
            _ => return self.error("expected literal"),
        };
        self.pos += 1;
        Ok(lit)
    }

    fn pred(&mut self) -> Result<Pred, SqlError> {
        let mut left = self.and_pred()?;
        while self.eat_keyword("OR") {
            let right = self.and_pred()?;
            left = Pred::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and_pred(&mut self) -> Result<Pred, SqlError> {
        let mut left = self.not_pred()?;
        while self.eat_keyword("AND") {
            let right = self.not_pred()?;
            left = Pred::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn not_pred(&mut self) -> Result<Pred, SqlError> {
        if self.eat_keyword("NOT") {
            return Ok(Pred::Not(Box::new(self.not_pred()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Pred, SqlError> {
        if self.eat(&TokenKind::LParen) {
            let p = self.pred()?;
            self.expect(&TokenKind::RParen, "`)`")?;
            return Ok(p);
        }
        let column = self.column()?;
        let negated = self.eat_keyword("NOT");
        let pred = if self.eat_keyword("LIKE") {
            match self.bump() {
                Some(TokenKind::Str(p) | TokenKind::Quoted(p)) => Pred::Like(column, p.clone()),
                _ => return self.error("expected LIKE pattern"),
            }
        } else if self.eat_keyword("IN") {
            self.expect(&TokenKind::LParen, "`(` after IN")?;
            let mut items = Vec::new();
            loop {
                items.push(self.literal()?);
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
            self.expect(&TokenKind::RParen, "`)`")?;
            Pred::In(column, items)
        } else if negated {
            return self.error("expected LIKE or IN after NOT");
        } else {
            let op = match self.peek() {
                Some(TokenKind::Eq) => CmpOp::Eq,
                Some(TokenKind::NotEq) => CmpOp::NotEq,
                Some(TokenKind::Lt) => CmpOp::Lt,
                Some(TokenKind::Le) => CmpOp::Le,
                Some(TokenKind::Gt) => CmpOp::Gt,
                Some(TokenKind::Ge) => CmpOp::Ge,
                _ => return self.error("expected comparison operator"),
            };
            self.pos += 1;
            Pred::Cmp(column, op, self.literal()?)
        };
        Ok(if negated { Pred::Not(Box::new(pred)) } else { pred })
    }
}

/// Parses a token stream into a [`SqlQuery`].
pub fn parse_select(tokens: &[Token]) -> Result<SqlQuery, SqlError> {
    let mut p = Parser { tokens, pos: 0 };
    if !p.eat_keyword("SELECT") {
        return p.error("expected SELECT");
    }
    let distinct = p.eat_keyword("DISTINCT");
    if matches!(p.peek(), Some(TokenKind::Keyword("FROM")) | None) {
        return p.error("missing projection");
    }
    let mut projections = alloc::vec![p.projection()?];
    while p.eat(&TokenKind::Comma) {
        projections.push(p.projection()?);
    }
    if projections.len() > 1 && projections.iter().any(|i| i.kind == ProjKind::Star) {
        return p.error("`*` must be the only projection");
    }
    if !p.eat_keyword("FROM") {
        p.check_unsupported()?;
        return p.error("expected FROM");
    }
    let source = match p.peek() {
        Some(TokenKind::Ident(name) | TokenKind::Quoted(name)) => name.clone(),
        _ => {
            p.check_unsupported()?;
            return p.error("expected table name");
        }
    };
    p.pos += 1;
    p.check_unsupported()?;
    let predicate = if p.eat_keyword("WHERE") {
        if p.peek().is_none() {
            return p.error("dangling WHERE");
        }
        Some(p.pred()?)
    } else {
        None
    };
    p.check_unsupported()?;
    while p.eat(&TokenKind::Semicolon) {}
    if p.peek().is_some() {
        return p.error("unexpected trailing input");
    }
    Ok(SqlQuery {
        distinct,
        projections,
        source: source.to_string(),
        predicate,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{parse_query, SqlError};
    use super::*;

    #[test]
    fn two_columns_with_numeric_filter() {
        let q = parse_query("SELECT Name, Nationality FROM Table WHERE Rank <= 3").unwrap();
        assert_eq!(
            q.projections,
            vec![
                ProjItem { kind: ProjKind::Column("Name".into()), alias: None },
                ProjItem { kind: ProjKind::Column("Nationality".into()), alias: None },
            ]
        );
        assert_eq!(q.predicate, Some(Pred::Cmp("Rank".into(), CmpOp::Le, Literal::Number(3.0))));
    }

    #[test]
    fn in_list() {
        let q = parse_query(
            "SELECT `Fiscal Years`, `Cost of revenue` FROM Table WHERE `Fiscal Years` IN ('2019','2018')",
        )
        .unwrap();
        assert_eq!(
            q.predicate,
            Some(Pred::In(
                "Fiscal Years".into(),
                vec![Literal::Str("2019".into()), Literal::Str("2018".into())]
            ))
        );
    }

    #[test]
    fn count_star_with_alias_and_like() {
        let q = parse_query("SELECT COUNT(*) as Losses FROM w WHERE Result LIKE 'L%'").unwrap();
        assert_eq!(q.projections[0].kind, ProjKind::Aggregate(Aggregate::Count, AggregateArg::Star));
        assert_eq!(q.projections[0].alias.as_deref(), Some("Losses"));
        assert_eq!(q.predicate, Some(Pred::Like("Result".into(), "L%".into())));
    }

    #[test]
    fn or_of_backticked_equalities() {
        let q = parse_query(
            "SELECT `date`, `result` FROM w WHERE `date` = 'november 16 , 2003' OR `date` = 'september 28 , 2003'",
        )
        .unwrap();
        assert!(matches!(q.predicate, Some(Pred::Or(_, _))));
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(parse_query("SELECT FROM w"), Err(SqlError::Syntax { pos: 7, .. })));
        assert!(matches!(parse_query("SELECT a FROM w WHERE"), Err(SqlError::Syntax { .. })));
        assert!(matches!(parse_query("SELECT SUM(*) FROM w"), Err(SqlError::Syntax { .. })));
        assert!(matches!(parse_query("SELECT *, a FROM w"), Err(SqlError::Syntax { .. })));
        assert!(matches!(parse_query("SELECT a FROM w WHERE a = 1 b"), Err(SqlError::Syntax { .. })));
    }

    #[test]
    fn unsupported_clauses_are_named() {
        for sql in [
            "SELECT a FROM w ORDER BY a",
            "SELECT a FROM w WHERE a = 1 LIMIT 1",
            "SELECT a, COUNT(*) FROM w GROUP BY a",
            "SELECT a FROM w JOIN v",
        ] {
            match parse_query(sql) {
                Err(SqlError::Syntax { message, .. }) => assert!(message.contains("unsupported clause"), "{sql}: {message}"),
                other => panic!("{sql}: {other:?}"),
            }
        }
    }

    #[test]
    fn not_variants_and_precedence() {
        let q = parse_query("SELECT a FROM w WHERE a NOT LIKE 'x%' OR b = 1 AND NOT c IN (1, -2)").unwrap();
        let expected = Pred::Or(
            Box::new(Pred::Not(Box::new(Pred::Like("a".into(), "x%".into())))),
            Box::new(Pred::And(
                Box::new(Pred::Cmp("b".into(), CmpOp::Eq, Literal::Number(1.0))),
                Box::new(Pred::Not(Box::new(Pred::In(
                    "c".into(),
                    vec![Literal::Number(1.0), Literal::Number(-2.0)],
                )))),
            )),
        );
        assert_eq!(q.predicate, Some(expected));
    }

    #[test]
    fn double_quotes_are_columns_or_strings_by_position() {
        let q = parse_query(r#"SELECT "Name" FROM w WHERE "Eliminated" = "Winner";"#).unwrap();
        assert_eq!(q.projections[0].kind, ProjKind::Column("Name".into()));
        assert_eq!(q.predicate, Some(Pred::Cmp("Eliminated".into(), CmpOp::Eq, Literal::Str("Winner".into()))));
    }

    #[test]
    fn printed_query_parses_back() {
        let q = parse_query("select distinct `a``b` x, max(c) from t where not (a = 'it''s' or c > 2.5)").unwrap();
        let printed = q.to_string();
        assert_eq!(parse_query(&printed).unwrap(), q);
    }
}
