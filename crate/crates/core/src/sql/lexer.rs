use alloc::string::String;
use alloc::vec::Vec;

use super::SqlError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    /// Reserved word, stored upper-case.
    Keyword(&'static str),
    /// Bare or backtick-quoted identifier.
    Ident(String),
    /// Double-quoted text; an identifier or a string depending on position.
    Quoted(String),
    Str(String),
    Number(f64),
    Comma,
    LParen,
    RParen,
    Star,
    Semicolon,
    Dot,
    Eq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    Minus,
    Plus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte range in the source text.
    pub span: (usize, usize),
}

const KEYWORDS: &[&str] = &[
    "SELECT", "DISTINCT", "FROM", "WHERE", "AND", "OR", "NOT", "IN", "LIKE", "AS", "GROUP", "ORDER",
    "BY", "LIMIT", "HAVING", "JOIN", "INNER", "LEFT", "RIGHT", "OUTER", "UNION", "OFFSET", "ON",
];

fn keyword(word: &str) -> Option<&'static str> {
    KEYWORDS.iter().copied().find(|k| k.eq_ignore_ascii_case(word))
}

/// Splits SQL text into tokens with byte spans.
pub fn tokenize(text: &str) -> Result<Vec<Token>, SqlError> {
    let mut tokens = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let end_of = |i: usize| chars.get(i).map_or(text.len(), |&(p, _)| p);
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let simple = match c {
            ',' => Some(TokenKind::Comma),
            '(' => Some(TokenKind::LParen),
            ')' => Some(TokenKind::RParen),
            '*' => Some(TokenKind::Star),
            ';' => Some(TokenKind::Semicolon),
            '=' => Some(TokenKind::Eq),
            '-' => Some(TokenKind::Minus),
            '+' => Some(TokenKind::Plus),
            _ => None,
        };
        if let Some(kind) = simple {
            // `==` is accepted as `=`.
            let len = if c == '=' && chars.get(i + 1).is_some_and(|&(_, n)| n == '=') { 2 } else { 1 };
            tokens.push(Token { kind, span: (start, end_of(i + len)) });
            i += len;
            continue;
        }
        let next = chars.get(i + 1).map(|&(_, n)| n);
        match c {
            '<' | '>' | '!' => {
                let (kind, len) = match (c, next) {
                    ('<', Some('=')) => (TokenKind::Le, 2),
                    ('<', Some('>')) => (TokenKind::NotEq, 2),
                    ('<', _) => (TokenKind::Lt, 1),
                    ('>', Some('=')) => (TokenKind::Ge, 2),
                    ('>', _) => (TokenKind::Gt, 1),
                    ('!', Some('=')) => (TokenKind::NotEq, 2),
                    _ => return Err(SqlError::UnexpectedChar { ch: c, pos: start }),
                };
                tokens.push(Token { kind, span: (start, end_of(i + len)) });
                i += len;
            }
            '\'' | '`' | '"' => {
                let mut value = String::new();
                let mut j = i + 1;
                let mut closed = false;
                while j < chars.len() {
                    let ch = chars[j].1;
                    if ch == c {
                        if chars.get(j + 1).is_some_and(|&(_, n)| n == c) {
                            value.push(c);
                            j += 2;
                            continue;
                        }
                        closed = true;
                        break;
                    }
                    value.push(ch);
                    j += 1;
                }
                if !closed {
                    return Err(match c {
                        '\'' => SqlError::UnterminatedString(start),
                        _ => SqlError::UnterminatedBacktick(start),
                    });
                }
                let kind = match c {
                    '\'' => TokenKind::Str(value),
                    '`' => TokenKind::Ident(value),
                    _ => TokenKind::Quoted(value),
                };
                tokens.push(Token { kind, span: (start, end_of(j + 1)) });
                i = j + 1;
            }
            '.' if !next.is_some_and(|n| n.is_ascii_digit()) => {
                tokens.push(Token { kind: TokenKind::Dot, span: (start, end_of(i + 1)) });
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let mut j = i;
                let mut seen_dot = false;
                while j < chars.len() {
                    let ch = chars[j].1;
                    if ch.is_ascii_digit() {
                        j += 1;
                    } else if ch == '.' && !seen_dot {
                        seen_dot = true;
                        j += 1;
                    } else {
                        break;
                    }
                }
                // `1st`, `2019a`: a word that happens to start with digits
                if chars.get(j).is_some_and(|&(_, n)| n.is_alphabetic() || n == '_') {
                    let k = scan_word(&chars, j);
                    let word = &text[start..end_of(k)];
                    tokens.push(Token { kind: TokenKind::Ident(word.into()), span: (start, end_of(k)) });
                    i = k;
                    continue;
                }
                let literal = &text[start..end_of(j)];
                let value: f64 = literal
                    .parse()
                    .map_err(|_| SqlError::UnexpectedChar { ch: c, pos: start })?;
                tokens.push(Token { kind: TokenKind::Number(value), span: (start, end_of(j)) });
                i = j;
            }
            c if c.is_alphabetic() || c == '_' => {
                let j = scan_word(&chars, i);
                let word = &text[start..end_of(j)];
                let kind = match keyword(word) {
                    Some(k) => TokenKind::Keyword(k),
                    None => TokenKind::Ident(word.into()),
                };
                tokens.push(Token { kind, span: (start, end_of(j)) });
                i = j;
            }
            _ => return Err(SqlError::UnexpectedChar { ch: c, pos: start }),
        }
    }
    Ok(tokens)
}

fn scan_word(chars: &[(usize, char)], mut j: usize) -> usize {
    while j < chars.len() && (chars[j].1.is_alphanumeric() || chars[j].1 == '_') {
        j += 1;
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<TokenKind> {
        tokenize(text).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn backtick_identifier_with_spaces() {
        assert_eq!(
            kinds("SELECT `Left office` FROM w"),
            vec![
                TokenKind::Keyword("SELECT"),
                TokenKind::Ident("Left office".into()),
                TokenKind::Keyword("FROM"),
                TokenKind::Ident("w".into()),
            ]
        );
    }

    #[test]
    fn string_literals() {
        assert_eq!(kinds("'L%'"), vec![TokenKind::Str("L%".into())]);
        assert_eq!(kinds("'it''s'"), vec![TokenKind::Str("it's".into())]);
    }

    #[test]
    fn unterminated_quotes() {
        assert_eq!(tokenize("`unclosed"), Err(SqlError::UnterminatedBacktick(0)));
        assert_eq!(tokenize("x = 'abc"), Err(SqlError::UnterminatedString(4)));
        assert!(matches!(tokenize("Category = Men's singles"), Err(SqlError::UnterminatedString(_))));
    }

    #[test]
    fn spans_and_operators() {
        let toks = tokenize("Rank <= 3").unwrap();
        assert_eq!(toks[1].kind, TokenKind::Le);
        assert_eq!(toks[1].span, (5, 7));
        assert_eq!(toks[2].kind, TokenKind::Number(3.0));
        assert_eq!(kinds("a != 1 <> 2"), kinds("a <> 1 != 2"));
    }

    #[test]
    fn keywords_are_case_insensitive() {
        assert_eq!(kinds("select"), vec![TokenKind::Keyword("SELECT")]);
        assert_eq!(kinds("column0"), vec![TokenKind::Ident("column0".into())]);
    }
}
