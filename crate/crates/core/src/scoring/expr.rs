use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::ac::AcId;

/// Boolean predicate over an assigned AC set.
///
/// ```text
/// expr   := term ("or" term)*
/// term   := factor ("and" factor)*
/// factor := "not" factor | "has(" ID ")" | "(" expr ")"
/// ```
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Has(AcId),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
}

/// Parse failure at a 1-based character column.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("column {column}: {message}")]
pub struct ParseError {
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    Word(String),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '(' {
            out.push((i + 1, Tok::LParen));
            i += 1;
        } else if c == ')' {
            out.push((i + 1, Tok::RParen));
            i += 1;
        } else if c.is_ascii_alphanumeric() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((start + 1, Tok::Word(chars[start..i].iter().collect())));
        } else {
            return Err(ParseError { column: i + 1, message: format!("unexpected character {c:?}") });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    end_column: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn column(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end_column, |(c, _)| *c)
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError { column: self.column(), message: message.into() }
    }

    fn is_word(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w == word)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while self.is_word("or") {
            self.pos += 1;
            lhs = Expr::Or(Box::new(lhs), Box::new(self.term()?));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        while self.is_word("and") {
            self.pos += 1;
            lhs = Expr::And(Box::new(lhs), Box::new(self.factor()?));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(Tok::Word(w)) if w == "not" => {
                self.pos += 1;
                Ok(Expr::Not(Box::new(self.factor()?)))
            }
            Some(Tok::Word(w)) if w == "has" => {
                self.pos += 1;
                self.expect(Tok::LParen, "'(' after has")?;
                let id = match self.peek() {
                    Some(Tok::Word(w)) if !matches!(w.as_str(), "and" | "or" | "not" | "has") => {
                        AcId::new(w.clone()).map_err(|e| self.error(e.to_string()))?
                    }
                    _ => return Err(self.error("expected an answer class id")),
                };
                self.pos += 1;
                self.expect(Tok::RParen, "')' after answer class id")?;
                Ok(Expr::Has(id))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Some(Tok::Word(w)) => Err(self.error(format!("unexpected {w:?}, expected has(..), not or '('"))),
            Some(Tok::RParen) => Err(self.error("unexpected ')'")),
            None => Err(self.error("unexpected end of expression")),
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ParseError> {
        let tokens = tokenize(src)?;
        let mut parser = Parser { tokens, pos: 0, end_column: src.chars().count() + 1 };
        let expr = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(parser.error("unexpected trailing input"));
        }
        Ok(expr)
    }

    pub fn has(id: &str) -> Expr {
        Expr::Has(AcId::new(id).expect("valid AC id"))
    }

    pub fn eval(&self, set: &BTreeSet<AcId>) -> bool {
        match self {
            Expr::Has(id) => set.contains(id),
            Expr::Not(e) => !e.eval(set),
            Expr::And(a, b) => a.eval(set) && b.eval(set),
            Expr::Or(a, b) => a.eval(set) || b.eval(set),
        }
    }

    pub fn referenced_ids(&self) -> BTreeSet<AcId> {
        let mut out = BTreeSet::new();
        self.collect_ids(&mut out);
        out
    }

    fn collect_ids(&self, out: &mut BTreeSet<AcId>) {
        match self {
            Expr::Has(id) => {
                out.insert(id.clone());
            }
            Expr::Not(e) => e.collect_ids(out),
            Expr::And(a, b) | Expr::Or(a, b) => {
                a.collect_ids(out);
                b.collect_ids(out);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Or(..) => 0,
            Expr::And(..) => 1,
            Expr::Not(_) | Expr::Has(_) => 2,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let wrap = self.precedence() < min;
        if wrap {
            f.write_str("(")?;
        }
        match self {
            Expr::Has(id) => write!(f, "has({id})")?,
            Expr::Not(e) => {
                f.write_str("not ")?;
                e.fmt_at(f, 2)?;
            }
            Expr::And(a, b) => {
                a.fmt_at(f, 1)?;
                f.write_str(" and ")?;
                b.fmt_at(f, 2)?;
            }
            Expr::Or(a, b) => {
                a.fmt_at(f, 0)?;
                f.write_str(" or ")?;
                b.fmt_at(f, 1)?;
            }
        }
        if wrap {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(ids: &[&str]) -> BTreeSet<AcId> {
        ids.iter().map(|s| AcId::new(*s).unwrap()).collect()
    }

    #[test]
    fn precedence_and_whitespace() {
        let e = Expr::parse("has(AC1) or has(AC2)and not has(AC3)").unwrap();
        assert_eq!(e.to_string(), "has(AC1) or has(AC2) and not has(AC3)");
        assert!(e.eval(&set(&["AC1", "AC3"])));
        assert!(!e.eval(&set(&["AC2", "AC3"])));
        assert!(e.eval(&set(&["AC2"])));

        let spaced = Expr::parse("  has ( AC10 )\tand(has(AC5)or has(AC6))").unwrap();
        assert_eq!(spaced.to_string(), "has(AC10) and (has(AC5) or has(AC6))");
        assert_eq!(Expr::parse("not not has(AC1)").unwrap().to_string(), "not not has(AC1)");
    }

    #[test]
    fn positioned_errors() {
        let cases = [
            ("has(AC1) and", 13, "unexpected end"),
            ("has AC1", 5, "expected '('"),
            ("has(AC1 or has(AC2)", 9, "expected ')'"),
            ("has(AC1) xor has(AC2)", 10, "trailing"),
            ("has(AC1) & has(AC2)", 10, "unexpected character"),
            ("(has(AC1)", 10, "expected ')'"),
            ("", 1, "unexpected end"),
            ("has(and)", 5, "expected an answer class id"),
            ("AC1", 1, "unexpected \"AC1\""),
        ];
        for (src, column, fragment) in cases {
            let err = Expr::parse(src).unwrap_err();
            assert_eq!(err.column, column, "{src}: {err}");
            assert!(err.message.contains(fragment), "{src}: {err}");
        }
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = (1u8..8).prop_map(|n| Expr::has(&format!("AC{n}")));
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Not(Box::new(e))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::And(Box::new(a), Box::new(b))),
                (inner.clone(), inner).prop_map(|(a, b)| Expr::Or(Box::new(a), Box::new(b))),
            ]
        })
    }

    proptest! {
        #[test]
        fn display_parses_back_to_same_tree(e in arb_expr()) {
            prop_assert_eq!(Expr::parse(&e.to_string()).unwrap(), e);
        }
    }
}
