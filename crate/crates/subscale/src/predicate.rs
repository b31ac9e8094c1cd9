//! Boolean predicates over attribute records.
//!
//! Grammar (case-sensitive keywords, whitespace-insensitive):
//!
//! ```text
//! expr    := term ('or' term)*
//! term    := factor ('and' factor)*
//! factor  := 'not' factor | '(' expr ')' | 'true' | 'false' | comparison
//! comparison := ident op literal
//! op      := '=' | '!=' | '<' | '<=' | '>' | '>='
//! literal := integer | float | 'true' | 'false' | "double-quoted string"
//! ```
//!
//! Evaluation is three-valued: a comparison against a missing attribute is
//! unknown, and unknown collapses to false at the top level, so a vertex
//! lacking the attribute simply fails the predicate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::{AttributeRecord, AttributeValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl fmt::Display for CompareOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    True,
    False,
    Compare { attr: String, op: CompareOp, value: AttributeValue },
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    /// Three-valued evaluation; `None` means an attribute was missing.
    fn eval3(&self, record: Option<&AttributeRecord>) -> Option<bool> {
        match self {
            Predicate::True => Some(true),
            Predicate::False => Some(false),
            Predicate::Compare { attr, op, value } => {
                let actual = record?.get(attr)?;
                compare(actual, *op, value)
            }
            Predicate::And(a, b) => match (a.eval3(record), b.eval3(record)) {
                (Some(false), _) | (_, Some(false)) => Some(false),
                (Some(true), Some(true)) => Some(true),
                _ => None,
            },
            Predicate::Or(a, b) => match (a.eval3(record), b.eval3(record)) {
                (Some(true), _) | (_, Some(true)) => Some(true),
                (Some(false), Some(false)) => Some(false),
                _ => None,
            },
            Predicate::Not(p) => p.eval3(record).map(|b| !b),
        }
    }

    /// Evaluates against an element's attribute record, collapsing unknown
    /// to false.
    pub fn matches(&self, record: Option<&AttributeRecord>) -> bool {
        self.eval3(record).unwrap_or(false)
    }

    /// True if the predicate can never look at attributes (so it holds for
    /// attribute-less elements too).
    pub fn is_trivially_true(&self) -> bool {
        matches!(self, Predicate::True)
    }

    /// Attribute names referenced anywhere in the predicate.
    pub fn referenced_attrs(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_attrs(&mut out);
        out
    }

    fn collect_attrs<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Predicate::Compare { attr, .. } => out.push(attr),
            Predicate::And(a, b) | Predicate::Or(a, b) => {
                a.collect_attrs(out);
                b.collect_attrs(out);
            }
            Predicate::Not(p) => p.collect_attrs(out),
            _ => {}
        }
    }
}

fn compare(actual: &AttributeValue, op: CompareOp, expected: &AttributeValue) -> Option<bool> {
    use AttributeValue::*;
    let ord = match (actual, expected) {
        (Int(a), Int(b)) => a.partial_cmp(b),
        (Float(a), Float(b)) => a.partial_cmp(b),
        (Int(a), Float(b)) => (*a as f64).partial_cmp(b),
        (Float(a), Int(b)) => a.partial_cmp(&(*b as f64)),
        (Str(a), Str(b)) => a.partial_cmp(b),
        (Bool(a), Bool(b)) => a.partial_cmp(b),
        _ => None, // type mismatch is unknown
    }?;
    Some(match op {
        CompareOp::Eq => ord == std::cmp::Ordering::Equal,
        CompareOp::Ne => ord != std::cmp::Ordering::Equal,
        CompareOp::Lt => ord == std::cmp::Ordering::Less,
        CompareOp::Le => ord != std::cmp::Ordering::Greater,
        CompareOp::Gt => ord == std::cmp::Ordering::Greater,
        CompareOp::Ge => ord != std::cmp::Ordering::Less,
    })
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::True => f.write_str("true"),
            Predicate::False => f.write_str("false"),
            Predicate::Compare { attr, op, value } => {
                write!(f, "{attr} {op} ")?;
                match value {
                    AttributeValue::Str(s) => write!(f, "\"{s}\""),
                    AttributeValue::Int(i) => write!(f, "{i}"),
                    AttributeValue::Float(x) => write!(f, "{x}"),
                    AttributeValue::Bool(b) => write!(f, "{b}"),
                }
            }
            Predicate::And(a, b) => write!(f, "({a} and {b})"),
            Predicate::Or(a, b) => write!(f, "({a} or {b})"),
            Predicate::Not(p) => write!(f, "not ({p})"),
        }
    }
}

// --- parser ---------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    Op(CompareOp),
    And,
    Or,
    Not,
    True,
    False,
    LParen,
    RParen,
}

fn tokenize(input: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = input.chars().collect();
    let mut i = 0;
    let err = |msg: String| Error::Config(format!("predicate '{input}': {msg}"));
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            '"' => {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && chars[j] != '"' {
                    j += 1;
                }
                if j == chars.len() {
                    return Err(err("unterminated string literal".into()));
                }
                tokens.push(Token::Str(chars[start..j].iter().collect()));
                i = j + 1;
            }
            '=' => {
                tokens.push(Token::Op(CompareOp::Eq));
                i += 1;
            }
            '!' if chars.get(i + 1) == Some(&'=') => {
                tokens.push(Token::Op(CompareOp::Ne));
                i += 2;
            }
            '<' => {
                if chars.get(i + 1) == Some(&'=') {
                    tokens.push(Token::Op(CompareOp::Le));
                    i += 2;
                } else {
                    tokens.push(Token::Op(CompareOp::Lt));
                    i += 1;
                }
            }
            '>' => {
                if chars.get(i + 1) == Some(&'=') {
                    tokens.push(Token::Op(CompareOp::Ge));
                    i += 2;
                } else {
                    tokens.push(Token::Op(CompareOp::Gt));
                    i += 1;
                }
            }
            c if c.is_ascii_digit() || c == '-' || c == '.' => {
                let start = i;
                i += 1;
                while i < chars.len()
                    && (chars[i].is_ascii_digit() || chars[i] == '.' || chars[i] == 'e')
                {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                if let Ok(n) = text.parse::<i64>() {
                    tokens.push(Token::Int(n));
                } else if let Ok(x) = text.parse::<f64>() {
                    tokens.push(Token::Float(x));
                } else {
                    return Err(err(format!("bad number '{text}'")));
                }
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                tokens.push(match word.as_str() {
                    "and" => Token::And,
                    "or" => Token::Or,
                    "not" => Token::Not,
                    "true" => Token::True,
                    "false" => Token::False,
                    _ => Token::Ident(word),
                });
            }
            other => return Err(err(format!("unexpected character '{other}'"))),
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    input: &'a str,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Config(format!("predicate '{}': {msg}", self.input))
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.pos);
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Predicate> {
        let mut lhs = self.term()?;
        while self.peek() == Some(&Token::Or) {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Predicate::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Predicate> {
        let mut lhs = self.factor()?;
        while self.peek() == Some(&Token::And) {
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Predicate::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Predicate> {
        match self.next().cloned() {
            Some(Token::Not) => Ok(Predicate::Not(Box::new(self.factor()?))),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                match self.next() {
                    Some(Token::RParen) => Ok(inner),
                    _ => Err(self.err("expected ')'")),
                }
            }
            Some(Token::True) => Ok(Predicate::True),
            Some(Token::False) => Ok(Predicate::False),
            Some(Token::Ident(attr)) => {
                let op = match self.next() {
                    Some(Token::Op(op)) => *op,
                    _ => return Err(self.err("expected comparison operator")),
                };
                let value = match self.next().cloned() {
                    Some(Token::Int(n)) => AttributeValue::Int(n),
                    Some(Token::Float(x)) => AttributeValue::Float(x),
                    Some(Token::Str(s)) => AttributeValue::Str(s),
                    Some(Token::True) => AttributeValue::Bool(true),
                    Some(Token::False) => AttributeValue::Bool(false),
                    _ => return Err(self.err("expected literal")),
                };
                Ok(Predicate::Compare { attr, op, value })
            }
            _ => Err(self.err("expected predicate factor")),
        }
    }
}

impl FromStr for Predicate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let tokens = tokenize(s)?;
        let mut parser = Parser { tokens: &tokens, pos: 0, input: s };
        let pred = parser.expr()?;
        if parser.pos != tokens.len() {
            return Err(parser.err("trailing tokens"));
        }
        Ok(pred)
    }
}

impl Serialize for Predicate {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Predicate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
