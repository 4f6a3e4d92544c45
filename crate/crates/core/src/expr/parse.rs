//! Pratt parser for the expression grammar.
//!
//! Operators: `+ - * / ^`, unary minus, parentheses and the functions
//! `sin cos exp log sqrt`. Exponents must reduce to a rational constant.

use std::collections::BTreeSet;

use thiserror::Error;

use super::{Expr, Func, Number, Symbol};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: expected {expected}, found {found}")]
    Syntax { offset: usize, expected: String, found: String },
    #[error("unknown symbol `{name}` at offset {offset}")]
    UnknownSymbol { name: String, offset: usize },
}

/// The set of names an expression may refer to.
#[derive(Debug, Clone, Default)]
pub struct Alphabet {
    names: BTreeSet<String>,
}

impl Alphabet {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Alphabet { names: names.into_iter().map(Into::into).collect() }
    }

    pub fn insert(&mut self, name: &str) {
        self.names.insert(name.to_string());
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.contains(name)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Number),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(n) => format!("number `{n}`"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lit = &src[start..i];
            let n = Number::from_decimal(lit.trim_start_matches('+')).ok_or_else(|| ParseError::Syntax {
                offset: start,
                expected: "numeric literal".into(),
                found: format!("`{lit}`"),
            })?;
            out.push((start, Tok::Num(n)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            _ => {
                let ch = src[start..].chars().next().unwrap();
                return Err(ParseError::Syntax {
                    offset: start,
                    expected: "expression".into(),
                    found: format!("`{ch}`"),
                });
            }
        };
        out.push((start, tok));
        i += 1;
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    alphabet: &'a Alphabet,
}

const UNARY_BP: u8 = 5;

fn infix_bp(c: char) -> (u8, u8) {
    match c {
        '+' | '-' => (1, 2),
        '*' | '/' => (3, 4),
        '^' => (8, 7),
        _ => unreachable!(),
    }
}

impl Parser<'_> {
    fn peek(&self) -> &(usize, Tok) {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> (usize, Tok) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &str) -> Result<T, ParseError> {
        let (offset, tok) = self.peek();
        Err(ParseError::Syntax { offset: *offset, expected: expected.into(), found: tok.describe() })
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if self.peek().1 == Tok::RParen {
            self.next();
            Ok(())
        } else {
            self.fail("`)`")
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.prefix()?;
        loop {
            let op = match self.peek().1 {
                Tok::Op(c) => c,
                Tok::End | Tok::RParen => break,
                _ => return self.fail("operator"),
            };
            let (lbp, rbp) = infix_bp(op);
            if lbp < min_bp {
                break;
            }
            self.next();
            let rhs_offset = self.peek().0;
            let rhs = self.expr(rbp)?;
            lhs = match op {
                '+' => lhs + rhs,
                '-' => lhs - rhs,
                '*' => lhs * rhs,
                '/' => lhs / rhs,
                '^' => match rhs.as_number() {
                    Some(e) => lhs.pow(e),
                    None => {
                        return Err(ParseError::Syntax {
                            offset: rhs_offset,
                            expected: "constant exponent".into(),
                            found: format!("`{rhs}`"),
                        })
                    }
                },
                _ => unreachable!(),
            };
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Expr, ParseError> {
        let (offset, tok) = self.peek().clone();
        match tok {
            Tok::Num(n) => {
                self.next();
                Ok(Expr::num(n))
            }
            Tok::Op('-') => {
                self.next();
                Ok(-self.expr(UNARY_BP)?)
            }
            Tok::Op('+') => {
                self.next();
                self.expr(UNARY_BP)
            }
            Tok::LParen => {
                self.next();
                let inner = self.expr(0)?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.next();
                let func = match name.as_str() {
                    "sin" => Some(Some(Func::Sin)),
                    "cos" => Some(Some(Func::Cos)),
                    "exp" => Some(Some(Func::Exp)),
                    "log" => Some(Some(Func::Log)),
                    "sqrt" => Some(None),
                    _ => None,
                };
                match func {
                    Some(f) => {
                        if self.peek().1 != Tok::LParen {
                            return self.fail("`(`");
                        }
                        self.next();
                        let arg = self.expr(0)?;
                        self.expect_rparen()?;
                        Ok(match f {
                            Some(f) => Expr::func(f, arg),
                            None => arg.sqrt(),
                        })
                    }
                    None if self.alphabet.contains(&name) => Ok(Expr::sym(&Symbol::new(&name))),
                    None => Err(ParseError::UnknownSymbol { name, offset }),
                }
            }
            _ => self.fail("expression"),
        }
    }
}

/// Parses `src` into canonical form; every name must belong to `alphabet`.
pub fn parse(src: &str, alphabet: &Alphabet) -> Result<Expr, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0, alphabet };
    let e = p.expr(0)?;
    match p.peek().1 {
        Tok::End => Ok(e),
        _ => p.fail("end of input"),
    }
}
