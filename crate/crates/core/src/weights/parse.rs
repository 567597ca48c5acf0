//! Recursive-descent parser for
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor ('*' factor)*
//! factor := base ('^' INTEGER)?
//! base   := NUMBER | VAR | 'i' | '(' expr ')' | FUNC '(' expr ')'
//! VAR    := 'z' INTEGER | 'zbar' INTEGER
//! FUNC   := 'modsq' | 'conj' | 're' | 'im'
//! ```
//!
//! `i` (the imaginary unit) is an extension used when printing derivatives.

use super::{Node, WeightError};
use num_complex::Complex64;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Int(u64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn next(&mut self) -> Result<(usize, Tok), WeightError> {
        self.skip_ws();
        let start = self.pos;
        let Some(&b) = self.src.get(self.pos) else {
            return Ok((start, Tok::End));
        };
        let single = match b {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = single {
            self.pos += 1;
            return Ok((start, t));
        }
        if b.is_ascii_digit() || b == b'.' {
            while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
                self.pos += 1;
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            if !text.contains('.') {
                if let Ok(v) = text.parse::<u64>() {
                    return Ok((start, Tok::Int(v)));
                }
            }
            return text
                .parse::<f64>()
                .map(|v| (start, Tok::Num(v)))
                .map_err(|_| WeightError::Syntax { pos: start, msg: format!("malformed number `{text}`") });
        }
        if b.is_ascii_alphabetic() {
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
                self.pos += 1;
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
            return Ok((start, Tok::Ident(text)));
        }
        Err(WeightError::Syntax { pos: start, msg: format!("unexpected character `{}`", b as char) })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    pos: usize,
    dim: usize,
}

impl<'a> Parser<'a> {
    fn advance(&mut self) -> Result<(), WeightError> {
        let (pos, tok) = self.lexer.next()?;
        self.pos = pos;
        self.tok = tok;
        Ok(())
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, WeightError> {
        Err(WeightError::Syntax { pos: self.pos, msg: msg.into() })
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), WeightError> {
        if self.tok != want {
            return self.error(format!("expected {what}"));
        }
        self.advance()
    }

    fn expr(&mut self) -> Result<Node, WeightError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.tok {
                Tok::Plus => {
                    self.advance()?;
                    terms.push(self.term()?);
                }
                Tok::Minus => {
                    self.advance()?;
                    let t = self.term()?;
                    terms.push(Node::product(vec![Node::real(-1.0), t]));
                }
                _ => return Ok(Node::sum(terms)),
            }
        }
    }

    fn term(&mut self) -> Result<Node, WeightError> {
        let mut factors = vec![self.factor()?];
        while self.tok == Tok::Star {
            self.advance()?;
            factors.push(self.factor()?);
        }
        Ok(Node::product(factors))
    }

    fn factor(&mut self) -> Result<Node, WeightError> {
        let base = self.base()?;
        if self.tok != Tok::Caret {
            return Ok(base);
        }
        self.advance()?;
        let Tok::Int(p) = self.tok else {
            return self.error("expected a nonnegative integer exponent");
        };
        let p = u32::try_from(p).or_else(|_| self.error("exponent too large"))?;
        self.advance()?;
        Ok(Node::pow(base, p))
    }

    fn base(&mut self) -> Result<Node, WeightError> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.advance()?;
                Ok(Node::real(v))
            }
            Tok::Int(v) => {
                self.advance()?;
                Ok(Node::real(v as f64))
            }
            Tok::LParen => {
                self.advance()?;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let start = self.pos;
                self.advance()?;
                match name.as_str() {
                    "z" | "zbar" => self.variable(start, name == "zbar"),
                    "i" => Ok(Node::Const(Complex64::new(0.0, 1.0))),
                    "modsq" | "conj" | "re" | "im" => {
                        self.expect(Tok::LParen, "`(` after function name")?;
                        let arg = self.expr()?;
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(match name.as_str() {
                            "modsq" => Node::modsq(arg),
                            "conj" => Node::conj(arg),
                            "re" => Node::re(arg),
                            _ => Node::im(arg),
                        })
                    }
                    _ => Err(WeightError::Syntax { pos: start, msg: format!("unknown identifier `{name}`") }),
                }
            }
            Tok::End => self.error("unexpected end of input"),
            _ => self.error("expected a number, variable, function or `(`"),
        }
    }

    fn variable(&mut self, start: usize, conj: bool) -> Result<Node, WeightError> {
        // the index must follow the name directly
        if self.pos != self.lexer_index_start(start, conj) {
            return Err(WeightError::Syntax { pos: start, msg: "variable index must follow the name".into() });
        }
        let Tok::Int(idx) = self.tok else {
            return Err(WeightError::Syntax { pos: start, msg: "expected variable index".into() });
        };
        if idx == 0 {
            return Err(WeightError::Syntax { pos: self.pos, msg: "variable indices start at 1".into() });
        }
        let idx = idx as usize;
        if idx > self.dim {
            return Err(WeightError::DimensionOutOfRange { index: idx, dim: self.dim, pos: start });
        }
        self.advance()?;
        Ok(Node::var(idx - 1, conj))
    }

    fn lexer_index_start(&self, start: usize, conj: bool) -> usize {
        start + if conj { 4 } else { 1 }
    }
}

pub(super) fn parse(source: &str, dim: usize) -> Result<Node, WeightError> {
    let mut p = Parser { lexer: Lexer { src: source.as_bytes(), pos: 0 }, tok: Tok::End, pos: 0, dim };
    p.advance()?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return p.error("trailing input");
    }
    Ok(e)
}
