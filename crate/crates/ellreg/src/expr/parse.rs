//! Recursive-descent parser for the integrand DSL.
//!
//! ```text
//! expr   := ["-"] term { ("+" | "-") term }
//! term   := factor { ("*" | "/") factor }      (* "/" only by a scalar *)
//! factor := base [ "^" uint ]
//! base   := atom | const | number | "(" expr ")" | "(" dec "," dec ")"
//! atom   := ("wp" {"'"} | "Z") "(" uint "-" uint ")"
//! const  := "g2" | "g3" | "eta1h" | "pi" | "G" even-uint
//! ```
//! Whitespace is insignificant; point indices are 1-based.

use num_complex::Complex64;

use super::{AtomKind, ConstSym, Expr};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Apostrophe,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn err(offset: usize, message: impl Into<String>) -> Error {
    Error::SyntaxError {
        offset,
        message: message.into(),
    }
}

fn tokenize(input: &str) -> Result<Vec<Token>> {
    let bytes = input.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' => {
                out.push(Token { tok: Tok::Plus, offset: i });
                i += 1;
            }
            b'-' => {
                out.push(Token { tok: Tok::Minus, offset: i });
                i += 1;
            }
            b'*' => {
                out.push(Token { tok: Tok::Star, offset: i });
                i += 1;
            }
            b'/' => {
                out.push(Token { tok: Tok::Slash, offset: i });
                i += 1;
            }
            b'^' => {
                out.push(Token { tok: Tok::Caret, offset: i });
                i += 1;
            }
            b'(' => {
                out.push(Token { tok: Tok::LParen, offset: i });
                i += 1;
            }
            b')' => {
                out.push(Token { tok: Tok::RParen, offset: i });
                i += 1;
            }
            b',' => {
                out.push(Token { tok: Tok::Comma, offset: i });
                i += 1;
            }
            b'\'' => {
                out.push(Token { tok: Tok::Apostrophe, offset: i });
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                // optional exponent
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &input[start..i];
                let value: f64 = text
                    .parse()
                    .map_err(|_| err(start, format!("invalid number `{text}`")))?;
                out.push(Token {
                    tok: Tok::Number(value),
                    offset: start,
                });
            }
            b'a'..=b'z' | b'A'..=b'Z' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric()) {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(input[start..i].to_string()),
                    offset: start,
                });
            }
            _ => return Err(err(i, format!("unexpected character `{}`", b as char))),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map(|t| t.offset).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).map(|t| t.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let off = self.offset();
        match self.bump() {
            Some(t) if t == want => Ok(()),
            _ => Err(err(off, format!("expected {what}"))),
        }
    }

    fn uint(&mut self, what: &str) -> Result<u32> {
        let off = self.offset();
        match self.bump() {
            Some(Tok::Number(x)) if x.fract() == 0.0 && x >= 0.0 && x <= u32::MAX as f64 => {
                Ok(x as u32)
            }
            _ => Err(err(off, format!("expected {what}"))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut neg = false;
        if self.peek() == Some(&Tok::Minus) {
            self.bump();
            neg = true;
        }
        let mut acc = self.term()?;
        if neg {
            acc = acc.neg();
        }
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    let t = self.term()?;
                    acc = acc.add(&t);
                }
                Some(Tok::Minus) => {
                    self.bump();
                    let t = self.term()?;
                    acc = acc.sub(&t);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    let f = self.factor()?;
                    acc = acc.mul(&f);
                }
                Some(Tok::Slash) => {
                    let off = self.offset();
                    self.bump();
                    let f = self.factor()?;
                    // Division is only defined by scalar numbers; rational
                    // expressions in atoms are rejected by design.
                    let v = scalar_value(&f)
                        .ok_or_else(|| err(off, "division is only allowed by a numeric scalar"))?;
                    if v == Complex64::new(0.0, 0.0) {
                        return Err(err(off, "division by zero"));
                    }
                    acc = acc.scale(1.0 / v);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.base()?;
        if self.peek() == Some(&Tok::Caret) {
            self.bump();
            let k = self.uint("a non-negative integer exponent")?;
            return Ok(base.pow(k));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr> {
        let off = self.offset();
        match self.bump() {
            Some(Tok::Number(x)) => Ok(Expr::number(Complex64::new(x, 0.0))),
            Some(Tok::LParen) => {
                // Either a complex literal "(re,im)" or a parenthesized expr.
                let save = self.pos;
                if let Some(c) = self.try_complex_literal()? {
                    return Ok(Expr::number(c));
                }
                self.pos = save;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => self.ident(name, off),
            _ => Err(err(off, "expected an atom, constant, number or `(`")),
        }
    }

    fn try_complex_literal(&mut self) -> Result<Option<Complex64>> {
        let re = match self.signed_number() {
            Some(x) => x,
            None => return Ok(None),
        };
        if self.peek() != Some(&Tok::Comma) {
            return Ok(None);
        }
        self.bump();
        let off = self.offset();
        let im = self
            .signed_number()
            .ok_or_else(|| err(off, "expected the imaginary part of a complex literal"))?;
        self.expect(Tok::RParen, "`)` after complex literal")?;
        Ok(Some(Complex64::new(re, im)))
    }

    fn signed_number(&mut self) -> Option<f64> {
        let mut sign = 1.0;
        if self.peek() == Some(&Tok::Minus) {
            self.bump();
            sign = -1.0;
        } else if self.peek() == Some(&Tok::Plus) {
            self.bump();
        }
        match self.peek() {
            Some(Tok::Number(x)) => {
                let v = *x;
                self.bump();
                Some(sign * v)
            }
            _ => None,
        }
    }

    fn ident(&mut self, name: String, off: usize) -> Result<Expr> {
        match name.as_str() {
            "g2" => return Ok(Expr::const_sym(ConstSym::G2Lower)),
            "g3" => return Ok(Expr::const_sym(ConstSym::G3Lower)),
            "eta1h" => return Ok(Expr::const_sym(ConstSym::Eta1Hat)),
            "pi" => return Ok(Expr::const_sym(ConstSym::Pi)),
            _ => {}
        }
        if let Some(rest) = name.strip_prefix('G') {
            if let Ok(n) = rest.parse::<u32>() {
                if n >= 4 && n % 2 == 0 {
                    return Ok(Expr::const_sym(ConstSym::GUpper(n / 2)));
                }
            }
            if !rest.is_empty() {
                return Err(Error::UnknownSymbol(name));
            }
        }
        let kind = match name.as_str() {
            "wp" => {
                let mut m = 0;
                while self.peek() == Some(&Tok::Apostrophe) {
                    self.bump();
                    m += 1;
                }
                AtomKind::WpDer(m)
            }
            "Z" => AtomKind::Zhat,
            _ => return Err(Error::UnknownSymbol(name)),
        };
        self.expect(Tok::LParen, "`(` after atom name")?;
        let a = self.uint("a point index")?;
        self.expect(Tok::Minus, "`-` between point indices")?;
        let b = self.uint("a point index")?;
        self.expect(Tok::RParen, "`)` after atom argument")?;
        if a == 0 || b == 0 {
            return Err(err(off, "point indices are 1-based"));
        }
        Expr::atom(kind, a, b)
    }
}

/// The complex value of a pure scalar expression (no atoms, no constant
/// symbols), if it is one.
fn scalar_value(e: &Expr) -> Option<Complex64> {
    if e.is_zero_expr() {
        return Some(Complex64::new(0.0, 0.0));
    }
    let terms = e.terms();
    if terms.len() == 1 && terms[0].atoms.is_empty() && terms[0].consts.is_empty() {
        return Some(terms[0].coeff);
    }
    None
}

/// Parses DSL text into a normalized expression.
pub fn parse(input: &str) -> Result<Expr> {
    let tokens = tokenize(input)?;
    if tokens.is_empty() {
        return Err(err(0, "empty expression"));
    }
    let mut p = Parser {
        tokens,
        pos: 0,
        end: input.len(),
    };
    let e = p.expr()?;
    if p.pos != p.tokens.len() {
        return Err(err(p.offset(), "unexpected trailing input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn parses_products_of_atoms() {
        let e = parse("wp(1-2)*wp(2-3)*wp(3-1)").unwrap();
        assert_eq!(e.terms().len(), 1);
        assert_eq!(e.terms()[0].atoms.len(), 3);
        assert_eq!(e.points(), vec![1, 2, 3]);
    }

    #[test]
    fn parity_on_parse() {
        let e = parse("Z(2-1)").unwrap();
        assert_eq!(e.terms().len(), 1);
        assert_eq!(e.terms()[0].coeff, c(-1.0, 0.0));
        assert_eq!(e.terms()[0].atoms[0].a, 1);
        assert_eq!(e.terms()[0].atoms[0].b, 2);
    }

    #[test]
    fn scalar_division_and_constants() {
        let e = parse("wp(1-2)^2 - (1/12)*g2").unwrap();
        assert_eq!(e.terms().len(), 2);
        let g2_term = e
            .terms()
            .iter()
            .find(|t| !t.consts.is_empty())
            .expect("g2 term");
        assert!((g2_term.coeff - c(-1.0 / 12.0, 0.0)).norm() < 1e-18);
        assert_eq!(g2_term.consts[0].0, ConstSym::G2Lower);
    }

    #[test]
    fn complex_literals() {
        let e = parse("(1.5,-0.25)*Z(1-2)").unwrap();
        assert_eq!(e.terms()[0].coeff, c(1.5, -0.25));
        let e = parse("(0,1)").unwrap();
        assert_eq!(e.terms()[0].coeff, c(0.0, 1.0));
    }

    #[test]
    fn derivative_apostrophes() {
        let e = parse("wp''(1-2)").unwrap();
        assert_eq!(e.terms()[0].atoms[0].kind, super::super::AtomKind::WpDer(2));
        // odd derivative order flips sign when reoriented
        let e = parse("wp'(2-1)").unwrap();
        assert_eq!(e.terms()[0].coeff, c(-1.0, 0.0));
    }

    #[test]
    fn big_g_tokens() {
        let e = parse("70*G6 - 60*eta1h*G4").unwrap();
        assert_eq!(e.terms().len(), 2);
        assert!(parse("G7").is_err());
        assert!(parse("G2").is_err());
    }

    #[test]
    fn division_restrictions() {
        assert!(parse("wp(1-2)/wp(1-3)").is_err());
        assert!(parse("wp(1-2)/g2").is_err());
        assert!(parse("wp(1-2)/0").is_err());
        assert!(parse("wp(1-2)/2").is_ok());
    }

    #[test]
    fn error_reporting() {
        match parse("wp(1-1)") {
            Err(Error::SelfDifference(1)) => {}
            other => panic!("want SelfDifference, got {other:?}"),
        }
        match parse("foo(1-2)") {
            Err(Error::UnknownSymbol(s)) => assert_eq!(s, "foo"),
            other => panic!("want UnknownSymbol, got {other:?}"),
        }
        match parse("wp(1-2)+") {
            Err(Error::SyntaxError { offset, .. }) => assert_eq!(offset, 8),
            other => panic!("want SyntaxError, got {other:?}"),
        }
        match parse("wp(0-2)") {
            Err(Error::SyntaxError { .. }) => {}
            other => panic!("want SyntaxError for 0 index, got {other:?}"),
        }
    }

    #[test]
    fn whitespace_insignificant() {
        let a = parse("wp(1-2) * Z(1-3)  + 2").unwrap();
        let b = parse("wp(1-2)*Z(1-3)+2").unwrap();
        assert_eq!(a, b);
    }
}
