//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := atom ('^' int)?
//! atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')' | '-' atom
//! ```
//!
//! `int` may carry a leading `-`. Every built-in function takes exactly one
//! argument; extra arguments are a parse error, as is an unknown function name.

use std::fmt;

use thiserror::Error;

use super::ast::{Expr, Func};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ParseError {
    /// Byte offset into the input.
    pub offset: usize,
    pub expected: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at byte {}: expected {}", self.offset, self.expected)
    }
}

pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("end of input or operator"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, expected: &str) -> ParseError {
        ParseError { offset: self.pos.min(self.src.len()), expected: expected.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.term()?;
                lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.factor()?;
                lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'/') {
                let rhs = self.factor()?;
                lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let k = self.integer()?;
            return Ok(Expr::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<i32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.src.get(self.pos) == Some(&b'-') {
            self.pos += 1;
        }
        let digits = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits {
            self.pos = start;
            return Err(self.error("integer exponent"));
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        text.parse::<i32>().map_err(|_| ParseError {
            offset: start,
            expected: "integer exponent within 32-bit range".into(),
        })
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("')'"));
                }
                Ok(e)
            }
            Some(b'-') => {
                self.pos += 1;
                let a = self.atom()?;
                Ok(Expr::Neg(Box::new(a)))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident_or_call(),
            _ => Err(self.error("number, identifier, '(' or '-'")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && s[i].is_ascii_digit() {
            i += 1;
        }
        if i < s.len() && s[i] == b'.' {
            i += 1;
            while i < s.len() && s[i].is_ascii_digit() {
                i += 1;
            }
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            let exp_digits = j;
            while j < s.len() && s[j].is_ascii_digit() {
                j += 1;
            }
            if j > exp_digits {
                i = j;
            }
        }
        let text = std::str::from_utf8(&s[start..i]).expect("ascii number");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.pos = i;
                Ok(Expr::Num(v))
            }
            _ => Err(ParseError { offset: start, expected: "finite number".into() }),
        }
    }

    fn ident_or_call(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii identifier");
        if self.peek() != Some(b'(') {
            return Ok(Expr::Var(name.to_string()));
        }
        let func = Func::from_name(name).ok_or_else(|| ParseError {
            offset: start,
            expected: "one of sin, cos, exp, log, sqrt, abs, sgn".into(),
        })?;
        self.pos += 1;
        let arg = self.expr()?;
        if self.peek() == Some(b',') {
            return Err(self.error("')' (functions take one argument)"));
        }
        if !self.eat(b')') {
            return Err(self.error("')'"));
        }
        Ok(Expr::Call(func, Box::new(arg)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Box<Expr> {
        Box::new(Expr::var(n))
    }

    #[test]
    fn precedence() {
        let e = parse("x + y*z").unwrap();
        assert_eq!(e, Expr::Add(v("x"), Box::new(Expr::Mul(v("y"), v("z")))));
    }

    #[test]
    fn left_associative() {
        let e = parse("a - b - c").unwrap();
        assert_eq!(e, Expr::Sub(Box::new(Expr::Sub(v("a"), v("b"))), v("c")));
    }

    #[test]
    fn unary_minus_binds_tighter_than_power() {
        assert_eq!(parse("-x^2").unwrap(), Expr::pow(Expr::Neg(v("x")), 2));
    }

    #[test]
    fn negative_exponent() {
        assert_eq!(parse("s^-1").unwrap(), Expr::pow(Expr::var("s"), -1));
    }

    #[test]
    fn scientific_literal() {
        assert_eq!(parse("1.5e-3").unwrap(), Expr::Num(1.5e-3));
    }

    #[test]
    fn unknown_function_rejected() {
        let err = parse("tan(x)").unwrap_err();
        assert_eq!(err.offset, 0);
    }

    #[test]
    fn extra_argument_rejected() {
        let err = parse("sin(x, y)").unwrap_err();
        assert_eq!(err.offset, 5);
    }

    #[test]
    fn error_offsets() {
        assert_eq!(parse("x + ").unwrap_err().offset, 4);
        assert_eq!(parse("(x").unwrap_err().offset, 2);
        assert_eq!(parse("x^y").unwrap_err().offset, 2);
        assert_eq!(parse("x y").unwrap_err().offset, 2);
        assert_eq!(parse("").unwrap_err().offset, 0);
    }

    #[test]
    fn whitespace_insensitive() {
        assert_eq!(parse(" sin ( p ) ^ 2 ").unwrap(), parse("sin(p)^2").unwrap());
    }

    #[test]
    fn printer_round_trip_samples() {
        for text in [
            "a - (b - c)",
            "a/(b*c)",
            "-(x + 1)*y",
            "(x^2)^3",
            "-sin(x)^2",
            "2 - -x",
            "1/(t + 1)",
            "sgn(s)*abs(s)^-1",
        ] {
            let e = parse(text).unwrap();
            assert_eq!(parse(&e.to_string()).unwrap(), e, "{text} -> {e}");
        }
    }
}
