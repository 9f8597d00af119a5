//! Recursive-descent parser for defining-function expressions.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = ("+" | "-") unary | power ;
//! power   = atom [ "^" exponent ] ;
//! exponent= [ "-" | "+" ] integer | "(" [ "-" | "+" ] integer ")" ;
//! atom    = number | "z1" | "z2" | "zbar1" | "zbar2" | "i"
//!         | "conj" "(" expr ")" | "(" expr ")" ;
//! ```
//!
//! Positions in errors are 0-based byte offsets into the input.

use num_complex::Complex64;

use super::{SymError, SymExpr, Var};

pub fn parse_expr(text: &str) -> Result<SymExpr, SymError> {
    let mut p = Parser { s: text.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.s.len() {
        return Err(p.err(format!("unexpected `{}`", p.s[p.pos] as char)));
    }
    Ok(e)
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: impl Into<String>) -> SymError {
        SymError::Syntax { pos: self.pos, msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), SymError> {
        if self.eat(c) {
            Ok(())
        } else if self.pos >= self.s.len() {
            Err(self.err(format!("expected `{}`, found end of input", c as char)))
        } else {
            Err(self.err(format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<SymExpr, SymError> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat(b'+') {
                terms.push(self.term()?);
            } else if self.eat(b'-') {
                terms.push(-self.term()?);
            } else {
                break;
            }
        }
        Ok(SymExpr::add_all(terms))
    }

    fn term(&mut self) -> Result<SymExpr, SymError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(b'*') {
                acc = &acc * &self.unary()?;
            } else if self.eat(b'/') {
                acc = acc.div(&self.unary()?);
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<SymExpr, SymError> {
        if self.eat(b'-') {
            return Ok(-self.unary()?);
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<SymExpr, SymError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let n = self.exponent()?;
            return Ok(base.powi(n));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i32, SymError> {
        let paren = self.eat(b'(');
        let neg = if self.eat(b'-') {
            true
        } else {
            self.eat(b'+');
            false
        };
        self.skip_ws();
        let start = self.pos;
        let text = self.number_text();
        if text.is_empty() {
            return Err(self.err("expected integer exponent"));
        }
        if text.bytes().any(|b| !b.is_ascii_digit()) {
            return Err(SymError::NonIntegerExponent { pos: start });
        }
        let n: i32 = text
            .parse()
            .map_err(|_| SymError::Syntax { pos: start, msg: "exponent too large".into() })?;
        if paren {
            self.expect(b')')?;
        }
        Ok(if neg { -n } else { n })
    }

    fn number_text(&mut self) -> String {
        let start = self.pos;
        let s = self.s;
        let mut i = self.pos;
        while i < s.len() && (s[i].is_ascii_digit() || s[i] == b'.') {
            i += 1;
        }
        if i > start && i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        self.pos = i;
        String::from_utf8_lossy(&s[start..i]).into_owned()
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.s.len() && (self.s[self.pos].is_ascii_alphanumeric() || self.s[self.pos] == b'_') {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.s[start..self.pos]).into_owned()
    }

    fn atom(&mut self) -> Result<SymExpr, SymError> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                let text = self.number_text();
                let v: f64 = text
                    .parse()
                    .map_err(|_| SymError::Syntax { pos: start, msg: format!("bad number `{text}`") })?;
                Ok(SymExpr::real(v))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                let name = self.ident();
                match name.as_str() {
                    "z1" => Ok(SymExpr::var(Var::Z1)),
                    "z2" => Ok(SymExpr::var(Var::Z2)),
                    "zbar1" => Ok(SymExpr::var(Var::Zbar1)),
                    "zbar2" => Ok(SymExpr::var(Var::Zbar2)),
                    "i" => Ok(SymExpr::constant(Complex64::new(0.0, 1.0))),
                    "conj" => {
                        self.expect(b'(')?;
                        let e = self.expr()?;
                        self.expect(b')')?;
                        Ok(e.conj())
                    }
                    _ => Err(SymError::Syntax { pos: start, msg: format!("unknown identifier `{name}`") }),
                }
            }
            Some(c) => Err(self.err(format!("unexpected `{}`", c as char))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point::C2;

    fn at(z1: (f64, f64), z2: (f64, f64)) -> C2 {
        C2::new(Complex64::new(z1.0, z1.1), Complex64::new(z2.0, z2.1))
    }

    #[test]
    fn ball_and_egg() {
        let ball = parse_expr("z1*conj(z1)+z2*conj(z2)-1").unwrap();
        assert_eq!(ball.eval(&at((0.0, 0.0), (1.0, 0.0))).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(ball.eval(&C2::ZERO).unwrap(), Complex64::new(-1.0, 0.0));
        let egg = parse_expr("z1*conj(z1)+(z2*conj(z2))^2-1").unwrap();
        assert_eq!(egg.eval(&at((1.0, 0.0), (0.0, 0.0))).unwrap(), Complex64::new(0.0, 0.0));
        let p = at((0.3, -0.2), (0.5, 0.4));
        let direct = p.0[0].norm_sqr() + p.0[1].norm_sqr().powi(2) - 1.0;
        assert!((egg.eval(&p).unwrap().re - direct).abs() < 1e-15);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        assert_eq!(
            parse_expr("z1/(").unwrap_err(),
            SymError::Syntax { pos: 4, msg: "unexpected end of input".into() }
        );
        assert!(matches!(parse_expr("z1^1.5"), Err(SymError::NonIntegerExponent { pos: 3 })));
        assert!(matches!(parse_expr("z3"), Err(SymError::Syntax { pos: 0, .. })));
        assert!(matches!(parse_expr("z1 z2"), Err(SymError::Syntax { pos: 3, .. })));
    }

    #[test]
    fn precedence_and_signs() {
        let e = parse_expr("-z1^2 + 2*i*z2 - 3/4").unwrap();
        let p = at((0.5, 0.1), (-0.3, 0.7));
        let i = Complex64::new(0.0, 1.0);
        let direct = -(p.0[0] * p.0[0]) + 2.0 * i * p.0[1] - 0.75;
        assert!((e.eval(&p).unwrap() - direct).norm() < 1e-15);
        let e = parse_expr("z1^(-2) + z2^-1").unwrap();
        let direct = p.0[0].powi(-2) + p.0[1].inv();
        assert!((e.eval(&p).unwrap() - direct).norm() < 1e-12);
        let e = parse_expr("1e-1*z1 + 2.5E+1").unwrap();
        assert!((e.eval(&p).unwrap() - (0.1 * p.0[0] + 25.0)).norm() < 1e-14);
    }

    #[test]
    fn display_reparses() {
        let src = "z1*conj(z1) + 0.1*(z2^2 + conj(z2)^2)*z2*conj(z2) - (1+2*i)/(z1 - 3)";
        let e = parse_expr(src).unwrap();
        let back = parse_expr(&e.to_string()).unwrap();
        let p = at((0.25, 0.5), (-0.3, 0.2));
        assert!((e.eval(&p).unwrap() - back.eval(&p).unwrap()).norm() < 1e-14);
    }
}
