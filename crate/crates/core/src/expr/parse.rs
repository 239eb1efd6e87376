//! Recursive-descent parser.
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := unary (('*' | '/') unary)*
//! unary    := '-' unary | '+' unary | power
//! power    := atom ('^' exponent)?
//! exponent := '-' exponent | '+' exponent | atom      (must be variable-free)
//! atom     := number | ident | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus, so `-u^2` is `-(u^2)`.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;

use super::{Expr, ExprError, Func, Var};

pub fn parse(source: &str, state_names: &[&str]) -> Result<Expr, ExprError> {
    parse_with_params(source, state_names, &[])
}

/// Like [`parse`], but identifiers listed in `params` are replaced by their
/// constant values.
pub fn parse_with_params(
    source: &str,
    state_names: &[&str],
    params: &[(&str, f64)],
) -> Result<Expr, ExprError> {
    let mut p = Parser { src: source.as_bytes(), pos: 0, states: state_names, params };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.syntax(format!("unexpected `{}`", p.src[p.pos] as char)));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    states: &'a [&'a str],
    params: &'a [(&'a str, f64)],
}

impl Parser<'_> {
    fn syntax(&self, message: String) -> ExprError {
        ExprError::Syntax { offset: self.pos, message }
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

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            Ok(negate(self.unary()?))
        } else if self.eat(b'+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        self.skip_ws();
        let at = self.pos;
        let e = self.exponent()?;
        if !e.is_constant() {
            return Err(ExprError::VariableExponent { offset: at });
        }
        let p = e.eval(0.0, &[]).map_err(|_| ExprError::Syntax {
            offset: at,
            message: "exponent does not evaluate to a real constant".to_owned(),
        })?;
        Ok(Expr::Pow(Box::new(base), p))
    }

    fn exponent(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            Ok(negate(self.exponent()?))
        } else if self.eat(b'+') {
            self.exponent()
        } else {
            self.atom()
        }
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input".to_owned())),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected `)`".to_owned()));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(c) => Err(self.syntax(format!("unexpected `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && (s[i].is_ascii_digit() || s[i] == b'.') {
            i += 1;
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
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
        let text = core::str::from_utf8(&s[start..i]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) => {
                self.pos = i;
                Ok(Expr::Const(v))
            }
            Err(_) => Err(ExprError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            }),
        }
    }

    fn ident(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && (s[i].is_ascii_alphanumeric() || s[i] == b'_') {
            i += 1;
        }
        let name = core::str::from_utf8(&s[start..i]).unwrap_or("");
        self.pos = i;
        if let Some(f) = Func::from_name(name) {
            if !self.eat(b'(') {
                return Err(self.syntax(format!("expected `(` after `{name}`")));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.syntax("expected `)`".to_owned()));
            }
            return Ok(Expr::Call(f, Box::new(arg)));
        }
        if name == "t" {
            return Ok(Expr::Var(Var::Time));
        }
        if let Some(i) = self.states.iter().position(|s| *s == name) {
            return Ok(Expr::Var(Var::State(i)));
        }
        if let Some((_, v)) = self.params.iter().find(|(p, _)| *p == name) {
            return Ok(Expr::Const(*v));
        }
        Err(ExprError::UnknownIdentifier { offset: start, name: name.to_owned() })
    }
}

/// Unary minus; a literal constant absorbs the sign.
fn negate(e: Expr) -> Expr {
    match e {
        Expr::Const(c) => Expr::Const(-c),
        e => Expr::Neg(Box::new(e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> Box<Expr> {
        Box::new(Expr::Const(v))
    }

    fn s(i: usize) -> Box<Expr> {
        Box::new(Expr::state(i))
    }

    #[test]
    fn painleve_rhs() {
        let e = parse("6*u^2 + t", &["u", "v"]).unwrap();
        let want = Expr::Add(
            Box::new(Expr::Mul(c(6.0), Box::new(Expr::Pow(s(0), 2.0)))),
            Box::new(Expr::time()),
        );
        assert_eq!(e, want);
    }

    #[test]
    fn zero() {
        assert_eq!(parse("0", &[]).unwrap(), Expr::Const(0.0));
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let e = parse("-u^2", &["u"]).unwrap();
        assert_eq!(e, Expr::Neg(Box::new(Expr::Pow(s(0), 2.0))));
        assert_eq!(e.eval(0.0, &[3.0]).unwrap(), -9.0);
    }

    #[test]
    fn exponent_forms() {
        let params = [("m", -1.0)];
        for src in ["u^-2", "u^(-2)", "u^(1-m-4)", "u^-(2)"] {
            let e = parse_with_params(src, &["u"], &params).unwrap();
            assert_eq!(e, Expr::Pow(s(0), -2.0), "{src}");
        }
        let e = parse_with_params("u^(1-m)", &["u"], &params).unwrap();
        assert_eq!(e, Expr::Pow(s(0), 2.0));
    }

    #[test]
    fn scientific_numbers() {
        assert_eq!(parse("1.5e-3", &[]).unwrap(), Expr::Const(1.5e-3));
        assert_eq!(parse("2E+2", &[]).unwrap(), Expr::Const(200.0));
    }

    #[test]
    fn errors_carry_offsets() {
        assert_eq!(
            parse("u + w", &["u"]),
            Err(ExprError::UnknownIdentifier { offset: 4, name: "w".into() })
        );
        assert_eq!(parse("u^t", &["u"]), Err(ExprError::VariableExponent { offset: 2 }));
        assert_eq!(parse("u^(v+1)", &["u", "v"]), Err(ExprError::VariableExponent { offset: 2 }));
        assert!(matches!(parse("(u", &["u"]), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("u * ", &["u"]), Err(ExprError::Syntax { offset: 4, .. })));
        assert!(matches!(parse("u v", &["u", "v"]), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("sin u", &["u"]), Err(ExprError::Syntax { .. })));
    }

    #[test]
    fn functions() {
        let e = parse("exp(log(u)) + sqrt(abs(-4))", &["u"]).unwrap();
        assert!((e.eval(0.0, &[2.5]).unwrap() - 4.5).abs() < 1e-14);
    }
}
