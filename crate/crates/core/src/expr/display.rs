//! Printing in a form the parser reads back to the same tree.

use core::fmt;

use super::{Expr, Var};

/// An expression paired with the state names used to print it.
pub struct Printed<'a> {
    expr: &'a Expr,
    names: &'a [&'a str],
}

impl Expr {
    pub fn display<'a>(&'a self, names: &'a [&'a str]) -> Printed<'a> {
        Printed { expr: self, names }
    }
}

fn number(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    if libm::trunc(v) == v && libm::fabs(v) < 1e15 {
        write!(f, "{}", v as i64)
    } else {
        write!(f, "{v:?}")
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, names: &[&str]) -> fmt::Result {
    match e {
        Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
            f.write_str("(-")?;
            number(f, -*c)?;
            f.write_str(")")
        }
        Expr::Const(c) => number(f, *c),
        Expr::Var(Var::Time) => f.write_str("t"),
        Expr::Var(Var::State(i)) => match names.get(*i) {
            Some(n) => f.write_str(n),
            None => write!(f, "x{}", i + 1),
        },
        Expr::Neg(a) => {
            f.write_str("(-")?;
            write_expr(f, a, names)?;
            f.write_str(")")
        }
        Expr::Add(a, b) => binary(f, a, " + ", b, names),
        Expr::Sub(a, b) => binary(f, a, " - ", b, names),
        Expr::Mul(a, b) => binary(f, a, " * ", b, names),
        Expr::Div(a, b) => binary(f, a, " / ", b, names),
        Expr::Pow(a, p) => {
            match **a {
                Expr::Var(_) => write_expr(f, a, names)?,
                Expr::Const(c) if c >= 0.0 => write_expr(f, a, names)?,
                _ => {
                    f.write_str("(")?;
                    write_expr(f, a, names)?;
                    f.write_str(")")?;
                }
            }
            if *p >= 0.0 {
                f.write_str("^")?;
                number(f, *p)
            } else {
                f.write_str("^(-")?;
                number(f, -*p)?;
                f.write_str(")")
            }
        }
        Expr::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_expr(f, a, names)?;
            f.write_str(")")
        }
    }
}

fn binary(f: &mut fmt::Formatter<'_>, a: &Expr, op: &str, b: &Expr, names: &[&str]) -> fmt::Result {
    f.write_str("(")?;
    write_expr(f, a, names)?;
    f.write_str(op)?;
    write_expr(f, b, names)?;
    f.write_str(")")
}

impl fmt::Display for Printed<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self.expr, self.names)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self, &[])
    }
}
