//! A small elementary-function expression language.
//!
//! Expressions are built over the time symbol `t`, a fixed list of state
//! variables, real constants, `+ - * /`, powers with constant exponents, and
//! the functions `sin cos exp log sqrt abs sign`. Parsing resolves names to
//! [`Var`]s up front, so evaluation is a plain tree walk.

mod diff;
mod display;
mod parse;

use alloc::boxed::Box;
use alloc::string::String;

pub use parse::{parse, parse_with_params};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("exponent at byte {offset} depends on a variable")]
    VariableExponent { offset: usize },
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("division by zero")]
    DivisionByZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    Time,
    State(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    /// Derivative of `abs`; `sign(0) = 0`.
    Sign,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
        Func::Sign,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    fn apply(self, x: f64) -> Result<f64, ExprError> {
        Ok(match self {
            Func::Sin => libm::sin(x),
            Func::Cos => libm::cos(x),
            Func::Exp => libm::exp(x),
            Func::Log => {
                if x <= 0.0 {
                    return Err(ExprError::Domain("log of a nonpositive value"));
                }
                libm::log(x)
            }
            Func::Sqrt => {
                if x < 0.0 {
                    return Err(ExprError::Domain("sqrt of a negative value"));
                }
                libm::sqrt(x)
            }
            Func::Abs => libm::fabs(x),
            Func::Sign => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
    Call(Func, Box<Expr>),
}

/// Real power with the DSL's domain rules: integer exponents go through
/// `powi` and accept any base; fractional exponents need a nonnegative base.
pub fn real_pow(base: f64, p: f64) -> Result<f64, ExprError> {
    if p == 0.0 {
        return Ok(1.0);
    }
    if base == 0.0 {
        return if p > 0.0 { Ok(0.0) } else { Err(ExprError::DivisionByZero) };
    }
    if libm::trunc(p) == p && libm::fabs(p) <= i32::MAX as f64 {
        return Ok(libm::pow(base, p));
    }
    if base < 0.0 {
        return Err(ExprError::Domain("fractional power of a negative value"));
    }
    Ok(libm::pow(base, p))
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn state(i: usize) -> Expr {
        Expr::Var(Var::State(i))
    }

    pub fn time() -> Expr {
        Expr::Var(Var::Time)
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self {
            Expr::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    /// Evaluate at time `t` and state `x`.
    pub fn eval(&self, t: f64, x: &[f64]) -> Result<f64, ExprError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(Var::Time) => t,
            Expr::Var(Var::State(i)) => x[*i],
            Expr::Neg(a) => -a.eval(t, x)?,
            Expr::Add(a, b) => a.eval(t, x)? + b.eval(t, x)?,
            Expr::Sub(a, b) => a.eval(t, x)? - b.eval(t, x)?,
            Expr::Mul(a, b) => a.eval(t, x)? * b.eval(t, x)?,
            Expr::Div(a, b) => {
                let den = b.eval(t, x)?;
                if den == 0.0 {
                    return Err(ExprError::DivisionByZero);
                }
                a.eval(t, x)? / den
            }
            Expr::Pow(a, p) => real_pow(a.eval(t, x)?, *p)?,
            Expr::Call(f, a) => f.apply(a.eval(t, x)?)?,
        })
    }

    /// True if the expression mentions `v`.
    pub fn depends_on(&self, v: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.depends_on(v),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.depends_on(v) || b.depends_on(v)
            }
        }
    }

    /// True if the expression mentions no variable at all.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var(_) => false,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.is_constant(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }

    /// Replace every variable by the expression `map` returns for it.
    pub fn substitute(&self, map: &impl Fn(Var) -> Expr) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(v) => map(*v),
            Expr::Neg(a) => neg(a.substitute(map)),
            Expr::Add(a, b) => add(a.substitute(map), b.substitute(map)),
            Expr::Sub(a, b) => sub(a.substitute(map), b.substitute(map)),
            Expr::Mul(a, b) => mul(a.substitute(map), b.substitute(map)),
            Expr::Div(a, b) => div(a.substitute(map), b.substitute(map)),
            Expr::Pow(a, p) => pow(a.substitute(map), *p),
            Expr::Call(f, a) => call(*f, a.substitute(map)),
        }
    }

    /// Largest state index mentioned, if any.
    pub fn max_state_index(&self) -> Option<usize> {
        match self {
            Expr::Const(_) | Expr::Var(Var::Time) => None,
            Expr::Var(Var::State(i)) => Some(*i),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.max_state_index(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.max_state_index().max(b.max_state_index())
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => 1 + a.node_count(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.node_count() + b.node_count()
            }
        }
    }
}

// Folding constructors. Only trivially safe rewrites: constant arithmetic,
// additive/multiplicative identities, and `0 * e = 0`.

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Expr::Const(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        (Some(x), _) if x == -1.0 => neg(b),
        (_, Some(y)) if y == -1.0 => neg(a),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
        (Some(x), _) if x == 0.0 => Expr::Const(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub fn pow(a: Expr, p: f64) -> Expr {
    if p == 0.0 {
        return Expr::Const(1.0);
    }
    if p == 1.0 {
        return a;
    }
    if let Some(c) = a.as_const() {
        if let Ok(v) = real_pow(c, p) {
            return Expr::Const(v);
        }
    }
    match a {
        Expr::Pow(inner, q) if libm::trunc(p) == p => pow(*inner, p * q),
        a => Expr::Pow(Box::new(a), p),
    }
}

pub fn call(f: Func, a: Expr) -> Expr {
    if let Some(c) = a.as_const() {
        if let Ok(v) = f.apply(c) {
            return Expr::Const(v);
        }
    }
    Expr::Call(f, Box::new(a))
}

impl core::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        add(self, rhs)
    }
}

impl core::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        sub(self, rhs)
    }
}

impl core::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        mul(self, rhs)
    }
}

impl core::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        div(self, rhs)
    }
}

impl core::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        neg(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folding_identities() {
        let u = Expr::state(0);
        assert_eq!(mul(Expr::Const(0.0), u.clone()), Expr::Const(0.0));
        assert_eq!(add(u.clone(), Expr::Const(0.0)), u);
        assert_eq!(pow(u.clone(), 1.0), u);
        assert_eq!(pow(Expr::Const(2.0), 3.0), Expr::Const(8.0));
    }

    #[test]
    fn pow_domain_rules() {
        assert_eq!(real_pow(-2.0, 3.0), Ok(-8.0));
        assert_eq!(real_pow(-2.0, -1.0), Ok(-0.5));
        assert!(matches!(real_pow(-1.0, 1.5), Err(ExprError::Domain(_))));
        assert_eq!(real_pow(0.0, 1.5), Ok(0.0));
        assert_eq!(real_pow(0.0, -2.0), Err(ExprError::DivisionByZero));
    }

    #[test]
    fn fractional_power_of_negative_is_domain_error() {
        let e = parse("u^(1.5)", &["u"]).unwrap();
        assert!(matches!(e.eval(0.0, &[-1.0]), Err(ExprError::Domain(_))));
    }

    #[test]
    fn eval_examples() {
        let e = parse("6*u^2 + t", &["u", "v"]).unwrap();
        assert_eq!(e.eval(0.0, &[1.0, 0.0]).unwrap(), 6.0);
        let e = parse("sin(t)", &["u"]).unwrap();
        assert_eq!(e.eval(0.0, &[3.0]).unwrap(), 0.0);
        let e = parse("-u1^3 - 2*u1*u2^2*sin(t)", &["u1", "u2"]).unwrap();
        let v = e.eval(core::f64::consts::FRAC_PI_2, &[1.0, 1.0]).unwrap();
        assert!((v + 3.0).abs() < 1e-15);
    }

    #[test]
    fn division_by_zero() {
        let e = parse("1/u", &["u"]).unwrap();
        assert_eq!(e.eval(0.0, &[0.0]), Err(ExprError::DivisionByZero));
    }

    #[test]
    fn log_and_sqrt_domains() {
        let e = parse("log(u)", &["u"]).unwrap();
        assert!(e.eval(0.0, &[0.0]).is_err());
        let e = parse("sqrt(u)", &["u"]).unwrap();
        assert_eq!(e.eval(0.0, &[0.0]), Ok(0.0));
        assert!(e.eval(0.0, &[-1e-300]).is_err());
    }

    #[test]
    fn substitute_folds() {
        let e = parse("u*v + t", &["u", "v"]).unwrap();
        let s = e.substitute(&|v| match v {
            Var::State(0) => Expr::Const(0.0),
            other => Expr::Var(other),
        });
        assert_eq!(s, Expr::time());
    }
}
