use super::{add, call, div, mul, neg, pow, sub, Expr, Func, Var};

impl Expr {
    /// Symbolic partial derivative with respect to `v`.
    pub fn diff(&self, v: Var) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(w) => Expr::Const(if *w == v { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(v)),
            Expr::Add(a, b) => add(a.diff(v), b.diff(v)),
            Expr::Sub(a, b) => sub(a.diff(v), b.diff(v)),
            Expr::Mul(a, b) => add(
                mul(a.diff(v), (**b).clone()),
                mul((**a).clone(), b.diff(v)),
            ),
            Expr::Div(a, b) => {
                let da = a.diff(v);
                let db = b.diff(v);
                if db.is_zero() {
                    div(da, (**b).clone())
                } else {
                    div(
                        sub(mul(da, (**b).clone()), mul((**a).clone(), db)),
                        pow((**b).clone(), 2.0),
                    )
                }
            }
            Expr::Pow(a, p) => {
                let da = a.diff(v);
                if da.is_zero() {
                    return Expr::Const(0.0);
                }
                mul(mul(Expr::Const(*p), pow((**a).clone(), p - 1.0)), da)
            }
            Expr::Call(f, a) => {
                let da = a.diff(v);
                if da.is_zero() {
                    return Expr::Const(0.0);
                }
                let a = (**a).clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, a),
                    Func::Cos => neg(call(Func::Sin, a)),
                    Func::Exp => call(Func::Exp, a),
                    Func::Log => div(Expr::Const(1.0), a),
                    Func::Sqrt => div(Expr::Const(0.5), call(Func::Sqrt, a)),
                    Func::Abs => call(Func::Sign, a),
                    Func::Sign => return Expr::Const(0.0),
                };
                mul(outer, da)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse, parse_with_params};
    use super::*;

    #[test]
    fn power_rule() {
        let e = parse("6*u^2 + t", &["u", "v"]).unwrap();
        let d = e.diff(Var::State(0));
        for u in [-1.5, 0.0, 2.0] {
            assert_eq!(d.eval(0.3, &[u, 7.0]).unwrap(), 12.0 * u);
        }
        assert_eq!(e.diff(Var::Time), Expr::Const(1.0));
    }

    #[test]
    fn parametrised_power() {
        let e = parse_with_params("u^(1-m)*v", &["u", "v"], &[("m", -1.0)]).unwrap();
        let d = e.diff(Var::State(0));
        assert_eq!(d.eval(0.0, &[1.5, 3.0]).unwrap(), 2.0 * 1.5 * 3.0);
    }

    #[test]
    fn abs_derivative_at_zero_is_zero() {
        let e = parse("abs(u)", &["u"]).unwrap();
        let d = e.diff(Var::State(0));
        assert_eq!(d.eval(0.0, &[0.0]).unwrap(), 0.0);
        assert_eq!(d.eval(0.0, &[-2.0]).unwrap(), -1.0);
    }

    #[test]
    fn constant_subtrees_vanish() {
        let e = parse("sin(t)*3 + u", &["u"]).unwrap();
        assert_eq!(e.diff(Var::State(0)), Expr::Const(1.0));
    }
}
