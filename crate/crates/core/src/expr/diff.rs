use super::{BinOp, Expr, Func, Var};

pub(super) fn diff(e: &Expr, v: Var) -> Expr {
    if !e.depends_on(v) {
        return Expr::zero();
    }
    match e {
        Expr::Num(_) => Expr::zero(),
        Expr::Var(w) => {
            if *w == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Neg(a) => Expr::neg(diff(a, v)),
        Expr::Bin { op, lhs, rhs, at } => {
            let (a, b) = (lhs.as_ref(), rhs.as_ref());
            let da = diff(a, v);
            let db = diff(b, v);
            match op {
                BinOp::Add => Expr::add(da, db),
                BinOp::Sub => Expr::sub(da, db),
                BinOp::Mul => Expr::add(Expr::mul(da, b.clone()), Expr::mul(a.clone(), db)),
                BinOp::Div => {
                    // a'/b - a b'/b^2, written so that b stays the only divisor
                    let first = Expr::div_at(da, b.clone(), *at);
                    if db.is_zero() {
                        return first;
                    }
                    let second = Expr::div_at(Expr::mul(a.clone(), db), Expr::mul(b.clone(), b.clone()), *at);
                    Expr::sub(first, second)
                }
                BinOp::Pow => {
                    if !b.depends_on(v) {
                        let reduced = Expr::sub(b.clone(), Expr::one());
                        let power = Expr::pow_at(a.clone(), reduced, *at);
                        Expr::mul(Expr::mul(b.clone(), power), da)
                    } else {
                        // d(a^b) = a^b (b' log a + b a'/a)
                        let log_a = Expr::call_at(Func::Log, a.clone(), *at);
                        let t1 = Expr::mul(db, log_a);
                        let t2 = Expr::div_at(Expr::mul(b.clone(), da), a.clone(), *at);
                        Expr::mul(e.clone(), Expr::add(t1, t2))
                    }
                }
            }
        }
        Expr::Call { func, arg, at } => {
            let a = arg.as_ref();
            let da = diff(a, v);
            let outer = match func {
                Func::Sin => Expr::call_at(Func::Cos, a.clone(), *at),
                Func::Cos => Expr::neg(Expr::call_at(Func::Sin, a.clone(), *at)),
                Func::Exp => e.clone(),
                Func::Log => return Expr::div_at(da, a.clone(), *at),
                Func::Sqrt => {
                    return Expr::div_at(da, Expr::mul(Expr::num(2.0), e.clone()), *at);
                }
                Func::Tanh => Expr::sub(Expr::one(), Expr::mul(e.clone(), e.clone())),
            };
            Expr::mul(outer, da)
        }
    }
}
