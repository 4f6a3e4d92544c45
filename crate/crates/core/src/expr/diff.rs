use super::{Expr, Func, Node, Number, Symbol};

impl Expr {
    /// Partial derivative with respect to `v`.
    pub fn diff(&self, v: &Symbol) -> Expr {
        if !self.depends_on(v) {
            return Expr::zero();
        }
        match self.kind() {
            Node::Num(_) => Expr::zero(),
            Node::Sym(s) => {
                if s == v {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Add(ts) => Expr::sum(ts.iter().map(|t| t.diff(v))),
            Node::Mul(fs) => {
                let mut terms = Vec::new();
                for (i, f) in fs.iter().enumerate() {
                    let df = f.diff(v);
                    if df.is_zero() {
                        continue;
                    }
                    let mut factors = fs.clone();
                    factors[i] = df;
                    terms.push(Expr::product(factors));
                }
                Expr::sum(terms)
            }
            Node::Pow(b, e) => {
                let db = b.diff(v);
                Expr::product([Expr::num(e.clone()), b.pow(&e.sub(&Number::one())), db])
            }
            Node::Func(f, a) => {
                let da = a.diff(v);
                let outer = match f {
                    Func::Sin => a.cos(),
                    Func::Cos => -a.sin(),
                    Func::Exp => self.clone(),
                    Func::Log => a.recip(),
                };
                outer * da
            }
        }
    }

    pub fn diff_name(&self, v: &str) -> Expr {
        self.diff(&Symbol::new(v))
    }
}
