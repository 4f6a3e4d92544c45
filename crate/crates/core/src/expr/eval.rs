//! Floating-point evaluation, plus a compiled form for repeated sampling.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use super::{Expr, Func, Node, Symbol};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unbound symbol `{0}`")]
    Unbound(String),
}

pub trait Bindings {
    fn value(&self, s: &Symbol) -> Option<f64>;
}

impl Bindings for BTreeMap<Symbol, f64> {
    fn value(&self, s: &Symbol) -> Option<f64> {
        self.get(s).copied()
    }
}

impl Bindings for HashMap<Symbol, f64> {
    fn value(&self, s: &Symbol) -> Option<f64> {
        self.get(s).copied()
    }
}

impl Bindings for [(Symbol, f64)] {
    fn value(&self, s: &Symbol) -> Option<f64> {
        self.iter().find(|(k, _)| k == s).map(|(_, v)| *v)
    }
}

fn pow_f(b: f64, e: f64, e_int: Option<i64>) -> Result<f64, EvalError> {
    if b == 0.0 && e < 0.0 {
        return Err(EvalError::Domain("division by zero".into()));
    }
    match e_int {
        Some(n) if n.unsigned_abs() <= i32::MAX as u64 => Ok(b.powi(n as i32)),
        _ => {
            if b < 0.0 {
                Err(EvalError::Domain(format!("fractional power of negative value {b}")))
            } else {
                Ok(b.powf(e))
            }
        }
    }
}

fn apply(f: Func, a: f64) -> Result<f64, EvalError> {
    match f {
        Func::Sin => Ok(a.sin()),
        Func::Cos => Ok(a.cos()),
        Func::Exp => Ok(a.exp()),
        Func::Log => {
            if a <= 0.0 {
                Err(EvalError::Domain(format!("log of non-positive value {a}")))
            } else {
                Ok(a.ln())
            }
        }
    }
}

fn finite(v: f64) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::Domain("non-finite value".into()))
    }
}

impl Expr {
    pub fn eval<B: Bindings + ?Sized>(&self, env: &B) -> Result<f64, EvalError> {
        let v = match self.kind() {
            Node::Num(n) => n.to_f64(),
            Node::Sym(s) => env.value(s).ok_or_else(|| EvalError::Unbound(s.name().to_string()))?,
            Node::Add(ts) => {
                let mut acc = 0.0;
                for t in ts {
                    acc += t.eval(env)?;
                }
                acc
            }
            Node::Mul(fs) => {
                let mut acc = 1.0;
                for f in fs {
                    acc *= f.eval(env)?;
                }
                acc
            }
            Node::Pow(b, e) => pow_f(b.eval(env)?, e.to_f64(), e.as_i64())?,
            Node::Func(f, a) => apply(*f, a.eval(env)?)?,
        };
        finite(v)
    }
}

#[derive(Debug, Clone)]
enum Op {
    Const(f64),
    Var(usize),
    Add(Vec<usize>),
    Mul(Vec<usize>),
    Pow(usize, f64, Option<i64>),
    Func(Func, usize),
}

/// Straight-line program evaluating several expressions with shared subterms.
#[derive(Debug, Clone)]
pub struct Compiled {
    ops: Vec<Op>,
    outputs: Vec<usize>,
    inputs: Vec<Symbol>,
}

impl Compiled {
    /// Compiles `exprs` with the given input order; any other symbol is an error.
    pub fn new(exprs: &[Expr], inputs: &[Symbol]) -> Result<Compiled, EvalError> {
        let index: HashMap<&Symbol, usize> = inputs.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let mut c = Compiled { ops: Vec::new(), outputs: Vec::new(), inputs: inputs.to_vec() };
        let mut memo: HashMap<usize, usize> = HashMap::new();
        let mut by_value: HashMap<Expr, usize> = HashMap::new();
        for e in exprs {
            let r = c.emit(e, &index, &mut memo, &mut by_value)?;
            c.outputs.push(r);
        }
        Ok(c)
    }

    fn emit(
        &mut self,
        e: &Expr,
        index: &HashMap<&Symbol, usize>,
        memo: &mut HashMap<usize, usize>,
        by_value: &mut HashMap<Expr, usize>,
    ) -> Result<usize, EvalError> {
        if let Some(&r) = memo.get(&e.ptr_id()) {
            return Ok(r);
        }
        // Atoms repeat across separately built trees; share them by value.
        let atomic = matches!(e.kind(), Node::Sym(_) | Node::Func(..) | Node::Pow(..));
        if atomic {
            if let Some(&r) = by_value.get(e) {
                memo.insert(e.ptr_id(), r);
                return Ok(r);
            }
        }
        let op = match e.kind() {
            Node::Num(n) => Op::Const(n.to_f64()),
            Node::Sym(s) => Op::Var(*index.get(s).ok_or_else(|| EvalError::Unbound(s.name().to_string()))?),
            Node::Add(ts) => {
                let rs = ts.iter().map(|t| self.emit(t, index, memo, by_value)).collect::<Result<_, _>>()?;
                Op::Add(rs)
            }
            Node::Mul(fs) => {
                let rs = fs.iter().map(|f| self.emit(f, index, memo, by_value)).collect::<Result<_, _>>()?;
                Op::Mul(rs)
            }
            Node::Pow(b, x) => Op::Pow(self.emit(b, index, memo, by_value)?, x.to_f64(), x.as_i64()),
            Node::Func(f, a) => Op::Func(*f, self.emit(a, index, memo, by_value)?),
        };
        self.ops.push(op);
        let r = self.ops.len() - 1;
        memo.insert(e.ptr_id(), r);
        if atomic {
            by_value.insert(e.clone(), r);
        }
        Ok(r)
    }

    pub fn inputs(&self) -> &[Symbol] {
        &self.inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Evaluates all outputs at `point`, reusing `scratch` between calls.
    pub fn run_into(&self, point: &[f64], scratch: &mut Vec<f64>, out: &mut [f64]) -> Result<(), EvalError> {
        assert_eq!(point.len(), self.inputs.len(), "input arity");
        scratch.clear();
        scratch.reserve(self.ops.len());
        for op in &self.ops {
            let v = match op {
                Op::Const(c) => *c,
                Op::Var(i) => point[*i],
                Op::Add(rs) => rs.iter().map(|&r| scratch[r]).sum(),
                Op::Mul(rs) => rs.iter().map(|&r| scratch[r]).product(),
                Op::Pow(b, e, ei) => pow_f(scratch[*b], *e, *ei)?,
                Op::Func(f, a) => apply(*f, scratch[*a])?,
            };
            scratch.push(v);
        }
        for (o, &r) in out.iter_mut().zip(&self.outputs) {
            *o = finite(scratch[r])?;
        }
        Ok(())
    }

    pub fn run(&self, point: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut scratch = Vec::new();
        let mut out = vec![0.0; self.outputs.len()];
        self.run_into(point, &mut scratch, &mut out)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse, Alphabet};
    use super::*;

    #[test]
    fn eval_matches_compiled() {
        let a = Alphabet::new(["x", "y"]);
        let es: Vec<Expr> = ["x^2*sin(y) + 1/(1 + x^2)", "sqrt(x)*exp(-y)", "log(x + y)"]
            .iter()
            .map(|s| parse(s, &a).unwrap())
            .collect();
        let vars = [Symbol::new("x"), Symbol::new("y")];
        let c = Compiled::new(&es, &vars).unwrap();
        let pt = [0.7, 1.3];
        let env: Vec<(Symbol, f64)> = vars.iter().cloned().zip(pt).collect();
        let got = c.run(&pt).unwrap();
        for (e, g) in es.iter().zip(got) {
            assert!((e.eval(env.as_slice()).unwrap() - g).abs() < 1e-15);
        }
    }

    #[test]
    fn domain_errors() {
        let a = Alphabet::new(["x"]);
        let env = [(Symbol::new("x"), 0.0)];
        assert!(matches!(parse("log(x)", &a).unwrap().eval(env.as_slice()), Err(EvalError::Domain(_))));
        assert!(matches!(parse("1/x", &a).unwrap().eval(env.as_slice()), Err(EvalError::Domain(_))));
        let neg = [(Symbol::new("x"), -1.0)];
        assert!(matches!(parse("sqrt(x)", &a).unwrap().eval(neg.as_slice()), Err(EvalError::Domain(_))));
        assert!(matches!(parse("x", &a).unwrap().eval(&BTreeMap::new()), Err(EvalError::Unbound(_))));
    }
}
