//! Fiberwise homotopy operator and primitives for the vertical differential.
//!
//! Vertical forms live in the frame `Υ^1..Υ^r` dual to the fiber coordinate
//! fields, where the vertical differential is the de Rham differential in
//! `y` with `x` as a parameter. The scaling pullback is
//! `(Ψ_t^* ω)(x, y) = t^k ω(x, t y)` and the homotopy operator is
//! `(h ω)_{J} = ∫_0^1 t^{k-1} Σ_j y^j ω_{jJ}(x, t y) dt`.
//!
//! Coefficients that cannot be integrated in closed form are kept as
//! integrands in the reserved variable [`T_NAME`] and evaluated by adaptive
//! Simpson quadrature.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::cochain::{increasing_tuples, koszul, Form, Frame};
use crate::expr::{Compiled, EvalError, Expr, Node, Number, Sampler, Symbol, Verdict};
use crate::report::{CheckEntry, ValidationReport};

/// Integration variable of deferred integrals; not a legal user identifier.
pub const T_NAME: &str = "@t";

pub const QUADRATURE_TOL: f64 = 1e-10;
const MAX_DEPTH: usize = 48;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HomotopyError {
    #[error("quadrature failed to reach tolerance {tol:e}")]
    QuadratureFailure { tol: f64 },
    #[error("homotopy operator needs a form of positive degree")]
    DegreeZero,
    #[error("integrand already contains a deferred integral")]
    NestedIntegral,
    #[error("block is not closed under the vertical differential: {0}")]
    NotClosed(String),
    #[error("block has components outside bidegree ({p},{q})")]
    WrongBidegree { p: usize, q: usize },
    #[error("primitive has no closed form (coefficients are not polynomial in the fiber variables)")]
    NoClosedForm,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub fn t_symbol() -> Symbol {
    Symbol::new(T_NAME)
}

struct VerticalFrame<'a> {
    fibers: &'a [Symbol],
}

impl Frame for VerticalFrame<'_> {
    fn rank(&self) -> usize {
        self.fibers.len()
    }
    fn anchor_derivative(&self, i: usize, f: &Expr) -> Expr {
        f.diff(&self.fibers[i])
    }
    fn bracket(&self, _: usize, _: usize) -> Vec<(usize, Expr)> {
        Vec::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerticalForm {
    pub fibers: Vec<Symbol>,
    pub form: Form,
    /// Coefficients are integrands over `t ∈ [0, 1]` rather than values.
    pub deferred: bool,
}

impl VerticalForm {
    pub fn new(fibers: Vec<Symbol>, form: Form) -> Self {
        assert_eq!(fibers.len(), form.rank(), "vertical form rank");
        VerticalForm { fibers, form, deferred: false }
    }

    pub fn zero(fibers: Vec<Symbol>, degree: usize) -> Self {
        let r = fibers.len();
        VerticalForm::new(fibers, Form::zero(r, degree))
    }

    pub fn degree(&self) -> usize {
        self.form.degree()
    }

    /// Vertical differential; commutes with the deferred `t`-integral.
    pub fn d(&self) -> VerticalForm {
        let frame = VerticalFrame { fibers: &self.fibers };
        VerticalForm { fibers: self.fibers.clone(), form: koszul(&frame, &self.form), deferred: self.deferred }
    }

    pub fn add(&self, other: &VerticalForm) -> VerticalForm {
        VerticalForm { fibers: self.fibers.clone(), form: self.form.add(&other.form), deferred: self.deferred || other.deferred }
    }

    pub fn sub(&self, other: &VerticalForm) -> VerticalForm {
        VerticalForm { fibers: self.fibers.clone(), form: self.form.sub(&other.form), deferred: self.deferred || other.deferred }
    }

    fn scaling(&self, t: &Expr) -> BTreeMap<Symbol, Expr> {
        self.fibers.iter().map(|y| (y.clone(), t * &Expr::sym(y))).collect()
    }

    /// `t^k ω(x, t y)` with `t` an arbitrary expression.
    pub fn psi_star(&self, t: &Expr) -> Result<Form, HomotopyError> {
        if self.deferred {
            return Err(HomotopyError::NestedIntegral);
        }
        let map = self.scaling(t);
        let tk = t.powi(self.degree() as i64);
        Ok(self.form.map(|c| &tk * &c.subs(&map)))
    }

    /// `Ψ_0^*`: the restriction to the zero section in degree 0, zero otherwise.
    pub fn psi_zero(&self) -> Result<VerticalForm, HomotopyError> {
        if self.deferred {
            return Err(HomotopyError::NestedIntegral);
        }
        if self.degree() > 0 {
            return Ok(VerticalForm::zero(self.fibers.clone(), self.degree()));
        }
        let map = self.scaling(&Expr::zero());
        Ok(VerticalForm::new(self.fibers.clone(), self.form.map(|c| c.subs(&map))))
    }

    /// The homotopy operator; closed form when possible, deferred otherwise.
    pub fn h(&self) -> Result<VerticalForm, HomotopyError> {
        let k = self.degree();
        if k == 0 {
            return Err(HomotopyError::DegreeZero);
        }
        if self.deferred {
            return Err(HomotopyError::NestedIntegral);
        }
        let r = self.fibers.len();
        let t = Expr::sym(&t_symbol());
        let map = self.scaling(&t);
        let weight = t.powi(k as i64 - 1);
        let mut integrand = Form::zero(r, k - 1);
        for rest in increasing_tuples(r, k - 1) {
            let mut terms = Vec::new();
            for (j, y) in self.fibers.iter().enumerate() {
                let mut idx = vec![j];
                idx.extend(&rest);
                let c = self.form.get(&idx);
                if !c.is_zero() {
                    terms.push(&weight * &Expr::sym(y) * c.subs(&map));
                }
            }
            integrand.set(&rest, Expr::sum(terms));
        }
        let lazy = VerticalForm { fibers: self.fibers.clone(), form: integrand, deferred: true };
        Ok(lazy.integrate_exact().unwrap_or(lazy))
    }

    /// Carries out every deferred integral in closed form, if possible.
    pub fn integrate_exact(&self) -> Option<VerticalForm> {
        if !self.deferred {
            return Some(self.clone());
        }
        let t = t_symbol();
        let mut out = Form::zero(self.form.rank(), self.degree());
        for (idx, c) in self.form.components() {
            out.set(idx, integrate_unit(c, &t)?);
        }
        Some(VerticalForm::new(self.fibers.clone(), out))
    }

    /// Component values at a point (inputs laid out as `inputs`), by quadrature if deferred.
    pub fn eval_components(&self, inputs: &[Symbol], point: &[f64]) -> Result<Vec<(Vec<usize>, f64)>, HomotopyError> {
        let mut all_inputs = inputs.to_vec();
        all_inputs.push(t_symbol());
        let mut out = Vec::new();
        for (idx, c) in self.form.components() {
            let prog = Compiled::new(std::slice::from_ref(c), &all_inputs)?;
            let mut buf = point.to_vec();
            buf.push(1.0);
            let last = buf.len() - 1;
            let v = if self.deferred {
                simpson(
                    |t| {
                        let mut b = buf.clone();
                        b[last] = t;
                        Ok(prog.run(&b)?[0])
                    },
                    QUADRATURE_TOL,
                )?
            } else {
                prog.run(&buf)?[0]
            };
            out.push((idx.clone(), v));
        }
        Ok(out)
    }
}

/// `∫_0^1 e dt` for sums of terms `c · t^m` with `c` free of `t`.
pub fn integrate_unit(e: &Expr, t: &Symbol) -> Option<Expr> {
    let mut out = Vec::new();
    for term in e.terms() {
        let factors = match term.kind() {
            Node::Mul(fs) => fs.clone(),
            _ => vec![term.clone()],
        };
        let mut m: i64 = 0;
        let mut rest = Vec::new();
        for f in factors {
            match f.kind() {
                Node::Sym(s) if s == t => m += 1,
                Node::Pow(b, e) if matches!(b.kind(), Node::Sym(s) if s == t) => m += e.as_i64()?,
                _ if f.depends_on(t) => return None,
                _ => rest.push(f),
            }
        }
        if m < 0 {
            return None;
        }
        out.push(Expr::product(rest) * Expr::ratio(1, m + 1));
    }
    Some(Expr::sum(out))
}

/// Adaptive Simpson quadrature of `f` over `[0, 1]`.
pub fn simpson(f: impl Fn(f64) -> Result<f64, EvalError>, tol: f64) -> Result<f64, HomotopyError> {
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> Result<f64, EvalError>,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64, HomotopyError> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm)?, f(rm)?);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(HomotopyError::QuadratureFailure { tol });
        }
        Ok(rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)? + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
    }
    let (fa, fm, fb) = (f(0.0)?, f(0.5)?, f(1.0)?);
    // Split once up front so that a coincidental agreement on the coarsest grid cannot end the recursion.
    let (fl, fr) = (f(0.25)?, f(0.75)?);
    let left = (fa + 4.0 * fl + fm) / 12.0;
    let right = (fm + 4.0 * fr + fb) / 12.0;
    Ok(rec(&f, 0.0, 0.5, fa, fl, fm, left, tol / 2.0, MAX_DEPTH)? + rec(&f, 0.5, 1.0, fm, fr, fb, right, tol / 2.0, MAX_DEPTH)?)
}

/// `h(dω) + d(hω) − ω + Ψ_0^*ω`, which vanishes identically.
pub fn identity_residual(omega: &VerticalForm) -> Result<VerticalForm, HomotopyError> {
    let k = omega.degree();
    let h_d = omega.d().h()?;
    let d_h = if k == 0 { VerticalForm::zero(omega.fibers.clone(), 0) } else { omega.h()?.d() };
    Ok(h_d.add(&d_h).sub(omega).add(&omega.psi_zero()?))
}

/// Zero tests for every component of a vertical form, by quadrature if deferred.
pub fn vertical_verdicts(form: &VerticalForm, sampler: &Sampler, label: &str) -> Result<ValidationReport, HomotopyError> {
    let closed = form.integrate_exact();
    let mut rep = ValidationReport::new(label, sampler);
    if let Some(exact) = closed {
        let residuals = exact
            .form
            .dense()
            .into_iter()
            .map(|(idx, e)| (format!("{label}{}", fmt_idx(&idx)), e))
            .collect();
        rep.extend_residuals(sampler, residuals)?;
        return Ok(rep);
    }
    let inputs = sampler.inputs();
    let mut worst: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut first_bad: BTreeMap<Vec<usize>, (usize, f64)> = BTreeMap::new();
    let points = sampler.points();
    let mut used = 0;
    for (pi, p) in points.iter().enumerate() {
        let vals = match form.eval_components(&inputs, p) {
            Ok(v) => v,
            Err(HomotopyError::Eval(_)) => continue,
            Err(e) => return Err(e),
        };
        used += 1;
        for (idx, v) in vals {
            let w = worst.entry(idx.clone()).or_insert(0.0);
            *w = w.max(v.abs());
            if v.abs() > sampler.tol {
                first_bad.entry(idx).or_insert((pi, v));
            }
        }
    }
    if used == 0 {
        return Err(EvalError::Domain("no regular sample points".into()).into());
    }
    for (idx, _) in form.form.dense() {
        let max_abs = worst.get(&idx).copied().unwrap_or(0.0);
        let verdict = match first_bad.get(&idx) {
            Some(&(pi, value)) => Verdict::NonZero {
                witness: inputs.iter().zip(&points[pi]).map(|(s, v)| (s.name().to_string(), *v)).collect(),
                value,
                max_abs,
            },
            None if form.form.get(&idx).is_zero() => Verdict::ProvenZero,
            None => Verdict::LikelyZero { max_abs, samples: used },
        };
        rep.push(format!("{label}{}", fmt_idx(&idx)), verdict);
    }
    Ok(rep)
}

fn fmt_idx(idx: &[usize]) -> String {
    let parts: Vec<String> = idx.iter().map(|i| (i + 1).to_string()).collect();
    format!("[{}]", parts.join(","))
}

pub fn homotopy_identity_check(omega: &VerticalForm, sampler: &Sampler) -> Result<ValidationReport, HomotopyError> {
    let res = identity_residual(omega)?;
    let mut rep = vertical_verdicts(&res, sampler, "homotopy")?;
    rep.check = "homotopy".into();
    Ok(rep)
}

/// Primitive of a closed block of pure bidegree `(p, q)`, `q ≥ 1`.
///
/// `block` is a form of rank `2r` on an adapted frame whose first `r`
/// elements are horizontal and last `r` are the fiber directions. The
/// result has bidegree `(p, q − 1)` and satisfies `d'' ζ = block`.
pub fn dprime_primitive(block: &Form, p: usize, q: usize, fibers: &[Symbol], sampler: &Sampler) -> Result<Form, HomotopyError> {
    let r = fibers.len();
    assert_eq!(block.rank(), 2 * r, "block rank");
    if q == 0 {
        return Err(HomotopyError::DegreeZero);
    }
    if block.components().any(|(idx, _)| idx.iter().filter(|&&i| i < r).count() != p) {
        return Err(HomotopyError::WrongBidegree { p, q });
    }
    let mut zeta = Form::zero(2 * r, p + q - 1);
    let sign = if p.is_multiple_of(2) { Expr::one() } else { Expr::int(-1) };
    let mut closedness = Vec::new();
    let mut slices = Vec::new();
    for hor in increasing_tuples(r, p) {
        let mut slice = Form::zero(r, q);
        for vert in increasing_tuples(r, q) {
            let idx: Vec<usize> = hor.iter().copied().chain(vert.iter().map(|j| j + r)).collect();
            slice.set(&vert, block.get(&idx));
        }
        let v = VerticalForm::new(fibers.to_vec(), slice);
        for (idx, e) in v.d().form.components() {
            closedness.push((format!("closed{}{}", fmt_idx(&hor), fmt_idx(idx)), e.clone()));
        }
        slices.push((hor, v));
    }
    if !closedness.is_empty() {
        let rep = ValidationReport::from_residuals("closed", sampler, closedness)?;
        let bad = rep.failures().next().map(|e| e.label.clone());
        if let Some(label) = bad {
            return Err(HomotopyError::NotClosed(label));
        }
    }
    for (hor, v) in slices {
        let prim = v.h()?;
        if prim.deferred {
            return Err(HomotopyError::NoClosedForm);
        }
        for (vert, c) in prim.form.components() {
            let idx: Vec<usize> = hor.iter().copied().chain(vert.iter().map(|j| j + r)).collect();
            zeta.set(&idx, &sign * c);
        }
    }
    Ok(zeta)
}

/// Finite-difference check of `d/dt Ψ_t^*ω = (1/t) Ψ_t^*(L_e ω)` with
/// `L_e ω = y·∂_y ω + k ω` on coefficients.
pub fn evolution_check(omega: &VerticalForm, sampler: &Sampler, pairs: usize) -> Result<ValidationReport, HomotopyError> {
    let k = omega.degree() as i64;
    let t = Expr::sym(&t_symbol());
    let euler = |c: &Expr| Expr::sum(omega.fibers.iter().map(|y| Expr::sym(y) * c.diff(y)));
    let lie = VerticalForm::new(omega.fibers.clone(), omega.form.map(|c| euler(c) + c.scale(&Number::int(k))));
    let lhs = omega.psi_star(&t)?.dense();
    let rhs = lie.psi_star(&t)?.dense();
    let mut inputs = sampler.inputs();
    inputs.push(t_symbol());
    let lprog = Compiled::new(&lhs.iter().map(|c| c.1.clone()).collect::<Vec<_>>(), &inputs)?;
    let rprog = Compiled::new(&rhs.iter().map(|c| c.1.clone()).collect::<Vec<_>>(), &inputs)?;
    let mut rep = ValidationReport::new("evolution", sampler);
    let step = 1e-5;
    for (i, p) in sampler.points().into_iter().take(pairs).enumerate() {
        let tv = 0.2 + 0.75 * (i as f64 + 0.5) / pairs as f64;
        let at = |tt: f64, prog: &Compiled| -> Result<Vec<f64>, EvalError> {
            let mut b = p.clone();
            b.push(tt);
            prog.run(&b)
        };
        let (plus, minus, rv) = match (at(tv + step, &lprog), at(tv - step, &lprog), at(tv, &rprog)) {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            _ => continue,
        };
        let mut err: f64 = 0.0;
        for j in 0..lhs.len() {
            let fd = (plus[j] - minus[j]) / (2.0 * step);
            err = err.max((fd - rv[j] / tv).abs() / (1.0 + (rv[j] / tv).abs()));
        }
        rep.push_check(CheckEntry {
            label: format!("evolution[{}]", i + 1),
            passed: err <= 1e-6,
            residual: Some(err),
            witness: None,
            detail: format!("t = {tv}"),
        });
    }
    Ok(rep)
}
