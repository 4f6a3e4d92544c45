//! A Lie algebroid in one adapted chart.
//!
//! The chart has base coordinates `x1..xn` and fiber coordinates `y1..yr`
//! along a local frame `e_1..e_r`. The anchor sends `e_j` to
//! `Σ_i rho[j][i] ∂/∂x^i` and the bracket is `[e_i, e_j] = Σ_k C^k_ij e_k`.
//! Indices in this module are zero-based.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::cochain::{increasing_tuples, koszul, DegreeError, Form, Frame};
use crate::expr::zero::BoxError;
use crate::expr::{Alphabet, EvalError, Expr, SampleBox, Sampler, Symbol};
use crate::report::ValidationReport;

/// Forms on the algebroid itself: coefficients depend on `x` only.
pub type AForm = Form;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChartError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("{field} depends on fiber coordinate `{symbol}`")]
    FiberDependence { field: String, symbol: String },
    #[error("{field} refers to `{symbol}`, which is not a chart variable or parameter")]
    ForeignSymbol { field: String, symbol: String },
    #[error("bad structure index {0}")]
    BadIndex(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl ChartPoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        ChartPoint { x, y }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.x.iter().chain(&self.y).copied().collect()
    }
}

/// Sampling setup for zero tests over a chart: a default interval for every
/// coordinate, per-name overrides, and the trial count, tolerance and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpec {
    pub default: (f64, f64),
    pub overrides: BTreeMap<String, (f64, f64)>,
    pub trials: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec { default: (-1.0, 1.0), overrides: BTreeMap::new(), trials: 64, tol: 1e-9, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct Chart {
    coords: Vec<Symbol>,
    fibers: Vec<Symbol>,
    params: Vec<(Symbol, f64)>,
    rho: Vec<Vec<Expr>>,
    structure: BTreeMap<(usize, usize, usize), Expr>,
}

impl Chart {
    /// `rho[j][i]` is the `x^i` component of the anchor of `e_j`;
    /// `structure` maps `(k, i, j)` with `i < j` to `C^k_ij`.
    pub fn new(
        coords: Vec<Symbol>,
        fibers: Vec<Symbol>,
        params: Vec<(Symbol, f64)>,
        rho: Vec<Vec<Expr>>,
        structure: BTreeMap<(usize, usize, usize), Expr>,
    ) -> Result<Chart, ChartError> {
        let (n, r) = (coords.len(), fibers.len());
        let mut seen = BTreeSet::new();
        for s in coords.iter().chain(&fibers).chain(params.iter().map(|p| &p.0)) {
            if !seen.insert(s.clone()) {
                return Err(ChartError::DuplicateName(s.name().to_string()));
            }
        }
        if rho.len() != r || rho.iter().any(|row| row.len() != n) {
            return Err(ChartError::Shape(format!("anchor must be {r} rows of {n} entries")));
        }
        let structure: BTreeMap<_, _> = structure.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        for &(k, i, j) in structure.keys() {
            if k >= r || i >= r || j >= r || i >= j {
                return Err(ChartError::BadIndex(format!("({},{},{})", k + 1, i + 1, j + 1)));
            }
        }
        let chart = Chart { coords, fibers, params, rho, structure };
        for (j, row) in chart.rho.iter().enumerate() {
            for (i, e) in row.iter().enumerate() {
                chart.check_base_only(&format!("rho[{j}][{i}]"), e)?;
            }
        }
        for (&(k, i, j), e) in &chart.structure {
            chart.check_base_only(&format!("C[{},{},{}]", k + 1, i + 1, j + 1), e)?;
        }
        Ok(chart)
    }

    /// Errors unless `e` depends only on base coordinates and parameters.
    pub fn check_base_only(&self, field: &str, e: &Expr) -> Result<(), ChartError> {
        for s in e.symbols() {
            if self.fibers.contains(&s) {
                return Err(ChartError::FiberDependence { field: field.to_string(), symbol: s.name().to_string() });
            }
            if !self.coords.contains(&s) && !self.params.iter().any(|p| p.0 == s) {
                return Err(ChartError::ForeignSymbol { field: field.to_string(), symbol: s.name().to_string() });
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn r(&self) -> usize {
        self.fibers.len()
    }

    pub fn coords(&self) -> &[Symbol] {
        &self.coords
    }

    pub fn fibers(&self) -> &[Symbol] {
        &self.fibers
    }

    pub fn params(&self) -> &[(Symbol, f64)] {
        &self.params
    }

    pub fn x(&self, i: usize) -> Expr {
        Expr::sym(&self.coords[i])
    }

    pub fn y(&self, j: usize) -> Expr {
        Expr::sym(&self.fibers[j])
    }

    /// `x` then `y` symbols.
    pub fn variables(&self) -> Vec<Symbol> {
        self.coords.iter().chain(&self.fibers).cloned().collect()
    }

    pub fn alphabet(&self) -> Alphabet {
        Alphabet::new(self.variables().iter().map(|s| s.name().to_string()).chain(self.params.iter().map(|p| p.0.name().to_string())))
    }

    /// `x^i` component of the anchor of `e_j`.
    pub fn rho(&self, i: usize, j: usize) -> &Expr {
        &self.rho[j][i]
    }

    pub fn rho_rows(&self) -> &[Vec<Expr>] {
        &self.rho
    }

    /// `C^k_ij` for any `i, j`.
    pub fn c(&self, k: usize, i: usize, j: usize) -> Expr {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Equal => Expr::zero(),
            Less => self.structure.get(&(k, i, j)).cloned().unwrap_or_else(Expr::zero),
            Greater => self.structure.get(&(k, j, i)).map(|e| -e).unwrap_or_else(Expr::zero),
        }
    }

    pub fn structure_entries(&self) -> &BTreeMap<(usize, usize, usize), Expr> {
        &self.structure
    }

    /// `ρ(e_j) f = Σ_i ρ^i_j ∂f/∂x^i`.
    pub fn anchor_apply(&self, j: usize, f: &Expr) -> Expr {
        Expr::sum(
            self.rho[j]
                .iter()
                .zip(&self.coords)
                .filter(|(r, _)| !r.is_zero())
                .map(|(r, x)| r * &f.diff(x)),
        )
    }

    /// Binding of all chart symbols (and parameters) at a point.
    pub fn bind(&self, p: &ChartPoint) -> Vec<(Symbol, f64)> {
        assert_eq!((p.x.len(), p.y.len()), (self.n(), self.r()), "chart point shape");
        let mut b: Vec<(Symbol, f64)> = self.coords.iter().cloned().zip(p.x.iter().copied()).collect();
        b.extend(self.fibers.iter().cloned().zip(p.y.iter().copied()));
        b.extend(self.params.iter().cloned());
        b
    }

    /// Sampler over all chart coordinates with parameters pinned.
    pub fn sampler(&self, spec: &SampleSpec) -> Result<Sampler, BoxError> {
        let mut b = SampleBox::uniform(&self.variables(), spec.default.0, spec.default.1)?;
        for (name, &(lo, hi)) in &spec.overrides {
            b.set(&Symbol::new(name), lo, hi)?;
        }
        Ok(Sampler::new(b, spec.trials, spec.tol, spec.seed).with_fixed(self.params.clone()))
    }

    /// Copy with one structure function replaced (used to build perturbed fixtures).
    pub fn with_structure(&self, k: usize, i: usize, j: usize, value: Expr) -> Result<Chart, ChartError> {
        let mut s = self.structure.clone();
        let (i, j, value) = if i < j { (i, j, value) } else { (j, i, -value) };
        s.insert((k, i, j), value);
        Chart::new(self.coords.clone(), self.fibers.clone(), self.params.clone(), self.rho.clone(), s)
    }

    pub fn with_anchor_entry(&self, i: usize, j: usize, value: Expr) -> Result<Chart, ChartError> {
        let mut rho = self.rho.clone();
        rho[j][i] = value;
        Chart::new(self.coords.clone(), self.fibers.clone(), self.params.clone(), rho, self.structure.clone())
    }
}

impl Frame for Chart {
    fn rank(&self) -> usize {
        self.r()
    }

    fn anchor_derivative(&self, i: usize, f: &Expr) -> Expr {
        self.anchor_apply(i, f)
    }

    fn bracket(&self, i: usize, j: usize) -> Vec<(usize, Expr)> {
        (0..self.r()).map(|k| (k, self.c(k, i, j))).filter(|(_, c)| !c.is_zero()).collect()
    }
}

/// Residuals of both structure equations, tagged by zero tests.
pub fn validate_structure(chart: &Chart, sampler: &Sampler) -> Result<ValidationReport, EvalError> {
    let (n, r) = (chart.n(), chart.r());
    let mut residuals = Vec::new();
    for j in 0..r {
        for l in j + 1..r {
            for k in 0..n {
                let mut terms = Vec::new();
                for i in 0..n {
                    let xi = &chart.coords()[i];
                    terms.push(chart.rho(i, j) * &chart.rho(k, l).diff(xi));
                    terms.push(-(chart.rho(i, l) * &chart.rho(k, j).diff(xi)));
                }
                for i in 0..r {
                    terms.push(-(chart.rho(k, i) * &chart.c(i, j, l)));
                }
                residuals.push((format!("anchor[{},{};{}]", j + 1, l + 1, k + 1), Expr::sum(terms)));
            }
        }
    }
    for j in 0..r {
        for l in j + 1..r {
            for s in l + 1..r {
                for k in 0..r {
                    let mut terms = Vec::new();
                    for (a, b, c) in [(j, l, s), (l, s, j), (s, j, l)] {
                        terms.push(chart.anchor_apply(a, &chart.c(k, b, c)));
                        for t in 0..r {
                            terms.push(chart.c(t, b, c) * chart.c(k, a, t));
                        }
                    }
                    residuals.push((format!("jacobi[{},{},{};{}]", j + 1, l + 1, s + 1, k + 1), Expr::sum(terms)));
                }
            }
        }
    }
    ValidationReport::from_residuals("structure", sampler, residuals)
}

/// The differential of the algebroid on forms of degree at most 2.
pub fn d_a(chart: &Chart, form: &AForm) -> Result<AForm, DegreeError> {
    if form.degree() > 2 {
        return Err(DegreeError { degree: form.degree(), max: 2 });
    }
    Ok(koszul(chart, form))
}

/// Builds an A-form from `(indices, coefficient)` pairs, checking base dependence.
pub fn aform(chart: &Chart, degree: usize, comps: Vec<(Vec<usize>, Expr)>) -> Result<AForm, ChartError> {
    let mut f = Form::zero(chart.r(), degree);
    for (idx, e) in comps {
        if idx.len() != degree || idx.iter().any(|&i| i >= chart.r()) {
            return Err(ChartError::BadIndex(format!("{idx:?}")));
        }
        chart.check_base_only(&format!("form{idx:?}"), &e)?;
        f.set(&idx, e);
    }
    Ok(f)
}

/// All increasing `(i, j)` pairs of a rank-`r` chart.
pub fn pairs(r: usize) -> Vec<(usize, usize)> {
    increasing_tuples(r, 2).into_iter().map(|t| (t[0], t[1])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::SampleBox;

    fn line() -> Chart {
        Chart::new(vec![Symbol::new("x1")], vec![Symbol::new("y1")], vec![], vec![vec![Expr::one()]], BTreeMap::new()).unwrap()
    }

    fn sampler(c: &Chart) -> Sampler {
        Sampler::new(SampleBox::uniform(&c.variables(), -1.0, 1.0).unwrap(), 16, 1e-9, 1)
    }

    #[test]
    fn line_is_valid() {
        let c = line();
        let rep = validate_structure(&c, &sampler(&c)).unwrap();
        assert!(rep.all_proven());
    }

    #[test]
    fn rejects_fiber_dependent_anchor() {
        let err = Chart::new(vec![Symbol::new("x1")], vec![Symbol::new("y1")], vec![], vec![vec![Expr::var("y1")]], BTreeMap::new()).unwrap_err();
        assert!(matches!(err, ChartError::FiberDependence { .. }));
    }

    #[test]
    fn skew_reconstruction() {
        let mut s = BTreeMap::new();
        s.insert((0, 0, 1), Expr::var("x1"));
        let c = Chart::new(vec![Symbol::new("x1")], vec![Symbol::new("y1"), Symbol::new("y2")], vec![], vec![vec![Expr::zero()], vec![Expr::zero()]], s).unwrap();
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    assert!((c.c(k, i, j) + c.c(k, j, i)).is_zero());
                }
            }
        }
    }

    #[test]
    fn degree_cap() {
        let c = line();
        assert!(d_a(&c, &Form::zero(1, 3)).is_err());
    }
}
