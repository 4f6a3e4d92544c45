//! The Poisson bracket on the total space of the algebroid, its Hamiltonian
//! vector fields and the semispray / spray predicates.
//!
//! Coordinates of the total space are ordered `x1..xn, y1..yr`. The
//! Hamiltonian vector field of `G` acts by `X_G(h) = {G, h}`.

use thiserror::Error;

use crate::algebroid::Chart;
use crate::cochain::increasing_tuples;
use crate::expr::{EvalError, Expr, Sampler, Symbol};
use crate::lagrangian::LagrangianData;
use crate::linalg::{self, Matrix};
use crate::report::ValidationReport;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoissonError {
    #[error("symbolic Hessian inverse unavailable (pointwise mode); use the pointwise field evaluator")]
    NoSymbolicInverse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub vx: Vec<Expr>,
    pub vy: Vec<Expr>,
}

impl VectorField {
    pub fn components(&self) -> Vec<Expr> {
        self.vx.iter().chain(&self.vy).cloned().collect()
    }

    /// Directional derivative of `f` along the field.
    pub fn apply(&self, chart: &Chart, f: &Expr) -> Expr {
        let comps = self.components();
        Expr::sum(chart.variables().iter().zip(&comps).filter(|(_, c)| !c.is_zero()).map(|(v, c)| c * &f.diff(v)))
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField {
            vx: self.vx.iter().zip(&other.vx).map(|(a, b)| a - b).collect(),
            vy: self.vy.iter().zip(&other.vy).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Coefficients of the bracket between coordinate functions.
#[derive(Debug, Clone, PartialEq)]
pub struct Bivector {
    pub n: usize,
    pub r: usize,
    pub vars: Vec<Symbol>,
    /// `{x^i, y^k}`
    pub pxy: Matrix,
    /// `{y^k, y^l}`
    pub pyy: Matrix,
}

/// `{x^i,x^j} = 0`, `{x^i,y^k} = −ρ^i_a M^{ak}`, `{y^k,y^l} = −M^{ka} N_ab M^{bl}`.
pub fn build_bracket(chart: &Chart, data: &LagrangianData, n_matrix: &Matrix) -> Result<Bivector, PoissonError> {
    let minv = data.minv.as_ref().ok_or(PoissonError::NoSymbolicInverse)?;
    let (n, r) = (chart.n(), chart.r());
    let mut pxy = linalg::zeros(n, r);
    for (i, row) in pxy.iter_mut().enumerate() {
        for (k, e) in row.iter_mut().enumerate() {
            *e = -Expr::sum((0..r).map(|a| chart.rho(i, a) * &minv[a][k]));
        }
    }
    let inner = linalg::matmul(&linalg::matmul(minv, n_matrix), minv);
    let mut pyy = linalg::zeros(r, r);
    for k in 0..r {
        for l in k + 1..r {
            let v = -&inner[k][l];
            pyy[l][k] = -&v;
            pyy[k][l] = v;
        }
    }
    Ok(Bivector { n, r, vars: chart.variables(), pxy, pyy })
}

impl Bivector {
    /// `{z^a, z^b}` for total-space coordinates `z = (x, y)`.
    pub fn entry(&self, a: usize, b: usize) -> Expr {
        let n = self.n;
        match (a < n, b < n) {
            (true, true) => Expr::zero(),
            (true, false) => self.pxy[a][b - n].clone(),
            (false, true) => -&self.pxy[b][a - n],
            (false, false) => self.pyy[a - n][b - n].clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n + self.r
    }

    /// `{F, G} = Σ P^{ab} ∂_a F ∂_b G`.
    pub fn bracket(&self, f: &Expr, g: &Expr) -> Expr {
        let df: Vec<Expr> = self.vars.iter().map(|v| f.diff(v)).collect();
        let dg: Vec<Expr> = self.vars.iter().map(|v| g.diff(v)).collect();
        let mut terms = Vec::new();
        for a in 0..self.dim() {
            if df[a].is_zero() {
                continue;
            }
            for b in 0..self.dim() {
                if dg[b].is_zero() {
                    continue;
                }
                let p = self.entry(a, b);
                if !p.is_zero() {
                    terms.push(p * &df[a] * &dg[b]);
                }
            }
        }
        Expr::sum(terms)
    }

    fn coordinate(&self, a: usize) -> Expr {
        Expr::sym(&self.vars[a])
    }

    /// Jacobiator of each increasing coordinate triple.
    pub fn jacobiators(&self) -> Vec<(Vec<usize>, Expr)> {
        increasing_tuples(self.dim(), 3)
            .into_iter()
            .map(|t| {
                let (a, b, c) = (t[0], t[1], t[2]);
                let mut terms = Vec::new();
                for (p, q, s) in [(a, b, c), (b, c, a), (c, a, b)] {
                    terms.push(self.bracket(&self.coordinate(p), &self.entry(q, s)));
                }
                (t, Expr::sum(terms))
            })
            .collect()
    }

    pub fn check_jacobi(&self, sampler: &Sampler) -> Result<ValidationReport, EvalError> {
        let residuals = self
            .jacobiators()
            .into_iter()
            .map(|(t, e)| (format!("jacobi[{},{},{}]", self.vars[t[0]], self.vars[t[1]], self.vars[t[2]]), e))
            .collect();
        ValidationReport::from_residuals("jacobi", sampler, residuals)
    }

    /// `X_G` with components `{G, z^a}`.
    pub fn hamiltonian_field(&self, g: &Expr) -> VectorField {
        let comps: Vec<Expr> = (0..self.dim()).map(|a| self.bracket(g, &self.coordinate(a))).collect();
        VectorField { vx: comps[..self.n].to_vec(), vy: comps[self.n..].to_vec() }
    }
}

/// The displayed closed form of the Hamiltonian field of `G = E_L + f`:
/// `Vx^i = y^a ρ^i_a`, `Vy^s = −M^{sk}(ρ(e_k)G + N_jk y^j)`.
pub fn energy_field_closed_form(chart: &Chart, data: &LagrangianData, n_matrix: &Matrix, g: &Expr) -> Result<VectorField, PoissonError> {
    let minv = data.minv.as_ref().ok_or(PoissonError::NoSymbolicInverse)?;
    let (n, r) = (chart.n(), chart.r());
    let vx = (0..n).map(|i| Expr::sum((0..r).map(|a| chart.y(a) * chart.rho(i, a)))).collect();
    let w: Vec<Expr> = (0..r)
        .map(|k| chart.anchor_apply(k, g) + Expr::sum((0..r).map(|j| &n_matrix[j][k] * &chart.y(j))))
        .collect();
    let vy = (0..r).map(|s| -Expr::sum((0..r).map(|k| &minv[s][k] * &w[k]))).collect();
    Ok(VectorField { vx, vy })
}

/// Residuals `Vx^i − y^j ρ^i_j`.
pub fn is_semispray(chart: &Chart, v: &VectorField, sampler: &Sampler) -> Result<ValidationReport, EvalError> {
    let residuals = (0..chart.n())
        .map(|i| {
            let base = Expr::sum((0..chart.r()).map(|j| chart.y(j) * chart.rho(i, j)));
            (format!("base[{}]", chart.coords()[i]), &v.vx[i] - &base)
        })
        .collect();
    ValidationReport::from_residuals("semispray", sampler, residuals)
}

/// Residuals of `[E, V] − V` for the Liouville field `E = y^k ∂/∂y^k`:
/// `E(Vx) − Vx` and `E(Vy) − 2 Vy`.
pub fn is_spray(chart: &Chart, v: &VectorField, sampler: &Sampler) -> Result<ValidationReport, EvalError> {
    let euler = |e: &Expr| Expr::sum(chart.fibers().iter().map(|y| Expr::sym(y) * e.diff(y)));
    let mut residuals = Vec::new();
    for (i, c) in v.vx.iter().enumerate() {
        residuals.push((format!("homogeneity[{}]", chart.coords()[i]), euler(c) - c));
    }
    for (k, c) in v.vy.iter().enumerate() {
        residuals.push((format!("homogeneity[{}]", chart.fibers()[k]), euler(c) - c.scale(&2.into())));
    }
    ValidationReport::from_residuals("spray", sampler, residuals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::SampleSpec;
    use crate::catalog;
    use crate::cochain::Form;
    use crate::expr::parse;
    use crate::lagrangian::{build, Mode};
    use crate::twoform::assemble_n;

    fn setup(name: &str, with_theta: bool) -> (catalog::Fixture, LagrangianData, Bivector) {
        let f = catalog::by_name(name).unwrap();
        let d = build(&f.chart, &f.lagrangian, Mode::Symbolic).unwrap();
        let theta = if with_theta { f.theta.clone() } else { Form::zero(f.chart.r(), 2) };
        let n = assemble_n(&d, &f.chart, &theta);
        let p = build_bracket(&f.chart, &d, &n).unwrap();
        (f, d, p)
    }

    #[test]
    fn line_bracket() {
        let (f, d, p) = setup("tangent1", false);
        assert_eq!(p.pxy[0][0], Expr::int(-1));
        assert!(p.pyy[0][0].is_zero());
        assert_eq!(p.bracket(&f.chart.x(0), &f.chart.y(0)), Expr::int(-1));
        let v = p.hamiltonian_field(&d.energy);
        assert_eq!(v.vx[0], f.chart.y(0));
        assert!(v.vy[0].is_zero());
        let g = &d.energy + &f.chart.x(0);
        let v = p.hamiltonian_field(&g);
        assert_eq!(v.vy[0], Expr::int(-1));
    }

    #[test]
    fn constant_cotangent_bracket() {
        let (f, d, p) = setup("cotangent", true);
        // {x^i, y^k} = Π^{ik}
        assert!(p.pxy[0][1].is_one());
        assert_eq!(p.pxy[1][0], Expr::int(-1));
        assert_eq!(p.pyy[0][1], Expr::int(-1));
        let v = p.hamiltonian_field(&d.energy);
        // Vx^i = y_j Π^{ji}
        assert_eq!(v.vx[0], -f.chart.y(1));
        assert_eq!(v.vx[1], f.chart.y(0));
    }

    #[test]
    fn field_matches_closed_form() {
        for name in catalog::VALID {
            let (f, d, p) = setup(name, true);
            let theta = f.theta.clone();
            let n = assemble_n(&d, &f.chart, &theta);
            let g = &d.energy + &f.chart.x(0);
            let v = p.hamiltonian_field(&g);
            let w = energy_field_closed_form(&f.chart, &d, &n, &g).unwrap();
            let s = f.chart.sampler(&SampleSpec::default()).unwrap();
            let diff = v.sub(&w);
            let res = diff.components().into_iter().enumerate().map(|(i, e)| (i.to_string(), e)).collect();
            assert!(ValidationReport::from_residuals("eq", &s, res).unwrap().passed(), "{name}");
        }
    }

    #[test]
    fn antisymmetric_and_leibniz() {
        let (f, _, p) = setup("so3", true);
        let a = f.chart.alphabet();
        let fe = parse("x1*y2 + y3^2*x2", &a).unwrap();
        let ge = parse("y1*y2 - x3", &a).unwrap();
        let he = parse("x1 + y3", &a).unwrap();
        assert!((p.bracket(&fe, &ge) + p.bracket(&ge, &fe)).is_zero());
        assert!(p.bracket(&fe, &fe).is_zero());
        let leibniz = p.bracket(&fe, &(&ge * &he)) - p.bracket(&fe, &ge) * &he - &ge * p.bracket(&fe, &he);
        assert!(leibniz.is_zero());
    }

    #[test]
    fn spray_predicates() {
        let f = catalog::tangent(1);
        let s = f.chart.sampler(&SampleSpec::default()).unwrap();
        let y = f.chart.y(0);
        let quad = VectorField { vx: vec![y.clone()], vy: vec![y.powi(2)] };
        assert!(is_spray(&f.chart, &quad, &s).unwrap().passed());
        let wrong = VectorField { vx: vec![y.powi(2)], vy: vec![Expr::zero()] };
        assert!(!is_semispray(&f.chart, &wrong, &s).unwrap().passed());
        let forced = VectorField { vx: vec![y], vy: vec![Expr::int(-1)] };
        assert!(!is_spray(&f.chart, &forced, &s).unwrap().passed());
    }
}
