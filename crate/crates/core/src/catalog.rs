//! Ready-made algebroid charts with a Lagrangian and a closed 2-form.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::algebroid::{AForm, Chart, ChartError};
use crate::cochain::Form;
use crate::expr::{Expr, Symbol};
use crate::linalg::{self, Matrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("invalid fixture parameter: {0}")]
    InvalidFixtureParam(String),
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
    #[error(transparent)]
    Chart(#[from] ChartError),
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub chart: Chart,
    pub lagrangian: Expr,
    /// The closed 2-form shipped with the fixture (possibly zero).
    pub theta: AForm,
}

pub const NAMES: &[&str] = &["tangent1", "tangent2", "tangent3", "so3", "so3_perturbed", "cotangent", "cotangent_so3", "metric2"];

/// Fixtures expected to pass every structural check.
pub const VALID: &[&str] = &["tangent1", "tangent2", "tangent3", "so3", "cotangent", "cotangent_so3", "metric2"];

pub fn by_name(name: &str) -> Result<Fixture, CatalogError> {
    match name {
        "tangent1" => Ok(tangent(1)),
        "tangent2" => Ok(tangent(2)),
        "tangent3" => Ok(tangent(3)),
        "so3" => Ok(action_so3()),
        "so3_perturbed" => Ok(so3_perturbed()),
        "cotangent" => Ok(cotangent_constant()),
        "cotangent_so3" => Ok(cotangent_lie_poisson()),
        "metric2" => Ok(metric2()),
        _ => Err(CatalogError::UnknownFixture(name.to_string())),
    }
}

fn names(prefix: &str, n: usize) -> Vec<Symbol> {
    (1..=n).map(|i| Symbol::new(&format!("{prefix}{i}"))).collect()
}

fn half_quadratic(metric: &Matrix, y: &[Expr]) -> Expr {
    let mut terms = Vec::new();
    for (i, row) in metric.iter().enumerate() {
        for (j, g) in row.iter().enumerate() {
            terms.push(g * &y[i] * &y[j]);
        }
    }
    Expr::sum(terms) * Expr::ratio(1, 2)
}

/// The tangent bundle of `R^n` with the Euclidean kinetic energy.
pub fn tangent(n: usize) -> Fixture {
    let rho = linalg::identity(n);
    let chart = Chart::new(names("x", n), names("y", n), vec![], rho, BTreeMap::new()).expect("tangent chart");
    let y: Vec<Expr> = (0..n).map(|j| chart.y(j)).collect();
    let lagrangian = half_quadratic(&linalg::identity(n), &y);
    let mut theta = Form::zero(n, 2);
    match n {
        2 => theta.set(&[0, 1], chart.x(0)),
        3 => {
            theta.set(&[0, 2], chart.x(1));
            theta.set(&[1, 2], chart.x(0));
        }
        _ => {}
    }
    Fixture { name: format!("tangent{n}"), chart, lagrangian, theta }
}

fn epsilon(i: usize, j: usize, k: usize) -> i64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1,
        _ => 0,
    }
}

/// Infinitesimal rotations of `R^3`: `ρ(e_j) = Σ ε_jka x^a ∂_k`, `C^k_ij = ε_ijk`.
pub fn action_so3() -> Fixture {
    let coords = names("x", 3);
    let x: Vec<Expr> = coords.iter().map(Expr::sym).collect();
    let rho: Matrix = (0..3)
        .map(|j| (0..3).map(|k| Expr::sum((0..3).map(|a| x[a].scale(&epsilon(j, k, a).into())))).collect())
        .collect();
    let mut structure = BTreeMap::new();
    for k in 0..3 {
        for i in 0..3 {
            for j in i + 1..3 {
                let e = epsilon(i, j, k);
                if e != 0 {
                    structure.insert((k, i, j), Expr::int(e));
                }
            }
        }
    }
    let chart = Chart::new(coords, names("y", 3), vec![], rho, structure).expect("so3 chart");
    let y: Vec<Expr> = (0..3).map(|j| chart.y(j)).collect();
    let lagrangian = half_quadratic(&linalg::identity(3), &y);
    let mut theta = Form::zero(3, 2);
    for i in 0..3 {
        for j in i + 1..3 {
            let k = 3 - i - j;
            theta.set(&[i, j], x[k].scale(&epsilon(i, j, k).into()));
        }
    }
    Fixture { name: "so3".into(), chart, lagrangian, theta }
}

/// The rotation chart with `C^3_12` changed from 1 to 1.1; violates the structure equations.
pub fn so3_perturbed() -> Fixture {
    let mut f = action_so3();
    f.chart = f.chart.with_structure(2, 0, 1, Expr::ratio(11, 10)).expect("perturbed chart");
    f.name = "so3_perturbed".into();
    f
}

/// Cotangent algebroid of a Poisson tensor `pi` with the kinetic energy of
/// the metric `g`, i.e. `L = ½ (g⁻¹)^{ij} y_i y_j`, and `Θ_ij = Π^{ij}`.
pub fn cotangent_poisson(name: &str, pi: &Matrix, g: &Matrix) -> Result<Fixture, CatalogError> {
    let n = pi.len();
    if g.len() != n || pi.iter().chain(g).any(|row| row.len() != n) {
        return Err(CatalogError::InvalidFixtureParam("Poisson tensor and metric must be square of equal size".into()));
    }
    for i in 0..n {
        for j in 0..n {
            if !(&pi[i][j] + &pi[j][i]).is_zero() {
                return Err(CatalogError::InvalidFixtureParam(format!("Poisson tensor is not skew at ({},{})", i + 1, j + 1)));
            }
            if !(&g[i][j] - &g[j][i]).is_zero() {
                return Err(CatalogError::InvalidFixtureParam(format!("metric is not symmetric at ({},{})", i + 1, j + 1)));
            }
        }
    }
    let coords = names("x", n);
    let rho: Matrix = (0..n).map(|j| (0..n).map(|i| -&pi[i][j]).collect()).collect();
    let mut structure = BTreeMap::new();
    for k in 0..n {
        for i in 0..n {
            for j in i + 1..n {
                structure.insert((k, i, j), pi[i][j].diff(&coords[k]));
            }
        }
    }
    let chart = Chart::new(coords, names("y", n), vec![], rho, structure)?;
    let (ginv, _) = linalg::inverse(g).ok_or_else(|| CatalogError::InvalidFixtureParam("metric is singular".into()))?;
    let y: Vec<Expr> = (0..n).map(|j| chart.y(j)).collect();
    let lagrangian = half_quadratic(&ginv, &y);
    let mut theta = Form::zero(n, 2);
    for i in 0..n {
        for j in i + 1..n {
            chart.check_base_only("Poisson tensor", &pi[i][j])?;
            theta.set(&[i, j], pi[i][j].clone());
        }
    }
    Ok(Fixture { name: name.into(), chart, lagrangian, theta })
}

/// Constant symplectic Poisson tensor `Π^{12} = 1` on `R^2`, `g = I`.
pub fn cotangent_constant() -> Fixture {
    let mut pi = linalg::zeros(2, 2);
    pi[0][1] = Expr::one();
    pi[1][0] = Expr::int(-1);
    cotangent_poisson("cotangent", &pi, &linalg::identity(2)).expect("cotangent fixture")
}

/// Linear Poisson tensor `Π^{ij} = ε_ijk x^k` on `R^3`, `g = I`.
pub fn cotangent_lie_poisson() -> Fixture {
    let x: Vec<Expr> = (1..=3).map(|i| Expr::var(&format!("x{i}"))).collect();
    let pi: Matrix = (0..3)
        .map(|i| (0..3).map(|j| Expr::sum((0..3).map(|k| x[k].scale(&epsilon(i, j, k).into())))).collect())
        .collect();
    cotangent_poisson("cotangent_so3", &pi, &linalg::identity(3)).expect("Lie-Poisson fixture")
}

/// Tangent bundle of `R^2` with the metric `diag(1, 1 + x1²)` and no magnetic term.
pub fn metric2() -> Fixture {
    let mut f = tangent(2);
    let x1 = f.chart.x(0);
    let mut g = linalg::identity(2);
    g[1][1] = Expr::one() + x1.powi(2);
    let y: Vec<Expr> = (0..2).map(|j| f.chart.y(j)).collect();
    f.lagrangian = half_quadratic(&g, &y);
    f.theta = Form::zero(2, 2);
    f.name = "metric2".into();
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cotangent_anchor() {
        let f = cotangent_constant();
        assert!(f.chart.rho(0, 0).is_zero());
        assert_eq!(f.chart.rho(0, 1), &Expr::int(-1));
        assert_eq!(f.chart.rho(1, 0), &Expr::int(1));
        assert!(f.chart.structure_entries().is_empty());
    }

    #[test]
    fn so3_constants() {
        let f = action_so3();
        assert!(f.chart.c(2, 0, 1).is_one());
        assert!(f.chart.c(0, 1, 2).is_one());
        assert_eq!(f.chart.c(1, 0, 2), Expr::int(-1));
    }

    #[test]
    fn rejects_bad_params() {
        let mut pi = linalg::zeros(2, 2);
        pi[0][1] = Expr::one();
        assert!(matches!(cotangent_poisson("bad", &pi, &linalg::identity(2)), Err(CatalogError::InvalidFixtureParam(_))));
        let mut g = linalg::identity(2);
        g[0][1] = Expr::one();
        assert!(matches!(cotangent_poisson("bad", &linalg::zeros(2, 2), &g), Err(CatalogError::InvalidFixtureParam(_))));
    }

    #[test]
    fn every_name_resolves() {
        for n in NAMES {
            assert_eq!(&by_name(n).unwrap().name, n);
        }
    }
}
