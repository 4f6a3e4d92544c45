//! Closed 2-forms on the algebroid and the skew matrix `N` built from them.

use crate::algebroid::{AForm, Chart, ChartError};
use crate::cochain::increasing_tuples;
use crate::expr::{EvalError, Expr, Sampler};
use crate::lagrangian::LagrangianData;
use crate::linalg::{self, Matrix};
use crate::report::ValidationReport;

/// Checks shape and base dependence of a user-supplied 2-form.
pub fn theta_section(chart: &Chart, theta: AForm) -> Result<AForm, ChartError> {
    if theta.degree() != 2 || theta.rank() != chart.r() {
        return Err(ChartError::Shape(format!("2-form of rank {} expected", chart.r())));
    }
    for (idx, e) in theta.components() {
        chart.check_base_only(&format!("Theta[{},{}]", idx[0] + 1, idx[1] + 1), e)?;
    }
    Ok(theta)
}

/// Cyclic closedness residual for each increasing triple `(i, j, k)`.
pub fn closed_residuals(theta: &AForm, chart: &Chart) -> Vec<(Vec<usize>, Expr)> {
    let r = chart.r();
    increasing_tuples(r, 3)
        .into_iter()
        .map(|t| {
            let (i, j, k) = (t[0], t[1], t[2]);
            let mut terms = Vec::new();
            for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
                terms.push(chart.anchor_apply(c, &theta.get(&[a, b])));
                for s in 0..r {
                    terms.push(-(chart.c(s, b, c) * theta.get(&[s, a])));
                }
            }
            (t, Expr::sum(terms))
        })
        .collect()
}

pub fn check_closed(theta: &AForm, chart: &Chart, sampler: &Sampler) -> Result<ValidationReport, EvalError> {
    let residuals = closed_residuals(theta, chart)
        .into_iter()
        .map(|(t, e)| (format!("closed[{},{},{}]", t[0] + 1, t[1] + 1, t[2] + 1), e))
        .collect();
    ValidationReport::from_residuals("closed", sampler, residuals)
}

/// `N_ij = ρ(e_i)(∂L/∂y^j) − ρ(e_j)(∂L/∂y^i) − (∂L/∂y^k) C^k_ij + Θ_ij`.
pub fn assemble_n(data: &LagrangianData, chart: &Chart, theta: &AForm) -> Matrix {
    let r = chart.r();
    let mut n = linalg::zeros(r, r);
    for i in 0..r {
        for j in i + 1..r {
            let mut terms = vec![
                chart.anchor_apply(i, &data.theta_l[j]),
                -chart.anchor_apply(j, &data.theta_l[i]),
                theta.get(&[i, j]),
            ];
            for k in 0..r {
                terms.push(-(&data.theta_l[k] * &chart.c(k, i, j)));
            }
            let v = Expr::sum(terms);
            n[j][i] = -&v;
            n[i][j] = v;
        }
    }
    n
}
