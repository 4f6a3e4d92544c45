//! Fiber Hessian, energy and Legendre map of a Lagrangian.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::algebroid::{Chart, ChartPoint};
use crate::expr::{Compiled, EvalError, Expr, Sampler};
use crate::linalg::{self, Matrix};
use crate::report::ValidationReport;

/// Largest rank for which the Hessian inverse is built symbolically.
pub const SYMBOLIC_RANK_LIMIT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Symbolic,
    Pointwise,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LagrangianError {
    #[error("Hessian is singular near {witness:?} (det = {det:e})")]
    SingularHessian { witness: BTreeMap<String, f64>, det: f64 },
    #[error("Hessian determinant vanishes identically")]
    IdenticallySingular,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone)]
pub struct LagrangianData {
    pub l: Expr,
    /// `M_ij = ∂²L/∂y^i∂y^j`.
    pub m: Matrix,
    /// Symbolic inverse, present in symbolic mode.
    pub minv: Option<Matrix>,
    pub det: Expr,
    /// `∂L/∂y^k`, the coefficients of the Cartan 1-form.
    pub theta_l: Vec<Expr>,
    pub energy: Expr,
    pub mode: Mode,
}

pub fn build(chart: &Chart, l: &Expr, mode: Mode) -> Result<LagrangianData, LagrangianError> {
    let r = chart.r();
    let ys = chart.fibers();
    let theta_l: Vec<Expr> = ys.iter().map(|y| l.diff(y)).collect();
    let mut m = linalg::zeros(r, r);
    for i in 0..r {
        for j in i..r {
            let v = theta_l[i].diff(&ys[j]);
            m[i][j] = v.clone();
            m[j][i] = v;
        }
    }
    let energy = Expr::sum(ys.iter().zip(&theta_l).map(|(y, p)| Expr::sym(y) * p)) - l;
    let mode = if r > SYMBOLIC_RANK_LIMIT { Mode::Pointwise } else { mode };
    let det = linalg::det(&m);
    if det.is_zero() {
        return Err(LagrangianError::IdenticallySingular);
    }
    let minv = match mode {
        Mode::Symbolic => Some(linalg::inverse(&m).ok_or(LagrangianError::IdenticallySingular)?.0),
        Mode::Pointwise => None,
    };
    Ok(LagrangianData { l: l.clone(), m, minv, det, theta_l, energy, mode })
}

impl LagrangianData {
    /// Fiber derivative `∂L/∂y^k` at a point.
    pub fn legendre(&self, chart: &Chart, p: &ChartPoint) -> Result<Vec<f64>, EvalError> {
        let env = chart.bind(p);
        self.theta_l.iter().map(|e| e.eval(env.as_slice())).collect()
    }

    pub fn hessian_at(&self, chart: &Chart, p: &ChartPoint) -> Result<Vec<Vec<f64>>, EvalError> {
        let env = chart.bind(p);
        self.m.iter().map(|row| row.iter().map(|e| e.eval(env.as_slice())).collect()).collect()
    }

    pub fn minv(&self) -> Option<&Matrix> {
        self.minv.as_ref()
    }

    /// Checks that `det M` stays away from zero over the sample box.
    ///
    /// A sign change of the determinant between two samples is located by
    /// bisection along the segment joining them.
    pub fn regularity(&self, sampler: &Sampler) -> Result<Regularity, EvalError> {
        let inputs = sampler.inputs();
        let prog = Compiled::new(std::slice::from_ref(&self.det), &inputs)?;
        let points = sampler.points();
        let mut vals: Vec<(usize, f64)> = Vec::new();
        for (i, p) in points.iter().enumerate() {
            if let Ok(v) = prog.run(p) {
                vals.push((i, v[0]));
            }
        }
        if vals.is_empty() {
            return Err(EvalError::Domain("determinant undefined at every sample".into()));
        }
        let witness_of = |p: &[f64]| inputs.iter().zip(p).map(|(s, v)| (s.name().to_string(), *v)).collect();
        let min_abs = vals.iter().map(|v| v.1.abs()).fold(f64::INFINITY, f64::min);
        if let Some(&(i, d)) = vals.iter().find(|v| v.1.abs() <= sampler.tol) {
            return Ok(Regularity { min_abs_det: min_abs, samples: vals.len(), singular: Some((witness_of(&points[i]), d)) });
        }
        let (i0, d0) = vals[0];
        if let Some(&(i1, _)) = vals.iter().find(|v| v.1.signum() != d0.signum()) {
            let (mut a, mut b) = (points[i0].clone(), points[i1].clone());
            let mut da = d0;
            let mut mid = a.clone();
            let mut dm = da;
            for _ in 0..200 {
                mid = a.iter().zip(&b).map(|(u, v)| 0.5 * (u + v)).collect();
                dm = match prog.run(&mid) {
                    Ok(v) => v[0],
                    Err(_) => break,
                };
                if dm.abs() <= sampler.tol {
                    break;
                }
                if dm.signum() == da.signum() {
                    a = mid.clone();
                    da = dm;
                } else {
                    b = mid.clone();
                }
            }
            return Ok(Regularity { min_abs_det: min_abs.min(dm.abs()), samples: vals.len(), singular: Some((witness_of(&mid), dm)) });
        }
        Ok(Regularity { min_abs_det: min_abs, samples: vals.len(), singular: None })
    }

    /// Regularity as a hard requirement.
    pub fn require_regular(&self, sampler: &Sampler) -> Result<(), LagrangianError> {
        match self.regularity(sampler)?.singular {
            Some((witness, det)) => Err(LagrangianError::SingularHessian { witness, det }),
            None => Ok(()),
        }
    }

    /// Zero tests for `M - Mᵀ` and, when available, `M·M⁻¹ - I`.
    pub fn consistency(&self, sampler: &Sampler) -> Result<ValidationReport, EvalError> {
        let r = self.m.len();
        let mut res = Vec::new();
        for i in 0..r {
            for j in i + 1..r {
                res.push((format!("hessian_symmetry[{},{}]", i + 1, j + 1), &self.m[i][j] - &self.m[j][i]));
            }
        }
        if let Some(minv) = &self.minv {
            let p = linalg::matmul(&self.m, minv);
            for (i, row) in p.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    let delta = if i == j { Expr::one() } else { Expr::zero() };
                    res.push((format!("inverse[{},{}]", i + 1, j + 1), v - &delta));
                }
            }
        }
        ValidationReport::from_residuals("lagrangian", sampler, res)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regularity {
    pub min_abs_det: f64,
    pub samples: usize,
    /// Sample point where `det M` vanishes (within tolerance) and the value there.
    pub singular: Option<(BTreeMap<String, f64>, f64)>,
}
