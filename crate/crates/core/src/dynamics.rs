//! Numeric flows of fields on the algebroid and drift diagnostics.
//!
//! States are flat vectors `(x1..xn, y1..yr)`. Fields come either from a
//! symbolic [`VectorField`] compiled once, or from a pointwise evaluator
//! that solves with the numeric Hessian at each state (used when no
//! symbolic inverse exists).

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::algebroid::{Chart, ChartPoint};
use crate::expr::{Compiled, EvalError, Expr, Symbol};
use crate::lagrangian::LagrangianData;
use crate::linalg::Matrix;
use crate::poisson::VectorField;
use crate::report::{CheckEntry, ValidationReport};

pub const BLOWUP_BOUND: f64 = 1e6;
pub const RK45_TOL: f64 = 1e-9;
const MIN_STEP: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("state norm {norm:e} exceeded the bound at t = {time}")]
    BlowUp { time: f64, norm: f64 },
    #[error("step size underflow at t = {time}")]
    StepUnderflow { time: f64 },
    #[error("invalid integration request: {0}")]
    BadRequest(String),
    #[error("Hessian is singular along the flow at t = {time}")]
    SingularHessian { time: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rk4,
    Rk45,
}

enum Rhs {
    Compiled(Compiled),
    Pointwise(PointwiseField),
}

/// Hamiltonian field of `G` evaluated from numeric `M`, `N`, `ρ` at each state:
/// `Vx = ρ M⁻¹ ∂_y G`, `Vy = −M⁻¹(ρᵀ ∂_x G) − M⁻¹ Nᵀ M⁻¹ ∂_y G`.
struct PointwiseField {
    n: usize,
    r: usize,
    /// Outputs: `M` (r·r), `N` (r·r), `ρ(e_a) G` (r), `∂_y G` (r), `ρ^i_a` (n·r).
    prog: Compiled,
}

impl PointwiseField {
    fn eval(&self, z: &[f64], out: &mut [f64]) -> Result<bool, EvalError> {
        let (n, r) = (self.n, self.r);
        let v = self.prog.run(z)?;
        let m = DMatrix::from_fn(r, r, |i, j| v[i * r + j]);
        let nm = DMatrix::from_fn(r, r, |i, j| v[r * r + i * r + j]);
        let rho_g = DVector::from_fn(r, |a, _| v[2 * r * r + a]);
        let dy = DVector::from_fn(r, |a, _| v[2 * r * r + r + a]);
        let rho = DMatrix::from_fn(n, r, |i, a| v[2 * r * r + 2 * r + i * r + a]);
        let lu = m.lu();
        let Some(w) = lu.solve(&dy) else { return Ok(false) };
        let Some(u) = lu.solve(&rho_g) else { return Ok(false) };
        let Some(t) = lu.solve(&(nm.transpose() * &w)) else { return Ok(false) };
        let vx = &rho * &w;
        let vy = -(u + t);
        out[..n].copy_from_slice(vx.as_slice());
        out[n..].copy_from_slice(vy.as_slice());
        Ok(true)
    }
}

/// A field ready for integration, with an optional conserved quantity.
pub struct Flow {
    n: usize,
    r: usize,
    rhs: Rhs,
    invariant: Option<Compiled>,
    params: Vec<f64>,
    pub bound: f64,
}

fn flow_inputs(chart: &Chart) -> Vec<Symbol> {
    let mut v = chart.variables();
    v.extend(chart.params().iter().map(|p| p.0.clone()));
    v
}

fn compile_invariant(chart: &Chart, g: Option<&Expr>) -> Result<Option<Compiled>, EvalError> {
    g.map(|g| Compiled::new(std::slice::from_ref(g), &flow_inputs(chart))).transpose()
}

impl Flow {
    pub fn from_field(chart: &Chart, v: &VectorField, invariant: Option<&Expr>) -> Result<Flow, EvalError> {
        Ok(Flow {
            n: chart.n(),
            r: chart.r(),
            rhs: Rhs::Compiled(Compiled::new(&v.components(), &flow_inputs(chart))?),
            invariant: compile_invariant(chart, invariant)?,
            params: chart.params().iter().map(|p| p.1).collect(),
            bound: BLOWUP_BOUND,
        })
    }

    /// Hamiltonian field of `g` with a numeric Hessian solve at every evaluation.
    pub fn pointwise(chart: &Chart, data: &LagrangianData, n_matrix: &Matrix, g: &Expr) -> Result<Flow, EvalError> {
        let (n, r) = (chart.n(), chart.r());
        let mut outs: Vec<Expr> = data.m.iter().flatten().cloned().collect();
        outs.extend(n_matrix.iter().flatten().cloned());
        outs.extend((0..r).map(|a| chart.anchor_apply(a, g)));
        outs.extend(chart.fibers().iter().map(|y| g.diff(y)));
        for i in 0..n {
            for a in 0..r {
                outs.push(chart.rho(i, a).clone());
            }
        }
        let prog = Compiled::new(&outs, &flow_inputs(chart))?;
        Ok(Flow {
            n,
            r,
            rhs: Rhs::Pointwise(PointwiseField { n, r, prog }),
            invariant: compile_invariant(chart, Some(g))?,
            params: chart.params().iter().map(|p| p.1).collect(),
            bound: BLOWUP_BOUND,
        })
    }

    pub fn with_bound(mut self, bound: f64) -> Flow {
        self.bound = bound;
        self
    }

    pub fn dim(&self) -> usize {
        self.n + self.r
    }

    fn with_params(&self, z: &[f64]) -> Vec<f64> {
        let mut v = z.to_vec();
        v.extend(&self.params);
        v
    }

    /// Field value at a state.
    pub fn eval(&self, z: &[f64], time: f64) -> Result<Vec<f64>, DynamicsError> {
        let input = self.with_params(z);
        let mut out = vec![0.0; self.dim()];
        match &self.rhs {
            Rhs::Compiled(p) => out = p.run(&input)?,
            Rhs::Pointwise(p) => {
                if !p.eval(&input, &mut out)? {
                    return Err(DynamicsError::SingularHessian { time });
                }
            }
        }
        Ok(out)
    }

    pub fn invariant_at(&self, z: &[f64]) -> Result<Option<f64>, EvalError> {
        match &self.invariant {
            Some(p) => Ok(Some(p.run(&self.with_params(z))?[0])),
            None => Ok(None),
        }
    }

    fn check_bound(&self, z: &[f64], time: f64) -> Result<(), DynamicsError> {
        let norm = z.iter().fold(0.0f64, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v.abs()) });
        if norm > self.bound {
            return Err(DynamicsError::BlowUp { time, norm });
        }
        Ok(())
    }

    fn rk4_step(&self, z: &[f64], t: f64, h: f64) -> Result<Vec<f64>, DynamicsError> {
        let axpy = |base: &[f64], k: &[f64], c: f64| -> Vec<f64> { base.iter().zip(k).map(|(b, k)| b + c * k).collect() };
        let k1 = self.eval(z, t)?;
        let k2 = self.eval(&axpy(z, &k1, h / 2.0), t)?;
        let k3 = self.eval(&axpy(z, &k2, h / 2.0), t)?;
        let k4 = self.eval(&axpy(z, &k3, h), t)?;
        Ok((0..z.len()).map(|i| z[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
    }

    /// One Dormand–Prince step: fifth-order solution and error estimate.
    fn dopri_step(&self, z: &[f64], t: f64, h: f64) -> Result<(Vec<f64>, f64), DynamicsError> {
        const A: [&[f64]; 6] = [
            &[1.0 / 5.0],
            &[3.0 / 40.0, 9.0 / 40.0],
            &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
            &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
            &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
            &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
        ];
        const E: [f64; 7] = [
            71.0 / 57600.0,
            0.0,
            -71.0 / 16695.0,
            71.0 / 1920.0,
            -17253.0 / 339200.0,
            22.0 / 525.0,
            -1.0 / 40.0,
        ];
        let mut ks: Vec<Vec<f64>> = vec![self.eval(z, t)?];
        for row in A {
            let stage: Vec<f64> = (0..z.len())
                .map(|i| z[i] + h * row.iter().zip(&ks).map(|(a, k)| a * k[i]).sum::<f64>())
                .collect();
            ks.push(self.eval(&stage, t)?);
        }
        let b = A[5];
        let next: Vec<f64> = (0..z.len()).map(|i| z[i] + h * b.iter().zip(&ks).map(|(c, k)| c * k[i]).sum::<f64>()).collect();
        let err = (0..z.len())
            .map(|i| {
                let e = h * E.iter().zip(&ks).map(|(c, k)| c * k[i]).sum::<f64>();
                e.abs() / (1.0 + z[i].abs().max(next[i].abs()))
            })
            .fold(0.0, f64::max);
        Ok((next, err))
    }

    pub fn integrate(&self, p0: &ChartPoint, t_end: f64, h: f64, method: Method) -> Result<Trajectory, DynamicsError> {
        if !(h > 0.0 && t_end > 0.0 && h.is_finite() && t_end.is_finite()) {
            return Err(DynamicsError::BadRequest("T and h must be positive".into()));
        }
        if p0.x.len() != self.n || p0.y.len() != self.r {
            return Err(DynamicsError::BadRequest(format!("initial point needs {} base and {} fiber values", self.n, self.r)));
        }
        let mut z = p0.flat();
        self.check_bound(&z, 0.0)?;
        let g0 = self.invariant_at(&z)?;
        let mut traj = Trajectory { n: self.n, times: vec![0.0], states: vec![p0.clone()], invariant_drift: vec![0.0] };
        let push = |traj: &mut Trajectory, t: f64, z: &[f64]| -> Result<(), DynamicsError> {
            let drift = match (g0, self.invariant_at(z)?) {
                (Some(a), Some(b)) => b - a,
                _ => 0.0,
            };
            traj.times.push(t);
            traj.states.push(ChartPoint::new(z[..self.n].to_vec(), z[self.n..].to_vec()));
            traj.invariant_drift.push(drift);
            Ok(())
        };
        match method {
            Method::Rk4 => {
                let steps = ((t_end / h) - 1e-9).ceil().max(1.0) as usize;
                let dt = t_end / steps as f64;
                for s in 0..steps {
                    let t = s as f64 * dt;
                    z = self.rk4_step(&z, t, dt)?;
                    let t_next = if s + 1 == steps { t_end } else { (s + 1) as f64 * dt };
                    self.check_bound(&z, t_next)?;
                    push(&mut traj, t_next, &z)?;
                }
            }
            Method::Rk45 => {
                let mut t = 0.0;
                let mut dt = h.min(t_end);
                while t < t_end {
                    let last = t + dt >= t_end;
                    let step = if last { t_end - t } else { dt };
                    let (next, err) = self.dopri_step(&z, t, step)?;
                    let factor = if err == 0.0 { 5.0 } else { (0.9 * (RK45_TOL / err).powf(0.2)).clamp(0.2, 5.0) };
                    if err <= RK45_TOL {
                        t = if last { t_end } else { t + step };
                        z = next;
                        self.check_bound(&z, t)?;
                        push(&mut traj, t, &z)?;
                    }
                    dt = step * factor;
                    if dt < MIN_STEP {
                        return Err(DynamicsError::StepUnderflow { time: t });
                    }
                }
            }
        }
        Ok(traj)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    n: usize,
    pub times: Vec<f64>,
    pub states: Vec<ChartPoint>,
    /// `G(state) − G(state₀)`; zero when no invariant was supplied.
    pub invariant_drift: Vec<f64>,
}

#[derive(Serialize)]
struct TrajectoryJson<'a> {
    times: &'a [f64],
    x: Vec<&'a [f64]>,
    y: Vec<&'a [f64]>,
    drift: &'a [f64],
    max_drift: f64,
}

impl Trajectory {
    pub fn last(&self) -> &ChartPoint {
        self.states.last().expect("trajectory holds the initial point")
    }

    pub fn max_drift(&self) -> f64 {
        self.invariant_drift.iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    pub fn to_csv(&self, chart: &Chart) -> String {
        let mut head: Vec<String> = vec!["t".into()];
        head.extend(chart.coords().iter().map(|s| s.name().to_string()));
        head.extend(chart.fibers().iter().map(|s| s.name().to_string()));
        head.push("drift".into());
        let mut out = head.join(",");
        out.push('\n');
        for ((t, p), d) in self.times.iter().zip(&self.states).zip(&self.invariant_drift) {
            let _ = write!(out, "{t:e}");
            for v in p.x.iter().chain(&p.y) {
                let _ = write!(out, ",{v:e}");
            }
            let _ = writeln!(out, ",{d:e}");
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let doc = TrajectoryJson {
            times: &self.times,
            x: self.states.iter().map(|p| p.x.as_slice()).collect(),
            y: self.states.iter().map(|p| p.y.as_slice()).collect(),
            drift: &self.invariant_drift,
            max_drift: self.max_drift(),
        };
        serde_json::to_value(doc).expect("trajectory serializes")
    }
}

/// Central-difference velocity of the base point against `y^j ρ^i_j(x)`,
/// per base coordinate, relative to `1 + |speed|`.
pub fn base_projection_check(chart: &Chart, traj: &Trajectory, tol: f64) -> Result<ValidationReport, EvalError> {
    let (n, r) = (chart.n(), chart.r());
    let expected: Vec<Expr> = (0..n).map(|i| Expr::sum((0..r).map(|j| chart.y(j) * chart.rho(i, j)))).collect();
    let prog = Compiled::new(&expected, &flow_inputs(chart))?;
    let params: Vec<f64> = chart.params().iter().map(|p| p.1).collect();
    let mut rep = ValidationReport {
        check: "base_projection".into(),
        seed: 0,
        trials: traj.times.len(),
        tol,
        entries: Vec::new(),
        checks: Vec::new(),
    };
    let mut worst = vec![(0.0f64, None::<usize>); n];
    for k in 1..traj.times.len().saturating_sub(1) {
        let (t0, t1, t2) = (traj.times[k - 1], traj.times[k], traj.times[k + 1]);
        let (h0, h1) = (t1 - t0, t2 - t1);
        let mut input = traj.states[k].flat();
        input.extend(&params);
        let want = prog.run(&input)?;
        for i in 0..n {
            let (a, b, c) = (traj.states[k - 1].x[i], traj.states[k].x[i], traj.states[k + 1].x[i]);
            // Second-order derivative estimate on a possibly uneven grid.
            let fd = (-h1 / (h0 * (h0 + h1))) * a + ((h1 - h0) / (h0 * h1)) * b + (h0 / (h1 * (h0 + h1))) * c;
            let res = (fd - want[i]).abs() / (1.0 + want[i].abs());
            if res > worst[i].0 {
                worst[i].0 = res;
            }
            if res > tol && worst[i].1.is_none() {
                worst[i].1 = Some(k);
            }
        }
    }
    for (i, (res, bad)) in worst.into_iter().enumerate() {
        let witness = bad.map(|k| {
            let mut w = std::collections::BTreeMap::new();
            w.insert("t".to_string(), traj.times[k]);
            for (s, v) in chart.variables().iter().zip(traj.states[k].flat()) {
                w.insert(s.name().to_string(), v);
            }
            w
        });
        rep.push_check(CheckEntry {
            label: format!("velocity[{}]", chart.coords()[i]),
            passed: bad.is_none(),
            residual: Some(res),
            witness,
            detail: "finite-difference base velocity against the anchor of y".into(),
        });
    }
    Ok(rep)
}

/// Flow from `(x0, λ y0)` for time `T/λ` against the flow from `(x0, y0)` for time `T`.
pub fn spray_scaling_check(flow: &Flow, p0: &ChartPoint, t_end: f64, lambdas: &[f64], tol: f64) -> Result<ValidationReport, DynamicsError> {
    let reference = flow.integrate(p0, t_end, 1e-2, Method::Rk45)?;
    let mut rep = ValidationReport { check: "spray_scaling".into(), seed: 0, trials: lambdas.len(), tol, entries: Vec::new(), checks: Vec::new() };
    for &lam in lambdas {
        let scaled = ChartPoint::new(p0.x.clone(), p0.y.iter().map(|v| lam * v).collect());
        let traj = flow.integrate(&scaled, t_end / lam, 1e-2 / lam, Method::Rk45)?;
        let err = traj.last().x.iter().zip(&reference.last().x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        rep.push_check(CheckEntry {
            label: format!("scaling[{lam}]"),
            passed: err <= tol,
            residual: Some(err),
            witness: None,
            detail: format!("base endpoint difference for lambda = {lam}"),
        });
    }
    Ok(rep)
}

/// Max invariant drift with step `h` divided by the drift with step `h/2` (RK4).
pub fn step_halving_ratio(flow: &Flow, p0: &ChartPoint, t_end: f64, h: f64) -> Result<f64, DynamicsError> {
    let coarse = flow.integrate(p0, t_end, h, Method::Rk4)?.max_drift();
    let fine = flow.integrate(p0, t_end, h / 2.0, Method::Rk4)?.max_drift();
    Ok(coarse / fine)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::cochain::Form;
    use crate::lagrangian::{build, Mode};
    use crate::poisson::{build_bracket, energy_field_closed_form};
    use crate::twoform::assemble_n;

    fn line_flow(vy: Expr) -> (Chart, Flow) {
        let f = catalog::tangent(1);
        let v = VectorField { vx: vec![f.chart.y(0)], vy: vec![vy] };
        let flow = Flow::from_field(&f.chart, &v, None).unwrap();
        (f.chart, flow)
    }

    #[test]
    fn free_line() {
        let (_, flow) = line_flow(Expr::zero());
        for m in [Method::Rk4, Method::Rk45] {
            let t = flow.integrate(&ChartPoint::new(vec![0.0], vec![1.0]), 1.0, 0.1, m).unwrap();
            assert!((t.last().x[0] - 1.0).abs() < 1e-12);
            assert_eq!(*t.times.last().unwrap(), 1.0);
            assert!(t.times.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn constant_force() {
        let (_, flow) = line_flow(Expr::int(-1));
        for m in [Method::Rk4, Method::Rk45] {
            let t = flow.integrate(&ChartPoint::new(vec![0.0], vec![0.0]), 1.0, 0.01, m).unwrap();
            assert!((t.last().x[0] + 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let (ch, _) = line_flow(Expr::zero());
        let v = VectorField { vx: vec![ch.y(0)], vy: vec![ch.y(0).powi(2)] };
        let flow = Flow::from_field(&ch, &v, None).unwrap();
        let err = flow.integrate(&ChartPoint::new(vec![0.0], vec![1.0]), 2.0, 1e-3, Method::Rk4).unwrap_err();
        assert!(matches!(err, DynamicsError::BlowUp { .. }));
        assert!(flow.integrate(&ChartPoint::new(vec![0.0], vec![1.0]), -1.0, 1e-3, Method::Rk4).is_err());
    }

    #[test]
    fn energy_drift_on_cotangent() {
        let f = catalog::cotangent_constant();
        let d = build(&f.chart, &f.lagrangian, Mode::Symbolic).unwrap();
        let n = assemble_n(&d, &f.chart, &f.theta);
        let v = build_bracket(&f.chart, &d, &n).unwrap().hamiltonian_field(&d.energy);
        let flow = Flow::from_field(&f.chart, &v, Some(&d.energy)).unwrap();
        let t = flow.integrate(&ChartPoint::new(vec![0.2, -0.4], vec![0.7, 0.3]), 1.0, 1e-3, Method::Rk4).unwrap();
        assert!(t.max_drift() < 1e-8);
        assert!(base_projection_check(&f.chart, &t, 1e-6).unwrap().passed());
    }

    #[test]
    fn corrupted_field_fails_projection() {
        let f = catalog::tangent(1);
        let v = VectorField { vx: vec![f.chart.y(0) + Expr::ratio(1, 10)], vy: vec![Expr::zero()] };
        let flow = Flow::from_field(&f.chart, &v, None).unwrap();
        let t = flow.integrate(&ChartPoint::new(vec![0.0], vec![1.0]), 1.0, 1e-2, Method::Rk4).unwrap();
        let rep = base_projection_check(&f.chart, &t, 1e-6).unwrap();
        assert!(!rep.passed());
        assert!((rep.checks[0].residual.unwrap() - 0.05).abs() < 1e-6);
        assert!(rep.witness().is_some());
    }

    #[test]
    fn pointwise_matches_compiled() {
        let f = catalog::metric2();
        let d = build(&f.chart, &f.lagrangian, Mode::Symbolic).unwrap();
        let n = assemble_n(&d, &f.chart, &Form::zero(2, 2));
        let g = &d.energy + &f.chart.x(0);
        let sym = Flow::from_field(&f.chart, &energy_field_closed_form(&f.chart, &d, &n, &g).unwrap(), None).unwrap();
        let pw = Flow::pointwise(&f.chart, &d, &n, &g).unwrap();
        let z = [0.3, -0.8, 0.5, 1.1];
        for (a, b) in sym.eval(&z, 0.0).unwrap().iter().zip(pw.eval(&z, 0.0).unwrap()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn metric_spray_scaling_and_order() {
        let f = catalog::metric2();
        let d = build(&f.chart, &f.lagrangian, Mode::Symbolic).unwrap();
        let n = assemble_n(&d, &f.chart, &Form::zero(2, 2));
        let v = energy_field_closed_form(&f.chart, &d, &n, &d.energy).unwrap();
        let flow = Flow::from_field(&f.chart, &v, Some(&d.energy)).unwrap();
        let p0 = ChartPoint::new(vec![0.3, -0.2], vec![0.8, 0.5]);
        assert!(spray_scaling_check(&flow, &p0, 1.0, &[2.0, 4.0], 1e-6).unwrap().passed());
        let ratio = step_halving_ratio(&flow, &p0, 1.0, 0.1).unwrap();
        assert!((8.0..=32.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn csv_and_json_export() {
        let (ch, flow) = line_flow(Expr::zero());
        let t = flow.integrate(&ChartPoint::new(vec![0.0], vec![1.0]), 1.0, 0.5, Method::Rk4).unwrap();
        let csv = t.to_csv(&ch);
        assert_eq!(csv.lines().next().unwrap(), "t,x1,y1,drift");
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(t.to_json()["times"].as_array().unwrap().len(), 3);
    }
}
