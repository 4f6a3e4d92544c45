//! Calculus on the prolongation of the algebroid over its own projection.
//!
//! The local frame is `E_1..E_r, Υ_1..Υ_r`; as a [`Form`] index, `a < r`
//! is `E_a` and `a ≥ r` is `Υ_{a−r}`. The anchor sends `E_j` to
//! `ρ^i_j ∂/∂x^i` and `Υ_k` to `∂/∂y^k`; the only nonzero frame bracket is
//! `[E_i, E_j] = C^k_ij E_k`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::algebroid::{AForm, Chart, ChartPoint};
use crate::cochain::{increasing_tuples, koszul, DegreeError, Form, Frame};
use crate::expr::{Compiled, EvalError, Expr, Number, Sampler, Symbol};
use crate::homotopy::{self, HomotopyError};
use crate::lagrangian::LagrangianData;
use crate::linalg::{self, Matrix};
use crate::poisson::VectorField;
use crate::report::ValidationReport;
use crate::twoform;

pub type ProlongForm = Form;

/// Largest frame size for which a general (non block-triangular) 2-form is inverted symbolically.
pub const SYMBOLIC_SOLVE_LIMIT: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProlongError {
    #[error(transparent)]
    Degree(#[from] DegreeError),
    #[error("2-form is degenerate at {witness:?}")]
    DegenerateForm { witness: BTreeMap<String, f64> },
    #[error("2-form is not closed ({0})")]
    NotClosed(String),
    #[error("2-form does not vanish on vertical pairs ({0})")]
    NotVerticalVanishing(String),
    #[error("no symbolic solve for this 2-form; use the pointwise evaluator")]
    NoSymbolicSolve,
    #[error(transparent)]
    Homotopy(#[from] HomotopyError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// `Σ a^i E_i + Σ b^j Υ_j` with coefficients in `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProlongSection {
    pub a: Vec<Expr>,
    pub b: Vec<Expr>,
}

impl ProlongSection {
    pub fn zero(r: usize) -> Self {
        ProlongSection { a: vec![Expr::zero(); r], b: vec![Expr::zero(); r] }
    }

    /// Frame element `idx` (same numbering as form indices).
    pub fn basis(r: usize, idx: usize) -> Self {
        let mut s = ProlongSection::zero(r);
        if idx < r {
            s.a[idx] = Expr::one();
        } else {
            s.b[idx - r] = Expr::one();
        }
        s
    }

    /// `Δ = y^j Υ_j`.
    pub fn liouville(chart: &Chart) -> Self {
        ProlongSection { a: vec![Expr::zero(); chart.r()], b: (0..chart.r()).map(|j| chart.y(j)).collect() }
    }

    pub fn rank(&self) -> usize {
        self.a.len()
    }

    /// Coefficients laid out like form indices.
    pub fn coefficients(&self) -> Vec<Expr> {
        self.a.iter().chain(&self.b).cloned().collect()
    }

    pub fn from_coefficients(c: &[Expr]) -> Self {
        let r = c.len() / 2;
        ProlongSection { a: c[..r].to_vec(), b: c[r..].to_vec() }
    }

    pub fn is_vertical(&self) -> bool {
        self.a.iter().all(Expr::is_zero)
    }

    pub fn add(&self, o: &ProlongSection) -> Self {
        ProlongSection {
            a: self.a.iter().zip(&o.a).map(|(p, q)| p + q).collect(),
            b: self.b.iter().zip(&o.b).map(|(p, q)| p + q).collect(),
        }
    }

    pub fn sub(&self, o: &ProlongSection) -> Self {
        ProlongSection {
            a: self.a.iter().zip(&o.a).map(|(p, q)| p - q).collect(),
            b: self.b.iter().zip(&o.b).map(|(p, q)| p - q).collect(),
        }
    }

    /// Derivative of `f` along the anchor of this section.
    pub fn apply(&self, chart: &Chart, f: &Expr) -> Expr {
        let mut terms = Vec::new();
        for (j, c) in self.a.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
            terms.push(c * &chart.anchor_apply(j, f));
        }
        for (c, y) in self.b.iter().zip(chart.fibers()).filter(|(c, _)| !c.is_zero()) {
            terms.push(c * &f.diff(y));
        }
        Expr::sum(terms)
    }
}

/// The frame `{E_i, Υ_j}` as a [`Frame`] for the Koszul differential.
pub struct ProlongFrame<'a>(pub &'a Chart);

impl Frame for ProlongFrame<'_> {
    fn rank(&self) -> usize {
        2 * self.0.r()
    }

    fn anchor_derivative(&self, i: usize, f: &Expr) -> Expr {
        let r = self.0.r();
        if i < r {
            self.0.anchor_apply(i, f)
        } else {
            f.diff(&self.0.fibers()[i - r])
        }
    }

    fn bracket(&self, i: usize, j: usize) -> Vec<(usize, Expr)> {
        let r = self.0.r();
        if i >= r || j >= r {
            return Vec::new();
        }
        (0..r).map(|k| (k, self.0.c(k, i, j))).filter(|(_, c)| !c.is_zero()).collect()
    }
}

pub fn anchor(chart: &Chart, s: &ProlongSection) -> VectorField {
    let vx = (0..chart.n())
        .map(|i| Expr::sum(s.a.iter().enumerate().map(|(j, a)| a * chart.rho(i, j))))
        .collect();
    VectorField { vx, vy: s.b.clone() }
}

pub fn lie_bracket(chart: &Chart, s1: &ProlongSection, s2: &ProlongSection) -> ProlongSection {
    let r = chart.r();
    let mut a = Vec::with_capacity(r);
    let mut b = Vec::with_capacity(r);
    for k in 0..r {
        let mut terms = vec![s1.apply(chart, &s2.a[k]), -s2.apply(chart, &s1.a[k])];
        for i in 0..r {
            for j in 0..r {
                if i != j && !s1.a[i].is_zero() && !s2.a[j].is_zero() {
                    terms.push(&s1.a[i] * &s2.a[j] * chart.c(k, i, j));
                }
            }
        }
        a.push(Expr::sum(terms));
        b.push(s1.apply(chart, &s2.b[k]) - s2.apply(chart, &s1.b[k]));
    }
    ProlongSection { a, b }
}

/// Koszul differential on the prolongation, degrees 0 to 2.
pub fn d_prolong(chart: &Chart, form: &ProlongForm) -> Result<ProlongForm, DegreeError> {
    if form.degree() > 2 {
        return Err(DegreeError { degree: form.degree(), max: 2 });
    }
    Ok(koszul(&ProlongFrame(chart), form))
}

/// Vertical endomorphism on sections: `(a, b) ↦ (0, a)`.
pub fn vertical_j(s: &ProlongSection) -> ProlongSection {
    ProlongSection { a: vec![Expr::zero(); s.rank()], b: s.a.clone() }
}

/// Dual action on forms, the degree-0 derivation with `J Υ^j = −E^j`, `J E^i = 0`.
///
/// Equivalently `(Jω)(Z_1..Z_k) = −Σ_a ω(Z_1.., J Z_a, ..Z_k)`.
pub fn j_dual(form: &ProlongForm) -> ProlongForm {
    let r = form.rank() / 2;
    let mut out = Form::zero(form.rank(), form.degree());
    for idx in increasing_tuples(form.rank(), form.degree()) {
        let mut terms = Vec::new();
        for slot in 0..idx.len() {
            if idx[slot] < r {
                let mut moved = idx.clone();
                moved[slot] += r;
                terms.push(-form.get(&moved));
            }
        }
        out.set(&idx, Expr::sum(terms));
    }
    out
}

/// `θ_L = (∂L/∂y^k) E^k` and `ω_L = dθ_L`.
pub struct Cartan {
    pub theta: ProlongForm,
    pub omega: ProlongForm,
}

pub fn cartan_sections(chart: &Chart, data: &LagrangianData) -> Cartan {
    let r = chart.r();
    let mut theta = Form::zero(2 * r, 1);
    for (k, p) in data.theta_l.iter().enumerate() {
        theta.set(&[k], p.clone());
    }
    let omega = koszul(&ProlongFrame(chart), &theta);
    Cartan { theta, omega }
}

/// `ω_L` assembled from its blocks: `ω(Υ_i, E_j) = M_ij`, `ω(E_k, E_l) = N⁰_kl`.
pub fn cartan_block_formula(chart: &Chart, data: &LagrangianData) -> ProlongForm {
    let r = chart.r();
    let n0 = twoform::assemble_n(data, chart, &Form::zero(r, 2));
    let mut w = Form::zero(2 * r, 2);
    for k in 0..r {
        for l in k + 1..r {
            w.set(&[k, l], n0[k][l].clone());
        }
        for j in 0..r {
            w.set(&[k, r + j], -&data.m[j][k]);
        }
    }
    w
}

/// Embeds an algebroid 2-form as a form on the `E∧E` block.
pub fn pullback_hor(theta: &AForm) -> ProlongForm {
    let r = theta.rank();
    let mut out = Form::zero(2 * r, theta.degree());
    for (idx, e) in theta.components() {
        out.set(idx, e.clone());
    }
    out
}

/// Dense matrix `W_ab = Ω(e_a, e_b)` of a 2-form.
pub fn form_matrix(omega: &ProlongForm) -> Matrix {
    let m = omega.rank();
    (0..m).map(|a| (0..m).map(|b| omega.get(&[a, b])).collect()).collect()
}

fn witness_map(inputs: &[Symbol], p: &[f64]) -> BTreeMap<String, f64> {
    inputs.iter().zip(p).map(|(s, v)| (s.name().to_string(), *v)).collect()
}

/// First sample where `det` is numerically zero (or fails to evaluate).
fn degenerate_witness(det: &Expr, sampler: &Sampler) -> Result<Option<BTreeMap<String, f64>>, EvalError> {
    let inputs = sampler.inputs();
    let points = sampler.points();
    if det.is_zero() {
        return Ok(Some(witness_map(&inputs, points.first().map(Vec::as_slice).unwrap_or(&[]))));
    }
    let prog = Compiled::new(std::slice::from_ref(det), &inputs)?;
    for p in &points {
        match prog.run(p) {
            Ok(v) if v[0].abs() > 1e-12 => {}
            _ => return Ok(Some(witness_map(&inputs, p))),
        }
    }
    Ok(None)
}

/// The section `σ` with `i_σ Ω = −dG`, i.e. `W σ = dG`.
///
/// When the `Υ∧Υ` block vanishes the system is block triangular and only
/// the `Υ∧E` block is inverted; otherwise the full matrix is inverted for
/// frames of size at most [`SYMBOLIC_SOLVE_LIMIT`]. Nondegeneracy is
/// checked on `sampler`.
pub fn hamiltonian_section(chart: &Chart, omega: &ProlongForm, g: &Expr, sampler: &Sampler) -> Result<ProlongSection, ProlongError> {
    let r = chart.r();
    let dg = d_prolong(chart, &Form::scalar(2 * r, g.clone()))?;
    let rhs: Vec<Expr> = (0..2 * r).map(|a| dg.get(&[a])).collect();
    let w = form_matrix(omega);
    let vertical_block_zero = (0..r).all(|i| (0..r).all(|j| w[r + i][r + j].is_zero()));
    if vertical_block_zero {
        // β_ij = Ω(Υ_i, E_j), α_ij = Ω(E_i, E_j): β a = dG_Υ, βᵀ b = α a − dG_E.
        let beta: Matrix = (0..r).map(|i| (0..r).map(|j| w[r + i][j].clone()).collect()).collect();
        let det = linalg::det(&beta);
        if let Some(witness) = degenerate_witness(&det, sampler)? {
            return Err(ProlongError::DegenerateForm { witness });
        }
        if r > SYMBOLIC_SOLVE_LIMIT {
            return Err(ProlongError::NoSymbolicSolve);
        }
        let (binv, _) = linalg::inverse(&beta).ok_or(ProlongError::NoSymbolicSolve)?;
        let a = linalg::matvec(&binv, &rhs[r..]);
        let alpha_a: Vec<Expr> = (0..r).map(|i| Expr::sum((0..r).map(|j| &w[i][j] * &a[j]))).collect();
        let tail: Vec<Expr> = (0..r).map(|i| &alpha_a[i] - &rhs[i]).collect();
        let b = linalg::matvec(&linalg::transpose(&binv), &tail);
        return Ok(ProlongSection { a, b });
    }
    let det = linalg::det(&w);
    if let Some(witness) = degenerate_witness(&det, sampler)? {
        return Err(ProlongError::DegenerateForm { witness });
    }
    if 2 * r > SYMBOLIC_SOLVE_LIMIT {
        return Err(ProlongError::NoSymbolicSolve);
    }
    let (winv, _) = linalg::inverse(&w).ok_or(ProlongError::NoSymbolicSolve)?;
    Ok(ProlongSection::from_coefficients(&linalg::matvec(&winv, &rhs)))
}

/// Pointwise solve of `W σ = dG`, returning the coefficients of `σ`.
pub fn hamiltonian_section_at(chart: &Chart, omega: &ProlongForm, g: &Expr, p: &ChartPoint) -> Result<Vec<f64>, ProlongError> {
    let r = chart.r();
    let env = chart.bind(p);
    let dg = d_prolong(chart, &Form::scalar(2 * r, g.clone()))?;
    let rhs = (0..2 * r).map(|a| dg.get(&[a]).eval(env.as_slice())).collect::<Result<Vec<f64>, _>>()?;
    let w = form_matrix(omega)
        .iter()
        .map(|row| row.iter().map(|e| e.eval(env.as_slice())).collect::<Result<Vec<f64>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    linalg::solve_numeric(&w, &rhs).ok_or_else(|| ProlongError::DegenerateForm {
        witness: env.iter().map(|(s, v)| (s.name().to_string(), *v)).collect(),
    })
}

/// Residuals `a^j − y^j`.
pub fn is_sode(chart: &Chart, s: &ProlongSection, sampler: &Sampler) -> Result<ValidationReport, EvalError> {
    let residuals = s
        .a
        .iter()
        .enumerate()
        .map(|(j, a)| (format!("sode[{}]", j + 1), a - &chart.y(j)))
        .collect();
    ValidationReport::from_residuals("sode", sampler, residuals)
}

/// `i_S ω` for a section and a form of positive degree.
pub fn interior(s: &ProlongSection, form: &ProlongForm) -> ProlongForm {
    form.interior(&s.coefficients())
}

/// The vertical `Z` with `i_Z ω_L = −d(f) − i_σ Θp`, where `σ = σ_{E_L}`.
///
/// Returns `(Z, σ)`.
pub fn force_correction(
    chart: &Chart,
    data: &LagrangianData,
    theta_p: &ProlongForm,
    f: &Expr,
    sampler: &Sampler,
) -> Result<(ProlongSection, ProlongSection), ProlongError> {
    let r = chart.r();
    let cartan = cartan_sections(chart, data);
    let sigma = hamiltonian_section(chart, &cartan.omega, &data.energy, sampler)?;
    let minv = data.minv.as_ref().ok_or(ProlongError::NoSymbolicSolve)?;
    let i_sigma = interior(&sigma, theta_p);
    let rhs: Vec<Expr> = (0..r).map(|j| -chart.anchor_apply(j, f) - i_sigma.get(&[j])).collect();
    let b = linalg::matvec(minv, &rhs);
    Ok((ProlongSection { a: vec![Expr::zero(); r], b }, sigma))
}

/// Checks that `Z + σ` is a SODE and that `i_{Z+σ}(Θp + ω_L) + d(E_L + f)` vanishes.
pub fn force_correction_report(
    chart: &Chart,
    data: &LagrangianData,
    theta_p: &ProlongForm,
    f: &Expr,
    sampler: &Sampler,
) -> Result<(ProlongSection, ValidationReport), ProlongError> {
    let (z, sigma) = force_correction(chart, data, theta_p, f, sampler)?;
    let total = z.add(&sigma);
    let mut rep = ValidationReport::new("force_correction", sampler);
    rep.absorb("", is_sode(chart, &total, sampler)?);
    let omega = cartan_sections(chart, data).omega.add(theta_p);
    let dg = d_prolong(chart, &Form::scalar(2 * chart.r(), &data.energy + f))?;
    let res = interior(&total, &omega).add(&dg);
    let residuals = res.dense().into_iter().map(|(idx, e)| (format!("dynamics[{}]", idx[0] + 1), e)).collect();
    rep.extend_residuals(sampler, residuals)?;
    Ok((z, rep))
}

/// An Ehresmann connection: horizontal lifts `hor_i = E_i − γ^j_i Υ_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    /// `gamma[i][j] = γ^j_i`.
    pub gamma: Matrix,
}

impl Connection {
    pub fn trivial(r: usize) -> Self {
        Connection { gamma: linalg::zeros(r, r) }
    }

    pub fn rank(&self) -> usize {
        self.gamma.len()
    }

    /// Adapted frame element `idx` in the `{E, Υ}` frame.
    pub fn frame_section(&self, idx: usize) -> ProlongSection {
        let r = self.rank();
        let mut s = ProlongSection::basis(r, idx);
        if idx < r {
            s.b = self.gamma[idx].iter().map(|g| -g).collect();
        }
        s
    }

    fn transform(&self, sign: i64) -> Matrix {
        let r = self.rank();
        let mut t = linalg::identity(2 * r);
        for i in 0..r {
            for j in 0..r {
                t[i][r + j] = self.gamma[i][j].scale(&Number::int(sign));
            }
        }
        t
    }

    /// Components on the adapted frame `{hor_i, Υ_j}`.
    pub fn to_adapted(&self, form: &ProlongForm) -> ProlongForm {
        form.change_frame(&self.transform(-1))
    }

    pub fn from_adapted(&self, form: &ProlongForm) -> ProlongForm {
        form.change_frame(&self.transform(1))
    }

    /// Re-expresses `A^i E_i + B^j Υ_j` in the adapted frame.
    pub fn adapted_coefficients(&self, s: &ProlongSection) -> Vec<Expr> {
        let r = self.rank();
        let mut out = s.a.clone();
        for j in 0..r {
            out.push(&s.b[j] + &Expr::sum((0..r).map(|i| &s.a[i] * &self.gamma[i][j])));
        }
        out
    }
}

/// Bidegree `(horizontal, vertical)` of an adapted-frame index tuple.
pub fn bidegree(idx: &[usize], r: usize) -> (usize, usize) {
    let p = idx.iter().filter(|&&i| i < r).count();
    (p, idx.len() - p)
}

/// The adapted frame `{hor_i, Υ_j}` as a [`Frame`].
pub struct AdaptedFrame<'a> {
    pub chart: &'a Chart,
    pub conn: &'a Connection,
}

impl Frame for AdaptedFrame<'_> {
    fn rank(&self) -> usize {
        2 * self.chart.r()
    }

    fn anchor_derivative(&self, i: usize, f: &Expr) -> Expr {
        self.conn.frame_section(i).apply(self.chart, f)
    }

    fn bracket(&self, i: usize, j: usize) -> Vec<(usize, Expr)> {
        let s = lie_bracket(self.chart, &self.conn.frame_section(i), &self.conn.frame_section(j));
        self.conn.adapted_coefficients(&s).into_iter().enumerate().filter(|(_, c)| !c.is_zero()).collect()
    }
}

/// Pieces of a form by bidegree, as adapted-frame forms.
pub fn bigrade(form: &ProlongForm, conn: &Connection) -> BTreeMap<(usize, usize), ProlongForm> {
    let r = conn.rank();
    let adapted = conn.to_adapted(form);
    let mut out: BTreeMap<(usize, usize), ProlongForm> = BTreeMap::new();
    for (idx, e) in adapted.components() {
        out.entry(bidegree(idx, r)).or_insert_with(|| Form::zero(2 * r, form.degree())).set(idx, e.clone());
    }
    out
}

/// The three parts of the differential with respect to a connection, in the `{E, Υ}` frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DSplit {
    /// Bidegree `(1, 0)` part.
    pub horizontal: ProlongForm,
    /// Bidegree `(0, 1)` part.
    pub vertical: ProlongForm,
    /// Bidegree `(2, −1)` part.
    pub curvature: ProlongForm,
}

pub fn d_split(chart: &Chart, form: &ProlongForm, conn: &Connection) -> Result<DSplit, DegreeError> {
    if form.degree() > 2 {
        return Err(DegreeError { degree: form.degree(), max: 2 });
    }
    let r = chart.r();
    let frame = AdaptedFrame { chart, conn };
    let k = form.degree() + 1;
    let mut parts = [Form::zero(2 * r, k), Form::zero(2 * r, k), Form::zero(2 * r, k)];
    for ((p, q), piece) in bigrade(form, conn) {
        for (idx, e) in koszul(&frame, &piece).components() {
            let slot = match bidegree(idx, r) {
                b if b == (p + 1, q) => 0,
                b if b == (p, q + 1) => 1,
                b if q > 0 && b == (p + 2, q - 1) => 2,
                b => unreachable!("differential produced bidegree {b:?} from ({p},{q})"),
            };
            parts[slot].add_to(idx, e.clone());
        }
    }
    let [h, v, c] = parts;
    Ok(DSplit { horizontal: conn.from_adapted(&h), vertical: conn.from_adapted(&v), curvature: conn.from_adapted(&c) })
}

/// `Ω = Θ + dζ` with `ζ` horizontal and `Θ` of bidegree `(2, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub theta: ProlongForm,
    pub zeta: ProlongForm,
}

impl Decomposition {
    /// `Θ + dζ − Ω`.
    pub fn residual(&self, chart: &Chart, omega: &ProlongForm) -> ProlongForm {
        self.theta.add(&koszul(&ProlongFrame(chart), &self.zeta)).sub(omega)
    }
}

fn label(prefix: &str, idx: &[usize], r: usize) -> String {
    let parts: Vec<String> = idx
        .iter()
        .map(|&i| if i < r { format!("E{}", i + 1) } else { format!("V{}", i - r + 1) })
        .collect();
    format!("{prefix}[{}]", parts.join(","))
}

/// Splits a closed 2-form that vanishes on vertical pairs.
pub fn decompose_symplectic(chart: &Chart, omega: &ProlongForm, conn: &Connection, sampler: &Sampler) -> Result<Decomposition, ProlongError> {
    let r = chart.r();
    let vertical: Vec<(String, Expr)> = omega
        .components()
        .filter(|(idx, _)| idx.iter().all(|&i| i >= r))
        .map(|(idx, e)| (label("vertical", idx, r), e.clone()))
        .collect();
    let rep = ValidationReport::from_residuals("vertical", sampler, vertical)?;
    if let Some(bad) = rep.failures().next() {
        return Err(ProlongError::NotVerticalVanishing(bad.label.clone()));
    }
    let d = d_prolong(chart, omega)?;
    let closed: Vec<(String, Expr)> = d.components().map(|(idx, e)| (label("closed", idx, r), e.clone())).collect();
    let rep = ValidationReport::from_residuals("closed", sampler, closed)?;
    if let Some(bad) = rep.failures().next() {
        return Err(ProlongError::NotClosed(bad.label.clone()));
    }
    let pieces = bigrade(omega, conn);
    let empty = Form::zero(2 * r, 2);
    let mixed = pieces.get(&(1, 1)).unwrap_or(&empty);
    let zeta_adapted = homotopy::dprime_primitive(mixed, 1, 1, chart.fibers(), sampler)?;
    let zeta = conn.from_adapted(&zeta_adapted);
    let dprime = d_split(chart, &zeta, conn)?.horizontal;
    let theta = conn.from_adapted(pieces.get(&(2, 0)).unwrap_or(&empty)).sub(&dprime);
    Ok(Decomposition { theta, zeta })
}
