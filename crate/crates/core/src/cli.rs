//! Command-line front end. Every command reads a JSON model and writes
//! deterministic JSON (or CSV) to stdout.
//!
//! Exit codes: 0 when all checks pass, 1 when a check fails, 2 on input errors.

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::algebroid::{validate_structure, Chart, ChartPoint};
use crate::catalog;
use crate::cochain::Form;
use crate::dynamics::{Flow, Method};
use crate::expr::{Expr, Sampler};
use crate::homotopy::{self, VerticalForm};
use crate::lagrangian::{build, LagrangianData, Mode};
use crate::linalg::Matrix;
use crate::model::Model;
use crate::poisson::{self, build_bracket, VectorField};
use crate::prolongation::{self as pr, Connection, ProlongForm, ProlongSection};
use crate::report::{CheckEntry, ValidationReport};
use crate::twoform;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "hamspray", version, about = "Hamiltonian semisprays on Lie algebroids")]
pub struct Cli {
    #[command(flatten)]
    pub sampling: SamplingArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SamplingArgs {
    /// Sampling interval `a,b` for every variable, or `name=a,b` for one; repeatable.
    #[arg(long = "box", value_name = "BOX", global = true, allow_hyphen_values = true)]
    pub boxes: Vec<String>,
    /// Number of random sample points for zero tests.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Absolute tolerance for sampled zero tests.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Refuse to run unless the structure equations hold.
    #[arg(long, global = true)]
    pub strict: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Structure equations, Hessian regularity and closedness of Theta.
    Validate { model: PathBuf },
    /// Coefficients of the Poisson bracket on coordinate functions.
    Bracket { model: PathBuf },
    /// Hamiltonian vector field of a function.
    Hamiltonian {
        model: PathBuf,
        /// `energy`, `energy+f`, or an expression in the model's variables.
        #[arg(long, default_value = "energy+f")]
        g: String,
    },
    /// Run one of the verification suites.
    Check { which: Suite, model: PathBuf },
    /// Integrate the Hamiltonian field from an initial point.
    Integrate {
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
        x0: Vec<f64>,
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
        y0: Vec<f64>,
        /// Final time.
        #[arg(long = "T", default_value_t = 1.0)]
        t_end: f64,
        /// Step size (initial step for rk45).
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        #[arg(long, value_enum, default_value_t = MethodArg::Rk4)]
        method: MethodArg,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long, default_value = "energy+f")]
        g: String,
    },
    /// Cartan forms, energy section and decomposition on the prolongation.
    Prolong { what: ProlongItem, model: PathBuf },
    /// Print a built-in example model.
    Catalog { name: String },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Jacobi,
    Semispray,
    Spray,
    Homotopy,
    Prolongation,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodArg {
    Rk4,
    Rk45,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProlongItem {
    Theta,
    Omega,
    Sigma,
    Decompose,
}

/// What a command produced: text for stdout and whether its checks passed.
pub struct Outcome {
    pub text: String,
    pub passed: bool,
}

impl Outcome {
    fn json(v: &Value, passed: bool) -> Outcome {
        Outcome { text: serde_json::to_string_pretty(v).expect("json output") + "\n", passed }
    }

    fn report(rep: &ValidationReport) -> Outcome {
        Outcome::json(&serde_json::to_value(rep).expect("report serializes"), rep.passed())
    }
}

/// Input errors, reported on stderr with exit code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

pub type CmdResult = Result<Outcome, InputError>;

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match execute(&cli) {
        Ok(o) => {
            let _ = out.write_all(o.text.as_bytes());
            if o.passed {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(InputError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_INPUT
        }
    }
}

pub fn execute(cli: &Cli) -> CmdResult {
    if let Command::Catalog { name } = &cli.command {
        let f = catalog::by_name(name).map_err(|e| InputError(format!("{e}; available: {}", catalog::NAMES.join(", "))))?;
        return Ok(Outcome { text: Model::from_fixture(&f).to_json() + "\n", passed: true });
    }
    let path = match &cli.command {
        Command::Validate { model }
        | Command::Bracket { model }
        | Command::Hamiltonian { model, .. }
        | Command::Check { model, .. }
        | Command::Integrate { model, .. }
        | Command::Prolong { model, .. } => model,
        Command::Catalog { .. } => unreachable!(),
    };
    let mut model = load(path)?;
    apply_sampling(&mut model, &cli.sampling)?;
    let sampler = model.chart.sampler(&model.sample)?;
    if cli.sampling.strict && !matches!(cli.command, Command::Validate { .. }) {
        let rep = validate_structure(&model.chart, &sampler)?;
        if !rep.passed() {
            return Ok(Outcome::report(&rep));
        }
    }
    match &cli.command {
        Command::Validate { .. } => cmd_validate(&model, &sampler),
        Command::Bracket { .. } => cmd_bracket(&model),
        Command::Hamiltonian { g, .. } => cmd_hamiltonian(&model, g),
        Command::Check { which, .. } => cmd_check(&model, &sampler, *which),
        Command::Integrate { x0, y0, t_end, h, method, format, g, .. } => {
            let method = match method {
                MethodArg::Rk4 => Method::Rk4,
                MethodArg::Rk45 => Method::Rk45,
            };
            cmd_integrate(&model, x0, y0, *t_end, *h, method, *format, g)
        }
        Command::Prolong { what, .. } => cmd_prolong(&model, &sampler, *what),
        Command::Catalog { .. } => unreachable!(),
    }
}

fn load(path: &PathBuf) -> Result<Model, InputError> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        s
    } else {
        std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?
    };
    Ok(Model::from_json(&text)?)
}

fn parse_interval(s: &str) -> Result<(f64, f64), InputError> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(InputError(format!("--box expects a,b; got `{s}`")));
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| InputError(format!("bad number in --box `{s}`")))?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| InputError(format!("bad number in --box `{s}`")))?;
    Ok((lo, hi))
}

fn apply_sampling(model: &mut Model, args: &SamplingArgs) -> Result<(), InputError> {
    for b in &args.boxes {
        match b.split_once('=') {
            Some((name, interval)) => {
                let name = name.trim();
                if !model.chart.variables().iter().any(|s| s.name() == name) {
                    return Err(InputError(format!("unknown symbol `{name}` in --box")));
                }
                model.sample.overrides.insert(name.to_string(), parse_interval(interval)?);
            }
            None => model.sample.default = parse_interval(b)?,
        }
    }
    if let Some(t) = args.trials {
        model.sample.trials = t;
    }
    if let Some(t) = args.tol {
        model.sample.tol = t;
    }
    if let Some(s) = args.seed {
        model.sample.seed = s;
    }
    Ok(())
}

fn lagrangian(model: &Model) -> Result<(&Expr, LagrangianData), InputError> {
    let l = model.lagrangian.as_ref().ok_or_else(|| InputError("model has no Lagrangian `L`".into()))?;
    Ok((l, build(&model.chart, l, Mode::Symbolic)?))
}

fn choose_g(model: &Model, data: &LagrangianData, choice: &str) -> Result<Expr, InputError> {
    Ok(match choice.trim() {
        "energy" => data.energy.clone(),
        "energy+f" => &data.energy + &model.force,
        src => model.parse_expr(src, "--g")?,
    })
}

fn strings(v: &[Expr]) -> Vec<String> {
    v.iter().map(Expr::to_string).collect()
}

fn matrix_strings(m: &Matrix) -> Vec<Vec<String>> {
    m.iter().map(|row| strings(row)).collect()
}

pub fn cmd_validate(model: &Model, sampler: &Sampler) -> CmdResult {
    let mut rep = ValidationReport::new("validate", sampler);
    rep.absorb("", validate_structure(&model.chart, sampler)?);
    if let Some(l) = &model.lagrangian {
        let data = build(&model.chart, l, Mode::Symbolic)?;
        let reg = data.regularity(sampler)?;
        rep.push_check(CheckEntry {
            label: "regularity".into(),
            passed: reg.singular.is_none(),
            residual: reg.singular.as_ref().map(|s| s.1.abs()),
            witness: reg.singular.map(|s| s.0),
            detail: format!("min |det M| = {:e} over {} samples", reg.min_abs_det, reg.samples),
        });
    }
    rep.absorb("", twoform::check_closed(&model.theta, &model.chart, sampler)?);
    Ok(Outcome::report(&rep))
}

fn bracket_parts(model: &Model) -> Result<(LagrangianData, Matrix, poisson::Bivector), InputError> {
    let (_, data) = lagrangian(model)?;
    let n = twoform::assemble_n(&data, &model.chart, &model.theta);
    let pb = build_bracket(&model.chart, &data, &n)?;
    Ok((data, n, pb))
}

pub fn cmd_bracket(model: &Model) -> CmdResult {
    let (_, _, pb) = bracket_parts(model)?;
    let ch = &model.chart;
    let zeros = vec![vec!["0".to_string(); ch.n()]; ch.n()];
    let v = json!({
        "coords": ch.coords().iter().map(|s| s.name()).collect::<Vec<_>>(),
        "fibers": ch.fibers().iter().map(|s| s.name()).collect::<Vec<_>>(),
        "Pxx": zeros,
        "Pxy": matrix_strings(&pb.pxy),
        "Pyy": matrix_strings(&pb.pyy),
    });
    Ok(Outcome::json(&v, true))
}

pub fn cmd_hamiltonian(model: &Model, g: &str) -> CmdResult {
    let (data, _, pb) = bracket_parts(model)?;
    let g = choose_g(model, &data, g)?;
    let v = pb.hamiltonian_field(&g);
    let out = json!({ "G": g.to_string(), "Vx": strings(&v.vx), "Vy": strings(&v.vy) });
    Ok(Outcome::json(&out, true))
}

fn energy_field(model: &Model) -> Result<VectorField, InputError> {
    let (data, _, pb) = bracket_parts(model)?;
    Ok(pb.hamiltonian_field(&(&data.energy + &model.force)))
}

pub fn cmd_check(model: &Model, sampler: &Sampler, which: Suite) -> CmdResult {
    let ch = &model.chart;
    let rep = match which {
        Suite::Jacobi => bracket_parts(model)?.2.check_jacobi(sampler)?,
        Suite::Semispray => poisson::is_semispray(ch, &energy_field(model)?, sampler)?,
        Suite::Spray => poisson::is_spray(ch, &energy_field(model)?, sampler)?,
        Suite::Homotopy => homotopy_suite(model, sampler)?,
        Suite::Prolongation => prolongation_suite(model, sampler)?,
    };
    Ok(Outcome::report(&rep))
}

/// Homotopy identity on `L` and on its fiber differential, plus the scaling evolution equation.
fn homotopy_suite(model: &Model, sampler: &Sampler) -> Result<ValidationReport, InputError> {
    let (l, data) = lagrangian(model)?;
    let fibers = model.chart.fibers().to_vec();
    let r = fibers.len();
    let zero = VerticalForm::new(fibers.clone(), Form::scalar(r, l.clone()));
    let mut one = Form::zero(r, 1);
    for (k, p) in data.theta_l.iter().enumerate() {
        one.set(&[k], p.clone());
    }
    let one = VerticalForm::new(fibers, one);
    let mut rep = ValidationReport::new("homotopy", sampler);
    rep.absorb("L.", homotopy::homotopy_identity_check(&zero, sampler)?);
    rep.absorb("dL.", homotopy::homotopy_identity_check(&one, sampler)?);
    rep.absorb("dL.", homotopy::evolution_check(&one, sampler, 16)?);
    Ok(rep)
}

fn form_residuals(prefix: &str, form: &ProlongForm, r: usize) -> Vec<(String, Expr)> {
    form.dense().into_iter().map(|(idx, e)| (format!("{prefix}[{}]", frame_key(&idx, r)), e)).collect()
}

fn frame_key(idx: &[usize], r: usize) -> String {
    idx.iter()
        .map(|&i| if i < r { format!("E{}", i + 1) } else { format!("V{}", i - r + 1) })
        .collect::<Vec<_>>()
        .join(",")
}

fn prolongation_suite(model: &Model, sampler: &Sampler) -> Result<ValidationReport, InputError> {
    let ch = &model.chart;
    let r = ch.r();
    let (_, data) = lagrangian(model)?;
    let cartan = pr::cartan_sections(ch, &data);
    let theta_p = pr::pullback_hor(&model.theta);
    let omega = cartan.omega.add(&theta_p);
    let mut rep = ValidationReport::new("prolongation", sampler);
    let block = cartan.omega.sub(&pr::cartan_block_formula(ch, &data));
    rep.extend_residuals(sampler, form_residuals("cartan", &block, r))?;
    rep.extend_residuals(sampler, form_residuals("j_dual", &pr::j_dual(&omega), r))?;
    let sigma = pr::hamiltonian_section(ch, &cartan.omega, &data.energy, sampler)?;
    rep.absorb("", pr::is_sode(ch, &sigma, sampler)?);
    let n0 = twoform::assemble_n(&data, ch, &Form::zero(r, 2));
    let field = build_bracket(ch, &data, &n0)?.hamiltonian_field(&data.energy);
    let diff = pr::anchor(ch, &sigma).sub(&field);
    let names: Vec<String> = ch.variables().iter().map(|s| s.name().to_string()).collect();
    rep.extend_residuals(
        sampler,
        diff.components().into_iter().zip(&names).map(|(e, v)| (format!("anchor[{v}]"), e)).collect(),
    )?;
    let (_, zrep) = pr::force_correction_report(ch, &data, &theta_p, &model.force, sampler)?;
    rep.absorb("", zrep);
    let dec = pr::decompose_symplectic(ch, &omega, &Connection::trivial(r), sampler)?;
    rep.extend_residuals(sampler, form_residuals("decompose", &dec.residual(ch, &omega), r))?;
    Ok(rep)
}

fn form_json(form: &ProlongForm) -> Value {
    let r = form.rank() / 2;
    let comps: serde_json::Map<String, Value> =
        form.components().map(|(idx, e)| (frame_key(idx, r), Value::String(e.to_string()))).collect();
    json!({ "degree": form.degree(), "components": comps })
}

fn section_json(s: &ProlongSection) -> Value {
    json!({ "E": strings(&s.a), "V": strings(&s.b) })
}

pub fn cmd_prolong(model: &Model, sampler: &Sampler, what: ProlongItem) -> CmdResult {
    let ch = &model.chart;
    let (_, data) = lagrangian(model)?;
    let cartan = pr::cartan_sections(ch, &data);
    let v = match what {
        ProlongItem::Theta => json!({ "theta_L": form_json(&cartan.theta) }),
        ProlongItem::Omega => json!({ "omega_L": form_json(&cartan.omega) }),
        ProlongItem::Sigma => {
            let s = pr::hamiltonian_section(ch, &cartan.omega, &data.energy, sampler)?;
            json!({ "sigma": section_json(&s) })
        }
        ProlongItem::Decompose => {
            let omega = cartan.omega.add(&pr::pullback_hor(&model.theta));
            let dec = pr::decompose_symplectic(ch, &omega, &Connection::trivial(ch.r()), sampler)?;
            let residual = dec.residual(ch, &omega);
            let rep = ValidationReport::from_residuals("decompose", sampler, form_residuals("residual", &residual, ch.r()))?;
            let passed = rep.passed();
            let out = json!({
                "theta": form_json(&dec.theta),
                "zeta": form_json(&dec.zeta),
                "report": serde_json::to_value(&rep)?,
            });
            return Ok(Outcome::json(&out, passed));
        }
    };
    Ok(Outcome::json(&v, true))
}

/// Flow of the Hamiltonian field of `g` (see [`Command::Hamiltonian`] for the accepted forms).
pub fn hamiltonian_flow(model: &Model, g: &str) -> Result<(Flow, Expr), InputError> {
    let ch = &model.chart;
    let (_, data) = lagrangian(model)?;
    let g = choose_g(model, &data, g)?;
    let n = twoform::assemble_n(&data, ch, &model.theta);
    let flow = match data.mode {
        Mode::Symbolic => Flow::from_field(ch, &build_bracket(ch, &data, &n)?.hamiltonian_field(&g), Some(&g))?,
        Mode::Pointwise => Flow::pointwise(ch, &data, &n, &g)?,
    };
    Ok((flow, g))
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_integrate(model: &Model, x0: &[f64], y0: &[f64], t_end: f64, h: f64, method: Method, format: Format, g: &str) -> CmdResult {
    let ch: &Chart = &model.chart;
    if x0.len() != ch.n() || y0.len() != ch.r() {
        return Err(InputError(format!("--x0 needs {} values and --y0 needs {}", ch.n(), ch.r())));
    }
    let (flow, g) = hamiltonian_flow(model, g)?;
    let traj = match flow.integrate(&ChartPoint::new(x0.to_vec(), y0.to_vec()), t_end, h, method) {
        Ok(t) => t,
        Err(crate::dynamics::DynamicsError::BadRequest(m)) => return Err(InputError(m)),
        Err(e) => return Ok(Outcome::json(&json!({ "status": "fail", "error": e.to_string() }), false)),
    };
    match format {
        Format::Csv => Ok(Outcome { text: traj.to_csv(ch), passed: true }),
        Format::Json => {
            let out = json!({
                "G": g.to_string(),
                "method": format!("{method:?}").to_lowercase(),
                "T": t_end,
                "h": h,
                "trajectory": traj.to_json(),
            });
            Ok(Outcome::json(&out, true))
        }
    }
}
