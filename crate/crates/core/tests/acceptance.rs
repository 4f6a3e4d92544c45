//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the summary always prints; the
//! process exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use hamspray::algebroid::{validate_structure, Chart, ChartPoint, SampleSpec};
use hamspray::catalog::{self, Fixture, VALID};
use hamspray::cochain::{increasing_tuples, koszul, Form};
use hamspray::dynamics::{spray_scaling_check, step_halving_ratio, Flow, Method};
use hamspray::expr::{Expr, SampleBox, Sampler, Symbol};
use hamspray::homotopy::{dprime_primitive, homotopy_identity_check, VerticalForm};
use hamspray::lagrangian::{build, LagrangianData, Mode};
use hamspray::poisson::{build_bracket, is_semispray, is_spray, Bivector};
use hamspray::prolongation::{self as pr, bidegree, Connection, ProlongFrame, ProlongSection};
use hamspray::report::ValidationReport;
use hamspray::twoform::assemble_n;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

struct Setup {
    fx: Fixture,
    data: LagrangianData,
}

fn setup(name: &str) -> Setup {
    let fx = catalog::by_name(name).unwrap();
    let data = build(&fx.chart, &fx.lagrangian, Mode::Symbolic).unwrap();
    Setup { fx, data }
}

fn sampler(chart: &Chart, tol: f64) -> Sampler {
    chart.sampler(&SampleSpec { tol, ..SampleSpec::default() }).unwrap()
}

fn bracket(s: &Setup, theta: &Form) -> Bivector {
    let n = assemble_n(&s.data, &s.fx.chart, theta);
    build_bracket(&s.fx.chart, &s.data, &n).unwrap()
}

fn forces(chart: &Chart) -> Vec<Expr> {
    let mut out = vec![Expr::zero(), chart.x(0)];
    if chart.n() >= 2 {
        out.push(chart.x(0) * chart.x(1));
    }
    out
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let spent = start.elapsed();
    if spent <= limit {
        Ok(())
    } else {
        Err(format!("took {spent:?}, limit {limit:?}"))
    }
}

fn require(rep: &ValidationReport, what: &str) -> Result<(), String> {
    if rep.passed() {
        return Ok(());
    }
    let bad: Vec<String> = rep.failures().map(|e| e.label.clone()).collect();
    Err(format!("{what}: failed {bad:?} (max residual {:e})", rep.residual_max()))
}

fn structure_gate() -> Outcome {
    let start = Instant::now();
    for name in ["tangent1", "tangent2", "tangent3", "so3", "cotangent"] {
        let ch = catalog::by_name(name).unwrap().chart;
        require(&validate_structure(&ch, &sampler(&ch, 1e-9)).unwrap(), name)?;
    }
    let bad = catalog::so3_perturbed().chart;
    let rep = validate_structure(&bad, &sampler(&bad, 1e-9)).unwrap();
    if rep.passed() || rep.witness().is_none() {
        return Err("perturbed so(3) was not rejected with a witness".into());
    }
    within(start, Duration::from_secs(5))?;
    Ok(format!("5 fixtures valid, perturbed rejected, {:?}", start.elapsed()))
}

fn semispray_suite() -> Outcome {
    let start = Instant::now();
    let mut runs = 0;
    let mut worst: f64 = 0.0;
    for name in VALID {
        let s = setup(name);
        let ch = &s.fx.chart;
        for theta in [Form::zero(ch.r(), 2), s.fx.theta.clone()] {
            let pb = bracket(&s, &theta);
            for f in forces(ch) {
                let v = pb.hamiltonian_field(&(&s.data.energy + &f));
                let rep = is_semispray(ch, &v, &sampler(ch, 1e-10)).unwrap();
                require(&rep, &format!("{name} f={f}"))?;
                worst = worst.max(rep.residual_max());
                runs += 1;
            }
        }
    }
    within(start, Duration::from_secs(10))?;
    Ok(format!("{runs} fields, max residual {worst:e}, {:?}", start.elapsed()))
}

fn jacobi_suite() -> Outcome {
    let start = Instant::now();
    for name in VALID {
        let s = setup(name);
        let rep = bracket(&s, &s.fx.theta).check_jacobi(&sampler(&s.fx.chart, 1e-8)).unwrap();
        require(&rep, name)?;
    }
    let s = setup("so3");
    let mut pb = bracket(&s, &s.fx.theta);
    let x1 = s.fx.chart.x(0);
    pb.pyy[0][1] = &pb.pyy[0][1] + &x1;
    pb.pyy[1][0] = &pb.pyy[1][0] - &x1;
    let rep = pb.check_jacobi(&sampler(&s.fx.chart, 1e-8)).unwrap();
    if rep.passed() || rep.witness().is_none() {
        return Err("corrupted bivector passed the Jacobi check".into());
    }
    within(start, Duration::from_secs(10))?;
    Ok(format!("{} valid brackets, corruption caught, {:?}", VALID.len(), start.elapsed()))
}

fn field_residuals(ch: &Chart, diff: Vec<Expr>) -> Vec<(String, Expr)> {
    ch.variables().iter().zip(diff).map(|(v, e)| (v.name().to_string(), e)).collect()
}

fn prolongation_oracle() -> Outcome {
    for name in VALID {
        let s = setup(name);
        let ch = &s.fx.chart;
        let smp = sampler(ch, 1e-10);
        let cartan = pr::cartan_sections(ch, &s.data);
        let sigma = pr::hamiltonian_section(ch, &cartan.omega, &s.data.energy, &smp).map_err(|e| format!("{name}: {e}"))?;
        let field = bracket(&s, &Form::zero(ch.r(), 2)).hamiltonian_field(&s.data.energy);
        let diff = pr::anchor(ch, &sigma).sub(&field).components();
        require(&ValidationReport::from_residuals("anchor", &smp, field_residuals(ch, diff)).unwrap(), name)?;

        if s.fx.theta.is_zero() {
            continue;
        }
        let theta_p = pr::pullback_hor(&s.fx.theta);
        let f = ch.x(0);
        let (z, sigma) = pr::force_correction(ch, &s.data, &theta_p, &f, &smp).map_err(|e| format!("{name}: {e}"))?;
        let field = bracket(&s, &s.fx.theta).hamiltonian_field(&(&s.data.energy + &f));
        let diff = pr::anchor(ch, &z.add(&sigma)).sub(&field).components();
        require(&ValidationReport::from_residuals("anchor", &smp, field_residuals(ch, diff)).unwrap(), &format!("{name} with Theta"))?;
    }
    Ok(format!("{} fixtures agree with the bracket field", VALID.len()))
}

fn sode_property() -> Outcome {
    for name in VALID {
        let s = setup(name);
        let ch = &s.fx.chart;
        let smp = sampler(ch, 1e-9);
        let omega = pr::cartan_sections(ch, &s.data).omega;
        let sigma = pr::hamiltonian_section(ch, &omega, &s.data.energy, &smp).map_err(|e| format!("{name}: {e}"))?;
        require(&pr::is_sode(ch, &sigma, &smp).unwrap(), name)?;
        if pr::is_sode(ch, &ProlongSection::liouville(ch), &smp).unwrap().passed() {
            return Err(format!("{name}: Liouville section reported as SODE"));
        }
    }
    Ok(format!("{} energy sections are SODEs, Liouville section rejected", VALID.len()))
}

fn cartan_identity() -> Outcome {
    for name in VALID {
        let s = setup(name);
        let ch = &s.fx.chart;
        let cartan = pr::cartan_sections(ch, &s.data);
        let direct = pr::d_prolong(ch, &cartan.theta).unwrap();
        if direct != pr::cartan_block_formula(ch, &s.data) {
            return Err(format!("{name}: differential of theta_L differs from the block formula"));
        }
    }
    Ok(format!("{} fixtures match symbol-for-symbol", VALID.len()))
}

fn random_poly(rng: &mut ChaCha8Rng, vars: &[Expr]) -> Expr {
    let terms = rng.random_range(1..=3);
    Expr::sum((0..terms).map(|_| {
        let c = Expr::ratio(rng.random_range(-5..=5), rng.random_range(1..=3));
        let mono = Expr::product(vars.iter().map(|v| v.powi(rng.random_range(0..=2))));
        c * mono
    }))
}

fn random_form(rng: &mut ChaCha8Rng, rank: usize, degree: usize, vars: &[Expr], keep: impl Fn(&[usize]) -> bool) -> Form {
    let mut f = Form::zero(rank, degree);
    for idx in increasing_tuples(rank, degree) {
        if keep(&idx) && rng.random_bool(0.7) {
            f.set(&idx, random_poly(rng, vars));
        }
    }
    f
}

fn names(prefix: &str, n: usize) -> Vec<Symbol> {
    (1..=n).map(|i| Symbol::new(&format!("{prefix}{i}"))).collect()
}

fn homotopy_identities() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut count = 0;
    for r in 1..=3 {
        let fibers = names("y", r);
        let mut syms = vec![Symbol::new("x1")];
        syms.extend(fibers.iter().cloned());
        let vars: Vec<Expr> = syms.iter().map(Expr::sym).collect();
        let smp = Sampler::new(SampleBox::uniform(&syms, -1.0, 1.0).unwrap(), 64, 1e-9, 11);
        for k in 0..=3 {
            for _ in 0..50 {
                let omega = VerticalForm::new(fibers.clone(), random_form(&mut rng, r, k, &vars, |_| true));
                let rep = homotopy_identity_check(&omega, &smp).map_err(|e| format!("k={k} r={r}: {e}"))?;
                if !rep.all_proven() {
                    return Err(format!("k={k} r={r}: residual not proven zero ({:e})", rep.residual_max()));
                }
                count += 1;
            }
        }
        let mut wavy = Form::zero(r, 1);
        let y1 = Expr::sym(&fibers[0]);
        wavy.set(&[0], (&y1 * &vars[0]).sin() + (&y1 * &y1).exp());
        let rep = homotopy_identity_check(&VerticalForm::new(fibers.clone(), wavy), &Sampler { tol: 1e-8, ..smp.clone() })
            .map_err(|e| format!("non-polynomial r={r}: {e}"))?;
        require(&rep, &format!("non-polynomial r={r}"))?;
    }
    within(start, Duration::from_secs(30))?;
    Ok(format!("{count} polynomial forms proven, quadrature case below 1e-8, {:?}", start.elapsed()))
}

fn pure_part(form: &Form, r: usize, p: usize, q: usize) -> Form {
    form.filter(|idx| bidegree(idx, r) == (p, q))
}

fn dprime_poincare() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut count = 0;
    for (r, name) in [(1, "tangent1"), (2, "tangent2"), (3, "so3")] {
        let ch = catalog::by_name(name).unwrap().chart;
        let vars: Vec<Expr> = ch.variables().iter().map(Expr::sym).collect();
        let smp = sampler(&ch, 1e-9);
        let frame = ProlongFrame(&ch);
        let shapes: Vec<(usize, usize)> = (0..=r).flat_map(|p| (1..=r).map(move |q| (p, q))).collect();
        for i in 0..20 {
            let (p, q) = shapes[i % shapes.len()];
            let seed = random_form(&mut rng, 2 * r, p + q - 1, &vars, |idx| bidegree(idx, r) == (p, q - 1));
            let block = pure_part(&koszul(&frame, &seed), r, p, q);
            let zeta = dprime_primitive(&block, p, q, ch.fibers(), &smp).map_err(|e| format!("rank {r} ({p},{q}): {e}"))?;
            let back = pure_part(&koszul(&frame, &zeta), r, p, q).sub(&block);
            let rep = ValidationReport::from_residuals("dprime", &smp, back.dense().into_iter().map(|(i, e)| (format!("{i:?}"), e)).collect()).unwrap();
            if !rep.all_proven() {
                return Err(format!("rank {r} ({p},{q}): d''zeta differs from the block"));
            }
            count += 1;
        }
    }
    Ok(format!("{count} closed blocks inverted exactly"))
}

fn spray_criteria() -> Outcome {
    let s = setup("metric2");
    let ch = &s.fx.chart;
    let smp = sampler(ch, 1e-9);
    let pb = bracket(&s, &Form::zero(2, 2));
    let v = pb.hamiltonian_field(&s.data.energy);
    require(&is_spray(ch, &v, &smp).unwrap(), "metric2")?;
    let flow = Flow::from_field(ch, &v, Some(&s.data.energy)).unwrap();
    let p0 = ChartPoint::new(vec![0.3, -0.2], vec![0.8, 0.5]);
    let rep = spray_scaling_check(&flow, &p0, 1.0, &[2.0, 4.0], 1e-6).map_err(|e| e.to_string())?;
    let worst = rep.checks.iter().filter_map(|c| c.residual).fold(0.0, f64::max);
    if !rep.passed() {
        return Err(format!("scaling mismatch {worst:e}"));
    }
    let forced = pb.hamiltonian_field(&(&s.data.energy + &ch.x(0)));
    if is_spray(ch, &forced, &smp).unwrap().passed() {
        return Err("force x1 still reported as a spray".into());
    }
    Ok(format!("metric2 is a spray, scaling error {worst:e}, forced variant rejected"))
}

fn conservation() -> Outcome {
    let mut worst: f64 = 0.0;
    for name in VALID {
        let s = setup(name);
        let ch = &s.fx.chart;
        let g = &s.data.energy;
        let flow = Flow::from_field(ch, &bracket(&s, &s.fx.theta).hamiltonian_field(g), Some(g)).unwrap();
        let x0 = (0..ch.n()).map(|i| 0.2 - 0.15 * i as f64).collect();
        let y0 = (0..ch.r()).map(|j| 0.6 - 0.35 * j as f64).collect();
        let traj = flow.integrate(&ChartPoint::new(x0, y0), 1.0, 1e-3, Method::Rk4).map_err(|e| format!("{name}: {e}"))?;
        let drift = traj.max_drift();
        if drift.is_nan() || drift >= 1e-8 {
            return Err(format!("{name}: drift {drift:e}"));
        }
        worst = worst.max(drift);
    }
    let s = setup("metric2");
    let g = &s.data.energy;
    let flow = Flow::from_field(&s.fx.chart, &bracket(&s, &s.fx.theta).hamiltonian_field(g), Some(g)).unwrap();
    let p0 = ChartPoint::new(vec![0.3, -0.2], vec![0.8, 0.5]);
    let ratio = step_halving_ratio(&flow, &p0, 1.0, 0.1).map_err(|e| e.to_string())?;
    if !(8.0..=32.0).contains(&ratio) {
        return Err(format!("step-halving ratio {ratio:.2}"));
    }
    Ok(format!("max drift {worst:e}, step-halving ratio {ratio:.2}"))
}

fn decomposition_round_trip() -> Outcome {
    for name in VALID {
        let s = setup(name);
        let ch = &s.fx.chart;
        let smp = sampler(ch, 1e-9);
        let omega = pr::cartan_sections(ch, &s.data).omega.add(&pr::pullback_hor(&s.fx.theta));
        let jd = pr::j_dual(&omega).dense().into_iter().map(|(i, e)| (format!("j_dual{i:?}"), e)).collect();
        let rep = ValidationReport::from_residuals("j_dual", &smp, jd).unwrap();
        if !rep.all_proven() {
            return Err(format!("{name}: J_dual of the input is not proven zero"));
        }
        let dec = pr::decompose_symplectic(ch, &omega, &Connection::trivial(ch.r()), &smp).map_err(|e| format!("{name}: {e}"))?;
        let res = dec.residual(ch, &omega).dense().into_iter().map(|(i, e)| (format!("{i:?}"), e)).collect();
        let rep = ValidationReport::from_residuals("decompose", &smp, res).unwrap();
        if !rep.all_proven() {
            return Err(format!("{name}: reassembly residual not proven zero"));
        }
    }
    Ok(format!("{} fixtures reassemble exactly", VALID.len()))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("structure equations", structure_gate),
        ("semispray family", semispray_suite),
        ("Jacobi identity", jacobi_suite),
        ("prolongation vs bracket field", prolongation_oracle),
        ("SODE property", sode_property),
        ("Cartan block formula", cartan_identity),
        ("vertical homotopy", homotopy_identities),
        ("d'' primitives", dprime_poincare),
        ("spray criteria", spray_criteria),
        ("conservation", conservation),
        ("decomposition round-trip", decomposition_round_trip),
    ];
    let mut failed = 0;
    for (i, (title, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("criterion {}: PASS {title}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {title}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
