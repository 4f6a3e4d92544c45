//! Deciding whether an expression vanishes identically.
//!
//! A residual that simplifies to the literal `0` is proven zero. Otherwise it
//! is sampled at seeded pseudo-random points of a box; points where the
//! expression is undefined are skipped.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use super::{Compiled, EvalError, Expr, Symbol};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid sampling interval for `{name}`: [{lo}, {hi}]")]
pub struct BoxError {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

/// Product of closed intervals, one per sampled variable.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    vars: Vec<(Symbol, f64, f64)>,
}

impl SampleBox {
    pub fn new(vars: Vec<(Symbol, f64, f64)>) -> Result<Self, BoxError> {
        for (s, lo, hi) in &vars {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(BoxError { name: s.name().to_string(), lo: *lo, hi: *hi });
            }
        }
        Ok(SampleBox { vars })
    }

    pub fn uniform(names: &[Symbol], lo: f64, hi: f64) -> Result<Self, BoxError> {
        SampleBox::new(names.iter().map(|s| (s.clone(), lo, hi)).collect())
    }

    /// Replaces the interval of `name` if present.
    pub fn set(&mut self, name: &Symbol, lo: f64, hi: f64) -> Result<(), BoxError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(BoxError { name: name.name().to_string(), lo, hi });
        }
        for v in &mut self.vars {
            if &v.0 == name {
                v.1 = lo;
                v.2 = hi;
            }
        }
        Ok(())
    }

    pub fn symbols(&self) -> Vec<Symbol> {
        self.vars.iter().map(|v| v.0.clone()).collect()
    }

    pub fn intervals(&self) -> &[(Symbol, f64, f64)] {
        &self.vars
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    ProvenZero,
    LikelyZero { max_abs: f64, samples: usize },
    /// `witness` is the first sampled point where the magnitude exceeds the
    /// tolerance and `value` the residual there.
    NonZero { witness: BTreeMap<String, f64>, value: f64, max_abs: f64 },
}

impl Verdict {
    pub fn passed(&self) -> bool {
        !matches!(self, Verdict::NonZero { .. })
    }

    pub fn residual(&self) -> f64 {
        match self {
            Verdict::ProvenZero => 0.0,
            Verdict::LikelyZero { max_abs, .. } => *max_abs,
            Verdict::NonZero { max_abs, .. } => *max_abs,
        }
    }

    pub fn is_proven(&self) -> bool {
        matches!(self, Verdict::ProvenZero)
    }
}

/// Seeded random sampling over a box, with some symbols pinned to values.
#[derive(Debug, Clone)]
pub struct Sampler {
    pub domain: SampleBox,
    pub trials: usize,
    pub tol: f64,
    pub seed: u64,
    pub fixed: Vec<(Symbol, f64)>,
}

impl Sampler {
    pub fn new(domain: SampleBox, trials: usize, tol: f64, seed: u64) -> Self {
        Sampler { domain, trials, tol, seed, fixed: Vec::new() }
    }

    pub fn with_fixed(mut self, fixed: Vec<(Symbol, f64)>) -> Self {
        self.fixed = fixed;
        self
    }

    /// Symbols bound at every sample: box variables then pinned ones.
    pub fn inputs(&self) -> Vec<Symbol> {
        let mut v = self.domain.symbols();
        v.extend(self.fixed.iter().map(|f| f.0.clone()));
        v
    }

    /// The deterministic sample points, laid out like [`Sampler::inputs`].
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.trials)
            .map(|_| {
                let mut p: Vec<f64> = self
                    .domain
                    .intervals()
                    .iter()
                    .map(|(_, lo, hi)| lo + (hi - lo) * unit(&mut rng))
                    .collect();
                p.extend(self.fixed.iter().map(|f| f.1));
                p
            })
            .collect()
    }

    pub fn is_zero(&self, e: &Expr) -> Result<Verdict, EvalError> {
        Ok(self.check_many(std::slice::from_ref(e))?.pop().unwrap())
    }

    /// Tests several residuals over one shared set of sample points.
    pub fn check_many(&self, es: &[Expr]) -> Result<Vec<Verdict>, EvalError> {
        let pending: Vec<usize> = (0..es.len()).filter(|&i| !es[i].is_zero()).collect();
        let mut verdicts = vec![Verdict::ProvenZero; es.len()];
        if pending.is_empty() {
            return Ok(verdicts);
        }
        let inputs = self.inputs();
        let targets: Vec<Expr> = pending.iter().map(|&i| es[i].clone()).collect();
        let prog = Compiled::new(&targets, &inputs)?;
        let mut worst = vec![0.0f64; targets.len()];
        let mut first_bad: Vec<Option<(usize, f64)>> = vec![None; targets.len()];
        let points = self.points();
        let mut scratch = Vec::new();
        let mut out = vec![0.0; targets.len()];
        let mut used = 0usize;
        let mut last_err = None;
        for (pi, p) in points.iter().enumerate() {
            match prog.run_into(p, &mut scratch, &mut out) {
                Ok(()) => {
                    used += 1;
                    for (k, v) in out.iter().enumerate() {
                        worst[k] = worst[k].max(v.abs());
                        if v.abs() > self.tol && first_bad[k].is_none() {
                            first_bad[k] = Some((pi, *v));
                        }
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
        if used == 0 {
            return Err(last_err.unwrap_or_else(|| EvalError::Domain("no sample points".into())));
        }
        for (k, &i) in pending.iter().enumerate() {
            let max_abs = worst[k];
            verdicts[i] = match first_bad[k] {
                None => Verdict::LikelyZero { max_abs, samples: used },
                Some((at, value)) => {
                    let witness = inputs.iter().zip(&points[at]).map(|(s, v)| (s.name().to_string(), *v)).collect();
                    Verdict::NonZero { witness, value, max_abs }
                }
            };
        }
        Ok(verdicts)
    }
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    use rand::RngExt;
    rng.random::<f64>()
}
