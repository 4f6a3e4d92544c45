//! The JSON model document: chart data, Lagrangian, 2-form, force and
//! sampling settings.
//!
//! Anchor rows are indexed like the chart (`rho[j]` is the anchor of
//! `e_{j+1}`); structure functions and 2-form components use 1-based
//! comma-separated keys, `"k,i,j"` and `"i,j"` with `i < j`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebroid::{Chart, ChartError, SampleSpec};
use crate::catalog::Fixture;
use crate::cochain::Form;
use crate::expr::{parse, Alphabet, Expr, ParseError, Symbol};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoxSpec {
    Uniform([f64; 2]),
    PerVariable(BTreeMap<String, [f64; 2]>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub n: usize,
    pub r: usize,
    pub coords: Vec<String>,
    pub fibers: Vec<String>,
    pub rho: Vec<Vec<String>>,
    #[serde(rename = "C", default)]
    pub c: BTreeMap<String, String>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<String>,
    #[serde(rename = "Theta", default, skip_serializing_if = "BTreeMap::is_empty")]
    pub theta: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub sample_box: Option<BoxSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("{0}")]
    Schema(String),
    #[error("unknown symbol `{symbol}` in {field}")]
    UnknownSymbol { symbol: String, field: String },
    #[error("cannot parse {field}: {message}")]
    Syntax { field: String, message: String },
    #[error(transparent)]
    Chart(#[from] ChartError),
}

/// A loaded model: chart plus optional dynamics data and sampling setup.
#[derive(Debug, Clone)]
pub struct Model {
    pub chart: Chart,
    pub lagrangian: Option<Expr>,
    pub theta: Form,
    pub force: Expr,
    pub sample: SampleSpec,
}

const RESERVED: &[&str] = &["sin", "cos", "exp", "log", "sqrt"];

fn check_identifier(name: &str, field: &str) -> Result<(), ModelError> {
    let mut chars = name.chars();
    let ok_start = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
    if !ok_start || !chars.all(|c| c.is_ascii_alphanumeric() || c == '_') || RESERVED.contains(&name) {
        return Err(ModelError::Schema(format!("{field}: `{name}` is not a valid identifier")));
    }
    Ok(())
}

fn parse_field(src: &str, alphabet: &Alphabet, field: &str) -> Result<Expr, ModelError> {
    parse(src, alphabet).map_err(|e| match e {
        ParseError::UnknownSymbol { name, .. } => ModelError::UnknownSymbol { symbol: name, field: field.to_string() },
        other => ModelError::Syntax { field: field.to_string(), message: other.to_string() },
    })
}

fn parse_key(key: &str, arity: usize, bound: usize, field: &str) -> Result<Vec<usize>, ModelError> {
    let parts: Result<Vec<usize>, _> = key.split(',').map(|p| p.trim().parse::<usize>()).collect();
    match parts {
        Ok(v) if v.len() == arity && v.iter().all(|&i| i >= 1 && i <= bound) => Ok(v.into_iter().map(|i| i - 1).collect()),
        _ => Err(ModelError::Schema(format!("{field}[\"{key}\"]: expected {arity} indices in 1..={bound}"))),
    }
}

impl Model {
    pub fn from_json(src: &str) -> Result<Model, ModelError> {
        let doc: ModelDocument = serde_json::from_str(src).map_err(|e| ModelError::Json(e.to_string()))?;
        Model::from_document(&doc)
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Model, ModelError> {
        let (n, r) = (doc.n, doc.r);
        if doc.coords.len() != n || doc.fibers.len() != r {
            return Err(ModelError::Schema(format!("expected {n} coords and {r} fibers")));
        }
        if doc.rho.len() != r || doc.rho.iter().any(|row| row.len() != n) {
            return Err(ModelError::Schema(format!("rho must have {r} rows of {n} entries")));
        }
        for name in &doc.coords {
            check_identifier(name, "coords")?;
        }
        for name in &doc.fibers {
            check_identifier(name, "fibers")?;
        }
        for name in doc.params.keys() {
            check_identifier(name, "params")?;
        }
        let alphabet = Alphabet::new(doc.coords.iter().chain(&doc.fibers).chain(doc.params.keys()).cloned());
        let mut base = Alphabet::new(doc.coords.iter().chain(doc.params.keys()).cloned());
        // Fiber symbols in base-only fields are reported as fiber dependence, not as unknown.
        for y in &doc.fibers {
            base.insert(y);
        }
        let mut rho = Vec::with_capacity(r);
        for (j, row) in doc.rho.iter().enumerate() {
            let mut parsed = Vec::with_capacity(n);
            for (i, src) in row.iter().enumerate() {
                parsed.push(parse_field(src, &base, &format!("rho[{j}][{i}]"))?);
            }
            rho.push(parsed);
        }
        let mut structure = BTreeMap::new();
        for (key, src) in &doc.c {
            let idx = parse_key(key, 3, r, "C")?;
            if idx[1] >= idx[2] {
                return Err(ModelError::Schema(format!("C[\"{key}\"]: lower indices must satisfy i < j")));
            }
            structure.insert((idx[0], idx[1], idx[2]), parse_field(src, &base, &format!("C[\"{key}\"]"))?);
        }
        let params: Vec<(Symbol, f64)> = doc.params.iter().map(|(k, v)| (Symbol::new(k), *v)).collect();
        let chart = Chart::new(
            doc.coords.iter().map(|s| Symbol::new(s)).collect(),
            doc.fibers.iter().map(|s| Symbol::new(s)).collect(),
            params,
            rho,
            structure,
        )?;
        let lagrangian = doc.l.as_deref().map(|src| parse_field(src, &alphabet, "L")).transpose()?;
        let mut theta = Form::zero(r, 2);
        for (key, src) in &doc.theta {
            let idx = parse_key(key, 2, r, "Theta")?;
            if idx[0] >= idx[1] {
                return Err(ModelError::Schema(format!("Theta[\"{key}\"]: indices must satisfy i < j")));
            }
            let field = format!("Theta[\"{key}\"]");
            let e = parse_field(src, &base, &field)?;
            chart.check_base_only(&field, &e)?;
            theta.set(&idx, e);
        }
        let force = match doc.f.as_deref() {
            Some(src) => {
                let e = parse_field(src, &base, "f")?;
                chart.check_base_only("f", &e)?;
                e
            }
            None => Expr::zero(),
        };
        let mut sample = SampleSpec::default();
        match &doc.sample_box {
            None => {}
            Some(BoxSpec::Uniform([lo, hi])) => sample.default = (*lo, *hi),
            Some(BoxSpec::PerVariable(map)) => {
                for (name, [lo, hi]) in map {
                    if name == "default" {
                        sample.default = (*lo, *hi);
                    } else if doc.coords.contains(name) || doc.fibers.contains(name) {
                        sample.overrides.insert(name.clone(), (*lo, *hi));
                    } else {
                        return Err(ModelError::UnknownSymbol { symbol: name.clone(), field: "box".into() });
                    }
                }
            }
        }
        if let Some(seed) = doc.seed {
            sample.seed = seed;
        }
        if let Some(t) = &doc.tolerances {
            if let Some(tol) = t.tol {
                sample.tol = tol;
            }
            if let Some(trials) = t.trials {
                sample.trials = trials;
            }
        }
        Ok(Model { chart, lagrangian, theta, force, sample })
    }

    pub fn from_fixture(f: &Fixture) -> Model {
        Model {
            chart: f.chart.clone(),
            lagrangian: Some(f.lagrangian.clone()),
            theta: f.theta.clone(),
            force: Expr::zero(),
            sample: SampleSpec::default(),
        }
    }

    /// Parses an extra expression over the chart variables and parameters.
    pub fn parse_expr(&self, src: &str, field: &str) -> Result<Expr, ModelError> {
        parse_field(src, &self.chart.alphabet(), field)
    }

    /// Canonical document; expressions are printed in normal form.
    pub fn to_document(&self) -> ModelDocument {
        let ch = &self.chart;
        let c = ch
            .structure_entries()
            .iter()
            .map(|(&(k, i, j), e)| (format!("{},{},{}", k + 1, i + 1, j + 1), e.to_string()))
            .collect();
        let theta = self
            .theta
            .components()
            .map(|(idx, e)| (format!("{},{}", idx[0] + 1, idx[1] + 1), e.to_string()))
            .collect();
        let sample_box = if self.sample.overrides.is_empty() {
            let (lo, hi) = self.sample.default;
            Some(BoxSpec::Uniform([lo, hi]))
        } else {
            let mut m: BTreeMap<String, [f64; 2]> = self.sample.overrides.iter().map(|(k, v)| (k.clone(), [v.0, v.1])).collect();
            m.insert("default".into(), [self.sample.default.0, self.sample.default.1]);
            Some(BoxSpec::PerVariable(m))
        };
        ModelDocument {
            n: ch.n(),
            r: ch.r(),
            coords: ch.coords().iter().map(|s| s.name().to_string()).collect(),
            fibers: ch.fibers().iter().map(|s| s.name().to_string()).collect(),
            rho: ch.rho_rows().iter().map(|row| row.iter().map(Expr::to_string).collect()).collect(),
            c,
            l: self.lagrangian.as_ref().map(Expr::to_string),
            theta,
            f: if self.force.is_zero() { None } else { Some(self.force.to_string()) },
            params: ch.params().iter().map(|(s, v)| (s.name().to_string(), *v)).collect(),
            sample_box,
            seed: Some(self.sample.seed),
            tolerances: Some(Tolerances { tol: Some(self.sample.tol), trials: Some(self.sample.trials) }),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("model document serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    const LINE: &str = r#"{"n":1,"r":1,"coords":["x1"],"fibers":["y1"],"rho":[["1"]],"L":"y1^2/2"}"#;

    #[test]
    fn minimal_document() {
        let m = Model::from_json(LINE).unwrap();
        assert_eq!(m.chart.n(), 1);
        assert_eq!(m.lagrangian.unwrap(), Expr::var("y1").powi(2) * Expr::ratio(1, 2));
        assert!(m.force.is_zero());
        assert_eq!(m.sample, SampleSpec::default());
    }

    #[test]
    fn catalog_round_trips() {
        for name in catalog::NAMES {
            let m = Model::from_fixture(&catalog::by_name(name).unwrap());
            let text = m.to_json();
            let again = Model::from_json(&text).unwrap();
            assert_eq!(again.to_json(), text, "{name}");
            assert_eq!(again.lagrangian, m.lagrangian);
            assert_eq!(again.theta, m.theta);
        }
    }

    #[test]
    fn unknown_symbols_name_the_field() {
        let bad = LINE.replace(r#""rho":[["1"]]"#, r#""rho":[["z"]]"#);
        assert_eq!(Model::from_json(&bad).unwrap_err(), ModelError::UnknownSymbol { symbol: "z".into(), field: "rho[0][0]".into() });
        let bad = LINE.replace(r#""L":"y1^2/2""#, r#""L":"q*y1""#);
        assert!(matches!(Model::from_json(&bad), Err(ModelError::UnknownSymbol { field, .. }) if field == "L"));
        let bad = LINE.replace('}', r#","f":"w"}"#);
        assert!(matches!(Model::from_json(&bad), Err(ModelError::UnknownSymbol { field, .. }) if field == "f"));
    }

    #[test]
    fn fiber_dependence_is_rejected() {
        let bad = LINE.replace(r#""rho":[["1"]]"#, r#""rho":[["y1"]]"#);
        assert!(matches!(Model::from_json(&bad), Err(ModelError::Chart(ChartError::FiberDependence { .. }))));
        let bad = LINE.replace('}', r#","f":"y1"}"#);
        assert!(matches!(Model::from_json(&bad), Err(ModelError::Chart(ChartError::FiberDependence { .. }))));
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(Model::from_json("{"), Err(ModelError::Json(_))));
        let bad = LINE.replace(r#""n":1"#, r#""n":2"#);
        assert!(matches!(Model::from_json(&bad), Err(ModelError::Schema(_))));
        let two = r#"{"n":2,"r":2,"coords":["x1","x2"],"fibers":["y1","y2"],"rho":[["1","0"],["0","1"]],"C":{"1,2,1":"1"}}"#;
        assert!(matches!(Model::from_json(two), Err(ModelError::Schema(_))));
        let bad = LINE.replace(r#""coords":["x1"]"#, r#""coords":["sin"]"#);
        assert!(matches!(Model::from_json(&bad), Err(ModelError::Schema(_))));
        let bad = LINE.replace('}', r#","extra":1}"#);
        assert!(matches!(Model::from_json(&bad), Err(ModelError::Json(_))));
    }

    #[test]
    fn sampling_settings() {
        let doc = LINE.replace('}', r#","box":{"default":[0,2],"y1":[-3,3]},"seed":7,"tolerances":{"tol":1e-6,"trials":10},"params":{"k":2.5}}"#);
        let m = Model::from_json(&doc).unwrap();
        assert_eq!(m.sample.default, (0.0, 2.0));
        assert_eq!(m.sample.overrides["y1"], (-3.0, 3.0));
        assert_eq!((m.sample.seed, m.sample.trials, m.sample.tol), (7, 10, 1e-6));
        assert_eq!(m.parse_expr("k*x1", "G").unwrap().to_string(), "k*x1");
        let bad = LINE.replace('}', r#","box":{"q":[0,1]}}"#);
        assert!(matches!(Model::from_json(&bad), Err(ModelError::UnknownSymbol { .. })));
    }
}
