//! Built-in example structures with their declared check suites. Each
//! entry carries the expected verdict of every check, so negative results
//! (a check that must fail) are regression targets like any other.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{GeomError, Result};
use crate::manifold::{Atlas, SamplePlan};
use crate::report::{CheckReport, Verdict};
use crate::tensor::{SmoothMap, TensorField};

mod examples;
mod text;

pub use examples::{jet_levi, sphere_levi};
pub use text::{parse_document, Document};

/// Every key `build_example` accepts, in listing order.
pub const KEYS: [&str; 9] = [
    "darboux-1",
    "darboux-2",
    "mobius-band",
    "mobius-jet",
    "mobius-cotangent",
    "sphere-3",
    "sphere-5",
    "product-darboux",
    "main1-family",
];

pub type CheckFn = Arc<dyn Fn(&SamplePlan, f64) -> CheckReport + Send + Sync>;

/// A named check with its declared outcome and default tolerance.
#[derive(Clone)]
pub struct DeclaredCheck {
    pub name: String,
    pub expect: Verdict,
    pub tolerance: f64,
    run: CheckFn,
}

impl DeclaredCheck {
    /// Runs at `tol` (the declared tolerance when `None`). The report is
    /// renamed after the declared check and carries the expectation.
    pub fn run(&self, plan: &SamplePlan, tol: Option<f64>) -> CheckReport {
        let mut r = (self.run)(plan, tol.unwrap_or(self.tolerance));
        r.check = self.name.clone();
        r.expected = Some(self.expect);
        r
    }
}

/// An atlas-bound field as listed by `show`.
#[derive(Clone)]
pub struct DeclaredField {
    pub atlas: String,
    pub field: TensorField,
}

#[derive(Clone)]
pub struct DeclaredMap {
    pub source: String,
    pub target: String,
    pub map: SmoothMap,
}

#[derive(Clone)]
pub struct Example {
    pub key: String,
    pub summary: String,
    pub params: BTreeMap<String, String>,
    pub atlases: Vec<Atlas>,
    pub fields: Vec<DeclaredField>,
    pub maps: Vec<DeclaredMap>,
    pub checks: Vec<DeclaredCheck>,
}

impl Example {
    fn new(key: &str, summary: &str) -> Example {
        Example {
            key: key.to_string(),
            summary: summary.to_string(),
            params: BTreeMap::new(),
            atlases: Vec::new(),
            fields: Vec::new(),
            maps: Vec::new(),
            checks: Vec::new(),
        }
    }

    fn atlas(&mut self, a: &Atlas) {
        if !self.atlases.iter().any(|b| b.name == a.name) {
            self.atlases.push(a.clone());
        }
    }

    fn field(&mut self, atlas: &Atlas, f: &TensorField) {
        self.fields.push(DeclaredField { atlas: atlas.name.clone(), field: f.clone() });
    }

    fn map(&mut self, source: &Atlas, target: &Atlas, m: &SmoothMap) {
        self.maps.push(DeclaredMap { source: source.name.clone(), target: target.name.clone(), map: m.clone() });
    }

    fn check<F>(&mut self, name: &str, expect: Verdict, tolerance: f64, f: F)
    where
        F: Fn(&SamplePlan, f64) -> CheckReport + Send + Sync + 'static,
    {
        self.checks.push(DeclaredCheck { name: name.to_string(), expect, tolerance, run: Arc::new(f) });
    }

    fn pass<F>(&mut self, name: &str, tolerance: f64, f: F)
    where
        F: Fn(&SamplePlan, f64) -> CheckReport + Send + Sync + 'static,
    {
        self.check(name, Verdict::Pass, tolerance, f)
    }

    pub fn find_check(&self, name: &str) -> Option<&DeclaredCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn find_field(&self, name: &str) -> Option<&TensorField> {
        self.fields.iter().find(|f| f.field.name == name).map(|f| &f.field)
    }

    /// The declared checks named in `only` (all when `None`), in declared
    /// order. Unknown names are an error.
    pub fn select(&self, only: Option<&[String]>) -> Result<Vec<&DeclaredCheck>> {
        match only {
            None => Ok(self.checks.iter().collect()),
            Some(names) => {
                for n in names {
                    if self.find_check(n).is_none() {
                        return Err(GeomError::Invalid(format!("example `{}` has no check `{n}`", self.key)));
                    }
                }
                Ok(self.checks.iter().filter(|c| names.contains(&c.name)).collect())
            }
        }
    }

    /// Runs the selected checks in declared order.
    pub fn run(&self, plan: &SamplePlan, tol: Option<f64>, only: Option<&[String]>) -> Result<Vec<CheckReport>> {
        Ok(self.select(only)?.into_iter().map(|c| c.run(plan, tol).with_example(&self.key)).collect())
    }

    pub fn to_text(&self) -> String {
        text::emit(self)
    }
}

/// Builds an entry with default parameters.
pub fn build_example(key: &str) -> Result<Example> {
    build_example_with(key, &[])
}

/// Builds an entry; `params` override defaults. Only `main1-family` takes
/// a parameter (`a`, an expression in `x p z`).
pub fn build_example_with(key: &str, params: &[(String, String)]) -> Result<Example> {
    let allowed: &[&str] = if key == "main1-family" { &["a"] } else { &[] };
    if !KEYS.contains(&key) {
        return Err(GeomError::UnknownKey(key.to_string()));
    }
    for (k, _) in params {
        if !allowed.contains(&k.as_str()) {
            return Err(GeomError::Invalid(format!("example `{key}` has no parameter `{k}`")));
        }
    }
    let get = |k: &str, d: &str| params.iter().rev().find(|(n, _)| n == k).map_or(d.to_string(), |(_, v)| v.clone());
    match key {
        "darboux-1" => examples::darboux(1),
        "darboux-2" => examples::darboux(2),
        "mobius-band" => examples::mobius_band(),
        "mobius-jet" => examples::mobius_jet(),
        "mobius-cotangent" => examples::mobius_cotangent(),
        "sphere-3" => examples::sphere(1),
        "sphere-5" => examples::sphere(2),
        "product-darboux" => examples::product_darboux(),
        "main1-family" => examples::main1_family(&get("a", examples::MAIN1_DEFAULT_A)),
        _ => Err(GeomError::UnknownKey(key.to_string())),
    }
}
