//! Sampled residual checks and their serializable reports.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::manifold::SamplePlan;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanInfo {
    pub seed: u64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChartResidual {
    pub chart: String,
    pub max_residual: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub chart: String,
    pub coords: Vec<f64>,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One check on one example. `verdict == Pass` iff `max_residual <=
/// tolerance`; a witness is attached iff the verdict is `Fail`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub version: String,
    pub example: String,
    pub check: String,
    pub plan: PlanInfo,
    pub per_chart: Vec<ChartResidual>,
    /// Non-finite values serialize as `null`.
    pub max_residual: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Declared outcome when the check belongs to a corpus entry.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<Verdict>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// The verdict equals the declared one (vacuously true when none is declared).
    pub fn matched(&self) -> bool {
        self.expected.is_none_or(|e| e == self.verdict)
    }

    pub fn with_example(mut self, key: &str) -> Self {
        self.example = key.to_string();
        self
    }

    pub fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }

    /// Merges sub-checks into one report. The verdict is the worst of the
    /// parts; each part's maximum appears as a detail under its name.
    pub fn combine(check: &str, plan: &SamplePlan, tolerance: f64, parts: Vec<(&str, CheckReport)>) -> Self {
        let mut out = CheckReport::scalar(check, plan, 0.0, tolerance);
        out.per_chart.clear();
        let rank = |v: Verdict| match v {
            Verdict::Pass => 0,
            Verdict::Inconclusive => 1,
            Verdict::Fail => 2,
        };
        for (name, r) in parts {
            for c in &r.per_chart {
                match out.per_chart.iter_mut().find(|o| o.chart == c.chart) {
                    Some(o) => {
                        o.max_residual = worse(o.max_residual, c.max_residual);
                        o.samples = o.samples.max(c.samples);
                    }
                    None => out.per_chart.push(c.clone()),
                }
            }
            if rank(r.verdict) > rank(out.verdict) {
                out.verdict = r.verdict;
            }
            let replace = out.witness.is_none() && r.verdict == Verdict::Fail;
            if replace {
                out.witness = r.witness.clone();
            }
            out.max_residual = worse(out.max_residual, r.max_residual);
            out.details.insert(name.to_string(), r.max_residual);
            for (k, v) in r.details {
                out.details.insert(format!("{name}.{k}"), v);
            }
            out.notes.extend(r.notes.into_iter().map(|n| format!("{name}: {n}")));
        }
        out
    }

    /// Check without sampled points (pure structural facts).
    pub fn scalar(check: &str, plan: &SamplePlan, residual: f64, tolerance: f64) -> Self {
        let samples = vec![Sample {
            label: "-".into(),
            coords: Vec::new(),
            residual,
            error: None,
        }];
        Self::from_samples(check, plan, tolerance, None, &samples)
    }

    /// Folds sampled residuals into a report. Residuals above `tolerance` but
    /// at or below `fail_above` make the verdict inconclusive.
    pub fn from_samples(
        check: &str,
        plan: &SamplePlan,
        tolerance: f64,
        fail_above: Option<f64>,
        samples: &[Sample],
    ) -> Self {
        let mut per_chart: Vec<ChartResidual> = Vec::new();
        let mut worst: Option<&Sample> = None;
        for s in samples {
            match per_chart.iter_mut().find(|c| c.chart == s.label) {
                Some(c) => {
                    c.samples += 1;
                    c.max_residual = worse(c.max_residual, s.residual);
                }
                None => per_chart.push(ChartResidual {
                    chart: s.label.clone(),
                    max_residual: s.residual,
                    samples: 1,
                }),
            }
            let replace = match worst {
                None => true,
                Some(w) => !w.residual.is_nan() && (s.residual.is_nan() || s.residual > w.residual),
            };
            if replace {
                worst = Some(s);
            }
        }
        let max_residual = worst.map_or(0.0, |w| w.residual);
        let within = max_residual <= tolerance;
        let verdict = if within {
            Verdict::Pass
        } else if fail_above.is_some_and(|f| max_residual <= f) {
            Verdict::Inconclusive
        } else {
            Verdict::Fail
        };
        let witness = match (verdict, worst) {
            (Verdict::Fail, Some(w)) => Some(Witness {
                chart: w.label.clone(),
                coords: w.coords.clone(),
                residual: w.residual,
                error: w.error.clone(),
            }),
            _ => None,
        };
        CheckReport {
            version: VERSION.to_string(),
            example: String::new(),
            check: check.to_string(),
            plan: PlanInfo { seed: plan.seed, count: plan.count },
            per_chart,
            max_residual,
            tolerance,
            verdict,
            witness,
            details: BTreeMap::new(),
            notes: Vec::new(),
            expected: None,
        }
    }
}

/// NaN counts as worse than anything.
fn worse(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub label: String,
    pub coords: Vec<f64>,
    pub residual: f64,
    pub error: Option<String>,
}

/// Several named quantities measured at the same points.
#[derive(Clone, Debug)]
pub struct Measurements {
    points: Vec<(String, Vec<f64>)>,
    values: Vec<std::result::Result<Vec<f64>, String>>,
}

/// Evaluates `f` at every point in parallel; the output order matches the
/// input order. An evaluation error is recorded as an infinite residual.
pub fn measure<F>(points: Vec<(String, Vec<f64>)>, f: F) -> Measurements
where
    F: Fn(&str, &[f64]) -> Result<Vec<f64>> + Sync,
{
    measure_indexed(points, |_, label, x| f(label, x))
}

/// Like [`measure`], also passing each point's position in the input.
pub fn measure_indexed<F>(points: Vec<(String, Vec<f64>)>, f: F) -> Measurements
where
    F: Fn(usize, &str, &[f64]) -> Result<Vec<f64>> + Sync,
{
    let values = points
        .par_iter()
        .enumerate()
        .map(|(i, (label, x))| f(i, label, x).map_err(|e| e.to_string()))
        .collect();
    Measurements { points, values }
}

impl Measurements {
    /// A measurement that never got to sample.
    pub fn failed(e: GeomError) -> Measurements {
        Measurements { points: vec![("-".into(), Vec::new())], values: vec![Err(e.to_string())] }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(String, Vec<f64>)] {
        &self.points
    }

    /// Per-point values of quantity `k` (infinite where evaluation failed).
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| match v {
                Ok(vals) => vals.get(k).copied().unwrap_or(f64::NAN),
                Err(_) => f64::INFINITY,
            })
            .collect()
    }

    pub fn max(&self, k: usize) -> f64 {
        self.column(k).into_iter().fold(0.0, worse)
    }

    pub fn min(&self, k: usize) -> f64 {
        self.column(k).into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn first_error(&self) -> Option<&str> {
        self.values.iter().find_map(|v| v.as_ref().err().map(|s| s.as_str()))
    }

    /// Residual per point is the max over the quantities in `ks`.
    pub fn samples(&self, ks: &[usize]) -> Vec<Sample> {
        self.points
            .iter()
            .zip(&self.values)
            .map(|((label, x), v)| {
                let (residual, error) = match v {
                    Ok(vals) => (
                        ks.iter()
                            .map(|&k| vals.get(k).copied().unwrap_or(f64::NAN))
                            .fold(0.0, worse),
                        None,
                    ),
                    Err(e) => (f64::INFINITY, Some(e.clone())),
                };
                Sample { label: label.clone(), coords: x.clone(), residual, error }
            })
            .collect()
    }

    pub fn report(
        &self,
        check: &str,
        plan: &SamplePlan,
        ks: &[usize],
        tolerance: f64,
        fail_above: Option<f64>,
    ) -> CheckReport {
        let r = CheckReport::from_samples(check, plan, tolerance, fail_above, &self.samples(ks));
        match self.first_error() {
            Some(e) => r.note(format!("evaluation error: {e}")),
            None => r,
        }
    }
}

/// Serializes reports as a pretty JSON array.
pub fn to_json(reports: &[CheckReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan() -> SamplePlan {
        SamplePlan::default()
    }

    fn s(label: &str, r: f64) -> Sample {
        Sample { label: label.into(), coords: vec![r], residual: r, error: None }
    }

    #[test]
    fn pass_iff_within_tolerance() {
        let r = CheckReport::from_samples("c", &plan(), 1e-8, None, &[s("A", 1e-9), s("B", 0.0)]);
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.witness.is_none());
        assert_eq!(r.per_chart.len(), 2);
    }

    #[test]
    fn witness_is_worst_point() {
        let r = CheckReport::from_samples("c", &plan(), 1e-8, None, &[s("A", 1e-3), s("A", 0.2)]);
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.witness.unwrap().residual, 0.2);
        assert_eq!(r.per_chart[0].samples, 2);
    }

    #[test]
    fn gray_zone_is_inconclusive_without_witness() {
        let r = CheckReport::from_samples("c", &plan(), 1e-8, Some(1e-3), &[s("A", 1e-5)]);
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert!(r.witness.is_none());
    }

    #[test]
    fn nan_fails() {
        let r = CheckReport::from_samples("c", &plan(), 1e-8, None, &[s("A", f64::NAN), s("A", 0.0)]);
        assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn measurement_order_and_errors() {
        let pts: Vec<_> = (0..20).map(|i| ("A".to_string(), vec![i as f64])).collect();
        let m = measure(pts, |_, x| {
            if x[0] == 7.0 {
                Err(crate::GeomError::Domain("seven".into()))
            } else {
                Ok(vec![x[0], -x[0]])
            }
        });
        assert_eq!(m.column(0)[3], 3.0);
        assert_eq!(m.column(1)[3], -3.0);
        assert_eq!(m.column(0)[7], f64::INFINITY);
        let r = m.report("c", &plan(), &[0], 100.0, None);
        assert_eq!(r.witness.unwrap().error.as_deref(), Some("domain error: seven"));
    }
}
