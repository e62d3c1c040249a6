use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use super::index::{count, flat_index, multi_index, transpose_slots};
use crate::error::{GeomError, Result};
use crate::exprlang::{parse, Bound, Expr};
use crate::manifold::{Atlas, Chart, Point};
use crate::numkernel::{constants, values, DScalar};

/// Components of a field on one chart as a function of the coordinates.
pub type ComponentFn = Arc<dyn Fn(&[DScalar]) -> Result<Vec<DScalar>> + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Valence {
    pub contra: usize,
    pub co: usize,
}

impl Valence {
    pub const SCALAR: Valence = Valence { contra: 0, co: 0 };
    pub const VECTOR: Valence = Valence { contra: 1, co: 0 };
    pub const FORM1: Valence = Valence { contra: 0, co: 1 };
    pub const BILINEAR: Valence = Valence { contra: 0, co: 2 };
    pub const ENDO: Valence = Valence { contra: 1, co: 1 };

    pub const fn new(contra: usize, co: usize) -> Valence {
        Valence { contra, co }
    }

    pub fn rank(&self) -> usize {
        self.contra + self.co
    }

    pub fn len(&self, dim: usize) -> usize {
        count(dim, self.rank())
    }
}

impl fmt::Display for Valence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.contra, self.co)
    }
}

/// Symmetry over the covariant slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    None,
    Symmetric,
    Antisymmetric,
}

impl Symmetry {
    pub fn name(self) -> &'static str {
        match self {
            Symmetry::None => "none",
            Symmetry::Symmetric => "symmetric",
            Symmetry::Antisymmetric => "antisymmetric",
        }
    }

    pub fn from_name(s: &str) -> Option<Symmetry> {
        match s {
            "none" => Some(Symmetry::None),
            "symmetric" => Some(Symmetry::Symmetric),
            "antisymmetric" => Some(Symmetry::Antisymmetric),
            _ => None,
        }
    }
}

#[derive(Clone)]
pub(crate) struct ChartComponents {
    exprs: Option<Vec<Expr>>,
    eval: ComponentFn,
}

fn compile(exprs: &[Expr], coords: &[String], params: &HashMap<String, f64>) -> Result<ComponentFn> {
    let bound: Vec<Bound> = exprs.iter().map(|e| Bound::new(e, coords, params)).collect::<Result<_>>()?;
    Ok(Arc::new(move |x: &[DScalar]| bound.iter().map(|b| b.eval(x)).collect()))
}

/// Parses one chart's sparse component listing into a full array.
/// Keys are coordinate names separated by spaces or commas; rank-2
/// symmetric or antisymmetric fields are mirrored automatically.
fn dense_exprs(
    chart: &Chart,
    valence: Valence,
    symmetry: Symmetry,
    entries: &[(&str, &str)],
) -> Result<Vec<Expr>> {
    let n = chart.dim();
    let rank = valence.rank();
    let mut out: Vec<Option<Expr>> = vec![None; valence.len(n)];
    let mut mirrored: Vec<(usize, Expr)> = Vec::new();
    for (key, text) in entries {
        let names: Vec<&str> = key.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        if names.len() != rank {
            return Err(GeomError::Shape(format!(
                "component `{key}` on chart `{}` needs {rank} indices",
                chart.name
            )));
        }
        let idx: Vec<usize> = names.iter().map(|c| chart.index(c)).collect::<Result<_>>()?;
        let e = parse(text)?;
        let flat = flat_index(n, &idx);
        if out[flat].is_some() {
            return Err(GeomError::Invalid(format!("component `{key}` given twice")));
        }
        if valence.co == 2 && symmetry != Symmetry::None {
            let mut t = idx.clone();
            t.swap(rank - 2, rank - 1);
            if t != idx {
                let m = match symmetry {
                    Symmetry::Symmetric => e.clone(),
                    _ => Expr::Neg(Box::new(e.clone())),
                };
                mirrored.push((flat_index(n, &t), m));
            }
        }
        out[flat] = Some(e);
    }
    for (flat, e) in mirrored {
        if out[flat].is_none() {
            out[flat] = Some(e);
        }
    }
    Ok(out.into_iter().map(|e| e.unwrap_or(Expr::Num(0.0))).collect())
}

/// A valence-(p,q) field given chart by chart.
#[derive(Clone)]
pub struct TensorField {
    pub name: String,
    pub valence: Valence,
    pub symmetry: Symmetry,
    pub dim: usize,
    /// Power of the branch sign the field picks up across gluings (0 for
    /// honest fields, 1 for paired ones such as a local contact form that
    /// flips sign).
    pub parity: u8,
    charts: BTreeMap<String, ChartComponents>,
}

impl fmt::Debug for TensorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TensorField")
            .field("name", &self.name)
            .field("valence", &self.valence)
            .field("symmetry", &self.symmetry)
            .field("dim", &self.dim)
            .field("parity", &self.parity)
            .field("charts", &self.charts.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl TensorField {
    /// Field from DSL components, one sparse listing per chart.
    pub fn from_dsl(
        name: &str,
        valence: Valence,
        symmetry: Symmetry,
        atlas: &Atlas,
        charts: &[(&str, &[(&str, &str)])],
    ) -> Result<TensorField> {
        Self::from_dsl_with(name, valence, symmetry, atlas, charts, &HashMap::new())
    }

    pub fn from_dsl_with(
        name: &str,
        valence: Valence,
        symmetry: Symmetry,
        atlas: &Atlas,
        charts: &[(&str, &[(&str, &str)])],
        params: &HashMap<String, f64>,
    ) -> Result<TensorField> {
        let mut out = BTreeMap::new();
        for (chart_name, entries) in charts {
            let chart = atlas.chart(chart_name)?;
            let exprs = dense_exprs(chart, valence, symmetry, entries)?;
            let eval = compile(&exprs, &chart.coords, params)?;
            out.insert(chart_name.to_string(), ChartComponents { exprs: Some(exprs), eval });
        }
        Ok(TensorField {
            name: name.to_string(),
            valence,
            symmetry,
            dim: atlas.dim(),
            parity: 0,
            charts: out,
        })
    }

    /// Field from full component expression arrays (row-major).
    pub fn from_exprs(
        name: &str,
        valence: Valence,
        symmetry: Symmetry,
        atlas: &Atlas,
        charts: Vec<(String, Vec<Expr>)>,
        params: &HashMap<String, f64>,
    ) -> Result<TensorField> {
        let mut out = BTreeMap::new();
        let dim = atlas.dim();
        for (chart_name, exprs) in charts {
            let chart = atlas.chart(&chart_name)?;
            if exprs.len() != valence.len(dim) {
                return Err(GeomError::Shape(format!("field `{name}`: wrong component count")));
            }
            let eval = compile(&exprs, &chart.coords, params)?;
            out.insert(chart_name, ChartComponents { exprs: Some(exprs), eval });
        }
        Ok(TensorField { name: name.to_string(), valence, symmetry, dim, parity: 0, charts: out })
    }

    /// Field from component closures.
    pub fn builtin(
        name: &str,
        valence: Valence,
        symmetry: Symmetry,
        dim: usize,
        charts: Vec<(String, ComponentFn)>,
    ) -> TensorField {
        TensorField {
            name: name.to_string(),
            valence,
            symmetry,
            dim,
            parity: 0,
            charts: charts
                .into_iter()
                .map(|(c, eval)| (c, ChartComponents { exprs: None, eval }))
                .collect(),
        }
    }

    pub fn zero(name: &str, valence: Valence, dim: usize, charts: &[String]) -> TensorField {
        let len = valence.len(dim);
        let f: ComponentFn = Arc::new(move |_: &[DScalar]| Ok(vec![DScalar::constant(0.0); len]));
        Self::builtin(name, valence, Symmetry::None, dim, charts.iter().map(|c| (c.clone(), f.clone())).collect())
    }

    pub fn with_parity(mut self, parity: u8) -> TensorField {
        self.parity = parity % 2;
        self
    }

    pub fn with_symmetry(mut self, symmetry: Symmetry) -> TensorField {
        self.symmetry = symmetry;
        self
    }

    pub fn named(mut self, name: &str) -> TensorField {
        self.name = name.to_string();
        self
    }

    pub fn len(&self) -> usize {
        self.valence.len(self.dim)
    }

    pub fn is_empty(&self) -> bool {
        self.charts.is_empty()
    }

    pub fn chart_names(&self) -> Vec<String> {
        self.charts.keys().cloned().collect()
    }

    pub fn has_chart(&self, chart: &str) -> bool {
        self.charts.contains_key(chart)
    }

    /// DSL source of the components on `chart`, if the field has one.
    pub fn exprs(&self, chart: &str) -> Option<&[Expr]> {
        self.charts.get(chart).and_then(|c| c.exprs.as_deref())
    }

    pub fn is_dsl(&self) -> bool {
        self.charts.values().all(|c| c.exprs.is_some())
    }

    pub fn component_fn(&self, chart: &str) -> Result<ComponentFn> {
        self.charts.get(chart).map(|c| c.eval.clone()).ok_or_else(|| GeomError::MissingChartComponents {
            field: self.name.clone(),
            chart: chart.to_string(),
        })
    }

    pub fn eval(&self, chart: &str, x: &[DScalar]) -> Result<Vec<DScalar>> {
        let c = self.charts.get(chart).ok_or_else(|| GeomError::MissingChartComponents {
            field: self.name.clone(),
            chart: chart.to_string(),
        })?;
        if x.len() != self.dim {
            return Err(GeomError::Shape(format!(
                "field `{}` expects {} coordinates, got {}",
                self.name,
                self.dim,
                x.len()
            )));
        }
        (c.eval)(x)
    }

    pub fn eval_f64(&self, chart: &str, x: &[f64]) -> Result<Vec<f64>> {
        Ok(values(&self.eval(chart, &constants(x))?))
    }

    pub fn evaluate(&self, p: &Point) -> Result<Vec<f64>> {
        self.eval_f64(&p.chart, &p.coords)
    }

    /// Max deviation from the declared covariant symmetry at `x`.
    pub fn symmetry_residual(&self, chart: &str, x: &[f64]) -> Result<f64> {
        if self.symmetry == Symmetry::None || self.valence.co < 2 {
            return Ok(0.0);
        }
        let t = self.eval(chart, &constants(x))?;
        let rank = self.valence.rank();
        let sign = if self.symmetry == Symmetry::Symmetric { 1.0 } else { -1.0 };
        let mut worst: f64 = 0.0;
        for s in self.valence.contra..rank - 1 {
            let sw = transpose_slots(&t, self.dim, rank, s, s + 1);
            for (a, b) in t.iter().zip(&sw) {
                worst = worst.max((a.value() - sign * b.value()).abs());
            }
        }
        Ok(worst)
    }

    /// Component with the given multi-index.
    pub fn component(&self, chart: &str, x: &[f64], idx: &[usize]) -> Result<f64> {
        Ok(self.eval_f64(chart, x)?[flat_index(self.dim, idx)])
    }

    /// Multi-indices in storage order.
    pub fn indices(&self) -> Vec<Vec<usize>> {
        (0..self.len()).map(|f| multi_index(self.dim, self.valence.rank(), f)).collect()
    }
}

/// A map between atlases given chart by chart: each source chart maps into
/// one named target chart.
#[derive(Clone)]
pub struct SmoothMap {
    pub name: String,
    pub source_dim: usize,
    pub target_dim: usize,
    charts: BTreeMap<String, (String, ChartComponents)>,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothMap")
            .field("name", &self.name)
            .field("source_dim", &self.source_dim)
            .field("target_dim", &self.target_dim)
            .finish()
    }
}

impl SmoothMap {
    pub fn from_dsl(
        name: &str,
        source: &Atlas,
        target: &Atlas,
        charts: &[(&str, &str, &[&str])],
        params: &HashMap<String, f64>,
    ) -> Result<SmoothMap> {
        let mut out = BTreeMap::new();
        for (src, tgt, comps) in charts {
            let sc = source.chart(src)?;
            target.chart(tgt)?;
            if comps.len() != target.dim() {
                return Err(GeomError::Shape(format!("map `{name}`: wrong component count")));
            }
            let exprs: Vec<Expr> = comps.iter().map(|t| parse(t)).collect::<Result<_, _>>()?;
            let eval = compile(&exprs, &sc.coords, params)?;
            out.insert(src.to_string(), (tgt.to_string(), ChartComponents { exprs: Some(exprs), eval }));
        }
        Ok(SmoothMap { name: name.to_string(), source_dim: source.dim(), target_dim: target.dim(), charts: out })
    }

    pub fn builtin(
        name: &str,
        source_dim: usize,
        target_dim: usize,
        charts: Vec<(String, String, ComponentFn)>,
    ) -> SmoothMap {
        SmoothMap {
            name: name.to_string(),
            source_dim,
            target_dim,
            charts: charts
                .into_iter()
                .map(|(s, t, eval)| (s, (t, ChartComponents { exprs: None, eval })))
                .collect(),
        }
    }

    pub fn source_charts(&self) -> Vec<String> {
        self.charts.keys().cloned().collect()
    }

    pub fn target_chart(&self, source: &str) -> Result<&str> {
        self.charts
            .get(source)
            .map(|(t, _)| t.as_str())
            .ok_or_else(|| GeomError::UnknownChart(source.to_string()))
    }

    pub fn exprs(&self, source: &str) -> Option<&[Expr]> {
        self.charts.get(source).and_then(|(_, c)| c.exprs.as_deref())
    }

    pub fn component_fn(&self, source: &str) -> Result<(String, ComponentFn)> {
        self.charts
            .get(source)
            .map(|(t, c)| (t.clone(), c.eval.clone()))
            .ok_or_else(|| GeomError::UnknownChart(source.to_string()))
    }

    pub fn apply(&self, source: &str, x: &[DScalar]) -> Result<Vec<DScalar>> {
        let (_, c) = self.charts.get(source).ok_or_else(|| GeomError::UnknownChart(source.to_string()))?;
        (c.eval)(x)
    }

    pub fn apply_point(&self, p: &Point) -> Result<Point> {
        let tgt = self.target_chart(&p.chart)?.to_string();
        Ok(Point { chart: tgt, coords: values(&self.apply(&p.chart, &constants(&p.coords))?) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Chart;

    fn r3() -> Atlas {
        Atlas::single("R3", Chart::new("R3", &["x", "p", "z"], &[(-1.0, 1.0); 3]).unwrap())
    }

    #[test]
    fn darboux_form_components() {
        let eta = TensorField::from_dsl(
            "eta",
            Valence::FORM1,
            Symmetry::None,
            &r3(),
            &[("R3", &[("x", "-p"), ("z", "1")])],
        )
        .unwrap();
        assert_eq!(eta.eval_f64("R3", &[0.0, 2.0, 0.0]).unwrap(), vec![-2.0, 0.0, 1.0]);
    }

    #[test]
    fn antisymmetric_mirror() {
        let w = TensorField::from_dsl(
            "w",
            Valence::BILINEAR,
            Symmetry::Antisymmetric,
            &r3(),
            &[("R3", &[("x p", "1 + z")])],
        )
        .unwrap();
        let v = w.eval_f64("R3", &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(v[1], 2.0);
        assert_eq!(v[3], -2.0);
        assert_eq!(w.symmetry_residual("R3", &[0.1, 0.2, 0.3]).unwrap(), 0.0);
    }

    #[test]
    fn zero_field() {
        let z = TensorField::zero("0", Valence::ENDO, 3, &["R3".to_string()]);
        assert!(z.eval_f64("R3", &[0.3, 0.1, 0.2]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_chart() {
        let z = TensorField::zero("0", Valence::VECTOR, 3, &["R3".to_string()]);
        assert!(matches!(z.eval_f64("U", &[0.0; 3]), Err(GeomError::MissingChartComponents { .. })));
    }

    #[test]
    fn bad_index_rejected() {
        let r = TensorField::from_dsl("e", Valence::FORM1, Symmetry::None, &r3(), &[("R3", &[("q", "1")])]);
        assert!(r.is_err());
        let r = TensorField::from_dsl("e", Valence::FORM1, Symmetry::None, &r3(), &[("R3", &[("x p", "1")])]);
        assert!(matches!(r, Err(GeomError::Shape(_))));
    }
}
