use std::collections::HashMap;

use super::chart::{Chart, Interval};
use super::sampling::{sample_box, sample_chart, SamplePlan};
use crate::error::{GeomError, Result};
use crate::exprlang::{parse, Bound, Expr};
use crate::numkernel::{constants, values, DScalar};
use crate::report::{measure, measure_indexed, CheckReport, Measurements};

/// Tolerance for round trips through exact (affine or rational) gluings.
pub const TRANSITION_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub chart: String,
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(chart: &str, coords: &[f64]) -> Point {
        Point { chart: chart.to_string(), coords: coords.to_vec() }
    }
}

/// One branch of a gluing: valid on the open box `domain` of the source
/// chart. `sign` is the cocycle sign carried by paired data on this branch.
#[derive(Clone, Debug)]
pub struct Piece {
    pub domain: Vec<Interval>,
    pub forward: Vec<Expr>,
    pub inverse: Vec<Expr>,
    pub sign: i8,
    fwd: Vec<Bound>,
    inv: Vec<Bound>,
}

impl Piece {
    /// Strictly inside the branch box.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.domain.iter().zip(x).all(|(iv, &v)| iv.lo < v && v < iv.hi)
    }

    pub fn forward(&self, x: &[DScalar]) -> Result<Vec<DScalar>> {
        self.fwd.iter().map(|b| b.eval(x)).collect()
    }

    pub fn inverse(&self, y: &[DScalar]) -> Result<Vec<DScalar>> {
        self.inv.iter().map(|b| b.eval(y)).collect()
    }

    pub fn forward_f64(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(values(&self.forward(&constants(x))?))
    }

    pub fn inverse_f64(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(values(&self.inverse(&constants(y))?))
    }
}

/// Textual description of a branch, bound against the charts on insertion.
#[derive(Clone, Debug)]
pub struct PieceSpec {
    pub domain: Vec<(f64, f64)>,
    pub forward: Vec<String>,
    pub inverse: Vec<String>,
    pub sign: i8,
}

impl PieceSpec {
    pub fn new(domain: &[(f64, f64)], forward: &[&str], inverse: &[&str], sign: i8) -> PieceSpec {
        PieceSpec {
            domain: domain.to_vec(),
            forward: forward.iter().map(|s| s.to_string()).collect(),
            inverse: inverse.iter().map(|s| s.to_string()).collect(),
            sign,
        }
    }

    /// The same branch read backwards; `image` is its box in target coordinates.
    pub fn reversed(&self, image: &[(f64, f64)]) -> PieceSpec {
        PieceSpec {
            domain: image.to_vec(),
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
            sign: self.sign,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TransitionMap {
    pub source: String,
    pub target: String,
    pub pieces: Vec<Piece>,
}

impl TransitionMap {
    pub fn piece_at(&self, x: &[f64]) -> Option<(usize, &Piece)> {
        self.pieces.iter().enumerate().find(|(_, p)| p.contains(x))
    }
}

#[derive(Clone, Debug)]
pub struct Atlas {
    pub name: String,
    charts: Vec<Chart>,
    transitions: Vec<TransitionMap>,
}

impl Atlas {
    pub fn new(name: &str) -> Atlas {
        Atlas { name: name.to_string(), charts: Vec::new(), transitions: Vec::new() }
    }

    pub fn single(name: &str, chart: Chart) -> Atlas {
        let mut a = Atlas::new(name);
        a.charts.push(chart);
        a
    }

    pub fn add_chart(&mut self, chart: Chart) -> Result<()> {
        if self.charts.iter().any(|c| c.name == chart.name) {
            return Err(GeomError::Invalid(format!("duplicate chart `{}`", chart.name)));
        }
        self.charts.push(chart);
        Ok(())
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn chart_names(&self) -> Vec<String> {
        self.charts.iter().map(|c| c.name.clone()).collect()
    }

    pub fn chart(&self, name: &str) -> Result<&Chart> {
        self.charts
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| GeomError::UnknownChart(name.to_string()))
    }

    /// Common dimension of the charts.
    pub fn dim(&self) -> usize {
        self.charts.first().map_or(0, Chart::dim)
    }

    pub fn transitions(&self) -> &[TransitionMap] {
        &self.transitions
    }

    pub fn transition(&self, from: &str, to: &str) -> Result<&TransitionMap> {
        self.transitions.iter().find(|t| t.source == from && t.target == to).ok_or_else(|| {
            GeomError::NoTransition { from: from.to_string(), to: to.to_string() }
        })
    }

    /// Adds the gluing `from → to`.
    pub fn glue(&mut self, from: &str, to: &str, pieces: &[PieceSpec]) -> Result<()> {
        self.glue_with(from, to, pieces, &HashMap::new())
    }

    /// Adds the gluing with named constants available to the expressions.
    pub fn glue_with(
        &mut self,
        from: &str,
        to: &str,
        pieces: &[PieceSpec],
        params: &HashMap<String, f64>,
    ) -> Result<()> {
        let src = self.chart(from)?.clone();
        let tgt = self.chart(to)?.clone();
        let mut bound = Vec::with_capacity(pieces.len());
        for spec in pieces {
            if spec.domain.len() != src.dim()
                || spec.forward.len() != tgt.dim()
                || spec.inverse.len() != src.dim()
            {
                return Err(GeomError::Shape(format!("transition {from} -> {to}: piece arity")));
            }
            if spec.sign != 1 && spec.sign != -1 {
                return Err(GeomError::Invalid(format!("piece sign {} is not ±1", spec.sign)));
            }
            let forward: Vec<Expr> = spec.forward.iter().map(|s| parse(s)).collect::<Result<_, _>>()?;
            let inverse: Vec<Expr> = spec.inverse.iter().map(|s| parse(s)).collect::<Result<_, _>>()?;
            let fwd = forward.iter().map(|e| Bound::new(e, &src.coords, params)).collect::<Result<_>>()?;
            let inv = inverse.iter().map(|e| Bound::new(e, &tgt.coords, params)).collect::<Result<_>>()?;
            bound.push(Piece {
                domain: spec.domain.iter().map(|&(a, b)| Interval::new(a, b)).collect(),
                forward,
                inverse,
                sign: spec.sign,
                fwd,
                inv,
            });
        }
        for (i, p) in bound.iter().enumerate() {
            for q in &bound[..i] {
                let overlap = p.domain.iter().zip(&q.domain).all(|(a, b)| a.lo < b.hi && b.lo < a.hi);
                if overlap {
                    return Err(GeomError::Invalid(format!("transition {from} -> {to}: overlapping pieces")));
                }
            }
        }
        self.transitions.retain(|t| !(t.source == from && t.target == to));
        self.transitions.push(TransitionMap { source: from.into(), target: to.into(), pieces: bound });
        Ok(())
    }

    /// Adds `a → b` and the reverse gluing from the same branches; `images`
    /// gives each branch's box in `b` coordinates.
    pub fn glue_both(&mut self, a: &str, b: &str, pieces: &[(PieceSpec, Vec<(f64, f64)>)]) -> Result<()> {
        let fwd: Vec<PieceSpec> = pieces.iter().map(|(p, _)| p.clone()).collect();
        let back: Vec<PieceSpec> = pieces.iter().map(|(p, img)| p.reversed(img)).collect();
        self.glue(a, b, &fwd)?;
        self.glue(b, a, &back)
    }

    /// Product of branch signs along a chain of `(from, to, piece)` steps.
    pub fn loop_sign(&self, steps: &[(&str, &str, usize)]) -> Result<i8> {
        let mut sign = 1i8;
        for &(from, to, k) in steps {
            let t = self.transition(from, to)?;
            let p = t.pieces.get(k).ok_or_else(|| {
                GeomError::Invalid(format!("transition {from} -> {to} has no piece {k}"))
            })?;
            sign *= p.sign;
        }
        Ok(sign)
    }

    /// Uniform points of every chart, chart by chart.
    pub fn sample_points(&self, plan: &SamplePlan) -> Result<Vec<Point>> {
        let mut out = Vec::new();
        for c in &self.charts {
            for x in sample_chart(c, plan)? {
                out.push(Point { chart: c.name.clone(), coords: x });
            }
        }
        Ok(out)
    }

    /// Evaluates `f` at the sampled points of every chart. A sampling
    /// failure shows up as a single failed measurement.
    pub fn measure<F>(&self, plan: &SamplePlan, f: F) -> Measurements
    where
        F: Fn(&str, &[f64]) -> Result<Vec<f64>> + Sync,
    {
        match self.sample_points(plan) {
            Ok(pts) => measure(pts.into_iter().map(|p| (p.chart, p.coords)).collect(), f),
            Err(e) => Measurements::failed(e),
        }
    }

    /// Points of the source chart inside branch `k` of `from → to`.
    pub fn sample_overlap(&self, from: &str, to: &str, k: usize, plan: &SamplePlan) -> Result<Vec<Vec<f64>>> {
        let t = self.transition(from, to)?;
        let p = &t.pieces[k];
        sample_box(self.chart(from)?, Some(&p.domain), plan, &format!("{from}->{to}#{k}"))
    }

    pub fn apply_transition(&self, p: &Point, target: &str) -> Result<Point> {
        if p.chart == target {
            return Ok(p.clone());
        }
        let t = self.transition(&p.chart, target)?;
        let (_, piece) = t.piece_at(&p.coords).ok_or_else(|| GeomError::OutOfPiece {
            from: p.chart.clone(),
            to: target.to_string(),
            coords: p.coords.clone(),
        })?;
        Ok(Point { chart: target.to_string(), coords: piece.forward_f64(&p.coords)? })
    }

    /// Round trips, target-domain membership and the cocycle condition on
    /// sampled overlap points.
    pub fn consistency_check(&self, plan: &SamplePlan) -> CheckReport {
        let mut points = Vec::new();
        let mut tags = Vec::new();
        for (ti, t) in self.transitions.iter().enumerate() {
            for k in 0..t.pieces.len() {
                match self.sample_overlap(&t.source, &t.target, k, plan) {
                    Ok(xs) => {
                        for x in xs {
                            points.push((format!("{}->{}", t.source, t.target), x));
                            tags.push((ti, k));
                        }
                    }
                    Err(e) => {
                        return CheckReport::scalar("atlas_consistency", plan, f64::INFINITY, TRANSITION_TOL)
                            .note(e.to_string())
                    }
                }
            }
        }
        let m = measure_indexed(points, |i, _, x| {
            let (ti, k) = tags[i];
            self.point_residuals(ti, k, x)
        });
        m.report("atlas_consistency", plan, &[0, 1, 2], TRANSITION_TOL, None)
            .detail("round_trip", m.max(0))
            .detail("target_domain", m.max(1))
            .detail("cocycle", m.max(2))
    }

    fn point_residuals(&self, ti: usize, k: usize, x: &[f64]) -> Result<Vec<f64>> {
        let t = &self.transitions[ti];
        let p = &t.pieces[k];
        let y = p.forward_f64(x)?;
        let back = p.inverse_f64(&y)?;
        let round = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let outside = self.chart(&t.target)?.distance(&y);
        let mut cocycle: f64 = 0.0;
        for u in self.transitions.iter().filter(|u| u.source == t.target) {
            let Some((_, q)) = u.piece_at(&y) else { continue };
            let z = q.forward_f64(&y)?;
            let sign = p.sign * q.sign;
            let (direct, direct_sign) = if u.target == t.source {
                (x.to_vec(), 1)
            } else {
                let Ok(v) = self.transition(&t.source, &u.target) else { continue };
                let Some((_, r)) = v.piece_at(x) else { continue };
                (r.forward_f64(x)?, r.sign)
            };
            let d = z.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            cocycle = cocycle.max(d).max(((sign - direct_sign) as f64).abs());
        }
        Ok(vec![round, outside, cocycle])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band() -> Atlas {
        let mut a = Atlas::new("band");
        a.add_chart(Chart::new("O", &["x", "t"], &[(0.0, 1.0), (-2.0, 2.0)]).unwrap()).unwrap();
        a.add_chart(Chart::new("U", &["x", "t"], &[(0.5, 1.5), (-2.0, 2.0)]).unwrap()).unwrap();
        let same = PieceSpec::new(&[(0.5, 1.0), (-2.0, 2.0)], &["x", "t"], &["x", "t"], 1);
        let flip = PieceSpec::new(&[(0.0, 0.5), (-2.0, 2.0)], &["x + 1", "-t"], &["x - 1", "-t"], -1);
        a.glue_both(
            "O",
            "U",
            &[(same, vec![(0.5, 1.0), (-2.0, 2.0)]), (flip, vec![(1.0, 1.5), (-2.0, 2.0)])],
        )
        .unwrap();
        a
    }

    #[test]
    fn branches() {
        let a = band();
        assert_eq!(a.apply_transition(&Point::new("O", &[0.25, 1.0]), "U").unwrap().coords, vec![1.25, -1.0]);
        assert_eq!(a.apply_transition(&Point::new("O", &[0.75, 1.0]), "U").unwrap().coords, vec![0.75, 1.0]);
        assert_eq!(a.apply_transition(&Point::new("O", &[0.3, 0.2]), "O").unwrap().coords, vec![0.3, 0.2]);
        assert!(matches!(
            a.apply_transition(&Point::new("O", &[0.5, 0.0]), "U"),
            Err(GeomError::OutOfPiece { .. })
        ));
        assert!(matches!(
            a.apply_transition(&Point::new("O", &[0.5, 0.0]), "V"),
            Err(GeomError::NoTransition { .. })
        ));
    }

    #[test]
    fn band_is_consistent_and_twisted() {
        let a = band();
        let r = a.consistency_check(&SamplePlan::default());
        assert!(r.passed(), "{r:?}");
        assert!(r.max_residual < 1e-12);
        assert_eq!(a.loop_sign(&[("O", "U", 0), ("U", "O", 1)]).unwrap(), -1);
    }

    #[test]
    fn single_chart_is_vacuous() {
        let a = Atlas::single("R2", Chart::new("R2", &["x", "y"], &[(-1.0, 1.0); 2]).unwrap());
        assert!(a.consistency_check(&SamplePlan::default()).passed());
    }

    #[test]
    fn corrupted_inverse_is_caught() {
        let mut a = band();
        let bad = PieceSpec::new(&[(0.5, 1.0), (-2.0, 2.0)], &["x", "t"], &["x", "t + 0.1"], 1);
        a.glue("O", "U", &[bad]).unwrap();
        let r = a.consistency_check(&SamplePlan::default());
        assert!(!r.passed());
        assert!((r.details["round_trip"] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn overlapping_pieces_rejected() {
        let mut a = band();
        let p = PieceSpec::new(&[(0.0, 0.6), (-2.0, 2.0)], &["x", "t"], &["x", "t"], 1);
        let q = PieceSpec::new(&[(0.5, 1.0), (-2.0, 2.0)], &["x", "t"], &["x", "t"], 1);
        assert!(a.glue("O", "U", &[p, q]).is_err());
    }
}
