//! Identities any correct implementation of the calculus satisfies:
//! `d² = 0`, Cartan's formula, the Jacobi identity and naturality of `d`
//! under pullback. Used as a self-test on whatever fields an example
//! declares.

use std::sync::Arc;

use super::field::{ComponentFn, SmoothMap, TensorField};
use super::ops::{add, exterior_derivative, interior, lie_bracket, lie_derivative, pullback, sub};
use crate::error::Result;
use crate::manifold::{Atlas, SamplePlan};
use crate::numkernel::DScalar;
use crate::report::CheckReport;

/// A self-map of every chart: `y = c + ρ(x − c) + w sin(x_next)` about the
/// box centre `c`. With `ρ = 0.8` and `w = 0.05` it stays inside boxes of
/// half-width at least 0.25 and is a diffeomorphism onto its image.
pub fn contraction(atlas: &Atlas, rho: f64, w: f64) -> SmoothMap {
    let n = atlas.dim();
    let charts = atlas
        .charts()
        .iter()
        .map(|ch| {
            let centre: Vec<f64> = ch.domain.iter().map(|i| 0.5 * (i.lo + i.hi)).collect();
            let f: ComponentFn = Arc::new(move |x: &[DScalar]| {
                Ok((0..n).map(|i| (x[i] - centre[i]) * rho + centre[i] + x[(i + 1) % n].sin() * w).collect())
            });
            (ch.name.clone(), ch.name.clone(), f)
        })
        .collect();
    SmoothMap::builtin("contraction", n, n, charts)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a: f64, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b.abs()) })
}

/// Residual fields of the four identities, grouped.
fn residuals(
    forms: &[&TensorField],
    vectors: &[&TensorField],
    maps: &[SmoothMap],
) -> Result<[Vec<TensorField>; 4]> {
    let mut groups: [Vec<TensorField>; 4] = Default::default();
    for a in forms {
        let da = exterior_derivative(a)?;
        // d of a top-degree form vanishes identically
        if a.valence.co + 1 < a.dim {
            groups[0].push(exterior_derivative(&da)?);
        }
        if a.valence.co >= 1 {
            for x in vectors {
                let rhs = add(&interior(x, &da)?, &exterior_derivative(&interior(x, a)?)?)?;
                groups[1].push(sub(&lie_derivative(a, x)?, &rhs)?);
            }
        }
        for f in maps {
            groups[3].push(sub(&pullback(f, &da)?, &exterior_derivative(&pullback(f, a)?)?)?);
        }
    }
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            for k in j + 1..vectors.len() {
                let (x, y, z) = (vectors[i], vectors[j], vectors[k]);
                let a = lie_bracket(x, &lie_bracket(y, z)?)?;
                let b = lie_bracket(y, &lie_bracket(z, x)?)?;
                let c = lie_bracket(z, &lie_bracket(x, y)?)?;
                groups[2].push(add(&add(&a, &b)?, &c)?);
            }
        }
    }
    Ok(groups)
}

/// Samples the four identities on `atlas`. Forms may be functions or
/// antisymmetric covariant fields.
pub fn identity_check(
    atlas: &Atlas,
    forms: &[&TensorField],
    vectors: &[&TensorField],
    maps: &[SmoothMap],
    plan: &SamplePlan,
    tol: f64,
) -> CheckReport {
    let groups = match residuals(forms, vectors, maps) {
        Ok(g) => g,
        Err(e) => return CheckReport::scalar("identities", plan, f64::INFINITY, tol).note(e.to_string()),
    };
    let m = atlas.measure(plan, |c, x| {
        let mut out = Vec::with_capacity(4);
        for g in &groups {
            let mut worst: f64 = 0.0;
            for f in g {
                worst = worst.max(max_abs(&f.eval_f64(c, x)?));
            }
            out.push(worst);
        }
        Ok(out)
    });
    let counts = groups.iter().map(Vec::len).collect::<Vec<_>>();
    m.report("identities", plan, &[0, 1, 2, 3], tol, None)
        .detail("d_squared", m.max(0))
        .detail("cartan", m.max(1))
        .detail("jacobi", m.max(2))
        .detail("naturality", m.max(3))
        .detail("instances", counts.iter().sum::<usize>() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Chart;
    use crate::tensor::{Symmetry, Valence};

    #[test]
    fn identities_hold_on_polynomial_data() {
        let atlas = Atlas::single("R3", Chart::new("R3", &["x", "y", "z"], &[(-1.0, 1.0); 3]).unwrap());
        let f = |v, e: &[(&str, &str)]| TensorField::from_dsl("f", v, Symmetry::None, &atlas, &[("R3", e)]).unwrap();
        let a = f(Valence::FORM1, &[("x", "y*z^2"), ("y", "sin(x)"), ("z", "exp(x*y)")]);
        let h = f(Valence::SCALAR, &[("", "x^2*y - z")]);
        let x = f(Valence::VECTOR, &[("x", "y"), ("y", "-x"), ("z", "z^2")]);
        let y = f(Valence::VECTOR, &[("x", "1"), ("z", "cos(y)")]);
        let z = f(Valence::VECTOR, &[("y", "x*z")]);
        let map = contraction(&atlas, 0.8, 0.05);
        let r = identity_check(&atlas, &[&a, &h], &[&x, &y, &z], &[map], &SamplePlan::new(3, 12), 1e-10);
        assert!(r.passed(), "{:?}", r.details);
        assert_eq!(r.details["instances"], 2.0 + 3.0 + 1.0 + 2.0);
    }

    #[test]
    fn contraction_stays_in_box() {
        let atlas = Atlas::single("B", Chart::new("B", &["x", "t"], &[(0.0, 1.0), (-2.0, 2.0)]).unwrap());
        let map = contraction(&atlas, 0.8, 0.05);
        for p in atlas.sample_points(&SamplePlan::new(1, 50)).unwrap() {
            let q = map.apply_point(&p).unwrap();
            assert!(atlas.chart("B").unwrap().contains(&q.coords));
        }
    }
}
