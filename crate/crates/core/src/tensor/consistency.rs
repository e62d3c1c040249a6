use super::field::TensorField;
use super::index::transform_slot;
use crate::error::Result;
use crate::manifold::{Atlas, Piece, SamplePlan};
use crate::numkernel::{jet, DScalar};
use crate::report::{measure_indexed, CheckReport};

/// Components in the source chart against the pulled-back target
/// components on every transition piece. Fields with parity 1 pick up the
/// piece sign.
pub fn cross_chart_consistency(field: &TensorField, atlas: &Atlas, plan: &SamplePlan, tol: f64) -> CheckReport {
    let check = format!("cross_chart:{}", field.name);
    let mut points = Vec::new();
    let mut pieces: Vec<(&str, &str, &Piece)> = Vec::new();
    for t in atlas.transitions() {
        for (k, p) in t.pieces.iter().enumerate() {
            match atlas.sample_overlap(&t.source, &t.target, k, plan) {
                Ok(xs) => {
                    for x in xs {
                        points.push((t.source.clone(), x));
                        pieces.push((&t.source, &t.target, p));
                    }
                }
                Err(e) => return CheckReport::scalar(&check, plan, f64::INFINITY, tol).note(e.to_string()),
            }
        }
    }
    if points.is_empty() {
        return CheckReport::scalar(&check, plan, 0.0, tol).note("single chart: nothing to compare");
    }
    let m = measure_indexed(points, |i, _, x| {
        let (src, tgt, piece) = pieces[i];
        Ok(vec![piece_residual(field, src, tgt, piece, x)?])
    });
    m.report(&check, plan, &[0], tol, None)
}

fn piece_residual(field: &TensorField, src: &str, tgt: &str, piece: &Piece, x: &[f64]) -> Result<f64> {
    let n = field.dim;
    let val = field.valence;
    let rank = val.rank();
    let xs: Vec<DScalar> = x.iter().map(|&v| DScalar::constant(v)).collect();
    let (y, dfwd) = jet(|z: &[DScalar]| piece.forward(z), &xs)?;
    let (_, dinv) = jet(|z: &[DScalar]| piece.inverse(z), &y)?;
    let y: Vec<DScalar> = y.iter().map(|v| DScalar::constant(v.value())).collect();
    let mut t = field.eval(tgt, &y)?;
    // covariant: M[b][j] = ∂y^j/∂x^b; contravariant: M[a][i] = ∂x^a/∂y^i
    let m_co: Vec<Vec<DScalar>> = (0..n).map(|b| (0..n).map(|j| dfwd[b][j]).collect()).collect();
    let m_contra: Vec<Vec<DScalar>> = (0..n).map(|a| (0..n).map(|i| dinv[i][a]).collect()).collect();
    for slot in 0..rank {
        let m = if slot < val.contra { &m_contra } else { &m_co };
        t = transform_slot(&t, n, rank, slot, m);
    }
    let eps = if field.parity % 2 == 1 { piece.sign as f64 } else { 1.0 };
    let s = field.eval_f64(src, x)?;
    let scale = s.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    Ok(s.iter().zip(&t).map(|(a, b)| (a - eps * b.value()).abs()).fold(0.0, f64::max) / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{Chart, PieceSpec};
    use crate::tensor::{Symmetry, Valence};

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
    fn metric_glues_and_odd_form_needs_parity() {
        let a = band();
        let g = TensorField::from_dsl(
            "g",
            Valence::BILINEAR,
            Symmetry::Symmetric,
            &a,
            &[("O", &[("x x", "1"), ("t t", "1")]), ("U", &[("x x", "1"), ("t t", "1")])],
        )
        .unwrap();
        let plan = SamplePlan::new(1, 16);
        assert!(cross_chart_consistency(&g, &a, &plan, 1e-10).passed());
        // dt flips sign under the twist: consistent only as paired data
        let dt = TensorField::from_dsl("dt", Valence::FORM1, Symmetry::None, &a, &[("O", &[("t", "1")]), ("U", &[("t", "1")])])
            .unwrap();
        assert!(!cross_chart_consistency(&dt, &a, &plan, 1e-10).passed());
        assert!(cross_chart_consistency(&dt.with_parity(1), &a, &plan, 1e-10).passed());
    }

    #[test]
    fn vector_uses_inverse_jacobian() {
        let a = band();
        let v = TensorField::from_dsl("v", Valence::VECTOR, Symmetry::None, &a, &[("O", &[("t", "t")]), ("U", &[("t", "t")])])
            .unwrap();
        assert!(cross_chart_consistency(&v, &a, &SamplePlan::new(2, 16), 1e-10).passed());
    }
}
