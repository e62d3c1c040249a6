//! Contact forms: the non-degeneracy test, Reeb fields, frames of the
//! contact distribution and the standard Darboux model.

use crate::error::{GeomError, Result};
use crate::manifold::{Atlas, Chart, SamplePlan};
use crate::numkernel::{pfaffian, DScalar, DenseMatrix, LuDecomposition};
use crate::report::CheckReport;
use crate::tensor::{exterior_derivative, pointwise, Symmetry, TensorField, Valence};

/// Below this the top-form coefficient counts as zero.
pub const CONTACT_THRESHOLD: f64 = 1e-8;

/// Local contact forms on an atlas. When `paired` is set the chart forms
/// agree only up to the sign of each transition piece.
#[derive(Clone)]
pub struct ContactStructure {
    pub atlas: Atlas,
    pub eta: TensorField,
    pub deta: TensorField,
    pub reeb: TensorField,
    pub paired: bool,
}

impl ContactStructure {
    pub fn new(atlas: Atlas, eta: TensorField) -> Result<ContactStructure> {
        if eta.valence != Valence::FORM1 {
            return Err(GeomError::Shape(format!("`{}` is not a one-form", eta.name)));
        }
        if eta.dim % 2 == 0 {
            return Err(GeomError::EvenDimension(eta.dim));
        }
        for c in atlas.chart_names() {
            if !eta.has_chart(&c) {
                return Err(GeomError::MissingChartComponents { field: eta.name.clone(), chart: c });
            }
        }
        let paired = eta.parity == 1;
        let deta = exterior_derivative(&eta)?;
        let reeb = reeb_field(&eta)?;
        Ok(ContactStructure { atlas, eta, deta, reeb, paired })
    }

    pub fn dim(&self) -> usize {
        self.eta.dim
    }

    /// `n` in `dim = 2n + 1`.
    pub fn half_dim(&self) -> usize {
        self.eta.dim / 2
    }

    pub fn frame(&self) -> Result<Vec<TensorField>> {
        contact_frame(&self.eta, &self.reeb)
    }

    pub fn is_contact(&self, plan: &SamplePlan) -> Result<CheckReport> {
        is_contact_form(&self.eta, &self.atlas, plan)
    }

    pub fn reeb_check(&self, plan: &SamplePlan, tol: f64) -> CheckReport {
        reeb_check(&self.eta, &self.reeb, &self.atlas, plan, tol)
    }
}

/// Bordered antisymmetric matrix `[[0, η], [−ηᵀ, dη]]`.
fn bordered(eta: &[DScalar], deta: &[DScalar]) -> Result<DenseMatrix> {
    let n = eta.len();
    let mut m = DenseMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        m[(0, i + 1)] = eta[i];
        m[(i + 1, 0)] = -eta[i];
        for j in 0..n {
            m[(i + 1, j + 1)] = deta[i * n + j];
        }
    }
    Ok(m)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Coefficient of `η∧(dη)ⁿ` against `dx¹∧…∧dx^{2n+1}`.
pub fn top_coefficient(eta: &TensorField) -> Result<TensorField> {
    if eta.dim % 2 == 0 {
        return Err(GeomError::EvenDimension(eta.dim));
    }
    let deta = exterior_derivative(eta)?;
    let k = factorial(eta.dim / 2);
    pointwise("top", Valence::SCALAR, Symmetry::None, &[eta, &deta], move |_, v| {
        Ok(vec![pfaffian(&bordered(&v[0], &v[1])?)? * k])
    })
}

/// Passes when `|η∧(dη)ⁿ| > 1e-8` at every sample. The residual is the
/// shortfall below that threshold.
pub fn is_contact_form(eta: &TensorField, atlas: &Atlas, plan: &SamplePlan) -> Result<CheckReport> {
    let top = top_coefficient(eta)?;
    let m = atlas.measure(plan, |c, x| {
        let v = top.eval_f64(c, x)?[0].abs();
        Ok(vec![(CONTACT_THRESHOLD - v).max(0.0), v])
    });
    Ok(m.report("contact_form", plan, &[0], 0.0, None).detail("min_abs_coefficient", m.min(1)))
}

/// Solves `[[dη, ηᵀ], [η, 0]] (ξ, λ) = (0, 1)`; `λ` vanishes whenever the
/// system is solvable.
pub fn reeb_field(eta: &TensorField) -> Result<TensorField> {
    let deta = exterior_derivative(eta)?;
    let n = eta.dim;
    let parity = eta.parity;
    pointwise(&format!("xi({})", eta.name), Valence::VECTOR, Symmetry::None, &[eta, &deta], move |_, v| {
        let mut m = DenseMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = v[1][i * n + j];
            }
            m[(i, n)] = v[0][i];
            m[(n, i)] = v[0][i];
        }
        let mut rhs = vec![DScalar::constant(0.0); n + 1];
        rhs[n] = DScalar::constant(1.0);
        let mut sol = LuDecomposition::new(&m)?.solve(&rhs)?;
        sol.truncate(n);
        Ok(sol)
    })
    .map(|f| f.with_parity(parity))
}

/// `η(ξ) − 1` and `i_ξ dη`.
pub fn reeb_check(eta: &TensorField, xi: &TensorField, atlas: &Atlas, plan: &SamplePlan, tol: f64) -> CheckReport {
    let deta = match exterior_derivative(eta) {
        Ok(d) => d,
        Err(e) => return CheckReport::scalar("reeb", plan, f64::INFINITY, tol).note(e.to_string()),
    };
    let n = eta.dim;
    let m = atlas.measure(plan, |c, x| {
        let (e, d, v) = (eta.eval_f64(c, x)?, deta.eval_f64(c, x)?, xi.eval_f64(c, x)?);
        let one = ((0..n).map(|i| e[i] * v[i]).sum::<f64>() - 1.0).abs();
        let flat = (0..n).map(|j| (0..n).map(|i| v[i] * d[i * n + j]).sum::<f64>().abs()).fold(0.0, f64::max);
        Ok(vec![one, flat])
    });
    m.report("reeb", plan, &[0, 1], tol, None).detail("eta_xi", m.max(0)).detail("i_xi_deta", m.max(1))
}

/// The `2n` fields `e_k − η_k ξ` for every coordinate direction except the
/// one where `|ξ^k|` is largest. They span `ker η` wherever ξ is defined.
pub fn contact_frame(eta: &TensorField, xi: &TensorField) -> Result<Vec<TensorField>> {
    contact_frame_on(eta, xi, &(0..eta.dim).collect::<Vec<_>>())
}

/// Like [`contact_frame`], using only the coordinate directions listed in
/// `dirs` (for a contact form pulled back to a bigger space).
pub fn contact_frame_on(eta: &TensorField, xi: &TensorField, dirs: &[usize]) -> Result<Vec<TensorField>> {
    let n = eta.dim;
    (0..dirs.len() - 1)
        .map(|j| {
            let dirs = dirs.to_vec();
            pointwise(&format!("v{j}"), Valence::VECTOR, Symmetry::None, &[eta, xi], move |_, v| {
                let (e, x) = (&v[0], &v[1]);
                let sub: Vec<DScalar> = dirs.iter().map(|&d| x[d]).collect();
                let drop = dominant(&sub);
                let k = dirs[if j < drop { j } else { j + 1 }];
                Ok((0..n)
                    .map(|i| {
                        let delta = if i == k { 1.0 } else { 0.0 };
                        -(e[k] * x[i]) + delta
                    })
                    .collect())
            })
            .map(|f| f.with_parity(0))
        })
        .collect()
}

fn dominant(x: &[DScalar]) -> usize {
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if v.value().abs() > x[best].value().abs() {
            best = i;
        }
    }
    best
}

/// Frame vectors at one point, as plain arrays.
pub fn contact_frame_at(frame: &[TensorField], chart: &str, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    frame.iter().map(|f| f.eval_f64(chart, x)).collect()
}

/// Coordinate names of the Darboux chart: `x p z` for `n = 1`, otherwise
/// `x1..xn p1..pn z`.
pub fn darboux_coords(n: usize) -> Vec<String> {
    if n == 1 {
        return vec!["x".into(), "p".into(), "z".into()];
    }
    let mut c: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    c.extend((1..=n).map(|i| format!("p{i}")));
    c.push("z".into());
    c
}

/// The single-chart atlas `[−1, 1]^{2n+1}`.
pub fn darboux_atlas(n: usize) -> Result<Atlas> {
    let coords = darboux_coords(n);
    let names: Vec<&str> = coords.iter().map(String::as_str).collect();
    let chart = Chart::new("R", &names, &vec![(-1.0, 1.0); 2 * n + 1])?;
    Ok(Atlas::single(&format!("darboux-{n}"), chart))
}

/// `η = dz − Σ pᵢ dxᵢ` on `[−1, 1]^{2n+1}`.
pub fn darboux_contact(n: usize) -> Result<ContactStructure> {
    if n == 0 {
        return Err(GeomError::Invalid("Darboux model needs n >= 1".into()));
    }
    let atlas = darboux_atlas(n)?;
    let coords = darboux_coords(n);
    let mut entries: Vec<(String, String)> = (0..n).map(|i| (coords[i].clone(), format!("-{}", coords[n + i]))).collect();
    entries.push(("z".into(), "1".into()));
    let refs: Vec<(&str, &str)> = entries.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let eta = TensorField::from_dsl("eta", Valence::FORM1, Symmetry::None, &atlas, &[("R", &refs)])?;
    ContactStructure::new(atlas, eta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan() -> SamplePlan {
        SamplePlan::new(42, 16)
    }

    #[test]
    fn darboux_is_contact_in_several_dimensions() {
        for n in 1..=3 {
            let c = darboux_contact(n).unwrap();
            let r = c.is_contact(&plan()).unwrap();
            assert!(r.passed(), "n = {n}");
            assert!((r.details["min_abs_coefficient"] - factorial(n)).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_is_not_contact() {
        let atlas = darboux_atlas(1).unwrap();
        let dz = TensorField::from_dsl("dz", Valence::FORM1, Symmetry::None, &atlas, &[("R", &[("z", "1")])]).unwrap();
        let r = is_contact_form(&dz, &atlas, &plan()).unwrap();
        assert!(!r.passed());
        assert!(r.witness.is_some());
    }

    #[test]
    fn even_dimension_rejected() {
        let atlas = Atlas::single("R2", Chart::new("R2", &["x", "y"], &[(-1.0, 1.0); 2]).unwrap());
        let dx = TensorField::from_dsl("dx", Valence::FORM1, Symmetry::None, &atlas, &[("R2", &[("x", "1")])]).unwrap();
        assert!(matches!(is_contact_form(&dx, &atlas, &plan()), Err(GeomError::EvenDimension(2))));
    }

    #[test]
    fn darboux_reeb_is_dz() {
        for n in 1..=3 {
            let c = darboux_contact(n).unwrap();
            let x: Vec<f64> = (0..2 * n + 1).map(|i| 0.1 * i as f64 - 0.2).collect();
            let xi = c.reeb.eval_f64("R", &x).unwrap();
            let mut want = vec![0.0; 2 * n + 1];
            want[2 * n] = 1.0;
            assert_eq!(xi, want);
            assert!(c.reeb_check(&plan(), 1e-12).passed());
        }
    }

    #[test]
    fn darboux_frame() {
        let c = darboux_contact(1).unwrap();
        let f = contact_frame_at(&c.frame().unwrap(), "R", &[0.3, 0.5, -0.2]).unwrap();
        assert_eq!(f, vec![vec![1.0, 0.0, 0.5], vec![0.0, 1.0, 0.0]]);
    }

    #[test]
    fn conformal_rescaling_stays_contact() {
        let atlas = darboux_atlas(1).unwrap();
        let eta = TensorField::from_dsl(
            "f eta",
            Valence::FORM1,
            Symmetry::None,
            &atlas,
            &[("R", &[("x", "-(1 + 0.3*sin(x))*p"), ("z", "1 + 0.3*sin(x)")])],
        )
        .unwrap();
        assert!(is_contact_form(&eta, &atlas, &plan()).unwrap().passed());
        let c = ContactStructure::new(atlas, eta).unwrap();
        assert!(c.reeb_check(&plan(), 1e-12).passed());
        let frame = c.frame().unwrap();
        for x in [[0.1, 0.2, 0.3], [-0.7, 0.4, 0.9]] {
            let e = c.eta.eval_f64("R", &x).unwrap();
            let vs = contact_frame_at(&frame, "R", &x).unwrap();
            for v in &vs {
                assert!(e.iter().zip(v).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-12);
            }
        }
    }
}
