//! Products of cooriented contact and Sasakian structures, and the product
//! of their Kähler cones.
//!
//! Factors must be single-chart. Product coordinates are the factor
//! coordinates with suffixes `1` and `2`, followed by the extra coordinates
//! of the construction (`t`, then `s` for cones).

use std::collections::HashMap;
use std::sync::Arc;

use crate::bundle::{
    calibrated_metric, decompose_homogeneous_metric, homogeneity_check, induced_metric, symplectize, Homogeneity,
    PrincipalBundle,
};
use crate::contact::{contact_frame, ContactStructure};
use crate::error::{GeomError, Result};
use crate::kahler::KahlerCandidate;
use crate::manifold::{Atlas, Chart, SamplePlan};
use crate::numkernel::DScalar;
use crate::report::CheckReport;
use crate::sasaki::LeviStructure;
use crate::tensor::{
    add, interior, lie_derivative, lift, pointwise, pullback, square, ComponentFn, SmoothMap, Symmetry, TensorField,
    Valence,
};

/// Range of the product parameter `t`.
pub const T_RANGE: (f64, f64) = (0.5, 2.0);

fn suffixed(name: &str, k: usize) -> String {
    if name.ends_with(|c: char| c.is_ascii_digit()) {
        format!("{name}_{k}")
    } else {
        format!("{name}{k}")
    }
}

fn only_chart(a: &Atlas) -> Result<&Chart> {
    match a.charts() {
        [c] => Ok(c),
        _ => Err(GeomError::Invalid(format!("product factor `{}` must have a single chart", a.name))),
    }
}

/// `A × B × extra` as a single chart, with the positions of each factor's
/// coordinates.
#[derive(Clone)]
struct ProductChart {
    atlas: Atlas,
    chart: String,
    first: (String, Vec<usize>),
    second: (String, Vec<usize>),
}

impl ProductChart {
    fn new(a: &Atlas, b: &Atlas, extra: &[(&str, (f64, f64))]) -> Result<ProductChart> {
        let (ca, cb) = (only_chart(a)?, only_chart(b)?);
        let mut coords: Vec<String> = ca.coords.iter().map(|c| suffixed(c, 1)).collect();
        coords.extend(cb.coords.iter().map(|c| suffixed(c, 2)));
        coords.extend(extra.iter().map(|(c, _)| c.to_string()));
        let mut dom: Vec<(f64, f64)> = ca.domain.iter().chain(&cb.domain).map(|i| (i.lo, i.hi)).collect();
        dom.extend(extra.iter().map(|(_, d)| *d));
        let name = format!("{}x{}", ca.name, cb.name);
        let refs: Vec<&str> = coords.iter().map(String::as_str).collect();
        let mut chart = Chart::new(&name, &refs, &dom)?;
        let na = ca.dim();
        for (k, ch) in [ca, cb].iter().enumerate() {
            for band in &ch.exclusions {
                let coord = &coords[band.coord + if k == 0 { 0 } else { na }];
                chart = chart.exclude(coord, band.lo, band.hi)?;
            }
        }
        let atlas = Atlas::single(&format!("{}x{}", a.name, b.name), chart);
        Ok(ProductChart {
            atlas,
            chart: name,
            first: (ca.name.clone(), (0..na).collect()),
            second: (cb.name.clone(), (na..na + cb.dim()).collect()),
        })
    }

    fn dim(&self) -> usize {
        self.atlas.dim()
    }

    fn coords(&self) -> &[String] {
        &self.atlas.charts()[0].coords
    }

    fn lift1(&self, f: &TensorField) -> Result<TensorField> {
        lift(f, self.dim(), &self.first.1, &[(self.chart.clone(), self.first.0.clone())])
    }

    fn lift2(&self, f: &TensorField) -> Result<TensorField> {
        lift(f, self.dim(), &self.second.1, &[(self.chart.clone(), self.second.0.clone())])
    }

    /// A field computed from the coordinates alone.
    fn coordinate_field<F>(&self, name: &str, valence: Valence, f: F) -> TensorField
    where
        F: Fn(&[DScalar]) -> Result<Vec<DScalar>> + Send + Sync + 'static,
    {
        let f: ComponentFn = Arc::new(f);
        TensorField::builtin(name, valence, Symmetry::None, self.dim(), vec![(self.chart.clone(), f)])
    }
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b.abs()) })
}

fn failed(check: &str, plan: &SamplePlan, tol: f64, e: GeomError) -> CheckReport {
    CheckReport::scalar(check, plan, f64::INFINITY, tol).note(e.to_string())
}

fn require_cooriented(c: &ContactStructure) -> Result<()> {
    if c.paired {
        return Err(GeomError::NotCooriented(c.atlas.name.clone()));
    }
    Ok(())
}

/// `η = t η₁ + η₂` on `M₁ × M₂ × ℝ₊`.
#[derive(Clone)]
pub struct ContactProduct {
    pub contact: ContactStructure,
    /// Factor Reeb fields, lifted.
    pub xi1: TensorField,
    pub xi2: TensorField,
    chart: ProductChart,
    factors: (ContactStructure, ContactStructure),
}

pub fn contact_product(c1: &ContactStructure, c2: &ContactStructure) -> Result<ContactProduct> {
    require_cooriented(c1)?;
    require_cooriented(c2)?;
    let pc = ProductChart::new(&c1.atlas, &c2.atlas, &[("t", T_RANGE)])?;
    let (e1, e2) = (pc.lift1(&c1.eta)?, pc.lift2(&c2.eta)?);
    let t = pc.dim() - 1;
    let eta = pointwise("eta", Valence::FORM1, Symmetry::None, &[&e1, &e2], move |x, v| {
        Ok(v[0].iter().zip(&v[1]).map(|(a, b)| x[t] * *a + *b).collect())
    })?;
    let contact = ContactStructure::new(pc.atlas.clone(), eta)?;
    Ok(ContactProduct {
        contact,
        xi1: pc.lift1(&c1.reeb)?,
        xi2: pc.lift2(&c2.reeb)?,
        chart: pc,
        factors: (c1.clone(), c2.clone()),
    })
}

impl ContactProduct {
    pub fn atlas(&self) -> &Atlas {
        &self.contact.atlas
    }

    /// The computed Reeb field against `ξ₂`.
    pub fn reeb_check(&self, plan: &SamplePlan, tol: f64) -> CheckReport {
        let m = self.atlas().measure(plan, |c, x| {
            let (a, b) = (self.contact.reeb.eval_f64(c, x)?, self.xi2.eval_f64(c, x)?);
            Ok(vec![max_abs(a.iter().zip(&b).map(|(u, v)| u - v))])
        });
        m.report("product_reeb", plan, &[0], tol, None)
    }

    /// `ker η` contains `ξ₁ − tξ₂` and `∂t`, and is unchanged by the
    /// reparametrization `t' = 1/t`, `η' = η₁ + t'η₂`.
    pub fn kernel_check(&self, plan: &SamplePlan, tol: f64) -> CheckReport {
        let run = || -> Result<CheckReport> {
            let pc = &self.chart;
            let n = pc.dim();
            let t = n - 1;
            let other = ProductChart::new(&self.factors.0.atlas, &self.factors.1.atlas, &[("u", T_RANGE)])?;
            let (e1, e2) = (other.lift1(&self.factors.0.eta)?, other.lift2(&self.factors.1.eta)?);
            let eta_u = pointwise("eta'", Valence::FORM1, Symmetry::None, &[&e1, &e2], move |x, v| {
                Ok(v[0].iter().zip(&v[1]).map(|(a, b)| *a + x[t] * *b).collect())
            })?;
            let inv: ComponentFn = Arc::new(move |x: &[DScalar]| {
                let mut y = x.to_vec();
                y[t] = x[t].recip()?;
                Ok(y)
            });
            let map = SmoothMap::builtin("t'=1/t", n, n, vec![(pc.chart.clone(), other.chart.clone(), inv)]);
            let pulled = pullback(&map, &eta_u)?;
            let frame = self.contact.frame()?;
            let eta = &self.contact.eta;
            let m = self.atlas().measure(plan, |c, x| {
                let (e, p, x1, x2) =
                    (eta.eval_f64(c, x)?, pulled.eval_f64(c, x)?, self.xi1.eval_f64(c, x)?, self.xi2.eval_f64(c, x)?);
                let mut reparam: f64 = 0.0;
                for f in &frame {
                    let v = f.eval_f64(c, x)?;
                    reparam = reparam.max(p.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>().abs());
                }
                let combo: f64 = (0..n).map(|i| e[i] * (x1[i] - x[t] * x2[i])).sum();
                Ok(vec![reparam, combo.abs(), e[t].abs()])
            });
            Ok(m.report("product_kernel", plan, &[0, 1, 2], tol, None)
                .detail("reparametrization", m.max(0))
                .detail("xi1_minus_t_xi2", m.max(1))
                .detail("dt", m.max(2)))
        };
        run().unwrap_or_else(|e| failed("product_kernel", plan, tol, e))
    }
}

/// The Sasakian product on `M₁ × M₂ × ℝ₊` with
/// `η = (t η₁ + η₂)/(t + 1)` and Reeb field `ξ₁ + ξ₂`.
#[derive(Clone)]
pub struct SasakianProduct {
    pub levi: LeviStructure,
    /// `η² + dt²/(t(t+1)²) + t(η₁ − η₂)²/(t+1)² + (t g_{C₁} + g_{C₂})/(t+1)`.
    pub gm_formula: TensorField,
    pub reeb_sum: TensorField,
    /// The endomorphism with weights `t/(t+1)`, `1/(t+1)` on the factor
    /// endomorphisms and `dt/(t+1)⊗(ξ₁ − tξ₂) − (η₁ − η₂)⊗∂t`; kept as a
    /// comparison because its square is not `−id` on the distribution.
    pub weighted_phibar: TensorField,
    chart: ProductChart,
}

/// Plan used to confirm that the factors are Sasakian.
fn factor_plan() -> SamplePlan {
    SamplePlan::new(42, 16)
}

pub fn sasakian_product(s1: &LeviStructure, s2: &LeviStructure) -> Result<SasakianProduct> {
    require_cooriented(&s1.contact)?;
    require_cooriented(&s2.contact)?;
    for s in [s1, s2] {
        if !s.sasaki(&factor_plan(), 1e-8).passed() {
            return Err(GeomError::FactorNotSasakian(s.atlas().name.clone()));
        }
    }
    let pc = ProductChart::new(s1.atlas(), s2.atlas(), &[("t", T_RANGE)])?;
    let n = pc.dim();
    let t = n - 1;
    let l1 = |f: &TensorField| pc.lift1(f);
    let l2 = |f: &TensorField| pc.lift2(f);
    let (e1, e2, x1, x2) = (l1(s1.eta())?, l2(s2.eta())?, l1(s1.xi())?, l2(s2.xi())?);
    let (p1, p2, g1, g2) = (l1(&s1.phibar)?, l2(&s2.phibar)?, l1(&s1.gc)?, l2(&s2.gc)?);
    let eta = pointwise("eta", Valence::FORM1, Symmetry::None, &[&e1, &e2], move |x, v| {
        let w = (x[t] + 1.0).recip()?;
        Ok(v[0].iter().zip(&v[1]).map(|(a, b)| (x[t] * *a + *b) * w).collect())
    })?;
    let block = move |weighted: bool| {
        move |x: &[DScalar], v: &[Vec<DScalar>]| -> Result<Vec<DScalar>> {
            let (e1, e2, x1, x2, p1, p2) = (&v[0], &v[1], &v[2], &v[3], &v[4], &v[5]);
            let tt = x[t];
            let w = (tt + 1.0).recip()?;
            let (a1, a2, dt_coef, eta_coef) =
                if weighted { (tt * w, w, w, DScalar::constant(1.0)) } else { (DScalar::constant(1.0), DScalar::constant(1.0), w / tt, tt) };
            let mut out = vec![DScalar::constant(0.0); n * n];
            for k in 0..n {
                for l in 0..n {
                    out[k * n + l] = a1 * p1[k * n + l] + a2 * p2[k * n + l];
                }
                out[k * n + t] += dt_coef * (x1[k] - tt * x2[k]);
            }
            for l in 0..n {
                out[t * n + l] -= eta_coef * (e1[l] - e2[l]);
            }
            Ok(out)
        }
    };
    let inputs = [&e1, &e2, &x1, &x2, &p1, &p2];
    let phibar = pointwise("phibar", Valence::ENDO, Symmetry::None, &inputs, block(false))?;
    let weighted_phibar = pointwise("phibar_weighted", Valence::ENDO, Symmetry::None, &inputs, block(true))?;
    let contact = ContactStructure::new(pc.atlas.clone(), eta)?;
    let levi = LeviStructure::new(contact, phibar)?;
    let eta_sq = square(levi.eta())?;
    let gm_formula = pointwise("g_M_formula", Valence::BILINEAR, Symmetry::Symmetric, &[&eta_sq, &e1, &e2, &g1, &g2], move |x, v| {
        let tt = x[t];
        let w = (tt + 1.0).recip()?;
        let mut out = vec![DScalar::constant(0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let f = i * n + j;
                let d = (v[1][i] - v[2][i]) * (v[1][j] - v[2][j]);
                out[f] = v[0][f] + tt * w * w * d + tt * w * v[3][f] + w * v[4][f];
            }
        }
        out[t * n + t] += w * w / tt;
        Ok(out)
    })?;
    let reeb_sum = add(&x1, &x2)?.named("xi1+xi2");
    Ok(SasakianProduct { levi, gm_formula, reeb_sum, weighted_phibar, chart: pc })
}

impl SasakianProduct {
    /// Levi metric against the closed formula, and the Reeb field against
    /// `ξ₁ + ξ₂`.
    pub fn formula_check(&self, plan: &SamplePlan, tol: f64) -> CheckReport {
        let atlas = self.levi.atlas();
        let m = atlas.measure(plan, |c, x| {
            let (a, b) = (self.levi.gm.eval_f64(c, x)?, self.gm_formula.eval_f64(c, x)?);
            let (r, s) = (self.levi.xi().eval_f64(c, x)?, self.reeb_sum.eval_f64(c, x)?);
            Ok(vec![max_abs(a.iter().zip(&b).map(|(u, v)| u - v)), max_abs(r.iter().zip(&s).map(|(u, v)| u - v))])
        });
        m.report("product_formulas", plan, &[0, 1], tol, None)
            .detail("metric", m.max(0))
            .detail("reeb", m.max(1))
    }

    /// The contact distribution matches that of `t η₁ + η₂`.
    pub fn distribution_check(&self, cp: &ContactProduct, plan: &SamplePlan, tol: f64) -> CheckReport {
        let run = || -> Result<CheckReport> {
            let frame = contact_frame(self.levi.eta(), self.levi.xi())?;
            let m = self.levi.atlas().measure(plan, |c, x| {
                let e = cp.contact.eta.eval_f64(c, x)?;
                let mut worst: f64 = 0.0;
                for f in &frame {
                    let v = f.eval_f64(c, x)?;
                    worst = worst.max(e.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>().abs());
                }
                Ok(vec![worst])
            });
            Ok(m.report("product_distribution", plan, &[0], tol, None))
        };
        run().unwrap_or_else(|e| failed("product_distribution", plan, tol, e))
    }

    pub fn coords(&self) -> &[String] {
        self.chart.coords()
    }
}

/// The product of the two Kähler cones with diagonal action and
/// calibration `𝔰₁ + 𝔰₂`.
#[derive(Clone)]
pub struct ProductLift {
    pub candidate: KahlerCandidate,
    pub factors: (KahlerCandidate, KahlerCandidate),
    /// `(√(𝔰₂/𝔰₁) d𝔰₁ − √(𝔰₁/𝔰₂) d𝔰₂)/(𝔰₁ + 𝔰₂)`.
    pub beta: TensorField,
    /// `β² + (𝔰₁/𝔰) g_{M₁} + (𝔰₂/𝔰) g_{M₂}`.
    pub gm_formula: TensorField,
    base: (LeviStructure, LeviStructure),
    chart: ProductChart,
}

fn cone(s: &LeviStructure) -> Result<KahlerCandidate> {
    let (bundle, omega) = symplectize(&s.contact, s.contact.dim(), true)?;
    let g = induced_metric(&s.gm, &s.contact, &bundle)?;
    KahlerCandidate::new(bundle, omega, g)
}

pub fn product_kahler_lift(s1: &LeviStructure, s2: &LeviStructure) -> Result<ProductLift> {
    let (k1, k2) = (cone(s1)?, cone(s2)?);
    let pc = ProductChart::new(&k1.bundle.atlas, &k2.bundle.atlas, &[])?;
    let off = k1.bundle.dim();
    let (f1, f2) = (k1.bundle.fiber[0], off + k2.bundle.fiber[0]);
    let omega = add(&pc.lift1(&k1.omega)?, &pc.lift2(&k2.omega)?)?.named("omega");
    let g = add(&pc.lift1(&k1.g)?, &pc.lift2(&k2.g)?)?.named("g").with_symmetry(Symmetry::Symmetric);
    let bundle = PrincipalBundle::new(pc.atlas.clone(), vec![f1, f2], true);
    let candidate = KahlerCandidate::new(bundle, omega, g)?;
    let n = pc.dim();
    let beta = pc.coordinate_field("beta", Valence::FORM1, move |x| {
        let (a, b) = (x[f1], x[f2]);
        let w = (a + b).recip()?;
        let mut out = vec![DScalar::constant(0.0); n];
        out[f1] = (b / a).sqrt()? * w;
        out[f2] = -((a / b).sqrt()? * w);
        Ok(out)
    });
    let (h1, h2) = (pc.lift1(&k1.bundle.lift(&s1.gm)?)?, pc.lift2(&k2.bundle.lift(&s2.gm)?)?);
    let b2 = square(&beta)?;
    let gm_formula = pointwise("g_M_formula", Valence::BILINEAR, Symmetry::Symmetric, &[&b2, &h1, &h2], move |x, v| {
        let w = (x[f1] + x[f2]).recip()?;
        Ok((0..n * n).map(|f| v[0][f] + x[f1] * w * v[1][f] + x[f2] * w * v[2][f]).collect())
    })?;
    Ok(ProductLift { candidate, factors: (k1, k2), beta, gm_formula, base: (s1.clone(), s2.clone()), chart: pc })
}

impl ProductLift {
    pub fn bundle(&self) -> &PrincipalBundle {
        &self.candidate.bundle
    }

    /// `g(∇, ∇) = 𝔰₁ + 𝔰₂`.
    pub fn calibration_check(&self, plan: &SamplePlan, tol: f64) -> CheckReport {
        let sum = self.bundle().fiber_sum();
        let m = self.bundle().atlas.measure(plan, |c, x| {
            Ok(vec![(self.candidate.calibration.eval_f64(c, x)?[0] - sum.eval_f64(c, x)?[0]).abs()])
        });
        m.report("product_calibration", plan, &[0], tol, None)
    }

    /// `β` is invariant: degree-0 homogeneous, `i_∇β = 0`, `L_∇β = 0`.
    pub fn beta_check(&self, plan: &SamplePlan, tol: f64) -> CheckReport {
        let hom = homogeneity_check(&self.beta, self.bundle(), 0.0, Homogeneity::Plain, plan, tol);
        let nabla = self.bundle().liouville_field();
        let run = || -> Result<CheckReport> {
            let i = interior(&nabla, &self.beta)?;
            let l = lie_derivative(&self.beta, &nabla)?;
            let m = self.bundle().atlas.measure(plan, |c, x| {
                Ok(vec![max_abs(i.eval_f64(c, x)?), max_abs(l.eval_f64(c, x)?)])
            });
            Ok(m.report("beta_invariance", plan, &[0, 1], tol, None)
                .detail("i_nabla", m.max(0))
                .detail("l_nabla", m.max(1)))
        };
        let inv = run().unwrap_or_else(|e| failed("beta_invariance", plan, tol, e));
        CheckReport::combine("product_beta", plan, tol, vec![("homogeneity", hom), ("invariance", inv)])
    }

    /// The homogeneous decomposition of `g₁ ⊕ g₂` against `𝔰₁ + 𝔰₂` has
    /// `A = 1`, `μ = 0` and recovers the closed-form base metric.
    pub fn decomposition_check(&self, plan: &SamplePlan, tol: f64) -> CheckReport {
        let run = || -> Result<CheckReport> {
            let cal = self.bundle().fiber_sum();
            let dec = decompose_homogeneous_metric(&self.candidate.g, &cal, self.bundle(), plan)?;
            let re = dec.reassembly_check(&self.candidate.g, self.bundle(), plan, tol);
            let m = self.bundle().atlas.measure(plan, |c, x| {
                let (a, b) = (dec.gm.eval_f64(c, x)?, self.gm_formula.eval_f64(c, x)?);
                Ok(vec![max_abs(a.iter().zip(&b).map(|(u, v)| u - v))])
            });
            let formula = m.report("base_metric", plan, &[0], tol, None);
            Ok(CheckReport::combine("product_decomposition", plan, tol, vec![("reassembly", re), ("base_metric", formula)]))
        };
        run().unwrap_or_else(|e| failed("product_decomposition", plan, tol, e))
    }

    /// Pulls `g₁ ⊕ g₂` back along `(t, s) ↦ (ts/(t+1), s/(t+1))` and
    /// compares with the cone metric `s((ds/s)² + g_M)` of the Sasakian
    /// product.
    pub fn reparametrization_check(&self, sp: &SasakianProduct, plan: &SamplePlan, tol: f64) -> CheckReport {
        let run = || -> Result<CheckReport> {
            let (bundle, _) = symplectize(&sp.levi.contact, sp.levi.contact.dim(), true)?;
            let cone_g = calibrated_metric(&sp.levi.gm, &bundle.fiber_sum(), &bundle)?;
            let src = bundle.atlas.charts()[0].clone();
            let (d1, d2) = (self.base.0.contact.dim(), self.base.1.contact.dim());
            let mut comps: Vec<String> = src.coords[..d1].to_vec();
            comps.push("t*s/(t+1)".into());
            comps.extend(src.coords[d1..d1 + d2].iter().cloned());
            comps.push("s/(t+1)".into());
            let refs: Vec<&str> = comps.iter().map(String::as_str).collect();
            let map = SmoothMap::from_dsl(
                "reparametrize",
                &bundle.atlas,
                &self.bundle().atlas,
                &[(src.name.as_str(), self.chart.chart.as_str(), &refs)],
                &HashMap::new(),
            )?;
            let pulled = pullback(&map, &self.candidate.g)?;
            let m = bundle.atlas.measure(plan, |c, x| {
                let (a, b) = (pulled.eval_f64(c, x)?, cone_g.eval_f64(c, x)?);
                let scale = b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
                Ok(vec![max_abs(a.iter().zip(&b).map(|(u, v)| u - v)) / scale])
            });
            Ok(m.report("product_reparametrization", plan, &[0], tol, None))
        };
        run().unwrap_or_else(|e| failed("product_reparametrization", plan, tol, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::darboux_contact;
    use crate::sasaki::darboux_phibar;

    fn plan() -> SamplePlan {
        SamplePlan::new(42, 8)
    }

    fn darboux() -> LeviStructure {
        let c = darboux_contact(1).unwrap();
        let p = darboux_phibar(&c).unwrap();
        LeviStructure::new(c, p).unwrap()
    }

    #[test]
    fn contact_product_of_darboux() {
        let d = darboux();
        let cp = contact_product(&d.contact, &d.contact).unwrap();
        assert_eq!(cp.chart.coords(), ["x1", "p1", "z1", "x2", "p2", "z2", "t"]);
        assert!(cp.contact.is_contact(&plan()).unwrap().passed());
        assert!(cp.reeb_check(&plan(), 1e-9).passed());
        let k = cp.kernel_check(&plan(), 1e-8);
        assert!(k.passed(), "{:?}", k.details);
        let e = cp.contact.eta.eval_f64("RxR", &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 1.5]).unwrap();
        assert_eq!(e, vec![-0.30000000000000004, 0.0, 1.5, -0.5, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn sasakian_product_of_darboux() {
        let d = darboux();
        let sp = sasakian_product(&d, &d).unwrap();
        let x = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 1.0];
        let e = sp.levi.eta().eval_f64("RxR", &x).unwrap();
        assert!((e[2] - 0.5).abs() < 1e-15 && (e[5] - 0.5).abs() < 1e-15);
        assert!(sp.formula_check(&plan(), 1e-10).passed());
        assert!(sp.levi.validate(&plan(), 1e-10).passed());
        assert!(sp.levi.contact_metric(&plan(), 1e-9).passed());
        let s = sp.levi.sasaki(&plan(), 1e-8);
        assert!(s.passed(), "{:?}", s.details);
        let cp = contact_product(&d.contact, &d.contact).unwrap();
        assert!(sp.distribution_check(&cp, &plan(), 1e-8).passed());
        let weighted = LeviStructure::new(sp.levi.contact.clone(), sp.weighted_phibar.clone()).unwrap();
        assert!(weighted.validate(&plan(), 1e-8).details["phi_square"] > 1e-3);
    }

    #[test]
    fn product_cone() {
        let d = darboux();
        let lift = product_kahler_lift(&d, &d).unwrap();
        assert!(lift.candidate.almost_complex(&plan(), 1e-9).passed());
        assert!(lift.candidate.integrability(&plan()).passed());
        assert!(lift.calibration_check(&plan(), 1e-10).passed());
        assert!(lift.beta_check(&plan(), 1e-9).passed());
        let dec = lift.decomposition_check(&plan(), 1e-8);
        assert!(dec.passed(), "{:?}", dec.details);
        let sp = sasakian_product(&d, &d).unwrap();
        let r = lift.reparametrization_check(&sp, &plan(), 1e-8);
        assert!(r.passed(), "{}", r.max_residual);
    }

    #[test]
    fn non_sasakian_factor_rejected() {
        let d = darboux();
        let twisted = crate::tensor::linear_combination("2phi", &[(2.0, &d.phibar)]).unwrap();
        let bad = LeviStructure::new(d.contact.clone(), twisted).unwrap();
        assert!(matches!(sasakian_product(&bad, &d), Err(GeomError::FactorNotSasakian(_))));
    }
}
