//! The compatibility tensor of a symplectic form and a metric, almost
//! complex and integrability tests, and the cone structures built from a
//! contact metric base.

use crate::bundle::PrincipalBundle;
use crate::contact::contact_frame_on;
use crate::error::{GeomError, Result};
use crate::manifold::{Atlas, Chart, SamplePlan};
use crate::numkernel::{DScalar, DenseMatrix, LuDecomposition};
use crate::report::CheckReport;
use crate::tensor::{
    exterior_derivative, interior, lift, nijenhuis, pointwise, Symmetry, TensorField, Valence,
};

/// Integrability residuals above this are a definite failure; between the
/// tolerance and this the verdict is inconclusive.
pub const INTEGRABILITY_FAIL: f64 = 1e-3;
pub const INTEGRABILITY_PASS: f64 = 1e-8;

/// `J` with `g(X, Y) = ω(X, JY)`, i.e. `J = W⁻¹G` for the Gram matrices of
/// `ω` and `g` in the coordinate frame.
pub fn compatibility_tensor(omega: &TensorField, g: &TensorField) -> Result<TensorField> {
    let n = omega.dim;
    pointwise("J", Valence::ENDO, Symmetry::None, &[omega, g], move |_, v| {
        let w = DenseMatrix::from_rows(n, n, v[0].clone())?;
        let gm = DenseMatrix::from_rows(n, n, v[1].clone())?;
        Ok(LuDecomposition::new(&w)?.solve_matrix(&gm)?.into_data())
    })
    .map(|f| f.with_parity(omega.parity ^ g.parity))
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b.abs()) })
}

fn square(j: &[f64], n: usize) -> Vec<f64> {
    (0..n * n).map(|f| (0..n).map(|m| j[(f / n) * n + m] * j[m * n + f % n]).sum()).collect()
}

/// `max |J² + id|`.
pub fn almost_complex_check(j: &TensorField, atlas: &Atlas, plan: &SamplePlan, tol: f64) -> CheckReport {
    let n = j.dim;
    let m = atlas.measure(plan, |c, x| {
        let sq = square(&j.eval_f64(c, x)?, n);
        Ok(vec![max_abs((0..n * n).map(|f| sq[f] + if f / n == f % n { 1.0 } else { 0.0 }))])
    });
    m.report(&format!("almost_complex:{}", j.name), plan, &[0], tol, None)
}

/// `max |N_J|` over coordinate frame pairs, with a declared gray zone.
pub fn kahler_integrability_check(j: &TensorField, atlas: &Atlas, plan: &SamplePlan) -> CheckReport {
    let check = format!("integrability:{}", j.name);
    let nj = match nijenhuis(j) {
        Ok(f) => f,
        Err(e) => return CheckReport::scalar(&check, plan, f64::INFINITY, INTEGRABILITY_PASS).note(e.to_string()),
    };
    let m = atlas.measure(plan, |c, x| Ok(vec![max_abs(nj.eval_f64(c, x)?)]));
    m.report(&check, plan, &[0], INTEGRABILITY_PASS, Some(INTEGRABILITY_FAIL))
}

/// `g(X, Y) − ω(X, JY)` on the coordinate frame.
pub fn compatibility_check(omega: &TensorField, g: &TensorField, j: &TensorField, atlas: &Atlas, plan: &SamplePlan, tol: f64) -> CheckReport {
    let n = g.dim;
    let m = atlas.measure(plan, |c, x| {
        let (w, gv, jv) = (omega.eval_f64(c, x)?, g.eval_f64(c, x)?, j.eval_f64(c, x)?);
        Ok(vec![max_abs((0..n * n).map(|f| {
            let (a, b) = (f / n, f % n);
            gv[f] - (0..n).map(|k| w[a * n + k] * jv[k * n + b]).sum::<f64>()
        }))])
    });
    m.report("compatibility", plan, &[0], tol, None)
}

/// `g(JX, JY) = g(X, Y)` and `ω(JX, JY) = ω(X, Y)`.
pub fn isometry_check(omega: &TensorField, g: &TensorField, j: &TensorField, atlas: &Atlas, plan: &SamplePlan, tol: f64) -> CheckReport {
    let n = g.dim;
    let pull = |b: &[f64], jv: &[f64]| -> Vec<f64> {
        (0..n * n)
            .map(|f| {
                let (x, y) = (f / n, f % n);
                let mut acc = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        acc += jv[k * n + x] * b[k * n + l] * jv[l * n + y];
                    }
                }
                acc
            })
            .collect()
    };
    let m = atlas.measure(plan, |c, x| {
        let (w, gv, jv) = (omega.eval_f64(c, x)?, g.eval_f64(c, x)?, j.eval_f64(c, x)?);
        let gi = max_abs(pull(&gv, &jv).iter().zip(&gv).map(|(a, b)| a - b));
        let wi = max_abs(pull(&w, &jv).iter().zip(&w).map(|(a, b)| a - b));
        Ok(vec![gi, wi])
    });
    m.report("isometry", plan, &[0, 1], tol, None).detail("metric", m.max(0)).detail("symplectic", m.max(1))
}

/// A symplectic form and a metric on a bundle, with their compatibility
/// tensor and the calibration `g(∇, ∇)`.
#[derive(Clone)]
pub struct KahlerCandidate {
    pub bundle: PrincipalBundle,
    pub omega: TensorField,
    pub g: TensorField,
    pub j: TensorField,
    pub calibration: TensorField,
}

impl KahlerCandidate {
    pub fn new(bundle: PrincipalBundle, omega: TensorField, g: TensorField) -> Result<KahlerCandidate> {
        let j = compatibility_tensor(&omega, &g)?;
        let calibration = crate::bundle::g_calibration(&g, &bundle)?;
        Ok(KahlerCandidate { bundle, omega, g, j, calibration })
    }

    pub fn almost_complex(&self, plan: &SamplePlan, tol: f64) -> CheckReport {
        almost_complex_check(&self.j, &self.bundle.atlas, plan, tol)
    }

    pub fn integrability(&self, plan: &SamplePlan) -> CheckReport {
        kahler_integrability_check(&self.j, &self.bundle.atlas, plan)
    }

    pub fn isometry(&self, plan: &SamplePlan, tol: f64) -> CheckReport {
        isometry_check(&self.omega, &self.g, &self.j, &self.bundle.atlas, plan, tol)
    }

    pub fn compatibility(&self, plan: &SamplePlan, tol: f64) -> CheckReport {
        compatibility_check(&self.omega, &self.g, &self.j, &self.bundle.atlas, plan, tol)
    }
}

/// Data recovered from a homogeneous Kähler candidate on a trivial cone
/// `M × ℝ₊`: the contact form and Reeb field, the function `a` in
/// `g(∇, ξ) = s a`, the base metric and the endomorphism of `C`.
#[derive(Clone)]
pub struct Main1Reconstruction {
    pub candidate: KahlerCandidate,
    pub eta: TensorField,
    pub xi: TensorField,
    pub a: TensorField,
    pub gm: TensorField,
    pub phi_c: TensorField,
    pub frame: Vec<TensorField>,
}

/// Recovers the base data from `ω` and `g`. Fails with `NotCompatible`
/// when `J² ≠ −id` at a sample.
pub fn reconstruct_main1(cand: &KahlerCandidate, plan: &SamplePlan) -> Result<Main1Reconstruction> {
    let ac = cand.almost_complex(plan, 1e-8);
    if !ac.passed() {
        return Err(GeomError::NotCompatible(format!(
            "J is not almost complex (max |J² + id| = {:.3e})",
            ac.max_residual
        )));
    }
    let b = &cand.bundle;
    let n = b.dim();
    if b.fiber.len() != 1 {
        return Err(GeomError::Shape("cone with one fiber coordinate expected".into()));
    }
    let fi = b.fiber[0];
    let nabla = b.liouville_field();
    let s = b.fiber_sum();
    let theta = interior(&nabla, &cand.omega)?;
    let eta = pointwise("eta", Valence::FORM1, Symmetry::None, &[&theta, &s], |_, v| {
        Ok(v[0].iter().map(|&t| t / v[1][0]).collect())
    })?;
    let deta = exterior_derivative(&eta)?;
    let base: Vec<usize> = (0..n).filter(|&i| i != fi).collect();
    let bi = base.clone();
    let xi = pointwise("xi", Valence::VECTOR, Symmetry::None, &[&eta, &deta], move |_, v| {
        let m = bi.len();
        let mut mat = DenseMatrix::zeros(m + 1, m + 1);
        for (r, &i) in bi.iter().enumerate() {
            for (c, &j) in bi.iter().enumerate() {
                mat[(r, c)] = v[1][i * n + j];
            }
            mat[(r, m)] = v[0][i];
            mat[(m, r)] = v[0][i];
        }
        let mut rhs = vec![DScalar::constant(0.0); m + 1];
        rhs[m] = DScalar::constant(1.0);
        let sol = LuDecomposition::new(&mat)?.solve(&rhs)?;
        let mut out = vec![DScalar::constant(0.0); n];
        for (r, &i) in bi.iter().enumerate() {
            out[i] = sol[r];
        }
        Ok(out)
    })?;
    let a = pointwise("a", Valence::SCALAR, Symmetry::None, &[&cand.g, &nabla, &xi, &s], move |_, v| {
        let g = &v[0];
        let mut acc = DScalar::constant(0.0);
        for i in 0..n {
            for j in 0..n {
                acc += g[i * n + j] * v[1][i] * v[2][j];
            }
        }
        Ok(vec![acc / v[3][0]])
    })?;
    let gm = pointwise("g_M", Valence::BILINEAR, Symmetry::Symmetric, &[&cand.g, &s, &a, &eta], move |_, v| {
        let (g, sv, av, e) = (&v[0], v[1][0], v[2][0], &v[3]);
        let w: Vec<DScalar> = (0..n)
            .map(|i| {
                let ds = if i == fi { DScalar::constant(1.0) / sv } else { DScalar::constant(0.0) };
                ds + av * e[i]
            })
            .collect();
        Ok((0..n * n).map(|f| g[f] / sv - w[f / n] * w[f % n]).collect())
    })?;
    let phi_c = pointwise("phi_C", Valence::ENDO, Symmetry::None, &[&cand.j, &xi, &eta], move |_, v| {
        let (j, x, e) = (&v[0], &v[1], &v[2]);
        Ok((0..n * n)
            .map(|f| {
                let (k, l) = (f / n, f % n);
                if k == fi || l == fi {
                    return DScalar::constant(0.0);
                }
                let mut acc = j[k * n + l];
                for m in 0..n {
                    acc -= j[k * n + m] * x[m] * e[l];
                }
                acc
            })
            .collect())
    })?;
    let frame = contact_frame_on(&eta, &xi, &base)?;
    Ok(Main1Reconstruction { candidate: cand.clone(), eta, xi, a, gm, phi_c, frame })
}

impl Main1Reconstruction {
    /// Coefficients of `Jξ` and `J∇` in the basis `(ξ, ∇)`, as the matrix
    /// with those columns, and the part of each image outside that span.
    fn w_block(&self, c: &str, x: &[f64]) -> Result<([[f64; 2]; 2], f64)> {
        let b = &self.candidate.bundle;
        let n = b.dim();
        let fi = b.fiber[0];
        let s = x[fi];
        let j = self.candidate.j.eval_f64(c, x)?;
        let xi = self.xi.eval_f64(c, x)?;
        let eta = self.eta.eval_f64(c, x)?;
        let mut nabla = vec![0.0; n];
        nabla[fi] = s;
        let apply = |v: &[f64]| -> Vec<f64> { (0..n).map(|k| (0..n).map(|l| j[k * n + l] * v[l]).sum()).collect() };
        let mut m = [[0.0; 2]; 2];
        let mut off: f64 = 0.0;
        for (col, v) in [xi.clone(), nabla.clone()].iter().enumerate() {
            let jv = apply(v);
            let cx = (0..n).map(|i| eta[i] * jv[i]).sum::<f64>();
            let cn = jv[fi] / s;
            m[0][col] = cx;
            m[1][col] = cn;
            for k in 0..n {
                off = off.max((jv[k] - cx * xi[k] - cn * nabla[k]).abs());
            }
        }
        Ok((m, off))
    }

    /// The expected block `[[a, 1], [−(1+a²), −a]]`, the `J`-invariance of
    /// `W = ⟨ξ, ∇⟩` and of `C`, orthogonality of `W` and `C`, `g(∇, ∇) = s`
    /// and `|ξ|² = s(1 + a²)`.
    pub fn check(&self, plan: &SamplePlan, tol: f64) -> CheckReport {
        let b = &self.candidate.bundle;
        let n = b.dim();
        let fi = b.fiber[0];
        let g = &self.candidate.g;
        let jf = &self.candidate.j;
        let m = b.atlas.measure(plan, |c, x| {
            let s = x[fi];
            let a = self.a.eval_f64(c, x)?[0];
            let (w, off) = self.w_block(c, x)?;
            let want = [[a, 1.0], [-(1.0 + a * a), -a]];
            let jw = max_abs((0..4).map(|k| w[k / 2][k % 2] - want[k / 2][k % 2]));
            let gv = g.eval_f64(c, x)?;
            let j = jf.eval_f64(c, x)?;
            let eta = self.eta.eval_f64(c, x)?;
            let xi = self.xi.eval_f64(c, x)?;
            let mut c_inv: f64 = 0.0;
            let mut orth: f64 = 0.0;
            for f in &self.frame {
                let v = f.eval_f64(c, x)?;
                let jv: Vec<f64> = (0..n).map(|k| (0..n).map(|l| j[k * n + l] * v[l]).sum()).collect();
                c_inv = c_inv.max((0..n).map(|i| eta[i] * jv[i]).sum::<f64>().abs()).max(jv[fi].abs());
                let gvxi: f64 = (0..n).flat_map(|i| (0..n).map(move |k| (i, k))).map(|(i, k)| v[i] * gv[i * n + k] * xi[k]).sum();
                let gvn: f64 = (0..n).map(|i| v[i] * gv[i * n + fi] * s).sum();
                orth = orth.max(gvxi.abs()).max(gvn.abs());
            }
            let gnn = gv[fi * n + fi] * s * s;
            let xixi: f64 = (0..n).flat_map(|i| (0..n).map(move |k| (i, k))).map(|(i, k)| xi[i] * gv[i * n + k] * xi[k]).sum();
            Ok(vec![jw, off, c_inv, orth, (gnn - s).abs(), (xixi - s * (1.0 + a * a)).abs()])
        });
        m.report("main1", plan, &[0, 1, 2, 3, 4, 5], tol, None)
            .detail("jw_block", m.max(0))
            .detail("w_invariant", m.max(1))
            .detail("c_invariant", m.max(2))
            .detail("w_orthogonal_c", m.max(3))
            .detail("nabla_norm", m.max(4))
            .detail("xi_norm", m.max(5))
    }

    /// `|a − expected|` at the samples.
    pub fn a_check(&self, expected: &TensorField, plan: &SamplePlan, tol: f64) -> CheckReport {
        let b = &self.candidate.bundle;
        let m = b.atlas.measure(plan, |c, x| Ok(vec![(self.a.eval_f64(c, x)?[0] - expected.eval_f64(c, x)?[0]).abs()]));
        m.report("main1_a", plan, &[0], tol, None)
    }

    /// `i_ξ dμ` for `μ = a η`.
    pub fn mu_check(&self, plan: &SamplePlan, tol: f64) -> CheckReport {
        let b = &self.candidate.bundle;
        let mu = match crate::tensor::scale(&self.a, &self.eta).and_then(|m| exterior_derivative(&m)).and_then(|d| interior(&self.xi, &d)) {
            Ok(f) => f,
            Err(e) => return CheckReport::scalar("i_xi_dmu", plan, f64::INFINITY, tol).note(e.to_string()),
        };
        let m = b.atlas.measure(plan, |c, x| Ok(vec![max_abs(mu.eval_f64(c, x)?)]));
        m.report("i_xi_dmu", plan, &[0], tol, None)
    }
}

/// `ω = ds∧η + s dη` and `g = s((ds/s + aη)² + g_M)` on `M × ℝ₊` with `s`
/// appended as the last coordinate.
pub fn main1_cone(
    base: &Atlas,
    eta: &TensorField,
    gm: &TensorField,
    a: &TensorField,
) -> Result<KahlerCandidate> {
    let c = crate::contact::ContactStructure::new(base.clone(), eta.clone())?;
    let n = base.dim();
    let (bundle, omega) = crate::bundle::symplectize(&c, n, true)?;
    let (eta_l, gm_l, a_l) = (bundle.lift(eta)?, bundle.lift(gm)?, bundle.lift(a)?);
    let s = bundle.fiber_sum();
    let m = n + 1;
    let g = pointwise("g", Valence::BILINEAR, Symmetry::Symmetric, &[&s, &eta_l, &gm_l, &a_l], move |_, v| {
        let (sv, e, g, av) = (v[0][0], &v[1], &v[2], v[3][0]);
        let w: Vec<DScalar> = (0..m)
            .map(|i| {
                let ds = if i == n { DScalar::constant(1.0) / sv } else { DScalar::constant(0.0) };
                ds + av * e[i]
            })
            .collect();
        Ok((0..m * m).map(|f| sv * (w[f / m] * w[f % m] + g[f])).collect())
    })?;
    KahlerCandidate::new(bundle, omega, g)
}

/// `M × ℝ` with the extra coordinate `t` appended on `[−1, 1]`.
pub fn cylinder(base: &Atlas) -> Result<Atlas> {
    let mut atlas = Atlas::new(&format!("{}-cyl", base.name));
    for ch in base.charts() {
        let mut coords: Vec<&str> = ch.coords.iter().map(String::as_str).collect();
        coords.push("t");
        let mut dom: Vec<(f64, f64)> = ch.domain.iter().map(|i| (i.lo, i.hi)).collect();
        dom.push((-1.0, 1.0));
        atlas.add_chart(Chart::new(&ch.name, &coords, &dom)?.with_margin(ch.margin))?;
    }
    if !base.transitions().is_empty() {
        return Err(GeomError::Invalid("cylinder over a multi-chart base".into()));
    }
    Ok(atlas)
}

/// `J(X, f∂t) = (φ̄X − (aη(X) + f)ξ, (af + η(X)(1 + a²))∂t)` on `M × ℝ`.
pub fn cone_complex_structure(
    base: &Atlas,
    eta: &TensorField,
    phibar: &TensorField,
    xi: &TensorField,
    a: &TensorField,
) -> Result<(Atlas, TensorField)> {
    let atlas = cylinder(base)?;
    let n = base.dim();
    let m = n + 1;
    let positions: Vec<usize> = (0..n).collect();
    let charts: Vec<(String, String)> = base.chart_names().into_iter().map(|c| (c.clone(), c)).collect();
    let up = |f: &TensorField| lift(f, m, &positions, &charts);
    let (e, p, x, av) = (up(eta)?, up(phibar)?, up(xi)?, up(a)?);
    let j = pointwise("J_cone", Valence::ENDO, Symmetry::None, &[&e, &p, &x, &av], move |_, v| {
        let (e, p, x, a) = (&v[0], &v[1], &v[2], v[3][0]);
        let mut out = vec![DScalar::constant(0.0); m * m];
        for k in 0..n {
            for l in 0..n {
                out[k * m + l] = p[k * m + l] - a * e[l] * x[k];
            }
            out[k * m + n] = -x[k];
        }
        for l in 0..n {
            out[n * m + l] = e[l] * (a * a + 1.0);
        }
        out[n * m + n] = a;
        Ok(out)
    })?;
    Ok((atlas, j.with_parity(0)))
}
