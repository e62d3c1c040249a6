//! Levi structures on contact manifolds: the Levi form and metric, the
//! normality tensors, the Sasaki and Killing conditions and the
//! Levi-Civita identity for the associated metric.
//!
//! The stored endomorphism `φ̄` follows the Levi sign: `dη(·, φ̄·)` is
//! positive on the contact distribution. The associated endomorphism of a
//! contact metric structure is `φ = −φ̄`.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::contact::{contact_frame, ContactStructure};
use crate::error::{GeomError, Result};
use crate::manifold::{Atlas, SamplePlan};
use crate::numkernel::{DScalar, DenseMatrix, LuDecomposition};
use crate::report::CheckReport;
use crate::tensor::{
    add, apply_endo, cross_chart_consistency, differential, evaluate_on, exterior_derivative, lie_bracket, lie_derivative,
    linear_combination, nijenhuis, nijenhuis_on, pointwise, scale, square, ComponentFn, NijenhuisMode, Symmetry,
    TensorField, Valence,
};

/// A contact structure with an endomorphism `φ̄` of the contact
/// distribution, extended by `φ̄ξ = 0`, and the metrics it defines.
#[derive(Clone)]
pub struct LeviStructure {
    pub contact: ContactStructure,
    pub phibar: TensorField,
    /// `g_C(X, Y) = dη(X, φ̄Y)`.
    pub gc: TensorField,
    /// `η² + g_C`.
    pub gm: TensorField,
}

impl LeviStructure {
    pub fn new(contact: ContactStructure, phibar: TensorField) -> Result<LeviStructure> {
        if phibar.valence != Valence::ENDO || phibar.dim != contact.dim() {
            return Err(GeomError::Shape(format!("`{}` is not an endomorphism field of the base", phibar.name)));
        }
        let gc = levi_form(&contact.eta, &phibar)?;
        let gm = levi_metric(&contact.eta, &gc)?;
        Ok(LeviStructure { contact, phibar, gc, gm })
    }

    pub fn atlas(&self) -> &Atlas {
        &self.contact.atlas
    }

    pub fn eta(&self) -> &TensorField {
        &self.contact.eta
    }

    pub fn xi(&self) -> &TensorField {
        &self.contact.reeb
    }

    /// The associated endomorphism `φ = −φ̄`.
    pub fn phi(&self) -> Result<TensorField> {
        linear_combination("phi", &[(-1.0, &self.phibar)])
    }

    pub fn validate(&self, plan: &SamplePlan, tol: f64) -> CheckReport {
        levi_structure_check(self, plan, tol)
    }

    pub fn pin(&self, plan: &SamplePlan, tol: f64) -> CheckReport {
        pin_battery(self.eta(), &self.phibar, self.atlas(), plan, tol)
    }

    pub fn contact_metric(&self, plan: &SamplePlan, tol: f64) -> CheckReport {
        match self.phi() {
            Ok(phi) => contact_metric_check(self.eta(), &self.gm, &phi, self.xi(), self.atlas(), plan, tol),
            Err(e) => failed("contact_metric", plan, tol, e),
        }
    }

    pub fn sasaki(&self, plan: &SamplePlan, tol: f64) -> CheckReport {
        sasaki_check(self, plan, tol)
    }

    pub fn killing(&self, plan: &SamplePlan, tol: f64) -> CheckReport {
        killing_check(self.xi(), &self.gm, self.atlas(), plan, tol)
    }

    pub fn levi_civita_identity(&self, plan: &SamplePlan, tol: f64) -> CheckReport {
        match self.phi() {
            Ok(phi) => levi_civita_check(self.eta(), &self.gm, &phi, self.xi(), self.atlas(), plan, tol),
            Err(e) => failed("levi_civita", plan, tol, e),
        }
    }

    pub fn paired_consistency(&self, plan: &SamplePlan, tol: f64) -> CheckReport {
        paired_consistency_check(self, plan, tol)
    }
}

fn failed(check: &str, plan: &SamplePlan, tol: f64, e: GeomError) -> CheckReport {
    CheckReport::scalar(check, plan, f64::INFINITY, tol).note(e.to_string())
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b.abs()) })
}

fn endo(j: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    (0..n).map(|k| (0..n).map(|l| j[k * n + l] * x[l]).sum()).collect()
}

fn bilinear(b: &[f64], n: usize, x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += b[i * n + j] * x[i] * y[j];
        }
    }
    acc
}

/// `g_C(X, Y) = dη(X, φ̄Y)` as a full (0,2) field; it is symmetric exactly
/// when `φ̄` is compatible with `dη`.
pub fn levi_form(eta: &TensorField, phibar: &TensorField) -> Result<TensorField> {
    let deta = exterior_derivative(eta)?;
    let n = eta.dim;
    pointwise("g_C", Valence::BILINEAR, Symmetry::None, &[&deta, phibar], move |_, v| {
        Ok((0..n * n)
            .map(|f| {
                let (i, j) = (f / n, f % n);
                (0..n).map(|k| v[0][i * n + k] * v[1][k * n + j]).sum()
            })
            .collect())
    })
}

/// `η² + g_C`.
pub fn levi_metric(eta: &TensorField, gc: &TensorField) -> Result<TensorField> {
    Ok(add(&square(eta)?, gc)?.named("g_M"))
}

/// `φ̄ξ = 0`, `φ̄² = −id + ξ⊗η`, `η∘φ̄ = 0`, and `g_C` symmetric and
/// positive definite on the contact frame.
pub fn levi_structure_check(levi: &LeviStructure, plan: &SamplePlan, tol: f64) -> CheckReport {
    let frame = match levi.contact.frame() {
        Ok(f) => f,
        Err(e) => return failed("levi_structure", plan, tol, e),
    };
    let n = levi.contact.dim();
    let m = levi.atlas().measure(plan, |c, x| {
        let (e, p, xi, g) =
            (levi.eta().eval_f64(c, x)?, levi.phibar.eval_f64(c, x)?, levi.xi().eval_f64(c, x)?, levi.gc.eval_f64(c, x)?);
        let kills = max_abs(endo(&p, n, &xi));
        let sq = max_abs((0..n * n).map(|f| {
            let (k, l) = (f / n, f % n);
            let pp: f64 = (0..n).map(|m| p[k * n + m] * p[m * n + l]).sum();
            pp + if k == l { 1.0 } else { 0.0 } - xi[k] * e[l]
        }));
        let into = max_abs((0..n).map(|l| (0..n).map(|k| e[k] * p[k * n + l]).sum::<f64>()));
        let vs: Vec<Vec<f64>> = frame.iter().map(|f| f.eval_f64(c, x)).collect::<Result<_>>()?;
        let r = vs.len();
        let gram = DMatrix::from_fn(r, r, |a, b| bilinear(&g, n, &vs[a], &vs[b]));
        let asym = max_abs((0..r * r).map(|f| gram[(f / r, f % r)] - gram[(f % r, f / r)]));
        let sym = (&gram + gram.transpose()) * 0.5;
        let min = SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(vec![kills, sq, into, asym, (-min).max(0.0), min])
    });
    m.report("levi_structure", plan, &[0, 1, 2, 3, 4], tol, None)
        .detail("phi_xi", m.max(0))
        .detail("phi_square", m.max(1))
        .detail("eta_phi", m.max(2))
        .detail("gc_symmetry", m.max(3))
        .detail("gc_min_eigenvalue", m.min(5))
}

/// The four equivalent conditions on frame pairs of the contact
/// distribution: (a) `dη(φX, φY) = dη(X, Y)`, (b) `g_C` symmetric,
/// (c) `g_C` is `φ`-invariant, (d) `η([φX, Y] + [X, φY]) = 0`. Each flag's
/// residual is a detail; the check passes when all four hold and records
/// whether they agree.
pub fn pin_battery(eta: &TensorField, phibar: &TensorField, atlas: &Atlas, plan: &SamplePlan, tol: f64) -> CheckReport {
    let prep = || -> Result<(TensorField, Vec<TensorField>, Vec<TensorField>)> {
        let deta = exterior_derivative(eta)?;
        let xi = crate::contact::reeb_field(eta)?;
        let frame = contact_frame(eta, &xi)?;
        let mut cr = Vec::new();
        for a in 0..frame.len() {
            for b in a + 1..frame.len() {
                let pa = apply_endo(phibar, &frame[a])?;
                let pb = apply_endo(phibar, &frame[b])?;
                let s = add(&lie_bracket(&pa, &frame[b])?, &lie_bracket(&frame[a], &pb)?)?;
                cr.push(evaluate_on(eta, &[&s])?);
            }
        }
        Ok((deta, frame, cr))
    };
    let (deta, frame, cr) = match prep() {
        Ok(v) => v,
        Err(e) => return failed("pin", plan, tol, e),
    };
    let n = eta.dim;
    let m = atlas.measure(plan, |c, x| {
        let (d, p) = (deta.eval_f64(c, x)?, phibar.eval_f64(c, x)?);
        let vs: Vec<Vec<f64>> = frame.iter().map(|f| f.eval_f64(c, x)).collect::<Result<_>>()?;
        let pv: Vec<Vec<f64>> = vs.iter().map(|v| endo(&p, n, v)).collect();
        let gc = |u: &[f64], w: &[f64]| bilinear(&d, n, u, &endo(&p, n, w));
        let (mut fa, mut fb, mut fc) = (0.0f64, 0.0f64, 0.0f64);
        for a in 0..vs.len() {
            for b in 0..vs.len() {
                fa = fa.max((bilinear(&d, n, &pv[a], &pv[b]) - bilinear(&d, n, &vs[a], &vs[b])).abs());
                fb = fb.max((gc(&vs[a], &vs[b]) - gc(&vs[b], &vs[a])).abs());
                fc = fc.max((gc(&pv[a], &pv[b]) - gc(&vs[a], &vs[b])).abs());
            }
        }
        let fd = max_abs(cr.iter().map(|f| f.eval_f64(c, x).map(|v| v[0])).collect::<Result<Vec<_>>>()?);
        Ok(vec![fa, fb, fc, fd])
    });
    let flags: Vec<f64> = (0..4).map(|k| m.max(k)).collect();
    let passes: Vec<bool> = flags.iter().map(|&r| r <= tol).collect();
    let agree = passes.iter().all(|&p| p == passes[0]);
    let r = m
        .report("pin", plan, &[0, 1, 2, 3], tol, None)
        .detail("flag_a", flags[0])
        .detail("flag_b", flags[1])
        .detail("flag_c", flags[2])
        .detail("flag_d", flags[3])
        .detail("flags_agree", if agree { 1.0 } else { 0.0 });
    if agree {
        r
    } else {
        r.note("pin flags disagree")
    }
}

/// Whether the four pin flags of a report agree.
pub fn pin_flags_agree(report: &CheckReport) -> bool {
    report.details.get("flags_agree") == Some(&1.0)
}

/// The associated-metric axioms on coordinate frames: `η(X) = g(X, ξ)`,
/// `φ² = −id + η⊗ξ` and `dη(X, Y) = g(X, φY)`.
pub fn contact_metric_check(
    eta: &TensorField,
    g: &TensorField,
    phi: &TensorField,
    xi: &TensorField,
    atlas: &Atlas,
    plan: &SamplePlan,
    tol: f64,
) -> CheckReport {
    let deta = match exterior_derivative(eta) {
        Ok(d) => d,
        Err(e) => return failed("contact_metric", plan, tol, e),
    };
    let n = eta.dim;
    let m = atlas.measure(plan, |c, x| {
        let (e, gv, p, v, d) =
            (eta.eval_f64(c, x)?, g.eval_f64(c, x)?, phi.eval_f64(c, x)?, xi.eval_f64(c, x)?, deta.eval_f64(c, x)?);
        let metric = max_abs((0..n).map(|i| e[i] - (0..n).map(|j| gv[i * n + j] * v[j]).sum::<f64>()));
        let sq = max_abs((0..n * n).map(|f| {
            let (k, l) = (f / n, f % n);
            let pp: f64 = (0..n).map(|m| p[k * n + m] * p[m * n + l]).sum();
            pp + if k == l { 1.0 } else { 0.0 } - e[l] * v[k]
        }));
        let form = max_abs((0..n * n).map(|f| {
            let (a, b) = (f / n, f % n);
            d[f] - (0..n).map(|k| gv[a * n + k] * p[k * n + b]).sum::<f64>()
        }));
        Ok(vec![metric, sq, form])
    });
    m.report("contact_metric", plan, &[0, 1, 2], tol, None)
        .detail("eta_metric", m.max(0))
        .detail("phi_square", m.max(1))
        .detail("deta_metric", m.max(2))
}

/// The four normality tensors of `(η, φ̄, ξ)`.
#[derive(Clone)]
pub struct NTensors {
    /// `N_φ̄ + dη⊗ξ`, a (1,2) field.
    pub n1: TensorField,
    /// `(L_{φ̄X}η)(Y) − (L_{φ̄Y}η)(X)`.
    pub n2: TensorField,
    /// `L_ξ φ̄`.
    pub n3: TensorField,
    /// `L_ξ η`.
    pub n4: TensorField,
}

pub fn n_tensors(eta: &TensorField, phibar: &TensorField, xi: &TensorField) -> Result<NTensors> {
    let n = eta.dim;
    let deta = exterior_derivative(eta)?;
    let nj = nijenhuis(phibar)?;
    let n1 = pointwise("N1", Valence::new(1, 2), Symmetry::Antisymmetric, &[&nj, &deta, xi], move |_, v| {
        Ok((0..n * n * n).map(|f| v[0][f] + v[1][f % (n * n)] * v[2][f / (n * n)]).collect())
    })?
    .with_parity(0);
    let n2 = differential("N2", Valence::BILINEAR, Symmetry::Antisymmetric, &[phibar, eta], move |_, v, d| {
        let (p, e) = (&v[0], &v[1]);
        let (dp, de) = (&d[0], &d[1]);
        // (L_{φ̄∂a}η)_b = φ̄^i_a ∂_i η_b + η_i ∂_b φ̄^i_a
        let lie = |a: usize, b: usize| -> DScalar {
            (0..n).map(|i| p[i * n + a] * de[i][b] + e[i] * dp[b][i * n + a]).sum()
        };
        Ok((0..n * n).map(|f| lie(f / n, f % n) - lie(f % n, f / n)).collect())
    })?;
    let n3 = lie_derivative(phibar, xi)?.named("N3");
    let n4 = lie_derivative(eta, xi)?.named("N4");
    Ok(NTensors { n1, n2, n3, n4 })
}

/// Largest entry of each normality tensor; all four enter the verdict.
pub fn normality_check(levi: &LeviStructure, plan: &SamplePlan, tol: f64) -> CheckReport {
    let nt = match n_tensors(levi.eta(), &levi.phibar, levi.xi()) {
        Ok(nt) => nt,
        Err(e) => return failed("normality", plan, tol, e),
    };
    let m = levi.atlas().measure(plan, |c, x| {
        [&nt.n1, &nt.n2, &nt.n3, &nt.n4].iter().map(|f| Ok(max_abs(f.eval_f64(c, x)?))).collect()
    });
    m.report("normality", plan, &[0, 1, 2, 3], tol, None)
        .detail("n1", m.max(0))
        .detail("n2", m.max(1))
        .detail("n3", m.max(2))
        .detail("n4", m.max(3))
}

/// `1 + 0.3 sin(x⁰)`, the rescaling used to test that the frame extension
/// does not matter.
fn bump(field: &TensorField) -> TensorField {
    let f: ComponentFn = Arc::new(|x: &[DScalar]| Ok(vec![x[0].sin() * 0.3 + 1.0]));
    TensorField::builtin("f", Valence::SCALAR, Symmetry::None, field.dim, field.chart_names().into_iter().map(|c| (c, f.clone())).collect())
}

/// The Sasaki condition by two routes. The first is `N_φ̄ + dη⊗ξ = 0` on
/// coordinate frames. The second is the complex Nijenhuis bracket of `φ̄`
/// on frame pairs of the contact distribution together with `L_ξφ̄ = 0`;
/// it is repeated with one frame field rescaled by a function, which must
/// not change the result.
pub fn sasaki_check(levi: &LeviStructure, plan: &SamplePlan, tol: f64) -> CheckReport {
    let prep = || -> Result<(NTensors, Vec<TensorField>, TensorField)> {
        let nt = n_tensors(levi.eta(), &levi.phibar, levi.xi())?;
        let frame = levi.contact.frame()?;
        let mut split = Vec::new();
        for a in 0..frame.len() {
            for b in a + 1..frame.len() {
                split.push(nijenhuis_on(&levi.phibar, &frame[a], &frame[b], NijenhuisMode::Complex)?);
            }
        }
        let f = bump(&frame[0]);
        let fx = scale(&f, &frame[0])?;
        let scaled = nijenhuis_on(&levi.phibar, &fx, &frame[1], NijenhuisMode::Complex)?;
        let spread = pointwise("spread", Valence::VECTOR, Symmetry::None, &[&scaled, &split[0], &f], |_, v| {
            Ok(v[0].iter().zip(&v[1]).map(|(a, b)| *a - *b * v[2][0]).collect())
        })?;
        Ok((nt, split, spread))
    };
    let (nt, split, spread) = match prep() {
        Ok(v) => v,
        Err(e) => return failed("sasaki", plan, tol, e),
    };
    let m = levi.atlas().measure(plan, |c, x| {
        let n1 = max_abs(nt.n1.eval_f64(c, x)?);
        let mut s = 0.0f64;
        for f in &split {
            s = s.max(max_abs(f.eval_f64(c, x)?));
        }
        Ok(vec![
            n1,
            s,
            max_abs(nt.n3.eval_f64(c, x)?),
            max_abs(spread.eval_f64(c, x)?),
            max_abs(nt.n2.eval_f64(c, x)?),
            max_abs(nt.n4.eval_f64(c, x)?),
        ])
    });
    let nij_ok = m.max(0) <= tol;
    let split_ok = m.max(1) <= tol && m.max(2) <= tol;
    m.report("sasaki", plan, &[0, 1, 2, 3, 4, 5], tol, None)
        .detail("nij", m.max(0))
        .detail("split_nijenhuis", m.max(1))
        .detail("l_xi_phi", m.max(2))
        .detail("extension_spread", m.max(3))
        .detail("n2", m.max(4))
        .detail("n4", m.max(5))
        .detail("routes_agree", if nij_ok == split_ok { 1.0 } else { 0.0 })
}

/// `L_ξ g_M = 0`.
pub fn killing_check(xi: &TensorField, gm: &TensorField, atlas: &Atlas, plan: &SamplePlan, tol: f64) -> CheckReport {
    let l = match lie_derivative(gm, xi) {
        Ok(l) => l,
        Err(e) => return failed("killing", plan, tol, e),
    };
    let m = atlas.measure(plan, |c, x| Ok(vec![max_abs(l.eval_f64(c, x)?)]));
    m.report("killing", plan, &[0], tol, None)
}

/// `Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)` from a metric and its
/// first partials `dg[i][ab] = ∂_i g_ab`.
fn christoffel_at(g: &[DScalar], dg: &[Vec<DScalar>], n: usize) -> Result<Vec<DScalar>> {
    let lu = LuDecomposition::new(&DenseMatrix::from_rows(n, n, g.to_vec())?)?;
    let ginv = lu.solve_matrix(&DenseMatrix::identity(n))?;
    let mut lower = vec![DScalar::constant(0.0); n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                lower[(l * n + i) * n + j] = (dg[i][j * n + l] + dg[j][i * n + l] - dg[l][i * n + j]) * 0.5;
            }
        }
    }
    let mut out = vec![DScalar::constant(0.0); n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                out[(k * n + i) * n + j] = (0..n).map(|l| ginv[(k, l)] * lower[(l * n + i) * n + j]).sum();
            }
        }
    }
    Ok(out)
}

/// Christoffel symbols of the Levi-Civita connection, stored `Γ^k_ij`.
pub fn christoffel(g: &TensorField) -> Result<TensorField> {
    let n = g.dim;
    differential(&format!("Gamma({})", g.name), Valence::new(1, 2), Symmetry::Symmetric, &[g], move |_, v, d| {
        christoffel_at(&v[0], &d[0], n)
    })
}

/// `(∇_iφ)^k_j − ½(g_ij ξ^k − η_j δ^k_i)`, the Levi-Civita identity of a
/// Sasakian structure with `dη = g(·, φ·)`.
pub fn levi_civita_check(
    eta: &TensorField,
    g: &TensorField,
    phi: &TensorField,
    xi: &TensorField,
    atlas: &Atlas,
    plan: &SamplePlan,
    tol: f64,
) -> CheckReport {
    let n = eta.dim;
    let t = differential("T", Valence::new(1, 2), Symmetry::None, &[g, phi, eta, xi], move |_, v, d| {
        let gam = christoffel_at(&v[0], &d[0], n)?;
        let (p, dp, e, x) = (&v[1], &d[1], &v[2], &v[3]);
        let gm = &v[0];
        let mut out = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut acc = dp[i][k * n + j];
                    for l in 0..n {
                        acc += gam[(k * n + i) * n + l] * p[l * n + j] - gam[(l * n + i) * n + j] * p[k * n + l];
                    }
                    let delta = if k == i { 1.0 } else { 0.0 };
                    acc -= (gm[i * n + j] * x[k] - e[j] * delta) * 0.5;
                    out.push(acc);
                }
            }
        }
        Ok(out)
    });
    let t = match t {
        Ok(t) => t,
        Err(e) => return failed("levi_civita", plan, tol, e),
    };
    let m = atlas.measure(plan, |c, x| Ok(vec![max_abs(t.eval_f64(c, x)?)]));
    m.report("levi_civita", plan, &[0], tol, None)
}

/// Cross-chart agreement of the local data: `η`, `ξ`, `φ̄` flip with the
/// gluing sign when paired, `g_C` and `g_M` never do.
pub fn paired_consistency_check(levi: &LeviStructure, plan: &SamplePlan, tol: f64) -> CheckReport {
    let atlas = levi.atlas();
    let parts = vec![
        ("eta", cross_chart_consistency(levi.eta(), atlas, plan, tol)),
        ("xi", cross_chart_consistency(levi.xi(), atlas, plan, tol)),
        ("phi", cross_chart_consistency(&levi.phibar, atlas, plan, tol)),
        ("g_C", cross_chart_consistency(&levi.gc, atlas, plan, tol)),
        ("g_M", cross_chart_consistency(&levi.gm, atlas, plan, tol)),
    ];
    let r = CheckReport::combine("paired_consistency", plan, tol, parts);
    if levi.contact.paired {
        r
    } else {
        r.note("structure is not paired: all signs are +1")
    }
}

/// The endomorphism a metric induces on the contact distribution:
/// `dη(X, φ̄Y) = g(X, Y) − η(X)η(Y)` with `η∘φ̄ = 0`, solved column by column
/// from the bordered system `[[dη, η], [η, 0]]`. It is a Levi endomorphism
/// exactly when the metric is associated to `η`.
pub fn phibar_from_metric(eta: &TensorField, gm: &TensorField) -> Result<TensorField> {
    let deta = exterior_derivative(eta)?;
    let n = eta.dim;
    let parity = eta.parity;
    pointwise("phibar", Valence::ENDO, Symmetry::None, &[eta, &deta, gm], move |_, v| {
        let (e, d, g) = (&v[0], &v[1], &v[2]);
        let mut mat = DenseMatrix::zeros(n + 1, n + 1);
        for i in 0..n {
            for k in 0..n {
                mat[(i, k)] = d[i * n + k];
            }
            mat[(i, n)] = e[i];
            mat[(n, i)] = e[i];
        }
        let lu = LuDecomposition::new(&mat)?;
        let mut out = vec![DScalar::constant(0.0); n * n];
        for j in 0..n {
            let mut rhs: Vec<DScalar> = (0..n).map(|i| g[i * n + j] - e[i] * e[j]).collect();
            rhs.push(DScalar::constant(0.0));
            let col = lu.solve(&rhs)?;
            for k in 0..n {
                out[k * n + j] = col[k];
            }
        }
        Ok(out)
    })
    .map(|f| f.with_parity(parity))
}

/// A matrix-valued function of the coordinates acting on the contact
/// frame (row-major, `2n × 2n`).
pub type FrameMatrix = Arc<dyn Fn(&[DScalar]) -> Result<Vec<DScalar>> + Send + Sync>;

pub fn constant_frame_matrix(a: Vec<f64>) -> FrameMatrix {
    Arc::new(move |_: &[DScalar]| Ok(a.iter().map(|&v| DScalar::constant(v)).collect()))
}

/// How [`reframe`] applies the frame matrix `A`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reframe {
    /// `Â φ̄ Â⁻¹`
    Conjugate,
    /// `Â φ̄`
    Compose,
}

/// Acts on `φ̄` by `A` written in the contact frame: with `B` the matrix of
/// frame vectors and `ξ` as columns, `Â = B diag(A, 1) B⁻¹`. Both modes
/// keep `φ̄ξ = 0` and `φ̄(C) ⊆ C`.
pub fn reframe(phibar: &TensorField, eta: &TensorField, xi: &TensorField, a: FrameMatrix, mode: Reframe) -> Result<TensorField> {
    let frame = contact_frame(eta, xi)?;
    let n = eta.dim;
    let r = frame.len();
    let mut inputs: Vec<&TensorField> = vec![phibar, xi];
    inputs.extend(frame.iter());
    let parity = phibar.parity;
    pointwise(&format!("{}'", phibar.name), Valence::ENDO, Symmetry::None, &inputs, move |x, v| {
        let mut b = DenseMatrix::zeros(n, n);
        for k in 0..n {
            for c in 0..r {
                b[(k, c)] = v[c + 2][k];
            }
            b[(k, r)] = v[1][k];
        }
        let av = a(x)?;
        if av.len() != r * r {
            return Err(GeomError::Shape(format!("frame matrix needs {r}x{r} entries")));
        }
        let mut ah = DenseMatrix::identity(n);
        for i in 0..r {
            for j in 0..r {
                ah[(i, j)] = av[i * r + j];
            }
        }
        let binv = LuDecomposition::new(&b)?.solve_matrix(&DenseMatrix::identity(n))?;
        let t = b.matmul(&ah)?.matmul(&binv)?;
        let p = DenseMatrix::from_rows(n, n, v[0].clone())?;
        let out = match mode {
            Reframe::Compose => t.matmul(&p)?,
            Reframe::Conjugate => {
                let tinv = LuDecomposition::new(&t)?.solve_matrix(&DenseMatrix::identity(n))?;
                t.matmul(&p)?.matmul(&tinv)?
            }
        };
        Ok(out.into_data())
    })
    .map(|f| f.with_parity(parity))
}

/// `φ̄` on the Darboux model: `∂x → ∂p`, `∂p → −(∂x + p∂z)`, `∂z → 0`, and
/// the same on each pair `(xᵢ, pᵢ)` in higher dimension.
pub fn darboux_phibar(c: &ContactStructure) -> Result<TensorField> {
    let n = c.half_dim();
    let coords = crate::contact::darboux_coords(n);
    let mut entries: Vec<(String, String)> = Vec::new();
    for i in 0..n {
        let (x, p) = (&coords[i], &coords[n + i]);
        entries.push((format!("{p} {x}"), "1".into()));
        entries.push((format!("{x} {p}"), "-1".into()));
        entries.push((format!("z {p}"), format!("-{p}")));
    }
    let refs: Vec<(&str, &str)> = entries.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    TensorField::from_dsl("phibar", Valence::ENDO, Symmetry::None, &c.atlas, &[("R", &refs)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::darboux_contact;

    fn plan() -> SamplePlan {
        SamplePlan::new(42, 10)
    }

    fn darboux(n: usize) -> LeviStructure {
        let c = darboux_contact(n).unwrap();
        let p = darboux_phibar(&c).unwrap();
        LeviStructure::new(c, p).unwrap()
    }

    fn with_phibar(l: &LeviStructure, p: TensorField) -> LeviStructure {
        LeviStructure::new(l.contact.clone(), p).unwrap()
    }

    fn rotation(theta: f64) -> FrameMatrix {
        constant_frame_matrix(vec![theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
    }

    /// `diag(e^{z/2}, e^{−z/2})`: symplectic on the frame, but not Reeb
    /// invariant.
    fn squeeze() -> FrameMatrix {
        Arc::new(|x: &[DScalar]| {
            let e = (x[2] * 0.5).exp();
            Ok(vec![e, DScalar::constant(0.0), DScalar::constant(0.0), e.recip()?])
        })
    }

    #[test]
    fn phibar_recovered_from_levi_metric() {
        let levi = darboux(2);
        let p = phibar_from_metric(levi.eta(), &levi.gm).unwrap();
        let x = [0.3, -0.2, 0.5, 0.1, -0.7];
        for (u, v) in p.eval_f64("R", &x).unwrap().iter().zip(levi.phibar.eval_f64("R", &x).unwrap()) {
            assert!((u - v).abs() < 1e-12);
        }
        assert!(normality_check(&levi, &plan(), 1e-10).passed());
    }

    #[test]
    fn levi_form_on_frame() {
        let l = darboux(1);
        let x = [0.2, -0.4, 0.1];
        let g = l.gc.eval_f64("R", &x).unwrap();
        // ∂p and ∂x + p∂z
        let (e1, e2) = ([0.0, 1.0, 0.0], [1.0, 0.0, -0.4]);
        assert!((bilinear(&g, 3, &e1, &e1) - 1.0).abs() < 1e-14);
        assert!((bilinear(&g, 3, &e2, &e2) - 1.0).abs() < 1e-14);
        assert!(bilinear(&g, 3, &e1, &e2).abs() < 1e-14);
        let r = l.validate(&plan(), 1e-10);
        assert!(r.passed(), "{:?}", r.details);
        assert!(r.details["gc_min_eigenvalue"] > 0.0);
    }

    #[test]
    fn rotation_witness() {
        let l = darboux(1);
        let p = reframe(&l.phibar, l.eta(), l.xi(), rotation(0.3), Reframe::Compose).unwrap();
        let w = with_phibar(&l, p);
        let v = w.validate(&plan(), 1e-9);
        assert!(v.details["gc_symmetry"] > 1e-3);
        let pin = w.pin(&plan(), 1e-9);
        assert!(!pin.passed());
        assert!(pin.details["flag_a"] < 1e-9 && pin.details["flag_c"] < 1e-9);
        assert!(pin.details["flag_b"] > 1e-3 && pin.details["flag_d"] > 1e-3);
        assert!(!pin_flags_agree(&pin));
        let s = w.sasaki(&plan(), 1e-8);
        // N¹ only sees det φ' on a rank-2 distribution, so it vanishes here;
        // the second normality tensor catches the defect
        assert!(s.details["nij"] < 1e-12);
        assert!(s.details["n2"] > 1e-3);
        assert!(s.details["n4"] < 1e-12);
        assert!(!s.passed());
    }

    #[test]
    fn darboux_is_sasakian() {
        let l = darboux(1);
        assert!(l.pin(&plan(), 1e-10).passed());
        assert!(l.contact_metric(&plan(), 1e-10).passed());
        let s = l.sasaki(&plan(), 1e-8);
        assert!(s.passed(), "{:?}", s.details);
        assert_eq!(s.details["routes_agree"], 1.0);
        assert!(l.killing(&plan(), 1e-10).passed());
        let t = l.levi_civita_identity(&plan(), 1e-7);
        assert!(t.passed(), "{}", t.max_residual);
        assert!(l.paired_consistency(&plan(), 1e-12).passed());
    }

    #[test]
    fn literal_metric_axioms() {
        let l = darboux(1);
        let phi = l.phi().unwrap();
        let atlas = l.atlas();
        let good = contact_metric_check(l.eta(), &l.gm, &phi, l.xi(), atlas, &plan(), 1e-10);
        assert!(good.passed());
        let eucl = TensorField::from_dsl(
            "e",
            Valence::BILINEAR,
            Symmetry::Symmetric,
            atlas,
            &[("R", &[("x x", "1"), ("p p", "1"), ("z z", "1")])],
        )
        .unwrap();
        let bad = contact_metric_check(l.eta(), &eucl, &phi, l.xi(), atlas, &plan(), 1e-8);
        assert!(bad.details["eta_metric"] > 1e-3);
    }

    #[test]
    fn reeb_dependent_twist_is_not_sasakian() {
        let l = darboux(1);
        let p = reframe(&l.phibar, l.eta(), l.xi(), squeeze(), Reframe::Conjugate).unwrap();
        let w = with_phibar(&l, p);
        assert!(w.validate(&plan(), 1e-9).passed());
        assert!(w.pin(&plan(), 1e-9).passed());
        assert!(w.contact_metric(&plan(), 1e-9).passed());
        let s = w.sasaki(&plan(), 1e-8);
        assert!(!s.passed());
        assert!(s.details["l_xi_phi"] > 1e-3);
        assert!(s.details["nij"] > 1e-3);
        assert_eq!(s.details["routes_agree"], 1.0);
        assert!(!w.killing(&plan(), 1e-8).passed());
        assert!(!w.levi_civita_identity(&plan(), 1e-7).passed());
    }

    #[test]
    fn flat_christoffel_and_symmetry() {
        let l = darboux(1);
        let eucl = TensorField::from_dsl(
            "e",
            Valence::BILINEAR,
            Symmetry::Symmetric,
            l.atlas(),
            &[("R", &[("x x", "1"), ("p p", "1"), ("z z", "1")])],
        )
        .unwrap();
        let g0 = christoffel(&eucl).unwrap();
        assert!(g0.eval_f64("R", &[0.1, 0.2, 0.3]).unwrap().iter().all(|v| *v == 0.0));
        let g1 = christoffel(&l.gm).unwrap();
        assert!(g1.symmetry_residual("R", &[0.1, 0.7, -0.3]).unwrap() < 1e-14);
    }

    #[test]
    fn pin_agreement_in_dimension_five() {
        let l = darboux(2);
        // symplectic for dη = dx1∧dp1 + dx2∧dp2 in the frame (x1, x2, p1, p2)
        let sym = constant_frame_matrix(vec![
            1.0, 0.3, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, -0.3, 1.0,
        ]);
        let generic = constant_frame_matrix(vec![
            1.0, 0.2, 0.1, 0.0, //
            0.0, 1.3, 0.0, 0.4, //
            0.2, 0.0, 0.9, 0.0, //
            0.0, 0.1, 0.0, 1.1,
        ]);
        for (a, ok) in [(sym, true), (generic, false)] {
            let p = reframe(&l.phibar, l.eta(), l.xi(), a, Reframe::Conjugate).unwrap();
            let r = pin_battery(l.eta(), &p, l.atlas(), &plan(), 1e-9);
            assert!(pin_flags_agree(&r), "{:?}", r.details);
            assert_eq!(r.passed(), ok);
        }
    }

    #[test]
    fn normality_tensors_vanish_on_darboux() {
        let l = darboux(2);
        let nt = n_tensors(l.eta(), &l.phibar, l.xi()).unwrap();
        let x = [0.1, -0.3, 0.5, 0.2, -0.7];
        for t in [&nt.n1, &nt.n2, &nt.n3, &nt.n4] {
            assert!(max_abs(t.eval_f64("R", &x).unwrap()) < 1e-12, "{}", t.name);
        }
    }
}
