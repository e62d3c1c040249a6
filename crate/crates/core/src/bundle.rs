//! Principal ℝ× and ℝ₊ bundles given in trivializing charts: the
//! symplectization of a contact structure, homogeneity tests, Liouville
//! data, calibrations and the shadow of a homogeneous metric.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::contact::ContactStructure;
use crate::error::{GeomError, Result};
use crate::manifold::{Atlas, Chart, PieceSpec, SamplePlan};
use crate::numkernel::{DScalar, DenseMatrix, LuDecomposition};
use crate::report::CheckReport;
use crate::tensor::{
    exterior_derivative, interior, lift, pointwise, pullback, sub, ComponentFn, SmoothMap, Symmetry, TensorField,
    Valence,
};

/// Fiber range of the ℝ× charts, minus the band around zero.
pub const FIBER_RANGE: (f64, f64) = (0.5, 2.0);

/// A bundle atlas whose fiber coordinates are scaled by the group action.
#[derive(Clone)]
pub struct PrincipalBundle {
    pub atlas: Atlas,
    /// Coordinates scaled by `h_ν`; the same positions in every chart.
    pub fiber: Vec<usize>,
    /// ℝ₊ rather than ℝ×.
    pub positive: bool,
    /// Base atlas and the positions of its coordinates in each total chart
    /// (one fiber coordinate only).
    pub base: Option<(Atlas, Vec<usize>)>,
}

impl PrincipalBundle {
    pub fn new(atlas: Atlas, fiber: Vec<usize>, positive: bool) -> PrincipalBundle {
        PrincipalBundle { atlas, fiber, positive, base: None }
    }

    pub fn with_base(mut self, base: Atlas) -> Result<PrincipalBundle> {
        let n = self.atlas.dim();
        if self.fiber.len() != 1 || base.dim() + 1 != n {
            return Err(GeomError::Shape("base needs exactly one fiber coordinate".into()));
        }
        let positions = (0..n).filter(|i| !self.fiber.contains(i)).collect();
        self.base = Some((base, positions));
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.atlas.dim()
    }

    /// Group elements exercised by homogeneity checks.
    pub fn group_samples(&self) -> &'static [f64] {
        if self.positive {
            &[0.5, 2.0]
        } else {
            &[-2.0, -1.0, 0.5, 2.0]
        }
    }

    /// `h_ν`: scales every fiber coordinate by `ν`, chart by chart.
    pub fn action(&self, nu: f64) -> SmoothMap {
        let n = self.dim();
        let charts = self
            .atlas
            .chart_names()
            .into_iter()
            .map(|c| {
                let fiber = self.fiber.clone();
                let f: ComponentFn = Arc::new(move |x: &[DScalar]| {
                    Ok(x.iter().enumerate().map(|(i, &v)| if fiber.contains(&i) { v * nu } else { v }).collect())
                });
                (c.clone(), c, f)
            })
            .collect();
        SmoothMap::builtin(&format!("h_{nu}"), n, n, charts)
    }

    /// `∇ = Σ s ∂_s` over the fiber coordinates.
    pub fn liouville_field(&self) -> TensorField {
        let fiber = self.fiber.clone();
        self.builtin("nabla", Valence::VECTOR, move |x| {
            Ok(x.iter().enumerate().map(|(i, &v)| if fiber.contains(&i) { v } else { DScalar::constant(0.0) }).collect())
        })
    }

    /// Sum of the fiber coordinates.
    pub fn fiber_sum(&self) -> TensorField {
        let fiber = self.fiber.clone();
        self.builtin("s", Valence::SCALAR, move |x| Ok(vec![fiber.iter().map(|&i| x[i]).sum()]))
    }

    /// `|s|`: the calibration of normal coordinates.
    pub fn normal_calibration(&self) -> TensorField {
        let fiber = self.fiber.clone();
        self.builtin("|s|", Valence::SCALAR, move |x| {
            let mut acc = DScalar::constant(0.0);
            for &i in &fiber {
                acc += x[i].abs()?;
            }
            Ok(vec![acc])
        })
    }

    fn builtin<F>(&self, name: &str, valence: Valence, f: F) -> TensorField
    where
        F: Fn(&[DScalar]) -> Result<Vec<DScalar>> + Send + Sync + 'static,
    {
        let f: ComponentFn = Arc::new(f);
        let charts = self.atlas.chart_names().into_iter().map(|c| (c, f.clone())).collect();
        TensorField::builtin(name, valence, Symmetry::None, self.dim(), charts)
    }

    fn base_data(&self) -> Result<(&Atlas, &[usize])> {
        self.base.as_ref().map(|(a, p)| (a, p.as_slice())).ok_or_else(|| GeomError::Invalid("bundle has no base".into()))
    }

    /// Horizontal lift in the trivializing charts.
    pub fn lift(&self, field: &TensorField) -> Result<TensorField> {
        let (_, positions) = self.base_data()?;
        let charts: Vec<(String, String)> = self.atlas.chart_names().into_iter().map(|c| (c.clone(), c)).collect();
        lift(field, self.dim(), positions, &charts)
    }

    /// Restriction of a semibasic field to the section `s = 1`, with the
    /// fiber directions dropped.
    pub fn descend(&self, field: &TensorField) -> Result<TensorField> {
        let (base, positions) = self.base_data()?;
        let n = self.dim();
        let m = base.dim();
        let rank = field.valence.rank();
        let positions = positions.to_vec();
        let fiber = self.fiber[0];
        let mut charts = Vec::new();
        for c in base.chart_names() {
            let f = field.component_fn(&c)?;
            let positions = positions.clone();
            let eval: ComponentFn = Arc::new(move |y: &[DScalar]| {
                let mut x = vec![DScalar::constant(1.0); n];
                for (k, &p) in positions.iter().enumerate() {
                    x[p] = y[k];
                }
                x[fiber] = DScalar::constant(1.0);
                let full = f(&x)?;
                Ok((0..m.pow(rank as u32))
                    .map(|flat| {
                        let idx = crate::tensor::index::multi_index(m, rank, flat);
                        let big: Vec<usize> = idx.iter().map(|&i| positions[i]).collect();
                        full[crate::tensor::index::flat_index(n, &big)]
                    })
                    .collect())
            });
            charts.push((c, eval));
        }
        Ok(TensorField::builtin(&field.name, field.valence, field.symmetry, m, charts).with_parity(field.parity))
    }
}

/// Inserts the fiber coordinate `s` at `fiber_index` of every chart and
/// returns the bundle with `ω = d(s η)`. Paired contact data glue with
/// `s ↦ −s` on the pieces of sign −1, so `ω` is an honest form.
pub fn symplectize(c: &ContactStructure, fiber_index: usize, positive: bool) -> Result<(PrincipalBundle, TensorField)> {
    let base = &c.atlas;
    if fiber_index > base.dim() {
        return Err(GeomError::Shape("fiber index beyond the base dimension".into()));
    }
    if positive && c.paired {
        return Err(GeomError::NotCooriented("an ℝ₊ symplectization needs a global contact form".into()));
    }
    let (lo, hi) = FIBER_RANGE;
    let mut atlas = Atlas::new(&format!("{}-cone", base.name));
    for ch in base.charts() {
        let mut coords: Vec<&str> = ch.coords.iter().map(String::as_str).collect();
        coords.insert(fiber_index, "s");
        let mut dom: Vec<(f64, f64)> = ch.domain.iter().map(|i| (i.lo, i.hi)).collect();
        dom.insert(fiber_index, if positive { (lo, hi) } else { (-hi, hi) });
        let mut chart = Chart::new(&ch.name, &coords, &dom)?.with_margin(ch.margin);
        for b in &ch.exclusions {
            chart = chart.exclude(&ch.coords[b.coord], b.lo, b.hi)?;
        }
        if !positive {
            chart = chart.exclude("s", -lo, lo)?;
        }
        atlas.add_chart(chart)?;
    }
    for t in base.transitions() {
        let specs: Vec<PieceSpec> = t
            .pieces
            .iter()
            .map(|p| {
                let mut dom: Vec<(f64, f64)> = p.domain.iter().map(|i| (i.lo, i.hi)).collect();
                dom.insert(fiber_index, if positive { (lo, hi) } else { (-hi, hi) });
                let s = if p.sign < 0 { "-s" } else { "s" };
                let mut fwd: Vec<String> = p.forward.iter().map(|e| e.to_string()).collect();
                let mut inv: Vec<String> = p.inverse.iter().map(|e| e.to_string()).collect();
                fwd.insert(fiber_index, s.into());
                inv.insert(fiber_index, s.into());
                PieceSpec { domain: dom, forward: fwd, inverse: inv, sign: p.sign }
            })
            .collect();
        atlas.glue_with(&t.source, &t.target, &specs, &HashMap::new())?;
    }
    let bundle = PrincipalBundle::new(atlas, vec![fiber_index], positive).with_base(base.clone())?;
    let eta = bundle.lift(&c.eta)?;
    let s = bundle.fiber_sum();
    let theta = crate::tensor::scale(&s, &eta)?.with_parity(0).named("theta");
    let omega = exterior_derivative(&theta)?.named("omega");
    Ok((bundle, omega))
}

/// The three ways a tensor can transform under the fiber action.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Homogeneity {
    /// `h_ν* K = ν^k K`
    Plain,
    /// `h_ν* K = |ν|^k K`
    Positive,
    /// `h_ν* K = sgn(ν) K`
    Half,
}

impl Homogeneity {
    pub fn factor(self, nu: f64, degree: f64) -> f64 {
        match self {
            Homogeneity::Plain => nu.powf(degree),
            Homogeneity::Positive => nu.abs().powf(degree),
            Homogeneity::Half => nu.signum(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Homogeneity::Plain => "plain",
            Homogeneity::Positive => "positive",
            Homogeneity::Half => "half",
        }
    }
}

/// Compares `h_ν* K` with the expected multiple of `K` for every sampled
/// `ν`. Residuals are relative to the largest component at the point.
pub fn homogeneity_check(
    k: &TensorField,
    bundle: &PrincipalBundle,
    degree: f64,
    mode: Homogeneity,
    plan: &SamplePlan,
    tol: f64,
) -> CheckReport {
    let check = format!("homogeneity:{}:{}", k.name, mode.name());
    let mut pulled = Vec::new();
    for &nu in bundle.group_samples() {
        match pullback(&bundle.action(nu), k) {
            Ok(f) => pulled.push((nu, f)),
            Err(e) => return CheckReport::scalar(&check, plan, f64::INFINITY, tol).note(e.to_string()),
        }
    }
    let m = bundle.atlas.measure(plan, |c, x| {
        let base = k.eval_f64(c, x)?;
        let scale = base.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let mut worst: f64 = 0.0;
        for (nu, f) in &pulled {
            let want = mode.factor(*nu, degree);
            let got = f.eval_f64(c, x)?;
            for (g, b) in got.iter().zip(&base) {
                worst = worst.max((g - want * b).abs() / scale);
            }
        }
        Ok(vec![worst])
    });
    m.report(&check, plan, &[0], tol, None).detail("degree", degree)
}

/// `∇` and `θ = i_∇ω`, with the residuals of `dθ = ω` and `θ(∂_s) = 0`.
pub fn liouville_data(
    bundle: &PrincipalBundle,
    omega: &TensorField,
    plan: &SamplePlan,
    tol: f64,
) -> Result<(TensorField, TensorField, CheckReport)> {
    let nabla = bundle.liouville_field();
    let theta = interior(&nabla, omega)?.named("theta");
    let gap = sub(&exterior_derivative(&theta)?, omega)?;
    let fiber = bundle.fiber.clone();
    let m = bundle.atlas.measure(plan, |c, x| {
        let d = gap.eval_f64(c, x)?.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
        let t = theta.eval_f64(c, x)?;
        let vertical = fiber.iter().map(|&i| t[i].abs()).fold(0.0, f64::max);
        Ok(vec![d, vertical])
    });
    let report =
        m.report("liouville", plan, &[0, 1], tol, None).detail("d_theta_minus_omega", m.max(0)).detail("theta_vertical", m.max(1));
    Ok((nabla, theta, report))
}

/// `𝔰 = g(∇, ∇)`.
pub fn g_calibration(g: &TensorField, bundle: &PrincipalBundle) -> Result<TensorField> {
    let nabla = bundle.liouville_field();
    let n = g.dim;
    pointwise("s_g", Valence::SCALAR, Symmetry::None, &[g, &nabla], move |_, v| {
        let mut acc = DScalar::constant(0.0);
        for i in 0..n {
            for j in 0..n {
                acc += v[0][i * n + j] * v[1][i] * v[1][j];
            }
        }
        Ok(vec![acc])
    })
}

/// Pieces of a positively homogeneous metric relative to a calibration:
/// `g = 𝔰(A ζ² + 2 ζ·μ + μ² + g_M)` with `ζ = d𝔰/𝔰`.
#[derive(Clone)]
pub struct Decomposition {
    pub a: TensorField,
    pub mu: TensorField,
    pub gamma: TensorField,
    pub gm: TensorField,
    pub calibration: TensorField,
    /// Largest `|μ|` seen while validating.
    pub mu_max: f64,
    /// Smallest eigenvalue of the base block of `g_M` seen while validating.
    pub min_eigenvalue: f64,
}

impl Decomposition {
    /// `μ ≈ 0`.
    pub fn calibrated(&self) -> bool {
        self.mu_max < 1e-8
    }

    /// `g − 𝔰((d𝔰/𝔰 + μ)² + g_M)`, together with `A − 1` and `μ`.
    pub fn reassembly_check(&self, g: &TensorField, bundle: &PrincipalBundle, plan: &SamplePlan, tol: f64) -> CheckReport {
        let ds = match exterior_derivative(&self.calibration) {
            Ok(d) => d,
            Err(e) => return CheckReport::scalar("decomposition", plan, f64::INFINITY, tol).note(e.to_string()),
        };
        let n = g.dim;
        let m = bundle.atlas.measure(plan, |c, x| {
            let gv = g.eval_f64(c, x)?;
            let s = self.calibration.eval_f64(c, x)?[0];
            let dsv = ds.eval_f64(c, x)?;
            let mu = self.mu.eval_f64(c, x)?;
            let gm = self.gm.eval_f64(c, x)?;
            let a = self.a.eval_f64(c, x)?[0];
            let w: Vec<f64> = (0..n).map(|i| dsv[i] / s + mu[i]).collect();
            let scale = gv.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
            let mut r: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    r = r.max((gv[i * n + j] - s * (w[i] * w[j] + gm[i * n + j])).abs() / scale);
                }
            }
            Ok(vec![(a - 1.0).abs(), mu.iter().fold(0.0, |acc: f64, v| acc.max(v.abs())), r])
        });
        m.report("decomposition", plan, &[0, 1, 2], tol, None)
            .detail("a_minus_one", m.max(0))
            .detail("mu", m.max(1))
            .detail("reassembly", m.max(2))
    }
}

/// Splits a positively 1-homogeneous metric against the calibration `𝔰`:
/// `A = g(∇,∇)/𝔰`, `μ = i_∇g/𝔰 − A d𝔰/𝔰`,
/// `γ = g/𝔰 − A (d𝔰/𝔰)² − 2 sym(d𝔰/𝔰 ⊗ μ)` and `g_M = γ − μ²`.
/// All four are semibasic; their base components are the shadow data.
pub fn decompose_homogeneous_metric(
    g: &TensorField,
    cal: &TensorField,
    bundle: &PrincipalBundle,
    plan: &SamplePlan,
) -> Result<Decomposition> {
    let hom = homogeneity_check(g, bundle, 1.0, Homogeneity::Positive, plan, 1e-8);
    if !hom.passed() {
        return Err(GeomError::NotHomogeneous(format!("{} (residual {:.3e})", g.name, hom.max_residual)));
    }
    let n = g.dim;
    let nabla = bundle.liouville_field();
    let ds = exterior_derivative(cal)?;
    let parts = |k: usize, name: &str, sym: Symmetry, valence: Valence| {
        pointwise(name, valence, sym, &[g, cal, &ds, &nabla], move |_, v| {
            let (gv, s, d, nb) = (&v[0], v[1][0], &v[2], &v[3]);
            let gnn: DScalar = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| gv[i * n + j] * nb[i] * nb[j]).sum();
            let a = gnn / s;
            let z: Vec<DScalar> = d.iter().map(|&di| di / s).collect();
            let mu: Vec<DScalar> =
                (0..n).map(|j| (0..n).map(|i| nb[i] * gv[i * n + j]).sum::<DScalar>() / s - a * z[j]).collect();
            Ok(match k {
                0 => vec![a],
                1 => mu,
                _ => {
                    let mut out = Vec::with_capacity(n * n);
                    for i in 0..n {
                        for j in 0..n {
                            let mut gamma = gv[i * n + j] / s - a * z[i] * z[j] - z[i] * mu[j] - z[j] * mu[i];
                            if k == 3 {
                                gamma -= mu[i] * mu[j];
                            }
                            out.push(gamma);
                        }
                    }
                    out
                }
            })
        })
    };
    let a = parts(0, "A", Symmetry::None, Valence::SCALAR)?.with_parity(0);
    let mu = parts(1, "mu", Symmetry::None, Valence::FORM1)?.with_parity(0);
    let gamma = parts(2, "gamma", Symmetry::Symmetric, Valence::BILINEAR)?.with_parity(0);
    let gm = parts(3, "g_M", Symmetry::Symmetric, Valence::BILINEAR)?.with_parity(0);
    let base: Vec<usize> = (0..n).filter(|i| !bundle.fiber.contains(i)).collect();
    let m = bundle.atlas.measure(plan, |c, x| {
        let v = gm.eval_f64(c, x)?;
        let block = DMatrix::from_fn(base.len(), base.len(), |i, j| v[base[i] * n + base[j]]);
        let min = SymmetricEigen::new(block).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let mv = mu.eval_f64(c, x)?.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()));
        Ok(vec![min, mv])
    });
    if let Some(e) = m.first_error() {
        return Err(GeomError::Invalid(format!("decomposition failed: {e}")));
    }
    let min_eigenvalue = m.min(0);
    if min_eigenvalue < 1e-8 {
        return Err(GeomError::NotPositiveDefinite(min_eigenvalue));
    }
    Ok(Decomposition { a, mu, gamma, gm, calibration: cal.clone(), mu_max: m.max(1), min_eigenvalue })
}

/// `‖η‖*` for the metric `g_M`: `√(ηᵀ G⁻¹ η)`.
pub fn dual_norm(gm: &TensorField, eta: &TensorField) -> Result<TensorField> {
    let n = gm.dim;
    pointwise("|eta|*", Valence::SCALAR, Symmetry::None, &[gm, eta], move |_, v| {
        let g = DenseMatrix::from_rows(n, n, v[0].clone())?;
        let lu = LuDecomposition::new(&g).map_err(|e| GeomError::DegenerateMetric(e.to_string()))?;
        let w = lu.solve(&v[1])?;
        let q: DScalar = (0..n).map(|i| v[1][i] * w[i]).sum();
        if q.value() <= 0.0 {
            return Err(GeomError::DegenerateMetric(format!("η has non-positive dual norm² {}", q.value())));
        }
        Ok(vec![q.sqrt()?])
    })
    .map(|f| f.with_parity(0))
}

/// Calibration induced by a base metric: a point `s·η` of the fiber has
/// length `|s|·‖η‖*`, the norm of the covector restricted to the
/// `g_M`-normal line of the contact distribution.
pub fn induced_calibration(gm: &TensorField, c: &ContactStructure, bundle: &PrincipalBundle) -> Result<TensorField> {
    let norm = bundle.lift(&dual_norm(gm, &c.eta)?)?;
    let abs = bundle.normal_calibration();
    pointwise("s_ind", Valence::SCALAR, Symmetry::None, &[&abs, &norm], |_, v| Ok(vec![v[0][0] * v[1][0]]))
        .map(|f| f.with_parity(0))
}

/// `g̃ = 𝔰((d𝔰/𝔰)² + ĝ_M)` for the induced calibration.
pub fn induced_metric(gm: &TensorField, c: &ContactStructure, bundle: &PrincipalBundle) -> Result<TensorField> {
    let cal = induced_calibration(gm, c, bundle)?;
    calibrated_metric(gm, &cal, bundle)
}

/// `𝔰((d𝔰/𝔰)² + ĝ_M)` for a given calibration.
pub fn calibrated_metric(gm: &TensorField, cal: &TensorField, bundle: &PrincipalBundle) -> Result<TensorField> {
    let lifted = bundle.lift(gm)?;
    let ds = exterior_derivative(cal)?;
    let n = bundle.dim();
    pointwise("g~", Valence::BILINEAR, Symmetry::Symmetric, &[cal, &ds, &lifted], move |_, v| {
        let (s, d, g) = (v[0][0], &v[1], &v[2]);
        Ok((0..n * n).map(|f| d[f / n] * d[f % n] / s + s * g[f]).collect())
    })
    .map(|f| f.with_parity(0))
}
