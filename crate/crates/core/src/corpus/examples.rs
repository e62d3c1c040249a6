use std::sync::Arc;

use super::Example;
use crate::bundle::{calibrated_metric, PrincipalBundle, decompose_homogeneous_metric, homogeneity_check, liouville_data, symplectize, Homogeneity};
use crate::contact::{darboux_contact, ContactStructure};
use crate::error::{GeomError, Result};
use crate::exprlang::parse;
use crate::kahler::{main1_cone, reconstruct_main1, KahlerCandidate};
use crate::manifold::{Atlas, Chart, PieceSpec, Point, SamplePlan};
use crate::product::{contact_product, product_kahler_lift, sasakian_product};
use crate::report::{measure, CheckReport, Verdict};
use crate::sasaki::{darboux_phibar, levi_structure_check, normality_check, phibar_from_metric, LeviStructure};
use crate::tensor::{
    apply_endo, contraction, cross_chart_consistency, identity_check, interior, lie_bracket, pullback, SmoothMap, Symmetry,
    TensorField, Valence,
};

pub const MAIN1_DEFAULT_A: &str = "0.7";

/// Default tolerance of sampled identities.
const TOL: f64 = 1e-8;
/// Tolerance for quantities with no linear solve in between.
const TIGHT: f64 = 1e-9;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a: f64, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b.abs()) })
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m: f64, (x, y)| if (x - y).is_nan() { f64::NAN } else { m.max((x - y).abs()) })
}

fn failed(check: &str, plan: &SamplePlan, tol: f64, e: GeomError) -> CheckReport {
    CheckReport::scalar(check, plan, f64::INFINITY, tol).note(e.to_string())
}

/// The same sparse listing on every named chart.
fn dsl(
    name: &str,
    valence: Valence,
    symmetry: Symmetry,
    atlas: &Atlas,
    charts: &[&str],
    entries: &[(&str, &str)],
) -> Result<TensorField> {
    let listing: Vec<(&str, &[(&str, &str)])> = charts.iter().map(|c| (*c, entries)).collect();
    TensorField::from_dsl(name, valence, symmetry, atlas, &listing)
}

fn declare_levi(ex: &mut Example, levi: &LeviStructure) {
    let a = levi.atlas().clone();
    ex.atlas(&a);
    ex.field(&a, levi.eta());
    ex.field(&a, &levi.xi().clone().named("xi"));
    ex.field(&a, &levi.phibar);
    ex.field(&a, &levi.gc);
    ex.field(&a, &levi.gm);
}

/// Reeb identities, Levi axioms, pin agreement, the contact metric
/// axioms, normality by both routes, Killing and the Levi-Civita identity.
fn sasakian_suite(ex: &mut Example, levi: &LeviStructure, tol: f64) {
    let l = Arc::new(levi.clone());
    let s = l.clone();
    ex.pass("reeb", TIGHT, move |p, t| s.contact.reeb_check(p, t));
    let s = l.clone();
    ex.pass("levi_structure", tol, move |p, t| s.validate(p, t));
    let s = l.clone();
    ex.pass("pin", tol, move |p, t| s.pin(p, t));
    let s = l.clone();
    ex.pass("contact_metric", tol, move |p, t| s.contact_metric(p, t));
    let s = l.clone();
    ex.pass("sasaki", tol, move |p, t| s.sasaki(p, t));
    let s = l.clone();
    ex.pass("normality", tol, move |p, t| normality_check(&s, p, t));
    let s = l.clone();
    ex.pass("killing", tol, move |p, t| s.killing(p, t));
    let s = l;
    ex.pass("levi_civita", tol, move |p, t| s.levi_civita_identity(p, t));
}

/// `d² = 0`, Cartan, Jacobi and naturality under a contraction of every
/// chart plus any extra maps.
fn identities(ex: &mut Example, atlas: &Atlas, forms: Vec<TensorField>, vectors: Vec<TensorField>, extra: Vec<SmoothMap>) {
    let atlas = atlas.clone();
    let mut maps = vec![contraction(&atlas, 0.8, 0.05)];
    maps.extend(extra);
    ex.pass("identities", TOL, move |p, t| {
        let f: Vec<&TensorField> = forms.iter().collect();
        let v: Vec<&TensorField> = vectors.iter().collect();
        identity_check(&atlas, &f, &v, &maps, p, t)
    });
}

fn frame_vectors(levi: &LeviStructure, k: usize) -> Result<Vec<TensorField>> {
    let mut v = vec![levi.xi().clone()];
    v.extend(levi.contact.frame()?.into_iter().take(k));
    Ok(v)
}

fn darboux_levi(n: usize) -> Result<LeviStructure> {
    let c = darboux_contact(n)?;
    let p = darboux_phibar(&c)?;
    LeviStructure::new(c, p)
}

pub(super) fn darboux(n: usize) -> Result<Example> {
    let levi = darboux_levi(n)?;
    let mut ex = Example::new(&format!("darboux-{n}"), &format!("standard Sasakian structure on R^{}", 2 * n + 1));
    declare_levi(&mut ex, &levi);
    sasakian_suite(&mut ex, &levi, TOL);
    identities(&mut ex, levi.atlas(), vec![levi.eta().clone()], frame_vectors(&levi, 2)?, vec![]);
    Ok(ex)
}

/// Two strips `x ∈ (0, 1)` and `x ∈ (1/2, 3/2)` glued by the identity on
/// `(1/2, 1)` and by `x ↦ x + 1` with a sign flip on `(0, 1/2)`. The last
/// coordinate is the flipped one; the others range over `rest`.
fn mobius_atlas(name: &str, coords: &[&str], rest: &[(f64, f64)], flipped: &[bool]) -> Result<Atlas> {
    let mut a = Atlas::new(name);
    let mut dom_o = vec![(0.0, 1.0)];
    dom_o.extend_from_slice(rest);
    let mut dom_u = vec![(0.5, 1.5)];
    dom_u.extend_from_slice(rest);
    a.add_chart(Chart::new("O", coords, &dom_o)?)?;
    a.add_chart(Chart::new("U", coords, &dom_u)?)?;
    let ids: Vec<String> = coords.iter().map(|c| c.to_string()).collect();
    let flip = |shift: &str| -> Vec<String> {
        coords
            .iter()
            .enumerate()
            .map(|(i, c)| match (i, flipped[i]) {
                (0, _) => format!("{c} {shift}"),
                (_, true) => format!("-{c}"),
                _ => c.to_string(),
            })
            .collect()
    };
    let (fwd, inv) = (flip("+ 1"), flip("- 1"));
    fn r(v: &[String]) -> Vec<&str> {
        v.iter().map(String::as_str).collect()
    }
    let mut same_dom = vec![(0.5, 1.0)];
    same_dom.extend_from_slice(rest);
    let mut flip_dom = vec![(0.0, 0.5)];
    flip_dom.extend_from_slice(rest);
    let mut flip_img = vec![(1.0, 1.5)];
    flip_img.extend_from_slice(rest);
    let sign = if flipped.iter().any(|&f| f) { -1 } else { 1 };
    let same = PieceSpec::new(&same_dom, &r(&ids), &r(&ids), 1);
    let other = PieceSpec::new(&flip_dom, &r(&fwd), &r(&inv), sign);
    a.glue_both("O", "U", &[(same, same_dom.clone()), (other, flip_img)])?;
    Ok(a)
}

/// O → U on the identity piece, then U → O across the flip.
const LOOP: [(&str, &str, usize); 2] = [("O", "U", 0), ("U", "O", 1)];

fn sign_cocycle(ex: &mut Example, atlas: &Atlas) {
    let a = atlas.clone();
    ex.pass("sign_cocycle", 0.0, move |p, t| match a.loop_sign(&LOOP) {
        Ok(s) => CheckReport::scalar("sign_cocycle", p, (s as f64 + 1.0).abs(), t).detail("loop_sign", s as f64),
        Err(e) => failed("sign_cocycle", p, t, e),
    });
}

fn atlas_consistency(ex: &mut Example, atlas: &Atlas) {
    let a = atlas.clone();
    ex.pass("atlas_consistency", crate::manifold::TRANSITION_TOL, move |p, _| a.consistency_check(p));
}

fn cross_charts(ex: &mut Example, atlas: &Atlas, name: &str, tol: f64, fields: Vec<TensorField>) {
    let a = atlas.clone();
    let check = name.to_string();
    ex.pass(name, tol, move |p, t| {
        let parts: Vec<(&str, CheckReport)> =
            fields.iter().map(|f| (f.name.as_str(), cross_chart_consistency(f, &a, p, t))).collect();
        CheckReport::combine(&check, p, t, parts)
    });
}

pub(super) fn mobius_band() -> Result<Example> {
    let atlas = mobius_atlas("mobius-band", &["x", "t"], &[(-2.0, 2.0)], &[false, true])?;
    let mut ex = Example::new("mobius-band", "Mobius line bundle over the circle in two strips");
    ex.atlas(&atlas);
    let ch = ["O", "U"];
    let fiber = dsl("t", Valence::SCALAR, Symmetry::None, &atlas, &ch, &[("", "t")])?.with_parity(1);
    let euler = dsl("euler", Valence::VECTOR, Symmetry::None, &atlas, &ch, &[("t", "t")])?;
    let dx = dsl("d_x", Valence::VECTOR, Symmetry::None, &atlas, &ch, &[("x", "1")])?;
    let wave = dsl("wave", Valence::VECTOR, Symmetry::None, &atlas, &ch, &[("x", "sin(2*pi*x)"), ("t", "t*cos(2*pi*x)")])?;
    let tdt = dsl("t_dt", Valence::FORM1, Symmetry::None, &atlas, &ch, &[("t", "t")])?;
    let t2dx = dsl("t2_dx", Valence::FORM1, Symmetry::None, &atlas, &ch, &[("x", "t^2")])?;
    for f in [&fiber, &euler, &dx, &wave, &tdt, &t2dx] {
        ex.field(&atlas, f);
    }
    atlas_consistency(&mut ex, &atlas);
    sign_cocycle(&mut ex, &atlas);
    let a = atlas.clone();
    ex.pass("transition_examples", 1e-12, move |p, t| {
        let cases = [([0.25, 1.0], [1.25, -1.0]), ([0.75, 1.0], [0.75, 1.0])];
        let mut worst: f64 = 0.0;
        for (from, want) in cases {
            match a.apply_transition(&Point::new("O", &from), "U") {
                Ok(q) => worst = worst.max(max_diff(&q.coords, &want)),
                Err(e) => return failed("transition_examples", p, t, e),
            }
        }
        CheckReport::scalar("transition_examples", p, worst, t)
    });
    cross_charts(&mut ex, &atlas, "fields_consistency", TIGHT, vec![fiber, euler.clone(), dx.clone(), wave.clone(), tdt.clone(), t2dx.clone()]);
    identities(&mut ex, &atlas, vec![tdt, t2dx], vec![euler, dx, wave], vec![]);
    Ok(ex)
}

const JET_REST: [(f64, f64); 2] = [(-4.0, 4.0), (-2.0, 2.0)];

fn jet_atlas() -> Result<Atlas> {
    mobius_atlas("mobius-jet", &["x", "p", "z"], &JET_REST, &[false, true, true])
}

/// The paired Sasakian structure on the jet space of the dual Möbius
/// bundle: `±(dz − p dx)` with the Darboux endomorphism on both charts.
pub fn jet_levi() -> Result<LeviStructure> {
    let atlas = jet_atlas()?;
    let ch = ["O", "U"];
    let eta = dsl("eta", Valence::FORM1, Symmetry::None, &atlas, &ch, &[("x", "-p"), ("z", "1")])?.with_parity(1);
    let phibar =
        dsl("phibar", Valence::ENDO, Symmetry::None, &atlas, &ch, &[("p x", "1"), ("x p", "-1"), ("z p", "-p")])?
            .with_parity(1);
    LeviStructure::new(ContactStructure::new(atlas, eta)?, phibar)
}

/// The metric `ds²/|s| + |s|(dp² + dx² + η²)` on the symplectic cover of
/// the jet space, coordinates `(x, s, p, z)`, with its Kähler candidate and
/// the closed form of the complex structure.
fn cotangent(levi: &LeviStructure) -> Result<(KahlerCandidate, TensorField)> {
    let (bundle, omega) = symplectize(&levi.contact, 1, false)?;
    let ch = ["O", "U"];
    let g = dsl(
        "g",
        Valence::BILINEAR,
        Symmetry::Symmetric,
        &bundle.atlas,
        &ch,
        &[("s s", "1/abs(s)"), ("p p", "abs(s)"), ("x x", "abs(s)*(1 + p^2)"), ("x z", "-abs(s)*p"), ("z z", "abs(s)")],
    )?;
    let j_formula = dsl(
        "J_formula",
        Valence::ENDO,
        Symmetry::None,
        &bundle.atlas,
        &ch,
        &[
            ("z s", "1/abs(s)"),
            ("p x", "sgn(s)"),
            ("x p", "-sgn(s)"),
            ("z p", "-sgn(s)*p"),
            ("s x", "abs(s)*p"),
            ("s z", "-abs(s)"),
        ],
    )?;
    Ok((KahlerCandidate::new(bundle, omega, g)?, j_formula))
}

fn circle_atlas() -> Result<Atlas> {
    mobius_atlas("circle", &["x"], &[], &[false])
}

fn jet_sections(circle: &Atlas, jet: &Atlas) -> Result<[SmoothMap; 2]> {
    let make = |name: &str, comps: [&str; 3]| {
        SmoothMap::from_dsl(name, circle, jet, &[("O", "O", &comps), ("U", "U", &comps)], &Default::default())
    };
    Ok([
        make("j1_sigma1", ["x", "pi*cos(pi*x)", "sin(pi*x)"])?,
        make("j1_sigma2", ["x", "-pi*sin(pi*x)", "cos(pi*x)"])?,
    ])
}

pub(super) fn mobius_jet() -> Result<Example> {
    let levi = jet_levi()?;
    let jet = levi.atlas().clone();
    let mut ex = Example::new("mobius-jet", "paired Sasakian structure on the jet space of the dual Mobius bundle");
    declare_levi(&mut ex, &levi);
    let circle = circle_atlas()?;
    ex.atlas(&circle);
    let sections = jet_sections(&circle, &jet)?;
    for s in &sections {
        ex.map(&circle, &jet, s);
    }
    atlas_consistency(&mut ex, &jet);
    sign_cocycle(&mut ex, &jet);
    sasakian_suite(&mut ex, &levi, TOL);
    let l = levi.clone();
    ex.pass("paired_consistency", TOL, move |p, t| l.paired_consistency(p, t));

    let (c, j, secs) = (circle.clone(), jet.clone(), sections.clone());
    ex.pass("sections_well_defined", 1e-12, move |p, t| {
        let mut pts = Vec::new();
        for tr in c.transitions() {
            for k in 0..tr.pieces.len() {
                match c.sample_overlap(&tr.source, &tr.target, k, p) {
                    Ok(xs) => pts.extend(xs.into_iter().map(|x| (format!("{}->{}", tr.source, tr.target), x))),
                    Err(e) => return failed("sections_well_defined", p, t, e),
                }
            }
        }
        let m = measure(pts, |label, x| {
            let (from, to) = label.split_once("->").unwrap_or((label, label));
            let there = c.apply_transition(&Point::new(from, x), to)?;
            let mut worst: f64 = 0.0;
            for s in &secs {
                let moved = j.apply_transition(&s.apply_point(&Point::new(from, x))?, to)?;
                worst = worst.max(max_diff(&moved.coords, &s.apply_point(&there)?.coords));
            }
            Ok(vec![worst])
        });
        m.report("sections_well_defined", p, &[0], t, None)
    });
    let (c, secs) = (circle.clone(), sections.clone());
    ex.pass("sections_independent", 1e-12, move |p, t| {
        // the fibre determinant of (j¹σ₁, j¹σ₂) is constant, equal to π
        let m = c.measure(p, |ch, x| {
            let a = secs[0].apply_point(&Point::new(ch, x))?.coords;
            let b = secs[1].apply_point(&Point::new(ch, x))?.coords;
            let det = a[1] * b[2] - a[2] * b[1];
            Ok(vec![(det - std::f64::consts::PI).abs(), det.abs()])
        });
        m.report("sections_independent", p, &[0], t, None).detail("min_abs_det", m.min(1))
    });

    let (cand, _) = cotangent(&levi)?;
    let l = levi.clone();
    ex.pass("cotangent_projection", TOL, move |p, t| {
        let b = &cand.bundle;
        let shadow = || -> Result<[TensorField; 4]> {
            let rec = reconstruct_main1(&cand, p)?;
            let dec = decompose_homogeneous_metric(&cand.g, &b.normal_calibration(), b, p)?;
            Ok([b.descend(&rec.eta)?, b.descend(&rec.xi)?, b.descend(&rec.phi_c)?, b.descend(&dec.gm)?])
        };
        let fields = match shadow() {
            Ok(f) => f,
            Err(e) => return failed("cotangent_projection", p, t, e),
        };
        let want = [l.eta(), l.xi(), &l.phibar, &l.gm];
        let m = l.atlas().measure(p, |ch, x| {
            fields.iter().zip(want).map(|(f, w)| Ok(max_diff(&f.eval_f64(ch, x)?, &w.eval_f64(ch, x)?))).collect()
        });
        m.report("cotangent_projection", p, &[0, 1, 2, 3], t, None)
            .detail("eta", m.max(0))
            .detail("xi", m.max(1))
            .detail("phibar", m.max(2))
            .detail("g_M", m.max(3))
    });
    identities(&mut ex, &jet, vec![levi.eta().clone()], frame_vectors(&levi, 2)?, vec![]);
    Ok(ex)
}

/// Real and imaginary parts of `A₁, A₂` (eigenvalue `i`) and `B₁, B₂`
/// (eigenvalue `−i`) on the cotangent charts.
fn eigenfields(atlas: &Atlas) -> Result<Vec<(TensorField, TensorField)>> {
    let ch = ["O", "U"];
    let v = |name: &str, e: &[(&str, &str)]| dsl(name, Valence::VECTOR, Symmetry::None, atlas, &ch, e);
    let sz = v("sgn_dz", &[("z", "sgn(s)")])?;
    let nabla = v("nabla", &[("s", "s")])?;
    let sp = v("sgn_dp", &[("p", "sgn(s)")])?;
    let x = v("X", &[("x", "1"), ("z", "p")])?;
    Ok(vec![(sz.clone(), nabla.clone()), (sp.clone(), x.clone()), (nabla, sz), (x, sp)])
}

const EIGEN_NAMES: [&str; 4] = ["a1", "a2", "b1", "b2"];

pub(super) fn mobius_cotangent() -> Result<Example> {
    let levi = jet_levi()?;
    let (cand, j_formula) = cotangent(&levi)?;
    let b = cand.bundle.clone();
    let atlas = b.atlas.clone();
    let mut ex = Example::new("mobius-cotangent", "Kahlerian structure on the cotangent bundle of the punctured Mobius band");
    ex.atlas(&atlas);
    ex.atlas(levi.atlas());
    for f in [&cand.omega, &cand.g, &cand.j, &j_formula] {
        ex.field(&atlas, f);
    }
    let comps = ["x", "p", "z"];
    let proj = SmoothMap::from_dsl("jet_projection", &atlas, levi.atlas(), &[("O", "O", &comps), ("U", "U", &comps)], &Default::default())?;
    ex.map(&atlas, levi.atlas(), &proj);
    let eig = eigenfields(&atlas)?;
    for (k, (u, v)) in eig.iter().enumerate() {
        ex.field(&atlas, &u.clone().named(&format!("{}_re", EIGEN_NAMES[k])));
        ex.field(&atlas, &v.clone().named(&format!("{}_im", EIGEN_NAMES[k])));
    }
    atlas_consistency(&mut ex, &atlas);
    sign_cocycle(&mut ex, &atlas);
    cross_charts(&mut ex, &atlas, "cross_chart", TIGHT, vec![cand.omega.clone(), cand.g.clone(), cand.j.clone()]);
    let (k, bb) = (cand.clone(), b.clone());
    ex.pass("homogeneity", TIGHT, move |p, t| {
        let parts = vec![
            ("omega", homogeneity_check(&k.omega, &bb, 1.0, Homogeneity::Plain, p, t)),
            ("g", homogeneity_check(&k.g, &bb, 1.0, Homogeneity::Positive, p, t)),
            ("J", homogeneity_check(&k.j, &bb, 0.0, Homogeneity::Half, p, t)),
        ];
        CheckReport::combine("homogeneity", p, t, parts)
    });
    let bb = b.clone();
    let om = cand.omega.clone();
    ex.pass("liouville", TIGHT, move |p, t| match liouville_data(&bb, &om, p, t) {
        Ok((_, _, r)) => r,
        Err(e) => failed("liouville", p, t, e),
    });
    let k = cand.clone();
    ex.pass("almost_complex", TOL, move |p, t| k.almost_complex(p, t));
    let k = cand.clone();
    ex.pass("integrability", TOL, move |p, _| k.integrability(p));
    let k = cand.clone();
    ex.pass("compatibility", TIGHT, move |p, t| k.compatibility(p, t));
    let k = cand.clone();
    ex.pass("isometry", TOL, move |p, t| k.isometry(p, t));
    let (k, jf) = (cand.clone(), j_formula.clone());
    ex.pass("j_formula", TIGHT, move |p, t| {
        let m = k.bundle.atlas.measure(p, |c, x| Ok(vec![max_diff(&k.j.eval_f64(c, x)?, &jf.eval_f64(c, x)?)]));
        m.report("j_formula", p, &[0], t, None)
    });
    let (k, l) = (cand.clone(), levi.clone());
    ex.pass("metric_formula", TIGHT, move |p, t| {
        let g = match calibrated_metric(&l.gm, &k.bundle.normal_calibration(), &k.bundle) {
            Ok(g) => g,
            Err(e) => return failed("metric_formula", p, t, e),
        };
        let m = k.bundle.atlas.measure(p, |c, x| Ok(vec![max_diff(&g.eval_f64(c, x)?, &k.g.eval_f64(c, x)?)]));
        m.report("metric_formula", p, &[0], t, None)
    });
    let k = cand.clone();
    ex.pass("shadow", TOL, move |p, t| {
        let b = &k.bundle;
        match decompose_homogeneous_metric(&k.g, &b.normal_calibration(), b, p) {
            Ok(d) => d.reassembly_check(&k.g, b, p, t),
            Err(e) => failed("shadow", p, t, e),
        }
    });
    let (k, e) = (cand.clone(), eig.clone());
    ex.pass("eigenfields", TIGHT, move |p, t| {
        // J u = −v, J v = u for eigenvalue i; the opposite signs for −i
        let mut parts = Vec::new();
        for (idx, (u, v)) in e.iter().enumerate() {
            let sign = if idx < 2 { 1.0 } else { -1.0 };
            let ju = apply_endo(&k.j, u);
            let jv = apply_endo(&k.j, v);
            let (ju, jv) = match (ju, jv) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(err), _) | (_, Err(err)) => return failed("eigenfields", p, t, err),
            };
            let m = k.bundle.atlas.measure(p, |c, x| {
                let (uu, vv) = (u.eval_f64(c, x)?, v.eval_f64(c, x)?);
                let (a, b) = (ju.eval_f64(c, x)?, jv.eval_f64(c, x)?);
                let r1 = a.iter().zip(&vv).map(|(a, v)| a + sign * v).collect::<Vec<_>>();
                let r2 = b.iter().zip(&uu).map(|(b, u)| b - sign * u).collect::<Vec<_>>();
                Ok(vec![max_abs(&r1).max(max_abs(&r2))])
            });
            parts.push((EIGEN_NAMES[idx], m.report("eigen", p, &[0], t, None)));
        }
        CheckReport::combine("eigenfields", p, t, parts)
    });
    let (bb, jet) = (b.clone(), levi.atlas().clone());
    ex.pass("jet_projection", TIGHT, move |p, t| jet_projection(&bb, &jet, &proj, p, t));
    let (bb, e) = (b.clone(), eig.clone());
    ex.pass("eigen_brackets", TIGHT, move |p, t| eigen_brackets(&bb.atlas, &e, p, t));
    let ch = ["O", "U"];
    let x = dsl("X", Valence::VECTOR, Symmetry::None, &atlas, &ch, &[("x", "1"), ("z", "p")])?;
    let dp = dsl("d_p", Valence::VECTOR, Symmetry::None, &atlas, &ch, &[("p", "1")])?;
    let nabla = b.liouville_field();
    let theta = interior(&nabla, &cand.omega)?;
    identities(&mut ex, &atlas, vec![theta, cand.omega.clone()], vec![nabla, x, dp], vec![b.action(-2.0)]);
    Ok(ex)
}

/// The projection forgets the fiber: it is invariant under the action
/// and intertwines the transitions of the two atlases.
fn jet_projection(b: &PrincipalBundle, jet: &Atlas, proj: &SmoothMap, plan: &SamplePlan, tol: f64) -> CheckReport {
    let atlas = &b.atlas;
    let actions: Vec<SmoothMap> = b.group_samples().iter().map(|&nu| b.action(nu)).collect();
    let m = atlas.measure(plan, |c, x| {
        let p = Point::new(c, x);
        let base = proj.apply_point(&p)?;
        let mut invariance: f64 = 0.0;
        for h in &actions {
            invariance = invariance.max(max_diff(&proj.apply_point(&h.apply_point(&p)?)?.coords, &base.coords));
        }
        let mut transition: f64 = 0.0;
        for tr in atlas.transitions().iter().filter(|tr| tr.source == c && tr.piece_at(x).is_some()) {
            let there = proj.apply_point(&atlas.apply_transition(&p, &tr.target)?)?;
            transition = transition.max(max_diff(&there.coords, &jet.apply_transition(&base, &tr.target)?.coords));
        }
        Ok(vec![invariance, transition])
    });
    m.report("jet_projection", plan, &[0, 1], tol, None).detail("action", m.max(0)).detail("transition", m.max(1))
}

/// Complex brackets of the eigenfields. All pairs commute except
/// `[A₂, B₂] = 2 sgn(s) ∂z`, which is compared with that value; the
/// brackets inside each eigenbundle vanish, so both are involutive.
fn eigen_brackets(atlas: &Atlas, e: &[(TensorField, TensorField)], plan: &SamplePlan, tol: f64) -> CheckReport {
    let pairs = [(0, 1), (2, 3), (0, 2), (0, 3), (1, 2), (1, 3)];
    let mut fields = Vec::new();
    for &(i, j) in &pairs {
        let ((u1, v1), (u2, v2)) = (&e[i], &e[j]);
        let br = || -> Result<[TensorField; 4]> {
            Ok([lie_bracket(u1, u2)?, lie_bracket(v1, v2)?, lie_bracket(u1, v2)?, lie_bracket(v1, u2)?])
        };
        match br() {
            Ok(b) => fields.push(b),
            Err(err) => return failed("eigen_brackets", plan, tol, err),
        }
    }
    let m = atlas.measure(plan, |c, x| {
        let n = x.len();
        let z = 3;
        let mut out = Vec::new();
        for (k, f) in fields.iter().enumerate() {
            let v: Vec<Vec<f64>> = f.iter().map(|t| t.eval_f64(c, x)).collect::<Result<_>>()?;
            let re: Vec<f64> = (0..n).map(|i| v[0][i] - v[1][i]).collect();
            let im: Vec<f64> = (0..n).map(|i| v[2][i] + v[3][i]).collect();
            let mut expect = vec![0.0; n];
            if pairs[k] == (1, 3) {
                expect[z] = 2.0 * x[1].signum();
            }
            out.push(max_diff(&re, &expect).max(max_abs(&im)));
            if pairs[k] == (1, 3) {
                out.push(max_abs(&re));
            }
        }
        Ok(out)
    });
    let mut r = m.report("eigen_brackets", plan, &[0, 1, 2, 3, 4, 5], tol, None);
    for (k, &(i, j)) in pairs.iter().enumerate() {
        r = r.detail(&format!("{}_{}", EIGEN_NAMES[i], EIGEN_NAMES[j]), m.max(k));
    }
    r.detail("a2_b2_norm", m.max(6)).note("[A2, B2] = 2 sgn(s) d/dz is measured against that value")
}

/// Stereographic charts `N`, `S` of the sphere of `radius` in
/// `R^{2n+2}`, the ambient Liouville form `½Σ(q dp − p dq)` and Euclidean
/// metric, and the two embeddings.
fn sphere_data(n: usize, radius: f64) -> Result<(Atlas, Atlas, SmoothMap, TensorField, TensorField)> {
    let m = 2 * n + 1;
    let us: Vec<String> = (1..=m).map(|i| format!("u{i}")).collect();
    let names: Vec<&str> = us.iter().map(String::as_str).collect();
    let mut sphere = Atlas::new(&format!("sphere-{m}"));
    for c in ["N", "S"] {
        sphere.add_chart(Chart::new(c, &names, &vec![(-3.0, 3.0); m])?)?;
    }
    let r2 = us.iter().map(|u| format!("{u}^2")).collect::<Vec<_>>().join(" + ");
    let rr = radius * radius;
    let inversion: Vec<String> = us.iter().map(|u| format!("{rr}*{u}/({r2})")).collect();
    let inv: Vec<&str> = inversion.iter().map(String::as_str).collect();
    let pieces: Vec<PieceSpec> = [(1.5, 2.5), (-2.5, -1.5)]
        .iter()
        .map(|&d| {
            let mut dom = vec![d];
            dom.extend(std::iter::repeat_n((-0.5, 0.5), m - 1));
            PieceSpec::new(&dom, &inv, &inv, 1)
        })
        .collect();
    sphere.glue("N", "S", &pieces)?;
    sphere.glue("S", "N", &pieces)?;

    let ys: Vec<String> = (1..=m + 1).map(|i| format!("y{i}")).collect();
    let ynames: Vec<&str> = ys.iter().map(String::as_str).collect();
    let ambient = Atlas::single(&format!("R{}", m + 1), Chart::new("E", &ynames, &vec![(-3.0, 3.0); m + 1])?);
    let embed = |pole: &str| -> Vec<String> {
        let mut v: Vec<String> = us.iter().map(|u| format!("{}*{u}/({r2} + {rr})", 2.0 * rr)).collect();
        v.push(format!("{pole}{radius}*({r2} - {rr})/({r2} + {rr})"));
        v
    };
    let (en, es) = (embed(""), embed("-"));
    let (en, es): (Vec<&str>, Vec<&str>) = (en.iter().map(String::as_str).collect(), es.iter().map(String::as_str).collect());
    let map = SmoothMap::from_dsl("embedding", &sphere, &ambient, &[("N", "E", &en), ("S", "E", &es)], &Default::default())?;
    let mut theta = Vec::new();
    for k in 0..=n {
        theta.push((ys[2 * k].clone(), format!("-0.5*{}", ys[2 * k + 1])));
        theta.push((ys[2 * k + 1].clone(), format!("0.5*{}", ys[2 * k])));
    }
    let theta: Vec<(&str, &str)> = theta.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let theta = TensorField::from_dsl("theta", Valence::FORM1, Symmetry::None, &ambient, &[("E", &theta)])?;
    let diag: Vec<String> = ys.iter().map(|y| format!("{y} {y}")).collect();
    let eucl: Vec<(&str, &str)> = diag.iter().map(|k| (k.as_str(), "1")).collect();
    let eucl = TensorField::from_dsl("euclid", Valence::BILINEAR, Symmetry::Symmetric, &ambient, &[("E", &eucl)])?;
    Ok((sphere, ambient, map, theta, eucl))
}

/// The Sasakian structure of the sphere of `radius` in `R^{2n+2}`: the
/// contact form is the restricted Liouville form and the endomorphism is
/// read off the round metric. Also returns the round metric.
pub fn sphere_levi(n: usize, radius: f64) -> Result<(LeviStructure, TensorField)> {
    let (sphere, _, map, theta, eucl) = sphere_data(n, radius)?;
    let eta = pullback(&map, &theta)?.named("eta");
    let round = pullback(&map, &eucl)?.named("g_round");
    let phibar = phibar_from_metric(&eta, &round)?;
    Ok((LeviStructure::new(ContactStructure::new(sphere, eta)?, phibar)?, round))
}

fn metric_gap(levi: &LeviStructure, round: &TensorField, plan: &SamplePlan, tol: f64) -> CheckReport {
    let xi = levi.xi();
    let m = levi.atlas().measure(plan, |c, x| {
        let (a, b) = (levi.gm.eval_f64(c, x)?, round.eval_f64(c, x)?);
        let v = xi.eval_f64(c, x)?;
        let k = v.len();
        let norm: f64 = (0..k * k).map(|f| b[f] * v[f / k] * v[f % k]).sum();
        Ok(vec![max_diff(&a, &b), (norm - 1.0).abs()])
    });
    m.report("round_metric", plan, &[0, 1], tol, None).detail("levi_minus_round", m.max(0)).detail("xi_norm_minus_one", m.max(1))
}

pub(super) fn sphere(n: usize) -> Result<Example> {
    let m = 2 * n + 1;
    let (sphere, ambient, map, theta, eucl) = sphere_data(n, 2.0)?;
    let (levi, round) = sphere_levi(n, 2.0)?;
    let mut ex = Example::new(&format!("sphere-{m}"), &format!("round sphere of radius 2 in R^{}", m + 1));
    ex.atlas(&ambient);
    ex.field(&ambient, &theta);
    ex.field(&ambient, &eucl);
    ex.map(&sphere, &ambient, &map);
    declare_levi(&mut ex, &levi);
    ex.field(&sphere, &round);
    atlas_consistency(&mut ex, &sphere);
    let mp = map.clone();
    ex.pass("radius", TIGHT, move |p, t| {
        let m = sphere.measure(p, |c, x| {
            let y = mp.apply_point(&Point::new(c, x))?.coords;
            Ok(vec![(y.iter().map(|v| v * v).sum::<f64>() - 4.0).abs()])
        });
        m.report("radius", p, &[0], t, None)
    });
    cross_charts(&mut ex, levi.atlas(), "cross_chart", TIGHT, vec![levi.eta().clone(), round.clone(), levi.phibar.clone()]);
    let (l, r) = (levi.clone(), round.clone());
    ex.pass("round_metric", TIGHT, move |p, t| metric_gap(&l, &r, p, t));
    ex.check("unit_radius_round_metric", Verdict::Fail, TIGHT, move |p, t| match sphere_levi(n, 1.0) {
        Ok((l, r)) => metric_gap(&l, &r, p, t),
        Err(e) => failed("round_metric", p, t, e),
    });
    sasakian_suite(&mut ex, &levi, 1e-7);
    identities(&mut ex, levi.atlas(), vec![levi.eta().clone()], frame_vectors(&levi, 2)?, vec![]);
    Ok(ex)
}

pub(super) fn product_darboux() -> Result<Example> {
    let d = darboux_levi(1)?;
    let cp = contact_product(&d.contact, &d.contact)?;
    let sp = sasakian_product(&d, &d)?;
    let pl = product_kahler_lift(&d, &d)?;
    let mut ex = Example::new("product-darboux", "Sasakian product of two Darboux R^3 and its Kahler cone");
    declare_levi(&mut ex, &sp.levi);
    let patlas = pl.bundle().atlas.clone();
    ex.atlas(&patlas);
    for f in [&pl.candidate.omega, &pl.candidate.g, &pl.beta] {
        ex.field(&patlas, f);
    }
    let c = cp.clone();
    ex.pass("product_reeb", TIGHT, move |p, t| c.reeb_check(p, t));
    let c = cp.clone();
    ex.pass("product_kernel", TIGHT, move |p, t| c.kernel_check(p, t));
    let s = sp.clone();
    ex.pass("reeb_sum", TIGHT, move |p, t| {
        let m = s.levi.atlas().measure(p, |c, x| Ok(vec![max_diff(&s.levi.xi().eval_f64(c, x)?, &s.reeb_sum.eval_f64(c, x)?)]));
        m.report("reeb_sum", p, &[0], t, None)
    });
    let s = sp.clone();
    ex.pass("product_formulas", TIGHT, move |p, t| s.formula_check(p, t));
    let (s, c) = (sp.clone(), cp.clone());
    ex.pass("product_distribution", TIGHT, move |p, t| s.distribution_check(&c, p, t));
    sasakian_suite(&mut ex, &sp.levi, 1e-7);
    let s = sp.clone();
    ex.check("weighted_endomorphism", Verdict::Fail, TOL, move |p, t| {
        match LeviStructure::new(s.levi.contact.clone(), s.weighted_phibar.clone()) {
            Ok(w) => levi_structure_check(&w, p, t),
            Err(e) => failed("levi_structure", p, t, e),
        }
    });
    let l = pl.clone();
    ex.pass("cone_almost_complex", TOL, move |p, t| l.candidate.almost_complex(p, t));
    let l = pl.clone();
    ex.pass("cone_integrability", TOL, move |p, _| l.candidate.integrability(p));
    let l = pl.clone();
    ex.pass("product_calibration", TIGHT, move |p, t| l.calibration_check(p, t));
    let l = pl.clone();
    ex.pass("product_beta", TIGHT, move |p, t| l.beta_check(p, t));
    let l = pl.clone();
    ex.pass("product_decomposition", TOL, move |p, t| l.decomposition_check(p, t));
    let (l, s) = (pl.clone(), sp.clone());
    ex.pass("product_reparametrization", 1e-7, move |p, t| l.reparametrization_check(&s, p, t));
    identities(
        &mut ex,
        sp.levi.atlas(),
        vec![sp.levi.eta().clone()],
        vec![sp.levi.xi().clone(), cp.xi1.clone(), cp.xi2.clone()],
        vec![],
    );
    Ok(ex)
}

pub(super) fn main1_family(a: &str) -> Result<Example> {
    let expr = parse(a)?;
    let vars: Vec<String> = expr.variables().into_iter().filter(|v| v != "pi").collect();
    if let Some(v) = vars.iter().find(|v| !["x", "p", "z"].contains(&v.as_str())) {
        return Err(GeomError::Invalid(format!("parameter `a` may only use x, p, z (found `{v}`)")));
    }
    let constant = vars.is_empty();
    let base = darboux_levi(1)?;
    let af = TensorField::from_dsl("a", Valence::SCALAR, Symmetry::None, base.atlas(), &[("R", &[("", a)])])?;
    let cand = main1_cone(base.atlas(), base.eta(), &base.gm, &af)?;
    let b = cand.bundle.clone();
    let mut ex = Example::new("main1-family", "homogeneous metric s((ds/s + a eta)^2 + g_M) on the Darboux cone");
    ex.params.insert("a".into(), a.to_string());
    declare_levi(&mut ex, &base);
    ex.field(base.atlas(), &af);
    ex.atlas(&b.atlas);
    for f in [&cand.omega, &cand.g, &cand.j] {
        ex.field(&b.atlas, f);
    }
    let expect = if constant { Verdict::Pass } else { Verdict::Fail };
    let (k, bb) = (cand.clone(), b.clone());
    ex.pass("homogeneity", TIGHT, move |p, t| {
        let parts = vec![
            ("omega", homogeneity_check(&k.omega, &bb, 1.0, Homogeneity::Plain, p, t)),
            ("g", homogeneity_check(&k.g, &bb, 1.0, Homogeneity::Positive, p, t)),
        ];
        CheckReport::combine("homogeneity", p, t, parts)
    });
    let k = cand.clone();
    ex.pass("almost_complex", TOL, move |p, t| k.almost_complex(p, t));
    let k = cand.clone();
    ex.check("integrability", expect, TOL, move |p, _| k.integrability(p));
    let k = cand.clone();
    ex.pass("main1", TOL, move |p, t| match reconstruct_main1(&k, p) {
        Ok(r) => r.check(p, t),
        Err(e) => failed("main1", p, t, e),
    });
    let (k, lifted) = (cand.clone(), b.lift(&af)?);
    ex.pass("main1_a", TOL, move |p, t| match reconstruct_main1(&k, p) {
        Ok(r) => r.a_check(&lifted, p, t),
        Err(e) => failed("main1_a", p, t, e),
    });
    let k = cand.clone();
    ex.check("i_xi_dmu", expect, TOL, move |p, t| match reconstruct_main1(&k, p) {
        Ok(r) => r.mu_check(p, t),
        Err(e) => failed("i_xi_dmu", p, t, e),
    });
    let nabla = b.liouville_field();
    let theta = interior(&nabla, &cand.omega)?;
    let xi = b.lift(base.xi())?;
    let frame0 = b.lift(&base.contact.frame()?[0])?;
    identities(&mut ex, &b.atlas, vec![theta, cand.omega.clone()], vec![nabla, xi, frame0], vec![b.action(2.0)]);
    Ok(ex)
}
