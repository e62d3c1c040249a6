//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//! Runs without the libtest harness so the lines always print.

use std::collections::HashMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sasaki_lab::bundle::{decompose_homogeneous_metric, induced_calibration, induced_metric, symplectize};
use sasaki_lab::cli;
use sasaki_lab::contact::darboux_contact;
use sasaki_lab::corpus::{build_example, build_example_with, Example, KEYS};
use sasaki_lab::exprlang::{eval, eval_f64, parse};
use sasaki_lab::manifold::SamplePlan;
use sasaki_lab::numkernel::DScalar;
use sasaki_lab::report::{CheckReport, Verdict};
use sasaki_lab::sasaki::{
    constant_frame_matrix, darboux_phibar, normality_check, pin_battery, pin_flags_agree, reframe, LeviStructure,
    Reframe,
};
use sasaki_lab::tensor::{contraction, identity_check, Symmetry, TensorField, Valence};

type Outcome = Result<String, String>;

fn plan() -> SamplePlan {
    SamplePlan::default()
}

fn run(ex: &Example, check: &str, tol: f64) -> CheckReport {
    ex.find_check(check).unwrap_or_else(|| panic!("{} has no {check}", ex.key)).run(&plan(), Some(tol))
}

/// Every report passes; the message lists the worst residual.
fn all_pass(reports: &[(&str, CheckReport)]) -> Outcome {
    let worst = reports.iter().map(|(_, r)| r.max_residual).fold(0.0, f64::max);
    match reports.iter().find(|(_, r)| !r.passed()) {
        None => Ok(format!("worst residual {worst:.1e}")),
        Some((n, r)) => Err(format!("{n}: {} at residual {:.3e} (tol {:.0e})", r.verdict.as_str(), r.max_residual, r.tolerance)),
    }
}

fn darboux(n: usize) -> LeviStructure {
    let c = darboux_contact(n).unwrap();
    let p = darboux_phibar(&c).unwrap();
    LeviStructure::new(c, p).unwrap()
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let mut reports = Vec::new();
    for n in [1, 2] {
        let l = darboux(n);
        let p = plan();
        reports.push(("contact_metric", l.contact_metric(&p, 1e-7)));
        reports.push(("sasaki", l.sasaki(&p, 1e-7)));
        reports.push(("killing", l.killing(&p, 1e-7)));
        reports.push(("levi_civita", l.levi_civita_identity(&p, 1e-7)));
        reports.push(("normality", normality_check(&l, &p, 1e-7)));
    }
    let secs = t.elapsed().as_secs_f64();
    let msg = all_pass(&reports)?;
    if secs >= 5.0 {
        return Err(format!("took {secs:.2} s"));
    }
    Ok(format!("{msg}, {secs:.2} s for n = 1, 2"))
}

fn criterion_2() -> Outcome {
    let ex = build_example("mobius-cotangent").unwrap();
    let brackets = run(&ex, "eigen_brackets", 1e-9);
    let msg = all_pass(&[
        ("cross_chart", run(&ex, "cross_chart", 1e-9)),
        ("homogeneity", run(&ex, "homogeneity", 1e-9)),
        ("almost_complex", run(&ex, "almost_complex", 1e-8)),
        ("integrability", run(&ex, "integrability", 1e-8)),
        ("eigenfields", run(&ex, "eigenfields", 1e-9)),
        ("eigen_brackets", brackets.clone()),
    ])?;
    let norm = brackets.details["a2_b2_norm"];
    if (norm - 2.0).abs() > 1e-9 {
        return Err(format!("[A2, B2] has norm {norm}, expected 2"));
    }
    Ok(format!(
        "{msg}; deviation: five pairs commute but [A2, B2] = 2 sgn(s) d/dz (max norm {norm}), eigenbundles still involutive"
    ))
}

fn criterion_3() -> Outcome {
    let mut worst: f64 = 0.0;
    for a in ["0", "0.7", "-1.3"] {
        let ex = build_example_with("main1-family", &[("a".into(), a.into())]).unwrap();
        let rs = [
            ("main1", run(&ex, "main1", 1e-8)),
            ("main1_a", run(&ex, "main1_a", 1e-8)),
            ("integrability", run(&ex, "integrability", 1e-8)),
        ];
        all_pass(&rs).map_err(|e| format!("a = {a}: {e}"))?;
        worst = worst.max(rs[0].1.details["jw_block"]).max(rs[1].1.max_residual);
    }
    let ex = build_example_with("main1-family", &[("a".into(), "x".into())]).unwrap();
    let r = run(&ex, "integrability", 1e-8);
    match (&r.verdict, &r.witness) {
        (Verdict::Fail, Some(w)) if w.residual > 1e-3 => Ok(format!(
            "a and J_W recovered within {worst:.1e}; a = x fails integrability with witness residual {:.3} at {:?}",
            w.residual, w.coords
        )),
        _ => Err(format!("a = x gave {} (residual {:.3e})", r.verdict.as_str(), r.max_residual)),
    }
}

/// A random symplectic matrix for the frame pairing `(x₁, x₂ | p₁, p₂)`:
/// `diag(B, B⁻ᵀ)` times upper and lower symmetric shears.
fn random_symplectic(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut r = || rng.gen_range(-0.4..0.4);
    let b = [[1.0 + r(), r()], [r(), 1.0 + r()]];
    let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
    let bit = [[b[1][1] / det, -b[1][0] / det], [-b[0][1] / det, b[0][0] / det]];
    let (s, t) = ([r(), r(), r()], [r(), r(), r()]);
    let mul = |x: &[[f64; 4]; 4], y: &[[f64; 4]; 4]| {
        let mut z = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                z[i][j] = (0..4).map(|k| x[i][k] * y[k][j]).sum();
            }
        }
        z
    };
    let d = [
        [b[0][0], b[0][1], 0.0, 0.0],
        [b[1][0], b[1][1], 0.0, 0.0],
        [0.0, 0.0, bit[0][0], bit[0][1]],
        [0.0, 0.0, bit[1][0], bit[1][1]],
    ];
    let up = [[1.0, 0.0, s[0], s[1]], [0.0, 1.0, s[1], s[2]], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
    let lo = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [t[0], t[1], 1.0, 0.0], [t[1], t[2], 0.0, 1.0]];
    mul(&mul(&d, &up), &lo).iter().flatten().copied().collect()
}

fn criterion_4() -> Outcome {
    let l = darboux(2);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = SamplePlan::new(7, 16);
    let (mut pass, mut fail, mut disagree) = (0, 0, Vec::new());
    for k in 0..50 {
        let a = if k % 2 == 0 {
            random_symplectic(&mut rng)
        } else {
            (0..16).map(|i| if i % 5 == 0 { 1.0 } else { 0.0 } + rng.gen_range(-0.4..0.4)).collect()
        };
        let phi = reframe(&l.phibar, l.eta(), l.xi(), constant_frame_matrix(a), Reframe::Conjugate).unwrap();
        let r = pin_battery(l.eta(), &phi, l.atlas(), &p, 1e-9);
        if !pin_flags_agree(&r) {
            disagree.push(k);
        }
        if r.passed() {
            pass += 1
        } else {
            fail += 1
        }
    }
    if disagree.is_empty() {
        Ok(format!("50 conjugated candidates, flags agree on all ({pass} satisfy pin, {fail} violate it)"))
    } else {
        Err(format!("flags disagree on candidates {disagree:?}"))
    }
}

/// `η² + dx² + dp²` plus small random quadratic polynomials in every entry.
fn perturbed_metric(rng: &mut ChaCha8Rng, atlas: &sasaki_lab::manifold::Atlas) -> TensorField {
    let monomials = ["1", "x", "p", "z", "x^2", "p^2", "z^2", "x*p", "x*z", "p*z"];
    let base = [("x x", "1 + p^2"), ("x z", "-p"), ("z z", "1"), ("p p", "1"), ("x p", "0"), ("p z", "0")];
    let entries: Vec<(String, String)> = base
        .iter()
        .map(|(k, e)| {
            let poly: Vec<String> =
                monomials.iter().map(|m| format!("{:.6}*{m}", 0.01 * rng.gen_range(-1.0..1.0))).collect();
            (k.to_string(), format!("{e} + {}", poly.join(" + ")))
        })
        .collect();
    let refs: Vec<(&str, &str)> = entries.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    TensorField::from_dsl("g_M", Valence::BILINEAR, Symmetry::Symmetric, atlas, &[("R", &refs)]).unwrap()
}

fn criterion_5() -> Outcome {
    let c = darboux_contact(1).unwrap();
    let (b, _) = symplectize(&c, 3, false).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = plan();
    let mut worst = [0.0f64; 3];
    for _ in 0..5 {
        let gm = perturbed_metric(&mut rng, &c.atlas);
        let g = induced_metric(&gm, &c, &b).map_err(|e| e.to_string())?;
        let cal = induced_calibration(&gm, &c, &b).map_err(|e| e.to_string())?;
        let dec = decompose_homogeneous_metric(&g, &cal, &b, &p).map_err(|e| e.to_string())?;
        let lifted = b.lift(&gm).unwrap();
        let m = b.atlas.measure(&p, |ch, x| {
            let a = dec.a.eval_f64(ch, x)?[0];
            let mu = dec.mu.eval_f64(ch, x)?;
            let (u, v) = (dec.gm.eval_f64(ch, x)?, lifted.eval_f64(ch, x)?);
            Ok(vec![
                (a - 1.0).abs(),
                mu.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
                u.iter().zip(&v).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs())),
            ])
        });
        if let Some(e) = m.first_error() {
            return Err(e.to_string());
        }
        for (k, w) in worst.iter_mut().enumerate() {
            *w = w.max(m.max(k));
        }
    }
    if worst.iter().all(|&w| w < 1e-8) {
        Ok(format!("5 metrics: |A - 1| {:.1e}, |mu| {:.1e}, |g_M - shadow| {:.1e}", worst[0], worst[1], worst[2]))
    } else {
        Err(format!("residuals {worst:?}"))
    }
}

fn criterion_6() -> Outcome {
    let ex = build_example("sphere-3").unwrap();
    let reeb = run(&ex, "reeb", 1e-9);
    all_pass(&[
        ("contact_metric", run(&ex, "contact_metric", 1e-7)),
        ("sasaki", run(&ex, "sasaki", 1e-7)),
        ("reeb", reeb.clone()),
    ])
    .map(|m| format!("{m}; eta(xi) - 1 {:.1e}, i_xi d eta {:.1e}", reeb.details["eta_xi"], reeb.details["i_xi_deta"]))
}

fn criterion_7() -> Outcome {
    let ex = build_example("product-darboux").unwrap();
    let beta = run(&ex, "product_beta", 1e-9);
    all_pass(&[
        ("sasaki", run(&ex, "sasaki", 1e-7)),
        ("reeb_sum", run(&ex, "reeb_sum", 1e-9)),
        ("reparametrization", run(&ex, "product_reparametrization", 1e-7)),
        ("beta", beta.clone()),
    ])
    .map(|m| format!("{m}; beta degree {}", beta.details["homogeneity.degree"]))
}

fn criterion_8() -> Outcome {
    let ex = build_example("mobius-jet").unwrap();
    let cocycle = run(&ex, "sign_cocycle", 0.0);
    let msg = all_pass(&[
        ("paired_consistency", run(&ex, "paired_consistency", 1e-8)),
        ("sasaki", run(&ex, "sasaki", 1e-8)),
        ("sign_cocycle", cocycle.clone()),
    ])?;
    Ok(format!("{msg}; loop sign {}", cocycle.details["loop_sign"]))
}

/// A smooth random expression in `x, y, z` (depth-limited, no poles on
/// the unit cube).
fn random_expr(rng: &mut ChaCha8Rng, depth: usize) -> String {
    let leaf = |rng: &mut ChaCha8Rng| match rng.gen_range(0..4) {
        0 => format!("{:.3}", rng.gen_range(-2.0..2.0)),
        k => ["x", "y", "z"][k - 1].to_string(),
    };
    if depth == 0 {
        return leaf(rng);
    }
    let sub = |rng: &mut ChaCha8Rng| random_expr(rng, depth - 1);
    match rng.gen_range(0..10) {
        0 => format!("({} + {})", sub(rng), sub(rng)),
        1 => format!("({} - {})", sub(rng), sub(rng)),
        2 | 3 => format!("{}*{}", sub(rng), sub(rng)),
        4 => format!("{}/(2 + ({})^2)", sub(rng), sub(rng)),
        5 => format!("sin({})", sub(rng)),
        6 => format!("cos({})", sub(rng)),
        7 => format!("exp(0.3*{})", sub(rng)),
        8 => format!("log(1 + ({})^2)", sub(rng)),
        _ => format!("({})^{}", sub(rng), rng.gen_range(2..4)),
    }
}

/// Gradient, one mixed and one repeated second derivative from nested
/// duals against extrapolated central differences.
fn dual_vs_fd(text: &str, at: [f64; 3]) -> Result<f64, String> {
    let e = parse(text).map_err(|e| e.to_string())?;
    let names = ["x", "y", "z"];
    let f = |p: [f64; 3]| {
        let env: HashMap<String, f64> = names.iter().zip(p).map(|(n, v)| (n.to_string(), v)).collect();
        eval_f64(&e, &env).unwrap()
    };
    let mut env = HashMap::new();
    for (i, n) in names.iter().enumerate() {
        let mut v = DScalar::variable(at[i], i).unwrap();
        if i == 0 {
            v.perturb(3, 1.0).unwrap();
        }
        env.insert(n.to_string(), v);
    }
    let d = eval(&e, &env).map_err(|e| e.to_string())?;
    let shift = |i: usize, h: f64| {
        let mut p = at;
        p[i] += h;
        p
    };
    // Richardson-extrapolated central differences, error O(h⁴)
    let rich = |g: &dyn Fn(f64) -> f64, h: f64| (4.0 * g(h / 2.0) - g(h)) / 3.0;
    let mut worst: f64 = 0.0;
    let mut cmp = |dual: f64, fd: f64| worst = worst.max((dual - fd).abs() / dual.abs().max(1.0));
    for i in 0..3 {
        cmp(d.coeff(1 << i), rich(&|h| (f(shift(i, h)) - f(shift(i, -h))) / (2.0 * h), 1e-3));
    }
    cmp(d.coeff(0b1001), rich(&|h| (f(shift(0, h)) - 2.0 * f(at) + f(shift(0, -h))) / (h * h), 2e-3));
    let mixed = |sx: f64, sy: f64| {
        let mut p = at;
        p[0] += sx;
        p[1] += sy;
        f(p)
    };
    cmp(d.coeff(0b011), rich(&|h| (mixed(h, h) - mixed(h, -h) - mixed(-h, h) + mixed(-h, -h)) / (4.0 * h * h), 2e-3));
    Ok(worst)
}

/// Forms and vectors of every declared expression field, atlas by atlas.
fn identity_reports(ex: &Example) -> Vec<(String, CheckReport)> {
    let mut out = Vec::new();
    for atlas in &ex.atlases {
        let on: Vec<&TensorField> =
            ex.fields.iter().filter(|d| d.atlas == atlas.name).map(|d| &d.field).collect();
        let forms: Vec<&TensorField> = on
            .iter()
            .copied()
            .filter(|f| f.valence.contra == 0 && (f.valence.co <= 1 || f.symmetry == Symmetry::Antisymmetric))
            .collect();
        let vectors: Vec<&TensorField> = on.iter().copied().filter(|f| f.valence == Valence::VECTOR).collect();
        if forms.is_empty() && vectors.len() < 3 {
            continue;
        }
        let maps = [contraction(atlas, 0.8, 0.05)];
        let p = SamplePlan::new(11, 16);
        out.push((format!("{}/{}", ex.key, atlas.name), identity_check(atlas, &forms, &vectors, &maps, &p, 1e-8)));
    }
    out
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let text = random_expr(&mut rng, 3);
        let at = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
        let w = dual_vs_fd(&text, at).map_err(|e| format!("`{text}`: {e}"))?;
        if !(w < 1e-6) {
            return Err(format!("`{text}` at {at:?}: dual vs FD {w:.3e}"));
        }
        worst = worst.max(w);
    }
    let mut count = 0;
    let mut id_worst: f64 = 0.0;
    for key in KEYS {
        let ex = build_example(key).unwrap();
        for (name, r) in identity_reports(&ex) {
            if !r.passed() {
                return Err(format!("identities on {name}: {:?} {:?}", r.details, r.notes));
            }
            count += r.details["instances"] as usize;
            id_worst = id_worst.max(r.max_residual);
        }
    }
    Ok(format!("100 expressions, worst relative FD gap {worst:.1e}; {count} identity instances, worst {id_worst:.1e}"))
}

fn criterion_10() -> Outcome {
    let dir = std::env::temp_dir().join(format!("sasaki-lab-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let mut times = Vec::new();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let path = dir.join(format!("run{k}.json"));
        let t = Instant::now();
        let args = ["sasaki-lab", "verify", "all", "--json", path.to_str().unwrap()];
        let code = cli::run(args, &mut std::io::sink(), &mut std::io::stderr());
        times.push(t.elapsed().as_secs_f64());
        if code != cli::EXIT_OK {
            return Err(format!("verify all exited {code}"));
        }
        outputs.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    let _ = std::fs::remove_dir_all(&dir);
    if outputs[0] != outputs[1] {
        return Err("JSON differs between runs".into());
    }
    if times.iter().any(|&t| t >= 120.0) {
        return Err(format!("runs took {times:.1?} s"));
    }
    Ok(format!("{} bytes identical across runs, {:.1} s and {:.1} s", outputs[0].len(), times[0], times[1]))
}

fn main() {
    // `cargo test -- --list` and filters come through here too
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("Darboux Sasakian", criterion_1),
        ("Mobius Kahlerian bundle", criterion_2),
        ("homogeneous Kahler family", criterion_3),
        ("pin equivalence", criterion_4),
        ("induced lift round trip", criterion_5),
        ("radius-2 sphere", criterion_6),
        ("Sasakian product", criterion_7),
        ("paired Mobius jet", criterion_8),
        ("engine soundness", criterion_9),
        ("determinism and budget", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {:>2} PASS  {name} ({secs:.1} s): {msg}", k + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.1} s): {msg}", k + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
