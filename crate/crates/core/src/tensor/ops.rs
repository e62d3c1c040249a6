use std::sync::Arc;

use super::field::{ComponentFn, SmoothMap, Symmetry, TensorField, Valence};
use super::index::{count, flat_index, multi_index, transform_slot};
use crate::error::{GeomError, Result};
use crate::numkernel::{jet, DScalar, DenseMatrix, LuDecomposition};

type Arrays = [Vec<DScalar>];
type Jets = [Vec<Vec<DScalar>>];

fn common_charts(inputs: &[&TensorField]) -> Result<Vec<String>> {
    let first = inputs.first().ok_or_else(|| GeomError::Invalid("no input fields".into()))?;
    for f in inputs {
        if f.dim != first.dim {
            return Err(GeomError::Shape(format!("`{}` and `{}` differ in dimension", first.name, f.name)));
        }
    }
    let charts = first.chart_names();
    for c in &charts {
        for f in inputs {
            if !f.has_chart(c) {
                return Err(GeomError::MissingChartComponents { field: f.name.clone(), chart: c.clone() });
            }
        }
    }
    Ok(charts)
}

fn parity_of(inputs: &[&TensorField]) -> u8 {
    inputs.iter().map(|f| f.parity).sum::<u8>() % 2
}

/// Field whose components at `x` are an algebraic function of the input
/// components at `x` (and of `x` itself).
pub fn pointwise<F>(
    name: &str,
    valence: Valence,
    symmetry: Symmetry,
    inputs: &[&TensorField],
    f: F,
) -> Result<TensorField>
where
    F: Fn(&[DScalar], &Arrays) -> Result<Vec<DScalar>> + Send + Sync + 'static,
{
    let charts = common_charts(inputs)?;
    let dim = inputs[0].dim;
    let f = Arc::new(f);
    let mut out = Vec::new();
    for c in charts {
        let fns: Vec<ComponentFn> = inputs.iter().map(|t| t.component_fn(&c)).collect::<Result<_>>()?;
        let f = f.clone();
        let eval: ComponentFn = Arc::new(move |x: &[DScalar]| {
            let vals: Vec<Vec<DScalar>> = fns.iter().map(|g| g(x)).collect::<Result<_>>()?;
            f(x, &vals)
        });
        out.push((c, eval));
    }
    Ok(TensorField::builtin(name, valence, symmetry, dim, out).with_parity(parity_of(inputs)))
}

/// Like [`pointwise`], also handing over first partials of every input:
/// `jets[k][i][c] = ∂_i (input k)_c`.
pub fn differential<F>(
    name: &str,
    valence: Valence,
    symmetry: Symmetry,
    inputs: &[&TensorField],
    f: F,
) -> Result<TensorField>
where
    F: Fn(&[DScalar], &Arrays, &Jets) -> Result<Vec<DScalar>> + Send + Sync + 'static,
{
    let charts = common_charts(inputs)?;
    let dim = inputs[0].dim;
    let lens: Vec<usize> = inputs.iter().map(|t| t.len()).collect();
    let f = Arc::new(f);
    let mut out = Vec::new();
    for c in charts {
        let fns: Vec<ComponentFn> = inputs.iter().map(|t| t.component_fn(&c)).collect::<Result<_>>()?;
        let f = f.clone();
        let lens = lens.clone();
        let eval: ComponentFn = Arc::new(move |x: &[DScalar]| {
            let all = |y: &[DScalar]| -> Result<Vec<DScalar>> {
                let mut v = Vec::new();
                for g in &fns {
                    v.extend(g(y)?);
                }
                Ok(v)
            };
            let (val, d) = jet(all, x)?;
            let mut vals = Vec::with_capacity(lens.len());
            let mut jets = Vec::with_capacity(lens.len());
            let mut off = 0;
            for &l in &lens {
                vals.push(val[off..off + l].to_vec());
                jets.push(d.iter().map(|row| row[off..off + l].to_vec()).collect::<Vec<_>>());
                off += l;
            }
            f(x, &vals, &jets)
        });
        out.push((c, eval));
    }
    Ok(TensorField::builtin(name, valence, symmetry, dim, out).with_parity(parity_of(inputs)))
}

fn require(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(GeomError::Shape(what.to_string()))
    }
}

/// Exterior derivative of a covariant antisymmetric field (or a function):
/// `(dα)_{i₀…i_k} = Σ_j (−1)^j ∂_{i_j} α_{i₀…î_j…i_k}`.
pub fn exterior_derivative(alpha: &TensorField) -> Result<TensorField> {
    require(alpha.valence.contra == 0, "exterior derivative needs a covariant field")?;
    let k = alpha.valence.co;
    require(k < alpha.dim, "form degree must be below the dimension")?;
    let n = alpha.dim;
    differential(
        &format!("d{}", alpha.name),
        Valence::new(0, k + 1),
        if k == 0 { Symmetry::None } else { Symmetry::Antisymmetric },
        &[alpha],
        move |_, _, jets| {
            let d = &jets[0];
            let mut out = Vec::with_capacity(count(n, k + 1));
            for flat in 0..count(n, k + 1) {
                let idx = multi_index(n, k + 1, flat);
                let mut acc = DScalar::constant(0.0);
                for j in 0..=k {
                    let mut rest = idx.clone();
                    let i = rest.remove(j);
                    let term = d[i][flat_index(n, &rest)];
                    if j % 2 == 0 {
                        acc += term;
                    } else {
                        acc -= term;
                    }
                }
                out.push(acc);
            }
            Ok(out)
        },
    )
}

/// `i_X α`: contracts `X` into the first covariant slot.
pub fn interior(x: &TensorField, alpha: &TensorField) -> Result<TensorField> {
    require(x.valence == Valence::VECTOR, "interior product needs a vector field")?;
    require(alpha.valence.contra == 0 && alpha.valence.co >= 1, "interior product needs a form")?;
    let n = alpha.dim;
    let k = alpha.valence.co;
    let sym = if k >= 3 { alpha.symmetry } else { Symmetry::None };
    pointwise(
        &format!("i_{}{}", x.name, alpha.name),
        Valence::new(0, k - 1),
        sym,
        &[x, alpha],
        move |_, v| {
            let stride = count(n, k - 1);
            Ok((0..stride)
                .map(|r| (0..n).map(|i| v[0][i] * v[1][i * stride + r]).sum())
                .collect())
        },
    )
}

/// `[X, Y]^k = X^i ∂_i Y^k − Y^i ∂_i X^k`.
pub fn lie_bracket(x: &TensorField, y: &TensorField) -> Result<TensorField> {
    require(x.valence == Valence::VECTOR && y.valence == Valence::VECTOR, "bracket needs vector fields")?;
    let n = x.dim;
    differential(
        &format!("[{},{}]", x.name, y.name),
        Valence::VECTOR,
        Symmetry::None,
        &[x, y],
        move |_, v, d| {
            Ok((0..n)
                .map(|k| (0..n).map(|i| v[0][i] * d[1][i][k] - v[1][i] * d[0][i][k]).sum())
                .collect())
        },
    )
}

/// Lie derivative of any tensor field along `X`.
pub fn lie_derivative(t: &TensorField, x: &TensorField) -> Result<TensorField> {
    require(x.valence == Valence::VECTOR, "Lie derivative along a vector field")?;
    let n = t.dim;
    let val = t.valence;
    let rank = val.rank();
    differential(&format!("L_{}{}", x.name, t.name), val, t.symmetry, &[t, x], move |_, v, d| {
        let (tv, xv) = (&v[0], &v[1]);
        let (dt, dx) = (&d[0], &d[1]);
        let mut out: Vec<DScalar> =
            (0..tv.len()).map(|c| (0..n).map(|i| xv[i] * dt[i][c]).sum()).collect();
        // m_contra[a][i] = −∂_i X^a, m_co[b][i] = ∂_b X^i
        let m_contra: Vec<Vec<DScalar>> = (0..n).map(|a| (0..n).map(|i| -dx[i][a]).collect()).collect();
        let m_co: Vec<Vec<DScalar>> = (0..n).map(|b| (0..n).map(|i| dx[b][i]).collect()).collect();
        for slot in 0..rank {
            let m = if slot < val.contra { &m_contra } else { &m_co };
            let term = transform_slot(tv, n, rank, slot, m);
            for (o, t) in out.iter_mut().zip(term) {
                *o += t;
            }
        }
        Ok(out)
    })
}

/// Jacobian `df[i][b] = ∂F^i/∂x^b` from a jet table `d[b][i]`.
fn jacobian(d: &[Vec<DScalar>], rows: usize, cols: usize) -> Vec<Vec<DScalar>> {
    (0..rows).map(|i| (0..cols).map(|b| d[b][i]).collect()).collect()
}

/// Pulls a tensor back along `F`. Covariant slots use `dF`; contravariant
/// slots use `(dF)⁻¹`, so they need `F` to be a local diffeomorphism.
pub fn pullback(map: &SmoothMap, t: &TensorField) -> Result<TensorField> {
    let val = t.valence;
    if val.contra > 0 && map.source_dim != map.target_dim {
        return Err(GeomError::Shape("contravariant pullback needs equal dimensions".into()));
    }
    if t.dim != map.target_dim {
        return Err(GeomError::Shape(format!("field `{}` does not live on the target of `{}`", t.name, map.name)));
    }
    let (m, n) = (map.source_dim, map.target_dim);
    let rank = val.rank();
    let mut out = Vec::new();
    for src in map.source_charts() {
        let (tgt, fmap) = map.component_fn(&src)?;
        let tfn = t.component_fn(&tgt)?;
        let eval: ComponentFn = Arc::new(move |x: &[DScalar]| {
            let (y, d) = jet(|z: &[DScalar]| fmap(z), x)?;
            let df = jacobian(&d, n, m);
            let mut comps = tfn(&y)?;
            let inv = if val.contra > 0 {
                let a = DenseMatrix::from_rows(n, n, df.iter().flatten().copied().collect())?;
                let lu = LuDecomposition::new(&a)?;
                let inv = lu.solve_matrix(&DenseMatrix::identity(n))?;
                Some((0..n).map(|r| (0..n).map(|c| inv[(r, c)]).collect::<Vec<_>>()).collect::<Vec<_>>())
            } else {
                None
            };
            // covariant slots shrink n → m one at a time
            let mut dims: Vec<usize> = vec![n; rank];
            for slot in 0..rank {
                if slot < val.contra {
                    comps = transform_slot(&comps, n, rank, slot, inv.as_ref().expect("inverse"));
                } else {
                    comps = transform_mixed(&comps, &dims, slot, m, |b, j| df[j][b]);
                    dims[slot] = m;
                }
            }
            Ok(comps)
        });
        out.push((src, eval));
    }
    Ok(TensorField::builtin(&format!("{}*{}", map.name, t.name), val, t.symmetry, m, out).with_parity(t.parity))
}

/// Slot transform for arrays whose slots have different extents.
fn transform_mixed<M>(t: &[DScalar], dims: &[usize], slot: usize, new_dim: usize, m: M) -> Vec<DScalar>
where
    M: Fn(usize, usize) -> DScalar,
{
    let old = dims[slot];
    let inner: usize = dims[slot + 1..].iter().product();
    let outer: usize = dims[..slot].iter().product();
    let mut out = Vec::with_capacity(outer * new_dim * inner);
    for o in 0..outer {
        for b in 0..new_dim {
            for r in 0..inner {
                let mut acc = DScalar::constant(0.0);
                for j in 0..old {
                    acc += m(b, j) * t[(o * old + j) * inner + r];
                }
                out.push(acc);
            }
        }
    }
    out
}

/// Nijenhuis torsion of a (1,1) field on coordinate frames:
/// `N^k_ab = J^l_a ∂_l J^k_b − J^l_b ∂_l J^k_a − J^k_l (∂_a J^l_b − ∂_b J^l_a)`.
/// Both bracket forms (`+J²[X,Y]` and `−[X,Y]`) agree on coordinate frames.
pub fn nijenhuis(j: &TensorField) -> Result<TensorField> {
    require(j.valence == Valence::ENDO, "Nijenhuis torsion needs a (1,1) field")?;
    let n = j.dim;
    differential(&format!("N_{}", j.name), Valence::new(1, 2), Symmetry::Antisymmetric, &[j], move |_, v, d| {
        let (jv, dj) = (&v[0], &d[0]);
        let at = |k: usize, l: usize| jv[k * n + l];
        let dat = |i: usize, k: usize, l: usize| dj[i][k * n + l];
        let mut out = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let mut acc = DScalar::constant(0.0);
                    for l in 0..n {
                        acc += at(l, a) * dat(l, k, b) - at(l, b) * dat(l, k, a);
                        acc -= at(k, l) * (dat(a, l, b) - dat(b, l, a));
                    }
                    out.push(acc);
                }
            }
        }
        Ok(out)
    })
    .map(|f| f.with_parity(0))
}

/// Which bracket expression [`nijenhuis_on`] uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NijenhuisMode {
    /// `[JX,JY] − J([JX,Y] + [X,JY] − J[X,Y])`
    Torsion,
    /// `[JX,JY] − [X,Y] − J([JX,Y] + [X,JY])`
    Complex,
}

/// The bracket expression evaluated on arbitrary vector fields.
pub fn nijenhuis_on(j: &TensorField, x: &TensorField, y: &TensorField, mode: NijenhuisMode) -> Result<TensorField> {
    let jx = apply_endo(j, x)?;
    let jy = apply_endo(j, y)?;
    let a = lie_bracket(&jx, &jy)?;
    let b = lie_bracket(&jx, y)?;
    let c = lie_bracket(x, &jy)?;
    let xy = lie_bracket(x, y)?;
    let inner = add(&b, &c)?;
    let n = j.dim;
    match mode {
        NijenhuisMode::Torsion => {
            let jxy = apply_endo(j, &xy)?;
            pointwise("N(X,Y)", Valence::VECTOR, Symmetry::None, &[j, &a, &inner, &jxy], move |_, v| {
                Ok((0..n)
                    .map(|k| v[1][k] - (0..n).map(|l| v[0][k * n + l] * (v[2][l] - v[3][l])).sum::<DScalar>())
                    .collect())
            })
        }
        NijenhuisMode::Complex => {
            pointwise("N(X,Y)", Valence::VECTOR, Symmetry::None, &[j, &a, &inner, &xy], move |_, v| {
                Ok((0..n)
                    .map(|k| v[1][k] - v[3][k] - (0..n).map(|l| v[0][k * n + l] * v[2][l]).sum::<DScalar>())
                    .collect())
            })
        }
    }
}

/// `(b♭X)_j = b(e_j, X) = b_{ji} X^i`: contraction in the second slot.
pub fn flat(b: &TensorField, x: &TensorField) -> Result<TensorField> {
    require(b.valence == Valence::BILINEAR && x.valence == Valence::VECTOR, "flat needs a (0,2) field and a vector")?;
    let n = b.dim;
    pointwise(&format!("{}♭{}", b.name, x.name), Valence::FORM1, Symmetry::None, &[b, x], move |_, v| {
        Ok((0..n).map(|j| (0..n).map(|i| v[0][j * n + i] * v[1][i]).sum()).collect())
    })
}

/// `(JX)^k = J^k_l X^l`.
pub fn apply_endo(j: &TensorField, x: &TensorField) -> Result<TensorField> {
    require(j.valence == Valence::ENDO && x.valence == Valence::VECTOR, "endomorphism applied to a vector")?;
    let n = j.dim;
    pointwise(&format!("{}{}", j.name, x.name), Valence::VECTOR, Symmetry::None, &[j, x], move |_, v| {
        Ok((0..n).map(|k| (0..n).map(|l| v[0][k * n + l] * v[1][l]).sum()).collect())
    })
}

/// `A∘B` for (1,1) fields.
pub fn compose_endo(a: &TensorField, b: &TensorField) -> Result<TensorField> {
    require(a.valence == Valence::ENDO && b.valence == Valence::ENDO, "composition of (1,1) fields")?;
    let n = a.dim;
    pointwise(&format!("{}∘{}", a.name, b.name), Valence::ENDO, Symmetry::None, &[a, b], move |_, v| {
        Ok((0..n * n)
            .map(|f| {
                let (k, l) = (f / n, f % n);
                (0..n).map(|m| v[0][k * n + m] * v[1][m * n + l]).sum()
            })
            .collect())
    })
}

pub fn add(a: &TensorField, b: &TensorField) -> Result<TensorField> {
    linear_combination(&format!("{}+{}", a.name, b.name), &[(1.0, a), (1.0, b)])
}

pub fn sub(a: &TensorField, b: &TensorField) -> Result<TensorField> {
    linear_combination(&format!("{}-{}", a.name, b.name), &[(1.0, a), (-1.0, b)])
}

/// `Σ c_k T_k` with constant coefficients; the symmetry is kept when all
/// terms share it.
pub fn linear_combination(name: &str, terms: &[(f64, &TensorField)]) -> Result<TensorField> {
    let fields: Vec<&TensorField> = terms.iter().map(|(_, f)| *f).collect();
    let val = fields.first().map(|f| f.valence).ok_or_else(|| GeomError::Invalid("empty combination".into()))?;
    require(fields.iter().all(|f| f.valence == val), "combination of different valences")?;
    let sym = if fields.iter().all(|f| f.symmetry == fields[0].symmetry) { fields[0].symmetry } else { Symmetry::None };
    let coeffs: Vec<f64> = terms.iter().map(|(c, _)| *c).collect();
    let parity = fields[0].parity;
    pointwise(name, val, sym, &fields, move |_, v| {
        let mut out = vec![DScalar::constant(0.0); v[0].len()];
        for (c, arr) in coeffs.iter().zip(v) {
            for (o, t) in out.iter_mut().zip(arr) {
                *o += *t * *c;
            }
        }
        Ok(out)
    })
    .map(|f| f.with_parity(parity))
}

/// `f·T` for a scalar field `f`.
pub fn scale(f: &TensorField, t: &TensorField) -> Result<TensorField> {
    require(f.valence == Valence::SCALAR, "scale by a function")?;
    pointwise(&format!("{}{}", f.name, t.name), t.valence, t.symmetry, &[f, t], |_, v| {
        Ok(v[1].iter().map(|c| v[0][0] * *c).collect())
    })
}

/// Tensor product, slots of `a` first within each (contra, co) group.
pub fn tensor_product(a: &TensorField, b: &TensorField) -> Result<TensorField> {
    let n = a.dim;
    let (va, vb) = (a.valence, b.valence);
    let val = Valence::new(va.contra + vb.contra, va.co + vb.co);
    pointwise(&format!("{}⊗{}", a.name, b.name), val, Symmetry::None, &[a, b], move |_, v| {
        let rank = val.rank();
        Ok((0..count(n, rank))
            .map(|flat| {
                let idx = multi_index(n, rank, flat);
                let mut ia: Vec<usize> = idx[..va.contra].to_vec();
                let mut ib: Vec<usize> = idx[va.contra..val.contra].to_vec();
                ia.extend_from_slice(&idx[val.contra..val.contra + va.co]);
                ib.extend_from_slice(&idx[val.contra + va.co..]);
                v[0][flat_index(n, &ia)] * v[1][flat_index(n, &ib)]
            })
            .collect())
    })
}

/// Symmetric square `α⊗α` of a one-form.
pub fn square(alpha: &TensorField) -> Result<TensorField> {
    require(alpha.valence == Valence::FORM1, "square of a one-form")?;
    tensor_product(alpha, alpha).map(|f| f.with_symmetry(Symmetry::Symmetric).named(&format!("{}²", alpha.name)))
}

/// Full contraction of a covariant field with vectors, as a function.
pub fn evaluate_on(t: &TensorField, vectors: &[&TensorField]) -> Result<TensorField> {
    require(t.valence.contra == 0 && t.valence.co == vectors.len(), "one vector per covariant slot")?;
    let n = t.dim;
    let k = vectors.len();
    let mut inputs = vec![t];
    inputs.extend_from_slice(vectors);
    pointwise(&format!("{}(..)", t.name), Valence::SCALAR, Symmetry::None, &inputs, move |_, v| {
        let mut acc = DScalar::constant(0.0);
        for flat in 0..count(n, k) {
            let idx = multi_index(n, k, flat);
            let mut term = v[0][flat];
            for (s, &i) in idx.iter().enumerate() {
                term *= v[s + 1][i];
            }
            acc += term;
        }
        Ok(vec![acc])
    })
}

/// Re-expresses `t` on a space whose chart `total` contains the
/// coordinates of chart `base` at `positions`. Components along the new
/// directions are zero: horizontal lifts of vectors, pullbacks of forms
/// along the projection.
pub fn lift(t: &TensorField, dim: usize, positions: &[usize], charts: &[(String, String)]) -> Result<TensorField> {
    require(positions.len() == t.dim && positions.iter().all(|&p| p < dim), "lift positions")?;
    let rank = t.valence.rank();
    let small = t.dim;
    let positions = positions.to_vec();
    let mut out = Vec::new();
    for (total, base) in charts {
        let f = t.component_fn(base)?;
        let positions = positions.clone();
        let eval: ComponentFn = Arc::new(move |x: &[DScalar]| {
            let y: Vec<DScalar> = positions.iter().map(|&p| x[p]).collect();
            let c = f(&y)?;
            let mut o = vec![DScalar::constant(0.0); count(dim, rank)];
            for (flat, v) in c.into_iter().enumerate() {
                let idx: Vec<usize> = multi_index(small, rank, flat).into_iter().map(|i| positions[i]).collect();
                o[flat_index(dim, &idx)] = v;
            }
            Ok(o)
        });
        out.push((total.clone(), eval));
    }
    Ok(TensorField::builtin(&t.name, t.valence, t.symmetry, dim, out).with_parity(t.parity))
}
