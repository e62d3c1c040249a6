//! Differentiable scalars and the dense linear algebra built on them.

mod dscalar;
mod linalg;

pub use dscalar::{constants, fresh_slot, values, DScalar, MAX_SLOTS};
pub use linalg::{
    pfaffian, solve_linear, solve_linear_f64, DenseMatrix, LuDecomposition, CONDITION_WARNING,
    PIVOT_THRESHOLD,
};

use crate::error::Result;

/// Directional derivative of a scalar function at `x` along `v`, from one
/// dual evaluation.
pub fn directional_derivative<F>(f: F, x: &[f64], v: &[f64]) -> Result<f64>
where
    F: Fn(&[DScalar]) -> Result<DScalar>,
{
    let pt: Vec<DScalar> = x
        .iter()
        .zip(v)
        .map(|(&xi, &vi)| {
            let mut d = DScalar::constant(xi);
            d.perturb(0, vi)?;
            Ok(d)
        })
        .collect::<Result<_>>()?;
    Ok(f(&pt)?.tangent(0))
}

/// Central finite difference, kept as an independent oracle.
pub fn finite_difference<F>(f: F, x: &[f64], v: &[f64], h: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let plus: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + h * b).collect();
    let minus: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - h * b).collect();
    Ok((f(&plus)? - f(&minus)?) / (2.0 * h))
}

/// Value and all first partials of a vector-valued map.
///
/// Returns `(f(x), d)` with `d[i][c] = ∂f_c/∂x^i`. The derivative direction
/// uses a fresh slot, so `x` may already carry perturbations.
pub fn jet<F>(f: F, x: &[DScalar]) -> Result<(Vec<DScalar>, Vec<Vec<DScalar>>)>
where
    F: Fn(&[DScalar]) -> Result<Vec<DScalar>>,
{
    let slot = fresh_slot(x);
    let mut value = None;
    let mut d = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let mut xp = x.to_vec();
        xp[i].perturb(slot, 1.0)?;
        let y = f(&xp)?;
        if value.is_none() {
            value = Some(y.iter().map(|v| v.drop_slot(slot)).collect());
        }
        d.push(y.iter().map(|v| v.part(slot)).collect());
    }
    let value = match value {
        Some(v) => v,
        None => f(x)?,
    };
    Ok((value, d))
}
