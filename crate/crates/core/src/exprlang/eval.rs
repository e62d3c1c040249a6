use std::collections::HashMap;
use std::f64::consts::PI;

use super::ast::{Expr, Func};
use crate::error::{GeomError, Result};
use crate::numkernel::DScalar;

fn apply(f: Func, x: DScalar) -> Result<DScalar> {
    match f {
        Func::Sin => Ok(x.sin()),
        Func::Cos => Ok(x.cos()),
        Func::Exp => Ok(x.exp()),
        Func::Log => x.ln(),
        Func::Sqrt => x.sqrt(),
        Func::Abs => x.abs(),
        Func::Sgn => x.sgn(),
    }
}

/// Evaluates against a name map. `pi` is π unless bound in `env`.
pub fn eval(e: &Expr, env: &HashMap<String, DScalar>) -> Result<DScalar> {
    match e {
        Expr::Num(v) => Ok(DScalar::constant(*v)),
        Expr::Var(name) => match env.get(name) {
            Some(v) => Ok(*v),
            None if name == "pi" => Ok(DScalar::constant(PI)),
            None => Err(GeomError::UnboundVariable(name.clone())),
        },
        Expr::Neg(a) => Ok(-eval(a, env)?),
        Expr::Add(a, b) => Ok(eval(a, env)? + eval(b, env)?),
        Expr::Sub(a, b) => Ok(eval(a, env)? - eval(b, env)?),
        Expr::Mul(a, b) => Ok(eval(a, env)? * eval(b, env)?),
        Expr::Div(a, b) => eval(a, env)?.checked_div(&eval(b, env)?),
        Expr::Pow(a, k) => eval(a, env)?.powi(*k),
        Expr::Call(f, a) => apply(*f, eval(a, env)?),
    }
}

/// Plain-real evaluation, for oracles and tests.
pub fn eval_f64(e: &Expr, env: &HashMap<String, f64>) -> Result<f64> {
    let env: HashMap<String, DScalar> =
        env.iter().map(|(k, v)| (k.clone(), DScalar::constant(*v))).collect();
    Ok(eval(e, &env)?.value())
}

/// An expression with variables resolved to positions in a coordinate list.
#[derive(Clone, Debug, PartialEq)]
pub enum Bound {
    Const(f64),
    Slot(usize),
    Neg(Box<Bound>),
    Add(Box<Bound>, Box<Bound>),
    Sub(Box<Bound>, Box<Bound>),
    Mul(Box<Bound>, Box<Bound>),
    Div(Box<Bound>, Box<Bound>),
    Pow(Box<Bound>, i32),
    Call(Func, Box<Bound>),
}

impl Bound {
    /// Resolves every variable against `names` (positions) or `params`
    /// (constants). `pi` falls back to π.
    pub fn new(e: &Expr, names: &[String], params: &HashMap<String, f64>) -> Result<Bound> {
        let b = |x: &Expr| Bound::new(x, names, params).map(Box::new);
        Ok(match e {
            Expr::Num(v) => Bound::Const(*v),
            Expr::Var(name) => {
                if let Some(i) = names.iter().position(|n| n == name) {
                    Bound::Slot(i)
                } else if let Some(v) = params.get(name) {
                    Bound::Const(*v)
                } else if name == "pi" {
                    Bound::Const(PI)
                } else {
                    return Err(GeomError::UnboundVariable(name.clone()));
                }
            }
            Expr::Neg(a) => Bound::Neg(b(a)?),
            Expr::Add(x, y) => Bound::Add(b(x)?, b(y)?),
            Expr::Sub(x, y) => Bound::Sub(b(x)?, b(y)?),
            Expr::Mul(x, y) => Bound::Mul(b(x)?, b(y)?),
            Expr::Div(x, y) => Bound::Div(b(x)?, b(y)?),
            Expr::Pow(a, k) => Bound::Pow(b(a)?, *k),
            Expr::Call(f, a) => Bound::Call(*f, b(a)?),
        })
    }

    pub fn eval(&self, x: &[DScalar]) -> Result<DScalar> {
        match self {
            Bound::Const(v) => Ok(DScalar::constant(*v)),
            Bound::Slot(i) => x.get(*i).copied().ok_or_else(|| {
                GeomError::Shape(format!("coordinate {i} out of {} supplied", x.len()))
            }),
            Bound::Neg(a) => Ok(-a.eval(x)?),
            Bound::Add(a, b) => Ok(a.eval(x)? + b.eval(x)?),
            Bound::Sub(a, b) => Ok(a.eval(x)? - b.eval(x)?),
            Bound::Mul(a, b) => Ok(a.eval(x)? * b.eval(x)?),
            Bound::Div(a, b) => a.eval(x)?.checked_div(&b.eval(x)?),
            Bound::Pow(a, k) => a.eval(x)?.powi(*k),
            Bound::Call(f, a) => apply(*f, a.eval(x)?),
        }
    }

    /// True when the expression does not reference any coordinate.
    pub fn is_constant(&self) -> bool {
        match self {
            Bound::Const(_) => true,
            Bound::Slot(_) => false,
            Bound::Neg(a) | Bound::Pow(a, _) | Bound::Call(_, a) => a.is_constant(),
            Bound::Add(a, b) | Bound::Sub(a, b) | Bound::Mul(a, b) | Bound::Div(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }
}
