//! The component language: every chart map and corpus tensor component is
//! one of these expressions.

mod ast;
mod eval;
mod parser;

pub use ast::{Expr, Func};
pub use eval::{eval, eval_f64, Bound};
pub use parser::{parse, ParseError};

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::error::GeomError;
    use crate::numkernel::DScalar;

    fn at(text: &str, vars: &[(&str, f64)]) -> f64 {
        let env = vars.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        eval_f64(&parse(text).unwrap(), &env).unwrap()
    }

    #[test]
    fn pythagorean_identity() {
        for p in [-2.0, 0.0, 0.3, 1.7, 10.0] {
            assert!((at("sin(p)^2 + cos(p)^2", &[("p", p)]) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn product_weights() {
        assert_eq!(at("1/(t+1)", &[("t", 1.0)]), 0.5);
        assert_eq!(at("t/(t+1)", &[("t", 2.0)]), 2.0 / 3.0);
    }

    #[test]
    fn dual_tangent_through_eval() {
        let mut env = HashMap::new();
        env.insert("x".to_string(), DScalar::variable(3.0, 0).unwrap());
        let v = eval(&parse("x*x").unwrap(), &env).unwrap();
        assert_eq!((v.value(), v.tangent(0)), (9.0, 6.0));
    }

    #[test]
    fn sgn_is_locally_constant() {
        let mut env = HashMap::new();
        env.insert("s".to_string(), DScalar::variable(-1.5, 0).unwrap());
        let v = eval(&parse("sgn(s)").unwrap(), &env).unwrap();
        assert_eq!((v.value(), v.tangent(0)), (-1.0, 0.0));
    }

    #[test]
    fn pi_constant() {
        assert_eq!(at("pi", &[]), std::f64::consts::PI);
        // a coordinate named pi shadows the constant
        assert_eq!(at("pi", &[("pi", 2.0)]), 2.0);
    }

    #[test]
    fn unbound_and_domain_errors() {
        let e = parse("x + y").unwrap();
        let env = HashMap::from([("x".to_string(), 1.0)]);
        assert!(matches!(eval_f64(&e, &env), Err(GeomError::UnboundVariable(v)) if v == "y"));
        let env = HashMap::from([("x".to_string(), -1.0)]);
        assert!(matches!(eval_f64(&parse("log(x)").unwrap(), &env), Err(GeomError::Domain(_))));
        assert!(matches!(eval_f64(&parse("sqrt(x)").unwrap(), &env), Err(GeomError::Domain(_))));
        assert!(matches!(eval_f64(&parse("1/(x+1)").unwrap(), &env), Err(GeomError::Domain(_))));
    }

    #[test]
    fn bound_matches_named_eval() {
        let e = parse("a*x^2 - sin(y)/(1 + x^2)").unwrap();
        let names = vec!["x".to_string(), "y".to_string()];
        let params = HashMap::from([("a".to_string(), 0.7)]);
        let b = Bound::new(&e, &names, &params).unwrap();
        let got = b.eval(&[DScalar::constant(1.3), DScalar::constant(-0.4)]).unwrap();
        let want = at("a*x^2 - sin(y)/(1 + x^2)", &[("a", 0.7), ("x", 1.3), ("y", -0.4)]);
        assert_eq!(got.value(), want);
    }
}
