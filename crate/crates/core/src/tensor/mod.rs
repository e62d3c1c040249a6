//! Tensor fields as per-chart component functions, and the calculus on
//! them. Every derived field is itself a [`TensorField`] whose closures
//! share their inputs, so derived quantities compose and can be
//! differentiated again.

mod consistency;
mod field;
mod identities;
pub mod index;
mod ops;

pub use consistency::cross_chart_consistency;
pub use field::{ComponentFn, SmoothMap, Symmetry, TensorField, Valence};
pub use identities::{contraction, identity_check};
pub use ops::{
    add, apply_endo, compose_endo, differential, evaluate_on, exterior_derivative, flat, interior, lie_bracket,
    lie_derivative, lift, linear_combination, nijenhuis, nijenhuis_on, pointwise, pullback, scale, square, sub,
    tensor_product, NijenhuisMode,
};
