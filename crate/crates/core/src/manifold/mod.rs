//! Charts, gluings and deterministic sampling.

mod atlas;
mod chart;
mod sampling;

pub use atlas::{Atlas, Piece, PieceSpec, Point, TransitionMap, TRANSITION_TOL};
pub use chart::{Band, Chart, Interval, DEFAULT_MARGIN};
pub use sampling::{sample_box, sample_chart, SamplePlan, Tolerances, DEFAULT_COUNT, DEFAULT_SEED};
