use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::chart::{Chart, Interval};
use crate::error::Result;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_COUNT: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub abs: f64,
    /// For checks that go through a linear solve.
    pub inversion: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { abs: 1e-8, inversion: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplePlan {
    pub seed: u64,
    pub count: usize,
    pub tol: Tolerances,
}

impl Default for SamplePlan {
    fn default() -> Self {
        SamplePlan { seed: DEFAULT_SEED, count: DEFAULT_COUNT, tol: Tolerances::default() }
    }
}

impl SamplePlan {
    pub fn new(seed: u64, count: usize) -> Self {
        SamplePlan { seed, count, tol: Tolerances::default() }
    }

    /// Independent generator per purpose label (FNV-1a of the label picks
    /// the ChaCha stream), so adding a chart never shifts another chart's
    /// points.
    pub fn rng(&self, label: &str) -> ChaCha8Rng {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(h);
        rng
    }
}

/// Uniform draw from a union of disjoint segments.
fn draw(rng: &mut ChaCha8Rng, segs: &[Interval]) -> f64 {
    let total: f64 = segs.iter().map(Interval::len).sum();
    let mut u = rng.gen::<f64>() * total;
    for s in segs {
        if u <= s.len() {
            return s.lo + u;
        }
        u -= s.len();
    }
    segs.last().map_or(0.0, |s| s.hi)
}

/// `count` points of the chart's effective domain, optionally clipped to a
/// sub-box. `label` selects the random stream.
pub fn sample_box(
    chart: &Chart,
    clip: Option<&[Interval]>,
    plan: &SamplePlan,
    label: &str,
) -> Result<Vec<Vec<f64>>> {
    let segs = chart.segments(clip)?;
    let mut rng = plan.rng(label);
    Ok((0..plan.count).map(|_| segs.iter().map(|s| draw(&mut rng, s)).collect()).collect())
}

pub fn sample_chart(chart: &Chart, plan: &SamplePlan) -> Result<Vec<Vec<f64>>> {
    sample_box(chart, None, plan, &chart.name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn darboux_box_membership() {
        let c = Chart::new("R3", &["x", "p", "z"], &[(-1.0, 1.0); 3]).unwrap();
        let pts = sample_chart(&c, &SamplePlan::new(42, 4)).unwrap();
        assert_eq!(pts.len(), 4);
        for p in pts {
            assert!(p.iter().all(|v| (-0.95..=0.95).contains(v)));
        }
    }

    #[test]
    fn exclusion_respected() {
        let c = Chart::new("cone", &["x", "s"], &[(-1.0, 1.0), (-2.0, 2.0)])
            .unwrap()
            .exclude("s", -0.5, 0.5)
            .unwrap();
        let pts = sample_chart(&c, &SamplePlan::new(1, 500)).unwrap();
        assert!(pts.iter().all(|p| p[1].abs() >= 0.5));
        assert!(pts.iter().any(|p| p[1] < 0.0) && pts.iter().any(|p| p[1] > 0.0));
    }

    #[test]
    fn deterministic_in_seed() {
        let c = Chart::new("c", &["a", "b"], &[(0.0, 1.0); 2]).unwrap();
        let a = sample_chart(&c, &SamplePlan::new(9, 16)).unwrap();
        let b = sample_chart(&c, &SamplePlan::new(9, 16)).unwrap();
        let d = sample_chart(&c, &SamplePlan::new(10, 16)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d);
    }
}
