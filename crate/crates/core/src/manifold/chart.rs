use crate::error::{GeomError, Result};

pub const DEFAULT_MARGIN: f64 = 0.05;

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn len(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn shrink(&self, m: f64) -> Interval {
        Interval::new(self.lo + m, self.hi - m)
    }

    pub fn intersect(&self, o: &Interval) -> Interval {
        Interval::new(self.lo.max(o.lo), self.hi.min(o.hi))
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Distance from `x` to the interval (0 inside).
    pub fn distance(&self, x: f64) -> f64 {
        (self.lo - x).max(x - self.hi).max(0.0)
    }
}

/// An excluded open band `lo < x[coord] < hi`.
#[derive(Clone, Debug, PartialEq)]
pub struct Band {
    pub coord: usize,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub name: String,
    pub coords: Vec<String>,
    pub domain: Vec<Interval>,
    pub exclusions: Vec<Band>,
    pub margin: f64,
}

impl Chart {
    pub fn new(name: &str, coords: &[&str], domain: &[(f64, f64)]) -> Result<Chart> {
        if coords.len() != domain.len() {
            return Err(GeomError::Shape(format!(
                "chart `{name}`: {} coordinates but {} intervals",
                coords.len(),
                domain.len()
            )));
        }
        for (i, c) in coords.iter().enumerate() {
            if coords[..i].contains(c) {
                return Err(GeomError::Invalid(format!("chart `{name}`: repeated coordinate `{c}`")));
            }
        }
        Ok(Chart {
            name: name.to_string(),
            coords: coords.iter().map(|c| c.to_string()).collect(),
            domain: domain.iter().map(|&(a, b)| Interval::new(a, b)).collect(),
            exclusions: Vec::new(),
            margin: DEFAULT_MARGIN,
        })
    }

    /// Removes the open band `lo < coord < hi` from the sampling domain.
    pub fn exclude(mut self, coord: &str, lo: f64, hi: f64) -> Result<Chart> {
        let i = self.index(coord)?;
        self.exclusions.push(Band { coord: i, lo, hi });
        Ok(self)
    }

    pub fn with_margin(mut self, margin: f64) -> Chart {
        self.margin = margin;
        self
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn index(&self, coord: &str) -> Result<usize> {
        self.coords
            .iter()
            .position(|c| c == coord)
            .ok_or_else(|| GeomError::Invalid(format!("chart `{}` has no coordinate `{coord}`", self.name)))
    }

    /// Inside the domain box and outside every excluded band.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && self.domain.iter().zip(x).all(|(iv, &v)| iv.contains(v))
            && self.exclusions.iter().all(|b| !(b.lo < x[b.coord] && x[b.coord] < b.hi))
    }

    /// How far `x` lies outside the domain (0 when contained).
    pub fn distance(&self, x: &[f64]) -> f64 {
        let mut d = self.domain.iter().zip(x).map(|(iv, &v)| iv.distance(v)).fold(0.0, f64::max);
        for b in &self.exclusions {
            let v = x[b.coord];
            if b.lo < v && v < b.hi {
                d = d.max((v - b.lo).min(b.hi - v));
            }
        }
        d
    }

    /// Per-coordinate segments the sampler draws from: the box shrunk by the
    /// margin, clipped to `clip` if given, minus the excluded bands.
    pub fn segments(&self, clip: Option<&[Interval]>) -> Result<Vec<Vec<Interval>>> {
        let mut out = Vec::with_capacity(self.dim());
        for (i, iv) in self.domain.iter().enumerate() {
            let mut base = iv.shrink(self.margin);
            if let Some(c) = clip {
                base = base.intersect(&c[i].shrink(self.margin));
            }
            let mut segs = vec![base];
            for b in self.exclusions.iter().filter(|b| b.coord == i) {
                segs = segs
                    .into_iter()
                    .flat_map(|s| {
                        [Interval::new(s.lo, s.hi.min(b.lo)), Interval::new(s.lo.max(b.hi), s.hi)]
                    })
                    .filter(|s| !s.is_empty())
                    .collect();
            }
            segs.retain(|s| !s.is_empty());
            if segs.is_empty() {
                return Err(GeomError::EmptyDomain(self.name.clone()));
            }
            out.push(segs);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_splits_segment() {
        let c = Chart::new("cone", &["x", "s"], &[(-1.0, 1.0), (-2.0, 2.0)])
            .unwrap()
            .exclude("s", -0.5, 0.5)
            .unwrap();
        let segs = c.segments(None).unwrap();
        assert_eq!(segs[0], vec![Interval::new(-0.95, 0.95)]);
        assert_eq!(segs[1], vec![Interval::new(-1.95, -0.5), Interval::new(0.5, 1.95)]);
        assert!(!c.contains(&[0.0, 0.1]));
        assert!(c.contains(&[0.0, 0.6]));
    }

    #[test]
    fn empty_after_exclusion() {
        let c = Chart::new("c", &["s"], &[(0.0, 1.0)]).unwrap().exclude("s", -1.0, 2.0).unwrap();
        assert!(matches!(c.segments(None), Err(GeomError::EmptyDomain(_))));
    }

    #[test]
    fn clip_to_piece() {
        let c = Chart::new("O", &["x", "t"], &[(0.0, 1.0), (-1.0, 1.0)]).unwrap();
        let piece = [Interval::new(0.5, 1.0), Interval::new(-1.0, 1.0)];
        let segs = c.segments(Some(&piece)).unwrap();
        assert!((segs[0][0].lo - 0.55).abs() < 1e-15);
        assert!((segs[0][0].hi - 0.95).abs() < 1e-15);
    }
}
