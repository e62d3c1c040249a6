//! Truncated hyper-dual scalar.
//!
//! A `DScalar` carries coefficients indexed by subsets of up to
//! [`MAX_SLOTS`] nilpotent perturbations `ε_k` with `ε_k² = 0`. Seeding one
//! slot gives first derivatives; seeding a second slot on top of an already
//! perturbed value gives mixed second derivatives, and so on. Slots are
//! allocated in order: a derived quantity that needs a fresh direction takes
//! the first slot above every input's width.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::error::{GeomError, Result};

/// Maximum nesting depth.
pub const MAX_SLOTS: usize = 4;
const N: usize = 1 << MAX_SLOTS;

#[derive(Clone, Copy)]
pub struct DScalar {
    width: u8,
    c: [f64; N],
}

impl Default for DScalar {
    fn default() -> Self {
        DScalar::constant(0.0)
    }
}

impl fmt::Debug for DScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let len = 1usize << self.width;
        f.debug_struct("DScalar")
            .field("width", &self.width)
            .field("coeffs", &&self.c[..len])
            .finish()
    }
}

impl PartialEq for DScalar {
    fn eq(&self, other: &Self) -> bool {
        let len = 1usize << self.width.max(other.width);
        self.c[..len] == other.c[..len]
    }
}

impl From<f64> for DScalar {
    fn from(v: f64) -> Self {
        DScalar::constant(v)
    }
}

impl DScalar {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = v;
        DScalar { width: 0, c }
    }

    /// `v + ε_slot`.
    pub fn variable(v: f64, slot: usize) -> Result<Self> {
        let mut x = DScalar::constant(v);
        x.perturb(slot, 1.0)?;
        Ok(x)
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Number of slots in use.
    pub fn width(&self) -> usize {
        self.width as usize
    }

    /// Coefficient of the monomial given by the subset bitmask.
    pub fn coeff(&self, mask: usize) -> f64 {
        if mask < N {
            self.c[mask]
        } else {
            0.0
        }
    }

    /// First-order tangent along `slot` (the coefficient of `ε_slot`).
    pub fn tangent(&self, slot: usize) -> f64 {
        self.coeff(1 << slot)
    }

    /// Adds `t·ε_slot`, widening as needed.
    pub fn perturb(&mut self, slot: usize, t: f64) -> Result<()> {
        if slot >= MAX_SLOTS {
            return Err(GeomError::DepthExceeded(MAX_SLOTS));
        }
        if slot as u8 >= self.width {
            self.width = slot as u8 + 1;
        }
        self.c[1 << slot] += t;
        Ok(())
    }

    /// Coefficient of `ε_slot` as a scalar in the remaining slots.
    pub fn part(&self, slot: usize) -> DScalar {
        let bit = 1usize << slot;
        let mut out = DScalar::constant(0.0);
        if slot >= self.width as usize {
            return out;
        }
        let len = 1usize << self.width;
        for s in 0..len {
            if s & bit != 0 {
                out.c[s & !bit] = self.c[s];
            }
        }
        out.width = self.width;
        out.shrink();
        out
    }

    /// The value with every term involving `ε_slot` removed.
    pub fn drop_slot(&self, slot: usize) -> DScalar {
        let bit = 1usize << slot;
        let mut out = *self;
        if slot >= self.width as usize {
            return out;
        }
        let len = 1usize << self.width;
        for s in 0..len {
            if s & bit != 0 {
                out.c[s] = 0.0;
            }
        }
        out.shrink();
        out
    }

    fn shrink(&mut self) {
        while self.width > 0 {
            let top = 1usize << (self.width - 1);
            let len = 1usize << self.width;
            if self.c[top..len].iter().all(|&v| v == 0.0) {
                self.width -= 1;
            } else {
                break;
            }
        }
    }

    fn nilpotent(&self) -> DScalar {
        let mut n = *self;
        n.c[0] = 0.0;
        n
    }

    /// Applies a scalar function given its derivatives `d[m] = f⁽ᵐ⁾(a₀)`,
    /// `m = 0..=width`. The constant term is `d[0]` unchanged.
    fn apply(&self, d: &[f64]) -> DScalar {
        let w = self.width as usize;
        let mut out = DScalar::constant(d[0]);
        if w == 0 {
            return out;
        }
        out.width = self.width;
        let n = self.nilpotent();
        let mut pow = n;
        let mut fact = 1.0;
        for (m, dm) in d.iter().enumerate().take(w + 1).skip(1) {
            fact *= m as f64;
            let k = dm / fact;
            if k != 0.0 {
                let len = 1usize << w;
                for s in 1..len {
                    out.c[s] += k * pow.c[s];
                }
            }
            if m < w {
                pow = pow * n;
            }
        }
        out
    }

    pub fn sin(&self) -> DScalar {
        let a = self.c[0];
        let (s, c) = (a.sin(), a.cos());
        self.apply(&[s, c, -s, -c, s])
    }

    pub fn cos(&self) -> DScalar {
        let a = self.c[0];
        let (s, c) = (a.sin(), a.cos());
        self.apply(&[c, -s, -c, s, c])
    }

    pub fn exp(&self) -> DScalar {
        let e = self.c[0].exp();
        self.apply(&[e; MAX_SLOTS + 1])
    }

    pub fn ln(&self) -> Result<DScalar> {
        let a = self.c[0];
        if !(a > 0.0) {
            return Err(GeomError::Domain(format!("log of non-positive value {a}")));
        }
        let mut d = [a.ln(), 0.0, 0.0, 0.0, 0.0];
        let mut term = 1.0 / a;
        for (m, slot) in d.iter_mut().enumerate().skip(1) {
            *slot = term;
            term *= -(m as f64) / a;
        }
        Ok(self.apply(&d))
    }

    pub fn sqrt(&self) -> Result<DScalar> {
        let a = self.c[0];
        if a < 0.0 || (a == 0.0 && self.width > 0) {
            return Err(GeomError::Domain(format!("sqrt of {a}")));
        }
        let r = a.sqrt();
        let mut d = [r, 0.0, 0.0, 0.0, 0.0];
        // d[m] = (1/2)(1/2 - 1)...(1/2 - m + 1) a^{1/2 - m}
        if self.width > 0 {
            let mut c = 1.0;
            let mut e = 0.5;
            for slot in d.iter_mut().skip(1) {
                c *= e;
                e -= 1.0;
                *slot = c * a.powf(e);
            }
        }
        Ok(self.apply(&d))
    }

    pub fn abs(&self) -> Result<DScalar> {
        let a = self.c[0];
        if a == 0.0 && self.width > 0 {
            return Err(GeomError::Domain("abs differentiated at 0".into()));
        }
        let s = if a < 0.0 { -1.0 } else { 1.0 };
        Ok(self.apply(&[a.abs(), s, 0.0, 0.0, 0.0]))
    }

    pub fn sgn(&self) -> Result<DScalar> {
        let a = self.c[0];
        if a == 0.0 && self.width > 0 {
            return Err(GeomError::Domain("sgn differentiated at 0".into()));
        }
        let s = if a > 0.0 {
            1.0
        } else if a < 0.0 {
            -1.0
        } else {
            0.0
        };
        Ok(DScalar::constant(s))
    }

    pub fn powi(&self, k: i32) -> Result<DScalar> {
        let a = self.c[0];
        if k < 0 && a == 0.0 {
            return Err(GeomError::Domain("negative power of zero".into()));
        }
        let mut d = [a.powi(k), 0.0, 0.0, 0.0, 0.0];
        if self.width > 0 {
            let mut c = 1.0;
            for (m, slot) in d.iter_mut().enumerate().skip(1) {
                c *= (k - m as i32 + 1) as f64;
                *slot = if c == 0.0 { 0.0 } else { c * a.powi(k - m as i32) };
            }
        }
        Ok(self.apply(&d))
    }

    pub fn recip(&self) -> Result<DScalar> {
        DScalar::constant(1.0).checked_div(self)
    }

    /// Division that reports a zero divisor.
    pub fn checked_div(&self, b: &DScalar) -> Result<DScalar> {
        if b.c[0] == 0.0 {
            return Err(GeomError::Domain("division by zero".into()));
        }
        Ok(div_raw(self, b))
    }

    pub fn is_finite(&self) -> bool {
        let len = 1usize << self.width;
        self.c[..len].iter().all(|v| v.is_finite())
    }
}

fn div_raw(a: &DScalar, b: &DScalar) -> DScalar {
    let w = a.width.max(b.width);
    let len = 1usize << w;
    let mut q = DScalar::constant(a.c[0] / b.c[0]);
    q.width = w;
    let b0 = b.c[0];
    for s in 1..len {
        // q[S] b0 + sum_{A ⊊ S} q[A] b[S \ A] = a[S]
        let mut acc = a.c[s];
        let mut sub = (s - 1) & s;
        loop {
            acc -= q.c[sub] * b.c[s & !sub];
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & s;
        }
        q.c[s] = acc / b0;
    }
    q
}

impl Add for DScalar {
    type Output = DScalar;
    fn add(self, rhs: DScalar) -> DScalar {
        let w = self.width.max(rhs.width);
        let len = 1usize << w;
        let mut out = self;
        out.width = w;
        for s in 0..len {
            out.c[s] = self.c[s] + rhs.c[s];
        }
        out
    }
}

impl Sub for DScalar {
    type Output = DScalar;
    fn sub(self, rhs: DScalar) -> DScalar {
        let w = self.width.max(rhs.width);
        let len = 1usize << w;
        let mut out = self;
        out.width = w;
        for s in 0..len {
            out.c[s] = self.c[s] - rhs.c[s];
        }
        out
    }
}

impl Mul for DScalar {
    type Output = DScalar;
    fn mul(self, rhs: DScalar) -> DScalar {
        let w = self.width.max(rhs.width);
        if w == 0 {
            return DScalar::constant(self.c[0] * rhs.c[0]);
        }
        let len = 1usize << w;
        let mut out = DScalar::constant(self.c[0] * rhs.c[0]);
        out.width = w;
        for s in 1..len {
            let mut acc = 0.0;
            let mut sub = s;
            loop {
                acc += self.c[sub] * rhs.c[s & !sub];
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & s;
            }
            out.c[s] = acc;
        }
        out
    }
}

impl Div for DScalar {
    type Output = DScalar;
    /// Unchecked division; a zero divisor yields non-finite coefficients.
    fn div(self, rhs: DScalar) -> DScalar {
        div_raw(&self, &rhs)
    }
}

impl Neg for DScalar {
    type Output = DScalar;
    fn neg(self) -> DScalar {
        let mut out = self;
        let len = 1usize << self.width;
        for s in 0..len {
            out.c[s] = -self.c[s];
        }
        out
    }
}

impl Add<f64> for DScalar {
    type Output = DScalar;
    fn add(self, rhs: f64) -> DScalar {
        let mut out = self;
        out.c[0] += rhs;
        out
    }
}

impl Sub<f64> for DScalar {
    type Output = DScalar;
    fn sub(self, rhs: f64) -> DScalar {
        let mut out = self;
        out.c[0] -= rhs;
        out
    }
}

impl Mul<f64> for DScalar {
    type Output = DScalar;
    fn mul(self, rhs: f64) -> DScalar {
        let mut out = self;
        let len = 1usize << self.width;
        for s in 0..len {
            out.c[s] *= rhs;
        }
        out
    }
}

impl Div<f64> for DScalar {
    type Output = DScalar;
    fn div(self, rhs: f64) -> DScalar {
        let mut out = self;
        let len = 1usize << self.width;
        for s in 0..len {
            out.c[s] /= rhs;
        }
        out
    }
}

impl Mul<DScalar> for f64 {
    type Output = DScalar;
    fn mul(self, rhs: DScalar) -> DScalar {
        rhs * self
    }
}

impl AddAssign for DScalar {
    fn add_assign(&mut self, rhs: DScalar) {
        *self = *self + rhs;
    }
}

impl SubAssign for DScalar {
    fn sub_assign(&mut self, rhs: DScalar) {
        *self = *self - rhs;
    }
}

impl MulAssign for DScalar {
    fn mul_assign(&mut self, rhs: DScalar) {
        *self = *self * rhs;
    }
}

impl std::iter::Sum for DScalar {
    fn sum<I: Iterator<Item = DScalar>>(iter: I) -> DScalar {
        iter.fold(DScalar::constant(0.0), |a, b| a + b)
    }
}

/// Smallest slot not used by any of `xs`.
pub fn fresh_slot(xs: &[DScalar]) -> usize {
    xs.iter().map(|x| x.width()).max().unwrap_or(0)
}

pub fn constants(xs: &[f64]) -> Vec<DScalar> {
    xs.iter().map(|&v| DScalar::constant(v)).collect()
}

pub fn values(xs: &[DScalar]) -> Vec<f64> {
    xs.iter().map(|x| x.value()).collect()
}
