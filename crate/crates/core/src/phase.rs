//! Points on the unit circle, stored as a fraction of a full turn.
//!
//! A point `z = e^{2πiθ}` is kept as `θ ∈ [0, 1)` in double-double form
//! (`hi + lo`), so that powers `z^m` can be evaluated as `e^{2πi·frac(mθ)}`
//! with the fractional part accumulated in roughly 106 bits. Repeated complex
//! multiplication loses all phase accuracy once `m` reaches the size of tower
//! heights and partial sums (1e10 and beyond); this representation does not.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Modulus tolerance accepted by [`Phase::from_complex`].
pub const UNIT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Exact fractional part of `m * x` as an unevaluated pair, `m` an integer-valued float.
#[inline]
fn frac_product(m: f64, x: f64) -> f64 {
    let p = m * x;
    let e = m.mul_add(x, -p);
    (p - p.floor()) + (e - e.floor())
}

#[inline]
fn wrap(t: f64) -> f64 {
    let f = t - t.floor();
    // t slightly below an integer can round up to exactly 1.0
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

impl Phase {
    /// The point `z = 1`.
    pub const ONE: Phase = Phase { hi: 0.0, lo: 0.0 };

    fn normalized(hi: f64, lo: f64) -> Phase {
        let (mut s, mut e) = two_sum(hi, lo);
        let f = s.floor();
        s -= f;
        if s + e < 0.0 {
            (s, e) = two_sum(s + 1.0, e);
        } else if s + e >= 1.0 {
            (s, e) = two_sum(s - 1.0, e);
        }
        if !(0.0..1.0).contains(&s) {
            s = wrap(s);
            e = 0.0;
        }
        Phase { hi: s, lo: e }
    }

    /// Treats `t` as an exact real number of turns.
    pub fn from_turns(t: f64) -> Phase {
        Phase::normalized(t, 0.0)
    }

    /// `e^{2πi p/q}`, accurate to double-double precision.
    pub fn from_ratio(p: i64, q: u64) -> Result<Phase> {
        if q == 0 {
            return Err(Error::InvalidArgument("ratio with zero denominator".into()));
        }
        let q_i = q as i128;
        let p = (p as i128).rem_euclid(q_i);
        let qf = q as f64;
        let hi = p as f64 / qf;
        // remainder p - hi*q is exact through fma for q, p < 2^53
        let rem = -(hi.mul_add(qf, -(p as f64)));
        Ok(Phase::normalized(hi, rem / qf))
    }

    /// A primitive-or-not `q`-th root of unity `e^{2πi j/q}`.
    pub fn root_of_unity(j: u64, q: u64) -> Result<Phase> {
        Phase::from_ratio(j as i64, q)
    }

    /// Fractional part of `sqrt(d)`, a quadratic irrational for non-square `d`.
    pub fn sqrt_fraction(d: u64) -> Phase {
        let df = d as f64;
        let s = df.sqrt();
        // one Newton correction: s + (d - s^2) / (2s)
        let lo = -(s.mul_add(s, -df)) / (2.0 * s);
        Phase::normalized(s, lo)
    }

    /// `(sqrt(5) - 1) / 2`, the fractional part of the golden ratio.
    pub fn golden() -> Phase {
        let r5 = Phase::sqrt_fraction(5);
        // frac(sqrt 5) = sqrt5 - 2; (sqrt5 - 1)/2 = (frac + 1)/2
        Phase::normalized((r5.hi + 1.0) / 2.0, r5.lo / 2.0)
    }

    pub fn from_complex(z: Complex64) -> Result<Phase> {
        let modulus = z.norm();
        if !modulus.is_finite() || (modulus - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::NotUnitModulus { re: z.re, im: z.im, modulus });
        }
        Ok(Phase::from_turns(z.im.atan2(z.re) / TAU))
    }

    /// Angle in turns, in `[0, 1)`.
    pub fn turns(&self) -> f64 {
        wrap(self.hi + self.lo)
    }

    /// Angle in turns, in `[-1/2, 1/2)`.
    pub fn signed_turns(&self) -> f64 {
        if self.hi >= 0.5 {
            (self.hi - 1.0) + self.lo
        } else {
            self.hi + self.lo
        }
    }

    pub fn is_one(&self) -> bool {
        self.hi == 0.0 && self.lo == 0.0
    }

    pub fn to_complex(&self) -> Complex64 {
        if self.is_one() {
            return Complex64::new(1.0, 0.0);
        }
        let (s, c) = (TAU * self.signed_turns()).sin_cos();
        Complex64::new(c, s)
    }

    pub fn conj(&self) -> Phase {
        Phase::normalized(-self.hi, -self.lo)
    }

    /// `z^m` as a phase: `frac(m θ)`.
    ///
    /// Exact integer splitting keeps the absolute phase error near `2^-52`
    /// for `|m| < 2^63`.
    pub fn pow(&self, m: i128) -> Phase {
        if m == 0 || self.is_one() {
            return Phase::ONE;
        }
        if m < 0 {
            return self.pow_unsigned(m.unsigned_abs()).conj();
        }
        self.pow_unsigned(m as u128)
    }

    fn pow_unsigned(&self, m: u128) -> Phase {
        let top = ((m >> 32) as f64) * 4_294_967_296.0;
        let bottom = (m & 0xFFFF_FFFF) as f64;
        let mut f = frac_product(top, self.hi) + frac_product(bottom, self.hi);
        f += wrap((m as f64) * self.lo);
        let f = wrap(f);
        if f == 0.0 {
            // only exact zero maps to ONE
            Phase::ONE
        } else {
            Phase { hi: f, lo: 0.0 }
        }
    }

    /// `z^m` as a complex number.
    #[inline]
    pub fn power(&self, m: i128) -> Complex64 {
        self.pow(m).to_complex()
    }

    /// Product of two points on the circle.
    pub fn mul(&self, other: &Phase) -> Phase {
        let (s, e) = two_sum(self.hi, other.hi);
        Phase::normalized(s, e + self.lo + other.lo)
    }

    /// Distance to the nearest integer of the angle, in turns.
    pub fn distance_to_one(&self) -> f64 {
        self.signed_turns().abs()
    }
}

impl From<Phase> for Complex64 {
    fn from(p: Phase) -> Complex64 {
        p.to_complex()
    }
}

/// Every root of unity of order `2..=max_order`, each listed once.
pub fn roots_of_unity(max_order: u64) -> Vec<Phase> {
    let mut out = Vec::new();
    for q in 2..=max_order {
        for j in 1..q {
            if gcd(j, q) == 1 {
                out.push(Phase::root_of_unity(j, q).expect("q > 0"));
            }
        }
    }
    out
}

/// The standard test grid of irrational angles.
///
/// Fractional parts of `sqrt(d)` for non-square `d` (and the golden ratio)
/// come first, then uniform random reals drawn from `(seed, stream)`; all
/// angles lie in `[0.05, 0.95]` so that `z` stays away from 1.
pub fn irrational_grid(count: usize, seed: u64) -> Vec<Phase> {
    let mut out = vec![Phase::golden()];
    let mut d = 2u64;
    let quadratic_budget = count / 2;
    while out.len() < quadratic_budget.min(count) {
        let r = (d as f64).sqrt() as u64;
        if r * r != d {
            let p = Phase::sqrt_fraction(d);
            let t = p.turns();
            if (0.05..=0.95).contains(&t) {
                out.push(p);
            }
        }
        d += 1;
    }
    let mut rng = stream_rng(seed, crate::rng::streams::Z_GRID);
    while out.len() < count {
        out.push(Phase::from_turns(rng.gen_range(0.05..0.95)));
    }
    out.truncate(count);
    out
}

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
