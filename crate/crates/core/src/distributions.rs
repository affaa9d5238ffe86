//! Laws of the positive-integer increment variable `b`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{gcd, Phase};

/// Tolerance on the total mass accepted by [`IncrementDistribution::table`].
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Serializable description of an increment law, as written in config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DistSpec {
    Geometric { alpha: f64 },
    Uniform { lo: u64, hi: u64 },
    Constant { value: u64 },
    Table { support: Vec<u64>, probs: Vec<f64> },
}

impl DistSpec {
    pub fn build(&self) -> Result<IncrementDistribution> {
        match self {
            DistSpec::Geometric { alpha } => IncrementDistribution::geometric(*alpha),
            DistSpec::Uniform { lo, hi } => IncrementDistribution::uniform_range(*lo, *hi),
            DistSpec::Constant { value } => IncrementDistribution::constant(*value),
            DistSpec::Table { support, probs } => IncrementDistribution::table(support, probs),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Law {
    Finite {
        support: Vec<u64>,
        probs: Vec<f64>,
        cdf: Vec<f64>,
    },
    /// `P(b = n) = α(1-α)^{n-1}`, kept analytic rather than truncated.
    Geometric { alpha: f64 },
}

/// A finite-mean law on the positive integers.
///
/// Immutable after construction. Finite laws keep a sorted, duplicate-free
/// support with strictly positive probabilities normalized to sum to one; the
/// geometric law is stored by its parameter and every query uses closed forms.
#[derive(Clone, Debug, PartialEq)]
pub struct IncrementDistribution {
    spec: DistSpec,
    law: Law,
    mean: f64,
}

impl IncrementDistribution {
    /// Builds a finite law from parallel `support` / `probs` lists.
    ///
    /// Duplicated support points are merged, zero-probability points dropped
    /// and the masses renormalized.
    pub fn table(support: &[u64], probs: &[f64]) -> Result<Self> {
        let spec = DistSpec::Table { support: support.to_vec(), probs: probs.to_vec() };
        Self::finite(spec, support, probs)
    }

    fn finite(spec: DistSpec, support: &[u64], probs: &[f64]) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if support.len() != probs.len() {
            return Err(Error::InvalidDistribution(format!(
                "support has {} points but {} probabilities were given",
                support.len(),
                probs.len()
            )));
        }
        if let Some(v) = support.iter().find(|&&v| v < 1) {
            return Err(Error::InvalidDistribution(format!("support value {v} is below 1")));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("invalid probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("zero total mass".into()));
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }

        let mut pairs: Vec<(u64, f64)> = support.iter().copied().zip(probs.iter().copied()).collect();
        pairs.sort_by_key(|&(v, _)| v);
        let mut merged: Vec<(u64, f64)> = Vec::with_capacity(pairs.len());
        for (v, p) in pairs {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        merged.retain(|&(_, p)| p > 0.0);

        let support: Vec<u64> = merged.iter().map(|&(v, _)| v).collect();
        let probs: Vec<f64> = merged.iter().map(|&(_, p)| p / total).collect();
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cdf.push(acc);
        }
        *cdf.last_mut().expect("nonempty") = 1.0;
        let mean = support.iter().zip(&probs).map(|(&v, &p)| v as f64 * p).sum();
        Ok(IncrementDistribution { spec, law: Law::Finite { support, probs, cdf }, mean })
    }

    pub fn geometric(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidDistribution(format!(
                "geometric parameter {alpha} outside (0, 1)"
            )));
        }
        Ok(IncrementDistribution {
            spec: DistSpec::Geometric { alpha },
            law: Law::Geometric { alpha },
            mean: 1.0 / alpha,
        })
    }

    /// Uniform on `{lo, ..., hi}`.
    pub fn uniform_range(lo: u64, hi: u64) -> Result<Self> {
        if lo < 1 {
            return Err(Error::InvalidDistribution("uniform range must start at 1 or above".into()));
        }
        if hi < lo {
            return Err(Error::InvalidDistribution(format!("empty range {lo}..={hi}")));
        }
        let support: Vec<u64> = (lo..=hi).collect();
        let p = 1.0 / support.len() as f64;
        let probs = vec![p; support.len()];
        let mut d = Self::finite(DistSpec::Uniform { lo, hi }, &support, &probs)?;
        d.mean = (lo as f64 + hi as f64) / 2.0;
        Ok(d)
    }

    pub fn constant(value: u64) -> Result<Self> {
        Self::finite(DistSpec::Constant { value }, &[value], &[1.0])
    }

    pub fn spec(&self) -> &DistSpec {
        &self.spec
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        match &self.law {
            Law::Geometric { alpha } => (1.0 - alpha) / (alpha * alpha),
            Law::Finite { support, probs, .. } => support
                .iter()
                .zip(probs)
                .map(|(&v, &p)| p * (v as f64 - self.mean).powi(2))
                .sum(),
        }
    }

    pub fn is_geometric(&self) -> bool {
        matches!(self.law, Law::Geometric { .. })
    }

    /// Support points, `None` for the (infinite-support) geometric law.
    pub fn support(&self) -> Option<&[u64]> {
        match &self.law {
            Law::Finite { support, .. } => Some(support),
            Law::Geometric { .. } => None,
        }
    }

    pub fn pmf(&self, n: u64) -> f64 {
        match &self.law {
            Law::Geometric { alpha } => {
                if n == 0 {
                    0.0
                } else {
                    alpha * (1.0 - alpha).powf((n - 1) as f64)
                }
            }
            Law::Finite { support, probs, .. } => match support.binary_search(&n) {
                Ok(i) => probs[i],
                Err(_) => 0.0,
            },
        }
    }

    /// The largest `ℓ` dividing `b` almost surely: the gcd of the support.
    pub fn period(&self) -> u64 {
        match &self.law {
            Law::Geometric { .. } => 1,
            Law::Finite { support, .. } => support.iter().fold(0, |g, &v| gcd(g, v)),
        }
    }

    pub fn is_aperiodic(&self) -> bool {
        self.period() == 1
    }

    /// `E z^b` for a point given as a complex number; errors off the unit circle.
    pub fn char_fn(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.char_fn_at(Phase::from_complex(z)?))
    }

    /// `E z^b = Σ P(b = n) z^n`.
    pub fn char_fn_at(&self, z: Phase) -> Complex64 {
        if z.is_one() {
            return Complex64::new(1.0, 0.0);
        }
        match &self.law {
            Law::Geometric { alpha } => {
                let w = z.to_complex();
                w * *alpha / (Complex64::new(1.0, 0.0) - w * (1.0 - alpha))
            }
            Law::Finite { support, probs, .. } => support
                .iter()
                .zip(probs)
                .map(|(&v, &p)| z.power(v as i128) * p)
                .sum(),
        }
    }

    /// `E z^{c b}` for an integer coefficient `c` (negative allowed).
    pub fn char_fn_scaled(&self, z: Phase, c: i64) -> Complex64 {
        self.char_fn_at(z.pow(c as i128))
    }

    /// One inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match &self.law {
            Law::Geometric { alpha } => {
                // P(b > n) = (1-α)^n, so b = ceil(ln(1-u) / ln(1-α))
                let u: f64 = rng.gen();
                let x = (1.0 - u).ln() / (1.0 - alpha).ln();
                (x.ceil() as u64).max(1)
            }
            Law::Finite { support, cdf, .. } => {
                if support.len() == 1 {
                    return support[0];
                }
                let u: f64 = rng.gen();
                let i = cdf.partition_point(|&c| c <= u);
                support[i.min(support.len() - 1)]
            }
        }
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<u64> {
        (0..count).map(|_| self.sample(rng)).collect()
    }
}
