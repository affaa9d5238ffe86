//! Stochastic sequences `a_n = b_1 + ... + b_n` and dynamical sequences `s_{n,j}`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::distributions::{DistSpec, IncrementDistribution};
use crate::error::{Error, Result};
use crate::rng::{child_seed, stream_rng, streams};

/// Where a sequence came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceSource {
    pub distribution: Option<DistSpec>,
    pub seed: Option<u64>,
}

/// A realized stochastic sequence.
///
/// `prefix[n] = a_n` with `a_0 = 0`, and `sums[m] = a_0 + ... + a_{m-1}`, so
/// that every partial sum `a_n^{(k)}` is a single subtraction.
#[derive(Clone, Debug, PartialEq)]
pub struct StochasticSequence {
    increments: Vec<u64>,
    prefix: Vec<u128>,
    sums: Vec<u128>,
    source: SequenceSource,
}

impl StochasticSequence {
    /// Builds a sequence from explicit increments `b_1..b_M`.
    pub fn from_increments(increments: Vec<u64>) -> Result<Self> {
        Self::with_source(increments, SequenceSource { distribution: None, seed: None })
    }

    fn with_source(increments: Vec<u64>, source: SequenceSource) -> Result<Self> {
        if let Some(pos) = increments.iter().position(|&b| b == 0) {
            return Err(Error::InvalidArgument(format!("increment b_{} is zero", pos + 1)));
        }
        let mut prefix = Vec::with_capacity(increments.len() + 1);
        prefix.push(0u128);
        let mut acc = 0u128;
        for (i, &b) in increments.iter().enumerate() {
            acc = acc
                .checked_add(b as u128)
                .ok_or_else(|| Error::Overflow(format!("a_{} exceeds 128 bits", i + 1)))?;
            prefix.push(acc);
        }
        let mut sums = Vec::with_capacity(prefix.len() + 1);
        sums.push(0u128);
        let mut acc = 0u128;
        for (i, &a) in prefix.iter().enumerate() {
            acc = acc
                .checked_add(a)
                .ok_or_else(|| Error::Overflow(format!("a_0 + ... + a_{i} exceeds 128 bits")))?;
            sums.push(acc);
        }
        Ok(StochasticSequence { increments, prefix, sums, source })
    }

    /// Draws `len` increments from `dist` on the sequence stream of `seed`.
    pub fn generate(dist: &IncrementDistribution, len: usize, seed: u64) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidArgument("sequence length must be at least 1".into()));
        }
        let mut rng = stream_rng(seed, streams::SEQUENCE);
        let increments = dist.sample_n(&mut rng, len);
        Self::with_source(
            increments,
            SequenceSource { distribution: Some(dist.spec().clone()), seed: Some(seed) },
        )
    }

    /// Number of increments `M`.
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn source(&self) -> &SequenceSource {
        &self.source
    }

    pub fn increments(&self) -> &[u64] {
        &self.increments
    }

    /// `b_m` for `1 <= m <= M`.
    pub fn increment(&self, m: usize) -> u64 {
        self.increments[m - 1]
    }

    /// `a_n`, `0 <= n <= M`.
    pub fn a(&self, n: usize) -> u128 {
        self.prefix[n]
    }

    pub fn try_a(&self, n: usize) -> Result<u128> {
        self.prefix
            .get(n)
            .copied()
            .ok_or_else(|| Error::OutOfRange(format!("a_{n} with M = {}", self.len())))
    }

    /// `a_n^{(k)} = a_n + ... + a_{n+k-1}` without bounds reporting.
    #[inline]
    pub fn partial(&self, n: usize, k: usize) -> u128 {
        self.sums[n + k] - self.sums[n]
    }

    /// `a_n^{(k)}`; requires `k >= 1` and `n + k - 1 <= M`.
    pub fn partial_sum(&self, n: usize, k: usize) -> Result<u128> {
        if k == 0 {
            return Err(Error::InvalidArgument("partial sums need k >= 1".into()));
        }
        if n + k - 1 > self.len() {
            return Err(Error::OutOfRange(format!(
                "a_{n}^({k}) needs a_{} but M = {}",
                n + k - 1,
                self.len()
            )));
        }
        Ok(self.partial(n, k))
    }

    /// Largest index `n` with `a_n` defined.
    pub fn max_index(&self) -> usize {
        self.len()
    }

    /// The sequence seen through `Θ^n`: increments `b_{n+1}, b_{n+2}, ...`.
    pub fn shifted(&self, n: usize) -> ShiftedView<'_> {
        ShiftedView { increments: &self.increments[n.min(self.len())..] }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,b_n,a_n")?;
        for n in 1..=self.len() {
            writeln!(out, "{},{},{}", n, self.increments[n - 1], self.prefix[n])?;
        }
        Ok(())
    }
}

/// A sequence after `n` applications of the shift, evaluated straight from
/// the definitions (no shared prefix tables), so it can serve as an
/// independent route for the shift identities.
#[derive(Clone, Copy, Debug)]
pub struct ShiftedView<'a> {
    increments: &'a [u64],
}

impl<'a> ShiftedView<'a> {
    /// `a_t ∘ Θ^n = b_{n+1} + ... + b_{n+t}`.
    pub fn a(&self, t: usize) -> u128 {
        self.increments[..t].iter().map(|&b| b as u128).sum()
    }

    /// `a_t^{(k)} ∘ Θ^n = Σ_{z<k} a_{t+z} ∘ Θ^n`.
    pub fn partial(&self, t: usize, k: usize) -> u128 {
        let mut running: u128 = self.a(t);
        let mut total = running;
        for z in 1..k {
            running += self.increments[t + z - 1] as u128;
            total += running;
        }
        total
    }
}

/// Outcome of the four shift identities at one `(n, k, t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ShiftIdentityReport {
    pub n: usize,
    pub k: usize,
    pub t: usize,
    /// `a_{n+t}^{(k)} - a_n^{(k)} = a_{n+k}^{(t)} - a_n^{(t)}`
    pub swap: bool,
    /// `a_n^{(k)} = k a_n + a_0^{(k)} ∘ Θ^n`
    pub decomposition: bool,
    /// `a_{n+t} - a_n = a_t ∘ Θ^n`
    pub increment_shift: bool,
    /// `a_{n+t}^{(k)} - a_n^{(k)} = (a_t^{(k)} - a_0^{(k)}) ∘ Θ^n`
    pub difference_shift: bool,
}

impl ShiftIdentityReport {
    pub fn all_hold(&self) -> bool {
        self.swap && self.decomposition && self.increment_shift && self.difference_shift
    }
}

/// Checks the four shift identities exactly in integers.
///
/// Needs `n + k + t <= M`. With `t = 0` identity (i) compares `a^{(0)}` terms,
/// which are taken as the empty sum.
pub fn shift_identity_check(
    seq: &StochasticSequence,
    n: usize,
    k: usize,
    t: usize,
) -> Result<ShiftIdentityReport> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if n + k + t > seq.len() {
        return Err(Error::OutOfRange(format!(
            "n + k + t = {} exceeds M = {}",
            n + k + t,
            seq.len()
        )));
    }
    let p = |i: usize, j: usize| seq.partial(i, j) as i128;
    let a = |i: usize| seq.a(i) as i128;
    let view = seq.shifted(n);

    let swap = p(n + t, k) - p(n, k) == p(n + k, t) - p(n, t);
    let decomposition = p(n, k) == k as i128 * a(n) + view.partial(0, k) as i128;
    let increment_shift = a(n + t) - a(n) == view.a(t) as i128;
    let difference_shift =
        p(n + t, k) - p(n, k) == view.partial(t, k) as i128 - view.partial(0, k) as i128;
    Ok(ShiftIdentityReport { n, k, t, swap, decomposition, increment_shift, difference_shift })
}

/// Runs the shift identities over every `1 <= n, k, t <= bound`, returning
/// the first failure if any.
pub fn shift_identity_suite(
    seq: &StochasticSequence,
    bound: usize,
) -> Result<Option<ShiftIdentityReport>> {
    for n in 1..=bound {
        for k in 1..=bound {
            for t in 1..=bound {
                let r = shift_identity_check(seq, n, k, t)?;
                if !r.all_hold() {
                    return Ok(Some(r));
                }
            }
        }
    }
    Ok(None)
}

/// A doubly indexed collection `s_{n,j}`, `0 <= j < r_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicalSequence {
    pub cuts: Vec<u64>,
    pub rows: Vec<Vec<u64>>,
    pub stage_distributions: Vec<DistSpec>,
}

impl DynamicalSequence {
    pub fn stages(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, n: usize) -> &[u64] {
        &self.rows[n]
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "stage,j,s")?;
        for (n, row) in self.rows.iter().enumerate() {
            for (j, s) in row.iter().enumerate() {
                writeln!(out, "{n},{j},{s}")?;
            }
        }
        Ok(())
    }
}

/// Draws `s_{n,j} = b_{n,1} + ... + b_{n,j}` (so `s_{n,0} = 0`) with fresh
/// iid increments for every stage.
pub fn generate_dynamical(
    stage_dists: &[IncrementDistribution],
    cuts: &[u64],
    seed: u64,
) -> Result<DynamicalSequence> {
    if stage_dists.len() != cuts.len() {
        return Err(Error::InvalidArgument(format!(
            "{} stage distributions for {} cuts",
            stage_dists.len(),
            cuts.len()
        )));
    }
    let stage_seed = child_seed(seed, streams::DYNAMICAL);
    let mut rows = Vec::with_capacity(cuts.len());
    for (n, (dist, &r)) in stage_dists.iter().zip(cuts).enumerate() {
        if r == 0 {
            return Err(Error::InvalidArgument(format!("r_{n} must be at least 1")));
        }
        let mut rng = stream_rng(stage_seed, n as u64);
        let mut row = Vec::with_capacity(r as usize);
        let mut acc = 0u64;
        row.push(0);
        for j in 1..r {
            acc = acc
                .checked_add(dist.sample(&mut rng))
                .ok_or_else(|| Error::Overflow(format!("s_{{{n},{j}}} exceeds 64 bits")))?;
            row.push(acc);
        }
        rows.push(row);
    }
    Ok(DynamicalSequence {
        cuts: cuts.to_vec(),
        rows,
        stage_distributions: stage_dists.iter().map(|d| d.spec().clone()).collect(),
    })
}
