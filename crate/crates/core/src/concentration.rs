//! Strong-law machinery for sums of dependent bounded variables.
//!
//! A family `X_n` depends on finitely many increments through declared
//! windows `Z_n`; `K` bounds `|Z_n|` and `B` bounds how many windows contain a
//! given index. With `|X_n| <= D` and `E X_n = 0`,
//!
//! `P(|(1/N) Σ X_n| >= δ) <= C_R δ^{-2R} (DKB)^{2R} N^{-R}`
//!
//! where `C_R = #{partitions of 2R points without singletons} · (2R)!`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averages::PartialSumPowers;
use crate::distributions::IncrementDistribution;
use crate::error::{Error, Result};
use crate::forms::LinearForm;
use crate::phase::Phase;
use crate::rng::{child_seed, stream_rng, streams};
use crate::sequences::StochasticSequence;

/// Slack on the `|X_n| <= D` check.
pub const BOUND_SLACK: f64 = 1e-9;
/// Draws used when a family has no closed-form mean.
pub const CENTERING_TRIALS: usize = 100_000;

// ---------------------------------------------------------------------------
// combinatorial constants

/// Partitions of an `m`-set with every block of size at least 2.
///
/// Conditioning on the block of element `m`: it has `j >= 1` partners chosen
/// from the other `m - 1`, and the rest is partitioned recursively.
pub fn no_singleton_partitions(m: usize) -> Result<u128> {
    let overflow = || Error::Overflow(format!("no_singleton_partitions({m}) exceeds u128"));
    let mut a: Vec<u128> = vec![1];
    // binomial row C(i, ·) for the current i = size - 1
    let mut row: Vec<u128> = vec![1];
    for size in 1..=m {
        let i = size - 1;
        if i > 0 {
            let mut next = vec![1u128; i + 1];
            for j in 1..i {
                next[j] = row[j - 1].checked_add(row[j]).ok_or_else(overflow)?;
            }
            row = next;
        }
        let mut total: u128 = 0;
        for j in 1..=i {
            let term = row[j].checked_mul(a[i - j]).ok_or_else(overflow)?;
            total = total.checked_add(term).ok_or_else(overflow)?;
        }
        a.push(total);
    }
    Ok(a[m])
}

/// `C_R = no_singleton_partitions(2R) · (2R)!`.
pub fn c_r(r: u32) -> Result<u128> {
    if r == 0 {
        return Err(Error::InvalidArgument("R must be at least 1".into()));
    }
    let m = 2 * r as usize;
    let overflow = || Error::Overflow(format!("C_R overflows u128 at R = {r}"));
    let mut fact: u128 = 1;
    for i in 2..=m as u128 {
        fact = fact.checked_mul(i).ok_or_else(overflow)?;
    }
    no_singleton_partitions(m)?.checked_mul(fact).ok_or_else(overflow)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub value: f64,
    /// `value > 1`, so the bound says nothing.
    pub vacuous: bool,
}

impl TailBound {
    pub fn capped(&self) -> f64 {
        self.value.min(1.0)
    }
}

fn check_bound_params(r: u32, delta: f64, d: f64) -> Result<()> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(Error::InvalidArgument(format!("delta = {delta} must be positive")));
    }
    if r == 0 || !d.is_finite() || d < 0.0 {
        return Err(Error::InvalidArgument(format!("invalid R = {r} or D = {d}")));
    }
    Ok(())
}

/// `C_R δ^{-2R} (DKB)^{2R} N^{-R}`.
pub fn tail_bound(r: u32, delta: f64, d: f64, k: usize, b: usize, n: usize) -> Result<TailBound> {
    check_bound_params(r, delta, d)?;
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    let scale = d * k as f64 * b as f64 / delta;
    let value = c_r(r)? as f64 * scale.powi(2 * r as i32) * (n as f64).powi(-(r as i32));
    Ok(TailBound { value, vacuous: value > 1.0 })
}

/// `Σ_{N >= m} N^{-s}` for `s > 1`, by direct summation followed by an
/// Euler-Maclaurin tail.
pub fn zeta_tail(s: f64, m: usize) -> Result<f64> {
    if s.is_nan() || s <= 1.0 || m == 0 {
        return Err(Error::InvalidArgument(format!("zeta tail needs s > 1 and m >= 1 (s={s}, m={m})")));
    }
    const DIRECT: usize = 64;
    let direct: f64 = (m..m + DIRECT).rev().map(|n| (n as f64).powf(-s)).sum();
    let x = (m + DIRECT) as f64;
    let tail = x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s) + s / 12.0 * x.powf(-s - 1.0)
        - s * (s + 1.0) * (s + 2.0) / 720.0 * x.powf(-s - 3.0)
        + s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) / 30240.0 * x.powf(-s - 5.0);
    Ok(direct + tail)
}

/// `Σ_{N >= m} tail_bound(R, δ, D, K, B, N)`, finite for `R >= 2`.
pub fn tail_bound_sum(r: u32, delta: f64, d: f64, k: usize, b: usize, m: usize) -> Result<f64> {
    if r < 2 {
        return Err(Error::InvalidArgument("the tail bounds are summable only for R >= 2".into()));
    }
    let first = tail_bound(r, delta, d, k, b, 1)?.value;
    Ok(first * zeta_tail(r as f64, m)?)
}

// ---------------------------------------------------------------------------
// families

/// Increments `b_start, ..., b_{start+len-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub len: usize,
}

impl Window {
    pub fn end(&self) -> usize {
        self.start + self.len - 1
    }
}

pub trait DependentFamily: Sync {
    fn name(&self) -> String;
    /// Declared dependency set `Z_n`, as disjoint windows.
    fn windows(&self, n: usize) -> Vec<Window>;
    fn declared_k(&self) -> usize;
    fn declared_b(&self) -> usize;
    /// `D` for the centered value, when the family is bounded.
    fn value_bound(&self) -> Option<f64>;
    /// Uncentered `X_n`; `increments[m - 1] = b_m`.
    fn raw(&self, n: usize, increments: &[u64]) -> Complex64;
    /// Common mean of the uncentered values when available in closed form.
    fn analytic_mean(&self, dist: &IncrementDistribution) -> Option<Complex64>;

    /// Largest increment index read by `X_1..X_n`.
    fn reach(&self, n: usize) -> usize {
        (1..=n).flat_map(|i| self.windows(i)).map(|w| w.end()).max().unwrap_or(0)
    }
}

/// `X_n = 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroFamily;

impl DependentFamily for ZeroFamily {
    fn name(&self) -> String {
        "zero".into()
    }
    fn windows(&self, _n: usize) -> Vec<Window> {
        Vec::new()
    }
    fn declared_k(&self) -> usize {
        0
    }
    fn declared_b(&self) -> usize {
        0
    }
    fn value_bound(&self) -> Option<f64> {
        Some(0.0)
    }
    fn raw(&self, _n: usize, _increments: &[u64]) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
    fn analytic_mean(&self, _dist: &IncrementDistribution) -> Option<Complex64> {
        Some(Complex64::new(0.0, 0.0))
    }
}

/// `X_n = b_n`, centered by the mean of `b`. Unbounded.
#[derive(Clone, Copy, Debug, Default)]
pub struct IncrementValue;

impl DependentFamily for IncrementValue {
    fn name(&self) -> String {
        "b_n".into()
    }
    fn windows(&self, n: usize) -> Vec<Window> {
        vec![Window { start: n, len: 1 }]
    }
    fn declared_k(&self) -> usize {
        1
    }
    fn declared_b(&self) -> usize {
        1
    }
    fn value_bound(&self) -> Option<f64> {
        None
    }
    fn raw(&self, n: usize, increments: &[u64]) -> Complex64 {
        Complex64::new(increments[n - 1] as f64, 0.0)
    }
    fn analytic_mean(&self, dist: &IncrementDistribution) -> Option<Complex64> {
        Some(Complex64::new(dist.mean(), 0.0))
    }
}

/// `X_n = z^{Σ_i c_i b_{n+lead+i-1}}` for a fixed coefficient template `c`.
///
/// Covers `z^{b_n}` (template `[1]`, lead 0), lag differences
/// `a_{n+ℓ}^{(k)} - a_n^{(k)}` and quadruple differences (lead 1).
#[derive(Clone, Debug)]
pub struct PhaseForm {
    label: String,
    z: Phase,
    template: LinearForm,
    lead: usize,
}

impl PhaseForm {
    pub fn new(label: impl Into<String>, z: Phase, template: LinearForm, lead: usize) -> Self {
        PhaseForm { label: label.into(), z, template, lead }
    }

    /// `z^{b_n}`.
    pub fn increment_power(z: Phase) -> Self {
        PhaseForm::new("z^b_n", z, LinearForm::from_coefficients(vec![1]), 0)
    }

    /// `z^{a_{n+ℓ}^{(k)} - a_n^{(k)}}`, reading `b_{n+1}, ..., b_{n+ℓ+k-1}`.
    pub fn lag_difference(z: Phase, lag: usize, k: usize) -> Self {
        PhaseForm::new(
            format!("lag difference l={lag} k={k}"),
            z,
            LinearForm::lag_difference(0, lag, k),
            1,
        )
    }

    /// `z^{Y_n^{(k,ℓ,q)}}`.
    pub fn quadruple(z: Phase, k: usize, lag: usize, q: usize) -> Self {
        PhaseForm::new(
            format!("quadruple k={k} l={lag} q={q}"),
            z,
            LinearForm::quadruple(0, k, lag, q),
            1,
        )
    }

    pub fn template(&self) -> &LinearForm {
        &self.template
    }

    fn offset(&self, n: usize) -> usize {
        // b index for template position i is n + lead + i - 1
        n + self.lead - 1
    }
}

impl DependentFamily for PhaseForm {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn windows(&self, n: usize) -> Vec<Window> {
        let mut out: Vec<Window> = Vec::new();
        let base = self.offset(n);
        for m in self.template.dependencies() {
            let idx = base + m;
            match out.last_mut() {
                Some(w) if w.end() + 1 == idx => w.len += 1,
                _ => out.push(Window { start: idx, len: 1 }),
            }
        }
        out
    }

    fn declared_k(&self) -> usize {
        self.template.dependencies().len()
    }

    fn declared_b(&self) -> usize {
        self.template.dependencies().len()
    }

    fn value_bound(&self) -> Option<f64> {
        Some(2.0)
    }

    fn raw(&self, n: usize, increments: &[u64]) -> Complex64 {
        let base = self.offset(n);
        let exponent: i128 = self
            .template
            .coefficients()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(i, &c)| c as i128 * increments[base + i] as i128)
            .sum();
        self.z.power(exponent)
    }

    fn analytic_mean(&self, dist: &IncrementDistribution) -> Option<Complex64> {
        Some(self.template.expectation(dist, self.z))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowCounts {
    /// `max_n |Z_n|` over `n = 1..=N`.
    pub k: usize,
    /// `max_m #{n <= N : m ∈ Z_n}`.
    pub b: usize,
}

/// Recomputes `K` and `B` from the declared windows for `n = 1..=N`.
///
/// `K` must match the declaration exactly. `B` may fall short of it near the
/// boundary for small `N`, but must never exceed it.
pub fn validate_family(family: &dyn DependentFamily, n: usize) -> Result<WindowCounts> {
    let reach = family.reach(n);
    let mut multiplicity = vec![0usize; reach + 1];
    let mut k = 0;
    for i in 1..=n {
        let windows = family.windows(i);
        let mut seen: Vec<usize> = windows.iter().flat_map(|w| w.start..=w.end()).collect();
        seen.sort_unstable();
        let before = seen.len();
        seen.dedup();
        if seen.len() != before {
            return Err(Error::Hypothesis(format!("{}: overlapping windows at n = {i}", family.name())));
        }
        if seen.first() == Some(&0) {
            return Err(Error::Hypothesis(format!("{}: window touches b_0 at n = {i}", family.name())));
        }
        k = k.max(seen.len());
        for m in seen {
            multiplicity[m] += 1;
        }
    }
    let b = multiplicity.into_iter().max().unwrap_or(0);
    let counts = WindowCounts { k, b };
    if k != family.declared_k() || b > family.declared_b() {
        return Err(Error::Hypothesis(format!(
            "{}: declared K = {}, B = {} but windows give K = {k}, B = {b}",
            family.name(),
            family.declared_k(),
            family.declared_b()
        )));
    }
    Ok(counts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Centering {
    Analytic(Complex64),
    /// Estimated from `trials` draws of `X_1` on an independent stream.
    Empirical { mean: Complex64, stderr: f64, trials: usize },
}

impl Centering {
    pub fn mean(&self) -> Complex64 {
        match *self {
            Centering::Analytic(m) => m,
            Centering::Empirical { mean, .. } => mean,
        }
    }

    pub fn error(&self) -> f64 {
        match *self {
            Centering::Analytic(_) => 0.0,
            Centering::Empirical { stderr, .. } => 3.0 * stderr,
        }
    }

    /// Analytic mean when available, otherwise an empirical one. The
    /// empirical route assumes `E X_n` does not depend on `n`.
    pub fn for_family(
        family: &dyn DependentFamily,
        dist: &IncrementDistribution,
        seed: u64,
        trials: usize,
    ) -> Result<Centering> {
        if let Some(m) = family.analytic_mean(dist) {
            return Ok(Centering::Analytic(m));
        }
        if trials < 2 {
            return Err(Error::InvalidArgument("empirical centering needs at least 2 trials".into()));
        }
        let mut rng = stream_rng(seed, streams::CENTERING);
        let reach = family.reach(1);
        let draws: Vec<Complex64> = (0..trials)
            .map(|_| family.raw(1, &dist.sample_n(&mut rng, reach)))
            .collect();
        let mean = draws.iter().sum::<Complex64>() / trials as f64;
        let var = draws.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / (trials - 1) as f64;
        Ok(Centering::Empirical { mean, stderr: (var / trials as f64).sqrt(), trials })
    }
}

fn trial_increments(dist: &IncrementDistribution, seed: u64, trial: usize, len: usize) -> Vec<u64> {
    let mut rng = stream_rng(child_seed(seed, trial as u64), streams::MONTE_CARLO);
    dist.sample_n(&mut rng, len)
}

/// `(1/N) Σ (X_n - mean)` on one set of increments, checking `|X_n - mean| <= D`.
fn centered_average(
    family: &dyn DependentFamily,
    increments: &[u64],
    n: usize,
    mean: Complex64,
    bound: Option<f64>,
    trial: usize,
) -> Result<Complex64> {
    let mut sum = Complex64::new(0.0, 0.0);
    for i in 1..=n {
        let x = family.raw(i, increments) - mean;
        if let Some(d) = bound {
            if x.norm() > d + BOUND_SLACK {
                return Err(Error::Hypothesis(format!(
                    "{}: |X_{i}| = {} exceeds D = {d} in trial {trial}",
                    family.name(),
                    x.norm()
                )));
            }
        }
        sum += x;
    }
    Ok(sum / n as f64)
}

/// Empirical `P(|(1/N) Σ X_n| >= δ)` next to the tail bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub n: usize,
    pub delta: f64,
    pub r: u32,
    pub empirical: f64,
    pub bound: f64,
    pub trials: usize,
    pub seed: u64,
    pub centering_error: f64,
}

impl TailEstimate {
    /// `3 sqrt(p̂ / trials)`.
    pub fn tolerance(&self) -> f64 {
        3.0 * (self.empirical / self.trials as f64).sqrt()
    }

    pub fn passes(&self) -> bool {
        self.empirical <= self.bound.min(1.0) + self.tolerance()
    }
}

/// Tail frequencies for several `δ` from one batch of trials.
pub fn monte_carlo_tail_grid(
    family: &dyn DependentFamily,
    dist: &IncrementDistribution,
    n: usize,
    deltas: &[f64],
    trials: usize,
    seed: u64,
    r: u32,
) -> Result<Vec<TailEstimate>> {
    if n == 0 || trials == 0 {
        return Err(Error::InvalidArgument("N and trials must be positive".into()));
    }
    let d = family
        .value_bound()
        .ok_or_else(|| Error::Hypothesis(format!("{} has no value bound D", family.name())))?;
    let counts = validate_family(family, n)?;
    let centering = Centering::for_family(family, dist, seed, CENTERING_TRIALS)?;
    let mean = centering.mean();
    let reach = family.reach(n);
    let magnitudes: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let inc = trial_increments(dist, seed, t, reach);
            centered_average(family, &inc, n, mean, Some(d), t).map(|c| c.norm())
        })
        .collect::<Result<_>>()?;
    deltas
        .iter()
        .map(|&delta| {
            let bound = tail_bound(r, delta, d, counts.k.max(1), family.declared_b().max(1), n)?.value;
            let hits = magnitudes.iter().filter(|&&m| m >= delta).count();
            Ok(TailEstimate {
                n,
                delta,
                r,
                empirical: hits as f64 / trials as f64,
                bound,
                trials,
                seed,
                centering_error: centering.error(),
            })
        })
        .collect()
}

pub fn monte_carlo_tail(
    family: &dyn DependentFamily,
    dist: &IncrementDistribution,
    n: usize,
    delta: f64,
    trials: usize,
    seed: u64,
    r: u32,
) -> Result<TailEstimate> {
    Ok(monte_carlo_tail_grid(family, dist, n, &[delta], trials, seed, r)?.remove(0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub n: usize,
    pub r: u32,
    /// Sample mean of `|(1/N) Σ X_n|^{2R}`.
    pub empirical: f64,
    pub stderr: f64,
    /// `C_R (DKB)^{2R} N^{-R}`.
    pub bound: f64,
}

impl MomentCheck {
    pub fn passes(&self) -> bool {
        self.empirical - 3.0 * self.stderr <= self.bound
    }
}

/// Empirical `2R`-th moment of the average against the moment bound behind the tail bound.
pub fn moment_check(
    family: &dyn DependentFamily,
    dist: &IncrementDistribution,
    n: usize,
    r: u32,
    trials: usize,
    seed: u64,
) -> Result<MomentCheck> {
    if trials < 2 || n == 0 {
        return Err(Error::InvalidArgument("moment_check needs N >= 1 and trials >= 2".into()));
    }
    let d = family
        .value_bound()
        .ok_or_else(|| Error::Hypothesis(format!("{} has no value bound D", family.name())))?;
    validate_family(family, n)?;
    let mean = Centering::for_family(family, dist, seed, CENTERING_TRIALS)?.mean();
    let reach = family.reach(n);
    let moments: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let inc = trial_increments(dist, seed, t, reach);
            centered_average(family, &inc, n, mean, Some(d), t).map(|c| c.norm().powi(2 * r as i32))
        })
        .collect::<Result<_>>()?;
    let avg = moments.iter().sum::<f64>() / trials as f64;
    let var = moments.iter().map(|m| (m - avg).powi(2)).sum::<f64>() / (trials - 1) as f64;
    let dkb = d * family.declared_k() as f64 * family.declared_b() as f64;
    let bound = c_r(r)? as f64 * dkb.powi(2 * r as i32) * (n as f64).powi(-(r as i32));
    Ok(MomentCheck { n, r, empirical: avg, stderr: (var / trials as f64).sqrt(), bound })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub n: usize,
    pub avg: Complex64,
}

/// Running averages of the centered family along one realization, with the
/// increments of `StochasticSequence::generate(dist, _, seed)`.
pub fn strong_law_trajectory(
    family: &dyn DependentFamily,
    dist: &IncrementDistribution,
    grid: &[usize],
    seed: u64,
) -> Result<Vec<TrajectoryPoint>> {
    if grid.is_empty() || grid[0] == 0 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("N-grid must be positive and strictly ascending".into()));
    }
    let top = *grid.last().expect("nonempty");
    let mean = Centering::for_family(family, dist, seed, CENTERING_TRIALS)?.mean();
    let seq = StochasticSequence::generate(dist, family.reach(top).max(1), seed)?;
    let inc = seq.increments();
    let mut out = Vec::with_capacity(grid.len());
    let mut sum = Complex64::new(0.0, 0.0);
    let mut next = grid.iter().peekable();
    for i in 1..=top {
        sum += family.raw(i, inc) - mean;
        if next.peek() == Some(&&i) {
            next.next();
            out.push(TrajectoryPoint { n: i, avg: sum / i as f64 });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// uniform-in-k deviations

/// Families indexed by `k` whose averages must concentrate uniformly in `k <= N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KeyFamily {
    /// `a_{n+ℓ}^{(k)} - a_n^{(k)}`
    LagDifference { lag: usize },
    /// `Y_n^{(k,ℓ,q)}`
    Quadruple { lag: usize, q: usize },
}

impl KeyFamily {
    fn span(&self) -> usize {
        match *self {
            KeyFamily::LagDifference { lag } => lag,
            KeyFamily::Quadruple { lag, q } => lag + q,
        }
    }

    /// The exponent at `n = 0` as a linear form.
    pub fn form(&self, k: usize) -> LinearForm {
        match *self {
            KeyFamily::LagDifference { lag } => LinearForm::lag_difference(0, lag, k),
            KeyFamily::Quadruple { lag, q } => LinearForm::quadruple(0, k, lag, q),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KDeviation {
    pub value: f64,
    pub k: usize,
    pub z: Phase,
    pub family: KeyFamily,
}

/// `max_{z, k <= k_max} |(1/N) Σ_n z^{Y_n^{(k)}} - E z^{Y_0^{(k)}}|`, also
/// maximized over `families`.
///
/// The expectation is the exact characteristic-function product of the
/// exponent's linear form.
pub fn uniform_k_deviation(
    seq: &StochasticSequence,
    dist: &IncrementDistribution,
    families: &[KeyFamily],
    zs: &[Phase],
    n: usize,
    k_max: usize,
) -> Result<KDeviation> {
    if n == 0 || k_max == 0 || zs.is_empty() || families.is_empty() {
        return Err(Error::InvalidArgument(
            "uniform_k_deviation needs N, k_max >= 1 and nonempty grids".into(),
        ));
    }
    let span = families.iter().map(KeyFamily::span).max().expect("nonempty");
    let width = n + span;
    if width + k_max - 1 > seq.max_index() {
        return Err(Error::OutOfRange(format!(
            "uniform_k_deviation needs index {} but M = {}",
            width + k_max - 1,
            seq.max_index()
        )));
    }
    let per_z: Vec<KDeviation> = zs
        .par_iter()
        .map(|&z| {
            let mut powers = PartialSumPowers::new(seq, z, width, k_max);
            let mut best = KDeviation { value: f64::NEG_INFINITY, k: 0, z, family: families[0] };
            for k in 1..=k_max {
                if k > 1 {
                    powers.advance();
                }
                let c = powers.values();
                for &family in families {
                    let sum: Complex64 = match family {
                        KeyFamily::LagDifference { lag } => (1..=n).map(|i| c[i + lag] * c[i].conj()).sum(),
                        KeyFamily::Quadruple { lag, q } => (1..=n)
                            .map(|i| c[i + lag + q] * c[i + q].conj() * c[i + lag].conj() * c[i])
                            .sum(),
                    };
                    let expected = family.form(k).expectation(dist, z);
                    let dev = (sum / n as f64 - expected).norm();
                    if dev > best.value {
                        best = KDeviation { value: dev, k, z, family };
                    }
                }
            }
            best
        })
        .collect();
    Ok(per_z
        .into_iter()
        .reduce(|a, d| if a.value >= d.value { a } else { d })
        .expect("nonempty grid"))
}
