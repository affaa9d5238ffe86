//! Exponential sums along stochastic sequences, discrete spectral measures,
//! and finite forms of the inequalities used to bound them.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::IncrementDistribution;
use crate::error::{Error, Result};
use crate::phase::{Phase, UNIT_TOLERANCE};
use crate::sequences::StochasticSequence;

/// Slack accepted when checking `|c_n| <= 1`.
pub const MODULUS_SLACK: f64 = 1e-12;
/// Mass tolerance for spectral measures.
pub const MEASURE_TOLERANCE: f64 = 1e-12;
/// Tolerance for normalized weight vectors.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

/// A single `lhs <= rhs` evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
}

impl InequalityCheck {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn holds(&self, tolerance: f64) -> bool {
        self.lhs <= self.rhs + tolerance
    }
}

/// One row of an inequality suite report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InequalityCase {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

impl InequalityCase {
    pub fn new(name: impl Into<String>, check: InequalityCheck) -> Self {
        InequalityCase { name: name.into(), lhs: check.lhs, rhs: check.rhs, margin: check.margin() }
    }
}

// ---------------------------------------------------------------------------
// spectral measures

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiscreteSpectralMeasure {
    atoms: Vec<Phase>,
    weights: Vec<f64>,
    label: String,
}

impl DiscreteSpectralMeasure {
    pub fn new(atoms: Vec<Phase>, weights: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "measure needs matching nonempty atoms/weights, got {} and {}",
                atoms.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidArgument(format!("atom weight {w} is not positive")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MEASURE_TOLERANCE {
            return Err(Error::InvalidArgument(format!("atom weights sum to {total}, not 1")));
        }
        let mut sorted: Vec<f64> = atoms.iter().map(|a| a.turns()).collect();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[1] - w[0] <= UNIT_TOLERANCE) {
            return Err(Error::InvalidArgument("measure atoms are not pairwise distinct".into()));
        }
        Ok(DiscreteSpectralMeasure { atoms, weights, label: label.into() })
    }

    /// Atoms given as complex numbers; each must lie on the circle.
    pub fn from_complex(atoms: &[Complex64], weights: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let atoms = atoms.iter().map(|&z| Phase::from_complex(z)).collect::<Result<Vec<_>>>()?;
        DiscreteSpectralMeasure::new(atoms, weights, label)
    }

    /// The spectral measure of a constant function.
    pub fn point_mass_at_one() -> Self {
        DiscreteSpectralMeasure { atoms: vec![Phase::ONE], weights: vec![1.0], label: "point mass at 1".into() }
    }

    /// A single atom at `e^{2πiθ}`, as for an eigenfunction of the rotation by `θ`.
    pub fn rotation(theta: Phase) -> Self {
        DiscreteSpectralMeasure {
            atoms: vec![theta],
            weights: vec![1.0],
            label: format!("rotation theta={}", theta.turns()),
        }
    }

    /// Dyadic odometer model: atom `e^{2πi/2^j}` with weight `2^-j`, `j = 1..=depth`;
    /// the last atom absorbs the remaining mass.
    pub fn odometer(depth: u32) -> Result<Self> {
        if depth == 0 || depth > 62 {
            return Err(Error::InvalidArgument(format!("odometer depth {depth} outside 1..=62")));
        }
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for j in 1..=depth {
            atoms.push(Phase::root_of_unity(1, 1u64 << j)?);
            weights.push(0.5f64.powi(j as i32));
        }
        *weights.last_mut().expect("depth >= 1") *= 2.0;
        DiscreteSpectralMeasure::new(atoms, weights, format!("dyadic odometer depth={depth}"))
    }

    pub fn atoms(&self) -> &[Phase] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `σ({1})`.
    pub fn mass_at_one(&self) -> f64 {
        self.atoms.iter().zip(&self.weights).filter(|(a, _)| a.is_one()).map(|(_, w)| w).sum()
    }

    /// Mass on roots of unity of order at most `max_order` (including 1).
    pub fn mass_on_roots_of_unity(&self, max_order: u64) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .filter(|(a, _)| (1..=max_order).any(|q| a.pow(q as i128).distance_to_one() < 1e-12))
            .map(|(_, w)| w)
            .sum()
    }
}

// ---------------------------------------------------------------------------
// exponential averages

fn check_range(seq: &StochasticSequence, needed: usize, what: &str) -> Result<()> {
    if needed > seq.max_index() {
        return Err(Error::OutOfRange(format!(
            "{what} needs index {needed} but the sequence has M = {}",
            seq.max_index()
        )));
    }
    Ok(())
}

/// `z^{a_n^{(k)}}` for `n = 1..=count`.
fn power_vector(seq: &StochasticSequence, z: Phase, k: usize, count: usize) -> Vec<Complex64> {
    (1..=count).map(|n| z.power(seq.partial(n, k) as i128)).collect()
}

fn mean(values: &[Complex64]) -> Complex64 {
    values.iter().sum::<Complex64>() / values.len() as f64
}

/// `(1/N) Σ_{n=1}^{N} z^{a_n^{(k)}}`.
pub fn exp_average(seq: &StochasticSequence, z: Phase, n: usize, k: usize) -> Result<Complex64> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidArgument("N and k must be at least 1".into()));
    }
    check_range(seq, n + k, "exp_average")?;
    if z.is_one() {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let sum: Complex64 = (1..=n).map(|i| z.power(seq.partial(i, k) as i128)).sum();
    Ok(sum / n as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupAverage {
    pub value: f64,
    pub argmax_k: usize,
}

/// Steps between exact re-anchoring in [`PartialSumPowers`].
pub const REANCHOR: usize = 128;

/// `z^{a_i^{(k)}}` for `i = 0..=width`, advanced in `k`.
///
/// Moving from `k` to `k + 1` multiplies entry `i` by `z^{a_{i+k}}`; every
/// [`REANCHOR`] steps the entries are recomputed exactly so that rounding
/// cannot accumulate.
pub(crate) struct PartialSumPowers<'a> {
    seq: &'a StochasticSequence,
    z: Phase,
    k: usize,
    w: Vec<Complex64>,
    c: Vec<Complex64>,
}

impl<'a> PartialSumPowers<'a> {
    /// Caller guarantees `width + k_max <= M + 1`.
    pub(crate) fn new(seq: &'a StochasticSequence, z: Phase, width: usize, k_max: usize) -> Self {
        let w: Vec<Complex64> = (0..width + k_max).map(|i| z.power(seq.a(i) as i128)).collect();
        let c = w[..=width].to_vec();
        PartialSumPowers { seq, z, k: 1, w, c }
    }

    pub(crate) fn k(&self) -> usize {
        self.k
    }

    pub(crate) fn values(&self) -> &[Complex64] {
        &self.c
    }

    pub(crate) fn advance(&mut self) {
        self.k += 1;
        let k = self.k;
        if k.is_multiple_of(REANCHOR) {
            for (i, ci) in self.c.iter_mut().enumerate() {
                *ci = self.z.power(self.seq.partial(i, k) as i128);
            }
        } else {
            for (i, ci) in self.c.iter_mut().enumerate() {
                *ci *= self.w[i + k - 1];
            }
        }
    }
}

/// `max_{1<=k<=N} |exp_average(seq, z, N, k)|`.
pub fn sup_exp_average(seq: &StochasticSequence, z: Phase, n: usize) -> Result<SupAverage> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    check_range(seq, 2 * n, "sup_exp_average")?;
    if z.is_one() {
        return Ok(SupAverage { value: 1.0, argmax_k: 1 });
    }
    let mut powers = PartialSumPowers::new(seq, z, n, n);
    let mut best = SupAverage { value: f64::NEG_INFINITY, argmax_k: 0 };
    loop {
        let v = (mean(&powers.values()[1..=n])).norm();
        if v > best.value {
            best = SupAverage { value: v, argmax_k: powers.k() };
        }
        if powers.k() == n {
            break;
        }
        powers.advance();
    }
    Ok(best)
}

/// `Σ_i w_i |exp_average(seq, z_i, N, k)|²`.
pub fn spectral_integral(
    measure: &DiscreteSpectralMeasure,
    seq: &StochasticSequence,
    n: usize,
    k: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for (z, w) in measure.atoms.iter().zip(&measure.weights) {
        total += w * exp_average(seq, *z, n, k)?.norm_sqr();
    }
    Ok(total)
}

/// `|(1/L) Σ_{ℓ=1}^{L} φ(z)^ℓ|²`.
pub fn cesaro_char_bound(dist: &IncrementDistribution, z: Phase, l: usize) -> Result<f64> {
    if l == 0 {
        return Err(Error::InvalidArgument("L must be at least 1".into()));
    }
    let phi = dist.char_fn_at(z);
    let mut power = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    for _ in 0..l {
        power *= phi;
        sum += power;
    }
    Ok((sum / l as f64).norm_sqr())
}

/// `1/L + (2/L) Σ_{ℓ=1}^{L-1} (L-ℓ)/L Re φ(z)^ℓ`, the limit of the
/// van der Corput bound when the lag averages converge to `φ(z)^ℓ`.
///
/// Agrees with [`cesaro_char_bound`] only when `|φ(z)| = 1`; otherwise it is larger.
pub fn vdc_limit_bound(dist: &IncrementDistribution, z: Phase, l: usize) -> Result<f64> {
    if l == 0 {
        return Err(Error::InvalidArgument("L must be at least 1".into()));
    }
    let lf = l as f64;
    let phi = dist.char_fn_at(z);
    let mut power = Complex64::new(1.0, 0.0);
    let mut acc = 0.0;
    for ell in 1..l {
        power *= phi;
        acc += (lf - ell as f64) / lf * power.re;
    }
    Ok(1.0 / lf + 2.0 / lf * acc)
}

/// Slack for the finite-`N` form of `|avg|² <= vdc_limit_bound`: the
/// boundary terms of the van der Corput bound plus a lag-average deviation
/// band of `band_scale / sqrt(N)` per lag.
pub fn ergodic_slack(n: usize, l: usize, band_scale: f64) -> f64 {
    let (nf, lf) = (n as f64, l as f64);
    let grow = (nf + lf) / nf;
    (grow - 1.0) + 2.0 * lf * (nf + lf) / (nf * nf) + grow * 2.0 * band_scale / nf.sqrt()
}

fn check_unit_bounded(c: &[Complex64]) -> Result<()> {
    if let Some((i, v)) = c.iter().enumerate().find(|(_, v)| v.norm().is_nan() || v.norm() > 1.0 + MODULUS_SLACK) {
        return Err(Error::InvalidArgument(format!("|c_{}| = {} exceeds 1", i + 1, v.norm())));
    }
    Ok(())
}

/// Right side of the boundary-corrected van der Corput inequality for
/// `c_1..c_N` with `c_{N+1}, c_{N+2}, ...` taken from `tail`.
fn vdc_rhs(c: &[Complex64], n: usize, l: usize) -> f64 {
    let (nf, lf) = (n as f64, l as f64);
    let at = |i: usize| c.get(i).copied().unwrap_or_default();
    let mut weighted = 0.0;
    for ell in 1..l {
        let corr: Complex64 = (0..n).map(|i| at(i + ell) * at(i).conj()).sum();
        weighted += (lf - ell as f64) / lf * (corr.re / nf);
    }
    (nf + lf) / nf * (1.0 / lf + 2.0 * weighted / lf) + 2.0 * lf * (nf + lf) / (nf * nf)
}

/// Boundary-corrected van der Corput inequality with `N = c.len()`.
///
/// Terms `c_{n+ℓ}` with `n + ℓ > N` are taken to be zero.
pub fn vdc_check(c: &[Complex64], l: usize) -> Result<InequalityCheck> {
    vdc_check_extended(c, c.len(), l)
}

/// As [`vdc_check`], averaging the first `n` entries and reading lagged
/// terms from the rest of `c` (missing ones are zero).
pub fn vdc_check_extended(c: &[Complex64], n: usize, l: usize) -> Result<InequalityCheck> {
    if n == 0 || l == 0 || n > c.len() {
        return Err(Error::InvalidArgument(format!("vdc_check needs 1 <= N <= len and L >= 1 (N={n}, L={l})")));
    }
    check_unit_bounded(c)?;
    let lhs = mean(&c[..n]).norm_sqr();
    Ok(InequalityCheck { lhs, rhs: vdc_rhs(c, n, l) })
}

/// `|(1/N) Σ c_n|² <= (1/N) Σ |c_n|²`.
pub fn holder_check(c: &[Complex64]) -> Result<InequalityCheck> {
    if c.is_empty() {
        return Err(Error::InvalidArgument("holder_check needs a nonempty list".into()));
    }
    check_unit_bounded(c)?;
    let lhs = mean(c).norm_sqr();
    let rhs = c.iter().map(|v| v.norm_sqr()).sum::<f64>() / c.len() as f64;
    Ok(InequalityCheck { lhs, rhs })
}

/// Triangle-weighted form: `|(1/L) Σ_{ℓ<L} (L-ℓ)/L c_ℓ|² <= (1/L) Σ_{ℓ<=L} |c_ℓ|²`
/// with `L = c.len()`.
pub fn triangle_holder_check(c: &[Complex64]) -> Result<InequalityCheck> {
    if c.is_empty() {
        return Err(Error::InvalidArgument("triangle_holder_check needs a nonempty list".into()));
    }
    check_unit_bounded(c)?;
    let lf = c.len() as f64;
    let weighted: Complex64 = c[..c.len() - 1]
        .iter()
        .enumerate()
        .map(|(i, v)| v * ((lf - (i + 1) as f64) / lf))
        .sum();
    let lhs = (weighted / lf).norm_sqr();
    let rhs = c.iter().map(|v| v.norm_sqr()).sum::<f64>() / lf;
    Ok(InequalityCheck { lhs, rhs })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vdc4Report {
    /// `sup_{k<=N} |(1/N) Σ z^{a_n^{(k)}}|⁴`
    pub lhs: f64,
    /// Finite double van der Corput bound at `argmax_k`.
    pub rhs: f64,
    pub argmax_k: usize,
}

impl Vdc4Report {
    pub fn check(&self) -> InequalityCheck {
        InequalityCheck { lhs: self.lhs, rhs: self.rhs }
    }
}

/// Finite double van der Corput bound for one `k`:
///
/// `((N+L)/N)² (1/L² + 4/L + (4/L) Σ_{ℓ=1}^{L} B_ℓ) + 12L(N+L)²/N³ + 4L²(N+L)²/N⁴`
///
/// where `B_ℓ = (N+Q)/N (1/Q + 2 Re[(1/Q) Σ_{q<Q} (Q-q)/Q (1/N) Σ_n z^{Y_n}]) + 2Q(N+Q)/N²`
/// bounds the squared lag-`ℓ` average.
pub fn vdc4_rhs(seq: &StochasticSequence, z: Phase, n: usize, l: usize, q: usize, k: usize) -> Result<f64> {
    if n == 0 || l == 0 || q == 0 || k == 0 {
        return Err(Error::InvalidArgument("vdc4 needs N, L, Q, k >= 1".into()));
    }
    check_range(seq, n + l + q + k - 1, "vdc4_bound")?;
    let (nf, lf, qf) = (n as f64, l as f64, q as f64);
    let c = power_vector(seq, z, k, n + l + q);
    // c[i] = z^{a_{i+1}^{(k)}}
    let mut lag_sum = 0.0;
    for ell in 1..=l {
        let d: Vec<Complex64> = (0..n + q).map(|i| c[i + ell] * c[i].conj()).collect();
        let mut weighted = 0.0;
        for qq in 1..q {
            let corr: Complex64 = (0..n).map(|i| d[i + qq] * d[i].conj()).sum();
            weighted += (qf - qq as f64) / qf * (corr.re / nf);
        }
        let b_ell = (nf + qf) / nf * (1.0 / qf + 2.0 * weighted / qf) + 2.0 * qf * (nf + qf) / (nf * nf);
        lag_sum += b_ell;
    }
    let grow = (nf + lf) / nf;
    Ok(grow * grow * (1.0 / (lf * lf) + 4.0 / lf + 4.0 / lf * lag_sum)
        + 12.0 * lf * (nf + lf).powi(2) / nf.powi(3)
        + 4.0 * lf * lf * (nf + lf).powi(2) / nf.powi(4))
}

/// `sup_k |avg|⁴` against the finite double van der Corput bound at the maximizing `k`.
pub fn vdc4_bound(seq: &StochasticSequence, z: Phase, n: usize, l: usize, q: usize) -> Result<Vdc4Report> {
    check_range(seq, 2 * n + l + q, "vdc4_bound")?;
    let sup = sup_exp_average(seq, z, n)?;
    let rhs = vdc4_rhs(seq, z, n, l, q, sup.argmax_k)?;
    Ok(Vdc4Report { lhs: sup.value.powi(4), rhs, argmax_k: sup.argmax_k })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadrupleDifference {
    pub value: i128,
    /// Whether `Y_n = (a_q^{(ℓ)} - a_0^{(ℓ)})∘Θ^{n+k} - (a_q^{(ℓ)} - a_0^{(ℓ)})∘Θ^n`.
    pub factorization_holds: bool,
}

/// `Y_n^{(k,ℓ,q)} = a_{n+ℓ+q}^{(k)} - a_{n+q}^{(k)} - a_{n+ℓ}^{(k)} + a_n^{(k)}`.
pub fn quadruple_difference(
    seq: &StochasticSequence,
    n: usize,
    k: usize,
    lag: usize,
    q: usize,
) -> Result<QuadrupleDifference> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    check_range(seq, n + lag + q + k, "quadruple_difference")?;
    let p = |i: usize| seq.partial(i, k) as i128;
    let value = p(n + lag + q) - p(n + q) - p(n + lag) + p(n);
    let factorized = if lag == 0 {
        0
    } else {
        let inner = |t: usize| {
            let v = seq.shifted(t);
            v.partial(q, lag) as i128 - v.partial(0, lag) as i128
        };
        inner(n + k) - inner(n)
    };
    Ok(QuadrupleDifference { value, factorization_holds: factorized == value })
}

/// `|(1/N) Σ_{n=1}^{N} w^n|`, via the Dirichlet kernel.
pub fn dirichlet_mean(w: Phase, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let phi = w.signed_turns();
    if w.is_one() || phi == 0.0 {
        return 1.0;
    }
    let top = (std::f64::consts::PI * w.pow(n as i128).signed_turns()).sin().abs();
    let bottom = n as f64 * (std::f64::consts::PI * phi).sin().abs();
    (top / bottom).min(1.0)
}

/// Block inequality `|(1/N) Σ z^n| <= |(1/L) Σ z^{ℓp}| + pL/N`.
pub fn block_lemma_check(z: Phase, n: usize, l: usize, p: usize) -> Result<InequalityCheck> {
    if n == 0 || l == 0 || p == 0 {
        return Err(Error::InvalidArgument("block_lemma_check needs N, L, p >= 1".into()));
    }
    let lhs = dirichlet_mean(z, n);
    let rhs = dirichlet_mean(z.pow(p as i128), l) + (p * l) as f64 / n as f64;
    Ok(InequalityCheck { lhs, rhs })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedMeans {
    pub l1: f64,
    pub l2: f64,
}

/// `(Σ w_n |c_n|, Σ w_n |c_n|²)`.
pub fn weighted_mean_square_equiv(weights: &[f64], c: &[Complex64]) -> Result<WeightedMeans> {
    if weights.len() != c.len() || weights.is_empty() {
        return Err(Error::InvalidArgument("weights and values must have equal nonzero length".into()));
    }
    if weights.iter().any(|w| w.is_nan() || *w < 0.0) {
        return Err(Error::InvalidArgument("weights must be nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
    }
    check_unit_bounded(c)?;
    let l1 = weights.iter().zip(c).map(|(w, v)| w * v.norm()).sum();
    let l2 = weights.iter().zip(c).map(|(w, v)| w * v.norm_sqr()).sum();
    Ok(WeightedMeans { l1, l2 })
}

/// Lower bound on the weighted mean square implied by a weighted mean of `eps`.
pub fn weighted_l2_floor(eps: f64) -> f64 {
    eps.powi(3) / 8.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WpeValue {
    pub value: f64,
    pub argmax_k: usize,
}

/// `sup_{k<=N} Σ_i w_i |(1/N) Σ_n z_i^{nk}|²`.
pub fn wpe_functional(measure: &DiscreteSpectralMeasure, n: usize) -> Result<WpeValue> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    let best = (1..=n)
        .into_par_iter()
        .map(|k| {
            let v: f64 = measure
                .atoms
                .iter()
                .zip(&measure.weights)
                .map(|(z, w)| w * dirichlet_mean(z.pow(k as i128), n).powi(2))
                .sum();
            (v, k)
        })
        .reduce(|| (f64::NEG_INFINITY, 0), |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    Ok(WpeValue { value: best.0, argmax_k: best.1 })
}

/// Lebesgue measure of `[0,β) ∩ ([0,β) + ℓθ mod 1)`.
pub fn rotation_correlation(theta: Phase, beta: f64, lag: i64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!("beta = {beta} outside (0,1)")));
    }
    let x = theta.pow(lag as i128).turns();
    Ok((beta - x).max(0.0) + (x + beta - 1.0).max(0.0))
}

// ---------------------------------------------------------------------------
// series

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageRow {
    pub n: usize,
    pub k: usize,
    pub z: Complex64,
    pub avg: Complex64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AverageSeries {
    pub sequence: String,
    pub target: String,
    pub rows: Vec<AverageRow>,
}

impl AverageSeries {
    /// Running averages `(1/N) Σ_{n<=N} z^{a_n^{(k)}}` at every `N` in `grid`, in one pass.
    pub fn running(seq: &StochasticSequence, z: Phase, k: usize, grid: &[usize], sequence: impl Into<String>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let mut grid = grid.to_vec();
        grid.sort_unstable();
        grid.dedup();
        let top = match grid.last() {
            Some(&t) if grid[0] > 0 => t,
            _ => return Err(Error::InvalidArgument("N-grid must be nonempty and positive".into())),
        };
        check_range(seq, top + k, "AverageSeries")?;
        let zc = z.to_complex();
        let mut rows = Vec::with_capacity(grid.len());
        let mut sum = Complex64::new(0.0, 0.0);
        let mut next = grid.iter().peekable();
        for i in 1..=top {
            sum += z.power(seq.partial(i, k) as i128);
            if next.peek() == Some(&&i) {
                next.next();
                rows.push(AverageRow { n: i, k, z: zc, avg: sum / i as f64 });
            }
        }
        Ok(AverageSeries { sequence: sequence.into(), target: format!("z=e^(2pi i {})", z.turns()), rows })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "N,k,z_re,z_im,avg_re,avg_im,abs")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.n,
                r.k,
                r.z.re,
                r.z.im,
                r.avg.re,
                r.avg.im,
                r.avg.norm()
            )?;
        }
        Ok(())
    }
}
