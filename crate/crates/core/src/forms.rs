//! Integer linear forms `Σ c_m b_m` in the increments.
//!
//! Every quantity built from partial sums (`a_n^{(k)}`, lag differences,
//! quadruple differences) is such a form. Since the `b_m` are iid,
//! `E z^{Σ c_m b_m} = Π_m E z^{c_m b}`, which gives exact expectations from
//! the characteristic function alone.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::distributions::IncrementDistribution;
use crate::phase::Phase;

/// Coefficients of `b_1, b_2, ...`; `coeffs[m - 1]` multiplies `b_m`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinearForm {
    coeffs: Vec<i64>,
}

impl LinearForm {
    pub fn from_coefficients(coeffs: Vec<i64>) -> Self {
        let mut f = LinearForm { coeffs };
        f.trim();
        f
    }

    fn trim(&mut self) {
        while self.coeffs.last() == Some(&0) {
            self.coeffs.pop();
        }
    }

    /// `a_n = b_1 + ... + b_n`.
    pub fn a(n: usize) -> Self {
        LinearForm { coeffs: vec![1; n] }
    }

    /// `a_n^{(k)}`: `b_m` appears in `a_{n+z}` for every `z >= m - n`, so its
    /// coefficient is `k - clamp(m - n, 0, k)`.
    pub fn partial_sum(n: usize, k: usize) -> Self {
        let len = (n + k).saturating_sub(1);
        let coeffs = (1..=len)
            .map(|m| {
                let excess = m.saturating_sub(n).min(k);
                (k - excess) as i64
            })
            .collect();
        LinearForm::from_coefficients(coeffs)
    }

    /// `a_{n+ℓ}^{(k)} - a_n^{(k)}`.
    pub fn lag_difference(n: usize, lag: usize, k: usize) -> Self {
        LinearForm::partial_sum(n + lag, k) - LinearForm::partial_sum(n, k)
    }

    /// `Y_n^{(k,ℓ,q)} = a_{n+ℓ+q}^{(k)} - a_{n+q}^{(k)} - a_{n+ℓ}^{(k)} + a_n^{(k)}`.
    pub fn quadruple(n: usize, k: usize, lag: usize, q: usize) -> Self {
        LinearForm::partial_sum(n + lag + q, k) - LinearForm::partial_sum(n + q, k)
            - LinearForm::partial_sum(n + lag, k)
            + LinearForm::partial_sum(n, k)
    }

    pub fn coefficients(&self) -> &[i64] {
        &self.coeffs
    }

    pub fn coefficient(&self, m: usize) -> i64 {
        self.coeffs.get(m - 1).copied().unwrap_or(0)
    }

    /// Indices `m` with a nonzero coefficient.
    pub fn dependencies(&self) -> Vec<usize> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// Value on concrete increments (`increments[m - 1] = b_m`).
    pub fn evaluate(&self, increments: &[u64]) -> i128 {
        self.coeffs
            .iter()
            .zip(increments)
            .map(|(&c, &b)| c as i128 * b as i128)
            .sum()
    }

    /// `E z^{form}` as a product of characteristic-function values.
    pub fn expectation(&self, dist: &IncrementDistribution, z: Phase) -> Complex64 {
        let mut counts: BTreeMap<i64, u32> = BTreeMap::new();
        for &c in self.coeffs.iter().filter(|&&c| c != 0) {
            *counts.entry(c).or_default() += 1;
        }
        counts
            .into_iter()
            .map(|(c, mult)| dist.char_fn_scaled(z, c).powu(mult))
            .product()
    }

    fn combine(mut self, other: &LinearForm, sign: i64) -> Self {
        if self.coeffs.len() < other.coeffs.len() {
            self.coeffs.resize(other.coeffs.len(), 0);
        }
        for (a, &b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += sign * b;
        }
        self.trim();
        self
    }
}

impl std::ops::Add for LinearForm {
    type Output = LinearForm;
    fn add(self, rhs: LinearForm) -> LinearForm {
        self.combine(&rhs, 1)
    }
}

impl std::ops::Sub for LinearForm {
    type Output = LinearForm;
    fn sub(self, rhs: LinearForm) -> LinearForm {
        self.combine(&rhs, -1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::StochasticSequence;

    #[test]
    fn partial_sum_coefficients() {
        // a_0^{(4)} = 3 b_1 + 2 b_2 + b_3
        assert_eq!(LinearForm::partial_sum(0, 4).coefficients(), &[3, 2, 1]);
        // a_2^{(3)} = a_2 + a_3 + a_4 = 3b_1 + 3b_2 + 2b_3 + b_4
        assert_eq!(LinearForm::partial_sum(2, 3).coefficients(), &[3, 3, 2, 1]);
        assert_eq!(LinearForm::partial_sum(0, 1).coefficients(), &[] as &[i64]);
    }

    #[test]
    fn forms_agree_with_sequences() {
        let s = StochasticSequence::from_increments(vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]).unwrap();
        for n in 0..4 {
            for k in 1..5 {
                let f = LinearForm::partial_sum(n, k);
                assert_eq!(f.evaluate(s.increments()) as u128, s.partial(n, k));
            }
        }
        let y = LinearForm::quadruple(0, 3, 1, 1);
        assert_eq!(y.evaluate(s.increments()), 5);
    }

    #[test]
    fn expectation_of_a_ell_is_power() {
        let g = IncrementDistribution::geometric(0.4).unwrap();
        let z = Phase::from_turns(0.37);
        let phi = g.char_fn_at(z);
        let e = LinearForm::a(5).expectation(&g, z);
        assert!((e - phi.powu(5)).norm() < 1e-14);
    }
}
