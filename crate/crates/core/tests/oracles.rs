//! Closed forms and brute-force recomputations checked against the library.

use num_complex::Complex64;
use stairlab::averages::*;
use stairlab::concentration::*;
use stairlab::phase::irrational_grid;
use stairlab::*;

/// Set partitions of `{0..m}` with no singleton block, by walking every
/// restricted growth string.
fn brute_force_partitions(m: usize) -> u64 {
    fn walk(pos: usize, m: usize, labels: &mut Vec<usize>, blocks: usize, count: &mut u64) {
        if pos == m {
            let mut sizes = vec![0; blocks];
            for &l in labels.iter() {
                sizes[l] += 1;
            }
            if sizes.iter().all(|&s| s >= 2) {
                *count += 1;
            }
            return;
        }
        for l in 0..=blocks {
            labels.push(l);
            walk(pos + 1, m, labels, blocks.max(l + 1), count);
            labels.pop();
        }
    }
    let mut count = 0;
    walk(0, m, &mut Vec::new(), 0, &mut count);
    count
}

#[test]
fn partition_counts_match_enumeration() {
    for m in 0..=8 {
        assert_eq!(no_singleton_partitions(m).unwrap(), brute_force_partitions(m) as u128, "m = {m}");
    }
    assert_eq!(brute_force_partitions(4), 4);
    assert_eq!(brute_force_partitions(6), 41);
    assert_eq!(c_r(2).unwrap(), 96);
    assert_eq!(c_r(3).unwrap(), 41 * 720);
}

#[test]
fn summed_tail_bounds_match_basel_tail() {
    let (delta, d, k, b) = (0.3f64, 2.0f64, 3, 3);
    let basel = std::f64::consts::PI.powi(2) / 6.0;
    for m in [1usize, 5, 100, 10_000] {
        let head: f64 = (1..m).map(|n| (n as f64).powi(-2)).sum();
        let closed = c_r(2).unwrap() as f64 * delta.powi(-4) * (d * k as f64 * b as f64).powi(4) * (basel - head);
        let sum = tail_bound_sum(2, delta, d, k, b, m).unwrap();
        assert!(((sum - closed) / closed).abs() < 1e-9, "m = {m}: {sum} vs {closed}");
    }
    // direct partial sums approach the same value from below
    let direct: f64 = (100..200_000).map(|n| tail_bound(2, delta, d, k, b, n).unwrap().value).sum();
    let total = tail_bound_sum(2, delta, d, k, b, 100).unwrap();
    assert!(direct < total && (total - direct) / total < 1e-3);
}

/// `E z^{Σ c_m b_m}` by summing over every outcome of a finite law.
fn enumerate_expectation(dist_support: &[u64], probs: &[f64], coeffs: &[i64], z: Phase) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    let slots = coeffs.len();
    let mut idx = vec![0usize; slots];
    loop {
        let mut p = 1.0;
        let mut exponent: i128 = 0;
        for (slot, &i) in idx.iter().enumerate() {
            p *= probs[i];
            exponent += coeffs[slot] as i128 * dist_support[i] as i128;
        }
        let angle = 2.0 * std::f64::consts::PI * (z.turns() * exponent as f64);
        total += Complex64::new(angle.cos(), angle.sin()) * p;
        let mut pos = 0;
        loop {
            if pos == slots {
                return total;
            }
            idx[pos] += 1;
            if idx[pos] < dist_support.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

#[test]
fn form_expectations_match_enumeration() {
    let support = [1u64, 2, 5];
    let probs = [0.5, 0.3, 0.2];
    let dist = IncrementDistribution::table(&support, &probs).unwrap();
    for z in [Phase::from_turns(0.137), Phase::from_ratio(2, 7).unwrap(), Phase::golden()] {
        for form in [
            LinearForm::partial_sum(0, 4),
            LinearForm::lag_difference(0, 2, 3),
            LinearForm::quadruple(0, 3, 1, 2),
            LinearForm::from_coefficients(vec![3, -2, 0, 1]),
        ] {
            let exact = enumerate_expectation(&support, &probs, form.coefficients(), z);
            let fast = form.expectation(&dist, z);
            assert!((exact - fast).norm() < 1e-12, "{form:?}: {exact} vs {fast}");
        }
    }
}

#[test]
fn lag_difference_closed_form() {
    // E z^{a_ℓ^{(k)} - a_0^{(k)}} = φ(z^k)^{ℓ-k+1} (E z^{a_0^{(k)}})^2 for ℓ > k
    let g = IncrementDistribution::geometric(0.35).unwrap();
    for z in irrational_grid(6, 1) {
        for k in 1..5usize {
            for ell in k + 1..k + 6 {
                let phi_k = g.char_fn_at(z.pow(k as i128));
                let a0 = LinearForm::partial_sum(0, k).expectation(&g, z);
                let closed = phi_k.powu((ell - k + 1) as u32) * a0 * a0;
                let form = LinearForm::lag_difference(0, ell, k).expectation(&g, z);
                assert!((closed - form).norm() < 1e-13, "k={k} l={ell}");
            }
        }
    }
}

#[test]
fn quadruple_closed_form() {
    // once the two windows separate (k >= q + ℓ - 1):
    // E z^{Y_0} = |φ(z^ℓ)|^{2(q-ℓ+1)} |E z^{a_0^{(ℓ)}}|^4 for q >= ℓ
    let g = IncrementDistribution::geometric(0.5).unwrap();
    for z in irrational_grid(6, 2) {
        for ell in 1..4usize {
            for q in ell..ell + 4 {
                for k in q + ell - 1..q + ell + 3 {
                    let phi = g.char_fn_at(z.pow(ell as i128)).norm();
                    let a0 = LinearForm::partial_sum(0, ell).expectation(&g, z).norm();
                    let closed = phi.powi(2 * (q - ell + 1) as i32) * a0.powi(4);
                    let form = LinearForm::quadruple(0, k, ell, q).expectation(&g, z);
                    assert!(form.im.abs() < 1e-13);
                    assert!((form.re - closed).abs() < 1e-13, "k={k} l={ell} q={q}");
                }
            }
        }
    }
}

#[test]
fn form_expectation_matches_sampling() {
    let g = IncrementDistribution::geometric(0.5).unwrap();
    let z = Phase::from_turns(0.29);
    let form = LinearForm::quadruple(0, 2, 2, 3);
    let mut rng = stairlab::rng::stream_rng(17, 0);
    let trials = 200_000;
    let len = form.coefficients().len();
    let mean: Complex64 = (0..trials)
        .map(|_| z.power(form.evaluate(&g.sample_n(&mut rng, len))))
        .sum::<Complex64>()
        / trials as f64;
    // |z^Y| = 1, so 5 standard errors is at most 5/sqrt(trials)
    assert!((mean - form.expectation(&g, z)).norm() < 5.0 / (trials as f64).sqrt());
}

#[test]
fn vdc4_against_expectation_oracle() {
    let fx: toml::Table = toml::from_str(include_str!("../fixtures/thresholds.toml")).unwrap();
    let f = fx["vdc4_oracle"].as_table().unwrap();
    let int = |k: &str| f[k].as_integer().unwrap() as usize;
    let g = IncrementDistribution::geometric(f["alpha"].as_float().unwrap()).unwrap();
    let seq = StochasticSequence::generate(&g, int("sequence_len"), int("seed") as u64).unwrap();
    let (n, l, q) = (int("n"), int("l"), int("q"));
    let z = Phase::golden();
    let report = vdc4_bound(&seq, z, n, l, q).unwrap();
    assert!(report.check().holds(1e-6));

    // the same finite bound with each lag average replaced by E z^{Y_0}
    let (nf, lf, qf) = (n as f64, l as f64, q as f64);
    let mut lag_sum = 0.0;
    for ell in 1..=l {
        let weighted: f64 = (1..q)
            .map(|qq| (qf - qq as f64) / qf * LinearForm::quadruple(0, report.argmax_k, ell, qq).expectation(&g, z).re)
            .sum();
        lag_sum += (nf + qf) / nf * (1.0 / qf + 2.0 * weighted / qf) + 2.0 * qf * (nf + qf) / (nf * nf);
    }
    let grow = (nf + lf) / nf;
    let oracle = grow * grow * (1.0 / (lf * lf) + 4.0 / lf + 4.0 / lf * lag_sum)
        + 12.0 * lf * (nf + lf).powi(2) / nf.powi(3)
        + 4.0 * lf * lf * (nf + lf).powi(2) / nf.powi(4);
    assert!((report.rhs - oracle).abs() < f["tolerance"].as_float().unwrap(), "{} vs {oracle}", report.rhs);
}

#[test]
fn vdc4_trivial_cases() {
    let g = IncrementDistribution::geometric(0.5).unwrap();
    let seq = StochasticSequence::generate(&g, 400, 1).unwrap();
    let r = vdc4_bound(&seq, Phase::ONE, 100, 5, 7).unwrap();
    assert_eq!(r.lhs, 1.0);
    assert!(r.rhs >= 1.0);
    let r = vdc4_bound(&seq, Phase::from_turns(0.3), 100, 1, 1).unwrap();
    assert!(r.rhs >= 5.0 && r.lhs <= 1.0);
}

#[test]
fn spectral_integral_decays_for_atoms_away_from_one() {
    let ones = StochasticSequence::from_increments(vec![1; 5000]).unwrap();
    let atoms = vec![Phase::from_turns(0.2), Phase::golden(), Phase::from_ratio(1, 3).unwrap()];
    let weights = vec![0.5, 0.3, 0.2];
    let m = DiscreteSpectralMeasure::new(atoms.clone(), weights.clone(), "three atoms").unwrap();
    let mut last = f64::INFINITY;
    for n in [10usize, 100, 1000, 4000] {
        let closed: f64 = atoms
            .iter()
            .zip(&weights)
            .map(|(z, w)| {
                let zc = z.to_complex();
                let zn = z.power(n as i128);
                w * ((Complex64::new(1.0, 0.0) - zn) / ((Complex64::new(1.0, 0.0) - zc) * n as f64)).norm_sqr()
            })
            .sum();
        let v = spectral_integral(&m, &ones, n, 1).unwrap();
        assert!((v - closed).abs() < 1e-12);
        assert!(v < last);
        last = v;
    }
    assert!(last < 1e-4);
}

#[test]
fn odometer_atom_at_minus_one_never_decays() {
    let ones = StochasticSequence::from_increments(vec![1; 5000]).unwrap();
    let odo = DiscreteSpectralMeasure::odometer(8).unwrap();
    for n in [100usize, 1000, 4000] {
        // a_n^{(2)} = 2n + 1, so (-1)^{a_n^{(2)}} = -1 for every n
        assert!(spectral_integral(&odo, &ones, n, 2).unwrap() >= 0.5 - 1e-12);
    }
}

#[test]
fn wpe_atom_at_minus_one() {
    for w in [0.2, 0.5, 0.9] {
        let m = DiscreteSpectralMeasure::new(
            vec![Phase::from_ratio(1, 2).unwrap(), Phase::from_turns(0.3)],
            vec![w, 1.0 - w],
            "minus one",
        )
        .unwrap();
        for n in [10usize, 50, 200] {
            assert!(wpe_functional(&m, n).unwrap().value >= w - 1e-12);
        }
    }
}

#[test]
fn wpe_matches_direct_sums() {
    let m = DiscreteSpectralMeasure::new(
        vec![Phase::from_turns(0.1234), Phase::golden(), Phase::from_ratio(3, 8).unwrap()],
        vec![0.2, 0.5, 0.3],
        "direct",
    )
    .unwrap();
    let n = 60;
    let direct = (1..=n)
        .map(|k| {
            m.atoms()
                .iter()
                .zip(m.weights())
                .map(|(z, w)| {
                    let s: Complex64 = (1..=n).map(|i| z.power((i * k) as i128)).sum();
                    w * (s / n as f64).norm_sqr()
                })
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    assert!((wpe_functional(&m, n).unwrap().value - direct).abs() < 1e-12);
}

#[test]
fn wpe_golden_is_frozen() {
    let fx: toml::Table = toml::from_str(include_str!("../fixtures/thresholds.toml")).unwrap();
    let f = fx["wpe_golden"].as_table().unwrap();
    let v = wpe_functional(&DiscreteSpectralMeasure::rotation(Phase::golden()), f["n"].as_integer().unwrap() as usize)
        .unwrap();
    assert_eq!(v.argmax_k as i64, f["argmax_k"].as_integer().unwrap());
    assert!((v.value - f["observed"].as_float().unwrap()).abs() < f["tolerance"].as_float().unwrap());
}

#[test]
fn rotation_correlation_matches_grid_measure() {
    let grid = 200_000;
    for (theta, beta, lag) in [(0.3217, 0.25, 3i64), (0.618, 0.6, 1), (0.1, 0.4, -2), (0.5, 0.5, 1)] {
        let x = (lag as f64 * theta).rem_euclid(1.0);
        let count = (0..grid)
            .filter(|&i| {
                let u = (i as f64 + 0.5) / grid as f64;
                u < beta && (u - x).rem_euclid(1.0) < beta
            })
            .count();
        let v = rotation_correlation(Phase::from_turns(theta), beta, lag).unwrap();
        assert!((v - count as f64 / grid as f64).abs() < 1e-4, "theta={theta} beta={beta}");
    }
}

#[test]
fn rotation_correlation_averages_to_beta_squared() {
    let theta = Phase::golden();
    for beta in [0.2, 0.5, 0.7] {
        let avg = (1..=10_000).map(|l| rotation_correlation(theta, beta, l).unwrap()).sum::<f64>() / 10_000.0;
        assert!((avg - beta * beta).abs() < 0.01);
    }
}

#[test]
fn cesaro_bound_decays_for_aperiodic_laws() {
    let g = IncrementDistribution::table(&[2, 3], &[0.5, 0.5]).unwrap();
    for z in [Phase::from_turns(0.25), Phase::golden(), Phase::from_ratio(1, 2).unwrap()] {
        let short = cesaro_char_bound(&g, z, 10).unwrap();
        let long = cesaro_char_bound(&g, z, 10_000).unwrap();
        assert!(long < short.max(1e-6) && long < 1e-5);
    }
}

#[test]
fn tail_bound_plug_in() {
    assert!((tail_bound(2, 1.0, 1.0, 1, 1, 100).unwrap().value - 0.0096).abs() < 1e-15);
    assert!(tail_bound(2, 1.0, 1.0, 1, 1, 1).unwrap().value >= 1.0);
}
