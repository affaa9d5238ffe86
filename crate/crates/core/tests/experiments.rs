//! Seeded experiments checked against the thresholds frozen in `fixtures/`.

use stairlab::averages::*;
use stairlab::concentration::*;
use stairlab::phase::irrational_grid;
use stairlab::tower::mixing_profile;
use stairlab::*;

fn fixture(section: &str) -> toml::Table {
    let all: toml::Table = toml::from_str(include_str!("../fixtures/thresholds.toml")).unwrap();
    all[section].as_table().unwrap().clone()
}

fn int(t: &toml::Table, key: &str) -> usize {
    t[key].as_integer().unwrap() as usize
}

fn float(t: &toml::Table, key: &str) -> f64 {
    t[key].as_float().unwrap()
}

#[test]
fn sup_average_at_golden_angle() {
    let f = fixture("sup_exp_average_golden");
    let g = IncrementDistribution::geometric(float(&f, "alpha")).unwrap();
    let seq = StochasticSequence::generate(&g, int(&f, "sequence_len"), int(&f, "seed") as u64).unwrap();
    let sup = sup_exp_average(&seq, Phase::golden(), int(&f, "n")).unwrap();
    assert!((sup.value - float(&f, "observed")).abs() < 1e-6, "re-freeze: observed {}", sup.value);
    assert_eq!(sup.argmax_k, int(&f, "argmax_k"));
    assert!(sup.value < float(&f, "threshold"));
}

#[test]
fn lag_and_quadruple_averages_track_expectations() {
    let f = fixture("uniform_k_deviation");
    let g = IncrementDistribution::geometric(float(&f, "alpha")).unwrap();
    let seq = StochasticSequence::generate(&g, int(&f, "sequence_len"), int(&f, "seed") as u64).unwrap();
    let zs = irrational_grid(int(&f, "grid_count"), int(&f, "grid_seed") as u64);
    let families = [
        KeyFamily::Quadruple { lag: int(&f, "quadruple_lag"), q: int(&f, "quadruple_q") },
        KeyFamily::LagDifference { lag: int(&f, "difference_lag") },
    ];
    let n = int(&f, "n");
    let dev = uniform_k_deviation(&seq, &g, &families, &zs, n, n).unwrap();
    assert!((dev.value - float(&f, "observed")).abs() < 1e-6, "re-freeze: observed {}", dev.value);
    assert!(dev.value < float(&f, "threshold"));
}

#[test]
fn increments_obey_the_strong_law() {
    let f = fixture("strong_law_increment");
    let g = IncrementDistribution::geometric(float(&f, "alpha")).unwrap();
    let n = int(&f, "n");
    let path = strong_law_trajectory(&IncrementValue, &g, &[n / 100, n / 10, n], int(&f, "seed") as u64).unwrap();
    let last = path.last().unwrap().avg.norm();
    assert!((last - float(&f, "observed")).abs() < 1e-5, "re-freeze: observed {last}");
    assert!(last < float(&f, "threshold"));
}

#[test]
fn averages_fall_inside_the_root_n_band() {
    let n = 1_000_000;
    let g = IncrementDistribution::geometric(0.5).unwrap();
    let seq = StochasticSequence::generate(&g, n + 20, 41).unwrap();
    let band = 50.0 / (n as f64).sqrt();
    for z in irrational_grid(8, 3) {
        for k in [1, 2, 5, 17] {
            let avg = exp_average(&seq, z, n, k).unwrap().norm();
            assert!(avg < band, "z = {}, k = {k}: {avg}", z.turns());
        }
    }
}

#[test]
fn averages_respect_the_limit_bound() {
    let n = 200_000;
    let l = 100;
    let g = IncrementDistribution::geometric(0.5).unwrap();
    let seq = StochasticSequence::generate(&g, n + 10, 43).unwrap();
    for z in irrational_grid(6, 4) {
        let avg = exp_average(&seq, z, n, 3).unwrap().norm_sqr();
        let bound = vdc_limit_bound(&g, z, l).unwrap() + ergodic_slack(n, l, 50.0);
        assert!(avg <= bound, "z = {}: {avg} > {bound}", z.turns());
    }
}

#[test]
fn moments_stay_under_the_bound() {
    let g = IncrementDistribution::geometric(0.5).unwrap();
    let families: Vec<Box<dyn DependentFamily>> = vec![
        Box::new(PhaseForm::increment_power(Phase::golden())),
        Box::new(PhaseForm::lag_difference(Phase::from_turns(0.3), 2, 3)),
    ];
    for family in &families {
        for n in [100, 1000] {
            for r in [1, 2] {
                let m = moment_check(family.as_ref(), &g, n, r, 2000, 8).unwrap();
                assert!(m.passes(), "{} n={n} r={r}: {m:?}", family.name());
            }
        }
    }
}

#[test]
fn tail_frequency_stays_under_the_bound() {
    let g = IncrementDistribution::geometric(0.5).unwrap();
    let family = PhaseForm::quadruple(Phase::golden(), 4, 2, 3);
    let grid = monte_carlo_tail_grid(&family, &g, 1000, &[0.05, 0.1, 0.2], 2000, 12, 2).unwrap();
    for est in &grid {
        assert!(est.passes(), "{est:?}");
    }
    assert!(grid.windows(2).all(|w| w[1].empirical <= w[0].empirical));
}

fn random_staircase(f: &toml::Table) -> Tower {
    let plan = SpacerPlan::Stochastic {
        dist: DistSpec::Geometric { alpha: float(f, "alpha") },
        seed: int(f, "seed") as u64,
    };
    let stages = int(f, "stages");
    let cuts = CutRule::Linear { offset: int(f, "cut_offset") as u64 }.cuts(stages).unwrap();
    build_tower(&plan, &cuts, stages, BuildOptions::default()).unwrap()
}

#[test]
fn random_staircase_correlations_decay() {
    let f = fixture("mixing_decay");
    let tower = random_staircase(&f);
    let base = int(&f, "base_stage");
    let set = tower.level_set(base, vec![0]).unwrap();
    let lags: Vec<u128> = (base..=tower.stages() - 2).map(|n| tower.height(n)).collect();
    let profile = mixing_profile(&tower, &set, &lags, int(&f, "extra_depth")).unwrap();
    let upper: Vec<f64> = profile.points().map(|p| p.upper()).collect();
    assert_eq!(upper.len(), lags.len());
    assert!(upper.windows(2).all(|w| w[1] < w[0]), "{upper:?}");
    let last = *upper.last().unwrap();
    assert!((last - float(&f, "observed_final")).abs() < 1e-4, "re-freeze: observed {last}");
    assert!(last < float(&f, "threshold"));
}

#[test]
fn classical_staircase_stays_rigid() {
    let f = fixture("rigidity_floor");
    let stages = int(&f, "stages");
    let cuts = CutRule::Constant { r: 2 }.cuts(stages).unwrap();
    let tower = build_tower(&SpacerPlan::Staircase, &cuts, stages, BuildOptions::default()).unwrap();
    let base = int(&f, "base_stage");
    let set = tower.level_set(base, vec![0]).unwrap();
    let lags: Vec<u128> = (base..=stages - 2).map(|n| tower.height(n)).collect();
    let profile = mixing_profile(&tower, &set, &lags, 1).unwrap();
    assert_eq!(profile.points().count(), lags.len());
    for p in profile.points() {
        // hits alone already certify σ̂ from below
        assert!(p.sigma_hat >= float(&f, "floor"), "{p:?}");
        assert!((p.sigma_hat - float(&f, "observed")).abs() < 1e-4);
    }
}
