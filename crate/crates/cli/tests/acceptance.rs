//! Acceptance criteria 1-9, one PASS/FAIL line each.
//!
//! Exits nonzero if a criterion fails that is not listed in
//! [`KNOWN_UNATTAINABLE`], or if a listed one starts passing.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use stairlab::averages::{cesaro_char_bound, exp_average};
use stairlab::concentration::{c_r, monte_carlo_tail_grid, no_singleton_partitions, uniform_k_deviation, KeyFamily, PhaseForm};
use stairlab::phase::irrational_grid;
use stairlab::rng::child_seed;
use stairlab::sequences::shift_identity_suite;
use stairlab::tower::mixing_profile;
use stairlab::*;
use stairlab_cli::config::ExperimentConfig;
use stairlab_cli::{execute, Command};

/// Criteria whose thresholds cannot hold at any sample size. Criterion 6's
/// geometric average converges to -1/15, whose modulus exceeds its 0.05 limit.
const KNOWN_UNATTAINABLE: [usize; 1] = [6];

/// Seeds and sizes for the criteria not covered by the fixture file.
const IDENTITY_SEED: u64 = 1;
const IDENTITY_SEQUENCES: usize = 200;
const IDENTITY_BOUND: usize = 30;
const TAIL_SEED: u64 = 5;
const TAIL_TRIALS: usize = 10_000;
const INEQUALITY_SEED: u64 = 17;
const INEQUALITY_CASES: usize = 10_000;
const ERGODIC_SEED: u64 = 99;
const ERGODIC_N: usize = 1_000_000;
const GRID_COUNT: usize = 64;
const GRID_SEED: u64 = 7;
const CESARO_L: usize = 100;
const CESARO_SLACK: f64 = 0.05;
const ERGODIC_AVG_LIMIT: f64 = 0.02;
const BOUNDARY_SEED: u64 = 11;
const BOUNDARY_N: usize = 100_000;
const BOUNDARY_LIMIT: f64 = 0.05;
const BOUNDARY_FLOOR: f64 = 1.0 - 1e-9;
const LAG_DEVIATION_LIMIT: f64 = 0.02;

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn within(elapsed: Duration, limit: Duration) -> String {
    format!("{:.1}s of {}s", elapsed.as_secs_f64(), limit.as_secs())
}

fn shift_identities() -> Outcome {
    let start = Instant::now();
    let laws = [
        IncrementDistribution::geometric(1.0 / 3.0).unwrap(),
        IncrementDistribution::geometric(0.5).unwrap(),
        IncrementDistribution::uniform_range(1, 5).unwrap(),
        IncrementDistribution::constant(1).unwrap(),
    ];
    let mut failure = None;
    for i in 0..IDENTITY_SEQUENCES {
        let law = &laws[i % laws.len()];
        let seq = StochasticSequence::generate(law, 3 * IDENTITY_BOUND, child_seed(IDENTITY_SEED, i as u64)).unwrap();
        if let Some(report) = shift_identity_suite(&seq, IDENTITY_BOUND).unwrap() {
            failure = Some((i, report));
            break;
        }
    }
    let elapsed = start.elapsed();
    let limit = Duration::from_secs(5);
    match failure {
        None => outcome(
            elapsed < limit,
            format!("{IDENTITY_SEQUENCES} sequences, all n,k,t <= {IDENTITY_BOUND}; {}", within(elapsed, limit)),
        ),
        Some((i, r)) => outcome(false, format!("sequence {i} fails at {r:?}")),
    }
}

/// Restricted growth strings with every block of size >= 2.
fn enumerate_partitions(m: usize) -> u128 {
    fn walk(labels: &mut Vec<usize>, m: usize, blocks: usize) -> u128 {
        if labels.len() == m {
            let mut sizes = vec![0; blocks];
            labels.iter().for_each(|&l| sizes[l] += 1);
            return sizes.iter().all(|&s| s >= 2) as u128;
        }
        (0..=blocks)
            .map(|l| {
                labels.push(l);
                let n = walk(labels, m, blocks.max(l + 1));
                labels.pop();
                n
            })
            .sum()
    }
    walk(&mut Vec::new(), m, 0)
}

fn combinatorics() -> Outcome {
    let mismatch = (0..=8).find(|&m| no_singleton_partitions(m).unwrap() != enumerate_partitions(m));
    let c2 = c_r(2).unwrap();
    outcome(mismatch.is_none() && c2 == 96, format!("m <= 8 enumerated, mismatch {mismatch:?}; c_r(2) = {c2}"))
}

fn concentration() -> Outcome {
    let start = Instant::now();
    let g = IncrementDistribution::geometric(0.5).unwrap();
    let family = PhaseForm::increment_power(Phase::golden());
    let mut cells = Vec::new();
    for n in [100, 1_000, 10_000] {
        cells.extend(monte_carlo_tail_grid(&family, &g, n, &[0.1, 0.3, 0.5], TAIL_TRIALS, TAIL_SEED, 2).unwrap());
    }
    let elapsed = start.elapsed();
    let limit = Duration::from_secs(120);
    let bad: Vec<String> = cells
        .iter()
        .filter(|c| !c.passes())
        .map(|c| format!("N={} delta={}: {} > {}", c.n, c.delta, c.empirical, c.bound.min(1.0) + c.tolerance()))
        .collect();
    outcome(
        bad.is_empty() && elapsed < limit,
        format!("{} cells, failures {bad:?}; {}", cells.len(), within(elapsed, limit)),
    )
}

fn inequalities(dir: &Path) -> Outcome {
    let start = Instant::now();
    let mut config = ExperimentConfig::new(INEQUALITY_SEED, DistSpec::Geometric { alpha: 0.5 });
    config.inequalities.cases = INEQUALITY_CASES;
    let summary = execute(Command::Vdc, &config, dir, None).unwrap();
    let elapsed = start.elapsed();
    let limit = Duration::from_secs(60);
    let worst: Vec<String> = summary.checks.iter().map(|c| format!("{} {}", c.suite, c.detail)).collect();
    outcome(
        summary.passed() && summary.checks.len() == 6 && elapsed < limit,
        format!("{}; {}", worst.join("; "), within(elapsed, limit)),
    )
}

fn ergodic_surrogate() -> Outcome {
    let start = Instant::now();
    let g = IncrementDistribution::geometric(0.5).unwrap();
    let seq = StochasticSequence::generate(&g, ERGODIC_N + 10, ERGODIC_SEED).unwrap();
    let mut worst_avg = 0.0f64;
    let mut worst_margin = f64::INFINITY;
    for z in irrational_grid(GRID_COUNT, GRID_SEED) {
        let avg = exp_average(&seq, z, ERGODIC_N, 1).unwrap().norm();
        worst_avg = worst_avg.max(avg);
        worst_margin = worst_margin.min(cesaro_char_bound(&g, z, CESARO_L).unwrap() + CESARO_SLACK - avg * avg);
    }
    let elapsed = start.elapsed();
    let limit = Duration::from_secs(30);
    outcome(
        worst_margin >= 0.0 && worst_avg < ERGODIC_AVG_LIMIT && elapsed < limit,
        format!("max |avg| = {worst_avg:.5}, min margin {worst_margin:.5}; {}", within(elapsed, limit)),
    )
}

fn total_ergodicity_boundary() -> Outcome {
    let z = Phase::from_ratio(1, 4).unwrap();
    let ones = StochasticSequence::from_increments(vec![1; BOUNDARY_N + 4]).unwrap();
    let rigid = exp_average(&ones, z, BOUNDARY_N, 4).unwrap().norm();
    let g = IncrementDistribution::geometric(0.5).unwrap();
    let seq = StochasticSequence::generate(&g, 2 * BOUNDARY_N, BOUNDARY_SEED).unwrap();
    let random = exp_average(&seq, z, BOUNDARY_N, 4).unwrap();
    // a_n^{(4)} = 4a_n + 3b_{n+1} + 2b_{n+2} + b_{n+3} and i^{4a_n} = 1, so the
    // average tends to φ(-i) φ(-1) φ(i) = -1/15 rather than 0
    let limit = LinearForm::from_coefficients(vec![3, 2, 1]).expectation(&g, z);
    outcome(
        rigid >= BOUNDARY_FLOOR && random.norm() < BOUNDARY_LIMIT,
        format!(
            "constant(1): |avg| = {rigid}; geometric(1/2): |avg| = {:.5} (limit {:.5}), required < {BOUNDARY_LIMIT}",
            random.norm(),
            limit.norm()
        ),
    )
}

fn lag_averages() -> Outcome {
    let start = Instant::now();
    let g = IncrementDistribution::geometric(0.5).unwrap();
    let seq = StochasticSequence::generate(&g, ERGODIC_N + 10, ERGODIC_SEED).unwrap();
    let zs = irrational_grid(GRID_COUNT, GRID_SEED);
    let families = [1, 2, 3].map(|lag| KeyFamily::LagDifference { lag });
    let dev = uniform_k_deviation(&seq, &g, &families, &zs, ERGODIC_N, 3).unwrap();
    let elapsed = start.elapsed();
    outcome(
        dev.value < LAG_DEVIATION_LIMIT,
        format!(
            "max deviation {:.5} at k={} {:?} z={:.4}; {:.1}s",
            dev.value,
            dev.k,
            dev.family,
            dev.z.turns(),
            elapsed.as_secs_f64()
        ),
    )
}

fn mixing(fixtures: &toml::Table) -> Outcome {
    let start = Instant::now();
    let f = fixtures["mixing_decay"].as_table().unwrap();
    let int = |t: &toml::Table, k: &str| t[k].as_integer().unwrap() as usize;
    let stages = int(f, "stages");
    let plan = SpacerPlan::Stochastic {
        dist: DistSpec::Geometric { alpha: f["alpha"].as_float().unwrap() },
        seed: int(f, "seed") as u64,
    };
    let cuts = CutRule::Linear { offset: int(f, "cut_offset") as u64 }.cuts(stages).unwrap();
    let tower = build_tower(&plan, &cuts, stages, BuildOptions::default()).unwrap();
    let base = int(f, "base_stage");
    let lags: Vec<u128> = (base..=tower.stages() - 2).map(|n| tower.height(n)).collect();
    let set = tower.level_set(base, vec![0]).unwrap();
    let profile = mixing_profile(&tower, &set, &lags, int(f, "extra_depth")).unwrap();
    let upper: Vec<f64> = profile.points().map(|p| p.upper()).collect();
    let tail = &upper[upper.len().saturating_sub(3)..];
    let decreasing = upper.len() == lags.len() && tail.len() == 3 && tail.windows(2).all(|w| w[1] < w[0]);
    let threshold = f["threshold"].as_float().unwrap();
    let last = *upper.last().unwrap();

    let r = fixtures["rigidity_floor"].as_table().unwrap();
    let control_stages = int(r, "stages");
    let control_cuts = CutRule::Constant { r: 2 }.cuts(control_stages).unwrap();
    let control = build_tower(&SpacerPlan::Staircase, &control_cuts, control_stages, BuildOptions::default()).unwrap();
    let control_base = int(r, "base_stage");
    let control_lags: Vec<u128> = (control_base..=control_stages - 2).map(|n| control.height(n)).collect();
    let control_set = control.level_set(control_base, vec![0]).unwrap();
    let rigid = mixing_profile(&control, &control_set, &control_lags, int(f, "extra_depth")).unwrap();
    let floor = r["floor"].as_float().unwrap();
    let low = rigid.points().map(|p| p.sigma_hat).fold(f64::INFINITY, f64::min);
    let rigid_count = rigid.points().count();

    let elapsed = start.elapsed();
    let limit = Duration::from_secs(300);
    outcome(
        stages >= 6
            && tower.stages() == stages
            && decreasing
            && last < threshold
            && rigid_count == control_lags.len()
            && low >= floor
            && elapsed < limit,
        format!(
            "{stages} stages (h_S = {}), last three |σ|+err {tail:.4?} < {threshold}; control min σ {low:.4} >= {floor}; {}",
            tower.height(tower.stages()),
            within(elapsed, limit)
        ),
    )
}

const DETERMINISM_CONFIG: &str = r#"
seed = 4242

[distribution]
kind = "geometric"
alpha = 0.5

[sequence]
length = 3000
identity_bound = 12

[z_grid]
kind = "irrational"
count = 4

[grids]
n = [100, 1000]
k = [1, 3]
l = [10]
q = [20]

[inequalities]
cases = 200
max_len = 32

[concentration]
deltas = [0.2, 0.4]
trials = 300
r = 2
strong_law_threshold = 0.2

[tower]
stages = 6
base_stage = 2
base_levels = [0]
extra_depth = 1

[tower.spacers]
plan = "stochastic"
dist = { kind = "geometric", alpha = 0.5 }

[tower.cuts]
rule = "linear"
offset = 3
"#;

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism(root: &Path) -> Outcome {
    let config = root.join("config.toml");
    fs::write(&config, DETERMINISM_CONFIG).unwrap();
    let mut runs = Vec::new();
    let mut codes = Vec::new();
    for name in ["first", "second"] {
        let out = root.join(name);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_stairlab"))
            .args(["report", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "77"])
            .env_remove(stairlab_cli::OUT_ENV)
            .output()
            .unwrap()
            .status;
        codes.push(status.code().unwrap_or(-1));
        runs.push(read_dir_bytes(&out));
    }
    let names: Vec<&str> = runs[0].iter().map(|f| f.0.as_str()).collect();
    let identical = runs[0] == runs[1];
    outcome(
        identical && !runs[0].is_empty() && codes.iter().all(|&c| c == codes[0]),
        format!("{} artifacts byte-identical: {identical} ({}); exit codes {codes:?}", names.len(), names.join(", ")),
    )
}

fn main() {
    let fixtures: toml::Table = toml::from_str(include_str!("../../core/fixtures/thresholds.toml")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let criteria: Vec<Criterion> = vec![
        ("shift identities", Box::new(shift_identities)),
        ("partition constants", Box::new(combinatorics)),
        ("concentration tails", Box::new(concentration)),
        ("inequality oracles", Box::new(|| inequalities(&tmp.path().join("vdc")))),
        ("ergodic surrogate", Box::new(ergodic_surrogate)),
        ("total-ergodicity boundary", Box::new(total_ergodicity_boundary)),
        ("lag averages", Box::new(lag_averages)),
        ("mixing decay", Box::new(|| mixing(&fixtures))),
        ("determinism", Box::new(|| determinism(tmp.path()))),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.passed {
            failed.push(i + 1);
        }
        println!("{} {} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    let unexpected: Vec<usize> = failed.iter().copied().filter(|c| !KNOWN_UNATTAINABLE.contains(c)).collect();
    let recovered: Vec<usize> = KNOWN_UNATTAINABLE.iter().copied().filter(|c| !failed.contains(c)).collect();
    println!(
        "{} of {} passed; failed {failed:?} (known unattainable {KNOWN_UNATTAINABLE:?})",
        criteria.len() - failed.len(),
        criteria.len()
    );
    if !unexpected.is_empty() || !recovered.is_empty() {
        println!("unexpected failures {unexpected:?}; known-unattainable criteria now passing {recovered:?}");
        std::process::exit(1);
    }
}
