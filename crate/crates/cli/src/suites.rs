//! One runner per subcommand. Each writes its artifacts and records checks.

use std::fs;
use std::path::PathBuf;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use stairlab::averages::{
    block_lemma_check, cesaro_char_bound, holder_check, triangle_holder_check, vdc4_bound, vdc_check,
    weighted_l2_floor, weighted_mean_square_equiv, AverageSeries, InequalityCase, InequalityCheck, MODULUS_SLACK,
};
use stairlab::concentration::{
    moment_check, monte_carlo_tail_grid, strong_law_trajectory, IncrementValue, PhaseForm,
};
use stairlab::rng::{child_seed, stream_rng, streams, StreamRng};
use stairlab::sequences::shift_identity_suite;
use stairlab::tower::{mixing_profile, restricted_growth_diagnostic, total_measure, SpectralPoint, TowerManifest};
use stairlab::{build_tower, BuildOptions, IncrementDistribution, Phase, StochasticSequence, Tower};

use crate::config::ExperimentConfig;
use crate::{CliError, VERSION};

/// Allowed negative margin for the exact inequalities.
pub const INEQUALITY_TOLERANCE: f64 = 1e-9;
/// Allowed negative margin for the double van der Corput bound.
pub const VDC4_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub suite: String,
    /// The invariant the check asserts.
    pub invariant: String,
    pub passed: bool,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
}

pub struct Context<'a> {
    pub config: &'a ExperimentConfig,
    pub out: PathBuf,
    pub suites: Option<Vec<String>>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
}

impl<'a> Context<'a> {
    pub fn new(config: &'a ExperimentConfig, out: PathBuf, suites: Option<Vec<String>>) -> Self {
        Context { config, out, suites, checks: Vec::new(), artifacts: Vec::new() }
    }

    pub fn enabled(&self, suite: &str) -> bool {
        self.suites.as_ref().is_none_or(|s| s.iter().any(|x| x == suite))
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::create_dir_all(&self.out).map_err(|e| CliError::Io(format!("{}: {e}", self.out.display())))?;
        let path = self.out.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("artifacts serialize");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn check(&mut self, suite: &str, invariant: &str, passed: bool, detail: String, witness: impl FnOnce() -> Value) {
        let witness = if passed { None } else { Some(witness()) };
        self.checks.push(Check { suite: suite.into(), invariant: invariant.into(), passed, detail, witness });
    }

    fn dist(&self) -> Result<IncrementDistribution, CliError> {
        Ok(self.config.distribution.build()?)
    }

    fn sequence(&self) -> Result<StochasticSequence, CliError> {
        let seed = child_seed(self.config.seed, streams::SEQUENCE);
        Ok(StochasticSequence::generate(&self.dist()?, self.config.sequence.length, seed)?)
    }
}

pub fn sequence(ctx: &mut Context) -> Result<(), CliError> {
    let seq = ctx.sequence()?;
    let mut csv = Vec::new();
    seq.write_csv(&mut csv).map_err(|e| CliError::Io(e.to_string()))?;
    ctx.write("sequence.csv", &csv)?;
    if ctx.enabled("identities") {
        let bound = ctx.config.sequence.identity_bound.min(seq.len() / 3);
        let failure = shift_identity_suite(&seq, bound)?;
        let seed = child_seed(ctx.config.seed, streams::SEQUENCE);
        ctx.check(
            "identities",
            "shift identities hold exactly for 1 <= n, k, t <= bound",
            failure.is_none(),
            format!("bound = {bound}"),
            || json!({ "report": failure, "sequence_seed": seed, "increments": &seq.increments()[..3 * bound] }),
        );
    }
    Ok(())
}

pub fn average(ctx: &mut Context) -> Result<(), CliError> {
    let seq = ctx.sequence()?;
    let dist = ctx.dist()?;
    let cfg = ctx.config;
    let zs = cfg.z_grid.points(cfg.seed);
    let jobs: Vec<(Phase, usize)> = zs.iter().flat_map(|&z| cfg.grids.k.iter().map(move |&k| (z, k))).collect();
    let series = jobs
        .par_iter()
        .map(|&(z, k)| AverageSeries::running(&seq, z, k, &cfg.grids.n, "sequence"))
        .collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<_> = series.iter().flat_map(|s| s.rows.iter().copied()).collect();
    let combined = AverageSeries { sequence: "sequence".into(), target: "z-grid".into(), rows };
    let mut csv = Vec::new();
    combined.write_csv(&mut csv).map_err(|e| CliError::Io(e.to_string()))?;
    ctx.write("averages.csv", &csv)?;

    if ctx.enabled("modulus") {
        let worst = combined.rows.iter().max_by(|a, b| a.avg.norm().total_cmp(&b.avg.norm())).copied();
        let value = worst.map_or(0.0, |r| r.avg.norm());
        ctx.check(
            "modulus",
            "|avg| <= 1",
            value <= 1.0 + MODULUS_SLACK,
            format!("max |avg| = {value}"),
            || json!({ "row": worst }),
        );
    }
    if ctx.enabled("cesaro") {
        let top = *cfg.grids.n.iter().max().expect("validated");
        let slack = cfg.average.cesaro_slack;
        let mut cases = Vec::new();
        for (&(z, _), s) in jobs.iter().zip(&series).filter(|(job, _)| job.1 == 1) {
            let row = s.rows.iter().find(|r| r.n == top).expect("top of grid");
            for &l in &cfg.grids.l {
                let rhs = cesaro_char_bound(&dist, z, l)? + slack;
                cases.push(InequalityCase::new(
                    format!("z={} L={l}", z.turns()),
                    InequalityCheck { lhs: row.avg.norm_sqr(), rhs },
                ));
            }
        }
        ctx.write_json("cesaro.json", &json!({ "version": VERSION, "n": top, "slack": slack, "cases": cases }))?;
        report_cases(ctx, "cesaro", "|avg|^2 <= cesaro_char_bound + slack at the largest N", &cases, 0.0);
    }
    Ok(())
}

fn report_cases(ctx: &mut Context, suite: &str, invariant: &str, cases: &[InequalityCase], tolerance: f64) {
    let worst = cases.iter().min_by(|a, b| a.margin.total_cmp(&b.margin));
    let margin = worst.map_or(f64::INFINITY, |c| c.margin);
    let failures: Vec<&InequalityCase> = cases.iter().filter(|c| c.margin < -tolerance).collect();
    ctx.check(
        suite,
        invariant,
        failures.is_empty(),
        format!("{} cases, worst margin {margin:e}", cases.len()),
        || json!({ "failures": failures }),
    );
}

fn unit_vector(rng: &mut StreamRng, len: usize) -> Vec<Complex64> {
    // half the cases are unimodular, where the inequalities are tightest
    let unimodular = rng.gen_bool(0.5);
    (0..len)
        .map(|_| {
            let r = if unimodular { 1.0 } else { rng.gen_range(0.0..=1.0) };
            Complex64::from_polar(r, std::f64::consts::TAU * rng.gen_range(0.0..1.0))
        })
        .collect()
}

fn case_rng(seed: u64, suite: u64, case: usize) -> StreamRng {
    stream_rng(child_seed(child_seed(seed, suite), case as u64), streams::RANDOMIZED_CASES)
}

type CaseFn = fn(&mut StreamRng, &ExperimentConfig, usize) -> Result<(InequalityCheck, Value), CliError>;

fn vdc_case(rng: &mut StreamRng, cfg: &ExperimentConfig, _: usize) -> Result<(InequalityCheck, Value), CliError> {
    let len = rng.gen_range(1..=cfg.inequalities.max_len);
    let c = unit_vector(rng, len);
    let l = rng.gen_range(1..=len);
    Ok((vdc_check(&c, l)?, json!({ "c": c, "l": l })))
}

fn holder_case(rng: &mut StreamRng, cfg: &ExperimentConfig, _: usize) -> Result<(InequalityCheck, Value), CliError> {
    let len = rng.gen_range(1..=cfg.inequalities.max_len);
    let c = unit_vector(rng, len);
    Ok((holder_check(&c)?, json!({ "c": c })))
}

fn triangle_case(rng: &mut StreamRng, cfg: &ExperimentConfig, _: usize) -> Result<(InequalityCheck, Value), CliError> {
    let len = rng.gen_range(1..=cfg.inequalities.max_len);
    let c = unit_vector(rng, len);
    Ok((triangle_holder_check(&c)?, json!({ "c": c })))
}

fn weighted_case(rng: &mut StreamRng, cfg: &ExperimentConfig, _: usize) -> Result<(InequalityCheck, Value), CliError> {
    let len = rng.gen_range(1..=cfg.inequalities.max_len);
    let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
    let c = unit_vector(rng, len);
    let m = weighted_mean_square_equiv(&w, &c)?;
    // both directions of the equivalence in one case
    let check = if m.l2 - weighted_l2_floor(m.l1) < m.l1 - m.l2 {
        InequalityCheck { lhs: weighted_l2_floor(m.l1), rhs: m.l2 }
    } else {
        InequalityCheck { lhs: m.l2, rhs: m.l1 }
    };
    Ok((check, json!({ "weights": w, "c": c })))
}

fn block_case(rng: &mut StreamRng, _: &ExperimentConfig, _: usize) -> Result<(InequalityCheck, Value), CliError> {
    let z = if rng.gen_bool(0.25) {
        let q = rng.gen_range(2..=24u64);
        Phase::from_ratio(rng.gen_range(1..q) as i64, q)?
    } else {
        Phase::from_turns(rng.gen_range(0.0..1.0))
    };
    let n = rng.gen_range(1..=10_000);
    let l = rng.gen_range(1..=100);
    let p = rng.gen_range(1..=50);
    Ok((block_lemma_check(z, n, l, p)?, json!({ "z_turns": z.turns(), "n": n, "l": l, "p": p })))
}

fn vdc4_case(rng: &mut StreamRng, cfg: &ExperimentConfig, _: usize) -> Result<(InequalityCheck, Value), CliError> {
    let dist = cfg.distribution.build()?;
    let n = rng.gen_range(4..=40);
    let l = rng.gen_range(1..=8);
    let q = rng.gen_range(1..=8);
    let seed = rng.gen::<u64>();
    let seq = StochasticSequence::generate(&dist, 2 * n + l + q, seed)?;
    let z = Phase::from_turns(rng.gen_range(0.0..1.0));
    let r = vdc4_bound(&seq, z, n, l, q)?;
    Ok((r.check(), json!({ "n": n, "l": l, "q": q, "sequence_seed": seed, "z_turns": z.turns(), "argmax_k": r.argmax_k })))
}

const INEQUALITY_SUITES: [(&str, &str, u64, f64, CaseFn); 6] = [
    ("vdc", "boundary-corrected van der Corput", 1, INEQUALITY_TOLERANCE, vdc_case),
    ("holder", "|mean c|^2 <= mean |c|^2", 2, INEQUALITY_TOLERANCE, holder_case),
    ("triangle", "triangle-weighted Holder", 3, INEQUALITY_TOLERANCE, triangle_case),
    ("weighted", "l1^3/8 <= l2 <= l1 for weighted means", 4, INEQUALITY_TOLERANCE, weighted_case),
    ("block", "block inequality for geometric sums", 5, INEQUALITY_TOLERANCE, block_case),
    ("vdc4", "sup_k |avg|^4 <= double van der Corput bound", 6, VDC4_TOLERANCE, vdc4_case),
];

pub fn vdc(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = ctx.config;
    let mut report = serde_json::Map::new();
    report.insert("version".into(), json!(VERSION));
    for (suite, invariant, index, tolerance, case) in INEQUALITY_SUITES {
        if !ctx.enabled(suite) {
            continue;
        }
        let outcomes = (0..cfg.inequalities.cases)
            .into_par_iter()
            .map(|i| {
                let (check, _) = case(&mut case_rng(cfg.seed, index, i), cfg, i)?;
                Ok(InequalityCase::new(format!("{suite}#{i}"), check))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let worst = outcomes.iter().enumerate().min_by(|a, b| a.1.margin.total_cmp(&b.1.margin)).map(|(i, c)| (i, c.margin));
        let passed = worst.is_none_or(|(_, m)| m >= -tolerance);
        ctx.check(
            suite,
            invariant,
            passed,
            format!("{} cases, worst margin {:e}", outcomes.len(), worst.map_or(f64::INFINITY, |w| w.1)),
            || {
                let (i, _) = worst.expect("a failure has a case");
                let (check, input) = case(&mut case_rng(cfg.seed, index, i), cfg, i).expect("replay");
                json!({ "case": i, "lhs": check.lhs, "rhs": check.rhs, "input": input })
            },
        );
        report.insert(suite.into(), json!(outcomes));
    }
    ctx.write_json("inequalities.json", &report)
}

#[derive(Serialize)]
struct TailRow {
    n: usize,
    delta: f64,
    empirical: f64,
    bound: f64,
    trials: usize,
    seed: u64,
    tolerance: f64,
    passes: bool,
}

pub fn strong_law(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = ctx.config;
    let dist = ctx.dist()?;
    let spec = &cfg.concentration;
    let seed = child_seed(cfg.seed, streams::MONTE_CARLO);
    let family = PhaseForm::increment_power(spec.z());
    if ctx.enabled("tail") {
        let mut rows = Vec::new();
        for &n in &cfg.grids.n {
            for est in monte_carlo_tail_grid(&family, &dist, n, &spec.deltas, spec.trials, seed, spec.r)? {
                rows.push(TailRow {
                    n,
                    delta: est.delta,
                    empirical: est.empirical,
                    bound: est.bound,
                    trials: est.trials,
                    seed: est.seed,
                    tolerance: est.tolerance(),
                    passes: est.passes(),
                });
            }
        }
        let failures: Vec<&TailRow> = rows.iter().filter(|r| !r.passes).collect();
        let witness = json!({ "failures": failures, "z_turns": spec.z().turns() });
        ctx.check(
            "tail",
            "empirical tail <= min(1, bound) + 3 sqrt(p/trials)",
            failures.is_empty(),
            format!("{} cells", rows.len()),
            || witness,
        );
        ctx.write_json("tail.json", &json!({ "version": VERSION, "family": family_name(&family), "r": spec.r, "rows": rows }))?;
    }
    if ctx.enabled("moments") {
        let mut rows = Vec::new();
        for &n in &cfg.grids.n {
            for r in 1..=spec.r {
                rows.push(moment_check(&family, &dist, n, r, spec.trials, seed)?);
            }
        }
        let failures: Vec<_> = rows.iter().filter(|m| !m.passes()).collect();
        let witness = json!({ "failures": failures });
        ctx.check(
            "moments",
            "E|avg|^{2R} <= C_R (DKB)^{2R} / N^R",
            failures.is_empty(),
            format!("{} rows", rows.len()),
            || witness,
        );
        ctx.write_json("moments.json", &json!({ "version": VERSION, "rows": rows }))?;
    }
    if ctx.enabled("trajectory") {
        let mut grid = cfg.grids.n.clone();
        grid.sort_unstable();
        grid.dedup();
        let path = strong_law_trajectory(&IncrementValue, &dist, &grid, seed)?;
        let last = path.last().expect("nonempty grid").avg.norm();
        let threshold = spec.strong_law_threshold;
        ctx.check(
            "trajectory",
            "|(1/N) sum (b_n - E b)| below the threshold at the largest N",
            last < threshold,
            format!("{last:e} vs {threshold}"),
            || json!({ "path": path, "seed": seed }),
        );
        let rows: Vec<Value> = path.iter().map(|p| json!({ "n": p.n, "avg": p.avg.re })).collect();
        ctx.write_json("trajectory.json", &json!({ "version": VERSION, "seed": seed, "rows": rows }))?;
    }
    Ok(())
}

fn family_name(f: &PhaseForm) -> String {
    use stairlab::concentration::DependentFamily;
    f.name()
}

fn default_lags(tower: &Tower, base: usize) -> Vec<u128> {
    (base..=tower.stages().saturating_sub(2)).map(|n| tower.height(n)).collect()
}

pub fn tower(ctx: &mut Context) -> Result<(), CliError> {
    let cfg = ctx.config;
    let spec = &cfg.tower;
    let seed = child_seed(cfg.seed, streams::TOWER);
    let plan = spec.spacers.with_seed(seed);
    let cuts = spec.cuts.cuts(spec.stages)?;
    let options = spec.max_height.map_or_else(BuildOptions::default, |h| BuildOptions { max_height: h as u128 });
    let tower = build_tower(&plan, &cuts, spec.stages, options)?;
    let manifest = TowerManifest::from(&tower);
    ctx.write_json(
        "tower.json",
        &json!({ "version": VERSION, "seed": seed, "plan": plan.describe(), "manifest": manifest }),
    )?;

    if ctx.enabled("build") {
        let recurrence = (0..tower.stages()).all(|n| {
            let spacers: u128 = tower.spacers[n].iter().map(|&s| s as u128).sum();
            tower.heights[n + 1] == tower.cuts[n] as u128 * tower.heights[n] + spacers
        });
        ctx.check(
            "build",
            "h_{n+1} = r_n h_n + sum_j s_{n,j}",
            recurrence,
            format!("{} stages, h = {:?}", tower.stages(), tower.heights),
            || json!({ "manifest": manifest }),
        );
    }
    if ctx.enabled("diagnostics") {
        let growth = restricted_growth_diagnostic(&tower);
        let mass = total_measure(&tower);
        let nondecreasing = mass.masses.windows(2).all(|w| w[1] >= w[0]);
        ctx.check(
            "diagnostics",
            "raw masses are nondecreasing",
            nondecreasing,
            format!("masses {:?}", mass.masses),
            || json!({ "masses": mass.masses }),
        );
        ctx.write_json(
            "diagnostics.json",
            &json!({ "version": VERSION, "growth": growth, "mass": mass, "warnings": tower.warnings }),
        )?;
    }
    let (decay, rigidity) = (ctx.enabled("mixing"), ctx.enabled("rigidity"));
    if (decay || rigidity) && spec.base_stage <= tower.stages() {
        let set = tower.level_set(spec.base_stage, spec.base_levels.clone())?;
        let lags: Vec<u128> = match &spec.lags {
            Some(l) => l.iter().map(|&x| x as u128).collect(),
            None => default_lags(&tower, spec.base_stage),
        };
        let profile = mixing_profile(&tower, &set, &lags, spec.extra_depth)?;
        let mut csv = Vec::new();
        profile.write_csv(&mut csv).map_err(|e| CliError::Io(e.to_string()))?;
        ctx.write("mixing.csv", &csv)?;
        let uncertified: Vec<String> =
            profile.rows.iter().filter_map(|r| r.as_ref().err().map(|e| e.to_string())).collect();
        let points: Vec<SpectralPoint> = profile.points().copied().collect();
        if let (true, Some(threshold)) = (decay, spec.decay_threshold) {
            let upper: Vec<f64> = points.iter().map(SpectralPoint::upper).collect();
            let tail = &upper[upper.len().saturating_sub(3)..];
            let decreasing = tail.len() == 3 && tail.windows(2).all(|w| w[1] < w[0]);
            let last = upper.last().copied().unwrap_or(f64::INFINITY);
            ctx.check(
                "mixing",
                "|sigma| + error strictly decreasing over the last three lags and below the threshold",
                decreasing && last < threshold,
                format!("upper bounds {upper:?}, threshold {threshold}"),
                || json!({ "points": points, "uncertified": uncertified }),
            );
        }
        if let (true, Some(floor)) = (rigidity, spec.rigidity_floor) {
            let low = points.iter().map(|p| p.sigma_hat).fold(f64::INFINITY, f64::min);
            ctx.check(
                "rigidity",
                "certified sigma stays above the floor at every lag",
                !points.is_empty() && low >= floor,
                format!("min sigma {low}, floor {floor}"),
                || json!({ "points": points, "uncertified": uncertified }),
            );
        }
    }
    Ok(())
}
