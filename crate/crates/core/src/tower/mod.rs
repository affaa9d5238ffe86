//! Rank-one towers built by cutting and stacking.
//!
//! Stage `n` is a column of `h_n` levels, each of width `1 / D_n` with
//! `D_n = r_0 ⋯ r_{n-1}`. To pass to stage `n + 1` the column is cut into
//! `r_n` subcolumns, `s_{n,j}` spacer levels are put on subcolumn `j`, and the
//! subcolumns are stacked left to right, so
//! `h_{n+1} = r_n h_n + Σ_j s_{n,j}`. Level `i` of stage `n` reappears at
//! stage `n + 1` as the levels `base_{n,j} + i` with
//! `base_{n,j} = j h_n + Σ_{t<j} s_{n,t}`, and the map `T` moves every level
//! one step up.

mod levels;

use std::io::Write;
use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use levels::{LevelSet, BITSET_THRESHOLD};

use crate::distributions::DistSpec;
use crate::error::{Error, Result};
use crate::rng::{child_seed, stream_rng, streams, StreamRng};
use crate::sequences::{generate_dynamical, StochasticSequence};

/// Default cap on column heights.
pub const DEFAULT_MAX_HEIGHT: u128 = 1 << 33;

/// Ornstein spread `t_n` as a function of the current height.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum OrnsteinRule {
    Fixed { t: u64 },
    /// `t_n = floor(fraction · h_n)`.
    HeightFraction { fraction: f64 },
}

impl OrnsteinRule {
    fn spread(&self, h: u128) -> u64 {
        match *self {
            OrnsteinRule::Fixed { t } => t,
            OrnsteinRule::HeightFraction { fraction } => (fraction * h as f64).floor().max(0.0) as u64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "plan", rename_all = "snake_case")]
pub enum SpacerPlan {
    /// `s_{n,j} = j`.
    Staircase,
    /// `s_{n,j} = a_j` for one sequence shared by all stages.
    Stochastic { dist: DistSpec, seed: u64 },
    /// `s_{n,j} = b_{n,1} + ... + b_{n,j}`, fresh increments per stage; the
    /// last distribution is reused past the end of the list.
    Dynamical { dists: Vec<DistSpec>, seed: u64 },
    /// `s_{n,j} = 2h_n + x_{n,j+1} - x_{n,j}` with `x` uniform on `{-t_n..t_n}`.
    Ornstein { rule: OrnsteinRule, seed: u64 },
    /// `s_{n,j} = Σ_i c_{n,i} j^i`; the last row is reused past the end.
    Polynomial { rows: Vec<Vec<i64>> },
    /// Spacer rows given directly.
    Explicit { rows: Vec<Vec<u64>> },
}

impl SpacerPlan {
    pub fn describe(&self) -> String {
        match self {
            SpacerPlan::Staircase => "staircase".into(),
            SpacerPlan::Stochastic { dist, seed } => format!("stochastic {dist:?} seed={seed}"),
            SpacerPlan::Dynamical { dists, seed } => format!("dynamical {} laws seed={seed}", dists.len()),
            SpacerPlan::Ornstein { rule, seed } => format!("ornstein {rule:?} seed={seed}"),
            SpacerPlan::Polynomial { rows } => format!("polynomial {} rows", rows.len()),
            SpacerPlan::Explicit { rows } => format!("explicit {} rows", rows.len()),
        }
    }
}

/// Cut sequences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum CutRule {
    /// `r_n = r`.
    Constant { r: u64 },
    /// `r_n = n + offset`.
    Linear { offset: u64 },
    Explicit { cuts: Vec<u64> },
}

impl CutRule {
    pub fn cuts(&self, stages: usize) -> Result<Vec<u64>> {
        match self {
            CutRule::Constant { r } => Ok(vec![*r; stages]),
            CutRule::Linear { offset } => Ok((0..stages as u64).map(|n| n + offset).collect()),
            CutRule::Explicit { cuts } => {
                if cuts.len() < stages {
                    return Err(Error::InvalidArgument(format!("{} cuts for {stages} stages", cuts.len())));
                }
                Ok(cuts[..stages].to_vec())
            }
        }
    }
}

/// One Ornstein row: the uniform draws `x_0..x_r` and the spacers they induce.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrnsteinRow {
    pub x: Vec<i64>,
    pub spacers: Vec<u64>,
}

impl OrnsteinRow {
    /// `b_j = s_j - s_{j-1} = x_{j+1} - 2x_j + x_{j-1}` for `j = 1..r-1`.
    pub fn increments(&self) -> Vec<i64> {
        (1..self.spacers.len()).map(|j| self.x[j + 1] - 2 * self.x[j] + self.x[j - 1]).collect()
    }
}

fn ornstein_row(r: u64, h_prev: u128, t: u64, rng: &mut StreamRng) -> Result<OrnsteinRow> {
    if r < 2 {
        return Err(Error::InvalidArgument(format!("Ornstein rows need r >= 2, got {r}")));
    }
    if t as u128 > h_prev {
        return Err(Error::InvalidArgument(format!("spread t = {t} exceeds h = {h_prev}")));
    }
    let t = t as i64;
    let x: Vec<i64> = (0..=r).map(|_| rng.gen_range(-t..=t)).collect();
    let base = 2 * h_prev as i128;
    let spacers = x
        .windows(2)
        .map(|w| {
            let s = base + (w[1] - w[0]) as i128;
            u64::try_from(s).map_err(|_| Error::Overflow(format!("Ornstein spacer {s} out of range")))
        })
        .collect::<Result<_>>()?;
    Ok(OrnsteinRow { x, spacers })
}

/// `r` spacers `2h + x_{j+1} - x_j`, `x_j` iid uniform on `{-t..t}`.
pub fn ornstein_spacers(r: u64, h_prev: u128, t: u64, seed: u64) -> Result<OrnsteinRow> {
    ornstein_row(r, h_prev, t, &mut stream_rng(seed, streams::TOWER))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub max_height: u128,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { max_height: DEFAULT_MAX_HEIGHT }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tower {
    pub plan: SpacerPlan,
    pub cuts: Vec<u64>,
    pub spacers: Vec<Vec<u64>>,
    /// `h_0 = 1, ..., h_S`.
    pub heights: Vec<u128>,
    /// `base_{n,j}` for `n < S`.
    pub bases: Vec<Vec<u128>>,
    /// `D_n = r_0 ⋯ r_{n-1}`, so level widths are `1 / D_n`.
    pub width_denominators: Vec<u128>,
    pub warnings: Vec<String>,
}

fn polynomial_row(coeffs: &[i64], r: u64, stage: usize) -> Result<Vec<u64>> {
    (0..r)
        .map(|j| {
            let mut v: i128 = 0;
            for &c in coeffs.iter().rev() {
                v = v
                    .checked_mul(j as i128)
                    .and_then(|v| v.checked_add(c as i128))
                    .ok_or_else(|| Error::Overflow(format!("polynomial spacer at stage {stage}")))?;
            }
            if v < 0 {
                return Err(Error::NegativeSpacer { stage, column: j as usize, value: v });
            }
            u64::try_from(v).map_err(|_| Error::Overflow(format!("polynomial spacer {v} at stage {stage}")))
        })
        .collect()
}

/// Builds up to `stages` stages; stops early (with a warning) before any
/// height would exceed `options.max_height`.
pub fn build_tower(plan: &SpacerPlan, cuts: &[u64], stages: usize, options: BuildOptions) -> Result<Tower> {
    if cuts.len() < stages {
        return Err(Error::InvalidArgument(format!("{} cuts for {stages} stages", cuts.len())));
    }
    if let Some((n, r)) = cuts[..stages].iter().enumerate().find(|(_, &r)| r < 2) {
        return Err(Error::InvalidArgument(format!("r_{n} = {r} but every cut must be at least 2")));
    }
    let cuts = &cuts[..stages];
    let max_r = cuts.iter().copied().max().unwrap_or(2);
    let shared = match plan {
        SpacerPlan::Stochastic { dist, seed } => {
            Some(StochasticSequence::generate(&dist.build()?, (max_r - 1) as usize, *seed)?)
        }
        _ => None,
    };
    let dynamical = match plan {
        SpacerPlan::Dynamical { dists, seed } => {
            if dists.is_empty() {
                return Err(Error::InvalidArgument("dynamical plan needs at least one law".into()));
            }
            let laws = (0..stages)
                .map(|n| dists[n.min(dists.len() - 1)].build())
                .collect::<Result<Vec<_>>>()?;
            Some(generate_dynamical(&laws, cuts, *seed)?)
        }
        _ => None,
    };

    let mut tower = Tower {
        plan: plan.clone(),
        cuts: Vec::new(),
        spacers: Vec::new(),
        heights: vec![1],
        bases: Vec::new(),
        width_denominators: vec![1],
        warnings: Vec::new(),
    };
    for (n, &r) in cuts.iter().enumerate() {
        let h = *tower.heights.last().expect("h_0 present");
        let row: Vec<u64> = match plan {
            SpacerPlan::Staircase => (0..r).collect(),
            SpacerPlan::Stochastic { .. } => {
                let seq = shared.as_ref().expect("generated above");
                (0..r as usize).map(|j| seq.a(j) as u64).collect()
            }
            SpacerPlan::Dynamical { .. } => dynamical.as_ref().expect("generated above").row(n).to_vec(),
            SpacerPlan::Ornstein { rule, seed } => {
                let t = rule.spread(h);
                if t as u128 > h {
                    return Err(Error::NegativeSpacer { stage: n, column: 0, value: 2 * h as i128 - 2 * t as i128 });
                }
                let mut rng = stream_rng(child_seed(*seed, n as u64), streams::TOWER);
                ornstein_row(r, h, t, &mut rng)?.spacers
            }
            SpacerPlan::Polynomial { rows } => {
                let coeffs = rows
                    .get(n.min(rows.len().saturating_sub(1)))
                    .ok_or_else(|| Error::InvalidArgument("polynomial plan has no rows".into()))?;
                polynomial_row(coeffs, r, n)?
            }
            SpacerPlan::Explicit { rows } => {
                let row = rows
                    .get(n)
                    .ok_or_else(|| Error::InvalidArgument(format!("explicit plan has no row for stage {n}")))?;
                if row.len() as u64 != r {
                    return Err(Error::InvalidArgument(format!(
                        "explicit row {n} has {} spacers for r = {r}",
                        row.len()
                    )));
                }
                row.clone()
            }
        };
        let overflow = || Error::Overflow(format!("height at stage {}", n + 1));
        let mut bases = Vec::with_capacity(r as usize);
        let mut offset: u128 = 0;
        for &s in &row {
            bases.push(offset);
            offset = offset.checked_add(h).and_then(|o| o.checked_add(s as u128)).ok_or_else(overflow)?;
        }
        let next = offset;
        if next > options.max_height {
            tower.warnings.push(format!(
                "stopped after stage {n}: h_{} = {next} would exceed the cap {}",
                n + 1,
                options.max_height
            ));
            break;
        }
        let width = tower.width_denominators[n].checked_mul(r as u128).ok_or_else(overflow)?;
        tower.cuts.push(r);
        tower.spacers.push(row);
        tower.bases.push(bases);
        tower.heights.push(next);
        tower.width_denominators.push(width);
    }
    let diag = restricted_growth_diagnostic(&tower);
    if !diag.mixing_eligible {
        tower.warnings.push("cuts do not grow or r_n^2/h_n does not decrease: not mixing-eligible".into());
    }
    Ok(tower)
}

impl Tower {
    /// Number of completed cut-and-stack steps.
    pub fn stages(&self) -> usize {
        self.cuts.len()
    }

    pub fn height(&self, n: usize) -> u128 {
        self.heights[n]
    }

    /// Raw mass `m_n = h_n / D_n`.
    pub fn mass(&self, n: usize) -> f64 {
        self.heights[n] as f64 / self.width_denominators[n] as f64
    }

    fn check_stage(&self, n: usize) -> Result<()> {
        if n > self.stages() {
            return Err(Error::OutOfRange(format!("stage {n} beyond the {} built", self.stages())));
        }
        Ok(())
    }

    /// A level set at stage `n`.
    pub fn level_set(&self, n: usize, levels: Vec<u64>) -> Result<LevelSet> {
        self.check_stage(n)?;
        LevelSet::new(n, self.heights[n] as u64, levels)
    }

    /// Image of `set` at stage `target`.
    pub fn expand_levels(&self, set: &LevelSet, target: usize) -> Result<LevelSet> {
        self.check_stage(target)?;
        if target < set.stage() {
            return Err(Error::OutOfRange(format!("cannot expand stage {} back to {target}", set.stage())));
        }
        if set.height() as u128 != self.heights[set.stage()] {
            return Err(Error::InvalidArgument("level set does not belong to this tower".into()));
        }
        let mut cur = set.clone();
        for n in set.stage()..target {
            cur = cur.expand_once(&self.bases[n], self.heights[n + 1] as u64);
        }
        Ok(cur)
    }

    /// Measure of `count` levels at stage `n`, relative to the deepest built mass:
    /// `(count / D_n) / (h_S / D_S)`, formed as an exact integer ratio.
    pub fn normalized_measure(&self, count: u64, n: usize) -> f64 {
        let top = self.stages();
        let scale = self.width_denominators[top] / self.width_denominators[n];
        (count as u128 * scale) as f64 / self.heights[top] as f64
    }

    /// Shallowest stage at or above `from` with `h_N >= 2 · lag`.
    pub fn evaluation_stage(&self, from: usize, lag: u128) -> Result<usize> {
        (from..=self.stages())
            .find(|&n| self.heights[n] >= 2 * lag)
            .ok_or_else(|| Error::Certification { lag, reason: format!("no stage up to {} has height >= 2·lag", self.stages()) })
    }
}

/// `μ(T^ℓ B ∩ B)` lies in `[value, value + error]`, in raw width units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub lag: u128,
    pub stage: usize,
    pub hits: u64,
    pub escaped: u64,
    pub value: f64,
    pub error: f64,
}

/// A base set with its images at deeper stages computed once, on demand.
pub struct ExpandedSet<'t> {
    tower: &'t Tower,
    base: LevelSet,
    images: Vec<OnceLock<LevelSet>>,
}

impl<'t> ExpandedSet<'t> {
    pub fn new(tower: &'t Tower, base: LevelSet) -> Result<Self> {
        tower.check_stage(base.stage())?;
        let images = (0..=tower.stages()).map(|_| OnceLock::new()).collect();
        Ok(ExpandedSet { tower, base, images })
    }

    pub fn base(&self) -> &LevelSet {
        &self.base
    }

    pub fn at(&self, stage: usize) -> Result<&LevelSet> {
        self.tower.check_stage(stage)?;
        if stage < self.base.stage() {
            return Err(Error::OutOfRange(format!("stage {stage} is above the set's stage {}", self.base.stage())));
        }
        if let Some(s) = self.images[stage].get() {
            return Ok(s);
        }
        let expanded = if stage == self.base.stage() {
            self.base.clone()
        } else {
            let prev = self.at(stage - 1)?;
            self.tower.expand_levels(prev, stage)?
        };
        Ok(self.images[stage].get_or_init(|| expanded))
    }

    /// Correlation at `lag`, evaluated at `stage` or at the shallowest
    /// certifying stage.
    pub fn correlation(&self, lag: u128, stage: Option<usize>) -> Result<Correlation> {
        let tower = self.tower;
        let stage = match stage {
            Some(s) => {
                if s < self.base.stage() || tower.heights.get(s).is_none_or(|&h| h < 2 * lag) {
                    return Err(Error::Certification { lag, reason: format!("stage {s} cannot certify") });
                }
                s
            }
            None => tower.evaluation_stage(self.base.stage(), lag)?,
        };
        let set = self.at(stage)?;
        let (hits, escaped) = set.shifted_overlap(lag as u64);
        let w = 1.0 / tower.width_denominators[stage] as f64;
        Ok(Correlation { lag, stage, hits, escaped, value: hits as f64 * w, error: escaped as f64 * w })
    }

    /// Normalized `σ̂(ℓ) = (μ(T^ℓB ∩ B) - μ(B)²) / (μ(B)(1 - μ(B)))` with
    /// linearly propagated error.
    pub fn spectral_coefficient(&self, lag: u128, stage: Option<usize>) -> Result<SpectralPoint> {
        let tower = self.tower;
        let mu = tower.normalized_measure(self.base.len(), self.base.stage());
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Error::DegenerateSet(format!("μ(B) = {mu}")));
        }
        let c = self.correlation(lag, stage)?;
        let value = tower.normalized_measure(c.hits, c.stage);
        let error = tower.normalized_measure(c.escaped, c.stage);
        let denom = mu * (1.0 - mu);
        Ok(SpectralPoint {
            lag,
            stage: c.stage,
            value,
            error,
            sigma_hat: (value - mu * mu) / denom,
            sigma_err: error / denom,
        })
    }
}

/// One row of a mixing profile; `value`/`error` are normalized measures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub lag: u128,
    pub stage: usize,
    pub value: f64,
    pub error: f64,
    pub sigma_hat: f64,
    pub sigma_err: f64,
}

impl SpectralPoint {
    /// `|σ̂| + error`, an upper bound on the true `|σ̂|`.
    pub fn upper(&self) -> f64 {
        self.sigma_hat.abs() + self.sigma_err
    }
}

/// `μ(T^ℓ B ∩ B)` for a single query.
pub fn correlation(tower: &Tower, set: &LevelSet, lag: u128, stage: Option<usize>) -> Result<Correlation> {
    ExpandedSet::new(tower, set.clone())?.correlation(lag, stage)
}

pub fn spectral_coefficient(tower: &Tower, set: &LevelSet, lag: u128, stage: Option<usize>) -> Result<SpectralPoint> {
    ExpandedSet::new(tower, set.clone())?.spectral_coefficient(lag, stage)
}

#[derive(Debug)]
pub struct MixingProfile {
    pub rows: Vec<std::result::Result<SpectralPoint, Error>>,
}

impl MixingProfile {
    pub fn points(&self) -> impl Iterator<Item = &SpectralPoint> {
        self.rows.iter().filter_map(|r| r.as_ref().ok())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "lag,value,error,sigma_hat,sigma_err")?;
        for p in self.points() {
            writeln!(out, "{},{},{},{},{}", p.lag, p.value, p.error, p.sigma_hat, p.sigma_err)?;
        }
        Ok(())
    }
}

/// `σ̂` at each lag, evaluated concurrently; uncertifiable lags are reported per row.
///
/// `extra_depth` evaluates each lag that many stages past its shallowest
/// certifying stage, where built.
pub fn mixing_profile(tower: &Tower, set: &LevelSet, lags: &[u128], extra_depth: usize) -> Result<MixingProfile> {
    let expanded = ExpandedSet::new(tower, set.clone())?;
    let rows = lags
        .par_iter()
        .map(|&lag| {
            let shallow = tower.evaluation_stage(set.stage(), lag)?;
            let stage = (shallow + extra_depth).min(tower.stages());
            expanded.spectral_coefficient(lag, Some(stage))
        })
        .collect();
    Ok(MixingProfile { rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthDiagnostic {
    /// `r_n^2 / h_n`.
    pub ratios: Vec<f64>,
    pub decreasing: bool,
    /// Cuts nondecreasing and eventually larger than at the start, with decreasing ratios.
    pub mixing_eligible: bool,
}

pub fn restricted_growth_diagnostic(tower: &Tower) -> GrowthDiagnostic {
    let ratios: Vec<f64> = tower
        .cuts
        .iter()
        .zip(&tower.heights)
        .map(|(&r, &h)| (r as f64).powi(2) / h as f64)
        .collect();
    let decreasing = ratios.windows(2).all(|w| w[1] <= w[0]);
    let cuts_grow = tower.cuts.windows(2).all(|w| w[1] >= w[0])
        && tower.cuts.first().zip(tower.cuts.last()).is_some_and(|(a, b)| b > a);
    GrowthDiagnostic { ratios, decreasing, mixing_eligible: decreasing && cuts_grow }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassDiagnostic {
    pub masses: Vec<f64>,
    /// `(m_{n+1} - m_n) / m_n`.
    pub growth: Vec<f64>,
    pub warning: Option<String>,
}

pub fn total_measure(tower: &Tower) -> MassDiagnostic {
    let masses: Vec<f64> = (0..=tower.stages()).map(|n| tower.mass(n)).collect();
    let growth: Vec<f64> = masses.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect();
    let warning = if growth.windows(2).any(|w| w[1] > w[0]) {
        Some("mass growth is not shrinking; the limit space may be infinite".into())
    } else {
        None
    };
    MassDiagnostic { masses, growth, warning }
}

/// JSON-ready summary of a tower.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerManifest {
    pub plan: SpacerPlan,
    pub cuts: Vec<u64>,
    pub heights: Vec<u128>,
    pub masses: Vec<f64>,
    pub warnings: Vec<String>,
}

impl From<&Tower> for TowerManifest {
    fn from(t: &Tower) -> Self {
        TowerManifest {
            plan: t.plan.clone(),
            cuts: t.cuts.clone(),
            heights: t.heights.clone(),
            masses: total_measure(t).masses,
            warnings: t.warnings.clone(),
        }
    }
}
