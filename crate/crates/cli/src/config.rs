//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stairlab::phase::{irrational_grid, roots_of_unity};
use stairlab::rng::{child_seed, streams};
use stairlab::tower::OrnsteinRule;
use stairlab::{CutRule, DistSpec, Phase, SpacerPlan};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every stochastic input is derived from it.
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Suites to run; all of them when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suites: Option<Vec<String>>,
    pub distribution: DistSpec,
    #[serde(default)]
    pub sequence: SequenceSpec,
    #[serde(default)]
    pub z_grid: ZGrid,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub average: AverageSpec,
    #[serde(default)]
    pub inequalities: InequalitySpec,
    #[serde(default)]
    pub concentration: ConcentrationSpec,
    #[serde(default)]
    pub tower: TowerSpec,
}

fn default_output() -> PathBuf {
    PathBuf::from("stairlab-out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    /// Number of increments `M`.
    pub length: usize,
    /// Shift identities are checked for `1 <= n, k, t <= identity_bound`.
    pub identity_bound: usize,
}

impl Default for SequenceSpec {
    fn default() -> Self {
        SequenceSpec { length: 10_000, identity_bound: 30 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ZGrid {
    /// Angles in `[0.05, 0.95]` drawn from the master seed.
    Irrational { count: usize },
    /// Every `e^{2πi j/q}` with `q <= max_order`, excluding 1.
    Roots { max_order: u64 },
    /// Explicit angles in turns.
    Explicit { turns: Vec<f64> },
}

impl Default for ZGrid {
    fn default() -> Self {
        ZGrid::Irrational { count: 8 }
    }
}

impl ZGrid {
    pub fn points(&self, seed: u64) -> Vec<Phase> {
        match self {
            ZGrid::Irrational { count } => irrational_grid(*count, child_seed(seed, streams::Z_GRID)),
            ZGrid::Roots { max_order } => roots_of_unity(*max_order),
            ZGrid::Explicit { turns } => turns.iter().map(|&t| Phase::from_turns(t)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub l: Vec<usize>,
    pub q: Vec<usize>,
}

impl Default for Grids {
    fn default() -> Self {
        Grids { n: vec![100, 1000], k: vec![1, 2, 3], l: vec![10], q: vec![20] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AverageSpec {
    /// Allowed excess of `|avg|²` over the Cesàro bound at the largest `N`.
    pub cesaro_slack: f64,
}

impl Default for AverageSpec {
    fn default() -> Self {
        AverageSpec { cesaro_slack: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalitySpec {
    /// Randomized cases per inequality.
    pub cases: usize,
    /// Longest random vector.
    pub max_len: usize,
}

impl Default for InequalitySpec {
    fn default() -> Self {
        InequalitySpec { cases: 1000, max_len: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationSpec {
    /// Angle of `z` in turns; the golden angle when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_turns: Option<f64>,
    pub deltas: Vec<f64>,
    pub trials: usize,
    /// Moment order `R` for the tail bound.
    pub r: u32,
    /// Threshold for `|(1/N) Σ (b_n - E b)|` at the largest `N`.
    pub strong_law_threshold: f64,
}

impl Default for ConcentrationSpec {
    fn default() -> Self {
        ConcentrationSpec { z_turns: None, deltas: vec![0.1, 0.3, 0.5], trials: 1000, r: 2, strong_law_threshold: 0.05 }
    }
}

impl ConcentrationSpec {
    pub fn z(&self) -> Phase {
        self.z_turns.map(Phase::from_turns).unwrap_or_else(Phase::golden)
    }
}

/// [`SpacerPlan`] without seeds; seeds come from the master seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "plan", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlanSpec {
    Staircase,
    Stochastic { dist: DistSpec },
    Dynamical { dists: Vec<DistSpec> },
    Ornstein { rule: OrnsteinRule },
    Polynomial { rows: Vec<Vec<i64>> },
    Explicit { rows: Vec<Vec<u64>> },
}

impl PlanSpec {
    pub fn with_seed(&self, seed: u64) -> SpacerPlan {
        match self.clone() {
            PlanSpec::Staircase => SpacerPlan::Staircase,
            PlanSpec::Stochastic { dist } => SpacerPlan::Stochastic { dist, seed },
            PlanSpec::Dynamical { dists } => SpacerPlan::Dynamical { dists, seed },
            PlanSpec::Ornstein { rule } => SpacerPlan::Ornstein { rule, seed },
            PlanSpec::Polynomial { rows } => SpacerPlan::Polynomial { rows },
            PlanSpec::Explicit { rows } => SpacerPlan::Explicit { rows },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerSpec {
    pub spacers: PlanSpec,
    pub cuts: CutRule,
    pub stages: usize,
    /// Stage and levels of the set `B`.
    pub base_stage: usize,
    pub base_levels: Vec<u64>,
    /// Lags for the mixing profile; `h_{base}..h_{S-2}` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lags: Option<Vec<u64>>,
    pub extra_depth: usize,
    /// Cap on column heights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_height: Option<u64>,
    /// Required bound on `|σ̂| + error` at the last lag, which must also
    /// decrease strictly over the last three lags.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_threshold: Option<f64>,
    /// Required lower bound on `σ̂` at every lag.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rigidity_floor: Option<f64>,
}

impl Default for TowerSpec {
    fn default() -> Self {
        TowerSpec {
            spacers: PlanSpec::Stochastic { dist: DistSpec::Geometric { alpha: 0.5 } },
            cuts: CutRule::Linear { offset: 3 },
            stages: 6,
            base_stage: 2,
            base_levels: vec![0],
            lags: None,
            extra_depth: 1,
            max_height: None,
            decay_threshold: None,
            rigidity_floor: None,
        }
    }
}

impl ExperimentConfig {
    /// A config with every section at its default.
    pub fn new(seed: u64, distribution: DistSpec) -> Self {
        ExperimentConfig {
            seed,
            output: default_output(),
            suites: None,
            distribution,
            sequence: SequenceSpec::default(),
            z_grid: ZGrid::default(),
            grids: Grids::default(),
            average: AverageSpec::default(),
            inequalities: InequalitySpec::default(),
            concentration: ConcentrationSpec::default(),
            tower: TowerSpec::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Structural checks that do not need any computation.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        self.distribution.build().map_err(|e| CliError::Config(format!("distribution: {e}")))?;
        let g = &self.grids;
        if [&g.n, &g.k, &g.l, &g.q].iter().any(|v| v.is_empty() || v.contains(&0)) {
            return bad("grids.n, grids.k, grids.l and grids.q must be nonempty and positive".into());
        }
        let need = g.n.iter().max().unwrap() + g.k.iter().max().unwrap();
        if need > self.sequence.length {
            return bad(format!("sequence.length = {} but the grids need {need}", self.sequence.length));
        }
        if self.inequalities.max_len == 0 {
            return bad("inequalities.max_len must be positive".into());
        }
        if self.concentration.trials < 2 || self.concentration.r == 0 {
            return bad("concentration needs trials >= 2 and r >= 1".into());
        }
        if self.concentration.deltas.iter().any(|&d| d <= 0.0) {
            return bad("concentration.deltas must be positive".into());
        }
        if self.tower.base_stage > self.tower.stages {
            return bad(format!("tower.base_stage = {} beyond {} stages", self.tower.base_stage, self.tower.stages));
        }
        if self.z_grid.points(self.seed).is_empty() {
            return bad("z_grid is empty".into());
        }
        Ok(())
    }
}
