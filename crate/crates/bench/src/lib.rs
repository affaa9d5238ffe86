//! Seeded inputs shared by the benchmarks.

use stairlab::{build_tower, BuildOptions, CutRule, DistSpec, IncrementDistribution, LevelSet, SpacerPlan, StochasticSequence, Tower};

pub fn geometric_sequence(len: usize, seed: u64) -> StochasticSequence {
    let g = IncrementDistribution::geometric(0.5).expect("valid law");
    StochasticSequence::generate(&g, len, seed).expect("sequence fits")
}

/// Random staircase with `r_n = n + 3`.
pub fn random_staircase(stages: usize, seed: u64) -> Tower {
    let plan = SpacerPlan::Stochastic { dist: DistSpec::Geometric { alpha: 0.5 }, seed };
    let cuts = CutRule::Linear { offset: 3 }.cuts(stages).expect("cuts");
    build_tower(&plan, &cuts, stages, BuildOptions::default()).expect("tower builds")
}

/// Level 0 of stage 2 carried to `stage`.
pub fn expanded_base(tower: &Tower, stage: usize) -> LevelSet {
    let base = tower.level_set(2, vec![0]).expect("stage 2 exists");
    tower.expand_levels(&base, stage).expect("stage exists")
}
