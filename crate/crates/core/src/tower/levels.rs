//! Sets of levels of one column, as sorted lists or bitsets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Size above which a level set is stored as a bitset.
pub const BITSET_THRESHOLD: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
enum Repr {
    Sorted(Vec<u64>),
    /// Bit `i` of the word vector is level `i`; `height` bits in use.
    Bits { words: Vec<u64>, count: u64 },
}

/// Levels `i ∈ [0, h_stage)` of the stage-`stage` column.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSet {
    stage: usize,
    height: u64,
    repr: Repr,
}

impl LevelSet {
    /// Sorts and deduplicates `levels`; every level must lie below `height`.
    pub fn new(stage: usize, height: u64, mut levels: Vec<u64>) -> Result<Self> {
        levels.sort_unstable();
        levels.dedup();
        if let Some(&top) = levels.last() {
            if top >= height {
                return Err(Error::OutOfRange(format!("level {top} outside stage {stage} of height {height}")));
            }
        }
        Ok(LevelSet::from_sorted(stage, height, levels))
    }

    pub(crate) fn from_sorted(stage: usize, height: u64, levels: Vec<u64>) -> Self {
        if levels.len() > BITSET_THRESHOLD {
            LevelSet::bitset_from_sorted(stage, height, &levels)
        } else {
            LevelSet { stage, height, repr: Repr::Sorted(levels) }
        }
    }

    fn bitset_from_sorted(stage: usize, height: u64, levels: &[u64]) -> Self {
        let mut words = vec![0u64; height.div_ceil(64) as usize];
        for &i in levels {
            words[(i / 64) as usize] |= 1 << (i % 64);
        }
        LevelSet { stage, height, repr: Repr::Bits { words, count: levels.len() as u64 } }
    }

    /// The same set forced into bitset form.
    pub fn to_bitset(&self) -> LevelSet {
        match &self.repr {
            Repr::Bits { .. } => self.clone(),
            Repr::Sorted(v) => LevelSet::bitset_from_sorted(self.stage, self.height, v),
        }
    }

    /// The same set forced into sorted-list form.
    pub fn to_sorted(&self) -> LevelSet {
        LevelSet { stage: self.stage, height: self.height, repr: Repr::Sorted(self.levels()) }
    }

    pub fn is_bitset(&self) -> bool {
        matches!(self.repr, Repr::Bits { .. })
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn len(&self) -> u64 {
        match &self.repr {
            Repr::Sorted(v) => v.len() as u64,
            Repr::Bits { count, .. } => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, i: u64) -> bool {
        match &self.repr {
            Repr::Sorted(v) => v.binary_search(&i).is_ok(),
            Repr::Bits { words, .. } => i < self.height && words[(i / 64) as usize] >> (i % 64) & 1 == 1,
        }
    }

    /// Levels in increasing order.
    pub fn levels(&self) -> Vec<u64> {
        match &self.repr {
            Repr::Sorted(v) => v.clone(),
            Repr::Bits { words, count } => {
                let mut out = Vec::with_capacity(*count as usize);
                for (w, &word) in words.iter().enumerate() {
                    let mut bits = word;
                    while bits != 0 {
                        out.push(w as u64 * 64 + bits.trailing_zeros() as u64);
                        bits &= bits - 1;
                    }
                }
                out
            }
        }
    }

    /// Image at the next stage: level `i` goes to `base_j + i` for every `j`.
    pub(crate) fn expand_once(&self, bases: &[u128], next_height: u64) -> LevelSet {
        let src = self.levels();
        let mut out = Vec::with_capacity(src.len() * bases.len());
        // subcolumn j occupies [base_j, base_j + h) and bases increase, so the output is sorted
        for &b in bases {
            let b = b as u64;
            out.extend(src.iter().map(|&i| b + i));
        }
        LevelSet::from_sorted(self.stage + 1, next_height, out)
    }

    /// `(#{i : i, i + lag ∈ S}, #{i ∈ S : i + lag >= height})`.
    pub fn shifted_overlap(&self, lag: u64) -> (u64, u64) {
        match &self.repr {
            Repr::Sorted(v) => sorted_overlap(v, lag, self.height),
            Repr::Bits { words, .. } => bitset_overlap(words, lag, self.height),
        }
    }

    /// Same count through the sorted two-pointer route regardless of storage.
    pub fn shifted_overlap_sorted(&self, lag: u64) -> (u64, u64) {
        sorted_overlap(&self.levels(), lag, self.height)
    }

    /// Same count through the bitset route regardless of storage.
    pub fn shifted_overlap_bitset(&self, lag: u64) -> (u64, u64) {
        match &self.to_bitset().repr {
            Repr::Bits { words, .. } => bitset_overlap(words, lag, self.height),
            Repr::Sorted(_) => unreachable!("to_bitset returns bits"),
        }
    }
}

fn sorted_overlap(v: &[u64], lag: u64, height: u64) -> (u64, u64) {
    let mut hits = 0;
    let mut escaped = 0;
    let mut j = 0;
    for &i in v {
        let target = i.saturating_add(lag);
        if target >= height {
            escaped += 1;
            continue;
        }
        while j < v.len() && v[j] < target {
            j += 1;
        }
        if j < v.len() && v[j] == target {
            hits += 1;
        }
    }
    (hits, escaped)
}

fn bitset_overlap(words: &[u64], lag: u64, height: u64) -> (u64, u64) {
    if lag >= height {
        let total = words.iter().map(|w| w.count_ones() as u64).sum();
        return (0, total);
    }
    let word_shift = (lag / 64) as usize;
    let bit_shift = (lag % 64) as u32;
    let n = words.len();
    let mut hits = 0u64;
    for w in 0..n - word_shift {
        // bits w*64.. of (S >> lag)
        let lo = words[w + word_shift] >> bit_shift;
        let hi = if bit_shift > 0 && w + word_shift + 1 < n {
            words[w + word_shift + 1] << (64 - bit_shift)
        } else {
            0
        };
        hits += (words[w] & (lo | hi)).count_ones() as u64;
    }
    // members in [height - lag, height)
    let start = height - lag;
    let mut escaped = 0u64;
    let first = (start / 64) as usize;
    for (w, &word) in words.iter().enumerate().skip(first) {
        let mut word = word;
        if w == first {
            word &= !0u64 << (start % 64);
        }
        escaped += word.count_ones() as u64;
    }
    (hits, escaped)
}
