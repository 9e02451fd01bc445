//! Edge-coverage bitmap in the usual greybox layout: each transition
//! between two instrumentation sites bumps one byte of a 64 KiB map.

pub const MAP_SIZE: usize = 1 << 16;

/// Map slot for the transition `prev_loc -> cur_loc`. The caller then sets
/// `prev_loc = cur_loc >> 1` so that `A -> B` and `B -> A` land apart.
#[inline]
pub fn coverage_index(prev_loc: u16, cur_loc: u16) -> usize {
    (prev_loc ^ cur_loc) as usize
}

/// Hit-count class for a raw counter. Counts are grouped as
/// 1, 2, 3, 4-7, 8-15, 16-31, 32-127 and 128+, one bit per group.
#[inline]
pub fn bucket_class(count: u8) -> u8 {
    match count {
        0 => 0,
        1 => 1,
        2 => 2,
        3 => 4,
        4..=7 => 8,
        8..=15 => 16,
        16..=31 => 32,
        32..=127 => 64,
        128..=255 => 128,
    }
}

/// Raw hit counts for one execution.
///
/// Touched slots are tracked so that resetting and scanning the map costs
/// time proportional to the path length, not to the map size.
#[derive(Clone)]
pub struct CoverageMap {
    hits: Box<[u8]>,
    touched: Vec<u16>,
    prev_loc: u16,
}

impl Default for CoverageMap {
    fn default() -> Self {
        Self::new()
    }
}

impl std::fmt::Debug for CoverageMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoverageMap").field("touched", &self.touched.len()).finish()
    }
}

impl CoverageMap {
    pub fn new() -> Self {
        Self { hits: vec![0u8; MAP_SIZE].into_boxed_slice(), touched: Vec::new(), prev_loc: 0 }
    }

    /// Records arrival at instrumentation site `cur_loc`.
    #[inline]
    pub fn visit(&mut self, cur_loc: u16) {
        let idx = coverage_index(self.prev_loc, cur_loc);
        self.bump(idx);
        self.prev_loc = cur_loc >> 1;
    }

    /// Bumps one slot directly, bypassing the edge hash. Used for
    /// comparison-progress feedback.
    #[inline]
    pub fn bump(&mut self, idx: usize) {
        let slot = &mut self.hits[idx % MAP_SIZE];
        if *slot == 0 {
            self.touched.push(idx as u16);
        }
        *slot = slot.saturating_add(1);
    }

    pub fn get(&self, idx: usize) -> u8 {
        self.hits[idx]
    }

    /// Sets a raw count; intended for tests and tools that build maps by hand.
    pub fn set(&mut self, idx: usize, count: u8) {
        if self.hits[idx] == 0 && count != 0 {
            self.touched.push(idx as u16);
        }
        self.hits[idx] = count;
    }

    pub fn is_empty(&self) -> bool {
        self.touched.iter().all(|&i| self.hits[i as usize] == 0)
    }

    pub fn reset(&mut self) {
        for &i in &self.touched {
            self.hits[i as usize] = 0;
        }
        self.touched.clear();
        self.prev_loc = 0;
    }

    /// Sorted `(index, class)` pairs of every nonzero slot.
    pub fn signature(&self) -> Vec<(u16, u8)> {
        let mut sig: Vec<(u16, u8)> = self
            .touched
            .iter()
            .filter(|&&i| self.hits[i as usize] != 0)
            .map(|&i| (i, bucket_class(self.hits[i as usize])))
            .collect();
        sig.sort_unstable();
        sig.dedup();
        sig
    }

    fn nonzero(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        self.touched.iter().map(|&i| (i as usize, self.hits[i as usize])).filter(|&(_, c)| c != 0)
    }
}

/// Hit-count classes observed so far across a campaign, one bitmask per slot.
#[derive(Clone)]
pub struct GlobalCoverage {
    seen: Box<[u8]>,
    pairs: usize,
}

impl Default for GlobalCoverage {
    fn default() -> Self {
        Self::new()
    }
}

impl std::fmt::Debug for GlobalCoverage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GlobalCoverage").field("pairs", &self.pairs).finish()
    }
}

impl GlobalCoverage {
    pub fn new() -> Self {
        Self { seen: vec![0u8; MAP_SIZE].into_boxed_slice(), pairs: 0 }
    }

    /// Class bitmask recorded for slot `idx`.
    pub fn classes(&self, idx: usize) -> u8 {
        self.seen[idx]
    }

    /// Number of distinct `(index, class)` pairs seen.
    pub fn pair_count(&self) -> usize {
        self.pairs
    }

    /// Number of slots with any recorded class.
    pub fn edge_count(&self) -> usize {
        self.seen.iter().filter(|&&b| b != 0).count()
    }

    fn absorb(&mut self, idx: usize, class: u8) -> bool {
        let new = class & !self.seen[idx];
        if new == 0 {
            return false;
        }
        self.seen[idx] |= new;
        self.pairs += new.count_ones() as usize;
        true
    }
}

/// True iff `run` exhibits a hit-count class at some slot that `global`
/// has not recorded yet. New classes are absorbed into `global`.
pub fn is_interesting(run: &CoverageMap, global: &mut GlobalCoverage) -> bool {
    let mut novel = false;
    for (idx, count) in run.nonzero() {
        novel |= global.absorb(idx, bucket_class(count));
    }
    novel
}
