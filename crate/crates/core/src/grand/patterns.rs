//! Error-pattern streams, one per decoder ordering.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

use super::code::MAX_LENGTH;

/// A set of bit positions to flip, with the ordering key it was emitted under.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorPattern {
    pub mask: u128,
    /// Rank sum, cumulative `|llr|` or Hamming weight, depending on the stream.
    pub score: f64,
}

impl ErrorPattern {
    pub fn positions(&self) -> Vec<usize> {
        let mut m = self.mask;
        let mut out = Vec::with_capacity(m.count_ones() as usize);
        while m != 0 {
            out.push(m.trailing_zeros() as usize);
            m &= m - 1;
        }
        out
    }
}

/// Ranks `1..=N` of the inputs, 1 for the smallest; ties go to the lower index.
pub fn rank_reliabilities(abs_llrs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..abs_llrs.len()).collect();
    order.sort_by(|&a, &b| abs_llrs[a].total_cmp(&abs_llrs[b]).then(a.cmp(&b)));
    let mut ranks = vec![0; abs_llrs.len()];
    for (r, &j) in order.iter().enumerate() {
        ranks[j] = r + 1;
    }
    ranks
}

fn check_length(n: usize) -> Result<()> {
    if n == 0 || n > MAX_LENGTH {
        return Err(Error::invalid(
            "length",
            format!("need 1..={MAX_LENGTH} positions, got {n}"),
        ));
    }
    Ok(())
}

/// Largest sum of `cnt` distinct parts from `1..=n`.
fn max_sum(cnt: usize, n: usize) -> usize {
    cnt * n - cnt * cnt.saturating_sub(1) / 2
}

/// Whether `cnt` distinct parts from `lo..=n` can sum to `sum`.
fn feasible(cnt: usize, lo: usize, sum: usize, n: usize) -> bool {
    if cnt == 0 {
        return sum == 0;
    }
    if lo + cnt - 1 > n {
        return false;
    }
    let min = cnt * lo + cnt * (cnt - 1) / 2;
    min <= sum && sum <= max_sum(cnt, n)
}

/// Appends the lexicographically smallest increasing `cnt` parts from `lo..=n`
/// summing to `sum`. Leaves `parts` untouched when impossible.
fn fill_min(parts: &mut Vec<usize>, cnt: usize, mut lo: usize, mut sum: usize, n: usize) -> bool {
    if !feasible(cnt, lo, sum, n) {
        return false;
    }
    for j in 0..cnt {
        let rest = cnt - j - 1;
        let v = lo.max(sum.saturating_sub(max_sum(rest, n)));
        debug_assert!(feasible(rest, v + 1, sum - v, n));
        parts.push(v);
        sum -= v;
        lo = v + 1;
    }
    true
}

/// Next increasing part list with the same length and sum, in lexicographic order.
fn successor(parts: &mut Vec<usize>, total: usize, n: usize) -> bool {
    let k = parts.len();
    for i in (0..k.saturating_sub(1)).rev() {
        let prefix: usize = parts[..i].iter().sum();
        let remaining = total - prefix;
        let after = k - i - 1;
        let v = (parts[i] + 1).max(remaining.saturating_sub(max_sum(after, n)));
        if v <= n && v <= remaining && feasible(after, v + 1, remaining - v, n) {
            parts.truncate(i);
            parts.push(v);
            let filled = fill_min(parts, after, v + 1, remaining - v, n);
            debug_assert!(filled);
            return true;
        }
    }
    false
}

/// ORBGRAND stream: all subsets of positions in nondecreasing rank sum.
///
/// Each weight `w` is enumerated as the partitions of `w` into distinct parts
/// `<= N` (the ranks of the flipped positions). Within one weight, patterns
/// come by increasing number of flips and then lexicographically on the
/// increasing rank list. Memory is one part list, independent of `N`.
#[derive(Debug, Clone)]
pub struct OrbPatterns {
    n: usize,
    /// `by_rank[r - 1]` is the position holding rank `r`.
    by_rank: Vec<usize>,
    weight: usize,
    parts: Vec<usize>,
    started: bool,
    done: bool,
}

impl OrbPatterns {
    pub fn new(ranks: &[usize]) -> Result<Self> {
        let n = ranks.len();
        check_length(n)?;
        let mut by_rank = vec![usize::MAX; n];
        for (pos, &r) in ranks.iter().enumerate() {
            if r == 0 || r > n || by_rank[r - 1] != usize::MAX {
                return Err(Error::NotAPermutation(n));
            }
            by_rank[r - 1] = pos;
        }
        Ok(OrbPatterns {
            n,
            by_rank,
            weight: 0,
            parts: Vec::new(),
            started: false,
            done: false,
        })
    }

    /// Orders patterns by the ranks of `|llr|`.
    pub fn from_llrs(llrs: &[f64]) -> Result<Self> {
        let abs: Vec<f64> = llrs.iter().map(|t| t.abs()).collect();
        Self::new(&rank_reliabilities(&abs))
    }

    fn advance(&mut self) -> bool {
        if !self.parts.is_empty() && successor(&mut self.parts, self.weight, self.n) {
            return true;
        }
        let top = self.n * (self.n + 1) / 2;
        let mut k = self.parts.len() + 1;
        loop {
            while k <= self.n && k * (k + 1) / 2 <= self.weight {
                self.parts.clear();
                if fill_min(&mut self.parts, k, 1, self.weight, self.n) {
                    return true;
                }
                k += 1;
            }
            self.weight += 1;
            if self.weight > top {
                return false;
            }
            k = 1;
        }
    }
}

impl Iterator for OrbPatterns {
    type Item = ErrorPattern;

    fn next(&mut self) -> Option<ErrorPattern> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(ErrorPattern { mask: 0, score: 0.0 });
        }
        if !self.advance() {
            self.done = true;
            self.parts.clear();
            return None;
        }
        let mask = self
            .parts
            .iter()
            .fold(0u128, |m, &r| m | 1u128 << self.by_rank[r - 1]);
        Some(ErrorPattern {
            mask,
            score: self.weight as f64,
        })
    }
}

/// GRAND stream: by Hamming weight, then lexicographically on positions.
#[derive(Debug, Clone)]
pub struct HammingPatterns {
    n: usize,
    combo: Vec<usize>,
    started: bool,
    done: bool,
}

impl HammingPatterns {
    pub fn new(n: usize) -> Result<Self> {
        check_length(n)?;
        Ok(HammingPatterns {
            n,
            combo: Vec::new(),
            started: false,
            done: false,
        })
    }

    fn advance(&mut self) -> bool {
        let k = self.combo.len();
        for i in (0..k).rev() {
            if self.combo[i] < self.n - (k - i) {
                self.combo[i] += 1;
                for j in i + 1..k {
                    self.combo[j] = self.combo[j - 1] + 1;
                }
                return true;
            }
        }
        if k == self.n {
            return false;
        }
        self.combo = (0..k + 1).collect();
        true
    }
}

impl Iterator for HammingPatterns {
    type Item = ErrorPattern;

    fn next(&mut self) -> Option<ErrorPattern> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(ErrorPattern { mask: 0, score: 0.0 });
        }
        if !self.advance() {
            self.done = true;
            return None;
        }
        let mask = self.combo.iter().fold(0u128, |m, &j| m | 1u128 << j);
        Some(ErrorPattern {
            mask,
            score: self.combo.len() as f64,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct SoftEntry {
    cost: f64,
    /// Subset of indices into the reliability-sorted order.
    sorted_mask: u128,
    last: usize,
}

impl PartialEq for SoftEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for SoftEntry {}

impl PartialOrd for SoftEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SoftEntry {
    // Reversed so that BinaryHeap pops the cheapest pattern first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then(other.sorted_mask.cmp(&self.sorted_mask))
    }
}

/// SGRAND stream: patterns in nondecreasing cumulative `|llr|`, which is
/// nonincreasing likelihood.
///
/// Positions are sorted by reliability; a popped pattern whose largest sorted
/// index is `j` spawns the pattern with `j + 1` added and the one with `j`
/// replaced by `j + 1`. Every nonempty subset is reached exactly once and
/// children never cost less than their parent.
#[derive(Debug, Clone)]
pub struct SoftPatterns {
    order: Vec<usize>,
    costs: Vec<f64>,
    heap: BinaryHeap<SoftEntry>,
    started: bool,
}

impl SoftPatterns {
    pub fn new(llrs: &[f64]) -> Result<Self> {
        check_length(llrs.len())?;
        let abs: Vec<f64> = llrs.iter().map(|t| t.abs()).collect();
        let mut order: Vec<usize> = (0..abs.len()).collect();
        order.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]).then(a.cmp(&b)));
        let costs = order.iter().map(|&j| abs[j]).collect();
        Ok(SoftPatterns {
            order,
            costs,
            heap: BinaryHeap::new(),
            started: false,
        })
    }

    fn cost_of(&self, sorted_mask: u128) -> f64 {
        let mut m = sorted_mask;
        let mut c = 0.0;
        while m != 0 {
            c += self.costs[m.trailing_zeros() as usize];
            m &= m - 1;
        }
        c
    }

    fn push(&mut self, sorted_mask: u128, last: usize) {
        let cost = self.cost_of(sorted_mask);
        self.heap.push(SoftEntry {
            cost,
            sorted_mask,
            last,
        });
    }
}

impl Iterator for SoftPatterns {
    type Item = ErrorPattern;

    fn next(&mut self) -> Option<ErrorPattern> {
        if !self.started {
            self.started = true;
            self.push(1, 0);
            return Some(ErrorPattern { mask: 0, score: 0.0 });
        }
        let e = self.heap.pop()?;
        let j = e.last;
        if j + 1 < self.order.len() {
            let next = 1u128 << (j + 1);
            self.push(e.sorted_mask | next, j + 1);
            self.push((e.sorted_mask & !(1u128 << j)) | next, j + 1);
        }
        let mut m = e.sorted_mask;
        let mut mask = 0u128;
        while m != 0 {
            mask |= 1u128 << self.order[m.trailing_zeros() as usize];
            m &= m - 1;
        }
        Some(ErrorPattern {
            mask,
            score: e.cost,
        })
    }
}
