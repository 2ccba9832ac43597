//! Exact-match unigram alignment for the METEOR-style score.
//!
//! An alignment pairs candidate tokens with equal reference tokens, each
//! position used at most once. The score needs the maximum number of matches
//! and, among maximum alignments, the minimum number of chunks — a chunk
//! being a maximal run of pairs contiguous in both strings. Matches are
//! fixed by clipped token counts; chunk minimization is a search problem
//! because alignments may cross.

use std::collections::HashMap;

/// Match/chunk statistics of the best alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alignment {
    pub matches: usize,
    pub chunks: usize,
}

/// Memoized states allowed before falling back to the greedy alignment.
/// Typical prose stays far below this; adversarial inputs (long runs of one
/// repeated token) would otherwise blow up the state space.
const STATE_BUDGET: usize = 200_000;

/// Reference positions representable in the search bitmask.
const MASK_LIMIT: usize = 120;

pub fn align(cand: &[String], reference: &[String]) -> Alignment {
    let matches = clipped_matches(cand, reference);
    if matches == 0 {
        return Alignment { matches: 0, chunks: 0 };
    }
    let relevant_ref: Vec<usize> = (0..reference.len())
        .filter(|&j| cand.iter().any(|t| t == &reference[j]))
        .collect();
    if relevant_ref.len() <= MASK_LIMIT {
        let mut search = ChunkSearch::new(cand, reference, &relevant_ref, matches);
        if let Some(chunks) = search.run() {
            return Alignment { matches, chunks };
        }
    }
    Alignment { matches, chunks: greedy_chunks(cand, reference, matches) }
}

fn clipped_matches(cand: &[String], reference: &[String]) -> usize {
    let mut ref_counts: HashMap<&str, usize> = HashMap::new();
    for t in reference {
        *ref_counts.entry(t.as_str()).or_default() += 1;
    }
    let mut matched = 0;
    for t in cand {
        if let Some(c) = ref_counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                matched += 1;
            }
        }
    }
    matched
}

/// Exhaustive minimum-chunk search over exactly-maximum alignments.
///
/// States are (candidate position, used-reference bitmask, link to the
/// previous pair); values are the minimum chunks still needed. `None` from
/// [`ChunkSearch::run`] means the state budget was exhausted.
struct ChunkSearch<'a> {
    cand: &'a [String],
    /// For each candidate position, the maskable indices of equal reference
    /// tokens (ascending).
    options: Vec<Vec<u8>>,
    /// Maskable index -> original reference position.
    ref_pos: &'a [usize],
    target: usize,
    /// Relevant candidate positions at or after index i (suffix counts).
    cand_remaining: Vec<usize>,
    memo: HashMap<(usize, u128, u8), Option<u32>>,
    exhausted: bool,
}

const NO_LINK: u8 = u8::MAX;

impl<'a> ChunkSearch<'a> {
    fn new(
        cand: &'a [String],
        reference: &'a [String],
        relevant_ref: &'a [usize],
        target: usize,
    ) -> Self {
        let options: Vec<Vec<u8>> = cand
            .iter()
            .map(|t| {
                relevant_ref
                    .iter()
                    .enumerate()
                    .filter(|(_, &j)| &reference[j] == t)
                    .map(|(slot, _)| slot as u8)
                    .collect()
            })
            .collect();
        let mut cand_remaining = vec![0usize; cand.len() + 1];
        for i in (0..cand.len()).rev() {
            cand_remaining[i] = cand_remaining[i + 1] + usize::from(!options[i].is_empty());
        }
        ChunkSearch {
            cand,
            options,
            ref_pos: relevant_ref,
            target,
            cand_remaining,
            memo: HashMap::new(),
            exhausted: false,
        }
    }

    fn run(&mut self) -> Option<usize> {
        let result = self.solve(0, 0, NO_LINK);
        if self.exhausted {
            return None;
        }
        result.map(|c| c as usize)
    }

    /// Minimum additional chunks needed from candidate position `i` with
    /// `mask` reference slots consumed, where `prev` is the slot matched to
    /// position `i - 1` (or `NO_LINK`). `None` when no completion reaches
    /// the target match count.
    fn solve(&mut self, i: usize, mask: u128, prev: u8) -> Option<u32> {
        let matched = mask.count_ones() as usize;
        if matched + self.cand_remaining.get(i).copied().unwrap_or(0) < self.target {
            return None;
        }
        if i == self.cand.len() {
            return if matched == self.target { Some(0) } else { None };
        }
        // prev only matters when this position could actually extend it
        let key_prev = if prev != NO_LINK && self.can_continue(i, prev) {
            prev
        } else {
            NO_LINK
        };
        let key = (i, mask, key_prev);
        if let Some(&cached) = self.memo.get(&key) {
            return cached;
        }
        if self.memo.len() >= STATE_BUDGET {
            self.exhausted = true;
            return None;
        }

        let mut best: Option<u32> = self.solve(i + 1, mask, NO_LINK);
        let slots = self.options[i].clone();
        for slot in slots {
            if mask & (1u128 << slot) != 0 {
                continue;
            }
            // A pair continues the previous chunk when it sits directly
            // after the previous pair in both strings.
            let continues = key_prev != NO_LINK && slot == key_prev + 1;
            let cost = u32::from(!continues);
            if let Some(sub) = self.solve(i + 1, mask | (1u128 << slot), slot) {
                let total = sub + cost;
                if best.is_none_or(|b| total < b) {
                    best = Some(total);
                }
            }
            if self.exhausted {
                return None;
            }
        }
        self.memo.insert(key, best);
        best
    }

    /// True when candidate position `i` has the option that sits directly
    /// after `prev` in both strings (the only slot that can extend a chunk).
    fn can_continue(&self, i: usize, prev: u8) -> bool {
        let next = prev + 1;
        (next as usize) < self.ref_pos.len()
            && self.ref_pos[next as usize] == self.ref_pos[prev as usize] + 1
            && self.options[i].contains(&next)
    }
}

/// Deterministic fallback: scan the candidate left to right, preferring the
/// reference position that extends the current chunk, otherwise the smallest
/// unused one, with per-token quotas keeping the total at the maximum.
fn greedy_chunks(cand: &[String], reference: &[String], target: usize) -> usize {
    let mut quota: HashMap<&str, usize> = HashMap::new();
    let mut ref_counts: HashMap<&str, usize> = HashMap::new();
    let mut cand_counts: HashMap<&str, usize> = HashMap::new();
    for t in reference {
        *ref_counts.entry(t.as_str()).or_default() += 1;
    }
    for t in cand {
        *cand_counts.entry(t.as_str()).or_default() += 1;
    }
    for (t, c) in &cand_counts {
        quota.insert(t, (*c).min(*ref_counts.get(t).unwrap_or(&0)));
    }

    let mut used = vec![false; reference.len()];
    let mut chunks = 0usize;
    let mut matched = 0usize;
    let mut prev: Option<usize> = None;
    for token in cand {
        let remaining = quota.get_mut(token.as_str());
        let Some(remaining) = remaining.filter(|r| **r > 0) else {
            prev = None;
            continue;
        };
        let continuation = prev
            .map(|p| p + 1)
            .filter(|&j| j < reference.len() && !used[j] && &reference[j] == token);
        let pick = continuation.or_else(|| {
            (0..reference.len()).find(|&j| !used[j] && &reference[j] == token)
        });
        match pick {
            Some(j) => {
                if prev != Some(j.wrapping_sub(1)) {
                    chunks += 1;
                }
                used[j] = true;
                *remaining -= 1;
                matched += 1;
                prev = Some(j);
            }
            None => prev = None,
        }
    }
    debug_assert_eq!(matched, target);
    chunks
}
