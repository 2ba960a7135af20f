//! Counting, enumeration and unranking of feasible wavelength allocations.
//!
//! A feasible allocation is an unordered collection of `n_cam` pairwise
//! distinct `k`-subsets of the `p` target indices whose union is every
//! target. Allocations are kept in canonical form (each subset sorted, subsets
//! in lexicographic order) and enumerated in lexicographic order of their
//! flattened encoding, which makes every allocation addressable by a rank in
//! `[0, count)`.

use std::collections::HashMap;
use std::ops::Range;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::assembly::Allocation;
use crate::error::{Error, Result};

/// Largest `p` the bitmask-based enumerator supports.
pub const MAX_ENUMERABLE_TARGETS: usize = 64;

/// Sizes of the search: `p` targets, `k` passbands per filter, `n_cam` cameras.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SearchSpaceSpec {
    pub p: usize,
    pub k: usize,
    pub n_cam: usize,
}

impl SearchSpaceSpec {
    pub fn new(p: usize, k: usize, n_cam: usize) -> Result<Self> {
        if k == 0 || k > p {
            return Err(Error::InvalidSearchSpace(format!(
                "need 1 <= k <= p, got k = {k}, p = {p}"
            )));
        }
        if n_cam == 0 {
            return Err(Error::InvalidSearchSpace("need at least one camera".into()));
        }
        if n_cam * k < p {
            return Err(Error::InvalidSearchSpace(format!(
                "condition (iii) violated: n_cam*k = {} < p = {p}, not every target can be covered",
                n_cam * k
            )));
        }
        Ok(Self { p, k, n_cam })
    }

    /// `n_cam * k == p`: every target measured exactly once.
    pub fn is_minimum_case(&self) -> bool {
        self.n_cam * self.k == self.p
    }
}

fn binomial(n: &BigUint, r: usize) -> BigUint {
    if *n < BigUint::from(r) {
        return BigUint::zero();
    }
    let mut acc = BigUint::one();
    for j in 0..r {
        acc = acc * (n - BigUint::from(j)) / BigUint::from(j + 1);
    }
    acc
}

fn binomial_u128(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for j in 0..r {
        acc = acc * (n - j) as u128 / (j + 1) as u128;
    }
    acc
}

/// Number of feasible allocations, by inclusion–exclusion over the targets
/// left uncovered:
/// `Σ_i (-1)^i C(p, i) C(C(p-i, k), n_cam)`.
pub fn count_feasible(spec: &SearchSpaceSpec) -> BigUint {
    let mut total = BigInt::zero();
    for i in 0..=spec.p {
        let subsets = binomial(&BigUint::from(spec.p - i), spec.k);
        let term = binomial(&BigUint::from(spec.p), i) * binomial(&subsets, spec.n_cam);
        if term.is_zero() {
            // C(p-i, k) < n_cam from here on
            break;
        }
        if i % 2 == 0 {
            total += BigInt::from(term);
        } else {
            total -= BigInt::from(term);
        }
    }
    total
        .to_biguint()
        .expect("inclusion-exclusion count is nonnegative")
}

/// Closed form for the minimum case: `p! / (n_cam! (k!)^n_cam)`.
pub fn count_minimum(spec: &SearchSpaceSpec) -> Result<BigUint> {
    if !spec.is_minimum_case() {
        return Err(Error::NotMinimumCase(format!(
            "n_cam*k = {} != p = {}",
            spec.n_cam * spec.k,
            spec.p
        )));
    }
    let fact = |n: usize| -> BigUint { (1..=n).fold(BigUint::one(), |a, i| a * BigUint::from(i)) };
    let denom = fact(spec.n_cam) * num_traits::pow(fact(spec.k), spec.n_cam);
    Ok(fact(spec.p) / denom)
}

/// All k-subsets of `0..p` in lexicographic order.
fn k_subsets(p: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] < p - k + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Counts completions of partial allocations and maps ranks to allocations.
///
/// `completions(start, r, missing)` is the number of ways to pick `r` subset
/// indices, strictly increasing and all `>= start`, whose union contains the
/// `missing` targets. Results are memoized, so an `Enumerator` is cheap to
/// query repeatedly but is not shared between threads; clone one per worker.
#[derive(Debug, Clone)]
pub struct Enumerator {
    spec: SearchSpaceSpec,
    subsets: Vec<Vec<usize>>,
    masks: Vec<u64>,
    firsts: Vec<usize>,
    full: u64,
    total: u64,
    memo: HashMap<(u32, u32, u64), u128>,
}

impl Enumerator {
    pub fn new(spec: SearchSpaceSpec) -> Result<Self> {
        if spec.p > MAX_ENUMERABLE_TARGETS {
            return Err(Error::InvalidSearchSpace(format!(
                "enumeration supports at most {MAX_ENUMERABLE_TARGETS} targets, got {}",
                spec.p
            )));
        }
        let total = count_feasible(&spec).to_u64().ok_or_else(|| {
            Error::InvalidSearchSpace("search space too large to enumerate".into())
        })?;
        let subsets = k_subsets(spec.p, spec.k);
        let masks = subsets
            .iter()
            .map(|s| s.iter().fold(0u64, |m, &i| m | (1 << i)))
            .collect();
        let firsts = subsets.iter().map(|s| s[0]).collect();
        let full = if spec.p == 64 {
            u64::MAX
        } else {
            (1u64 << spec.p) - 1
        };
        Ok(Self {
            spec,
            subsets,
            masks,
            firsts,
            full,
            total,
            memo: HashMap::new(),
        })
    }

    pub fn spec(&self) -> &SearchSpaceSpec {
        &self.spec
    }

    /// Number of feasible allocations.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of candidate filters, `C(p, k)`.
    pub fn subset_count(&self) -> usize {
        self.subsets.len()
    }

    fn completions(&mut self, start: usize, r: usize, missing: u64) -> u128 {
        if r == 0 {
            return u128::from(missing == 0);
        }
        let avail = self.subsets.len().saturating_sub(start);
        if r > avail {
            return 0;
        }
        if missing == 0 {
            return binomial_u128(avail, r);
        }
        if missing.count_ones() as usize > r * self.spec.k {
            return 0;
        }
        // subsets from `start` on never contain anything below their first element
        if self.firsts[start] > missing.trailing_zeros() as usize {
            return 0;
        }
        let key = (start as u32, r as u32, missing);
        if let Some(&c) = self.memo.get(&key) {
            return c;
        }
        let take = self.completions(start + 1, r - 1, missing & !self.masks[start]);
        let skip = self.completions(start + 1, r, missing);
        let c = take + skip;
        self.memo.insert(key, c);
        c
    }

    fn to_allocation(&self, chosen: &[usize]) -> Allocation {
        Allocation::from_canonical_unchecked(
            chosen.iter().map(|&t| self.subsets[t].clone()).collect(),
        )
    }

    /// The allocation at position `rank` of the enumeration order.
    pub fn unrank(&mut self, rank: u64) -> Option<Allocation> {
        let chosen = self.unrank_indices(rank)?;
        Some(self.to_allocation(&chosen))
    }

    fn unrank_indices(&mut self, rank: u64) -> Option<Vec<usize>> {
        if rank >= self.total {
            return None;
        }
        let n = self.spec.n_cam;
        let mut rank = u128::from(rank);
        let mut chosen = Vec::with_capacity(n);
        let mut missing = self.full;
        let mut start = 0;
        for level in 0..n {
            let r = n - level;
            let mut found = false;
            #[allow(clippy::mut_range_bound)] // the loop breaks right after the update
            for t in start..self.subsets.len() {
                let c = self.completions(t + 1, r - 1, missing & !self.masks[t]);
                if rank < c {
                    chosen.push(t);
                    missing &= !self.masks[t];
                    start = t + 1;
                    found = true;
                    break;
                }
                rank -= c;
            }
            if !found {
                return None;
            }
        }
        Some(chosen)
    }

    /// Position of `allocation` in the enumeration order, if it is feasible
    /// for this search space.
    pub fn rank(&mut self, allocation: &Allocation) -> Option<u64> {
        let canon = allocation.canonical();
        if canon.n_cam() != self.spec.n_cam || canon.k() != self.spec.k {
            return None;
        }
        let mut chosen = Vec::with_capacity(canon.n_cam());
        for s in canon.subsets() {
            if s.iter().any(|&i| i >= self.spec.p) {
                return None;
            }
            let t = self.subsets.binary_search(s).ok()?;
            chosen.push(t);
        }
        if chosen.windows(2).any(|w| w[0] >= w[1]) {
            return None;
        }
        let n = self.spec.n_cam;
        let mut rank: u128 = 0;
        let mut missing = self.full;
        let mut start = 0;
        for (level, &t_chosen) in chosen.iter().enumerate() {
            let r = n - level;
            for t in start..t_chosen {
                rank += self.completions(t + 1, r - 1, missing & !self.masks[t]);
            }
            missing &= !self.masks[t_chosen];
            start = t_chosen + 1;
        }
        if missing != 0 {
            return None;
        }
        u64::try_from(rank).ok()
    }

    /// Iterator over all allocations from `rank` on.
    pub fn iter_from(mut self, rank: u64) -> AllocationIter {
        let current = self.unrank_indices(rank);
        let missing = current
            .as_ref()
            .map(|c| self.prefix_missing(c))
            .unwrap_or_default();
        AllocationIter {
            enumerator: self,
            current,
            missing,
            next_rank: rank,
        }
    }

    /// `missing[l]` = targets not covered by the first `l` chosen subsets.
    fn prefix_missing(&self, chosen: &[usize]) -> Vec<u64> {
        let mut out = Vec::with_capacity(chosen.len() + 1);
        let mut m = self.full;
        out.push(m);
        for &t in chosen {
            m &= !self.masks[t];
            out.push(m);
        }
        out
    }
}

/// Streams allocations in enumeration order without materializing them.
#[derive(Debug, Clone)]
pub struct AllocationIter {
    enumerator: Enumerator,
    current: Option<Vec<usize>>,
    missing: Vec<u64>,
    next_rank: u64,
}

impl AllocationIter {
    /// Rank of the allocation the next call to `next` yields.
    pub fn next_rank(&self) -> u64 {
        self.next_rank
    }

    /// Subset indices of the next allocation, without allocating.
    pub(crate) fn peek_subsets(&self) -> Option<impl Iterator<Item = &[usize]> + '_> {
        let cur = self.current.as_ref()?;
        Some(cur.iter().map(|&t| self.enumerator.subsets[t].as_slice()))
    }

    /// Moves to the next allocation; false when exhausted.
    pub(crate) fn advance(&mut self) -> bool {
        let Some(cur) = self.current.as_mut() else {
            return false;
        };
        let e = &mut self.enumerator;
        let n = e.spec.n_cam;
        let m = e.subsets.len();
        self.next_rank += 1;
        for level in (0..n).rev() {
            let r = n - level;
            let before = self.missing[level];
            let next = (cur[level] + 1..m)
                .find(|&t| e.completions(t + 1, r - 1, before & !e.masks[t]) > 0);
            if let Some(t) = next {
                cur[level] = t;
                self.missing[level + 1] = before & !e.masks[t];
                for l in level + 1..n {
                    let r = n - l;
                    let before = self.missing[l];
                    let t = (cur[l - 1] + 1..m)
                        .find(|&t| e.completions(t + 1, r - 1, before & !e.masks[t]) > 0)
                        .expect("a completion exists when the prefix count is positive");
                    cur[l] = t;
                    self.missing[l + 1] = before & !e.masks[t];
                }
                return true;
            }
        }
        self.current = None;
        false
    }
}

impl Iterator for AllocationIter {
    type Item = Allocation;

    fn next(&mut self) -> Option<Allocation> {
        let cur = self.current.as_ref()?;
        let out = self.enumerator.to_allocation(cur);
        self.advance();
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        if self.current.is_none() {
            return (0, Some(0));
        }
        let left = (self.enumerator.total - self.next_rank) as usize;
        (left, Some(left))
    }
}

/// Streams every feasible canonical allocation in lexicographic order.
pub fn enumerate_allocations(spec: &SearchSpaceSpec) -> Result<AllocationIter> {
    Ok(Enumerator::new(*spec)?.iter_from(0))
}

/// Splits `[0, total)` into at most `n` contiguous, nearly equal ranges.
pub fn rank_chunks(total: u64, n: usize) -> Vec<Range<u64>> {
    let n = (n.max(1) as u64).min(total.max(1));
    let base = total / n;
    let extra = total % n;
    let mut out = Vec::with_capacity(n as usize);
    let mut lo = 0;
    for i in 0..n {
        let len = base + u64::from(i < extra);
        out.push(lo..lo + len);
        lo += len;
    }
    out
}
