//! Exhaustive minimisation of the condition number over all feasible
//! allocations.
//!
//! The rank range of the enumeration is cut into contiguous chunks that are
//! evaluated independently (in parallel when more than one thread is
//! requested). Each chunk keeps its own best-`m` list; the lists are merged in
//! chunk order under the `(kappa, rank)` ordering, so the result does not
//! depend on the chunking or on the thread count.

use std::cmp::Ordering;
use std::ops::Range;

use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{fill_system, Allocation, DesignMatrix};
use crate::conditioning::{conditioning_of, ConditioningReport};
use crate::enumeration::{rank_chunks, Enumerator, SearchSpaceSpec};
use crate::error::{Error, Result};

/// Relative tolerance under which two condition numbers count as tied.
pub const KAPPA_TIE_TOLERANCE: f64 = 1e-12;

/// One evaluated allocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedAllocation {
    /// Position in the enumeration order.
    pub rank: u64,
    pub allocation: Allocation,
    pub report: ConditioningReport,
}

/// Ascending kappa; near-equal kappas fall back to enumeration rank, which
/// is the lexicographic order of the canonical encodings.
pub fn compare_ranked(a: &RankedAllocation, b: &RankedAllocation) -> Ordering {
    compare_key((a.report.kappa, a.rank), (b.report.kappa, b.rank))
}

fn compare_key(a: (f64, u64), b: (f64, u64)) -> Ordering {
    let (ka, kb) = (a.0, b.0);
    let tied = ka == kb || (ka - kb).abs() <= KAPPA_TIE_TOLERANCE * ka.abs().max(kb.abs());
    if tied {
        a.1.cmp(&b.1)
    } else {
        ka.total_cmp(&kb)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingResult {
    pub best: RankedAllocation,
    /// Best allocations, ascending by kappa.
    pub top_m: Vec<RankedAllocation>,
    pub evaluated_count: u64,
    pub infeasible_rank_count: u64,
    /// Kappa of every evaluated allocation in rank order (`+inf` when rank
    /// deficient); only filled when requested.
    #[serde(skip)]
    pub kappas: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    pub top_m: usize,
    /// Worker threads; `None` uses the available parallelism.
    pub threads: Option<usize>,
    /// Number of rank chunks; 0 picks four per thread.
    pub chunks: usize,
    /// Keep the kappa of every allocation.
    pub record_all: bool,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            top_m: 10,
            threads: None,
            chunks: 0,
            record_all: false,
        }
    }
}

#[derive(Debug, Default)]
struct ChunkResult {
    top: Vec<(f64, u64, ConditioningReport)>,
    evaluated: u64,
    rank_deficient: u64,
    kappas: Vec<f64>,
}

fn push_bounded(
    top: &mut Vec<(f64, u64, ConditioningReport)>,
    m: usize,
    item: (f64, u64, ConditioningReport),
) {
    if m == 0 {
        return;
    }
    if top.len() == m {
        let worst = top.last().expect("nonempty");
        if compare_key((item.0, item.1), (worst.0, worst.1)) != Ordering::Less {
            return;
        }
        top.pop();
    }
    let pos = top
        .binary_search_by(|probe| compare_key((probe.0, probe.1), (item.0, item.1)))
        .unwrap_or_else(|e| e);
    top.insert(pos, item);
}

fn evaluate_range(
    designs: &[DesignMatrix],
    enumerator: Enumerator,
    range: Range<u64>,
    m: usize,
    record_all: bool,
) -> ChunkResult {
    let mut out = ChunkResult::default();
    if range.is_empty() {
        return out;
    }
    let mut it = enumerator.iter_from(range.start);
    let keep = m.max(1);
    for rank in range {
        let subsets: Vec<&[usize]> = match it.peek_subsets() {
            Some(s) => s.collect(),
            None => break,
        };
        let a = fill_system(designs, &subsets);
        let report = conditioning_of(&a);
        out.evaluated += 1;
        if record_all {
            out.kappas.push(report.kappa);
        }
        if report.rank_ok {
            push_bounded(&mut out.top, keep, (report.kappa, rank, report));
        } else {
            out.rank_deficient += 1;
        }
        it.advance();
    }
    out
}

fn check_inputs(designs: &[DesignMatrix], spec: &SearchSpaceSpec) -> Result<()> {
    if designs.is_empty() || (designs.len() != 1 && designs.len() != spec.n_cam) {
        return Err(Error::DimensionMismatch(format!(
            "{} design matrices for {} cameras",
            designs.len(),
            spec.n_cam
        )));
    }
    if let Some(d) = designs.iter().find(|d| d.p() != spec.p) {
        return Err(Error::DimensionMismatch(format!(
            "design matrix has {} targets, search space has p = {}",
            d.p(),
            spec.p
        )));
    }
    Ok(())
}

/// Evaluates every feasible allocation and returns the minimiser of kappa.
pub fn optimize(
    designs: &[DesignMatrix],
    spec: &SearchSpaceSpec,
    options: &OptimizeOptions,
) -> Result<RankingResult> {
    let total = Enumerator::new(*spec)?.total();
    #[allow(clippy::single_range_in_vec_init)]
    optimize_ranks(designs, spec, &[0..total], options)
}

/// Like [`optimize`], restricted to the given rank ranges of the enumeration.
/// Ranges are evaluated in the order given.
pub fn optimize_ranks(
    designs: &[DesignMatrix],
    spec: &SearchSpaceSpec,
    ranges: &[Range<u64>],
    options: &OptimizeOptions,
) -> Result<RankingResult> {
    check_inputs(designs, spec)?;
    let enumerator = Enumerator::new(*spec)?;
    let total = enumerator.total();
    if let Some(r) = ranges.iter().find(|r| r.end > total) {
        return Err(Error::InvalidSearchSpace(format!(
            "rank range {r:?} exceeds the {total} feasible allocations"
        )));
    }
    let threads = options
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, usize::from))
        .max(1);
    let n_chunks = if options.chunks == 0 {
        threads * 4
    } else {
        options.chunks
    };
    let selected: u64 = ranges.iter().map(|r| r.end - r.start).sum();
    let per_range = n_chunks.div_ceil(ranges.len().max(1));
    let work: Vec<Range<u64>> = ranges
        .iter()
        .flat_map(|r| {
            let len = r.end - r.start;
            let pieces = if selected == 0 {
                1
            } else {
                ((len as u128 * n_chunks as u128 / selected as u128) as usize)
                    .clamp(1, per_range.max(1))
            };
            rank_chunks(len, pieces)
                .into_iter()
                .map(move |c| r.start + c.start..r.start + c.end)
        })
        .collect();

    let run = |chunk: &Range<u64>| {
        evaluate_range(
            designs,
            enumerator.clone(),
            chunk.clone(),
            options.top_m,
            options.record_all,
        )
    };
    let results: Vec<ChunkResult> = if threads == 1 {
        work.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidSearchSpace(format!("thread pool: {e}")))?;
        pool.install(|| work.par_iter().map(run).collect())
    };

    let keep = options.top_m.max(1);
    let mut merged: Vec<(f64, u64, ConditioningReport)> = Vec::new();
    let mut evaluated = 0;
    let mut rank_deficient = 0;
    let mut kappas = options.record_all.then(Vec::new);
    for r in results {
        evaluated += r.evaluated;
        rank_deficient += r.rank_deficient;
        for item in r.top {
            push_bounded(&mut merged, keep, item);
        }
        if let Some(k) = kappas.as_mut() {
            k.extend(r.kappas);
        }
    }

    let mut decoder = enumerator;
    let mut ranked: Vec<RankedAllocation> = merged
        .into_iter()
        .map(|(_, rank, report)| RankedAllocation {
            rank,
            allocation: decoder.unrank(rank).expect("rank within range"),
            report,
        })
        .collect();
    if ranked.is_empty() {
        return Err(Error::NoFeasibleAllocation { evaluated });
    }
    let best = ranked[0].clone();
    ranked.truncate(options.top_m);
    Ok(RankingResult {
        best,
        top_m: ranked,
        evaluated_count: evaluated,
        infeasible_rank_count: rank_deficient,
        kappas,
    })
}

/// Single-threaded reference: materialises every allocation, evaluates it
/// with [`crate::assembly::stack_system`] and sorts the full list.
pub fn exhaustive_ranking(
    designs: &[DesignMatrix],
    spec: &SearchSpaceSpec,
) -> Result<Vec<RankedAllocation>> {
    check_inputs(designs, spec)?;
    let mut all = Vec::new();
    for (rank, alloc) in crate::enumeration::enumerate_allocations(spec)?.enumerate() {
        let system = crate::assembly::stack_system(designs, &alloc)?;
        let report = crate::conditioning::conditioning(&system);
        if report.rank_ok {
            all.push(RankedAllocation {
                rank: rank as u64,
                allocation: alloc,
                report,
            });
        }
    }
    all.sort_by(compare_ranked);
    Ok(all)
}
