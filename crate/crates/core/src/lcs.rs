//! Sparse longest common subsequence.
//!
//! [`hunt_szymanski`] runs in `O((R + N) log N)` time and `O(R + N)` space,
//! where `R` is the number of equal `(i, j)` position pairs. The quadratic
//! [`dp_oracle`] exists to check it.
//!
//! Both return the same subsequence: among all maximum-length solutions, the
//! one whose `(src_pos, tgt_pos)` sequence is lexicographically smallest.
//! Each common word is therefore tied to its earliest usable occurrence on
//! both sides, which keeps alignment output deterministic.

use std::hash::Hash;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalize::Document;

/// Upper bound on `src.len() * tgt.len()` accepted by the DP oracle.
pub const ORACLE_CELL_CAP: usize = 4_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LcsError {
    #[error("dynamic-programming oracle needs {cells} cells, cap is {cap}")]
    OracleTooLarge { cells: u128, cap: usize },
}

/// A token of a whole document flattened into one stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlatToken<'a> {
    pub surface: &'a str,
    pub letters: u32,
    pub para_index: usize,
    pub token_index: usize,
}

/// All tokens of `doc` in reading order with dense `token_index`.
pub fn flatten_tokens(doc: &Document) -> Vec<FlatToken<'_>> {
    doc.paragraphs
        .iter()
        .flat_map(|p| {
            p.tokens.iter().map(move |t| (p.index, t))
        })
        .enumerate()
        .map(|(token_index, (para_index, t))| FlatToken {
            surface: &t.surface,
            letters: t.letters,
            para_index,
            token_index,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MatchPair {
    pub src_pos: usize,
    pub tgt_pos: usize,
}

impl MatchPair {
    pub fn new(src_pos: usize, tgt_pos: usize) -> Self {
        MatchPair { src_pos, tgt_pos }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LcsStats {
    pub n_src: usize,
    pub n_tgt: usize,
    /// Number of `(i, j)` with `src[i] == tgt[j]`.
    pub matching_pairs: u64,
    pub lcs_len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LcsOutcome {
    pub pairs: Vec<MatchPair>,
    pub stats: LcsStats,
}

/// Hunt-Szymanski LCS with earliest-occurrence tie-breaking.
///
/// Runs the threshold sweep backwards over suffixes, recording for every
/// match point the length of the longest chain starting there. A forward
/// greedy pass then takes, at each step, the first source position that
/// still admits a full-length completion, paired with its first usable
/// target occurrence (binary search in the occurrence list).
pub fn hunt_szymanski<T: Eq + Hash>(src: &[T], tgt: &[T]) -> LcsOutcome {
    let mut stats = LcsStats {
        n_src: src.len(),
        n_tgt: tgt.len(),
        ..Default::default()
    };
    if src.is_empty() || tgt.is_empty() {
        return LcsOutcome {
            pairs: Vec::new(),
            stats,
        };
    }

    // Occurrence lists of the target, ascending, packed into one array.
    let mut ids: FxHashMap<&T, u32> = FxHashMap::with_capacity_and_hasher(tgt.len(), Default::default());
    let tgt_ids: Vec<u32> = tgt
        .iter()
        .map(|t| {
            let next = ids.len() as u32;
            *ids.entry(t).or_insert(next)
        })
        .collect();
    let mut occ_start = vec![0u32; ids.len() + 1];
    for &id in &tgt_ids {
        occ_start[id as usize + 1] += 1;
    }
    for k in 1..occ_start.len() {
        occ_start[k] += occ_start[k - 1];
    }
    let mut fill = occ_start.clone();
    let mut occ = vec![0u32; tgt.len()];
    for (j, &id) in tgt_ids.iter().enumerate() {
        occ[fill[id as usize] as usize] = j as u32;
        fill[id as usize] += 1;
    }
    const ABSENT: u32 = u32::MAX;
    let src_ids: Vec<u32> = src.iter().map(|s| ids.get(s).copied().unwrap_or(ABSENT)).collect();
    let row = |id: u32| &occ[occ_start[id as usize] as usize..occ_start[id as usize + 1] as usize];

    let total: usize = src_ids
        .iter()
        .filter(|&&id| id != ABSENT)
        .map(|&id| row(id).len())
        .sum();
    stats.matching_pairs = total as u64;

    // chain[base(i) + k]: longest common subsequence of src[i..] and
    // tgt[row[k]..] that starts with the match (i, row[k]), where base(i)
    // counts the matches of src[..i].
    let mut chain = vec![0u32; total];
    // Strictly decreasing: thresh[k] is the largest j such that a common
    // subsequence of length k + 1 starts at target position j.
    let mut thresh: Vec<u32> = Vec::new();
    let mut base = total;
    for &id in src_ids.iter().rev() {
        if id == ABSENT {
            continue;
        }
        let row = row(id);
        base -= row.len();
        // Ascending j so that updates within the row never feed each other.
        for (k, &j) in row.iter().enumerate() {
            let level = thresh.partition_point(|&t| t > j);
            chain[base + k] = level as u32 + 1;
            if level == thresh.len() {
                thresh.push(j);
            } else if j > thresh[level] {
                thresh[level] = j;
            }
        }
    }

    let lcs_len = thresh.len();
    let mut pairs = Vec::with_capacity(lcs_len);
    let mut remaining = lcs_len as u32;
    let mut next_j = 0u32;
    let mut base = 0usize;
    for (i, &id) in src_ids.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if id == ABSENT {
            continue;
        }
        let row = row(id);
        let k = row.partition_point(|&j| j < next_j);
        if k < row.len() && chain[base + k] >= remaining {
            pairs.push(MatchPair::new(i, row[k] as usize));
            next_j = row[k] + 1;
            remaining -= 1;
        }
        base += row.len();
    }
    debug_assert_eq!(remaining, 0);

    stats.lcs_len = lcs_len;
    LcsOutcome { pairs, stats }
}

/// Quadratic suffix-table LCS with the same tie-breaking as
/// [`hunt_szymanski`].
pub fn dp_oracle<T: Eq>(src: &[T], tgt: &[T]) -> Result<LcsOutcome, LcsError> {
    let (n, m) = (src.len(), tgt.len());
    let cells = n as u128 * m as u128;
    if cells > ORACLE_CELL_CAP as u128 {
        return Err(LcsError::OracleTooLarge {
            cells,
            cap: ORACLE_CELL_CAP,
        });
    }
    let width = m + 1;
    // suffix[i * width + j] = LCS(src[i..], tgt[j..])
    let mut suffix = vec![0u32; (n + 1) * width];
    let mut matching_pairs = 0u64;
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            suffix[i * width + j] = if src[i] == tgt[j] {
                matching_pairs += 1;
                suffix[(i + 1) * width + j + 1] + 1
            } else {
                suffix[(i + 1) * width + j].max(suffix[i * width + j + 1])
            };
        }
    }

    let lcs_len = suffix[0] as usize;
    let mut pairs = Vec::with_capacity(lcs_len);
    let mut remaining = suffix[0];
    let mut next_j = 0;
    for i in 0..n {
        if remaining == 0 {
            break;
        }
        if let Some(j) = (next_j..m).find(|&j| tgt[j] == src[i]) {
            if suffix[(i + 1) * width + j + 1] + 1 == remaining {
                pairs.push(MatchPair::new(i, j));
                next_j = j + 1;
                remaining -= 1;
            }
        }
    }

    Ok(LcsOutcome {
        pairs,
        stats: LcsStats {
            n_src: n,
            n_tgt: m,
            matching_pairs,
            lcs_len,
        },
    })
}

fn surfaces<'a>(tokens: &[FlatToken<'a>]) -> Vec<&'a str> {
    tokens.iter().map(|t| t.surface).collect()
}

/// [`hunt_szymanski`] over token surfaces.
pub fn lcs_hunt_szymanski(src: &[FlatToken<'_>], tgt: &[FlatToken<'_>]) -> LcsOutcome {
    hunt_szymanski(&surfaces(src), &surfaces(tgt))
}

/// [`dp_oracle`] over token surfaces.
pub fn lcs_dp_oracle(src: &[FlatToken<'_>], tgt: &[FlatToken<'_>]) -> Result<LcsOutcome, LcsError> {
    dp_oracle(&surfaces(src), &surfaces(tgt))
}
