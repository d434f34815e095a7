//! Exact weighted functional ANOVA on tensor grids.
//!
//! A function tabulated on a [`WeightedGrid`] is split into pure effects
//! `f_u`, one per subset `u` of the axes, with `F = sum_u f_u` and each `f_u`
//! orthogonal (under the grid weights) to every function of a strict subset
//! of `u`.

mod decompose;
mod grid;
mod report;

pub use decompose::{decompose, decompose_product, decompose_weighted, EffectTable};
pub use grid::{tabulate, GridFunction, WeightedGrid, GAUSSIAN_TRUNCATION};
pub use report::{read_report_csv, report, DecompositionReport};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest dimension any decomposition here supports.
pub const MAX_DIM: usize = 4;

/// Set of axis indices, stored as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Subset(u32);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn from_bits(bits: u32) -> Self {
        Subset(bits)
    }

    pub fn from_indices(indices: &[usize]) -> Self {
        Subset(indices.iter().fold(0, |acc, &i| acc | (1 << i)))
    }

    /// All `d` axes.
    pub fn full(d: usize) -> Self {
        Subset(((1u64 << d) - 1) as u32)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn order(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, axis: usize) -> bool {
        self.0 & (1 << axis) != 0
    }

    pub fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn without(self, axis: usize) -> Self {
        Subset(self.0 & !(1 << axis))
    }

    /// Member axes in increasing order.
    pub fn indices(self) -> Vec<usize> {
        (0..32).filter(|&i| self.contains(i)).collect()
    }

    /// Every subset of `self`, including the empty set and `self`.
    pub fn subsets(self) -> impl Iterator<Item = Subset> {
        let full = self.0;
        let mut next = Some(0u32);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full {
                None
            } else {
                Some(((cur | !full).wrapping_add(1)) & full)
            };
            Some(Subset(cur))
        })
    }

    /// Subsets missing exactly one member.
    pub fn maximal_proper_subsets(self) -> Vec<Subset> {
        self.indices()
            .into_iter()
            .map(|a| self.without(a))
            .collect()
    }

    /// All subsets of `{0..d-1}`, ordered by size then bit pattern.
    pub fn all(d: usize) -> Vec<Subset> {
        let mut v: Vec<Subset> = Subset::full(d).subsets().collect();
        v.sort_by_key(|s| (s.order(), s.0));
        v
    }
}

/// Sorted comma-joined indices; the empty set prints as an empty string.
impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.indices().iter().map(usize::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for Subset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Subset::EMPTY);
        }
        let mut bits = 0u32;
        for part in s.split(',') {
            let i: usize = part
                .trim()
                .parse()
                .map_err(|_| Error::parse("subset", format!("bad index `{part}` in `{s}`")))?;
            if i >= 32 {
                return Err(Error::parse("subset", format!("index {i} out of range")));
            }
            bits |= 1 << i;
        }
        Ok(Subset(bits))
    }
}
