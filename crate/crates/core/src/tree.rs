//! Dyadic split parameterization of a stratum's hazard.
//!
//! The cumulative hazard `H` over the study is divided recursively: node
//! `(m-1, p)` hands a fraction `R_{m,p}` of its mass to its left child
//! `(m, 2p)` and the rest to `(m, 2p+1)`. The leaves at level `M` are the
//! per-bin hazard increments `d_1..d_J`.

use std::fmt;
use std::str::FromStr;

use crate::data::TimeGrid;
use crate::error::{MrhError, Result};

/// Identifies split `R_{m,p}`: `level` in `1..=M`, `position` in `0..2^(m-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SplitId {
    pub level: u32,
    pub position: usize,
}

impl SplitId {
    pub fn new(level: u32, position: usize) -> Self {
        SplitId { level, position }
    }

    /// Heap-order index into a split vector.
    pub fn index(self) -> usize {
        (1usize << (self.level - 1)) - 1 + self.position
    }

    pub fn from_index(index: usize) -> Self {
        let level = usize::BITS - (index + 1).leading_zeros();
        SplitId { level, position: index + 1 - (1usize << (level - 1)) }
    }

    /// All splits of a depth-`depth` tree, coarse to fine.
    pub fn all(depth: u32) -> impl Iterator<Item = SplitId> {
        (0..(1usize << depth) - 1).map(SplitId::from_index)
    }

    /// 0-based bin range covered by the parent node, split into (left, right) halves.
    pub fn child_bins(self, depth: u32) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let half = 1usize << (depth - self.level);
        let start = self.position * 2 * half;
        (start..start + half, start + half..start + 2 * half)
    }
}

impl fmt::Display for SplitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.level, self.position)
    }
}

impl FromStr for SplitId {
    type Err = MrhError;

    /// Parses `"m.p"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || MrhError::Format(format!("invalid split index '{s}'"));
        let (m, p) = s.split_once('.').ok_or_else(bad)?;
        let level: u32 = m.parse().map_err(|_| bad())?;
        let position: usize = p.parse().map_err(|_| bad())?;
        if level == 0 || level > 30 || position >= 1usize << (level - 1) {
            return Err(bad());
        }
        Ok(SplitId { level, position })
    }
}

/// One stratum's hazard tree and its hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MrhTree {
    depth: u32,
    /// Cumulative hazard over the whole study, `H_{0,0}`.
    pub total: f64,
    /// Split values in heap order (`SplitId::index`).
    splits: Vec<f64>,
    pruned: Vec<bool>,
    /// Gamma prior shape.
    pub a: f64,
    /// Gamma prior rate.
    pub lambda: f64,
    /// Correlation hyperparameter of the split priors.
    pub k: f64,
    /// Prior means of the splits, heap order.
    gamma: Vec<f64>,
}

impl MrhTree {
    /// A flat tree (every split 0.5, gamma 0.5) with the given total hazard.
    pub fn flat(depth: u32, total: f64) -> Self {
        let n = (1usize << depth) - 1;
        MrhTree {
            depth,
            total,
            splits: vec![0.5; n],
            pruned: vec![false; n],
            a: 1.0,
            lambda: 1.0,
            k: 0.5,
            gamma: vec![0.5; n],
        }
    }

    /// Builds a tree from its total and heap-ordered splits.
    pub fn from_splits(depth: u32, total: f64, splits: Vec<f64>) -> Result<Self> {
        let n = (1usize << depth) - 1;
        if splits.len() != n {
            return Err(MrhError::Domain(format!("expected {n} splits, got {}", splits.len())));
        }
        if !(total.is_finite() && total > 0.0) {
            return Err(MrhError::Domain(format!("cumulative hazard must be positive, got {total}")));
        }
        if let Some(r) = splits.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return Err(MrhError::Domain(format!("split value {r} outside (0, 1)")));
        }
        Ok(MrhTree { splits, ..MrhTree::flat(depth, total) })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn n_bins(&self) -> usize {
        1 << self.depth
    }

    pub fn n_splits(&self) -> usize {
        self.splits.len()
    }

    pub fn split(&self, id: SplitId) -> f64 {
        self.splits[id.index()]
    }

    pub fn splits(&self) -> &[f64] {
        &self.splits
    }

    /// Sets an unpruned split. Panics when `id` is pruned.
    pub fn set_split(&mut self, id: SplitId, value: f64) {
        assert!(!self.is_pruned(id), "split {id} is pruned and frozen at 0.5");
        self.splits[id.index()] = value;
    }

    pub fn is_pruned(&self, id: SplitId) -> bool {
        self.pruned[id.index()]
    }

    /// Freezes the listed splits at exactly 0.5.
    pub fn prune(&mut self, ids: &[SplitId]) {
        for id in ids {
            self.pruned[id.index()] = true;
            self.splits[id.index()] = 0.5;
        }
    }

    pub fn pruned_splits(&self) -> Vec<SplitId> {
        SplitId::all(self.depth).filter(|&id| self.is_pruned(id)).collect()
    }

    pub fn free_splits(&self) -> Vec<SplitId> {
        SplitId::all(self.depth).filter(|&id| !self.is_pruned(id)).collect()
    }

    pub fn gamma(&self, id: SplitId) -> f64 {
        self.gamma[id.index()]
    }

    pub fn set_gamma(&mut self, id: SplitId, value: f64) {
        self.gamma[id.index()] = value;
    }

    pub fn set_all_gamma(&mut self, value: f64) {
        self.gamma.iter_mut().for_each(|g| *g = value);
    }

    /// Hazard increments `d_1..d_J`.
    pub fn increments(&self) -> Vec<f64> {
        splits_to_increments(self.total, &self.splits, self.depth)
    }

    /// Replaces `total` and the unpruned splits by the ones implied by `d`.
    pub fn set_increments(&mut self, d: &[f64]) -> Result<()> {
        let (total, splits) = increments_to_splits(d)?;
        if splits.len() != self.splits.len() {
            return Err(MrhError::Domain("increment count does not match tree depth".into()));
        }
        self.total = total;
        for (i, r) in splits.into_iter().enumerate() {
            if !self.pruned[i] {
                self.splits[i] = r;
            }
        }
        Ok(())
    }
}

/// Top-down evaluation: `d_j = H * prod over levels of R (left) or 1 - R (right)`.
pub fn splits_to_increments(total: f64, splits: &[f64], depth: u32) -> Vec<f64> {
    let mut nodes = vec![total];
    for level in 1..=depth {
        let offset = (1usize << (level - 1)) - 1;
        let mut next = Vec::with_capacity(nodes.len() * 2);
        for (p, &mass) in nodes.iter().enumerate() {
            let r = splits[offset + p];
            next.push(mass * r);
            next.push(mass * (1.0 - r));
        }
        nodes = next;
    }
    nodes
}

/// Inverse of [`splits_to_increments`]: returns `(H, heap-ordered splits)`.
pub fn increments_to_splits(d: &[f64]) -> Result<(f64, Vec<f64>)> {
    let j = d.len();
    if j == 0 || !j.is_power_of_two() {
        return Err(MrhError::Domain(format!("increment count {j} is not a power of two")));
    }
    if let Some(v) = d.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(MrhError::Domain(format!("hazard increments must be positive, got {v}")));
    }
    let depth = j.trailing_zeros();
    let mut splits = vec![0.0; j - 1];
    let mut level_nodes = d.to_vec();
    for level in (1..=depth).rev() {
        let offset = (1usize << (level - 1)) - 1;
        let parents: Vec<f64> = level_nodes.chunks(2).map(|c| c[0] + c[1]).collect();
        for (p, pair) in level_nodes.chunks(2).enumerate() {
            splits[offset + p] = pair[0] / (pair[0] + pair[1]);
        }
        level_nodes = parents;
    }
    Ok((level_nodes[0], splits))
}

/// Cumulative hazard at `t`, linear within bins.
pub fn cumulative_hazard_at(t: f64, tree: &MrhTree, grid: &TimeGrid) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    let (j, fraction) = grid.bin_index(t)?;
    let d = tree.increments();
    Ok(d[..j - 1].iter().sum::<f64>() + fraction * d[j - 1])
}
