//! Pre-MCMC pruning: splits whose two child spans show statistically
//! indistinguishable failure proportions are frozen at 0.5.

use statrs::function::gamma::ln_gamma;

use crate::data::{SurvivalDataset, TimeGrid};
use crate::error::{MrhError, Result};
use crate::tree::SplitId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneConfig {
    pub enabled: bool,
    /// Type I error of each split test.
    pub alpha: f64,
    /// Number of levels tested, counted from the finest; `None` tests all.
    pub levels: Option<u32>,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig { enabled: false, alpha: 0.05, levels: None }
    }
}

impl PruneConfig {
    pub fn validate(&self, depth: u32) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(MrhError::Config(format!("prune alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if let Some(l) = self.levels {
            if l == 0 || l > depth {
                return Err(MrhError::Config(format!("prune levels must lie in 1..={depth}, got {l}")));
            }
        }
        Ok(())
    }
}

/// `[[n11, n12], [n21, n22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContingencyTable2x2 {
    pub counts: [[u64; 2]; 2],
}

impl ContingencyTable2x2 {
    pub fn new(n11: u64, n12: u64, n21: u64, n22: u64) -> Self {
        ContingencyTable2x2 { counts: [[n11, n12], [n21, n22]] }
    }
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Two-sided Fisher exact p-value: total probability of tables with the
/// observed margins that are no more likely than the observed one.
pub fn fisher_exact_2x2(table: &ContingencyTable2x2) -> f64 {
    let [[a, b], [c, d]] = table.counts;
    let row1 = a + b;
    let row2 = c + d;
    let col1 = a + c;
    let col2 = b + d;
    if row1 == 0 || row2 == 0 || col1 == 0 || col2 == 0 {
        return 1.0;
    }
    let n = row1 + row2;
    let ln_denom = ln_choose(n, col1);
    let ln_prob = |k: u64| ln_choose(row1, k) + ln_choose(row2, col1 - k) - ln_denom;
    let observed = ln_prob(a);
    let lo = col1.saturating_sub(row2);
    let hi = row1.min(col1);
    let threshold = observed + (1e-7f64).ln_1p();
    let p: f64 = (lo..=hi).map(ln_prob).filter(|&lp| lp <= threshold).map(f64::exp).sum();
    p.min(1.0)
}

/// Failures and survivors within the two child spans of split `id`.
///
/// Row 1 is the left span, row 2 the right span. Columns are the failures
/// observed inside the span and the subjects at risk at the span start that
/// did not fail inside it.
pub fn build_split_table(
    data: &SurvivalDataset,
    stratum: usize,
    grid: &TimeGrid,
    id: SplitId,
) -> ContingencyTable2x2 {
    let (left, right) = id.child_bins(grid.depth());
    let span = |bins: std::ops::Range<usize>| {
        let start = grid.boundary(bins.start);
        let end = grid.boundary(bins.end);
        let mut at_risk = 0u64;
        let mut failed = 0u64;
        for i in data.stratum_members(stratum) {
            let t = data.times()[i];
            if t > start {
                at_risk += 1;
                if data.events()[i] && t <= end {
                    failed += 1;
                }
            }
        }
        [failed, at_risk - failed]
    };
    let l = span(left);
    let r = span(right);
    ContingencyTable2x2::new(l[0], l[1], r[0], r[1])
}

/// Splits of one stratum that fail to reject `R = 0.5`, finest level first.
pub fn prune_tree(data: &SurvivalDataset, stratum: usize, grid: &TimeGrid, config: &PruneConfig) -> Vec<SplitId> {
    let depth = grid.depth();
    if !config.enabled || depth == 0 {
        return Vec::new();
    }
    let levels = config.levels.unwrap_or(depth).min(depth);
    let mut mask = Vec::new();
    for level in ((depth - levels + 1)..=depth).rev() {
        for position in 0..1usize << (level - 1) {
            let id = SplitId::new(level, position);
            let p = fisher_exact_2x2(&build_split_table(data, stratum, grid, id));
            if p >= config.alpha {
                mask.push(id);
            }
        }
    }
    mask
}
