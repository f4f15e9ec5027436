use crate::diagnostics::{autocorr, geweke, heidel_welch};

use super::store::ChainStore;
use super::McmcConfig;

/// Thinning multiples tried, in order.
pub const THIN_FACTORS: [usize; 4] = [1, 5, 10, 15];
/// Iterations dropped per burn-in extension.
pub const BURN_EXTENSION: usize = 20_000;
/// Burn extensions continue only while more rows than this remain.
pub const MIN_EXTENSION_ROWS: usize = 1000;
/// Convergence is never declared on fewer retained rows.
pub const MIN_CONVERGED_ROWS: usize = 1000;
/// Smallest Geweke p-value accepted as stationary.
pub const GEWEKE_ALPHA: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerDecision {
    Converged,
    /// Converged only after dropping extra burn-in.
    ExtendBurn,
    ContinueSampling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerOutcome {
    pub decision: ControllerDecision,
    pub burn_in: usize,
    pub thin: usize,
    pub burn_extensions: usize,
    /// Columns failing a diagnostic at the last evaluated view.
    pub failing: Vec<String>,
}

impl ControllerOutcome {
    pub fn converged(&self) -> bool {
        self.decision != ControllerDecision::ContinueSampling
    }
}

/// Whether one column passes both stationarity checks. An undefined Geweke
/// statistic and a degenerate (mean indistinguishable from 0) halfwidth
/// test count as passes.
pub fn column_converged(x: &[f64], config: &McmcConfig) -> bool {
    let geweke_ok = match geweke(x) {
        Ok(g) => g.undefined || g.p_value >= GEWEKE_ALPHA,
        Err(_) => false,
    };
    geweke_ok
        && match heidel_welch(x, config.hw_eps, config.hw_pvalue) {
            Ok(h) => h.stationary && (h.halfwidth_pass || h.halfwidth_degenerate),
            Err(_) => false,
        }
}

fn failing_columns(store: &ChainStore, config: &McmcConfig) -> Vec<String> {
    let names = store.names();
    (0..store.n_cols()).filter(|&j| !column_converged(&store.column(j), config)).map(|j| names[j].clone()).collect()
}

/// Smallest thinning multiple whose lag autocorrelation is below `2/sqrt(n)` for every column.
pub fn choose_thin_factor(store: &ChainStore) -> usize {
    let n = store.n_rows();
    let threshold = 2.0 / (n as f64).sqrt();
    let columns: Vec<Vec<f64>> = (0..store.n_cols()).map(|j| store.column(j)).collect();
    THIN_FACTORS
        .iter()
        .copied()
        .find(|&lag| {
            columns.iter().all(|c| autocorr(c, lag).map(|r| r.abs() < threshold).unwrap_or(false))
        })
        .unwrap_or(*THIN_FACTORS.last().unwrap())
}

/// Decides whether the chain in `store` (sampled at the base burn-in and
/// thinning) has converged and with which effective burn-in and thinning.
pub fn convergence_controller(store: &ChainStore, config: &McmcConfig) -> ControllerOutcome {
    let factor = if config.fix_thin { 1 } else { choose_thin_factor(store) };
    let extension_rows = BURN_EXTENSION.div_ceil(store.thin);
    let mut skip = 0;
    let mut extensions = 0;
    loop {
        let view = store.view(skip, factor);
        let failing = if view.n_rows() >= MIN_CONVERGED_ROWS {
            failing_columns(&view, config)
        } else {
            vec!["(too few retained samples)".to_string()]
        };
        if failing.is_empty() {
            return ControllerOutcome {
                decision: if extensions == 0 { ControllerDecision::Converged } else { ControllerDecision::ExtendBurn },
                burn_in: view.burn_in,
                thin: view.thin,
                burn_extensions: extensions,
                failing,
            };
        }
        let next_rows = store.n_rows().saturating_sub(skip + extension_rows) / factor;
        if config.fix_burn_in || next_rows <= MIN_EXTENSION_ROWS {
            return ControllerOutcome {
                decision: ControllerDecision::ContinueSampling,
                burn_in: store.burn_in,
                thin: store.thin,
                burn_extensions: extensions,
                failing,
            };
        }
        skip += extension_rows;
        extensions += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{ParamLayout, SampledHypers};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn layout() -> ParamLayout {
        ParamLayout::new(0, &[vec![]], &["x".into()], SampledHypers::default())
    }

    fn store_from(rows: impl Iterator<Item = [f64; 2]>) -> ChainStore {
        let rows: Vec<Vec<f64>> = rows.map(|r| r.to_vec()).collect();
        ChainStore::from_rows(layout(), &rows, 1000, 10).unwrap()
    }

    fn config() -> McmcConfig {
        McmcConfig::default()
    }

    #[test]
    fn iid_chains_converge_on_first_check() {
        let normal = Normal::new(5.0, 1.0).unwrap();
        let seeds = 40;
        let mut converged = 0;
        for seed in 0..seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = store_from((0..5000).map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)]));
            let out = convergence_controller(&s, &config());
            if out.decision == ControllerDecision::Converged {
                assert_eq!(out.burn_in, 1000);
                converged += 1;
            }
        }
        assert!(converged as f64 >= 0.9 * seeds as f64, "{converged}/{seeds}");
    }

    #[test]
    fn trending_chain_is_not_converged() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let s = store_from((0..40_000).map(|i| [1.0 + i as f64 * 0.01 + noise.sample(&mut rng), 2.0 + noise.sample(&mut rng)]));
        let out = convergence_controller(&s, &config());
        assert_eq!(out.decision, ControllerDecision::ContinueSampling);
        assert_eq!((out.burn_in, out.thin), (1000, 10));
        assert!(out.burn_extensions >= 1);
        assert!(out.failing.contains(&"H00_1".to_string()));
    }

    #[test]
    fn fixed_flags_keep_burn_and_thin() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut x = 0.0;
        let s = store_from((0..5000).map(|_| {
            x = 0.95 * x + noise.sample(&mut rng);
            [10.0 + x, 10.0 + x]
        }));
        let cfg = McmcConfig { fix_thin: true, fix_burn_in: true, ..config() };
        let out = convergence_controller(&s, &cfg);
        assert_eq!((out.burn_in, out.thin), (1000, 10));
        assert_eq!(out.burn_extensions, 0);
    }

    #[test]
    fn correlated_chain_gets_thinned() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut x = 0.0;
        let s = store_from((0..20_000).map(|_| {
            x = 0.3 * x + noise.sample(&mut rng);
            [10.0 + x, 10.0 + noise.sample(&mut rng)]
        }));
        assert_eq!(choose_thin_factor(&s), 5);
    }

    #[test]
    fn burn_extension_rescues_early_transient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let noise = Normal::new(0.0, 1.0).unwrap();
        // A decaying transient over the first 2000 rows (20,000 iterations at thin 10).
        let s = store_from((0..8000).map(|i| {
            let shift = if i < 2000 { 6.0 * (1.0 - i as f64 / 2000.0) } else { 0.0 };
            [10.0 + shift + noise.sample(&mut rng), 10.0 + noise.sample(&mut rng)]
        }));
        let cfg = McmcConfig { fix_thin: true, ..config() };
        let out = convergence_controller(&s, &cfg);
        assert_eq!(out.decision, ControllerDecision::ExtendBurn);
        assert_eq!(out.burn_in, 1000 + 20_000 * out.burn_extensions);
    }
}
