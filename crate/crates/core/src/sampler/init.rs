use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{nelson_aalen_at, SurvivalDataset};
use crate::model::{Hyper, ParameterState, PriorConfig, ShapeSetting};
use crate::tree::{MrhTree, SplitId};

/// Smallest total hazard used when a stratum has no events.
const MIN_ANCHOR: f64 = 1e-3;

/// Empirical-Bayes anchor for `H` of stratum `l`: the Nelson-Aalen estimate at the study end.
pub fn anchor_total(data: &SurvivalDataset, l: usize, max_study_time: f64) -> f64 {
    nelson_aalen_at(data, l, max_study_time).max(MIN_ANCHOR)
}

/// Fixed or starting hyperparameters of one stratum tree.
fn set_hypers(tree: &mut MrhTree, prior: &PriorConfig, anchor: f64) {
    tree.lambda = match prior.lambda {
        Hyper::Fixed(v) => v,
        Hyper::Sampled => 1.0,
    };
    tree.a = match prior.a {
        ShapeSetting::Fixed(v) => v,
        ShapeSetting::Anchor | ShapeSetting::Sampled => anchor * tree.lambda,
    };
    tree.k = match prior.k {
        Hyper::Fixed(v) => v,
        Hyper::Sampled => 0.5,
    };
    tree.set_all_gamma(match prior.gamma {
        Hyper::Fixed(v) => v,
        Hyper::Sampled => 0.5,
    });
}

/// Standard starting point: flat trees at the anchor, zero coefficients.
pub fn anchor_state(
    data: &SurvivalDataset,
    depth: u32,
    max_study_time: f64,
    prior: &PriorConfig,
    pruned: &[Vec<SplitId>],
) -> ParameterState {
    let trees = (0..data.n_strata())
        .map(|l| {
            let anchor = anchor_total(data, l, max_study_time);
            let mut tree = MrhTree::flat(depth, anchor);
            set_hypers(&mut tree, prior, anchor);
            tree.prune(&pruned[l]);
            tree
        })
        .collect();
    ParameterState { trees, beta: vec![0.0; data.n_covariates()] }
}

/// Overdispersed start for chain `chain` (1-based) of `n_chains`.
///
/// Chain `c` draws its splits from the `c`-th of `n_chains` equal slices of
/// (0.1, 0.9); totals run from 0.25x to 4x the anchor and coefficients from
/// -2 to 2 across chains.
pub fn dispersed_state(
    data: &SurvivalDataset,
    depth: u32,
    max_study_time: f64,
    prior: &PriorConfig,
    pruned: &[Vec<SplitId>],
    seed: u64,
    chain: usize,
    n_chains: usize,
) -> ParameterState {
    assert!(n_chains >= 2 && (1..=n_chains).contains(&chain), "chain index out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (chain as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let u = (chain - 1) as f64 / (n_chains - 1) as f64;
    let slice = 0.8 / n_chains as f64;
    let lo = 0.1 + slice * (chain - 1) as f64;
    let mut state = anchor_state(data, depth, max_study_time, prior, pruned);
    for (l, tree) in state.trees.iter_mut().enumerate() {
        let anchor = anchor_total(data, l, max_study_time);
        tree.total = anchor * 4f64.powf(2.0 * u - 1.0);
        for id in tree.free_splits() {
            tree.set_split(id, lo + slice * rng.random::<f64>());
        }
    }
    for b in state.beta.iter_mut() {
        *b = -2.0 + 4.0 * u;
    }
    state
}
