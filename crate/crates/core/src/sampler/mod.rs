//! Metropolis-within-Gibbs sampling with automatic convergence control,
//! chain continuation and dispersed multi-chain starts.

mod controller;
mod init;
mod kernel;
mod store;

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use controller::{
    choose_thin_factor, column_converged, convergence_controller, ControllerDecision, ControllerOutcome,
    BURN_EXTENSION, GEWEKE_ALPHA, MIN_CONVERGED_ROWS, MIN_EXTENSION_ROWS, THIN_FACTORS,
};
pub use init::{anchor_state, anchor_total, dispersed_state};
pub use kernel::{sweep_blocks, Sampler, TARGET_ACCEPTANCE};
pub use store::ChainStore;

use crate::data::{SurvivalDataset, TimeGrid};
use crate::error::{MrhError, Result};
use crate::files::{
    prior_descriptors, read_chain_file, read_info_file, write_chain_file, write_convergence_report, write_info_file,
    RunInfo, CHAIN_FILE, INFO_FILE,
};
use crate::model::{ParameterState, PriorConfig};
use crate::params::{ParamLayout, SampledHypers};
use crate::posterior::{information_criteria, summarize, ICReport, PosteriorSummary};
use crate::prune::{prune_tree, PruneConfig};
use crate::tree::SplitId;

pub const DEFAULT_BURN_IN: usize = 50_000;
pub const PROGRESS_EVERY: usize = 5000;
const PILOT_ITERATIONS: usize = 1000;

/// Model structure: tree depth, study horizon, covariates and priors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub depth: u32,
    pub max_study_time: f64,
    /// Proportional-hazards covariates, in coefficient order.
    pub covariates: Vec<String>,
    /// Stratifying (non-proportional) factor, if any.
    pub nph: Option<String>,
    pub prior: PriorConfig,
    pub prune: PruneConfig,
}

impl ModelSpec {
    pub fn new(depth: u32, max_study_time: f64) -> Self {
        ModelSpec {
            depth,
            max_study_time,
            covariates: Vec::new(),
            nph: None,
            prior: PriorConfig::default(),
            prune: PruneConfig::default(),
        }
    }

    /// A spec whose covariates and strata are those of `data`.
    pub fn for_data(data: &SurvivalDataset, depth: u32, max_study_time: f64) -> Self {
        ModelSpec {
            covariates: data.covariate_names().to_vec(),
            nph: data.labels().factor.clone(),
            ..ModelSpec::new(depth, max_study_time)
        }
    }

    pub fn hypers(&self) -> SampledHypers {
        SampledHypers {
            a: self.prior.a_sampled(),
            lambda: self.prior.lambda.is_sampled(),
            k: self.prior.k.is_sampled(),
            gamma: self.prior.gamma.is_sampled(),
        }
    }

    /// Checks the model against the data and returns the time grid.
    pub fn check(&self, data: &SurvivalDataset) -> Result<TimeGrid> {
        if data.is_empty() {
            return Err(MrhError::Config("the dataset has no subjects".into()));
        }
        if data.covariate_names() != self.covariates.as_slice() {
            return Err(MrhError::Config(format!(
                "model covariates [{}] do not match the data covariates [{}]",
                self.covariates.join(", "),
                data.covariate_names().join(", ")
            )));
        }
        if data.labels().factor != self.nph {
            return Err(MrhError::Config("model strata do not match the data strata".into()));
        }
        self.prune.validate(self.depth)?;
        let grid = TimeGrid::new(self.depth, self.max_study_time)?;
        grid.check_dataset(data)?;
        Ok(grid)
    }
}

/// Iteration budget, thinning and convergence-control switches.
#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    pub max_iter: usize,
    /// `None` uses 50,000, or half of `max_iter` when that is smaller.
    pub burn_in: Option<usize>,
    pub thin: usize,
    pub fix_burn_in: bool,
    pub fix_thin: bool,
    pub fix_max: bool,
    pub gr: bool,
    pub continue_chain: bool,
    pub seed: u64,
    pub checkpoint_every: usize,
    /// Heidelberger-Welch halfwidth tolerance and stationarity level.
    pub hw_eps: f64,
    pub hw_pvalue: f64,
    /// Log progress and run-time estimates.
    pub progress: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            max_iter: 500_000,
            burn_in: None,
            thin: 10,
            fix_burn_in: false,
            fix_thin: false,
            fix_max: false,
            gr: false,
            continue_chain: false,
            seed: 1,
            checkpoint_every: 100_000,
            hw_eps: 0.1,
            hw_pvalue: 0.05,
            progress: true,
        }
    }
}

impl McmcConfig {
    pub fn effective_burn_in(&self) -> usize {
        self.burn_in.unwrap_or_else(|| DEFAULT_BURN_IN.min(self.max_iter / 2))
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || self.checkpoint_every == 0 {
            return Err(MrhError::Config("maxIter and checkpointEvery must be positive".into()));
        }
        if self.thin == 0 {
            return Err(MrhError::Config("thin must be at least 1".into()));
        }
        let burn = self.effective_burn_in();
        if burn >= self.max_iter {
            return Err(MrhError::Config(format!("burnIn ({burn}) must be smaller than maxIter ({})", self.max_iter)));
        }
        if self.max_iter - burn < self.thin {
            return Err(MrhError::Config("maxIter leaves no retained samples after burn-in and thinning".into()));
        }
        Ok(())
    }
}

/// Outcome of one chain.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub store: ChainStore,
    pub summary: PosteriorSummary,
    pub ic: ICReport,
    pub info: RunInfo,
    pub warning: Option<String>,
    pub initial_state: ParameterState,
    pub final_state: ParameterState,
    /// Proposal scales at each convergence check.
    pub scale_history: Vec<Vec<f64>>,
    /// Acceptance rate per update block, by parameter name.
    pub acceptance: Vec<(String, f64)>,
    pub controller: Option<ControllerOutcome>,
}

impl FitResult {
    pub fn converged(&self) -> bool {
        self.store.converged
    }
}

/// Seed of chain `chain` in a multi-chain run.
pub fn chain_seed(seed: u64, chain: usize) -> u64 {
    seed.wrapping_add((chain as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub fn not_converged_warning(iterations: usize) -> String {
    format!("Algorithm has not yet converged after {iterations} MCMC iterations. Estimates may be unreliable.")
}

struct Drive {
    store: ChainStore,
    outcome: Option<ControllerOutcome>,
    scale_history: Vec<Vec<f64>>,
}

/// Samples until `end` iterations, checking convergence every checkpoint.
/// `raw` holds rows at its own burn-in and thinning; scales adapt while the
/// iteration is at most `adapt_until`.
fn drive<R: rand::Rng>(
    sampler: &mut Sampler<'_>,
    rng: &mut R,
    mut raw: ChainStore,
    config: &McmcConfig,
    end: usize,
    adapt_until: usize,
) -> Drive {
    let layout = raw.layout().clone();
    let start = raw.completed;
    let mut next_check = start + config.checkpoint_every.min(end - start);
    let pilot = start + PILOT_ITERATIONS.min(end - start);
    let mut outcome = None;
    let mut scale_history = Vec::new();
    let timer = Instant::now();
    for iter in start + 1..=end {
        sampler.sweep(rng, iter <= adapt_until);
        if iter > raw.burn_in && (iter - raw.burn_in) % raw.thin == 0 {
            raw.push_row(&layout.extract(sampler.state()));
        }
        raw.completed = iter;
        if config.progress {
            if iter == pilot {
                let per_iter = timer.elapsed().as_secs_f64() / (iter - start) as f64;
                let minutes = per_iter * (end - start) as f64 / 60.0;
                log::info!("Estimated total run time is {minutes:.1} minutes");
            }
            if iter % PROGRESS_EVERY == 0 {
                log::info!("{iter} MCMC iterations completed");
            }
        }
        if iter == next_check {
            scale_history.push(sampler.scales().to_vec());
            let o = convergence_controller(&raw, config);
            log::debug!(
                "check at {iter}: {:?}, burn-in {}, thin {}, failing [{}]",
                o.decision,
                o.burn_in,
                o.thin,
                o.failing.join(", ")
            );
            let stop = o.converged() && !config.fix_max;
            outcome = Some(o);
            if stop {
                break;
            }
            next_check = (iter + config.checkpoint_every).min(end);
        }
    }
    Drive { store: raw, outcome, scale_history }
}

/// Applies the last controller decision to the raw chain.
fn final_store(raw: &ChainStore, outcome: Option<&ControllerOutcome>) -> ChainStore {
    match outcome {
        Some(o) if o.converged() => {
            let skip = (o.burn_in - raw.burn_in) / raw.thin;
            let mut s = raw.view(skip, o.thin / raw.thin);
            s.converged = true;
            s
        }
        _ => {
            let mut s = raw.clone();
            s.converged = false;
            s
        }
    }
}

struct RunContext<'a> {
    data: &'a SurvivalDataset,
    spec: &'a ModelSpec,
    grid: TimeGrid,
    pruned: Vec<Vec<SplitId>>,
    initial_state: ParameterState,
    seed: u64,
    max_iter: usize,
}

fn finish(ctx: RunContext<'_>, sampler: &Sampler<'_>, drive: Drive) -> Result<FitResult> {
    let store = final_store(&drive.store, drive.outcome.as_ref());
    if store.is_empty() {
        return Err(MrhError::Config("no samples were retained; increase maxIter".into()));
    }
    let warning = (!store.converged).then(|| not_converged_warning(store.completed));
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    let summary = summarize(&store, &ctx.grid, 0.05, ctx.data.labels())?;
    let ic = information_criteria(&store, ctx.data, &ctx.grid, ctx.data.len())?;
    let names = ParamLayout::new(ctx.spec.depth, &ctx.pruned, &ctx.spec.covariates, ctx.spec.hypers());
    let acceptance =
        sampler.blocks().iter().zip(sampler.acceptance_rates()).map(|(&b, r)| (names.name(b), r)).collect();
    let info = RunInfo {
        max_study_time: ctx.spec.max_study_time,
        depth: ctx.spec.depth,
        burn_in: store.burn_in,
        thin: store.thin,
        max_iter: ctx.max_iter,
        iterations: store.completed,
        converged: store.converged,
        pruned: ctx.pruned,
        nph: ctx.spec.nph.clone(),
        levels: ctx.data.labels().levels.clone(),
        covariates: ctx.spec.covariates.clone(),
        seed: ctx.seed,
        prior: prior_descriptors(&ctx.spec.prior),
        proposal_scales: sampler.scales().to_vec(),
    };
    Ok(FitResult {
        store,
        summary,
        ic,
        info,
        warning,
        initial_state: ctx.initial_state,
        final_state: sampler.state().clone(),
        scale_history: drive.scale_history,
        acceptance,
        controller: drive.outcome,
    })
}

/// Pruning masks of every stratum.
pub fn prune_all(data: &SurvivalDataset, grid: &TimeGrid, config: &PruneConfig) -> Vec<Vec<SplitId>> {
    (0..data.n_strata()).map(|l| prune_tree(data, l, grid, config)).collect()
}

/// Fits one chain in memory. `chain = Some((c, n))` starts chain `c` of a
/// `n`-chain run from a dispersed state with its own seed.
pub fn fit_chain(
    data: &SurvivalDataset,
    spec: &ModelSpec,
    config: &McmcConfig,
    chain: Option<(usize, usize)>,
) -> Result<FitResult> {
    config.validate()?;
    let grid = spec.check(data)?;
    let mut config = config.clone();
    if config.gr {
        config.fix_burn_in = true;
        config.fix_thin = true;
        config.fix_max = true;
    }
    let pruned = prune_all(data, &grid, &spec.prune);
    let (initial_state, seed) = match chain {
        Some((c, n)) => {
            if n < 2 || c == 0 || c > n {
                return Err(MrhError::Config(format!("chain {c} of {n} is not a valid multi-chain index")));
            }
            let s = chain_seed(config.seed, c);
            (dispersed_state(data, spec.depth, spec.max_study_time, &spec.prior, &pruned, config.seed, c, n), s)
        }
        None => (anchor_state(data, spec.depth, spec.max_study_time, &spec.prior, &pruned), config.seed),
    };
    let layout = ParamLayout::new(spec.depth, &pruned, &spec.covariates, spec.hypers());
    let burn_in = config.effective_burn_in();
    let mut raw = ChainStore::new(layout, burn_in, config.thin);
    raw.completed = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampler = Sampler::new(data, &grid, spec.prior.clone(), initial_state.clone())?;
    let d = drive(&mut sampler, &mut rng, raw, &config, config.max_iter, burn_in);
    let max_iter = config.max_iter;
    let ctx = RunContext { data, spec, grid, pruned, initial_state, seed, max_iter };
    finish(ctx, &sampler, d)
}

/// Fits one chain from the standard start.
pub fn fit(data: &SurvivalDataset, spec: &ModelSpec, config: &McmcConfig) -> Result<FitResult> {
    fit_chain(data, spec, config, None)
}

/// Writes the chain, info file and convergence report into `folder`.
pub fn write_outputs(result: &FitResult, folder: &Path) -> Result<()> {
    std::fs::create_dir_all(folder).map_err(|e| MrhError::io(folder, e))?;
    write_chain_file(&result.store, &folder.join(CHAIN_FILE))?;
    write_info_file(&result.info, &folder.join(INFO_FILE))?;
    write_convergence_report(&result.store, folder)
}

/// Fits one chain and writes its artifacts to `out_folder`.
pub fn run_mcmc(data: &SurvivalDataset, spec: &ModelSpec, config: &McmcConfig, out_folder: &Path) -> Result<FitResult> {
    std::fs::create_dir_all(out_folder).map_err(|e| MrhError::io(out_folder, e))?;
    let probe = out_folder.join(".write-test");
    std::fs::write(&probe, b"").map_err(|e| MrhError::io(&probe, e))?;
    let _ = std::fs::remove_file(&probe);
    let result = fit(data, spec, config)?;
    write_outputs(&result, out_folder)?;
    Ok(result)
}

fn mismatch(what: &str, stored: impl std::fmt::Display, requested: impl std::fmt::Display) -> MrhError {
    MrhError::Config(format!("previous run has {what} {stored}, but {requested} was requested"))
}

/// Resumes the run stored in `out_folder` for `config.max_iter` more
/// iterations, keeping its burn-in, thinning and proposal scales, and
/// rewrites the folder's artifacts with the extended chain.
pub fn continue_chain(
    out_folder: &Path,
    data: &SurvivalDataset,
    spec: &ModelSpec,
    config: &McmcConfig,
) -> Result<FitResult> {
    if !out_folder.is_dir() {
        return Err(MrhError::Config(format!("no previous run found in {}", out_folder.display())));
    }
    let info_path = out_folder.join(INFO_FILE);
    if !info_path.is_file() || !out_folder.join(CHAIN_FILE).is_file() {
        return Err(MrhError::Config(format!(
            "{} lacks {CHAIN_FILE} or {INFO_FILE} from a previous run",
            out_folder.display()
        )));
    }
    if config.max_iter == 0 || config.checkpoint_every == 0 {
        return Err(MrhError::Config("maxIter and checkpointEvery must be positive".into()));
    }
    let info = read_info_file(&info_path)?;
    if info.depth != spec.depth {
        return Err(mismatch("M =", info.depth, spec.depth));
    }
    if info.max_study_time != spec.max_study_time {
        return Err(mismatch("maxStudyTime =", info.max_study_time, spec.max_study_time));
    }
    if info.covariates != spec.covariates {
        return Err(mismatch("covariates", info.covariates.join(", "), spec.covariates.join(", ")));
    }
    if info.nph != spec.nph {
        return Err(mismatch(
            "stratifying factor",
            info.nph.as_deref().unwrap_or("none"),
            spec.nph.as_deref().unwrap_or("none"),
        ));
    }
    let prior = prior_descriptors(&spec.prior);
    for (k, v) in &prior {
        if let Some(stored) = info.prior.get(k) {
            if stored != v {
                return Err(mismatch(k, stored, v));
            }
        }
    }
    let grid = spec.check(data)?;
    if info.n_strata() != data.n_strata() {
        return Err(mismatch("strata count", info.n_strata(), data.n_strata()));
    }
    let layout = ParamLayout::new(spec.depth, &info.pruned, &spec.covariates, spec.hypers());
    let stored = read_chain_file(&out_folder.join(CHAIN_FILE), Some(spec.depth))?;
    if !stored.layout().same_columns(&layout) {
        return Err(MrhError::Config("stored chain columns do not match the model".into()));
    }
    let mut raw = stored.reorder(&layout)?;
    raw.burn_in = info.burn_in;
    raw.thin = info.thin;
    raw.completed = info.iterations;
    if info.thin == 0 || info.iterations < info.burn_in || raw.n_rows() != (info.iterations - info.burn_in) / info.thin {
        return Err(MrhError::Format("stored chain length disagrees with the info file".into()));
    }
    let mut state = anchor_state(data, spec.depth, spec.max_study_time, &spec.prior, &info.pruned);
    layout.apply(raw.last_row().expect("non-empty chain"), &mut state);
    let mut sampler = Sampler::new(data, &grid, spec.prior.clone(), state.clone())?;
    if info.proposal_scales.len() == sampler.blocks().len() {
        sampler.set_scales(&info.proposal_scales)?;
    }
    let mut config = config.clone();
    config.fix_burn_in = true;
    config.fix_thin = true;
    config.burn_in = Some(info.burn_in);
    config.thin = info.thin;
    let seed = chain_seed(config.seed, info.iterations);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let end = info.iterations + config.max_iter;
    let d = drive(&mut sampler, &mut rng, raw, &config, end, 0);
    let pruned = info.pruned.clone();
    let ctx = RunContext { data, spec, grid, pruned, initial_state: state, seed, max_iter: end };
    let result = finish(ctx, &sampler, d)?;
    write_outputs(&result, out_folder)?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Hyper, ShapeSetting};
    use crate::sim::{simulate_piecewise, PiecewiseHazard};

    fn quick() -> McmcConfig {
        McmcConfig { max_iter: 3000, burn_in: Some(500), thin: 2, progress: false, ..McmcConfig::default() }
    }

    fn data(seed: u64) -> SurvivalDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        simulate_piecewise(&PiecewiseHazard::constant(0.25), 100, 4.0, 0.05, &mut rng).unwrap()
    }

    #[test]
    fn default_burn_in_scales_with_budget() {
        assert_eq!(McmcConfig::default().effective_burn_in(), 50_000);
        let small = McmcConfig { max_iter: 5000, ..McmcConfig::default() };
        assert_eq!(small.effective_burn_in(), 2500);
        assert!(McmcConfig { burn_in: Some(5000), max_iter: 5000, ..McmcConfig::default() }.validate().is_err());
        assert!(McmcConfig { thin: 0, ..McmcConfig::default() }.validate().is_err());
    }

    #[test]
    fn empty_dataset_is_a_config_error() {
        let d = SurvivalDataset::unstratified(vec![], vec![]);
        if let Ok(d) = d {
            assert!(matches!(fit(&d, &ModelSpec::new(2, 4.0), &quick()), Err(MrhError::Config(_))));
        }
    }

    #[test]
    fn mismatched_spec_is_a_config_error() {
        let d = data(1);
        let mut spec = ModelSpec::new(2, 4.0);
        spec.covariates = vec!["age".into()];
        assert!(matches!(fit(&d, &spec, &quick()), Err(MrhError::Config(_))));
    }

    #[test]
    fn same_seed_same_chain() {
        let d = data(2);
        let spec = ModelSpec::new(2, 4.0);
        let a = fit(&d, &spec, &quick()).unwrap();
        let b = fit(&d, &spec, &quick()).unwrap();
        assert_eq!(a.store, b.store);
        let c = fit(&d, &spec, &McmcConfig { seed: 2, ..quick() }).unwrap();
        assert_ne!(a.store, c.store);
    }

    #[test]
    fn row_arithmetic_and_frozen_scales() {
        let d = data(3);
        let spec = ModelSpec::new(2, 4.0);
        let cfg = McmcConfig { checkpoint_every: 1000, fix_max: true, ..quick() };
        let r = fit(&d, &spec, &cfg).unwrap();
        let s = &r.store;
        assert_eq!(s.n_rows(), (s.completed - s.burn_in) / s.thin);
        assert_eq!(r.scale_history.len(), 3);
        assert_eq!(r.scale_history[0], r.scale_history[2]);
    }

    #[test]
    fn pruned_splits_stay_at_half() {
        let d = data(4);
        let mut spec = ModelSpec::new(3, 4.0);
        spec.prune = PruneConfig { enabled: true, alpha: 0.05, levels: None };
        let r = fit(&d, &spec, &quick()).unwrap();
        let pruned = &r.info.pruned[0];
        assert!(!pruned.is_empty());
        for id in pruned {
            assert_eq!(r.final_state.trees[0].split(*id), 0.5);
            assert!(!r.store.names().contains(&format!("Rmp{id}_1")));
        }
    }

    #[test]
    fn short_runs_report_not_converged() {
        let d = data(5);
        let r = fit(&d, &ModelSpec::new(2, 4.0), &quick()).unwrap();
        assert!(!r.converged());
        assert!(r.warning.as_deref().unwrap().contains("has not yet converged after 3000"));
    }

    #[test]
    fn fixed_hypers_shrink_the_layout() {
        let d = data(6);
        let mut spec = ModelSpec::new(1, 4.0);
        spec.prior = PriorConfig { a: ShapeSetting::Anchor, lambda: Hyper::Fixed(1.0), ..PriorConfig::default() };
        let r = fit(&d, &spec, &quick()).unwrap();
        assert_eq!(r.store.names(), vec!["H00_1", "Rmp1.0_1"]);
    }
}
