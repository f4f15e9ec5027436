//! Stratified PH/NPH likelihood and the MRH prior.

use statrs::function::gamma::ln_gamma;

use crate::data::{SurvivalDataset, TimeGrid};
use crate::error::{MrhError, Result};
use crate::tree::{MrhTree, SplitId};

/// Full parameter vector: one tree per stratum plus the PH coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterState {
    pub trees: Vec<MrhTree>,
    pub beta: Vec<f64>,
}

impl ParameterState {
    pub fn new(trees: Vec<MrhTree>, beta: Vec<f64>) -> Result<Self> {
        if trees.is_empty() {
            return Err(MrhError::Config("at least one stratum tree is required".into()));
        }
        if let Some(b) = beta.iter().find(|b| !b.is_finite()) {
            return Err(MrhError::Domain(format!("non-finite coefficient {b}")));
        }
        let depth = trees[0].depth();
        if trees.iter().any(|t| t.depth() != depth) {
            return Err(MrhError::Config("strata trees differ in depth".into()));
        }
        Ok(ParameterState { trees, beta })
    }

    pub fn depth(&self) -> u32 {
        self.trees[0].depth()
    }

    fn check_against(&self, data: &SurvivalDataset, grid: &TimeGrid) -> Result<()> {
        if self.trees.len() != data.n_strata() {
            return Err(MrhError::Config(format!(
                "state has {} strata, data has {}",
                self.trees.len(),
                data.n_strata()
            )));
        }
        if self.beta.len() != data.n_covariates() {
            return Err(MrhError::Config(format!(
                "state has {} coefficients, data has {} covariates",
                self.beta.len(),
                data.n_covariates()
            )));
        }
        if self.depth() != grid.depth() {
            return Err(MrhError::Config("tree depth does not match the time grid".into()));
        }
        Ok(())
    }
}

fn linear_predictor(x: &[f64], beta: &[f64]) -> f64 {
    x.iter().zip(beta).map(|(a, b)| a * b).sum()
}

/// Log-likelihood summed over strata and subjects:
/// `delta_i * (log h(T_i) + X_i'beta) - exp(X_i'beta) * H(T_i)` with
/// `h(T_i) = d_{j(T_i)} / binWidth`.
pub fn log_likelihood(data: &SurvivalDataset, state: &ParameterState, grid: &TimeGrid) -> Result<f64> {
    state.check_against(data, grid)?;
    grid.check_dataset(data)?;
    let width = grid.bin_width();
    let per_stratum: Vec<(Vec<f64>, Vec<f64>)> = state
        .trees
        .iter()
        .map(|tree| {
            let d = tree.increments();
            let mut cum = Vec::with_capacity(d.len() + 1);
            cum.push(0.0);
            for &x in &d {
                cum.push(cum.last().unwrap() + x);
            }
            (d, cum)
        })
        .collect();
    let mut total = 0.0;
    for i in 0..data.len() {
        let (d, cum) = &per_stratum[data.strata()[i]];
        let (j, fraction) = grid.bin_index(data.times()[i])?;
        let eta = linear_predictor(data.covariates(i), &state.beta);
        let cum_hazard = cum[j - 1] + fraction * d[j - 1];
        if data.events()[i] {
            total += (d[j - 1] / width).ln() + eta;
        }
        total -= eta.exp() * cum_hazard;
    }
    Ok(total)
}

/// Event counts and covariate-weighted exposure per stratum and bin.
///
/// The likelihood depends on the hazard only through
/// `sum_j [D_j log d_j - d_j E_j(beta)]`, which is what the sampler evaluates.
#[derive(Debug, Clone)]
pub struct SufficientStats {
    /// `[stratum][bin]` event counts.
    pub events: Vec<Vec<f64>>,
    /// `[stratum][bin]` exposure `sum_i exp(X_i'beta) * (fraction of bin j before T_i)`.
    pub exposure: Vec<Vec<f64>>,
    /// `sum_i delta_i X_i'beta`.
    pub event_eta: f64,
    n_events: f64,
    log_width: f64,
    bins: Vec<(usize, f64)>,
}

impl SufficientStats {
    pub fn new(data: &SurvivalDataset, grid: &TimeGrid, beta: &[f64]) -> Result<Self> {
        grid.check_dataset(data)?;
        let bins = data.times().iter().map(|&t| grid.bin_index(t)).collect::<Result<Vec<_>>>()?;
        let l = data.n_strata();
        let j = grid.n_bins();
        let mut events = vec![vec![0.0; j]; l];
        for i in 0..data.len() {
            if data.events()[i] {
                events[data.strata()[i]][bins[i].0 - 1] += 1.0;
            }
        }
        let mut stats = SufficientStats {
            events,
            exposure: vec![vec![0.0; j]; l],
            event_eta: 0.0,
            n_events: data.n_events() as f64,
            log_width: grid.bin_width().ln(),
            bins,
        };
        stats.set_beta(data, beta);
        Ok(stats)
    }

    /// Recomputes the exposure for new coefficients.
    pub fn set_beta(&mut self, data: &SurvivalDataset, beta: &[f64]) {
        let j_max = self.exposure[0].len();
        // Full-bin weights accumulate through a suffix sum over each subject's last bin.
        let mut full = vec![vec![0.0; j_max + 1]; self.exposure.len()];
        for e in self.exposure.iter_mut() {
            e.iter_mut().for_each(|x| *x = 0.0);
        }
        let mut event_eta = 0.0;
        for i in 0..data.len() {
            let eta = linear_predictor(data.covariates(i), beta);
            let w = eta.exp();
            let s = data.strata()[i];
            let (j, fraction) = self.bins[i];
            full[s][j - 1] += w;
            self.exposure[s][j - 1] += w * fraction;
            if data.events()[i] {
                event_eta += eta;
            }
        }
        for (s, e) in self.exposure.iter_mut().enumerate() {
            let mut running = 0.0;
            for jj in (0..j_max).rev() {
                e[jj] += running;
                running += full[s][jj];
            }
        }
        self.event_eta = event_eta;
    }

    /// Hazard-dependent part of one stratum's log-likelihood.
    pub fn stratum_term(&self, stratum: usize, increments: &[f64]) -> f64 {
        let mut total = 0.0;
        for ((&d, &count), &exposure) in increments.iter().zip(&self.events[stratum]).zip(&self.exposure[stratum]) {
            if count > 0.0 {
                if d <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                total += count * d.ln();
            }
            total -= d * exposure;
        }
        total
    }

    /// Full log-likelihood given per-stratum increments.
    pub fn log_likelihood(&self, increments: &[Vec<f64>]) -> f64 {
        let hazard: f64 = increments.iter().enumerate().map(|(s, d)| self.stratum_term(s, d)).sum();
        hazard - self.n_events * self.log_width + self.event_eta
    }
}

/// Fixed value or sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Hyper {
    Fixed(f64),
    Sampled,
}

impl Hyper {
    pub fn is_sampled(self) -> bool {
        matches!(self, Hyper::Sampled)
    }
}

/// How the Gamma shape `a` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeSetting {
    /// Fixed at the empirical-Bayes anchor (Nelson-Aalen `H(maxStudyTime)` times `lambda`).
    Anchor,
    Fixed(f64),
    Sampled,
}

/// Prior regime and hyperprior constants.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorConfig {
    pub a: ShapeSetting,
    pub lambda: Hyper,
    pub k: Hyper,
    pub gamma: Hyper,
    /// Variance of the independent Normal(0, s^2) prior on each coefficient.
    pub beta_variance: f64,
    /// Rate of the exponential hyperprior on `a`.
    pub a_rate: f64,
    /// Shape and rate of the Gamma(eps, eps) hyperprior on `lambda`.
    pub lambda_eps: f64,
    /// Rate of the exponential hyperprior on `k`.
    pub k_rate: f64,
    /// Beta hyperprior parameters on each `gamma_{m,p}`.
    pub gamma_prior: (f64, f64),
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            a: ShapeSetting::Sampled,
            lambda: Hyper::Sampled,
            k: Hyper::Fixed(0.5),
            gamma: Hyper::Fixed(0.5),
            beta_variance: 1e6,
            a_rate: 0.01,
            lambda_eps: 0.01,
            k_rate: 0.3,
            gamma_prior: (1.0, 1.0),
        }
    }
}

impl PriorConfig {
    pub fn a_sampled(&self) -> bool {
        matches!(self.a, ShapeSetting::Sampled)
    }
}

pub fn gamma_ln_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if !(x > 0.0 && shape > 0.0 && rate > 0.0) || !x.is_finite() {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

pub fn beta_ln_pdf(x: f64, alpha: f64, beta: f64) -> f64 {
    if !(x > 0.0 && x < 1.0 && alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
        return f64::NEG_INFINITY;
    }
    (alpha - 1.0) * x.ln() + (beta - 1.0) * (-x).ln_1p() - ln_gamma(alpha) - ln_gamma(beta) + ln_gamma(alpha + beta)
}

fn exponential_ln_pdf(x: f64, rate: f64) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return f64::NEG_INFINITY;
    }
    rate.ln() - rate * x
}

fn normal_ln_pdf(x: f64, variance: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * variance).ln() - x * x / (2.0 * variance)
}

/// Beta prior parameters of split `id`: `(2 gamma k^m a, 2 (1 - gamma) k^m a)`.
pub fn split_prior_params(tree: &MrhTree, id: SplitId) -> (f64, f64) {
    let g = tree.gamma(id);
    let scale = 2.0 * tree.k.powi(id.level as i32) * tree.a;
    (g * scale, (1.0 - g) * scale)
}

/// Log prior density of one unpruned split.
pub fn split_ln_prior(tree: &MrhTree, id: SplitId) -> f64 {
    let (alpha, beta) = split_prior_params(tree, id);
    beta_ln_pdf(tree.split(id), alpha, beta)
}

/// Sum of the Beta log densities of all unpruned splits.
pub fn splits_ln_prior(tree: &MrhTree) -> f64 {
    SplitId::all(tree.depth()).filter(|&id| !tree.is_pruned(id)).map(|id| split_ln_prior(tree, id)).sum()
}

/// Prior terms of one stratum tree, including hyperpriors for sampled hyperparameters.
pub fn tree_ln_prior(tree: &MrhTree, prior: &PriorConfig) -> f64 {
    let mut total = gamma_ln_pdf(tree.total, tree.a, tree.lambda) + splits_ln_prior(tree);
    if prior.a_sampled() {
        total += exponential_ln_pdf(tree.a, prior.a_rate);
    }
    if prior.lambda.is_sampled() {
        total += gamma_ln_pdf(tree.lambda, prior.lambda_eps, prior.lambda_eps);
    }
    if prior.k.is_sampled() {
        total += exponential_ln_pdf(tree.k, prior.k_rate);
    }
    if prior.gamma.is_sampled() {
        let (ga, gb) = prior.gamma_prior;
        total += tree
            .free_splits()
            .into_iter()
            .map(|id| beta_ln_pdf(tree.gamma(id), ga, gb))
            .sum::<f64>();
    }
    total
}

pub fn beta_ln_prior(beta: &[f64], prior: &PriorConfig) -> f64 {
    beta.iter().map(|&b| normal_ln_pdf(b, prior.beta_variance)).sum()
}

/// Joint log prior density of a parameter state.
pub fn log_prior(state: &ParameterState, prior: &PriorConfig) -> f64 {
    let trees: f64 = state.trees.iter().map(|t| tree_ln_prior(t, prior)).sum();
    let total = trees + beta_ln_prior(&state.beta, prior);
    if total.is_nan() {
        f64::NEG_INFINITY
    } else {
        total
    }
}
