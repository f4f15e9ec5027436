use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::data::{SurvivalDataset, TimeGrid};
use crate::error::{MrhError, Result};
use crate::model::{
    beta_ln_pdf, beta_ln_prior, gamma_ln_pdf, split_ln_prior, tree_ln_prior, ParameterState, PriorConfig,
    SufficientStats,
};
use crate::params::ParamId;

/// Acceptance rate the proposal scales are tuned toward.
pub const TARGET_ACCEPTANCE: f64 = 0.35;
const MIN_LOG_SCALE: f64 = -9.2;
const MAX_LOG_SCALE: f64 = 4.6;

fn logit(x: f64) -> f64 {
    (x / (1.0 - x)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Metropolis-within-Gibbs state: current parameters with cached increments,
/// likelihood terms and per-block proposal scales.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    data: &'a SurvivalDataset,
    prior: PriorConfig,
    state: ParameterState,
    increments: Vec<Vec<f64>>,
    stratum_ll: Vec<f64>,
    stats: SufficientStats,
    scratch: SufficientStats,
    blocks: Vec<ParamId>,
    scales: Vec<f64>,
    accepted: Vec<u64>,
    attempts: Vec<u64>,
}

/// Update blocks in sweep order: per stratum the total, free splits and
/// sampled hyperparameters, then the coefficients.
pub fn sweep_blocks(state: &ParameterState, prior: &PriorConfig) -> Vec<ParamId> {
    let mut blocks = Vec::new();
    for (l, tree) in state.trees.iter().enumerate() {
        blocks.push(ParamId::Total(l));
        blocks.extend(tree.free_splits().into_iter().map(|s| ParamId::Split(l, s)));
        if prior.a_sampled() {
            blocks.push(ParamId::A(l));
        }
        if prior.lambda.is_sampled() {
            blocks.push(ParamId::Lambda(l));
        }
        if prior.k.is_sampled() {
            blocks.push(ParamId::K(l));
        }
        if prior.gamma.is_sampled() {
            blocks.extend(tree.free_splits().into_iter().map(|s| ParamId::Gamma(l, s)));
        }
    }
    blocks.extend((0..state.beta.len()).map(ParamId::Beta));
    blocks
}

fn initial_scale(block: ParamId) -> f64 {
    match block {
        ParamId::Total(_) => 0.3,
        ParamId::Split(..) => 0.8,
        ParamId::Beta(_) => 0.2,
        _ => 0.5,
    }
}

impl<'a> Sampler<'a> {
    pub fn new(data: &'a SurvivalDataset, grid: &TimeGrid, prior: PriorConfig, state: ParameterState) -> Result<Self> {
        let stats = SufficientStats::new(data, grid, &state.beta)?;
        if state.trees.len() != data.n_strata() || state.beta.len() != data.n_covariates() {
            return Err(MrhError::Config("initial state does not match the dataset".into()));
        }
        let increments: Vec<Vec<f64>> = state.trees.iter().map(|t| t.increments()).collect();
        let stratum_ll = increments.iter().enumerate().map(|(l, d)| stats.stratum_term(l, d)).collect();
        let blocks = sweep_blocks(&state, &prior);
        let scales = blocks.iter().map(|&b| initial_scale(b)).collect();
        let n = blocks.len();
        Ok(Sampler {
            data,
            prior,
            state,
            increments,
            stratum_ll,
            scratch: stats.clone(),
            stats,
            blocks,
            scales,
            accepted: vec![0; n],
            attempts: vec![0; n],
        })
    }

    pub fn state(&self) -> &ParameterState {
        &self.state
    }

    pub fn blocks(&self) -> &[ParamId] {
        &self.blocks
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn set_scales(&mut self, scales: &[f64]) -> Result<()> {
        if scales.len() != self.scales.len() || scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(MrhError::Config(format!(
                "expected {} positive proposal scales, got {}",
                self.scales.len(),
                scales.len()
            )));
        }
        self.scales.copy_from_slice(scales);
        Ok(())
    }

    /// Acceptance rate per block so far (1 for exact Gibbs draws).
    pub fn acceptance_rates(&self) -> Vec<f64> {
        self.accepted.iter().zip(&self.attempts).map(|(&a, &n)| if n == 0 { 0.0 } else { a as f64 / n as f64 }).collect()
    }

    /// Log posterior up to a constant.
    pub fn log_posterior(&self) -> f64 {
        let ll: f64 = self.stats.log_likelihood(&self.increments);
        ll + crate::model::log_prior(&self.state, &self.prior)
    }

    /// One full sweep over every block. With `adapt`, proposal scales move
    /// toward the target acceptance rate.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R, adapt: bool) {
        for i in 0..self.blocks.len() {
            let accepted = self.step(i, rng);
            if adapt && !matches!(self.blocks[i], ParamId::Lambda(_)) {
                let gain = (self.attempts[i] as f64).powf(-0.6);
                let target = if accepted { 1.0 } else { 0.0 } - TARGET_ACCEPTANCE;
                let log_s = (self.scales[i].ln() + gain * target).clamp(MIN_LOG_SCALE, MAX_LOG_SCALE);
                self.scales[i] = log_s.exp();
            }
        }
    }

    /// Updates one block. Panics when the block is not free in this model.
    pub fn update_block<R: Rng + ?Sized>(&mut self, block: ParamId, rng: &mut R) -> bool {
        let i = self
            .blocks
            .iter()
            .position(|&b| b == block)
            .unwrap_or_else(|| panic!("{block:?} is not a free parameter of this model"));
        self.step(i, rng)
    }

    fn step<R: Rng + ?Sized>(&mut self, i: usize, rng: &mut R) -> bool {
        let block = self.blocks[i];
        let z: f64 = StandardNormal.sample(rng);
        let step = self.scales[i] * z;
        self.attempts[i] += 1;
        let accepted = match block {
            ParamId::Total(l) => self.update_total(l, step, rng),
            ParamId::Split(l, s) => self.update_split(l, s, step, rng),
            ParamId::Beta(r) => self.update_beta(r, step, rng),
            ParamId::A(l) => self.update_tree_hyper(l, rng, |t| {
                let old = t.a;
                t.a = old * step.exp();
                (t.a / old).ln()
            }),
            ParamId::K(l) => self.update_tree_hyper(l, rng, |t| {
                let old = t.k;
                t.k = old * step.exp();
                (t.k / old).ln()
            }),
            ParamId::Lambda(l) => {
                self.draw_lambda(l, rng);
                true
            }
            ParamId::Gamma(l, s) => self.update_gamma(l, s, step, rng),
        };
        if accepted {
            self.accepted[i] += 1;
        }
        accepted
    }

    fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
        if log_ratio.is_nan() {
            return false;
        }
        log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
    }

    fn update_total<R: Rng + ?Sized>(&mut self, l: usize, step: f64, rng: &mut R) -> bool {
        let tree = &self.state.trees[l];
        let old = tree.total;
        let new = old * step.exp();
        if !(new.is_finite() && new > 0.0) {
            return false;
        }
        let factor = new / old;
        let d: Vec<f64> = self.increments[l].iter().map(|x| x * factor).collect();
        let ll = self.stats.stratum_term(l, &d);
        let log_ratio = ll - self.stratum_ll[l] + gamma_ln_pdf(new, tree.a, tree.lambda)
            - gamma_ln_pdf(old, tree.a, tree.lambda)
            + step;
        if Self::accept(log_ratio, rng) {
            self.state.trees[l].total = new;
            self.increments[l] = d;
            self.stratum_ll[l] = ll;
            true
        } else {
            false
        }
    }

    fn update_split<R: Rng + ?Sized>(&mut self, l: usize, s: crate::tree::SplitId, step: f64, rng: &mut R) -> bool {
        let old = self.state.trees[l].split(s);
        let new = sigmoid(logit(old) + step);
        if !(new > 0.0 && new < 1.0) {
            return false;
        }
        let old_prior = split_ln_prior(&self.state.trees[l], s);
        let mut tree = self.state.trees[l].clone();
        tree.set_split(s, new);
        let d = tree.increments();
        let ll = self.stats.stratum_term(l, &d);
        let jacobian = (new * (1.0 - new)).ln() - (old * (1.0 - old)).ln();
        let log_ratio = ll - self.stratum_ll[l] + split_ln_prior(&tree, s) - old_prior + jacobian;
        if Self::accept(log_ratio, rng) {
            self.state.trees[l] = tree;
            self.increments[l] = d;
            self.stratum_ll[l] = ll;
            true
        } else {
            false
        }
    }

    fn update_beta<R: Rng + ?Sized>(&mut self, r: usize, step: f64, rng: &mut R) -> bool {
        let mut beta = self.state.beta.clone();
        beta[r] += step;
        self.scratch.clone_from(&self.stats);
        self.scratch.set_beta(self.data, &beta);
        let terms: Vec<f64> = self.increments.iter().enumerate().map(|(l, d)| self.scratch.stratum_term(l, d)).collect();
        let old_ll = self.stratum_ll.iter().sum::<f64>() + self.stats.event_eta;
        let new_ll = terms.iter().sum::<f64>() + self.scratch.event_eta;
        let log_ratio =
            new_ll - old_ll + beta_ln_prior(&beta, &self.prior) - beta_ln_prior(&self.state.beta, &self.prior);
        if Self::accept(log_ratio, rng) {
            self.state.beta = beta;
            std::mem::swap(&mut self.stats, &mut self.scratch);
            self.stratum_ll = terms;
            true
        } else {
            false
        }
    }

    /// Proposal on a hyperparameter that affects only the prior of tree `l`.
    /// `propose` mutates the tree and returns the log Jacobian.
    fn update_tree_hyper<R: Rng + ?Sized>(
        &mut self,
        l: usize,
        rng: &mut R,
        propose: impl FnOnce(&mut crate::tree::MrhTree) -> f64,
    ) -> bool {
        let old_prior = tree_ln_prior(&self.state.trees[l], &self.prior);
        let mut tree = self.state.trees[l].clone();
        let jacobian = propose(&mut tree);
        let log_ratio = tree_ln_prior(&tree, &self.prior) - old_prior + jacobian;
        if Self::accept(log_ratio, rng) {
            self.state.trees[l] = tree;
            true
        } else {
            false
        }
    }

    fn update_gamma<R: Rng + ?Sized>(&mut self, l: usize, s: crate::tree::SplitId, step: f64, rng: &mut R) -> bool {
        let (ga, gb) = self.prior.gamma_prior;
        let old = self.state.trees[l].gamma(s);
        let new = sigmoid(logit(old) + step);
        if !(new > 0.0 && new < 1.0) {
            return false;
        }
        let old_terms = split_ln_prior(&self.state.trees[l], s) + beta_ln_pdf(old, ga, gb);
        let mut tree = self.state.trees[l].clone();
        tree.set_gamma(s, new);
        let new_terms = split_ln_prior(&tree, s) + beta_ln_pdf(new, ga, gb);
        let jacobian = (new * (1.0 - new)).ln() - (old * (1.0 - old)).ln();
        if Self::accept(new_terms - old_terms + jacobian, rng) {
            self.state.trees[l] = tree;
            true
        } else {
            false
        }
    }

    /// Exact conditional draw `lambda | H, a ~ Gamma(a + eps, H + eps)`.
    fn draw_lambda<R: Rng + ?Sized>(&mut self, l: usize, rng: &mut R) {
        let eps = self.prior.lambda_eps;
        let tree = &mut self.state.trees[l];
        let shape = tree.a + eps;
        let rate = tree.total + eps;
        if let Ok(g) = Gamma::new(shape, 1.0 / rate) {
            let draw: f64 = g.sample(rng);
            if draw.is_finite() && draw > 0.0 {
                tree.lambda = draw;
            }
        }
    }
}
