//! Survival data with piecewise-constant hazards, for known-truth checks.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::data::{StratumLabels, SurvivalDataset};
use crate::error::{MrhError, Result};

/// Hazard `rates[i]` on `[starts[i], starts[i+1])`, the last piece open-ended.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseHazard {
    starts: Vec<f64>,
    rates: Vec<f64>,
}

impl PiecewiseHazard {
    pub fn new(starts: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if starts.is_empty() || starts.len() != rates.len() || starts[0] != 0.0 {
            return Err(MrhError::Config("piece starts must begin at 0 and match the rates".into()));
        }
        if starts.windows(2).any(|w| w[1] <= w[0]) || rates.iter().any(|r| !(*r >= 0.0)) {
            return Err(MrhError::Config("piece starts must increase and rates be nonnegative".into()));
        }
        Ok(PiecewiseHazard { starts, rates })
    }

    pub fn constant(rate: f64) -> Self {
        PiecewiseHazard { starts: vec![0.0], rates: vec![rate] }
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        let i = self.starts.partition_point(|&s| s <= t).saturating_sub(1);
        self.rates[i]
    }

    pub fn cumulative(&self, t: f64) -> f64 {
        let mut total = 0.0;
        for (i, (&s, &r)) in self.starts.iter().zip(&self.rates).enumerate() {
            if t <= s {
                break;
            }
            let end = self.starts.get(i + 1).copied().unwrap_or(f64::INFINITY).min(t);
            total += r * (end - s);
        }
        total
    }

    /// Inverse of [`Self::cumulative`]; infinite when the mass is never reached.
    pub fn inverse_cumulative(&self, target: f64) -> f64 {
        let mut acc = 0.0;
        for (i, (&s, &r)) in self.starts.iter().zip(&self.rates).enumerate() {
            let end = self.starts.get(i + 1).copied().unwrap_or(f64::INFINITY);
            let piece = r * (end - s);
            if acc + piece >= target {
                return if r > 0.0 { s + (target - acc) / r } else { f64::INFINITY };
            }
            acc += piece;
        }
        f64::INFINITY
    }

    /// Average hazard over `(start, end]`.
    pub fn mean_rate(&self, start: f64, end: f64) -> f64 {
        (self.cumulative(end) - self.cumulative(start)) / (end - start)
    }
}

/// Simulates one stratum: event times from `hazard`, independent exponential
/// censoring with rate `censor_rate` (0 disables it) and administrative
/// censoring at `max_time`.
pub fn simulate_times<R: Rng + ?Sized>(
    hazard: &PiecewiseHazard,
    n: usize,
    max_time: f64,
    censor_rate: f64,
    rng: &mut R,
) -> (Vec<f64>, Vec<bool>) {
    let mut times = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for _ in 0..n {
        let e: f64 = Exp1.sample(rng);
        let failure = hazard.inverse_cumulative(e).max(f64::MIN_POSITIVE);
        let censor = if censor_rate > 0.0 {
            let c: f64 = Exp1.sample(rng);
            (c / censor_rate).max(f64::MIN_POSITIVE)
        } else {
            f64::INFINITY
        };
        let observed = failure.min(censor).min(max_time);
        times.push(observed);
        events.push(failure <= censor && failure <= max_time);
    }
    (times, events)
}

pub fn simulate_piecewise<R: Rng + ?Sized>(
    hazard: &PiecewiseHazard,
    n: usize,
    max_time: f64,
    censor_rate: f64,
    rng: &mut R,
) -> Result<SurvivalDataset> {
    let (times, events) = simulate_times(hazard, n, max_time, censor_rate, rng);
    SurvivalDataset::unstratified(times, events)
}

/// One stratum per hazard, `n` subjects each.
pub fn simulate_strata<R: Rng + ?Sized>(
    hazards: &[PiecewiseHazard],
    n: usize,
    max_time: f64,
    censor_rate: f64,
    rng: &mut R,
) -> Result<SurvivalDataset> {
    let mut times = Vec::new();
    let mut events = Vec::new();
    let mut strata = Vec::new();
    for (l, h) in hazards.iter().enumerate() {
        let (t, e) = simulate_times(h, n, max_time, censor_rate, rng);
        strata.extend(std::iter::repeat_n(l, t.len()));
        times.extend(t);
        events.extend(e);
    }
    let total = times.len();
    SurvivalDataset::new(times, events, vec![Vec::new(); total], Vec::new(), strata, StratumLabels::numbered(hazards.len()))
}
