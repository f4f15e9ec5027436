//! Convergence diagnostics for MCMC output.
//!
//! Spectral densities at frequency zero are estimated by batch means with
//! `floor(sqrt(n))` batches, for both the Geweke and Heidelberger-Welch tests.

use statrs::function::erf::erfc;
use statrs::function::gamma::gamma;

use crate::error::{MrhError, Result};

/// Minimum chain length accepted by [`geweke`] and [`heidel_welch`].
pub const MIN_DIAGNOSTIC_LENGTH: usize = 100;
/// Means closer to zero than this many standard errors flag the halfwidth test as degenerate.
pub const DEGENERATE_SE: f64 = 4.0;

/// Named columns of retained samples from one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainMatrix {
    pub names: Vec<String>,
    /// Column-major samples, one vector per parameter.
    pub columns: Vec<Vec<f64>>,
}

impl ChainMatrix {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(MrhError::Config("column names and data differ in length".into()));
        }
        if let Some(first) = columns.first() {
            if columns.iter().any(|c| c.len() != first.len()) {
                return Err(MrhError::Config("chain columns differ in length".into()));
            }
        }
        Ok(ChainMatrix { names, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Spectral density at zero by non-overlapping batch means.
pub fn spectrum0_batch_means(x: &[f64]) -> f64 {
    let n = x.len();
    let batches = ((n as f64).sqrt().floor() as usize).max(1);
    let size = n / batches;
    if batches < 2 || size == 0 {
        return sample_variance(x);
    }
    let means: Vec<f64> = x[..batches * size].chunks(size).map(mean).collect();
    size as f64 * sample_variance(&means)
}

fn normal_two_sided(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GewekeResult {
    pub z: f64,
    pub p_value: f64,
    /// Both segments have zero spectral variance and equal means; treated as a pass.
    pub undefined: bool,
}

/// Compares the mean of the first 10% with the mean of the last 50%.
pub fn geweke(chain: &[f64]) -> Result<GewekeResult> {
    let n = chain.len();
    if n < MIN_DIAGNOSTIC_LENGTH {
        return Err(MrhError::Domain(format!("Geweke diagnostic needs {MIN_DIAGNOSTIC_LENGTH} samples, got {n}")));
    }
    let first = &chain[..n / 10];
    let last = &chain[n - n / 2..];
    let diff = mean(first) - mean(last);
    let var = spectrum0_batch_means(first) / first.len() as f64 + spectrum0_batch_means(last) / last.len() as f64;
    if var <= 0.0 {
        if diff == 0.0 {
            return Ok(GewekeResult { z: 0.0, p_value: 1.0, undefined: true });
        }
        return Ok(GewekeResult { z: diff.signum() * f64::INFINITY, p_value: 0.0, undefined: false });
    }
    let z = diff / var.sqrt();
    Ok(GewekeResult { z, p_value: normal_two_sided(z), undefined: false })
}

/// Modified Bessel function of the second kind, `K_nu(x)` for `x > 0`, from
/// `int_0^inf exp(-x cosh t) cosh(nu t) dt` by the trapezoid rule.
fn bessel_k(nu: f64, x: f64) -> f64 {
    let upper = (1.0 + 60.0 / x).acosh().max(1.0);
    let steps = 4000;
    let h = upper / steps as f64;
    let f = |t: f64| (-x * t.cosh()).exp() * (nu * t).cosh();
    let interior: f64 = (1..steps).map(|i| f(i as f64 * h)).sum();
    h * (0.5 * (f(0.0) + f(upper)) + interior)
}

/// CDF of the Cramér–von Mises statistic (series truncated after four terms).
pub fn pcramer(q: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    // The truncated series loses accuracy in the far tail and decays back towards 0.
    if q >= 3.0 {
        return 1.0;
    }
    let log_eps = 1e-5f64.ln();
    let pi32 = std::f64::consts::PI.powf(1.5);
    (0..4)
        .map(|k| {
            let k = k as f64;
            let u = (4.0 * k + 1.0).powi(2) / (16.0 * q);
            if u > -log_eps {
                return 0.0;
            }
            let z = gamma(k + 0.5) * (4.0 * k + 1.0).sqrt() / (gamma(k + 1.0) * pi32 * q.sqrt());
            z * (-u).exp() * bessel_k(0.25, u)
        })
        .sum::<f64>()
        .min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeidelWelchResult {
    pub stationary: bool,
    /// Fraction of the chain retained when stationarity was accepted.
    pub keep_fraction: f64,
    /// Cramér–von Mises p-value of the last test performed.
    pub p_value: f64,
    pub halfwidth_pass: bool,
    pub mean: f64,
    pub halfwidth: f64,
    /// The mean is within [`DEGENERATE_SE`] standard errors of zero, so the
    /// relative halfwidth criterion is not meaningful.
    pub halfwidth_degenerate: bool,
}

fn cramer_statistic(y: &[f64], s0: f64) -> f64 {
    let n = y.len() as f64;
    let ybar = mean(y);
    let mut running = 0.0;
    let mut sum_sq = 0.0;
    for &v in y {
        running += v - ybar;
        sum_sq += running * running;
    }
    if s0 <= 0.0 {
        return if sum_sq <= 1e-24 * n { 0.0 } else { f64::INFINITY };
    }
    sum_sq / (n * n * s0)
}

/// Stationarity test with iterative discarding of the first 10%, 20%, … 50%
/// of the chain, followed by the halfwidth test on the retained part.
pub fn heidel_welch(chain: &[f64], eps: f64, pvalue: f64) -> Result<HeidelWelchResult> {
    let n = chain.len();
    if n < MIN_DIAGNOSTIC_LENGTH {
        return Err(MrhError::Domain(format!(
            "Heidelberger-Welch diagnostic needs {MIN_DIAGNOSTIC_LENGTH} samples, got {n}"
        )));
    }
    let s0 = spectrum0_batch_means(&chain[n / 2..]);
    let mut p_value = 0.0;
    for step in 0..=5 {
        let start = step * n / 10;
        let y = &chain[start..];
        let stat = cramer_statistic(y, s0);
        p_value = 1.0 - pcramer(stat);
        if stat.is_finite() && pcramer(stat) < 1.0 - pvalue {
            let m = mean(y);
            let se = (spectrum0_batch_means(y) / y.len() as f64).sqrt();
            let halfwidth = 1.959964 * se;
            let degenerate = m.abs() <= DEGENERATE_SE * se;
            return Ok(HeidelWelchResult {
                stationary: true,
                keep_fraction: y.len() as f64 / n as f64,
                p_value,
                halfwidth_pass: !degenerate && halfwidth < eps * m.abs(),
                mean: m,
                halfwidth,
                halfwidth_degenerate: degenerate,
            });
        }
    }
    Ok(HeidelWelchResult {
        stationary: false,
        keep_fraction: 0.0,
        p_value,
        halfwidth_pass: false,
        mean: mean(chain),
        halfwidth: f64::NAN,
        halfwidth_degenerate: false,
    })
}

/// Mean-centred sample autocorrelation, normalised by `n`.
pub fn autocorr(chain: &[f64], lag: usize) -> Result<f64> {
    let n = chain.len();
    if 2 * lag >= n {
        return Err(MrhError::Domain(format!("lag {lag} requires more than {} samples", 2 * lag)));
    }
    let m = mean(chain);
    let denom: f64 = chain.iter().map(|v| (v - m) * (v - m)).sum();
    if denom <= 0.0 {
        return Ok(0.0);
    }
    let num: f64 = chain[..n - lag].iter().zip(&chain[lag..]).map(|(a, b)| (a - m) * (b - m)).sum();
    Ok((num / denom).clamp(-1.0, 1.0))
}

/// Autocorrelations at lags `0..=max_lag` (truncated to what the length allows).
pub fn autocorr_series(chain: &[f64], max_lag: usize) -> Vec<f64> {
    (0..=max_lag).map_while(|lag| autocorr(chain, lag).ok()).collect()
}

/// Means over consecutive windows of `window` samples.
pub fn running_mean(chain: &[f64], window: usize) -> Vec<f64> {
    chain.chunks(window.max(1)).map(mean).collect()
}

/// Potential scale reduction factor of each parameter, in the column order of the first chain.
pub fn gelman_rubin(chains: &[ChainMatrix]) -> Result<Vec<(String, f64)>> {
    if chains.len() < 2 {
        return Err(MrhError::Config("Gelman-Rubin needs at least two chains".into()));
    }
    let n = chains[0].n_rows();
    if n < 10 {
        return Err(MrhError::Config(format!("Gelman-Rubin needs at least 10 samples per chain, got {n}")));
    }
    if chains.iter().any(|c| c.n_rows() != n) {
        return Err(MrhError::Config("chains differ in length".into()));
    }
    let names = &chains[0].names;
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let cols: Vec<&[f64]> = chains
            .iter()
            .map(|c| c.column(name).ok_or_else(|| MrhError::Config(format!("parameter {name} missing from a chain"))))
            .collect::<Result<_>>()?;
        let within = cols.iter().map(|c| sample_variance(c)).sum::<f64>() / cols.len() as f64;
        let means: Vec<f64> = cols.iter().map(|c| mean(c)).collect();
        let between = n as f64 * sample_variance(&means);
        let psrf = if within <= 0.0 {
            1.0
        } else {
            let nf = n as f64;
            (((nf - 1.0) / nf * within + between / nf) / within).sqrt()
        };
        out.push((name.clone(), psrf));
    }
    if chains.iter().any(|c| c.names.len() != names.len()) {
        return Err(MrhError::Config("chains carry different parameter sets".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn pcramer_reference_values() {
        // Upper percentage points of the Cramér–von Mises limit distribution.
        assert!((pcramer(0.46136) - 0.95).abs() < 2e-3);
        assert!((pcramer(0.34730) - 0.90).abs() < 2e-3);
        assert!((pcramer(0.74346) - 0.99).abs() < 2e-3);
        assert_eq!(pcramer(0.0), 0.0);
        assert!(pcramer(2.0) > 0.9999 && pcramer(500.0) == 1.0);
    }

    #[test]
    fn bessel_k_half_closed_form() {
        // K_{1/2}(x) = sqrt(pi / (2x)) e^{-x}.
        for x in [0.1, 1.0, 5.0] {
            let exact = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp();
            assert!((bessel_k(0.5, x) - exact).abs() < 1e-9 * exact);
        }
    }

    #[test]
    fn geweke_extreme_shift() {
        let mut chain = vec![0.0; 500];
        chain.extend(vec![10.0; 500]);
        assert!(geweke(&chain).unwrap().p_value < 1e-10);
    }

    #[test]
    fn geweke_constant_is_undefined_pass() {
        let r = geweke(&[3.0; 200]).unwrap();
        assert!(r.undefined);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn geweke_needs_100_samples() {
        assert!(geweke(&[1.0; 99]).is_err());
    }

    #[test]
    fn geweke_iid_rejection_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let reps = 1000;
        let mut big_z = 0;
        let mut rejects = 0;
        for _ in 0..reps {
            let chain: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
            let g = geweke(&chain).unwrap();
            big_z += usize::from(g.z.abs() >= 3.0);
            rejects += usize::from(g.p_value < 0.005);
        }
        // P(|z| >= 3) ~ 0.003; batch-means variance estimates inflate the
        // tails slightly at this length, which the bounds allow for.
        assert!(big_z <= 12, "{big_z} of {reps} with |z| >= 3");
        assert!(rejects <= 15, "rejection rate {}", rejects as f64 / reps as f64);
    }

    #[test]
    fn heidel_welch_iid_passes() {
        let mut passes = 0;
        for seed in 0..100 {
            let chain: Vec<f64> = normals(5000, seed).into_iter().map(|x| x + 5.0).collect();
            let r = heidel_welch(&chain, 0.1, 0.05).unwrap();
            passes += usize::from(r.stationary && r.keep_fraction == 1.0 && r.halfwidth_pass);
        }
        assert!(passes >= 95, "{passes} of 100");
    }

    #[test]
    fn heidel_welch_changepoint_discards() {
        // Step at 35%: the 30% start still contains the shift, 40% does not.
        for seed in 0..20 {
            let mut chain = normals(5000, 100 + seed);
            for x in chain.iter_mut().take(1750) {
                *x += 3.0;
            }
            let r = heidel_welch(&chain, 0.1, 0.05).unwrap();
            assert!(!r.stationary || r.keep_fraction <= 0.6, "keep {}", r.keep_fraction);
        }
    }

    #[test]
    fn heidel_welch_zero_mean_degenerate() {
        let r = heidel_welch(&normals(5000, 4), 0.1, 0.05).unwrap();
        assert!(r.halfwidth_degenerate || !r.halfwidth_pass);
        assert!(!r.halfwidth_pass);
    }

    #[test]
    fn heidel_welch_trend_not_stationary() {
        let chain: Vec<f64> =
            normals(5000, 8).iter().enumerate().map(|(i, x)| x * 0.1 + i as f64 / 1000.0).collect();
        assert!(!heidel_welch(&chain, 0.1, 0.05).unwrap().stationary);
    }

    #[test]
    fn autocorr_properties() {
        let x = normals(2000, 1);
        assert!((autocorr(&x, 0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(autocorr(&[2.0; 100], 1).unwrap(), 0.0);
        assert!(autocorr(&x, 1000).is_err());
        let shifted: Vec<f64> = x.iter().map(|v| 3.0 * v + 7.0).collect();
        assert!((autocorr(&x, 3).unwrap() - autocorr(&shifted, 3).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn autocorr_iid_within_band() {
        let n = 1000;
        let inside = (0..200).filter(|&s| autocorr(&normals(n, 500 + s), 1).unwrap().abs() < 2.0 / (n as f64).sqrt()).count();
        assert!(inside >= 180, "{inside} of 200");
    }

    #[test]
    fn ar1_lag_one() {
        let e = normals(100_000, 2);
        let mut x = vec![0.0; e.len()];
        for t in 1..e.len() {
            x[t] = 0.9 * x[t - 1] + e[t];
        }
        assert!((autocorr(&x, 1).unwrap() - 0.9).abs() < 0.01);
    }

    fn matrix(cols: Vec<Vec<f64>>) -> ChainMatrix {
        let names = (0..cols.len()).map(|i| format!("p{i}")).collect();
        ChainMatrix::new(names, cols).unwrap()
    }

    #[test]
    fn psrf_identical_chains() {
        let c = matrix(vec![normals(500, 3)]);
        let r = gelman_rubin(&[c.clone(), c.clone(), c]).unwrap();
        assert!((r[0].1 - (499.0f64 / 500.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn psrf_iid_and_separated() {
        let chains: Vec<ChainMatrix> = (0..3).map(|s| matrix(vec![normals(10_000, 40 + s)])).collect();
        assert!(gelman_rubin(&chains).unwrap()[0].1 < 1.05);
        let apart = vec![matrix(vec![normals(100, 1)]), matrix(vec![normals(100, 2).iter().map(|x| x + 100.0).collect()])];
        assert!(gelman_rubin(&apart).unwrap()[0].1 > 1.2);
    }

    #[test]
    fn psrf_errors_and_conventions() {
        let one = matrix(vec![normals(20, 1)]);
        assert!(gelman_rubin(std::slice::from_ref(&one)).is_err());
        let short = matrix(vec![normals(5, 1)]);
        assert!(gelman_rubin(&[short.clone(), short]).is_err());
        let flat = matrix(vec![vec![1.0; 20]]);
        assert_eq!(gelman_rubin(&[flat.clone(), flat]).unwrap()[0].1, 1.0);
    }

    #[test]
    fn location_scale_invariance() {
        let x = normals(3000, 12);
        let y: Vec<f64> = x.iter().map(|v| 4.0 * v - 2.5).collect();
        let gx = geweke(&x).unwrap().z;
        let gy = geweke(&y).unwrap().z;
        assert!((gx - gy).abs() < 1e-9);
        let a = matrix(vec![x.clone()]);
        let b = matrix(vec![normals(3000, 13)]);
        let a2 = matrix(vec![y]);
        let b2 = matrix(vec![b.columns[0].iter().map(|v| 4.0 * v - 2.5).collect()]);
        let r1 = gelman_rubin(&[a, b]).unwrap()[0].1;
        let r2 = gelman_rubin(&[a2, b2]).unwrap()[0].1;
        assert!((r1 - r2).abs() < 1e-12);
    }
}
