//! Reference implementations written independently of the library code.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::Rng;

/// Increments by walking each bin's path from the root, reading the bits of
/// its index from most to least significant.
pub fn increments_by_path(total: f64, splits: &[f64], depth: u32) -> Vec<f64> {
    let bins = 1usize << depth;
    (0..bins)
        .map(|j| {
            let mut mass = total;
            for m in 1..=depth {
                let p = j >> (depth - m + 1);
                let r = splits[(1usize << (m - 1)) - 1 + p];
                let right = (j >> (depth - m)) & 1 == 1;
                mass *= if right { 1.0 - r } else { r };
            }
            mass
        })
        .collect()
}

/// One subject for [`product_form_log_likelihood`].
#[derive(Debug, Clone)]
pub struct Subject {
    pub time: f64,
    pub event: bool,
    pub stratum: usize,
    pub x: Vec<f64>,
}

/// Log of the product over subjects of `h(T)^delta * exp(-exp(eta) H(T))`,
/// with `H(T)` integrated bin by bin over the overlap of `(0, T]`.
pub fn product_form_log_likelihood(subjects: &[Subject], beta: &[f64], increments: &[Vec<f64>], max_time: f64) -> f64 {
    let bins = increments[0].len();
    let width = max_time / bins as f64;
    let mut product = 1.0f64;
    let mut log_scale = 0.0f64;
    for s in subjects {
        let eta: f64 = s.x.iter().zip(beta).map(|(a, b)| a * b).sum();
        let d = &increments[s.stratum];
        let mut cum = 0.0;
        let mut own = 0.0;
        for (j, dj) in d.iter().enumerate() {
            let lo = j as f64 * width;
            let hi = if j + 1 == bins { max_time } else { (j + 1) as f64 * width };
            let overlap = (s.time.min(hi) - lo).max(0.0);
            cum += dj / width * overlap;
            // Bins are closed on the right.
            if s.time > lo && s.time <= hi {
                own = dj / width;
            }
        }
        let mut term = (-eta.exp() * cum).exp();
        if s.event {
            term *= own * eta.exp();
        }
        product *= term;
        // Rescale to keep the running product representable.
        if product < 1e-200 {
            log_scale += product.ln();
            product = 1.0;
        }
    }
    log_scale + product.ln()
}

fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::from(1u32), |acc, k| acc * BigInt::from(k))
}

fn choose(n: u64, k: u64) -> BigInt {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Two-sided Fisher p-value by enumerating every table with the observed
/// margins in exact arithmetic. Tables count when their probability is at
/// most `1 + 1e-7` times the observed one.
pub fn fisher_rational(a: u64, b: u64, c: u64, d: u64) -> BigRational {
    let (r1, r2, c1) = (a + b, c + d, a + c);
    let n = r1 + r2;
    if r1 == 0 || r2 == 0 || c1 == 0 || c1 == n {
        return BigRational::from_integer(1.into());
    }
    let denom = choose(n, c1);
    let prob = |k: u64| BigRational::new(choose(r1, k) * choose(r2, c1 - k), denom.clone());
    let observed = prob(a);
    let slack = BigRational::new(BigInt::from(10_000_001u64), BigInt::from(10_000_000u64));
    let limit = observed * slack;
    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    let one = BigRational::from_integer(1.into());
    let p = (lo..=hi).map(prob).filter(|p| *p <= limit).fold(BigRational::from_integer(0.into()), |acc, p| acc + p);
    if p > one {
        one
    } else {
        p
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("probability fits in f64")
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Random right-censored subjects on `(0, max_time]`; about a tenth of the
/// times sit exactly on a bin boundary.
pub fn random_subjects<R: Rng>(rng: &mut R, n: usize, depth: u32, strata: usize, covariates: usize, max_time: f64) -> Vec<Subject> {
    let bins = 1usize << depth;
    (0..n)
        .map(|i| {
            let time = if rng.random_bool(0.1) {
                rng.random_range(1..=bins) as f64 * (max_time / bins as f64)
            } else {
                max_time * rng.random_range(1e-6..1.0)
            };
            Subject {
                time,
                event: rng.random_bool(0.7),
                // Every stratum gets at least one subject.
                stratum: if i < strata { i } else { rng.random_range(0..strata) },
                x: (0..covariates).map(|_| rng.random_range(-2.0..2.0)).collect(),
            }
        })
        .collect()
}
