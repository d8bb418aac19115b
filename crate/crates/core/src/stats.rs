//! Seeding and estimation helpers for Monte Carlo runs.
//!
//! Trial `i` of a run with master seed `s` draws from a ChaCha8 generator
//! seeded with `trial_seed(s, i)`, the `(i+1)`-th output of a SplitMix64
//! stream started at `s`. Trials are independent of scheduling, so
//! parallel runs aggregate to the same numbers as serial ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Number of standard deviations used for confidence radii and
/// statistical agreement checks.
pub const Z_SCORE: f64 = 3.0;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(master + (index + 1)·γ)`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    splitmix64_mix(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn trial_rng(master: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trial_seed(master, index))
}

/// Runs `trials` independent trials in parallel and returns their results
/// in trial order.
pub fn run_trials<T, F>(master: u64, trials: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|i| f(i, &mut trial_rng(master, i)))
        .collect()
}

pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Empirical frequency with its binomial confidence radius and, when one
/// exists, the exact value it estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub successes: u64,
    pub trials: u64,
    pub p_hat: f64,
    /// `z·√(p̂(1−p̂)/trials)`.
    pub ci_radius: f64,
    pub z: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_diff: Option<f64>,
}

impl Estimate {
    pub fn from_counts(successes: u64, trials: u64, analytic: Option<f64>) -> Self {
        assert!(trials > 0, "an estimate needs at least one trial");
        let p_hat = successes as f64 / trials as f64;
        Self {
            successes,
            trials,
            p_hat,
            ci_radius: Z_SCORE * binomial_sigma(p_hat, trials),
            z: Z_SCORE,
            analytic,
            abs_diff: analytic.map(|a| (p_hat - a).abs()),
        }
    }

    /// `|p̂ − p| ≤ z·σ(p)` with `σ` computed from the analytic value. An
    /// analytic value of exactly 0 or 1 requires an exact match.
    pub fn agrees(&self) -> bool {
        match self.analytic {
            None => true,
            Some(p) => (self.p_hat - p).abs() <= Z_SCORE * binomial_sigma(p, self.trials) + 1e-12,
        }
    }
}

/// `½ Σ |p_i − q_i|`; missing entries count as zero.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    0.5 * (0..n)
        .map(|i| (p.get(i).copied().unwrap_or(0.0) - q.get(i).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// Scale of the total-variation distance between two empirical histograms
/// drawn from the same distribution: `½ Σ_i √(p̂_i(1−p̂_i)(1/n_a + 1/n_b))`
/// with `p̂` the pooled frequencies.
pub fn total_variation_sigma(counts_a: &[u64], counts_b: &[u64]) -> f64 {
    let (na, nb) = (counts_a.iter().sum::<u64>(), counts_b.iter().sum::<u64>());
    if na == 0 || nb == 0 {
        return f64::INFINITY;
    }
    let n = counts_a.len().max(counts_b.len());
    let scale = 1.0 / na as f64 + 1.0 / nb as f64;
    0.5 * (0..n)
        .map(|i| {
            let pooled = (counts_a.get(i).copied().unwrap_or(0) + counts_b.get(i).copied().unwrap_or(0)) as f64
                / (na + nb) as f64;
            (pooled * (1.0 - pooled) * scale).sqrt()
        })
        .sum::<f64>()
}

pub fn frequencies(counts: &[u64]) -> Vec<f64> {
    let n: u64 = counts.iter().sum();
    counts
        .iter()
        .map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
        .collect()
}

/// Plug-in mutual information (nats) of a joint count table `joint[x][y]`.
/// Biased upward by roughly `(|X|−1)(|Y|−1)/(2n)` for independent variables.
pub fn plug_in_mutual_information(joint: &[Vec<u64>]) -> f64 {
    let n: u64 = joint.iter().flatten().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let px: Vec<f64> = joint.iter().map(|row| row.iter().sum::<u64>() as f64 / n).collect();
    let cols = joint.iter().map(Vec::len).max().unwrap_or(0);
    let py: Vec<f64> = (0..cols)
        .map(|y| joint.iter().map(|row| row.get(y).copied().unwrap_or(0)).sum::<u64>() as f64 / n)
        .collect();
    let mut mi = 0.0;
    for (x, row) in joint.iter().enumerate() {
        for (y, &c) in row.iter().enumerate() {
            if c > 0 {
                let pxy = c as f64 / n;
                mi += pxy * (pxy / (px[x] * py[y])).ln();
            }
        }
    }
    mi.max(0.0)
}
