//! Diagonal observables and boson-number statistics.
//!
//! Diagonal estimates weight each distinct sampled configuration by
//! `q̃(σ) = ρ_ϑ(σ,σ) / Σ ρ_ϑ(σ',σ')`, the sum running over the distinct
//! configurations in the batch. With an enumerated batch this is exactly
//! `Tr(Xρ_ϑ) / Tr(ρ_ϑ)`.

use serde::Serialize;

use crate::bits::{Spin, SpinBosonConfig};
use crate::error::{Error, Result};
use crate::rbm::{log_rho, RbmParams};
use crate::sampler::SampleBatch;

/// Orders above this are annotated as low confidence in reports.
pub const LOW_CONFIDENCE_ABOVE: usize = 10;
/// Entries below this are flagged as noise-dominated.
pub const NEGATIVE_FLAG: f64 = -1e-3;

/// Distinct diagonal configurations of the batch with their normalized `q̃`.
pub fn diagonal_weights(params: &RbmParams, batch: &SampleBatch) -> Vec<(SpinBosonConfig, f64)> {
    let unique = batch.unique();
    let logs: Vec<(SpinBosonConfig, f64)> = unique
        .into_iter()
        .filter(|(cp, _)| cp.is_diagonal())
        .map(|(cp, _)| {
            let l = log_rho(params, &cp).re;
            (cp.left, l)
        })
        .collect();
    let max = logs.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<(SpinBosonConfig, f64)> = logs
        .into_iter()
        .map(|(c, l)| (c, (l - max).exp()))
        .collect();
    let z: f64 = weights.iter().map(|w| w.1).sum();
    for w in &mut weights {
        w.1 /= z;
    }
    weights
}

/// `Σ_n q̃(σ_n) X(σ_n)` over the distinct diagonal configurations.
pub fn estimate_diagonal(
    params: &RbmParams,
    batch: &SampleBatch,
    x: impl Fn(&SpinBosonConfig) -> f64,
) -> f64 {
    debug_assert!(!batch.is_empty());
    diagonal_weights(params, batch)
        .iter()
        .map(|(c, q)| q * x(c))
        .sum()
}

/// `n (n−1) ⋯ (n−k+1)`.
pub fn falling_factorial(n: u64, k: usize) -> f64 {
    (0..k as u64).map(|j| n as f64 - j as f64).product()
}

/// `⟨c†ᵏcᵏ⟩` for `k = 1..=n_max_stat`.
pub fn boson_moments(params: &RbmParams, batch: &SampleBatch, n_max_stat: usize) -> Vec<f64> {
    let weights = diagonal_weights(params, batch);
    (1..=n_max_stat)
        .map(|k| {
            weights
                .iter()
                .map(|(c, q)| q * falling_factorial(c.occupation(), k))
                .sum()
        })
        .collect()
}

/// Exact factorial moments of a distribution `P_0, P_1, …`.
pub fn moments_of(distribution: &[f64], n_max_stat: usize) -> Vec<f64> {
    (1..=n_max_stat)
        .map(|k| {
            distribution
                .iter()
                .enumerate()
                .map(|(n, p)| p * falling_factorial(n as u64, k))
                .sum()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BosonStatistics {
    /// `P_n` for `n = 0..=n_max_stat`.
    pub probabilities: Vec<f64>,
    pub n_max_stat: usize,
}

impl BosonStatistics {
    pub fn from_distribution(probabilities: Vec<f64>) -> Self {
        let n_max_stat = probabilities.len().saturating_sub(1);
        BosonStatistics {
            probabilities,
            n_max_stat,
        }
    }

    /// Indices whose estimate dropped below [`NEGATIVE_FLAG`].
    pub fn negative_entries(&self) -> Vec<usize> {
        self.probabilities
            .iter()
            .enumerate()
            .filter(|(_, &p)| p < NEGATIVE_FLAG)
            .map(|(n, _)| n)
            .collect()
    }

    /// Index of the largest probability.
    pub fn mode(&self) -> usize {
        self.probabilities
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (n, &p)| {
                if p > best.1 {
                    (n, p)
                } else {
                    best
                }
            })
            .0
    }

    pub fn sum(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    /// Report flag for order `n`: `ok`, `low-confidence`, `negative`.
    pub fn flag(&self, n: usize) -> &'static str {
        match self.probabilities.get(n) {
            Some(&p) if p < NEGATIVE_FLAG => "negative",
            _ if n > LOW_CONFIDENCE_ABOVE => "low-confidence",
            _ => "ok",
        }
    }
}

/// Inverts factorial moments into occupation probabilities, top-down:
/// `P_n = ⟨c†ⁿcⁿ⟩/n! − Σ_{m=1}^{n_max−n} C(n+m, n) P_{n+m}` with `⟨c†⁰c⁰⟩ = 1`.
///
/// `moments[k − 1]` holds order `k`; missing orders count as zero.
pub fn statistics_from_moments(moments: &[f64], n_max_stat: usize) -> BosonStatistics {
    let moment = |k: usize| -> f64 {
        if k == 0 {
            1.0
        } else {
            moments.get(k - 1).copied().unwrap_or(0.0)
        }
    };
    let mut p = vec![0.0; n_max_stat + 1];
    for n in (0..=n_max_stat).rev() {
        let mut v = moment(n) / factorial(n);
        for m in 1..=n_max_stat - n {
            v -= binomial(n + m, n) * p[n + m];
        }
        p[n] = v;
    }
    BosonStatistics {
        probabilities: p,
        n_max_stat,
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// `Σ_n P_n ln(P_n / Q_n)` after clamping negatives to zero and renormalizing;
/// `Q` is floored at `1e-12` where `P` has mass.
pub fn kl_divergence(p: &BosonStatistics, q: &BosonStatistics) -> Result<f64> {
    if p.probabilities.len() != q.probabilities.len() {
        return Err(Error::Domain(format!(
            "index ranges differ: {} vs {}",
            p.probabilities.len(),
            q.probabilities.len()
        )));
    }
    let clamp = |xs: &[f64], name: &str| -> Result<Vec<f64>> {
        let c: Vec<f64> = xs.iter().map(|&x| x.max(0.0)).collect();
        let z: f64 = c.iter().sum();
        if z.is_nan() || z <= 0.0 {
            return Err(Error::Domain(format!("{name} has no positive mass")));
        }
        Ok(c.into_iter().map(|x| x / z).collect())
    };
    let pc = clamp(&p.probabilities, "P")?;
    let qc = clamp(&q.probabilities, "Q")?;
    Ok(pc
        .iter()
        .zip(&qc)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b.max(1e-12)).ln())
        .sum())
}

/// Spin-up and spin-down populations of a single-spin model.
pub fn spin_populations(params: &RbmParams, batch: &SampleBatch) -> (f64, f64) {
    let up = estimate_diagonal(params, batch, |c| {
        if c.spins()[0] == Spin::Up {
            1.0
        } else {
            0.0
        }
    });
    (up, 1.0 - up)
}
