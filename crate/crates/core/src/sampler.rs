//! Metropolis chains over density-matrix elements.
//!
//! Unrestricted chains walk the excitation-conserving sector with target
//! weight `|ρ_ϑ(σ,η)|²`; diagonal chains walk `(σ|σ)` with weight `ρ_ϑ(σ,σ)²`.
//!
//! A proposal flips every spin on each side with probability 1/2 and then
//! draws the occupations uniformly from the admissible set for the new spins.
//! That set has a spin-dependent size, so the acceptance ratio carries the
//! Hastings factor `R(new) / R(old)`, where `R` counts the admissible draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bits::{max_occupation, Spin, SpinBosonConfig};
use crate::model::{self, diagonal_pairs, support_pairs, ConfigPair};
use crate::rbm::{log_rho, RbmParams, RbmShape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SampleKind {
    Unrestricted,
    Diagonal,
}

#[derive(Clone, Debug)]
pub struct SampleBatch {
    /// One record per proposal, including repeats after rejections.
    pub pairs: Vec<ConfigPair>,
    pub kind: SampleKind,
    pub acceptance_rate: f64,
    pub seed_stream: u64,
}

impl SampleBatch {
    /// Every admissible element once: the sector for unrestricted batches,
    /// every `(σ|σ)` for diagonal ones.
    pub fn enumerate(shape: &RbmShape, kind: SampleKind) -> Self {
        let pairs = match kind {
            SampleKind::Unrestricted => support_pairs(shape.n_spins, shape.n_bits),
            SampleKind::Diagonal => diagonal_pairs(shape.n_spins, shape.n_bits),
        };
        SampleBatch {
            pairs,
            kind,
            acceptance_rate: 1.0,
            seed_stream: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Distinct elements with their occurrence counts, in order of first
    /// appearance.
    pub fn unique(&self) -> Vec<(ConfigPair, usize)> {
        let mut index: std::collections::HashMap<&ConfigPair, usize> =
            std::collections::HashMap::with_capacity(self.pairs.len());
        let mut out: Vec<(ConfigPair, usize)> = Vec::new();
        for p in &self.pairs {
            match index.get(p) {
                Some(&i) => out[i].1 += 1,
                None => {
                    index.insert(p, out.len());
                    out.push((p.clone(), 1));
                }
            }
        }
        out
    }
}

fn random_spins(spins: &[Spin], rng: &mut impl Rng) -> Vec<Spin> {
    spins
        .iter()
        .map(|&s| if rng.random_bool(0.5) { s.flipped() } else { s })
        .collect()
}

/// Number of admissible `(n_left, n_right)` draws for the given spins.
pub fn boson_choices(left: &[Spin], right: &[Spin], n_bits: usize) -> u64 {
    let (lo, hi) = model::occupation_range(left, right, max_occupation(n_bits));
    if hi < lo {
        0
    } else {
        hi - lo + 1
    }
}

/// Unrestricted move. Returns `current` unchanged when the new spins admit
/// no representable occupations.
pub fn propose(current: &ConfigPair, rng: &mut impl Rng) -> ConfigPair {
    let n_bits = current.left.n_bits();
    let ls = random_spins(current.left.spins(), rng);
    let rs = random_spins(current.right.spins(), rng);
    let (lo, hi) = model::occupation_range(&ls, &rs, max_occupation(n_bits));
    if hi < lo {
        return current.clone();
    }
    let nl = rng.random_range(lo..=hi);
    let nr = (nl as i64 + model::excitation_offset(&ls, &rs)) as u64;
    ConfigPair::new(
        SpinBosonConfig::with_occupation(ls, nl, n_bits).expect("range checked"),
        SpinBosonConfig::with_occupation(rs, nr, n_bits).expect("range checked"),
    )
}

/// Diagonal move: flip spins of one side, draw a uniform occupation, mirror.
pub fn propose_diagonal(current: &ConfigPair, rng: &mut impl Rng) -> ConfigPair {
    let n_bits = current.left.n_bits();
    let spins = random_spins(current.left.spins(), rng);
    let n = rng.random_range(0..=max_occupation(n_bits));
    ConfigPair::diagonal(SpinBosonConfig::with_occupation(spins, n, n_bits).expect("in range"))
}

/// Accepts with probability `min(1, p_new / p_old)`.
pub fn accept(p_new: f64, p_old: f64, rng: &mut impl Rng) -> bool {
    debug_assert!(p_old > 0.0);
    let r = p_new / p_old;
    r >= 1.0 || rng.random::<f64>() < r
}

/// [`accept`] with the ratio given as its logarithm.
pub fn accept_log(log_ratio: f64, rng: &mut impl Rng) -> bool {
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

/// `ln |ρ_ϑ|²`.
fn log_weight(params: &RbmParams, cp: &ConfigPair) -> f64 {
    2.0 * log_rho(params, cp).re
}

/// A single persistent Markov chain with its own RNG stream.
#[derive(Clone, Debug)]
pub struct Chain {
    state: ConfigPair,
    kind: SampleKind,
    rng: ChaCha8Rng,
}

impl Chain {
    /// Chain started at all spins down, zero occupation on both sides.
    pub fn new(shape: &RbmShape, kind: SampleKind, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let side =
            SpinBosonConfig::with_occupation(vec![Spin::Down; shape.n_spins], 0, shape.n_bits)
                .expect("zero always fits");
        Chain {
            state: ConfigPair::diagonal(side),
            kind,
            rng,
        }
    }

    pub fn state(&self) -> &ConfigPair {
        &self.state
    }

    /// Runs `n` proposals, recording the state after each; returns the
    /// number accepted.
    pub fn run(&mut self, params: &RbmParams, n: usize, out: &mut Vec<ConfigPair>) -> usize {
        let mut current = log_weight(params, &self.state);
        let mut accepted = 0;
        for _ in 0..n {
            if self.step(params, &mut current) {
                accepted += 1;
            }
            out.push(self.state.clone());
        }
        accepted
    }

    fn step(&mut self, params: &RbmParams, current: &mut f64) -> bool {
        let n_bits = self.state.left.n_bits();
        let (proposal, hastings) = match self.kind {
            SampleKind::Unrestricted => {
                let p = propose(&self.state, &mut self.rng);
                let fwd = boson_choices(p.left.spins(), p.right.spins(), n_bits) as f64;
                let rev =
                    boson_choices(self.state.left.spins(), self.state.right.spins(), n_bits) as f64;
                (p, (fwd / rev).ln())
            }
            SampleKind::Diagonal => (propose_diagonal(&self.state, &mut self.rng), 0.0),
        };
        let w = log_weight(params, &proposal);
        if accept_log(w - *current + hastings, &mut self.rng) {
            self.state = proposal;
            *current = w;
            true
        } else {
            false
        }
    }
}

/// Runs one chain for `n_samples` proposals and wraps the records in a batch.
pub fn sample_batch(params: &RbmParams, chain: &mut Chain, n_samples: usize) -> SampleBatch {
    let mut pairs = Vec::with_capacity(n_samples);
    let accepted = chain.run(params, n_samples, &mut pairs);
    SampleBatch {
        pairs,
        kind: chain.kind,
        acceptance_rate: accepted as f64 / n_samples.max(1) as f64,
        seed_stream: chain.rng.get_stream(),
    }
}

/// A fixed set of independent chains whose records are concatenated in chain
/// order, so batches do not depend on the thread count.
#[derive(Clone, Debug)]
pub struct Sampler {
    kind: SampleKind,
    chains: Vec<Chain>,
    seed: u64,
}

impl Sampler {
    /// Creates `n_chains` chains and burns each in for `10 (N + N_β)` proposals.
    pub fn new(params: &RbmParams, kind: SampleKind, n_chains: usize, seed: u64) -> Self {
        let shape = *params.shape();
        let tag = match kind {
            SampleKind::Unrestricted => 0u64,
            SampleKind::Diagonal => 1u64 << 32,
        };
        let mut chains: Vec<Chain> = (0..n_chains.max(1) as u64)
            .map(|i| Chain::new(&shape, kind, seed, tag | i))
            .collect();
        let burn_in = 10 * shape.n_visible();
        chains.par_iter_mut().for_each(|c| {
            let mut scratch = Vec::with_capacity(burn_in);
            c.run(params, burn_in, &mut scratch);
        });
        Sampler { kind, chains, seed }
    }

    pub fn kind(&self) -> SampleKind {
        self.kind
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn sample_batch(&mut self, params: &RbmParams, n_samples: usize) -> SampleBatch {
        let n = self.chains.len();
        let per_chain: Vec<usize> = (0..n)
            .map(|i| n_samples / n + usize::from(i < n_samples % n))
            .collect();
        let parts: Vec<(Vec<ConfigPair>, usize)> = self
            .chains
            .par_iter_mut()
            .zip(per_chain.par_iter())
            .map(|(c, &k)| {
                let mut out = Vec::with_capacity(k);
                let acc = c.run(params, k, &mut out);
                (out, acc)
            })
            .collect();
        let accepted: usize = parts.iter().map(|p| p.1).sum();
        SampleBatch {
            pairs: parts.into_iter().flat_map(|p| p.0).collect(),
            kind: self.kind,
            acceptance_rate: accepted as f64 / n_samples.max(1) as f64,
            seed_stream: self.seed,
        }
    }
}
