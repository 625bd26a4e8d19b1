//! Variational steady-state training.
//!
//! Cost and gradient are estimated over the distinct configurations of a
//! batch, each weighted by `p̃ = |ρ_ϑ|² / Σ|ρ_ϑ|²` with the sum over that same
//! set. The sampled set plays the role of a subspace of the support; with an
//! enumerated batch the estimates are exact.

use std::collections::HashMap;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::Spin;
use crate::error::{Error, Result};
use crate::model::{liouvillian_row, ConfigPair, ModelParams};
use crate::observables::diagonal_weights;
use crate::rbm::{init_params, log_derivatives_into, log_rho, RbmParams, RbmShape};
use crate::sampler::{SampleBatch, SampleKind, Sampler};

/// Configurations per leaf of the reduction tree. Partial sums of consecutive
/// chunks are combined left to right, so the result does not depend on how
/// rayon schedules the chunks.
pub const REDUCTION_CHUNK: usize = 64;

/// Default number of independent Markov chains per batch.
pub const DEFAULT_CHAINS: usize = 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorMode {
    #[default]
    Sampling,
    /// Exhaustive support iteration; only sensible for small `N_β`.
    Enumeration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub n_samples: usize,
    pub max_iters: usize,
    pub shape: RbmShape,
    pub model: ModelParams,
    pub seed: u64,
    /// 0 disables checkpoints.
    pub checkpoint_every: usize,
    pub n_chains: usize,
    pub mode: EstimatorMode,
}

impl TrainConfig {
    pub fn new(
        shape: RbmShape,
        model: ModelParams,
        learning_rate: f64,
        n_samples: usize,
        max_iters: usize,
        seed: u64,
    ) -> Self {
        TrainConfig {
            learning_rate,
            n_samples,
            max_iters,
            shape,
            model,
            seed,
            checkpoint_every: 0,
            n_chains: DEFAULT_CHAINS,
            mode: EstimatorMode::Sampling,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        self.model.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.n_samples == 0 || self.n_chains == 0 {
            return Err(Error::InvalidParameter(
                "n_samples and n_chains must be positive".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        if self.mode == EstimatorMode::Enumeration && self.shape.n_bits > 3 {
            return Err(Error::InvalidParameter(format!(
                "enumeration mode needs n_bits <= 3, got {}",
                self.shape.n_bits
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub n_mean: f64,
    pub spin_up: f64,
    pub spin_down: f64,
    pub acc_unrestricted: f64,
    pub acc_diagonal: f64,
    pub seconds: f64,
}

impl IterationRecord {
    pub const CSV_HEADER: &'static str =
        "iter,cost,n_mean,spin_up,spin_down,acc_unrestricted,acc_diagonal,seconds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.iteration,
            self.cost,
            self.n_mean,
            self.spin_up,
            self.spin_down,
            self.acc_unrestricted,
            self.acc_diagonal,
            self.seconds
        )
    }
}

/// `L̃(n) = Σ_m L(n,m) ρ_ϑ(m)/ρ_ϑ(n)` over the sparse row of `cp`.
pub fn local_liouvillian(params: &RbmParams, model: &ModelParams, cp: &ConfigPair) -> Complex64 {
    let row = liouvillian_row(model, cp);
    if row.entries.is_empty() {
        return Complex64::new(0.0, 0.0);
    }
    let ln_n = log_rho(params, cp);
    row.entries
        .iter()
        .map(|(m, amp)| {
            let r = if m == cp {
                Complex64::new(1.0, 0.0)
            } else {
                (log_rho(params, m) - ln_n).exp()
            };
            amp * r
        })
        .sum()
}

/// Distinct batch configurations, their Liouvillian rows and every row
/// target, indexed once so that the evaluation can reuse it.
#[derive(Clone, Debug)]
pub struct BatchPlan {
    /// Batch configurations first, then row targets outside the batch.
    configs: Vec<ConfigPair>,
    n_sources: usize,
    /// Per source: `(index into configs, L(n,m))`.
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl BatchPlan {
    pub fn new(model: &ModelParams, batch: &SampleBatch) -> Self {
        assert!(!batch.is_empty(), "empty batch");
        let sources: Vec<ConfigPair> = batch.unique().into_iter().map(|(cp, _)| cp).collect();
        let n_sources = sources.len();
        let raw: Vec<Vec<(ConfigPair, Complex64)>> = sources
            .par_iter()
            .map(|cp| liouvillian_row(model, cp).entries)
            .collect();
        let mut index: HashMap<ConfigPair, usize> = HashMap::with_capacity(n_sources * 2);
        let mut configs = sources;
        for (i, cp) in configs.iter().enumerate() {
            index.insert(cp.clone(), i);
        }
        let rows = raw
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|(m, amp)| {
                        let j = *index.entry(m).or_insert_with_key(|m| {
                            configs.push(m.clone());
                            configs.len() - 1
                        });
                        (j, amp)
                    })
                    .collect()
            })
            .collect();
        BatchPlan {
            configs,
            n_sources,
            rows,
        }
    }

    /// Distinct configurations of the batch.
    pub fn sources(&self) -> &[ConfigPair] {
        &self.configs[..self.n_sources]
    }
}

fn reduce(
    params: &RbmParams,
    model: &ModelParams,
    batch: &SampleBatch,
    with_grad: bool,
) -> (f64, Option<Vec<f64>>) {
    evaluate(params, &BatchPlan::new(model, batch), with_grad)
}

/// Cost and, optionally, gradient over the distinct configurations of the plan.
///
/// With `s` the largest `Re ln ρ` in the batch and `φ_n = Im ln ρ(n)`, every
/// term is built from `e(n,m) = exp(ln ρ(m) − s − iφ_n)`:
/// `u_n = Σ_m L(n,m) e(n,m) = √w_n L̃(n)` and the cost is `Σ|u_n|² / Σ w_n`.
/// The gradient is regrouped per target configuration,
/// `Σ_n w_n L̃*(n) Σ_m L(n,m) r_m O(m) = Σ_m β_m O(m)` with
/// `β_m = Σ_n u_n* L(n,m) e(n,m)`, so each distinct configuration needs its
/// log-derivatives once. The final `Σ_m γ_m O(m)` is summed over fixed chunks
/// of [`REDUCTION_CHUNK`] configurations merged left to right.
fn evaluate(params: &RbmParams, plan: &BatchPlan, with_grad: bool) -> (f64, Option<Vec<f64>>) {
    let (configs, n_src) = (&plan.configs, plan.n_sources);
    let ln: Vec<Complex64> = configs.par_iter().map(|cp| log_rho(params, cp)).collect();
    let shift = ln[..n_src]
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);

    let weight: f64 = ln[..n_src]
        .iter()
        .map(|l| (2.0 * (l.re - shift)).exp())
        .sum();
    let targets: Vec<Vec<(usize, Complex64)>> = plan
        .rows
        .iter()
        .enumerate()
        .map(|(n, row)| {
            let phase = Complex64::new(-shift, -ln[n].im);
            row.iter()
                .map(|&(j, amp)| (j, amp * (ln[j] + phase).exp()))
                .collect()
        })
        .collect();
    let u: Vec<Complex64> = targets
        .iter()
        .map(|t| t.iter().map(|x| x.1).sum())
        .collect();
    let cost = u.iter().map(|x| x.norm_sqr()).sum::<f64>() / weight;
    if !with_grad {
        return (cost, None);
    }

    let mut gamma = vec![Complex64::new(0.0, 0.0); configs.len()];
    for (n, t) in targets.iter().enumerate() {
        let uc = u[n].conj();
        for &(j, term) in t {
            gamma[j] += uc * term;
        }
        gamma[n] -= cost * (2.0 * (ln[n].re - shift)).exp();
    }

    let n_params = params.shape().param_count();
    let partials: Vec<Vec<Complex64>> = configs
        .par_chunks(REDUCTION_CHUNK)
        .zip(gamma.par_chunks(REDUCTION_CHUNK))
        .map(|(cs, gs)| {
            let mut acc = vec![Complex64::new(0.0, 0.0); n_params];
            let mut o = vec![Complex64::new(0.0, 0.0); n_params];
            for (cp, g) in cs.iter().zip(gs) {
                if *g == Complex64::new(0.0, 0.0) {
                    continue;
                }
                log_derivatives_into(params, cp, &mut o);
                for (a, x) in acc.iter_mut().zip(&o) {
                    *a += g * x;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Complex64::new(0.0, 0.0); n_params];
    for p in &partials {
        for (t, x) in total.iter_mut().zip(p) {
            *t += x;
        }
    }
    (
        cost,
        Some(total.iter().map(|t| 2.0 * t.re / weight).collect()),
    )
}

/// `Σ_n p̃(n) |L̃(n)|²` over the distinct configurations of the batch.
pub fn estimate_cost(params: &RbmParams, model: &ModelParams, batch: &SampleBatch) -> f64 {
    reduce(params, model, batch, false).0
}

/// Gradient of [`estimate_cost`] with respect to the real parameter vector.
pub fn estimate_gradient(params: &RbmParams, model: &ModelParams, batch: &SampleBatch) -> Vec<f64> {
    reduce(params, model, batch, true).1.unwrap()
}

/// Cost and gradient from one pass.
pub fn cost_and_gradient(
    params: &RbmParams,
    model: &ModelParams,
    batch: &SampleBatch,
) -> (f64, Vec<f64>) {
    let (c, g) = reduce(params, model, batch, true);
    (c, g.unwrap())
}

/// [`cost_and_gradient`] over a prepared plan.
pub fn plan_cost_and_gradient(params: &RbmParams, plan: &BatchPlan) -> (f64, Vec<f64>) {
    let (c, g) = evaluate(params, plan, true);
    (c, g.unwrap())
}

/// `ϑ_l ← ϑ_l − ν grad_l`.
pub fn sgd_step(params: &mut RbmParams, grad: &[f64], learning_rate: f64) -> Result<()> {
    params.add_scaled(grad, -learning_rate)
}

/// Mean and sample standard deviation of the trailing `window` values.
pub fn rolling_stats(values: &[f64], window: usize) -> (f64, f64) {
    let tail = &values[values.len().saturating_sub(window)..];
    mean_std(tail)
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

enum Batches {
    Sampled {
        unrestricted: Sampler,
        diagonal: Sampler,
    },
    Enumerated {
        unrestricted: BatchPlan,
        diagonal: SampleBatch,
    },
}

pub struct Trainer {
    cfg: TrainConfig,
    params: RbmParams,
    batches: Batches,
    iteration: usize,
    clock: Instant,
}

impl Trainer {
    /// Fresh parameters from `init_params(shape, seed)`.
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        let params = init_params(cfg.shape, cfg.seed);
        Self::resume(cfg, params, 0)
    }

    /// Continues from given parameters; `iteration` counts completed steps.
    pub fn resume(cfg: TrainConfig, params: RbmParams, iteration: usize) -> Result<Self> {
        cfg.validate()?;
        if *params.shape() != cfg.shape {
            return Err(Error::DimensionMismatch {
                expected: cfg.shape.param_count(),
                actual: params.shape().param_count(),
            });
        }
        let batches = match cfg.mode {
            EstimatorMode::Sampling => {
                let seed = cfg.seed.wrapping_add(iteration as u64);
                Batches::Sampled {
                    unrestricted: Sampler::new(
                        &params,
                        SampleKind::Unrestricted,
                        cfg.n_chains,
                        seed,
                    ),
                    diagonal: Sampler::new(&params, SampleKind::Diagonal, cfg.n_chains, seed),
                }
            }
            EstimatorMode::Enumeration => Batches::Enumerated {
                unrestricted: BatchPlan::new(
                    &cfg.model,
                    &SampleBatch::enumerate(&cfg.shape, SampleKind::Unrestricted),
                ),
                diagonal: SampleBatch::enumerate(&cfg.shape, SampleKind::Diagonal),
            },
        };
        Ok(Trainer {
            cfg,
            params,
            batches,
            iteration,
            clock: Instant::now(),
        })
    }

    pub fn params(&self) -> &RbmParams {
        &self.params
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    /// Completed iterations.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// One gradient step followed by observable estimates at the new parameters.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let it = self.iteration;
        let (cost, grad, acc_unrestricted) = match &mut self.batches {
            Batches::Sampled { unrestricted, .. } => {
                let batch = unrestricted.sample_batch(&self.params, self.cfg.n_samples);
                let (c, g) = cost_and_gradient(&self.params, &self.cfg.model, &batch);
                (c, g, batch.acceptance_rate)
            }
            Batches::Enumerated { unrestricted, .. } => {
                let (c, g) = plan_cost_and_gradient(&self.params, unrestricted);
                (c, g, 1.0)
            }
        };
        if !cost.is_finite() {
            return Err(Error::NonFinite {
                iteration: it,
                what: format!("cost = {cost}"),
            });
        }
        if let Some(l) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                iteration: it,
                what: format!("gradient component {l} = {}", grad[l]),
            });
        }
        sgd_step(&mut self.params, &grad, self.cfg.learning_rate)?;

        let diagonal = match &mut self.batches {
            Batches::Sampled { diagonal, .. } => {
                diagonal.sample_batch(&self.params, self.cfg.n_samples)
            }
            Batches::Enumerated { diagonal, .. } => diagonal.clone(),
        };
        let (mut n_mean, mut spin_up) = (0.0, 0.0);
        for (c, q) in diagonal_weights(&self.params, &diagonal) {
            n_mean += q * c.occupation() as f64;
            spin_up += q * c.spins().iter().filter(|&&s| s == Spin::Up).count() as f64
                / c.n_spins() as f64;
        }
        if !n_mean.is_finite() {
            return Err(Error::NonFinite {
                iteration: it,
                what: format!("n_mean = {n_mean}"),
            });
        }
        self.iteration += 1;
        Ok(IterationRecord {
            iteration: it,
            cost,
            n_mean,
            spin_up,
            spin_down: 1.0 - spin_up,
            acc_unrestricted,
            acc_diagonal: diagonal.acceptance_rate,
            seconds: self.clock.elapsed().as_secs_f64(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub records: Vec<IterationRecord>,
    pub params: RbmParams,
}

/// Runs `max_iters` steps from freshly initialized parameters.
pub fn train(cfg: TrainConfig) -> Result<TrainOutcome> {
    train_with(cfg, |_, _| Ok(()))
}

/// Like [`train`], calling `observe` after every iteration with the record
/// and the updated parameters.
pub fn train_with(
    cfg: TrainConfig,
    mut observe: impl FnMut(&IterationRecord, &RbmParams) -> Result<()>,
) -> Result<TrainOutcome> {
    let max_iters = cfg.max_iters;
    let mut trainer = Trainer::new(cfg)?;
    let mut records = Vec::with_capacity(max_iters);
    while trainer.iteration() < max_iters {
        let rec = trainer.step()?;
        observe(&rec, trainer.params())?;
        records.push(rec);
    }
    Ok(TrainOutcome {
        records,
        params: trainer.params,
    })
}
