//! The four pipelines behind the CLI subcommands.
//!
//! Every CSV starts with the line produced by [`RunConfig::provenance_line`];
//! every JSON summary carries `config_hash` and `seed` fields.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bits::Spin;
use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::exact::{
    diagonal_populations, evolve_to_steady, observable_n, off_support_max, projector_steady_state,
    spin_populations, DensityMatrix, SteadyStateResult,
};
use crate::model::ModelParams;
use crate::observables::{
    boson_moments, kl_divergence, spin_populations as rbm_spin_populations,
    statistics_from_moments, BosonStatistics,
};
use crate::rbm::{param_count, RbmParams, RbmShape};
use crate::sampler::{SampleKind, Sampler};
use crate::trainer::{mean_std, train_with, IterationRecord, DEFAULT_CHAINS};

/// Agreement required between propagation and the direct solve.
pub const METHOD_TOLERANCE: f64 = 1e-6;
/// Trailing window for convergence reporting.
pub const ROLLING_WINDOW: usize = 500;

pub const BENCH_SUMMARY: &str = "bench_summary.json";
pub const BENCH_PN: &str = "bench_pn.csv";
pub const ITERATIONS: &str = "iterations.csv";
pub const TRAIN_REPORT: &str = "train_report.json";
pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const STATS_CSV: &str = "stats.csv";
pub const STATS_JSON: &str = "stats.json";
pub const SCALING_CSV: &str = "scaling.csv";
pub const SCALING_CURVE: &str = "scaling_curve.csv";

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("summary serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Clone, Debug, Serialize)]
pub struct SteadySummary {
    pub method: crate::exact::SteadyStateMethod,
    pub n_mean: f64,
    pub spin_up: f64,
    pub spin_down: f64,
    pub residual: f64,
    pub time_to_converge: Option<f64>,
    pub off_support_max: f64,
}

impl SteadySummary {
    fn from_result(r: &SteadyStateResult) -> Self {
        let (up, down) = spin_populations(&r.rho);
        SteadySummary {
            method: r.method,
            n_mean: observable_n(&r.rho),
            spin_up: up,
            spin_down: down,
            residual: r.residual,
            time_to_converge: r.time_to_converge,
            off_support_max: off_support_max(&r.rho),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchSummary {
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub n_fock: usize,
    pub n_mean: f64,
    pub spin_up: f64,
    pub spin_down: f64,
    pub p_n: Vec<f64>,
    pub projector: SteadySummary,
    pub propagation: Option<SteadySummary>,
    /// Largest difference over ⟨n⟩, spin populations and every `P_n`.
    pub max_method_difference: Option<f64>,
}

/// Largest absolute difference between two steady states over ⟨n⟩, both
/// spin populations and all `P_n`.
pub fn method_difference(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let (ua, da) = spin_populations(a);
    let (ub, db) = spin_populations(b);
    let pa = diagonal_populations(a);
    let pb = diagonal_populations(b);
    pa.iter()
        .zip(&pb)
        .map(|(x, y)| (x - y).abs())
        .chain([
            (observable_n(a) - observable_n(b)).abs(),
            (ua - ub).abs(),
            (da - db).abs(),
        ])
        .fold(0.0, f64::max)
}

/// Exact steady state by the direct solve and, if enabled, by propagation
/// from `|↓,0⟩`; writes the summary JSON and the `P_n` table.
pub fn run_bench(cfg: &RunConfig, out: &Path) -> Result<BenchSummary> {
    let b = cfg.bench()?;
    ensure_dir(out)?;
    let direct = projector_steady_state(&cfg.model, b.n_fock)?;
    let mut propagation = None;
    let mut diff = None;
    if b.propagate {
        let rho0 = DensityMatrix::pure_fock(b.n_fock, Spin::Down, 0);
        let prop = evolve_to_steady(&cfg.model, &rho0, b.propagation_options())?;
        let d = method_difference(&direct.rho, &prop.rho);
        if d > METHOD_TOLERANCE {
            return Err(Error::MethodMismatch {
                quantity: "steady-state observables".into(),
                difference: d,
            });
        }
        diff = Some(d);
        propagation = Some(SteadySummary::from_result(&prop));
    }
    let projector = SteadySummary::from_result(&direct);
    let p_n = diagonal_populations(&direct.rho);
    let summary = BenchSummary {
        name: cfg.name.clone(),
        config_hash: cfg.hash(),
        seed: cfg.seed(),
        n_fock: b.n_fock,
        n_mean: projector.n_mean,
        spin_up: projector.spin_up,
        spin_down: projector.spin_down,
        p_n: p_n.clone(),
        projector,
        propagation,
        max_method_difference: diff,
    };

    let path = out.join(BENCH_PN);
    let mut w = create(&path)?;
    let io = |e| Error::io(&path, e);
    writeln!(w, "{}", cfg.provenance_line()).map_err(io)?;
    writeln!(w, "n,P_n").map_err(io)?;
    for (n, p) in p_n.iter().enumerate() {
        writeln!(w, "{n},{p}").map_err(io)?;
    }
    w.flush().map_err(io)?;
    write_json(&out.join(BENCH_SUMMARY), &summary)?;
    Ok(summary)
}

/// Reads a `n,P_n` table, skipping `#` comments and the header.
pub fn read_benchmark_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, what: &str| Error::Config(format!("{}:{line}: {what}", path.display()));
    let mut p = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("n,") {
            continue;
        }
        let (n, v) = line
            .split_once(',')
            .ok_or_else(|| bad(i + 1, "expected n,P_n"))?;
        let n: usize = n.trim().parse().map_err(|_| bad(i + 1, "bad index"))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| bad(i + 1, "bad probability"))?;
        if n != p.len() {
            return Err(bad(i + 1, "indices must be consecutive from 0"));
        }
        p.push(v);
    }
    if p.is_empty() {
        return Err(bad(0, "no rows"));
    }
    Ok(p)
}

/// `P_n` for `n = 0..=n_max`, padded with zeros.
fn truncate_to(p: &[f64], n_max: usize) -> BosonStatistics {
    let mut v: Vec<f64> = p.iter().copied().take(n_max + 1).collect();
    v.resize(n_max + 1, 0.0);
    BosonStatistics::from_distribution(v)
}

#[derive(Clone, Debug, Serialize)]
pub struct FrozenEstimate {
    pub n_mean: f64,
    pub spin_up: f64,
    pub moments: Vec<f64>,
    pub statistics: BosonStatistics,
    pub acceptance_rate: f64,
}

/// Diagonal sampling with fixed parameters, then statistics from the factorial moments.
pub fn frozen_estimate(
    params: &RbmParams,
    n_samples: usize,
    n_max_stat: usize,
    seed: u64,
) -> FrozenEstimate {
    let mut sampler = Sampler::new(params, SampleKind::Diagonal, DEFAULT_CHAINS, seed);
    let batch = sampler.sample_batch(params, n_samples);
    let moments = boson_moments(params, &batch, n_max_stat.max(1));
    let statistics = statistics_from_moments(&moments, n_max_stat);
    let (up, _) = rbm_spin_populations(params, &batch);
    FrozenEstimate {
        n_mean: moments[0],
        spin_up: up,
        moments,
        statistics,
        acceptance_rate: batch.acceptance_rate,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub benchmark: PathBuf,
    pub kl_rbm_benchmark: f64,
    pub kl_benchmark_rbm: f64,
    pub benchmark_mode: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct StatsReport {
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub checkpoint_iteration: usize,
    pub n_max_stat: usize,
    pub n_mean: f64,
    pub spin_up: f64,
    pub mode: usize,
    pub probability_sum: f64,
    pub negative_entries: Vec<usize>,
    pub comparison: Option<Comparison>,
}

fn benchmark_path(cfg: &RunConfig, out: &Path) -> PathBuf {
    match &cfg.stats().benchmark {
        Some(p) => PathBuf::from(p),
        None => out.join(BENCH_PN),
    }
}

fn write_stats(
    cfg: &RunConfig,
    out: &Path,
    params: &RbmParams,
    iteration: usize,
    seed: u64,
    benchmark: Option<&Path>,
) -> Result<StatsReport> {
    let st = cfg.stats();
    let est = frozen_estimate(params, st.n_samples, st.n_max_stat, seed);
    let bench = benchmark
        .map(|p| read_benchmark_csv(p).map(|v| (p, truncate_to(&v, st.n_max_stat))))
        .transpose()?;
    let comparison = match &bench {
        Some((p, q)) => Some(Comparison {
            benchmark: p.to_path_buf(),
            kl_rbm_benchmark: kl_divergence(&est.statistics, q)?,
            kl_benchmark_rbm: kl_divergence(q, &est.statistics)?,
            benchmark_mode: q.mode(),
        }),
        None => None,
    };

    let path = out.join(STATS_CSV);
    let mut w = create(&path)?;
    let io = |e| Error::io(&path, e);
    writeln!(w, "{}", cfg.provenance_line()).map_err(io)?;
    writeln!(w, "n,P_n_rbm,P_n_benchmark,flag").map_err(io)?;
    for (n, p) in est.statistics.probabilities.iter().enumerate() {
        let b = bench
            .as_ref()
            .map(|(_, q)| q.probabilities[n].to_string())
            .unwrap_or_default();
        writeln!(w, "{n},{p},{b},{}", est.statistics.flag(n)).map_err(io)?;
    }
    w.flush().map_err(io)?;

    let report = StatsReport {
        name: cfg.name.clone(),
        config_hash: cfg.hash(),
        seed,
        checkpoint_iteration: iteration,
        n_max_stat: st.n_max_stat,
        n_mean: est.n_mean,
        spin_up: est.spin_up,
        mode: est.statistics.mode(),
        probability_sum: est.statistics.sum(),
        negative_entries: est.statistics.negative_entries(),
        comparison,
    };
    write_json(&out.join(STATS_JSON), &report)?;
    Ok(report)
}

/// Statistics of a saved network against the benchmark table.
pub fn run_stats(cfg: &RunConfig, out: &Path, checkpoint: &Path) -> Result<StatsReport> {
    ensure_dir(out)?;
    let ckpt = Checkpoint::load(checkpoint)?;
    // an explicitly configured table must exist; the default one is optional
    let bench = benchmark_path(cfg, out);
    let bench = (cfg.stats().benchmark.is_some() || bench.exists()).then_some(bench);
    let seed = cfg.seed.unwrap_or(ckpt.seed);
    write_stats(
        cfg,
        out,
        &ckpt.params,
        ckpt.iteration,
        seed,
        bench.as_deref(),
    )
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainReport {
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_record: IterationRecord,
    pub rolling_window: usize,
    pub n_mean_rolling: (f64, f64),
    pub spin_up_rolling: (f64, f64),
    pub cost_rolling: (f64, f64),
    pub final_checkpoint: PathBuf,
    pub stats: StatsReport,
}

/// Trains, streaming `iterations.csv` and checkpoints, then evaluates the
/// final network (against `bench_pn.csv` when present).
pub fn run_train(cfg: &RunConfig, out: &Path) -> Result<TrainReport> {
    let tc = cfg.train_config()?;
    let timing = cfg.train_section()?.record_timing;
    ensure_dir(out)?;
    let ckpt_dir = out.join("checkpoints");
    if tc.checkpoint_every > 0 {
        ensure_dir(&ckpt_dir)?;
    }
    let path = out.join(ITERATIONS);
    let mut w = create(&path)?;
    writeln!(w, "{}", cfg.provenance_line()).map_err(|e| Error::io(&path, e))?;
    writeln!(w, "{}", IterationRecord::CSV_HEADER).map_err(|e| Error::io(&path, e))?;

    let (seed, every) = (tc.seed, tc.checkpoint_every);
    let outcome = train_with(tc, |rec, params| {
        let mut row = rec.clone();
        if !timing {
            row.seconds = 0.0;
        }
        writeln!(w, "{}", row.csv_row()).map_err(|e| Error::io(&path, e))?;
        let done = rec.iteration + 1;
        if every > 0 && done % every == 0 {
            w.flush().map_err(|e| Error::io(&path, e))?;
            let ck = Checkpoint {
                params: params.clone(),
                seed,
                iteration: done,
            };
            ck.save(&ckpt_dir.join(format!("ckpt_{done:06}.ckpt")))?;
        }
        Ok(())
    });
    w.flush().map_err(|e| Error::io(&path, e))?;
    drop(w);
    let outcome = outcome?;

    let records = &outcome.records;
    let final_path = out.join(FINAL_CHECKPOINT);
    Checkpoint {
        params: outcome.params.clone(),
        seed,
        iteration: records.len(),
    }
    .save(&final_path)?;

    let tail = |f: fn(&IterationRecord) -> f64| {
        let xs: Vec<f64> = records.iter().map(f).collect();
        mean_std(&xs[xs.len().saturating_sub(ROLLING_WINDOW)..])
    };
    let bench = benchmark_path(cfg, out);
    let bench = bench.exists().then_some(bench);
    let stats = write_stats(
        cfg,
        out,
        &outcome.params,
        records.len(),
        seed,
        bench.as_deref(),
    )?;
    let report = TrainReport {
        name: cfg.name.clone(),
        config_hash: cfg.hash(),
        seed,
        iterations: records.len(),
        initial_cost: records[0].cost,
        final_record: {
            let mut r = records.last().unwrap().clone();
            if !timing {
                r.seconds = 0.0;
            }
            r
        },
        rolling_window: ROLLING_WINDOW,
        n_mean_rolling: tail(|r| r.n_mean),
        spin_up_rolling: tail(|r| r.spin_up),
        cost_rolling: tail(|r| r.cost),
        final_checkpoint: final_path,
        stats,
    };
    write_json(&out.join(TRAIN_REPORT), &report)?;
    Ok(report)
}

/// `d(d+1)/2` independent elements of a Hermitian matrix, `d = 2 n_fock`.
pub fn regular_count(n_fock: usize) -> usize {
    let d = 2 * n_fock;
    d * (d + 1) / 2
}

/// `2(d − 1)` elements of the excitation-conserving sector, `d = 2 n_fock`.
pub fn optimized_count(n_fock: usize) -> usize {
    2 * (2 * n_fock - 1)
}

/// Parameters of a single-spin network with `M = K = N_β + 1`.
pub fn rbm_count(n_bits: usize) -> usize {
    let shape = RbmShape {
        n_spins: 1,
        n_bits,
        n_hidden: n_bits + 1,
        n_mixing: n_bits + 1,
    };
    param_count(&shape)
}

/// Bits needed to represent occupation `n`.
pub fn bits_for(n: u64) -> usize {
    (u64::BITS - n.leading_zeros()).max(1) as usize
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub kappa: f64,
    pub n_bits: usize,
    pub n_fock: usize,
    pub n_mean: f64,
    pub rbm_count: usize,
    pub regular_count: usize,
    pub optimized_count: usize,
}

/// One row per anchor, with ⟨n⟩ from the direct solve, plus the stepwise curve.
pub fn run_scaling(cfg: &RunConfig, out: &Path) -> Result<Vec<ScalingRow>> {
    let s = cfg.scaling()?;
    ensure_dir(out)?;
    let rows = s
        .anchors
        .iter()
        .map(|a| {
            let model = ModelParams {
                kappa: a.kappa,
                ..cfg.model
            };
            let ss = projector_steady_state(&model, a.n_fock)?;
            Ok(ScalingRow {
                kappa: a.kappa,
                n_bits: a.n_bits,
                n_fock: a.n_fock,
                n_mean: observable_n(&ss.rho),
                rbm_count: rbm_count(a.n_bits),
                regular_count: regular_count(a.n_fock),
                optimized_count: optimized_count(a.n_fock),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let path = out.join(SCALING_CSV);
    let mut w = create(&path)?;
    let io = |e| Error::io(&path, e);
    writeln!(w, "{}", cfg.provenance_line()).map_err(io)?;
    writeln!(
        w,
        "kappa,n_bits,n_fock,n_mean,rbm_count,regular_count,optimized_count"
    )
    .map_err(io)?;
    for r in &rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.kappa, r.n_bits, r.n_fock, r.n_mean, r.rbm_count, r.regular_count, r.optimized_count
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)?;

    let path = out.join(SCALING_CURVE);
    let mut w = create(&path)?;
    let io = |e| Error::io(&path, e);
    writeln!(w, "{}", cfg.provenance_line()).map_err(io)?;
    writeln!(w, "n,n_bits,rbm_count").map_err(io)?;
    for n in 0..=s.curve_max {
        let b = bits_for(n);
        writeln!(w, "{n},{b},{}", rbm_count(b)).map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(rows)
}
