use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fockrbm::config::{Overrides, RunConfig};
use fockrbm::runner;
use fockrbm::{Error, Result};

/// Bit-encoded RBM steady states of the one-atom laser, with an exact benchmark.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact steady state by direct solve and time propagation.
    Bench(Common),
    /// Train the network and write the iteration log.
    Train(Common),
    /// Boson statistics of a checkpoint against the benchmark table.
    Stats {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Parameter-count scaling table.
    Scaling(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        if let Some(n) = self.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        }
        Ok(RunConfig::load(&self.config)?.apply(&Overrides { seed: self.seed }))
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bench(c) => {
            let s = runner::run_bench(&c.load()?, &c.out)?;
            println!(
                "<n> = {:.6}  spin up = {:.6}  spin down = {:.6}",
                s.n_mean, s.spin_up, s.spin_down
            );
            if let Some(d) = s.max_method_difference {
                println!("propagation vs direct solve: max difference {d:.3e}");
            }
        }
        Command::Train(c) => {
            if c.seed.is_none() {
                return Err(Error::Config("train requires --seed".into()));
            }
            let r = runner::run_train(&c.load()?, &c.out)?;
            let (m, s) = r.n_mean_rolling;
            println!(
                "{} iterations, final cost {:.4e}",
                r.iterations, r.final_record.cost
            );
            println!(
                "<n> over last {} iterations: {m:.4} ± {s:.4}",
                r.rolling_window
            );
            if let Some(cmp) = &r.stats.comparison {
                println!(
                    "KL(rbm||bench) = {:.4}  KL(bench||rbm) = {:.4}",
                    cmp.kl_rbm_benchmark, cmp.kl_benchmark_rbm
                );
            }
        }
        Command::Stats { common, checkpoint } => {
            let r = runner::run_stats(&common.load()?, &common.out, &checkpoint)?;
            println!("<n> = {:.4}  mode = {}", r.n_mean, r.mode);
            if let Some(cmp) = &r.comparison {
                println!(
                    "KL(rbm||bench) = {:.4}  KL(bench||rbm) = {:.4}",
                    cmp.kl_rbm_benchmark, cmp.kl_benchmark_rbm
                );
            }
        }
        Command::Scaling(c) => {
            for r in runner::run_scaling(&c.load()?, &c.out)? {
                println!(
                    "kappa={} <n>={:.3} N_beta={} rbm={} regular={} optimized={}",
                    r.kappa, r.n_mean, r.n_bits, r.rbm_count, r.regular_count, r.optimized_count
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
