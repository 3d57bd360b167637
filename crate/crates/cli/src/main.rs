//! `apopt`: generate path-loss maps, optimize AP placements, compare methods
//! and train the path-loss surrogate. Outputs are CSV/JSON files under `--out`.

use std::path::PathBuf;
use std::process::ExitCode;

use apopt_core::config::RunConfig;
use apopt_core::harness;
use apopt_core::nn::HeadKind;
use apopt_core::Error;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "apopt", version, about = "AP placement optimization for tunnel radio coverage")]
struct Cli {
    /// JSON run configuration; missing sections take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every randomized component (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Path-loss map CSV to use instead of the synthetic model.
    #[arg(long, global = true)]
    map: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Dqn,
    Dueling,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the synthetic path-loss map for every integer AP position.
    Simulate,
    /// Run HJ, DQN and Dueling DQN from the same start and tabulate them.
    Compare,
    /// One Dueling DQN run per weight alpha.
    AlphaSweep {
        /// Comma-separated alphas; defaults to the config's sweep list.
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
    },
    /// Path-loss PDF/CDF and per-receiver coverage for a placement.
    Stats {
        /// Comma-separated AP positions; defaults to the initial placement.
        #[arg(long, value_delimiter = ',')]
        positions: Option<Vec<i64>>,
    },
    /// Train the path-loss surrogate on a subsample of AP positions.
    CganTrain,
    /// Generate profiles for every AP position with a trained generator.
    CganAugment {
        /// Generator checkpoint; defaults to `<out>/generator.json`.
        #[arg(long)]
        generator: Option<PathBuf>,
        /// Also run Dueling DQN on both maps and report the cost gap.
        #[arg(long)]
        check_gap: bool,
    },
    /// Train a single agent.
    Train {
        #[arg(long, value_enum, default_value = "dueling")]
        method: Method,
    },
    /// Hooke-Jeeves pattern search.
    Hj,
}

fn run(cli: Cli) -> apopt_core::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default().resolved()?,
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    let out = cli.out.as_path();
    let map = || harness::obtain_map(&cfg, cli.map.as_deref());

    match cli.command {
        Command::Simulate => {
            let path = harness::cmd_simulate(&cfg, out)?;
            println!("wrote {}", path.display());
        }
        Command::Compare => {
            let map = map()?;
            let rows = harness::cmd_compare(&cfg, &map, out)?;
            let mut buf = Vec::new();
            harness::write_comparison(&rows, &mut buf).expect("writing to memory");
            print!("{}", String::from_utf8_lossy(&buf));
        }
        Command::AlphaSweep { alphas } => {
            let map = map()?;
            let alphas = alphas.unwrap_or_else(|| cfg.sweep.alphas.clone());
            let rows = harness::cmd_alpha_sweep(&cfg, &map, &alphas, out)?;
            let mut buf = Vec::new();
            harness::write_sweep(&rows, &mut buf).expect("writing to memory");
            print!("{}", String::from_utf8_lossy(&buf));
        }
        Command::Stats { positions } => {
            let map = map()?;
            let positions = positions.unwrap_or_else(|| cfg.env.initial_positions.to_vec());
            harness::cmd_stats(&cfg, &map, &positions, out)?;
            println!("wrote {}", out.display());
        }
        Command::CganTrain => {
            let map = map()?;
            let (_, s) = harness::cmd_cgan_train(&cfg, &map, out)?;
            println!(
                "trained on {} profiles; validation MAE {:.5} dB (linear upsampling {:.5} dB)",
                s.train_profiles, s.final_val_mae_db, s.baseline_val_mae_db
            );
        }
        Command::CganAugment {
            generator,
            check_gap,
        } => {
            let map = map()?;
            let path = generator.unwrap_or_else(|| out.join("generator.json"));
            let gen = harness::load_generator(&path)?;
            let (_, gap) = harness::cmd_cgan_augment(&cfg, &map, &gen, check_gap, out)?;
            println!("wrote {}", out.join("augmented_map.csv").display());
            if let Some(g) = gap {
                println!(
                    "cost gap {:.2}% (reference {:.3}, augmented {:.3}, threshold {:.1}%)",
                    g.gap_pct, g.reference_cost, g.augmented_cost, g.threshold_pct
                );
            }
        }
        Command::Train { method } => {
            let map = map()?;
            let kind = match method {
                Method::Dqn => HeadKind::Plain,
                Method::Dueling => HeadKind::Dueling,
            };
            let r = harness::cmd_train(&cfg, &map, kind, out)?;
            println!(
                "{}: {:.3} -> {:.3} ({:.1}%) at {:?}",
                r.method, r.initial_cost, r.optimized_cost, r.improvement_pct, r.optimized_positions
            );
        }
        Command::Hj => {
            let map = map()?;
            let r = harness::cmd_hj(&cfg, &map, out)?;
            println!(
                "hj: {:.3} -> {:.3} ({:.1}%) at {:?} after {} evaluations",
                r.initial_cost, r.optimized_cost, r.improvement_pct, r.optimized_positions, r.work
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("APOPT_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code() as u8
}
