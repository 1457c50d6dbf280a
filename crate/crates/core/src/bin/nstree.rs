use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nstree::commands::{
    cmd_kernelcheck, cmd_scalingcheck, cmd_series, cmd_solve, cmd_trees, cmd_verify, Outcome,
};
use nstree::config::RunConfig;

#[derive(Parser, Debug)]
#[command(
    name = "nstree",
    version,
    about = "Tree expansion of Navier-Stokes on the periodic torus"
)]
struct Cli {
    /// TOML run configuration; defaults apply to omitted keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (overrides `jobs`; 0 uses all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed of the random property suites (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tree and forest catalogs with a count table.
    Trees {
        #[arg(long, default_value_t = 5)]
        n_max: usize,
        #[arg(long, default_value_t = 1)]
        k_max: usize,
    },
    /// Run the verification suite.
    Verify,
    /// Partial sums of the tree series at every configured time.
    Series,
    /// Frequency-kernel identities and cross-checks.
    Kernelcheck,
    /// Reference solve to every configured time.
    Solve,
    /// Dilation invariance through the solver and the series.
    Scalingcheck {
        #[arg(long, default_value_t = 2)]
        lambda: usize,
    },
    /// Print the resolved configuration as TOML.
    Config,
}

fn resolve(cli: &Cli) -> nstree::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> nstree::Result<Outcome> {
    let cfg = resolve(cli)?;
    if cfg.jobs > 0 {
        // Only fails if a global pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build_global();
    }
    let out = cfg.out_dir.clone();
    match &cli.command {
        Command::Trees { n_max, k_max } => cmd_trees(*n_max, *k_max, &cfg, &out),
        Command::Verify => cmd_verify(&cfg, &out),
        Command::Series => cmd_series(&cfg, &out),
        Command::Kernelcheck => cmd_kernelcheck(&cfg, &out),
        Command::Solve => cmd_solve(&cfg, &out),
        Command::Scalingcheck { lambda } => cmd_scalingcheck(&cfg, *lambda, &out),
        Command::Config => Ok(Outcome {
            pass: true,
            lines: vec![cfg.to_toml()?],
            ..Outcome::default()
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                eprintln!("one or more checks failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
