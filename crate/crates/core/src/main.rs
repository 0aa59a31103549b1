use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use macrostab::experiment::{run, ExperimentConfig, ExperimentKind};

/// Run one macrostab experiment and write `manifest.json` plus CSV tables.
#[derive(Debug, Parser)]
#[command(name = "macrostab", version)]
struct Cli {
    /// scaling, cluster, gamma, lm or cascade
    experiment: ExperimentKind,
    /// TOML configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides master_seed)
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 lets rayon decide
    #[arg(long, env = "MACROSTAB_THREADS", default_value_t = 0)]
    threads: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(&cli) {
        Ok(code) => code,
        Err((code, msg)) => {
            eprintln!("macrostab: {msg}");
            code
        }
    };
    ExitCode::from(code as u8)
}

fn execute(cli: &Cli) -> Result<i32, (i32, String)> {
    let mut cfg = ExperimentConfig::load(&cli.config).map_err(|e| (e.exit_code(), e.to_string()))?;
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| (1, format!("thread pool: {e}")))?;
    let record = pool
        .install(|| run(cli.experiment, &cfg))
        .map_err(|e| (e.exit_code(), e.to_string()))?;
    for t in &record.tables {
        println!("{}\t{} rows", record.out_dir.join(&t.file).display(), t.rows);
    }
    for f in &record.flags {
        eprintln!("macrostab: warning: {f}");
    }
    Ok(record.exit_code())
}
