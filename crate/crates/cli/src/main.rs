use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hallmhd::experiment::{run, ExperimentConfig, RunOptions};
use hallmhd::Error;

#[global_allocator]
static ALLOC: mimalloc::MiMalloc = mimalloc::MiMalloc;

/// Batch runner for Hall-MHD mild-solution experiments.
#[derive(Parser)]
#[command(name = "hallmhd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the job described by a JSON config.
    Run {
        config: PathBuf,
        /// Cap on worker threads.
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides the config's output_dir.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
}

const SEED_VAR: &str = "HALLMHD_SEED";

fn load(path: &Path) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Ok(s) = std::env::var(SEED_VAR) {
        let seed = s
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{SEED_VAR} must be an unsigned integer, got {s:?}")))?;
        cfg.override_seed(seed);
    }
    Ok(cfg)
}

fn report_failure(e: &Error) -> ExitCode {
    let record = serde_json::json!({
        "class": e.class(),
        "exit_code": e.exit_code(),
        "message": e.to_string(),
    });
    eprintln!("{record}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match load(&config).and_then(|c| c.to_json()) {
            Ok(json) => {
                println!("{json}");
                ExitCode::SUCCESS
            }
            Err(e) => report_failure(&e),
        },
        Command::Run { config, threads, output } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => {
                    // still leave a failure record where the artifacts would go
                    if let Some(dir) = &output {
                        let _ = std::fs::create_dir_all(dir);
                        let _ = std::fs::write(
                            dir.join("failure.json"),
                            serde_json::json!({"class": e.class(), "exit_code": e.exit_code(), "message": e.to_string()})
                                .to_string(),
                        );
                    }
                    return report_failure(&e);
                }
            };
            if let Some(n) = threads {
                if n == 0 {
                    return report_failure(&Error::Config("--threads must be positive".into()));
                }
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    return report_failure(&Error::Config(e.to_string()));
                }
            }
            let base_dir = config.parent().map(Path::to_path_buf).unwrap_or_default();
            let opts = RunOptions {
                output_dir: output.unwrap_or_else(|| base_dir.join(&cfg.output_dir)),
                base_dir,
            };
            match run(&cfg, &opts) {
                Ok(out) => {
                    if let Some(msg) = &out.error {
                        eprintln!("{msg}");
                    }
                    ExitCode::from(out.exit_code as u8)
                }
                Err(e) => report_failure(&e),
            }
        }
    }
}
