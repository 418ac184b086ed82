use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};

use slp_cli::{cmd_bench, cmd_sweep, cmd_validate, ConfigSource, EXIT_CONFIG};
use slp_core::config::Preset;
use slp_core::validate::Suite;

#[derive(Parser)]
#[command(name = "slpsim", version, about = "Robust symbol-level precoding simulator")]
struct Cli {
    /// Worker threads for the sweep (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// TOML sweep configuration.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: ula14 or upa64.
    #[arg(long)]
    preset: Option<Preset>,
}

impl Source {
    fn resolve(self) -> ConfigSource {
        match (self.config, self.preset) {
            (Some(p), _) => ConfigSource::File(p),
            (None, Some(p)) => ConfigSource::Preset(p),
            (None, None) => unreachable!("clap enforces one source"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an SNR/α sweep and write metrics, plot script and manifest.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Dump the max-min solver trace of the first slot of each point.
        #[arg(long)]
        trace_solver: bool,
    },
    /// Run a property suite: lemma1, nnls, prop2, prop3, prop4, prop5, mil,
    /// degeneracy, monotone, dinkelbach or invariants.
    Validate {
        suite: Suite,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Time every precoder over N in {16, 32, 64, 128}.
    Bench {
        #[command(flatten)]
        source: Source,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if matches!(e.kind(), ErrorKind::InvalidValue | ErrorKind::ValueValidation) {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    let code = match cli.command {
        Command::Sweep {
            source,
            out,
            seed,
            trace_solver,
        } => cmd_sweep(&source.resolve(), &out, seed, trace_solver),
        Command::Validate { suite, seed } => cmd_validate(suite, seed),
        Command::Bench { source } => cmd_bench(&source.resolve()),
    };
    ExitCode::from(code as u8)
}
