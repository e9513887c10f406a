use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qrls::experiment::{parse_config_with, run_assemble, run_experiment};
use qrls::QrlsError;

#[derive(Parser)]
#[command(
    name = "qrls",
    version,
    about = "Relaxation iterations through an emulated quantum linear-system solve"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write A, b and the block systems in Matrix Market form.
    Assemble(Flags),
    /// Relative error per iteration of the classical relaxation.
    Classical(Flags),
    /// Block-system solve plus measurement, one row per l and repetition.
    Qrls(Flags),
    /// Norm, condition and probability bounds against computed values.
    Verify(Flags),
    /// Repeat a mode (`--mode`, default classical) over every n.
    Sweep(Flags),
}

#[derive(Args)]
struct Flags {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    case: Option<String>,
    /// Comma-separated list.
    #[arg(long)]
    n: Option<String>,
    /// Comma-separated list.
    #[arg(long)]
    l: Option<String>,
    #[arg(long)]
    c: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// discard or restart
    #[arg(long)]
    policy: Option<String>,
    /// Mode repeated by `sweep`.
    #[arg(long)]
    mode: Option<String>,
}

impl Flags {
    fn overrides(&self) -> Vec<(String, String)> {
        [
            ("dim", &self.dim),
            ("case", &self.case),
            ("n", &self.n),
            ("l", &self.l),
            ("c", &self.c),
            ("eps", &self.eps),
            ("delta", &self.delta),
            ("seed", &self.seed),
            ("reps", &self.reps),
            ("out", &self.out),
            ("policy", &self.policy),
            ("sweep", &self.mode),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
        .collect()
    }
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, QrlsError> {
    let (mode, flags) = match &cli.command {
        // Mode is irrelevant to assembly; sweep admits lists of n.
        Command::Assemble(f) => (None, f),
        Command::Classical(f) => (Some("classical"), f),
        Command::Qrls(f) => (Some("qrls"), f),
        Command::Verify(f) => (Some("verify_bounds"), f),
        Command::Sweep(f) => (Some("sweep"), f),
    };
    let text = match &flags.config {
        Some(path) => std::fs::read_to_string(path)?,
        None => String::new(),
    };
    let mut overrides = flags.overrides();
    overrides.push(("mode".into(), mode.unwrap_or("sweep").into()));
    let cfg = parse_config_with(&text, &overrides)?;
    match mode {
        None => run_assemble(&cfg),
        Some(_) => run_experiment(&cfg),
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\")
        .replace('"', "\\\"")
        .replace('\n', "\\n")
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!(
                "{{\"error\":\"{}\",\"message\":\"{}\"}}",
                e.kind(),
                escape(&e.to_string())
            );
            ExitCode::from(2)
        }
    }
}
