use std::path::PathBuf;
use std::process::ExitCode;

use binlattice_cli::{init_threads, presets, run, CliError, CliResult, Command, Outcome, RunConfig};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CommandArg {
    Simulate,
    Scan,
    Cascade,
    Floquet,
    MeshCompile,
    Verify,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Simulate => Command::Simulate,
            CommandArg::Scan => Command::Scan,
            CommandArg::Cascade => Command::Cascade,
            CommandArg::Floquet => Command::Floquet,
            CommandArg::MeshCompile => Command::MeshCompile,
            CommandArg::Verify => Command::Verify,
        }
    }
}

/// Static-forced binary lattice simulations: periodic jumps, period scans,
/// sign-flip cascades, Floquet steps and MZI mesh compilation.
#[derive(Debug, Parser)]
#[command(name = "binlattice", version)]
struct Cli {
    command: CommandArg,
    /// JSON run configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's `output_dir`).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Bundled configuration: fig1, fig1-detuned, fig3, fig4-top, fig4-bottom,
    /// fig5-full, fig5-half, mesh-m3, verify.
    #[arg(long)]
    preset: Option<String>,
}

fn execute(cli: &Cli) -> CliResult<()> {
    init_threads()?;
    let command = Command::from(cli.command);
    let cfg = match (&cli.config, &cli.preset) {
        (Some(path), None) => RunConfig::load(path)?,
        (None, Some(name)) => presets::preset(name)?,
        _ => return Err(CliError::Config("give exactly one of --config or --preset".into())),
    };
    let out = cli
        .output
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(command.name()));
    match run(command, &cfg, &out)? {
        Outcome::Verify(report) if !report.all_passed => {
            let failed: Vec<&str> = report.properties.iter().filter(|p| !p.passed).map(|p| p.name.as_str()).collect();
            Err(CliError::Numerical(format!("verification failed: {}", failed.join(", "))))
        }
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("binlattice: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
