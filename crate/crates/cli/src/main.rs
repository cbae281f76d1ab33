use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fdosc_cli::{apply_overrides, load_config, presets, run, run_reproduce, CliError, Command, Overrides, ScenarioConfig};

#[derive(Parser)]
#[command(name = "fdosc", version, about = "Oscillation analysis for forced second-order functional-differential equations")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Shipped scenario: delay-nonosc, step-forced, step-forced-strong, harmonic, wong-sine.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to output.dir of the scenario, else ".".
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Exit with status 1 when the verdict is inconclusive.
    #[arg(long)]
    require_verdict: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the Cauchy problem and report zeros.
    Integrate(Common),
    /// Check an oscillation or non-oscillation criterion.
    Check {
        /// thm31, cor31, thm22, thm32, cor32 or wong; defaults to analysis.criterion.
        #[arg(long)]
        criterion: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Interval oscillation check on each configured partition.
    IntervalOsc(Common),
    /// Variational test for the forced ODE.
    Wong(Common),
    /// Run a shipped example end to end: 3.1 or 3.2.
    Reproduce {
        id: String,
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { horizon: self.horizon, tol: self.tol, seed: self.seed }
    }

    fn load(&self) -> Result<ScenarioConfig, CliError> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => load_config(path)?,
            (None, Some(name)) => presets::by_name(name)
                .ok_or_else(|| CliError::Config(format!("unknown preset '{name}'")))?
                .config()?,
            (None, None) => return Err(CliError::Config("--config or --preset is required".into())),
        };
        apply_overrides(&mut cfg, &self.overrides());
        Ok(cfg)
    }

    fn out_dir(&self, cfg: Option<&ScenarioConfig>) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| cfg.and_then(|c| c.output.dir.clone()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Cmd::Integrate(c) => (Command::Integrate, c),
        Cmd::Check { criterion, common } => (Command::Check { criterion }, common),
        Cmd::IntervalOsc(c) => (Command::IntervalOsc, c),
        Cmd::Wong(c) => (Command::Wong, c),
        Cmd::Reproduce { id, common } => (Command::Reproduce { id }, common),
    };
    let result = match &command {
        Command::Reproduce { id } => run_reproduce(id, &common.overrides(), &common.out_dir(None)),
        _ => common.load().and_then(|cfg| run(&command, &cfg, &common.out_dir(Some(&cfg)))),
    };
    match result {
        Ok(outcome) => {
            let mut stdout = std::io::stdout().lock();
            for line in &outcome.summary {
                let _ = writeln!(stdout, "{line}");
            }
            for f in &outcome.files {
                let _ = writeln!(stdout, "wrote {}", f.display());
            }
            if common.require_verdict && outcome.verdict.is_some_and(|v| v.is_inconclusive()) {
                eprintln!("verdict is inconclusive");
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("fdosc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
