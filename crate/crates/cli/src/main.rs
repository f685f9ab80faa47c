use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use quench_cli::commands;
use quench_cli::config::{ensure_writable, ScenarioConfig};
use quench_cli::error::{CliError, CliResult};
use quench_cli::output::{emit, verify, CommandOutput};

#[derive(Parser, Debug)]
#[command(name = "quench", version, about = "Ramsey visibility after a structural quench of an ion crystal")]
struct Cli {
    /// Scenario config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Re-derive outputs and compare them with the existing run record
    /// instead of writing.
    #[arg(long, global = true)]
    verify: bool,
    /// With `modes`: compare against the embedded reference table.
    #[arg(long = "check-table2", global = true)]
    check_table2: bool,
    /// Run even when a mode is too soft for the harmonic treatment.
    #[arg(long, global = true)]
    allow_near_critical: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Equilibrium structures of both internal states.
    Equilibrium,
    /// Normal modes, occupations and soft-mode flags.
    Modes,
    /// Visibility traces, one per configured temperature.
    Visibility,
    /// Spectrum of the logarithmic visibility with annotated peaks.
    Spectrum,
    /// Closed form against the truncated Fock-space oracle.
    OracleCheck,
    /// Cartesian parameter sweep.
    Sweep,
}

fn load(cli: &Cli) -> CliResult<ScenarioConfig> {
    match &cli.config {
        Some(p) => ScenarioConfig::load(p),
        None => Err(CliError::config("--config is required for this command")),
    }
}

fn finish(cli: &Cli, out: CommandOutput, cfg: Option<&ScenarioConfig>) -> CliResult<()> {
    let dir = match cfg {
        Some(c) => c.output_dir(cli.out.as_deref())?,
        None => {
            let d = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
            ensure_writable(&d)?;
            d
        }
    };
    print!("{}", out.summary);
    if cli.verify {
        let bad = verify(&out, &dir)?;
        if bad.is_empty() {
            println!("verify: {} files match {}", out.files.len(), out.record_name());
        } else {
            for m in &bad {
                println!("verify: {}: {}", m.file, m.reason);
            }
            return Err(CliError::Numerical(format!("verify: {} mismatches", bad.len())));
        }
    } else {
        let text = cfg.map(|c| c.to_text());
        let fp = cfg.map(|c| c.fingerprint());
        for p in emit(&out, &dir, text.as_deref(), fp.as_deref())? {
            log::info!("wrote {}", p.display());
        }
    }
    match out.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {}", e)))?;
    }
    let allow = cli.allow_near_critical;
    match cli.command {
        Command::Equilibrium => {
            let cfg = load(cli)?;
            finish(cli, commands::cmd_equilibrium(&cfg, allow)?, Some(&cfg))
        }
        Command::Modes => {
            let cfg = if cli.check_table2 && cli.config.is_none() {
                None
            } else {
                Some(load(cli)?)
            };
            if let Some(cfg) = &cfg {
                finish(cli, commands::cmd_modes(cfg, allow)?, Some(cfg))?;
            }
            if cli.check_table2 {
                let fp = cfg.as_ref().map(|c| c.fingerprint()).unwrap_or_default();
                finish(cli, commands::cmd_check_table2(&fp)?, cfg.as_ref())?;
            }
            Ok(())
        }
        Command::Visibility => {
            let cfg = load(cli)?;
            finish(cli, commands::cmd_visibility(&cfg, allow)?, Some(&cfg))
        }
        Command::Spectrum => {
            let cfg = load(cli)?;
            finish(cli, commands::cmd_spectrum(&cfg, allow)?, Some(&cfg))
        }
        Command::OracleCheck => {
            let cfg = cli.config.as_ref().map(|_| load(cli)).transpose()?;
            let fp = cfg.as_ref().map(|c| c.fingerprint()).unwrap_or_default();
            finish(cli, commands::cmd_oracle_check(&fp)?, cfg.as_ref())
        }
        Command::Sweep => {
            let cfg = load(cli)?;
            finish(cli, commands::cmd_sweep(&cfg, allow)?, Some(&cfg))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({
                "error_class": e.class().as_str(),
                "exit_code": e.exit_code(),
                "message": e.to_string(),
            });
            eprintln!("{}", line);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
