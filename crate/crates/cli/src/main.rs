use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use postsel_cli::{emit_sweep, parse_config, run, CliError, ConfigError, Mode, ScenarioConfig};

#[derive(Parser)]
#[command(name = "postsel", version, about = "Post-selected Bell task simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario in a config file (`-` reads stdin).
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    QuantumExact(ModeArgs),
    QuantumMc(ModeArgs),
    LhvMc(ModeArgs),
    LhvMax(ModeArgs),
    LhvIndet(ModeArgs),
    Loophole(ModeArgs),
    Swap(ModeArgs),
    CheckIndependence(ModeArgs),
    /// Exact S over a depolarizing grid, as `p,S` CSV.
    Sweep {
        /// Comma-separated strengths in [0, 1].
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
        grid: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ModeArgs {
    /// Optional config; its mode must match the subcommand.
    config: Option<PathBuf>,
    #[command(flatten)]
    opts: RunOpts,
}

#[derive(Args)]
struct RunOpts {
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Also write `a,b,E,se` rows to this path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

fn read_source(path: &PathBuf) -> Result<String, CliError> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| CliError::Io(format!("stdin: {e}")))?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

fn write_or_print(path: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn mode_config(mode: Mode, path: Option<&PathBuf>) -> Result<ScenarioConfig, CliError> {
    let Some(p) = path else { return Ok(ScenarioConfig::for_mode(mode)?) };
    let cfg = parse_config(&read_source(p)?)?;
    if cfg.mode != mode {
        return Err(ConfigError::new("mode", format!("config is for {}, not {mode}", cfg.mode)).into());
    }
    Ok(cfg)
}

fn execute(cfg: ScenarioConfig, opts: &RunOpts) -> Result<(), CliError> {
    let cfg = cfg.with_overrides(opts.trials, opts.seed)?;
    let report = run(&cfg)?;
    if let Some(path) = &opts.csv {
        let csv = report
            .to_csv()
            .ok_or_else(|| ConfigError::new("csv", format!("mode {} has no correlation table", cfg.mode)))?;
        write_or_print(Some(path), &csv)?;
    }
    let text = match opts.format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    };
    write_or_print(opts.out.as_ref(), &text)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let (mode, args) = match cli.command {
        Command::Run { config, opts } => return execute(parse_config(&read_source(&config)?)?, &opts),
        Command::Sweep { grid, out } => return write_or_print(out.as_ref(), &emit_sweep(&grid)?),
        Command::QuantumExact(a) => (Mode::QuantumExact, a),
        Command::QuantumMc(a) => (Mode::QuantumMc, a),
        Command::LhvMc(a) => (Mode::LhvMc, a),
        Command::LhvMax(a) => (Mode::LhvMax, a),
        Command::LhvIndet(a) => (Mode::LhvIndet, a),
        Command::Loophole(a) => (Mode::Loophole, a),
        Command::Swap(a) => (Mode::Swap, a),
        Command::CheckIndependence(a) => (Mode::CheckIndependence, a),
    };
    execute(mode_config(mode, args.config.as_ref())?, &args.opts)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = e.to_report();
            println!("{}", serde_json::to_string_pretty(&report).expect("error report serializes"));
            eprintln!("postsel: {e}");
            ExitCode::from(report.exit_code as u8)
        }
    }
}
