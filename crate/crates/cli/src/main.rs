//! `dlcz`: forward simulation, synthetic count records and the
//! tomography/entanglement analysis from the command line.

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

mod analyze;
mod error;
mod output;
mod simulate;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dlcz_core::config::ExperimentConfig;
use dlcz_core::entanglement::Plane;
use dlcz_core::protocol::Herald;
use dlcz_core::tomography::CoherenceMode;

use error::{CliError, EXIT_CODES_HELP};

const PAPER_PRESET: &str = include_str!("../presets/paper.json");

#[derive(Parser)]
#[command(name = "dlcz", version, about = "Heralded DLCZ entanglement: simulate, tally, analyze", after_help = EXIT_CODES_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the forward model and write states, click probabilities and sampled records.
    Simulate(SimulateArgs),
    /// Two-stage tomography (and optionally the likelihood fit) of count records.
    Analyze(analyze::AnalyzeArgs),
    /// Fringe-layout scans for both heralds, with fits and the phase offset.
    FringeScan(RunArgs),
    /// Move a tomography result to upstream planes through the channel budget.
    Backprop(analyze::BackpropArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Window {
    /// Base configuration.
    W190,
    W120,
}

#[derive(Args, Clone, Debug)]
pub struct ConfigArgs {
    /// Config file, or `@paper` for the bundled preset.
    #[arg(long, default_value = "@paper")]
    pub config: String,
    /// Detection-window preset.
    #[arg(long, value_enum, default_value_t = Window::W190)]
    pub window: Window,
}

#[derive(Args, Clone, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub herald: Option<Herald>,
}

#[derive(Args, Clone, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Skip sampling count records.
    #[arg(long)]
    pub no_records: bool,
}

/// Raw text of a config argument and where it came from.
pub fn config_text(arg: &str) -> Result<(String, Option<PathBuf>), CliError> {
    match arg {
        "@paper" | "paper" => Ok((PAPER_PRESET.to_string(), None)),
        path => {
            let p = Path::new(path);
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            Ok((text, Some(p.to_path_buf())))
        }
    }
}

pub fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig, CliError> {
    let (text, _) = config_text(&args.config)?;
    let cfg = ExperimentConfig::from_json(&text)?;
    Ok(match args.window {
        Window::W190 if !cfg.windows.contains_key("w190") => cfg,
        Window::W190 => cfg.with_window("w190")?,
        Window::W120 => cfg.with_window("w120")?,
    })
}

/// Config with the command-line overrides applied.
pub fn run_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = load_config(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(h) = args.herald {
        cfg.herald.which = h;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_plane(s: &str) -> Result<Plane, String> {
    s.parse()
}

pub fn parse_coherence(s: &str) -> Result<CoherenceMode, String> {
    s.parse()
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => simulate::simulate(&a),
        Command::Analyze(a) => analyze::analyze(&a),
        Command::FringeScan(a) => simulate::fringe_scan(&a),
        Command::Backprop(a) => analyze::backprop(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
