use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use stirap_cli::output::RunInfo;
use stirap_cli::{preset, run, write_outputs, Campaign, CliError, ExperimentConfig, PRESETS};

#[derive(Parser)]
#[command(name = "stirap", version, about = "Detuned STIRAP gate simulations for a dual-rail transmon qubit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Population and eigenbasis-overlap traces.
    Simulate(RunArgs),
    /// Amplitude and common-phase calibration sweeps.
    Calibrate(RunArgs),
    /// Simulated state tomography of the calibrated gates.
    Tomography(RunArgs),
    /// Amplitude–detuning maps or robustness curves.
    Sweep(RunArgs),
    /// Circuit fit and dispersive-shift report for the measured device.
    DeviceReport(RunArgs),
    /// Bundled configurations.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// Name and citation of every preset.
    List,
    /// Print a preset's configuration.
    Show { name: String },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Bundled preset name instead of a config file.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long, env = "STIRAP_OUT")]
    out: Option<PathBuf>,
    /// Seed for simulated measurement noise; overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "STIRAP_JOBS")]
    jobs: Option<usize>,
    /// Also write a plotting recipe (data files and axis labels).
    #[arg(long)]
    emit_plot_script: bool,
}

const DEFAULT_OUT: &str = "stirap-out";

fn load(args: &RunArgs) -> Result<(String, ExperimentConfig), CliError> {
    let text = match (&args.config, &args.preset) {
        (Some(path), _) => {
            std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?
        }
        (None, Some(name)) => preset(name)?.toml.to_string(),
        (None, None) => return Err(CliError::Usage("one of --config or --preset is required".into())),
    };
    let config = ExperimentConfig::parse(&text)?;
    Ok((text, config))
}

fn execute(expected: Campaign, args: &RunArgs) -> Result<serde_json::Value, CliError> {
    let start = Instant::now();
    let (text, config) = load(args)?;
    if config.campaign != expected {
        return Err(CliError::invalid(
            "campaign",
            &format!("config runs `{}` but the `{}` subcommand was used", config.campaign.name(), expected.name()),
        ));
    }
    if let Some(jobs) = args.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size the worker pool: {e}")))?;
    }
    let seed = args.seed.unwrap_or(config.seed);
    let dir = args
        .out
        .clone()
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let output = run(&config, seed)?;
    let info = RunInfo {
        campaign: config.campaign.name().to_string(),
        title: config.title.clone(),
        config_text: text,
        seed,
        threads: rayon::current_num_threads(),
        wall_clock_s: start.elapsed().as_secs_f64(),
        emit_plot_recipe: args.emit_plot_script,
    };
    let (path, manifest) = write_outputs(&dir, &output, &info)?;
    Ok(json!({
        "status": "ok",
        "campaign": manifest.campaign,
        "manifest": path.display().to_string(),
        "files": manifest.files.len(),
    }))
}

fn presets(action: &PresetAction) -> Result<(), CliError> {
    match action {
        PresetAction::List => {
            for p in PRESETS {
                println!("{:<8} {}", p.name, p.citation());
            }
        }
        PresetAction::Show { name } => print!("{}", preset(name)?.toml),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => execute(Campaign::Simulate, a).map(Some),
        Command::Calibrate(a) => execute(Campaign::Calibrate, a).map(Some),
        Command::Tomography(a) => execute(Campaign::Tomography, a).map(Some),
        Command::Sweep(a) => execute(Campaign::Sweep, a).map(Some),
        Command::DeviceReport(a) => execute(Campaign::DeviceReport, a).map(Some),
        Command::Presets { action } => presets(action).map(|()| None),
    };
    match result {
        Ok(Some(summary)) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", serde_json::to_string(&err.record()).expect("error record serializes"));
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
