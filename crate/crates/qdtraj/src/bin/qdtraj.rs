//! Command-line front end: single runs, the full strategy-by-action-space
//! matrix, and the brute-force grasp oracle grid.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qdtraj::harness::{
    self, cli_matrix, cli_oracle_grid, cli_run, CliFailure, ExperimentSpec, ObjectSource,
    OrientationSet,
};
use qdtraj::qd::{ActionSpace, GraspStrategy};

#[derive(Parser)]
#[command(
    name = "qdtraj",
    about = "Quality-diversity generation of trajectory primitives for articulated objects",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the optimizer once per seed and persist the archives.
    Run(CommonArgs),
    /// Run all nine grasp-strategy x action-space combinations per seed.
    Matrix(CommonArgs),
    /// Exhaustively map grasp-successful cells on a regular pose grid.
    OracleGrid(OracleGridArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON experiment spec; any flag set on the command line wins.
    #[arg(long)]
    config: Option<PathBuf>,
    /// URDF file describing the articulated object.
    #[arg(long, conflicts_with = "builtin_box")]
    object: Option<PathBuf>,
    /// Use the builtin articulated box (door hinge + sliding tray).
    #[arg(long)]
    builtin_box: bool,
    /// Movable joint to actuate, by name or index.
    #[arg(long)]
    joint: Option<String>,
    /// Initial joint value (radians for revolute, meters for prismatic).
    #[arg(long, conflicts_with = "s_init_deg")]
    s_init: Option<f64>,
    /// Target joint value.
    #[arg(long, conflicts_with = "s_target_deg")]
    s_target: Option<f64>,
    /// Initial joint value in degrees.
    #[arg(long)]
    s_init_deg: Option<f64>,
    /// Target joint value in degrees.
    #[arg(long)]
    s_target_deg: Option<f64>,
    /// Grasp selection strategy: explore|success|random.
    #[arg(long)]
    strategy: Option<GraspStrategy>,
    /// Action space: adaptive|where2act|vatmart.
    #[arg(long)]
    action_space: Option<ActionSpace>,
    #[arg(long)]
    generations: Option<usize>,
    /// Population size per generation.
    #[arg(long)]
    pop: Option<usize>,
    /// Single seed (shorthand for --seeds with one value).
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated list of seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Behavioral grid cell size, meters.
    #[arg(long)]
    cell_size: Option<f64>,
    /// Success fitness threshold.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct OracleGridArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Position grid step, meters (must be >= cell size).
    #[arg(long, default_value_t = 0.02)]
    grid_step: f64,
    /// Orientation set: rotations24|axis6.
    #[arg(long, default_value = "rotations24")]
    orientations: OrientationSet,
}

fn build_spec(args: &CommonArgs) -> Result<ExperimentSpec, CliFailure> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliFailure {
                code: harness::EXIT_CONFIG,
                message: format!("cannot read config {}: {e}", path.display()),
            })?;
            serde_json::from_str(&text).map_err(|e| CliFailure {
                code: harness::EXIT_CONFIG,
                message: format!("invalid config {}: {e}", path.display()),
            })?
        }
        None => ExperimentSpec::default(),
    };
    if let Some(path) = &args.object {
        spec.object = ObjectSource::Urdf { path: path.clone() };
    }
    if args.builtin_box {
        spec.object = ObjectSource::builtin_box();
    }
    if let Some(joint) = &args.joint {
        spec.joint = joint.clone();
    }
    if let Some(v) = args.s_init {
        spec.s_init = v;
    }
    if let Some(v) = args.s_init_deg {
        spec.s_init = v.to_radians();
    }
    if let Some(v) = args.s_target {
        spec.s_target = v;
    }
    if let Some(v) = args.s_target_deg {
        spec.s_target = v.to_radians();
    }
    if let Some(v) = args.strategy {
        spec.qd.strategy = v;
    }
    if let Some(v) = args.action_space {
        spec.qd.action_space = v;
    }
    if let Some(v) = args.generations {
        spec.qd.generations = v;
    }
    if let Some(v) = args.pop {
        spec.qd.population = v;
    }
    if let Some(v) = args.seed {
        spec.seeds = vec![v];
    }
    if let Some(v) = &args.seeds {
        spec.seeds = v.clone();
    }
    if let Some(v) = &args.out {
        spec.output_dir = v.clone();
    }
    if let Some(v) = args.cell_size {
        spec.interaction.cell_size = v;
    }
    if let Some(v) = args.threshold {
        spec.qd.success_threshold = v;
    }
    Ok(spec)
}

fn dispatch(cli: Cli) -> Result<(), CliFailure> {
    match cli.command {
        Command::Run(args) => {
            let spec = build_spec(&args)?;
            cli_run(&spec)?;
            println!("wrote {} run(s) under {}", spec.seeds.len(), spec.output_dir.display());
            Ok(())
        }
        Command::Matrix(args) => {
            let spec = build_spec(&args)?;
            let table = cli_matrix(&spec)?;
            print!("{table}");
            println!("report: {}", spec.output_dir.join("matrix_report.json").display());
            Ok(())
        }
        Command::OracleGrid(args) => {
            let spec = build_spec(&args.common)?;
            let cells = cli_oracle_grid(&spec, args.grid_step, args.orientations)?;
            println!(
                "{} grasp-successful cell(s) -> {}",
                cells.len(),
                spec.output_dir.join("oracle_cells.json").display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    if let Err(e) = harness::configure_workers_from_env() {
        eprintln!("error: {e}");
        return ExitCode::from(harness::EXIT_CONFIG as u8);
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
