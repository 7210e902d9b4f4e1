use std::path::PathBuf;
use std::process::ExitCode;

use certds_cli::commands::{self, ConfigOverrides, LearnArgs, VerifyArgs};
use certds_cli::error::CliError;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "certds",
    version,
    about = "Learn stable polynomial dynamical systems with barrier certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn f, V and (with obstacles) B from a trajectory CSV.
    Learn {
        /// Trajectory CSV (traj_id,t,x1..xn[,v1..vn]).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Obstacle spec JSON, repeatable.
        #[arg(long = "obstacle")]
        obstacles: Vec<PathBuf>,
        /// Run configuration JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Replay the inputs and configuration recorded in a manifest.
        #[arg(long, conflicts_with_all = ["data", "obstacles", "config"])]
        manifest: Option<PathBuf>,
        /// Defaults to $CERTDS_OUTPUT_DIR, then ./certds-out.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        deg_f: Option<usize>,
        #[arg(long)]
        deg_v: Option<usize>,
        #[arg(long)]
        deg_b: Option<usize>,
        #[arg(long)]
        max_rounds: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Samples kept per demonstration.
        #[arg(long)]
        subsample: Option<usize>,
    },
    /// MSE, endpoint errors and barrier margins of a result on a dataset.
    Eval {
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Metrics JSON path; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Re-verify certificates, falsify by sampling and run rollouts.
    Verify {
        #[arg(long)]
        result: PathBuf,
        /// Sets file written by `learn`.
        #[arg(long)]
        sets: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        rollouts: usize,
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
        #[arg(long, default_value_t = certds::dynsim::DEFAULT_DT)]
        dt: f64,
        #[arg(long, default_value_t = 1.0)]
        domain_radius: f64,
        /// Report JSON path; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Grid of f, V and B values for plotting (planar results only).
    ExportField {
        #[arg(long)]
        result: PathBuf,
        /// lo1,hi1,lo2,hi2 in normalized coordinates.
        #[arg(long = "box", allow_hyphen_values = true, default_value = "-1,1,-1,1")]
        bounds: String,
        /// Grid points per axis.
        #[arg(long, default_value_t = 50)]
        resolution: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Roll out the learned field from a start point (normalized frame).
    Simulate {
        #[arg(long)]
        result: PathBuf,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        start: String,
        #[arg(long, default_value_t = certds::dynsim::DEFAULT_DT)]
        dt: f64,
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit polynomial obstacle specs covering dilated polygons.
    FitObstacle {
        /// JSON with `vertices` or `polygons`.
        #[arg(long)]
        polygon: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        margin: f64,
        #[arg(long, default_value_t = 4)]
        degree: usize,
        /// Validation grid density.
        #[arg(long, default_value_t = 60)]
        grid: usize,
        /// Writes obstacle_<i>.json here; defaults as for `learn`.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("`{v}` is not a number")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Learn {
            data,
            obstacles,
            config,
            manifest,
            output_dir,
            deg_f,
            deg_v,
            deg_b,
            max_rounds,
            seed,
            subsample,
        } => {
            let output_dir = output_dir.unwrap_or_else(commands::default_output_dir);
            let out = match (manifest, data) {
                (Some(m), _) => commands::replay(&m, &output_dir)?,
                (None, Some(data)) => commands::learn(&LearnArgs {
                    data,
                    obstacles,
                    config,
                    overrides: ConfigOverrides {
                        deg_f,
                        deg_v,
                        deg_b,
                        max_rounds,
                        seed,
                        subsample,
                    },
                    output_dir: output_dir.clone(),
                })?,
                (None, None) => return Err(CliError::Usage("either --data or --manifest is required".into())),
            };
            print!("{}", out.summary);
            println!("wrote {}", output_dir.display());
            Ok(())
        }
        Command::Eval { result, data, output } => {
            let metrics = commands::eval(&result, &data)?;
            commands::emit(output.as_deref(), &commands::to_json(&metrics))
        }
        Command::Verify {
            result,
            sets,
            samples,
            seed,
            rollouts,
            horizon,
            dt,
            domain_radius,
            output,
        } => {
            let report = commands::verify(&VerifyArgs {
                result,
                sets,
                samples,
                seed,
                rollouts,
                horizon,
                dt,
                domain_radius,
            })?;
            commands::emit(output.as_deref(), &commands::to_json(&report))?;
            if report.passed {
                Ok(())
            } else {
                Err(CliError::Verification(commands::failure_summary(&report)))
            }
        }
        Command::ExportField {
            result,
            bounds,
            resolution,
            output,
        } => {
            let b: [f64; 4] = parse_list(&bounds)?
                .try_into()
                .map_err(|_| CliError::Usage("--box takes four numbers".into()))?;
            commands::emit(output.as_deref(), &commands::export_field(&result, b, resolution)?)
        }
        Command::Simulate {
            result,
            start,
            dt,
            horizon,
            output,
        } => commands::emit(
            output.as_deref(),
            &commands::simulate(&result, &parse_list(&start)?, dt, horizon)?,
        ),
        Command::FitObstacle {
            polygon,
            margin,
            degree,
            grid,
            output_dir,
        } => {
            let specs = commands::fit_obstacle(&polygon, margin, degree, grid)?;
            let dir = output_dir.unwrap_or_else(commands::default_output_dir);
            for (i, spec) in specs.iter().enumerate() {
                let path = dir.join(format!("obstacle_{i}.json"));
                commands::write_file(&path, commands::to_json(spec).as_bytes())?;
                if let certds_cli::schema::ObstacleSpec::Semialgebraic { fit: Some(f), .. } = spec {
                    println!(
                        "{}: offset {:.3e}, worst validation margin {:.3e}",
                        path.display(),
                        f.offset,
                        f.worst_margin
                    );
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
