use clap::{Args, Parser, Subcommand};
use regrasp::datagen::CollectPolicy;
use regrasp::harness::{self, HarnessConfig, Manifest, NamedCheckpoint};
use regrasp::model::Variant;
use regrasp::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "regrasp", version, about = "Visuo-tactile regrasping experiments on a grasping simulator")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON configuration; every section is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Collect trials into a JSON-lines dataset.
    Collect {
        #[arg(long)]
        n_trials: Option<usize>,
        /// Object set name (train, easy, hard) or library file.
        #[arg(long)]
        objects: Option<String>,
        /// Choose actions with this checkpoint's regrasp search instead of at random.
        #[arg(long)]
        on_policy: Option<PathBuf>,
    },
    /// Train a model on one or more datasets.
    Train {
        #[arg(long = "dataset", required = true)]
        datasets: Vec<PathBuf>,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Platt-scale a checkpoint on a validation dataset.
    Calibrate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        validation: Option<PathBuf>,
    },
    /// Object-partitioned K-fold table for the model variants.
    EvalModel {
        #[arg(long = "dataset", required = true)]
        datasets: Vec<PathBuf>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Closed-loop evaluation of policies and baselines.
    EvalPolicy {
        #[arg(long, default_value = "hard")]
        objects: String,
        /// `name=path` or a path; repeatable.
        #[arg(long = "checkpoint")]
        checkpoints: Vec<String>,
        #[arg(long)]
        no_baselines: bool,
        /// Also run the simulator-oracle policy.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Max-success versus min-force objectives on one object.
    EvalMinForce {
        #[arg(long)]
        checkpoint: String,
        #[arg(long, default_value = "easy")]
        objects: String,
        #[arg(long)]
        object: String,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Predicted success versus grip force for sampled contact states.
    AnalyzeForceSweep {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        objects: Option<String>,
    },
    /// Predicted success versus vertical motion for sampled contact states.
    AnalyzeHeightSweep {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        objects: Option<String>,
    },
    /// Histograms of actions in successful episodes.
    ActionHist {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        method: Option<String>,
    },
    /// Re-run one traced episode and check it reproduces exactly.
    Replay {
        episode_id: String,
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        objects: Option<String>,
    },
}

fn load_config(g: &Global) -> Result<HarnessConfig, Error> {
    let cfg = match &g.config {
        Some(p) => HarnessConfig::load(p)?,
        None => HarnessConfig::default(),
    };
    Ok(match g.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn run(cli: Cli) -> Result<Manifest, Error> {
    let mut cfg = load_config(&cli.global)?;
    let out: &Path = &cli.global.out;
    match cli.command {
        Command::Collect {
            n_trials,
            objects,
            on_policy,
        } => {
            if let Some(n) = n_trials {
                cfg.collect.n_trials = n;
            }
            if let Some(o) = objects {
                cfg.collect.objects = o;
            }
            if let Some(checkpoint) = on_policy {
                cfg.collect.policy = CollectPolicy::OnPolicy { checkpoint };
            }
            harness::cmd_collect(&cfg.collect, &cfg.eval.search, out)
        }
        Command::Train {
            datasets,
            variant,
            iterations,
        } => {
            if let Some(v) = variant {
                cfg.model.variant = Variant::parse(&v)?;
            }
            if let Some(n) = iterations {
                cfg.schedule = regrasp::model::TrainSchedule::scaled(n, cfg.schedule.seed);
            }
            harness::cmd_train(&datasets, &cfg.model, &cfg.schedule, out)
        }
        Command::Calibrate { checkpoint, validation } => harness::cmd_calibrate(&checkpoint, validation.as_deref(), out),
        Command::EvalModel { datasets, iterations } => {
            if let Some(n) = iterations {
                cfg.schedule = regrasp::model::TrainSchedule::scaled(n, cfg.schedule.seed);
            }
            harness::cmd_eval_model(&datasets, &cfg, out)
        }
        Command::EvalPolicy {
            objects,
            checkpoints,
            no_baselines,
            oracle,
            episodes,
        } => {
            let cks = checkpoints.iter().map(|c| c.parse()).collect::<Result<Vec<NamedCheckpoint>, _>>()?;
            if let Some(n) = episodes {
                cfg.eval.n_episodes = n;
            }
            harness::cmd_eval_policy(&objects, &cks, !no_baselines, oracle, &cfg.eval, out)
        }
        Command::EvalMinForce {
            checkpoint,
            objects,
            object,
            episodes,
        } => {
            cfg.eval.n_episodes = episodes.unwrap_or(100);
            harness::cmd_eval_min_force(&checkpoint.parse()?, &objects, &object, &cfg.eval, out)
        }
        Command::AnalyzeForceSweep { checkpoint, objects } => {
            if let Some(o) = objects {
                cfg.probe.objects = o;
            }
            harness::cmd_force_sweep(&checkpoint, &cfg.probe, out)
        }
        Command::AnalyzeHeightSweep { checkpoint, objects } => {
            if let Some(o) = objects {
                cfg.probe.objects = o;
            }
            harness::cmd_height_sweep(&checkpoint, &cfg.probe, out)
        }
        Command::ActionHist { traces, method } => harness::cmd_action_hist(&traces, method.as_deref(), out),
        Command::Replay {
            episode_id,
            traces,
            checkpoint,
            objects,
        } => harness::cmd_replay(&traces, &episode_id, checkpoint.as_deref(), objects.as_deref(), out),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(manifest) => {
            println!("{}", serde_json::to_string_pretty(&manifest).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let err = serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } });
            eprintln!("{err}");
            ExitCode::FAILURE
        }
    }
}
