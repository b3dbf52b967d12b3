//! `assistlab`: train policies, evaluate and replay them, run the paired
//! statistics, build result tables and host live sessions.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use assistlab_core::avatar::BiomechMode;
use assistlab_core::config::LabConfig;
use assistlab_core::envs::Task;
use assistlab_core::robot::RobotProfileId;
use assistlab_eval::questionnaire::read_column;
use assistlab_eval::record::read_records;
use assistlab_eval::{
    evaluate, make_table, replay, wilcoxon_signed_rank, wilcoxon_vs_constant, write_records, Alternative, EvalError,
    EvalSpec, Layout, MetricsRow, PolicyCheck, PolicyMode,
};
use assistlab_learn::{train, PolicyNet, TrainConfig};
use assistlab_server::{AppState, PolicyRegistry, ServerConfig};
use clap::{Parser, Subcommand, ValueEnum};

const EXIT_INVALID: u8 = 2;
const EXIT_MISMATCH: u8 = 3;

#[derive(Parser)]
#[command(name = "assistlab", version, about = "Assistive robotics lab: training, evaluation and live sessions")]
struct Cli {
    /// Configuration directory with env.toml and robots/*.toml (defaults to the shipped configuration).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AltArg {
    TwoSided,
    Greater,
    Less,
}

impl From<AltArg> for Alternative {
    fn from(a: AltArg) -> Self {
        match a {
            AltArg::TwoSided => Alternative::TwoSided,
            AltArg::Greater => Alternative::Greater,
            AltArg::Less => Alternative::Less,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy with PPO on static sampled humans.
    Train {
        #[arg(long)]
        task: Task,
        #[arg(long)]
        robot: RobotProfileId,
        #[arg(long, default_value = "fixed")]
        biomech: BiomechMode,
        /// Total episodes to collect.
        #[arg(long, default_value_t = 500)]
        rollouts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
        /// Episodes per PPO update.
        #[arg(long)]
        rollouts_per_iteration: Option<usize>,
        /// Write the learning curve as CSV.
        #[arg(long)]
        curve: Option<PathBuf>,
        /// Save a checkpoint next to the output every this many iterations.
        #[arg(long, default_value_t = 0)]
        checkpoint_every: usize,
    },
    /// Evaluate a policy's mean action over seeded episodes.
    Eval {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 100)]
        episodes: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Metrics CSV (one row).
        #[arg(long)]
        report: PathBuf,
        /// Episode records as JSON lines.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Human population to evaluate on (defaults to the training population).
        #[arg(long)]
        biomech: Option<BiomechMode>,
        /// Policy id written to the report (defaults to the file stem).
        #[arg(long)]
        id: Option<String>,
    },
    /// Re-simulate recorded episodes and report the first divergence.
    Replay {
        file: PathBuf,
        /// Also check every recorded action against this policy.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Wilcoxon signed-rank test on paired CSV columns.
    Analyze {
        #[arg(long)]
        a: PathBuf,
        #[arg(long, required_unless_present = "neutral", conflicts_with = "neutral")]
        b: Option<PathBuf>,
        /// Column holding the paired values in both files.
        #[arg(long)]
        paired_col: String,
        /// Test `a` against this constant instead of a second file.
        #[arg(long)]
        neutral: Option<f64>,
        /// Shorthand for `--alternative greater` (a tends to exceed b).
        #[arg(long, conflicts_with = "alternative")]
        one_sided: bool,
        #[arg(long, value_enum, default_value = "two-sided")]
        alternative: AltArg,
    },
    /// Arrange metrics CSVs from a directory into a results table.
    Table {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "original-vs-revised")]
        layout: Layout,
        /// Also write the table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Host live sessions over WebSocket.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        policies: PathBuf,
        /// Directory for episode records and questionnaires.
        #[arg(long)]
        record: Option<PathBuf>,
        /// Static UI bundle served at `/`.
        #[arg(long)]
        ui: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        tick_ms: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let mismatch = e.chain().any(|c| {
                matches!(
                    c.downcast_ref::<EvalError>(),
                    Some(EvalError::ConfigHashMismatch { .. } | EvalError::ObsDimMismatch { .. })
                )
            });
            ExitCode::from(if mismatch { EXIT_MISMATCH } else { EXIT_INVALID })
        }
    }
}

fn load_lab(dir: Option<&Path>) -> Result<Arc<LabConfig>> {
    Ok(Arc::new(match dir {
        Some(d) => LabConfig::load_dir(d).with_context(|| format!("loading configuration from {}", d.display()))?,
        None => LabConfig::shipped(),
    }))
}

fn load_policy(path: &Path) -> Result<PolicyNet> {
    PolicyNet::load(path).with_context(|| format!("loading policy {}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("policy").to_owned()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn run(cli: Cli) -> Result<u8> {
    let lab = load_lab(cli.config.as_deref())?;
    match cli.command {
        Command::Train { task, robot, biomech, rollouts, seed, output, rollouts_per_iteration, curve, checkpoint_every } => {
            let mut cfg = TrainConfig::desk(task, robot, biomech, seed);
            cfg.total_rollouts = rollouts;
            if let Some(n) = rollouts_per_iteration {
                cfg.rollouts_per_iteration = n;
            }
            cfg.checkpoint_every = checkpoint_every;
            let ckpt_dir = output.parent().map(Path::to_path_buf).unwrap_or_default();
            let out = train(Arc::clone(&lab), &cfg, Some(&ckpt_dir))?;
            out.policy.save(&output)?;
            if let Some(path) = curve {
                let mut w = csv::Writer::from_writer(create(&path)?);
                w.write_record(["iteration", "rollouts", "mean_reward", "success_rate", "actor_loss", "critic_loss"])?;
                for p in &out.curve {
                    w.write_record(&[
                        p.iteration.to_string(),
                        p.rollouts.to_string(),
                        p.mean_reward.to_string(),
                        p.success_rate.to_string(),
                        p.loss.actor.to_string(),
                        p.loss.critic.to_string(),
                    ])?;
                }
                w.flush()?;
            }
            if let Some(last) = out.curve.last() {
                println!(
                    "trained {task}/{robot} ({biomech}) for {} rollouts: last mean reward {:.2}, success {:.0}%",
                    last.rollouts,
                    last.mean_reward,
                    100.0 * last.success_rate
                );
            }
            println!("wrote {}", output.display());
            Ok(0)
        }
        Command::Eval { policy, episodes, seed, report, records, biomech, id } => {
            let net = load_policy(&policy)?;
            let id = id.unwrap_or_else(|| stem(&policy));
            let mut spec = EvalSpec::for_policy(&net, &id, episodes, seed);
            if let Some(b) = biomech {
                spec.biomech = b;
            }
            let (row, recs) = evaluate(&net, &lab, &spec)?;
            MetricsRow::write_csv(std::slice::from_ref(&row), create(&report)?)?;
            if let Some(path) = records {
                write_records(&recs, create(&path)?)?;
            }
            println!(
                "{id}: {} {}/{} on {} humans, mean reward {:.3}, success {}/{} ({:.1}%)",
                row.policy_mode,
                row.task,
                row.robot,
                row.biomech,
                row.mean_reward,
                row.successes,
                row.episodes,
                100.0 * row.success_rate
            );
            Ok(0)
        }
        Command::Replay { file, policy } => {
            let records = read_records(open(&file)?).with_context(|| format!("reading {}", file.display()))?;
            let net = policy.as_deref().map(load_policy).transpose()?;
            let id = policy.as_deref().map(stem);
            let mut diverged = 0;
            for r in &records {
                let check = match (&net, &id) {
                    (Some(n), Some(id)) => Some(PolicyCheck {
                        policy: n,
                        id,
                        mode: PolicyMode::of_training(n.biomech),
                    }),
                    _ => None,
                };
                let rep = replay(r, &lab, check.as_ref())?;
                match &rep.divergence {
                    None => println!("episode {}: ok ({} steps)", r.header.episode, rep.steps),
                    Some(d) => {
                        diverged += 1;
                        let at = d.step.map(|s| format!("step {s}")).unwrap_or_else(|| "header/footer".into());
                        println!(
                            "episode {}: DIVERGED at {at}, field {}: recorded {} replayed {}",
                            r.header.episode, d.field, d.recorded, d.replayed
                        );
                    }
                }
            }
            println!("{} of {} episodes replayed cleanly", records.len() - diverged, records.len());
            Ok(if diverged > 0 { EXIT_MISMATCH } else { 0 })
        }
        Command::Analyze { a, b, paired_col, neutral, one_sided, alternative } => {
            let alt = if one_sided { Alternative::Greater } else { alternative.into() };
            let xa = read_column(open(&a)?, &paired_col).with_context(|| format!("reading {}", a.display()))?;
            let result = match (b, neutral) {
                (Some(b), None) => {
                    let xb = read_column(open(&b)?, &paired_col).with_context(|| format!("reading {}", b.display()))?;
                    wilcoxon_signed_rank(&xa, &xb, alt)?
                }
                (None, Some(c)) => wilcoxon_vs_constant(&xa, c, alt)?,
                _ => bail!("give either --b or --neutral"),
            };
            println!("{}", serde_json::to_string_pretty(&result)?);
            Ok(0)
        }
        Command::Table { input, layout, out } => {
            let mut rows = Vec::new();
            let mut paths: Vec<PathBuf> = std::fs::read_dir(&input)
                .with_context(|| format!("listing {}", input.display()))?
                .map(|e| e.map(|e| e.path()))
                .collect::<Result<_, _>>()?;
            paths.sort();
            for path in paths.iter().filter(|p| p.extension().is_some_and(|e| e == "csv")) {
                rows.extend(MetricsRow::read_csv(open(path)?).with_context(|| format!("reading {}", path.display()))?);
            }
            let table = make_table(&rows, layout)?;
            print!("{table}");
            if let Some(path) = out {
                table.write_csv(create(&path)?)?;
            }
            Ok(0)
        }
        Command::Serve { port, policies, record, ui, tick_ms, seed } => {
            let registry = PolicyRegistry::load_dir(&policies)?;
            if registry.is_empty() {
                bail!("no policies found in {}", policies.display());
            }
            if let Some(dir) = &record {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            let cfg = ServerConfig { tick: Duration::from_millis(tick_ms.max(1)), seed, record_dir: record, ui_dir: ui };
            let state = AppState::new(lab, registry, cfg);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
                println!("serving on http://{} (WebSocket at /session)", listener.local_addr()?);
                assistlab_server::serve(listener, state).await
            })?;
            Ok(0)
        }
    }
}
