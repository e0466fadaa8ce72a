//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input (bad flags, configs, ids, files),
//! 2 runtime failure (I/O, diverged training).

pub mod plot;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::diversity::{run_mmpd, DiversitySchedule, KnownPolicy, ScheduleEntry};
use crate::error::{Error, Result};
use crate::learner::Skill;
use crate::metrics::compare_policies;
use crate::rollout::{greedy_logs, summarize, EvalReport};
use crate::store::{
    append_trajectories, load_experiment_config, read_trajectories, write_atomic, ExperimentConfig,
    Registry, CONFIG_FILE,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub const BUILD_ID: &str = concat!(env!("CARGO_PKG_VERSION"), "+", env!("MMPD_GIT_REV"));

#[derive(Debug, Parser)]
#[command(name = "mmpd", version = BUILD_ID, about = "Train and compare diverse cooperative policies")]
pub struct Cli {
    /// Experiment config (JSON). Defaults to <registry>/config.json, then built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Experiment directory holding the registry and all outputs.
    #[arg(long, global = true, default_value = "runs")]
    pub registry: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Overrides the number of evaluation or comparison episodes.
    #[arg(long, global = true)]
    pub episodes: Option<usize>,
    /// Overrides the environment-step budget per trained policy.
    #[arg(long, global = true)]
    pub steps: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SkillArg {
    Gun,
    Bomb,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the unrestricted baseline joint policy.
    TrainBase {
        #[arg(long, default_value = "base")]
        id: String,
    },
    /// Train a baseline that may use only one weapon.
    TrainSkill {
        skill: SkillArg,
        /// Defaults to the skill name.
        #[arg(long)]
        id: Option<String>,
    },
    /// Run a diversity schedule (JSON list of entries); uses the config's schedule if omitted.
    Diversify { schedule: Option<PathBuf> },
    /// Greedy evaluation; writes <id>.traj.jsonl.
    Eval { id: String },
    /// Compare two policies; writes compare/<a>__<b>.json and .csv.
    Compare { a: String, b: String },
    /// Trajectory figure of one policy or a pair for a logged evaluation episode.
    Plot {
        a: String,
        b: Option<String>,
        #[arg(long, default_value_t = 0)]
        episode: usize,
    },
    /// Print the full default config.
    DumpDefaults,
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_INVALID,
            };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::Training(_) => EXIT_RUNTIME,
        Error::Config(_)
        | Error::Usage(_)
        | Error::Missing(_)
        | Error::Parse { .. }
        | Error::Version { .. } => EXIT_INVALID,
    }
}

/// Effective config: explicit file, else the experiment's saved config, else defaults;
/// then command-line overrides.
pub fn effective_config(cli: &Cli) -> Result<ExperimentConfig> {
    let saved = cli.registry.join(CONFIG_FILE);
    let mut cfg = match &cli.config {
        Some(p) => load_experiment_config(p)?,
        None if saved.exists() => load_experiment_config(&saved)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.steps {
        cfg.train_steps = s;
    }
    if let Some(n) = cli.episodes {
        cfg.eval_episodes = n;
        cfg.compare.episodes = n;
    }
    cfg.compare.seed = cli.seed;
    cfg.validate()?;
    Ok(cfg)
}

fn print_json<T: Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("serializable")
    );
}

fn execute(cli: &Cli) -> Result<()> {
    if let Command::DumpDefaults = cli.command {
        println!("{}", ExperimentConfig::default().to_json());
        return Ok(());
    }
    let cfg = effective_config(cli)?;
    log::info!(
        "mmpd {BUILD_ID} seed {} config {} registry {}",
        cli.seed,
        cfg.hash(),
        cli.registry.display()
    );
    match &cli.command {
        Command::DumpDefaults => unreachable!(),
        Command::TrainBase { id } => {
            let entry = ScheduleEntry {
                id: Some(id.clone()),
                seed: Some(cli.seed),
                ..ScheduleEntry::default()
            };
            train(cli, &cfg, DiversitySchedule(vec![entry]))
        }
        Command::TrainSkill { skill, id } => {
            let (skill, name) = match skill {
                SkillArg::Gun => (Skill::GunOnly, "gun"),
                SkillArg::Bomb => (Skill::BombOnly, "bomb"),
            };
            let entry = ScheduleEntry {
                id: Some(id.clone().unwrap_or_else(|| name.into())),
                skill,
                seed: Some(cli.seed),
                ..ScheduleEntry::default()
            };
            train(cli, &cfg, DiversitySchedule(vec![entry]))
        }
        Command::Diversify { schedule } => {
            let schedule = match schedule {
                Some(p) => load_schedule(p)?,
                None => cfg.schedule.clone(),
            };
            train(cli, &cfg, schedule)
        }
        Command::Eval { id } => {
            let registry = Registry::open(&cli.registry)?;
            let report = eval(&registry, &cfg, id, cli.seed)?;
            print_json(&report);
            Ok(())
        }
        Command::Compare { a, b } => {
            let registry = Registry::open(&cli.registry)?;
            let pa = registry.load_policy(a)?;
            let pb = if a == b {
                pa.clone()
            } else {
                registry.load_policy(b)?
            };
            let report = compare_policies(&pa, &pb, &cfg.arena, &cfg.compare)?;
            let (json, csv) = registry.save_comparison(&report)?;
            log::info!("wrote {} and {}", json.display(), csv.display());
            print_json(&report);
            Ok(())
        }
        Command::Plot { a, b, episode } => {
            let registry = Registry::open(&cli.registry)?;
            let (csv, svg) = emit_plot_data(&registry, &cfg, a, b.as_deref(), *episode)?;
            println!("{}\n{}", csv.display(), svg.display());
            Ok(())
        }
    }
}

fn load_schedule(path: &Path) -> Result<DiversitySchedule> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        offset: text
            .split_inclusive('\n')
            .take(e.line().saturating_sub(1))
            .map(str::len)
            .sum::<usize>()
            + e.column().saturating_sub(1),
        message: e.to_string(),
    })
}

fn train(cli: &Cli, cfg: &ExperimentConfig, schedule: DiversitySchedule) -> Result<()> {
    let mut registry = Registry::open(&cli.registry)?;
    let policies = run_mmpd(&schedule, cfg, cli.seed, Some(&mut registry))?;
    write_atomic(&cli.registry.join(CONFIG_FILE), cfg.to_json().as_bytes())?;
    let summary: Vec<PolicySummary> = policies.iter().map(PolicySummary::from).collect();
    print_json(&summary);
    Ok(())
}

#[derive(Serialize)]
struct PolicySummary<'a> {
    id: &'a str,
    win_rate: Option<f64>,
    min_disagreement: Vec<Option<f64>>,
    demonstrations: usize,
}

impl<'a> From<&'a KnownPolicy> for PolicySummary<'a> {
    fn from(p: &'a KnownPolicy) -> Self {
        Self {
            id: &p.id,
            win_rate: p.report.as_ref().map(|r| r.eval.win_rate),
            min_disagreement: p
                .report
                .as_ref()
                .map(|r| r.agents.iter().map(|k| r.min_disagreement(k)).collect())
                .unwrap_or_default(),
            demonstrations: p.demonstrations.len(),
        }
    }
}

/// Greedy evaluation of a registered policy; replaces `<id>.traj.jsonl`.
pub fn eval(
    registry: &Registry,
    cfg: &ExperimentConfig,
    id: &str,
    seed: u64,
) -> Result<EvalReport> {
    let params = registry.load_params(id)?;
    let logs = greedy_logs(&params, &cfg.arena, cfg.eval_episodes, seed)?;
    let path = registry.trajectory_path(id);
    if path.exists() {
        fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
    }
    append_trajectories(&logs, &path)?;
    Ok(summarize(&logs))
}

/// Writes `plots/<a>[__<b>]__ep<episode>.csv|.svg` from logged evaluation episodes.
pub fn emit_plot_data(
    registry: &Registry,
    cfg: &ExperimentConfig,
    a: &str,
    b: Option<&str>,
    episode: usize,
) -> Result<(PathBuf, PathBuf)> {
    let ids: Vec<&str> = std::iter::once(a).chain(b).collect();
    let mut logs = Vec::with_capacity(ids.len());
    for id in &ids {
        let path = registry.trajectory_path(id);
        if !path.exists() {
            return Err(Error::config(format!(
                "no trajectory logs for {id:?}; run `mmpd eval {id}` first"
            )));
        }
        let all = read_trajectories(&path)?;
        if episode >= all.len() {
            return Err(Error::config(format!(
                "episode {episode} not logged for {id:?}; available indices: 0..{}",
                all.len()
            )));
        }
        logs.push(all.into_iter().nth(episode).expect("index checked"));
    }
    let series: Vec<plot::PlotSeries<'_>> = ids
        .iter()
        .zip(&logs)
        .map(|(id, log)| plot::PlotSeries { policy: id, log })
        .collect();
    let stem = format!("{}__ep{episode}", ids.join("__"));
    let dir = registry.root().join("plots");
    let csv = dir.join(format!("{stem}.csv"));
    let svg = dir.join(format!("{stem}.svg"));
    write_atomic(&csv, plot::csv(&series).as_bytes())?;
    write_atomic(&svg, plot::svg(&cfg.arena, &series).as_bytes())?;
    Ok((csv, svg))
}
