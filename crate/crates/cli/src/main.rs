//! `epictrl`: scenario management, policy training, evaluation, and
//! experiment sweeps over the jurisdictional HIV intervention environment.
//!
//! Every subcommand writes a `manifest.json` run record into `--out-dir`
//! alongside its CSV and checkpoint outputs. Exit codes: 0 on success,
//! 2 on configuration or usage errors, 3 when a run aborts partway.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use epictrl_core::env::{ActionBounds, Mode, ACTION_WIDTH, OBSERVATION_WIDTH};
use epictrl_core::logging::{
    write_csv, COMPARISON_HEADER, COMPARISON_SUMMARY_HEADER, DIAGNOSTICS_HEADER, MIXING_HEADER,
    MIXING_SUMMARY_HEADER, REWARD_HEADER, TRAJECTORY_HEADER,
};
use epictrl_core::ppo::{PpoConfig, TrainError};
use epictrl_core::scenario::{
    california_template, desk_template, florida_template, ScenarioConfig,
};
use epictrl_core::trainer::{
    compare_modes, evaluate, load_checkpoint, mixing_study, train, EvaluationReport, TrainConfig,
};

#[derive(Parser)]
#[command(name = "epictrl", version, about = "Train and evaluate HIV intervention policies")]
struct Cli {
    /// Base RNG seed; multi-seed commands default to five consecutive
    /// seeds starting here.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Directory receiving the run manifest, CSVs, and checkpoints.
    #[arg(long, global = true, default_value = "epictrl-out")]
    out_dir: PathBuf,

    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scenario configuration management.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
    /// Train policies on a scenario and write checkpoints and reward logs.
    Train {
        /// Scenario configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Pooled single-agent control (sarl) or one learner per
        /// jurisdiction (marl).
        #[arg(long, value_parser = parse_mode, default_value = "marl")]
        mode: Mode,
        #[arg(long, default_value_t = 2000)]
        episodes: u32,
        /// Episodes gathered per policy update.
        #[arg(long, default_value_t = 10)]
        buffer_episodes: u32,
        /// Also write an intermediate checkpoint every N episodes.
        #[arg(long)]
        checkpoint_every: Option<u32>,
    },
    /// Roll out checkpointed policies and report incidence, cost, and reward.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Checkpoint directory holding manifest.json and parameter files.
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 1)]
        episodes: u32,
        /// Sample actions at the exploration schedule's final std instead
        /// of acting on policy means.
        #[arg(long)]
        stochastic: bool,
    },
    /// Train and evaluate both control modes across seeds, optionally on a
    /// scaled copy of the scenario.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Multiply every action bound by this factor in the scaled arm.
        #[arg(long, default_value_t = 1.0)]
        action_multiplier: f64,
        /// Multiply every budget row by this factor in the scaled arm.
        #[arg(long, default_value_t = 1.0)]
        budget_multiplier: f64,
        /// Comma-separated training seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long, default_value_t = 2000)]
        episodes: u32,
        #[arg(long, default_value_t = 10)]
        buffer_episodes: u32,
    },
    /// Train each jurisdiction in isolation (mixing disabled), then
    /// evaluate those policies under the true mixing matrix.
    MixingStudy {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated training seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long, default_value_t = 2000)]
        episodes: u32,
        #[arg(long, default_value_t = 10)]
        buffer_episodes: u32,
    },
}

#[derive(Subcommand)]
enum ConfigAction {
    /// Write a template scenario file.
    Init {
        /// Destination path for the scenario JSON.
        path: PathBuf,
        /// Which template to write.
        #[arg(long, value_enum, default_value_t = Template::Desk)]
        template: Template,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Template {
    /// Two stylized jurisdictions sized for fast desk experiments.
    Desk,
    /// Eight-jurisdiction skeleton with California-like structure.
    California,
    /// Eight-jurisdiction skeleton with Florida-like structure.
    Florida,
}

fn parse_mode(value: &str) -> Result<Mode, String> {
    match value {
        "sarl" => Ok(Mode::Sarl),
        "marl" => Ok(Mode::Marl),
        other => Err(format!("unknown mode '{other}' (expected sarl or marl)")),
    }
}

enum CliError {
    /// Configuration or usage problem; exit code 2.
    Usage(String),
    /// A structurally valid run that failed partway; exit code 3.
    Aborted(String),
}

impl From<epictrl_core::error::ConfigError> for CliError {
    fn from(e: epictrl_core::error::ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<epictrl_core::scenario::LoadError> for CliError {
    fn from(e: epictrl_core::scenario::LoadError) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// Configuration failures surfaced through training keep exit code 2;
/// anything else that stops a run maps to the aborted code.
fn train_error(e: TrainError) -> CliError {
    match e {
        TrainError::Config(inner) => CliError::Usage(inner.to_string()),
        other => CliError::Aborted(other.to_string()),
    }
}

fn io_aborted(e: std::io::Error) -> CliError {
    CliError::Aborted(e.to_string())
}

/// Run record written to `<out-dir>/manifest.json` for every subcommand.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    argv: Vec<String>,
    version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seeds: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
    scenarios: Vec<ScenarioStamp>,
    started_unix: u64,
    finished_unix: u64,
    /// Files written by this run, relative to the manifest's directory.
    outputs: Vec<String>,
}

/// Identifying summary of one scenario arm used by a run.
#[derive(Serialize)]
struct ScenarioStamp {
    label: String,
    config_hash: String,
    action_bounds: ActionBounds,
    total_annual_budget: f64,
    start_year: i32,
    horizon_years: u32,
    jurisdictions: usize,
}

impl ScenarioStamp {
    fn new(label: &str, scenario: &ScenarioConfig) -> Self {
        ScenarioStamp {
            label: label.to_string(),
            config_hash: scenario.config_hash(),
            action_bounds: scenario.action_bounds,
            total_annual_budget: scenario.total_annual_budget(),
            start_year: scenario.start_year,
            horizon_years: scenario.horizon_years,
            jurisdictions: scenario.jurisdictions.len(),
        }
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn write_manifest(out_dir: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(manifest)
        .expect("manifest serialization cannot fail");
    std::fs::write(out_dir.join("manifest.json"), text + "\n").map_err(io_aborted)
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Aborted(msg)) => {
            eprintln!("error: {msg}");
            3
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<(), CliError> {
    let started = unix_now();
    std::fs::create_dir_all(&cli.out_dir)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", cli.out_dir.display())))?;
    let argv: Vec<String> = std::env::args().collect();
    let base = ManifestBase {
        argv,
        started,
        out_dir: cli.out_dir.clone(),
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Config { action } => match action {
            ConfigAction::Init { path, template } => cmd_config_init(&base, &path, template),
        },
        Command::Train {
            config,
            mode,
            episodes,
            buffer_episodes,
            checkpoint_every,
        } => cmd_train(
            &base,
            &config,
            mode,
            episodes,
            buffer_episodes,
            checkpoint_every,
            cli.seed,
        ),
        Command::Evaluate {
            config,
            checkpoint,
            episodes,
            stochastic,
        } => cmd_evaluate(&base, &config, &checkpoint, episodes, stochastic, cli.seed),
        Command::Compare {
            config,
            action_multiplier,
            budget_multiplier,
            seeds,
            episodes,
            buffer_episodes,
        } => cmd_compare(
            &base,
            &config,
            action_multiplier,
            budget_multiplier,
            seed_list(seeds, cli.seed),
            episodes,
            buffer_episodes,
        ),
        Command::MixingStudy {
            config,
            seeds,
            episodes,
            buffer_episodes,
        } => cmd_mixing_study(
            &base,
            &config,
            seed_list(seeds, cli.seed),
            episodes,
            buffer_episodes,
        ),
    }
}

/// Shared context for assembling each subcommand's manifest.
struct ManifestBase {
    argv: Vec<String>,
    started: u64,
    out_dir: PathBuf,
    quiet: bool,
}

impl ManifestBase {
    fn manifest(&self, command: &str) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            argv: self.argv.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            seeds: None,
            config_path: None,
            config_hash: None,
            scenarios: Vec::new(),
            started_unix: self.started,
            finished_unix: 0,
            outputs: Vec::new(),
        }
    }

    fn note(&self, message: &str) {
        if !self.quiet {
            println!("{message}");
        }
    }
}

fn seed_list(seeds: Option<Vec<u64>>, base: u64) -> Vec<u64> {
    seeds.unwrap_or_else(|| (base..base + 5).collect())
}

fn cmd_config_init(base: &ManifestBase, path: &Path, template: Template) -> Result<(), CliError> {
    let scenario = match template {
        Template::Desk => desk_template(),
        Template::California => california_template(),
        Template::Florida => florida_template(),
    };
    scenario
        .save(path)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    base.note(&format!(
        "wrote {} template ({} jurisdictions) to {}",
        scenario.name,
        scenario.jurisdictions.len(),
        path.display()
    ));

    let mut manifest = base.manifest("config-init");
    manifest.config_path = Some(path.display().to_string());
    manifest.config_hash = Some(scenario.config_hash());
    manifest.scenarios.push(ScenarioStamp::new("template", &scenario));
    manifest.outputs.push(path.display().to_string());
    manifest.finished_unix = unix_now();
    write_manifest(&base.out_dir, &manifest)
}

fn cmd_train(
    base: &ManifestBase,
    config_path: &Path,
    mode: Mode,
    episodes: u32,
    buffer_episodes: u32,
    checkpoint_every: Option<u32>,
    seed: u64,
) -> Result<(), CliError> {
    let scenario = ScenarioConfig::load(config_path)?;
    let config = TrainConfig {
        mode,
        episodes,
        buffer_episodes,
        seed,
        ppo: PpoConfig::default(),
        checkpoint_every,
        eval_every: None,
    };
    let checkpoint_dir = base.out_dir.join("checkpoints");
    let artifacts =
        train(&config, &scenario, Some(&checkpoint_dir)).map_err(train_error)?;
    if artifacts.reward_history.is_empty() {
        return Err(CliError::Aborted(format!(
            "no episode completed: all {} attempts hit simulation failures",
            artifacts.aborted_episodes
        )));
    }

    let reward_rows = artifacts.reward_history.iter().map(|r| {
        format!("{},{},{}", r.episode, r.agent, r.reward)
    });
    write_csv(&base.out_dir.join("rewards.csv"), REWARD_HEADER, reward_rows)
        .map_err(io_aborted)?;
    let diag_rows = artifacts.diagnostics.iter().map(|d| {
        format!(
            "{},{},{},{},{},{},{}",
            d.update_index,
            d.agent,
            d.diagnostics.mean_ratio,
            d.diagnostics.clip_fraction,
            d.diagnostics.policy_loss,
            d.diagnostics.value_loss,
            d.diagnostics.mean_episode_reward
        )
    });
    write_csv(
        &base.out_dir.join("diagnostics.csv"),
        DIAGNOSTICS_HEADER,
        diag_rows,
    )
    .map_err(io_aborted)?;
    base.note(&format!(
        "trained {} episodes ({} updates, {} aborted) in {} mode",
        episodes,
        artifacts.updates,
        artifacts.aborted_episodes,
        mode.label()
    ));

    let mut manifest = base.manifest("train");
    manifest.seed = Some(seed);
    manifest.config_path = Some(config_path.display().to_string());
    manifest.config_hash = Some(scenario.config_hash());
    manifest.scenarios.push(ScenarioStamp::new("base", &scenario));
    manifest.outputs = vec![
        "rewards.csv".to_string(),
        "diagnostics.csv".to_string(),
        "checkpoints/final".to_string(),
    ];
    manifest.finished_unix = unix_now();
    write_manifest(&base.out_dir, &manifest)
}

fn cmd_evaluate(
    base: &ManifestBase,
    config_path: &Path,
    checkpoint: &Path,
    episodes: u32,
    stochastic: bool,
    seed: u64,
) -> Result<(), CliError> {
    let scenario = ScenarioConfig::load(config_path)?;
    let (checkpoint_manifest, policies) = load_checkpoint(checkpoint).map_err(train_error)?;

    // Reject shape mismatches before running anything.
    if checkpoint_manifest.observation_width != OBSERVATION_WIDTH {
        return Err(CliError::Usage(format!(
            "checkpoint observation width mismatch: expected {OBSERVATION_WIDTH}, found {}",
            checkpoint_manifest.observation_width
        )));
    }
    if checkpoint_manifest.action_width != ACTION_WIDTH {
        return Err(CliError::Usage(format!(
            "checkpoint action width mismatch: expected {ACTION_WIDTH}, found {}",
            checkpoint_manifest.action_width
        )));
    }
    for (i, policy) in policies.iter().enumerate() {
        let arch = policy.architecture();
        if arch.input != OBSERVATION_WIDTH || arch.output != ACTION_WIDTH {
            return Err(CliError::Usage(format!(
                "agent {i} network shape mismatch: expected {OBSERVATION_WIDTH}->{ACTION_WIDTH}, \
                 found {}->{}",
                arch.input, arch.output
            )));
        }
    }
    let mode = checkpoint_manifest.mode;
    let expected_agents = match mode {
        Mode::Sarl => 1,
        Mode::Marl => scenario.jurisdictions.len(),
    };
    if policies.len() != expected_agents {
        return Err(CliError::Usage(format!(
            "agent count mismatch: expected {expected_agents} for {} on {} jurisdictions, \
             found {}",
            mode.label(),
            scenario.jurisdictions.len(),
            policies.len()
        )));
    }

    let exploration = PpoConfig::default().exploration;
    let report = evaluate(
        &policies,
        &scenario,
        mode,
        episodes,
        !stochastic,
        seed,
        &exploration,
    )
    .map_err(train_error)?;

    let rows = report.rows.iter().map(|r| {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.episode,
            r.year,
            r.jurisdiction,
            r.risk_group,
            r.new_infections,
            r.cost,
            r.budget,
            r.reward,
            r.action_unaware,
            r.action_art,
            r.action_prep,
            r.saturated_unaware,
            r.saturated_art,
            r.saturated_prep
        )
    });
    write_csv(&base.out_dir.join("trajectory.csv"), TRAJECTORY_HEADER, rows)
        .map_err(io_aborted)?;

    let summary = EvaluationSummary::new(&report, mode, stochastic);
    let text = serde_json::to_string_pretty(&summary)
        .expect("summary serialization cannot fail");
    std::fs::write(base.out_dir.join("summary.json"), text + "\n").map_err(io_aborted)?;
    base.note(&format!(
        "evaluated {} episodes: incidence {:.1} -> {:.1} per year ({:+.1}%)",
        episodes, report.first_year_incidence, report.last_year_incidence, report.percent_change
    ));

    let mut manifest = base.manifest("evaluate");
    manifest.seed = Some(seed);
    manifest.config_path = Some(config_path.display().to_string());
    manifest.config_hash = Some(scenario.config_hash());
    manifest.scenarios.push(ScenarioStamp::new("base", &scenario));
    manifest.outputs = vec!["trajectory.csv".to_string(), "summary.json".to_string()];
    manifest.finished_unix = unix_now();
    write_manifest(&base.out_dir, &manifest)
}

#[derive(Serialize)]
struct EvaluationSummary {
    mode: String,
    episodes: u32,
    deterministic: bool,
    first_year_incidence: f64,
    last_year_incidence: f64,
    /// Change from the first to the last simulated year, in percent.
    percent_change: f64,
    mean_cumulative_incidence: f64,
    mean_cumulative_cost: f64,
    mean_cumulative_reward: Vec<f64>,
}

impl EvaluationSummary {
    fn new(report: &EvaluationReport, mode: Mode, stochastic: bool) -> Self {
        EvaluationSummary {
            mode: mode.label().to_string(),
            episodes: report.episodes,
            deterministic: !stochastic,
            first_year_incidence: report.first_year_incidence,
            last_year_incidence: report.last_year_incidence,
            percent_change: report.percent_change,
            mean_cumulative_incidence: report.mean_cumulative_incidence(),
            mean_cumulative_cost: report.mean_cumulative_cost(),
            mean_cumulative_reward: report.mean_cumulative_reward.clone(),
        }
    }
}

/// Collapses an evaluation's per-risk-group rows into one
/// (year, jurisdiction) row, summing infections; cost is stored once per
/// jurisdiction-year so the first row of each group triple carries it.
fn jurisdiction_year_rows(report: &EvaluationReport) -> Vec<(i32, String, f64, f64)> {
    report
        .rows
        .chunks_exact(3)
        .map(|chunk| {
            debug_assert_eq!(chunk[0].jurisdiction, chunk[2].jurisdiction);
            let incidence: f64 = chunk.iter().map(|r| r.new_infections).sum();
            (
                chunk[0].year,
                chunk[0].jurisdiction.clone(),
                incidence,
                chunk[0].cost,
            )
        })
        .collect()
}

fn cmd_compare(
    base: &ManifestBase,
    config_path: &Path,
    action_multiplier: f64,
    budget_multiplier: f64,
    seeds: Vec<u64>,
    episodes: u32,
    buffer_episodes: u32,
) -> Result<(), CliError> {
    if !(action_multiplier > 0.0) || !(budget_multiplier > 0.0) {
        return Err(CliError::Usage(
            "action and budget multipliers must be positive".to_string(),
        ));
    }
    let scenario = ScenarioConfig::load(config_path)?;
    let config = TrainConfig {
        episodes,
        buffer_episodes,
        ppo: PpoConfig::default(),
        ..TrainConfig::default()
    };
    let report = compare_modes(
        &scenario,
        &config,
        action_multiplier,
        budget_multiplier,
        &seeds,
    )
    .map_err(train_error)?;

    let mut rows = Vec::new();
    let mut summary_rows = Vec::new();
    for arm in &report.arms {
        for run in &arm.runs {
            for (mode, eval) in [(Mode::Sarl, &run.sarl), (Mode::Marl, &run.marl)] {
                for (year, jurisdiction, incidence, cost) in jurisdiction_year_rows(eval) {
                    rows.push(format!(
                        "{},{},{},{},{},{},{},{},{}",
                        arm.label,
                        arm.action_multiplier,
                        arm.budget_multiplier,
                        run.seed,
                        mode.label(),
                        year,
                        jurisdiction,
                        incidence,
                        cost
                    ));
                }
            }
            let sarl_total = run.sarl.mean_cumulative_incidence();
            let marl_total = run.marl.mean_cumulative_incidence();
            summary_rows.push(format!(
                "{},{},{},{},{},{},{}",
                arm.label,
                arm.action_multiplier,
                arm.budget_multiplier,
                run.seed,
                sarl_total,
                marl_total,
                marl_total - sarl_total
            ));
        }
    }
    write_csv(&base.out_dir.join("comparison.csv"), COMPARISON_HEADER, rows)
        .map_err(io_aborted)?;
    write_csv(
        &base.out_dir.join("comparison_summary.csv"),
        COMPARISON_SUMMARY_HEADER,
        summary_rows,
    )
    .map_err(io_aborted)?;
    base.note(&format!(
        "compared modes over {} seeds and {} arm(s)",
        seeds.len(),
        report.arms.len()
    ));

    let mut manifest = base.manifest("compare");
    manifest.seeds = Some(seeds);
    manifest.config_path = Some(config_path.display().to_string());
    manifest.config_hash = Some(scenario.config_hash());
    for arm in &report.arms {
        let arm_scenario = if arm.label == "base" {
            scenario.clone()
        } else {
            scenario.scaled(arm.action_multiplier, arm.budget_multiplier)
        };
        manifest
            .scenarios
            .push(ScenarioStamp::new(&arm.label, &arm_scenario));
    }
    manifest.outputs = vec![
        "comparison.csv".to_string(),
        "comparison_summary.csv".to_string(),
    ];
    manifest.finished_unix = unix_now();
    write_manifest(&base.out_dir, &manifest)
}

fn cmd_mixing_study(
    base: &ManifestBase,
    config_path: &Path,
    seeds: Vec<u64>,
    episodes: u32,
    buffer_episodes: u32,
) -> Result<(), CliError> {
    let scenario = ScenarioConfig::load(config_path)?;
    let config = TrainConfig {
        episodes,
        buffer_episodes,
        ppo: PpoConfig::default(),
        ..TrainConfig::default()
    };
    let report = mixing_study(&scenario, &config, &seeds).map_err(train_error)?;

    let mut rows = Vec::new();
    let mut summary_rows = Vec::new();
    for run in &report.runs {
        for (label, eval) in [
            ("without_mixing", &run.predicted),
            ("with_mixing", &run.realized),
        ] {
            for (year, jurisdiction, incidence, cost) in jurisdiction_year_rows(eval) {
                rows.push(format!(
                    "{},{},{},{},{},{}",
                    run.seed, year, jurisdiction, label, incidence, cost
                ));
            }
        }
        let predicted = run.predicted.mean_cumulative_incidence();
        let realized = run.realized.mean_cumulative_incidence();
        summary_rows.push(format!(
            "{},{},{},{}",
            run.seed,
            predicted,
            realized,
            realized - predicted
        ));
    }
    write_csv(&base.out_dir.join("mixing.csv"), MIXING_HEADER, rows).map_err(io_aborted)?;
    write_csv(
        &base.out_dir.join("mixing_summary.csv"),
        MIXING_SUMMARY_HEADER,
        summary_rows,
    )
    .map_err(io_aborted)?;
    base.note(&format!("ran the mixing study over {} seeds", report.runs.len()));

    let mut manifest = base.manifest("mixing-study");
    manifest.seeds = Some(seeds);
    manifest.config_path = Some(config_path.display().to_string());
    manifest.config_hash = Some(scenario.config_hash());
    manifest.scenarios.push(ScenarioStamp::new("with_mixing", &scenario));
    manifest
        .scenarios
        .push(ScenarioStamp::new("without_mixing", &scenario.without_mixing()));
    manifest.outputs = vec!["mixing.csv".to_string(), "mixing_summary.csv".to_string()];
    manifest.finished_unix = unix_now();
    write_manifest(&base.out_dir, &manifest)
}
