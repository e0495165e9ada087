//! Training orchestration: episode rollouts over the environment,
//! per-agent replay buffers with a fixed update cadence, deterministic
//! evaluation, pooled-versus-independent mode comparisons, and the
//! mixing ablation study.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{
    ActionVector, EnvError, HivEnv, Mode, ACTION_WIDTH, OBSERVATION_WIDTH,
};
use crate::epi::RiskGroup;
use crate::error::ConfigError;
use crate::nn::{Architecture, NetworkParameters, OptimizerState};
use crate::ppo::{
    deterministic_action, discounted_reward_to_go, sample_action, update, ExplorationSchedule,
    PpoConfig, ReplayBuffer, TrainError, TrajectoryStep, UpdateDiagnostics,
};
use crate::scenario::ScenarioConfig;

/// Hidden-layer widths shared by every actor and critic.
pub const HIDDEN_WIDTHS: [usize; 2] = [64, 64];
const ACTOR_FINAL_GAIN: f64 = 0.01;
const CRITIC_FINAL_GAIN: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: Mode,
    /// Episode count M.
    pub episodes: u32,
    /// Episodes per replay buffer B; updates fire every B * T timesteps.
    pub buffer_episodes: u32,
    pub seed: u64,
    pub ppo: PpoConfig,
    /// Write a checkpoint every this many episodes (the final state is
    /// always written when a checkpoint directory is given).
    pub checkpoint_every: Option<u32>,
    /// Run a deterministic evaluation episode every this many episodes and
    /// record its per-agent reward.
    pub eval_every: Option<u32>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: Mode::Marl,
            episodes: 2000,
            buffer_episodes: 10,
            seed: 0,
            ppo: PpoConfig::default(),
            checkpoint_every: None,
            eval_every: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.episodes < 1 {
            return Err(ConfigError::field("episodes", "must be at least 1"));
        }
        if self.buffer_episodes < 1 {
            return Err(ConfigError::field("buffer_episodes", "must be at least 1"));
        }
        self.ppo.validate()
    }
}

/// One learner: policy and value networks, their optimizer states, an
/// on-policy buffer, and a private RNG stream.
pub struct Agent {
    pub actor: NetworkParameters,
    pub critic: NetworkParameters,
    pub actor_opt: OptimizerState,
    pub critic_opt: OptimizerState,
    pub buffer: ReplayBuffer,
    pub rng: ChaCha8Rng,
    /// Multiplier applied to rewards before they enter the buffer; fixed
    /// from the first full buffer's reward spread.
    reward_scale: Option<f64>,
}

/// Derives the RNG seed for one agent from the run seed.
///
/// Each learner gets its own stream so that exploration noise is
/// uncorrelated across agents; otherwise independent learners sample
/// identical perturbations every step and move in lockstep, which hides
/// exactly the per-jurisdiction differences they are supposed to find.
/// The multiplier is the usual 64-bit golden-ratio constant, so streams
/// stay distinct across both agent indices and neighbouring run seeds.
pub fn agent_seed(run_seed: u64, agent: usize) -> u64 {
    run_seed ^ (agent as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl Agent {
    /// Builds a fresh agent whose networks and exploration noise draw from
    /// a ChaCha8 stream seeded with `seed` (see [`agent_seed`]).
    pub fn new(seed: u64, ppo: &PpoConfig) -> Self {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = NetworkParameters::orthogonal_init(
            Architecture::new(OBSERVATION_WIDTH, &HIDDEN_WIDTHS, ACTION_WIDTH),
            2.0_f64.sqrt(),
            ACTOR_FINAL_GAIN,
            &mut rng,
        );
        let critic = NetworkParameters::orthogonal_init(
            Architecture::new(OBSERVATION_WIDTH, &HIDDEN_WIDTHS, 1),
            2.0_f64.sqrt(),
            CRITIC_FINAL_GAIN,
            &mut rng,
        );
        let actor_opt = OptimizerState::new(&actor, ppo.actor_lr);
        let critic_opt = OptimizerState::new(&critic, ppo.critic_lr);
        Agent {
            actor,
            critic,
            actor_opt,
            critic_opt,
            buffer: ReplayBuffer::new(),
            rng,
            reward_scale: None,
        }
    }

    pub fn reward_scale(&self) -> Option<f64> {
        self.reward_scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardRecord {
    pub episode: u32,
    pub agent: usize,
    /// Raw (unscaled) episode reward total.
    pub reward: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct DiagnosticsRecord {
    pub update_index: u32,
    pub agent: usize,
    pub diagnostics: UpdateDiagnostics,
}

pub struct TrainingArtifacts {
    pub agents: Vec<Agent>,
    pub reward_history: Vec<RewardRecord>,
    pub diagnostics: Vec<DiagnosticsRecord>,
    /// Deterministic-evaluation reward per agent at each eval point.
    pub eval_history: Vec<RewardRecord>,
    pub aborted_episodes: u32,
    pub updates: u32,
    pub total_env_steps: u64,
}

impl TrainingArtifacts {
    pub fn actors(&self) -> Vec<NetworkParameters> {
        self.agents.iter().map(|a| a.actor.clone()).collect()
    }
}

/// Runs `config.episodes` training episodes on `scenario`.
///
/// Every episode restarts from the scenario's initial state. Each year all
/// agents sample actions, the environment advances once globally, and
/// transitions append to per-agent buffers. When the global timestep count
/// is a multiple of buffer_episodes * horizon, every agent updates and
/// clears its buffer. An episode aborted by a simulation error is rolled
/// back (buffers truncated, timestep counter restored) and training
/// continues with the next episode.
pub fn train(
    config: &TrainConfig,
    scenario: &ScenarioConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<TrainingArtifacts, TrainError> {
    config.validate()?;
    let mut env = HivEnv::from_config(scenario, config.mode)?;
    let n_agents = env.n_agents();
    let horizon = env.horizon_years() as u64;
    let update_period = config.buffer_episodes as u64 * horizon;
    let bounds = env.bounds().per_dimension();
    let scenario_hash = scenario.config_hash();

    let mut agents: Vec<Agent> = (0..n_agents)
        .map(|i| Agent::new(agent_seed(config.seed, i), &config.ppo))
        .collect();
    let mut artifacts = TrainingArtifacts {
        agents: Vec::new(),
        reward_history: Vec::new(),
        diagnostics: Vec::new(),
        eval_history: Vec::new(),
        aborted_episodes: 0,
        updates: 0,
        total_env_steps: 0,
    };

    let mut timesteps: u64 = 0;
    for episode in 1..=config.episodes {
        let mut observations = env.reset();
        let buffer_marks: Vec<usize> = agents.iter().map(|a| a.buffer.len()).collect();
        let timesteps_mark = timesteps;
        let mut episode_rewards = vec![0.0; n_agents];
        let mut aborted = false;

        loop {
            let std = config.ppo.exploration.std_at(timesteps);
            let mut actions = Vec::with_capacity(n_agents);
            let mut pending = Vec::with_capacity(n_agents);
            for (i, agent) in agents.iter_mut().enumerate() {
                let obs = observations[i].as_vector();
                let sampled = sample_action(&agent.actor, &obs, std, &bounds, &mut agent.rng);
                let value = agent.critic.forward(&obs)[0];
                let mut flat = [0.0; ACTION_WIDTH];
                flat.copy_from_slice(&sampled.action);
                actions.push(ActionVector::from_flat(&flat));
                pending.push((obs, sampled, value));
            }

            let step = match env.step(&actions) {
                Ok(step) => step,
                Err(EnvError::Sim(_)) => {
                    aborted = true;
                    break;
                }
                Err(other) => panic!("environment contract violated: {other}"),
            };
            timesteps += 1;
            for (i, agent) in agents.iter_mut().enumerate() {
                let (obs, sampled, value) = &pending[i];
                episode_rewards[i] += step.rewards[i];
                let scaled_reward = match agent.reward_scale {
                    Some(scale) => step.rewards[i] * scale,
                    None => step.rewards[i],
                };
                agent.buffer.push(TrajectoryStep {
                    observation: obs.to_vec(),
                    pre_action: sampled.pre_action.clone(),
                    action: sampled.action.clone(),
                    log_prob: sampled.log_prob,
                    std,
                    reward: scaled_reward,
                    value: *value,
                    done: step.done,
                });
            }
            observations = step.observations;
            if step.done {
                break;
            }
        }

        if aborted {
            // Roll the rollout back so buffers hold whole episodes only
            // and the update cadence stays aligned.
            for (agent, &mark) in agents.iter_mut().zip(&buffer_marks) {
                agent.buffer.truncate(mark);
            }
            timesteps = timesteps_mark;
            artifacts.aborted_episodes += 1;
            continue;
        }

        for (i, &reward) in episode_rewards.iter().enumerate() {
            artifacts.reward_history.push(RewardRecord {
                episode,
                agent: i,
                reward,
            });
        }

        if timesteps % update_period == 0 {
            artifacts.updates += 1;
            for (i, agent) in agents.iter_mut().enumerate() {
                if agent.reward_scale.is_none() {
                    let scale = initial_reward_scale(&agent.buffer, config.ppo.discount);
                    agent.buffer.scale_rewards(scale);
                    agent.reward_scale = Some(scale);
                }
                let diagnostics = update(
                    &mut agent.actor,
                    &mut agent.critic,
                    &mut agent.actor_opt,
                    &mut agent.critic_opt,
                    &agent.buffer,
                    &bounds,
                    &config.ppo,
                )?;
                agent.buffer.clear();
                artifacts.diagnostics.push(DiagnosticsRecord {
                    update_index: artifacts.updates,
                    agent: i,
                    diagnostics,
                });
            }
        }

        if let Some(every) = config.eval_every {
            if episode % every == 0 {
                let actors: Vec<NetworkParameters> =
                    agents.iter().map(|a| a.actor.clone()).collect();
                let report = evaluate(
                    &actors,
                    scenario,
                    config.mode,
                    1,
                    true,
                    config.seed,
                    &config.ppo.exploration,
                )?;
                for (i, &reward) in report.mean_cumulative_reward.iter().enumerate() {
                    artifacts.eval_history.push(RewardRecord {
                        episode,
                        agent: i,
                        reward,
                    });
                }
            }
        }

        if let (Some(dir), Some(every)) = (checkpoint_dir, config.checkpoint_every) {
            if episode % every == 0 && episode != config.episodes {
                let path = dir.join(format!("episode_{episode:06}"));
                save_checkpoint(&path, &agents, config, &scenario_hash, episode)?;
            }
        }
    }

    artifacts.total_env_steps = timesteps;
    if let Some(dir) = checkpoint_dir {
        let path = dir.join("final");
        save_checkpoint(&path, &agents, config, &scenario_hash, config.episodes)?;
    }
    artifacts.agents = agents;
    Ok(artifacts)
}

/// Reward scale frozen at the first update: inverse spread of the buffer's
/// discounted reward-to-go, so value targets start near unit scale.
fn initial_reward_scale(buffer: &ReplayBuffer, discount: f64) -> f64 {
    let rewards: Vec<f64> = buffer.steps.iter().map(|s| s.reward).collect();
    let dones: Vec<bool> = buffer.steps.iter().map(|s| s.done).collect();
    let rtg = discounted_reward_to_go(&rewards, &dones, discount);
    let n = rtg.len() as f64;
    let mean = rtg.iter().sum::<f64>() / n;
    let var = rtg.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    1.0 / var.sqrt().max(1e-8)
}

/// Per-checkpoint description, stored as `manifest.json` next to the
/// parameter files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub mode: Mode,
    pub n_agents: usize,
    pub observation_width: usize,
    pub action_width: usize,
    pub hidden_widths: Vec<usize>,
    pub episodes_trained: u32,
    pub seed: u64,
    pub scenario_hash: String,
    pub agent_files: Vec<AgentFiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentFiles {
    pub actor: String,
    pub critic: String,
}

pub fn save_checkpoint(
    dir: &Path,
    agents: &[Agent],
    config: &TrainConfig,
    scenario_hash: &str,
    episodes_trained: u32,
) -> Result<(), TrainError> {
    std::fs::create_dir_all(dir)?;
    let mut agent_files = Vec::with_capacity(agents.len());
    for (i, agent) in agents.iter().enumerate() {
        let actor_name = format!("agent_{i:03}.actor.fwnn");
        let critic_name = format!("agent_{i:03}.critic.fwnn");
        agent.actor.save(&dir.join(&actor_name))?;
        agent.critic.save(&dir.join(&critic_name))?;
        agent_files.push(AgentFiles {
            actor: actor_name,
            critic: critic_name,
        });
    }
    let manifest = CheckpointManifest {
        mode: config.mode,
        n_agents: agents.len(),
        observation_width: OBSERVATION_WIDTH,
        action_width: ACTION_WIDTH,
        hidden_widths: HIDDEN_WIDTHS.to_vec(),
        episodes_trained,
        seed: config.seed,
        scenario_hash: scenario_hash.to_string(),
        agent_files,
    };
    let text = serde_json::to_string_pretty(&manifest)
        .expect("manifest serialization cannot fail");
    std::fs::write(dir.join("manifest.json"), text + "\n").map_err(TrainError::Io)
}

pub fn load_checkpoint(
    dir: &Path,
) -> Result<(CheckpointManifest, Vec<NetworkParameters>), TrainError> {
    let manifest_path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path)?;
    let manifest: CheckpointManifest = serde_json::from_str(&text).map_err(|e| {
        TrainError::Io(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("cannot parse {}: {e}", manifest_path.display()),
        ))
    })?;
    let mut actors = Vec::with_capacity(manifest.agent_files.len());
    for files in &manifest.agent_files {
        actors.push(NetworkParameters::load(&dir.join(&files.actor))?);
    }
    Ok((manifest, actors))
}

/// One trajectory-log row: a (episode, year, jurisdiction, risk group)
/// cell with its incidence, money flows, and the action applied.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRow {
    pub episode: u32,
    pub year: i32,
    pub jurisdiction: String,
    pub risk_group: &'static str,
    pub new_infections: f64,
    pub cost: f64,
    pub budget: f64,
    pub reward: f64,
    pub action_unaware: f64,
    pub action_art: f64,
    pub action_prep: f64,
    pub saturated_unaware: bool,
    pub saturated_art: bool,
    pub saturated_prep: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub rows: Vec<EvaluationRow>,
    pub episodes: u32,
    /// Mean per-episode system-wide incidence in the first and last
    /// simulated year, and the percent change between them (0 when the
    /// first year saw no infections).
    pub first_year_incidence: f64,
    pub last_year_incidence: f64,
    pub percent_change: f64,
    /// Mean per-episode cumulative reward per agent.
    pub mean_cumulative_reward: Vec<f64>,
}

impl EvaluationReport {
    /// Mean per-episode total new infections over the whole horizon.
    pub fn mean_cumulative_incidence(&self) -> f64 {
        let total: f64 = self.rows.iter().map(|r| r.new_infections).sum();
        total / self.episodes as f64
    }

    /// Mean per-episode total spend over the whole horizon. Cost rows are
    /// repeated per risk group, so count each jurisdiction-year once.
    pub fn mean_cumulative_cost(&self) -> f64 {
        let total: f64 = self
            .rows
            .iter()
            .filter(|r| r.risk_group == RiskGroup::Hm.label())
            .map(|r| r.cost)
            .sum();
        total / self.episodes as f64
    }
}

/// Rolls out `episodes` evaluation episodes under the given policies.
/// With `deterministic` set, actions are the squashed policy means;
/// otherwise actions are sampled at the schedule's final std.
pub fn evaluate(
    policies: &[NetworkParameters],
    scenario: &ScenarioConfig,
    mode: Mode,
    episodes: u32,
    deterministic: bool,
    seed: u64,
    exploration: &ExplorationSchedule,
) -> Result<EvaluationReport, TrainError> {
    use rand::SeedableRng;
    let mut env = HivEnv::from_config(scenario, mode)?;
    let n_agents = env.n_agents();
    assert_eq!(
        policies.len(),
        n_agents,
        "policy count mismatches agent count"
    );
    let bounds = env.bounds().per_dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut rows = Vec::new();
    let mut cumulative_reward = vec![0.0; n_agents];
    let mut first_year_total = 0.0;
    let mut last_year_total = 0.0;
    let horizon = env.horizon_years();
    for episode in 1..=episodes {
        let mut observations = env.reset();
        for step_index in 1..=horizon {
            let actions: Vec<ActionVector> = policies
                .iter()
                .zip(&observations)
                .map(|(actor, obs)| {
                    let obs = obs.as_vector();
                    let flat_vec = if deterministic {
                        deterministic_action(actor, &obs, &bounds)
                    } else {
                        sample_action(actor, &obs, exploration.final_std, &bounds, &mut rng)
                            .action
                    };
                    let mut flat = [0.0; ACTION_WIDTH];
                    flat.copy_from_slice(&flat_vec);
                    ActionVector::from_flat(&flat)
                })
                .collect();
            let step = env.step(&actions)?;
            observations = step.observations.clone();
            for (i, r) in step.rewards.iter().enumerate() {
                cumulative_reward[i] += r;
            }
            for record in &step.records {
                let id = env.world().jurisdiction(record.jurisdiction).id.clone();
                for k in RiskGroup::ALL {
                    let action = record.action.group(k);
                    rows.push(EvaluationRow {
                        episode,
                        year: record.year,
                        jurisdiction: id.clone(),
                        risk_group: k.label(),
                        new_infections: step.outcome.new_infections(record.jurisdiction, k),
                        cost: record.cost,
                        budget: record.budget,
                        reward: record.reward,
                        action_unaware: action.unaware,
                        action_art: action.art,
                        action_prep: action.prep,
                        saturated_unaware: record
                            .saturation
                            .is_saturated(k, crate::env::Channel::Unaware),
                        saturated_art: record
                            .saturation
                            .is_saturated(k, crate::env::Channel::Art),
                        saturated_prep: record
                            .saturation
                            .is_saturated(k, crate::env::Channel::Prep),
                    });
                }
                if step_index == 1 {
                    first_year_total += record.new_infections;
                }
                if step_index == horizon {
                    last_year_total += record.new_infections;
                }
            }
        }
    }

    let first_year_incidence = first_year_total / episodes as f64;
    let last_year_incidence = last_year_total / episodes as f64;
    let percent_change = if first_year_incidence > 0.0 {
        (last_year_incidence - first_year_incidence) / first_year_incidence * 100.0
    } else {
        0.0
    };
    for r in &mut cumulative_reward {
        *r /= episodes as f64;
    }
    Ok(EvaluationReport {
        rows,
        episodes,
        first_year_incidence,
        last_year_incidence,
        percent_change,
        mean_cumulative_reward: cumulative_reward,
    })
}

/// Trains both modes on one scenario and seed, then evaluates each
/// deterministically for one episode.
pub fn train_and_evaluate_both_modes(
    scenario: &ScenarioConfig,
    config: &TrainConfig,
    seed: u64,
) -> Result<ComparisonRun, TrainError> {
    let run = |mode: Mode| -> Result<EvaluationReport, TrainError> {
        let cfg = TrainConfig {
            mode,
            seed,
            ..config.clone()
        };
        let artifacts = train(&cfg, scenario, None)?;
        evaluate(
            &artifacts.actors(),
            scenario,
            mode,
            1,
            true,
            seed,
            &cfg.ppo.exploration,
        )
    };
    Ok(ComparisonRun {
        seed,
        sarl: run(Mode::Sarl)?,
        marl: run(Mode::Marl)?,
    })
}

#[derive(Debug, Clone)]
pub struct ComparisonRun {
    pub seed: u64,
    pub sarl: EvaluationReport,
    pub marl: EvaluationReport,
}

#[derive(Debug, Clone)]
pub struct ComparisonArm {
    pub label: String,
    pub action_multiplier: f64,
    pub budget_multiplier: f64,
    pub scenario_hash: String,
    pub runs: Vec<ComparisonRun>,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub arms: Vec<ComparisonArm>,
}

/// Trains and evaluates SARL and MARL per seed on the base scenario, and,
/// when either multiplier differs from 1, repeats on the scaled scenario
/// (action bounds and budgets multiplied).
pub fn compare_modes(
    scenario: &ScenarioConfig,
    config: &TrainConfig,
    action_multiplier: f64,
    budget_multiplier: f64,
    seeds: &[u64],
) -> Result<ComparisonReport, TrainError> {
    assert!(
        action_multiplier > 0.0 && budget_multiplier > 0.0,
        "multipliers must be positive"
    );
    let mut arm_specs = vec![("base".to_string(), scenario.clone(), 1.0, 1.0)];
    if action_multiplier != 1.0 || budget_multiplier != 1.0 {
        arm_specs.push((
            "scaled".to_string(),
            scenario.scaled(action_multiplier, budget_multiplier),
            action_multiplier,
            budget_multiplier,
        ));
    }

    let mut arms = Vec::with_capacity(arm_specs.len());
    for (label, arm_scenario, am, bm) in arm_specs {
        let tasks: Vec<u64> = seeds.to_vec();
        let runs = run_parallel(tasks, |seed| {
            train_and_evaluate_both_modes(&arm_scenario, config, seed)
        });
        let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
        arms.push(ComparisonArm {
            label,
            action_multiplier: am,
            budget_multiplier: bm,
            scenario_hash: arm_scenario.config_hash(),
            runs,
        });
    }
    Ok(ComparisonReport { arms })
}

#[derive(Debug, Clone)]
pub struct MixingStudyRun {
    pub seed: u64,
    /// Evaluation under the decoupled (identity-mixing) scenario the
    /// policies were trained on.
    pub predicted: EvaluationReport,
    /// Evaluation of the same policies under the true mixing matrix.
    pub realized: EvaluationReport,
}

#[derive(Debug, Clone)]
pub struct MixingStudyReport {
    pub runs: Vec<MixingStudyRun>,
}

/// Trains each jurisdiction independently with mixing disabled, then
/// evaluates those policies with and without the true mixing matrix.
pub fn mixing_study(
    scenario: &ScenarioConfig,
    config: &TrainConfig,
    seeds: &[u64],
) -> Result<MixingStudyReport, TrainError> {
    if scenario.jurisdictions.len() < 2 {
        return Err(TrainError::Config(ConfigError::field(
            "jurisdictions",
            "the mixing study needs at least 2 jurisdictions",
        )));
    }
    let decoupled = scenario.without_mixing();
    let runs = run_parallel(seeds.to_vec(), |seed| -> Result<MixingStudyRun, TrainError> {
        let cfg = TrainConfig {
            mode: Mode::Marl,
            seed,
            ..config.clone()
        };
        let artifacts = train(&cfg, &decoupled, None)?;
        let actors = artifacts.actors();
        let predicted = evaluate(
            &actors,
            &decoupled,
            Mode::Marl,
            1,
            true,
            seed,
            &cfg.ppo.exploration,
        )?;
        let realized = evaluate(
            &actors,
            scenario,
            Mode::Marl,
            1,
            true,
            seed,
            &cfg.ppo.exploration,
        )?;
        Ok(MixingStudyRun {
            seed,
            predicted,
            realized,
        })
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(MixingStudyReport { runs })
}

/// Worker-thread cap: the `EPICTRL_THREADS` environment variable when set,
/// otherwise the machine's available parallelism.
pub fn worker_threads() -> usize {
    if let Ok(value) = std::env::var("EPICTRL_THREADS") {
        if let Ok(n) = value.trim().parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Maps `worker` over `inputs` on up to [`worker_threads`] threads,
/// preserving input order in the results.
pub fn run_parallel<T, R, F>(inputs: Vec<T>, worker: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    run_parallel_with(worker_threads(), inputs, worker)
}

pub fn run_parallel_with<T, R, F>(threads: usize, inputs: Vec<T>, worker: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync,
{
    let n = inputs.len();
    let threads = threads.max(1).min(n.max(1));
    if threads <= 1 {
        return inputs.into_iter().map(worker).collect();
    }
    let slots: Vec<Mutex<Option<T>>> = inputs.into_iter().map(|t| Mutex::new(Some(t))).collect();
    let results: Vec<Mutex<Option<R>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let input = slots[i].lock().unwrap().take().expect("slot taken once");
                let output = worker(input);
                *results[i].lock().unwrap() = Some(output);
            });
        }
    });
    results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("worker filled slot"))
        .collect()
}

/// Convenience wrapper for tests and the CLI: a fresh untrained policy set
/// shaped for `scenario` and `mode`.
pub fn untrained_policies(
    scenario: &ScenarioConfig,
    mode: Mode,
    seed: u64,
    ppo: &PpoConfig,
) -> Result<Vec<NetworkParameters>, ConfigError> {
    let env = HivEnv::from_config(scenario, mode)?;
    Ok((0..env.n_agents())
        .map(|i| Agent::new(agent_seed(seed, i), ppo).actor)
        .collect())
}
