//! PPO with a clipped surrogate objective on bounded continuous actions:
//! a squashed-Gaussian policy with exact log-densities, generalized
//! advantage estimation, and full-buffer actor/critic updates driven by
//! the adaptive-moment optimizer from [`crate::nn`].

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::nn::{NetworkGradients, NetworkParameters, NnError, OptimizerState};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("replay buffer does not end on an episode boundary")]
    IncompleteBuffer,
    #[error("non-finite probability ratio {value} at buffer step {step}")]
    NonFiniteRatio { step: usize, value: f64 },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Config(#[from] crate::error::ConfigError),
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
    #[error("training artifact I/O failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Stepwise-linear decay of the policy standard deviation: every
/// `decay_frequency` environment timesteps the std drops by `decay_rate`,
/// floored at `final_std`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationSchedule {
    pub initial_std: f64,
    pub final_std: f64,
    pub decay_rate: f64,
    pub decay_frequency: u64,
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        ExplorationSchedule {
            initial_std: 0.4,
            final_std: 0.05,
            decay_rate: 0.0046,
            decay_frequency: 1000,
        }
    }
}

impl ExplorationSchedule {
    pub fn std_at(&self, timesteps: u64) -> f64 {
        let decrements = (timesteps / self.decay_frequency) as f64;
        (self.initial_std - self.decay_rate * decrements).max(self.final_std)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.initial_std > 0.0) || !(self.final_std > 0.0) {
            return Err(ConfigError::field(
                "exploration",
                "initial_std and final_std must be positive",
            ));
        }
        if self.decay_rate < 0.0 || self.decay_frequency == 0 {
            return Err(ConfigError::field(
                "exploration",
                "decay_rate must be non-negative and decay_frequency positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub discount: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub k_epochs: u32,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub exploration: ExplorationSchedule,
    /// Normalize advantages to zero mean and unit variance per update.
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            discount: 0.99,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            k_epochs: 20,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            exploration: ExplorationSchedule::default(),
            normalize_advantages: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(ConfigError::field("discount", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(ConfigError::field("gae_lambda", "must lie in [0, 1]"));
        }
        if !(self.clip_epsilon > 0.0) {
            return Err(ConfigError::field("clip_epsilon", "must be positive"));
        }
        if self.k_epochs < 1 {
            return Err(ConfigError::field("k_epochs", "must be at least 1"));
        }
        if !(self.actor_lr >= 0.0) || !(self.critic_lr >= 0.0) {
            return Err(ConfigError::field(
                "learning rates",
                "must be non-negative",
            ));
        }
        self.exploration.validate()
    }
}

/// One environment transition as stored for updates. `pre_action` is the
/// raw Gaussian draw before squashing; keeping it (with the sampling std)
/// lets later epochs recompute the exact log-density under new parameters.
#[derive(Debug, Clone)]
pub struct TrajectoryStep {
    pub observation: Vec<f64>,
    pub pre_action: Vec<f64>,
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub std: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
}

/// Per-agent on-policy buffer; episodes are delimited by `done` flags.
#[derive(Debug, Clone, Default)]
pub struct ReplayBuffer {
    pub steps: Vec<TrajectoryStep>,
}

impl ReplayBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, step: TrajectoryStep) {
        self.steps.push(step);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn clear(&mut self) {
        self.steps.clear();
    }

    /// Drops steps beyond `len`; used to roll back an aborted episode.
    pub fn truncate(&mut self, len: usize) {
        self.steps.truncate(len);
    }

    pub fn n_episodes(&self) -> usize {
        self.steps.iter().filter(|s| s.done).count()
    }

    /// True when the buffer holds only whole episodes.
    pub fn ends_on_episode_boundary(&self) -> bool {
        self.steps.last().map(|s| s.done).unwrap_or(false)
    }

    /// In-place reward transform; the trainer uses this to apply its
    /// reward scale to an already-collected buffer.
    pub fn scale_rewards(&mut self, factor: f64) {
        for step in &mut self.steps {
            step.reward *= factor;
        }
    }
}

fn squash(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// Log-density of the squashed-Gaussian policy at the stored pre-action.
///
/// Per dimension: Gaussian density of the pre-action around the mean,
/// minus the log-derivative of the squash map `a = bound * sigmoid(u)`.
/// Dimensions with a zero bound are pinned at action 0 and contribute
/// nothing.
fn log_density(mean: &[f64], pre_action: &[f64], std: f64, bounds: &[f64]) -> f64 {
    debug_assert_eq!(mean.len(), pre_action.len());
    debug_assert_eq!(mean.len(), bounds.len());
    let mut lp = 0.0;
    for i in 0..mean.len() {
        if bounds[i] == 0.0 {
            continue;
        }
        let z = (pre_action[i] - mean[i]) / std;
        let s = squash(pre_action[i]);
        lp += -0.5 * z * z - std.ln() - LN_SQRT_2PI - (bounds[i] * s * (1.0 - s)).ln();
    }
    lp
}

/// A draw from the policy along with what updates need to remember.
#[derive(Debug, Clone)]
pub struct SampledAction {
    pub action: Vec<f64>,
    pub pre_action: Vec<f64>,
    pub log_prob: f64,
}

/// Samples a bounded action: a diagonal-Gaussian pre-action around the
/// actor's output, squashed through a sigmoid onto [0, bound] per
/// dimension. `bounds` must match the actor's output width.
pub fn sample_action<R: Rng>(
    actor: &NetworkParameters,
    obs: &[f64],
    std: f64,
    bounds: &[f64],
    rng: &mut R,
) -> SampledAction {
    assert!(std > 0.0, "sampling std must be positive");
    let mean = actor.forward(obs);
    assert_eq!(mean.len(), bounds.len(), "bounds width mismatches actor");
    let mut pre_action = Vec::with_capacity(mean.len());
    let mut action = Vec::with_capacity(mean.len());
    for (i, m) in mean.iter().enumerate() {
        let z: f64 = rng.sample(StandardNormal);
        let u = m + std * z;
        pre_action.push(u);
        action.push(if bounds[i] == 0.0 {
            0.0
        } else {
            bounds[i] * squash(u)
        });
    }
    let log_prob = log_density(&mean, &pre_action, std, bounds);
    SampledAction {
        action,
        pre_action,
        log_prob,
    }
}

/// Log-density of a stored pre-action under the actor's current parameters.
pub fn log_prob_of(
    actor: &NetworkParameters,
    obs: &[f64],
    pre_action: &[f64],
    std: f64,
    bounds: &[f64],
) -> f64 {
    log_density(&actor.forward(obs), pre_action, std, bounds)
}

/// The zero-noise action: the squashed actor mean.
pub fn deterministic_action(actor: &NetworkParameters, obs: &[f64], bounds: &[f64]) -> Vec<f64> {
    actor
        .forward(obs)
        .iter()
        .zip(bounds)
        .map(|(m, &b)| if b == 0.0 { 0.0 } else { b * squash(*m) })
        .collect()
}

/// Advantages and value-regression targets for one buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageBatch {
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub normalized: bool,
}

/// Generalized advantage estimation over a buffer of whole episodes.
///
/// The recursion runs backwards with the bootstrap value forced to zero at
/// episode ends (and at the buffer end); returns are advantages plus the
/// stored values, computed before any normalization.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    discount: f64,
    lambda: f64,
) -> AdvantageBatch {
    let n = rewards.len();
    assert_eq!(values.len(), n);
    assert_eq!(dones.len(), n);
    let mut advantages = vec![0.0; n];
    let mut next_advantage = 0.0;
    for t in (0..n).rev() {
        let (next_value, carried) = if dones[t] || t + 1 == n {
            (0.0, 0.0)
        } else {
            (values[t + 1], next_advantage)
        };
        let delta = rewards[t] + discount * next_value - values[t];
        next_advantage = delta + discount * lambda * carried;
        advantages[t] = next_advantage;
    }
    let returns = advantages
        .iter()
        .zip(values)
        .map(|(a, v)| a + v)
        .collect();
    AdvantageBatch {
        advantages,
        returns,
        normalized: false,
    }
}

/// Discounted reward-to-go within each episode.
pub fn discounted_reward_to_go(rewards: &[f64], dones: &[bool], discount: f64) -> Vec<f64> {
    let n = rewards.len();
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        if dones[t] {
            acc = 0.0;
        }
        acc = rewards[t] + discount * acc;
        out[t] = acc;
    }
    out
}

/// Clip envelope for the surrogate objective: `(1 + eps) * a` for
/// non-negative advantages, `(1 - eps) * a` otherwise.
pub fn clip_g(epsilon: f64, advantage: f64) -> f64 {
    if advantage >= 0.0 {
        (1.0 + epsilon) * advantage
    } else {
        (1.0 - epsilon) * advantage
    }
}

/// Negated mean clipped surrogate objective over a batch.
pub fn surrogate_loss(
    ratios: &[f64],
    advantages: &[f64],
    epsilon: f64,
) -> Result<f64, TrainError> {
    assert_eq!(ratios.len(), advantages.len());
    let mut total = 0.0;
    for (step, (&r, &a)) in ratios.iter().zip(advantages).enumerate() {
        if !r.is_finite() {
            return Err(TrainError::NonFiniteRatio { step, value: r });
        }
        total += (r * a).min(clip_g(epsilon, a));
    }
    Ok(-total / ratios.len().max(1) as f64)
}

/// Per-update training diagnostics, computed on the final epoch's pass.
#[derive(Debug, Clone, Copy)]
pub struct UpdateDiagnostics {
    /// Mean probability ratio; 1.0 before any parameter movement.
    pub mean_ratio: f64,
    /// Share of steps whose ratio left [1 - eps, 1 + eps].
    pub clip_fraction: f64,
    /// Negated mean surrogate objective.
    pub policy_loss: f64,
    /// Mean squared error of the value head against returns.
    pub value_loss: f64,
    pub mean_episode_reward: f64,
    /// Sampling std of the buffer's last step; an entropy proxy since the
    /// policy spread is scheduled rather than learned.
    pub exploration_std: f64,
}

struct EpochMeasurement {
    mean_ratio: f64,
    clip_fraction: f64,
    policy_loss: f64,
    value_loss: f64,
}

/// One full-buffer pass: accumulates actor and critic gradients and
/// measures diagnostics. Gradients are averaged over the batch.
fn epoch_pass(
    actor: &NetworkParameters,
    critic: &NetworkParameters,
    buffer: &ReplayBuffer,
    batch: &AdvantageBatch,
    bounds: &[f64],
    config: &PpoConfig,
) -> Result<(NetworkGradients, NetworkGradients, EpochMeasurement), TrainError> {
    let n = buffer.len();
    let scale = 1.0 / n as f64;
    let mut actor_grads = NetworkGradients::zeros_like(actor);
    let mut critic_grads = NetworkGradients::zeros_like(critic);
    let mut ratio_sum = 0.0;
    let mut clipped_count = 0usize;
    let mut objective_sum = 0.0;
    let mut value_loss_sum = 0.0;

    for (t, step) in buffer.steps.iter().enumerate() {
        let advantage = batch.advantages[t];

        // Actor: recompute the log-density of the stored pre-action.
        let trace = actor.forward_trace(&step.observation);
        let mean = trace.output();
        let new_lp = log_density(mean, &step.pre_action, step.std, bounds);
        let ratio = (new_lp - step.log_prob).exp();
        if !ratio.is_finite() {
            return Err(TrainError::NonFiniteRatio {
                step: t,
                value: ratio,
            });
        }
        ratio_sum += ratio;
        if (ratio - 1.0).abs() > config.clip_epsilon {
            clipped_count += 1;
        }
        let unclipped = ratio * advantage;
        let clipped = clip_g(config.clip_epsilon, advantage);
        objective_sum += unclipped.min(clipped);
        // The objective's gradient flows only through the unclipped branch;
        // when the clip is active the per-step objective is constant in the
        // parameters.
        if unclipped <= clipped {
            let var = step.std * step.std;
            let mut upstream = vec![0.0; mean.len()];
            let mut any = false;
            for i in 0..mean.len() {
                if bounds[i] == 0.0 {
                    continue;
                }
                // d(-objective/n)/d(mean_i)
                upstream[i] =
                    -scale * advantage * ratio * (step.pre_action[i] - mean[i]) / var;
                any = true;
            }
            if any {
                actor_grads.accumulate(&actor.backward(&trace, &upstream));
            }
        }

        // Critic: squared-error regression against the return target.
        let trace = critic.forward_trace(&step.observation);
        let value = trace.output()[0];
        let residual = value - batch.returns[t];
        value_loss_sum += residual * residual;
        let upstream = [2.0 * scale * residual];
        critic_grads.accumulate(&critic.backward(&trace, &upstream));
    }

    Ok((
        actor_grads,
        critic_grads,
        EpochMeasurement {
            mean_ratio: ratio_sum * scale,
            clip_fraction: clipped_count as f64 * scale,
            policy_loss: -objective_sum * scale,
            value_loss: value_loss_sum * scale,
        },
    ))
}

/// Negated surrogate loss of `actor` on a frozen buffer, using the stored
/// sampling-time log-probabilities. Exposed for before/after comparisons.
pub fn buffer_objective(
    actor: &NetworkParameters,
    buffer: &ReplayBuffer,
    batch: &AdvantageBatch,
    bounds: &[f64],
    epsilon: f64,
) -> Result<f64, TrainError> {
    let mut ratios = Vec::with_capacity(buffer.len());
    for step in &buffer.steps {
        let lp = log_prob_of(actor, &step.observation, &step.pre_action, step.std, bounds);
        ratios.push((lp - step.log_prob).exp());
    }
    Ok(-surrogate_loss(&ratios, &batch.advantages, epsilon)?)
}

/// Runs `k_epochs` full-buffer gradient steps on the actor (clipped
/// surrogate) and critic (mean-squared error against returns). Clears
/// nothing; the caller owns buffer lifecycle. Diagnostics reflect the last
/// epoch's measurements (or a measurement-only pass when `k_epochs` is 0).
pub fn update(
    actor: &mut NetworkParameters,
    critic: &mut NetworkParameters,
    actor_opt: &mut OptimizerState,
    critic_opt: &mut OptimizerState,
    buffer: &ReplayBuffer,
    bounds: &[f64],
    config: &PpoConfig,
) -> Result<UpdateDiagnostics, TrainError> {
    if !buffer.ends_on_episode_boundary() {
        return Err(TrainError::IncompleteBuffer);
    }
    let rewards: Vec<f64> = buffer.steps.iter().map(|s| s.reward).collect();
    let values: Vec<f64> = buffer.steps.iter().map(|s| s.value).collect();
    let dones: Vec<bool> = buffer.steps.iter().map(|s| s.done).collect();
    let mut batch = gae(&rewards, &values, &dones, config.discount, config.gae_lambda);
    if config.normalize_advantages {
        normalize_in_place(&mut batch.advantages);
        batch.normalized = true;
    }

    let mut last = None;
    for _ in 0..config.k_epochs {
        let (actor_grads, critic_grads, measurement) =
            epoch_pass(actor, critic, buffer, &batch, bounds, config)?;
        actor_opt.apply(actor, &actor_grads)?;
        critic_opt.apply(critic, &critic_grads)?;
        last = Some(measurement);
    }
    let measurement = match last {
        Some(m) => m,
        // Measurement-only pass so diagnostics are well-defined for a null
        // update.
        None => epoch_pass(actor, critic, buffer, &batch, bounds, config)?.2,
    };

    let episodes = buffer.n_episodes().max(1) as f64;
    Ok(UpdateDiagnostics {
        mean_ratio: measurement.mean_ratio,
        clip_fraction: measurement.clip_fraction,
        policy_loss: measurement.policy_loss,
        value_loss: measurement.value_loss,
        mean_episode_reward: rewards.iter().sum::<f64>() / episodes,
        exploration_std: buffer.steps.last().map(|s| s.std).unwrap_or(0.0),
    })
}

fn normalize_in_place(advantages: &mut [f64]) {
    let n = advantages.len() as f64;
    let mean = advantages.iter().sum::<f64>() / n;
    let var = advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for a in advantages.iter_mut() {
        *a = (*a - mean) / std;
    }
}
