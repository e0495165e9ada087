//! Decision-process wrapper around the simulator: care-continuum
//! observations, proportion-change actions inverted into simulator rates,
//! cost accounting, budget-penalized rewards, and the episodic
//! environment stepped once per simulated year.

use serde::{Deserialize, Serialize};

use crate::epi::{
    step_year, ChannelRates, EpiParams, InterventionRates, RiskGroup, StepOutcome, SystemState,
    World, N_GROUPS, RATE_CAP,
};
use crate::error::{ConfigError, SimError};
use crate::scenario::ScenarioConfig;

/// Observation width per agent: 5 care-continuum proportions per risk group.
pub const OBSERVATION_WIDTH: usize = 5 * N_GROUPS;
/// Action width per agent: 3 intervention channels per risk group.
pub const ACTION_WIDTH: usize = 3 * N_GROUPS;

/// Absolute tolerance, in proportion points, for the rate inversion.
pub const INVERSION_TOLERANCE: f64 = 1e-6;
const MAX_BISECTION_ITERATIONS: u32 = 60;
/// Multiplier ceiling when a channel has dropout to suppress but no
/// care-entry rate to amplify; the dropout rate divides toward zero.
const DROPOUT_ONLY_MULTIPLIER_LIMIT: f64 = 1e6;

/// Care-continuum summary for one risk group.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroupObservation {
    /// PWH share of the alive population (susceptible + PWH).
    pub prevalence: f64,
    /// Unaware share of PWH; 0 when the group has no PWH.
    pub unaware_fraction: f64,
    /// Aware-but-not-on-ART share of PWH; 0 when the group has no PWH.
    pub aware_fraction: f64,
    /// On-ART (suppressed or not) share of PWH; 0 when the group has no PWH.
    pub art_fraction: f64,
    /// PrEP coverage among the indicated susceptible pool, clamped to [0, 1].
    pub prep_coverage: f64,
}

/// What one agent sees: a [`GroupObservation`] per risk group, flattened to
/// 15 reals in (HM, HF, MSM) x (prevalence, unaware, aware, art, prep) order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Observation {
    pub groups: [GroupObservation; N_GROUPS],
}

impl Observation {
    pub fn group(&self, k: RiskGroup) -> &GroupObservation {
        &self.groups[k.index()]
    }

    pub fn as_vector(&self) -> [f64; OBSERVATION_WIDTH] {
        let mut v = [0.0; OBSERVATION_WIDTH];
        for (i, g) in self.groups.iter().enumerate() {
            v[5 * i] = g.prevalence;
            v[5 * i + 1] = g.unaware_fraction;
            v[5 * i + 2] = g.aware_fraction;
            v[5 * i + 3] = g.art_fraction;
            v[5 * i + 4] = g.prep_coverage;
        }
        v
    }
}

/// Requested one-year proportion changes for one risk group, all in
/// proportion points and all non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroupAction {
    /// Decrease in the unaware share of PWH.
    pub unaware: f64,
    /// Increase in the on-ART share of PWH.
    pub art: f64,
    /// Increase in PrEP coverage among the indicated pool.
    pub prep: f64,
}

/// One agent's action: a [`GroupAction`] per risk group, flattened to 9
/// reals in (HM, HF, MSM) x (unaware, art, prep) order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActionVector {
    pub groups: [GroupAction; N_GROUPS],
}

impl ActionVector {
    pub fn zeros() -> Self {
        Self::default()
    }

    pub fn group(&self, k: RiskGroup) -> &GroupAction {
        &self.groups[k.index()]
    }

    pub fn group_mut(&mut self, k: RiskGroup) -> &mut GroupAction {
        &mut self.groups[k.index()]
    }

    pub fn as_flat(&self) -> [f64; ACTION_WIDTH] {
        let mut v = [0.0; ACTION_WIDTH];
        for (i, g) in self.groups.iter().enumerate() {
            v[3 * i] = g.unaware;
            v[3 * i + 1] = g.art;
            v[3 * i + 2] = g.prep;
        }
        v
    }

    pub fn from_flat(v: &[f64; ACTION_WIDTH]) -> Self {
        let mut action = ActionVector::default();
        for (i, g) in action.groups.iter_mut().enumerate() {
            g.unaware = v[3 * i];
            g.art = v[3 * i + 1];
            g.prep = v[3 * i + 2];
        }
        action
    }
}

/// Per-channel ceilings on the yearly proportion changes an agent may
/// request, in proportion points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    pub unaware: f64,
    pub art: f64,
    pub prep: f64,
}

impl Default for ActionBounds {
    fn default() -> Self {
        ActionBounds {
            unaware: 0.005,
            art: 0.04,
            prep: 0.04,
        }
    }
}

impl ActionBounds {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("unaware", self.unaware),
            ("art", self.art),
            ("prep", self.prep),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(ConfigError::field(
                    format!("action_bounds.{name}"),
                    "must be finite and non-negative",
                ));
            }
        }
        Ok(())
    }

    /// Upper bound for each flattened action dimension, in
    /// [`ActionVector::as_flat`] order.
    pub fn per_dimension(&self) -> [f64; ACTION_WIDTH] {
        let mut v = [0.0; ACTION_WIDTH];
        for i in 0..N_GROUPS {
            v[3 * i] = self.unaware;
            v[3 * i + 1] = self.art;
            v[3 * i + 2] = self.prep;
        }
        v
    }

    /// Checks every component against its channel bound (with non-negativity
    /// and finiteness); returns the first offending flat index.
    pub fn check(&self, action: &ActionVector) -> Result<(), usize> {
        let bounds = self.per_dimension();
        let flat = action.as_flat();
        for (i, (&a, &b)) in flat.iter().zip(bounds.iter()).enumerate() {
            if !a.is_finite() || a < 0.0 || a > b {
                return Err(i);
            }
        }
        Ok(())
    }
}

/// Unit costs for the three intervention channels plus a proportional
/// overhead applied to the total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub cost_per_test: f64,
    pub cost_retention_per_person_year: f64,
    pub cost_prep_per_person_year: f64,
    pub overhead_fraction: f64,
}

impl CostModel {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("cost_per_test", self.cost_per_test),
            (
                "cost_retention_per_person_year",
                self.cost_retention_per_person_year,
            ),
            ("cost_prep_per_person_year", self.cost_prep_per_person_year),
            ("overhead_fraction", self.overhead_fraction),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(ConfigError::field(
                    format!("cost_model.{name}"),
                    "must be finite and non-negative",
                ));
            }
        }
        Ok(())
    }
}

/// How budget overruns enter the reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyForm {
    /// Only overspending is penalized: max(C - B, 0). Default.
    Rectified,
    /// The raw difference C - B enters the reward, so underspending is
    /// rewarded. Kept for sensitivity experiments.
    Signed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    /// Dimensionless weight on the budget penalty term.
    pub weight: f64,
    /// Currency treated as equivalent to one infection when converting the
    /// budget overrun into reward units.
    pub scale_per_infection: f64,
    pub form: PenaltyForm,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            weight: 1.0,
            scale_per_infection: 10_000.0,
            form: PenaltyForm::Rectified,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.weight.is_finite() || self.weight < 0.0 {
            return Err(ConfigError::field(
                "penalty.weight",
                "must be finite and non-negative",
            ));
        }
        if !self.scale_per_infection.is_finite() || self.scale_per_infection <= 0.0 {
            return Err(ConfigError::field(
                "penalty.scale_per_infection",
                "must be finite and positive",
            ));
        }
        Ok(())
    }

    /// Reward-unit penalty for spending `cost` against `budget`.
    pub fn penalty(&self, cost: f64, budget: f64) -> f64 {
        let overrun = match self.form {
            PenaltyForm::Rectified => (cost - budget).max(0.0),
            PenaltyForm::Signed => cost - budget,
        };
        self.weight * overrun / self.scale_per_infection
    }
}

/// Intervention channels an action controls, in flattened-action order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Unaware,
    Art,
    Prep,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Unaware, Channel::Art, Channel::Prep];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Channel::Unaware => "unaware",
            Channel::Art => "art",
            Channel::Prep => "prep",
        }
    }
}

/// Per-(risk group, channel) markers set when a requested proportion change
/// exceeded what any feasible rate could deliver within one year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SaturationFlags {
    flags: [[bool; 3]; N_GROUPS],
}

impl SaturationFlags {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_saturated(&self, k: RiskGroup, channel: Channel) -> bool {
        self.flags[k.index()][channel.index()]
    }

    pub fn set(&mut self, k: RiskGroup, channel: Channel, value: bool) {
        self.flags[k.index()][channel.index()] = value;
    }

    pub fn any(&self) -> bool {
        self.flags.iter().flatten().any(|&f| f)
    }

    /// Flags in [`ActionVector::as_flat`] order.
    pub fn as_flat(&self) -> [bool; ACTION_WIDTH] {
        let mut v = [false; ACTION_WIDTH];
        for (i, group) in self.flags.iter().enumerate() {
            v[3 * i..3 * i + 3].copy_from_slice(group);
        }
        v
    }
}

/// Care-continuum observation for one jurisdiction.
///
/// Proportions over an empty denominator are 0 by convention, which keeps
/// observations finite for empty epidemics.
pub fn observe(state: &SystemState, params: &EpiParams, j: usize) -> Observation {
    let mut obs = Observation::default();
    for k in RiskGroup::ALL {
        let block = state.block(j, k);
        let alive = block.alive();
        let (unaware, aware, art) = block.care_fractions();
        obs.groups[k.index()] = GroupObservation {
            prevalence: if alive > 0.0 { block.pwh() / alive } else { 0.0 },
            unaware_fraction: unaware,
            aware_fraction: aware,
            art_fraction: art,
            prep_coverage: params.prep_coverage(block),
        };
    }
    obs
}

/// System-wide observation built from counts pooled over every
/// jurisdiction, then reduced with the same ratios as [`observe`].
pub fn aggregate_sarl(state: &SystemState, params: &EpiParams) -> Observation {
    let mut obs = Observation::default();
    for k in RiskGroup::ALL {
        let mut pwh = 0.0;
        let mut alive = 0.0;
        let mut unaware = 0.0;
        let mut aware = 0.0;
        let mut art = 0.0;
        let mut on_prep = 0.0;
        let mut indicated = 0.0;
        for j in 0..state.n_jurisdictions() {
            let block = state.block(j, k);
            pwh += block.pwh();
            alive += block.alive();
            unaware += block.care_stage_total(crate::epi::CareStage::Unaware);
            aware += block.care_stage_total(crate::epi::CareStage::AwareNoArt);
            art += block.care_stage_total(crate::epi::CareStage::ArtNoVls)
                + block.care_stage_total(crate::epi::CareStage::ArtVls);
            on_prep += block.on_prep;
            indicated += params.prep_indicated_fraction * block.susceptible;
        }
        let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
        obs.groups[k.index()] = GroupObservation {
            prevalence: ratio(pwh, alive),
            unaware_fraction: ratio(unaware, pwh),
            aware_fraction: ratio(aware, pwh),
            art_fraction: ratio(art, pwh),
            prep_coverage: ratio(on_prep, indicated).clamp(0.0, 1.0),
        };
    }
    obs
}

/// Total intervention spend for jurisdiction `j` over one simulated year.
pub fn compute_cost(outcome: &StepOutcome, model: &CostModel, j: usize) -> f64 {
    let direct = outcome.tests_performed(j) * model.cost_per_test
        + outcome.care_person_years(j) * model.cost_retention_per_person_year
        + outcome.prep_person_years(j) * model.cost_prep_per_person_year;
    direct * (1.0 + model.overhead_fraction)
}

/// Yearly reward for jurisdiction `j`: negated new infections minus the
/// scaled budget penalty.
pub fn reward(
    outcome: &StepOutcome,
    cost: f64,
    budget: f64,
    j: usize,
    penalty: &PenaltyConfig,
) -> f64 {
    -outcome.total_new_infections(j) - penalty.penalty(cost, budget)
}

#[derive(Debug, Clone, Copy)]
enum InvertibleChannel {
    Diagnosis,
    ArtRetention,
}

struct ChannelInversion {
    multiplier: f64,
    saturated: bool,
}

fn apply_multiplier(
    rates: &mut ChannelRates,
    base: &ChannelRates,
    channel: InvertibleChannel,
    x: f64,
) {
    match channel {
        InvertibleChannel::Diagnosis => {
            for d in 0..base.diagnostic.len() {
                rates.diagnostic[d] = base.diagnostic[d] * x;
            }
        }
        InvertibleChannel::ArtRetention => {
            for d in 0..base.care_entry.len() {
                rates.care_entry[d] = base.care_entry[d] * x;
                rates.dropout[d] = base.dropout[d] / x;
            }
        }
    }
}

/// Largest useful multiplier for a channel, or `None` when the channel has
/// no nonzero baseline rate to amplify (a dead channel).
fn multiplier_ceiling(base: &ChannelRates, channel: InvertibleChannel) -> Option<f64> {
    let max_rate = |rates: &[f64]| rates.iter().cloned().fold(0.0_f64, f64::max);
    match channel {
        InvertibleChannel::Diagnosis => {
            let m = max_rate(&base.diagnostic);
            (m > 0.0).then(|| (RATE_CAP / m).max(1.0))
        }
        InvertibleChannel::ArtRetention => {
            let mg = max_rate(&base.care_entry);
            if mg > 0.0 {
                Some((RATE_CAP / mg).max(1.0))
            } else if max_rate(&base.dropout) > 0.0 {
                Some(DROPOUT_ONLY_MULTIPLIER_LIMIT)
            } else {
                None
            }
        }
    }
}

/// One-year metric under candidate rates: the unaware (diagnosis channel)
/// or on-ART (retention channel) share of PWH for block (j, k).
fn simulated_fraction(
    state: &SystemState,
    world: &World,
    rates: &InterventionRates,
    substeps_per_year: u32,
    j: usize,
    k: RiskGroup,
    channel: InvertibleChannel,
) -> Result<f64, SimError> {
    let (next, _) = step_year(state, rates, world, substeps_per_year)?;
    let (unaware, _, art) = next.block(j, k).care_fractions();
    Ok(match channel {
        InvertibleChannel::Diagnosis => unaware,
        InvertibleChannel::ArtRetention => art,
    })
}

/// Bisects a scalar multiplier over one block's channel rates until the
/// simulated one-year proportion change matches `amount`, holding every
/// other control at baseline.
#[allow(clippy::too_many_arguments)]
fn invert_channel(
    state: &SystemState,
    world: &World,
    substeps_per_year: u32,
    baseline: &InterventionRates,
    base_fraction: f64,
    j: usize,
    k: RiskGroup,
    channel: InvertibleChannel,
    amount: f64,
) -> Result<ChannelInversion, SimError> {
    if amount == 0.0 {
        return Ok(ChannelInversion {
            multiplier: 1.0,
            saturated: false,
        });
    }
    let base_block = *baseline.block(j, k);
    let Some(x_hi) = multiplier_ceiling(&base_block, channel) else {
        return Ok(ChannelInversion {
            multiplier: 1.0,
            saturated: true,
        });
    };

    // Diagnosis lowers the unaware share; retention raises the on-ART
    // share. `deficit` is positive while the candidate has not yet moved
    // the metric far enough, so a positive deficit means "increase x".
    let (target, deficit): (f64, fn(f64, f64) -> f64) = match channel {
        InvertibleChannel::Diagnosis => (base_fraction - amount, |f, t| f - t),
        InvertibleChannel::ArtRetention => (base_fraction + amount, |f, t| t - f),
    };

    let evaluate = |x: f64| -> Result<f64, SimError> {
        let mut candidate = baseline.clone();
        apply_multiplier(candidate.block_mut(j, k), &base_block, channel, x);
        simulated_fraction(state, world, &candidate, substeps_per_year, j, k, channel)
    };

    let f_hi = evaluate(x_hi)?;
    if (f_hi - target).abs() <= INVERSION_TOLERANCE {
        return Ok(ChannelInversion {
            multiplier: x_hi,
            saturated: false,
        });
    }
    if deficit(f_hi, target) > 0.0 {
        // Even the capped rates cannot deliver the requested change.
        return Ok(ChannelInversion {
            multiplier: x_hi,
            saturated: true,
        });
    }

    let (mut lo, mut hi) = (1.0, x_hi);
    for _ in 0..MAX_BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let f = evaluate(mid)?;
        if (f - target).abs() <= INVERSION_TOLERANCE {
            return Ok(ChannelInversion {
                multiplier: mid,
                saturated: false,
            });
        }
        if deficit(f, target) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // The bracket is ~1e-12 wide at this point; failing to meet tolerance
    // means the metric jumps discontinuously, so report the change as
    // undeliverable rather than silently off-target.
    Ok(ChannelInversion {
        multiplier: 0.5 * (lo + hi),
        saturated: true,
    })
}

/// Converts per-jurisdiction proportion-change actions into simulator
/// rates.
///
/// Each (jurisdiction, risk group, channel) is inverted independently by
/// bisection against a one-year simulation in which every other control
/// stays at baseline; targets are relative to the baseline one-year
/// outcome, so a zero action reproduces the baseline rates exactly. The
/// returned flags mark channels whose requested change was undeliverable
/// even at the rate cap.
pub fn invert_actions(
    state: &SystemState,
    world: &World,
    actions: &[(usize, ActionVector)],
    substeps_per_year: u32,
) -> Result<(InterventionRates, Vec<SaturationFlags>), SimError> {
    for &(j, action) in actions {
        world.check_jurisdiction(j)?;
        assert!(
            action.as_flat().iter().all(|&a| a.is_finite() && a >= 0.0),
            "action components must be finite and non-negative"
        );
    }

    let baseline = InterventionRates::baseline(world, state);

    // The baseline one-year outcome anchors every channel target; skip the
    // simulation when every requested change is zero.
    let needs_baseline = actions
        .iter()
        .any(|(_, a)| a.groups.iter().any(|g| g.unaware > 0.0 || g.art > 0.0));
    let base_fractions: Option<SystemState> = if needs_baseline {
        Some(step_year(state, &baseline, world, substeps_per_year)?.0)
    } else {
        None
    };

    let mut merged = baseline.clone();
    let mut all_flags = Vec::with_capacity(actions.len());
    for &(j, action) in actions {
        let mut flags = SaturationFlags::none();
        for k in RiskGroup::ALL {
            let group_action = action.group(k);
            let (base_unaware, base_art) = match &base_fractions {
                Some(next) => {
                    let (u, _, art) = next.block(j, k).care_fractions();
                    (u, art)
                }
                None => (0.0, 0.0),
            };

            let diagnosis = invert_channel(
                state,
                world,
                substeps_per_year,
                &baseline,
                base_unaware,
                j,
                k,
                InvertibleChannel::Diagnosis,
                group_action.unaware,
            )?;
            let retention = invert_channel(
                state,
                world,
                substeps_per_year,
                &baseline,
                base_art,
                j,
                k,
                InvertibleChannel::ArtRetention,
                group_action.art,
            )?;
            flags.set(k, Channel::Unaware, diagnosis.saturated);
            flags.set(k, Channel::Art, retention.saturated);

            let base_block = *baseline.block(j, k);
            let block = merged.block_mut(j, k);
            apply_multiplier(
                block,
                &base_block,
                InvertibleChannel::Diagnosis,
                diagnosis.multiplier,
            );
            apply_multiplier(
                block,
                &base_block,
                InvertibleChannel::ArtRetention,
                retention.multiplier,
            );

            let current_coverage = world.params.prep_coverage(state.block(j, k));
            let target = current_coverage + group_action.prep;
            block.prep_coverage_target = target.min(1.0);
            flags.set(k, Channel::Prep, target > 1.0);
        }
        all_flags.push(flags);
    }
    Ok((merged, all_flags))
}

/// Single-jurisdiction form of [`invert_actions`]: rates for `j` are
/// derived from `action` while every other jurisdiction keeps baseline
/// rates.
pub fn action_to_rates(
    state: &SystemState,
    world: &World,
    action: &ActionVector,
    j: usize,
    substeps_per_year: u32,
) -> Result<(InterventionRates, SaturationFlags), SimError> {
    let (rates, mut flags) = invert_actions(state, world, &[(j, *action)], substeps_per_year)?;
    Ok((rates, flags.pop().expect("one flag set per action")))
}

/// Whether one policy controls the pooled system or each jurisdiction has
/// its own learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Sarl,
    Marl,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Sarl => "sarl",
            Mode::Marl => "marl",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("expected {expected} action vectors, got {found}")]
    WrongActionCount { expected: usize, found: usize },
    #[error(
        "action component {component} for agent {agent} is {value}, outside [0, {bound}]"
    )]
    ActionOutOfBounds {
        agent: usize,
        component: String,
        value: f64,
        bound: f64,
    },
    #[error("episode already finished; call reset before stepping again")]
    EpisodeOver,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Everything logged about one jurisdiction in one simulated year.
#[derive(Debug, Clone)]
pub struct JurisdictionRecord {
    pub jurisdiction: usize,
    /// Calendar year that was simulated (the pre-step year).
    pub year: i32,
    pub new_infections: f64,
    pub cost: f64,
    pub budget: f64,
    /// Per-jurisdiction reward; informational in SARL mode, where the
    /// agent optimizes the pooled reward instead.
    pub reward: f64,
    pub action: ActionVector,
    pub saturation: SaturationFlags,
}

/// Result of advancing the environment by one year.
#[derive(Debug, Clone)]
pub struct EnvStep {
    /// One observation per agent, from the post-step state.
    pub observations: Vec<Observation>,
    /// One reward per agent.
    pub rewards: Vec<f64>,
    pub done: bool,
    pub outcome: StepOutcome,
    /// One record per jurisdiction regardless of mode.
    pub records: Vec<JurisdictionRecord>,
}

struct BudgetSchedule {
    annual: f64,
    overrides: Vec<(i32, f64)>,
}

/// Episodic environment: owns one system state, advances it a year per
/// step, and presents either pooled (SARL) or per-jurisdiction (MARL)
/// observations and rewards.
pub struct HivEnv {
    world: World,
    initial_state: SystemState,
    state: SystemState,
    mode: Mode,
    substeps_per_year: u32,
    horizon_years: u32,
    steps_taken: u32,
    bounds: ActionBounds,
    cost_model: CostModel,
    penalty: PenaltyConfig,
    budgets: Vec<BudgetSchedule>,
}

impl HivEnv {
    pub fn from_config(config: &ScenarioConfig, mode: Mode) -> Result<Self, ConfigError> {
        let world = config.world()?;
        let initial_state = crate::scenario::init_population(config)?;
        let budgets = config
            .jurisdictions
            .iter()
            .map(|jc| BudgetSchedule {
                annual: jc.annual_budget,
                overrides: jc
                    .budget_overrides
                    .iter()
                    .map(|o| (o.year, o.budget))
                    .collect(),
            })
            .collect();
        Ok(HivEnv {
            state: initial_state.clone(),
            initial_state,
            world,
            mode,
            substeps_per_year: config.substeps_per_year,
            horizon_years: config.horizon_years,
            steps_taken: 0,
            bounds: config.action_bounds,
            cost_model: config.cost_model,
            penalty: config.penalty,
            budgets,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn n_agents(&self) -> usize {
        match self.mode {
            Mode::Sarl => 1,
            Mode::Marl => self.world.n_jurisdictions(),
        }
    }

    pub fn n_jurisdictions(&self) -> usize {
        self.world.n_jurisdictions()
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn bounds(&self) -> ActionBounds {
        self.bounds
    }

    pub fn horizon_years(&self) -> u32 {
        self.horizon_years
    }

    pub fn done(&self) -> bool {
        self.steps_taken >= self.horizon_years
    }

    pub fn budget_for(&self, j: usize, year: i32) -> f64 {
        let schedule = &self.budgets[j];
        schedule
            .overrides
            .iter()
            .find(|(y, _)| *y == year)
            .map(|(_, b)| *b)
            .unwrap_or(schedule.annual)
    }

    /// Restores the initial state and returns the per-agent observations.
    pub fn reset(&mut self) -> Vec<Observation> {
        self.state = self.initial_state.clone();
        self.steps_taken = 0;
        self.observations()
    }

    /// Current per-agent observations: one pooled observation in SARL
    /// mode, one per jurisdiction in MARL mode.
    pub fn observations(&self) -> Vec<Observation> {
        match self.mode {
            Mode::Sarl => vec![aggregate_sarl(&self.state, &self.world.params)],
            Mode::Marl => (0..self.world.n_jurisdictions())
                .map(|j| observe(&self.state, &self.world.params, j))
                .collect(),
        }
    }

    /// Advances one simulated year. Expects one action per agent; in SARL
    /// mode the single action is broadcast to every jurisdiction.
    pub fn step(&mut self, actions: &[ActionVector]) -> Result<EnvStep, EnvError> {
        if self.done() {
            return Err(EnvError::EpisodeOver);
        }
        if actions.len() != self.n_agents() {
            return Err(EnvError::WrongActionCount {
                expected: self.n_agents(),
                found: actions.len(),
            });
        }
        let bounds = self.bounds.per_dimension();
        for (agent, action) in actions.iter().enumerate() {
            if let Err(i) = self.bounds.check(action) {
                let k = RiskGroup::ALL[i / 3];
                let channel = Channel::ALL[i % 3];
                return Err(EnvError::ActionOutOfBounds {
                    agent,
                    component: format!("{}.{}", k.label(), channel.label()),
                    value: action.as_flat()[i],
                    bound: bounds[i],
                });
            }
        }

        let n = self.world.n_jurisdictions();
        let per_jurisdiction: Vec<(usize, ActionVector)> = match self.mode {
            Mode::Sarl => (0..n).map(|j| (j, actions[0])).collect(),
            Mode::Marl => actions.iter().copied().enumerate().collect(),
        };
        let (rates, flags) =
            invert_actions(&self.state, &self.world, &per_jurisdiction, self.substeps_per_year)?;

        let year = self.state.year();
        let (next_state, outcome) =
            step_year(&self.state, &rates, &self.world, self.substeps_per_year)?;

        let mut records = Vec::with_capacity(n);
        for (idx, &(j, action)) in per_jurisdiction.iter().enumerate() {
            let cost = compute_cost(&outcome, &self.cost_model, j);
            let budget = self.budget_for(j, year);
            records.push(JurisdictionRecord {
                jurisdiction: j,
                year,
                new_infections: outcome.total_new_infections(j),
                cost,
                budget,
                reward: reward(&outcome, cost, budget, j, &self.penalty),
                action,
                saturation: flags[idx],
            });
        }

        let rewards = match self.mode {
            Mode::Sarl => {
                let total_cost: f64 = records.iter().map(|r| r.cost).sum();
                let total_budget: f64 = records.iter().map(|r| r.budget).sum();
                vec![
                    -outcome.system_new_infections()
                        - self.penalty.penalty(total_cost, total_budget),
                ]
            }
            Mode::Marl => records.iter().map(|r| r.reward).collect(),
        };

        self.state = next_state;
        self.steps_taken += 1;
        Ok(EnvStep {
            observations: self.observations(),
            rewards,
            done: self.done(),
            outcome,
            records,
        })
    }
}
