//! Scenario configuration: the JSON-encoded description of a simulated
//! region (jurisdictions, epidemiological parameters, mixing, costs,
//! budgets, action bounds) plus validation and built-in templates.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::{ActionBounds, CostModel, PenaltyConfig};
use crate::epi::{
    CompartmentBlock, EpiParams, JurisdictionInfo, MixingMatrix, MixingWeights, RiskGroup,
    SystemState, World, N_CARE, N_DISEASE, N_GROUPS,
};
use crate::error::ConfigError;

pub const SCHEMA_VERSION: u32 = 1;

/// Initial compartment occupancies for one (jurisdiction, risk group).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockInit {
    pub susceptible: f64,
    #[serde(default)]
    pub on_prep: f64,
    /// Person-counts indexed `[care stage][disease stage]` in the order
    /// (unaware, aware_no_art, art_no_vls, art_vls) x (acute, cd4_gt_500,
    /// cd4_351_500, cd4_201_350, cd4_lt_200).
    pub infected: [[f64; N_DISEASE]; N_CARE],
}

impl BlockInit {
    pub fn empty(susceptible: f64) -> Self {
        BlockInit {
            susceptible,
            on_prep: 0.0,
            infected: [[0.0; N_DISEASE]; N_CARE],
        }
    }

    fn to_block(&self) -> CompartmentBlock {
        CompartmentBlock {
            susceptible: self.susceptible,
            on_prep: self.on_prep,
            infected: self.infected,
            cumulative_dead: 0.0,
        }
    }

    pub fn pwh(&self) -> f64 {
        self.infected.iter().flatten().sum()
    }
}

/// Per-year budget override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetOverride {
    pub year: i32,
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JurisdictionConfig {
    pub id: String,
    /// State grouping used by the mixing tiers.
    pub state: String,
    /// Budget applied to every simulated year unless overridden.
    pub annual_budget: f64,
    #[serde(default)]
    pub budget_overrides: Vec<BudgetOverride>,
    /// Yearly susceptible inflow per risk group (HM, HF, MSM); falls back
    /// to `params.maturation_in` for each group when absent.
    #[serde(default)]
    pub maturation_in: Option<[f64; N_GROUPS]>,
    pub hm: BlockInit,
    pub hf: BlockInit,
    pub msm: BlockInit,
}

impl JurisdictionConfig {
    pub fn block(&self, k: RiskGroup) -> &BlockInit {
        match k {
            RiskGroup::Hm => &self.hm,
            RiskGroup::Hf => &self.hf,
            RiskGroup::Msm => &self.msm,
        }
    }

    pub fn total_population(&self) -> f64 {
        RiskGroup::ALL
            .iter()
            .map(|&k| {
                let b = self.block(k);
                b.susceptible + b.pwh()
            })
            .sum()
    }
}

/// Complete description of a simulated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    /// Free-text provenance note; placeholder values should be flagged here.
    #[serde(default)]
    pub note: Option<String>,
    pub start_year: i32,
    /// Episode length in years.
    pub horizon_years: u32,
    pub substeps_per_year: u32,
    pub params: EpiParams,
    /// Raw mixing rows; renormalized to sum 1 when the model is built.
    pub mixing: MixingMatrix,
    pub cost_model: CostModel,
    pub action_bounds: ActionBounds,
    pub penalty: PenaltyConfig,
    pub jurisdictions: Vec<JurisdictionConfig>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::SchemaVersion {
                found: self.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        if self.jurisdictions.is_empty() {
            return Err(ConfigError::NoJurisdictions);
        }
        if self.horizon_years < 1 {
            return Err(ConfigError::field("horizon_years", "must be at least 1"));
        }
        if self.substeps_per_year < 1 {
            return Err(ConfigError::field("substeps_per_year", "must be at least 1"));
        }

        let mut seen = BTreeSet::new();
        for jc in &self.jurisdictions {
            if jc.id.is_empty() {
                return Err(ConfigError::field("jurisdictions.id", "must be non-empty"));
            }
            if jc.state.is_empty() {
                return Err(ConfigError::field(
                    format!("jurisdictions[{}].state", jc.id),
                    "must be non-empty",
                ));
            }
            if !seen.insert(jc.id.clone()) {
                return Err(ConfigError::DuplicateJurisdiction(jc.id.clone()));
            }
            if !jc.annual_budget.is_finite() || jc.annual_budget < 0.0 {
                return Err(ConfigError::field(
                    format!("jurisdictions[{}].annual_budget", jc.id),
                    "must be finite and non-negative",
                ));
            }
            for o in &jc.budget_overrides {
                if !o.budget.is_finite() || o.budget < 0.0 {
                    return Err(ConfigError::field(
                        format!("jurisdictions[{}].budget_overrides[{}]", jc.id, o.year),
                        "must be finite and non-negative",
                    ));
                }
            }
            if let Some(m) = jc.maturation_in {
                for v in m {
                    if !v.is_finite() || v < 0.0 {
                        return Err(ConfigError::field(
                            format!("jurisdictions[{}].maturation_in", jc.id),
                            "entries must be finite and non-negative",
                        ));
                    }
                }
            }
            for k in RiskGroup::ALL {
                let b = jc.block(k);
                if b.susceptible < 0.0 || !b.susceptible.is_finite() {
                    return Err(ConfigError::NegativeInitialCount {
                        jurisdiction: jc.id.clone(),
                        group: k.label().to_string(),
                        compartment: "susceptible".to_string(),
                        value: b.susceptible,
                    });
                }
                if b.on_prep < 0.0 || !b.on_prep.is_finite() {
                    return Err(ConfigError::NegativeInitialCount {
                        jurisdiction: jc.id.clone(),
                        group: k.label().to_string(),
                        compartment: "on_prep".to_string(),
                        value: b.on_prep,
                    });
                }
                if b.on_prep > b.susceptible {
                    return Err(ConfigError::PrepExceedsSusceptible {
                        jurisdiction: jc.id.clone(),
                        group: k.label().to_string(),
                        on_prep: b.on_prep,
                        susceptible: b.susceptible,
                    });
                }
                for (c, row) in b.infected.iter().enumerate() {
                    for (d, &v) in row.iter().enumerate() {
                        if v < 0.0 || !v.is_finite() {
                            return Err(ConfigError::NegativeInitialCount {
                                jurisdiction: jc.id.clone(),
                                group: k.label().to_string(),
                                compartment: format!("infected[{c}][{d}]"),
                                value: v,
                            });
                        }
                    }
                }
            }
        }

        validate_params(&self.params)?;
        crate::epi::renormalize_mixing(&self.mixing)?;
        self.cost_model.validate()?;
        self.action_bounds.validate()?;
        self.penalty.validate()?;
        Ok(())
    }

    /// Builds the immutable model context from this config.
    pub fn world(&self) -> Result<World, ConfigError> {
        self.validate()?;
        let default_maturation = [self.params.maturation_in; N_GROUPS];
        let infos = self
            .jurisdictions
            .iter()
            .map(|jc| JurisdictionInfo {
                id: jc.id.clone(),
                state: jc.state.clone(),
                maturation_in: jc.maturation_in.unwrap_or(default_maturation),
            })
            .collect();
        World::new(infos, self.params.clone(), &self.mixing)
    }

    pub fn jurisdiction_index(&self, id: &str) -> Option<usize> {
        self.jurisdictions.iter().position(|jc| jc.id == id)
    }

    pub fn total_annual_budget(&self) -> f64 {
        self.jurisdictions.iter().map(|jc| jc.annual_budget).sum()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization cannot fail")
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json_pretty() + "\n")
    }

    pub fn load(path: &Path) -> Result<Self, LoadError> {
        let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let config: ScenarioConfig =
            serde_json::from_str(&text).map_err(|e| LoadError::Parse {
                path: path.display().to_string(),
                source: e,
            })?;
        config.validate()?;
        Ok(config)
    }

    /// SHA-256 of the canonical (typed, re-serialized) JSON form. Stable
    /// under key reordering and whitespace changes in the source file.
    pub fn config_hash(&self) -> String {
        let canonical =
            serde_json::to_string(self).expect("scenario serialization cannot fail");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hex::encode(hasher.finalize())
    }

    /// Returns a copy with action bounds and all budgets multiplied.
    pub fn scaled(&self, action_multiplier: f64, budget_multiplier: f64) -> ScenarioConfig {
        let mut scaled = self.clone();
        scaled.action_bounds.unaware *= action_multiplier;
        scaled.action_bounds.art *= action_multiplier;
        scaled.action_bounds.prep *= action_multiplier;
        for jc in &mut scaled.jurisdictions {
            jc.annual_budget *= budget_multiplier;
            for o in &mut jc.budget_overrides {
                o.budget *= budget_multiplier;
            }
        }
        scaled
    }

    /// Returns a copy whose mixing matrix keeps every partnership inside
    /// its home jurisdiction.
    pub fn without_mixing(&self) -> ScenarioConfig {
        let mut cfg = self.clone();
        cfg.mixing = MixingMatrix::identity();
        cfg
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Invalid(#[from] ConfigError),
}

fn validate_params(p: &EpiParams) -> Result<(), ConfigError> {
    let check_rates = |name: &str, values: &[f64]| -> Result<(), ConfigError> {
        for &v in values {
            if !v.is_finite() || v < 0.0 {
                return Err(ConfigError::field(
                    format!("params.{name}"),
                    "rates must be finite and non-negative",
                ));
            }
        }
        Ok(())
    };
    check_rates("diagnostic_rate", &p.diagnostic_rate)?;
    check_rates("dropout_rate", &p.dropout_rate)?;
    check_rates("care_entry_rate", &p.care_entry_rate)?;
    check_rates("progression_rate", &p.progression_rate)?;
    check_rates("stage_mortality", &p.stage_mortality)?;
    check_rates("background_mortality", &[p.background_mortality])?;
    check_rates("maturation_in", &[p.maturation_in])?;
    for row in &p.transmission_rate {
        check_rates("transmission_rate", row)?;
    }

    let check_proportion = |name: &str, v: f64| -> Result<(), ConfigError> {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(ConfigError::field(
                format!("params.{name}"),
                "must lie in [0, 1]",
            ));
        }
        Ok(())
    };
    check_proportion("linkage_fraction", p.linkage_fraction)?;
    check_proportion("prep_efficacy", p.prep_efficacy)?;
    check_proportion("prep_indicated_fraction", p.prep_indicated_fraction)?;
    check_proportion("prep_infection_share", p.prep_infection_share)?;

    for &m in &p.transmissibility_multiplier {
        if !m.is_finite() || m < 0.0 {
            return Err(ConfigError::field(
                "params.transmissibility_multiplier",
                "must be finite and non-negative",
            ));
        }
    }
    // Viral suppression means no onward transmission; configs must not
    // override this.
    if p.transmissibility_multiplier[N_CARE - 1] != 0.0 {
        return Err(ConfigError::field(
            "params.transmissibility_multiplier",
            "the ART-VLS multiplier must be exactly 0",
        ));
    }
    if p.progression_rate[N_DISEASE - 1] != 0.0 {
        return Err(ConfigError::field(
            "params.progression_rate",
            "the final disease stage has no successor; its rate must be 0",
        ));
    }
    Ok(())
}

/// Builds the start-of-episode state described by `config`.
pub fn init_population(config: &ScenarioConfig) -> Result<SystemState, ConfigError> {
    config.validate()?;
    let blocks = config
        .jurisdictions
        .iter()
        .map(|jc| {
            [
                jc.hm.to_block(),
                jc.hf.to_block(),
                jc.msm.to_block(),
            ]
        })
        .collect();
    Ok(SystemState::new(config.start_year, blocks))
}

/// Default partnership mixing rows (the HM row sums to 0.99 on purpose;
/// rows are renormalized at model build time).
pub fn default_mixing() -> MixingMatrix {
    MixingMatrix {
        hm: MixingWeights {
            same_jurisdiction: 0.57,
            same_state_other: 0.28,
            other_state: 0.14,
        },
        hf: MixingWeights {
            same_jurisdiction: 0.65,
            same_state_other: 0.23,
            other_state: 0.12,
        },
        msm: MixingWeights {
            same_jurisdiction: 0.47,
            same_state_other: 0.31,
            other_state: 0.22,
        },
    }
}

/// Shared non-calibrated epidemiological defaults for the templates.
pub fn default_params() -> EpiParams {
    EpiParams {
        diagnostic_rate: [0.20, 0.25, 0.30, 0.35, 0.40],
        dropout_rate: [0.08, 0.08, 0.07, 0.06, 0.05],
        care_entry_rate: [0.35, 0.35, 0.40, 0.45, 0.50],
        linkage_fraction: 0.8,
        transmissibility_multiplier: [1.0, 0.7, 0.5, 0.0],
        progression_rate: [2.0, 0.12, 0.12, 0.15, 0.0],
        stage_mortality: [0.005, 0.010, 0.015, 0.030, 0.100],
        background_mortality: 0.009,
        maturation_in: 0.0,
        transmission_rate: [
            // acquiring HM:   from HM, HF, MSM
            [0.00, 0.08, 0.00],
            // acquiring HF
            [0.08, 0.00, 0.03],
            // acquiring MSM
            [0.00, 0.03, 0.27],
        ],
        prep_efficacy: 0.99,
        prep_indicated_fraction: 0.10,
        prep_infection_share: 0.50,
    }
}

fn default_cost_model() -> CostModel {
    CostModel {
        cost_per_test: 50.0,
        cost_retention_per_person_year: 3000.0,
        cost_prep_per_person_year: 5500.0,
        overhead_fraction: 0.10,
    }
}

/// Splits a PWH total over the care x disease grid by outer product of the
/// supplied marginal fractions.
fn spread_infected(pwh: f64, care_split: [f64; N_CARE], stage_split: [f64; N_DISEASE]) -> [[f64; N_DISEASE]; N_CARE] {
    let mut infected = [[0.0; N_DISEASE]; N_CARE];
    for c in 0..N_CARE {
        for d in 0..N_DISEASE {
            infected[c][d] = pwh * care_split[c] * stage_split[d];
        }
    }
    infected
}

const TEMPLATE_CARE_SPLIT: [f64; N_CARE] = [0.15, 0.15, 0.25, 0.45];
const TEMPLATE_STAGE_SPLIT: [f64; N_DISEASE] = [0.02, 0.38, 0.30, 0.20, 0.10];

/// Care mix for a group at the center of an uncontrolled local epidemic:
/// a large undiagnosed pool and weak treatment coverage.
const EPICENTER_CARE_SPLIT: [f64; N_CARE] = [0.30, 0.25, 0.20, 0.25];

/// Care mix for a group with a small, well-managed epidemic.
const QUIET_CARE_SPLIT: [f64; N_CARE] = [0.10, 0.10, 0.25, 0.55];

fn template_block(susceptible: f64, pwh: f64) -> BlockInit {
    block_with_split(susceptible, pwh, TEMPLATE_CARE_SPLIT)
}

fn block_with_split(susceptible: f64, pwh: f64, care_split: [f64; N_CARE]) -> BlockInit {
    BlockInit {
        susceptible,
        on_prep: 0.0,
        infected: spread_infected(pwh, care_split, TEMPLATE_STAGE_SPLIT),
    }
}

const NON_CALIBRATED_NOTE: &str = "Epidemiological values are illustrative placeholders, \
not calibrated to surveillance data. Edit before drawing real-world conclusions.";

/// Partnership mixing for the desk scenario: contacts are almost entirely
/// local, so each jurisdiction's epidemic is mostly driven by its own
/// policy, with a thin cross-jurisdiction channel that still lets the
/// urban MSM epidemic seed the large suburban MSM pool.
fn desk_mixing() -> MixingMatrix {
    let local = MixingWeights {
        same_jurisdiction: 0.95,
        same_state_other: 0.04,
        other_state: 0.01,
    };
    MixingMatrix {
        hm: local,
        hf: local,
        msm: local,
    }
}

/// Epidemiological parameters for the desk scenario. Compared to the
/// shared defaults, transmission is pushed up for MSM partnerships and
/// slightly up for heterosexual ones so that the two template epidemics
/// (one concentrated, one dispersed) are both clearly active over the
/// planning horizon, and a larger slice of the susceptible pool counts as
/// indicated for pre-exposure prophylaxis so coverage decisions carry
/// real budget weight.
fn desk_params() -> EpiParams {
    EpiParams {
        transmission_rate: [
            // acquiring HM:   from HM, HF, MSM
            [0.00, 0.10, 0.00],
            // acquiring HF
            [0.10, 0.00, 0.04],
            // acquiring MSM
            [0.00, 0.04, 0.42],
        ],
        prep_indicated_fraction: 0.15,
        ..default_params()
    }
}

/// Two-jurisdiction desk-scale scenario with deliberately mismatched
/// epidemics: the urban core carries a concentrated, poorly diagnosed MSM
/// epidemic while the remainder of the state carries a dispersed
/// heterosexual one. The locally sensible intervention mix therefore
/// differs by jurisdiction, which is what makes the scenario interesting
/// for comparing pooled against per-jurisdiction control.
pub fn desk_template() -> ScenarioConfig {
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: "desk".to_string(),
        note: Some(NON_CALIBRATED_NOTE.to_string()),
        start_year: 2019,
        horizon_years: 12,
        substeps_per_year: 12,
        params: desk_params(),
        mixing: desk_mixing(),
        cost_model: default_cost_model(),
        action_bounds: ActionBounds::default(),
        penalty: PenaltyConfig {
            weight: 0.3,
            ..PenaltyConfig::default()
        },
        jurisdictions: vec![
            JurisdictionConfig {
                id: "METRO".to_string(),
                state: "NS".to_string(),
                annual_budget: 28_000_000.0,
                budget_overrides: Vec::new(),
                maturation_in: Some([600.0, 600.0, 500.0]),
                hm: block_with_split(60_000.0, 150.0, QUIET_CARE_SPLIT),
                hf: block_with_split(60_000.0, 250.0, QUIET_CARE_SPLIT),
                msm: block_with_split(20_000.0, 6_000.0, EPICENTER_CARE_SPLIT),
            },
            JurisdictionConfig {
                id: "REST".to_string(),
                state: "NS".to_string(),
                annual_budget: 27_000_000.0,
                budget_overrides: Vec::new(),
                maturation_in: Some([950.0, 950.0, 700.0]),
                hm: block_with_split(90_000.0, 2_600.0, EPICENTER_CARE_SPLIT),
                hf: block_with_split(90_000.0, 3_400.0, EPICENTER_CARE_SPLIT),
                msm: block_with_split(40_000.0, 250.0, QUIET_CARE_SPLIT),
            },
        ],
    }
}

struct SkeletonSpec {
    id: &'static str,
    weight: f64,
    msm_share: f64,
    prevalence_per_1000: f64,
}

fn skeleton(
    name: &str,
    state: &str,
    total_budget: f64,
    base_population: f64,
    specs: &[SkeletonSpec],
) -> ScenarioConfig {
    let per_jurisdiction_budget = total_budget / specs.len() as f64;
    let jurisdictions = specs
        .iter()
        .map(|s| {
            let pop = base_population * s.weight;
            let msm = pop * s.msm_share;
            let het = pop - msm;
            let pwh_total = pop * s.prevalence_per_1000 / 1000.0;
            // Concentrate the epidemic in the MSM group, as in US
            // surveillance patterns.
            let pwh_msm = pwh_total * 0.65;
            let pwh_hm = pwh_total * 0.15;
            let pwh_hf = pwh_total * 0.20;
            JurisdictionConfig {
                id: s.id.to_string(),
                state: state.to_string(),
                annual_budget: per_jurisdiction_budget,
                budget_overrides: Vec::new(),
                maturation_in: Some([het / 2.0 * 0.011, het / 2.0 * 0.011, msm * 0.011]),
                hm: template_block(het / 2.0 - pwh_hm, pwh_hm),
                hf: template_block(het / 2.0 - pwh_hf, pwh_hf),
                msm: template_block(msm - pwh_msm, pwh_msm),
            }
        })
        .collect();
    ScenarioConfig {
        schema_version: SCHEMA_VERSION,
        name: name.to_string(),
        note: Some(NON_CALIBRATED_NOTE.to_string()),
        start_year: 2019,
        horizon_years: 12,
        substeps_per_year: 12,
        params: default_params(),
        mixing: default_mixing(),
        cost_model: default_cost_model(),
        action_bounds: ActionBounds::default(),
        penalty: PenaltyConfig::default(),
        jurisdictions,
    }
}

/// Eight-jurisdiction California skeleton; budgets split the state's
/// $54.3M EHE allocation equally.
pub fn california_template() -> ScenarioConfig {
    skeleton(
        "california",
        "California",
        54_300_000.0,
        140_000.0,
        &[
            SkeletonSpec { id: "CA1-Alameda", weight: 1.0, msm_share: 0.045, prevalence_per_1000: 3.4 },
            SkeletonSpec { id: "CA2-LosAngeles", weight: 6.0, msm_share: 0.050, prevalence_per_1000: 4.6 },
            SkeletonSpec { id: "CA3-OrangeCA", weight: 1.9, msm_share: 0.040, prevalence_per_1000: 2.2 },
            SkeletonSpec { id: "CA4-Riverside", weight: 1.5, msm_share: 0.038, prevalence_per_1000: 2.6 },
            SkeletonSpec { id: "CA5-Sacramento", weight: 0.9, msm_share: 0.040, prevalence_per_1000: 2.4 },
            SkeletonSpec { id: "CA6-SanBernardino", weight: 1.3, msm_share: 0.036, prevalence_per_1000: 2.1 },
            SkeletonSpec { id: "CA7-SanDiego", weight: 2.0, msm_share: 0.046, prevalence_per_1000: 3.0 },
            SkeletonSpec { id: "CA8-RestOfCalifornia", weight: 4.4, msm_share: 0.036, prevalence_per_1000: 1.6 },
        ],
    )
}

/// Eight-jurisdiction Florida skeleton; budgets split the state's $48.4M
/// EHE allocation equally.
pub fn florida_template() -> ScenarioConfig {
    skeleton(
        "florida",
        "Florida",
        48_400_000.0,
        120_000.0,
        &[
            SkeletonSpec { id: "FL1-Broward", weight: 1.3, msm_share: 0.055, prevalence_per_1000: 6.3 },
            SkeletonSpec { id: "FL2-Duval", weight: 0.7, msm_share: 0.040, prevalence_per_1000: 4.2 },
            SkeletonSpec { id: "FL3-Hillsborough", weight: 1.0, msm_share: 0.044, prevalence_per_1000: 3.8 },
            SkeletonSpec { id: "FL4-MiamiDade", weight: 1.9, msm_share: 0.056, prevalence_per_1000: 7.6 },
            SkeletonSpec { id: "FL5-OrangeFL", weight: 0.95, msm_share: 0.046, prevalence_per_1000: 4.4 },
            SkeletonSpec { id: "FL6-PalmBeach", weight: 1.0, msm_share: 0.042, prevalence_per_1000: 3.9 },
            SkeletonSpec { id: "FL7-Pinellas", weight: 0.65, msm_share: 0.044, prevalence_per_1000: 3.6 },
            SkeletonSpec { id: "FL8-RestOfFlorida", weight: 7.5, msm_share: 0.034, prevalence_per_1000: 2.3 },
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_validate_and_build() {
        for cfg in [desk_template(), california_template(), florida_template()] {
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", cfg.name));
            let world = cfg.world().unwrap();
            assert_eq!(world.n_jurisdictions(), cfg.jurisdictions.len());
            let state = init_population(&cfg).unwrap();
            assert_eq!(state.year(), 2019);
            assert_eq!(state.n_jurisdictions(), cfg.jurisdictions.len());
        }
    }

    #[test]
    fn empty_epidemic_config_builds_empty_state() {
        let mut cfg = desk_template();
        cfg.jurisdictions.truncate(1);
        let jc = &mut cfg.jurisdictions[0];
        jc.hm = BlockInit::empty(10_000.0);
        jc.hf = BlockInit::empty(10_000.0);
        jc.msm = BlockInit::empty(10_000.0);
        let state = init_population(&cfg).unwrap();
        for k in RiskGroup::ALL {
            assert_eq!(state.block(0, k).pwh(), 0.0);
        }
        assert_eq!(state.block(0, RiskGroup::Hm).susceptible, 10_000.0);
        assert_eq!(state.block(0, RiskGroup::Hm).cumulative_dead, 0.0);
    }

    #[test]
    fn two_jurisdictions_produce_six_blocks() {
        let cfg = desk_template();
        let state = init_population(&cfg).unwrap();
        assert_eq!(state.n_jurisdictions(), 2);
        // All six blocks exist and are independently addressable.
        for j in 0..2 {
            for k in RiskGroup::ALL {
                let _ = state.block(j, k);
            }
        }
    }

    #[test]
    fn negative_initial_count_is_rejected_with_location() {
        let mut cfg = desk_template();
        cfg.jurisdictions[1].msm.infected[2][3] = -5.0;
        let err = init_population(&cfg).unwrap_err();
        match err {
            ConfigError::NegativeInitialCount {
                jurisdiction,
                group,
                compartment,
                value,
            } => {
                assert_eq!(jurisdiction, "REST");
                assert_eq!(group, "MSM");
                assert_eq!(compartment, "infected[2][3]");
                assert_eq!(value, -5.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn negative_susceptible_is_rejected() {
        let mut cfg = desk_template();
        cfg.jurisdictions[0].hm.susceptible = -5.0;
        assert!(matches!(
            init_population(&cfg),
            Err(ConfigError::NegativeInitialCount { .. })
        ));
    }

    #[test]
    fn vls_transmissibility_override_is_rejected() {
        let mut cfg = desk_template();
        cfg.params.transmissibility_multiplier[3] = 0.1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let mut cfg = desk_template();
        cfg.jurisdictions[1].id = cfg.jurisdictions[0].id.clone();
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::DuplicateJurisdiction(_))
        ));
    }

    #[test]
    fn json_round_trip_preserves_config_and_hash() {
        let cfg = desk_template();
        let text = cfg.to_json_pretty();
        let parsed: ScenarioConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed, cfg);
        assert_eq!(parsed.config_hash(), cfg.config_hash());
    }

    #[test]
    fn hash_is_stable_under_key_reordering() {
        let cfg = desk_template();
        let value: serde_json::Value = serde_json::from_str(&cfg.to_json_pretty()).unwrap();
        // Rebuild the JSON with keys in a different order by serializing the
        // generic value (object key order differs from struct field order).
        let reordered = serde_json::to_string(&value).unwrap();
        let parsed: ScenarioConfig = serde_json::from_str(&reordered).unwrap();
        assert_eq!(parsed.config_hash(), cfg.config_hash());
    }

    #[test]
    fn skeleton_budgets_match_state_totals() {
        let ca = california_template();
        let fl = florida_template();
        assert_eq!(ca.jurisdictions.len(), 8);
        assert_eq!(fl.jurisdictions.len(), 8);
        assert!((ca.total_annual_budget() - 54_300_000.0).abs() < 1e-6);
        assert!((fl.total_annual_budget() - 48_400_000.0).abs() < 1e-6);
        let per = ca.jurisdictions[0].annual_budget;
        assert!(ca.jurisdictions.iter().all(|j| j.annual_budget == per));
    }

    #[test]
    fn scaled_multiplies_bounds_and_budgets() {
        let cfg = desk_template();
        let scaled = cfg.scaled(2.0, 10.0);
        assert!((scaled.action_bounds.unaware - 0.01).abs() < 1e-15);
        assert!((scaled.action_bounds.art - 0.08).abs() < 1e-15);
        assert!((scaled.action_bounds.prep - 0.08).abs() < 1e-15);
        for (orig, s) in cfg.jurisdictions.iter().zip(&scaled.jurisdictions) {
            assert_eq!(s.annual_budget, orig.annual_budget * 10.0);
        }
        // Identity scaling is a no-op, including the hash.
        let same = cfg.scaled(1.0, 1.0);
        assert_eq!(same.config_hash(), cfg.config_hash());
    }

    #[test]
    fn without_mixing_forces_identity_rows() {
        let cfg = desk_template().without_mixing();
        assert_eq!(cfg.mixing, MixingMatrix::identity());
        cfg.validate().unwrap();
    }
}
