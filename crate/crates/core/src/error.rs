use thiserror::Error;

/// Errors raised while validating or building a scenario configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("configuration is empty: at least one jurisdiction is required")]
    NoJurisdictions,

    #[error("duplicate jurisdiction id `{0}`")]
    DuplicateJurisdiction(String),

    #[error("jurisdiction `{jurisdiction}` group {group}: negative initial count in {compartment}: {value}")]
    NegativeInitialCount {
        jurisdiction: String,
        group: String,
        compartment: String,
        value: f64,
    },

    #[error("jurisdiction `{jurisdiction}` group {group}: on_prep ({on_prep}) exceeds susceptible ({susceptible})")]
    PrepExceedsSusceptible {
        jurisdiction: String,
        group: String,
        on_prep: f64,
        susceptible: f64,
    },

    #[error("mixing row for {group} sums to zero")]
    ZeroMixingRow { group: String },

    #[error("mixing row for {group}: negative weight {value}")]
    NegativeMixingWeight { group: String, value: f64 },

    #[error("{field}: {message}")]
    InvalidField { field: String, message: String },

    #[error("unsupported schema_version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
}

impl ConfigError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::InvalidField {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Errors raised by the yearly integration step.
#[derive(Debug, Error)]
pub enum SimError {
    #[error(
        "negative compartment after sub-step {substep}: jurisdiction {jurisdiction} group {group} \
         {compartment} = {value:e}; the sub-step grid is too coarse for the supplied rates"
    )]
    NegativeCompartment {
        jurisdiction: usize,
        group: String,
        compartment: String,
        value: f64,
        substep: u32,
    },

    #[error("jurisdiction index {index} out of range ({count} configured)")]
    JurisdictionOutOfRange { index: usize, count: usize },
}
