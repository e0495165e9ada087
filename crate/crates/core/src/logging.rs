//! CSV emission for training and evaluation artifacts. Every file uses a
//! fixed header with a constant column count; floats are written with
//! Rust's shortest round-trip formatting so files re-parse exactly.

use std::io::{self, BufWriter, Write};
use std::path::Path;

/// Writes `header` plus one line per row to `path`, creating parent
/// directories as needed.
pub fn write_csv<I>(path: &Path, header: &str, rows: I) -> io::Result<()>
where
    I: IntoIterator<Item = String>,
{
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{row}")?;
    }
    w.flush()
}

pub const REWARD_HEADER: &str = "episode,agent,reward";
pub const DIAGNOSTICS_HEADER: &str =
    "update,agent,mean_ratio,clip_fraction,policy_loss,value_loss,mean_episode_reward";
pub const TRAJECTORY_HEADER: &str = "episode,year,jurisdiction,risk_group,new_infections,\
cost,budget,reward,action_unaware,action_art,action_prep,\
saturated_unaware,saturated_art,saturated_prep";
pub const COMPARISON_HEADER: &str =
    "arm,action_multiplier,budget_multiplier,seed,mode,year,jurisdiction,new_infections,cost";
pub const COMPARISON_SUMMARY_HEADER: &str = "arm,action_multiplier,budget_multiplier,seed,\
sarl_cumulative_incidence,marl_cumulative_incidence,marl_minus_sarl";
pub const MIXING_HEADER: &str = "seed,year,jurisdiction,scenario,new_infections,cost";
pub const MIXING_SUMMARY_HEADER: &str = "seed,without_mixing_cumulative_incidence,\
with_mixing_cumulative_incidence,with_minus_without";
