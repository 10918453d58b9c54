use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::msl::{eqw, ttb, wadd, ModelProgram};
use crate::regret::DEFAULT_THRESHOLD;
use crate::reviser::ReviserConfig;

use super::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelClass {
    Wadd,
    Ttb,
    Eqw,
}

impl ModelClass {
    pub const ALL: [ModelClass; 3] = [ModelClass::Wadd, ModelClass::Ttb, ModelClass::Eqw];

    pub fn name(self) -> &'static str {
        match self {
            ModelClass::Wadd => "wadd",
            ModelClass::Ttb => "ttb",
            ModelClass::Eqw => "eqw",
        }
    }

    pub fn baseline(self) -> ModelProgram {
        match self {
            ModelClass::Wadd => wadd(),
            ModelClass::Ttb => ttb(),
            ModelClass::Eqw => eqw(),
        }
    }

    pub(crate) fn seed_tag(self) -> u64 {
        match self {
            ModelClass::Wadd => 1,
            ModelClass::Ttb => 2,
            ModelClass::Eqw => 3,
        }
    }
}

impl fmt::Display for ModelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown model class {s:?}; expected wadd, ttb or eqw"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptancePolicy {
    /// Every valid revision replaces the current model.
    AlwaysAccept,
    /// Revisions start from the lowest-AIC model seen so far.
    KeepBest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub iterations: usize,
    pub simulations_per_class: usize,
    pub threshold: f64,
    pub acceptance_policy: AcceptancePolicy,
    pub seed: u64,
    /// Optimizer start points per subject fit.
    pub restarts: usize,
    pub trials: PathBuf,
    pub reference: PathBuf,
    /// Not echoed to the run log; it does not affect results.
    #[serde(skip_serializing)]
    pub out_dir: PathBuf,
    /// Write full regret sets (not just their sizes) to the run log.
    pub log_regret_points: bool,
    pub reviser: ReviserConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            iterations: 5,
            simulations_per_class: 10,
            threshold: DEFAULT_THRESHOLD,
            acceptance_policy: AcceptancePolicy::AlwaysAccept,
            seed: 0,
            restarts: 10,
            trials: PathBuf::from("trials.csv"),
            reference: PathBuf::from("reference.csv"),
            out_dir: PathBuf::from("out"),
            log_regret_points: false,
            reviser: ReviserConfig::default(),
        }
    }
}

impl RunConfig {
    /// Checks the loop settings. Reviser settings are checked when a reviser
    /// is built, since callers may supply their own.
    pub fn validate(&self) -> Result<(), EngineError> {
        let fail = |m: &str| Err(EngineError::Config(m.to_owned()));
        if self.iterations == 0 {
            return fail("iterations must be at least 1");
        }
        if self.simulations_per_class == 0 {
            return fail("simulations_per_class must be at least 1");
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return fail("threshold must be positive");
        }
        if self.restarts == 0 {
            return fail("restarts must be at least 1");
        }
        Ok(())
    }
}
