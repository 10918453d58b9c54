//! Error classification, model lookup and config merging.

use std::fmt;
use std::fs;
use std::path::Path;

use asmr_core::data::DataError;
use asmr_core::engine::{AcceptancePolicy, EngineError, RunConfig};
use asmr_core::msl::{adaptive_validity, eqw, parse, ttb, wadd, ModelProgram};
use asmr_core::reviser::{ReviserError, ReviserMode};
use asmr_core::synth::SynthError;

use crate::LoopArgs;

#[derive(Debug)]
pub enum CliError {
    /// Unusable input; exit status 1.
    Input(String),
    /// Failure while working; exit status 2.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ReviserError> for CliError {
    fn from(e: ReviserError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        let text = e.to_string();
        match e {
            EngineError::Config(_)
            | EngineError::Data(_)
            | EngineError::Model(_)
            | EngineError::Reviser(_)
            | EngineError::Regret(_)
            | EngineError::Log(_) => CliError::Input(text),
            EngineError::Fit(_) | EngineError::Io(_) => CliError::Runtime(text),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Spec(_) | SynthError::Type(_) => CliError::Input(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

pub fn io_error(context: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", context.display()))
}

/// A builtin name, or else a path to a model file.
pub fn load_model(spec: &str) -> Result<ModelProgram, CliError> {
    match spec {
        "wadd" => Ok(wadd()),
        "ttb" => Ok(ttb()),
        "eqw" => Ok(eqw()),
        "adaptive" => Ok(adaptive_validity()),
        path => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("cannot read model {path}: {e}")))?;
            parse(&text).map_err(|e| CliError::Input(format!("{path}: {e}")))
        }
    }
}

/// Config file values (or defaults), then flags on top; everything checked.
pub fn merge(args: &LoopArgs, simulations: Option<usize>) -> Result<RunConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Input(format!("cannot read config {}: {e}", path.display()))
            })?;
            toml::from_str(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = &args.trials {
        config.trials = v.clone();
    }
    if let Some(v) = &args.reference {
        config.reference = v.clone();
    }
    if let Some(v) = args.threshold {
        config.threshold = v;
    }
    if let Some(v) = args.iterations {
        config.iterations = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.restarts {
        config.restarts = v;
    }
    if let Some(v) = simulations {
        config.simulations_per_class = v;
    }
    if let Some(v) = &args.acceptance_policy {
        config.acceptance_policy = match v.as_str() {
            "always_accept" => AcceptancePolicy::AlwaysAccept,
            "keep_best" => AcceptancePolicy::KeepBest,
            other => {
                return Err(CliError::Input(format!(
                    "unknown acceptance policy {other:?}; expected always_accept or keep_best"
                )))
            }
        };
    }
    if args.log_regret_points {
        config.log_regret_points = true;
    }
    if let Some(v) = &args.reviser {
        config.reviser.mode = match v.as_str() {
            "llm" => ReviserMode::Llm,
            "scripted" => ReviserMode::Scripted,
            other => {
                return Err(CliError::Input(format!(
                    "unknown reviser {other:?}; expected llm or scripted"
                )))
            }
        };
    }
    if let Some(v) = &args.endpoint {
        config.reviser.endpoint_url = v.clone();
    }
    if let Some(v) = &args.model_name {
        config.reviser.model_name = v.clone();
    }
    let r = &mut config.reviser;
    r.temperature = args.temperature.unwrap_or(r.temperature);
    r.top_p = args.top_p.unwrap_or(r.top_p);
    r.max_retries = args.max_retries.unwrap_or(r.max_retries);
    r.timeout_secs = args.timeout_secs.unwrap_or(r.timeout_secs);
    r.max_points_in_prompt = args.max_points_in_prompt.unwrap_or(r.max_points_in_prompt);
    if let Some(v) = &args.script {
        config.reviser.script_dir = Some(v.clone());
    }
    if let Some(v) = &args.out {
        config.out_dir = v.clone();
    }
    config.validate()?;
    config.reviser.validate()?;
    Ok(config)
}
