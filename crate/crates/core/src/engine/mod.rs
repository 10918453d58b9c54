//! The revision loop: fit, find regret, revise, refit.
//!
//! A simulation starts from a class baseline and produces `iterations + 1`
//! records. Record 0 is the baseline fit; each record except the last also
//! carries the revision request built from its regret set and the reviser's
//! answer, whose model is fitted and reported in the following record.

mod config;
mod report;

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{AcceptancePolicy, ModelClass, RunConfig};
pub use report::{
    read_run_log, write_outputs, Aggregation, BandRow, BestModel, ExperimentReport, ParticipantRow,
    SummaryRow,
};

use crate::data::{DataError, Dataset, NUM_FEATURES};
use crate::fitting::{fit_subject, FitError};
use crate::msl::{typecheck, ModelProgram, TypedProgram};
use crate::regret::{compute_regret, RegretError, RegretSet};
use crate::reviser::{
    build_prompt, build_reviser, Reviser, ReviserError, RevisionOutcome, RevisionStatus,
};
use crate::{FitOptions, FitResult, SubjectData};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid run config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("fitting failed: {0}")]
    Fit(#[from] FitError),
    #[error(transparent)]
    Regret(#[from] RegretError),
    #[error(transparent)]
    Reviser(#[from] ReviserError),
    #[error("starting model is invalid: {0}")]
    Model(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("run log error: {0}")]
    Log(String),
}

/// splitmix64 finalizer.
fn mix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one simulation, derived from the run seed, class and index.
pub fn simulation_seed(seed: u64, class: ModelClass, simulation_index: usize) -> u64 {
    mix(mix(mix(seed) ^ class.seed_tag()) ^ simulation_index as u64)
}

fn subject_seed(simulation_seed: u64, subject_index: usize) -> u64 {
    mix(simulation_seed ^ mix(subject_index as u64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration_index: usize,
    pub model_source: String,
    pub num_parameters: usize,
    pub fits: Vec<FitResult>,
    /// Mean of the subjects' AIC values.
    pub mean_aic: f64,
    /// Lowest `mean_aic` in this simulation up to and including this record.
    pub best_mean_aic: f64,
    pub regret_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regret: Option<RegretSet>,
    /// The revision base had an empty regret set; no revision was requested.
    pub converged: bool,
    /// Record whose model and regret set the revision request was built from.
    pub revised_from: Option<usize>,
    pub prompt: Option<String>,
    pub revision_outcome: Option<RevisionOutcome>,
    /// The revised model replaced the revision base for the next record.
    pub installed: bool,
    /// Why an accepted revision could not be used (e.g. it cannot be fitted).
    pub install_error: Option<String>,
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub model_class: ModelClass,
    pub simulation_index: usize,
    pub seed: u64,
    pub records: Vec<IterationRecord>,
    pub final_mean_aic: f64,
    pub best_mean_aic: f64,
}

/// A fitted model and its regret set.
#[derive(Debug, Clone)]
pub struct Evaluated {
    pub iteration: usize,
    pub program: TypedProgram,
    pub fits: Vec<FitResult>,
    pub mean_aic: f64,
    pub regret: RegretSet,
}

/// Mutable state of one simulation between records.
#[derive(Debug, Clone)]
pub struct SimulationState {
    pub seed: u64,
    pub current: Evaluated,
    pub best: Evaluated,
}

/// Fits every subject; subject fits run concurrently but each is seeded from
/// `seed` and its position, so results do not depend on scheduling.
pub fn fit_subjects(
    prog: &TypedProgram,
    subjects: &[SubjectData],
    seed: u64,
    options: &FitOptions,
) -> Result<Vec<FitResult>, FitError> {
    subjects
        .par_iter()
        .enumerate()
        .map(|(i, s)| fit_subject(prog, s, subject_seed(seed, i), options))
        .collect()
}

pub fn mean_aic(fits: &[FitResult]) -> f64 {
    fits.iter().map(|f| f.aic).sum::<f64>() / fits.len() as f64
}

pub struct Engine {
    config: RunConfig,
    data: Dataset,
    subjects: Vec<SubjectData>,
    fit_options: FitOptions,
}

impl Engine {
    pub fn new(config: RunConfig, data: Dataset) -> Result<Self, EngineError> {
        config.validate()?;
        let subjects = data
            .trials
            .subjects()
            .map(|s| SubjectData::from_trials(&s))
            .collect::<Result<Vec<_>, _>>()?;
        if subjects.is_empty() {
            return Err(EngineError::Config("trial set has no subjects".into()));
        }
        let fit_options = FitOptions {
            restarts: config.restarts,
            ..FitOptions::default()
        };
        Ok(Engine {
            config,
            data,
            subjects,
            fit_options,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn fit_model(&self, prog: &TypedProgram, seed: u64) -> Result<Vec<FitResult>, FitError> {
        fit_subjects(prog, &self.subjects, seed, &self.fit_options)
    }

    pub fn evaluate(
        &self,
        program: TypedProgram,
        seed: u64,
        iteration: usize,
    ) -> Result<Evaluated, EngineError> {
        let fits = self.fit_model(&program, seed)?;
        let regret = compute_regret(
            &fits,
            &self.data.reference,
            &self.data.trials,
            self.config.threshold,
        )?;
        Ok(Evaluated {
            iteration,
            mean_aic: mean_aic(&fits),
            program,
            fits,
            regret,
        })
    }

    pub fn start(&self, start: &ModelProgram, seed: u64) -> Result<SimulationState, EngineError> {
        let program =
            typecheck(start, NUM_FEATURES).map_err(|e| EngineError::Model(e.to_string()))?;
        let current = self.evaluate(program, seed, 0)?;
        Ok(SimulationState {
            seed,
            best: current.clone(),
            current,
        })
    }

    /// Produces the record for the state's current model. With `revise`, the
    /// reviser is asked for a new model, which becomes the state's current
    /// model; otherwise the state is left as is.
    pub fn run_iteration(
        &self,
        state: &mut SimulationState,
        reviser: &mut dyn Reviser,
        revise: bool,
    ) -> Result<IterationRecord, EngineError> {
        let started = Instant::now();
        let cur = &state.current;
        if cur.mean_aic < state.best.mean_aic {
            state.best = cur.clone();
        }
        let mut record = IterationRecord {
            iteration_index: cur.iteration,
            model_source: cur.program.program().source.clone(),
            num_parameters: cur.program.num_parameters(),
            fits: cur.fits.clone(),
            mean_aic: cur.mean_aic,
            best_mean_aic: state.best.mean_aic,
            regret_size: cur.regret.len(),
            regret: self.config.log_regret_points.then(|| cur.regret.clone()),
            converged: false,
            revised_from: None,
            prompt: None,
            revision_outcome: None,
            installed: false,
            install_error: None,
            wall_time: Duration::ZERO,
        };
        if !revise {
            record.wall_time = started.elapsed();
            return Ok(record);
        }

        let base = match self.config.acceptance_policy {
            AcceptancePolicy::AlwaysAccept => state.current.clone(),
            AcceptancePolicy::KeepBest => state.best.clone(),
        };
        let next_iteration = state.current.iteration + 1;
        record.revised_from = Some(base.iteration);

        let mut next = None;
        match build_prompt(
            base.program.program(),
            &base.regret,
            self.config.reviser.max_points_in_prompt,
        ) {
            Err(ReviserError::EmptyRegretSet) => record.converged = true,
            Err(e) => return Err(e.into()),
            Ok(prompt) => {
                let outcome = reviser.revise(&prompt);
                record.prompt = Some(prompt.user_text);
                if let (RevisionStatus::Accepted, Some(program)) =
                    (outcome.status, &outcome.program)
                {
                    match typecheck(program, NUM_FEATURES) {
                        Err(e) => record.install_error = Some(e.to_string()),
                        Ok(typed) => match self.evaluate(typed, state.seed, next_iteration) {
                            Ok(evaluated) => next = Some(evaluated),
                            Err(EngineError::Fit(e)) => record.install_error = Some(e.to_string()),
                            Err(e) => return Err(e),
                        },
                    }
                }
                record.revision_outcome = Some(outcome);
            }
        }
        record.installed = next.is_some();
        state.current = next.unwrap_or(Evaluated {
            iteration: next_iteration,
            ..base
        });
        record.wall_time = started.elapsed();
        Ok(record)
    }

    /// Runs one simulation with the reviser named by the config.
    pub fn run_simulation(
        &self,
        class: ModelClass,
        simulation_index: usize,
    ) -> Result<SimulationResult, EngineError> {
        let start = class.baseline();
        let mut reviser = build_reviser(&self.config.reviser, &start, NUM_FEATURES)?;
        self.run_simulation_with(class, simulation_index, &start, reviser.as_mut())
    }

    pub fn run_simulation_with(
        &self,
        class: ModelClass,
        simulation_index: usize,
        start: &ModelProgram,
        reviser: &mut dyn Reviser,
    ) -> Result<SimulationResult, EngineError> {
        let seed = simulation_seed(self.config.seed, class, simulation_index);
        let mut state = self.start(start, seed)?;
        let mut records = Vec::with_capacity(self.config.iterations + 1);
        for k in 0..=self.config.iterations {
            records.push(self.run_iteration(&mut state, reviser, k < self.config.iterations)?);
        }
        let last = records.last().expect("at least one record");
        Ok(SimulationResult {
            model_class: class,
            simulation_index,
            seed,
            final_mean_aic: last.mean_aic,
            best_mean_aic: last.best_mean_aic,
            records,
        })
    }

    /// Every class times `simulations_per_class`, with revisers from the config.
    pub fn run_experiment(&self) -> Result<ExperimentReport, EngineError> {
        self.run_experiment_with(|_, _, start| {
            build_reviser(&self.config.reviser, start, NUM_FEATURES)
        })
    }

    /// Simulations run concurrently, each with its own reviser; results are
    /// ordered by class and index regardless of completion order.
    pub fn run_experiment_with<F>(&self, make_reviser: F) -> Result<ExperimentReport, EngineError>
    where
        F: Fn(ModelClass, usize, &ModelProgram) -> Result<Box<dyn Reviser>, ReviserError> + Sync,
    {
        let jobs: Vec<(ModelClass, usize)> = ModelClass::ALL
            .into_iter()
            .flat_map(|c| (0..self.config.simulations_per_class).map(move |s| (c, s)))
            .collect();
        let simulations = jobs
            .par_iter()
            .map(|&(class, sim)| {
                let start = class.baseline();
                let mut reviser = make_reviser(class, sim, &start)?;
                self.run_simulation_with(class, sim, &start, reviser.as_mut())
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ExperimentReport::from_simulations(
            self.config.clone(),
            simulations,
        ))
    }
}
