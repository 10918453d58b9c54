//! Synthetic participants drawn from a known model, with the matching
//! reference cache (the generating model's own per-trial NLLs).

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::{Choice, DataError, ReferenceLikelihoods, TrialRecord, TrialSet, NUM_FEATURES};
use crate::fitting::{nll, FitError};
use crate::msl::{
    adaptive_validity, evaluate, typecheck, EvalError, FeatureMatrix, ModelProgram, TypeError,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub true_model: ModelProgram,
    pub true_params: Vec<f64>,
    pub num_subjects: usize,
    pub trials_per_subject: usize,
    pub seed: u64,
    pub exclude_identical_options: bool,
}

impl Default for GeneratorSpec {
    /// Adaptive-validity ground truth with fixture parameters `[1.5, 3.0]`.
    fn default() -> Self {
        GeneratorSpec {
            true_model: adaptive_validity(),
            true_params: vec![1.5, 3.0],
            num_subjects: 30,
            trials_per_subject: 96,
            seed: 0,
            exclude_identical_options: true,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.true_params.len() != self.true_model.num_parameters {
            return Err(SynthError::Spec(format!(
                "model declares {} parameter(s) but {} true value(s) given",
                self.true_model.num_parameters,
                self.true_params.len()
            )));
        }
        if self.num_subjects == 0 || self.trials_per_subject == 0 {
            return Err(SynthError::Spec(
                "need at least one subject and one trial".into(),
            ));
        }
        if self.true_params.iter().any(|p| !p.is_finite()) {
            return Err(SynthError::Spec("true parameters must be finite".into()));
        }
        Ok(())
    }
}

fn subject_id(i: usize, total: usize) -> String {
    let width = total.to_string().len();
    format!("s{:0width$}", i + 1)
}

fn random_option(rng: &mut ChaCha8Rng) -> Vec<u8> {
    (0..NUM_FEATURES)
        .map(|_| u8::from(rng.random::<bool>()))
        .collect()
}

/// Draws option pairs uniformly (redrawing identical pairs when excluded),
/// samples each choice from the true model's probability of B, and records the
/// true model's NLL of that choice as the reference.
pub fn generate(spec: &GeneratorSpec) -> Result<(TrialSet, ReferenceLikelihoods), SynthError> {
    spec.validate()?;
    let prog = typecheck(&spec.true_model, NUM_FEATURES)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = Vec::with_capacity(spec.num_subjects * spec.trials_per_subject);
    let mut entries = BTreeMap::new();

    for s in 0..spec.num_subjects {
        let id = subject_id(s, spec.num_subjects);
        let mut pairs = Vec::with_capacity(spec.trials_per_subject);
        while pairs.len() < spec.trials_per_subject {
            let (a, b) = (random_option(&mut rng), random_option(&mut rng));
            if spec.exclude_identical_options && a == b {
                continue;
            }
            pairs.push((a, b));
        }
        let option_a = FeatureMatrix::<f64>::from_ratings(
            pairs.iter().map(|(a, _)| a.as_slice()),
            NUM_FEATURES,
        )?;
        let option_b = FeatureMatrix::<f64>::from_ratings(
            pairs.iter().map(|(_, b)| b.as_slice()),
            NUM_FEATURES,
        )?;
        let probs = evaluate(&prog, &spec.true_params, &option_a, &option_b)?.probs_b;
        let choices: Vec<Choice> = probs
            .iter()
            .map(|&p| {
                if rng.random::<f64>() < p {
                    Choice::B
                } else {
                    Choice::A
                }
            })
            .collect();
        let (per_trial, _) = nll(&probs, &choices)?;

        for (t, ((a, b), choice)) in pairs.into_iter().zip(&choices).enumerate() {
            entries.insert((id.clone(), t), per_trial[t]);
            records.push(TrialRecord {
                subject_id: id.clone(),
                trial_index: t,
                option_a: a,
                option_b: b,
                choice: *choice,
            });
        }
    }
    let trials = TrialSet::new(records, NUM_FEATURES)?;
    let reference = ReferenceLikelihoods::new(entries, &trials)?;
    Ok((trials, reference))
}
