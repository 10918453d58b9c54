//! Per-subject maximum likelihood fitting with NLL and AIC scoring.

mod bfgs;

pub use bfgs::{central_gradient, Bfgs, Minimum};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Choice, SubjectTrials};
use crate::msl::{evaluate, EvalError, FeatureMatrix, TypedProgram};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("{probs} probabilities for {choices} choices")]
    LengthMismatch { probs: usize, choices: usize },
    #[error("subject {0} has no trials")]
    EmptyTrials(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("all {restarts} optimizer restarts produced a non-finite objective")]
    OptimizerFailure { restarts: usize },
}

/// One subject's trials in evaluator form.
#[derive(Debug, Clone)]
pub struct SubjectData<T> {
    pub subject_id: String,
    pub option_a: FeatureMatrix<T>,
    pub option_b: FeatureMatrix<T>,
    pub choices: Vec<Choice>,
}

impl<T: Scalar> SubjectData<T> {
    pub fn from_trials(subject: &SubjectTrials<'_>) -> Result<Self, FitError> {
        if subject.trials.is_empty() {
            return Err(FitError::EmptyTrials(subject.subject_id.to_owned()));
        }
        let cols = subject.num_features;
        Ok(SubjectData {
            subject_id: subject.subject_id.to_owned(),
            option_a: FeatureMatrix::from_ratings(
                subject.trials.iter().map(|t| t.option_a.as_slice()),
                cols,
            )?,
            option_b: FeatureMatrix::from_ratings(
                subject.trials.iter().map(|t| t.option_b.as_slice()),
                cols,
            )?,
            choices: subject.trials.iter().map(|t| t.choice).collect(),
        })
    }

    pub fn num_trials(&self) -> usize {
        self.choices.len()
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions<T> {
    /// Number of random start points.
    pub restarts: usize,
    pub optimizer: Bfgs<T>,
}

impl<T: Scalar> Default for FitOptions<T> {
    fn default() -> Self {
        FitOptions {
            restarts: 10,
            optimizer: Bfgs::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerMeta {
    pub restarts_used: usize,
    pub converged: bool,
    pub function_evals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T> {
    pub subject_id: String,
    pub params_hat: Vec<T>,
    pub per_trial_nll: Vec<T>,
    pub total_nll: T,
    pub aic: T,
    pub optimizer_meta: OptimizerMeta,
}

/// Per-trial negative log-likelihood of the observed choices and their sum.
pub fn nll<T: Scalar>(probs_b: &[T], choices: &[Choice]) -> Result<(Vec<T>, T), FitError> {
    if probs_b.len() != choices.len() {
        return Err(FitError::LengthMismatch {
            probs: probs_b.len(),
            choices: choices.len(),
        });
    }
    let per_trial: Vec<T> = probs_b
        .iter()
        .zip(choices)
        .map(|(&p, c)| match c {
            Choice::B => -p.ln(),
            Choice::A => -(T::one() - p).ln(),
        })
        .collect();
    let total = compensated_sum(&per_trial);
    Ok((per_trial, total))
}

/// Neumaier summation; keeps long sums of equal terms within a few ulps.
pub fn compensated_sum<T: Scalar>(xs: &[T]) -> T {
    let (mut sum, mut carry) = (T::zero(), T::zero());
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            carry = carry + ((sum - t) + x);
        } else {
            carry = carry + ((x - t) + sum);
        }
        sum = t;
    }
    sum + carry
}

/// Akaike information criterion, `2k + 2 * NLL` with natural-log NLL.
pub fn aic<T: Scalar>(num_parameters: usize, total_nll: T) -> T {
    let two = T::of(2.0);
    two * T::of(num_parameters as f64) + two * total_nll
}

/// Total NLL of `params` on one subject.
pub fn total_nll<T: Scalar>(
    prog: &TypedProgram,
    params: &[T],
    data: &SubjectData<T>,
) -> Result<T, FitError> {
    let out = evaluate(prog, params, &data.option_a, &data.option_b)?;
    Ok(nll(&out.probs_b, &data.choices)?.1)
}

/// Scores fixed parameters without optimizing.
pub fn score<T: Scalar>(
    prog: &TypedProgram,
    params: Vec<T>,
    data: &SubjectData<T>,
    optimizer_meta: OptimizerMeta,
) -> Result<FitResult<T>, FitError> {
    let out = evaluate(prog, &params, &data.option_a, &data.option_b)?;
    let (per_trial_nll, total) = nll(&out.probs_b, &data.choices)?;
    Ok(FitResult {
        subject_id: data.subject_id.clone(),
        params_hat: params,
        per_trial_nll,
        total_nll: total,
        aic: aic(prog.num_parameters(), total),
        optimizer_meta,
    })
}

/// Fits one subject with the default options.
pub fn fit<T: Scalar>(
    prog: &TypedProgram,
    subject: &SubjectTrials<'_>,
    seed: u64,
) -> Result<FitResult<T>, FitError> {
    fit_subject(
        prog,
        &SubjectData::from_trials(subject)?,
        seed,
        &FitOptions::default(),
    )
}

/// Multi-start minimization of the total NLL. Start points are i.i.d. standard
/// normal draws from a generator seeded with `seed`, so a run with `n + 1`
/// restarts tries a superset of the starts of a run with `n`.
///
/// Programs without free parameters are scored directly.
pub fn fit_subject<T: Scalar>(
    prog: &TypedProgram,
    data: &SubjectData<T>,
    seed: u64,
    options: &FitOptions<T>,
) -> Result<FitResult<T>, FitError> {
    let k = prog.num_parameters();
    if k == 0 {
        let meta = OptimizerMeta {
            restarts_used: 0,
            converged: true,
            function_evals: 1,
        };
        return score(prog, Vec::new(), data, meta);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objective = |p: &[T]| total_nll(prog, p, data).unwrap_or_else(|_| T::infinity());
    let mut best: Option<Minimum<T>> = None;
    let mut evals = 0;
    for _ in 0..options.restarts {
        let start: Vec<T> = (0..k)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::of(z)
            })
            .collect();
        let Some(found) = options.optimizer.minimize(objective, &start) else {
            evals += 1;
            continue;
        };
        evals += found.evaluations;
        if best.as_ref().is_none_or(|b| found.value < b.value) {
            best = Some(found);
        }
    }
    let best = best.ok_or(FitError::OptimizerFailure {
        restarts: options.restarts,
    })?;
    let meta = OptimizerMeta {
        restarts_used: options.restarts,
        converged: best.converged,
        function_evals: evals,
    };
    score(prog, best.x, data, meta)
}
