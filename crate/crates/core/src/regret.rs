//! Trials where the reference predictor beats the fitted model.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Choice, ReferenceLikelihoods, TrialSet};
use crate::FitResult;

pub const DEFAULT_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegretError {
    #[error("threshold must be positive and finite, got {0}")]
    Threshold(f64),
    #[error("alignment error: {0}")]
    Alignment(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretPoint {
    pub subject_id: String,
    pub trial_index: usize,
    pub option_a: Vec<u8>,
    pub option_b: Vec<u8>,
    pub human_choice: Choice,
    pub model_prob_of_choice: f64,
    pub model_nll: f64,
    pub reference_nll: f64,
    /// `model_nll - reference_nll`
    pub delta: f64,
}

impl RegretPoint {
    pub fn reference_prob_of_choice(&self) -> f64 {
        (-self.reference_nll).exp()
    }
}

/// Every trial with `delta >= threshold`, sorted by delta descending and then
/// by (subject, trial) ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretSet {
    pub threshold: f64,
    pub points: Vec<RegretPoint>,
}

impl RegretSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn order(a: &RegretPoint, b: &RegretPoint) -> Ordering {
    b.delta
        .total_cmp(&a.delta)
        .then_with(|| a.subject_id.cmp(&b.subject_id))
        .then_with(|| a.trial_index.cmp(&b.trial_index))
}

pub fn compute_regret(
    fits: &[FitResult],
    reference: &ReferenceLikelihoods,
    trials: &TrialSet,
    threshold: f64,
) -> Result<RegretSet, RegretError> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(RegretError::Threshold(threshold));
    }
    if fits.len() != trials.num_subjects() {
        return Err(RegretError::Alignment(format!(
            "{} fit(s) for {} subject(s)",
            fits.len(),
            trials.num_subjects()
        )));
    }
    let mut points = Vec::new();
    for fit in fits {
        let subject = trials.subject(&fit.subject_id).ok_or_else(|| {
            RegretError::Alignment(format!("no trials for subject {}", fit.subject_id))
        })?;
        if subject.trials.len() != fit.per_trial_nll.len() {
            return Err(RegretError::Alignment(format!(
                "subject {} has {} trials but {} fitted NLLs",
                fit.subject_id,
                subject.trials.len(),
                fit.per_trial_nll.len()
            )));
        }
        for (rec, &model_nll) in subject.trials.iter().zip(&fit.per_trial_nll) {
            let reference_nll =
                reference
                    .get(&rec.subject_id, rec.trial_index)
                    .ok_or_else(|| {
                        RegretError::Alignment(format!(
                            "no reference for ({}, {})",
                            rec.subject_id, rec.trial_index
                        ))
                    })?;
            let delta = model_nll - reference_nll;
            if delta >= threshold {
                points.push(RegretPoint {
                    subject_id: rec.subject_id.clone(),
                    trial_index: rec.trial_index,
                    option_a: rec.option_a.clone(),
                    option_b: rec.option_b.clone(),
                    human_choice: rec.choice,
                    model_prob_of_choice: (-model_nll).exp(),
                    model_nll,
                    reference_nll,
                    delta,
                });
            }
        }
    }
    points.sort_by(order);
    Ok(RegretSet { threshold, points })
}
