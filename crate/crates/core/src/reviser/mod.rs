//! Turning a regret set into a revised model.
//!
//! [`build_prompt`] renders the revision request, a [`Reviser`] answers it, and
//! [`extract_model`] pulls the single program out of a free-form answer. Two
//! revisers exist: [`ChatReviser`] talks to any chat-completion endpoint and
//! [`ScriptedReviser`] replays a fixed list of programs for hermetic runs.

mod chat;
mod extract;
mod prompt;
mod scripted;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chat::{completions_url, ChatReviser, API_KEY_ENV};
pub use extract::extract_model;
pub use prompt::{build_prompt, render_point, PromptBundle, LANGUAGE_NOTE};
pub use scripted::ScriptedReviser;

use crate::msl::ModelProgram;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReviserError {
    #[error("regret set is empty; nothing left to revise")]
    EmptyRegretSet,
    #[error("no model program found in response")]
    NoProgramFound,
    #[error("response contains {0} different model programs")]
    MultiplePrograms(usize),
    #[error("invalid model program: {error}\n---\n{excerpt}")]
    InvalidProgram { error: String, excerpt: String },
    #[error("invalid reviser config: {0}")]
    Config(String),
    #[error("script error: {0}")]
    Script(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviserMode {
    Llm,
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReviserConfig {
    pub mode: ReviserMode,
    pub endpoint_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_retries: usize,
    pub timeout_secs: f64,
    /// Directory of `.msl` files replayed in scripted mode.
    pub script_dir: Option<PathBuf>,
    /// Most regret points rendered into one prompt.
    pub max_points_in_prompt: usize,
    /// Reserved: offer several earlier proposals in one prompt. Must be false.
    pub multi_proposal: bool,
}

impl Default for ReviserConfig {
    fn default() -> Self {
        ReviserConfig {
            mode: ReviserMode::Scripted,
            endpoint_url: "http://localhost:8000".into(),
            model_name: "Qwen/Qwen3-32B".into(),
            temperature: 0.6,
            top_p: 0.95,
            max_retries: 3,
            timeout_secs: 600.0,
            script_dir: None,
            max_points_in_prompt: 200,
            multi_proposal: false,
        }
    }
}

impl ReviserConfig {
    pub fn validate(&self) -> Result<(), ReviserError> {
        let fail = |m: &str| Err(ReviserError::Config(m.to_owned()));
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return fail("timeout must be positive");
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return fail("temperature must be nonnegative");
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return fail("top_p must lie in (0, 1]");
        }
        if self.max_points_in_prompt == 0 {
            return fail("max_points_in_prompt must be at least 1");
        }
        if self.multi_proposal {
            return fail("multi-proposal prompting is not supported");
        }
        match self.mode {
            ReviserMode::Llm if self.endpoint_url.is_empty() || self.model_name.is_empty() => {
                fail("llm mode needs an endpoint URL and a model name")
            }
            ReviserMode::Scripted if self.script_dir.is_none() => {
                fail("scripted mode needs a script directory")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevisionStatus {
    Accepted,
    ParseFailedExhausted,
    EndpointError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionOutcome {
    pub status: RevisionStatus,
    /// Present iff `status` is `Accepted`; always parses and typechecks.
    pub program: Option<ModelProgram>,
    /// Last response received (empty if none arrived).
    pub raw_response: String,
    pub attempts: usize,
    /// Earlier responses that were rejected, in order.
    pub rejected_responses: Vec<String>,
    pub errors: Vec<String>,
}

pub trait Reviser: Send {
    fn revise(&mut self, prompt: &PromptBundle) -> RevisionOutcome;
}

/// Builds the reviser named by `config` for a simulation starting at `start`.
pub fn build_reviser(
    config: &ReviserConfig,
    start: &ModelProgram,
    num_features: usize,
) -> Result<Box<dyn Reviser>, ReviserError> {
    config.validate()?;
    Ok(match config.mode {
        ReviserMode::Llm => Box::new(ChatReviser::new(config.clone(), num_features)?),
        ReviserMode::Scripted => {
            let dir = config.script_dir.as_deref().expect("validated");
            Box::new(ScriptedReviser::from_dir(dir, start, num_features)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Choice;
    use crate::msl::{adaptive_validity, eqw, wadd};
    use crate::regret::{RegretPoint, RegretSet};

    fn point(i: usize, delta: f64) -> RegretPoint {
        RegretPoint {
            subject_id: "s1".into(),
            trial_index: i,
            option_a: vec![1, 0, 0, 0],
            option_b: vec![0, 1, 1, 1],
            human_choice: Choice::A,
            model_prob_of_choice: 0.31,
            model_nll: -(0.31f64).ln(),
            reference_nll: -(0.55f64).ln(),
            delta,
        }
    }

    fn regret(n: usize) -> RegretSet {
        RegretSet {
            threshold: 0.05,
            points: (0..n).map(|i| point(i, 10.0 - i as f64 * 0.01)).collect(),
        }
    }

    #[test]
    fn prompt_caps_points_top_first() {
        let bundle = build_prompt(&wadd(), &regret(300), 200).unwrap();
        assert_eq!(bundle.rendered_points, 200);
        assert_eq!(bundle.user_text.matches("Option A ratings").count(), 200);
        assert!(bundle.system_text.is_none());
    }

    #[test]
    fn prompt_content() {
        let text = build_prompt(&wadd(), &regret(1), 10).unwrap().user_text;
        assert!(text.contains("90%, 80%, 70%, and 60%"));
        assert!(text.contains(
            "I am studying human behavior in a multi-attribute decision-making experiment."
        ));
        assert!(text.contains("Can you suggest an improved model"));
        assert!(text.contains(wadd().source.trim_end()));
        assert!(text.contains(
            "Option A ratings: [1, 0, 0, 0]; Option B ratings: [0, 1, 1, 1]; human choice: A; model P(choice) = 0.31; reference P(choice) = 0.55"
        ));
        assert!(text.contains("`params <k>;`"));
    }

    #[test]
    fn prompt_is_deterministic_and_rejects_empty() {
        let a = build_prompt(&eqw(), &regret(5), 3).unwrap();
        let b = build_prompt(&eqw(), &regret(5), 3).unwrap();
        assert_eq!(a.user_text.as_bytes(), b.user_text.as_bytes());
        assert_eq!(
            build_prompt(&eqw(), &regret(0), 3),
            Err(ReviserError::EmptyRegretSet)
        );
        assert!(matches!(
            build_prompt(&eqw(), &regret(2), 0),
            Err(ReviserError::Config(_))
        ));
    }

    #[test]
    fn scripted_skips_past_start() {
        let script = vec![eqw(), wadd(), adaptive_validity()];
        let mut r = ScriptedReviser::new(script.clone(), &eqw(), 4).unwrap();
        let prompt = build_prompt(&eqw(), &regret(1), 1).unwrap();
        let first = r.revise(&prompt);
        assert_eq!(first.status, RevisionStatus::Accepted);
        assert_eq!(first.attempts, 1);
        assert_eq!(first.program.unwrap(), wadd());
        assert_eq!(r.revise(&prompt).program.unwrap(), adaptive_validity());
        // exhausted: keeps proposing the last entry
        assert_eq!(r.revise(&prompt).program.unwrap(), adaptive_validity());
        assert_eq!(r.prompts_seen(), 3);

        let mut from_ttb = ScriptedReviser::new(script, &crate::msl::ttb(), 4).unwrap();
        assert_eq!(from_ttb.revise(&prompt).program.unwrap(), eqw());
    }

    #[test]
    fn config_validation() {
        let mut c = ReviserConfig::default();
        assert!(c.validate().is_err(), "scripted without dir");
        c.script_dir = Some("x".into());
        assert!(c.validate().is_ok());
        c.timeout_secs = 0.0;
        assert!(c.validate().is_err());
        let llm = ReviserConfig {
            mode: ReviserMode::Llm,
            ..ReviserConfig::default()
        };
        assert!(llm.validate().is_ok());
        assert!(ReviserConfig {
            multi_proposal: true,
            ..llm
        }
        .validate()
        .is_err());
    }

    #[test]
    fn extraction_cases() {
        let fenced = format!("```msl\n{}```", wadd().source);
        assert_eq!(extract_model(&fenced, 4).unwrap(), wadd());

        let reasoning = format!(
            "<think>The model says params 1; but maybe\nparams 3;\nmodel = x;</think>\nHere is the model:\n{}",
            eqw().source
        );
        assert_eq!(extract_model(&reasoning, 4).unwrap(), eqw());

        assert_eq!(
            extract_model("I think people use a lexicographic rule.", 4),
            Err(ReviserError::NoProgramFound)
        );
        let two = format!("```\n{}```\n```\n{}```", wadd().source, eqw().source);
        assert_eq!(
            extract_model(&two, 4),
            Err(ReviserError::MultiplePrograms(2))
        );
        let dup = format!(
            "```\n{}```\nagain:\n```\n{}```",
            wadd().source,
            wadd().source
        );
        assert_eq!(extract_model(&dup, 4).unwrap(), wadd());

        let bad = "params 1;\nmodel = p[0] * A;";
        assert!(matches!(
            extract_model(bad, 4),
            Err(ReviserError::InvalidProgram { .. })
        ));
        let bad_index = "params 1;\nmodel = logistic(p[2] * sum(A));";
        match extract_model(bad_index, 4) {
            Err(ReviserError::InvalidProgram { excerpt, .. }) => assert!(excerpt.contains("p[2]")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn extraction_ignores_trailing_prose() {
        let text = "params 2;\nlet w = [p[0], 0.8, 0.7, 0.6];\nmodel = logistic(p[1] * (dot(B, w) - dot(A, w)));\nThis upweights expert 1.";
        assert_eq!(extract_model(text, 4).unwrap().num_parameters, 2);
    }
}
