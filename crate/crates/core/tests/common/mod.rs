#![allow(dead_code)]

pub mod stub;

use asmr_core::data::Dataset;
use asmr_core::msl::{parse, ModelProgram};
use asmr_core::reviser::{PromptBundle, Reviser, RevisionOutcome, RevisionStatus, ScriptedReviser};
use asmr_core::synth::{generate, GeneratorSpec};

pub fn program(source: &str) -> ModelProgram {
    parse(source).unwrap()
}

pub fn synth_dataset(
    true_model: ModelProgram,
    true_params: Vec<f64>,
    subjects: usize,
    trials: usize,
    seed: u64,
) -> Dataset {
    let spec = GeneratorSpec {
        true_model,
        true_params,
        num_subjects: subjects,
        trials_per_subject: trials,
        seed,
        exclude_identical_options: true,
    };
    let (trials, reference) = generate(&spec).unwrap();
    Dataset { trials, reference }
}

pub fn scripted(programs: &[ModelProgram], start: &ModelProgram) -> Box<dyn Reviser> {
    Box::new(ScriptedReviser::new(programs.to_vec(), start, 4).unwrap())
}

/// Reviser whose every answer fails to parse.
pub struct Unparseable;

impl Reviser for Unparseable {
    fn revise(&mut self, _prompt: &PromptBundle) -> RevisionOutcome {
        RevisionOutcome {
            status: RevisionStatus::ParseFailedExhausted,
            program: None,
            raw_response: "no model here".into(),
            attempts: 4,
            rejected_responses: vec!["no model here".into(); 3],
            errors: vec!["no program found".into(); 4],
        }
    }
}
