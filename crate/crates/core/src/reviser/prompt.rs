use std::fmt::Write;

use crate::msl::ModelProgram;
use crate::regret::{RegretPoint, RegretSet};

use super::ReviserError;

#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub system_text: Option<String>,
    pub user_text: String,
    /// Number of regret points written into `user_text`.
    pub rendered_points: usize,
}

const TASK: &str = "\
I am studying human behavior in a multi-attribute decision-making experiment.

In this experiment, participants encounter a number of trials, in which they have to choose between two options labelled A and B.

These options are fictitious products that are each characterized by four features.

Each feature corresponds to a binary rating of an expert, either approving of the product (1) or not (0).

The four experts are ordered based on their validity (taking values of 90%, 80%, 70%, and 60%), with the first feature corresponding to the ratings from the highest validity expert.

In each trial, people have to predict which of the shown options is superior in terms of quality based on the presented information.

I have the following computational model that is currently my best guess for how people make decisions in this experiment:
";

pub const LANGUAGE_NOTE: &str = "\
The model is written in MSL, a small expression language. A program starts with `params <k>;`, \
which declares k free parameters p[0] to p[k-1] that are fitted per participant by maximum likelihood. \
It may then bind intermediate values with `let name = <expr>;` and must end with `model = <expr>;`, \
which gives the probability of choosing option B on every trial. A and B are matrices with one row per \
trial and one column per expert rating. Available operations: + - * / on values of equal shape or with \
a scalar; comparisons < <= > >= == != yielding 1 or 0; vector literals with one entry per expert such as \
[0.9, 0.8, 0.7, 0.6]; dot(A, weights) for a weighted sum per trial; sum(A) for an unweighted sum per \
trial; logistic, exp, log and abs applied elementwise; min(x, y), max(x, y), clip(x, lo, hi) and \
where(condition, x, y). Lines starting with # are comments. There are no loops, conditionals other \
than where, or user-defined functions.";

const DATA_INTRO: &str = "\
This model does capture human behavior reasonably well overall, but there are the following data points in which it does not capture human behavior yet:
";

const INSTRUCTIONS: &str = "\
Can you suggest an improved model that is able to capture human behavior in the listed situations?

Please structure your answer as follows:

* Keep the structure of the program exactly the same: the `params` header, then any `let` bindings, then a single `model = ...;` statement.
* Only use the operations described above.

* State the number of free parameters before the model expression using the `params <k>;` header.

* Do not write any text besides that and do not elaborate any further.
";

fn ratings(values: &[u8]) -> String {
    let items: Vec<String> = values.iter().map(u8::to_string).collect();
    format!("[{}]", items.join(", "))
}

pub fn render_point(p: &RegretPoint) -> String {
    format!(
        "Option A ratings: {}; Option B ratings: {}; human choice: {}; model P(choice) = {:.2}; reference P(choice) = {:.2}",
        ratings(&p.option_a),
        ratings(&p.option_b),
        p.human_choice,
        p.model_prob_of_choice,
        p.reference_prob_of_choice()
    )
}

/// Instantiates the revision prompt with the current model and up to `cap`
/// regret points, largest delta first. An empty regret set means there is
/// nothing left to explain and is reported as [`ReviserError::EmptyRegretSet`].
pub fn build_prompt(
    current_model: &ModelProgram,
    regret: &RegretSet,
    cap: usize,
) -> Result<PromptBundle, ReviserError> {
    if cap == 0 {
        return Err(ReviserError::Config(
            "prompt point cap must be at least 1".into(),
        ));
    }
    if regret.is_empty() {
        return Err(ReviserError::EmptyRegretSet);
    }
    let mut text = String::from(TASK);
    let _ = write!(
        text,
        "\n{LANGUAGE_NOTE}\n\n```msl\n{}\n```\n\n",
        current_model.source.trim_end()
    );
    text.push_str(DATA_INTRO);
    text.push('\n');
    let shown = regret.points.iter().take(cap);
    let mut rendered = 0;
    for point in shown {
        text.push_str(&render_point(point));
        text.push('\n');
        rendered += 1;
    }
    text.push('\n');
    text.push_str(INSTRUCTIONS);
    Ok(PromptBundle {
        system_text: None,
        user_text: text,
        rendered_points: rendered,
    })
}
