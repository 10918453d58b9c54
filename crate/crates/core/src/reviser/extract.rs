use std::sync::LazyLock;

use regex::Regex;

use crate::msl::{parse, typecheck, ModelProgram};

use super::ReviserError;

static THINK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)<think>.*?</think>").unwrap());
static FENCE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)```[^\n]*\n(.*?)```").unwrap());
static HEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^[ \t]*params[ \t]+\S*[ \t]*;").unwrap());
static MODEL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^[ \t]*model\s*=").unwrap());

const EXCERPT_LEN: usize = 400;

/// Drops reasoning blocks, including an unterminated leading one.
fn strip_reasoning(text: &str) -> &str {
    match text.rfind("</think>") {
        Some(end) => &text[end + "</think>".len()..],
        None if text.trim_start().starts_with("<think>") => "",
        None => text,
    }
}

/// Program candidates in `region`: each runs from a `params` header to the
/// `;` closing the first `model =` statement after it.
fn candidates(region: &str) -> Vec<&str> {
    let starts: Vec<usize> = HEADER.find_iter(region).map(|m| m.start()).collect();
    let mut out = Vec::new();
    for (i, &start) in starts.iter().enumerate() {
        let limit = starts.get(i + 1).copied().unwrap_or(region.len());
        let chunk = &region[start..limit];
        let end = MODEL
            .find(chunk)
            .and_then(|m| chunk[m.end()..].find(';').map(|semi| m.end() + semi + 1))
            .unwrap_or(chunk.len());
        out.push(chunk[..end].trim());
    }
    out
}

fn excerpt(text: &str) -> String {
    let mut s: String = text.chars().take(EXCERPT_LEN).collect();
    if text.chars().count() > EXCERPT_LEN {
        s.push_str("...");
    }
    s
}

/// Locates the single MSL program in a reviser response and validates it.
pub fn extract_model(response: &str, num_features: usize) -> Result<ModelProgram, ReviserError> {
    let without_think = THINK.replace_all(response, "");
    let text = strip_reasoning(&without_think);

    let fenced: Vec<&str> = FENCE
        .captures_iter(text)
        .map(|c| c.get(1).map_or("", |m| m.as_str()))
        .filter(|block| HEADER.is_match(block))
        .collect();
    let all: Vec<&str> = if fenced.is_empty() {
        candidates(text)
    } else {
        fenced.into_iter().flat_map(candidates).collect()
    };
    // repeated copies of the same program count once
    let mut found: Vec<&str> = Vec::new();
    for c in all {
        if !found
            .iter()
            .any(|f| f.split_whitespace().eq(c.split_whitespace()))
        {
            found.push(c);
        }
    }

    let source = match found.as_slice() {
        [] => return Err(ReviserError::NoProgramFound),
        [one] => *one,
        many => return Err(ReviserError::MultiplePrograms(many.len())),
    };
    let program = parse(source).map_err(|error| ReviserError::InvalidProgram {
        error: error.to_string(),
        excerpt: excerpt(source),
    })?;
    typecheck(&program, num_features).map_err(|error| ReviserError::InvalidProgram {
        error: error.to_string(),
        excerpt: excerpt(source),
    })?;
    Ok(program)
}
