//! Deterministic reviser replaying a fixed sequence of programs.

use std::path::Path;

use crate::msl::{parse, typecheck, ModelProgram};

use super::{PromptBundle, Reviser, ReviserError, RevisionOutcome, RevisionStatus};

/// Returns the programs of a script in order, repeating the last one once the
/// script is exhausted. If the starting model appears in the script, replay
/// begins right after its first occurrence.
#[derive(Debug, Clone)]
pub struct ScriptedReviser {
    programs: Vec<ModelProgram>,
    cursor: usize,
    prompts_seen: usize,
}

impl ScriptedReviser {
    pub fn new(
        programs: Vec<ModelProgram>,
        start: &ModelProgram,
        num_features: usize,
    ) -> Result<Self, ReviserError> {
        if programs.is_empty() {
            return Err(ReviserError::Script("script has no programs".into()));
        }
        for (i, p) in programs.iter().enumerate() {
            typecheck(p, num_features)
                .map_err(|e| ReviserError::Script(format!("entry {i}: {e}")))?;
        }
        let cursor = programs
            .iter()
            .position(|p| p == start)
            .map_or(0, |i| i + 1);
        Ok(ScriptedReviser {
            programs,
            cursor,
            prompts_seen: 0,
        })
    }

    /// Loads every `.msl` file in `dir`, ordered by file name.
    pub fn load_programs(dir: &Path) -> Result<Vec<ModelProgram>, ReviserError> {
        let read_err = |e: std::io::Error| ReviserError::Script(format!("{}: {e}", dir.display()));
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(read_err)?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "msl"))
            .collect();
        paths.sort();
        paths
            .iter()
            .map(|path| {
                let text = std::fs::read_to_string(path).map_err(read_err)?;
                parse(&text).map_err(|e| ReviserError::Script(format!("{}: {e}", path.display())))
            })
            .collect()
    }

    pub fn from_dir(
        dir: &Path,
        start: &ModelProgram,
        num_features: usize,
    ) -> Result<Self, ReviserError> {
        Self::new(Self::load_programs(dir)?, start, num_features)
    }

    pub fn prompts_seen(&self) -> usize {
        self.prompts_seen
    }
}

impl Reviser for ScriptedReviser {
    fn revise(&mut self, _prompt: &PromptBundle) -> RevisionOutcome {
        self.prompts_seen += 1;
        let program = self.programs[self.cursor.min(self.programs.len() - 1)].clone();
        self.cursor += 1;
        RevisionOutcome {
            status: RevisionStatus::Accepted,
            raw_response: program.source.clone(),
            program: Some(program),
            attempts: 1,
            rejected_responses: Vec::new(),
            errors: Vec::new(),
        }
    }
}
