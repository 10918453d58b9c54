//! Trial data and the reference-likelihood cache.
//!
//! Trials CSV header: `subject_id,trial_index,a1,a2,a3,a4,b1,b2,b3,b4,choice`.
//! Reference CSV header: `subject_id,trial_index,nll`, where `nll` is the
//! negative natural-log likelihood of the recorded choice under the reference
//! predictor.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of expert ratings per option in this paradigm.
pub const NUM_FEATURES: usize = 4;

/// Maximum number of offending keys listed in an alignment error message.
const MAX_LISTED_KEYS: usize = 10;

pub type TrialKey = (String, usize);

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("schema error at line {line}: {message}")]
    Schema { line: u64, message: String },
    #[error("validation error{}: {message}", fmt_location(key, column))]
    Validation {
        key: Option<TrialKey>,
        column: Option<String>,
        message: String,
    },
    #[error("alignment error: {}", fmt_alignment(missing, extra))]
    Alignment {
        missing: Vec<TrialKey>,
        extra: Vec<TrialKey>,
    },
}

fn fmt_location(key: &Option<TrialKey>, column: &Option<String>) -> String {
    match (key, column) {
        (Some((s, t)), Some(c)) => format!(" at ({s}, {t}, {c})"),
        (Some((s, t)), None) => format!(" at ({s}, {t})"),
        (None, Some(c)) => format!(" in column {c}"),
        (None, None) => String::new(),
    }
}

fn fmt_keys(keys: &[TrialKey]) -> String {
    let mut out: Vec<String> = keys
        .iter()
        .take(MAX_LISTED_KEYS)
        .map(|(s, t)| format!("({s}, {t})"))
        .collect();
    if keys.len() > MAX_LISTED_KEYS {
        out.push(format!("... and {} more", keys.len() - MAX_LISTED_KEYS));
    }
    out.join(", ")
}

fn fmt_alignment(missing: &[TrialKey], extra: &[TrialKey]) -> String {
    let mut parts = Vec::new();
    if !missing.is_empty() {
        parts.push(format!(
            "{} key(s) missing from reference: {}",
            missing.len(),
            fmt_keys(missing)
        ));
    }
    if !extra.is_empty() {
        parts.push(format!(
            "{} key(s) not in trial set: {}",
            extra.len(),
            fmt_keys(extra)
        ));
    }
    parts.join("; ")
}

impl DataError {
    fn validation(key: Option<TrialKey>, column: Option<&str>, message: impl Into<String>) -> Self {
        DataError::Validation {
            key,
            column: column.map(str::to_owned),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Choice::A => "A",
            Choice::B => "B",
        })
    }
}

impl FromStr for Choice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" => Ok(Choice::A),
            "B" => Ok(Choice::B),
            other => Err(format!("choice must be \"A\" or \"B\", got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub subject_id: String,
    pub trial_index: usize,
    pub option_a: Vec<u8>,
    pub option_b: Vec<u8>,
    pub choice: Choice,
}

impl TrialRecord {
    pub fn key(&self) -> TrialKey {
        (self.subject_id.clone(), self.trial_index)
    }
}

/// Validated trials, grouped by subject in first-appearance order and sorted
/// by trial index within each subject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialSet {
    records: Vec<TrialRecord>,
    num_features: usize,
    /// (subject_id, start, len) into `records`.
    subjects: Vec<(String, usize, usize)>,
}

/// The trials of one subject, ordered by trial index (which equals position).
#[derive(Debug, Clone, Copy)]
pub struct SubjectTrials<'a> {
    pub subject_id: &'a str,
    pub trials: &'a [TrialRecord],
    pub num_features: usize,
}

impl TrialSet {
    pub fn new(records: Vec<TrialRecord>, num_features: usize) -> Result<Self, DataError> {
        if num_features == 0 {
            return Err(DataError::validation(
                None,
                None,
                "num_features must be positive",
            ));
        }
        let mut order: Vec<String> = Vec::new();
        let mut groups: HashMap<String, Vec<TrialRecord>> = HashMap::new();
        for rec in records {
            for (label, values) in [("a", &rec.option_a), ("b", &rec.option_b)] {
                if values.len() != num_features {
                    return Err(DataError::validation(
                        Some(rec.key()),
                        Some(&format!("option_{label}")),
                        format!("expected {num_features} features, got {}", values.len()),
                    ));
                }
                if let Some(j) = values.iter().position(|&v| v > 1) {
                    return Err(DataError::validation(
                        Some(rec.key()),
                        Some(&format!("{label}{}", j + 1)),
                        format!("feature value must be 0 or 1, got {}", values[j]),
                    ));
                }
            }
            let group = groups.entry(rec.subject_id.clone()).or_insert_with(|| {
                order.push(rec.subject_id.clone());
                Vec::new()
            });
            group.push(rec);
        }

        let mut sorted = Vec::new();
        let mut subjects = Vec::new();
        for subject in order {
            let mut group = groups.remove(&subject).unwrap_or_default();
            group.sort_by_key(|r| r.trial_index);
            for (expected, rec) in group.iter().enumerate() {
                if rec.trial_index != expected {
                    let message = if rec.trial_index < expected {
                        "duplicate (subject_id, trial_index)".to_owned()
                    } else {
                        format!(
                            "trial indices must be contiguous from 0; index {expected} is missing"
                        )
                    };
                    return Err(DataError::validation(
                        Some(rec.key()),
                        Some("trial_index"),
                        message,
                    ));
                }
            }
            subjects.push((subject, sorted.len(), group.len()));
            sorted.extend(group);
        }
        Ok(TrialSet {
            records: sorted,
            num_features,
            subjects,
        })
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn subjects(&self) -> impl Iterator<Item = SubjectTrials<'_>> + '_ {
        self.subjects
            .iter()
            .map(move |(id, start, len)| SubjectTrials {
                subject_id: id,
                trials: &self.records[*start..start + len],
                num_features: self.num_features,
            })
    }

    pub fn subject(&self, subject_id: &str) -> Option<SubjectTrials<'_>> {
        self.subjects().find(|s| s.subject_id == subject_id)
    }

    pub fn keys(&self) -> BTreeSet<TrialKey> {
        self.records.iter().map(TrialRecord::key).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    Json,
}

impl DataFormat {
    /// Guesses the format from the file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => DataFormat::Json,
            _ => DataFormat::Csv,
        }
    }
}

const FEATURE_COLUMNS: [&str; 8] = ["a1", "a2", "a3", "a4", "b1", "b2", "b3", "b4"];

fn trial_header() -> Vec<&'static str> {
    let mut h = vec!["subject_id", "trial_index"];
    h.extend(FEATURE_COLUMNS);
    h.push("choice");
    h
}

fn open(path: &Path) -> Result<File, DataError> {
    File::open(path).map_err(|source| DataError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn load_trials(path: &Path, format: DataFormat) -> Result<TrialSet, DataError> {
    let file = open(path)?;
    match format {
        DataFormat::Csv => read_trials_csv(file),
        DataFormat::Json => read_trials_json(file, path),
    }
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<(), DataError> {
    for col in expected {
        if !found.iter().any(|h| h == *col) {
            return Err(DataError::Schema {
                line: 1,
                message: format!("missing column {col:?}"),
            });
        }
    }
    if found.len() != expected.len() || found.iter().zip(expected).any(|(f, e)| f != *e) {
        return Err(DataError::Schema {
            line: 1,
            message: format!("header must be exactly {:?}", expected.join(",")),
        });
    }
    Ok(())
}

fn csv_error(err: csv::Error) -> DataError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    DataError::Schema {
        line,
        message: err.to_string(),
    }
}

fn parse_field<T: FromStr>(
    row: &csv::StringRecord,
    idx: usize,
    column: &str,
    line: u64,
) -> Result<T, DataError> {
    let raw = row.get(idx).unwrap_or("");
    raw.trim().parse().map_err(|_| DataError::Schema {
        line,
        message: format!("column {column}: cannot parse {raw:?}"),
    })
}

pub fn read_trials_csv<R: Read>(reader: R) -> Result<TrialSet, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let columns = trial_header();
    check_header(&header, &columns)?;

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let subject_id = row.get(0).unwrap_or("").to_owned();
        if subject_id.is_empty() {
            return Err(DataError::Schema {
                line,
                message: "empty subject_id".into(),
            });
        }
        let trial_index: usize = parse_field(&row, 1, "trial_index", line)?;
        let mut features = Vec::with_capacity(8);
        for (j, col) in FEATURE_COLUMNS.iter().enumerate() {
            let v: u32 = parse_field(&row, 2 + j, col, line)?;
            if v > 1 {
                return Err(DataError::validation(
                    Some((subject_id.clone(), trial_index)),
                    Some(col),
                    format!("feature value must be 0 or 1, got {v}"),
                ));
            }
            features.push(v as u8);
        }
        let choice = row
            .get(10)
            .unwrap_or("")
            .trim()
            .parse::<Choice>()
            .map_err(|m| DataError::Schema {
                line,
                message: format!("column choice: {m}"),
            })?;
        records.push(TrialRecord {
            subject_id,
            trial_index,
            option_a: features[..4].to_vec(),
            option_b: features[4..].to_vec(),
            choice,
        });
    }
    TrialSet::new(records, NUM_FEATURES)
}

fn read_trials_json<R: Read>(reader: R, path: &Path) -> Result<TrialSet, DataError> {
    let records: Vec<TrialRecord> =
        serde_json::from_reader(reader).map_err(|e| DataError::Schema {
            line: e.line() as u64,
            message: format!("{}: {e}", path.display()),
        })?;
    TrialSet::new(records, NUM_FEATURES)
}

pub fn write_trials_csv<W: Write>(trials: &TrialSet, writer: W) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(trial_header())?;
    for rec in trials.records() {
        let mut row = vec![rec.subject_id.clone(), rec.trial_index.to_string()];
        row.extend(rec.option_a.iter().chain(&rec.option_b).map(u8::to_string));
        row.push(rec.choice.to_string());
        w.write_record(&row)?;
    }
    w.flush()
}

pub fn write_trials_json<W: Write>(trials: &TrialSet, writer: W) -> io::Result<()> {
    serde_json::to_writer_pretty(writer, trials.records()).map_err(io::Error::other)
}

/// Per-(subject, trial) negative log-likelihoods of the recorded choice under
/// the reference predictor. Construction guarantees an exact key match with the
/// trial set it was validated against.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceLikelihoods {
    entries: BTreeMap<TrialKey, f64>,
}

impl ReferenceLikelihoods {
    pub fn new(entries: BTreeMap<TrialKey, f64>, trials: &TrialSet) -> Result<Self, DataError> {
        for (key, &nll) in &entries {
            if !nll.is_finite() || nll < 0.0 {
                return Err(DataError::validation(
                    Some(key.clone()),
                    Some("nll"),
                    format!("nll must be finite and nonnegative, got {nll}"),
                ));
            }
        }
        let expected = trials.keys();
        let missing: Vec<TrialKey> = expected
            .iter()
            .filter(|k| !entries.contains_key(*k))
            .cloned()
            .collect();
        let extra: Vec<TrialKey> = entries
            .keys()
            .filter(|k| !expected.contains(*k))
            .cloned()
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(DataError::Alignment { missing, extra });
        }
        Ok(ReferenceLikelihoods { entries })
    }

    pub fn get(&self, subject_id: &str, trial_index: usize) -> Option<f64> {
        // BTreeMap<(String, usize)> cannot be queried by (&str, usize) without allocating.
        self.entries
            .get(&(subject_id.to_owned(), trial_index))
            .copied()
    }

    pub fn entries(&self) -> &BTreeMap<TrialKey, f64> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of the reference NLLs of one subject.
    pub fn subject_total(&self, subject_id: &str) -> f64 {
        self.entries
            .iter()
            .filter(|((s, _), _)| s == subject_id)
            .map(|(_, v)| v)
            .sum()
    }
}

pub fn load_reference(path: &Path, trials: &TrialSet) -> Result<ReferenceLikelihoods, DataError> {
    read_reference_csv(open(path)?, trials)
}

pub fn read_reference_csv<R: Read>(
    reader: R,
    trials: &TrialSet,
) -> Result<ReferenceLikelihoods, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    check_header(&header, &["subject_id", "trial_index", "nll"])?;

    let mut entries = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let subject_id = row.get(0).unwrap_or("").to_owned();
        let trial_index: usize = parse_field(&row, 1, "trial_index", line)?;
        let nll: f64 = parse_field(&row, 2, "nll", line)?;
        let key = (subject_id, trial_index);
        if !nll.is_finite() || nll < 0.0 {
            return Err(DataError::validation(
                Some(key),
                Some("nll"),
                format!("nll must be finite and nonnegative, got {nll}"),
            ));
        }
        if entries.insert(key.clone(), nll).is_some() {
            return Err(DataError::validation(
                Some(key),
                None,
                "duplicate reference entry",
            ));
        }
    }
    ReferenceLikelihoods::new(entries, trials)
}

/// Writes entries in trial-set order.
pub fn write_reference_csv<W: Write>(
    reference: &ReferenceLikelihoods,
    trials: &TrialSet,
    writer: W,
) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(["subject_id", "trial_index", "nll"])?;
    for rec in trials.records() {
        let nll = reference
            .get(&rec.subject_id, rec.trial_index)
            .unwrap_or(f64::NAN);
        w.write_record([
            rec.subject_id.clone(),
            rec.trial_index.to_string(),
            nll.to_string(),
        ])?;
    }
    w.flush()
}

/// Trials plus their aligned reference cache.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub trials: TrialSet,
    pub reference: ReferenceLikelihoods,
}

impl Dataset {
    pub fn load(trials_path: &Path, reference_path: &Path) -> Result<Self, DataError> {
        let trials = load_trials(trials_path, DataFormat::from_path(trials_path))?;
        let reference = load_reference(reference_path, &trials)?;
        Ok(Dataset { trials, reference })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "subject_id,trial_index,a1,a2,a3,a4,b1,b2,b3,b4,choice\n";

    fn fixture(subjects: usize, trials: usize) -> String {
        let mut s = HEADER.to_owned();
        for subj in 0..subjects {
            for t in 0..trials {
                let bits: Vec<String> = (0..8)
                    .map(|j| ((t >> (j % 4)) & 1 ^ (j / 4)).to_string())
                    .collect();
                let choice = if t % 3 == 0 { "A" } else { "B" };
                s.push_str(&format!(
                    "s{},{},{},{}\n",
                    subj + 1,
                    t,
                    bits.join(","),
                    choice
                ));
            }
        }
        s
    }

    #[test]
    fn row_maps_to_record() {
        let csv = format!("{HEADER}s1,0,1,0,0,0,0,1,1,1,B\n");
        let set = read_trials_csv(csv.as_bytes()).unwrap();
        assert_eq!(
            set.records()[0],
            TrialRecord {
                subject_id: "s1".into(),
                trial_index: 0,
                option_a: vec![1, 0, 0, 0],
                option_b: vec![0, 1, 1, 1],
                choice: Choice::B,
            }
        );
    }

    #[test]
    fn non_binary_feature_names_key_and_column() {
        let csv = format!("{HEADER}s1,0,1,0,0,0,0,1,1,1,B\ns1,1,1,0,2,0,0,1,1,1,A\n");
        let err = read_trials_csv(csv.as_bytes()).unwrap_err();
        match &err {
            DataError::Validation { key, column, .. } => {
                assert_eq!(key, &Some(("s1".into(), 1)));
                assert_eq!(column.as_deref(), Some("a3"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("(s1, 1, a3)"));
    }

    #[test]
    fn two_subjects_of_96() {
        let set = read_trials_csv(fixture(2, 96).as_bytes()).unwrap();
        assert_eq!(set.len(), 192);
        assert_eq!(set.num_subjects(), 2);
        for subject in set.subjects() {
            let idx: Vec<usize> = subject.trials.iter().map(|r| r.trial_index).collect();
            assert_eq!(idx, (0..96).collect::<Vec<_>>());
        }
    }

    #[test]
    fn schema_errors_carry_line_numbers() {
        let csv = format!("{HEADER}s1,0,1,0,0,0,0,1,1,1,B\ns1,x,1,0,0,0,0,1,1,1,B\n");
        match read_trials_csv(csv.as_bytes()).unwrap_err() {
            DataError::Schema { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("trial_index"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let missing = "subject_id,trial_index,a1,a2,a3,a4,b1,b2,b3,choice\n";
        assert!(matches!(
            read_trials_csv(missing.as_bytes()),
            Err(DataError::Schema { line: 1, .. })
        ));
        let bad_choice = format!("{HEADER}s1,0,1,0,0,0,0,1,1,1,1\n");
        assert!(matches!(
            read_trials_csv(bad_choice.as_bytes()),
            Err(DataError::Schema { .. })
        ));
    }

    #[test]
    fn duplicates_and_gaps_rejected() {
        let dup = format!("{HEADER}s1,0,1,0,0,0,0,1,1,1,B\ns1,0,1,0,0,0,0,1,1,1,B\n");
        assert!(matches!(
            read_trials_csv(dup.as_bytes()),
            Err(DataError::Validation { .. })
        ));
        let gap = format!("{HEADER}s1,0,1,0,0,0,0,1,1,1,B\ns1,2,1,0,0,0,0,1,1,1,B\n");
        let err = read_trials_csv(gap.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("contiguous"), "{err}");
    }

    #[test]
    fn reference_alignment() {
        let set = read_trials_csv(fixture(2, 96).as_bytes()).unwrap();
        let mut full = String::from("subject_id,trial_index,nll\n");
        for rec in set.records() {
            full.push_str(&format!("{},{},0.5\n", rec.subject_id, rec.trial_index));
        }
        let reference = read_reference_csv(full.as_bytes(), &set).unwrap();
        assert_eq!(reference.len(), 192);

        let without_last: String = full
            .lines()
            .filter(|l| *l != "s1,95,0.5")
            .map(|l| format!("{l}\n"))
            .collect();
        let err = read_reference_csv(without_last.as_bytes(), &set).unwrap_err();
        match &err {
            DataError::Alignment { missing, extra } => {
                assert_eq!(missing, &vec![("s1".to_owned(), 95)]);
                assert!(extra.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("(s1, 95)"));

        let negative = full.replace("s2,3,0.5", "s2,3,-0.1");
        assert!(matches!(
            read_reference_csv(negative.as_bytes(), &set),
            Err(DataError::Validation {
                column: Some(_),
                ..
            })
        ));
    }

    #[test]
    fn alignment_message_caps_listing() {
        let keys: Vec<TrialKey> = (0..25).map(|t| ("s".to_owned(), t)).collect();
        let msg = DataError::Alignment {
            missing: keys,
            extra: vec![],
        }
        .to_string();
        assert!(msg.contains("25 key(s) missing"));
        assert!(msg.contains("and 15 more"));
        assert!(!msg.contains("(s, 10)"));
    }

    #[test]
    fn json_loader_matches_csv() {
        let set = read_trials_csv(fixture(1, 5).as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_trials_json(&set, &mut buf).unwrap();
        let back = read_trials_json(buf.as_slice(), Path::new("mem.json")).unwrap();
        assert_eq!(back, set);
    }
}
