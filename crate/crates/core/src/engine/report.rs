//! Aggregation of simulation results and the on-disk report files.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::fitting::compensated_sum;

use super::{EngineError, IterationRecord, ModelClass, RunConfig, SimulationResult};

/// What the spread of a band is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// One value per simulation: its mean AIC.
    Simulations,
    /// One value per (simulation, subject) fit.
    Participants,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Simulations => "simulations",
            Aggregation::Participants => "participants",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub model_class: ModelClass,
    pub simulation: usize,
    pub iteration: usize,
    pub mean_aic: f64,
    /// Lowest subject AIC in this record.
    pub min_aic: f64,
    pub max_aic: f64,
    pub regret_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandRow {
    pub aggregation: Aggregation,
    /// A class name, or `all`.
    pub group: String,
    pub iteration: usize,
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Population standard deviation.
    pub sd: f64,
}

/// First and last AIC of one subject, averaged over all simulations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipantRow {
    pub subject_id: String,
    pub first_aic: f64,
    pub last_aic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestModel {
    pub model_class: ModelClass,
    pub simulation: usize,
    pub iteration: usize,
    pub mean_aic: f64,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: RunConfig,
    pub simulations: Vec<SimulationResult>,
    pub summary: Vec<SummaryRow>,
    pub bands: Vec<BandRow>,
    pub participants: Vec<ParticipantRow>,
    pub best: Option<BestModel>,
}

fn band(aggregation: Aggregation, group: &str, iteration: usize, values: &[f64]) -> BandRow {
    let n = values.len();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // rounding can otherwise push the mean of equal values outside [min, max]
    let mean = (compensated_sum(values) / n as f64).clamp(min, max);
    let squares: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    BandRow {
        aggregation,
        group: group.to_owned(),
        iteration,
        n,
        mean,
        min,
        max,
        sd: (compensated_sum(&squares) / n as f64).sqrt(),
    }
}

fn subject_aics(record: &IterationRecord) -> impl Iterator<Item = f64> + '_ {
    record.fits.iter().map(|f| f.aic)
}

impl ExperimentReport {
    /// Simulations are sorted by (class, index) before aggregation.
    pub fn from_simulations(config: RunConfig, mut simulations: Vec<SimulationResult>) -> Self {
        simulations.sort_by_key(|s| (s.model_class, s.simulation_index));

        let mut summary = Vec::new();
        for sim in &simulations {
            for rec in &sim.records {
                summary.push(SummaryRow {
                    model_class: sim.model_class,
                    simulation: sim.simulation_index,
                    iteration: rec.iteration_index,
                    mean_aic: rec.mean_aic,
                    min_aic: subject_aics(rec).fold(f64::INFINITY, f64::min),
                    max_aic: subject_aics(rec).fold(f64::NEG_INFINITY, f64::max),
                    regret_size: rec.regret_size,
                });
            }
        }

        let mut bands = Vec::new();
        let groups: Vec<(String, Option<ModelClass>)> = ModelClass::ALL
            .into_iter()
            .filter(|c| simulations.iter().any(|s| s.model_class == *c))
            .map(|c| (c.name().to_owned(), Some(c)))
            .chain([("all".to_owned(), None)])
            .collect();
        let num_iterations = simulations
            .iter()
            .map(|s| s.records.len())
            .max()
            .unwrap_or(0);
        for aggregation in [Aggregation::Simulations, Aggregation::Participants] {
            for (name, class) in &groups {
                for it in 0..num_iterations {
                    let records = simulations
                        .iter()
                        .filter(|s| class.is_none_or(|c| s.model_class == c))
                        .filter_map(|s| s.records.get(it));
                    let values: Vec<f64> = match aggregation {
                        Aggregation::Simulations => records.map(|r| r.mean_aic).collect(),
                        Aggregation::Participants => records.flat_map(subject_aics).collect(),
                    };
                    if !values.is_empty() {
                        bands.push(band(aggregation, name, it, &values));
                    }
                }
            }
        }

        // subject -> (sum first, sum last, count), in first-seen order
        let mut order = Vec::new();
        let mut totals: BTreeMap<String, (f64, f64, usize)> = BTreeMap::new();
        for sim in &simulations {
            let (Some(first), Some(last)) = (sim.records.first(), sim.records.last()) else {
                continue;
            };
            for (f, l) in first.fits.iter().zip(&last.fits) {
                let entry = totals.entry(f.subject_id.clone()).or_insert_with(|| {
                    order.push(f.subject_id.clone());
                    (0.0, 0.0, 0)
                });
                entry.0 += f.aic;
                entry.1 += l.aic;
                entry.2 += 1;
            }
        }
        let participants = order
            .into_iter()
            .map(|id| {
                let (first, last, n) = totals[&id];
                ParticipantRow {
                    subject_id: id,
                    first_aic: first / n as f64,
                    last_aic: last / n as f64,
                }
            })
            .collect();

        let mut best: Option<BestModel> = None;
        for sim in &simulations {
            for rec in &sim.records {
                if best.as_ref().is_none_or(|b| rec.mean_aic < b.mean_aic) {
                    best = Some(BestModel {
                        model_class: sim.model_class,
                        simulation: sim.simulation_index,
                        iteration: rec.iteration_index,
                        mean_aic: rec.mean_aic,
                        source: rec.model_source.clone(),
                    });
                }
            }
        }

        ExperimentReport {
            config,
            simulations,
            summary,
            bands,
            participants,
            best,
        }
    }

    /// Mean of the simulation means at each iteration.
    pub fn mean_aic_by_iteration(&self) -> Vec<f64> {
        self.bands
            .iter()
            .filter(|b| b.aggregation == Aggregation::Simulations && b.group == "all")
            .map(|b| b.mean)
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LogLine {
    Config {
        config: RunConfig,
    },
    Iteration {
        model_class: ModelClass,
        simulation: usize,
        seed: u64,
        record: IterationRecord,
    },
}

fn log_err(e: serde_json::Error) -> EngineError {
    EngineError::Log(e.to_string())
}

fn write_csv<W: Write>(
    mut w: W,
    header: &str,
    rows: impl IntoIterator<Item = String>,
) -> std::io::Result<()> {
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{row}")?;
    }
    w.flush()
}

/// Writes `run_log.jsonl`, `summary.csv`, `bands.csv`, `participants.csv`,
/// `best_model.msl` and one `models/{class}_{sim}_{iter}.msl` per record into
/// `dir`, plus `timings.csv` when wall times were measured. Everything except
/// `timings.csv` is a pure function of the report.
pub fn write_outputs(report: &ExperimentReport, dir: &Path) -> Result<(), EngineError> {
    fs::create_dir_all(dir.join("models"))?;

    let mut log = BufWriter::new(File::create(dir.join("run_log.jsonl"))?);
    let header = LogLine::Config {
        config: report.config.clone(),
    };
    serde_json::to_writer(&mut log, &header).map_err(log_err)?;
    writeln!(log)?;
    for sim in &report.simulations {
        for rec in &sim.records {
            let line = LogLine::Iteration {
                model_class: sim.model_class,
                simulation: sim.simulation_index,
                seed: sim.seed,
                record: rec.clone(),
            };
            serde_json::to_writer(&mut log, &line).map_err(log_err)?;
            writeln!(log)?;
        }
    }
    log.flush()?;

    write_csv(
        BufWriter::new(File::create(dir.join("summary.csv"))?),
        "model_class,simulation,iteration,mean_aic,min_aic,max_aic,regret_size",
        report.summary.iter().map(|r| {
            format!(
                "{},{},{},{},{},{},{}",
                r.model_class,
                r.simulation,
                r.iteration,
                r.mean_aic,
                r.min_aic,
                r.max_aic,
                r.regret_size
            )
        }),
    )?;
    write_csv(
        BufWriter::new(File::create(dir.join("bands.csv"))?),
        "aggregation,group,iteration,n,mean,min,max,sd",
        report.bands.iter().map(|b| {
            format!(
                "{},{},{},{},{},{},{},{}",
                b.aggregation, b.group, b.iteration, b.n, b.mean, b.min, b.max, b.sd
            )
        }),
    )?;
    write_csv(
        BufWriter::new(File::create(dir.join("participants.csv"))?),
        "subject_id,first_aic,last_aic",
        report
            .participants
            .iter()
            .map(|p| format!("{},{},{}", p.subject_id, p.first_aic, p.last_aic)),
    )?;
    // Logs read back from disk carry no timings.
    let timed = report
        .simulations
        .iter()
        .flat_map(|s| &s.records)
        .any(|r| !r.wall_time.is_zero());
    if timed {
        write_csv(
            BufWriter::new(File::create(dir.join("timings.csv"))?),
            "model_class,simulation,iteration,wall_time_secs",
            report.simulations.iter().flat_map(|s| {
                s.records.iter().map(move |r| {
                    format!(
                        "{},{},{},{:.6}",
                        s.model_class,
                        s.simulation_index,
                        r.iteration_index,
                        r.wall_time.as_secs_f64()
                    )
                })
            }),
        )?;
    }

    for sim in &report.simulations {
        for rec in &sim.records {
            let name = format!(
                "{}_{}_{}.msl",
                sim.model_class, sim.simulation_index, rec.iteration_index
            );
            fs::write(
                dir.join("models").join(name),
                with_newline(&rec.model_source),
            )?;
        }
    }
    if let Some(best) = &report.best {
        fs::write(dir.join("best_model.msl"), with_newline(&best.source))?;
    }
    Ok(())
}

fn with_newline(source: &str) -> String {
    let mut s = source.trim_end().to_owned();
    s.push('\n');
    s
}

/// Reads a run log back into its config and simulations.
pub fn read_run_log(path: &Path) -> Result<(RunConfig, Vec<SimulationResult>), EngineError> {
    let reader = BufReader::new(File::open(path)?);
    let mut config = None;
    let mut sims: BTreeMap<(ModelClass, usize), SimulationResult> = BTreeMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LogLine = serde_json::from_str(&line)
            .map_err(|e| EngineError::Log(format!("line {}: {e}", n + 1)))?;
        match parsed {
            LogLine::Config { config: c } => {
                if config.replace(c).is_some() {
                    return Err(EngineError::Log(format!(
                        "line {}: second config header",
                        n + 1
                    )));
                }
            }
            LogLine::Iteration {
                model_class,
                simulation,
                seed,
                record,
            } => {
                let sim =
                    sims.entry((model_class, simulation))
                        .or_insert_with(|| SimulationResult {
                            model_class,
                            simulation_index: simulation,
                            seed,
                            records: Vec::new(),
                            final_mean_aic: f64::NAN,
                            best_mean_aic: f64::NAN,
                        });
                if record.iteration_index != sim.records.len() {
                    return Err(EngineError::Log(format!(
                        "line {}: expected iteration {} of {model_class} simulation {simulation}, found {}",
                        n + 1,
                        sim.records.len(),
                        record.iteration_index
                    )));
                }
                sim.final_mean_aic = record.mean_aic;
                sim.best_mean_aic = record.best_mean_aic;
                sim.records.push(record);
            }
        }
    }
    let config = config.ok_or_else(|| EngineError::Log("missing config header".into()))?;
    Ok((config, sims.into_values().collect()))
}
