use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use asmr_core::data::{
    load_trials, write_reference_csv, write_trials_csv, DataFormat, Dataset, ReferenceLikelihoods,
    TrialSet, NUM_FEATURES,
};
use asmr_core::engine::{
    fit_subjects, read_run_log, write_outputs, Aggregation, Engine, ExperimentReport,
};
use asmr_core::msl::typecheck;
use asmr_core::regret::compute_regret;
use asmr_core::reviser::build_reviser;
use asmr_core::synth::{generate, GeneratorSpec};
use asmr_core::{FitOptions, FitResult, SubjectData};

use crate::settings::{io_error, load_model, merge, CliError};
use crate::{ModelArgs, RegretArgs, ReportArgs, RunArgs, SimulateArgs, SynthArgs};

/// A reader closing the pipe early (`| head`) is not a failure.
fn stdout_result(r: io::Result<()>) -> Result<(), CliError> {
    match r {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => {
            Err(CliError::Runtime(format!("writing to stdout: {e}")))
        }
        _ => Ok(()),
    }
}

fn fit_all(args: &ModelArgs, trials: &TrialSet) -> Result<Vec<FitResult>, CliError> {
    let model = load_model(&args.model)?;
    let prog = typecheck(&model, NUM_FEATURES).map_err(|e| CliError::Input(e.to_string()))?;
    if args.restarts == 0 {
        return Err(CliError::Input("restarts must be at least 1".into()));
    }
    let subjects = trials
        .subjects()
        .map(|s| SubjectData::from_trials(&s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Input(e.to_string()))?;
    if subjects.is_empty() {
        return Err(CliError::Input("trial set has no subjects".into()));
    }
    let options = FitOptions {
        restarts: args.restarts,
        ..FitOptions::default()
    };
    fit_subjects(&prog, &subjects, args.seed, &options)
        .map_err(|e| CliError::Runtime(format!("fitting failed: {e}")))
}

fn join<T: ToString>(xs: &[T], sep: &str) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(sep)
}

pub fn fit(args: &ModelArgs) -> Result<(), CliError> {
    let trials = load_trials(&args.trials, DataFormat::from_path(&args.trials))?;
    let fits = fit_all(args, &trials)?;
    let mut out = io::stdout().lock();
    let mut emit = || -> io::Result<()> {
        writeln!(out, "subject_id,params,total_nll,aic")?;
        for f in &fits {
            writeln!(
                out,
                "{},{},{},{}",
                f.subject_id,
                join(&f.params_hat, ";"),
                f.total_nll,
                f.aic
            )?;
        }
        writeln!(out, "mean_aic,,,{}", asmr_core::engine::mean_aic(&fits))
    };
    stdout_result(emit())
}

pub fn regret(args: &RegretArgs) -> Result<(), CliError> {
    let data = load_dataset(&args.model.trials, &args.reference)?;
    let fits = fit_all(&args.model, &data.trials)?;
    let set = compute_regret(&fits, &data.reference, &data.trials, args.threshold)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let mut out = io::stdout().lock();
    let mut emit = || -> io::Result<()> {
        writeln!(
            out,
            "subject_id,trial_index,option_a,option_b,human_choice,model_prob,reference_prob,delta"
        )?;
        for p in &set.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                p.subject_id,
                p.trial_index,
                join(&p.option_a, " "),
                join(&p.option_b, " "),
                p.human_choice,
                p.model_prob_of_choice,
                p.reference_prob_of_choice(),
                p.delta
            )?;
        }
        Ok(())
    };
    stdout_result(emit())?;
    eprintln!(
        "{} of {} trials at threshold {}",
        set.len(),
        data.trials.len(),
        set.threshold
    );
    Ok(())
}

/// A reference file that does not exist is reported as a cache covering none
/// of the trials, so the message names the keys that lack a reference.
fn load_dataset(trials: &Path, reference: &Path) -> Result<Dataset, CliError> {
    if reference.exists() {
        return Ok(Dataset::load(trials, reference)?);
    }
    let trials = load_trials(trials, DataFormat::from_path(trials))?;
    let err = ReferenceLikelihoods::new(BTreeMap::new(), &trials)
        .err()
        .map_or_else(|| "trial set is empty".to_owned(), |e| e.to_string());
    Err(CliError::Input(format!(
        "reference file {} not found; {err}",
        reference.display()
    )))
}

fn engine(config: asmr_core::engine::RunConfig) -> Result<Engine, CliError> {
    let data = load_dataset(&config.trials, &config.reference)?;
    Ok(Engine::new(config, data)?)
}

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    let config = merge(&args.settings, None)?;
    let start = match &args.model {
        Some(spec) => load_model(spec)?,
        None => args.class.baseline(),
    };
    let engine = engine(config)?;
    let mut reviser = build_reviser(&engine.config().reviser, &start, NUM_FEATURES)?;
    let result =
        engine.run_simulation_with(args.class, args.simulation, &start, reviser.as_mut())?;

    let mut out = io::stdout().lock();
    let mut emit = || -> io::Result<()> {
        writeln!(out, "iteration,mean_aic,regret_size,source")?;
        for r in &result.records {
            let source = match (r.iteration_index, r.revised_from) {
                (0, _) => "start",
                (_, Some(_)) => "revised",
                _ => "kept",
            };
            writeln!(
                out,
                "{},{},{},{source}",
                r.iteration_index, r.mean_aic, r.regret_size
            )?;
        }
        Ok(())
    };
    stdout_result(emit())?;
    let config = engine.config().clone();
    let report = ExperimentReport::from_simulations(config.clone(), vec![result]);
    write_outputs(&report, &config.out_dir)?;
    eprintln!("outputs written to {}", config.out_dir.display());
    Ok(())
}

fn print_overview(report: &ExperimentReport) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    let mut emit = || -> io::Result<()> {
        writeln!(out, "group,iteration,n,mean_aic,min,max")?;
        for b in report
            .bands
            .iter()
            .filter(|b| b.aggregation == Aggregation::Simulations)
        {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                b.group, b.iteration, b.n, b.mean, b.min, b.max
            )?;
        }
        Ok(())
    };
    stdout_result(emit())?;
    if let Some(best) = &report.best {
        eprintln!(
            "best model: {} simulation {} iteration {}, mean AIC {}",
            best.model_class, best.simulation, best.iteration, best.mean_aic
        );
    }
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let config = merge(&args.settings, args.simulations)?;
    let out_dir = config.out_dir.clone();
    let report = engine(config)?.run_experiment()?;
    write_outputs(&report, &out_dir)?;
    print_overview(&report)?;
    eprintln!("outputs written to {}", out_dir.display());
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let spec = GeneratorSpec {
        true_model: load_model(&args.model)?,
        true_params: args.params.clone(),
        num_subjects: args.subjects,
        trials_per_subject: args.trials_per_subject,
        seed: args.seed,
        exclude_identical_options: !args.allow_identical,
    };
    let (trials, reference) = generate(&spec)?;
    fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    let trials_path = args.out.join("trials.csv");
    let reference_path = args.out.join("reference.csv");
    let file = |p: &Path| File::create(p).map(BufWriter::new);
    file(&trials_path)
        .and_then(|w| write_trials_csv(&trials, w))
        .map_err(|e| io_error(&trials_path, e))?;
    file(&reference_path)
        .and_then(|w| write_reference_csv(&reference, &trials, w))
        .map_err(|e| io_error(&reference_path, e))?;
    println!(
        "{} trials from {} subjects written to {}",
        trials.len(),
        trials.num_subjects(),
        args.out.display()
    );
    Ok(())
}

pub fn report(args: &ReportArgs) -> Result<(), CliError> {
    if !args.log.is_file() {
        return Err(CliError::Input(format!(
            "run log {} not found",
            args.log.display()
        )));
    }
    let (config, simulations) = read_run_log(&args.log)?;
    let report = ExperimentReport::from_simulations(config, simulations);
    print_overview(&report)?;
    if let Some(dir) = &args.out {
        write_outputs(&report, dir)?;
        eprintln!("tables written to {}", dir.display());
    }
    Ok(())
}
