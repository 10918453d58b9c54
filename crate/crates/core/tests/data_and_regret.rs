use std::collections::BTreeMap;

use asmr_core::data::{
    load_reference, load_trials, read_reference_csv, read_trials_csv, write_reference_csv,
    write_trials_csv, write_trials_json, Choice, DataError, DataFormat, ReferenceLikelihoods,
    TrialRecord, TrialSet,
};
use asmr_core::fitting::OptimizerMeta;
use asmr_core::regret::compute_regret;
use asmr_core::FitResult;
use proptest::prelude::*;

fn trial_set() -> impl Strategy<Value = TrialSet> {
    prop::collection::vec(1usize..12, 1..5).prop_flat_map(|sizes| {
        let total: usize = sizes.iter().sum();
        prop::collection::vec(
            (
                prop::array::uniform4(0u8..2),
                prop::array::uniform4(0u8..2),
                any::<bool>(),
            ),
            total,
        )
        .prop_map(move |rows| {
            let mut rows = rows.into_iter();
            let mut records = Vec::new();
            for (s, &n) in sizes.iter().enumerate() {
                for t in 0..n {
                    let (a, b, c) = rows.next().unwrap();
                    records.push(TrialRecord {
                        subject_id: format!("subj_{s}"),
                        trial_index: t,
                        option_a: a.to_vec(),
                        option_b: b.to_vec(),
                        choice: if c { Choice::B } else { Choice::A },
                    });
                }
            }
            TrialSet::new(records, 4).unwrap()
        })
    })
}

fn reference_for(trials: &TrialSet, values: &[f64]) -> BTreeMap<(String, usize), f64> {
    trials
        .keys()
        .into_iter()
        .zip(values.iter().cycle())
        .map(|(k, &v)| (k, v))
        .collect()
}

fn fits_for(trials: &TrialSet, model: &[f64]) -> Vec<FitResult> {
    let mut values = model.iter().cycle();
    trials
        .subjects()
        .map(|s| {
            let per_trial: Vec<f64> = s.trials.iter().map(|_| *values.next().unwrap()).collect();
            FitResult {
                subject_id: s.subject_id.to_owned(),
                params_hat: vec![],
                total_nll: per_trial.iter().sum(),
                per_trial_nll: per_trial,
                aic: 0.0,
                optimizer_meta: OptimizerMeta {
                    restarts_used: 0,
                    converged: true,
                    function_evals: 0,
                },
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn csv_and_json_round_trip(trials in trial_set()) {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("t.csv");
        let json_path = dir.path().join("t.json");
        write_trials_csv(&trials, std::fs::File::create(&csv_path).unwrap()).unwrap();
        write_trials_json(&trials, std::fs::File::create(&json_path).unwrap()).unwrap();
        prop_assert_eq!(&load_trials(&csv_path, DataFormat::Csv).unwrap(), &trials);
        prop_assert_eq!(&load_trials(&json_path, DataFormat::from_path(&json_path)).unwrap(), &trials);
        let text = std::fs::read_to_string(&csv_path).unwrap();
        prop_assert!(!text.contains('\r'));
    }

    #[test]
    fn reference_loads_iff_keys_match(
        trials in trial_set(),
        values in prop::collection::vec(0.0f64..5.0, 1..20),
        drop in prop::option::of(any::<prop::sample::Index>()),
        extra in any::<bool>(),
    ) {
        let mut entries = reference_for(&trials, &values);
        let full = ReferenceLikelihoods::new(entries.clone(), &trials).unwrap();
        let mut buf = Vec::new();
        write_reference_csv(&full, &trials, &mut buf).unwrap();
        prop_assert_eq!(read_reference_csv(buf.as_slice(), &trials).unwrap(), full);

        if let Some(i) = drop {
            let key = entries.keys().nth(i.index(entries.len())).unwrap().clone();
            entries.remove(&key);
        }
        if extra {
            entries.insert(("ghost".to_owned(), 0), 0.5);
        }
        let mut text = String::from("subject_id,trial_index,nll\n");
        for ((s, t), v) in &entries {
            text.push_str(&format!("{s},{t},{v}\n"));
        }
        let result = read_reference_csv(text.as_bytes(), &trials);
        if drop.is_none() && !extra {
            prop_assert!(result.is_ok());
        } else {
            let is_alignment = matches!(result, Err(DataError::Alignment { .. }));
            prop_assert!(is_alignment);
        }
    }

    #[test]
    fn regret_is_antitone_in_threshold(
        trials in trial_set(),
        reference in prop::collection::vec(0.0f64..3.0, 1..30),
        model in prop::collection::vec(0.0f64..3.0, 1..30),
        t1 in 0.001f64..2.0,
        t2 in 0.001f64..2.0,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let reference = ReferenceLikelihoods::new(reference_for(&trials, &reference), &trials).unwrap();
        let fits = fits_for(&trials, &model);
        let big = compute_regret(&fits, &reference, &trials, lo).unwrap();
        let small = compute_regret(&fits, &reference, &trials, hi).unwrap();
        for p in &small.points {
            prop_assert!(big.points.contains(p));
        }
        for p in &big.points {
            prop_assert!(p.delta >= lo);
            prop_assert!((p.model_prob_of_choice - (-p.model_nll).exp()).abs() <= 1e-9);
        }
        for w in big.points.windows(2) {
            prop_assert!(w[0].delta >= w[1].delta);
        }
    }

    #[test]
    fn perfect_model_has_empty_regret(
        trials in trial_set(),
        values in prop::collection::vec(0.0f64..3.0, 1..30),
        threshold in 1e-9f64..1.0,
    ) {
        let reference = ReferenceLikelihoods::new(reference_for(&trials, &values), &trials).unwrap();
        let model: Vec<f64> = trials.keys().into_iter().map(|k| reference.entries()[&k]).collect();
        let fits = fits_for(&trials, &model);
        prop_assert!(compute_regret(&fits, &reference, &trials, threshold).unwrap().is_empty());
    }
}

#[test]
fn regret_matches_scan_on_1000_trials() {
    let records: Vec<TrialRecord> = (0..1000)
        .map(|i| TrialRecord {
            subject_id: format!("s{}", i / 250),
            trial_index: i % 250,
            option_a: vec![(i % 2) as u8, 0, 1, 0],
            option_b: vec![0, (i % 3 == 0) as u8, 1, 1],
            choice: if i % 5 < 2 { Choice::B } else { Choice::A },
        })
        .collect();
    let trials = TrialSet::new(records, 4).unwrap();
    // deterministic pseudo-random values from an LCG
    let mut state = 12345u64;
    let mut next = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 40) as f64 / (1u64 << 24) as f64 * 2.0
    };
    let reference_values: Vec<f64> = (0..1000).map(|_| next()).collect();
    let model_values: Vec<f64> = (0..1000).map(|_| next()).collect();
    let reference =
        ReferenceLikelihoods::new(reference_for(&trials, &reference_values), &trials).unwrap();
    let fits = fits_for(&trials, &model_values);
    let set = compute_regret(&fits, &reference, &trials, 0.05).unwrap();

    let mut expected: Vec<(f64, String, usize)> = Vec::new();
    for fit in &fits {
        for (t, m) in fit.per_trial_nll.iter().enumerate() {
            let d = m - reference.get(&fit.subject_id, t).unwrap();
            if d >= 0.05 {
                expected.push((-d, fit.subject_id.clone(), t));
            }
        }
    }
    expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let got: Vec<(f64, String, usize)> = set
        .points
        .iter()
        .map(|p| (-p.delta, p.subject_id.clone(), p.trial_index))
        .collect();
    assert_eq!(got, expected);
    assert!(!got.is_empty());
}

fn fixture_csv(subjects: usize, trials: usize) -> String {
    let mut text = String::from("subject_id,trial_index,a1,a2,a3,a4,b1,b2,b3,b4,choice\n");
    for s in 1..=subjects {
        for t in 0..trials {
            let bits: Vec<String> = (0..8).map(|j| ((t >> j) & 1).to_string()).collect();
            let choice = if t % 3 == 0 { "B" } else { "A" };
            text.push_str(&format!("s{s},{t},{},{choice}\n", bits.join(",")));
        }
    }
    text
}

#[test]
fn two_subject_fixture_and_reference_cover() {
    let trials = read_trials_csv(fixture_csv(2, 96).as_bytes()).unwrap();
    assert_eq!(trials.len(), 192);
    for s in trials.subjects() {
        let idx: Vec<usize> = s.trials.iter().map(|t| t.trial_index).collect();
        assert_eq!(idx, (0..96).collect::<Vec<_>>());
    }

    let dir = tempfile::tempdir().unwrap();
    let full: String = std::iter::once("subject_id,trial_index,nll".to_owned())
        .chain(
            trials
                .keys()
                .into_iter()
                .map(|(s, t)| format!("{s},{t},0.693")),
        )
        .collect::<Vec<_>>()
        .join("\n");
    let path = dir.path().join("ref.csv");
    std::fs::write(&path, &full).unwrap();
    assert_eq!(load_reference(&path, &trials).unwrap().len(), 192);

    let missing: String = full
        .lines()
        .filter(|l| !l.starts_with("s1,95,"))
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(&path, missing).unwrap();
    let err = load_reference(&path, &trials).unwrap_err();
    assert!(
        matches!(&err, DataError::Alignment { missing, .. } if missing == &[("s1".to_owned(), 95)])
    );
    assert!(err.to_string().contains("(s1, 95)"), "{err}");

    let negative = full.replacen("s2,3,0.693", "s2,3,-0.1", 1);
    std::fs::write(&path, negative).unwrap();
    assert!(matches!(
        load_reference(&path, &trials),
        Err(DataError::Validation { .. })
    ));
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_trials(
        std::path::Path::new("/nonexistent/trials.csv"),
        DataFormat::Csv,
    )
    .unwrap_err();
    assert!(matches!(err, DataError::Io { .. }));
}
