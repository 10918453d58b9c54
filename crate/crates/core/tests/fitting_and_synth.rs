use asmr_core::data::{Choice, TrialSet};
use asmr_core::fitting::{central_gradient, fit_subject, total_nll, FitOptions, SubjectData};
use asmr_core::msl::{
    adaptive_validity, eqw, evaluate, parse, ttb, typecheck, wadd, FeatureMatrix,
};
use asmr_core::synth::{generate, GeneratorSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec(
    model: asmr_core::msl::ModelProgram,
    params: Vec<f64>,
    subjects: usize,
    seed: u64,
) -> GeneratorSpec {
    GeneratorSpec {
        true_model: model,
        true_params: params,
        num_subjects: subjects,
        trials_per_subject: 96,
        seed,
        exclude_identical_options: true,
    }
}

fn subjects(trials: &TrialSet) -> Vec<SubjectData<f64>> {
    trials
        .subjects()
        .map(|s| SubjectData::from_trials(&s).unwrap())
        .collect()
}

#[test]
fn random_responding_fits_near_chance() {
    let (trials, _) = generate(&spec(wadd(), vec![0.0], 40, 4)).unwrap();
    let prog = typecheck(&wadd(), 4).unwrap();
    let chance = 96.0 * std::f64::consts::LN_2;
    let gains: Vec<f64> = subjects(&trials)
        .iter()
        .enumerate()
        .map(|(i, data)| {
            chance
                - fit_subject(&prog, data, i as u64, &FitOptions::default())
                    .unwrap()
                    .total_nll
        })
        .collect();
    assert!(gains.iter().all(|&g| g >= -1e-9));
    // one subject, as a single 96-trial dataset
    assert!(gains[0] <= 1.0, "{}", gains[0]);
    // the likelihood-ratio gain of one free parameter averages 1/2
    let mean = gains.iter().sum::<f64>() / gains.len() as f64;
    assert!((0.2..=0.8).contains(&mean), "{mean}");
}

#[test]
fn mle_beats_generating_parameters() {
    for (model, params) in [
        (wadd(), vec![2.0]),
        (ttb(), vec![-1.5]),
        (eqw(), vec![0.7]),
        (adaptive_validity(), vec![1.5, 3.0]),
    ] {
        let (trials, reference) = generate(&spec(model.clone(), params.clone(), 6, 9)).unwrap();
        let prog = typecheck(&model, 4).unwrap();
        for (i, data) in subjects(&trials).iter().enumerate() {
            let fit = fit_subject(&prog, data, i as u64, &FitOptions::default()).unwrap();
            let at_truth = total_nll(&prog, &params, data).unwrap();
            assert!(
                fit.total_nll <= at_truth + 1e-6,
                "{}: {} > {at_truth}",
                fit.subject_id,
                fit.total_nll
            );
            // reference cache is the generating model's own NLL
            let cache = reference.subject_total(&data.subject_id);
            assert!((cache - at_truth).abs() <= 1e-9 * at_truth.max(1.0));
            assert!(fit.total_nll <= cache + 1e-3);
        }
    }
}

#[test]
fn gradient_stencils_agree() {
    let (trials, _) = generate(&spec(adaptive_validity(), vec![1.5, 3.0], 1, 13)).unwrap();
    let data = &subjects(&trials)[0];
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    for model in [wadd(), ttb(), eqw()] {
        let prog = typecheck(&model, 4).unwrap();
        let mut f = |p: &[f64]| total_nll(&prog, p, data).unwrap();
        for _ in 0..100 {
            let x = [rng.random_range(-5.0..5.0)];
            let fine = central_gradient(&mut f, &x, 1e-6)[0];
            let coarse = central_gradient(&mut f, &x, 1e-4)[0];
            let scale = fine.abs().max(coarse.abs()).max(1.0);
            assert!(
                (fine - coarse).abs() <= 1e-3 * scale,
                "{model}: x={x:?} {fine} vs {coarse}"
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 300);
}

#[test]
fn more_restarts_never_hurt() {
    let (trials, _) = generate(&spec(adaptive_validity(), vec![1.5, 3.0], 4, 17)).unwrap();
    let prog = typecheck(&adaptive_validity(), 4).unwrap();
    for data in subjects(&trials) {
        let mut previous = f64::INFINITY;
        for restarts in 1..=8 {
            let options = FitOptions {
                restarts,
                ..FitOptions::default()
            };
            let fit = fit_subject(&prog, &data, 99, &options).unwrap();
            assert!(
                fit.total_nll <= previous,
                "{restarts} restarts: {} > {previous}",
                fit.total_nll
            );
            previous = fit.total_nll;
        }
    }
}

#[test]
fn fits_are_bit_reproducible() {
    let (trials, _) = generate(&spec(wadd(), vec![1.0], 2, 1)).unwrap();
    let prog = typecheck(&adaptive_validity(), 4).unwrap();
    for data in subjects(&trials) {
        let a = fit_subject(&prog, &data, 5, &FitOptions::default()).unwrap();
        let b = fit_subject(&prog, &data, 5, &FitOptions::default()).unwrap();
        assert_eq!(a, b);
        let per_trial: f64 = a.per_trial_nll.iter().sum();
        assert!((a.total_nll - per_trial).abs() <= 1e-9 * per_trial);
        assert!(a.per_trial_nll.iter().all(|&x| x >= 0.0));
    }
}

#[test]
fn single_precision_fit_tracks_double() {
    let (trials, _) = generate(&spec(wadd(), vec![2.0], 1, 3)).unwrap();
    let prog = typecheck(&wadd(), 4).unwrap();
    let s = trials.subjects().next().unwrap();
    let f64_fit = fit_subject(
        &prog,
        &SubjectData::<f64>::from_trials(&s).unwrap(),
        0,
        &FitOptions::default(),
    )
    .unwrap();
    let f32_fit = fit_subject(
        &prog,
        &SubjectData::<f32>::from_trials(&s).unwrap(),
        0,
        &FitOptions::default(),
    )
    .unwrap();
    assert!((f64::from(f32_fit.total_nll) - f64_fit.total_nll).abs() < 1e-2);
}

#[test]
fn zero_scale_gives_even_choices() {
    let flat = parse("params 1;\nmodel = logistic(p[0] * (sum(B) - sum(A)));").unwrap();
    let mut s = spec(flat, vec![0.0], 100, 31);
    s.trials_per_subject = 100;
    let (trials, _) = generate(&s).unwrap();
    assert_eq!(trials.len(), 10_000);
    let b = trials
        .records()
        .iter()
        .filter(|r| r.choice == Choice::B)
        .count();
    let rate = b as f64 / 10_000.0;
    assert!((0.47..=0.53).contains(&rate), "{rate}");
}

#[test]
fn choices_are_calibrated_by_decile() {
    let s = GeneratorSpec {
        num_subjects: 200,
        seed: 1,
        ..GeneratorSpec::default()
    };
    let (trials, _) = generate(&s).unwrap();
    let prog = typecheck(&s.true_model, 4).unwrap();
    let recs = trials.records();
    let a =
        FeatureMatrix::<f64>::from_ratings(recs.iter().map(|r| r.option_a.as_slice()), 4).unwrap();
    let b =
        FeatureMatrix::<f64>::from_ratings(recs.iter().map(|r| r.option_b.as_slice()), 4).unwrap();
    let probs = evaluate(&prog, &s.true_params, &a, &b).unwrap().probs_b;

    let mut order: Vec<usize> = (0..recs.len()).collect();
    order.sort_by(|&i, &j| probs[i].total_cmp(&probs[j]));
    for bin in order.chunks(recs.len().div_ceil(10)) {
        let n = bin.len() as f64;
        let mean_p = bin.iter().map(|&i| probs[i]).sum::<f64>() / n;
        let observed = bin.iter().filter(|&&i| recs[i].choice == Choice::B).count() as f64 / n;
        let var = bin
            .iter()
            .map(|&i| probs[i] * (1.0 - probs[i]))
            .sum::<f64>()
            / (n * n);
        let se = var.sqrt().max(1e-12);
        assert!(
            (observed - mean_p).abs() <= 3.0 * se,
            "bin mean {mean_p}: observed {observed}, se {se}"
        );
    }
}

#[test]
fn reference_mean_equals_true_model_mean() {
    let s = GeneratorSpec {
        num_subjects: 5,
        seed: 8,
        ..GeneratorSpec::default()
    };
    let (trials, reference) = generate(&s).unwrap();
    let prog = typecheck(&s.true_model, 4).unwrap();
    let mut total = 0.0;
    for data in subjects(&trials) {
        total += total_nll(&prog, &s.true_params, &data).unwrap();
    }
    let cache_total: f64 = trials
        .subjects()
        .map(|s| reference.subject_total(s.subject_id))
        .sum();
    assert!((total - cache_total).abs() < 1e-9);
}
