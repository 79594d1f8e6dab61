//! Acceptance suite. Each test exercises one gate criterion end to end and
//! prints a pass line (run with `--nocapture` to see them all).

mod common;

use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{appendix_corpus, synthetic_catalog, Expected};
use sdoh_core::catalog::{FieldSubset, SdohDomain};
use sdoh_core::client::{LlmClient, RetryPolicy};
use sdoh_core::eval::{cohen_kappa, krippendorff_alpha, micro_f1, rates};
use sdoh_core::merge::{merge, PatientRecord, PatientTable};
use sdoh_core::mock::{prompt_sha256, MockMode, MockServer};
use sdoh_core::panel::{SdohPanel, TractFips, TractYearKey};
use sdoh_core::parser::{parse_response, Outcome, ParsedResponse};
use sdoh_core::predict::{
    cross_validate, objective_and_gradient, stratified_folds, TrainConfig,
};
use sdoh_core::prompt::{build_prompt, ExemplarSet, PromptSpec};
use sdoh_core::run::{run_sweep, write_jobs_jsonl, write_parsed_jsonl, Dispatcher, RunReport};
use sdoh_core::stats::{auroc, f1_binary, student_t_cdf};

fn expected_outcome(expected: Expected) -> Outcome {
    match expected {
        Expected::Label(code) => Outcome::Label(SdohDomain::from_code(code).unwrap()),
        Expected::Refusal => Outcome::Refusal,
        Expected::NonResponse => Outcome::NonResponse,
    }
}

#[test]
fn criterion_1_parser_corpus() {
    let start = Instant::now();
    let corpus = appendix_corpus();
    assert_eq!(corpus.len(), 18);
    for entry in &corpus {
        let parsed = parse_response(entry.text);
        assert_eq!(
            parsed.outcome,
            expected_outcome(entry.expected),
            "{} {}-shot reply parsed wrong",
            entry.model,
            entry.shots
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "corpus took {elapsed:?}");
    println!("criterion 1 (parser corpus, 18/18 recorded replies): PASS");
}

#[test]
fn criterion_2_gold_echo_end_to_end() {
    let start = Instant::now();
    let catalog = synthetic_catalog(223);
    let server = MockServer::spawn(MockMode::GoldEcho(catalog.clone())).unwrap();
    let client = LlmClient::new(&server.endpoint(), "gold-echo")
        .with_retry(RetryPolicy::immediate(3));
    let dispatcher = Dispatcher::new(&client).with_concurrency(8);
    let exemplars = ExemplarSet::builtin();

    for shots in [0u8, 1] {
        let exemplar_ref = (shots == 1).then_some(&exemplars);
        let runs = run_sweep(&catalog, &FieldSubset::ALL, shots, exemplar_ref, &dispatcher)
            .unwrap();
        assert_eq!(runs.len(), 7);
        for run in &runs {
            assert_eq!(run.parsed.len(), 223);
            let eval = run.eval.as_ref().expect("gold labels present");
            assert_eq!(eval.n, 223);
            assert_eq!(
                eval.micro_f1, 1.0,
                "micro F1 != 1 for shots={shots} subset={}",
                run.subset
            );
            assert_eq!(eval.refusal_rate, 0.0);
            assert_eq!(eval.nonresponse_rate, 0.0);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "gold-echo sweep took {elapsed:?}");
    println!(
        "criterion 2 (gold-echo end-to-end, 223 vars x 7 subsets x 2 shots in {:.2}s): PASS",
        elapsed.as_secs_f64()
    );
}

// Brute-force metric oracles, written independently of the library paths.
mod oracle {
    pub fn micro_f1(preds: &[u8], gold: &[u8]) -> f64 {
        // preds: 1-5 are labels, 0 is an abstention of either kind.
        let mut hits = 0usize;
        for i in 0..preds.len() {
            if preds[i] != 0 && preds[i] == gold[i] {
                hits += 1;
            }
        }
        hits as f64 / preds.len() as f64
    }

    pub fn kappa(a: &[u8], b: &[u8]) -> f64 {
        let n = a.len() as f64;
        let mut agree = 0.0;
        for i in 0..a.len() {
            if a[i] == b[i] {
                agree += 1.0;
            }
        }
        let po = agree / n;
        let mut pe = 0.0;
        for code in 1..=5u8 {
            let pa = a.iter().filter(|&&x| x == code).count() as f64 / n;
            let pb = b.iter().filter(|&&x| x == code).count() as f64 / n;
            pe += pa * pb;
        }
        if (1.0 - pe).abs() < f64::EPSILON {
            return 1.0;
        }
        (po - pe) / (1.0 - pe)
    }

    pub fn alpha(rows: &[Vec<u8>]) -> f64 {
        // Coincidence tally by explicit triple loop over items and ordered
        // rater pairs.
        let raters = rows.len();
        let items = rows[0].len();
        let mut o = [[0.0f64; 6]; 6];
        for u in 0..items {
            for i in 0..raters {
                for j in 0..raters {
                    if i != j {
                        o[rows[i][u] as usize][rows[j][u] as usize] += 1.0 / (raters as f64 - 1.0);
                    }
                }
            }
        }
        let mut n_c = [0.0f64; 6];
        let mut total = 0.0;
        for c in 1..=5 {
            for k in 1..=5 {
                n_c[c] += o[c][k];
            }
            total += n_c[c];
        }
        let mut d_o = 0.0;
        let mut d_e = 0.0;
        for c in 1..=5 {
            for k in 1..=5 {
                if c != k {
                    d_o += o[c][k];
                    d_e += n_c[c] * n_c[k];
                }
            }
        }
        d_o /= total;
        d_e /= total * (total - 1.0);
        if d_e == 0.0 {
            return 1.0;
        }
        1.0 - d_o / d_e
    }

    pub fn auroc_pairs(scores: &[f64], labels: &[u8]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] == 1 && labels[j] == 0 {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    pub fn f1(scores: &[f64], labels: &[u8], threshold: f64) -> f64 {
        let mut tp = 0.0;
        let mut fp = 0.0;
        let mut fn_ = 0.0;
        for i in 0..scores.len() {
            let pred = scores[i] >= threshold;
            if pred && labels[i] == 1 {
                tp += 1.0;
            }
            if pred && labels[i] == 0 {
                fp += 1.0;
            }
            if !pred && labels[i] == 1 {
                fn_ += 1.0;
            }
        }
        if tp == 0.0 {
            return 0.0;
        }
        2.0 * tp / (2.0 * tp + fp + fn_)
    }
}

fn pred_from_code(code: u8) -> ParsedResponse {
    if code == 0 {
        parse_response("?")
    } else {
        parse_response(&format!("({code})"))
    }
}

#[test]
fn criterion_3_metric_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let tolerance = 1e-12;
    for _ in 0..1000 {
        let n = rng.random_range(1..=6usize);

        // Predictions uniform over the five labels plus abstention.
        let pred_codes: Vec<u8> = (0..n).map(|_| rng.random_range(0..=5u8)).collect();
        let gold_codes: Vec<u8> = (0..n).map(|_| rng.random_range(1..=5u8)).collect();
        let preds: Vec<ParsedResponse> = pred_codes.iter().map(|&c| pred_from_code(c)).collect();
        let gold: Vec<SdohDomain> = gold_codes
            .iter()
            .map(|&c| SdohDomain::from_code(c).unwrap())
            .collect();
        let lib_f1 = micro_f1(&preds, &gold).unwrap();
        assert!((lib_f1 - oracle::micro_f1(&pred_codes, &gold_codes)).abs() < tolerance);
        let (refusal, nonresponse) = rates(&preds).unwrap();
        let refusal_oracle =
            pred_codes.iter().filter(|&&c| c == 0).count() as f64 / n as f64;
        assert!((refusal - refusal_oracle).abs() < tolerance);
        assert_eq!(nonresponse, 0.0);

        // Two-rater kappa.
        let a_codes: Vec<u8> = (0..n).map(|_| rng.random_range(1..=5u8)).collect();
        let b_codes: Vec<u8> = (0..n).map(|_| rng.random_range(1..=5u8)).collect();
        let a: Vec<SdohDomain> = a_codes.iter().map(|&c| SdohDomain::from_code(c).unwrap()).collect();
        let b: Vec<SdohDomain> = b_codes.iter().map(|&c| SdohDomain::from_code(c).unwrap()).collect();
        assert!((cohen_kappa(&a, &b).unwrap() - oracle::kappa(&a_codes, &b_codes)).abs() < tolerance);

        // Multi-rater alpha.
        let raters = rng.random_range(2..=4usize);
        let rows_codes: Vec<Vec<u8>> = (0..raters)
            .map(|_| (0..n).map(|_| rng.random_range(1..=5u8)).collect())
            .collect();
        let rows: Vec<Vec<SdohDomain>> = rows_codes
            .iter()
            .map(|row| row.iter().map(|&c| SdohDomain::from_code(c).unwrap()).collect())
            .collect();
        assert!(
            (krippendorff_alpha(&rows).unwrap() - oracle::alpha(&rows_codes)).abs() < tolerance
        );

        // AUROC and F1 need both classes; draw from a coarse grid for ties.
        if n >= 2 {
            let labels: Vec<u8> = loop {
                let candidate: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1u8)).collect();
                if candidate.iter().any(|&y| y == 1) && candidate.iter().any(|&y| y == 0) {
                    break candidate;
                }
            };
            let scores: Vec<f64> = (0..n)
                .map(|_| rng.random_range(0..=10u32) as f64 / 10.0)
                .collect();
            assert!(
                (auroc(&scores, &labels).unwrap() - oracle::auroc_pairs(&scores, &labels)).abs()
                    < tolerance
            );
            assert!(
                (f1_binary(&scores, &labels, 0.5).unwrap() - oracle::f1(&scores, &labels, 0.5))
                    .abs()
                    < tolerance
            );
        }
    }
    println!("criterion 3 (metric oracle equivalence, 1000 random instances at 1e-12): PASS");
}

#[test]
fn criterion_4_agreement_fixtures() {
    // Identical labelings: exact unity.
    let identical: Vec<SdohDomain> = (0..50)
        .map(|i| SdohDomain::ALL[i % 5])
        .collect();
    assert_eq!(cohen_kappa(&identical, &identical).unwrap(), 1.0);
    assert_eq!(
        krippendorff_alpha(&[identical.clone(), identical.clone(), identical]).unwrap(),
        1.0
    );

    // Independent uniform labelings: kappa near zero.
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let n = 100_000;
    let a: Vec<SdohDomain> = (0..n)
        .map(|_| SdohDomain::from_code(rng.random_range(1..=5u8)).unwrap())
        .collect();
    let b: Vec<SdohDomain> = (0..n)
        .map(|_| SdohDomain::from_code(rng.random_range(1..=5u8)).unwrap())
        .collect();
    let kappa = cohen_kappa(&a, &b).unwrap();
    assert!(
        (-0.02..=0.02).contains(&kappa),
        "independent raters gave kappa {kappa}"
    );

    // Data-dependent check against a published 3-annotator dictionary,
    // exercised only when the file is supplied.
    match std::env::var("SDOH_NANDA_DICTIONARY") {
        Ok(path) => {
            let catalog = sdoh_core::catalog::load_dictionary(&path, "NaNDA").unwrap();
            let report = sdoh_core::eval::agreement_report(&catalog).unwrap();
            assert!(
                (report.mean_kappa - 0.19).abs() <= 0.02,
                "mean kappa {} outside 0.19 +/- 0.02",
                report.mean_kappa
            );
            assert!(
                (report.alpha - 0.0269).abs() <= 0.005,
                "alpha {} outside 0.0269 +/- 0.005",
                report.alpha
            );
            println!("criterion 4 (agreement fixtures + published 3-annotator file): PASS");
        }
        Err(_) => {
            println!(
                "criterion 4 (agreement fixtures; published-file check skipped, set SDOH_NANDA_DICTIONARY to enable): PASS"
            );
        }
    }
}

fn counted_panel(dataset_id: &str, counts: &[(SdohDomain, usize)]) -> SdohPanel {
    let mut features = Vec::new();
    for (domain, count) in counts {
        for i in 0..*count {
            features.push((format!("{}_{}_{i}", dataset_id, domain.code()), *domain));
        }
    }
    let tract = TractFips::parse("13089021000").unwrap();
    let width = features.len();
    let cells = vec![
        (tract.clone(), 2015, (0..width).map(|i| Some(i as f64)).collect()),
        (tract, 2016, vec![None; width]),
    ];
    SdohPanel::new(dataset_id, features, cells).unwrap()
}

#[test]
fn criterion_5_integration_properties() {
    // Worked forward-fill rule: a 2016 gap is filled from 2015.
    let panel = counted_panel("P", &[(SdohDomain::SocialCommunity, 2)]);
    let key = TractYearKey {
        tract: TractFips::parse("13089021000").unwrap(),
        year: 2016,
    };
    assert_eq!(panel.forward_fill_lookup(&key), vec![Some(0.0), Some(1.0)]);

    // Randomized no-future-dependence check: truncating all later years
    // never changes a lookup.
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for _ in 0..200 {
        let features = vec![
            ("x".to_string(), SdohDomain::SocialCommunity),
            ("y".to_string(), SdohDomain::EducationAccess),
        ];
        let tract = TractFips::parse("01001020100").unwrap();
        let mut cells = Vec::new();
        for year in 2010..2018 {
            if rng.random_range(0..3) > 0 {
                let row: Vec<Option<f64>> = (0..2)
                    .map(|_| (rng.random_range(0..3) > 0).then(|| rng.random_range(-5.0..5.0)))
                    .collect();
                cells.push((tract.clone(), year, row));
            }
        }
        let query_year = rng.random_range(2010..2018);
        let full = SdohPanel::new("P", features.clone(), cells.clone()).unwrap();
        let truncated = SdohPanel::new(
            "P",
            features,
            cells.into_iter().filter(|(_, y, _)| *y <= query_year).collect(),
        )
        .unwrap();
        let key = TractYearKey {
            tract: tract.clone(),
            year: query_year,
        };
        assert_eq!(
            full.forward_fill_lookup(&key),
            truncated.forward_fill_lookup(&key)
        );
    }

    // Merged column counts are the raw sums of clinical and filtered panel
    // widths (no silent column dropping or reconciliation).
    let ahrq = counted_panel(
        "AHRQ",
        &[
            (SdohDomain::SocialCommunity, 129),
            (SdohDomain::EconomicStability, 224),
            (SdohDomain::EducationAccess, 10),
            (SdohDomain::BuiltEnvironment, 94),
            (SdohDomain::HealthcareAccess, 49),
        ],
    );
    let nanda = counted_panel(
        "NaNDA",
        &[
            (SdohDomain::SocialCommunity, 1),
            (SdohDomain::EducationAccess, 157),
            (SdohDomain::BuiltEnvironment, 65),
        ],
    );
    let patients = PatientTable {
        clinical_columns: (0..36).map(|i| format!("clin_{i}")).collect(),
        patients: vec![PatientRecord {
            patient_id: "p0".to_string(),
            tract_fips: "13089021000".to_string(),
            index_year: 2016,
            clinical: vec![Some(0.0); 36],
            outcome: 0,
        }],
    };
    for (domain, expected) in [
        (SdohDomain::SocialCommunity, 36 + 129 + 1),
        (SdohDomain::EducationAccess, 36 + 10 + 157),
        (SdohDomain::BuiltEnvironment, 36 + 94 + 65),
    ] {
        let domains: BTreeSet<SdohDomain> = [domain].into();
        let design = merge(&patients, &[ahrq.clone(), nanda.clone()], &domains).unwrap();
        assert_eq!(design.n_columns(), expected, "domain {domain}");
    }
    println!("criterion 5 (forward-fill rule, no-future dependence, raw merge column sums): PASS");
}

/// Two spherical Gaussian classes, one per mean.
fn gaussian_design(
    n: usize,
    d: usize,
    separation: f64,
    seed: u64,
) -> sdoh_core::merge::DesignMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as u8;
        let mean = if label == 1 { separation } else { 0.0 };
        // Box-Muller pairs.
        let row: Vec<Option<f64>> = (0..d)
            .map(|_| {
                let u1: f64 = rng.random_range(1e-12..1.0);
                let u2: f64 = rng.random_range(0.0..1.0);
                let normal = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                Some(mean + normal)
            })
            .collect();
        rows.push(row);
        outcomes.push(label);
    }
    sdoh_core::merge::DesignMatrix {
        columns: (0..d).map(|i| format!("g{i}")).collect(),
        provenance: (0..d)
            .map(|i| sdoh_core::merge::ColumnProvenance {
                name: format!("g{i}"),
                source: "clinical".to_string(),
                domain: None,
                max_fill_years: 0,
                filled_cells: n,
                missing_cells: 0,
            })
            .collect(),
        patient_ids: (0..n).map(|i| format!("p{i}")).collect(),
        rows,
        outcomes,
    }
}

#[test]
fn criterion_6_prediction_harness() {
    let start = Instant::now();

    // Analytic gradient vs central finite differences at 10 random points.
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let n = 60;
    let d = 4;
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..=1u8)).collect();
    let lambda = 1.3;
    for _ in 0..10 {
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.5..1.5)).collect();
        let b: f64 = rng.random_range(-1.5..1.5);
        let (_, grad) = objective_and_gradient(&x, &y, &w, b, lambda);
        let h = 1e-6;
        for j in 0..=d {
            let perturb = |sign: f64| {
                let mut w2 = w.clone();
                let mut b2 = b;
                if j < d {
                    w2[j] += sign * h;
                } else {
                    b2 += sign * h;
                }
                objective_and_gradient(&x, &y, &w2, b2, lambda).0
            };
            let numeric = (perturb(1.0) - perturb(-1.0)) / (2.0 * h);
            let denom = numeric.abs().max(grad[j].abs()).max(1e-8);
            assert!(
                ((numeric - grad[j]) / denom).abs() < 1e-4,
                "gradient component {j} off: numeric {numeric} vs analytic {}",
                grad[j]
            );
        }
    }

    // Well-separated Gaussians: high AUROC under 10-fold CV.
    let design = gaussian_design(2000, 10, 1.0, 42);
    let config = TrainConfig {
        seed: 7,
        ..TrainConfig::default()
    };
    let result = cross_validate(&design, 10, &config).unwrap();
    assert!(
        result.mean_auroc > 0.95,
        "separable data scored AUROC {}",
        result.mean_auroc
    );

    // Label shuffle: chance-level AUROC.
    let mut shuffled = design.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for i in (1..shuffled.outcomes.len()).rev() {
        let j = rng.random_range(0..=i);
        shuffled.outcomes.swap(i, j);
    }
    let null_result = cross_validate(&shuffled, 10, &config).unwrap();
    assert!(
        (null_result.mean_auroc - 0.5).abs() <= 0.05,
        "shuffled labels scored AUROC {}",
        null_result.mean_auroc
    );

    // Leakage: perturbing a row changes nothing in the fold where that row
    // is held out, because per-fold statistics come from training rows only.
    let small = gaussian_design(200, 3, 0.8, 9);
    let folds = stratified_folds(&small.outcomes, 10, config.seed).unwrap();
    let perturbed_row = 17usize;
    let mut perturbed = small.clone();
    for cell in &mut perturbed.rows[perturbed_row] {
        *cell = Some(cell.unwrap() + 1000.0);
    }
    let base_cv = cross_validate(&small, 10, &config).unwrap();
    let perturbed_cv = cross_validate(&perturbed, 10, &config).unwrap();
    let holdout_fold = folds
        .iter()
        .position(|fold| fold.contains(&perturbed_row))
        .expect("row is in exactly one fold");
    assert_eq!(
        base_cv.fold_models[holdout_fold], perturbed_cv.fold_models[holdout_fold],
        "test-row perturbation leaked into fold statistics"
    );
    assert_eq!(
        base_cv.fold_auroc[holdout_fold],
        perturbed_cv.fold_auroc[holdout_fold]
    );

    // t-distribution CDF against published table quantiles.
    for (t, df, expected) in [
        (2.262, 9.0, 0.975),
        (1.833, 9.0, 0.95),
        (3.250, 9.0, 0.995),
        (2.776, 4.0, 0.975),
        (12.706, 1.0, 0.975),
    ] {
        let got = student_t_cdf(t, df);
        assert!(
            (got - expected).abs() < 1e-3,
            "CDF({t}, {df}) = {got}, expected {expected}"
        );
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "harness took {elapsed:?}");
    println!(
        "criterion 6 (prediction harness: gradients, AUROC bounds, leakage, t-table in {:.1}s): PASS",
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_7_scripted_replay() {
    // Anyone with a real endpoint runs the same sweep against live models;
    // here the recorded transcripts stand in for them, keyed by the exact
    // prompt bytes.
    let record = common::aden_491();
    let zero_prompt = build_prompt(&record, &PromptSpec::zero_shot(FieldSubset::ABC));
    let one_prompt = build_prompt(
        &record,
        &PromptSpec::one_shot(FieldSubset::ABC, ExemplarSet::builtin()),
    );

    for entry in appendix_corpus() {
        let prompt = if entry.shots == 0 {
            &zero_prompt
        } else {
            &one_prompt
        };
        let mut script = HashMap::new();
        script.insert(prompt_sha256(prompt), entry.text.to_string());
        let server = MockServer::spawn(MockMode::Scripted(script)).unwrap();
        let client =
            LlmClient::new(&server.endpoint(), entry.model).with_retry(RetryPolicy::immediate(3));
        let response = client.complete(prompt).unwrap();
        assert_eq!(
            response.text, entry.text,
            "replayed text differs for {} {}-shot",
            entry.model, entry.shots
        );
        assert_eq!(
            parse_response(&response.text).outcome,
            expected_outcome(entry.expected)
        );
    }
    println!("criterion 7 (scripted replay of 18 recorded transcripts, byte-identical): PASS");
}

#[test]
fn criterion_8_determinism() {
    let catalog = synthetic_catalog(30);
    let server = MockServer::spawn(MockMode::GoldEcho(catalog.clone())).unwrap();
    let cache_dir = tempfile::tempdir().unwrap();
    let cache = sdoh_core::client::ResponseCache::open(cache_dir.path()).unwrap();
    let client =
        LlmClient::new(&server.endpoint(), "det-model").with_retry(RetryPolicy::immediate(3));
    let subsets = [FieldSubset::A, FieldSubset::BC, FieldSubset::ABC];

    let emit = |label: &str| -> (Vec<u8>, Vec<Vec<u8>>, Vec<u8>) {
        let dispatcher = Dispatcher::new(&client).with_cache(&cache).with_concurrency(4);
        let runs = run_sweep(&catalog, &subsets, 0, None, &dispatcher).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let jobs_path = dir.path().join(format!("jobs_{label}.jsonl"));
        write_jobs_jsonl(&runs, &jobs_path).unwrap();
        let mut parsed_files = Vec::new();
        for run in &runs {
            let path = dir.path().join(format!("parsed_{}_{label}.jsonl", run.subset));
            write_parsed_jsonl(run, &path).unwrap();
            parsed_files.push(std::fs::read(&path).unwrap());
        }
        let report_path = dir.path().join(format!("report_{label}.json"));
        RunReport::from_runs(&runs).write_json(&report_path).unwrap();
        (
            std::fs::read(&jobs_path).unwrap(),
            parsed_files,
            std::fs::read(&report_path).unwrap(),
        )
    };

    // Cold run populates the cache; the next two must hit it exclusively.
    let cold = emit("cold");
    let requests_after_cold = server.request_count();
    let warm_a = emit("warm_a");
    let warm_b = emit("warm_b");
    assert_eq!(
        server.request_count(),
        requests_after_cold,
        "warm runs performed network calls"
    );

    assert_eq!(warm_a.0, warm_b.0, "jobs files differ between warm runs");
    assert_eq!(warm_a.1, warm_b.1, "parsed files differ between warm runs");
    assert_eq!(warm_a.2, warm_b.2, "report files differ between warm runs");
    // Parsed outcomes and reports carry no timing, so even the cold run
    // emits identical bytes.
    assert_eq!(cold.1, warm_a.1);
    assert_eq!(cold.2, warm_a.2);
    println!("criterion 8 (byte-identical artifacts across warm cached runs, zero network calls): PASS");
}
