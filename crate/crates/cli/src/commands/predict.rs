//! `sdoh predict`: stratified k-fold logistic regression over a merged
//! design matrix, one row per feature set, with paired t-tests against a
//! baseline set.

use std::path::PathBuf;

use clap::Args;

use sdoh_core::manifest::RunManifest;
use sdoh_core::merge::{load_design, DesignMatrix};
use sdoh_core::predict::{cross_validate, CvResult, TrainConfig};
use sdoh_core::report::{render_predict_table, PredictRow};
use sdoh_core::stats::{paired_t_test, StatsError};

use crate::error::CliError;
use crate::Context;

#[derive(Args)]
pub struct PredictArgs {
    /// Design matrix CSV written by `sdoh merge`.
    #[arg(long)]
    design: Option<PathBuf>,
    /// Provenance sidecar JSON written by `sdoh merge`.
    #[arg(long)]
    provenance: Option<PathBuf>,
    /// Number of cross-validation folds.
    #[arg(long)]
    folds: Option<usize>,
    /// Ridge penalty strength.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Feature set the t-tests compare against.
    #[arg(long)]
    baseline: Option<String>,
}

/// Feature sets in presentation order: clinical, each panel source alone,
/// then clinical plus all panels.
fn feature_sets(design: &DesignMatrix) -> Vec<(String, Vec<usize>)> {
    let mut sets = Vec::new();
    sets.push((
        "clinical".to_string(),
        design.columns_from_sources(&["clinical"]),
    ));
    let sources = design.panel_sources();
    for source in &sources {
        sets.push((source.clone(), design.columns_from_sources(&[source])));
    }
    if !sources.is_empty() {
        let mut all: Vec<&str> = vec!["clinical"];
        all.extend(sources.iter().map(String::as_str));
        let name = all.join("+");
        sets.push((name, design.columns_from_sources(&all)));
    }
    sets.retain(|(_, columns)| !columns.is_empty());
    sets
}

fn test_against(
    baseline: &CvResult,
    candidate: &CvResult,
) -> Result<(Option<f64>, String, Option<f64>, String), CliError> {
    let auroc = match paired_t_test(&baseline.fold_auroc, &candidate.fold_auroc) {
        Ok(result) => (Some(result.p_value), result.stars),
        Err(StatsError::ZeroVariance) => (None, String::new()),
        Err(err) => return Err(err.into()),
    };
    let f1 = match paired_t_test(&baseline.fold_f1, &candidate.fold_f1) {
        Ok(result) => (Some(result.p_value), result.stars),
        Err(StatsError::ZeroVariance) => (None, String::new()),
        Err(err) => return Err(err.into()),
    };
    Ok((auroc.0, auroc.1, f1.0, f1.1))
}

pub fn run(ctx: &Context, args: PredictArgs) -> Result<(), CliError> {
    let design_path = args
        .design
        .or_else(|| ctx.config.get("design").map(PathBuf::from))
        .ok_or_else(|| CliError::Usage("--design is required".into()))?;
    let provenance_path = args
        .provenance
        .or_else(|| ctx.config.get("provenance").map(PathBuf::from))
        .ok_or_else(|| CliError::Usage("--provenance is required".into()))?;
    let folds = match args.folds {
        Some(k) => k,
        None => ctx.config.parse::<usize>("folds")?.unwrap_or(10),
    };
    let baseline_name = args
        .baseline
        .or_else(|| ctx.config.get("baseline").map(String::from))
        .unwrap_or_else(|| "clinical".to_string());
    let config = TrainConfig {
        lambda: match args.lambda {
            Some(v) => v,
            None => ctx.config.parse::<f64>("lambda")?.unwrap_or(1.0),
        },
        tolerance: match args.tolerance {
            Some(v) => v,
            None => ctx.config.parse::<f64>("tolerance")?.unwrap_or(1e-6),
        },
        max_iterations: match args.max_iterations {
            Some(v) => v,
            None => ctx.config.parse::<usize>("max_iterations")?.unwrap_or(5000),
        },
        seed: ctx.seed,
    };

    let design = load_design(&design_path, &provenance_path)?;
    let mut manifest = RunManifest::begin("predict", ctx.seed);
    manifest.add_input(&design_path)?;
    manifest.add_input(&provenance_path)?;
    let sets = feature_sets(&design);
    if !sets.iter().any(|(name, _)| *name == baseline_name) {
        return Err(CliError::Usage(format!(
            "baseline {baseline_name:?} is not one of the feature sets: {}",
            sets.iter()
                .map(|(name, _)| name.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }

    // Folds depend only on outcomes and the seed, so every feature set sees
    // the identical split and paired tests are valid.
    let mut results: Vec<(String, usize, CvResult)> = Vec::new();
    for (name, columns) in &sets {
        let projected = design.project(columns);
        let result = cross_validate(&projected, folds, &config)?;
        results.push((name.clone(), columns.len(), result));
    }
    let baseline_result = results
        .iter()
        .find(|(name, _, _)| *name == baseline_name)
        .map(|(_, _, result)| result.clone())
        .expect("baseline checked above");

    let mut rows = Vec::new();
    for (name, n_features, result) in &results {
        let (auroc_p, auroc_stars, f1_p, f1_stars) = if *name == baseline_name {
            (None, String::new(), None, String::new())
        } else {
            test_against(&baseline_result, result)?
        };
        rows.push(PredictRow {
            feature_set: name.clone(),
            n_features: *n_features,
            mean_auroc: result.mean_auroc,
            mean_f1: result.mean_f1,
            auroc_stars,
            f1_stars,
            auroc_p,
            f1_p,
        });
    }

    let rendered = render_predict_table(&rows, &baseline_name);
    std::fs::create_dir_all(&ctx.out_dir)?;
    let json_path = ctx.out_dir.join("predict_report.json");
    std::fs::write(
        &json_path,
        serde_json::to_string_pretty(&rows).expect("rows serialize"),
    )?;
    manifest.add_output(&json_path);
    let txt_path = ctx.out_dir.join("predict_report.txt");
    std::fs::write(&txt_path, &rendered)?;
    manifest.add_output(&txt_path);
    manifest.finish();
    manifest.write_json(ctx.out_dir.join("manifest.json"))?;

    print!("{rendered}");
    Ok(())
}
