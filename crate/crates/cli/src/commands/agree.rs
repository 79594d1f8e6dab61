//! `sdoh agree`: pairwise kappas, Krippendorff's alpha, and majority-vote
//! consensus over a dictionary's annotator columns.

use std::path::PathBuf;

use clap::Args;

use sdoh_core::catalog::load_dictionary;
use sdoh_core::eval::agreement_report;
use sdoh_core::manifest::RunManifest;
use sdoh_core::report::render_agreement;

use crate::error::CliError;
use crate::Context;

#[derive(Args)]
pub struct AgreeArgs {
    /// Dictionary CSV with annotator_1..annotator_k columns.
    #[arg(long)]
    dictionary: Option<PathBuf>,
    #[arg(long)]
    dataset_id: Option<String>,
}

pub fn run(ctx: &Context, args: AgreeArgs) -> Result<(), CliError> {
    let dictionary = args
        .dictionary
        .or_else(|| ctx.config.get("dictionary").map(PathBuf::from))
        .ok_or_else(|| CliError::Usage("--dictionary is required".into()))?;
    let dataset_id = args
        .dataset_id
        .or_else(|| ctx.config.get("dataset_id").map(String::from))
        .unwrap_or_else(|| "DICT".to_string());

    let catalog = load_dictionary(&dictionary, &dataset_id)?;
    let mut manifest = RunManifest::begin("agree", ctx.seed);
    manifest.add_input(&dictionary)?;
    let report = agreement_report(&catalog)?;
    let rendered = render_agreement(&report);

    std::fs::create_dir_all(&ctx.out_dir)?;
    let json_path = ctx.out_dir.join("agreement.json");
    std::fs::write(
        &json_path,
        serde_json::to_string_pretty(&report).expect("agreement serializes"),
    )?;
    manifest.add_output(&json_path);
    let txt_path = ctx.out_dir.join("agreement.txt");
    std::fs::write(&txt_path, &rendered)?;
    manifest.add_output(&txt_path);
    manifest.finish();
    manifest.write_json(ctx.out_dir.join("manifest.json"))?;

    print!("{rendered}");
    Ok(())
}
