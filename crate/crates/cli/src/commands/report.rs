//! `sdoh report`: merge one or more completed annotate runs into
//! model-by-subset tables, with refusal/non-response companions and a
//! throughput comparison.

use std::path::PathBuf;

use clap::Args;

use sdoh_core::manifest::RunManifest;
use sdoh_core::report::{render_full_report, render_throughput};
use sdoh_core::run::RunReport;

use crate::error::CliError;
use crate::Context;

#[derive(Args)]
pub struct ReportArgs {
    /// Completed annotate run directories.
    #[arg(value_name = "RUN_DIR", required = true)]
    runs: Vec<PathBuf>,
    /// Also write the merged tables to <out-dir>/report.txt.
    #[arg(long)]
    write: bool,
}

pub fn run(ctx: &Context, args: ReportArgs) -> Result<(), CliError> {
    let mut reports = Vec::new();
    let mut throughput_lines = Vec::new();
    for dir in &args.runs {
        let report = RunReport::load_json(dir.join("report.json"))?;
        if let Ok(manifest) = RunManifest::load_json(dir.join("manifest.json")) {
            if let (Some(model), Some(stats)) = (&manifest.model_id, &manifest.throughput) {
                throughput_lines.push(render_throughput(model, stats));
            }
        }
        reports.push(report);
    }

    // Zero-shot sections first, then 1-shot, models in argument order.
    reports.sort_by_key(|r| r.shots);
    let refs: Vec<&RunReport> = reports.iter().collect();
    let rendered = render_full_report(&refs);
    print!("{rendered}");
    if !throughput_lines.is_empty() {
        println!("Annotation throughput");
        for line in &throughput_lines {
            println!("{line}");
        }
    }

    if args.write {
        std::fs::create_dir_all(&ctx.out_dir)?;
        std::fs::write(ctx.out_dir.join("report.txt"), &rendered)?;
    }
    Ok(())
}
