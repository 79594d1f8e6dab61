//! `sdoh merge`: join domain-filtered tract panels onto patient records and
//! write the design matrix plus its provenance sidecar.

use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::Args;

use sdoh_core::catalog::{load_dictionary, SdohDomain};
use sdoh_core::manifest::RunManifest;
use sdoh_core::merge::{load_patients, merge, write_design, write_provenance};
use sdoh_core::panel::SdohPanel;

use crate::error::CliError;
use crate::Context;

#[derive(Args)]
pub struct MergeArgs {
    /// Patient CSV (patient_id, tract_fips, index_year, outcome, clinical...).
    #[arg(long)]
    patients: Option<PathBuf>,
    /// Panel spec `values.csv:annotations.csv:DATASET_ID`; repeatable.
    #[arg(long = "panel", value_name = "VALUES:ANNOTATIONS:ID")]
    panels: Vec<String>,
    /// Comma-separated domain codes to keep (default: all five).
    #[arg(long)]
    domains: Option<String>,
}

fn parse_domains(raw: &str) -> Result<BTreeSet<SdohDomain>, CliError> {
    let mut domains = BTreeSet::new();
    for part in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let code: u8 = part
            .parse()
            .map_err(|_| CliError::Usage(format!("bad domain code {part:?}")))?;
        domains.insert(
            SdohDomain::from_code(code)
                .ok_or_else(|| CliError::Usage(format!("domain code {code} outside 1-5")))?,
        );
    }
    if domains.is_empty() {
        return Err(CliError::Usage("--domains selected nothing".into()));
    }
    Ok(domains)
}

pub fn run(ctx: &Context, args: MergeArgs) -> Result<(), CliError> {
    let patients_path = args
        .patients
        .or_else(|| ctx.config.get("patients").map(PathBuf::from))
        .ok_or_else(|| CliError::Usage("--patients is required".into()))?;
    let domains = match args.domains.as_deref().or_else(|| ctx.config.get("domains")) {
        Some(raw) => parse_domains(raw)?,
        None => SdohDomain::ALL.into_iter().collect(),
    };

    let mut manifest = RunManifest::begin("merge", ctx.seed);
    let mut panels = Vec::new();
    for spec in &args.panels {
        let parts: Vec<&str> = spec.split(':').collect();
        let [values, annotations, dataset_id] = parts.as_slice() else {
            return Err(CliError::Usage(format!(
                "bad --panel spec {spec:?}; expected values.csv:annotations.csv:DATASET_ID"
            )));
        };
        let sidecar = load_dictionary(annotations, dataset_id)?;
        panels.push(SdohPanel::load(values, &sidecar, dataset_id)?);
        manifest.add_input(values)?;
        manifest.add_input(annotations)?;
    }

    let patients = load_patients(&patients_path)?;
    manifest.add_input(&patients_path)?;
    let design = merge(&patients, &panels, &domains)?;

    std::fs::create_dir_all(&ctx.out_dir)?;
    let design_path = ctx.out_dir.join("design.csv");
    let provenance_path = ctx.out_dir.join("provenance.json");
    write_design(&design, &design_path)?;
    write_provenance(&design, &provenance_path)?;
    manifest.add_output(&design_path);
    manifest.add_output(&provenance_path);
    manifest.finish();
    manifest.write_json(ctx.out_dir.join("manifest.json"))?;

    println!(
        "merged {} patients x {} columns ({} clinical + {} panel)",
        design.n_rows(),
        design.n_columns(),
        design.columns_from_sources(&["clinical"]).len(),
        design.n_columns() - design.columns_from_sources(&["clinical"]).len(),
    );
    for source in design.panel_sources() {
        println!(
            "  {source}: {} columns",
            design.columns_from_sources(&[&source]).len()
        );
    }
    Ok(())
}
