//! Plain-text report rendering: model-by-subset score tables, refusal and
//! non-response companions, throughput, agreement, and prediction summaries.

use crate::catalog::FieldSubset;
use crate::eval::AgreementReport;
use crate::manifest::ThroughputStats;
use crate::run::RunReport;

/// Mean human annotation time per variable, in seconds, used as the
/// throughput comparison baseline.
pub const HUMAN_SECONDS_PER_VARIABLE: f64 = 12.5;

const MODEL_WIDTH: usize = 26;
const CELL_WIDTH: usize = 7;

fn header_row(title: &str) -> String {
    let mut line = format!("{title:<MODEL_WIDTH$}");
    for subset in FieldSubset::ALL {
        line.push_str(&format!("{:>CELL_WIDTH$}", subset.label()));
    }
    line
}

fn value_row(label: &str, values: impl Iterator<Item = Option<f64>>) -> String {
    let mut line = format!("{label:<MODEL_WIDTH$}");
    for value in values {
        match value {
            Some(v) => line.push_str(&format!("{v:>CELL_WIDTH$.3}")),
            None => line.push_str(&format!("{:>CELL_WIDTH$}", "-")),
        }
    }
    line
}

fn shots_heading(shots: u8) -> &'static str {
    if shots == 0 {
        "Zero-shot"
    } else {
        "1-shot"
    }
}

fn section<F>(title: &str, reports: &[&RunReport], cell: F) -> String
where
    F: Fn(&RunReport, FieldSubset) -> Option<f64>,
{
    let mut out = String::new();
    let mut shots_seen: Vec<u8> = reports.iter().map(|r| r.shots).collect();
    shots_seen.sort_unstable();
    shots_seen.dedup();
    out.push_str(title);
    out.push('\n');
    for shots in shots_seen {
        out.push_str(&format!("{}\n", shots_heading(shots)));
        out.push_str(&header_row("model"));
        out.push('\n');
        for report in reports.iter().filter(|r| r.shots == shots) {
            let values = FieldSubset::ALL.iter().map(|&s| cell(report, s));
            out.push_str(&value_row(&report.model_id, values));
            out.push('\n');
        }
    }
    out
}

/// Micro F1 table, one row per model, stacked by shots.
pub fn render_f1_table(reports: &[&RunReport]) -> String {
    section("Micro F1 by prompt context", reports, |report, subset| {
        report.micro_f1(subset)
    })
}

/// Refusal-rate table in the same layout.
pub fn render_refusal_table(reports: &[&RunReport]) -> String {
    section("Refusal rate by prompt context", reports, |report, subset| {
        report
            .subsets
            .iter()
            .find(|s| s.subset == subset)
            .map(|s| s.refusal_rate)
    })
}

/// Non-response-rate table in the same layout.
pub fn render_nonresponse_table(reports: &[&RunReport]) -> String {
    section(
        "Non-response rate by prompt context",
        reports,
        |report, subset| {
            report
                .subsets
                .iter()
                .find(|s| s.subset == subset)
                .map(|s| s.nonresponse_rate)
        },
    )
}

/// All three tables.
pub fn render_full_report(reports: &[&RunReport]) -> String {
    format!(
        "{}\n{}\n{}",
        render_f1_table(reports),
        render_refusal_table(reports),
        render_nonresponse_table(reports)
    )
}

/// One line comparing machine throughput to the human baseline.
pub fn render_throughput(model_id: &str, stats: &ThroughputStats) -> String {
    format!(
        "{model_id}: {} variables in {:.1}s ({:.2}s/variable; human baseline {HUMAN_SECONDS_PER_VARIABLE}s/variable; {} of {} responses from cache)",
        stats.variables, stats.total_seconds, stats.seconds_per_variable, stats.cache_hits, stats.requests
    )
}

/// Agreement summary: pairwise kappa matrix, mean kappa, alpha, tie count.
pub fn render_agreement(report: &AgreementReport) -> String {
    let raters = report.pairwise_kappa.len();
    let mut out = String::from("Pairwise Cohen's kappa\n");
    out.push_str(&format!("{:<12}", ""));
    for j in 0..raters {
        out.push_str(&format!("{:>12}", format!("annotator_{}", j + 1)));
    }
    out.push('\n');
    for (i, row) in report.pairwise_kappa.iter().enumerate() {
        out.push_str(&format!("{:<12}", format!("annotator_{}", i + 1)));
        for value in row {
            out.push_str(&format!("{value:>12.4}"));
        }
        out.push('\n');
    }
    out.push_str(&format!("mean kappa: {:.4}\n", report.mean_kappa));
    out.push_str(&format!("Krippendorff's alpha: {:.4}\n", report.alpha));
    let decided = report.consensus.iter().flatten().count();
    out.push_str(&format!(
        "consensus: {decided} of {} items decided by majority; {} ties",
        report.consensus.len(),
        report.ties.len()
    ));
    if !report.ties.is_empty() {
        out.push_str(&format!("\nties: {}", report.ties.join(", ")));
    }
    out.push('\n');
    out
}

/// One row of a prediction comparison table.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PredictRow {
    pub feature_set: String,
    pub n_features: usize,
    pub mean_auroc: f64,
    pub mean_f1: f64,
    pub auroc_stars: String,
    pub f1_stars: String,
    pub auroc_p: Option<f64>,
    pub f1_p: Option<f64>,
}

/// Feature-set comparison table with significance stars against the named
/// baseline.
pub fn render_predict_table(rows: &[PredictRow], baseline: &str) -> String {
    let mut out = format!(
        "{:<28}{:>10}{:>12}{:>12}\n",
        "feature set", "#features", "AUROC", "F1"
    );
    for row in rows {
        out.push_str(&format!(
            "{:<28}{:>10}{:>9.3}{:<3}{:>9.3}{:<3}\n",
            row.feature_set,
            row.n_features,
            row.mean_auroc,
            row.auroc_stars,
            row.mean_f1,
            row.f1_stars
        ));
    }
    out.push_str(&format!(
        "stars: paired t-test vs {baseline} across folds; * p<0.05, ** p<0.01, *** p<0.001\n"
    ));
    out
}
